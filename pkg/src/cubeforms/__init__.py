"""Exact analysis of mod-p linear form distributions on dense cube subsets."""

from .cube import (
    CubeFn,
    CubeSubset,
    CubeVertex,
    ModPForm,
    coordinate_fn,
    enumerate_forms,
    eval_form,
    form_fn,
    subset_from_constraints,
    support_distance,
)
from .dist import (
    Dist,
    MetricReport,
    check_hierarchy,
    correlation,
    diameter,
    distribution_on,
    metric_report,
    overlap,
    tv,
)
from .errors import (
    BudgetExceeded,
    CubeformsError,
    DimensionMismatch,
    DomainMismatch,
    PreconditionFailed,
    StageEmpty,
)
from .info import (
    Negentropy,
    check_low_negentropy_equidistribution,
    conditional_negentropy,
    entropy,
    negentropy,
    negentropy_markov,
    negentropy_on,
)
from .irreducible import (
    FuncFamily,
    IrreducibleReport,
    check_irreducible_count_bound,
    find_sunflower,
    irreducible_family,
    irreducible_support,
    is_irreducible,
    reduction_chain,
)
from .cover import (
    BiasCover,
    build_bias_cover,
    check_equidistribution_bound,
    check_nonzero_probability_bound,
    default_radius,
    tv_to_uniform,
)
from .select import (
    PipelineReport,
    SelectionParams,
    check_overlap_proposition,
    check_proximity_proposition,
    common_element_metric,
    common_element_sets,
    iterated_extraction,
    pipeline_bounded_support,
    pipeline_correlation,
    pipeline_overlap,
    verify_theorem_correlation,
    verify_theorem_overlap,
)
from .fixtures import (
    FIXTURES,
    fixture_bounded_support_lower,
    fixture_intro_dependence,
    fixture_negative_correlation,
    fixture_no_close_distributions,
)
from .verifiers import recheck_report

__version__ = "0.1.0"
