"""JSON and CSV encoders shared by the CLI and the report objects.

Rationals serialize as {"num", "den", "decimal"}; subsets as hex
bit-vectors, little-endian over the vertex index; every writer sorts keys
so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .cube import CubeSubset, ModPForm
from .errors import CubeformsError

SCHEMA = "cubeforms/1"


def rational_json(q: Fraction) -> dict:
    q = Fraction(q)
    return {"num": q.numerator, "den": q.denominator, "decimal": f"{float(q):.12g}"}


def rational_from_json(obj: Any) -> Fraction:
    if isinstance(obj, dict):
        return Fraction(int(obj["num"]), int(obj["den"]))
    return Fraction(str(obj))


def parse_rational(text: str) -> Fraction:
    """Exact parse of decimal strings like '0.1' or ratios like '1/10'."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise CubeformsError(f"cannot parse rational {text!r}") from exc


def subset_json(A: CubeSubset, p: int) -> dict:
    import numpy as np

    packed = np.packbits(A.membership, bitorder="little")
    return {
        "n": A.n,
        "p": p,
        "encoding": "hex-bitvector",
        "data": packed.tobytes().hex(),
    }


def subset_from_json(obj: dict) -> tuple[CubeSubset, int]:
    import numpy as np

    if obj.get("encoding") != "hex-bitvector":
        raise CubeformsError(f"unknown subset encoding {obj.get('encoding')!r}")
    n = int(obj["n"])
    raw = np.frombuffer(bytes.fromhex(obj["data"]), dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")[: 1 << n].astype(bool)
    return CubeSubset(n, bits), int(obj["p"])


def form_json(form: ModPForm) -> dict:
    return {"p": form.p, "n": form.n, "coeffs": list(form.coeffs)}


def form_from_json(obj: dict) -> ModPForm:
    return ModPForm(int(obj["p"]), int(obj["n"]), tuple(int(c) for c in obj["coeffs"]))


def family_json(subsets: Sequence[CubeSubset], p: int, meta: dict | None = None) -> dict:
    out = {
        "schema": SCHEMA,
        "n": subsets[0].n if subsets else 0,
        "p": p,
        "s": len(subsets),
        "subsets": [subset_json(A, p) for A in subsets],
    }
    if meta:
        out["meta"] = meta
    return out


def family_from_json(obj: dict) -> tuple[list[CubeSubset], int]:
    subsets = []
    p = int(obj["p"])
    for item in obj["subsets"]:
        A, _ = subset_from_json(item)
        subsets.append(A)
    return subsets, p


def dump_json(obj: Any, path: "Path | str | None" = None) -> str:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_json(path: "Path | str") -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CubeformsError(f"malformed JSON in {path} at line {exc.lineno}, col {exc.colno}") from exc


def write_csv(path: "Path | str", header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
