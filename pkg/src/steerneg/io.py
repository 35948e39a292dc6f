"""JSON files for functionals and assemblages, and the curve CSV.

Matrices are arrays of rows whose entries are ``[re, im]`` pairs.  Files nest
operators as ``[x][a]`` (setting-major); position ``k`` in a list is the
1-based index ``k + 1`` used in diagnostics.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .steering import Assemblage, SteeringFunctional


class InputError(ValueError):
    """Malformed or inconsistent input file."""


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def matrix_from_json(obj, where: str = "matrix") -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise InputError(f"{where}: expected a non-empty array of rows")
    n = len(obj)
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != n:
            raise InputError(f"{where}[{i + 1}]: expected a row of {n} entries")
        for j, e in enumerate(row):
            if (not isinstance(e, list) or len(e) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in e)):
                raise InputError(f"{where}[{i + 1}][{j + 1}]: expected [re, im]")
            out[i, j] = complex(e[0], e[1])
    return out


def _header(doc: dict, where: str) -> tuple[int, int, int]:
    if not isinstance(doc, dict):
        raise InputError(f"{where}: top level must be an object")
    vals = []
    for key in ("m_A", "n_A", "d_B"):
        v = doc.get(key)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise InputError(f"{where}: field '{key}' must be a positive integer")
        vals.append(v)
    return tuple(vals)


def _family_from_json(doc: dict, key: str, where: str) -> np.ndarray:
    m_a, n_a, d_b = _header(doc, where)
    ops = doc.get(key)
    if not isinstance(ops, list) or len(ops) != m_a:
        raise InputError(f"{where}: field '{key}' must list m_A = {m_a} settings")
    out = np.zeros((m_a, n_a, d_b, d_b), dtype=complex)
    for x, per in enumerate(ops):
        if not isinstance(per, list) or len(per) != n_a:
            raise InputError(f"{where}: {key}[{x + 1}] must list n_A = {n_a} outcomes")
        for a, m in enumerate(per):
            mat = matrix_from_json(m, f"{key}[{x + 1}][{a + 1}]")
            if mat.shape != (d_b, d_b):
                raise InputError(f"{where}: {key}[{x + 1}][{a + 1}] is {mat.shape[0]}x{mat.shape[1]}, "
                                 f"expected {d_b}x{d_b}")
            out[x, a] = mat
    return out


def _family_to_json(arr: np.ndarray, key: str) -> dict:
    m_a, n_a, d_b, _ = arr.shape
    return {"m_A": m_a, "n_A": n_a, "d_B": d_b,
            key: [[matrix_to_json(arr[x, a]) for a in range(n_a)] for x in range(m_a)]}


def _load(text: str, where: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{where}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def functional_from_json(doc: dict, where: str = "functional") -> SteeringFunctional:
    F = _family_from_json(doc, "F", where)
    try:
        return SteeringFunctional(F)
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


def assemblage_from_json(doc: dict, where: str = "assemblage") -> Assemblage:
    sigma = _family_from_json(doc, "sigma", where)
    try:
        return Assemblage(sigma)
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


def load_functional(path) -> SteeringFunctional:
    return functional_from_json(_load(Path(path).read_text(), str(path)), str(path))


def load_assemblage(path) -> Assemblage:
    return assemblage_from_json(_load(Path(path).read_text(), str(path)), str(path))


def functional_to_json(F: SteeringFunctional) -> dict:
    return _family_to_json(F.F, "F")


def assemblage_to_json(A: Assemblage) -> dict:
    return _family_to_json(A.sigma, "sigma")


def dumps_family(doc: dict, key: str) -> str:
    """Readable layout: header fields, then one matrix per line."""
    head = ", ".join(f'"{k}": {doc[k]}' for k in ("m_A", "n_A", "d_B"))
    settings = []
    for per in doc[key]:
        mats = ",\n    ".join(json.dumps(m) for m in per)
        settings.append(f"   [\n    {mats}\n   ]")
    return "{" + head + f',\n "{key}": [\n' + ",\n".join(settings) + "\n ]\n}\n"


def save_functional(F: SteeringFunctional, path) -> None:
    Path(path).write_text(dumps_family(functional_to_json(F), "F"))


def save_assemblage(A: Assemblage, path) -> None:
    Path(path).write_text(dumps_family(assemblage_to_json(A), "sigma"))


CURVE_HEADER = ["v", "level", "bound", "status"]


def curve_to_csv(rows) -> str:
    """``rows`` of ``(v, level, bound, status)`` rendered at full precision."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for v, level, bound, status in rows:
        w.writerow([repr(float(v)), int(level), repr(float(bound)), status])
    return buf.getvalue()


def curve_from_csv(text: str) -> list[tuple[float, int, float, str]]:
    reader = csv.reader(_io.StringIO(text))
    header = next(reader, None)
    if header != CURVE_HEADER:
        raise InputError(f"curve CSV: expected header {','.join(CURVE_HEADER)}, got {header}")
    return [(float(v), int(level), float(bound), status) for v, level, bound, status in reader]
