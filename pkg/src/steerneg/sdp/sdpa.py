"""SDPA sparse (``.dat-s``) writer and parser.

SDPA stores the pair ``max F0.Y s.t. Fk.Y = c_k, Y >= 0``.  An equality-form
problem ``min <C, X> s.t. <A_k, X> = b_k`` is written with ``F0 = -C``,
``Fk = A_k`` and ``c = b``; a maximisation is written with ``F0 = C``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .problem import REAL_PSD, Block, LinearFunctional, SdpProblem


@dataclass
class SdpaData:
    """Raw content of an SDPA file. ``entries`` are ``(k, block, i, j, value)``, 1-based."""

    c: np.ndarray
    block_sizes: list[int]
    entries: list[tuple[int, int, int, int, float]]

    @property
    def num_constraints(self) -> int:
        return len(self.c)

    def matrices(self) -> list[list[np.ndarray]]:
        """Dense symmetric ``F_k`` per block, ``k = 0..m``."""
        mats = [[np.zeros((abs(s), abs(s))) for s in self.block_sizes] for _ in range(len(self.c) + 1)]
        for k, blk, i, j, v in self.entries:
            f = mats[k][blk - 1]
            f[i - 1, j - 1] = v
            f[j - 1, i - 1] = v
        return mats


def _fmt(v: float) -> str:
    return repr(float(v))


def export_sdpa(p: SdpProblem) -> str:
    """Render a realified problem as SDPA sparse text."""
    bad = [b.label for b in p.blocks if b.kind != REAL_PSD]
    if bad:
        raise ValueError(f"blocks {bad} are not real symmetric; call realify() before exporting")
    index = {b.label: i + 1 for i, b in enumerate(p.blocks)}
    obj_sign = -1.0 if p.sense == "minimize" else 1.0
    lines = [
        str(p.num_constraints),
        str(len(p.blocks)),
        " ".join(str(b.dim) for b in p.blocks),
        " ".join(_fmt(r) for _, r in p.equalities) if p.equalities else "",
    ]
    funcs = [(0, p.objective.scaled(obj_sign))] + [(k + 1, f) for k, (f, _) in enumerate(p.equalities)]
    for k, fn in funcs:
        for lab in sorted(fn.coeffs, key=index.get):
            coo = sp.triu(fn.coeffs[lab].real).tocoo()
            order = np.lexsort((coo.col, coo.row))
            for t in order:
                v = coo.data[t]
                if v != 0:
                    lines.append(f"{k} {index[lab]} {coo.row[t] + 1} {coo.col[t] + 1} {_fmt(v)}")
    return "\n".join(lines) + "\n"


def write_sdpa(p: SdpProblem, path: str | Path) -> None:
    Path(path).write_text(export_sdpa(p))


def parse_sdpa(text: str) -> SdpaData:
    """Parse SDPA sparse text (comment lines and ``{},()`` separators tolerated)."""
    rows = []
    for raw in text.splitlines():
        line = raw.split("*")[0].split('"')[0].strip()
        if raw.lstrip().startswith(('"', "*")):
            continue
        for ch in "{},()":
            line = line.replace(ch, " ")
        rows.append(line.split())
    pos = 0

    def take():
        nonlocal pos
        while pos < len(rows) and not rows[pos]:
            pos += 1
        if pos >= len(rows):
            raise ValueError("unexpected end of SDPA data")
        pos += 1
        return rows[pos - 1]

    m = int(take()[0])
    nblocks = int(take()[0])
    sizes: list[int] = []
    while len(sizes) < nblocks:
        sizes += [int(float(s)) for s in take()]
    c: list[float] = []
    if m:
        while len(c) < m:
            c += [float(s) for s in take()]
    else:
        # the (empty) rhs line
        if pos < len(rows) and not rows[pos]:
            pos += 1
    entries = []
    for r in rows[pos:]:
        if not r:
            continue
        if len(r) != 5:
            raise ValueError(f"malformed SDPA entry line: {' '.join(r)}")
        k, blk, i, j = (int(s) for s in r[:4])
        if i > j:
            i, j = j, i
        entries.append((k, blk, i, j, float(r[4])))
    return SdpaData(np.array(c), sizes, entries)


def read_sdpa(path: str | Path) -> SdpaData:
    return parse_sdpa(Path(path).read_text())


def coefficient_multiset(text_or_data) -> Counter:
    data = parse_sdpa(text_or_data) if isinstance(text_or_data, str) else text_or_data
    return Counter(data.entries)


def sdpa_to_problem(data: SdpaData) -> SdpProblem:
    """Rebuild the SDPA pair as a maximisation ``max F0.Y s.t. Fk.Y = c_k``."""
    labels = [f"b{i + 1}" for i in range(len(data.block_sizes))]
    blocks = [Block(lab, abs(s), REAL_PSD) for lab, s in zip(labels, data.block_sizes)]
    mats = data.matrices()

    def fn(k):
        return LinearFunctional({labels[i]: sp.csr_matrix(f) for i, f in enumerate(mats[k]) if np.any(f)})

    return SdpProblem(blocks, fn(0), "maximize", [(fn(k + 1), float(c)) for k, c in enumerate(data.c)])


def objective_from_sdpa_value(p: SdpProblem, value: float) -> float:
    """Map the optimum of an exported file (``max F0.Y``) back to ``p``'s objective.

    The file drops ``p.objective_offset`` and, for minimisation, flips the sign.
    """
    return (value if p.sense == "maximize" else -value) + p.objective_offset
