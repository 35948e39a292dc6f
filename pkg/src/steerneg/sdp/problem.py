"""Block-structured semidefinite programs in equality (standard primal) form.

A problem has a list of matrix blocks, a linear objective and a list of linear
equalities.  A :class:`LinearFunctional` maps the block variable to the number
``sum_b sum_{r,c} K_b[r, c] * X_b[r, c]``; the coefficient pattern ``K_b`` must
be Hermitian so that the value is real on Hermitian arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np
import scipy.sparse as sp

COMPLEX_PSD = "complex-hermitian-psd"
REAL_PSD = "real-symmetric-psd"
FREE = "free-hermitian"
BLOCK_KINDS = (COMPLEX_PSD, REAL_PSD, FREE)

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal-infeasible"
DUAL_INFEASIBLE = "dual-infeasible"
NUMERICAL_FAILURE = "numerical-failure"

_PATTERN_TOL = 1e-12


@dataclass(frozen=True)
class Block:
    label: str
    dim: int
    kind: str = COMPLEX_PSD

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if int(self.dim) < 1:
            raise ValueError(f"block {self.label!r} must have positive dimension")

    @property
    def is_complex(self) -> bool:
        return self.kind != REAL_PSD


class LinearFunctional:
    """Sparse linear map on the block variable.

    Coefficients are held per block label as a sparse matrix ``K`` with the
    meaning ``value = sum(K * X)``.  Build one with :meth:`from_terms` or
    :meth:`from_matrices`.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[str, sp.spmatrix] | None = None):
        self.coeffs: dict[str, sp.csr_matrix] = {}
        for label, k in (coeffs or {}).items():
            if not (isinstance(k, sp.csr_matrix) and k.dtype == complex):
                k = sp.csr_matrix(k, dtype=complex)
            if k.nnz and not k.data.all():
                k = k.copy()
                k.eliminate_zeros()
            if k.nnz:
                self.coeffs[label] = k

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[str, int, int, complex]], dims: Mapping[str, int]):
        """Build from ``(label, row, col, coefficient)`` tuples; repeated entries add up."""
        rows: dict[str, list] = {}
        for label, r, c, v in terms:
            rows.setdefault(label, []).append((r, c, v))
        coeffs = {}
        for label, entries in rows.items():
            if label not in dims:
                raise KeyError(f"unknown block label {label!r}")
            n = dims[label]
            r, c, v = zip(*entries)
            coeffs[label] = sp.coo_matrix((np.asarray(v, dtype=complex), (r, c)), shape=(n, n)).tocsr()
        return cls(coeffs)

    @classmethod
    def from_matrices(cls, mats: Mapping[str, np.ndarray], trace_form: bool = True):
        """Build from dense matrices.

        With ``trace_form`` (the default) each matrix ``C`` is read as the
        functional ``X -> tr(C X)``, i.e. ``K = C^T``.
        """
        return cls({lab: sp.csr_matrix(np.asarray(m).T if trace_form else np.asarray(m))
                    for lab, m in mats.items()})

    def terms(self) -> Iterator[tuple[str, int, int, complex]]:
        for label, k in self.coeffs.items():
            coo = k.tocoo()
            for r, c, v in zip(coo.row, coo.col, coo.data):
                yield label, int(r), int(c), complex(v)

    def labels(self) -> set[str]:
        return set(self.coeffs)

    def evaluate(self, values: Mapping[str, np.ndarray]) -> float:
        total = 0.0 + 0.0j
        for label, k in self.coeffs.items():
            total += k.multiply(np.asarray(values[label])).sum()
        return float(np.real(total))

    def scaled(self, factor: float) -> "LinearFunctional":
        return LinearFunctional({lab: k * factor for lab, k in self.coeffs.items()})

    def __add__(self, other: "LinearFunctional") -> "LinearFunctional":
        out = dict(self.coeffs)
        for lab, k in other.coeffs.items():
            out[lab] = out[lab] + k if lab in out else k
        return LinearFunctional(out)

    def hermitian_residual(self) -> float:
        worst = 0.0
        for k in self.coeffs.values():
            d = k - k.conj().T
            if d.nnz:
                worst = max(worst, float(np.max(np.abs(d.data))))
        return worst

    def __repr__(self):
        nnz = sum(k.nnz for k in self.coeffs.values())
        return f"LinearFunctional(blocks={sorted(self.coeffs)}, nnz={nnz})"


@dataclass
class SdpProblem:
    """``minimize|maximize objective(X)`` subject to ``eq_k(X) = rhs_k`` and the block cones."""

    blocks: list[Block]
    objective: LinearFunctional
    sense: str = "minimize"
    equalities: list[tuple[LinearFunctional, float]] = field(default_factory=list)
    objective_offset: float = 0.0

    def __post_init__(self):
        if self.sense not in ("minimize", "maximize"):
            raise ValueError(f"sense must be 'minimize' or 'maximize', not {self.sense!r}")
        labels = [b.label for b in self.blocks]
        if len(set(labels)) != len(labels):
            raise ValueError("block labels must be unique")
        dims = self.dims
        for i, fn in enumerate([self.objective] + [f for f, _ in self.equalities]):
            for lab, k in fn.coeffs.items():
                if lab not in dims:
                    raise ValueError(f"functional {i} references unknown block {lab!r}")
                if k.shape != (dims[lab], dims[lab]):
                    raise ValueError(f"functional {i} has wrong shape for block {lab!r}")
                if fn.hermitian_residual() > _PATTERN_TOL * (1 + abs(k).max()):
                    raise ValueError(f"functional {i} has a non-Hermitian coefficient pattern")
                if not self.block(lab).is_complex and k.nnz and np.max(np.abs(k.data.imag)) > 0:
                    raise ValueError(f"functional {i} has complex coefficients on real block {lab!r}")
        for _, rhs in self.equalities:
            if not math.isfinite(rhs):
                raise ValueError("equality right-hand sides must be finite")

    @property
    def dims(self) -> dict[str, int]:
        return {b.label: b.dim for b in self.blocks}

    def block(self, label: str) -> Block:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    @property
    def num_constraints(self) -> int:
        return len(self.equalities)

    @property
    def rhs(self) -> np.ndarray:
        return np.array([r for _, r in self.equalities], dtype=float)

    def is_real(self) -> bool:
        return all(b.kind == REAL_PSD for b in self.blocks)

    def objective_at(self, values: Mapping[str, np.ndarray]) -> float:
        return self.objective.evaluate(values) + self.objective_offset

    def equality_residuals(self, values: Mapping[str, np.ndarray]) -> np.ndarray:
        return np.array([f.evaluate(values) - r for f, r in self.equalities])


@dataclass
class SdpSolution:
    status: str
    objective_value: float
    block_values: dict[str, np.ndarray]
    dual_values: np.ndarray
    primal_residual: float
    dual_residual: float
    duality_gap: float
    iterations: int = 0
    primal_objective: float = float("nan")
    dual_objective: float = float("nan")
    dual_slacks: dict[str, np.ndarray] = field(default_factory=dict)
    history: list[dict] = field(default_factory=list)
    message: str = ""

    @property
    def gaps(self) -> tuple[float, float, float]:
        return self.primal_residual, self.dual_residual, self.duality_gap

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


# --- real embedding -----------------------------------------------------------

def embed_complex(h: np.ndarray) -> np.ndarray:
    """Real symmetric embedding ``[[A, -B], [B, A]]`` of ``H = A + iB``."""
    h = np.asarray(h, dtype=complex)
    a, b = h.real, h.imag
    return np.block([[a, -b], [b, a]])


def unembed_real(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed_complex`, averaging over the two copies."""
    m = np.asarray(m, dtype=float)
    d = m.shape[0] // 2
    a = (m[:d, :d] + m[d:, d:]) / 2
    b = (m[d:, :d] - m[:d, d:]) / 2
    return a + 1j * b


def _embed_coeffs(k: sp.csr_matrix, d: int) -> sp.csr_matrix:
    # value tr(C X) with C = K^T equals tr(embed(C) embed(X)) / 2
    coo = k.tocoo()
    r, c, v = coo.row, coo.col, coo.data
    a, b = v.real / 2, v.imag / 2
    rows = np.concatenate([r, r + d, r, r + d])
    cols = np.concatenate([c, c + d, c + d, c])
    vals = np.concatenate([a, a, b, -b]).astype(complex)
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * d, 2 * d))


def _real_parts(block: Block) -> list[tuple[str, int, float]]:
    """(new label, new dim, sign) for each real block replacing ``block``."""
    dim = block.dim if (block.dim == 1 or block.kind == REAL_PSD) else 2 * block.dim
    if block.kind == FREE:
        return [(block.label + "+", dim, 1.0), (block.label + "-", dim, -1.0)]
    return [(block.label, dim, 1.0)]


def realify(p: SdpProblem) -> SdpProblem:
    """Rewrite ``p`` with real symmetric PSD blocks only.

    Complex Hermitian blocks of dimension ``d > 1`` become ``2d x 2d`` real
    embeddings with halved coefficients, so every functional keeps its value.
    Free blocks are split into a difference ``P - Q`` of PSD blocks labelled
    ``label+`` and ``label-``.
    """
    new_blocks: list[Block] = []
    plan = {}
    for b in p.blocks:
        parts = _real_parts(b)
        plan[b.label] = (b, parts)
        new_blocks.extend(Block(lab, dim, REAL_PSD) for lab, dim, _ in parts)

    def convert(fn: LinearFunctional) -> LinearFunctional:
        out = {}
        for lab, k in fn.coeffs.items():
            b, parts = plan[lab]
            if b.kind == REAL_PSD or b.dim == 1:
                kr = sp.csr_matrix((k.data.real.astype(complex), k.indices, k.indptr), shape=k.shape)
            else:
                kr = _embed_coeffs(k, b.dim)
            for new_lab, _, sign in parts:
                out[new_lab] = kr if sign == 1 else kr * sign
        return LinearFunctional(out)

    return SdpProblem(
        blocks=new_blocks,
        objective=convert(p.objective),
        sense=p.sense,
        equalities=[(convert(f), r) for f, r in p.equalities],
        objective_offset=p.objective_offset,
    )


def unrealify_values(p: SdpProblem, real_values: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Map block values of ``realify(p)`` back onto the blocks of ``p``."""
    out = {}
    for b in p.blocks:
        vals = []
        for lab, _, sign in _real_parts(b):
            m = np.asarray(real_values[lab], dtype=float)
            if b.kind != REAL_PSD and b.dim > 1:
                m = unembed_real(m)
            vals.append(sign * m)
        out[b.label] = sum(vals[1:], vals[0]).astype(complex if b.is_complex else float)
    return out


def split_free_blocks(p: SdpProblem) -> tuple[SdpProblem, dict[str, tuple[str, str]]]:
    """Replace each free block by a PSD pair ``(label+, label-)`` of the same field."""
    if not any(b.kind == FREE for b in p.blocks):
        return p, {}
    pairs = {}
    blocks = []
    for b in p.blocks:
        if b.kind == FREE:
            pairs[b.label] = (b.label + "+", b.label + "-")
            blocks += [Block(b.label + "+", b.dim, COMPLEX_PSD), Block(b.label + "-", b.dim, COMPLEX_PSD)]
        else:
            blocks.append(b)

    def convert(fn: LinearFunctional) -> LinearFunctional:
        out = {}
        for lab, k in fn.coeffs.items():
            if lab in pairs:
                plus, minus = pairs[lab]
                out[plus], out[minus] = k, -k
            else:
                out[lab] = k
        return LinearFunctional(out)

    q = SdpProblem(blocks, convert(p.objective), p.sense,
                   [(convert(f), r) for f, r in p.equalities], p.objective_offset)
    return q, pairs
