"""Moment-matrix relaxations bounding negativity from steering data.

Alice's measurements enter only through words in the letters ``A_0 = 1`` and
``A_i = E_{a|x}`` (all outcomes but the last of each setting).  The level-``l``
moment matrix has one ``d_B x d_B`` block per pair of length-``l`` row words
``(u, v)``::

    chi[u, v] = tr_A((A_v^dagger A_u (x) 1) rho),   A_u = A_{u_1} ... A_{u_l},

so the block only depends on the canonical form of ``reverse(v) + u`` under
three rewriting rules: drop ``A_0``, ``A_i A_i -> A_i`` and ``A_i A_j -> 0``
for distinct letters of one setting.  Optimisation variables are one block per
equivalence class, so validity of a moment matrix holds by construction.

Three relaxations are provided: the negativity bound for a known assemblage,
the negativity bound for a known value of a steering functional, and the upper
bound on a functional over PPT states.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import linalg
from .sdp import DUAL_INFEASIBLE, OPTIMAL, PRIMAL_INFEASIBLE, LmiProblem, SdpProblem, SdpSolution, realify, solve
from .sdp.lmi import LmiRecovery
from .steering import Assemblage, Scenario, SteeringFunctional

SIZE_CAP = 512

Word = tuple[int, ...]


class StructureCapError(ValueError):
    pass


# --- word algebra -------------------------------------------------------------

def num_letters(s: Scenario) -> int:
    """``d = (n_A - 1) m_A + 1`` letters including the identity."""
    return (s.n_a - 1) * s.m_a + 1


def letter(s: Scenario, a: int, x: int) -> int:
    """Letter index of ``E_{a|x}`` (0-based ``a < n_A - 1`` and ``x``)."""
    if not (0 <= a < s.n_a - 1 and 0 <= x < s.m_a):
        raise ValueError(f"no letter for outcome a={a}, setting x={x}")
    return x * (s.n_a - 1) + a + 1


def letter_meaning(s: Scenario, i: int) -> tuple[int, int] | None:
    """``(a, x)`` of letter ``i``, or ``None`` for the identity."""
    if i == 0:
        return None
    return (i - 1) % (s.n_a - 1), (i - 1) // (s.n_a - 1)


def reduce_word(w, s: Scenario) -> Word | None:
    """Canonical form of a word, or ``None`` when it reduces to zero."""
    out: list[int] = []
    k = s.n_a - 1
    for i in w:
        if i == 0:
            continue
        if out:
            top = out[-1]
            if top == i:
                continue
            if (top - 1) // k == (i - 1) // k:
                return None
        out.append(i)
    return tuple(out)


def _shortlex(w: Word):
    return (len(w), w)


def canonical_words(s: Scenario, max_len: int) -> list[Word]:
    """Non-zero canonical words of length at most ``max_len`` in shortlex order."""
    d = num_letters(s)
    words = [()]
    frontier = [()]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for i in range(1, d):
                r = reduce_word(w + (i,), s)
                if r is not None and len(r) == len(w) + 1:
                    nxt.append(r)
        words += nxt
        frontier = nxt
    return words


# --- moment structure ----------------------------------------------------------

@dataclass
class MomentStructure:
    """Block layout and equivalence classes of the level-``l`` moment matrix.

    ``row_words`` lists all ``d^l`` rows; ``reduced_rows`` keeps one row per
    distinct non-zero canonical row word, which is the layout used for
    optimisation (duplicate rows carry identical blocks and zero rows vanish,
    so positivity of the two layouts is equivalent).
    """

    scenario: Scenario
    level: int
    row_words: list[Word]
    classes: list[Word]
    block_class: np.ndarray  # (d^l, d^l), -1 marks a zero block
    reduced_rows: list[Word]
    reduced_block_class: np.ndarray

    @property
    def d(self) -> int:
        return num_letters(self.scenario)

    @property
    def num_rows(self) -> int:
        return len(self.row_words)

    @property
    def dim(self) -> int:
        return self.num_rows * self.scenario.d_b

    @property
    def reduced_dim(self) -> int:
        return len(self.reduced_rows) * self.scenario.d_b

    @cached_property
    def class_index(self) -> dict[Word, int]:
        return {w: i for i, w in enumerate(self.classes)}

    def adjoint(self, c: int) -> int:
        return self.class_index[self.classes[c][::-1]]

    def is_self_adjoint(self, c: int) -> bool:
        return self.classes[c] == self.classes[c][::-1]

    @property
    def reduced_class(self) -> int:
        """Class of Bob's reduced state (the empty word)."""
        return self.class_index[()]

    def observable_class(self, a: int, x: int) -> int:
        return self.class_index[(letter(self.scenario, a, x),)]

    @property
    def observable_map(self) -> dict:
        s = self.scenario
        out = {"sigma_r": self.reduced_class}
        for x in range(s.m_a):
            for a in range(s.n_a - 1):
                out[(a, x)] = self.observable_class(a, x)
        return out

    def zero_positions(self) -> list[tuple[int, int]]:
        return [tuple(map(int, p)) for p in np.argwhere(self.block_class < 0)]

    def free_pairs(self) -> list[tuple[int, int]]:
        """Adjoint pairs of non-self-adjoint classes (the unconstrained cross blocks)."""
        out = []
        for c in range(len(self.classes)):
            a = self.adjoint(c)
            if c < a:
                out.append((c, a))
        return out

    def to_json(self) -> str:
        """Debug dump of classes and the zero pattern."""
        return json.dumps({
            "m_A": self.scenario.m_a, "n_A": self.scenario.n_a, "d_B": self.scenario.d_b,
            "level": self.level,
            "row_words": [list(w) for w in self.row_words],
            "classes": [list(w) for w in self.classes],
            "block_class": self.block_class.tolist(),
            "reduced_rows": [list(w) for w in self.reduced_rows],
        })


def build_structure(s: Scenario, level: int, cap: int = SIZE_CAP) -> MomentStructure:
    if level < 1:
        raise ValueError("hierarchy level must be at least 1")
    d = num_letters(s)
    size = d ** level * s.d_b
    if size > cap:
        raise StructureCapError(f"moment matrix of size d^l * d_B = {d}^{level} * {s.d_b} = {size} "
                                f"exceeds the cap of {cap}")
    rows = list(itertools.product(range(d), repeat=level))
    canon = [reduce_word(w, s) for w in rows]

    keys: dict[Word, int] = {}

    def table(row_canon):
        n = len(row_canon)
        out = np.full((n, n), -1, dtype=int)
        for i, u in enumerate(row_canon):
            for j, v in enumerate(row_canon):
                if u is None or v is None:
                    continue
                w = reduce_word(v[::-1] + u, s)
                if w is not None:
                    out[i, j] = keys.setdefault(w, len(keys))
        return out

    full = table(canon)
    reduced_rows = sorted({w for w in canon if w is not None}, key=_shortlex)
    reduced = table(reduced_rows)
    # relabel classes in shortlex order
    order = sorted(keys, key=_shortlex)
    remap = np.array([0] * len(keys))
    for new, w in enumerate(order):
        remap[keys[w]] = new

    def relabel(t):
        return np.where(t >= 0, remap[np.maximum(t, 0)], -1)

    return MomentStructure(s, level, rows, order, relabel(full), reduced_rows, relabel(reduced))


# --- moment matrices -----------------------------------------------------------

@dataclass
class ChiMatrix:
    """Class-indexed blocks of a moment matrix."""

    structure: MomentStructure
    blocks: dict[int, np.ndarray]  # class -> d_B x d_B

    def assemble(self, reduced: bool = False) -> np.ndarray:
        st = self.structure
        table = st.reduced_block_class if reduced else st.block_class
        db = st.scenario.d_b
        n = len(table)
        out = np.zeros((n * db, n * db), dtype=complex)
        for i in range(n):
            for j in range(n):
                c = table[i, j]
                if c >= 0:
                    out[i * db:(i + 1) * db, j * db:(j + 1) * db] = self.blocks[c]
        return out

    @property
    def reduced_state(self) -> np.ndarray:
        return self.blocks[self.structure.reduced_class]

    def t(self) -> float:
        """Trace of the identity-identity block."""
        return float(np.trace(self.reduced_state).real)

    def assemblage_array(self) -> np.ndarray:
        """Observable blocks with the last outcome completed as ``sigma_r - sum_{a<n_A} sigma_{a|x}``."""
        s = self.structure.scenario
        out = np.zeros(s.shape, dtype=complex)
        for x in range(s.m_a):
            for a in range(s.n_a - 1):
                out[x, a] = self.blocks[self.structure.observable_class(a, x)]
            out[x, -1] = self.reduced_state - out[x, :-1].sum(axis=0)
        return out

    def partial_transpose(self) -> "ChiMatrix":
        return ChiMatrix(self.structure, {c: b.T.copy() for c, b in self.blocks.items()})

    def __sub__(self, other: "ChiMatrix") -> "ChiMatrix":
        return ChiMatrix(self.structure, {c: self.blocks[c] - other.blocks[c] for c in self.blocks})


def _word_operator(w, letters_ops, d_a):
    op = np.eye(d_a, dtype=complex)
    for i in w:
        op = op @ letters_ops[i]
    return op


def chi_from_state(rho, projectors, level: int, tol: float = 1e-9,
                   structure: MomentStructure | None = None) -> tuple[ChiMatrix, np.ndarray]:
    """Moment matrix of a state under projective measurements ``projectors[x, a]``.

    Returns the class-indexed :class:`ChiMatrix` and the full ``d^l d_B``
    matrix computed block by block from operator products.
    """
    E = np.asarray(projectors, dtype=complex)
    m_a, n_a, d_a, _ = E.shape
    rho = linalg.hermitian(rho, tol=tol)
    d_b = rho.shape[0] // d_a
    s = Scenario(m_a, n_a, d_b)
    for x in range(m_a):
        for a in range(n_a):
            if np.max(np.abs(E[x, a] @ E[x, a] - E[x, a])) > tol:
                raise ValueError(f"E[x={x + 1}, a={a + 1}] is not a projector; dilate the POVM first")
        if np.max(np.abs(E[x].sum(axis=0) - np.eye(d_a))) > tol:
            raise ValueError(f"measurement x={x + 1} is not complete")
    st = structure or build_structure(s, level)
    ops = [np.eye(d_a, dtype=complex)] + [E[x, a] for x in range(m_a) for a in range(n_a - 1)]
    dims = (d_a, d_b)
    eye_b = np.eye(d_b)
    n = st.num_rows
    full = np.zeros((n * d_b, n * d_b), dtype=complex)
    word_ops = [_word_operator(u, ops, d_a) for u in st.row_words]
    for i in range(n):
        for j in range(n):
            # A_v^dagger A_u with A_v^dagger = A_{v_l} ... A_{v_1}
            op = word_ops[j].conj().T @ word_ops[i]
            full[i * d_b:(i + 1) * d_b, j * d_b:(j + 1) * d_b] = linalg.partial_trace_a(
                linalg.tensor(op, eye_b) @ rho, dims)
    blocks = {}
    for c in range(len(st.classes)):
        i, j = np.argwhere(st.block_class == c)[0]
        blocks[c] = full[i * d_b:(i + 1) * d_b, j * d_b:(j + 1) * d_b].copy()
    return ChiMatrix(st, blocks), full


# --- LMI parametrisation -------------------------------------------------------

class ChiParametrization:
    """Real coordinates for the class blocks of one moment-matrix variable.

    A self-adjoint class carries a Hermitian block (``d_B^2`` coordinates);
    each adjoint pair of other classes carries one complex block
    (``2 d_B^2`` coordinates) whose adjoint fills the partner class.
    """

    def __init__(self, st: MomentStructure):
        self.structure = st
        db = st.scenario.d_b
        self.entries: list[tuple[int, np.ndarray]] = []  # (class, basis matrix)
        self.class_slices: dict[int, slice] = {}
        for c in range(len(st.classes)):
            a = st.adjoint(c)
            if a < c:
                continue
            start = len(self.entries)
            if a == c:
                for r in range(db):
                    self.entries.append((c, _unit(db, r, r)))
                for r in range(db):
                    for q in range(r + 1, db):
                        self.entries.append((c, _unit(db, r, q) + _unit(db, q, r)))
                        self.entries.append((c, 1j * _unit(db, r, q) - 1j * _unit(db, q, r)))
            else:
                for r in range(db):
                    for q in range(db):
                        self.entries.append((c, _unit(db, r, q)))
                        self.entries.append((c, 1j * _unit(db, r, q)))
            self.class_slices[c] = slice(start, len(self.entries))

    @property
    def size(self) -> int:
        return len(self.entries)

    def coordinates(self, c: int, block: np.ndarray) -> np.ndarray:
        """Coordinates of a Hermitian block for self-adjoint class ``c``."""
        db = self.structure.scenario.d_b
        out = [block[r, r].real for r in range(db)]
        for r in range(db):
            for q in range(r + 1, db):
                out += [block[r, q].real, block[r, q].imag]
        return np.array(out)

    def linear_form(self, c: int, m: np.ndarray) -> np.ndarray:
        """Coefficients of ``y -> Re tr(m B_c(y))`` over this variable's coordinates."""
        out = np.zeros(self.size)
        sl = self.class_slices[c]
        for k in range(sl.start, sl.stop):
            out[k] = np.real(np.trace(m @ self.entries[k][1]))
        return out

    def chi(self, y: np.ndarray) -> ChiMatrix:
        st = self.structure
        db = st.scenario.d_b
        blocks = {c: np.zeros((db, db), dtype=complex) for c in range(len(st.classes))}
        for k, (c, basis) in enumerate(self.entries):
            blocks[c] += y[k] * basis
        for c in range(len(st.classes)):
            a = st.adjoint(c)
            if a < c:
                blocks[c] = blocks[a].conj().T
        return ChiMatrix(st, blocks)

    def lmi_coefficients(self, transpose_blocks: bool = False) -> sp.csr_matrix:
        """Sparse ``(size, N^2)`` matrix whose row ``k`` is the vectorised reduced-layout
        moment matrix of coordinate ``k`` (block-transposed when requested)."""
        st = self.structure
        db = st.scenario.d_b
        table = st.reduced_block_class
        n = len(table) * db
        positions = {c: np.argwhere(table == c) for c in range(len(st.classes))}
        rows, cols, vals = [], [], []
        for k, (c, basis) in enumerate(self.entries):
            for cls, mat in ((c, basis), (st.adjoint(c), basis.conj().T)):
                if cls == c and mat is not basis:
                    continue
                if transpose_blocks:
                    mat = mat.T
                nz = np.argwhere(mat != 0)
                pos = positions[cls]
                if not len(pos) or not len(nz):
                    continue
                r = (pos[:, 0, None] * db + nz[None, :, 0]).ravel()
                q = (pos[:, 1, None] * db + nz[None, :, 1]).ravel()
                v = np.broadcast_to(mat[nz[:, 0], nz[:, 1]], (len(pos), len(nz))).ravel()
                rows.append(np.full(len(r), k))
                cols.append(r * n + q)
                vals.append(v)
        return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.size, n * n)).tocsr()


def _unit(d, r, c):
    m = np.zeros((d, d), dtype=complex)
    m[r, c] = 1
    return m


def functional_form(par: ChiParametrization, F: SteeringFunctional) -> tuple[np.ndarray, float]:
    """Coefficients of ``f(chi)``: ``F`` on the observable blocks, last outcome completed."""
    st = par.structure
    s = st.scenario
    if F.scenario != s:
        raise ValueError(f"functional scenario {F.scenario} does not match {s}")
    out = np.zeros(par.size)
    for x in range(s.m_a):
        out += par.linear_form(st.reduced_class, F.F[x, -1])
        for a in range(s.n_a - 1):
            out += par.linear_form(st.observable_class(a, x), F.F[x, a] - F.F[x, -1])
    return out, 0.0


def _trace_form(par: ChiParametrization) -> np.ndarray:
    return par.linear_form(par.structure.reduced_class, np.eye(par.structure.scenario.d_b))


# --- relaxation problems -------------------------------------------------------

@dataclass
class Relaxation:
    """An LMI relaxation, its equality-form SDP and the decoding of moment matrices."""

    kind: str
    structure: MomentStructure
    lmi: LmiProblem
    problem: SdpProblem
    recover: LmiRecovery
    params: ChiParametrization
    variables: list[str]

    def moment_matrices(self, sol: SdpSolution) -> dict[str, ChiMatrix]:
        y = self.recover(sol)
        n = self.params.size
        return {name: self.params.chi(y[i * n:(i + 1) * n]) for i, name in enumerate(self.variables)}


def _two_family_lmi(st: MomentStructure, par: ChiParametrization) -> LmiProblem:
    n = par.size
    g = par.lmi_coefficients()
    gt = par.lmi_coefficients(transpose_blocks=True)
    N = st.reduced_dim
    zero = sp.csr_matrix((n, N * N), dtype=complex)
    lmi = LmiProblem(2 * n, np.concatenate([np.zeros(n), _trace_form(par)]), "minimize")
    const = np.zeros((N, N))
    lmi.add_block("chi_plus-chi_minus", N, const, sp.vstack([g, -g]))
    lmi.add_block("chi_plus^TB", N, const, sp.vstack([gt, zero]))
    lmi.add_block("chi_minus^TB", N, const, sp.vstack([zero, gt]))
    return lmi


def _finish(kind, st, par, lmi, variables) -> Relaxation:
    p, rec = lmi.to_sdp()
    return Relaxation(kind, st, lmi, p, rec, par, variables)


def build_negativity_from_assemblage(A: Assemblage, level: int, cap: int = SIZE_CAP) -> Relaxation:
    """Minimise ``t(chi_-)`` with ``chi_+ - chi_-`` matching ``A`` on the observable blocks."""
    st = build_structure(A.scenario, level, cap)
    par = ChiParametrization(st)
    lmi = _two_family_lmi(st, par)
    n = par.size
    targets = [(st.reduced_class, A.reduced_state())]
    targets += [(st.observable_class(a, x), A.sigma[x, a])
                for x in range(A.scenario.m_a) for a in range(A.scenario.n_a - 1)]
    for c, target in targets:
        sl = par.class_slices[c]
        for k, value in zip(range(sl.start, sl.stop), par.coordinates(c, target)):
            row = np.zeros(2 * n)
            row[k], row[n + k] = 1.0, -1.0
            lmi.add_equality(row, value)
    return _finish("negativity-assemblage", st, par, lmi, ["chi_plus", "chi_minus"])


def build_negativity_from_violation(F: SteeringFunctional, v: float, level: int,
                                    cap: int = SIZE_CAP) -> Relaxation:
    """Minimise ``t(chi_-)`` subject to ``f(chi_+ - chi_-) = v`` and ``t(chi_+ - chi_-) = 1``."""
    st = build_structure(F.scenario, level, cap)
    par = ChiParametrization(st)
    lmi = _two_family_lmi(st, par)
    f, _ = functional_form(par, F)
    t = _trace_form(par)
    lmi.add_equality(np.concatenate([f, -f]), v)
    lmi.add_equality(np.concatenate([t, -t]), 1.0)
    return _finish("negativity-violation", st, par, lmi, ["chi_plus", "chi_minus"])


def build_ppt_bound(F: SteeringFunctional, level: int, cap: int = SIZE_CAP) -> Relaxation:
    """Maximise ``f(chi)`` subject to ``t(chi) = 1``, ``chi >= 0`` and ``chi^TB >= 0``."""
    st = build_structure(F.scenario, level, cap)
    par = ChiParametrization(st)
    f, _ = functional_form(par, F)
    N = st.reduced_dim
    lmi = LmiProblem(par.size, f, "maximize")
    lmi.add_block("chi", N, np.zeros((N, N)), par.lmi_coefficients())
    lmi.add_block("chi^TB", N, np.zeros((N, N)), par.lmi_coefficients(transpose_blocks=True))
    lmi.add_equality(_trace_form(par), 1.0)
    return _finish("ppt-bound", st, par, lmi, ["chi"])


# --- solve wrappers ------------------------------------------------------------

@dataclass
class RelaxationResult:
    value: float
    status: str
    level: int
    solution: SdpSolution | None = None
    chi: dict[str, ChiMatrix] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def __float__(self):
        return float(self.value)


def _status(sol: SdpSolution) -> str:
    # the SDP solved is the dual of the moment relaxation
    if sol.status == DUAL_INFEASIBLE:
        return "infeasible"
    if sol.status == PRIMAL_INFEASIBLE:
        return "unbounded"
    return sol.status


def solve_relaxation(rel: Relaxation, tolerance: float = 1e-8, max_iterations: int = 200,
                     use_realify: bool = True) -> RelaxationResult:
    p = realify(rel.problem) if use_realify else rel.problem
    sol = solve(p, tolerance=tolerance, max_iterations=max_iterations)
    status = _status(sol)
    chi = rel.moment_matrices(sol) if status == OPTIMAL else {}
    value = sol.objective_value if status == OPTIMAL else float("nan")
    return RelaxationResult(value, status, rel.structure.level, sol, chi)


def negativity_lower_bound(A: Assemblage, level: int, **kw) -> RelaxationResult:
    return solve_relaxation(build_negativity_from_assemblage(A, level), **kw)


def negativity_from_violation(F: SteeringFunctional, v: float, level: int, **kw) -> RelaxationResult:
    return solve_relaxation(build_negativity_from_violation(F, v, level), **kw)


def negativity_curve(F: SteeringFunctional, grid, level: int, **kw) -> list[tuple[float, RelaxationResult]]:
    """Independent solves of the violation relaxation at every ``v`` in ``grid``."""
    return [(float(v), negativity_from_violation(F, float(v), level, **kw)) for v in grid]


def ppt_upper_bound(F: SteeringFunctional, level: int, **kw) -> RelaxationResult:
    return solve_relaxation(build_ppt_bound(F, level), **kw)
