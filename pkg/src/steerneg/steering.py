"""Steering scenarios: assemblages, linear steering functionals and their bounds.

Assemblages and functionals are stored as arrays of shape ``(m_A, n_A, d_B, d_B)``
indexed ``[x, a]`` with 0-based setting ``x`` and outcome ``a``.  Deterministic
strategies are tuples ``lam`` with ``lam[x]`` the outcome assigned to setting
``x``, enumerated lexicographically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import linalg
from .sdp import COMPLEX_PSD, FREE, Block, LinearFunctional, SdpProblem, SdpSolution, solve

VALIDITY_TOL = 1e-9
STRATEGY_CAP = 4096


class SolverError(RuntimeError):
    """A semidefinite program did not reach status ``optimal``."""

    def __init__(self, message: str, solution: SdpSolution | None = None):
        super().__init__(message)
        self.solution = solution


class StrategyCapError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    m_a: int
    n_a: int
    d_b: int

    def __post_init__(self):
        if self.m_a < 1 or self.n_a < 2 or self.d_b < 2:
            raise ValueError(f"invalid scenario m_A={self.m_a}, n_A={self.n_a}, d_B={self.d_b}")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.m_a, self.n_a, self.d_b, self.d_b)

    @property
    def num_strategies(self) -> int:
        return self.n_a ** self.m_a


def _family(ops, name: str) -> np.ndarray:
    arr = np.asarray(ops, dtype=complex)
    if arr.ndim != 4 or arr.shape[2] != arr.shape[3]:
        raise ValueError(f"{name} must have shape (m_A, n_A, d_B, d_B), got {arr.shape}")
    out = np.empty_like(arr)
    for x in range(arr.shape[0]):
        for a in range(arr.shape[1]):
            try:
                out[x, a] = linalg.hermitian(arr[x, a], tol=1e-9)
            except ValueError as exc:
                raise ValueError(f"{name}[x={x + 1}, a={a + 1}]: {exc}") from None
    return out


@dataclass
class Assemblage:
    """Conditional subnormalised states ``sigma[x, a]`` on Bob's system."""

    sigma: np.ndarray

    def __post_init__(self):
        self.sigma = _family(self.sigma, "sigma")
        Scenario(*self.sigma.shape[:3])

    @property
    def scenario(self) -> Scenario:
        return Scenario(*self.sigma.shape[:3])

    def reduced_state(self, x: int = 0) -> np.ndarray:
        return self.sigma[x].sum(axis=0)

    def probabilities(self) -> np.ndarray:
        return np.einsum("xaii->xa", self.sigma).real


@dataclass
class SteeringFunctional:
    """Linear functional ``F(sigma) = sum_{a,x} tr(F[x, a] sigma[x, a])``."""

    F: np.ndarray

    def __post_init__(self):
        self.F = _family(self.F, "F")
        Scenario(*self.F.shape[:3])

    @property
    def scenario(self) -> Scenario:
        return Scenario(*self.F.shape[:3])

    def scaled(self, c: float) -> "SteeringFunctional":
        return SteeringFunctional(c * self.F)


@dataclass(frozen=True)
class Violation:
    rule: str
    magnitude: float
    detail: str = ""


@dataclass
class LhsModel:
    """Local hidden state model: subnormalised states per deterministic strategy."""

    scenario: Scenario
    strategies: list[tuple[int, ...]]
    sigma_tilde: np.ndarray  # (num_strategies, d_B, d_B)

    def assemblage_array(self) -> np.ndarray:
        s = self.scenario
        out = np.zeros(s.shape, dtype=complex)
        for lam, st in zip(self.strategies, self.sigma_tilde):
            for x, a in enumerate(lam):
                out[x, a] += st
        return out

    def weights(self) -> np.ndarray:
        return np.einsum("kii->k", self.sigma_tilde).real


@dataclass
class LhsCertificate:
    """Evidence that no LHS model exists.

    ``noise_weight`` is the least ``t`` for which ``sigma + t * I/(n_A d_B)``
    admits an LHS model; ``witness`` is the dual steering functional, which is
    at most 0 on every LHS assemblage and equals ``noise_weight`` on the input.
    """

    noise_weight: float
    witness: SteeringFunctional
    solution: SdpSolution


# --- construction helpers -----------------------------------------------------

def pauli_functional(axes: str = "XY") -> SteeringFunctional:
    """Two-outcome functional ``F_{1|x} = P_x, F_{2|x} = -P_x`` for Pauli axes ``P_x``."""
    F = np.array([[linalg.pauli(p), -linalg.pauli(p)] for p in axes])
    return SteeringFunctional(F)


def pauli_measurements(axes: str = "XY") -> np.ndarray:
    """Alice's projective Pauli measurements, outcome 1 being the ``-1`` eigenspace.

    With this labelling the singlet's anti-correlations make ``pauli_functional``
    positive, so the singlet reaches the quantum maximum ``len(axes)``.
    """
    eye = np.eye(2, dtype=complex)
    return np.array([[(eye - linalg.pauli(p)) / 2, (eye + linalg.pauli(p)) / 2] for p in axes])


def bohm_assemblage() -> Assemblage:
    """``sigma_{1|1}=|0><0|/2``, ``sigma_{2|1}=|1><1|/2``, ``sigma_{1|2}=|+><+|/2``, ``sigma_{2|2}=|-><-|/2``."""
    k0, k1 = np.array([1, 0]), np.array([0, 1])
    kp, km = (k0 + k1) / np.sqrt(2), (k0 - k1) / np.sqrt(2)
    P = linalg.ket_projector
    return Assemblage(np.array([[P(k0) / 2, P(k1) / 2], [P(kp) / 2, P(km) / 2]]))


def zero_functional(scenario: Scenario) -> SteeringFunctional:
    return SteeringFunctional(np.zeros(scenario.shape, dtype=complex))


def random_functional(scenario: Scenario, rng: np.random.Generator) -> SteeringFunctional:
    """Independent Gaussian Hermitian ``F_{a|x}`` (no normalisation)."""
    F = np.array([[linalg.random_hermitian(scenario.d_b, rng) for _ in range(scenario.n_a)]
                  for _ in range(scenario.m_a)])
    return SteeringFunctional(F)


def random_assemblage(scenario: Scenario, rng: np.random.Generator, d_a: int | None = None,
                      ) -> tuple[Assemblage, np.ndarray, np.ndarray]:
    """Valid assemblage from a random pure state and random projective measurements.

    Returns ``(assemblage, rho, povms)``.
    """
    d_a = d_a or max(scenario.n_a, scenario.d_b)
    psi = linalg.random_pure_state(d_a * scenario.d_b, rng)
    rho = linalg.ket_projector(psi)
    povms = np.array([linalg.random_projective_measurement(d_a, scenario.n_a, rng)
                      for _ in range(scenario.m_a)])
    return assemblage_from_state(rho, povms), rho, povms


# --- validity and evaluation -------------------------------------------------

def validate_assemblage(A: Assemblage, tol: float = VALIDITY_TOL) -> list[Violation]:
    """Positivity, normalisation and no-signalling checks; empty list means valid."""
    sig = A.sigma
    out = []
    worst, where = 0.0, ""
    for x in range(sig.shape[0]):
        for a in range(sig.shape[1]):
            lam = linalg.min_eig(sig[x, a])
            if -lam > worst:
                worst, where = -lam, f"sigma[x={x + 1}, a={a + 1}]"
    if worst > tol:
        out.append(Violation("positivity", worst, f"most negative eigenvalue in {where}"))
    red = sig.sum(axis=1)
    ns = max((np.max(np.abs(red[x] - red[0])) for x in range(1, len(red))), default=0.0)
    if ns > tol:
        out.append(Violation("no-signalling", float(ns), "sum_a sigma[x, a] depends on x"))
    # every setting is checked so that a signalling family with one good setting is still flagged
    traces = np.einsum("xii->x", red).real
    k = int(np.argmax(np.abs(traces - 1.0)))
    norm = abs(traces[k] - 1.0)
    if norm > tol:
        out.append(Violation("normalization", float(norm), f"tr(sum_a sigma[x={k + 1}, a]) != 1"))
    return out


def evaluate(F: SteeringFunctional, A: Assemblage) -> float:
    if F.scenario != A.scenario:
        raise ValueError(f"scenario mismatch: {F.scenario} vs {A.scenario}")
    return float(np.einsum("xaij,xaji->", F.F, A.sigma).real)


def assemblage_from_state(rho, povms, tol: float = VALIDITY_TOL) -> Assemblage:
    """``sigma_{a|x} = tr_A((E_{a|x} (x) 1) rho)`` for POVMs ``povms[x, a]`` on Alice."""
    povms = np.asarray(povms, dtype=complex)
    d_a = povms.shape[-1]
    rho = linalg.hermitian(rho, tol=tol)
    if rho.shape[0] % d_a:
        raise ValueError(f"state dimension {rho.shape[0]} is not a multiple of d_A={d_a}")
    d_b = rho.shape[0] // d_a
    if not linalg.is_psd(rho, tol):
        raise ValueError("rho is not positive semidefinite")
    if abs(np.trace(rho).real - 1) > tol:
        raise ValueError("rho does not have unit trace")
    for x in range(povms.shape[0]):
        for a in range(povms.shape[1]):
            if not linalg.is_psd(povms[x, a], tol):
                raise ValueError(f"POVM element E[x={x + 1}, a={a + 1}] is not positive")
        if np.max(np.abs(povms[x].sum(axis=0) - np.eye(d_a))) > tol:
            raise ValueError(f"POVM for setting x={x + 1} does not sum to the identity")
    dims = (d_a, d_b)
    eye_b = np.eye(d_b)
    sig = np.array([[linalg.partial_trace_a(linalg.tensor(e, eye_b) @ rho, dims) for e in row]
                    for row in povms])
    A = Assemblage(sig)
    bad = validate_assemblage(A, tol=1e-8)
    assert not bad, bad
    return A


# --- bounds ------------------------------------------------------------------

def _trace_form(label: str, m: np.ndarray) -> LinearFunctional:
    return LinearFunctional.from_matrices({label: m})


def hermitian_entry_terms(label: str, d: int):
    """Real coordinates of a ``d x d`` Hermitian block as ``(name, terms)`` pairs.

    Yields the diagonal entries, then ``Re`` and ``Im`` of each upper entry.
    """
    for r in range(d):
        yield ("diag", r, r), [(label, r, r, 1.0)]
    for r in range(d):
        for c in range(r + 1, d):
            yield ("re", r, c), [(label, r, c, 0.5), (label, c, r, 0.5)]
            yield ("im", r, c), [(label, r, c, -0.5j), (label, c, r, 0.5j)]


def _solve_checked(p: SdpProblem, what: str, **kw) -> SdpSolution:
    sol = solve(p, **kw)
    if not sol.ok:
        raise SolverError(f"{what}: solver status {sol.status} ({sol.message})", sol)
    return sol


def quantum_max_problem(F: SteeringFunctional) -> SdpProblem:
    s = F.scenario
    labels = {(x, a): f"sigma[{x + 1},{a + 1}]" for x in range(s.m_a) for a in range(s.n_a)}
    dims = {lab: s.d_b for lab in labels.values()}
    blocks = [Block(labels[x, a], s.d_b, COMPLEX_PSD) for x in range(s.m_a) for a in range(s.n_a)]
    obj = LinearFunctional()
    for (x, a), lab in labels.items():
        obj = obj + _trace_form(lab, F.F[x, a])
    eqs = []
    for x in range(1, s.m_a):
        for _, terms in hermitian_entry_terms("", s.d_b):
            row = []
            for a in range(s.n_a):
                row += [(labels[0, a], r, c, v) for _, r, c, v in terms]
                row += [(labels[x, a], r, c, -v) for _, r, c, v in terms]
            eqs.append((LinearFunctional.from_terms(row, dims), 0.0))
    tr = [(labels[0, a], i, i, 1.0) for a in range(s.n_a) for i in range(s.d_b)]
    eqs.append((LinearFunctional.from_terms(tr, dims), 1.0))
    return SdpProblem(blocks, obj, "maximize", eqs)


def quantum_max(F: SteeringFunctional, tolerance: float = 1e-8) -> float:
    """Largest value of ``F`` over all valid (hence quantum-realisable) assemblages."""
    return _solve_checked(quantum_max_problem(F), "quantum_max", tolerance=tolerance).objective_value


def strategies(scenario: Scenario, cap: int = STRATEGY_CAP) -> list[tuple[int, ...]]:
    if scenario.num_strategies > cap:
        raise StrategyCapError(
            f"n_A^m_A = {scenario.n_a}^{scenario.m_a} = {scenario.num_strategies} deterministic "
            f"strategies exceeds the cap of {cap}")
    return list(itertools.product(range(scenario.n_a), repeat=scenario.m_a))


def strategy_operators(F: SteeringFunctional, cap: int = STRATEGY_CAP) -> tuple[list, np.ndarray]:
    """``G_lam = sum_x F[x, lam[x]]`` for every deterministic strategy."""
    lams = strategies(F.scenario, cap)
    xs = np.arange(F.scenario.m_a)
    G = np.array([F.F[xs, list(lam)].sum(axis=0) for lam in lams])
    return lams, G


def lhs_max_problem(F: SteeringFunctional, cap: int = STRATEGY_CAP) -> SdpProblem:
    lams, G = strategy_operators(F, cap)
    d = F.scenario.d_b
    labels = [f"lambda{''.join(str(a + 1) for a in lam)}" for lam in lams]
    blocks = [Block(lab, d, COMPLEX_PSD) for lab in labels]
    obj = LinearFunctional()
    for lab, g in zip(labels, G):
        obj = obj + _trace_form(lab, g)
    trace = LinearFunctional.from_terms([(lab, i, i, 1.0) for lab in labels for i in range(d)],
                                        {lab: d for lab in labels})
    return SdpProblem(blocks, obj, "maximize", [(trace, 1.0)])


def lhs_max_sdp(F: SteeringFunctional, tolerance: float = 1e-8, cap: int = STRATEGY_CAP) -> float:
    """Maximum of ``F`` over LHS assemblages, by semidefinite programming."""
    return _solve_checked(lhs_max_problem(F, cap), "lhs_max_sdp", tolerance=tolerance).objective_value


def lhs_max_eigen(F: SteeringFunctional, cap: int = STRATEGY_CAP) -> float:
    """Maximum of ``F`` over LHS assemblages as ``max_lam lambda_max(G_lam)``."""
    _, G = strategy_operators(F, cap)
    return float(max(linalg.eigvalsh(g)[-1] for g in G))


def has_lhs_model(A: Assemblage, tolerance: float = 1e-8, cap: int = STRATEGY_CAP,
                  feasibility_tol: float = 1e-7) -> tuple[bool, LhsModel | LhsCertificate]:
    """Decide whether ``A`` has an LHS model.

    Solves ``min t`` such that ``sigma_{a|x} + t I/(n_A d_B)`` decomposes over
    deterministic strategies.  The model is returned when ``t <= feasibility_tol``.
    """
    s = A.scenario
    lams = strategies(s, cap)
    d = s.d_b
    labels = [f"lambda{''.join(str(a + 1) for a in lam)}" for lam in lams]
    dims = {lab: d for lab in labels} | {"t": 1}
    blocks = [Block(lab, d, COMPLEX_PSD) for lab in labels] + [Block("t", 1, FREE)]
    noise = 1.0 / (s.n_a * d)
    eqs, keys = [], []
    for x in range(s.m_a):
        # the last outcome of x >= 2 follows from no-signalling; keeping it makes rows dependent
        for a in range(s.n_a if x == 0 else s.n_a - 1):
            members = [lab for lab, lam in zip(labels, lams) if lam[x] == a]
            target = A.sigma[x, a]
            for (kind, r, c), terms in hermitian_entry_terms("", d):
                row = [(lab, rr, cc, v) for lab in members for _, rr, cc, v in terms]
                if kind == "diag":
                    row.append(("t", 0, 0, -noise))
                    rhs = target[r, r].real
                else:
                    rhs = target[r, c].real if kind == "re" else target[r, c].imag
                eqs.append((LinearFunctional.from_terms(row, dims), float(rhs)))
                keys.append((x, a, kind, r, c))
    obj = LinearFunctional.from_terms([("t", 0, 0, 1.0)], dims)
    p = SdpProblem(blocks, obj, "minimize", eqs)
    sol = _solve_checked(p, "has_lhs_model", tolerance=tolerance)
    t = float(sol.block_values["t"].real[0, 0])
    if t <= feasibility_tol:
        st = np.array([sol.block_values[lab] for lab in labels])
        if t < 0:
            # fold the surplus white noise back in as a uniform mixture over strategies
            st = st + (-t) / (s.num_strategies * d) * np.eye(d)
        return True, LhsModel(s, lams, st)
    W = np.zeros(s.shape, dtype=complex)
    for yk, (x, a, kind, r, c) in zip(sol.dual_values, keys):
        if kind == "diag":
            W[x, a, r, r] += yk
        elif kind == "re":
            W[x, a, r, c] += yk / 2
            W[x, a, c, r] += yk / 2
        else:
            W[x, a, r, c] += 1j * yk / 2
            W[x, a, c, r] -= 1j * yk / 2
    return False, LhsCertificate(t, SteeringFunctional(W), sol)


def realize_assemblage(A: Assemblage, cutoff: float = 1e-9) -> tuple[np.ndarray, np.ndarray, tuple[int, int]]:
    """Pure state and POVMs reproducing ``A`` (Schrodinger-HJW construction).

    With ``sigma_r = sum_i p_i |i><i|`` on its support of rank ``r``, the state is
    ``sum_i sqrt(p_i) |i>_A |i>_B`` and ``E_{a|x}`` is the transpose of
    ``sigma_r^{-1/2} sigma_{a|x} sigma_r^{-1/2}`` in that eigenbasis.
    Returns ``(rho, povms, (d_A, d_B))`` with ``d_A = r``.
    """
    bad = validate_assemblage(A)
    if bad:
        raise ValueError(f"invalid assemblage: {bad}")
    s = A.scenario
    vals, vecs, _ = linalg.psd_sqrt_pinv(A.reduced_state(), cutoff)
    r = len(vals)
    psi = np.zeros(r * s.d_b, dtype=complex)
    for i in range(r):
        psi += np.sqrt(vals[i]) * np.kron(np.eye(r)[i], vecs[:, i])
    scale = 1 / np.sqrt(vals)
    povms = np.empty((s.m_a, s.n_a, r, r), dtype=complex)
    for x in range(s.m_a):
        for a in range(s.n_a):
            m = scale[:, None] * (vecs.conj().T @ A.sigma[x, a] @ vecs) * scale[None, :]
            povms[x, a] = linalg.hermitian(m.T, tol=1e-8)
        # absorb rounding so each measurement sums exactly to the identity
        povms[x, -1] += np.eye(r) - povms[x].sum(axis=0)
    return linalg.ket_projector(psi), povms, (r, s.d_b)
