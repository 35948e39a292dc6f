import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from steerneg import linalg, steering
from steerneg.hierarchy import build_ppt_bound
from steerneg.sdp import (
    COMPLEX_PSD,
    DUAL_INFEASIBLE,
    FREE,
    OPTIMAL,
    PRIMAL_INFEASIBLE,
    REAL_PSD,
    Block,
    LinearFunctional,
    LmiProblem,
    SdpProblem,
    SolverSettings,
    embed_complex,
    export_sdpa,
    objective_from_sdpa_value,
    parse_sdpa,
    realify,
    sdpa_to_problem,
    solve,
    unembed_real,
    unrealify_values,
)
from steerneg.sdp.sdpa import coefficient_multiset

Z = linalg.pauli("Z")
TOL = 1e-8


def max_eig_problem(kind=COMPLEX_PSD, c=1.0):
    dims = {"M": 2}
    return SdpProblem(
        [Block("M", 2, kind)],
        LinearFunctional.from_matrices({"M": c * Z}),
        "maximize",
        [(LinearFunctional.from_matrices({"M": np.eye(2)}), 1.0)],
    )


def rank_one_problem():
    dims = {"M": 2}
    return SdpProblem(
        [Block("M", 2, COMPLEX_PSD)],
        LinearFunctional.from_matrices({"M": np.eye(2)}),
        "minimize",
        [(LinearFunctional.from_terms([("M", 0, 0, 1.0)], dims), 1.0)],
    )


def assert_feasible(p, sol, tol=TOL):
    for b in p.blocks:
        if b.kind != FREE:
            assert np.linalg.eigvalsh(sol.block_values[b.label]).min() >= -10 * tol
    assert np.abs(p.equality_residuals(sol.block_values)).max(initial=0) <= 10 * tol


def test_max_eigenvalue_sdp():
    p = max_eig_problem()
    sol = solve(p)
    assert sol.status == OPTIMAL
    assert sol.objective_value == pytest.approx(1, abs=1e-8)
    assert max(sol.gaps) <= TOL
    assert_feasible(p, sol)
    # optimum is the projector on the +1 eigenvector of Z
    assert np.allclose(sol.block_values["M"], np.diag([1, 0]), atol=1e-6)


def test_rank_one_trace_sdp():
    p = rank_one_problem()
    sol = solve(p)
    assert sol.status == OPTIMAL
    assert sol.objective_value == pytest.approx(1, abs=1e-8)
    assert_feasible(p, sol)


def test_lhs_problem_matches_eigen_oracle():
    F = steering.pauli_functional("XY")
    sol = solve(steering.lhs_max_problem(F))
    assert sol.status == OPTIMAL
    assert sol.objective_value == pytest.approx(steering.lhs_max_eigen(F), abs=1e-6)
    assert sol.objective_value == pytest.approx(np.sqrt(2), abs=1e-6)


def test_free_block():
    # maximise a free t subject to t + P = -3 with P >= 0
    dims = {"t": 1, "P": 1}
    p = SdpProblem(
        [Block("t", 1, FREE), Block("P", 1, REAL_PSD)],
        LinearFunctional.from_terms([("t", 0, 0, 1.0)], dims),
        "maximize",
        [(LinearFunctional.from_terms([("t", 0, 0, 1.0), ("P", 0, 0, 1.0)], dims), -3.0)],
    )
    sol = solve(p)
    assert sol.status == OPTIMAL
    assert sol.objective_value == pytest.approx(-3, abs=1e-7)


def test_primal_infeasible_detected():
    # M >= 0 with tr M = -1
    p = SdpProblem([Block("M", 2, REAL_PSD)], LinearFunctional.from_matrices({"M": np.eye(2)}),
                   "minimize", [(LinearFunctional.from_matrices({"M": np.eye(2)}), -1.0)])
    assert solve(p).status == PRIMAL_INFEASIBLE


def test_unbounded_detected_as_dual_infeasible():
    # maximise M[0,0] with only M[1,1] = 1 fixed
    dims = {"M": 2}
    p = SdpProblem([Block("M", 2, REAL_PSD)], LinearFunctional.from_terms([("M", 0, 0, 1.0)], dims),
                   "maximize", [(LinearFunctional.from_terms([("M", 1, 1, 1.0)], dims), 1.0)])
    assert solve(p).status == DUAL_INFEASIBLE


def test_problem_validation():
    with pytest.raises(ValueError, match="unknown block"):
        SdpProblem([Block("M", 2, REAL_PSD)], LinearFunctional.from_matrices({"N": np.eye(2)}))
    with pytest.raises(ValueError, match="unique"):
        SdpProblem([Block("M", 2, REAL_PSD), Block("M", 1, REAL_PSD)], LinearFunctional())
    with pytest.raises(ValueError, match="finite"):
        SdpProblem([Block("M", 2, REAL_PSD)], LinearFunctional(),
                   equalities=[(LinearFunctional.from_matrices({"M": np.eye(2)}), np.inf)])
    with pytest.raises(ValueError, match="sense"):
        SdpProblem([Block("M", 2, REAL_PSD)], LinearFunctional(), "max")


# --- realify -------------------------------------------------------------------

def test_embed_examples():
    y = embed_complex(linalg.pauli("Y"))
    assert np.array_equal(y, [[0, 0, 0, 1], [0, 0, -1, 0], [0, -1, 0, 0], [1, 0, 0, 0]])
    assert np.allclose(np.linalg.eigvalsh(y), [-1, -1, 1, 1])
    assert np.array_equal(embed_complex(np.eye(2)), np.eye(4))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_embedding_preserves_values_and_positivity(d, seed):
    rng = np.random.default_rng(seed)
    h, c = linalg.random_hermitian(d, rng), linalg.random_hermitian(d, rng)
    assert np.allclose(unembed_real(embed_complex(h)), h)
    e = np.linalg.eigvalsh(embed_complex(h))
    assert np.allclose(e, np.sort(np.repeat(np.linalg.eigvalsh(h), 2)), atol=1e-10)
    # functional values survive realification
    p = SdpProblem([Block("H", d, COMPLEX_PSD)], LinearFunctional.from_matrices({"H": c}))
    q = realify(p)
    assert q.objective.evaluate({"H": embed_complex(h)}) == pytest.approx(p.objective.evaluate({"H": h}), abs=1e-10)


def test_one_by_one_complex_blocks_stay_scalar():
    p = SdpProblem([Block("s", 1, COMPLEX_PSD)], LinearFunctional.from_matrices({"s": np.array([[2.0]])}))
    q = realify(p)
    assert q.blocks[0].dim == 1 and q.blocks[0].kind == REAL_PSD
    assert q.objective.evaluate({"s": np.array([[3.0]])}) == pytest.approx(6.0)


@pytest.mark.parametrize("build", [max_eig_problem, rank_one_problem,
                                   lambda: steering.quantum_max_problem(steering.pauli_functional("XY"))])
def test_realify_preserves_objective(build):
    p = build()
    a, b = solve(p), solve(realify(p))
    assert a.status == b.status == OPTIMAL
    assert a.objective_value == pytest.approx(b.objective_value, abs=1e-7)
    back = unrealify_values(p, b.block_values)
    assert p.objective_at(back) == pytest.approx(a.objective_value, abs=1e-7)


def test_realify_splits_free_blocks():
    p = SdpProblem([Block("t", 2, FREE)], LinearFunctional.from_matrices({"t": Z}))
    q = realify(p)
    assert [b.label for b in q.blocks] == ["t+", "t-"]
    assert q.is_real()


# --- SDPA ----------------------------------------------------------------------

def test_sdpa_trivial_file_layout():
    text = export_sdpa(max_eig_problem(REAL_PSD))
    lines = text.splitlines()
    assert text.startswith("1\n1\n2\n1.0")
    # objective Z has two diagonal entries, the trace constraint two more
    assert sorted(lines[4:]) == sorted(["0 1 1 1 1.0", "0 1 2 2 -1.0", "1 1 1 1 1.0", "1 1 2 2 1.0"])


def test_sdpa_rejects_complex_blocks():
    with pytest.raises(ValueError, match="realify"):
        export_sdpa(max_eig_problem())


def test_sdpa_minimize_sign_convention():
    p = realify(rank_one_problem())
    data = parse_sdpa(export_sdpa(p))
    sol = solve(sdpa_to_problem(data))
    assert sol.status == OPTIMAL
    assert objective_from_sdpa_value(p, sol.objective_value) == pytest.approx(1, abs=1e-7)


@pytest.mark.parametrize("build", [
    lambda: realify(steering.quantum_max_problem(steering.pauli_functional("XYZ"))),
    lambda: realify(build_ppt_bound(steering.pauli_functional("XY"), 1).problem),
    lambda: realify(steering.lhs_max_problem(steering.pauli_functional("XY"))),
])
def test_sdpa_round_trip(build):
    p = build()
    text = export_sdpa(p)
    data = parse_sdpa(text)
    again = export_sdpa(sdpa_to_problem(data))
    assert coefficient_multiset(text) == coefficient_multiset(again)
    assert data.num_constraints == p.num_constraints
    assert data.block_sizes == [b.dim for b in p.blocks]


def test_sdpa_parser_tolerates_comments_and_separators():
    text = '"a comment\n* another\n1\n1\n{2}\n(1.0)\n0 1 1 1 1.0\n1 1 1 1 1.0\n1 1 2 2 1.0\n'
    data = parse_sdpa(text)
    assert data.block_sizes == [2] and data.c.tolist() == [1.0]
    assert solve(sdpa_to_problem(data)).objective_value == pytest.approx(1, abs=1e-8)


def test_exported_ppt_problem_external_solver():
    cp = pytest.importorskip("cvxpy")
    p = realify(build_ppt_bound(steering.pauli_functional("XY"), 1).problem)
    data = parse_sdpa(export_sdpa(p))
    mats = data.matrices()
    Y = [cp.Variable((s, s), symmetric=True) for s in data.block_sizes]
    obj = sum(cp.trace(mats[0][i] @ Y[i]) for i in range(len(Y)))
    cons = [y >> 0 for y in Y]
    cons += [sum(cp.trace(mats[k + 1][i] @ Y[i]) for i in range(len(Y))) == data.c[k]
             for k in range(data.num_constraints)]
    prob = cp.Problem(cp.Maximize(obj), cons)
    solvers = [s for s in ("CLARABEL", "SCS") if s in cp.installed_solvers()]
    if not solvers:
        pytest.skip("no conic solver available to cvxpy")
    prob.solve(solver=solvers[0])
    assert objective_from_sdpa_value(p, prob.value) == pytest.approx(np.sqrt(2), abs=1e-6)


# --- properties ----------------------------------------------------------------

def random_feasible_problem(seed, n=3, m=4, cplx=True):
    """Strictly feasible primal and dual by construction."""
    rng = np.random.default_rng(seed)
    herm = (lambda d: linalg.random_hermitian(d, rng)) if cplx else (lambda d: linalg.random_hermitian(d, rng).real)
    kind = COMPLEX_PSD if cplx else REAL_PSD
    x0 = linalg.random_density_matrix(n, rng)
    x0 = x0 if cplx else x0.real
    x0 = x0 + 0.1 * np.eye(n)
    A = [herm(n) for _ in range(m)]
    y0 = rng.standard_normal(m)
    g = herm(n)
    C = sum(yk * a for yk, a in zip(y0, A)) + np.eye(n) + 0.1 * g @ g
    b = [float(np.trace(a @ x0).real) for a in A]
    p = SdpProblem([Block("X", n, kind)], LinearFunctional.from_matrices({"X": C}), "minimize",
                   [(LinearFunctional.from_matrices({"X": a}), bk) for a, bk in zip(A, b)])
    return p


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_optimal_solutions_are_feasible_and_dual_consistent(seed, cplx):
    p = random_feasible_problem(seed, cplx=cplx)
    sol = solve(p)
    assert sol.status == OPTIMAL
    assert max(sol.gaps) <= TOL
    assert_feasible(p, sol)
    # weak duality along the path (minimisation: primal >= dual for feasible pairs)
    assert not any(h.get("weak_duality_violation") for h in sol.history)
    for h in sol.history:
        if h["primal_residual"] <= TOL and h["dual_residual"] <= TOL:
            assert h["primal_objective"] >= h["dual_objective"] - 1e-7
    # the reported dual slack is C - sum y_k A_k
    C = p.objective.coeffs["X"].T.toarray()
    S = C - sum(yk * f.coeffs["X"].T.toarray() for yk, (f, _) in zip(sol.dual_values, p.equalities))
    assert np.allclose(S, sol.dual_slacks["X"], atol=1e-6)
    assert np.linalg.eigvalsh(S).min() >= -1e-6


def test_determinism():
    p = realify(build_ppt_bound(steering.pauli_functional("XY"), 1).problem)
    a, b = solve(p), solve(p)
    assert a.iterations == b.iterations
    assert abs(a.objective_value - b.objective_value) <= 1e-12


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_scaling_covariance(c):
    base = solve(max_eig_problem()).objective_value
    scaled = solve(max_eig_problem(c=c)).objective_value
    assert scaled == pytest.approx(c * base, rel=1e-9)


def test_iteration_limit_reports_numerical_failure():
    p = random_feasible_problem(1)
    sol = solve(p, settings=SolverSettings(tolerance=1e-8, max_iterations=2, restart_step_fraction=None))
    assert sol.status == "numerical-failure"
    assert not sol.ok


def test_lmi_dualisation_recovers_variables():
    # maximise y1 + y2 subject to [[1, y1], [y1, 1]] >= 0, y2 = 0.5 * y1
    lmi = LmiProblem(2, np.array([1.0, 1.0]), "maximize")
    coeffs = sp.csr_matrix(np.array([[0, 1, 1, 0], [0, 0, 0, 0]], dtype=complex))
    lmi.add_block("S", 2, np.eye(2), coeffs, is_complex=False)
    lmi.add_equality([0.5, -1.0], 0.0)
    p, recover = lmi.to_sdp()
    sol = solve(p)
    y = recover(sol)
    assert sol.objective_value == pytest.approx(1.5, abs=1e-7)
    assert y == pytest.approx([1.0, 0.5], abs=1e-6)
    assert lmi.evaluate(y) == pytest.approx(1.5, abs=1e-6)
