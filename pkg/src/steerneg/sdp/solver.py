"""Infeasible-start primal-dual path-following SDP solver.

Solves the pair

    minimize   <C, X>              maximize   b.y
    subject to <A_k, X> = b_k      subject to C - sum_k y_k A_k = Z
               X >= 0                         Z >= 0

over a direct sum of complex Hermitian and real symmetric blocks, using the
HKM search direction with a Mehrotra predictor-corrector step.  Free blocks are
split into a difference of two PSD blocks before solving.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .problem import (
    DUAL_INFEASIBLE,
    NUMERICAL_FAILURE,
    OPTIMAL,
    PRIMAL_INFEASIBLE,
    SdpProblem,
    SdpSolution,
    split_free_blocks,
)

log = logging.getLogger(__name__)

_KRON_MAX_DIM = 32
_CHUNK_ENTRIES = 1 << 21


@dataclass
class SolverSettings:
    tolerance: float = 1e-8
    max_iterations: int = 200
    step_fraction: float = 0.8
    # step fraction of the single restart after a numerical failure
    restart_step_fraction: float | None = 0.65


class _Block:
    """Dense data of one PSD block of the internal problem."""

    def __init__(self, label, n, cplx, cmat, avec):
        self.label = label
        self.n = n
        self.dtype = complex if cplx else float
        self.C = cmat.astype(self.dtype)
        # rows of constraints touching this block, and their vectorised coefficients
        self.rows = np.unique(avec.nonzero()[0])
        self.avec = avec  # (m, n*n) csr, row k = vec(K_k), value = Re(avec @ vec(X))
        self.asub = avec[self.rows].astype(self.dtype)
        self.hsub = self.asub.conj() if cplx else self.asub
        self.eye = np.eye(n, dtype=self.dtype)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.real(self.avec @ x.ravel())

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        v = self.avec.T @ y
        v = v.conj() if self.dtype is complex else v.real
        return v.reshape(self.n, self.n).astype(self.dtype)

    def schur(self, x: np.ndarray, zinv: np.ndarray) -> np.ndarray:
        """Rows/cols ``self.rows`` of ``M_ij = Re tr(H_i X H_j Z^-1)``."""
        k = len(self.rows)
        if k == 0:
            return np.zeros((0, 0))
        n = self.n
        if n <= _KRON_MAX_DIM:
            kron = np.kron(x.T, zinv)
            w = self.hsub @ kron  # row j = vec(X H_j Z^-1)
        else:
            w = np.empty((k, n * n), dtype=self.dtype)
            step = max(1, _CHUNK_ENTRIES // (n * n))
            for s in range(0, k, step):
                h = self.hsub[s:s + step].toarray().reshape(-1, n, n)
                w[s:s + step] = (x @ h @ zinv).reshape(-1, n * n)
        return np.real(self.asub @ w.T)


def _herm(m):
    return (m + m.conj().T) / 2


def _inner(a, b) -> float:
    return float(np.real(np.vdot(a, b)))


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with ``x + alpha dx`` PSD (``x`` positive definite)."""
    try:
        lx = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return 0.0
    t = sla.solve_triangular(lx, dx, lower=True)
    s = sla.solve_triangular(lx, t.conj().T, lower=True)
    lam = np.linalg.eigvalsh(_herm(s))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _build(p: SdpProblem):
    m = p.num_constraints
    blocks = []
    sign = 1.0 if p.sense == "minimize" else -1.0
    for b in p.blocks:
        n = b.dim
        k0 = p.objective.coeffs.get(b.label)
        cmat = np.zeros((n, n), dtype=complex) if k0 is None else sign * np.conj(k0.toarray())
        rows, cols, vals = [], [], []
        for i, (fn, _) in enumerate(p.equalities):
            k = fn.coeffs.get(b.label)
            if k is None:
                continue
            coo = k.tocoo()
            rows.append(np.full(coo.nnz, i))
            cols.append(coo.row * n + coo.col)
            vals.append(coo.data)
        if rows:
            avec = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, n * n)
            ).tocsr()
        else:
            avec = sp.csr_matrix((m, n * n), dtype=complex)
        if not b.is_complex:
            avec = avec.real.tocsr()
            cmat = cmat.real
        blocks.append(_Block(b.label, n, b.is_complex, _herm(cmat), avec))
    return blocks


def solve(p: SdpProblem, tolerance: float = 1e-8, max_iterations: int = 200,
          settings: SolverSettings | None = None) -> SdpSolution:
    """Solve ``p`` to relative accuracy ``tolerance``.

    ``objective_value`` is reported in the sense of ``p``.  ``dual_values``
    satisfy ``C - sum y_k A_k >= 0`` for minimisation and
    ``sum y_k A_k - C >= 0`` for maximisation, where ``C`` and ``A_k`` are the
    Hermitian matrices of the objective and equality functionals.
    """
    if settings is None:
        settings = SolverSettings(tolerance, max_iterations)
    sol = _solve_once(p, settings, settings.step_fraction)
    if sol.status == NUMERICAL_FAILURE and settings.restart_step_fraction is not None:
        log.info("restarting with step fraction %g: %s", settings.restart_step_fraction, sol.message)
        retry = _solve_once(p, settings, settings.restart_step_fraction)
        retry.message = f"{retry.message} (after restart: {sol.message})"
        if retry.status != NUMERICAL_FAILURE or _merit(retry) < _merit(sol):
            return retry
    return sol


def _merit(sol: SdpSolution) -> float:
    return max(sol.primal_residual, sol.dual_residual, sol.duality_gap)


def _solve_once(p: SdpProblem, settings: SolverSettings, step_fraction: float) -> SdpSolution:
    tol = settings.tolerance
    q, pairs = split_free_blocks(p)
    blocks = _build(q)
    b = q.rhs
    m = len(b)
    sign = 1.0 if p.sense == "minimize" else -1.0
    nb = max(1, sum(bl.n for bl in blocks))
    normb = np.linalg.norm(b)
    normc = np.sqrt(sum(np.linalg.norm(bl.C) ** 2 for bl in blocks))
    # work with a unit-norm objective so that iterates are covariant under C -> cC
    cscale = normc if normc > 0 else 1.0
    for bl in blocks:
        bl.C = bl.C / cscale
    normc /= cscale

    alpha0 = 1.0 + (np.max(np.abs(b)) if m else 0.0)
    beta0 = 1.0 + max((np.linalg.norm(bl.C) for bl in blocks), default=0.0)
    X = [alpha0 * bl.eye for bl in blocks]
    Z = [beta0 * bl.eye for bl in blocks]
    y = np.zeros(m)

    def A(xs):
        out = np.zeros(m)
        for bl, x in zip(blocks, xs):
            out += bl.apply(x)
        return out

    def At(v):
        return [bl.adjoint(v) for bl in blocks]

    history: list[dict] = []
    status, message = NUMERICAL_FAILURE, "iteration limit reached"
    stall = 0
    it = 0
    best = None
    since_best = 0
    pres = dres = gap = np.inf
    pobj = dobj = np.nan
    for it in range(settings.max_iterations + 1):
        rp = b - A(X)
        aty = At(y)
        Rd = [bl.C - a - z for bl, a, z in zip(blocks, aty, Z)]
        pobj = sum(_inner(bl.C, x) for bl, x in zip(blocks, X))
        dobj = float(b @ y)
        mu = sum(_inner(x, z) for x, z in zip(X, Z)) / nb
        pres = np.linalg.norm(rp) / max(1.0, normb)
        dres = np.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rd)) / max(1.0, normc)
        gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj))
        history.append(dict(iteration=it, primal_objective=pobj, dual_objective=dobj,
                            primal_residual=pres, dual_residual=dres, gap=gap, mu=mu))
        if pres <= tol and dres <= tol and pobj < dobj - 10 * tol * max(1.0, abs(pobj), abs(dobj)):
            log.warning("weak duality violated at iteration %d: %g < %g", it, pobj, dobj)
            history[-1]["weak_duality_violation"] = True
        if pres <= tol and dres <= tol and gap <= tol:
            status, message = OPTIMAL, "converged"
            best = None
            break
        merit = max(pres, dres, gap)
        if best is None or merit < best[0]:
            best = (merit, X, y, Z, pres, dres, gap, pobj, dobj)
            since_best = 0
        else:
            since_best += 1
        if best[0] < 1e-4 and (since_best >= 8 or merit > 1e3 * best[0]):
            message = f"progress stalled at accuracy {best[0]:.2e}"
            break
        # infeasibility certificates along diverging iterates
        if dobj > 0:
            ray = np.sqrt(sum(np.linalg.norm(bl.C - r) ** 2 for bl, r in zip(blocks, Rd))) / dobj
            if ray < tol and dobj > 1e3 * (1 + abs(pobj)):
                status, message = PRIMAL_INFEASIBLE, f"dual ray found (ratio {ray:.2e})"
                break
        if pobj < 0:
            ray = np.linalg.norm(b - rp) / -pobj
            if ray < tol and -pobj > 1e3 * (1 + abs(dobj)):
                status, message = DUAL_INFEASIBLE, f"primal ray found (ratio {ray:.2e})"
                break
        if stall >= 4:
            message = "step length collapsed"
            break
        if it == settings.max_iterations:
            break

        try:
            Zinv = [np.linalg.inv(z) for z in Z]
            Zinv = [_herm(zi) for zi in Zinv]
            M = np.zeros((m, m))
            for bl, x, zi in zip(blocks, X, Zinv):
                if len(bl.rows):
                    M[np.ix_(bl.rows, bl.rows)] += bl.schur(x, zi)
            M = (M + M.T) / 2
            fac = _factor(M)
        except (np.linalg.LinAlgError, ValueError) as exc:
            message = f"linear algebra failure: {exc}"
            break

        XRdZ = [x @ r @ zi for x, r, zi in zip(X, Rd, Zinv)]

        def direction(R):
            rhs = rp - A([r - w for r, w in zip(R, XRdZ)])
            dy = fac(rhs)
            # refine against the exact operator, not the factored matrix
            for _ in range(2):
                res = rhs - A([x @ a @ zi for x, a, zi in zip(X, At(dy), Zinv)])
                if np.linalg.norm(res) <= 1e-15 * max(1.0, np.linalg.norm(rhs)):
                    break
                dy = dy + fac(res)
            dZ = [r - a for r, a in zip(Rd, At(dy))]
            dX = [_herm(r - x @ dz @ zi) for r, x, dz, zi in zip(R, X, dZ, Zinv)]
            return dX, dy, [_herm(dz) for dz in dZ]

        dXa, dya, dZa = direction([-x for x in X])
        ap = min(1.0, min(_max_step(x, d) for x, d in zip(X, dXa)))
        ad = min(1.0, min(_max_step(z, d) for z, d in zip(Z, dZa)))
        mu_aff = sum(_inner(x + ap * dx, z + ad * dz) for x, dx, z, dz in zip(X, dXa, Z, dZa)) / nb
        sigma = min(1.0, max(0.0, mu_aff / mu) ** 3) if mu > 0 else 0.0
        R = [sigma * mu * zi - x - dx @ dz @ zi for zi, x, dx, dz in zip(Zinv, X, dXa, dZa)]
        dX, dy, dZ = direction(R)
        gamma = step_fraction + (1 - step_fraction) * 0.9 * min(ap, ad)
        ap = min(1.0, gamma * min(_max_step(x, d) for x, d in zip(X, dX)))
        ad = min(1.0, gamma * min(_max_step(z, d) for z, d in zip(Z, dZ)))
        if min(ap, ad) < 0.2:
            # the second-order term can wreck the step near a degenerate optimum;
            # fall back to a more centred first-order direction if it does better
            sig = max(sigma, 0.3)
            cX, cy, cZ = direction([sig * mu * zi - x for zi, x in zip(Zinv, X)])
            cp = min(1.0, gamma * min(_max_step(x, d) for x, d in zip(X, cX)))
            cd = min(1.0, gamma * min(_max_step(z, d) for z, d in zip(Z, cZ)))
            if min(cp, cd) > min(ap, ad):
                dX, dy, dZ, ap, ad = cX, cy, cZ, cp, cd
        history[-1].update(primal_step=ap, dual_step=ad)
        stall = stall + 1 if max(ap, ad) < 1e-8 else 0
        X = [x + ap * d for x, d in zip(X, dX)]
        Z = [z + ad * d for z, d in zip(Z, dZ)]
        y = y + ad * dy

    if status == NUMERICAL_FAILURE:
        # the diverging last iterate may be an infeasibility ray; only fall back to the best iterate otherwise
        status, message = _classify_failure(blocks, b, X, y, Z, pobj, dobj, message)
    if status == NUMERICAL_FAILURE and best is not None and best[0] < max(pres, dres, gap):
        _, X, y, Z, pres, dres, gap, pobj, dobj = best

    pobj, dobj, y, Z = pobj * cscale, dobj * cscale, y * cscale, [z * cscale for z in Z]
    for h in history:
        # history stays in the internal minimisation sense, original scale
        for key in ("primal_objective", "dual_objective", "mu"):
            h[key] *= cscale
    values = {bl.label: x for bl, x in zip(blocks, X)}
    slacks = {bl.label: z for bl, z in zip(blocks, Z)}
    for lab, (plus, minus) in pairs.items():
        values[lab] = values.pop(plus) - values.pop(minus)
        slacks[lab] = slacks.pop(plus)
        slacks.pop(minus)
    values = {blk.label: values[blk.label] for blk in p.blocks}
    slacks = {blk.label: slacks[blk.label] for blk in p.blocks}
    objective = sign * pobj + p.objective_offset
    return SdpSolution(
        status=status,
        objective_value=objective,
        block_values=values,
        dual_values=sign * y,
        primal_residual=float(pres),
        dual_residual=float(dres),
        duality_gap=float(gap),
        iterations=it,
        primal_objective=objective,
        dual_objective=sign * dobj + p.objective_offset,
        dual_slacks=slacks,
        history=history,
        message=message,
    )


def _factor(M: np.ndarray):
    """Cholesky solve of the Schur system with symmetric diagonal equilibration."""
    d = np.sqrt(np.maximum(np.diag(M), 1e-300))
    Ms = M / d[:, None] / d[None, :]
    try:
        c = sla.cho_factor(Ms, check_finite=True)
        return lambda r: sla.cho_solve(c, r / d) / d
    except np.linalg.LinAlgError:
        try:
            c = sla.cho_factor(Ms + 1e-13 * np.eye(len(M)))
            return lambda r: sla.cho_solve(c, r / d) / d
        except np.linalg.LinAlgError:
            return lambda r: np.linalg.lstsq(Ms, r / d, rcond=None)[0] / d


def _classify_failure(blocks, b, X, y, Z, pobj, dobj, message):
    """Residual-divergence ratio test applied after the iteration loop stops."""
    ratio = 1e-6
    if dobj > 0:
        aty = [bl.adjoint(y) for bl in blocks]
        resid = np.sqrt(sum(np.linalg.norm(a + z) ** 2 for a, z in zip(aty, Z)))
        if resid / dobj < ratio and dobj > 1e3:
            return PRIMAL_INFEASIBLE, f"dual ray found after stop (ratio {resid / dobj:.2e})"
    if pobj < 0:
        ax = sum(bl.apply(x) for bl, x in zip(blocks, X)) if blocks else np.zeros_like(b)
        r = np.linalg.norm(ax) / -pobj
        if r < ratio and -pobj > 1e3:
            return DUAL_INFEASIBLE, f"primal ray found after stop (ratio {r:.2e})"
    return NUMERICAL_FAILURE, message
