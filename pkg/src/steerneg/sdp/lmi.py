"""Linear matrix inequality problems and their equality-form duals.

An :class:`LmiProblem` optimises ``c.y`` over a real vector ``y`` subject to
affine equalities ``E y = e`` and Hermitian matrix inequalities

    S_b(y) = G0_b + sum_k y_k G_kb  >= 0.

:meth:`LmiProblem.to_sdp` eliminates the equalities and returns the Lagrange
dual in equality form together with a map taking its solution back to ``y``.
By strong duality both problems share the optimal value, and the dual vector
of the equality-form solve is exactly (minus) the free LMI variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .problem import COMPLEX_PSD, REAL_PSD, Block, LinearFunctional, SdpProblem, SdpSolution


@dataclass
class LmiBlock:
    label: str
    dim: int
    const: np.ndarray  # G0, Hermitian
    coeffs: sp.csr_matrix  # (n_vars, dim*dim), row k = vec(G_k)
    is_complex: bool = True

    def value(self, y: np.ndarray) -> np.ndarray:
        v = self.const.ravel() + (self.coeffs.T @ y)
        return v.reshape(self.dim, self.dim)


@dataclass
class LmiProblem:
    n_vars: int
    objective: np.ndarray
    sense: str = "maximize"
    offset: float = 0.0
    blocks: list[LmiBlock] = field(default_factory=list)
    eq_rows: list[np.ndarray] = field(default_factory=list)
    eq_rhs: list[float] = field(default_factory=list)

    def add_block(self, label, dim, const, coeffs, is_complex=True):
        coeffs = sp.csr_matrix(coeffs, shape=(self.n_vars, dim * dim), dtype=complex)
        self.blocks.append(LmiBlock(label, dim, np.asarray(const, dtype=complex), coeffs, is_complex))

    def add_equality(self, row, rhs: float):
        self.eq_rows.append(np.asarray(row, dtype=float).reshape(self.n_vars))
        self.eq_rhs.append(float(rhs))

    def evaluate(self, y: np.ndarray) -> float:
        return float(self.objective @ y) + self.offset

    def to_sdp(self) -> tuple[SdpProblem, "LmiRecovery"]:
        n = self.n_vars
        c = np.asarray(self.objective, dtype=float)
        if self.sense == "minimize":
            c = -c
        free = np.arange(n)
        basic = np.array([], dtype=int)
        y0 = np.zeros(n)
        T = np.zeros((0, n))
        if self.eq_rows:
            E = np.vstack(self.eq_rows)
            e = np.array(self.eq_rhs)
            _, r, piv = sla.qr(E, pivoting=True, mode="economic")
            diag = np.abs(np.diag(r))
            rank = int(np.sum(diag > 1e-12 * max(1.0, diag.max() if diag.size else 1.0)))
            basic = np.sort(piv[:rank])
            free = np.setdiff1d(np.arange(n), basic)
            EB, EN = E[:, basic], E[:, free]
            sol, *_ = np.linalg.lstsq(EB, e, rcond=None)
            if np.linalg.norm(EB @ sol - e) > 1e-9 * (1 + np.linalg.norm(e)):
                raise ValueError("inconsistent equality constraints")
            y0[basic] = sol
            T = np.linalg.lstsq(EB, EN, rcond=None)[0]  # y_B = sol - T y_N
        const_obj = float(c @ y0)
        c_free = c[free] - (c[basic] @ T if len(basic) else 0.0)

        sdp_blocks, consts, coeffs = [], [], []
        for blk in self.blocks:
            g = blk.coeffs
            const = blk.const.ravel() + (g.T @ y0)
            gf = g[free]
            if len(basic):
                gf = gf - sp.csr_matrix(T.T) @ g[basic]
            consts.append(const.reshape(blk.dim, blk.dim))
            coeffs.append(sp.csr_matrix(gf))
            sdp_blocks.append(Block(blk.label, blk.dim, COMPLEX_PSD if blk.is_complex else REAL_PSD))

        # <G, X> = sum(conj(G) * X) for Hermitian G
        obj = LinearFunctional({blk.label: sp.csr_matrix(np.conj(g0)) for blk, g0 in zip(sdp_blocks, consts)})
        eqs = []
        for j in range(len(free)):
            fn = {}
            for blk, g in zip(sdp_blocks, coeffs):
                row = g.getrow(j)
                if row.nnz:
                    fn[blk.label] = sp.csr_matrix(row.conj().toarray().reshape(blk.dim, blk.dim))
            eqs.append((LinearFunctional(fn), -float(c_free[j])))
        offset = const_obj + (self.offset if self.sense == "maximize" else -self.offset)
        if self.sense == "maximize":
            p = SdpProblem(sdp_blocks, obj, "minimize", eqs, offset)
        else:
            p = SdpProblem(sdp_blocks, obj.scaled(-1.0), "maximize", eqs, -offset)
        return p, LmiRecovery(n, free, basic, y0, T, self.sense)


@dataclass
class LmiRecovery:
    n_vars: int
    free: np.ndarray
    basic: np.ndarray
    y0: np.ndarray
    T: np.ndarray
    sense: str

    def __call__(self, sol: SdpSolution) -> np.ndarray:
        z = -sol.dual_values if self.sense == "maximize" else sol.dual_values
        y = self.y0.copy()
        y[self.free] = z
        if len(self.basic):
            y[self.basic] = self.y0[self.basic] - self.T @ z
        return y
