"""Direct collocation transcription of trajectory optimization problems.

The horizon splits into N equal intervals; state trajectories are degree-d
polynomials through the interval knot and d Legendre-Gauss collocation
points, where the dynamics are enforced.  Controls are piecewise constant
per interval.  The decision vector holds knot states, collocation states,
controls and terminal slack variables; the resulting sparse NLP is solved
by the in-house SQP solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp


def collocation_coefficients(degree: int):
    """Legendre-Gauss nodes on (0,1) plus Lagrange-basis coefficient tables.

    Returns (tau, deriv, end, quad): tau includes the interval start 0;
    deriv[r, j] = dl_r/dtau at tau_j; end[r] = l_r(1); quad[r] = integral of
    l_r over [0, 1] (zero for the start node with Gauss points).
    """
    pts, _ = np.polynomial.legendre.leggauss(degree)
    tau = np.concatenate([[0.0], (pts + 1.0) / 2.0])
    n = degree + 1
    deriv = np.zeros((n, n))
    end = np.zeros(n)
    quad = np.zeros(n)
    for r in range(n):
        roots = np.delete(tau, r)
        poly = np.polynomial.Polynomial.fromroots(roots)
        poly = poly / poly(tau[r])
        dpoly = poly.deriv()
        deriv[r] = dpoly(tau)
        end[r] = poly(1.0)
        integ = poly.integ()
        quad[r] = integ(1.0) - integ(0.0)
    return tau, deriv, end, quad


@dataclass(frozen=True)
class TerminalSet:
    """Componentwise quadratic terminal constraint with soft-margin slack.

    (x_N[i] - target[i])^2 <= epsilon[i] + slack_i for the selected state
    indices, slack >= 0 penalized linearly (exact penalty) so short-horizon
    instances stay feasible.
    """

    target: np.ndarray
    epsilon: np.ndarray
    indices: np.ndarray
    penalty: float = 1e4


DynamicsFn = Callable[[np.ndarray, np.ndarray], tuple]
CostFn = Callable[[np.ndarray, np.ndarray], tuple]


class Transcription:
    """Sparse NLP for one optimal-control instance (NlpProblem protocol)."""

    def __init__(
        self,
        dynamics: DynamicsFn,
        running_cost: CostFn | None,
        q_init: np.ndarray,
        horizon: float,
        n_intervals: int,
        degree: int = 3,
        nx: int = 6,
        nu: int = 3,
        u_min: np.ndarray | None = None,
        u_max: np.ndarray | None = None,
        terminal: TerminalSet | None = None,
        hessian_damping: float = 1e-8,
    ):
        if n_intervals < 1:
            raise ValueError("need at least one interval")
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        q_init = np.asarray(q_init, dtype=float)
        if q_init.shape != (nx,):
            raise ValueError(f"q_init must have shape ({nx},)")
        if u_min is not None and u_max is not None and np.any(
            np.asarray(u_min) >= np.asarray(u_max)
        ):
            raise ValueError("u_min must be elementwise below u_max")

        self.dynamics = dynamics
        self.running_cost = running_cost
        self.q_init = q_init
        self.horizon = float(horizon)
        self.n_intervals = int(n_intervals)
        self.degree = int(degree)
        self.nx, self.nu = nx, nu
        self.h = self.horizon / self.n_intervals
        self.u_min = None if u_min is None else np.asarray(u_min, dtype=float)
        self.u_max = None if u_max is None else np.asarray(u_max, dtype=float)
        self.terminal = terminal
        self.damping = float(hessian_damping)

        self.tau, self._deriv, self._end, self._quad = collocation_coefficients(degree)

        d, N = self.degree, self.n_intervals
        self._blk = nu + d * nx + nx
        self.n_slack = 0 if terminal is None else len(terminal.indices)
        self.n = nx + N * self._blk + self.n_slack
        self.m_eq = nx + N * (d * nx + nx)
        self.m_ineq = self.n_slack

        self._build_structure()
        self._cache_key: bytes | None = None

    # -- variable layout -----------------------------------------------------

    def idx_knot(self, k: int) -> np.ndarray:
        nx, nu, d = self.nx, self.nu, self.degree
        if k == 0:
            return np.arange(nx)
        base = nx + (k - 1) * self._blk + nu + d * nx
        return np.arange(base, base + nx)

    def idx_control(self, k: int) -> np.ndarray:
        base = self.nx + k * self._blk
        return np.arange(base, base + self.nu)

    def idx_colloc(self, k: int, j: int) -> np.ndarray:
        """j in 1..degree."""
        base = self.nx + k * self._blk + self.nu + (j - 1) * self.nx
        return np.arange(base, base + self.nx)

    @property
    def idx_slack(self) -> np.ndarray:
        base = self.nx + self.n_intervals * self._blk
        return np.arange(base, base + self.n_slack)

    def pack(self, knots, collocs, controls, slack=None) -> np.ndarray:
        z = np.zeros(self.n)
        for k in range(self.n_intervals + 1):
            z[self.idx_knot(k)] = knots[k]
        for k in range(self.n_intervals):
            z[self.idx_control(k)] = controls[k]
            for j in range(1, self.degree + 1):
                z[self.idx_colloc(k, j)] = collocs[k][j - 1]
        if self.n_slack:
            z[self.idx_slack] = 0.0 if slack is None else slack
        return z

    def unpack(self, z):
        N, d = self.n_intervals, self.degree
        knots = np.stack([z[self.idx_knot(k)] for k in range(N + 1)])
        collocs = np.stack(
            [[z[self.idx_colloc(k, j)] for j in range(1, d + 1)] for k in range(N)]
        )
        controls = np.stack([z[self.idx_control(k)] for k in range(N)])
        return knots, collocs, controls

    # -- cached evaluation of dynamics and cost ------------------------------

    def _gather(self, z):
        """Collocation-point states (N*d, nx) and matching controls."""
        N, d = self.n_intervals, self.degree
        xc = np.empty((N * d, self.nx))
        uc = np.empty((N * d, self.nu))
        for k in range(N):
            u = z[self.idx_control(k)]
            for j in range(1, d + 1):
                xc[k * d + j - 1] = z[self.idx_colloc(k, j)]
                uc[k * d + j - 1] = u
        return xc, uc

    def _evaluate(self, z):
        key = z.tobytes()
        if key == self._cache_key:
            return
        xc, uc = self._gather(z)
        f_val, f_jx, f_ju = self.dynamics(xc, uc)
        self._f_val, self._f_jx, self._f_ju = f_val, f_jx, f_ju
        if self.running_cost is not None:
            # the cost callback receives the dynamics evaluation so
            # acceleration terms do not re-evaluate f
            self._l_val, self._l_jx, self._l_ju, self._l_h = self.running_cost(
                xc, uc, f_val, f_jx, f_ju
            )
        self._cache_key = key

    # -- objective -----------------------------------------------------------

    def objective(self, z) -> float:
        total = 0.0
        if self.running_cost is not None:
            self._evaluate(z)
            d = self.degree
            weights = np.tile(self._quad[1:], self.n_intervals)
            total += self.h * float(weights @ self._l_val)
        if self.n_slack:
            total += self.terminal.penalty * float(z[self.idx_slack].sum())
        return total

    def gradient(self, z) -> np.ndarray:
        g = np.zeros(self.n)
        if self.running_cost is not None:
            self._evaluate(z)
            d = self.degree
            for k in range(self.n_intervals):
                iu = self.idx_control(k)
                for j in range(1, d + 1):
                    w = self.h * self._quad[j]
                    row = k * d + j - 1
                    g[self.idx_colloc(k, j)] += w * self._l_jx[row]
                    g[iu] += w * self._l_ju[row]
        if self.n_slack:
            g[self.idx_slack] = self.terminal.penalty
        return g

    def hessian(self, z, lam_eq, lam_ineq) -> sp.spmatrix:
        """Damped Gauss-Newton Hessian of cost plus the PSD curvature of the
        terminal inequality rows."""
        rows, cols, data = [self._h_diag_rows], [self._h_diag_rows], [
            np.full(self.n, self.damping)
        ]
        if self.running_cost is not None:
            self._evaluate(z)
            d = self.degree
            nxu = self.nx + self.nu
            for k in range(self.n_intervals):
                idx_u = self.idx_control(k)
                for j in range(1, d + 1):
                    w = self.h * self._quad[j]
                    blk_idx = np.concatenate([self.idx_colloc(k, j), idx_u])
                    rr, cc = np.meshgrid(blk_idx, blk_idx, indexing="ij")
                    rows.append(rr.ravel())
                    cols.append(cc.ravel())
                    data.append((w * self._l_h[k * d + j - 1]).ravel())
        if self.n_slack and len(lam_ineq) == self.n_slack:
            idx = self.idx_knot(self.n_intervals)[self.terminal.indices]
            rows.append(idx)
            cols.append(idx)
            data.append(2.0 * np.clip(lam_ineq, 0.0, None))
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        data = np.concatenate(data)
        return sp.coo_matrix((data, (rows, cols)), shape=(self.n, self.n)).tocsr()

    # -- equality constraints -------------------------------------------------

    def eq_constraints(self, z) -> np.ndarray:
        self._evaluate(z)
        N, d, nx = self.n_intervals, self.degree, self.nx
        out = np.empty(self.m_eq)
        out[:nx] = z[self.idx_knot(0)] - self.q_init
        pos = nx
        for k in range(N):
            states = [z[self.idx_knot(k)]] + [
                z[self.idx_colloc(k, j)] for j in range(1, d + 1)
            ]
            for j in range(1, d + 1):
                poly_dot = sum(self._deriv[r, j] * states[r] for r in range(d + 1))
                out[pos : pos + nx] = poly_dot - self.h * self._f_val[k * d + j - 1]
                pos += nx
            interp_end = sum(self._end[r] * states[r] for r in range(d + 1))
            out[pos : pos + nx] = z[self.idx_knot(k + 1)] - interp_end
            pos += nx
        return out

    def _build_structure(self):
        """COO template of the equality Jacobian: constant entries first,
        then per-collocation-point dynamics blocks updated in place."""
        N, d, nx, nu = self.n_intervals, self.degree, self.nx, self.nu
        rows, cols, const = [], [], []
        self._h_diag_rows = np.arange(self.n)

        eye = np.arange(nx)
        rows.append(eye)
        cols.append(self.idx_knot(0))
        const.append(np.ones(nx))

        pos = nx
        for k in range(N):
            blocks = [self.idx_knot(k)] + [
                self.idx_colloc(k, j) for j in range(1, d + 1)
            ]
            for j in range(1, d + 1):
                for r in range(d + 1):
                    rows.append(pos + eye)
                    cols.append(blocks[r])
                    const.append(np.full(nx, self._deriv[r, j]))
                pos += nx
            rows.append(pos + eye)
            cols.append(self.idx_knot(k + 1))
            const.append(np.ones(nx))
            for r in range(d + 1):
                rows.append(pos + eye)
                cols.append(blocks[r])
                const.append(np.full(nx, -self._end[r]))
            pos += nx

        # variable part: -h * df/dx at the collocation block, -h * df/du at
        # the interval control, in fixed (k, j) order
        var_rows, var_cols = [], []
        pos = nx
        for k in range(N):
            iu = self.idx_control(k)
            for j in range(1, d + 1):
                ix = self.idx_colloc(k, j)
                rr, cc = np.meshgrid(pos + eye, ix, indexing="ij")
                var_rows.append(rr.ravel())
                var_cols.append(cc.ravel())
                rr, cc = np.meshgrid(pos + eye, iu, indexing="ij")
                var_rows.append(rr.ravel())
                var_cols.append(cc.ravel())
                pos += nx
            pos += nx

        self._jac_rows = np.concatenate(rows + var_rows)
        self._jac_cols = np.concatenate(cols + var_cols)
        self._jac_const = np.concatenate(const)
        self._n_var_entries = self.n_intervals * d * (nx * nx + nx * nu)

    def eq_jacobian(self, z) -> sp.spmatrix:
        self._evaluate(z)
        N, d, nx, nu = self.n_intervals, self.degree, self.nx, self.nu
        var = np.empty(self._n_var_entries)
        pos = 0
        for idx in range(N * d):
            var[pos : pos + nx * nx] = (-self.h * self._f_jx[idx]).ravel()
            pos += nx * nx
            var[pos : pos + nx * nu] = (-self.h * self._f_ju[idx]).ravel()
            pos += nx * nu
        data = np.concatenate([self._jac_const, var])
        return sp.coo_matrix(
            (data, (self._jac_rows, self._jac_cols)), shape=(self.m_eq, self.n)
        ).tocsr()

    # -- terminal inequality ---------------------------------------------------

    def ineq_constraints(self, z) -> np.ndarray:
        if not self.n_slack:
            return np.zeros(0)
        t = self.terminal
        x_end = z[self.idx_knot(self.n_intervals)]
        dev = x_end[t.indices] - t.target[t.indices]
        return dev * dev - t.epsilon - z[self.idx_slack]

    def ineq_jacobian(self, z) -> sp.spmatrix:
        if not self.n_slack:
            return sp.csr_matrix((0, self.n))
        t = self.terminal
        x_end = z[self.idx_knot(self.n_intervals)]
        dev = x_end[t.indices] - t.target[t.indices]
        m = self.n_slack
        rows = np.concatenate([np.arange(m), np.arange(m)])
        cols = np.concatenate(
            [self.idx_knot(self.n_intervals)[t.indices], self.idx_slack]
        )
        data = np.concatenate([2.0 * dev, -np.ones(m)])
        return sp.coo_matrix((data, (rows, cols)), shape=(m, self.n)).tocsr()

    def bounds(self):
        lb = np.full(self.n, -np.inf)
        ub = np.full(self.n, np.inf)
        for k in range(self.n_intervals):
            iu = self.idx_control(k)
            if self.u_min is not None:
                lb[iu] = self.u_min
            if self.u_max is not None:
                ub[iu] = self.u_max
        if self.n_slack:
            lb[self.idx_slack] = 0.0
        return lb, ub

    # -- diagnostics and interpolation ----------------------------------------

    def defect_max(self, z) -> float:
        c = self.eq_constraints(z)
        nx, d, N = self.nx, self.degree, self.n_intervals
        worst = 0.0
        pos = nx
        for k in range(N):
            worst = max(worst, float(np.abs(c[pos : pos + d * nx]).max()))
            pos += d * nx + nx
        return worst

    def initial_residual(self, z) -> float:
        return float(np.abs(z[self.idx_knot(0)] - self.q_init).max())

    def sparsity(self) -> dict:
        return {
            "variables": self.n,
            "equalities": self.m_eq,
            "inequalities": self.m_ineq,
            "jacobian_nnz": int(len(self._jac_rows)),
        }

    def interpolate(self, z, times) -> np.ndarray:
        """Evaluate the collocation polynomial at arbitrary times in
        [0, horizon]; knot times reproduce knot values exactly."""
        times = np.asarray(times, dtype=float)
        out = np.empty((len(times), self.nx))
        N, d = self.n_intervals, self.degree
        knots, collocs, _ = self.unpack(z)
        for i, t in enumerate(times):
            if t >= self.horizon:
                out[i] = knots[N]
                continue
            k = min(int(t / self.h), N - 1)
            local = (t - k * self.h) / self.h
            states = [knots[k]] + [collocs[k][j] for j in range(d)]
            basis = self._lagrange_basis(local)
            out[i] = sum(basis[r] * states[r] for r in range(d + 1))
        return out

    def _lagrange_basis(self, local_tau: float) -> np.ndarray:
        tau = self.tau
        n = len(tau)
        basis = np.ones(n)
        for r in range(n):
            for s in range(n):
                if s != r:
                    basis[r] *= (local_tau - tau[s]) / (tau[r] - tau[s])
        return basis

    def interpolate_controls(self, z, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        _, _, controls = self.unpack(z)
        idx = np.minimum((times / self.h).astype(int), self.n_intervals - 1)
        return controls[idx]
