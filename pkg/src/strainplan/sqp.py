"""Sparse SQP solver for the collocation NLPs.

The solver iterates convex QP subproblems built from exact constraint
Jacobians and a damped positive-semidefinite Hessian approximation supplied
by the problem, globalized by an l1-merit backtracking line search.  The QP
subproblem (equalities, general inequalities and variable bounds) is solved
with a primal-dual interior-point method on sparse KKT systems; no external
optimization package is involved.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolveStatus(Enum):
    CONVERGED = "CONVERGED"
    MAX_ITER = "MAX_ITER"
    INFEASIBLE = "INFEASIBLE"


class NlpProblem(Protocol):
    """Interface the SQP solver drives.

    Constraint conventions: eq(z) = 0, ineq(z) <= 0, lb <= z <= ub (with
    +/-inf entries for free variables).  Jacobians are scipy sparse with a
    fixed sparsity pattern; ``hessian`` returns a PSD approximation of the
    Lagrangian Hessian.
    """

    n: int

    def objective(self, z: np.ndarray) -> float: ...
    def gradient(self, z: np.ndarray) -> np.ndarray: ...
    def eq_constraints(self, z: np.ndarray) -> np.ndarray: ...
    def eq_jacobian(self, z: np.ndarray) -> sp.spmatrix: ...
    def ineq_constraints(self, z: np.ndarray) -> np.ndarray: ...
    def ineq_jacobian(self, z: np.ndarray) -> sp.spmatrix: ...
    def bounds(self) -> tuple[np.ndarray, np.ndarray]: ...
    def hessian(self, z: np.ndarray, lam_eq: np.ndarray,
                lam_ineq: np.ndarray) -> sp.spmatrix: ...


@dataclass
class SqpResult:
    z: np.ndarray
    lam_eq: np.ndarray
    lam_ineq: np.ndarray
    status: SolveStatus
    iterations: int
    objective: float
    eq_violation: float
    ineq_violation: float
    kkt_residual: float
    solve_time: float
    merit_history: list[tuple[float, float]] = field(default_factory=list)


class QpFailure(Exception):
    pass


class QpWorkspace:
    """Interior-point QP solver reusing the KKT sparsity across calls.

    min 1/2 p'Hp + g'p  s.t.  A p = b,  G p <= h, solved by Mehrotra
    predictor-corrector steps on the reduced KKT system
    [[H + G'WG + reg I, A'], [A, -reg I]].  All QPs inside one SQP run share
    their sparsity pattern, so the assembly map (including duplicate
    summing) is computed once; slacks and duals warm-start from the
    previous call.
    """

    def __init__(self):
        self._signature = None
        self._warm: tuple[np.ndarray, np.ndarray] | None = None

    # -- template ------------------------------------------------------------

    def _build(self, hess: sp.csr_matrix, a_eq: sp.csr_matrix,
               g_ineq: sp.csr_matrix):
        n = hess.shape[0]
        m_eq = a_eq.shape[0]
        h_coo = hess.tocoo()
        a_coo = a_eq.tocoo()

        # expanded G'WG entries: per inequality row, outer product of its nnz
        # (positions into G's data array; values are recomputed every call
        # because general inequality rows are relinearized)
        gw_rows, gw_cols, gw_a, gw_b, gw_row_id = [], [], [], [], []
        indptr, indices = g_ineq.indptr, g_ineq.indices
        for r in range(g_ineq.shape[0]):
            lo, hi = indptr[r], indptr[r + 1]
            for a in range(lo, hi):
                for b in range(lo, hi):
                    gw_rows.append(indices[a])
                    gw_cols.append(indices[b])
                    gw_a.append(a)
                    gw_b.append(b)
                    gw_row_id.append(r)
        gw_rows = np.asarray(gw_rows, dtype=np.int64)
        gw_cols = np.asarray(gw_cols, dtype=np.int64)
        self._gw_a = np.asarray(gw_a, dtype=np.int64)
        self._gw_b = np.asarray(gw_b, dtype=np.int64)
        self._gw_row_id = np.asarray(gw_row_id, dtype=np.int64)

        dim = n + m_eq
        rows = np.concatenate([
            h_coo.row, np.arange(n), gw_rows,
            a_coo.col, a_coo.row + n, np.arange(m_eq) + n,
        ])
        cols = np.concatenate([
            h_coo.col, np.arange(n), gw_cols,
            a_coo.row + n, a_coo.col, np.arange(m_eq) + n,
        ])
        sizes = [h_coo.nnz, n, len(gw_rows), a_coo.nnz, a_coo.nnz, m_eq]
        offsets = np.cumsum([0] + sizes)
        self._seg = {
            "h": slice(offsets[0], offsets[1]),
            "reg_p": slice(offsets[1], offsets[2]),
            "gw": slice(offsets[2], offsets[3]),
            "at": slice(offsets[3], offsets[4]),
            "a": slice(offsets[4], offsets[5]),
            "reg_d": slice(offsets[5], offsets[6]),
        }
        self._n_entries = offsets[-1]

        # csc assembly map with duplicate summing
        order = np.lexsort((rows, cols))
        rs, cs = rows[order], cols[order]
        new_group = np.ones(len(rs), dtype=bool)
        new_group[1:] = (rs[1:] != rs[:-1]) | (cs[1:] != cs[:-1])
        starts = np.flatnonzero(new_group)
        self._order = order
        self._starts = starts
        self._csc_indices = rs[starts].astype(np.int32)
        self._csc_indptr = np.searchsorted(cs[starts], np.arange(dim + 1)).astype(np.int32)
        self._dim = dim
        self._signature = (n, m_eq, g_ineq.shape[0], h_coo.nnz, a_coo.nnz,
                           g_ineq.nnz)

    def _factor(self, h_data, a_data, g_data, w, reg):
        data = np.empty(self._n_entries)
        seg = self._seg
        data[seg["h"]] = h_data
        data[seg["reg_p"]] = reg
        data[seg["gw"]] = (
            g_data[self._gw_a] * g_data[self._gw_b] * w[self._gw_row_id]
        )
        data[seg["at"]] = a_data
        data[seg["a"]] = a_data
        data[seg["reg_d"]] = -reg
        csc_data = np.add.reduceat(data[self._order], self._starts)
        kkt = sp.csc_matrix(
            (csc_data, self._csc_indices, self._csc_indptr),
            shape=(self._dim, self._dim),
        )
        return spla.splu(kkt)

    # -- solve ----------------------------------------------------------------

    def solve(
        self,
        hess: sp.spmatrix,
        grad: np.ndarray,
        a_eq: sp.spmatrix,
        b_eq: np.ndarray,
        g_ineq: sp.spmatrix | None,
        h_ineq: np.ndarray | None,
        max_iter: int = 30,
        tol: float = 1e-10,
    ):
        n = grad.shape[0]
        m_eq = b_eq.shape[0]
        m_in = 0 if g_ineq is None else g_ineq.shape[0]
        hess = hess.tocsr()
        a_eq = a_eq.tocsr()
        g_ineq = g_ineq.tocsr() if m_in else sp.csr_matrix((0, n))

        signature = (n, m_eq, m_in, hess.nnz, a_eq.nnz, g_ineq.nnz)
        if signature != self._signature:
            self._build(hess, a_eq, g_ineq)
            self._warm = None
        g_t = g_ineq.T.tocsr()
        a_t = a_eq.T.tocsr()

        if m_in == 0:
            try:
                lu = self._factor(hess.data, a_eq.data, g_ineq.data, np.zeros(0), 1e-12)
                sol = lu.solve(np.concatenate([-grad, b_eq]))
            except RuntimeError as exc:
                raise QpFailure(str(exc)) from exc
            return sol[:n], sol[n:], np.zeros(0)

        p = np.zeros(n)
        y = np.zeros(m_eq)
        h_scale = 1.0 + float(np.abs(h_ineq).max())
        grad_scale = 1.0 + float(np.abs(grad).max())
        s = np.maximum(h_ineq, 1e-2 * h_scale)
        mu = np.full(m_in, max(1.0, grad_scale / max(float(s.max()), 1.0)))

        scale = max(1.0, float(np.abs(grad).max()),
                    float(np.abs(b_eq).max()) if m_eq else 0.0,
                    float(np.abs(h_ineq).max()))
        gap0 = max(float(mu @ s) / m_in, 1.0)
        best = None
        best_score = np.inf
        reg = 1e-10
        stalls = 0
        for _ in range(max_iter):
            r_dual = hess @ p + grad + a_t @ y + g_t @ mu
            r_eq = a_eq @ p - b_eq
            r_in = g_ineq @ p + s - h_ineq
            gap = float(mu @ s) / m_in
            score = max(
                gap / gap0,
                float(np.abs(r_eq).max(initial=0.0)) / scale,
                float(np.abs(r_in).max(initial=0.0)) / scale,
                1e-2 * float(np.abs(r_dual).max()) / grad_scale,
            )
            if score < best_score:
                best_score = score
                best = (p.copy(), y.copy(), mu.copy())
            if (
                gap < tol * gap0
                and np.abs(r_eq).max(initial=0.0) < tol * scale
                and np.abs(r_in).max(initial=0.0) < tol * scale
                and np.abs(r_dual).max() < max(1e2 * tol, 1e-6) * grad_scale
            ):
                break
            if stalls >= 3:
                break

            w = np.minimum(mu / s, 1e14)
            try:
                lu = self._factor(hess.data, a_eq.data, g_ineq.data, w, reg)
            except RuntimeError:
                reg *= 100.0
                if reg > 1e-2:
                    raise QpFailure("KKT factorization failed")
                continue

            def kkt_step(comp_target):
                # eliminate (s, mu): ds = -r_in - G dp,
                # dmu = (comp_target - mu*s)/s - w*ds
                rhs1 = -(r_dual + g_t @ ((comp_target - mu * s) / s - w * r_in))
                sol = lu.solve(np.concatenate([rhs1, -r_eq]))
                dp, dy = sol[:n], sol[n:]
                ds = -r_in - g_ineq @ dp
                dmu = (comp_target - mu * s) / s - w * ds
                return dp, dy, ds, dmu

            # affine (predictor) step
            dp_a, dy_a, ds_a, dmu_a = kkt_step(np.zeros(m_in))
            alpha_s = _max_step(s, ds_a)
            alpha_mu = _max_step(mu, dmu_a)
            gap_aff = float((mu + alpha_mu * dmu_a) @ (s + alpha_s * ds_a)) / m_in
            sigma = (gap_aff / gap) ** 3 if gap > 0 else 0.0

            # corrector step
            target = sigma * gap - dmu_a * ds_a
            dp, dy, ds, dmu = kkt_step(target)
            alpha = 0.995 * min(_max_step(s, ds), _max_step(mu, dmu), 1.0 / 0.995)
            if alpha < 1e-3:
                stalls += 1
            else:
                stalls = 0
            p += alpha * dp
            y += alpha * dy
            s += alpha * ds
            mu += alpha * dmu
            s = np.maximum(s, 1e-14)
            mu = np.maximum(mu, 1e-14)

        if best is None:
            return p, y, mu
        return best


def solve_qp(hess, grad, a_eq, b_eq, g_ineq, h_ineq, max_iter=30, tol=1e-10):
    """One-shot convenience wrapper around QpWorkspace."""
    return QpWorkspace().solve(hess, grad, a_eq, b_eq, g_ineq, h_ineq,
                               max_iter, tol)


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _second_order_correction(problem, z, p, lb, ub):
    """Least-norm shift of the full step onto the constraint surface
    re-evaluated at z + p; returns the corrected point or None."""
    z_trial = z + p
    c_trial = problem.eq_constraints(z_trial)
    jac = problem.eq_jacobian(z).tocsr()
    n, m = jac.shape[1], jac.shape[0]
    kkt = sp.bmat(
        [[sp.eye(n), jac.T], [jac, -1e-12 * sp.eye(m)]], format="csc"
    )
    try:
        sol = spla.splu(kkt).solve(np.concatenate([np.zeros(n), -c_trial]))
    except RuntimeError:
        return None
    return np.clip(z_trial + sol[:n], lb, ub)


def _bounds_as_rows(lb, ub, n):
    """Finite variable bounds as inequality rows of G p <= h."""
    fin_ub = np.where(np.isfinite(ub))[0]
    fin_lb = np.where(np.isfinite(lb))[0]
    n_rows = len(fin_ub) + len(fin_lb)
    rows = np.arange(n_rows)
    cols = np.concatenate([fin_ub, fin_lb])
    data = np.concatenate([np.ones(len(fin_ub)), -np.ones(len(fin_lb))])
    g = sp.coo_matrix((data, (rows, cols)), shape=(n_rows, n)).tocsr()
    return g, fin_ub, fin_lb


def solve_sqp(
    problem: NlpProblem,
    z0: np.ndarray,
    max_iter: int = 100,
    tol_eq: float = 1e-8,
    tol_ineq: float = 1e-8,
    tol_step: float = 1e-3,
    armijo: float = 1e-4,
    qp_max_iter: int = 30,
) -> SqpResult:
    start = time.perf_counter()
    lb, ub = problem.bounds()
    z = np.clip(np.asarray(z0, dtype=float), lb, ub)
    n = problem.n
    g_bounds, fin_ub, fin_lb = _bounds_as_rows(lb, ub, n)
    qp_ws = QpWorkspace()

    nu = 1.0  # l1 penalty weight of the merit function
    lam_eq = np.zeros(len(problem.eq_constraints(z)))
    lam_in = np.zeros(len(problem.ineq_constraints(z)))
    merit_history: list[tuple[float, float]] = []
    status = SolveStatus.MAX_ITER
    kkt_res = np.inf
    it = 0

    def infeasibility(z):
        c_eq = problem.eq_constraints(z)
        c_in = problem.ineq_constraints(z)
        return (
            float(np.abs(c_eq).sum() + np.clip(c_in, 0.0, None).sum()),
            float(np.abs(c_eq).max(initial=0.0)),
            float(np.clip(c_in, 0.0, None).max(initial=0.0)),
        )

    damping = 0.0  # Levenberg-style, adapted by line-search outcomes
    for it in range(1, max_iter + 1):
        obj = problem.objective(z)
        grad = problem.gradient(z)
        c_eq = problem.eq_constraints(z)
        c_in = problem.ineq_constraints(z)
        j_eq = problem.eq_jacobian(z)
        j_in = problem.ineq_jacobian(z)
        hess = problem.hessian(z, lam_eq, lam_in)
        if damping > 0.0:
            hess = hess + damping * sp.eye(problem.n, format="csr")

        # stack general inequalities with variable-bound rows
        if j_in.shape[0] > 0:
            g_all = sp.vstack([j_in.tocsr(), g_bounds], format="csr")
            h_all = np.concatenate([-c_in, ub[fin_ub] - z[fin_ub], z[fin_lb] - lb[fin_lb]])
        else:
            g_all = g_bounds
            h_all = np.concatenate([ub[fin_ub] - z[fin_ub], z[fin_lb] - lb[fin_lb]])

        # inexact SQP: subproblems far from feasibility need few IP digits
        eq_now = float(np.abs(c_eq).max(initial=0.0))
        qp_tol = float(np.clip(1e-3 * eq_now, 1e-10, 1e-4))
        try:
            p, y_eq, mu_all = qp_ws.solve(hess, grad, j_eq, -c_eq, g_all, h_all,
                                          max_iter=qp_max_iter, tol=qp_tol)
        except QpFailure:
            status = SolveStatus.INFEASIBLE
            break
        lam_eq = y_eq
        lam_in = mu_all[: j_in.shape[0]] if j_in.shape[0] else np.zeros(0)

        # KKT residual with the fresh multipliers
        stat = grad + j_eq.T @ y_eq + (g_all.T @ mu_all if g_all.shape[0] else 0.0)
        kkt_res = float(np.abs(stat).max()) / max(1.0, float(np.abs(grad).max()))

        l1_pre, eq_inf, in_inf = infeasibility(z)
        step = float(np.abs(p).max(initial=0.0))
        if eq_inf <= tol_eq and in_inf <= tol_ineq and (
            step <= tol_step * (1.0 + float(np.abs(z).max())) or kkt_res <= 1e-7
        ):
            status = SolveStatus.CONVERGED
            break

        # the merit penalizes equalities and general inequalities only, so
        # only their multipliers bound the exact-penalty weight (variable
        # bounds stay feasible along QP steps and never enter the merit);
        # allow decay once early-phase multiplier spikes have passed
        mult_max = max(
            float(np.abs(y_eq).max(initial=0.0)),
            float(np.abs(lam_in).max(initial=0.0)),
        )
        nu_target = 2.0 * mult_max + 1.0
        nu = max(nu_target, 0.7 * nu) if nu > nu_target else nu_target
        merit0 = obj + nu * l1_pre
        descent = float(grad @ p) - nu * l1_pre

        alpha = 1.0
        accepted = False
        merit_try = merit0
        soc_tried = False
        for _ in range(40):
            z_try = z + alpha * p
            l1_try, _, _ = infeasibility(z_try)
            merit_try = problem.objective(z_try) + nu * l1_try
            if merit_try <= merit0 + armijo * alpha * descent or (
                descent >= 0 and merit_try <= merit0 + 1e-12 * abs(merit0)
            ):
                accepted = True
                break
            if alpha == 1.0 and not soc_tried:
                # second-order correction: retarget the full step at the
                # constraints evaluated at the trial point (anti-Maratos)
                soc_tried = True
                z_soc = _second_order_correction(problem, z, p, lb, ub)
                if z_soc is not None:
                    l1_soc, _, _ = infeasibility(z_soc)
                    merit_soc = problem.objective(z_soc) + nu * l1_soc
                    if merit_soc <= merit0 + armijo * descent:
                        z_try = z_soc
                        merit_try = merit_soc
                        accepted = True
                        break
            alpha *= 0.5
        # (pre-step, post-step) merit under the penalty weight used for the
        # acceptance test; monotonicity is asserted on these pairs
        merit_history.append((merit0, merit_try))

        # the quadratic model overshot when steps get chopped: stiffen the
        # damping (shorter, more reliable proposals); relax it on full steps
        if accepted:
            scale = max(float(np.abs(hess.diagonal()).mean()), 1e-6)
            if alpha < 0.25:
                damping = max(damping * 4.0, 1e-3 * scale)
            elif alpha >= 0.5:
                damping *= 0.25
                if damping < 1e-9 * scale:
                    damping = 0.0
        if not accepted:
            # cannot improve the merit along the QP direction; if the
            # iterate is infeasible, project back onto the constraints
            # (pure Newton restoration) and continue, otherwise stop
            _, eq_inf, in_inf = infeasibility(z)
            if eq_inf > tol_eq:
                z_rest = _second_order_correction(problem, z, np.zeros(n), lb, ub)
                if z_rest is not None:
                    _, eq_rest, _ = infeasibility(z_rest)
                    if eq_rest <= 0.5 * eq_inf:
                        z = z_rest
                        continue
            status = (
                SolveStatus.MAX_ITER
                if eq_inf <= 1e3 * tol_eq and in_inf <= 1e3 * tol_ineq
                else SolveStatus.INFEASIBLE
            )
            break
        z = z_try

    _, eq_inf, in_inf = infeasibility(z)
    if status == SolveStatus.CONVERGED and (eq_inf > tol_eq or in_inf > tol_ineq):
        status = SolveStatus.MAX_ITER
    return SqpResult(
        z=z,
        lam_eq=lam_eq,
        lam_ineq=lam_in,
        status=status,
        iterations=it,
        objective=problem.objective(z),
        eq_violation=eq_inf,
        ineq_violation=in_inf,
        kkt_residual=kkt_res,
        solve_time=time.perf_counter() - start,
        merit_history=merit_history,
    )
