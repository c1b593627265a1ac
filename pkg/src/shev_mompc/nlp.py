"""Dense SQP solver for small smooth programs with box bounds and
inequality constraints.

Sized for receding-horizon control subproblems (tens of variables): the
quasi-Newton Hessian is a dense damped-BFGS matrix, steps come from a
quadratic subproblem solved by an interior-point method, and progress is
enforced with an l1 merit line search. An elastic (slack-relaxed) QP is
used as the restoration fallback when a linearisation is inconsistent;
if even the relaxed violations refuse to shrink the solve is declared
infeasible.

Also exposes ``finite_diff_grad``, the central finite-difference oracle
the tests audit analytic gradients against.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CallbackError

logger = logging.getLogger(__name__)


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass
class NlpProblem:
    """min f(x) s.t. g(x) <= 0 and lower <= x <= upper.

    ``gradient`` and ``constraints_jac`` must be the analytic derivatives of
    the supplied callbacks; ``hessian_diag`` optionally seeds the quasi-Newton
    matrix with known curvature (e.g. for penalty-dominated coordinates).
    """

    n: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    constraints: Callable[[np.ndarray], np.ndarray] | None = None
    constraints_jac: Callable[[np.ndarray], np.ndarray] | None = None
    hessian_diag: np.ndarray | None = None
    hessian_init: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.n < 1 or self.lower.shape != (self.n,) or self.upper.shape != (self.n,):
            raise ValueError("bounds must be length-n vectors")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if (self.constraints is None) != (self.constraints_jac is None):
            raise ValueError("constraints and constraints_jac must be supplied together")


@dataclass
class NlpSolution:
    x: np.ndarray
    objective_value: float
    kkt_residual: float
    constraint_violation_max: float
    iterations: int
    status: SolveStatus
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray,
                     h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient, one coordinate at a time."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# interior-point QP subproblem solver
# ---------------------------------------------------------------------------

def _qp_ip(hess: np.ndarray, grad: np.ndarray, rows: np.ndarray, rhs: np.ndarray,
           max_iter: int = 60) -> tuple[np.ndarray, np.ndarray, bool]:
    """min 0.5 d'Hd + g'd s.t. rows @ d <= rhs, via Mehrotra predictor-corrector.

    Returns (d, duals, converged). H must be positive definite.
    """
    n = grad.size
    m_all = rows.shape[0]
    # Vacuous rows (zero gradient, non-negative slack at d=0) appear when a
    # clamped state sits exactly on its bound; they would pin an interior
    # slack at zero, so drop them and report zero duals.
    if m_all:
        keep = ~((np.max(np.abs(rows), axis=1) <= 1e-12) & (rhs >= -1e-9))
        if not np.all(keep):
            d, lam_kept, ok = _qp_ip(hess, grad, rows[keep], rhs[keep], max_iter)
            lam = np.zeros(m_all)
            lam[keep] = lam_kept
            return d, lam, ok
    m = m_all
    if m == 0:
        try:
            d = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        return d, np.zeros(0), True

    d = np.zeros(n)
    slack = np.maximum(rhs, 1.0)
    lam = np.ones(m)
    scale_g = 1.0 + float(np.max(np.abs(grad)))
    scale_b = 1.0 + float(np.max(np.abs(rhs[np.isfinite(rhs)]))) if m else 1.0
    tol = 1e-11

    def solve_kkt(w, rd, rc_over_s):
        m_mat = hess + rows.T @ (w[:, None] * rows)
        rhs_vec = -rd + rows.T @ rc_over_s
        try:
            chol = np.linalg.cholesky(m_mat)
        except np.linalg.LinAlgError:
            m_mat = m_mat + 1e-10 * np.trace(m_mat) / n * np.eye(n)
            chol = np.linalg.cholesky(m_mat)
        y = np.linalg.solve(chol, rhs_vec)
        return np.linalg.solve(chol.T, y)

    converged = False
    for _ in range(max_iter):
        rd = hess @ d + grad + rows.T @ lam
        rp = rows @ d + slack - rhs
        mu = float(slack @ lam) / m
        if (np.max(np.abs(rd)) <= tol * scale_g
                and np.max(np.abs(rp)) <= tol * scale_b
                and mu <= tol * scale_g):
            converged = True
            break
        if not np.all(np.isfinite(lam)) or np.max(lam) > 1e14:
            break

        w = np.clip(lam / np.maximum(slack, 1e-14), 1e-14, 1e16)

        # affine (predictor) step
        rc_aff = (slack * lam) / np.maximum(slack, 1e-14)
        dd_aff = solve_kkt(w, rd, rc_aff - w * rp)
        ds_aff = -rp - rows @ dd_aff
        dl_aff = -rc_aff - w * ds_aff

        def max_step(v, dv):
            neg = dv < -1e-300
            if not np.any(neg):
                return 1.0
            return min(1.0, float(np.min(-v[neg] / dv[neg])))

        a_p = max_step(slack, ds_aff)
        a_d = max_step(lam, dl_aff)
        mu_aff = float((slack + a_p * ds_aff) @ (lam + a_d * dl_aff)) / m
        sigma = (max(mu_aff, 0.0) / max(mu, 1e-300)) ** 3

        # corrected step
        rc = (slack * lam + ds_aff * dl_aff - sigma * mu) / np.maximum(slack, 1e-14)
        dd = solve_kkt(w, rd, rc - w * rp)
        ds = -rp - rows @ dd
        dl = -rc - w * ds

        a_p = 0.995 * max_step(slack, ds)
        a_d = 0.995 * max_step(lam, dl)
        d = d + a_p * dd
        slack = np.maximum(slack + a_p * ds, 1e-300)
        lam = np.maximum(lam + a_d * dl, 1e-300)

    return d, lam, converged


def _assemble_rows(jac: np.ndarray, cons: np.ndarray, dlo: np.ndarray,
                   dup: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Stack linearised constraints and finite box rows into rows @ d <= rhs."""
    n = dlo.size
    m_g = jac.shape[0] if jac.size else 0
    eye = np.eye(n)
    up_mask = np.isfinite(dup)
    lo_mask = np.isfinite(dlo)
    blocks = []
    rhs = []
    if m_g:
        blocks.append(jac)
        rhs.append(-cons)
    if np.any(up_mask):
        blocks.append(eye[up_mask])
        rhs.append(dup[up_mask])
    if np.any(lo_mask):
        blocks.append(-eye[lo_mask])
        rhs.append(-dlo[lo_mask])
    if blocks:
        return np.vstack(blocks), np.concatenate(rhs), m_g
    return np.zeros((0, n)), np.zeros(0), 0


def _solve_subproblem(bmat, grad, jac, cons, dlo, dup, elastic_weight):
    """Solve the step QP; fall back to the elastic relaxation when needed.

    Returns (d, multipliers_for_general_rows, ok, elastic_residual), where
    ``elastic_residual`` is the violation the elastic relaxation could not
    remove — positive only when the linearisation itself is inconsistent.
    """
    n = grad.size
    rows, rhs, m_g = _assemble_rows(jac, cons, dlo, dup)
    d, lam, ok = _qp_ip(bmat, grad, rows, rhs)
    if ok:
        return d, lam[:m_g], True, 0.0
    if m_g == 0:
        return d, lam[:0], False, 0.0

    # elastic relaxation: g_i(x) + J_i d <= e_i, e >= 0, linear price on e
    ext = np.zeros((n + m_g, n + m_g))
    ext[:n, :n] = bmat
    ext[n:, n:] = 1e-8 * np.eye(m_g)
    grad_ext = np.concatenate([grad, np.full(m_g, elastic_weight)])
    dlo_ext = np.concatenate([dlo, np.zeros(m_g)])
    dup_ext = np.concatenate([dup, np.full(m_g, np.inf)])
    jac_ext = np.hstack([jac, -np.eye(m_g)])
    rows_e, rhs_e, _ = _assemble_rows(jac_ext, cons, dlo_ext, dup_ext)
    z, lam_e, ok_e = _qp_ip(ext, grad_ext, rows_e, rhs_e)
    residual = float(np.max(z[n:], initial=0.0))
    return z[:n], lam_e[:m_g], ok_e, residual


# ---------------------------------------------------------------------------
# SQP driver
# ---------------------------------------------------------------------------

def _checked(values, what: str):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise CallbackError(f"{what} returned a non-finite value")
    return arr


def solve_nlp(problem: NlpProblem, x0: np.ndarray, tol_kkt: float = 1e-6,
              tol_feas: float = 1e-8, max_iter: int = 200) -> NlpSolution:
    """Solve the NLP from x0 (projected onto the box first).

    Deterministic: a fixed problem and start produce the same iterates.
    """
    lb, ub = problem.lower, problem.upper
    x = np.clip(np.asarray(x0, dtype=float), lb, ub)
    if not np.all(np.isfinite(x)):
        raise CallbackError("x0 contains non-finite entries")

    has_cons = problem.constraints is not None

    def eval_f(z):
        return float(_checked(problem.objective(z), "objective"))

    def eval_g(z):
        return _checked(problem.gradient(z), "gradient")

    def eval_c(z):
        if not has_cons:
            return np.zeros(0)
        return _checked(problem.constraints(z), "constraints")

    def eval_jac(z):
        if not has_cons:
            return np.zeros((0, problem.n))
        return np.atleast_2d(_checked(problem.constraints_jac(z), "constraint jacobian"))

    fval = eval_f(x)
    grad = eval_g(x)
    cons = eval_c(x)
    jac = eval_jac(x)
    m = cons.size

    if problem.hessian_init is not None:
        bmat = 0.5 * (problem.hessian_init + problem.hessian_init.T)
        bump = 1e-8 * max(1.0, float(np.trace(bmat)) / problem.n)
        bmat = bmat + bump * np.eye(problem.n)
        while True:
            try:
                np.linalg.cholesky(bmat)
                break
            except np.linalg.LinAlgError:
                bump *= 100.0
                bmat = bmat + bump * np.eye(problem.n)
    elif problem.hessian_diag is not None:
        bmat = np.diag(np.maximum(np.asarray(problem.hessian_diag, dtype=float), 1e-8))
    else:
        bmat = np.eye(problem.n)

    lam = np.zeros(m)
    mu_pen = 10.0
    reset_used = False
    status = SolveStatus.MAX_ITER
    iterations = 0
    polish_streak = 0

    def violation(c):
        return float(np.max(np.maximum(c, 0.0), initial=0.0))

    def stationarity(z, g, j, l):
        grad_lagr = g + (j.T @ l if m else 0.0)
        return float(np.max(np.abs(z - np.clip(z - grad_lagr, lb, ub))))

    def kkt_ok(l, viol, fv):
        st = stationarity(x, grad, jac, l)
        cp = float(np.max(np.abs(l * cons), initial=0.0)) if m else 0.0
        return (st <= tol_kkt and viol <= tol_feas and cp <= 1e-6 * (1.0 + abs(fv)))

    for it in range(1, max_iter + 1):
        viol = violation(cons)
        if kkt_ok(lam, viol, fval):
            status = SolveStatus.CONVERGED
            break

        iterations = it
        d, lam_new, qp_ok, elastic_residual = _solve_subproblem(
            bmat, grad, jac, cons, lb - x, ub - x,
            elastic_weight=max(1e3, 10.0 * mu_pen))

        def stall_status(v=None):
            # infeasible only when the relaxed subproblem itself proves
            # the constraints locally inconsistent; a merit stall with a
            # repairable violation returns the best iterate instead
            bad = viol if v is None else v
            if bad > 100.0 * tol_feas and elastic_residual > 100.0 * tol_feas:
                return SolveStatus.INFEASIBLE
            return SolveStatus.MAX_ITER

        if not qp_ok:
            logger.debug("QP subproblem failed at iteration %d", it)
            status = stall_status()
            break

        # the QP multipliers are the best current estimate; re-test KKT with
        # them so a warm start at the optimum terminates immediately
        if kkt_ok(lam_new, viol, fval):
            lam = lam_new
            status = SolveStatus.CONVERGED
            break

        if float(np.max(np.abs(d), initial=0.0)) <= 1e-10 * (1.0 + float(np.max(np.abs(x)))):
            lam = lam_new
            if kkt_ok(lam, viol, fval):
                status = SolveStatus.CONVERGED
            else:
                status = stall_status()
            break

        # Endgame polish: when the QP model is already minimised to noise
        # level, the merit test cannot resolve the remaining ~eps*f decrease,
        # but the full step is harmless and lands the stiff (penalty-scaled)
        # coordinates exactly. Take it without a line search.
        pred_decrease = -(float(grad @ d) + 0.5 * float(d @ bmat @ d)) \
            + mu_pen * float(np.sum(np.maximum(cons, 0.0)))
        if viol <= tol_feas and pred_decrease <= 1e-9 * (1.0 + abs(fval)):
            polish_streak += 1
            x = np.clip(x + d, lb, ub)
            lam = lam_new
            fval = eval_f(x)
            grad = eval_g(x)
            cons = eval_c(x)
            jac = eval_jac(x)
            if polish_streak > 8:
                if kkt_ok(lam, violation(cons), fval):
                    status = SolveStatus.CONVERGED
                break
            continue
        polish_streak = 0

        lam = lam_new
        lam_inf = float(np.max(np.abs(lam), initial=0.0))
        if mu_pen < 1.05 * lam_inf:
            mu_pen = max(2.0 * mu_pen, 1.1 * lam_inf + 1e-4)

        merit0 = fval + mu_pen * float(np.sum(np.maximum(cons, 0.0)))
        dirder = float(grad @ d) - mu_pen * float(np.sum(np.maximum(cons, 0.0)))
        if dirder >= 0.0:
            if not reset_used:
                reset_used = True
                bmat = np.eye(problem.n)
                continue
            status = stall_status()
            break

        alpha = 1.0
        accepted = False
        while alpha >= 1e-10:
            x_try = np.clip(x + alpha * d, lb, ub)
            f_try = eval_f(x_try)
            c_try = eval_c(x_try)
            merit_try = f_try + mu_pen * float(np.sum(np.maximum(c_try, 0.0)))
            if merit_try <= merit0 + 1e-4 * alpha * dirder:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if not reset_used:
                reset_used = True
                bmat = np.eye(problem.n)
                mu_pen *= 10.0
                continue
            status = stall_status()
            break

        grad_try = eval_g(x_try)
        jac_try = eval_jac(x_try)
        step = x_try - x
        y = (grad_try + (jac_try.T @ lam if m else 0.0)) \
            - (grad + (jac.T @ lam if m else 0.0))
        s_bs = float(step @ bmat @ step)
        s_y = float(step @ y)
        if s_bs > 1e-16:
            if s_y < 0.2 * s_bs:  # Powell damping keeps the update positive
                theta = 0.8 * s_bs / (s_bs - s_y)
                y = theta * y + (1.0 - theta) * (bmat @ step)
                s_y = float(step @ y)
            if s_y > 1e-16:
                b_step = bmat @ step
                bmat = bmat - np.outer(b_step, b_step) / s_bs + np.outer(y, y) / s_y

        x, fval, grad, cons, jac = x_try, f_try, grad_try, c_try, jac_try
    else:
        if violation(cons) > tol_feas:
            status = SolveStatus.INFEASIBLE

    final_viol = violation(cons)
    final_stat = stationarity(x, grad, jac, lam)
    final_comp = float(np.max(np.abs(lam * cons), initial=0.0)) if m else 0.0
    return NlpSolution(
        x=x,
        objective_value=fval,
        kkt_residual=float(max(final_stat, final_comp)),
        constraint_violation_max=final_viol,
        iterations=iterations,
        status=status,
        multipliers=lam,
    )
