"""Self-contained dense convex QP solver.

Solves   min 0.5 x'Px + q'x   s.t.  A_eq x = b_eq,  lower <= x <= upper
by operator splitting on the consensus form l <= [A_eq; I] x <= u, the
OSQP iteration: deterministic Ruiz equilibration, a regularized KKT
factorization reused across iterations, over-relaxation, deterministic
step-size adaptation, divergence certificates for infeasibility, and an
active-set polish step that solves the reduced KKT system once the active
set has settled. No randomized scaling: runs are bit-reproducible.

Infinite bounds are encoded internally by the sentinel magnitude 1e30.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ShapeError
from .linalg import is_psd, matrix_rank, sym_eig, symmetrize

INFINITY_SENTINEL = 1e30


@dataclass(frozen=True)
class QpProblem:
    """Data of one convex QP. ``lower``/``upper`` accept +-inf entries."""

    P: np.ndarray
    q: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        p = symmetrize(self.P)
        qv = np.asarray(self.q, dtype=float).reshape(-1)
        n = qv.shape[0]
        if p.shape != (n, n):
            raise ShapeError(f"P must be {(n, n)}, got {p.shape}")
        if not np.all(np.isfinite(qv)):
            raise ShapeError("q contains non-finite entries")
        if not is_psd(p, 1e-8):
            raise ShapeError("P must be positive semidefinite at tolerance 1e-8")
        a = np.zeros((0, n)) if self.A_eq is None else np.asarray(self.A_eq, dtype=float)
        b = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).reshape(-1)
        if a.ndim != 2 or a.shape[1] != n or a.shape[0] != b.shape[0]:
            raise ShapeError(f"A_eq/b_eq shapes inconsistent: {a.shape}, {b.shape}")
        lo = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != (n,) or hi.shape != (n,):
            raise ShapeError(f"bounds must have length {n}")
        if np.any(lo > hi):
            raise ShapeError("lower bound exceeds upper bound")
        for name, value in (("P", p), ("q", qv), ("A_eq", a), ("b_eq", b),
                            ("lower", lo), ("upper", hi)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def n_eq(self) -> int:
        return self.A_eq.shape[0]


@dataclass(frozen=True)
class QpSettings:
    eps_abs: float = 1e-8
    eps_rel: float = 1e-8
    max_iter: int = 50000
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    eps_infeasible: float = 1e-7
    check_interval: int = 25
    scaling_iters: int = 10
    adaptive_rho_interval: int = 100
    polish: bool = True


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    objective: float
    status: str  # "optimal" | "max_iter" | "infeasible"
    primal_residual: float
    dual_residual: float
    iterations: int
    eq_duals: np.ndarray = field(default=None)
    bound_duals: np.ndarray = field(default=None)
    polished: bool = False

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"


def _clip_sentinel(v):
    return np.clip(v, -INFINITY_SENTINEL, INFINITY_SENTINEL)


def _ruiz_equilibrate(p, q, a, iters):
    """Deterministic modified Ruiz scaling of the stacked KKT data.

    Returns (d, e, c): variable scaling, constraint scaling, cost scaling.
    """
    n, m = p.shape[0], a.shape[0]
    d = np.ones(n)
    e = np.ones(m)
    c = 1.0
    for _ in range(iters):
        ps = c * (d[:, None] * p * d[None, :])
        asc = e[:, None] * a * d[None, :]
        col_norms = np.maximum(
            np.max(np.abs(ps), axis=0, initial=0.0),
            np.max(np.abs(asc), axis=0, initial=0.0),
        )
        row_norms = np.max(np.abs(asc), axis=1, initial=0.0) if m else np.zeros(0)
        delta_d = 1.0 / np.sqrt(np.where(col_norms > 1e-12, col_norms, 1.0))
        delta_e = 1.0 / np.sqrt(np.where(row_norms > 1e-12, row_norms, 1.0))
        d *= delta_d
        e *= delta_e
        ps = c * (d[:, None] * p * d[None, :])
        cost_scale = max(
            float(np.mean(np.max(np.abs(ps), axis=0, initial=0.0))),
            float(np.max(np.abs(c * d * q), initial=0.0)),
        )
        if cost_scale > 1e-12:
            c /= cost_scale if cost_scale > 1.0 else 1.0
    return d, e, c


def _rho_vector(base, eq_mask):
    rho = np.full(eq_mask.shape[0], base)
    rho[eq_mask] = base * 1e3
    return np.clip(rho, 1e-6, 1e6)


def _factor_kkt(p, a, sigma, rho):
    n, m = p.shape[0], a.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = p + sigma * np.eye(n)
    kkt[:n, n:] = a.T
    kkt[n:, :n] = a
    if m:
        kkt[n:, n:] = -np.diag(1.0 / rho)
    return lu_factor(kkt)


def _unscaled_residuals(prob, a_full, x, z, y):
    ax = a_full @ x
    r_prim = float(np.max(np.abs(ax - z), initial=0.0))
    px = prob.P @ x
    aty = a_full.T @ y
    r_dual = float(np.max(np.abs(px + prob.q + aty), initial=0.0))
    prim_scale = max(
        float(np.max(np.abs(ax), initial=0.0)), float(np.max(np.abs(z), initial=0.0))
    )
    dual_scale = max(
        float(np.max(np.abs(px), initial=0.0)),
        float(np.max(np.abs(aty), initial=0.0)),
        float(np.max(np.abs(prob.q), initial=0.0)),
    )
    return r_prim, r_dual, prim_scale, dual_scale


def _primal_infeasibility_certificate(a_full, lo, hi, dy, eps):
    norm = float(np.max(np.abs(dy), initial=0.0))
    if norm <= 1e-14:
        return False
    dyn = dy / norm
    if float(np.max(np.abs(a_full.T @ dyn), initial=0.0)) > eps:
        return False
    support = hi @ np.clip(dyn, 0.0, None) + lo @ np.clip(dyn, None, 0.0)
    return bool(support <= -eps)


def _dual_infeasibility_certificate(prob, a_full, lo, hi, dx, eps):
    norm = float(np.max(np.abs(dx), initial=0.0))
    if norm <= 1e-14:
        return False
    dxn = dx / norm
    if float(np.max(np.abs(prob.P @ dxn), initial=0.0)) > eps:
        return False
    if float(prob.q @ dxn) > -eps:
        return False
    adx = a_full @ dxn
    ok_upper = (adx <= eps) | (hi >= INFINITY_SENTINEL)
    ok_lower = (adx >= -eps) | (lo <= -INFINITY_SENTINEL)
    return bool(np.all(ok_upper & ok_lower))


def _polish(prob, a_full, lo, hi, x, y, z, tol):
    """Solve the reduced KKT system on the identified active set."""
    n, m_eq = prob.n, prob.n_eq
    y_bounds = y[m_eq:]
    z_bounds = z[m_eq:]
    lower_active = (y_bounds < -tol) | (z_bounds <= prob.lower + tol)
    upper_active = (y_bounds > tol) | (z_bounds >= prob.upper - tol)
    lower_active &= prob.lower > -INFINITY_SENTINEL
    upper_active &= prob.upper < INFINITY_SENTINEL
    both = lower_active & upper_active
    # A pinned variable (equal bounds) counts as upper-active only.
    lower_active &= ~both | (prob.lower != prob.upper)
    upper_active &= ~(lower_active & upper_active)

    rows = [prob.A_eq]
    rhs = [prob.b_eq]
    eye = np.eye(n)
    low_idx = np.flatnonzero(lower_active)
    up_idx = np.flatnonzero(upper_active)
    if low_idx.size:
        rows.append(eye[low_idx])
        rhs.append(prob.lower[low_idx])
    if up_idx.size:
        rows.append(eye[up_idx])
        rhs.append(prob.upper[up_idx])
    a_act = np.vstack(rows)
    b_act = np.concatenate(rhs)
    k = a_act.shape[0]

    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = prob.P
    kkt[:n, n:] = a_act.T
    kkt[n:, :n] = a_act
    target = np.concatenate([-prob.q, b_act])
    reg = 1e-9 * np.eye(n + k)
    reg[n:, n:] *= -1.0
    try:
        lu = lu_factor(kkt + reg)
        sol = lu_solve(lu, target)
        # One round of iterative refinement against the unregularized system.
        sol += lu_solve(lu, target - kkt @ sol)
    except Exception:
        sol, *_ = np.linalg.lstsq(kkt, target, rcond=None)

    x_pol = sol[:n]
    nu = sol[n:]
    y_pol = np.zeros(m_eq + n)
    y_pol[:m_eq] = nu[:m_eq]
    offset = m_eq
    y_pol[m_eq + low_idx] = nu[offset : offset + low_idx.size]
    offset += low_idx.size
    y_pol[m_eq + up_idx] = nu[offset : offset + up_idx.size]
    z_pol = np.clip(a_full @ x_pol, lo, hi)
    return x_pol, y_pol, z_pol


def solve(prob: QpProblem, settings: QpSettings = QpSettings()) -> QpSolution:
    """Run the operator-splitting iteration until the unscaled KKT residuals
    meet eps_abs/eps_rel, infeasibility is certified, or max_iter is hit."""
    n, m_eq = prob.n, prob.n_eq
    m = m_eq + n
    a_full = np.vstack([prob.A_eq, np.eye(n)])
    lo = _clip_sentinel(np.concatenate([prob.b_eq, prob.lower]))
    hi = _clip_sentinel(np.concatenate([prob.b_eq, prob.upper]))
    eq_mask = np.zeros(m, dtype=bool)
    eq_mask[:m_eq] = True
    eq_mask[m_eq:] = lo[m_eq:] == hi[m_eq:]

    d, e, c = _ruiz_equilibrate(prob.P, prob.q, a_full, settings.scaling_iters)
    ps = c * (d[:, None] * prob.P * d[None, :])
    qs = c * d * prob.q
    asc = e[:, None] * a_full * d[None, :]
    los = _clip_sentinel(e * lo)
    his = _clip_sentinel(e * hi)

    rho = _rho_vector(settings.rho, eq_mask)
    lu = _factor_kkt(ps, asc, settings.sigma, rho)

    x = np.zeros(n)
    z = np.clip(np.zeros(m), los, his)
    y = np.zeros(m)
    x_check_prev = x.copy()
    y_check_prev = y.copy()

    def unscale(xb, zb, yb):
        return d * xb, zb / e, (e / c) * yb

    def try_finish(xb, zb, yb, iters, status_if_bad):
        xu, zu, yu = unscale(xb, zb, yb)
        r_p, r_d, s_p, s_d = _unscaled_residuals(prob, a_full, xu, zu, yu)
        best = (xu, yu, r_p, r_d, False)
        if settings.polish:
            xp, yp, zp = _polish(prob, a_full, lo, hi, xu, yu, zu,
                                 tol=max(settings.eps_abs * 100, 1e-10))
            rp_p, rd_p, sp_p, sd_p = _unscaled_residuals(prob, a_full, xp, zp, yp)
            # Polished candidate must itself respect the bounds.
            viol = max(
                float(np.max(prob.lower - xp, initial=0.0)),
                float(np.max(xp - prob.upper, initial=0.0)),
            )
            if max(rp_p, viol) <= max(best[2], 1e-12) and rd_p <= max(best[3], 1e-12):
                best = (xp, yp, max(rp_p, viol), rd_p, True)
                s_p, s_d = sp_p, sd_p
        xu, yu, r_p, r_d, polished = best
        eps_p = settings.eps_abs + settings.eps_rel * s_p
        eps_d = settings.eps_abs + settings.eps_rel * s_d
        status = OPTIMAL if (r_p <= eps_p and r_d <= eps_d) else status_if_bad
        obj = float(0.5 * xu @ prob.P @ xu + prob.q @ xu)
        return QpSolution(
            x=xu, objective=obj, status=status,
            primal_residual=r_p, dual_residual=r_d, iterations=iters,
            eq_duals=yu[:m_eq], bound_duals=yu[m_eq:], polished=polished,
        )

    sigma = settings.sigma
    alpha = settings.alpha
    iters_done = settings.max_iter
    for it in range(1, settings.max_iter + 1):
        rhs = np.concatenate([sigma * x - qs, z - y / rho])
        sol = lu_solve(lu, rhs)
        x_tilde = sol[:n]
        nu = sol[n:]
        z_tilde = z + (nu - y) / rho
        x = alpha * x_tilde + (1.0 - alpha) * x
        z_relaxed = alpha * z_tilde + (1.0 - alpha) * z
        z_new = np.clip(z_relaxed + y / rho, los, his)
        y = y + rho * (z_relaxed - z_new)
        z = z_new

        if it % settings.check_interval == 0 or it == settings.max_iter:
            xu, zu, yu = unscale(x, z, y)
            r_p, r_d, s_p, s_d = _unscaled_residuals(prob, a_full, xu, zu, yu)
            eps_p = settings.eps_abs + settings.eps_rel * s_p
            eps_d = settings.eps_abs + settings.eps_rel * s_d
            trigger = max(100.0 * settings.eps_abs, 1e-7)
            if (r_p <= eps_p and r_d <= eps_d) or (
                settings.polish and r_p <= trigger and r_d <= trigger
            ):
                candidate = try_finish(x, z, y, it, MAX_ITER)
                if candidate.status == OPTIMAL:
                    return candidate

            dy = (e / c) * (y - y_check_prev)
            dx = d * (x - x_check_prev)
            # A primal (dual) infeasibility ray is only credible while the
            # primal (dual) residual itself refuses to converge; otherwise a
            # vanishing delta can alias into a spurious certificate.
            if r_p > 10.0 * eps_p and _primal_infeasibility_certificate(
                a_full, lo, hi, dy, settings.eps_infeasible
            ):
                return QpSolution(
                    x=xu, objective=np.nan, status=INFEASIBLE,
                    primal_residual=r_p, dual_residual=r_d, iterations=it,
                    eq_duals=yu[:m_eq], bound_duals=yu[m_eq:],
                )
            if r_d > 10.0 * eps_d and _dual_infeasibility_certificate(
                prob, a_full, lo, hi, dx, settings.eps_infeasible
            ):
                return QpSolution(
                    x=xu, objective=np.nan, status=INFEASIBLE,
                    primal_residual=r_p, dual_residual=r_d, iterations=it,
                    eq_duals=yu[:m_eq], bound_duals=yu[m_eq:],
                )
            x_check_prev = x.copy()
            y_check_prev = y.copy()

            if it % settings.adaptive_rho_interval == 0 and it < settings.max_iter:
                num = r_p / max(s_p, 1e-12)
                den = r_d / max(s_d, 1e-12)
                if num > 1e-14 and den > 1e-14:
                    ratio = np.sqrt(num / den)
                    if ratio > 5.0 or ratio < 0.2:
                        rho = np.clip(rho * ratio, 1e-6, 1e6)
                        lu = _factor_kkt(ps, asc, sigma, rho)

    return try_finish(x, z, y, iters_done, MAX_ITER)


def l1_epigraph(prob: QpProblem, weight: float, selector) -> tuple[QpProblem, np.ndarray]:
    """Augment the problem with weight * sum |x_i| over ``selector``.

    Each selected variable is split as x_i = pos_i - neg_i with pos, neg >= 0
    and linear cost weight on both, which is the epigraph of the absolute
    value within the equality-plus-box problem class. Returns the augmented
    problem and the indices of the original variables inside it, which is an
    exact projection of any augmented minimizer.
    """
    if weight < 0.0:
        raise ValueError(f"weight must be nonnegative, got {weight}")
    sel = np.asarray(selector, dtype=int).reshape(-1)
    n = prob.n
    if sel.size and (sel.min() < 0 or sel.max() >= n):
        raise ShapeError(f"selector out of range for {n} variables")
    k = sel.size
    n_aug = n + 2 * k

    p_aug = np.zeros((n_aug, n_aug))
    p_aug[:n, :n] = prob.P
    q_aug = np.concatenate([prob.q, np.full(2 * k, weight)])

    link = np.zeros((k, n_aug))
    link[np.arange(k), sel] = 1.0
    link[np.arange(k), n + np.arange(k)] = -1.0  # pos part
    link[np.arange(k), n + k + np.arange(k)] = 1.0  # neg part
    a_aug = np.vstack([np.hstack([prob.A_eq, np.zeros((prob.n_eq, 2 * k))]), link])
    b_aug = np.concatenate([prob.b_eq, np.zeros(k)])

    lower = np.concatenate([prob.lower, np.zeros(2 * k)])
    upper = np.concatenate([prob.upper, np.full(2 * k, np.inf)])
    aug = QpProblem(P=p_aug, q=q_aug, A_eq=a_aug, b_eq=b_aug, lower=lower, upper=upper)
    return aug, np.arange(n)


@dataclass(frozen=True)
class ConditionReport:
    lambda_min: float
    lambda_max: float
    eq_rank: int

    @property
    def indefinite(self) -> bool:
        return self.lambda_min < -1e-10 * max(1.0, abs(self.lambda_max))


def condition_report(prob) -> ConditionReport:
    """Extremal eigenvalues of the cost and the equality-constraint rank.

    Accepts a QpProblem or a bare symmetric cost matrix (the latter is how
    candidate Hessians are diagnosed before they are admissible as QP data,
    e.g. an indefinite robust-controller Hessian below its threshold).
    """
    if isinstance(prob, QpProblem):
        cost, a_eq = prob.P, prob.A_eq
    else:
        cost, a_eq = np.asarray(prob, dtype=float), None
    dec = sym_eig(cost)
    rank = matrix_rank(a_eq) if a_eq is not None and a_eq.shape[0] else 0
    return ConditionReport(
        lambda_min=float(dec.values[-1]), lambda_max=float(dec.values[0]), eq_rank=rank
    )
