"""Predictive control formulations on top of the Gaussian behavior model.

All controllers minimize the finite-horizon quadratic tracking cost
    J(u_f, y_f) = ||u_f - u_ref||_R^2 + ||y_f - y_ref||_Q^2
over the future input (and, depending on the formulation, the predicted
output mean), subject to per-stack input boxes and optional output boxes.

* ``spc``: outputs eliminated through the data-driven affine predictor.
* ``certainty_equivalence``: the expected cost under the estimated
  predictive distribution; same minimizer as spc, objective reported with
  the constant trace term so the expected cost is faithful.
* ``deepc``: optimization over the data-combination vector g with a
  regularizer (projected 2-norm, squared 2-norm, or 1-norm).
* ``optimistic``: jointly picks the predicted mean inside a relative-entropy
  ball around the estimate to lower the expected cost (the regularized
  deepc problem in disguise for the projected regularizer).
* ``robust``: minimizes the dual upper bound of the worst-case expected
  cost over the same ball; convex for weights above a certified threshold.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .behavior import ConditionalGaussian, PredictiveModel, predictive_model
from .errors import InfeasibleProblem, LambdaTooSmall, NotPositiveDefinite, ShapeError
from .linalg import chol_psd, is_psd, pinv, sym_eig, symmetrize
from .qp import QpProblem, QpSettings, QpSolution, l1_epigraph, solve
from .trajectory import DataMatrix, SignalDims

logger = logging.getLogger(__name__)

REGULARIZERS = ("proj2", "sq2", "l1")

DEFAULT_JITTER = 1e-9


@dataclass(frozen=True)
class ControlProblem:
    """Horizons, stacked weights, references, and constraint boxes.

    ``Q`` weighs the stacked future output (PSD), ``R`` the stacked future
    input (PD). References and boxes are full-stack vectors; box entries may
    be +-inf.
    """

    dims: SignalDims
    l_ini: int
    l_f: int
    Q: np.ndarray
    R: np.ndarray
    u_ref: np.ndarray
    y_ref: np.ndarray
    u_lower: np.ndarray | None = None
    u_upper: np.ndarray | None = None
    y_lower: np.ndarray | None = None
    y_upper: np.ndarray | None = None

    def __post_init__(self):
        nu, ny = self.dims.m * self.l_f, self.dims.p * self.l_f
        qw = symmetrize(self.Q)
        rw = symmetrize(self.R)
        if qw.shape != (ny, ny):
            raise ShapeError(f"Q must be {(ny, ny)}, got {qw.shape}")
        if rw.shape != (nu, nu):
            raise ShapeError(f"R must be {(nu, nu)}, got {rw.shape}")
        if not is_psd(qw, 1e-10):
            raise ShapeError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(rw)[0] <= 0.0:
            raise ShapeError("R must be positive definite")
        u_ref = np.asarray(self.u_ref, dtype=float).reshape(-1)
        y_ref = np.asarray(self.y_ref, dtype=float).reshape(-1)
        if u_ref.shape != (nu,) or y_ref.shape != (ny,):
            raise ShapeError(
                f"references must have lengths {nu}/{ny}, got {u_ref.shape}/{y_ref.shape}"
            )

        def box(value, size, default):
            if value is None:
                return np.full(size, default)
            arr = np.asarray(value, dtype=float).reshape(-1)
            if arr.shape != (size,):
                raise ShapeError(f"box must have length {size}, got {arr.shape}")
            return arr

        u_lower = box(self.u_lower, nu, -np.inf)
        u_upper = box(self.u_upper, nu, np.inf)
        if np.any(u_lower > u_upper):
            raise ShapeError("u_lower exceeds u_upper")
        has_y_box = self.y_lower is not None or self.y_upper is not None
        y_lower = box(self.y_lower, ny, -np.inf) if has_y_box else None
        y_upper = box(self.y_upper, ny, np.inf) if has_y_box else None
        if has_y_box and np.any(y_lower > y_upper):
            raise ShapeError("y_lower exceeds y_upper")
        for name, value in (
            ("Q", qw), ("R", rw), ("u_ref", u_ref), ("y_ref", y_ref),
            ("u_lower", u_lower), ("u_upper", u_upper),
            ("y_lower", y_lower), ("y_upper", y_upper),
        ):
            object.__setattr__(self, name, value)

    @property
    def n_u(self) -> int:
        return self.dims.m * self.l_f

    @property
    def n_y(self) -> int:
        return self.dims.p * self.l_f

    @property
    def has_output_box(self) -> bool:
        return self.y_lower is not None

    @classmethod
    def from_step_weights(
        cls, dims: SignalDims, l_ini: int, l_f: int,
        q_diag=1.0, r_diag=0.1, u_ref=0.0, y_ref=0.0,
        u_min=None, u_max=None, y_min=None, y_max=None,
    ) -> "ControlProblem":
        """Build stacked weights/references from per-channel step values."""

        def per_step(value, channels, steps, default=None):
            if value is None:
                return None if default is None else np.full(channels * steps, default)
            arr = np.atleast_1d(np.asarray(value, dtype=float))
            if arr.size == 1:
                arr = np.full(channels, float(arr[0]))
            if arr.shape != (channels,):
                raise ShapeError(f"per-channel value must have {channels} entries")
            return np.tile(arr, steps)

        return cls(
            dims=dims, l_ini=l_ini, l_f=l_f,
            Q=np.diag(per_step(q_diag, dims.p, l_f)),
            R=np.diag(per_step(r_diag, dims.m, l_f)),
            u_ref=per_step(u_ref, dims.m, l_f),
            y_ref=per_step(y_ref, dims.p, l_f),
            u_lower=per_step(u_min, dims.m, l_f),
            u_upper=per_step(u_max, dims.m, l_f),
            y_lower=per_step(y_min, dims.p, l_f),
            y_upper=per_step(y_max, dims.p, l_f),
        )

    def tracking_cost(self, u_f, y_f) -> float:
        du = np.asarray(u_f, dtype=float).reshape(-1) - self.u_ref
        dy = np.asarray(y_f, dtype=float).reshape(-1) - self.y_ref
        return float(du @ self.R @ du + dy @ self.Q @ dy)


@dataclass(frozen=True)
class ControlResult:
    u_f: np.ndarray
    y_pred: ConditionalGaussian
    objective: float
    solver: QpSolution
    lambda_effective: float
    g: np.ndarray | None = None


@dataclass(frozen=True)
class HessianReport:
    matrix: np.ndarray
    psd: bool


@dataclass(frozen=True)
class LambdaThreshold:
    lambda0: float
    lambda_psd: float


def _check_w_ini(pm: PredictiveModel, w_ini) -> np.ndarray:
    w = np.asarray(w_ini, dtype=float).reshape(-1)
    if w.shape[0] != pm.M_ini.shape[1]:
        raise ShapeError(
            f"w_ini must have length {pm.M_ini.shape[1]}, got {w.shape[0]}"
        )
    return w


def _run_qp(prob: QpProblem, settings: QpSettings | None) -> QpSolution:
    sol = solve(prob, settings or QpSettings())
    if sol.status == "infeasible":
        raise InfeasibleProblem("controller QP certified infeasible")
    return sol


def _precision(cov, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """Inverse of a (jittered-if-needed) PD covariance via Cholesky."""
    cov = symmetrize(cov)
    k = cov.shape[0]
    try:
        chol = chol_psd(cov)
    except NotPositiveDefinite:
        if jitter <= 0.0:
            raise
        delta = jitter * max(np.trace(cov) / k, 1.0)
        logger.info("predictive covariance not PD; applying jitter %.3e", delta)
        chol = chol_psd(cov, shift=delta)
    inv_chol = np.linalg.solve(chol, np.eye(k))
    return symmetrize(inv_chol.T @ inv_chol)


def spc(
    pm: PredictiveModel, w_ini, cp: ControlProblem, settings: QpSettings | None = None
) -> ControlResult:
    """Deterministic predictor-based control (outputs eliminated unless an
    output box forces them to stay as constrained variables)."""
    w = _check_w_ini(pm, w_ini)
    bias = pm.M_ini @ w
    if not cp.has_output_box:
        h = symmetrize(pm.M_u.T @ cp.Q @ pm.M_u + cp.R)
        lin = pm.M_u.T @ cp.Q @ (bias - cp.y_ref) - cp.R @ cp.u_ref
        prob = QpProblem(
            P=2.0 * h, q=2.0 * lin, lower=cp.u_lower, upper=cp.u_upper
        )
        sol = _run_qp(prob, settings)
        u = sol.x
    else:
        nu, ny = cp.n_u, cp.n_y
        p_mat = np.zeros((nu + ny, nu + ny))
        p_mat[:nu, :nu] = 2.0 * cp.R
        p_mat[nu:, nu:] = 2.0 * cp.Q
        q_vec = np.concatenate([-2.0 * cp.R @ cp.u_ref, -2.0 * cp.Q @ cp.y_ref])
        a_eq = np.hstack([-pm.M_u, np.eye(ny)])
        prob = QpProblem(
            P=p_mat, q=q_vec, A_eq=a_eq, b_eq=bias,
            lower=np.concatenate([cp.u_lower, cp.y_lower]),
            upper=np.concatenate([cp.u_upper, cp.y_upper]),
        )
        sol = _run_qp(prob, settings)
        u = sol.x[:nu]
    y_mean = pm.M_u @ u + bias
    return ControlResult(
        u_f=u,
        y_pred=ConditionalGaussian(mean=y_mean, cov=pm.cov),
        objective=cp.tracking_cost(u, y_mean),
        solver=sol,
        lambda_effective=math.inf,
    )


def certainty_equivalence(
    pm: PredictiveModel, w_ini, cp: ControlProblem, settings: QpSettings | None = None
) -> ControlResult:
    """Minimize the expected cost under the estimated predictive
    distribution.

    Solved in the constrained (u, mean) form rather than by elimination, so
    the spc equivalence is a genuine cross-check of two code paths. The
    reported objective includes the constant trace term tr(Q cov).
    """
    w = _check_w_ini(pm, w_ini)
    bias = pm.M_ini @ w
    nu, ny = cp.n_u, cp.n_y
    p_mat = np.zeros((nu + ny, nu + ny))
    p_mat[:nu, :nu] = 2.0 * cp.R
    p_mat[nu:, nu:] = 2.0 * cp.Q
    q_vec = np.concatenate([-2.0 * cp.R @ cp.u_ref, -2.0 * cp.Q @ cp.y_ref])
    a_eq = np.hstack([-pm.M_u, np.eye(ny)])
    y_lower = cp.y_lower if cp.has_output_box else np.full(ny, -np.inf)
    y_upper = cp.y_upper if cp.has_output_box else np.full(ny, np.inf)
    prob = QpProblem(
        P=p_mat, q=q_vec, A_eq=a_eq, b_eq=bias,
        lower=np.concatenate([cp.u_lower, y_lower]),
        upper=np.concatenate([cp.u_upper, y_upper]),
    )
    sol = _run_qp(prob, settings)
    u = sol.x[:nu]
    y_mean = pm.M_u @ u + bias
    expected = cp.tracking_cost(u, y_mean) + float(np.trace(cp.Q @ pm.cov))
    return ControlResult(
        u_f=u,
        y_pred=ConditionalGaussian(mean=y_mean, cov=pm.cov),
        objective=expected,
        solver=sol,
        lambda_effective=math.inf,
    )


def deepc(
    dm: DataMatrix,
    w_ini,
    cp: ControlProblem,
    regularizer: str = "proj2",
    lambda_g: float = 0.0,
    settings: QpSettings | None = None,
) -> ControlResult:
    """Data-combination control: decision variables (g, u_f, y_f) tied to
    the raw data matrix through [w_ini; u_f; y_f] = [W_p; U_f; Y_f] g.

    ``proj2`` penalizes the component of g orthogonal to the row space of
    [W_p; U_f]; ``sq2`` the full squared norm; ``l1`` the 1-norm through an
    epigraph reformulation. With ``lambda_g`` = 0 the kernel component of g
    is removed afterwards (minimum-norm polish), since it is cost-invisible.
    """
    if regularizer not in REGULARIZERS:
        raise ValueError(f"regularizer must be one of {REGULARIZERS}, got {regularizer!r}")
    if lambda_g < 0.0:
        raise ValueError(f"lambda_g must be nonnegative, got {lambda_g}")
    w = np.asarray(w_ini, dtype=float).reshape(-1)
    n_ini = dm.dims.q * dm.l_ini
    if w.shape[0] != n_ini:
        raise ShapeError(f"w_ini must have length {n_ini}, got {w.shape[0]}")
    if cp.dims != dm.dims or cp.l_ini != dm.l_ini or cp.l_f != dm.l_f:
        raise ShapeError("control problem and data matrix disagree on dims/horizons")

    d = dm.n_columns
    nu, ny = cp.n_u, cp.n_y
    n = d + nu + ny
    w_p, u_f_rows, y_f_rows = dm.past, dm.future_inputs, dm.future_outputs

    p_mat = np.zeros((n, n))
    p_mat[d : d + nu, d : d + nu] = 2.0 * cp.R
    p_mat[d + nu :, d + nu :] = 2.0 * cp.Q
    if lambda_g > 0.0 and regularizer == "proj2":
        free = dm.free_block
        projector = np.eye(d) - pinv(free) @ free
        p_mat[:d, :d] = 2.0 * lambda_g * symmetrize(projector)
    elif lambda_g > 0.0 and regularizer == "sq2":
        p_mat[:d, :d] = 2.0 * lambda_g * np.eye(d)

    q_vec = np.zeros(n)
    q_vec[d : d + nu] = -2.0 * cp.R @ cp.u_ref
    q_vec[d + nu :] = -2.0 * cp.Q @ cp.y_ref

    a_eq = np.zeros((n_ini + nu + ny, n))
    a_eq[:n_ini, :d] = w_p
    a_eq[n_ini : n_ini + nu, :d] = u_f_rows
    a_eq[n_ini : n_ini + nu, d : d + nu] = -np.eye(nu)
    a_eq[n_ini + nu :, :d] = y_f_rows
    a_eq[n_ini + nu :, d + nu :] = -np.eye(ny)
    b_eq = np.concatenate([w, np.zeros(nu + ny)])

    y_lower = cp.y_lower if cp.has_output_box else np.full(ny, -np.inf)
    y_upper = cp.y_upper if cp.has_output_box else np.full(ny, np.inf)
    lower = np.concatenate([np.full(d, -np.inf), cp.u_lower, y_lower])
    upper = np.concatenate([np.full(d, np.inf), cp.u_upper, y_upper])

    prob = QpProblem(P=p_mat, q=q_vec, A_eq=a_eq, b_eq=b_eq, lower=lower, upper=upper)
    if regularizer == "l1" and lambda_g > 0.0:
        prob, keep = l1_epigraph(prob, lambda_g, np.arange(d))
        sol = _run_qp(prob, settings)
        x = sol.x[keep]
    else:
        sol = _run_qp(prob, settings)
        x = sol.x

    g = x[:d]
    u = x[d : d + nu]
    y_mean = x[d + nu :]
    if lambda_g == 0.0:
        full = dm.matrix
        g = pinv(full) @ (full @ g)  # drop the cost-invisible kernel component

    pm = predictive_model(dm)
    reg_term = 0.0
    if lambda_g > 0.0:
        if regularizer == "proj2":
            free = dm.free_block
            resid = g - pinv(free) @ (free @ g)
            reg_term = lambda_g * float(resid @ resid)
        elif regularizer == "sq2":
            reg_term = lambda_g * float(g @ g)
        else:
            reg_term = lambda_g * float(np.abs(g).sum())
    return ControlResult(
        u_f=u,
        y_pred=ConditionalGaussian(mean=y_mean, cov=pm.cov),
        objective=cp.tracking_cost(u, y_mean) + reg_term,
        solver=sol,
        lambda_effective=lambda_g,
        g=g,
    )


def _schur_reduced_input_cost(pm, cp, bias, kappa, precision):
    """Half-Hessian and half-gradient of the input problem after the
    predicted mean is eliminated, in the cancellation-free product form
    Z = kappa*S (Q + kappa*S)^-1 Q."""
    inner = symmetrize(cp.Q + kappa * precision)
    solved = np.linalg.solve(inner, cp.Q)
    z = symmetrize(kappa * precision @ solved)
    h_half = symmetrize(cp.R + pm.M_u.T @ z @ pm.M_u)
    lin = pm.M_u.T @ (z @ (bias - cp.y_ref)) - cp.R @ cp.u_ref
    return h_half, lin, inner


def optimistic(
    pm: PredictiveModel,
    w_ini,
    cp: ControlProblem,
    lam: float,
    settings: QpSettings | None = None,
    jitter: float = DEFAULT_JITTER,
) -> ControlResult:
    """Jointly optimize the input and the predicted output mean, with the
    mean tethered to the estimate by lam/2 times its precision-weighted
    squared distance (the mean term of the relative entropy)."""
    if lam <= 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    w = _check_w_ini(pm, w_ini)
    bias = pm.M_ini @ w
    precision = _precision(pm.cov, jitter)
    kappa = 0.5 * lam
    nu, ny = cp.n_u, cp.n_y

    if not cp.has_output_box:
        h_half, lin, inner = _schur_reduced_input_cost(pm, cp, bias, kappa, precision)
        prob = QpProblem(P=2.0 * h_half, q=2.0 * lin, lower=cp.u_lower, upper=cp.u_upper)
        sol = _run_qp(prob, settings)
        u = sol.x
        mu_hat = pm.M_u @ u + bias
        mu = np.linalg.solve(inner, cp.Q @ cp.y_ref + kappa * precision @ mu_hat)
    else:
        p_mat = np.zeros((nu + ny, nu + ny))
        p_mat[:nu, :nu] = 2.0 * (cp.R + kappa * pm.M_u.T @ precision @ pm.M_u)
        p_mat[:nu, nu:] = -2.0 * kappa * pm.M_u.T @ precision
        p_mat[nu:, :nu] = p_mat[:nu, nu:].T
        p_mat[nu:, nu:] = 2.0 * (cp.Q + kappa * precision)
        q_vec = np.concatenate(
            [
                2.0 * kappa * pm.M_u.T @ (precision @ bias) - 2.0 * cp.R @ cp.u_ref,
                -2.0 * kappa * precision @ bias - 2.0 * cp.Q @ cp.y_ref,
            ]
        )
        prob = QpProblem(
            P=symmetrize(p_mat), q=q_vec,
            lower=np.concatenate([cp.u_lower, cp.y_lower]),
            upper=np.concatenate([cp.u_upper, cp.y_upper]),
        )
        sol = _run_qp(prob, settings)
        u = sol.x[:nu]
        mu = sol.x[nu:]
        mu_hat = pm.M_u @ u + bias

    diff = mu - mu_hat
    objective = cp.tracking_cost(u, mu) + kappa * float(diff @ precision @ diff)
    return ControlResult(
        u_f=u,
        y_pred=ConditionalGaussian(mean=mu, cov=pm.cov),
        objective=objective,
        solver=sol,
        lambda_effective=lam,
    )


def hessian(pm: PredictiveModel, cp: ControlProblem, lam: float,
            jitter: float = DEFAULT_JITTER) -> HessianReport:
    """Input-space cost Hessian of the robust dual objective.

    Computed in the equivalent cancellation-free form
        H = R + M_u^T (Q + Q (lam*S - Q)^-1 Q) M_u,   S = cov^-1,
    which is exact for every lam where lam*S - Q is invertible.
    """
    precision = _precision(pm.cov, jitter)
    gap = symmetrize(lam * precision - cp.Q)
    try:
        solved = np.linalg.solve(gap, cp.Q)
    except np.linalg.LinAlgError:
        raise LambdaTooSmall(
            f"lam*precision - Q is singular at lam={lam:g}", lambda0=lam
        ) from None
    z = symmetrize(cp.Q + cp.Q @ solved)
    h = symmetrize(cp.R + pm.M_u.T @ z @ pm.M_u)
    return HessianReport(matrix=h, psd=is_psd(h, 1e-10))


def lambda_threshold(pm: PredictiveModel, cp: ControlProblem,
                     jitter: float = DEFAULT_JITTER) -> LambdaThreshold:
    """Certified weights for the robust controller.

    ``lambda0`` is the smallest weight making lam*cov^-1 - Q positive
    definite (max eigenvalue of G Q G with G the symmetric square root of
    the predictive covariance, inflated by 1e-6). ``lambda_psd`` is the
    smallest weight >= lambda0 at which the input-space Hessian is PSD,
    located by bisection to 1e-6 relative width.
    """
    cov = symmetrize(pm.cov)
    try:
        chol_psd(cov)
    except NotPositiveDefinite:
        if jitter <= 0.0:
            raise
        k = cov.shape[0]
        cov = cov + jitter * max(np.trace(cov) / k, 1.0) * np.eye(k)
    dec = sym_eig(cov)
    root = dec.vectors * np.sqrt(np.clip(dec.values, 0.0, None))
    lam_max = float(np.max(np.linalg.eigvalsh(root.T @ cp.Q @ root), initial=0.0))
    if lam_max <= 0.0:
        return LambdaThreshold(lambda0=0.0, lambda_psd=0.0)
    lambda0 = lam_max * (1.0 + 1e-6)

    def psd_at(lam):
        return hessian(pm, cp, lam, jitter).psd

    lo = lambda0 * (1.0 + 1e-9)
    if psd_at(lo):
        return LambdaThreshold(lambda0=lambda0, lambda_psd=lambda0)
    hi = 1e12
    if not psd_at(hi):
        return LambdaThreshold(lambda0=lambda0, lambda_psd=math.inf)
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if psd_at(mid):
            hi = mid
        else:
            lo = mid
    return LambdaThreshold(lambda0=lambda0, lambda_psd=hi)


def robust_mean(pm: PredictiveModel, cp: ControlProblem, lam: float, mu_hat,
                jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """Worst-case predicted mean (lam*S - Q)^-1 (lam*S mu_hat - Q y_ref)."""
    precision = _precision(pm.cov, jitter)
    gap = symmetrize(lam * precision - cp.Q)
    return np.linalg.solve(gap, lam * precision @ mu_hat - cp.Q @ cp.y_ref)


def robust(
    pm: PredictiveModel,
    w_ini,
    cp: ControlProblem,
    lam: float,
    settings: QpSettings | None = None,
    jitter: float = DEFAULT_JITTER,
) -> ControlResult:
    """Minimize the dual upper bound on the worst-case expected cost over
    the relative-entropy ball.

    Objective in the input:
        ||lam*S mu_hat(u) - Q y_ref||^2_{(lam*S - Q)^-1}
        - lam ||mu_hat(u)||^2_S + ||u - u_ref||^2_R,
    with S the predictive precision. Requires lam >= lambda0 and a PSD
    Hessian; output boxes are not representable in this eliminated form.
    """
    if cp.has_output_box:
        raise ShapeError("robust controller does not support output boxes")
    w = _check_w_ini(pm, w_ini)
    thresholds = lambda_threshold(pm, cp, jitter)
    if lam < thresholds.lambda0 or lam <= 0.0:
        raise LambdaTooSmall(
            f"lam={lam:g} below certified lambda0={thresholds.lambda0:g}",
            lambda0=thresholds.lambda0,
            lambda_psd=thresholds.lambda_psd,
        )
    h_rep = hessian(pm, cp, lam, jitter)
    if not h_rep.psd:
        raise LambdaTooSmall(
            f"cost Hessian indefinite at lam={lam:g}",
            lambda0=thresholds.lambda0,
            lambda_psd=thresholds.lambda_psd,
        )

    precision = _precision(pm.cov, jitter)
    bias = pm.M_ini @ w
    gap = symmetrize(lam * precision - cp.Q)
    # The lam-scale terms of the dual objective cancel exactly through
    # Z = Q + Q gap^-1 Q: the cost equals ||mu_hat(u) - y_ref||_Z^2
    # + ||u - u_ref||_R^2 - y_ref' Q y_ref, which is what is assembled here
    # (no catastrophic cancellation at large lam).
    z = symmetrize(cp.Q + cp.Q @ np.linalg.solve(gap, cp.Q))
    lin = pm.M_u.T @ (z @ (bias - cp.y_ref)) - cp.R @ cp.u_ref

    prob = QpProblem(P=2.0 * h_rep.matrix, q=2.0 * lin, lower=cp.u_lower, upper=cp.u_upper)
    sol = _run_qp(prob, settings)
    u = sol.x
    mu_hat = pm.M_u @ u + bias
    # mu* = mu_hat + gap^-1 Q (mu_hat - y_ref), the worst-case mean.
    mu_star = mu_hat + np.linalg.solve(gap, cp.Q @ (mu_hat - cp.y_ref))

    dev = mu_hat - cp.y_ref
    du = u - cp.u_ref
    objective = float(dev @ z @ dev + du @ cp.R @ du - cp.y_ref @ cp.Q @ cp.y_ref)
    return ControlResult(
        u_f=u,
        y_pred=ConditionalGaussian(mean=mu_star, cov=pm.cov),
        objective=objective,
        solver=sol,
        lambda_effective=lam,
    )
