"""Gaussian trajectory models: estimation, conditioning, and prediction.

A behavior models length-L trajectory stacks w in R^{qL} as N(mean, cov).
The covariance is estimated from data as W W^T / D (the maximum-likelihood
estimate for zero-mean i.i.d. columns and full-row-rank W); conditioning on
a "free" index set yields the Gaussian predictive distribution; the
predictive model extracts the affine predictor (input map, history map) and
the predictive covariance used by all controllers. A behavior can also be
constructed directly from a stochastic state-space model, which is the
forward map the Monte-Carlo oracles certify.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, ShapeError
from .linalg import chol_psd, is_psd, pinv, symmetrize
from .plant import StochasticLtiModel, build_block_operators
from .trajectory import DataMatrix, SignalDims

logger = logging.getLogger(__name__)

ORDER_INTERLEAVED = "interleaved"  # per-step [u_t; y_t] blocks, chronological
ORDER_BLOCKED = "blocked"  # full input stack first, then full output stack


def interleave_permutation(dims: SignalDims, window: int) -> np.ndarray:
    """Indices such that w_interleaved = w_blocked[perm].

    The blocked layout stacks all L input steps, then all L output steps.
    """
    m, p = dims.m, dims.p
    idx = np.empty(dims.q * window, dtype=int)
    for t in range(window):
        idx[t * dims.q : t * dims.q + m] = t * m + np.arange(m)
        idx[t * dims.q + m : (t + 1) * dims.q] = window * m + t * p + np.arange(p)
    return idx


@dataclass(frozen=True)
class GaussianBehavior:
    """Mean and PSD covariance of length-L stacked trajectories."""

    dims: SignalDims
    window: int
    mean: np.ndarray
    cov: np.ndarray
    ordering: str = ORDER_INTERLEAVED

    def __post_init__(self):
        k = self.dims.q * self.window
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = symmetrize(self.cov)
        if mean.shape != (k,):
            raise ShapeError(f"mean must have length {k}, got {mean.shape}")
        if cov.shape != (k, k):
            raise ShapeError(f"cov must be {(k, k)}, got {cov.shape}")
        if not np.all(np.isfinite(mean)):
            raise ShapeError("mean contains non-finite entries")
        if not is_psd(cov, 1e-8):
            raise NotPositiveDefinite("behavior covariance is not PSD at tolerance 1e-8")
        if self.ordering not in (ORDER_INTERLEAVED, ORDER_BLOCKED):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def size(self) -> int:
        return self.dims.q * self.window

    def to_interleaved(self) -> "GaussianBehavior":
        if self.ordering == ORDER_INTERLEAVED:
            return self
        perm = interleave_permutation(self.dims, self.window)
        return GaussianBehavior(
            dims=self.dims,
            window=self.window,
            mean=self.mean[perm],
            cov=self.cov[np.ix_(perm, perm)],
            ordering=ORDER_INTERLEAVED,
        )

    def to_blocked(self) -> "GaussianBehavior":
        if self.ordering == ORDER_BLOCKED:
            return self
        perm = interleave_permutation(self.dims, self.window)
        inverse = np.argsort(perm)
        return GaussianBehavior(
            dims=self.dims,
            window=self.window,
            mean=self.mean[inverse],
            cov=self.cov[np.ix_(inverse, inverse)],
            ordering=ORDER_BLOCKED,
        )

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "dims": {"m": self.dims.m, "p": self.dims.p},
            "L": self.window,
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
            "ordering": self.ordering,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GaussianBehavior":
        try:
            dims = SignalDims(m=int(data["dims"]["m"]), p=int(data["dims"]["p"]))
            return cls(
                dims=dims,
                window=int(data["L"]),
                mean=np.array(data["mean"], dtype=float),
                cov=np.array(data["cov"], dtype=float),
                ordering=data.get("ordering", ORDER_INTERLEAVED),
            )
        except KeyError as exc:
            raise ShapeError(f"behavior document missing key {exc}") from None

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load_json(cls, path) -> "GaussianBehavior":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class ConditionalGaussian:
    """Predictive distribution of the dependent block given the free block."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = symmetrize(self.cov)
        if cov.shape[0] != mean.shape[0]:
            raise ShapeError(f"mean/cov size mismatch: {mean.shape} vs {cov.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class PredictiveModel:
    """Affine output predictor plus predictive covariance.

    ``M_u`` maps the stacked future input, ``M_ini`` maps the stacked past
    window; the predicted output mean is M_u u_f + M_ini w_ini.
    """

    M_u: np.ndarray  # (p*L_f, m*L_f)
    M_ini: np.ndarray  # (p*L_f, q*L_ini)
    cov: np.ndarray  # (p*L_f, p*L_f) PSD

    def __post_init__(self):
        object.__setattr__(self, "M_u", np.asarray(self.M_u, dtype=float))
        object.__setattr__(self, "M_ini", np.asarray(self.M_ini, dtype=float))
        object.__setattr__(self, "cov", symmetrize(self.cov))

    def predict_mean(self, w_ini, u_f) -> np.ndarray:
        w_ini = np.asarray(w_ini, dtype=float).reshape(-1)
        u_f = np.asarray(u_f, dtype=float).reshape(-1)
        return self.M_u @ u_f + self.M_ini @ w_ini

    def predict(self, w_ini, u_f) -> ConditionalGaussian:
        return ConditionalGaussian(mean=self.predict_mean(w_ini, u_f), cov=self.cov)


def estimate(dm: DataMatrix, subtract_mean: bool = False) -> GaussianBehavior:
    """Second-moment behavior estimate from stacked window columns.

    Default keeps the zero-mean convention (data gathered under zero-mean
    excitation); with ``subtract_mean`` the column mean is removed and the
    covariance is the centered second moment (still normalized by D).
    """
    w = dm.matrix
    d = w.shape[1]
    if subtract_mean:
        mean = w.mean(axis=1)
        centered = w - mean[:, None]
        cov = centered @ centered.T / d
    else:
        mean = np.zeros(w.shape[0])
        cov = w @ w.T / d
    return GaussianBehavior(
        dims=dm.dims, window=dm.window_length, mean=mean, cov=symmetrize(cov)
    )


def _pd_cholesky(cov, jitter: float = 0.0) -> np.ndarray:
    """Cholesky factor, optionally retrying with relative jitter on failure."""
    try:
        return chol_psd(cov)
    except NotPositiveDefinite:
        if jitter <= 0.0:
            raise
    k = cov.shape[0]
    delta = jitter * max(np.trace(cov) / k, 1.0)
    logger.info("covariance not PD; applying jitter %.3e", delta)
    return chol_psd(cov, shift=delta)


def log_likelihood(gb: GaussianBehavior, samples, jitter: float = 0.0) -> float:
    """Total Gaussian log density of the given columns under the behavior.

    ``samples`` is a DataMatrix or a (qL, n) column array. Raises
    :class:`NotPositiveDefinite` for singular covariance unless a positive
    ``jitter`` (relative scale) is supplied.
    """
    cols = samples.matrix if isinstance(samples, DataMatrix) else np.asarray(samples, dtype=float)
    if cols.ndim == 1:
        cols = cols[:, None]
    k = gb.size
    if cols.shape[0] != k:
        raise ShapeError(f"samples must have {k} rows, got {cols.shape}")
    chol = _pd_cholesky(gb.cov, jitter)
    centered = cols - gb.mean[:, None]
    solved = np.linalg.solve(chol, centered)
    quad = np.sum(solved**2)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    n = cols.shape[1]
    return float(-0.5 * (quad + n * (logdet + k * np.log(2.0 * np.pi))))


def condition(gb: GaussianBehavior, free_index, free_value) -> ConditionalGaussian:
    """Exact Gaussian conditional on the given coordinates.

    The dependent block is the complement of ``free_index`` in ascending
    stack order. A pseudoinverse handles singular free-block covariance
    (deterministic free variables contribute nothing to the update).
    """
    free = np.asarray(free_index, dtype=int).reshape(-1)
    value = np.asarray(free_value, dtype=float).reshape(-1)
    k = gb.size
    if free.size != value.size:
        raise ShapeError(f"free_index ({free.size}) and free_value ({value.size}) differ")
    if free.size and (free.min() < 0 or free.max() >= k):
        raise ShapeError(f"free_index out of range for stack size {k}")
    if np.unique(free).size != free.size:
        raise ShapeError("free_index contains duplicates")
    dep = np.setdiff1d(np.arange(k), free)

    cov_ff = gb.cov[np.ix_(free, free)]
    cov_df = gb.cov[np.ix_(dep, free)]
    cov_dd = gb.cov[np.ix_(dep, dep)]
    gain = cov_df @ pinv(cov_ff)
    mean = gb.mean[dep] + gain @ (value - gb.mean[free])
    cov = symmetrize(cov_dd - gain @ cov_df.T)
    return ConditionalGaussian(mean=mean, cov=cov)


def predictive_model(dm: DataMatrix) -> PredictiveModel:
    """Least-squares output predictor and predictive covariance from data.

    The predictor is Y_f [W_p; U_f]^+, split column-wise into the history
    and input maps. The predictive covariance projects the output rows onto
    the orthogonal complement of the free-block row space:
    (1/D) Y_f (I - F^+ F) Y_f^T with F = [W_p; U_f].
    """
    free = dm.free_block
    dep = dm.future_outputs
    d = dm.n_columns
    free_pinv = pinv(free)
    coeff = dep @ free_pinv
    n_ini = dm.dims.q * dm.l_ini
    projector = np.eye(d) - free_pinv @ free
    cov = symmetrize(dep @ projector @ dep.T / d)
    # Clip the tiny negative eigenvalues the projector product can leave.
    if not is_psd(cov, 1e-12):
        vals, vecs = np.linalg.eigh(cov)
        cov = symmetrize((vecs * np.clip(vals, 0.0, None)) @ vecs.T)
    return PredictiveModel(M_u=coeff[:, n_ini:], M_ini=coeff[:, :n_ini], cov=cov)


def from_state_space(
    model: StochasticLtiModel,
    window: int,
    state_cov,
    input_cov,
    state_mean=None,
    input_mean=None,
) -> GaussianBehavior:
    """Behavior of length-``window`` stacks generated by the plant.

    Assumes the initial state and the stacked input are independent
    Gaussians; ``input_cov`` is the full (m*L x m*L) stacked-input covariance
    and ``state_cov`` the state covariance at the window start. Returns the
    blocked (input stack, output stack) ordering with the interleaving
    permutation available via :meth:`GaussianBehavior.to_interleaved`.
    """
    n, m, p = model.n, model.m, model.p
    state_cov = symmetrize(state_cov)
    input_cov = symmetrize(input_cov)
    if state_cov.shape != (n, n):
        raise ShapeError(f"state_cov must be {(n, n)}, got {state_cov.shape}")
    if input_cov.shape != (m * window,) * 2:
        raise ShapeError(f"input_cov must be {(m * window,) * 2}, got {input_cov.shape}")
    state_mean = (
        np.zeros(n) if state_mean is None else np.asarray(state_mean, dtype=float).reshape(n)
    )
    input_mean = (
        np.zeros(m * window)
        if input_mean is None
        else np.asarray(input_mean, dtype=float).reshape(m * window)
    )

    ops = build_block_operators(model, window)
    obs, t_u, t_xi = ops.observability, ops.input_toeplitz, ops.noise_toeplitz
    xi_blk = np.kron(np.eye(window), model.Sigma_xi)
    eta_blk = np.kron(np.eye(window), model.Sigma_eta)

    out_cov = obs @ state_cov @ obs.T + t_u @ input_cov @ t_u.T + t_xi @ xi_blk @ t_xi.T + eta_blk
    cross = t_u @ input_cov  # cov(y-stack, u-stack)
    cov = np.block([[input_cov, cross.T], [cross, out_cov]])
    mean = np.concatenate([input_mean, obs @ state_mean + t_u @ input_mean])
    return GaussianBehavior(
        dims=model.dims, window=window, mean=mean, cov=symmetrize(cov), ordering=ORDER_BLOCKED
    )


def kl_divergence(p: ConditionalGaussian, q: ConditionalGaussian, jitter: float = 0.0) -> float:
    """Relative entropy KL(p || q) between Gaussians of equal dimension.

    0.5 * [tr(S2^-1 S1) - k + (m1-m2)^T S2^-1 (m1-m2) + log det S2 - log det S1].
    Both covariances must be positive definite (a relative ``jitter`` may be
    allowed to repair near-singular inputs).
    """
    if p.mean.shape != q.mean.shape:
        raise ShapeError(f"dimension mismatch: {p.mean.shape} vs {q.mean.shape}")
    k = p.mean.shape[0]
    chol_q = _pd_cholesky(q.cov, jitter)
    chol_p = _pd_cholesky(p.cov, jitter)
    solved = np.linalg.solve(chol_q, chol_p)
    trace = np.sum(solved**2)
    diff = np.linalg.solve(chol_q, p.mean - q.mean)
    quad = float(diff @ diff)
    logdet_q = 2.0 * np.sum(np.log(np.diag(chol_q)))
    logdet_p = 2.0 * np.sum(np.log(np.diag(chol_p)))
    return float(0.5 * (trace - k + quad + logdet_q - logdet_p))


def kl_mean_term(mean_a, mean_b, cov_b, jitter: float = 0.0) -> float:
    """The mean-shift part of the Gaussian KL divergence:
    0.5 * (a-b)^T cov_b^-1 (a-b)."""
    chol = _pd_cholesky(symmetrize(cov_b), jitter)
    diff = np.linalg.solve(chol, np.asarray(mean_a, dtype=float) - np.asarray(mean_b, dtype=float))
    return float(0.5 * (diff @ diff))


def sample(gb: GaussianBehavior, count: int, seed) -> np.ndarray:
    """``count`` i.i.d. draws as columns, deterministic given the seed.

    Sampled through the eigendecomposition with negative eigenvalues clamped
    to zero, so singular covariances are fine.
    """
    if count < 1:
        raise ShapeError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    vals, vecs = np.linalg.eigh(gb.cov)
    # Relative cutoff: eigendecomposition noise in null directions would
    # otherwise leak samples out of the support of a singular covariance.
    cutoff = 1e-12 * max(float(vals[-1]), 0.0)
    vals = np.where(vals > cutoff, vals, 0.0)
    scale = vecs * np.sqrt(vals)
    z = rng.standard_normal((gb.size, count))
    return gb.mean[:, None] + scale @ z
