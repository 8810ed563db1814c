"""Ground-truth stochastic LTI simulator and its stacked block operators.

The plant is x_{t+1} = A x_t + B u_t + xi_t, y_t = C x_t + D u_t + eta_t
with i.i.d. zero-mean Gaussian noise. The block operators express a
length-L output stack as
    y = O_L x_t + T_u u + T_xi xi + eta,
with O_L the extended observability matrix and T_u / T_xi the lower block
triangular input/noise Toeplitz maps (T_xi is T_u built with B = I, D = 0).
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .linalg import as_matrix, is_psd, lyap_discrete, spectral_radius, symmetrize
from .trajectory import SignalDims, Trajectory


@dataclass(frozen=True)
class StochasticLtiModel:
    """State-space matrices plus process/measurement noise covariances."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Sigma_xi: np.ndarray
    Sigma_eta: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.A, "A")
        b = as_matrix(self.B, "B")
        c = as_matrix(self.C, "C")
        d = as_matrix(self.D, "D")
        sxi = symmetrize(self.Sigma_xi)
        seta = symmetrize(self.Sigma_eta)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ShapeError(f"A must be square, got {a.shape}")
        if b.shape[0] != n:
            raise ShapeError(f"B must have {n} rows, got {b.shape}")
        if c.shape[1] != n:
            raise ShapeError(f"C must have {n} columns, got {c.shape}")
        if d.shape != (c.shape[0], b.shape[1]):
            raise ShapeError(f"D must be {(c.shape[0], b.shape[1])}, got {d.shape}")
        if sxi.shape != (n, n):
            raise ShapeError(f"Sigma_xi must be {(n, n)}, got {sxi.shape}")
        if seta.shape != (c.shape[0], c.shape[0]):
            raise ShapeError(f"Sigma_eta must be {(c.shape[0],) * 2}, got {seta.shape}")
        for name, cov in (("Sigma_xi", sxi), ("Sigma_eta", seta)):
            if not is_psd(cov, 1e-8):
                raise ShapeError(f"{name} must be positive semidefinite")
        for field, value in (("A", a), ("B", b), ("C", c), ("D", d),
                             ("Sigma_xi", sxi), ("Sigma_eta", seta)):
            object.__setattr__(self, field, value)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def dims(self) -> SignalDims:
        return SignalDims(m=self.m, p=self.p)

    def to_json_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
            "Sigma_xi": self.Sigma_xi.tolist(),
            "Sigma_eta": self.Sigma_eta.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "StochasticLtiModel":
        try:
            return cls(
                A=np.array(data["A"], dtype=float),
                B=np.array(data["B"], dtype=float),
                C=np.array(data["C"], dtype=float),
                D=np.array(data["D"], dtype=float),
                Sigma_xi=np.array(data["Sigma_xi"], dtype=float),
                Sigma_eta=np.array(data["Sigma_eta"], dtype=float),
            )
        except KeyError as exc:
            raise ShapeError(f"plant description missing key {exc}") from None

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load_json(cls, path) -> "StochasticLtiModel":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class BlockOperators:
    """Stacked-trajectory operators for a fixed window length."""

    observability: np.ndarray  # (p*L, n)
    input_toeplitz: np.ndarray  # (p*L, m*L), D on the block diagonal
    noise_toeplitz: np.ndarray  # (p*L, n*L), input map with B=I, D=0


def build_block_operators(model: StochasticLtiModel, window: int) -> BlockOperators:
    if window < 1:
        raise ShapeError(f"window must be >= 1, got {window}")
    n, m, p = model.n, model.m, model.p
    powers = [np.eye(n)]
    for _ in range(window - 1):
        powers.append(model.A @ powers[-1])

    obs = np.vstack([model.C @ powers[i] for i in range(window)])

    t_u = np.zeros((p * window, m * window))
    t_xi = np.zeros((p * window, n * window))
    for i in range(window):
        rows = slice(i * p, (i + 1) * p)
        t_u[rows, i * m : (i + 1) * m] = model.D
        for j in range(i):
            # y_{t+i} picks up C A^{i-j-1} B u_{t+j} and C A^{i-j-1} xi_{t+j}.
            gain = model.C @ powers[i - j - 1]
            t_u[rows, j * m : (j + 1) * m] = gain @ model.B
            t_xi[rows, j * n : (j + 1) * n] = gain
    return BlockOperators(observability=obs, input_toeplitz=t_u, noise_toeplitz=t_xi)


def step(model: StochasticLtiModel, x, u, xi=None, eta=None):
    """One exact plant update; returns (x_next, y)."""
    x = np.asarray(x, dtype=float).reshape(model.n)
    u = np.asarray(u, dtype=float).reshape(model.m)
    xi = np.zeros(model.n) if xi is None else np.asarray(xi, dtype=float).reshape(model.n)
    eta = np.zeros(model.p) if eta is None else np.asarray(eta, dtype=float).reshape(model.p)
    y = model.C @ x + model.D @ u + eta
    x_next = model.A @ x + model.B @ u + xi
    return x_next, y


def _sample_gaussian(rng, mean, cov, size=None):
    """Draw from N(mean, cov) tolerating singular covariances."""
    cov = symmetrize(cov)
    vals, vecs = np.linalg.eigh(cov)
    scale = vecs * np.sqrt(np.clip(vals, 0.0, None))
    if size is None:
        z = rng.standard_normal(cov.shape[0])
        return mean + scale @ z
    z = rng.standard_normal((size, cov.shape[0]))
    return mean + z @ scale.T


def simulate(model: StochasticLtiModel, x0, u_policy, steps: int, seed) -> Trajectory:
    """Seeded rollout returning the recorded (u, y) trajectory.

    ``x0`` is either an exact state vector or an (mean, covariance) pair
    sampled once at the start. ``u_policy`` is a (steps, m) array, a scalar
    standard deviation for white-noise excitation, or a callable
    ``(t, rng) -> u_t``. Separate seeded streams drive the initial state,
    input, process noise, and measurement noise, so experiments can be
    replayed component-wise.
    """
    if steps < 1:
        raise ShapeError(f"steps must be >= 1, got {steps}")
    ss = np.random.SeedSequence(seed)
    rng_x0, rng_u, rng_xi, rng_eta = [np.random.default_rng(s) for s in ss.spawn(4)]

    rho = spectral_radius(model.A)
    if rho >= 1.0:
        warnings.warn(
            f"plant spectral radius {rho:.4g} >= 1; simulation may diverge",
            stacklevel=2,
        )

    if isinstance(x0, tuple):
        mean, cov = x0
        x = _sample_gaussian(rng_x0, np.asarray(mean, dtype=float).reshape(model.n), cov)
    else:
        x = np.asarray(x0, dtype=float).reshape(model.n)

    if callable(u_policy):
        inputs = None
    elif np.isscalar(u_policy):
        inputs = float(u_policy) * rng_u.standard_normal((steps, model.m))
    else:
        inputs = np.asarray(u_policy, dtype=float).reshape(steps, model.m)

    xi_seq = _sample_gaussian(rng_xi, np.zeros(model.n), model.Sigma_xi, size=steps)
    eta_seq = _sample_gaussian(rng_eta, np.zeros(model.p), model.Sigma_eta, size=steps)

    samples = np.empty((steps, model.m + model.p))
    for t in range(steps):
        u = np.asarray(u_policy(t, rng_u), dtype=float).reshape(model.m) if inputs is None else inputs[t]
        x, y = step(model, x, u, xi_seq[t], eta_seq[t])
        samples[t, : model.m] = u
        samples[t, model.m :] = y
    return Trajectory(dims=model.dims, samples=samples)


def stationary_state_covariance(model: StochasticLtiModel, input_cov) -> np.ndarray:
    """Stationary state covariance under white Gaussian input with per-step
    covariance ``input_cov``: solves S = A S A^T + B input_cov B^T + Sigma_xi."""
    qc = model.B @ symmetrize(input_cov) @ model.B.T + model.Sigma_xi
    return lyap_discrete(model.A, qc)


def default_benchmark(
    process_noise_std: float = 0.02, measurement_noise_std: float = 0.05
) -> StochasticLtiModel:
    """A documented 3-state SISO benchmark: a lightly damped mode pair plus
    a slow real pole, stable, observable, and controllable."""
    a = np.array(
        [
            [0.85, 0.25, 0.0],
            [-0.20, 0.85, 0.0],
            [0.05, 0.0, 0.60],
        ]
    )
    b = np.array([[0.0], [0.5], [1.0]])
    c = np.array([[1.0, 0.0, 0.5]])
    d = np.array([[0.0]])
    return StochasticLtiModel(
        A=a,
        B=b,
        C=c,
        D=d,
        Sigma_xi=process_noise_std**2 * np.eye(3),
        Sigma_eta=np.array([[measurement_noise_std**2]]),
    )
