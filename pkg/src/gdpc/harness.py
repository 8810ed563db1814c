"""Experiment orchestration: configs, closed-loop runs, and weight sweeps.

A JSON experiment config (versioned, ``"schema": 1``) describes the plant,
the identification data run, horizons, the control problem, and the
closed-loop settings. ``run_closed_loop`` freezes the identified predictor
once (offline identification), then runs the receding-horizon loop:
assemble the measured history window, solve the configured controller,
apply the first input block, step the seeded plant, record.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import control as ctl
from .behavior import predictive_model
from .errors import ConfigError, InfeasibleProblem, UnstableSystem
from .plant import (
    StochasticLtiModel,
    default_benchmark,
    simulate,
    stationary_state_covariance,
    step,
)
from .qp import QpSettings
from .trajectory import SignalDims, build_data_matrix

CONTROLLER_NAMES = ("spc", "ce", "deepc", "optimistic", "robust")

CSV_FLOAT_FORMAT = "%.17g"


def _fmt(value: float) -> str:
    return CSV_FLOAT_FORMAT % value


@dataclass(frozen=True)
class ExperimentConfig:
    plant: StochasticLtiModel
    data_steps: int
    data_mode: str
    data_input_std: float
    data_seed: int
    data_initial: str
    l_ini: int
    l_f: int
    controller: str
    q_diag: np.ndarray
    r_diag: np.ndarray
    u_ref: np.ndarray
    y_ref: np.ndarray
    u_min: np.ndarray | None
    u_max: np.ndarray | None
    y_min: np.ndarray | None
    y_max: np.ndarray | None
    lam: float
    lambda_grid: tuple[float, ...]
    regularizer: str
    run_steps: int
    repetitions: int
    run_seed: int
    apply_steps: int
    solver: QpSettings
    rank_tol: float
    jitter: float

    @property
    def dims(self) -> SignalDims:
        return self.plant.dims

    def control_problem(self) -> ctl.ControlProblem:
        return ctl.ControlProblem.from_step_weights(
            self.dims, self.l_ini, self.l_f,
            q_diag=self.q_diag, r_diag=self.r_diag,
            u_ref=self.u_ref, y_ref=self.y_ref,
            u_min=self.u_min, u_max=self.u_max,
            y_min=self.y_min, y_max=self.y_max,
        )


def _per_channel(raw, count, name, allow_none=False):
    if raw is None:
        if allow_none:
            return None
        raise ConfigError(f"{name} is required")
    arr = np.atleast_1d(np.asarray(raw, dtype=float))
    if arr.size == 1:
        arr = np.full(count, float(arr[0]))
    if arr.shape != (count,):
        raise ConfigError(f"{name} must be a scalar or a list of {count} values")
    return arr


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)),
                            overrides=overrides)


def config_from_dict(doc: dict, base_dir: str = ".",
                     overrides: dict | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    schema = doc.get("schema")
    if schema != 1:
        raise ConfigError(f"unsupported config schema {schema!r} (expected 1)")
    overrides = overrides or {}

    plant_doc = doc.get("plant")
    try:
        if plant_doc is None:
            plant = default_benchmark()
        elif "file" in plant_doc:
            ref = plant_doc["file"]
            full = ref if os.path.isabs(ref) else os.path.join(base_dir, ref)
            if not os.path.exists(full):
                raise ConfigError(f"plant file does not exist: {full}")
            plant = StochasticLtiModel.load_json(full)
        else:
            plant = StochasticLtiModel.from_json_dict(plant_doc)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid plant description: {exc}") from None

    data = doc.get("data", {})
    horizons = doc.get("horizons", {})

    control = doc.get("control", {})
    run = doc.get("run", {})
    solver_doc = dict(doc.get("solver", {}))
    if "eps_abs" in overrides and overrides["eps_abs"] is not None:
        solver_doc["eps_abs"] = overrides["eps_abs"]

    try:
        l_ini = int(horizons["L_ini"])
        l_f = int(horizons["L_f"])
    except KeyError as exc:
        raise ConfigError(f"horizons missing key {exc}") from None
    if l_ini < 1 or l_f < 1:
        raise ConfigError("horizons must be at least 1")

    data_steps = int(data.get("steps", 40 * (l_ini + l_f)))
    if data_steps < l_ini + l_f:
        raise ConfigError("data.steps shorter than one window")
    data_mode = data.get("mode", "hankel")
    if data_mode not in ("hankel", "disjoint"):
        raise ConfigError(f"unknown data.mode {data_mode!r}")
    data_initial = data.get("initial", "stationary")
    if data_initial not in ("stationary", "burn_in"):
        raise ConfigError(f"unknown data.initial {data_initial!r}")

    controller = control.get("controller", "spc")
    if controller not in CONTROLLER_NAMES:
        raise ConfigError(
            f"unknown controller {controller!r}; pick one of {CONTROLLER_NAMES}"
        )
    regularizer = control.get("regularizer", "proj2")
    if regularizer not in ctl.REGULARIZERS:
        raise ConfigError(f"unknown regularizer {regularizer!r}")

    dims = plant.dims
    try:
        q_diag = _per_channel(control.get("q", 1.0), dims.p, "control.q")
        r_diag = _per_channel(control.get("r", 0.1), dims.m, "control.r")
        u_ref = _per_channel(control.get("u_ref", 0.0), dims.m, "control.u_ref")
        y_ref = _per_channel(control.get("y_ref", 0.0), dims.p, "control.y_ref")
        u_min = _per_channel(control.get("u_min"), dims.m, "control.u_min", allow_none=True)
        u_max = _per_channel(control.get("u_max"), dims.m, "control.u_max", allow_none=True)
        y_min = _per_channel(control.get("y_min"), dims.p, "control.y_min", allow_none=True)
        y_max = _per_channel(control.get("y_max"), dims.p, "control.y_max", allow_none=True)
    except ConfigError:
        raise
    if np.any(q_diag < 0) or np.any(r_diag <= 0):
        raise ConfigError("control.q must be >= 0 and control.r must be > 0")

    grid = control.get("lambda_grid", [])
    if not isinstance(grid, (list, tuple)):
        raise ConfigError("control.lambda_grid must be a list")
    lam = float(control.get("lambda", 1.0))

    run_steps = int(run.get("steps", 30))
    if run_steps <= l_ini:
        raise ConfigError("run.steps must exceed horizons.L_ini")
    repetitions = int(run.get("repetitions", 1))
    if repetitions < 1:
        raise ConfigError("run.repetitions must be >= 1")
    apply_steps = int(run.get("apply_steps", 1))
    if not 1 <= apply_steps <= l_f:
        raise ConfigError("run.apply_steps must be in [1, L_f]")

    try:
        solver = QpSettings(
            eps_abs=float(solver_doc.get("eps_abs", 1e-8)),
            eps_rel=float(solver_doc.get("eps_rel", 1e-8)),
            max_iter=int(solver_doc.get("max_iter", 50000)),
        )
    except TypeError as exc:
        raise ConfigError(f"invalid solver settings: {exc}") from None

    rank_tol = float(overrides.get("rank_tol") or doc.get("rank_tol", 1e-10))
    jitter = float(overrides.get("jitter") or doc.get("jitter", 1e-9))
    if not 0.0 < rank_tol < 1.0:
        raise ConfigError("rank_tol must be in (0, 1)")

    return ExperimentConfig(
        plant=plant,
        data_steps=data_steps,
        data_mode=data_mode,
        data_input_std=float(data.get("input_std", 1.0)),
        data_seed=int(data.get("seed", 0)),
        data_initial=data_initial,
        l_ini=l_ini,
        l_f=l_f,
        controller=controller,
        q_diag=q_diag,
        r_diag=r_diag,
        u_ref=u_ref,
        y_ref=y_ref,
        u_min=u_min,
        u_max=u_max,
        y_min=y_min,
        y_max=y_max,
        lam=lam,
        lambda_grid=tuple(float(g) for g in grid),
        regularizer=regularizer,
        run_steps=run_steps,
        repetitions=repetitions,
        run_seed=int(run.get("seed", 0)),
        apply_steps=apply_steps,
        solver=solver,
        rank_tol=rank_tol,
        jitter=jitter,
    )


def identification_run(cfg: ExperimentConfig):
    """Excitation run, stacked data matrix, and frozen predictor.

    The run starts from the stationary state distribution under the white
    excitation input by default; the burn-in alternative (simulate and
    discard 10*n extra steps) covers marginally stable plants and is used
    automatically when no stationary distribution exists.
    """
    model = cfg.plant
    input_cov = cfg.data_input_std**2 * np.eye(model.m)
    mode = cfg.data_initial
    if mode == "stationary":
        try:
            x0 = (np.zeros(model.n), stationary_state_covariance(model, input_cov))
            traj = simulate(model, x0, cfg.data_input_std,
                            steps=cfg.data_steps, seed=cfg.data_seed)
        except UnstableSystem:
            mode = "burn_in"
    if mode == "burn_in":
        extra = 10 * model.n
        full = simulate(model, np.zeros(model.n), cfg.data_input_std,
                        steps=cfg.data_steps + extra, seed=cfg.data_seed)
        traj = type(full)(dims=full.dims, samples=full.samples[extra:])
    dm = build_data_matrix(traj, cfg.l_ini, cfg.l_f, mode=cfg.data_mode)
    return traj, dm, predictive_model(dm)


@dataclass(frozen=True)
class StepRecord:
    t: int
    w_ini: np.ndarray
    u: np.ndarray
    y: np.ndarray
    stage_cost: float
    solver_iterations: int
    lambda_effective: float
    solver_status: str = ""  # "" on warm-up and carried multi-step rows


@dataclass(frozen=True)
class RunRecord:
    dims: SignalDims
    l_ini: int
    controller: str
    seed: int
    steps: tuple[StepRecord, ...]
    aborted: bool = False
    abort_reason: str | None = None

    @property
    def realized_cost(self) -> float:
        return float(sum(s.stage_cost for s in self.steps))

    def tracking_cost_total(self, q_diag, r_diag, u_ref, y_ref) -> float:
        """Stage-cost identity oracle: the full-trajectory quadratic cost."""
        total = 0.0
        for s in self.steps:
            du = s.u - u_ref
            dy = s.y - y_ref
            total += float(du @ (r_diag * du) + dy @ (q_diag * dy))
        return total

    def csv_header(self) -> list[str]:
        cols = ["t"]
        cols += [f"wini_{i + 1}" for i in range(self.dims.q * self.l_ini)]
        cols += [f"u_{i + 1}" for i in range(self.dims.m)]
        cols += [f"y_{i + 1}" for i in range(self.dims.p)]
        cols += ["stage_cost", "solver_iterations", "lambda_effective"]
        return cols

    def to_csv_bytes(self) -> bytes:
        lines = [",".join(self.csv_header())]
        for s in self.steps:
            fields = [str(s.t)]
            fields += [_fmt(v) for v in s.w_ini]
            fields += [_fmt(v) for v in s.u]
            fields += [_fmt(v) for v in s.y]
            fields += [_fmt(s.stage_cost), str(s.solver_iterations), _fmt(s.lambda_effective)]
            lines.append(",".join(fields))
        return ("\n".join(lines) + "\n").encode()

    def save_csv(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_csv_bytes())

    def summary_dict(self) -> dict:
        return {
            "schema": 1,
            "controller": self.controller,
            "seed": self.seed,
            "steps_recorded": len(self.steps),
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "realized_cost": self.realized_cost,
        }


def _solve_controller(cfg: ExperimentConfig, dm, pm, cp, w_ini, lam=None):
    lam = cfg.lam if lam is None else lam
    if cfg.controller == "spc":
        return ctl.spc(pm, w_ini, cp, cfg.solver)
    if cfg.controller == "ce":
        return ctl.certainty_equivalence(pm, w_ini, cp, cfg.solver)
    if cfg.controller == "deepc":
        return ctl.deepc(dm, w_ini, cp, cfg.regularizer, lam, cfg.solver)
    if cfg.controller == "optimistic":
        return ctl.optimistic(pm, w_ini, cp, lam, cfg.solver, jitter=cfg.jitter)
    if cfg.controller == "robust":
        return ctl.robust(pm, w_ini, cp, lam, cfg.solver, jitter=cfg.jitter)
    raise ConfigError(f"unknown controller {cfg.controller!r}")


def run_closed_loop(cfg: ExperimentConfig, seed: int | None = None,
                    lam: float | None = None) -> RunRecord:
    """Receding-horizon loop with the frozen identified predictor.

    The first L_ini steps apply seeded excitation input (warm-up) so a full
    measured history window exists; afterwards the configured controller
    plans and the first ``apply_steps`` inputs of each plan are applied.
    The history window is built from measured, noisy outputs.
    """
    seed = cfg.run_seed if seed is None else seed
    _, dm, pm = identification_run(cfg)
    cp = cfg.control_problem()
    model = cfg.plant
    dims = model.dims

    ss = np.random.SeedSequence(seed)
    rng_warm, rng_xi, rng_eta = [np.random.default_rng(s) for s in ss.spawn(3)]
    u_ref_step = cfg.u_ref
    y_ref_step = cfg.y_ref

    x = np.zeros(model.n)
    history: list[np.ndarray] = []
    records: list[StepRecord] = []
    aborted = False
    abort_reason = None

    def noise():
        xi = rng_xi.multivariate_normal(np.zeros(model.n), model.Sigma_xi)
        eta = rng_eta.multivariate_normal(np.zeros(model.p), model.Sigma_eta)
        return xi, eta

    def snapshot():
        window = np.zeros(dims.q * cfg.l_ini)
        tail = history[-cfg.l_ini :]
        if tail:
            stacked = np.concatenate(tail)
            window[-stacked.size :] = stacked
        return window

    def record(t, w_ini, u, y, iterations, lam_eff, status=""):
        du = u - u_ref_step
        dy = y - y_ref_step
        stage = float(du @ (cfg.r_diag * du) + dy @ (cfg.q_diag * dy))
        records.append(
            StepRecord(
                t=t, w_ini=w_ini, u=u.copy(), y=y.copy(),
                stage_cost=stage, solver_iterations=iterations,
                lambda_effective=lam_eff, solver_status=status,
            )
        )

    t = 0
    while t < cfg.l_ini:
        w_snapshot = snapshot()
        u = cfg.data_input_std * rng_warm.standard_normal(dims.m)
        xi, eta = noise()
        x, y = step(model, x, u, xi, eta)
        history.append(np.concatenate([u, y]))
        record(t, w_snapshot, u, y, 0, math.nan)
        t += 1

    while t < cfg.run_steps:
        w_ini = np.concatenate(history[-cfg.l_ini :])
        try:
            result = _solve_controller(cfg, dm, pm, cp, w_ini, lam=lam)
        except InfeasibleProblem as exc:
            aborted = True
            abort_reason = f"controller infeasible at t={t}: {exc}"
            break
        plan = result.u_f.reshape(cfg.l_f, dims.m)
        for k in range(min(cfg.apply_steps, cfg.run_steps - t)):
            u = plan[k]
            xi, eta = noise()
            x, y = step(model, x, u, xi, eta)
            history.append(np.concatenate([u, y]))
            record(
                t, w_ini if k == 0 else np.concatenate(history[-cfg.l_ini - 1 : -1]),
                u, y,
                result.solver.iterations if k == 0 else 0,
                result.lambda_effective,
                status=result.solver.status if k == 0 else "",
            )
            t += 1

    return RunRecord(
        dims=dims, l_ini=cfg.l_ini, controller=cfg.controller, seed=seed,
        steps=tuple(records), aborted=aborted, abort_reason=abort_reason,
    )


@dataclass(frozen=True)
class SweepCell:
    lam: float
    mean_cost: float
    std_cost: float
    runs_ok: int
    runs_failed: int


def sweep_lambda(cfg: ExperimentConfig, grid=None) -> list[SweepCell]:
    """Monte-Carlo closed-loop cost over an ascending weight grid.

    Each cell repeats ``cfg.repetitions`` runs with seeds run_seed + r; cell
    failures (infeasibility, threshold violations) are recorded as missing
    and the sweep continues.
    """
    values = tuple(float(g) for g in (grid if grid is not None else cfg.lambda_grid))
    if not values:
        raise ConfigError("sweep requires a non-empty lambda grid")
    if any(b < a for a, b in zip(values, values[1:])):
        raise ConfigError("lambda grid must be ascending")
    cells = []
    for lam in values:
        costs = []
        failed = 0
        for rep in range(cfg.repetitions):
            try:
                rec = run_closed_loop(cfg, seed=cfg.run_seed + rep, lam=lam)
            except Exception:
                failed += 1
                continue
            if rec.aborted:
                failed += 1
                continue
            costs.append(rec.realized_cost)
        mean = float(np.mean(costs)) if costs else math.nan
        std = float(np.std(costs)) if costs else math.nan
        cells.append(
            SweepCell(lam=lam, mean_cost=mean, std_cost=std,
                      runs_ok=len(costs), runs_failed=failed)
        )
    return cells


def sweep_csv_bytes(cells: list[SweepCell]) -> bytes:
    lines = ["lambda,mean_cost,std_cost,runs_ok,runs_failed"]
    for c in cells:
        lines.append(
            ",".join(
                [_fmt(c.lam), _fmt(c.mean_cost), _fmt(c.std_cost),
                 str(c.runs_ok), str(c.runs_failed)]
            )
        )
    return ("\n".join(lines) + "\n").encode()
