"""Experiment configuration, initial data, and the run pipelines."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .diagnostics import diagnostics_record, sobolev_norm
from .linear import (GridPropagator, RadialProfile, continuum_norm, gaussian_profile)
from .spectral import Grid, build_grid, dealias, leray_project, lp_shell_weights
from .state import (TAU_WEIGHTS, DiagnosticsRecord, Params, SpectralState, format_s1, spectral_mass,
                    validate_state, write_checkpoint)
from .stepper import BlowUpError, Stepper, StepperConfig, stable_dt

log = logging.getLogger(__name__)

EXPERIMENTS = ("nonlinear", "linear_grid", "linear_continuum", "difference", "check")
INITIAL_DATA = ("gaussian_shell", "nonzero_mean", "single_mode")

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_BLOWUP = 3


@dataclass
class ExperimentConfig:
    beta: float = 1.0
    b_slip: float = 0.0
    box_length: float = 64 * math.pi
    n_points: int = 128
    dt: float = 0.2
    t_end: float = 100.0
    sobolev_s: float = 3.0
    cross_k: float = 0.125
    c2_split: float = 4.0
    sample_interval: float = 1.0
    seed: int = 0
    amplitude: float = 1e-2
    experiment: str = "nonlinear"
    initial_data: str = "gaussian_shell"
    s1_list: list[float] = field(default_factory=lambda: [0.0, 1.0])
    fit_t_lo: float | None = None
    fit_t_hi: float | None = None
    output_dir: str = "out"
    scheme: str = "if_rk4"
    cfl_safety: float = 0.4
    k0: float = 2.0
    c0: float = 1e-3
    mode: tuple[int, int] = (1, 0)
    amplitude_ceiling: float = 0.1
    log_samples: int = 0
    validate_every_step: bool = False
    checkpoint: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.initial_data not in INITIAL_DATA:
            raise ValueError(f"initial_data must be one of {INITIAL_DATA}")
        self.s1_list = [float(s) for s in self.s1_list]
        if any(not 0 <= s <= self.sobolev_s for s in self.s1_list):
            raise ValueError("every s1 must lie in [0, sobolev_s]")
        if self.experiment in ("nonlinear", "difference") and self.amplitude > self.amplitude_ceiling:
            raise ValueError(f"amplitude {self.amplitude} exceeds the small-data ceiling {self.amplitude_ceiling}")
        self.params  # validates the shared ranges

    @property
    def params(self) -> Params:
        return Params(beta=self.beta, b_slip=self.b_slip, box_length=self.box_length,
                      n_points=self.n_points, dt=self.dt, t_end=self.t_end, sobolev_s=self.sobolev_s,
                      cross_k=self.cross_k, c2_split=self.c2_split, sample_interval=self.sample_interval,
                      seed=self.seed, amplitude=self.amplitude)

    @property
    def t_valid(self) -> float:
        return validity_time(self.c2_split, self.box_length)

    def fit_window(self) -> tuple[float, float]:
        if self.experiment == "linear_continuum":
            default = (1e2, 1e4)
        else:
            default = (10.0, self.t_valid)
        lo = default[0] if self.fit_t_lo is None else self.fit_t_lo
        hi = default[1] if self.fit_t_hi is None else self.fit_t_hi
        return lo, hi

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["mode"] = list(self.mode)
        return d


def validity_time(c2: float, box_length: float) -> float:
    """t_valid = 0.5 C2 (L / 2 pi)^2, the end of the algebraic-decay window on the torus."""
    return 0.5 * c2 * (box_length / (2 * math.pi)) ** 2


def _parse_value(name: str, raw: str, default):
    raw = raw.strip()
    if name == "s1_list":
        return [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
    if name == "mode":
        a, b = raw.replace(";", ",").split(",")
        return (int(a), int(b))
    if raw.lower() in ("none", "null", ""):
        return None
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float) or default is None:
        return float(raw)
    return raw


def parse_config_text(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines; '#' starts a comment.  Keys are the config field names."""
    defaults = ExperimentConfig()
    names = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, raw = (x.strip() for x in line.split("=", 1))
        if key not in names:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw, getattr(defaults, key))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), **overrides)


def config_from_dict(d: dict) -> ExperimentConfig:
    """Inverse of :meth:`ExperimentConfig.to_dict`; unknown keys are ignored."""
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = {k: v for k, v in d.items() if k in names}
    if "mode" in values:
        values["mode"] = tuple(values["mode"])
    return ExperimentConfig(**values)


# Initial data.

def _antisymmetric_phase(rng: np.random.Generator, grid: Grid) -> np.ndarray:
    """Uniform random phases psi with psi(-xi) = -psi(xi) (mod 2 pi)."""
    theta = rng.uniform(0.0, 2 * np.pi, grid.shape)
    mirrored = np.roll(np.flip(theta, axis=(0, 1)), 1, axis=(0, 1))
    return theta - mirrored


def shell_envelope(grid: Grid, k0: float) -> np.ndarray:
    """Per-mode amplitude exp(-k^2 / (2 k0^2)): shell spectrum 2 pi k |f_hat|^2 ~ k exp(-k^2 / k0^2)."""
    env = np.exp(-grid.k2 / (2 * k0**2))
    env = np.where(grid.dealias_mask & (grid.kmag > 0), env, 0.0)
    return env


def _modal_to_state(grid: Grid, u_perp, a, c, s) -> tuple[np.ndarray, np.ndarray]:
    e, p = grid.unit_vectors()
    u_hat = u_perp * p
    t11 = a * e[0] ** 2 + c * p[0] ** 2 + 2 * s * e[0] * p[0]
    t12 = a * e[0] * e[1] + c * p[0] * p[1] + s * (e[0] * p[1] + e[1] * p[0])
    t22 = a * e[1] ** 2 + c * p[1] ** 2 + 2 * s * e[1] * p[1]
    return u_hat, np.stack([t11, t12, t22])


def gaussian_shell_state(grid: Grid, k0: float, seed: int) -> SpectralState:
    """Unnormalized isotropic random state with independent phases per modal component."""
    rng = np.random.default_rng(seed)
    env = shell_envelope(grid, k0)
    # u_perp(-xi) = -conj(u_perp(xi)); the stress components are even.
    u_perp = 1j * env * np.exp(1j * _antisymmetric_phase(rng, grid))
    a = env * np.exp(1j * _antisymmetric_phase(rng, grid))
    c = env * np.exp(1j * _antisymmetric_phase(rng, grid))
    s = env * np.exp(1j * _antisymmetric_phase(rng, grid))
    u_hat, tau_hat = _modal_to_state(grid, u_perp, a, c, s)
    u_hat = dealias(leray_project(u_hat, grid), grid)
    return SpectralState(0.0, u_hat, dealias(tau_hat, grid))


def single_mode_state(grid: Grid, mode: tuple[int, int]) -> SpectralState:
    """One conjugate pair carrying u_perp = i and tau_s = 1 (unnormalized)."""
    i, j = grid.mode_index(*mode)
    mi, mj = grid.mode_index(-mode[0], -mode[1])
    if (i, j) == (0, 0) or not grid.dealias_mask[i, j]:
        raise ValueError(f"mode {mode} must be nonzero and inside the dealiased band")
    u_perp = np.zeros(grid.shape, complex)
    s = np.zeros(grid.shape, complex)
    u_perp[i, j], u_perp[mi, mj] = 1j, 1j
    s[i, j], s[mi, mj] = 1.0, 1.0
    zero = np.zeros(grid.shape)
    u_hat, tau_hat = _modal_to_state(grid, u_perp, zero, zero, s)
    return SpectralState(0.0, u_hat, tau_hat)


def hs_norm(state: SpectralState, s: float, grid: Grid) -> float:
    return float(np.sqrt(sobolev_norm(state.u_hat, s, False, grid) ** 2
                         + sobolev_norm(state.tau_hat, s, False, grid, TAU_WEIGHTS) ** 2))


def initial_scale(config: ExperimentConfig, grid: Grid) -> tuple[SpectralState, float]:
    """Unnormalized shape of the initial data and the factor bringing its H^s norm to ``amplitude``."""
    if config.initial_data == "single_mode":
        shape = single_mode_state(grid, config.mode)
    else:
        shape = gaussian_shell_state(grid, config.k0, config.seed)
    return shape, config.amplitude / hs_norm(shape, config.sobolev_s, grid)


def generate_initial(config: ExperimentConfig, grid: Grid | None = None) -> SpectralState:
    grid = grid or build_grid(config.n_points, config.box_length)
    if config.experiment in ("nonlinear", "difference") and config.amplitude > config.amplitude_ceiling:
        raise ValueError("amplitude above the small-data ceiling")
    shape, factor = initial_scale(config, grid)
    state = shape.scaled(factor)
    if config.initial_data == "nonzero_mean":
        tau_hat = state.tau_hat.copy()
        tau_hat[0, 0, 0] = config.c0
        state = SpectralState(0.0, state.u_hat, tau_hat)
    return state


def matched_profile(config: ExperimentConfig, grid: Grid | None = None) -> RadialProfile:
    """Plane profile whose norms match the torus gaussian-shell data (phase-averaged)."""
    grid = grid or build_grid(config.n_points, config.box_length)
    _, factor = initial_scale(config.replace(initial_data="gaussian_shell"), grid)
    amp = factor * config.box_length**2 / (2 * math.pi)
    width = math.sqrt(2.0) * config.k0
    return gaussian_profile(width, u=amp, a=amp, c=amp, s=amp, coherent=False)


# Pipelines.

@dataclass
class RunResult:
    exit_status: int
    records: list = field(default_factory=list)
    final_state: SpectralState | None = None
    violations: list = field(default_factory=list)
    message: str = ""


def sample_times(config: ExperimentConfig) -> np.ndarray:
    if config.t_end <= 0:
        return np.array([0.0])
    if config.log_samples:
        lo = max(config.sample_interval, 1e-3)
        return np.concatenate([[0.0], np.geomspace(lo, config.t_end, config.log_samples)])
    n = int(round(config.t_end / config.sample_interval))
    ts = np.arange(n + 1) * config.sample_interval
    if ts[-1] < config.t_end - 1e-12:
        ts = np.append(ts, config.t_end)
    return ts


def _step_size(state, params, grid, cfl, interval):
    h = stable_dt(state, params, grid, cfl)
    n = max(1, int(math.ceil(interval / h - 1e-9)))
    return interval / n, n


def simulate(state: SpectralState, config: ExperimentConfig, grid: Grid,
             on_sample: Callable[[SpectralState], None],
             on_step: Callable[[SpectralState], None] | None = None) -> SpectralState:
    """Integrate the nonlinear system, calling ``on_sample`` at every sample time.

    The step divides each sample interval evenly and never exceeds
    :func:`stable_dt`; the stepper is rebuilt only when the step changes.
    """
    params = config.params
    times = sample_times(config)
    on_sample(state)
    stepper = None
    for t_next in times[1:]:
        interval = t_next - state.time
        h, n = _step_size(state, params, grid, config.cfl_safety, interval)
        if stepper is None or abs(stepper.config.dt - h) > 1e-12 * h:
            stepper = Stepper(params, grid, StepperConfig(config.scheme, h, config.cfl_safety))
        for _ in range(n):
            state = stepper.step(state)
            if on_step is not None:
                on_step(state)
        state = SpectralState(float(t_next), state.u_hat, state.tau_hat)
        on_sample(state)
    return state


def linear_grid_series(state: SpectralState, config: ExperimentConfig, grid: Grid,
                       on_sample: Callable[[SpectralState], None]) -> SpectralState:
    """Exact linear evolution sampled at the configured times (each sample from the last)."""
    params = config.params
    on_sample(state)
    props = {}
    for t_next in sample_times(config)[1:]:
        h = float(t_next - state.time)
        key = round(h, 12)
        if key not in props:
            if len(props) > 8:
                props.clear()
            props[key] = GridPropagator(grid, params.beta, h)
        u_hat, tau_hat = props[key].apply(state.u_hat, state.tau_hat)
        state = SpectralState(float(t_next), u_hat, tau_hat)
        on_sample(state)
    return state


def continuum_series(config: ExperimentConfig, profile: RadialProfile | None = None) -> list[dict]:
    profile = profile or matched_profile(config)
    out = []
    for t in sample_times(config):
        rec = {"t": float(t)}
        for s1 in config.s1_list:
            rec[f"lambda_s1_{format_s1(s1)}"] = float(continuum_norm(profile, s1, config.beta, float(t)))
        rec["l2"] = float(continuum_norm(profile, 0.0, config.beta, float(t)))
        out.append(rec)
    return out


def difference_record(full: SpectralState, linear: SpectralState, config: ExperimentConfig, grid: Grid) -> dict:
    diff = full - linear
    area = grid.box_length**2
    rec = {
        "t": float(full.time),
        "l2": float(np.sqrt(area * np.sum(spectral_mass(full)))),
        "l2_linear": float(np.sqrt(area * np.sum(spectral_mass(linear)))),
        "l2_diff": float(np.sqrt(area * np.sum(spectral_mass(diff)))),
        "hs_diff": hs_norm(diff, config.sobolev_s, grid),
    }
    for s1 in config.s1_list:
        w = np.where(grid.k2 > 0, grid.k2, 0.0) ** s1
        rec[f"lambda_s1_{format_s1(s1)}_diff"] = float(np.sqrt(area * np.sum(w * spectral_mass(diff))))
    return rec


def header_line(config: ExperimentConfig, timestamp: bool = True) -> str:
    head = {"config": config.to_dict(), "t_valid": config.t_valid, "format": "oldb-ndjson-1"}
    if timestamp:
        head["timestamp"] = _time.strftime("%Y-%m-%dT%H:%M:%S%z")
    return json.dumps({"header": head}, sort_keys=True)


class NDJSONWriter:
    def __init__(self, path: Path, config: ExperimentConfig, timestamp: bool = True):
        self.fh = open(path, "w")
        self.fh.write(header_line(config, timestamp) + "\n")

    def write(self, rec: dict) -> None:
        self.fh.write(json.dumps(rec) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


def read_ndjson(path) -> tuple[dict | None, list[dict]]:
    header, records = None, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "header" in obj:
                header = obj["header"]
            else:
                records.append(obj)
    return header, records


def run_experiment(config: ExperimentConfig, output_dir=None, timestamp: bool = True) -> RunResult:
    """Run one experiment and write ``series.ndjson`` (and ``checkpoint.bin``) to the output directory."""
    if config.experiment == "check":
        from .checks import run_checks
        out = Path(output_dir or config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        results = run_checks(quick=True)
        lines = [str(r) for r in results]
        (out / "check_report.txt").write_text("\n".join(lines) + "\n")
        ok = all(r.passed for r in results)
        return RunResult(EXIT_OK if ok else EXIT_FAILED_CHECK, message="\n".join(lines))

    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    writer = NDJSONWriter(out / "series.ndjson", config, timestamp)
    result = RunResult(EXIT_OK)
    try:
        if config.experiment == "linear_continuum":
            for rec in continuum_series(config):
                writer.write(rec)
                result.records.append(rec)
            return result

        grid = build_grid(config.n_points, config.box_length)
        params = config.params
        shells = lp_shell_weights(grid)
        state0 = generate_initial(config, grid)

        def record(state):
            rec = diagnostics_record(state, params, grid, config.s1_list, shells).to_dict()
            writer.write(rec)
            result.records.append(rec)

        def check_step(state):
            bad = validate_state(state, grid)
            if bad:
                result.violations.append((state.time, bad))

        on_step = check_step if config.validate_every_step else None
        if config.experiment == "nonlinear":
            final = simulate(state0, config, grid, record, on_step)
        elif config.experiment == "linear_grid":
            final = linear_grid_series(state0, config, grid, record)
        else:
            linear_states = {}
            linear_grid_series(state0, config, grid, lambda s: linear_states.__setitem__(round(s.time, 9), s))

            def diff_record(state):
                rec = difference_record(state, linear_states[round(state.time, 9)], config, grid)
                writer.write(rec)
                result.records.append(rec)

            final = simulate(state0, config, grid, diff_record, on_step)
        result.final_state = final
        if config.checkpoint:
            write_checkpoint(out / "checkpoint.bin", final, grid, params)
    except BlowUpError as exc:
        log.error("blow-up guard tripped: %s", exc)
        result.exit_status = EXIT_BLOWUP
        result.message = str(exc)
        if exc.state is not None:
            result.final_state = exc.state
    finally:
        writer.close()
    return result
