"""Parameters, spectral state, diagnostics record and the binary checkpoint."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .spectral import Grid, conjugate_mirror, to_physical_complex

CHECKPOINT_MAGIC = b"OLDB1\x00"
_HEADER = struct.Struct("<Idddd")

DIVERGENCE_TOL = 1e-10
REALITY_TOL = 1e-12

# Frobenius weights of the stored stress components (tau11, tau12, tau22).
TAU_WEIGHTS = np.array([1.0, 2.0, 1.0])


@dataclass(frozen=True)
class Params:
    beta: float = 1.0
    b_slip: float = 0.0
    box_length: float = 64 * np.pi
    n_points: int = 128
    dt: float = 0.2
    t_end: float = 100.0
    sobolev_s: float = 3.0
    cross_k: float = 0.125
    c2_split: float = 4.0
    sample_interval: float = 1.0
    seed: int = 0
    amplitude: float = 1e-2

    def __post_init__(self):
        if not 0.5 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [1/2, 1], got {self.beta}")
        if not -1.0 <= self.b_slip <= 1.0:
            raise ValueError(f"b_slip must lie in [-1, 1], got {self.b_slip}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.sobolev_s > 2:
            raise ValueError(f"sobolev_s must exceed 2, got {self.sobolev_s}")
        if not self.cross_k > 0 or not self.c2_split > 0:
            raise ValueError("cross_k and c2_split must be positive")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if self.t_end < 0 or not self.sample_interval > 0:
            raise ValueError("t_end must be >= 0 and sample_interval > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def with_(self, **changes) -> "Params":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Velocity (2 components) and stress (tau11, tau12, tau22) spectra at one time."""

    time: float
    u_hat: np.ndarray
    tau_hat: np.ndarray

    def copy(self) -> "SpectralState":
        return SpectralState(self.time, self.u_hat.copy(), self.tau_hat.copy())

    def scaled(self, factor: float) -> "SpectralState":
        return SpectralState(self.time, factor * self.u_hat, factor * self.tau_hat)

    def __sub__(self, other: "SpectralState") -> "SpectralState":
        return SpectralState(self.time, self.u_hat - other.u_hat, self.tau_hat - other.tau_hat)

    def tau_matrix(self) -> np.ndarray:
        """Full (2, 2, N, N) stress spectrum."""
        t11, t12, t22 = self.tau_hat
        return np.array([[t11, t12], [t12, t22]])


def zero_state(grid: Grid, time: float = 0.0) -> SpectralState:
    return SpectralState(
        time,
        np.zeros((2,) + grid.shape, dtype=complex),
        np.zeros((3,) + grid.shape, dtype=complex),
    )


def spectral_mass(state: SpectralState) -> np.ndarray:
    """Per-mode |u_hat|^2 + |tau_hat|_F^2."""
    u2 = np.sum(np.abs(state.u_hat) ** 2, axis=0)
    t2 = np.tensordot(TAU_WEIGHTS, np.abs(state.tau_hat) ** 2, axes=1)
    return u2 + t2


@dataclass(frozen=True)
class Violation:
    invariant: str
    magnitude: float

    def __str__(self) -> str:
        return f"{self.invariant}: {self.magnitude:.3e}"


def validate_state(state: SpectralState, grid: Grid) -> list[Violation]:
    """Check divergence-freeness and reality of a state; returns the violations found."""
    out = []
    if state.u_hat.shape != (2,) + grid.shape or state.tau_hat.shape != (3,) + grid.shape:
        return [Violation("shape", float("inf"))]
    if state.time < 0:
        out.append(Violation("time >= 0", -state.time))
    unorm = np.sqrt(np.sum(np.abs(state.u_hat) ** 2))
    div = np.abs(grid.kx * state.u_hat[0] + grid.ky * state.u_hat[1])
    div_max = float(div.max())
    if div_max > DIVERGENCE_TOL * max(unorm, np.finfo(float).tiny) and div_max > 0:
        out.append(Violation("divergence-free", div_max / unorm if unorm else np.inf))
    for name, f_hat in (("u", state.u_hat), ("tau", state.tau_hat)):
        norm = np.sqrt(np.sum(np.abs(f_hat) ** 2))
        if norm == 0:
            continue
        asym = np.sqrt(np.sum(np.abs(f_hat - conjugate_mirror(f_hat)) ** 2)) / norm
        imag = np.abs(to_physical_complex(f_hat, grid).imag).max()
        real_scale = np.abs(f_hat).sum()
        rel = max(asym, imag / real_scale)
        if rel > REALITY_TOL:
            out.append(Violation(f"reality ({name})", float(rel)))
    return out


@dataclass
class DiagnosticsRecord:
    """All sampled quantities at one time; ``lambda_s1`` maps s1 -> ||Lambda^s1 (u, tau)||."""

    t: float
    l2: float
    hs: float
    lambda_s1: dict[float, float] = field(default_factory=dict)
    e0: float = 0.0
    d0: float = 0.0
    e1: float = 0.0
    d1: float = 0.0
    e_tilde: float = 0.0
    d_tilde: float = 0.0
    e_bar: float = 0.0
    d_bar: float = 0.0
    besov_neg1: float = 0.0
    lowfreq_S: float = 0.0
    lowfreq_S0: float = 0.0
    lowfreq_Sbeta: float = 0.0
    cross_hs: float = 0.0
    mean_u: float = 0.0
    mean_tau: float = 0.0

    NORM_KEYS = ("l2", "hs", "d0", "d1", "d_tilde", "d_bar", "besov_neg1",
                 "lowfreq_S", "lowfreq_S0", "lowfreq_Sbeta", "mean_u", "mean_tau")

    def violations(self) -> list[str]:
        bad = [k for k in self.NORM_KEYS if not getattr(self, k) >= 0]
        bad += [f"lambda_s1_{s}" for s, v in self.lambda_s1.items() if not v >= 0]
        return bad

    def to_dict(self) -> dict:
        out = {"t": self.t, "l2": self.l2, "hs": self.hs}
        for s1, v in self.lambda_s1.items():
            out[f"lambda_s1_{format_s1(s1)}"] = v
        for f in fields(self):
            if f.name in ("t", "l2", "hs", "lambda_s1", "cross_hs"):
                continue
            out[f.name] = getattr(self, f.name)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticsRecord":
        lam = {float(k[len("lambda_s1_"):]): v for k, v in d.items() if k.startswith("lambda_s1_")}
        names = {f.name for f in fields(cls)} - {"lambda_s1"}
        return cls(lambda_s1=lam, **{k: v for k, v in d.items() if k in names})


def format_s1(s1: float) -> str:
    return repr(float(s1))


# Checkpoint I/O.

def checkpoint_bytes(state: SpectralState, grid: Grid, params: Params) -> bytes:
    head = CHECKPOINT_MAGIC + _HEADER.pack(
        grid.n_points, grid.box_length, params.beta, params.b_slip, state.time)
    body = np.concatenate([state.u_hat.ravel(), state.tau_hat.ravel()])
    return head + body.astype("<c16").tobytes()


def write_checkpoint(path, state: SpectralState, grid: Grid, params: Params) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(state, grid, params))


def read_checkpoint(path) -> tuple[SpectralState, dict]:
    """Load a checkpoint; returns the state and its header (n_points, box_length, beta, b_slip)."""
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_checkpoint(data)


def parse_checkpoint(data: bytes) -> tuple[SpectralState, dict]:
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError("not an OLDB1 checkpoint")
    off = len(CHECKPOINT_MAGIC)
    n, box, beta, b_slip, time = _HEADER.unpack_from(data, off)
    off += _HEADER.size
    expected = off + 5 * n * n * 16
    if len(data) != expected:
        raise ValueError(f"checkpoint length {len(data)} != expected {expected}")
    body = np.frombuffer(data, dtype="<c16", offset=off).astype(complex)
    u_hat = body[: 2 * n * n].reshape(2, n, n).copy()
    tau_hat = body[2 * n * n:].reshape(3, n, n).copy()
    header = {"n_points": n, "box_length": box, "beta": beta, "b_slip": b_slip}
    return SpectralState(time, u_hat, tau_hat), header
