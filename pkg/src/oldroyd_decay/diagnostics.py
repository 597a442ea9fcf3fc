"""Norms, energy/dissipation functionals, Besov and low-frequency diagnostics.

All quantities are Parseval sums on the torus with the coefficient
convention of :mod:`oldroyd_decay.spectral`; derivative weights are exact
spectral multipliers.  The stress enters through its Frobenius norm, so the
stored off-diagonal component counts twice.

Energy/dissipation pairs (k = cross_k, w_sigma = (1 + |xi|^2)^sigma):

    E_theta = ||Lambda^theta (u,tau)||^2_{H^{s-theta}}
              + 2k <-grad Lambda^theta u, Lambda^theta tau>_{H^{s-theta-beta}}
    D_theta = (k/2) ||grad Lambda^theta u||^2_{H^{s-theta-beta}}
              + ||Lambda^beta Lambda^theta tau||^2_{H^{s-theta}}

which for beta = 1 are the standard theta = 0, 1 pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .spectral import Grid, ShellWeights, check_mean_free, lp_shell_weights
from .state import TAU_WEIGHTS, DiagnosticsRecord, Params, SpectralState, spectral_mass

KINDS = ("E0", "D0", "E1", "D1", "E_tilde_s", "D_tilde_s", "E_bar_beta", "D_bar_beta",
         "sobolev", "besov_neg1", "low_freq_mass", "cross_term")


@dataclass(frozen=True)
class FunctionalSpec:
    kind: str
    s: float = 3.0
    beta: float = 1.0
    cross_k: float = 0.125
    c2: float = 4.0
    s1: float = 0.0
    homogeneous: bool = True
    set_kind: str = "S"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if not 0.5 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [1/2, 1]")
        if self.kind in ("E0", "D0", "E1", "D1", "E_tilde_s", "D_tilde_s", "E_bar_beta", "D_bar_beta") \
                and not self.s > 2:
            raise ValueError("s must exceed 2")

    @classmethod
    def from_params(cls, kind: str, params: Params, **extra) -> "FunctionalSpec":
        return cls(kind, s=params.sobolev_s, beta=params.beta, cross_k=params.cross_k,
                   c2=params.c2_split, **extra)


def _weight(grid: Grid, sigma: float, homogeneous: bool) -> np.ndarray:
    """|xi|^{2 sigma} (zero at xi = 0) or (1 + |xi|^2)^sigma."""
    if homogeneous:
        out = np.zeros(grid.shape)
        nz = grid.k2 > 0
        out[nz] = grid.k2[nz] ** sigma
        return out
    return (1.0 + grid.k2) ** sigma


def sobolev_norm(f_hat: np.ndarray, sigma: float, homogeneous: bool, grid: Grid,
                 component_weights: Sequence[float] | None = None) -> float:
    """Homogeneous (Lambda^sigma) or inhomogeneous (H^sigma) norm of a spectral field.

    ``f_hat`` may carry leading component axes; ``component_weights`` scales the
    squared modulus of each component (use (1, 2, 1) for stored stresses).
    """
    f_hat = np.asarray(f_hat)
    if homogeneous and sigma < 0:
        check_mean_free(f_hat)
    a2 = np.abs(f_hat) ** 2
    if component_weights is not None:
        a2 = np.tensordot(np.asarray(component_weights, dtype=float), a2, axes=1)
    elif a2.ndim > 2:
        a2 = a2.reshape((-1,) + grid.shape).sum(axis=0)
    return float(np.sqrt(grid.box_length**2 * np.sum(_weight(grid, sigma, homogeneous) * a2)))


def _mode_parts(state: SpectralState, grid: Grid):
    """Per-mode |u|^2, |tau|_F^2 and the pairing Re[tau : conj(-i xi (x) u)]."""
    u, tau = state.u_hat, state.tau_hat
    mu = np.abs(u[0]) ** 2 + np.abs(u[1]) ** 2
    mt = np.tensordot(TAU_WEIGHTS, np.abs(tau) ** 2, axes=1)
    # conj(u) . (i tau xi) = conj(u) . div_tau_hat
    d1 = 1j * (grid.kx * tau[0] + grid.ky * tau[1])
    d2 = 1j * (grid.kx * tau[1] + grid.ky * tau[2])
    cross = np.real(np.conj(u[0]) * d1 + np.conj(u[1]) * d2)
    return mu, mt, cross


def cross_term(state: SpectralState, sigma: float, grid: Grid, homogeneous: bool = False) -> float:
    """<tau, -grad u> weighted by (1+|xi|^2)^sigma (or |xi|^{2 sigma}), via Parseval."""
    if homogeneous and sigma < 0:
        check_mean_free(state.u_hat, "u")
        check_mean_free(state.tau_hat, "tau")
    _, _, cross = _mode_parts(state, grid)
    return float(grid.box_length**2 * np.sum(_weight(grid, sigma, homogeneous) * cross))


class _Parts:
    """Cached per-mode pieces shared by the functionals of one state."""

    def __init__(self, state: SpectralState, grid: Grid):
        self.state = state
        self.grid = grid
        self.mu, self.mt, self.cross = _mode_parts(state, grid)
        self.mass = self.mu + self.mt
        self.area = grid.box_length**2
        self._w = {}

    def w(self, sigma: float, homogeneous: bool) -> np.ndarray:
        key = (float(sigma), homogeneous)
        if key not in self._w:
            self._w[key] = _weight(self.grid, sigma, homogeneous)
        return self._w[key]

    def sum(self, weight: np.ndarray, part: np.ndarray) -> float:
        return float(self.area * np.sum(weight * part))


def _functional(p: _Parts, spec: FunctionalSpec, t: float) -> float:
    s, beta, k = spec.s, spec.beta, spec.cross_k
    g = p.grid
    k2 = g.k2
    kind = spec.kind
    if kind == "E0":
        return p.sum(p.w(s, False), p.mass) + 2 * k * p.sum(p.w(s - beta, False), p.cross)
    if kind == "D0":
        return (0.5 * k * p.sum(k2 * p.w(s - beta, False), p.mu)
                + p.sum(p.w(beta, True) * p.w(s, False), p.mt))
    if kind == "E1":
        return (p.sum(k2 * p.w(s - 1, False), p.mass)
                + 2 * k * p.sum(k2 * p.w(s - 1 - beta, False), p.cross))
    if kind == "D1":
        return (0.5 * k * p.sum(k2 * k2 * p.w(s - 1 - beta, False), p.mu)
                + p.sum(p.w(beta, True) * k2 * p.w(s - 1, False), p.mt))
    if kind == "E_tilde_s":
        return k * (1 + t) * p.sum(p.w(s, True), p.mass) + p.sum(p.w(s - 1, True), p.cross)
    if kind == "D_tilde_s":
        return k * (1 + t) * p.sum(k2 * p.w(s, True), p.mt) + 0.25 * p.sum(k2 * p.w(s - 1, True), p.mu)
    a = 2.0 - 1.0 / beta
    if kind == "E_bar_beta":
        return (1 + t) ** a * p.sum(p.w(s, True), p.mass) + k * p.sum(p.w(s - beta, True), p.cross)
    if kind == "D_bar_beta":
        return ((1 + t) ** a * p.sum(p.w(s + beta, True), p.mt)
                + 0.25 * k * p.sum(k2 * p.w(s - beta, True), p.mu))
    if kind == "sobolev":
        if spec.homogeneous and spec.s1 < 0:
            check_mean_free(p.state.u_hat, "u")
            check_mean_free(p.state.tau_hat, "tau")
        return np.sqrt(p.sum(p.w(spec.s1, spec.homogeneous), p.mass))
    if kind == "cross_term":
        return p.sum(p.w(spec.s1, spec.homogeneous), p.cross)
    if kind == "besov_neg1":
        return besov_neg1_state(p.state, g)
    if kind == "low_freq_mass":
        return _low_freq(p.mass, g, t, spec.c2, spec.beta, spec.set_kind)
    raise ValueError(kind)


def functional(state: SpectralState, spec: FunctionalSpec, grid: Grid) -> float:
    """Evaluate one functional at ``state``; (1 + t) weights use ``state.time``."""
    return _functional(_Parts(state, grid), spec, state.time)


# Besov norm of index -1.

@dataclass
class BesovValue:
    value: float
    level: int | None
    per_level: dict[int, float] = field(default_factory=dict)
    uncovered_modes: int = 0


def besov_neg1(f_hat: np.ndarray, grid: Grid, shells: ShellWeights | None = None,
               component_weights: Sequence[float] | None = None, detail: bool = False):
    """sup_j 2^{-j} ||Delta_j f||_{L^2} over the shells covering the grid."""
    f_hat = np.asarray(f_hat)
    a2 = np.abs(f_hat) ** 2
    if component_weights is not None:
        a2 = np.tensordot(np.asarray(component_weights, dtype=float), a2, axes=1)
    elif a2.ndim > 2:
        a2 = a2.reshape((-1,) + grid.shape).sum(axis=0)
    return _besov_from_mass(a2, grid, shells, detail)


def _besov_from_mass(a2, grid, shells, detail):
    shells = shells or lp_shell_weights(grid)
    per = {j: 2.0**-j * np.sqrt(grid.box_length**2 * np.sum(w**2 * a2)) for j, w in shells.levels}
    level = max(per, key=per.get) if per else None
    value = float(per[level]) if per else 0.0
    if not detail:
        return value
    uncovered = int(np.count_nonzero(shells.uncovered & (grid.kmag > 0)))
    return BesovValue(value, level if value > 0 else None, per, uncovered)


def besov_neg1_state(state: SpectralState, grid: Grid, shells: ShellWeights | None = None,
                     detail: bool = False):
    return _besov_from_mass(spectral_mass(state), grid, shells, detail)


# Low-frequency splitting sets.

def splitting_radius_sq(t: float, c2: float, beta: float, set_kind: str) -> float:
    """Threshold on |xi|^2 defining S(t), S0(t) or S^beta(t)."""
    if set_kind == "S":
        return c2 / (1 + t)
    if set_kind == "S0":
        # f(t) = ln^3(e + t):  f'/f = 3 / ((e + t) ln(e + t))
        return 2 * c2 * 3.0 / ((np.e + t) * np.log(np.e + t))
    if set_kind == "Sbeta":
        return (4 * c2 / (1 + t)) ** (1.0 / beta)
    raise ValueError(f"unknown splitting set {set_kind!r}")


def _low_freq(mass, grid, t, c2, beta, set_kind):
    r2 = splitting_radius_sq(t, c2, beta, set_kind)
    return float(grid.mode_measure * np.sum(np.where(grid.k2 <= r2, mass, 0.0)))


def low_freq_mass(state: SpectralState, t: float, params: Params, set_kind: str, grid: Grid) -> float:
    """mode_measure * sum of |u_hat|^2 + |tau_hat|^2 over the splitting set at time ``t``."""
    return _low_freq(spectral_mass(state), grid, t, params.c2_split, params.beta, set_kind)


# Full sampled record.

def diagnostics_record(state: SpectralState, params: Params, grid: Grid,
                       s1_list: Sequence[float] = (0.0, 1.0), shells: ShellWeights | None = None
                       ) -> DiagnosticsRecord:
    p = _Parts(state, grid)
    t = state.time

    def f(kind, **kw):
        return _functional(p, FunctionalSpec.from_params(kind, params, **kw), t)

    lam = {float(s1): float(np.sqrt(p.sum(p.w(s1, True), p.mass))) for s1 in s1_list}
    u0 = state.u_hat[:, 0, 0]
    t0 = state.tau_hat[:, 0, 0]
    return DiagnosticsRecord(
        t=float(t),
        l2=float(np.sqrt(p.sum(1.0, p.mass))),
        hs=float(np.sqrt(p.sum(p.w(params.sobolev_s, False), p.mass))),
        lambda_s1=lam,
        e0=f("E0"), d0=f("D0"), e1=f("E1"), d1=f("D1"),
        e_tilde=f("E_tilde_s"), d_tilde=f("D_tilde_s"),
        e_bar=f("E_bar_beta"), d_bar=f("D_bar_beta"),
        besov_neg1=_besov_from_mass(p.mass, grid, shells, False),
        lowfreq_S=_low_freq(p.mass, grid, t, params.c2_split, params.beta, "S"),
        lowfreq_S0=_low_freq(p.mass, grid, t, params.c2_split, params.beta, "S0"),
        lowfreq_Sbeta=_low_freq(p.mass, grid, t, params.c2_split, params.beta, "Sbeta"),
        cross_hs=p.sum(p.w(params.sobolev_s - params.beta, False), p.cross),
        mean_u=float(np.sqrt(np.sum(np.abs(u0) ** 2))),
        mean_tau=float(np.sqrt(np.sum(TAU_WEIGHTS * np.abs(t0) ** 2))),
    )


# Differential-inequality monitor.

@dataclass
class InequalityReport:
    lhs_kind: str
    rhs_kind: str
    tolerance: float
    n_checked: int
    n_violations: int
    worst_excess: float
    worst_time: float | None
    worst_relative: float

    @property
    def fraction(self) -> float:
        return self.n_violations / self.n_checked if self.n_checked else 0.0

    @property
    def passed(self) -> bool:
        return self.n_violations == 0

    def __str__(self) -> str:
        return (f"d/dt {self.lhs_kind} + {self.rhs_kind} <= tol: {self.n_violations}/{self.n_checked} "
                f"violations, worst relative {self.worst_relative:.3e} at t={self.worst_time}")


def _value(rec, kind):
    return rec[kind] if isinstance(rec, dict) else getattr(rec, kind)


def inequality_monitor(series, lhs_kind: str, rhs_kind: str, tolerance: float) -> InequalityReport:
    """Check d/dt lhs + rhs <= tolerance (|lhs| + |rhs|) at interior samples.

    The derivative is the centered difference over neighbouring samples
    (non-uniform spacing allowed); endpoints are not checked.
    """
    t = np.array([_value(r, "t") for r in series], dtype=float)
    lhs = np.array([_value(r, lhs_kind) for r in series], dtype=float)
    rhs = np.array([_value(r, rhs_kind) for r in series], dtype=float)
    n = len(t)
    if n < 3:
        return InequalityReport(lhs_kind, rhs_kind, tolerance, 0, 0, 0.0, None, 0.0)
    dt = t[2:] - t[:-2]
    deriv = (lhs[2:] - lhs[:-2]) / dt
    excess = deriv + rhs[1:-1]
    scale = np.abs(lhs[1:-1]) + np.abs(rhs[1:-1])
    rel = np.where(scale > 0, excess / np.where(scale > 0, scale, 1.0), np.where(excess > 0, np.inf, 0.0))
    bad = excess > tolerance * scale
    i = int(np.argmax(rel))
    return InequalityReport(
        lhs_kind, rhs_kind, tolerance, n - 2, int(bad.sum()),
        float(excess[i]), float(t[1 + i]), float(rel[i]),
    )
