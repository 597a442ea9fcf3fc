"""Integrating-factor RK4 time stepping.

Both schemes are Lawson-type RK4 for y' = L y + N(y) with exp(L h) exact:

* ``if_rk4``: L is the stress diffusion -|xi|^{2 beta}; the linear coupling
  div tau <-> D(u) stays in N.
* ``exact_linear_lawson``: L is the whole linearized operator, propagated
  per mode by :class:`oldroyd_decay.linear.GridPropagator`; N holds only the
  quadratic terms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import linear_terms, nonlinear_terms
from .linear import GridPropagator
from .spectral import Grid, dealias, fractional_symbol, leray_project, to_physical
from .state import Params, SpectralState, spectral_mass

SCHEMES = ("if_rk4", "exact_linear_lawson")


class BlowUpError(RuntimeError):
    """Raised when a step grows a norm by more than the guard factor."""

    def __init__(self, message: str, state: SpectralState | None = None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class StepperConfig:
    scheme: str = "if_rk4"
    dt: float = 0.1
    cfl_safety: float = 0.4
    growth_guard: float = 10.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")


def stable_dt(state: SpectralState, params: Params, grid: Grid, cfl_safety: float = 0.4) -> float:
    """min(cfl dx / max|u|, cfl / omega_max, params.dt) with omega_max = |xi|_max / sqrt(2)."""
    omega_max = grid.kmax / np.sqrt(2.0)
    dt = min(params.dt, cfl_safety / omega_max)
    umax = float(np.max(np.hypot(*to_physical(state.u_hat, grid))))
    if umax > 0:
        dt = min(dt, cfl_safety * grid.dx / umax)
    return dt


class _DiffusionFactor:
    def __init__(self, grid: Grid, beta: float, h: float):
        self.decay = np.exp(-fractional_symbol(grid, beta) * h)

    def apply(self, u_hat, tau_hat):
        return u_hat, self.decay * tau_hat


class Stepper:
    """Reusable stepper holding the propagators for one (grid, params, dt)."""

    def __init__(self, params: Params, grid: Grid, config: StepperConfig):
        self.params = params
        self.grid = grid
        self.config = config
        h = config.dt
        if config.scheme == "if_rk4":
            self.half = _DiffusionFactor(grid, params.beta, h / 2)
            self.full = _DiffusionFactor(grid, params.beta, h)
        else:
            self.half = GridPropagator(grid, params.beta, h / 2)
            self.full = GridPropagator(grid, params.beta, h)

    def _tendency(self, u_hat, tau_hat, t):
        s = SpectralState(t, u_hat, tau_hat)
        nu, ntau = nonlinear_terms(s, self.params, self.grid)
        if self.config.scheme == "if_rk4":
            lu, ltau = linear_terms(s, self.params, self.grid, include_diffusion=False)
            return nu + lu, ntau + ltau
        return nu, ntau

    def step(self, state: SpectralState) -> SpectralState:
        h = self.config.dt
        E2, E = self.half.apply, self.full.apply
        u0, t0 = state.u_hat, state.tau_hat
        t = state.time

        k1u, k1t = self._tendency(u0, t0, t)
        a_u, a_t = E2(u0 + 0.5 * h * k1u, t0 + 0.5 * h * k1t)
        k2u, k2t = self._tendency(a_u, a_t, t + h / 2)
        b0u, b0t = E2(u0, t0)
        k3u, k3t = self._tendency(b0u + 0.5 * h * k2u, b0t + 0.5 * h * k2t, t + h / 2)
        e3u, e3t = E2(k3u, k3t)
        c0u, c0t = E(u0, t0)
        k4u, k4t = self._tendency(c0u + h * e3u, c0t + h * e3t, t + h)

        e1u, e1t = E(k1u, k1t)
        m_u, m_t = E2(k2u + k3u, k2t + k3t)
        u1 = c0u + h / 6 * (e1u + 2 * m_u + k4u)
        tau1 = c0t + h / 6 * (e1t + 2 * m_t + k4t)

        u1 = dealias(leray_project(u1, self.grid), self.grid)
        tau1 = dealias(tau1, self.grid)
        new = SpectralState(t + h, u1, tau1)
        self._guard(state, new)
        return new

    def _guard(self, old: SpectralState, new: SpectralState) -> None:
        before = np.sum(spectral_mass(old))
        after = np.sum(spectral_mass(new))
        if not np.isfinite(after) or (before > 0 and after > self.config.growth_guard**2 * before):
            raise BlowUpError(
                f"step to t={new.time:g} grew ||(u,tau)|| by factor "
                f"{np.sqrt(after / before) if before else np.inf:.3g}", old)


def step(state: SpectralState, params: Params, grid: Grid, config: StepperConfig) -> SpectralState:
    """Advance ``state`` by ``config.dt``.  Builds propagators each call; prefer :class:`Stepper` in loops."""
    return Stepper(params, grid, config).step(state)


def integrate(state: SpectralState, params: Params, grid: Grid, config: StepperConfig,
              t_end: float, callback=None) -> SpectralState:
    """Step from ``state.time`` to ``t_end`` with a fixed step (last step shortened if needed)."""
    stepper = Stepper(params, grid, config)
    n = int(np.ceil((t_end - state.time) / config.dt - 1e-9))
    if n <= 0:
        return state
    h = (t_end - state.time) / n
    if abs(h - config.dt) > 1e-14 * config.dt:
        stepper = Stepper(params, grid, StepperConfig(config.scheme, h, config.cfl_safety, config.growth_guard))
    for i in range(n):
        state = stepper.step(state)
        if callback is not None:
            callback(state)
    return SpectralState(t_end if abs(state.time - t_end) < 1e-9 * max(1.0, t_end) else state.time,
                         state.u_hat, state.tau_hat)
