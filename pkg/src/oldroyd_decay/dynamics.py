"""Right-hand side of the Oldroyd-B system with fractional stress diffusion.

    u_t + u.grad u + grad P = div tau,            div u = 0
    tau_t + u.grad tau + Q(grad u, tau) + (-Delta)^beta tau = D(u)

with Q = tau Omega - Omega tau + b (D tau + tau D).  Pressure is removed by
Leray projection; quadratic terms are formed in physical space and
dealiased with the 2/3 rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid, dealias, fractional_symbol, leray_project, to_physical, to_spectral
from .state import Params, SpectralState


@dataclass(frozen=True, eq=False)
class Tendency:
    du_hat: np.ndarray
    dtau_hat: np.ndarray
    diffusion_included: bool


def gradient(u_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral velocity gradient G[j, k] = d_k u_j, shape (2, 2, N, N)."""
    xi = grid.xi
    return 1j * u_hat[:, None] * xi[None, :]


def deformation(u_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Symmetric part of grad u as stored components (D11, D12, D22)."""
    kx, ky = grid.kx, grid.ky
    return np.stack([
        1j * kx * u_hat[0],
        0.5j * (ky * u_hat[0] + kx * u_hat[1]),
        1j * ky * u_hat[1],
    ])


def vorticity_tensor(u_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Antisymmetric part of grad u as a full (2, 2, N, N) tensor."""
    w12 = 0.5j * (grid.ky * u_hat[0] - grid.kx * u_hat[1])
    zero = np.zeros_like(w12)
    return np.array([[zero, w12], [-w12, zero]])


def div_tau(tau_hat: np.ndarray, grid: Grid) -> np.ndarray:
    t11, t12, t22 = tau_hat
    return np.stack([
        1j * (grid.kx * t11 + grid.ky * t12),
        1j * (grid.kx * t12 + grid.ky * t22),
    ])


def q_bilinear(grad_u: np.ndarray, tau: np.ndarray, b_slip: float) -> np.ndarray:
    """Q(grad u, tau) pointwise.

    ``grad_u`` is a (2, 2, ...) array with grad_u[j, k] = d_k u_j; ``tau`` holds
    the stored components (tau11, tau12, tau22).  Returns (Q11, Q12, Q22).
    """
    g11, g12, g21, g22 = grad_u[0, 0], grad_u[0, 1], grad_u[1, 0], grad_u[1, 1]
    t11, t12, t22 = tau
    d11, d22 = g11, g22
    d12 = 0.5 * (g12 + g21)
    w = 0.5 * (g12 - g21)  # Omega = [[0, w], [-w, 0]]
    # tau Omega - Omega tau
    c11 = -2.0 * w * t12
    c12 = w * (t11 - t22)
    c22 = 2.0 * w * t12
    # D tau + tau D
    s11 = 2.0 * (d11 * t11 + d12 * t12)
    s12 = (d11 + d22) * t12 + d12 * (t11 + t22)
    s22 = 2.0 * (d12 * t12 + d22 * t22)
    return np.stack([c11 + b_slip * s11, c12 + b_slip * s12, c22 + b_slip * s22])


def advect(u_hat: np.ndarray, f_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Dealiased pseudo-spectral (u . grad) f for every (real) component of ``f_hat``."""
    u = to_physical(u_hat, grid)
    grads = to_physical(1j * f_hat[:, None] * grid.xi[None, :], grid)
    prod = u[0] * grads[:, 0] + u[1] * grads[:, 1]
    return dealias(to_spectral(prod, grid), grid)


def nonlinear_terms(state: SpectralState, params: Params, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Projected -u.grad u and -(u.grad tau + Q), both dealiased."""
    u_hat, tau_hat = state.u_hat, state.tau_hat
    u = to_physical(u_hat, grid)
    grad_u = to_physical(gradient(u_hat, grid), grid)
    tau = to_physical(tau_hat, grid)
    grad_tau = to_physical(1j * tau_hat[:, None] * grid.xi[None, :], grid)

    adv_u = u[0] * grad_u[:, 0] + u[1] * grad_u[:, 1]
    adv_tau = u[0] * grad_tau[:, 0] + u[1] * grad_tau[:, 1]
    q = q_bilinear(grad_u, tau, params.b_slip)

    nu = dealias(to_spectral(-adv_u, grid), grid)
    ntau = dealias(to_spectral(-(adv_tau + q), grid), grid)
    return leray_project(nu, grid), ntau


def linear_terms(state: SpectralState, params: Params, grid: Grid,
                 include_diffusion: bool = True) -> tuple[np.ndarray, np.ndarray]:
    du = leray_project(div_tau(state.tau_hat, grid), grid)
    dtau = deformation(state.u_hat, grid)
    if include_diffusion:
        dtau = dtau - fractional_symbol(grid, params.beta) * state.tau_hat
    return du, dtau


def rhs(state: SpectralState, params: Params, grid: Grid, include_diffusion: bool = True) -> Tendency:
    nu, ntau = nonlinear_terms(state, params, grid)
    lu, ltau = linear_terms(state, params, grid, include_diffusion)
    return Tendency(nu + lu, ntau + ltau, include_diffusion)
