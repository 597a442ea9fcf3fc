"""Exact per-mode solution of the linearized system and continuum decay norms.

In the orthonormal frame (xi_hat, xi_hat_perp) a mode of the linearized
problem splits into

    u_perp' = i k s,      s' = (i k / 2) u_perp - k^{2 beta} s,
    a'      = -k^{2 beta} a,          c' = -k^{2 beta} c,

where u = u_perp xi_hat_perp and
tau = a xi_hat xi_hat + c xi_hat_perp xi_hat_perp + s (xi_hat xi_hat_perp + xi_hat_perp xi_hat).
The coupled pair has roots lambda = (-k^{2 beta} +- sqrt(k^{4 beta} - 2 k^2)) / 2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral import Grid
from .state import Params, SpectralState

CONFLUENT_WINDOW = 1e-12


@dataclass
class ModeCoeffs:
    """Reduced coordinates of one mode (or arrays of modes)."""

    u_perp: complex | np.ndarray
    tau_a: complex | np.ndarray
    tau_c: complex | np.ndarray
    tau_s: complex | np.ndarray
    k_mag: float | np.ndarray
    beta: float = 1.0
    u_par: complex | np.ndarray = 0.0

    def energy(self) -> float | np.ndarray:
        """|u|^2 + |tau|_F^2 of the reconstructed mode."""
        return (np.abs(self.u_perp) ** 2 + np.abs(self.tau_a) ** 2 + np.abs(self.tau_c) ** 2
                + 2.0 * np.abs(self.tau_s) ** 2)

    def tau_energy(self):
        return np.abs(self.tau_a) ** 2 + np.abs(self.tau_c) ** 2 + 2.0 * np.abs(self.tau_s) ** 2


def decompose(u_hat: np.ndarray, tau_hat: np.ndarray, xi: np.ndarray, beta: float = 1.0) -> ModeCoeffs:
    """Cartesian spectral data at wavevector(s) ``xi`` -> modal coordinates.

    ``u_hat`` has shape (2, ...), ``tau_hat`` (3, ...) as (tau11, tau12, tau22)
    and ``xi`` (2, ...).  At xi = 0 the frame e = (1, 0) is used.
    """
    xi = np.asarray(xi, dtype=float)
    k = np.hypot(xi[0], xi[1])
    safe = np.where(k > 0, k, 1.0)
    e1 = np.where(k > 0, xi[0] / safe, 1.0)
    e2 = np.where(k > 0, xi[1] / safe, 0.0)
    p1, p2 = -e2, e1
    t11, t12, t22 = tau_hat
    u_par = e1 * u_hat[0] + e2 * u_hat[1]
    u_perp = p1 * u_hat[0] + p2 * u_hat[1]
    a = e1 * e1 * t11 + 2 * e1 * e2 * t12 + e2 * e2 * t22
    c = p1 * p1 * t11 + 2 * p1 * p2 * t12 + p2 * p2 * t22
    s = e1 * p1 * t11 + (e1 * p2 + e2 * p1) * t12 + e2 * p2 * t22
    return ModeCoeffs(u_perp, a, c, s, k, beta, u_par)


def reconstruct(m: ModeCoeffs, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xi = np.asarray(xi, dtype=float)
    k = np.hypot(xi[0], xi[1])
    safe = np.where(k > 0, k, 1.0)
    e1 = np.where(k > 0, xi[0] / safe, 1.0)
    e2 = np.where(k > 0, xi[1] / safe, 0.0)
    p1, p2 = -e2, e1
    u_hat = np.stack([m.u_par * e1 + m.u_perp * p1, m.u_par * e2 + m.u_perp * p2])
    t11 = m.tau_a * e1 * e1 + m.tau_c * p1 * p1 + 2 * m.tau_s * e1 * p1
    t12 = m.tau_a * e1 * e2 + m.tau_c * p1 * p2 + m.tau_s * (e1 * p2 + e2 * p1)
    t22 = m.tau_a * e2 * e2 + m.tau_c * p2 * p2 + 2 * m.tau_s * e2 * p2
    return u_hat, np.stack([t11, t12, t22])


def characteristic_roots(k, beta: float):
    k = np.asarray(k, dtype=float)
    damp = k ** (2 * beta)
    disc = (damp**2 - 2 * k**2).astype(complex)
    q = np.sqrt(disc)
    return (-damp + q) / 2, (-damp - q) / 2


def _sinhc(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    return np.where(small, 1 + z * z / 6 + z**4 / 120, np.sinh(zs) / zs)


def coupled_propagator(k, beta: float, t: float):
    """Entries (P_uu, P_us, P_su, P_ss) of exp(M t) for M = [[0, ik], [ik/2, -k^{2 beta}]].

    Writes exp(M t) = e^{m t} [cosh(q t) I + t sinhc(q t) (M - m I)] with
    m = -k^{2 beta}/2, q = sqrt(k^{4 beta} - 2 k^2)/2.  Inside the relative
    discriminant window the confluent limit q = 0 is used.  For real q t >= 1
    the two exponentials are formed separately so nothing overflows.
    """
    k = np.asarray(k, dtype=float)
    damp = k ** (2 * beta)
    m = -0.5 * damp
    disc = damp**2 - 2 * k**2
    confluent = np.abs(disc) < CONFLUENT_WINDOW * damp**2
    disc = np.where(confluent, 0.0, disc)
    q = 0.5 * np.sqrt(disc.astype(complex))
    qt = q * t

    real_big = (disc > 0) & (np.abs(qt) >= 1.0)
    qr = np.where(real_big, q.real, 1.0)
    # general product form
    em = np.exp(m * t)
    ch = np.cosh(np.where(real_big, 0.0, qt))
    sc = t * _sinhc(np.where(real_big, 0.0, qt))
    # split form: e^{mt}cosh(qt) and e^{mt}sinh(qt)/q from e^{(m +- q) t}
    ep = np.exp(np.where(real_big, (m + qr) * t, 0.0))
    en = np.exp(np.where(real_big, (m - qr) * t, 0.0))
    c_val = np.where(real_big, 0.5 * (ep + en), em * ch)
    s_val = np.where(real_big, 0.5 * (ep - en) / qr, em * sc)

    p_uu = c_val - m * s_val
    p_us = 1j * k * s_val
    p_su = 0.5j * k * s_val
    p_ss = c_val + (-damp - m) * s_val
    return p_uu, p_us, p_su, p_ss


def mode_evolve(init: ModeCoeffs, t: float) -> ModeCoeffs:
    """Evolve modal coordinates by time ``t`` under the linearized system."""
    if t < 0:
        raise ValueError("t must be non-negative")
    k = np.asarray(init.k_mag, dtype=float)
    beta = init.beta
    decay = np.exp(-(k ** (2 * beta)) * t)
    p_uu, p_us, p_su, p_ss = coupled_propagator(k, beta, t)
    u = p_uu * init.u_perp + p_us * init.tau_s
    s = p_su * init.u_perp + p_ss * init.tau_s
    scalar = np.ndim(init.u_perp) == 0 and np.ndim(k) == 0

    def out(x):
        return complex(x) if scalar else x

    return ModeCoeffs(out(u), out(decay * init.tau_a), out(decay * init.tau_c), out(s),
                      init.k_mag, beta, init.u_par)


class GridPropagator:
    """Precomputed linear propagator of a grid over a fixed time step."""

    def __init__(self, grid: Grid, beta: float, t: float):
        self.grid = grid
        self.t = t
        k = grid.kmag
        self.decay = np.exp(-(k ** (2 * beta)) * t)
        self.p = coupled_propagator(k, beta, t)
        self.beta = beta

    def apply(self, u_hat: np.ndarray, tau_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xi = self.grid.xi
        m = decompose(u_hat, tau_hat, xi, self.beta)
        p_uu, p_us, p_su, p_ss = self.p
        evolved = ModeCoeffs(
            p_uu * m.u_perp + p_us * m.tau_s,
            self.decay * m.tau_a,
            self.decay * m.tau_c,
            p_su * m.u_perp + p_ss * m.tau_s,
            m.k_mag, self.beta, m.u_par,
        )
        return reconstruct(evolved, xi)


def grid_linear_evolve(state: SpectralState, t: float, params: Params, grid: Grid) -> SpectralState:
    """Apply the exact linear evolution over time ``t`` to every grid mode."""
    if t == 0:
        return state.copy()
    u_hat, tau_hat = GridPropagator(grid, params.beta, t).apply(state.u_hat, state.tau_hat)
    return SpectralState(state.time + t, u_hat, tau_hat)


# Gauss-Legendre helpers.

def gauss_legendre(a: float, b: float, n_nodes: int, n_panels: int = 1):
    """Composite Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _gl_on_edges(edges: np.ndarray, n_nodes: int):
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x[None, :]).ravel(), (half[:, None] * w[None, :]).ravel()


def duhamel_identity_residual(init: ModeCoeffs, t: float, n_quad: int = 256, s1: float = 0.0) -> float:
    """Relative residual of the weighted identity

        k^{2 s1} |X(t)|^2 = k^{2 s1} e^{-2 k^2 t} |X(0)|^2
                            + int_0^t 2 k^{2 s1 + 2} e^{-2 k^2 (t - s)} |u(s)|^2 ds

    for beta = 1, with the time integral done by ``n_quad``-point Gauss-Legendre.
    """
    if init.beta != 1.0:
        raise ValueError("the weighted Duhamel identity is stated for beta = 1 only")
    if t < 0:
        raise ValueError("t must be non-negative")
    k = float(init.k_mag)
    w = k ** (2 * s1)
    lhs = w * mode_evolve(init, t).energy()
    if t == 0:
        return 0.0 if lhs == w * init.energy() else abs(lhs - w * init.energy()) / abs(lhs)
    nodes, weights = gauss_legendre(0.0, t, n_quad)
    p_uu, p_us, _, _ = coupled_propagator(k, 1.0, nodes)
    u_perp = p_uu * init.u_perp + p_us * init.tau_s
    integral = np.sum(weights * 2 * k ** (2 * s1 + 2) * np.exp(-2 * k**2 * (t - nodes)) * np.abs(u_perp) ** 2)
    rhs = w * np.exp(-2 * k**2 * t) * init.energy() + integral
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale == 0 else float(abs(lhs - rhs) / scale)


@dataclass
class RadialProfile:
    """Isotropic initial spectral data on the plane, one radial function per modal component.

    ``coherent=False`` treats u_perp and tau_s as carrying independent random
    phases: the |X|^2 of the coupled pair is then the sum of the two
    separately-evolved contributions (the phase average).
    """

    g_u: Callable[[np.ndarray], np.ndarray]
    g_a: Callable[[np.ndarray], np.ndarray]
    g_c: Callable[[np.ndarray], np.ndarray]
    g_s: Callable[[np.ndarray], np.ndarray]
    coherent: bool = True
    tail_scale: float = 1.0
    label: str = ""

    def components(self, k):
        k = np.asarray(k, dtype=float)
        return (np.broadcast_to(self.g_u(k), k.shape), np.broadcast_to(self.g_a(k), k.shape),
                np.broadcast_to(self.g_c(k), k.shape), np.broadcast_to(self.g_s(k), k.shape))

    def magnitude(self, k) -> np.ndarray:
        gu, ga, gc, gs = self.components(k)
        return np.sqrt(np.abs(gu) ** 2 + np.abs(ga) ** 2 + np.abs(gc) ** 2 + 2 * np.abs(gs) ** 2)

    @property
    def mean_values(self) -> tuple[complex, complex, complex, complex]:
        """The k -> 0 limits of the four components."""
        return tuple(complex(g[0]) for g in self.components(np.array([0.0])))

    @property
    def c0(self) -> float:
        return float(self.magnitude(np.array([0.0]))[0])

    def energy_at(self, k, t: float, beta: float) -> np.ndarray:
        """|X(k, t)|^2 evolved from the profile."""
        k = np.asarray(k, dtype=float)
        gu, ga, gc, gs = self.components(k)
        decay2 = np.exp(-2 * k ** (2 * beta) * t)
        p_uu, p_us, p_su, p_ss = coupled_propagator(k, beta, t)
        ac = decay2 * (np.abs(ga) ** 2 + np.abs(gc) ** 2)
        if self.coherent:
            u = p_uu * gu + p_us * gs
            s = p_su * gu + p_ss * gs
            pair = np.abs(u) ** 2 + 2 * np.abs(s) ** 2
        else:
            pair = (np.abs(p_uu * gu) ** 2 + 2 * np.abs(p_su * gu) ** 2
                    + np.abs(p_us * gs) ** 2 + 2 * np.abs(p_ss * gs) ** 2)
        return ac + pair


def gaussian_profile(width: float = 1.0, u: float = 1.0, a: float = 0.0, c: float = 0.0,
                     s: float = 0.0, coherent: bool = True) -> RadialProfile:
    """Profile whose components are constant multiples of exp(-k^2 / width^2)."""

    def make(amp):
        return lambda k: amp * np.exp(-np.asarray(k) ** 2 / width**2)

    return RadialProfile(make(u), make(a), make(c), make(s), coherent=coherent, tail_scale=width,
                         label=f"gaussian(width={width})")


def _tail_cut(profile: RadialProfile, s1: float, rel: float = 1e-6) -> float:
    """K such that the undamped weighted profile beyond K holds < rel of the total."""

    def weighted(a, b, panels=64):
        nodes, weights = gauss_legendre(a, b, 16, panels)
        return float(np.sum(weights * nodes ** (2 * s1 + 1) * profile.magnitude(nodes) ** 2))

    kc = 4.0 * profile.tail_scale
    total = weighted(0.0, kc)
    if total == 0:
        return kc
    for _ in range(60):
        tail = weighted(kc, 2 * kc) + weighted(2 * kc, 8 * kc)
        if tail < rel * 1e-2 * total:
            return kc
        total += weighted(kc, 2 * kc)
        kc *= 2
    raise ValueError("profile is not square-integrable with the requested weight")


def continuum_norm(profile: RadialProfile, s1: float, beta: float, t: float,
                   rtol: float = 1e-9, return_info: bool = False):
    """Plane norm ||Lambda^s1 (u_L, tau_L)(t)|| = (2 pi int k^{2 s1 + 1} |X(k, t)|^2 dk)^{1/2}.

    Composite Gauss-Legendre on [0, K_cut]; the panel count doubles until the
    value changes by less than ``rtol`` (relative).  Panels are graded
    toward k = 0 on the diffusive scale t^{-1/(2 beta)}.
    """
    if s1 < 0:
        raise ValueError("s1 must be non-negative")
    kc = _tail_cut(profile, s1)
    scale = min(kc, 20.0 * (1.0 + t) ** (-1.0 / (2 * beta))) if t > 0 else kc

    def integrate(panels: int) -> float:
        edges = np.unique(np.concatenate([np.linspace(0.0, kc, panels + 1),
                                          np.linspace(0.0, scale, panels + 1)]))
        nodes, weights = _gl_on_edges(edges, 20)
        vals = nodes ** (2 * s1 + 1) * profile.energy_at(nodes, t, beta)
        return float(2 * np.pi * np.sum(weights * vals))

    panels = 8
    prev = integrate(panels)
    for _ in range(12):
        panels *= 2
        cur = integrate(panels)
        if abs(cur - prev) <= rtol * abs(cur) or cur == 0:
            value = np.sqrt(max(cur, 0.0))
            if return_info:
                return value, {"k_cut": kc, "panels": panels, "change": abs(cur - prev) / max(abs(cur), 1e-300)}
            return value
        prev = cur
    raise RuntimeError("continuum_norm quadrature did not converge")


def lower_bound_constant(c0: float, eta: float, s1: float) -> float:
    """C0 = [(c0^2 / 4) 2 pi int_0^eta r^{2 s1 + 1} e^{-2 r^2} dr]^{1/2}."""
    if c0 < 0 or eta <= 0:
        raise ValueError("c0 must be >= 0 and eta > 0")
    if c0 == 0:
        return 0.0
    nodes, weights = gauss_legendre(0.0, eta, 40, max(4, int(np.ceil(eta * 4))))
    integral = np.sum(weights * nodes ** (2 * s1 + 1) * np.exp(-2 * nodes**2))
    return float(np.sqrt(c0**2 / 4 * 2 * np.pi * integral))


def profile_eta(profile: RadialProfile, fraction: float = 0.5, k_hi: float | None = None) -> float:
    """Largest eta with |X_0(k)| >= fraction * c0 on all of [0, eta] (grid search + bisection)."""
    c0 = profile.c0
    target = fraction * c0
    k_hi = k_hi or 8.0 * profile.tail_scale
    ks = np.linspace(0.0, k_hi, 4097)
    mag = profile.magnitude(ks)
    below = np.nonzero(mag < target)[0]
    if below.size == 0:
        return float(k_hi)
    j = below[0]
    lo, hi = ks[j - 1], ks[j]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if profile.magnitude(np.array([mid]))[0] >= target:
            lo = mid
        else:
            hi = mid
    return float(lo)
