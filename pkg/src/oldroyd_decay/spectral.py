"""Periodic-box grid, spectral multipliers, transforms and dealiasing.

Coefficient convention: f(x) = sum_xi f_hat(xi) exp(i xi . x), so that
``f_hat = fft2(f) / N**2`` and

    ||f||_{L^2(torus)}^2 = L**2 * sum |f_hat|**2.

Arrays are full complex ``(N, N)`` spectra in FFT order; axis 0 is x1 and
axis 1 is x2.  Vector fields carry a leading component axis.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.fft

# Shell profile of the Littlewood-Paley mother function.
_CHI_INNER = 3.0 / 4.0
_CHI_OUTER = 4.0 / 3.0
SHELL_INNER = 3.0 / 4.0
SHELL_OUTER = 8.0 / 3.0


def fft_workers() -> int:
    """Worker count for scipy.fft, capped by ``OLDB_THREADS`` when set."""
    value = os.environ.get("OLDB_THREADS")
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Square periodic box of side ``box_length`` with ``n_points`` per axis."""

    n_points: int
    box_length: float
    kx: np.ndarray
    ky: np.ndarray
    k2: np.ndarray
    kmag: np.ndarray
    dealias_mask: np.ndarray
    mode_measure: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_points, self.n_points)

    @property
    def dx(self) -> float:
        return self.box_length / self.n_points

    @property
    def k_unit(self) -> float:
        return 2.0 * np.pi / self.box_length

    @property
    def kmax(self) -> float:
        return float(self.kmag.max())

    @property
    def xi(self) -> np.ndarray:
        return np.stack([self.kx, self.ky])

    def unit_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (xi_hat, xi_hat_perp) with xi_hat_perp = (-xi_hat_2, xi_hat_1).

        The zero mode gets xi_hat = (1, 0) so the modal frame stays orthonormal.
        """
        safe = np.where(self.kmag > 0, self.kmag, 1.0)
        e1 = np.where(self.kmag > 0, self.kx / safe, 1.0)
        e2 = np.where(self.kmag > 0, self.ky / safe, 0.0)
        return np.stack([e1, e2]), np.stack([-e2, e1])

    def physical_coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n_points) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    def mode_index(self, n1: int, n2: int) -> tuple[int, int]:
        """Array index of integer mode (n1, n2)."""
        return (n1 % self.n_points, n2 % self.n_points)


def build_grid(n_points: int, box_length: float) -> Grid:
    if int(n_points) != n_points or n_points < 16 or n_points % 2:
        raise ValueError(f"n_points must be an even integer >= 16, got {n_points}")
    if not box_length > 0:
        raise ValueError(f"box_length must be positive, got {box_length}")
    n_points = int(n_points)
    box_length = float(box_length)
    n = np.fft.fftfreq(n_points, d=1.0 / n_points)
    n1, n2 = np.meshgrid(n, n, indexing="ij")
    scale = 2.0 * np.pi / box_length
    kx = scale * n1
    ky = scale * n2
    k2 = kx**2 + ky**2
    cut = n_points // 3
    mask = (np.abs(n1) <= cut) & (np.abs(n2) <= cut)
    return Grid(
        n_points=n_points,
        box_length=box_length,
        kx=_frozen(kx),
        ky=_frozen(ky),
        k2=_frozen(k2),
        kmag=_frozen(np.sqrt(k2)),
        dealias_mask=_frozen(mask),
        mode_measure=scale**2,
    )


def fractional_symbol(grid: Grid, beta: float) -> np.ndarray:
    """Symbol |xi|^{2 beta} of (-Delta)^beta, zero at xi = 0."""
    if not 0.5 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [1/2, 1], got {beta}")
    return grid.kmag ** (2.0 * beta)


def homogeneous_symbol(grid: Grid, sigma: float) -> np.ndarray:
    """Symbol |xi|^sigma of Lambda^sigma.  Defined as 0 at xi = 0 for every sigma."""
    out = np.zeros(grid.shape)
    nz = grid.kmag > 0
    out[nz] = grid.kmag[nz] ** sigma
    return out


def inhomogeneous_symbol(grid: Grid, sigma: float) -> np.ndarray:
    """Symbol (1 + |xi|^2)^{sigma/2} of the H^sigma weight's square root."""
    return (1.0 + grid.k2) ** (0.5 * sigma)


def check_mean_free(f_hat: np.ndarray, what: str = "field") -> None:
    """Guard for negative-order homogeneous multipliers."""
    f_hat = np.asarray(f_hat)
    zero = f_hat[..., 0, 0]
    total = np.sqrt(np.sum(np.abs(f_hat) ** 2))
    if np.sqrt(np.sum(np.abs(zero) ** 2)) > 1e-14 * total:
        raise ValueError(f"negative-order homogeneous multiplier applied to {what} with nonzero mean")


def leray_project(v_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Remove the gradient part of a spectral vector field; xi = 0 passes through."""
    v_hat = np.asarray(v_hat)
    safe = np.where(grid.k2 > 0, grid.k2, 1.0)
    div = (grid.kx * v_hat[0] + grid.ky * v_hat[1]) / safe
    div = np.where(grid.k2 > 0, div, 0.0)
    return np.stack([v_hat[0] - grid.kx * div, v_hat[1] - grid.ky * div])


def dealias(f_hat: np.ndarray, grid: Grid) -> np.ndarray:
    return np.where(grid.dealias_mask, f_hat, 0.0)


def _check_shape(a: np.ndarray, grid: Grid) -> None:
    if a.shape[-2:] != grid.shape:
        raise ValueError(f"array shape {a.shape} does not match grid {grid.shape}")


def to_physical(f_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Real physical field(s) from Hermitian spectral coefficients (last two axes).

    Only the non-negative half of the last axis is read, so a non-Hermitian
    input is silently symmetrized; use :func:`to_physical_complex` to check.
    """
    f_hat = np.asarray(f_hat)
    _check_shape(f_hat, grid)
    n = grid.n_points
    half = f_hat[..., : n // 2 + 1]
    return scipy.fft.irfft2(half, s=(n, n), axes=(-2, -1), norm="forward", workers=fft_workers())


def to_physical_complex(f_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Inverse transform without discarding the imaginary part (reality checks)."""
    f_hat = np.asarray(f_hat)
    _check_shape(f_hat, grid)
    return scipy.fft.ifft2(f_hat, axes=(-2, -1), norm="forward", workers=fft_workers())


def to_spectral(f: np.ndarray, grid: Grid) -> np.ndarray:
    f = np.asarray(f)
    _check_shape(f, grid)
    return scipy.fft.fft2(f, axes=(-2, -1), norm="forward", workers=fft_workers())


def spectral_l2_sq(f_hat: np.ndarray, grid: Grid) -> float:
    """||f||^2 on the torus via Parseval (sums over any leading axes)."""
    return float(grid.box_length**2 * np.sum(np.abs(f_hat) ** 2))


def conjugate_mirror(f_hat: np.ndarray) -> np.ndarray:
    """conj(f_hat(-xi)) for every xi, in FFT storage order."""
    flipped = np.roll(np.flip(f_hat, axis=(-2, -1)), shift=1, axis=(-2, -1))
    return np.conj(flipped)


# Littlewood-Paley machinery.

def _smooth_step(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def lp_chi(r: np.ndarray) -> np.ndarray:
    """Radial cutoff equal to 1 on [0, 3/4] and 0 on [4/3, inf), C-infinity in between."""
    r = np.asarray(r, dtype=float)
    out = np.where(r <= _CHI_INNER, 1.0, 0.0)
    ramp = (r > _CHI_INNER) & (r < _CHI_OUTER)
    a = _smooth_step(_CHI_OUTER - r[ramp])
    b = _smooth_step(r[ramp] - _CHI_INNER)
    out[ramp] = a / (a + b)
    return out


def lp_phi(r: np.ndarray) -> np.ndarray:
    """Mother shell function phi(r) = chi(r/2) - chi(r), supported in [3/4, 8/3]."""
    r = np.asarray(r, dtype=float)
    return lp_chi(0.5 * r) - lp_chi(r)


def shell_range(kmin: float, kmax: float) -> tuple[int, int]:
    """Levels j whose annulus [3/4 2^j, 8/3 2^j] meets [kmin, kmax]."""
    j_lo = int(np.ceil(np.log2(kmin / SHELL_OUTER)))
    j_hi = int(np.floor(np.log2(kmax / SHELL_INNER)))
    while SHELL_OUTER * 2.0**j_lo < kmin:
        j_lo += 1
    while SHELL_INNER * 2.0**j_hi > kmax:
        j_hi -= 1
    return j_lo, j_hi


@dataclass(frozen=True, eq=False)
class ShellWeights:
    levels: list[tuple[int, np.ndarray]]
    covered: np.ndarray
    j_min: int
    j_max: int

    @property
    def uncovered(self) -> np.ndarray:
        """Nonzero modes whose shell weights do not sum to one."""
        return ~self.covered

    def total(self) -> np.ndarray:
        return sum(w for _, w in self.levels)


def lp_shell_weights(grid: Grid, j_min: int | None = None, j_max: int | None = None) -> ShellWeights:
    """Shell weights phi(2^-j xi) for every level intersecting the grid.

    Explicit ``j_min``/``j_max`` restrict the level range; nonzero modes that
    then fall below the lowest shell are flagged in ``covered``.
    """
    nz = grid.kmag > 0
    lo, hi = shell_range(float(grid.kmag[nz].min()), grid.kmax)
    lo = lo if j_min is None else j_min
    hi = hi if j_max is None else j_max
    levels = []
    for j in range(lo, hi + 1):
        w = lp_phi(grid.kmag * 2.0**-j)
        w[0, 0] = 0.0
        levels.append((j, _frozen(w)))
    total = sum(w for _, w in levels) if levels else np.zeros(grid.shape)
    covered = nz & (np.abs(total - 1.0) <= 1e-12)
    return ShellWeights(levels=levels, covered=_frozen(covered), j_min=lo, j_max=hi)
