"""Multilayer dielectric nanosphere, layered-sphere Mie recursion.

Indices are real. In every layer the radial Debye functions are written as
A * psi_n(m rho) + B * chi_n(m rho) in Riccati-Bessel functions, and the
coefficient pair is carried outwards through each interface using the
Wronskian psi chi' - psi' chi = -1. The TE and TM modes differ only in the
tangential derivative that must be continuous: m * u' for TE, u' / m for TM.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from aembench.config import settings
from aembench.errors import ConvergenceError, DomainError
from aembench.physics.tasks import TaskSpec, check_bounds, shell_task

logger = logging.getLogger(__name__)

TAIL_FLOOR = 1e-24


def riccati_bessel(n: np.ndarray, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """psi, psi', chi, chi' with psi = z j_n(z) and chi = -z y_n(z)."""
    j = spherical_jn(n, z)
    dj = spherical_jn(n, z, derivative=True)
    y = spherical_yn(n, z)
    dy = spherical_yn(n, z, derivative=True)
    psi = z * j
    dpsi = j + z * dj
    chi = -z * y
    dchi = -y - z * dy
    return psi, dpsi, chi, dchi


def _n_stop(x: float) -> int:
    """Wiscombe's truncation order for size parameter x."""
    return int(np.ceil(x + 4.05 * x ** (1.0 / 3.0) + 2.0))


def _series_orders(radii: np.ndarray, rel_index: np.ndarray, k_max: float) -> int:
    x_outer = k_max * radii[-1]
    inner = np.max(np.abs(rel_index) * k_max * radii)
    return int(max(_n_stop(x_outer), np.ceil(inner))) + 15


def layered_sphere_coefficients(
    radii_nm: Sequence[float],
    indices: Sequence[float],
    wavelength_nm: np.ndarray,
    n_host: float = 1.0,
    n_orders: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Scattering coefficients a_n, b_n, shape (n_orders, n_wavelengths).

    `radii_nm` are the outer radii of each layer, innermost first.
    """
    radii = np.asarray(radii_nm, dtype=np.float64)
    m = np.asarray(indices, dtype=np.float64) / n_host
    wl = np.atleast_1d(np.asarray(wavelength_nm, dtype=np.float64))
    if radii.ndim != 1 or radii.size != m.size or radii.size == 0:
        raise DomainError("radii and indices must be equal-length, non-empty")
    if np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise DomainError("layer radii must be positive and strictly increasing")

    k = 2.0 * np.pi * n_host / wl  # (L,)
    if n_orders is None:
        n_orders = _series_orders(radii, m, float(np.max(k)))
    n = np.arange(1, n_orders + 1, dtype=np.float64)[:, None]  # (N, 1)

    coeffs = {}
    for mode in ("te", "tm"):
        A = np.ones((n_orders, wl.size))
        B = np.zeros((n_orders, wl.size))
        for layer, r in enumerate(radii):
            rho = k[None, :] * r
            m_in = m[layer]
            m_out = m[layer + 1] if layer + 1 < m.size else 1.0
            psi, dpsi, chi, dchi = riccati_bessel(n, m_in * rho)
            u = A * psi + B * chi
            du = A * dpsi + B * dchi
            deriv = m_in * du if mode == "te" else du / m_in
            psi, dpsi, chi, dchi = riccati_bessel(n, m_out * rho)
            du_out = deriv / m_out if mode == "te" else deriv * m_out
            # W(psi, chi) = -1
            A, B = -(u * dchi - du_out * chi), -(psi * du_out - dpsi * u)
        # Outside: u ~ psi - c * xi with xi = psi - i chi, so c = B / (B + iA).
        coeffs[mode] = B / (B + 1j * A)

    return coeffs["tm"], coeffs["te"]


def layered_sphere_cross_section(
    radii_nm: Sequence[float],
    indices: Sequence[float],
    wavelength_nm: np.ndarray,
    n_host: float = 1.0,
    tail_tol: float = settings.MIE_TAIL_TOL,
) -> np.ndarray:
    """Scattering cross-section (nm^2) of a concentric multilayer sphere."""
    wl = np.atleast_1d(np.asarray(wavelength_nm, dtype=np.float64))
    a, b = layered_sphere_coefficients(radii_nm, indices, wl, n_host)
    n_orders = a.shape[0]
    n = np.arange(1, n_orders + 1, dtype=np.float64)[:, None]
    terms = (2.0 * n + 1.0) * (np.abs(a) ** 2 + np.abs(b) ** 2)
    if not np.all(np.isfinite(terms)):
        bad = int(np.argmax(~np.all(np.isfinite(terms), axis=1))) + 1
        raise ConvergenceError(f"Mie series produced non-finite terms at order {bad} of {n_orders}")
    total = terms.sum(axis=0)
    tail = terms[-1]
    scale = np.maximum(total, np.finfo(float).tiny)
    # Absolute floor: a no-contrast sphere has an all-round-off series.
    if np.any((tail > tail_tol * scale) & (tail > TAIL_FLOOR)):
        raise ConvergenceError(
            f"Mie series not converged: last order {n_orders} contributes "
            f"{float(np.max(tail / scale)):.3g} of the total"
        )
    k = 2.0 * np.pi * n_host / wl
    return (2.0 * np.pi / k**2) * total


def sphere_cross_section(
    radius_nm: float,
    index: float,
    wavelength_nm: np.ndarray,
    n_host: float = 1.0,
) -> np.ndarray:
    """Homogeneous sphere, textbook Mie coefficients (independent of the recursion)."""
    wl = np.atleast_1d(np.asarray(wavelength_nm, dtype=np.float64))
    m = index / n_host
    k = 2.0 * np.pi * n_host / wl
    x = k * radius_nm
    n_orders = _n_stop(float(np.max(x))) + 15
    n = np.arange(1, n_orders + 1, dtype=np.float64)[:, None]
    psi_x, dpsi_x, chi_x, dchi_x = riccati_bessel(n, x[None, :])
    psi_mx, dpsi_mx, _, _ = riccati_bessel(n, m * x[None, :])
    xi_x = psi_x - 1j * chi_x
    dxi_x = dpsi_x - 1j * dchi_x
    a = (m * psi_mx * dpsi_x - psi_x * dpsi_mx) / (m * psi_mx * dxi_x - xi_x * dpsi_mx)
    b = (psi_mx * dpsi_x - m * psi_x * dpsi_mx) / (psi_mx * dxi_x - m * xi_x * dpsi_mx)
    total = ((2.0 * n + 1.0) * (np.abs(a) ** 2 + np.abs(b) ** 2)).sum(axis=0)
    return (2.0 * np.pi / k**2) * total


def shell_indices(n_layers: int) -> np.ndarray:
    """Alternating high/low indices, high-index core first."""
    hi, lo = settings.SHELL_INDEX_HIGH, settings.SHELL_INDEX_LOW
    return np.array([hi if i % 2 == 0 else lo for i in range(n_layers)])


def simulate_shell(
    g: np.ndarray,
    task: Optional[TaskSpec] = None,
    indices: Optional[Sequence[float]] = None,
    n_host: float = settings.HOST_INDEX,
) -> np.ndarray:
    """Scattering cross-section (201 points, 400-800 nm) for 8 shell thicknesses.

    The first entry is the core radius, the rest are shell thicknesses.
    """
    task = task or shell_task()
    g = check_bounds(task, g)
    radii = np.cumsum(g)
    idx = shell_indices(g.size) if indices is None else np.asarray(indices, dtype=np.float64)
    return layered_sphere_cross_section(radii, idx, task.wavelengths, n_host)
