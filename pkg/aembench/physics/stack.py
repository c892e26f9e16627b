"""Graphene / Si3N4 multilayer stack, transfer-matrix method.

Normal incidence, s-polarized light from air onto five periods of
(graphene sheet, dielectric spacer) resting on a substrate. The graphene
sheets are zero-thickness conducting interfaces. Matrices follow the
characteristic-matrix convention: each layer maps the tangential field pair
(E, Z0 H) across its thickness, and a sheet of surface conductivity sigma
adds Z0 * sigma to the magnetic field jump.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from aembench.config import settings
from aembench.physics.tasks import TaskSpec, check_bounds, stack_task

E_CHARGE = 1.602176634e-19  # C
HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K
Z0 = 376.730313668  # Ohm
C_LIGHT = 299_792_458.0  # m / s
EV = E_CHARGE  # J


@dataclass(frozen=True)
class StackPhysics:
    fermi_level_ev: float = settings.FERMI_LEVEL_EV
    scattering_time_fs: float = settings.SCATTERING_TIME_FS
    temperature_k: float = settings.TEMPERATURE_K
    n_dielectric: float = settings.DIELECTRIC_INDEX
    n_incident: float = 1.0
    n_substrate: float = settings.SUBSTRATE_INDEX
    graphene: bool = True
    # Multiplies the sheet conductivity; 0 switches the loss off.
    conductivity_scale: float = 1.0


def graphene_conductivity(wavelength_nm: np.ndarray, physics: StackPhysics) -> np.ndarray:
    """Surface conductivity (S) of a graphene sheet, exp(+i w t) convention.

    Drude intraband term at finite temperature plus a smoothed interband step
    with a broadened logarithmic reactive part. Re(sigma) >= 0 everywhere.
    """
    wl = np.asarray(wavelength_nm, dtype=np.float64) * 1e-9
    omega = 2.0 * np.pi * C_LIGHT / wl
    tau = physics.scattering_time_fs * 1e-15
    kt = K_B * physics.temperature_k
    mu = physics.fermi_level_ev * EV

    # log(2 cosh(mu / 2kT)) without overflow.
    x = mu / (2.0 * kt)
    thermal = 2.0 * kt * np.logaddexp(x, -x)
    sigma_intra = (E_CHARGE**2 * thermal * tau / (np.pi * HBAR**2)) / (1.0 + 1j * omega * tau)

    hw = HBAR * omega
    gamma = HBAR / tau
    step = 0.5 * (np.tanh((hw + 2 * mu) / (4 * kt)) + np.tanh((hw - 2 * mu) / (4 * kt)))
    reactive = np.log(((hw + 2 * mu) ** 2 + gamma**2) / ((hw - 2 * mu) ** 2 + gamma**2)) / (2 * np.pi)
    sigma_inter = (E_CHARGE**2 / (4.0 * HBAR)) * (step + 1j * reactive)

    return physics.conductivity_scale * (sigma_intra + sigma_inter)


def _layer_matrix(n: float, d_nm: float, wl_nm: np.ndarray):
    delta = 2.0 * np.pi * n * d_nm / wl_nm
    c, s = np.cos(delta), np.sin(delta)
    return c, 1j * s / n, 1j * n * s, c


def stack_rta(
    thicknesses_nm: np.ndarray,
    wavelength_nm: np.ndarray,
    physics: Optional[StackPhysics] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reflectance, transmittance and absorptance of the stack.

    Absorptance comes from the net Poynting flux into the stack, not from
    1 - R - T, so R + T + A = 1 is a real check on the matrices.
    """
    physics = physics or StackPhysics()
    wl = np.asarray(wavelength_nm, dtype=np.float64)
    eta0, eta_sub = physics.n_incident, physics.n_substrate

    y_sheet = Z0 * graphene_conductivity(wl, physics) if physics.graphene else np.zeros_like(wl)

    # Characteristic matrix, accumulated from the incident side.
    m11 = np.ones_like(wl, dtype=complex)
    m12 = np.zeros_like(wl, dtype=complex)
    m21 = np.zeros_like(wl, dtype=complex)
    m22 = np.ones_like(wl, dtype=complex)
    for d in np.asarray(thicknesses_nm, dtype=np.float64):
        # sheet: [[1, 0], [y, 1]]
        m11, m12, m21, m22 = m11 + m12 * y_sheet, m12, m21 + m22 * y_sheet, m22
        a11, a12, a21, a22 = _layer_matrix(physics.n_dielectric, d, wl)
        m11, m12, m21, m22 = (
            m11 * a11 + m12 * a21,
            m11 * a12 + m12 * a22,
            m21 * a11 + m22 * a21,
            m21 * a12 + m22 * a22,
        )

    b = m11 + m12 * eta_sub
    c = m21 + m22 * eta_sub
    denom = eta0 * b + c
    r = (eta0 * b - c) / denom
    R = np.abs(r) ** 2
    T = 4.0 * eta0 * np.real(eta_sub) / np.abs(denom) ** 2
    A = 4.0 * eta0 * np.real(b * np.conj(c) - eta_sub) / np.abs(denom) ** 2
    return R, T, A


def slab_reflectance(n0: float, n1: float, n2: float, d_nm: float, wavelength_nm: np.ndarray) -> np.ndarray:
    """Airy formula for one lossless slab between two half-spaces."""
    r01 = (n0 - n1) / (n0 + n1)
    r12 = (n1 - n2) / (n1 + n2)
    phase = 4.0 * np.pi * n1 * d_nm / np.asarray(wavelength_nm, dtype=np.float64)
    num = r01**2 + r12**2 + 2.0 * r01 * r12 * np.cos(phase)
    den = 1.0 + (r01 * r12) ** 2 + 2.0 * r01 * r12 * np.cos(phase)
    return num / den


def simulate_stack(
    g: np.ndarray,
    physics: Optional[StackPhysics] = None,
    task: Optional[TaskSpec] = None,
) -> np.ndarray:
    """Absorptivity spectrum (256 points, 240-2000 nm) for 5 spacer thicknesses."""
    task = task or stack_task()
    g = check_bounds(task, g)
    _, _, A = stack_rta(g, task.wavelengths, physics)
    return A
