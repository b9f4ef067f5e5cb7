"""Steady-state single-photon reflection off an atom-nanophotonic cavity.

A register of trapped atoms couples to one mode of a single-sided cavity
whose only extraction port is the waveguide (rate ``kappa_wg``); all other
cavity loss is lumped into a scattering rate ``kappa_sc``.  In the
weak-excitation limit the intracavity field and the atomic dipoles obey
linear equations of motion, and eliminating the dipoles in steady state
gives the reflection coefficient of a resonant probe photon:

    r(delta) = -1 - kappa_wg / D(delta)
    D(delta) = i*delta - kappa/2 + sum_mu gtilde_mu**2 / (i*delta - gamma/2)

where ``gtilde_mu = g_mu * cos(phase_arg_mu)`` is the position-weighted
coupling of atom ``mu``, ``kappa = kappa_wg + kappa_sc``, and the sum runs
over the atoms currently flagged as coupled.  All rates are expressed as
dimensionless multiples of the atomic decay rate ``gamma``.

At critical coupling (``kappa_wg == kappa_sc``) the bare-cavity reflection
vanishes on resonance, while a single coupled atom of cooperativity C pins
``r = -C/(1+C)``; this contrast is what every carving protocol in this
package exploits.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "AtomSite",
    "CavityParams",
    "ReflectionPoint",
    "cooperativity",
    "reflection_coefficient",
    "reflection_dense_solve",
    "reflectivity_spectrum",
]


@dataclass(frozen=True)
class AtomSite:
    """One trapped atom: bare coupling ``g``, standing-wave position
    argument ``phase_arg`` (the effective coupling is ``g*cos(phase_arg)``),
    and a flag telling whether the atom currently participates in the
    cavity interaction."""

    g: float
    phase_arg: float = 0.0
    coupled: bool = True

    def __post_init__(self) -> None:
        if self.g < 0:
            raise ValueError(f"atom coupling g must be >= 0, got {self.g}")

    @property
    def g_eff(self) -> float:
        """Position-weighted coupling ``g*cos(phase_arg)``."""
        return self.g * math.cos(self.phase_arg)


@dataclass(frozen=True)
class CavityParams:
    """Cavity rates plus the atom register.  Rates are in units of gamma."""

    kappa_wg: float
    kappa_sc: float
    atoms: tuple[AtomSite, ...] = ()
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.kappa_wg < 0 or self.kappa_sc < 0:
            raise ValueError("kappa_wg and kappa_sc must be >= 0")
        if self.kappa_wg + self.kappa_sc <= 0:
            raise ValueError("total cavity linewidth must be > 0")
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if self.kappa_wg == 0:
            warnings.warn(
                "kappa_wg = 0: no waveguide extraction port, r = -1 identically",
                stacklevel=2,
            )

    @property
    def kappa(self) -> float:
        """Total cavity linewidth."""
        return self.kappa_wg + self.kappa_sc

    def with_coupled(self, coupled_indices: Iterable[int]) -> "CavityParams":
        """Copy of the parameters with exactly the given atoms coupled."""
        wanted = frozenset(coupled_indices)
        bad = [i for i in wanted if not 0 <= i < len(self.atoms)]
        if bad:
            raise IndexError(f"atom indices out of range: {sorted(bad)}")
        atoms = tuple(
            replace(a, coupled=(i in wanted)) for i, a in enumerate(self.atoms)
        )
        return replace(self, atoms=atoms)


@dataclass(frozen=True)
class ReflectionPoint:
    """One sample of the reflection spectrum."""

    delta: float
    r: complex
    R: float


def cooperativity(params: CavityParams, atom_index: int) -> float:
    """Single-atom cooperativity ``4*g_eff**2 / (kappa*gamma)``."""
    if not 0 <= atom_index < len(params.atoms):
        raise IndexError(
            f"atom_index {atom_index} out of range for {len(params.atoms)} atoms"
        )
    g_eff = params.atoms[atom_index].g_eff
    return 4.0 * g_eff * g_eff / (params.kappa * params.gamma)


def _denominator(params: CavityParams, delta: float) -> complex:
    d = 1j * delta - params.kappa / 2.0
    atom_pole = 1j * delta - params.gamma / 2.0
    for atom in params.atoms:
        if atom.coupled:
            g_eff = atom.g_eff
            d += g_eff * g_eff / atom_pole
    return d


def reflection_coefficient(params: CavityParams, delta: float = 0.0) -> complex:
    """Steady-state reflection coefficient r(delta).

    Only atoms flagged ``coupled`` contribute.  The passive structure of the
    equations guarantees ``|r| <= 1`` for real detunings.
    """
    return -params.kappa_wg / _denominator(params, delta) - 1.0


def reflection_dense_solve(params: CavityParams, delta: float = 0.0) -> complex:
    """Reflection coefficient from a dense solve of the steady-state linear
    system in the unknowns (cavity field, one dipole per coupled atom).

    Mathematically identical to :func:`reflection_coefficient`; kept as an
    independent cross-check that does not share the algebraic elimination.
    """
    coupled = [a for a in params.atoms if a.coupled]
    m = len(coupled)
    mat = np.zeros((m + 1, m + 1), dtype=complex)
    rhs = np.zeros(m + 1, dtype=complex)
    mat[0, 0] = 1j * delta - params.kappa / 2.0
    for i, atom in enumerate(coupled):
        mat[0, i + 1] = -1j * atom.g_eff
        mat[i + 1, 0] = -1j * atom.g_eff
        mat[i + 1, i + 1] = 1j * delta - params.gamma / 2.0
    root_kwg = math.sqrt(params.kappa_wg)
    rhs[0] = -root_kwg
    sol = np.linalg.solve(mat, rhs)
    return complex(root_kwg * sol[0] - 1.0)


def reflectivity_spectrum(
    params: CavityParams, deltas: Sequence[float]
) -> list[ReflectionPoint]:
    """Sample r(delta) and R = |r|**2 over a detuning grid."""
    points = []
    for delta in deltas:
        r = reflection_coefficient(params, float(delta))
        points.append(ReflectionPoint(float(delta), r, abs(r) ** 2))
    return points
