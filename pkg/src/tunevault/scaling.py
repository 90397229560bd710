"""Beam kinematics and species scale factors.

All restore math derives from two constants: the atomic mass unit energy
equivalent (931.494 MeV) and the rigidity conversion Bρ = pc[MeV] /
(299.792458 · q) T·m. Relativistic kinematics are used throughout; at the
machine limit of β = 0.2 the nonrelativistic error would already be ~2%, and
exactness costs nothing.

Scale laws, one per device family, are ratios of a per-beam quantity:

  magnetic       magnetic rigidity p/q          (bending and focusing magnets)
  electrostatic  electric rigidity pβc/q        (electrostatic deflectors)
  rf_amplitude   energy gain per charge m·E/q   (resonator amplitudes)
  none           1.0                            (phases, geometry, steppers)

Factors are ratios of identical code paths, so identical beams give exactly
1.0, and factors compose and invert to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidBeam

ATOMIC_MASS_MEV = 931.494
RIGIDITY_DIVISOR = 299.792458  # T*m per (MeV / elementary charge)
BETA_MACHINE_LIMIT = 0.2
MAX_CHARGE_STATE = 120

SCALING_LAWS = ("magnetic", "electrostatic", "rf_amplitude", "none")


@dataclass(frozen=True)
class BeamParameters:
    """Species triple: mass (u), charge state (e), kinetic energy (MeV/u)."""

    mass_amu: float
    charge_state: int
    energy_mev_u: float

    def __post_init__(self):
        if isinstance(self.charge_state, bool) or not isinstance(self.charge_state, int):
            raise InvalidBeam(f"charge_state must be an integer, got {self.charge_state!r}")
        if not (isinstance(self.mass_amu, (int, float)) and math.isfinite(self.mass_amu)):
            raise InvalidBeam(f"mass_amu must be finite, got {self.mass_amu!r}")
        if not (isinstance(self.energy_mev_u, (int, float)) and math.isfinite(self.energy_mev_u)):
            raise InvalidBeam(f"energy_mev_u must be finite, got {self.energy_mev_u!r}")
        if self.mass_amu <= 0:
            raise InvalidBeam(f"mass_amu must be > 0, got {self.mass_amu}")
        if not 1 <= self.charge_state <= MAX_CHARGE_STATE:
            raise InvalidBeam(
                f"charge_state must be in 1..{MAX_CHARGE_STATE}, got {self.charge_state}"
            )
        if self.energy_mev_u <= 0:
            raise InvalidBeam(f"energy_mev_u must be > 0, got {self.energy_mev_u}")
        object.__setattr__(self, "mass_amu", float(self.mass_amu))
        object.__setattr__(self, "energy_mev_u", float(self.energy_mev_u))

    def to_dict(self) -> dict:
        return {
            "mass_amu": self.mass_amu,
            "charge_state": self.charge_state,
            "energy_mev_u": self.energy_mev_u,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BeamParameters":
        if not isinstance(data, dict):
            raise InvalidBeam(f"beam must be an object, got {type(data).__name__}")
        missing = {"mass_amu", "charge_state", "energy_mev_u"} - set(data)
        if missing:
            raise InvalidBeam(f"beam missing fields: {sorted(missing)}")
        return cls(data["mass_amu"], data["charge_state"], data["energy_mev_u"])


@dataclass(frozen=True)
class Kinematics:
    gamma: float
    beta: float
    pc_total_mev: float
    rigidity_tm: float


def kinematics(beam: BeamParameters) -> Kinematics:
    """γ = 1 + E/u, βγ = √(γ²−1), pc = m·u·βγ, Bρ = pc/(299.792458·q).

    βγ is evaluated as √((γ−1)(γ+1)) with γ−1 = E/u taken directly, which is
    the same expression without the cancellation that would cost ~4 digits
    at low energy.
    """
    e_rel = beam.energy_mev_u / ATOMIC_MASS_MEV  # γ − 1
    gamma = 1.0 + e_rel
    beta_gamma = math.sqrt(e_rel * (e_rel + 2.0))
    beta = beta_gamma / gamma
    pc = beam.mass_amu * ATOMIC_MASS_MEV * beta_gamma
    rigidity = pc / (RIGIDITY_DIVISOR * beam.charge_state)
    return Kinematics(gamma=gamma, beta=beta, pc_total_mev=pc, rigidity_tm=rigidity)


def beta_exceeds_limit(beam: BeamParameters) -> bool:
    return kinematics(beam).beta > BETA_MACHINE_LIMIT


def energy_at_beta(beta: float) -> float:
    """Kinetic energy (MeV/u) at which a beam reaches the given β."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    gamma = 1.0 / math.sqrt(1.0 - beta * beta)
    return (gamma - 1.0) * ATOMIC_MASS_MEV


def _magnetic_quantity(beam: BeamParameters) -> float:
    return kinematics(beam).rigidity_tm


def _electrostatic_quantity(beam: BeamParameters) -> float:
    k = kinematics(beam)
    return k.pc_total_mev * k.beta / beam.charge_state


def _rf_amplitude_quantity(beam: BeamParameters) -> float:
    return beam.mass_amu * beam.energy_mev_u / beam.charge_state


_LAW_QUANTITIES = {
    "magnetic": _magnetic_quantity,
    "electrostatic": _electrostatic_quantity,
    "rf_amplitude": _rf_amplitude_quantity,
}


@dataclass(frozen=True)
class ScaleFactorSet:
    magnetic: float
    electrostatic: float
    rf_amplitude: float
    none: float = 1.0

    def for_law(self, law: str) -> float:
        if law not in SCALING_LAWS:
            raise ValueError(f"unknown scaling law {law!r}")
        return getattr(self, law)

    def to_dict(self) -> dict:
        return {
            "magnetic": self.magnetic,
            "electrostatic": self.electrostatic,
            "rf_amplitude": self.rf_amplitude,
            "none": self.none,
        }


def scale_factors(old: BeamParameters, new: BeamParameters) -> ScaleFactorSet:
    """Per-law multipliers taking setpoints archived for ``old`` to ``new``."""
    return ScaleFactorSet(
        magnetic=_LAW_QUANTITIES["magnetic"](new) / _LAW_QUANTITIES["magnetic"](old),
        electrostatic=_LAW_QUANTITIES["electrostatic"](new)
        / _LAW_QUANTITIES["electrostatic"](old),
        rf_amplitude=_LAW_QUANTITIES["rf_amplitude"](new)
        / _LAW_QUANTITIES["rf_amplitude"](old),
    )
