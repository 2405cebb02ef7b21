"""Electrostatic brake force model.

A brake is a stack of thin electrodes separated by a dielectric film. Applying
a voltage pulls the electrodes together like a parallel-plate capacitor; the
resulting friction resists sliding, and a rack-pinion transmission turns that
sliding resistance into a holding torque at the joint. All functions here are
pure and operate on a single immutable ``BrakeSpec``.

Units are SI throughout (volts, meters, newtons, newton-meters, watts).
"""

from __future__ import annotations

from dataclasses import dataclass

VACUUM_PERMITTIVITY = 8.854e-12  # F/m

# Measured electrical draw of one engaged electrode stack.
PER_STACK_POWER_W = 0.01


@dataclass(frozen=True)
class BrakeSpec:
    """Electrical and geometric parameters of one joint's brake stack.

    Attributes:
        voltage: Applied drive voltage in volts (>= 0; 0 means disengaged).
        relative_permittivity: Dielectric constant of the insulating film.
        dielectric_thickness: Electrode separation in meters.
        overlap_area: Electrode overlap area per interface in square meters.
        friction_coefficient: Electrode/dielectric sliding friction (>= 0).
        pinion_pitch_diameter: Pitch diameter of the rack-pinion gear, meters.
        num_stacks: Number of stacked electrode sets.
        interfaces_per_stack: Sliding interfaces per stack. A stack sandwiches
            one electrode between two others, so the default is 2.
    """

    voltage: float
    relative_permittivity: float
    dielectric_thickness: float
    overlap_area: float
    friction_coefficient: float
    pinion_pitch_diameter: float
    num_stacks: int = 1
    interfaces_per_stack: int = 2

    def __post_init__(self) -> None:
        if self.voltage < 0:
            raise ValueError(f"voltage must be >= 0, got {self.voltage}")
        for name in ("relative_permittivity", "dielectric_thickness",
                     "overlap_area", "pinion_pitch_diameter"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if self.friction_coefficient < 0:
            raise ValueError(
                f"friction_coefficient must be >= 0, got {self.friction_coefficient}")
        for name in ("num_stacks", "interfaces_per_stack"):
            value = getattr(self, name)
            if not (isinstance(value, int) and value >= 1):
                raise ValueError(f"{name} must be a positive integer, got {value!r}")


def attractive_force(spec: BrakeSpec) -> float:
    """Normal attraction between one electrode pair, in newtons.

    Parallel-plate model: eps * A * V^2 / (2 * d^2), with eps the absolute
    permittivity of the dielectric.
    """
    eps = spec.relative_permittivity * VACUUM_PERMITTIVITY
    return eps * spec.overlap_area * spec.voltage**2 / (2.0 * spec.dielectric_thickness**2)


def max_brake_force(spec: BrakeSpec) -> float:
    """Total tangential holding force of the whole stack, in newtons.

    Friction at each interface carries mu times the attraction; interfaces
    and stacks add linearly.
    """
    return (spec.friction_coefficient * attractive_force(spec)
            * spec.interfaces_per_stack * spec.num_stacks)


def max_brake_torque(spec: BrakeSpec) -> float:
    """Holding torque at the joint, in newton-meters.

    The rack-pinion transmission converts holding force to torque with a
    lever arm of half the pinion pitch diameter.
    """
    return 0.5 * spec.pinion_pitch_diameter * max_brake_force(spec)


def specific_tension(spec: BrakeSpec, cross_section_area: float) -> float:
    """Holding force per unit cross-sectional area, in pascals.

    The cross-section convention (which width and thickness bound the brake)
    is the caller's choice and must be documented with the reported number.
    """
    if not cross_section_area > 0:
        raise ValueError(f"cross_section_area must be > 0, got {cross_section_area}")
    return max_brake_force(spec) / cross_section_area


def power_draw(spec: BrakeSpec) -> float:
    """Electrical power consumed while engaged, in watts.

    Reporting metric only, never a dynamics input: a fixed measured draw per
    engaged stack, zero when no voltage is applied.
    """
    if spec.voltage > 0:
        return PER_STACK_POWER_W * spec.num_stacks
    return 0.0
