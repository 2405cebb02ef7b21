import dataclasses

import pytest
from hypothesis import given, strategies as st

from brakesim.brake import (BrakeSpec, attractive_force, max_brake_force,
                            max_brake_torque, power_draw, specific_tension)

# Hand evaluation of the parallel-plate chain with the standard constants
# (1000 V, eps_r 3.35, d 12.7 um, A 0.8 cm^2, mu 0.71, 12 mm pinion):
#   F_a = 3.35 * 8.854e-12 * 0.8e-4 * 1000^2 / (2 * (12.7e-6)^2) = 7.3559 N
#   F_hold(1 stack, 2 interfaces) = 0.71 * F_a * 2 = 10.445 N
#   T_hold(1 stack) = 0.5 * 0.012 * F_hold = 62.672 mN*m
EXPECTED_ATTRACTIVE_N = 7.3559
EXPECTED_HOLD_1STACK_N = 10.4454
EXPECTED_TORQUE_1STACK_NM = 0.0626724
EXPECTED_TORQUE_2STACK_NM = 0.1253448


def spec_with(**kwargs) -> BrakeSpec:
    base = dict(voltage=1000.0, relative_permittivity=3.35,
                dielectric_thickness=12.7e-6, overlap_area=0.8e-4,
                friction_coefficient=0.71, pinion_pitch_diameter=0.012,
                num_stacks=1)
    base.update(kwargs)
    return BrakeSpec(**base)


class TestAttractiveForce:
    def test_standard_constants(self, brake_1stack):
        assert attractive_force(brake_1stack) == pytest.approx(
            EXPECTED_ATTRACTIVE_N, rel=0.005)

    def test_zero_voltage(self):
        assert attractive_force(spec_with(voltage=0.0)) == 0.0

    def test_doubling_voltage_quadruples_force(self, brake_1stack):
        doubled = dataclasses.replace(brake_1stack, voltage=2000.0)
        assert attractive_force(doubled) == pytest.approx(
            4.0 * attractive_force(brake_1stack), rel=1e-12)
        assert attractive_force(doubled) == pytest.approx(4 * 7.356, rel=0.005)


class TestHoldingForce:
    def test_one_stack_two_interfaces(self, brake_1stack):
        assert max_brake_force(brake_1stack) == pytest.approx(
            EXPECTED_HOLD_1STACK_N, rel=0.005)

    def test_four_stacks_exactly_linear(self, brake_1stack):
        four = dataclasses.replace(brake_1stack, num_stacks=4)
        assert max_brake_force(four) == pytest.approx(
            4.0 * max_brake_force(brake_1stack), rel=1e-12)
        assert max_brake_force(four) == pytest.approx(41.78, rel=0.005)

    def test_frictionless(self):
        assert max_brake_force(spec_with(friction_coefficient=0.0)) == 0.0


class TestHoldingTorque:
    def test_one_stack(self, brake_1stack):
        assert max_brake_torque(brake_1stack) == pytest.approx(
            EXPECTED_TORQUE_1STACK_NM, rel=0.005)

    def test_two_stacks(self, brake_2stack):
        assert max_brake_torque(brake_2stack) == pytest.approx(
            EXPECTED_TORQUE_2STACK_NM, rel=0.005)

    def test_zero_pinion_diameter_rejected(self):
        with pytest.raises(ValueError):
            spec_with(pinion_pitch_diameter=0.0)


class TestSpecificTension:
    def test_division(self, brake_1stack):
        # 10.445 N over 5.0e-5 m^2 = 2.089e5 Pa, the muscle-comparison scale.
        assert specific_tension(brake_1stack, 5.0e-5) == pytest.approx(
            2.089e5, rel=0.005)

    def test_ratio_invariant_under_proportional_scaling(self, brake_1stack):
        doubled = dataclasses.replace(brake_1stack, num_stacks=2)
        assert specific_tension(doubled, 1.0e-4) == pytest.approx(
            specific_tension(brake_1stack, 5.0e-5), rel=1e-12)

    def test_zero_voltage(self):
        assert specific_tension(spec_with(voltage=0.0), 5.0e-5) == 0.0

    def test_nonpositive_area_rejected(self, brake_1stack):
        with pytest.raises(ValueError):
            specific_tension(brake_1stack, 0.0)


class TestPowerDraw:
    def test_two_stacks(self, brake_2stack):
        assert power_draw(brake_2stack) == pytest.approx(0.02)

    def test_eight_stacks(self):
        assert power_draw(spec_with(num_stacks=8)) == pytest.approx(0.08)

    def test_disengaged(self):
        assert power_draw(spec_with(voltage=0.0, num_stacks=4)) == 0.0


class TestValidation:
    @pytest.mark.parametrize("field", ["dielectric_thickness", "overlap_area",
                                       "relative_permittivity"])
    def test_nonpositive_geometry_rejected(self, field):
        with pytest.raises(ValueError):
            spec_with(**{field: 0.0})
        with pytest.raises(ValueError):
            spec_with(**{field: -1.0})

    def test_negative_voltage_rejected(self):
        with pytest.raises(ValueError):
            spec_with(voltage=-1.0)

    @pytest.mark.parametrize("field", ["num_stacks", "interfaces_per_stack"])
    def test_nonpositive_counts_rejected(self, field):
        with pytest.raises(ValueError):
            spec_with(**{field: 0})


positive = st.floats(min_value=1e-3, max_value=1e3)


@given(voltage=st.floats(min_value=1.0, max_value=5000.0),
       scale=st.floats(min_value=1.1, max_value=10.0))
def test_monotone_in_voltage_and_exactly_quadratic(voltage, scale):
    low = spec_with(voltage=voltage)
    high = spec_with(voltage=voltage * scale)
    assert attractive_force(high) > attractive_force(low)
    doubled = spec_with(voltage=2.0 * voltage)
    assert attractive_force(doubled) == pytest.approx(
        4.0 * attractive_force(low), rel=1e-12)


@given(d=st.floats(min_value=1e-6, max_value=1e-3))
def test_inverse_quadratic_in_thickness(d):
    thin = spec_with(dielectric_thickness=d)
    thick = spec_with(dielectric_thickness=2.0 * d)
    assert attractive_force(thin) == pytest.approx(
        4.0 * attractive_force(thick), rel=1e-12)
    assert attractive_force(thin) > attractive_force(thick)


@given(area=positive, scale=st.floats(min_value=1.1, max_value=5.0))
def test_monotone_in_area_and_permittivity(area, scale):
    base = spec_with(overlap_area=area * 1e-4)
    more_area = spec_with(overlap_area=area * scale * 1e-4)
    more_eps = spec_with(overlap_area=area * 1e-4,
                         relative_permittivity=3.35 * scale)
    assert attractive_force(more_area) > attractive_force(base)
    assert attractive_force(more_eps) > attractive_force(base)


@given(n=st.integers(min_value=1, max_value=16), mu=st.floats(0.05, 2.0))
def test_linear_in_stacks_and_friction(n, mu):
    one = spec_with(friction_coefficient=mu)
    many = spec_with(friction_coefficient=mu, num_stacks=n)
    assert max_brake_force(many) == pytest.approx(n * max_brake_force(one), rel=1e-12)
    scaled_mu = spec_with(friction_coefficient=2.0 * mu)
    assert max_brake_force(scaled_mu) == pytest.approx(
        2.0 * max_brake_force(one), rel=1e-12)


@given(v=st.floats(min_value=0.0, max_value=3000.0),
       d_pinion=st.floats(min_value=1e-3, max_value=0.1),
       n=st.integers(min_value=1, max_value=8))
def test_torque_to_force_ratio_is_half_pinion_diameter(v, d_pinion, n):
    spec = spec_with(voltage=v, pinion_pitch_diameter=d_pinion, num_stacks=n)
    force = max_brake_force(spec)
    if force > 0:
        assert max_brake_torque(spec) / force == pytest.approx(
            0.5 * d_pinion, rel=1e-12)


def test_operations_are_pure(brake_2stack):
    assert attractive_force(brake_2stack) == attractive_force(brake_2stack)
    assert max_brake_torque(brake_2stack) == max_brake_torque(brake_2stack)
    assert power_draw(brake_2stack) == power_draw(brake_2stack)
