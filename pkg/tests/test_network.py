import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iiot_thresholds.network import (
    Area,
    CalibratedCdf,
    Deployment,
    DeviceGeometry,
    SensingModel,
    activation_probability,
    approx_cdf_z,
    arcsin_cdf_z,
    calibrate_w,
    disk_coverage_fraction,
    exact_cdf_z,
    generate_deployment,
    load_deployment,
    save_deployment,
    sensing_power,
    threshold_floor,
)
from oracles import disk_fraction_grid

AREA = Area(50.0, 50.0)
W_CENTRE = 2 * 50 * 50 / math.pi  # 1591.549...


# -- types


def test_area_rejects_non_positive_sides():
    with pytest.raises(ValueError):
        Area(0.0, 1.0)
    with pytest.raises(ValueError):
        Area(1.0, -2.0)


def test_area_measure():
    assert Area(4.0, 2.5).measure == 10.0


def test_model_validation():
    with pytest.raises(ValueError):
        SensingModel(eta=0.0)
    with pytest.raises(ValueError):
        SensingModel(alpha=0.0)
    with pytest.raises(ValueError):
        SensingModel(alpha=1.5)
    SensingModel(alpha=1.0)


def test_deployment_rejects_outside_devices_and_empty():
    with pytest.raises(ValueError):
        Deployment(AREA, [(51.0, 1.0)])
    with pytest.raises(ValueError):
        Deployment(AREA, np.zeros((0, 2)))


def test_deployment_is_immutable():
    dep = Deployment(AREA, [(1.0, 2.0)])
    with pytest.raises(AttributeError):
        dep.area = Area(1, 1)
    with pytest.raises(ValueError):
        dep.positions[0, 0] = 3.0


def test_device_ids_dense():
    dep = generate_deployment(AREA, 5, seed=1)
    assert [d.id for d in dep.devices] == list(range(5))


def test_device_geometry_bounds():
    g = DeviceGeometry.at(AREA, 10.0, 40.0)
    assert g.u == 40.0**2 and g.v == 40.0**2 and g.R == 10.0
    assert g.u >= 25.0**2 and g.v >= 25.0**2


def test_calibrated_cdf_requires_positive_w():
    with pytest.raises(ValueError):
        CalibratedCdf(w=0.0, z_max=200.0)


# -- sensing power


@pytest.mark.parametrize(
    "eta,d,expected",
    [(1.0, 0.0, 1.0), (1.0, math.log(2), 0.5), (0.1, 5.0, math.exp(-0.5))],
)
def test_sensing_power_values(eta, d, expected):
    assert sensing_power(SensingModel(eta=eta), d) == pytest.approx(expected, rel=1e-12)


def test_sensing_power_negative_distance():
    with pytest.raises(ValueError):
        sensing_power(SensingModel(), -1.0)


@given(st.floats(0, 500), st.floats(0.001, 10))
def test_sensing_power_in_unit_interval_and_decreasing(d, step):
    m = SensingModel(eta=0.3)
    p0, p1 = sensing_power(m, d), sensing_power(m, d + step)
    assert 0 < p0 <= 1
    assert p1 < p0 or p0 == 0


# -- exact CDF


def test_exact_cdf_zero_at_origin():
    assert exact_cdf_z(DeviceGeometry.at(AREA, 25, 25), AREA, 0.0) == 0.0


def test_exact_cdf_centre_matches_disk_oracle():
    oracle = disk_fraction_grid(50, 50, 25, 25, 10.0)  # 0.125663
    value = exact_cdf_z(DeviceGeometry.at(AREA, 25, 25), AREA, 100.0)
    assert value == pytest.approx(0.12566, abs=5e-5)
    assert value == pytest.approx(oracle, abs=1e-4)


def test_exact_cdf_corner_matches_quarter_disk_oracle():
    oracle = disk_fraction_grid(50, 50, 0, 0, 10.0)  # 0.0314158
    value = exact_cdf_z(DeviceGeometry.at(AREA, 0, 0), AREA, 100.0)
    assert value == pytest.approx(0.031416, abs=5e-6)
    assert value == pytest.approx(oracle, abs=1e-4)


@pytest.mark.parametrize("x,y,r", [(3.0, 17.0, 12.0), (49.0, 1.0, 30.0), (10.0, 40.0, 60.0), (25, 25, 40)])
def test_disk_fraction_against_grid(x, y, r):
    assert disk_coverage_fraction(AREA, x, y, r) == pytest.approx(disk_fraction_grid(50, 50, x, y, r), abs=2e-4)


def test_exact_cdf_negative_z():
    with pytest.raises(ValueError):
        exact_cdf_z(DeviceGeometry.at(AREA, 1, 1), AREA, -1.0)


@given(st.floats(0, 50), st.floats(0, 50), st.floats(0, 6000), st.floats(0, 500))
def test_exact_cdf_monotone_and_bounded(x, y, z, dz):
    g = DeviceGeometry.at(AREA, x, y)
    a, b = exact_cdf_z(g, AREA, z), exact_cdf_z(g, AREA, z + dz)
    assert 0.0 <= a <= b + 1e-12 <= 1.0 + 1e-12


def test_exact_cdf_reaches_one_beyond_far_corner():
    g = DeviceGeometry.at(AREA, 10, 20)
    assert exact_cdf_z(g, AREA, 40.0**2 + 30.0**2 + 1.0) == pytest.approx(1.0)


def test_arcsin_reference_is_clamped():
    g = DeviceGeometry.at(AREA, 0, 0)
    vals = arcsin_cdf_z(g, AREA, np.linspace(0, 20000, 50))
    assert np.all((vals >= 0) & (vals <= 1))


# -- approximate CDF


def test_approx_cdf_zero():
    assert approx_cdf_z(CalibratedCdf(w=123.0, z_max=200.0), 0.0) == 0.0


def test_approx_cdf_reference_value():
    # 1 - exp(-200 / 1591.55); the disk oracle gives 0.12566 at this z
    v = approx_cdf_z(CalibratedCdf(w=1591.55, z_max=200.0), 100.0)
    assert v == pytest.approx(-math.expm1(-200 / 1591.55), rel=1e-12)
    assert v == pytest.approx(0.118089, abs=5e-6)
    assert abs(v - 0.12566) / 0.12566 < 0.08


@given(st.floats(1, 1e4), st.floats(0, 1e4), st.floats(0, 1e3))
def test_approx_cdf_monotone(w, z, dz):
    cal = CalibratedCdf(w=w, z_max=200.0)
    assert approx_cdf_z(cal, z) <= approx_cdf_z(cal, z + dz)


# -- calibration


def test_calibration_needs_enough_samples():
    with pytest.raises(ValueError):
        calibrate_w(Deployment(AREA, [(1, 1)]), SensingModel(), samples=9999)


def test_calibration_interior_and_corner_slopes():
    """Small-z slope: interior pi z/(LH) <-> w = 2LH/pi; corner quarter disk <-> 8LH/pi.

    The fit spans z up to 200, where edge effects already bend the CDF, so
    the fitted w is compared with a 15 % band.
    """
    dep = Deployment(AREA, [(25.0, 25.0), (0.0, 0.0)])
    cals = calibrate_w(dep, SensingModel(), samples=200_000, seed=3)
    assert cals[0].w == pytest.approx(2 * 2500 / math.pi, rel=0.15)
    assert cals[1].w == pytest.approx(8 * 2500 / math.pi, rel=0.15)


def test_calibration_stores_fit_error_and_meets_it():
    dep = Deployment(AREA, [(25.0, 25.0), (0.0, 0.0), (50.0, 20.0), (7.0, 3.0)])
    model = SensingModel()
    cals = calibrate_w(dep, model, samples=200_000, seed=5)
    z = np.linspace(1, model.z_max, 100)
    for j, cal in enumerate(cals):
        exact = exact_cdf_z(dep.geometry(j), AREA, z)
        assert np.max(np.abs(approx_cdf_z(cal, z) - exact)) <= cal.fit_error + 0.01
        assert cal.fit_error < 0.02


def test_calibration_deterministic():
    dep = generate_deployment(AREA, 6, seed=2)
    a = calibrate_w(dep, SensingModel(), samples=20_000, seed=11)
    b = calibrate_w(dep, SensingModel(), samples=20_000, seed=11)
    assert [c.w for c in a] == [c.w for c in b]


# -- activation probability


def test_activation_at_one_is_zero():
    assert activation_probability(CalibratedCdf(1591.55, 200.0), SensingModel(), 1.0) == 0.0


def test_activation_reference_value():
    v = activation_probability(CalibratedCdf(1591.55, 200.0), SensingModel(alpha=0.1, eta=1.0), 0.1)
    assert v == pytest.approx(6.6404e-4, rel=1e-4)


def test_activation_tends_to_alpha():
    v = activation_probability(CalibratedCdf(1591.55, 200.0), SensingModel(), 1e-300)
    assert v == pytest.approx(0.1, rel=1e-9)


def test_activation_domain():
    cal = CalibratedCdf(1591.55, 200.0)
    for bad in (0.0, -0.1, 1.0001):
        with pytest.raises(ValueError):
            activation_probability(cal, SensingModel(), bad)


def test_activation_monotone_on_grid():
    cal = CalibratedCdf(900.0, 200.0)
    vals = activation_probability(cal, SensingModel(), np.linspace(1e-6, 1, 100))
    assert np.all(np.diff(vals) <= 0)


def test_threshold_floor_is_full_coverage():
    floor = threshold_floor(AREA, SensingModel(eta=0.5))
    assert -math.log(floor) / 0.5 == pytest.approx(AREA.diagonal)


# -- deployments


def test_generate_deployment_reproducible():
    assert generate_deployment(AREA, 25, seed=7) == generate_deployment(AREA, 25, seed=7)
    assert not generate_deployment(AREA, 25, seed=7) == generate_deployment(AREA, 25, seed=8)


def test_generate_deployment_mean_position():
    dep = generate_deployment(AREA, 100_000, seed=3)
    assert np.allclose(dep.positions.mean(axis=0), [25, 25], rtol=0.01)


def test_generate_single_in_unit_square():
    dep = generate_deployment(Area(1, 1), 1, seed=0)
    assert dep.n == 1 and np.all((dep.positions >= 0) & (dep.positions <= 1))


def test_generate_requires_devices():
    with pytest.raises(ValueError):
        generate_deployment(AREA, 0, seed=0)


def test_deployment_json_round_trip(tmp_path):
    dep = generate_deployment(Area(50, 30), 9, seed=4)
    path = tmp_path / "dep.json"
    save_deployment(dep, path)
    data = json.loads(path.read_text())
    assert set(data) == {"L", "H", "devices"} and set(data["devices"][0]) == {"x", "y"}
    assert load_deployment(path) == dep
