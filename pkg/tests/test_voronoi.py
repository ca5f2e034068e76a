import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iiot_thresholds.network import Area, Deployment, generate_deployment
from iiot_thresholds.voronoi import polygon_area, voronoi_partition

AREA = Area(50.0, 50.0)


def _inside(poly, p, tol=1e-9):
    nxt = np.roll(poly, -1, axis=0)
    cross = (nxt[:, 0] - poly[:, 0]) * (p[1] - poly[:, 1]) - (nxt[:, 1] - poly[:, 1]) * (p[0] - poly[:, 0])
    return np.all(cross >= -tol)


def test_single_device_cell_is_rectangle():
    dep = Deployment(AREA, [(10.0, 30.0)])
    (cell,) = voronoi_partition(dep)
    assert cell.area == pytest.approx(2500.0)
    assert cell.omega_min == pytest.approx(10.0)
    assert cell.omega_max == pytest.approx(np.hypot(40.0, 30.0))


def test_two_devices_split_at_midline():
    dep = Deployment(AREA, [(12.5, 25.0), (37.5, 25.0)])
    cells = voronoi_partition(dep)
    for c in cells:
        assert c.area == pytest.approx(1250.0)
        assert c.omega_min == pytest.approx(min(12.5, 25.0))
        assert np.allclose(np.sort(np.unique(np.round(c.polygon[:, 0], 9))), [0, 25] if c.device == 0 else [25, 50])


def test_random_deployment_area_conserved():
    cells = voronoi_partition(generate_deployment(AREA, 25, seed=9))
    assert sum(c.area for c in cells) == pytest.approx(2500.0, abs=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(0, 10_000))
def test_cells_tile_contain_sites_and_order_omegas(n, seed):
    dep = generate_deployment(Area(30.0, 20.0), n, seed)
    cells = voronoi_partition(dep)
    assert sum(c.area for c in cells) == pytest.approx(600.0, rel=1e-6)
    for c in cells:
        assert c.area > 0
        assert _inside(c.polygon, np.array(c.site))
        assert c.omega_min <= c.omega_mean + 1e-9 <= c.omega_max + 2e-9


def test_duplicates_are_perturbed():
    dep = Deployment(AREA, [(10.0, 10.0), (10.0, 10.0), (40.0, 40.0)])
    cells = voronoi_partition(dep)
    assert sum(c.area for c in cells) == pytest.approx(2500.0, rel=1e-6)


def test_all_coincident_is_an_error():
    with pytest.raises(ValueError):
        voronoi_partition(Deployment(AREA, [(5.0, 5.0)] * 3))


def test_polygon_area_unit_square():
    assert polygon_area(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)) == 1.0
