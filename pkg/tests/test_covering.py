from __future__ import annotations

import math

import numpy as np
import pytest

from qamod.covering import (
    CoveringMap,
    covering_from_dict,
    covering_lemma_experiment,
    preimage_components,
    verify_exact_transform,
    verify_lower_bound,
    verify_transform_bounds,
)
from qamod.errors import CoveringError
from qamod.geometry import Disk, Rect

R2 = math.exp(-2 * math.pi)  # mod(V minus disk(0, R2)) = 1
R4 = math.exp(-4 * math.pi)  # mod = 2
OFF = Disk(0.5, 0.0, 0.1)


@pytest.fixture(scope="module")
def z3_bounds():
    return verify_transform_bounds(CoveringMap.power(3), OFF, 128)


def test_power_map_evaluation_and_preimages():
    f = CoveringMap.power(3)
    w = 0.3 + 0.2j
    pre = f.preimages(w)
    assert pre.shape == (3,)
    assert np.allclose(f(pre), w)
    assert np.allclose(f.critical_values(), [0])


def test_blaschke_preimages_and_critical_points():
    zeros = [0.3, -0.4j, 0.5 + 0.2j]
    f = CoveringMap.blaschke(zeros)
    assert f.D == 3
    assert np.allclose(f(np.array(zeros)), 0)
    w = 0.1 - 0.3j
    pre = f.preimages(w)
    assert np.allclose(f(pre), w)
    assert np.all(np.abs(pre) < 1)
    # derivative vanishes at the reported critical points (numerical check)
    cp = f.critical_points()
    assert len(cp) == 2
    h = 1e-6
    for c in cp:
        assert abs((f(c + h) - f(c - h)) / (2 * h)) < 1e-5
    # a Blaschke product maps the unit circle to itself
    t = np.exp(1j * np.linspace(0, 2 * np.pi, 50))
    assert np.allclose(np.abs(f(t)), 1)


def test_invalid_maps():
    with pytest.raises(CoveringError):
        CoveringMap.power(0)
    with pytest.raises(CoveringError):
        CoveringMap.blaschke([1.2])
    with pytest.raises(CoveringError):
        CoveringMap.blaschke([])


def test_radial_preimage_single_component():
    comps = preimage_components(CoveringMap.power(2), Disk(0, 0, R2))
    assert len(comps) == 1 and comps[0].degree == 2
    pts = np.array(comps[0].shape.points)
    assert np.allclose(np.hypot(pts[:, 0], pts[:, 1]), math.exp(-math.pi), rtol=1e-9)
    # chord midpoints sit at radius e^-pi cos(pi/1440); their images miss by the sag
    assert comps[0].hausdorff == pytest.approx(R2 * math.sin(math.pi / 1440) ** 2, rel=1e-3)


def test_off_center_three_components():
    comps = preimage_components(CoveringMap.power(3), OFF)
    assert [c.degree for c in comps] == [1, 1, 1]
    f = CoveringMap.power(3)
    for c in comps:
        cen = c.shape.to_shapely().centroid
        assert abs(f(complex(cen.x, cen.y)) - 0.5) < 0.01
    # the three pieces are rotations of each other
    areas = [c.shape.to_shapely().area for c in comps]
    assert max(areas) == pytest.approx(min(areas), rel=1e-9)


def test_blaschke_components_sum_to_degree():
    f = CoveringMap.blaschke([0.3, -0.4j, 0.5 + 0.2j])
    comps = preimage_components(f, Disk(0.6, 0.1, 0.1))
    assert sum(c.degree for c in comps) == 3
    assert all(c.hausdorff < 1e-4 for c in comps)


def test_polygon_target():
    comps = preimage_components(CoveringMap.power(2), Rect(0.3, -0.1, 0.5, 0.1), samples=400)
    assert [c.degree for c in comps] == [1, 1]


def test_critical_value_margin_guard():
    with pytest.raises(CoveringError, match="critical value"):
        preimage_components(CoveringMap.power(2), Disk(0.1, 0, 0.1))


def test_target_must_be_inside_unit_disk():
    with pytest.raises(CoveringError, match="unit disk"):
        preimage_components(CoveringMap.power(2), Disk(0.5, 0, 0.6))


@pytest.mark.parametrize("D", [2, 3])
def test_exact_transform_radial(D):
    rep = verify_exact_transform(CoveringMap.power(D), Disk(0, 0, R2), 64)
    assert rep.mod_V_B == pytest.approx(1.0, rel=1e-9)
    assert rep.mod_U_A == pytest.approx(1.0 / D, rel=0.03)
    assert rep.verdict and not rep.branched


def test_exact_transform_branched_guard():
    with pytest.raises(CoveringError, match="branched"):
        verify_exact_transform(CoveringMap.power(2), OFF, 64)


def test_transform_bounds_radial_analytic():
    rep = verify_transform_bounds(CoveringMap.power(2), Disk(0, 0, R2), 64)
    assert rep.mod_V_B == pytest.approx(1.0, rel=0.03)
    assert rep.mod_U_A == pytest.approx(0.5, rel=0.03)
    assert rep.lower_ok and rep.upper_ok


def test_transform_bounds_off_center(z3_bounds):
    rep = z3_bounds
    assert rep.verdict
    assert rep.mod_U_A <= rep.mod_V_B <= 3 * rep.mod_U_A
    # V side is a disk with an off-center hole: modulus matches the round annulus
    # with the same conformal modulus (Moebius image of disk(0.5, 0.1)).
    a = 0.5
    s = 0.1
    # map disk(a, s) to a centered disk by the automorphism z -> (z - c)/(1 - c z)
    c = (1 + a * a - s * s - math.sqrt((1 + a * a - s * s) ** 2 - 4 * a * a)) / (2 * a)
    rho = abs((a + s - c) / (1 - c * (a + s)))
    assert rep.mod_V_B == pytest.approx(math.log(1 / rho) / (2 * math.pi), rel=0.03)


def test_identity_map_equality():
    rep = verify_transform_bounds(CoveringMap.power(1), OFF, 64)
    assert rep.mod_U_A == pytest.approx(rep.mod_V_B, rel=1e-9)


def test_lower_bound_single_component():
    rep = verify_lower_bound(CoveringMap.power(3), OFF, [0], 128)
    assert rep.d == 1
    assert rep.verdict
    assert rep.margin > 1.0  # strict in this configuration


def test_lower_bound_full_radial_is_equality():
    rep = verify_lower_bound(CoveringMap.power(2), Disk(0, 0, R2), "all", 64)
    assert rep.d == 2
    assert rep.margin == pytest.approx(1.0, rel=0.03)


def test_exact_passes_implies_bounds_pass():
    f, B = CoveringMap.power(3), Disk(0, 0, R2)
    assert verify_exact_transform(f, B, 64).verdict
    assert verify_transform_bounds(f, B, 64).verdict


def test_covering_lemma_radial():
    rep = covering_lemma_experiment(CoveringMap.power(2), Disk(0, 0, R4), Disk(0, 0, R2), 0, 64, polar_resolution=32)
    assert (rep.D, rep.d) == (2, 2)
    assert rep.mod_V_B == pytest.approx(2.0, rel=0.03)
    assert rep.mod_U_Lambda == pytest.approx(1.0, rel=0.03)
    assert rep.mod_collar == pytest.approx(1.0, rel=0.03)
    assert rep.eta == pytest.approx(1.0, rel=0.03)
    assert rep.bound == pytest.approx(8.0, rel=0.03)
    assert rep.verdict and rep.in_regime


def test_covering_lemma_off_center():
    rep = covering_lemma_experiment(CoveringMap.power(3), OFF, Disk(0.5, 0, 0.3), 0, 64)
    assert rep.d == 1
    assert 0 < rep.eta <= 1
    assert rep.verdict


def test_covering_lemma_degenerate_nest():
    with pytest.raises(CoveringError, match="nest"):
        covering_lemma_experiment(CoveringMap.power(2), OFF, OFF, 0, 64)


def test_spec_parsing():
    spec = covering_from_dict(
        {
            "map": {"kind": "blaschke", "zeros": [[0.1, 0.2], [0, -0.3]]},
            "B": {"kind": "disk", "cx": 0.5, "cy": 0, "r": 0.1},
            "components": [0, 1],
        }
    )
    assert spec.fmap.D == 2 and spec.components == (0, 1) and spec.Bprime is None
    with pytest.raises(CoveringError, match="map.kind"):
        covering_from_dict({"map": {"kind": "exp"}, "B": {"kind": "disk", "cx": 0, "cy": 0, "r": 0.1}})
    with pytest.raises(CoveringError, match="B"):
        covering_from_dict({"map": {"kind": "power", "D": 2}})
    with pytest.raises(CoveringError, match="components"):
        covering_from_dict({"map": {"kind": "power", "D": 2}, "B": {"kind": "disk", "cx": 0, "cy": 0, "r": 0.1}, "components": "some"})
