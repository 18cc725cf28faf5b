from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qamod.errors import ResolutionError, SceneError
from qamod.geometry import (
    EXCLUDED,
    ISLAND_BASE,
    OUTER_BOUNDARY,
    Disk,
    HalfplaneBox,
    Polygon,
    Rect,
    Segment,
    build_scene,
    make_scene,
    rasterize,
    scene_from_dict,
    shape_from_dict,
    topological_complexity,
)

UNIT = {"kind": "disk", "cx": 0, "cy": 0, "r": 1}


def scene_text(**kw) -> str:
    d = {"label": "t", "domain": UNIT, "islands": []}
    d.update(kw)
    return json.dumps(d)


def test_build_scene_one_island():
    s = build_scene(scene_text(islands=[{"kind": "disk", "cx": 0, "cy": 0, "r": 0.2}]))
    assert s.n_islands == 1
    assert s.label == "t"


def test_overlapping_islands_named():
    text = scene_text(
        islands=[{"kind": "disk", "cx": 0, "cy": 0, "r": 0.3}, {"kind": "disk", "cx": 0.4, "cy": 0, "r": 0.3}]
    )
    with pytest.raises(SceneError, match="islands 0 and 1"):
        build_scene(text)


def test_halfplane_three_segments():
    d = {
        "domain": {"kind": "halfplane_box", "x0": -8, "x1": 40, "y1": 8},
        "islands": [{"kind": "segment", "x0": 0, "x1": 32, "y": y, "thickness": 0} for y in (1, 2, 4)],
    }
    assert scene_from_dict(d).n_islands == 3


def test_parse_error_reports_line():
    with pytest.raises(SceneError, match="line 2"):
        build_scene('{"domain":\n  oops}')


def test_field_level_errors():
    with pytest.raises(SceneError, match=r"islands\[0\]"):
        build_scene(scene_text(islands=[{"kind": "disk", "cx": 0, "cy": 0}]))
    with pytest.raises(SceneError, match="unknown keys"):
        build_scene(scene_text(extra=1))
    with pytest.raises(SceneError, match="domain"):
        scene_from_dict({"islands": []})


def test_island_outside_domain_rejected():
    with pytest.raises(SceneError, match="not strictly inside"):
        make_scene(Disk(0, 0, 1), [Disk(0.9, 0, 0.2)])


def test_collar_must_strictly_contain():
    with pytest.raises(SceneError, match="collars"):
        make_scene(Disk(0, 0, 1), [Disk(0, 0, 0.1)], collars=[Disk(0, 0, 0.1)])


def test_shape_round_trip():
    for s in (Rect(0, 0, 2, 1), Disk(0.1, 0.2, 0.3), Segment(0, 3, 1, 0.5), Polygon(((0, 0), (1, 0), (0, 1)))):
        assert shape_from_dict(s.to_dict()) == s


def test_unit_square_res4():
    g = rasterize(make_scene(Rect(0, 0, 1, 1), []), 4)
    assert g.shape == (5, 5)
    assert (g.labels == OUTER_BOUNDARY).sum() == 16
    assert (g.labels == EXCLUDED).sum() == 0


def test_rasterize_deterministic():
    s = make_scene(Disk(0, 0, 1), [Disk(0.3, 0.1, 0.2), Rect(-0.6, -0.3, -0.2, 0.1)])
    a, b = rasterize(s, 64), rasterize(s, 64)
    assert np.array_equal(a.labels, b.labels)
    assert a.counts() == b.counts()


def test_tiny_island_too_coarse():
    s = make_scene(Disk(0, 0, 1), [Disk(0.0, 0.0, 0.01)])
    with pytest.raises(ResolutionError, match="4 nodes"):
        rasterize(s, 64)


def test_below_min_resolution():
    s = make_scene(Disk(0, 0, 1), [Disk(0, 0, 0.2)], min_resolution=32)
    with pytest.raises(ResolutionError):
        rasterize(s, 16)


def test_island_nodes_never_touch_outer():
    s = make_scene(Disk(0, 0, 1), [Disk(0.6, 0, 0.3)])
    g = rasterize(s, 32)
    lab = g.labels
    isl = lab >= ISLAND_BASE
    outer = lab == OUTER_BOUNDARY
    assert not (isl[:, 1:] & outer[:, :-1]).any() and not (isl[:, :-1] & outer[:, 1:]).any()
    assert not (isl[1:, :] & outer[:-1, :]).any() and not (isl[:-1, :] & outer[1:, :]).any()


def test_halfplane_only_bottom_is_boundary():
    s = make_scene(HalfplaneBox(-2, 6, 3), [Segment(0, 4, 1, 0)])
    g = rasterize(s, 4)
    outer = g.labels == OUTER_BOUNDARY
    assert outer[0, :].all()
    assert not outer[1:, :].any()


def test_refinement_keeps_island_structure():
    s = make_scene(Disk(0, 0, 1), [Disk(-0.4, 0, 0.15), Disk(0.4, 0, 0.15), Rect(-0.1, 0.4, 0.1, 0.6)])
    for res in (16, 32, 64):
        g = rasterize(s, res)
        present = sorted(int(v) - ISLAND_BASE for v in np.unique(g.labels) if v >= ISLAND_BASE)
        assert present == [0, 1, 2]


def test_logpolar_grid_wraps():
    s = make_scene(Disk(0, 0, 1), [Disk(0, 0, 0.2)])
    g = rasterize(s, 16, "auto")
    assert g.coords == "logpolar" and g.periodic
    assert (g.labels[0] == OUTER_BOUNDARY).all()
    assert (g.labels[-1] == ISLAND_BASE).all()


@pytest.mark.parametrize(
    "islands, holes, expected",
    [
        ([Disk(0, 0, 0.2)], [], 0),
        ([Disk(-0.5, 0, 0.1), Disk(0.5, 0, 0.1), Disk(0, 0.5, 0.1)], [], 2),
        ([Disk(-0.6, 0, 0.1), Disk(0.6, 0, 0.1)], [Disk(0, 0, 0.2)], 2),
    ],
)
def test_topological_complexity(islands, holes, expected):
    assert topological_complexity(make_scene(Disk(0, 0, 1), islands, holes=holes)) == expected


@settings(max_examples=40, deadline=None)
@given(
    cx=st.floats(-0.4, 0.4),
    cy=st.floats(-0.4, 0.4),
    r=st.floats(0.1, 0.3),
)
def test_island_classification_matches_shape(cx, cy, r):
    s = make_scene(Disk(0, 0, 1), [Disk(cx, cy, r)])
    g = rasterize(s, 24)
    x, y = g.node_xy()
    inside = (x - cx) ** 2 + (y - cy) ** 2 <= r * r * (1 + 1e-9)
    assert np.array_equal(g.labels == ISLAND_BASE, inside & (g.labels != EXCLUDED))
