"""Scene description, validation and rasterization onto node grids.

A scene is a planar domain ``S`` carrying a list of islands (closed,
simply-connected shapes), optional collars around the islands and optional
holes in the domain.  ``rasterize`` turns it into a :class:`GridDomain` whose
nodes are classified as interior, outer boundary, island ``k`` or excluded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import shapely
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from shapely.geometry import Point
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.geometry import box as shapely_box

from .errors import ResolutionError, SceneError

# Node labels.  Island k (0-based) is stored as ISLAND_BASE + k.
EXCLUDED = -2
OUTER_BOUNDARY = -1
INTERIOR = 0
ISLAND_BASE = 1

MIN_ISLAND_GAP_CELLS = 2.0
MIN_ISLAND_NODES = 4

# Membership slack in cell units; absorbs rounding when a node sits exactly on
# a shape boundary so that uniformly scaled scenes classify identically.
_CELL_EPS = 1e-9
_DISK_QUAD_SEGS = 64


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------


class Shape:
    """Closed planar shape.  Subclasses are frozen dataclasses."""

    kind: str = ""

    def contains(self, x, y, eps: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def scaled(self, factor: float) -> Shape:
        raise NotImplementedError

    def to_shapely(self):
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def bounds(self) -> tuple[float, float, float, float]:
        return tuple(self.to_shapely().bounds)

    def interior_point(self) -> tuple[float, float]:
        p = self.to_shapely().representative_point()
        return (p.x, p.y)

    def boundary_points(self, n: int) -> np.ndarray:
        """``n`` points of the boundary, counter-clockwise, as complex numbers."""
        ring = shapely.geometry.polygon.orient(self.to_shapely(), 1.0).exterior
        t = np.arange(n) / n * ring.length
        pts = shapely.line_interpolate_point(ring, t)
        xy = shapely.get_coordinates(pts)
        return xy[:, 0] + 1j * xy[:, 1]


@dataclass(frozen=True)
class Rect(Shape):
    x0: float
    y0: float
    x1: float
    y1: float
    kind = "rect"

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise SceneError("rect needs x1 > x0 and y1 > y0")

    def contains(self, x, y, eps=0.0):
        return (x >= self.x0 - eps) & (x <= self.x1 + eps) & (y >= self.y0 - eps) & (y <= self.y1 + eps)

    def scaled(self, factor):
        return Rect(self.x0 * factor, self.y0 * factor, self.x1 * factor, self.y1 * factor)

    def to_shapely(self):
        return shapely_box(self.x0, self.y0, self.x1, self.y1)

    def to_dict(self):
        return {"kind": "rect", "x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1}

    def bounds(self):
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class Disk(Shape):
    cx: float
    cy: float
    r: float
    kind = "disk"

    def __post_init__(self):
        if not self.r > 0:
            raise SceneError("disk radius must be > 0")

    def contains(self, x, y, eps=0.0):
        dx = x - self.cx
        dy = y - self.cy
        return dx * dx + dy * dy <= (self.r + eps) ** 2

    def scaled(self, factor):
        return Disk(self.cx * factor, self.cy * factor, self.r * factor)

    def to_shapely(self):
        return Point(self.cx, self.cy).buffer(self.r, quad_segs=_DISK_QUAD_SEGS)

    def to_dict(self):
        return {"kind": "disk", "cx": self.cx, "cy": self.cy, "r": self.r}

    def bounds(self):
        return (self.cx - self.r, self.cy - self.r, self.cx + self.r, self.cy + self.r)

    def interior_point(self):
        return (self.cx, self.cy)

    def boundary_points(self, n):
        t = 2 * np.pi * np.arange(n) / n
        return complex(self.cx, self.cy) + self.r * np.exp(1j * t)


@dataclass(frozen=True)
class Segment(Shape):
    """Horizontal segment ``[x0, x1] x {y}`` with a rasterization thickness.

    On a grid the segment always covers at least the node row nearest to
    ``y``, so ``thickness=0`` means "one cell thick".
    """

    x0: float
    x1: float
    y: float
    thickness: float = 0.0
    kind = "segment"

    def __post_init__(self):
        if not self.x1 > self.x0:
            raise SceneError("segment needs x1 > x0")
        if self.thickness < 0:
            raise SceneError("segment thickness must be >= 0")

    def contains(self, x, y, eps=0.0):
        # Called in cell units by rasterize, where half a cell is 0.5.
        half = max(self.thickness / 2.0, 0.5)
        return (x >= self.x0 - eps) & (x <= self.x1 + eps) & (np.abs(y - self.y) <= half + eps)

    def scaled(self, factor):
        return Segment(self.x0 * factor, self.x1 * factor, self.y * factor, self.thickness * factor)

    def to_shapely(self):
        h = self.thickness / 2.0
        if h == 0:
            return shapely.geometry.LineString([(self.x0, self.y), (self.x1, self.y)])
        return shapely_box(self.x0, self.y - h, self.x1, self.y + h)

    def to_dict(self):
        return {"kind": "segment", "x0": self.x0, "x1": self.x1, "y": self.y, "thickness": self.thickness}

    def interior_point(self):
        return ((self.x0 + self.x1) / 2.0, self.y)


@dataclass(frozen=True)
class Polygon(Shape):
    points: tuple[tuple[float, float], ...]
    kind = "polygon"
    _geom: Any = field(default=None, repr=False, compare=False, hash=False)

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if len(pts) < 3:
            raise SceneError("polygon needs at least 3 points")
        geom = ShapelyPolygon(pts)
        if not geom.is_valid or geom.area <= 0:
            raise SceneError("polygon must be simple with positive area")
        object.__setattr__(self, "points", pts)
        shapely.prepare(geom)
        object.__setattr__(self, "_geom", geom)

    def contains(self, x, y, eps=0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        x, y = np.broadcast_arrays(x, y)
        x0, y0, x1, y1 = self._geom.bounds
        pre = (x >= x0 - eps) & (x <= x1 + eps) & (y >= y0 - eps) & (y <= y1 + eps)
        if pre.any():
            out[pre] = shapely.intersects_xy(self._geom, x[pre], y[pre])
        return out

    def scaled(self, factor):
        return Polygon(tuple((x * factor, y * factor) for x, y in self.points))

    def to_shapely(self):
        return self._geom

    def to_dict(self):
        return {"kind": "polygon", "points": [list(p) for p in self.points]}


@dataclass(frozen=True)
class HalfplaneBox(Shape):
    """Truncated upper half-plane ``[x0, x1] x [0, y1]``.

    Only the bottom face ``y = 0`` is true boundary; the other three faces
    are insulating.
    """

    x0: float
    x1: float
    y1: float
    kind = "halfplane_box"

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > 0):
            raise SceneError("halfplane_box needs x1 > x0 and y1 > 0")

    def contains(self, x, y, eps=0.0):
        return (x >= self.x0 - eps) & (x <= self.x1 + eps) & (y >= -eps) & (y <= self.y1 + eps)

    def scaled(self, factor):
        return HalfplaneBox(self.x0 * factor, self.x1 * factor, self.y1 * factor)

    def to_shapely(self):
        return shapely_box(self.x0, 0.0, self.x1, self.y1)

    def to_dict(self):
        return {"kind": "halfplane_box", "x0": self.x0, "x1": self.x1, "y1": self.y1}

    def bounds(self):
        return (self.x0, 0.0, self.x1, self.y1)


_SHAPE_FIELDS = {
    "rect": (Rect, ("x0", "y0", "x1", "y1")),
    "disk": (Disk, ("cx", "cy", "r")),
    "segment": (Segment, ("x0", "x1", "y", "thickness")),
    "halfplane_box": (HalfplaneBox, ("x0", "x1", "y1")),
}
_ISLAND_KINDS = ("rect", "disk", "segment", "polygon")
_DOMAIN_KINDS = ("rect", "disk", "polygon", "halfplane_box")


def shape_from_dict(d: Any, where: str = "shape", allowed: Sequence[str] | None = None) -> Shape:
    """Build a shape from its JSON form; errors name the offending field."""
    if not isinstance(d, dict):
        raise SceneError(f"{where}: expected an object, got {type(d).__name__}")
    kind = d.get("kind")
    if allowed is not None and kind not in allowed:
        raise SceneError(f"{where}.kind: {kind!r} not one of {list(allowed)}")
    if kind == "polygon":
        pts = d.get("points")
        if not isinstance(pts, list):
            raise SceneError(f"{where}.points: expected a list of [x, y] pairs")
        try:
            return Polygon(tuple((float(p[0]), float(p[1])) for p in pts))
        except (TypeError, IndexError, ValueError) as exc:
            raise SceneError(f"{where}.points: {exc}") from None
        except SceneError as exc:
            raise SceneError(f"{where}: {exc}") from None
    if kind not in _SHAPE_FIELDS:
        raise SceneError(f"{where}.kind: unknown shape kind {kind!r}")
    cls, names = _SHAPE_FIELDS[kind]
    kwargs = {}
    for name in names:
        if name not in d:
            if kind == "segment" and name == "thickness":
                continue
            raise SceneError(f"{where}.{name}: missing")
        value = d[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise SceneError(f"{where}.{name}: expected a finite number, got {value!r}")
        kwargs[name] = float(value)
    unknown = set(d) - set(names) - {"kind"}
    if unknown:
        raise SceneError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**kwargs)
    except SceneError as exc:
        raise SceneError(f"{where}: {exc}") from None


# ---------------------------------------------------------------------------
# Scenes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SceneSpec:
    domain: Shape
    islands: tuple[Shape, ...]
    label: str = ""
    collars: tuple[Shape | None, ...] = ()
    holes: tuple[Shape, ...] = ()
    min_resolution: float | None = None
    min_gap: float = field(default=math.inf, compare=False)

    @property
    def required_resolution(self) -> float:
        """Stated minimum resolution, else the one giving a 2-cell island gap."""
        if self.min_resolution is not None:
            return self.min_resolution
        if math.isinf(self.min_gap):
            return 0.0
        return MIN_ISLAND_GAP_CELLS / self.min_gap

    @property
    def n_islands(self) -> int:
        return len(self.islands)

    @property
    def has_collars(self) -> bool:
        return bool(self.collars) and all(c is not None for c in self.collars)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "label": self.label,
            "domain": self.domain.to_dict(),
            "islands": [s.to_dict() for s in self.islands],
        }
        if self.holes:
            d["holes"] = [s.to_dict() for s in self.holes]
        if self.collars:
            d["collars"] = [None if c is None else c.to_dict() for c in self.collars]
        if self.min_resolution is not None:
            d["min_resolution"] = self.min_resolution
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def make_scene(
    domain: Shape,
    islands: Sequence[Shape],
    label: str = "",
    collars: Sequence[Shape | None] = (),
    holes: Sequence[Shape] = (),
    min_resolution: float | None = None,
) -> SceneSpec:
    """Construct and validate a scene from shape objects."""
    scene = SceneSpec(
        domain=domain,
        islands=tuple(islands),
        label=label,
        collars=tuple(collars),
        holes=tuple(holes),
        min_resolution=None if min_resolution is None else float(min_resolution),
    )
    gap = validate_scene(scene)
    object.__setattr__(scene, "min_gap", gap)
    return scene


def validate_scene(scene: SceneSpec) -> float:
    """Check the geometric invariants of a scene and return the smallest island gap."""
    if scene.domain.kind not in _DOMAIN_KINDS:
        raise SceneError(f"domain.kind: {scene.domain.kind!r} cannot be a domain")
    if scene.min_resolution is not None and not scene.min_resolution > 0:
        raise SceneError("min_resolution: must be > 0")
    if scene.collars and len(scene.collars) != len(scene.islands):
        raise SceneError(
            f"collars: expected {len(scene.islands)} entries (one per island), got {len(scene.collars)}"
        )
    gap = 0.0 if scene.min_resolution is None else MIN_ISLAND_GAP_CELLS / scene.min_resolution
    min_gap = math.inf
    dom = scene.domain.to_shapely()
    if isinstance(scene.domain, HalfplaneBox):
        true_boundary = shapely.geometry.LineString([(scene.domain.x0, 0.0), (scene.domain.x1, 0.0)])
    else:
        true_boundary = dom.exterior
    holes = [h.to_shapely() for h in scene.holes]
    for i, h in enumerate(holes):
        if not dom.contains(h) or h.distance(dom.exterior) <= 0:
            raise SceneError(f"holes[{i}]: must lie strictly inside the domain")
    geoms = [s.to_shapely() for s in scene.islands]
    for k, g in enumerate(geoms):
        if scene.islands[k].kind not in _ISLAND_KINDS:
            raise SceneError(f"islands[{k}].kind: {scene.islands[k].kind!r} cannot be an island")
        if not dom.contains(g) or g.distance(true_boundary) <= 0:
            raise SceneError(f"islands[{k}]: not strictly inside the domain")
        if isinstance(scene.domain, HalfplaneBox) and g.distance(dom.exterior) <= 0:
            raise SceneError(f"islands[{k}]: touches the truncation box")
        for i, h in enumerate(holes):
            if g.distance(h) <= 0:
                raise SceneError(f"islands[{k}]: intersects holes[{i}]")
    for k in range(len(geoms)):
        for m in range(k + 1, len(geoms)):
            d = geoms[k].distance(geoms[m])
            min_gap = min(min_gap, d)
            if d <= 0 or d < gap:
                what = "overlap" if d == 0 else "are too close"
                raise SceneError(
                    f"islands {k} and {m} {what}: gap {d:.6g} < {gap:.6g} "
                    f"({MIN_ISLAND_GAP_CELLS:g} cells at min_resolution {scene.min_resolution})"
                )
    for k, c in enumerate(scene.collars):
        if c is None:
            continue
        cg = c.to_shapely()
        if c.kind not in _ISLAND_KINDS or c.kind == "segment":
            raise SceneError(f"collars[{k}].kind: {c.kind!r} cannot be a collar")
        if not cg.contains(geoms[k]) or geoms[k].distance(cg.exterior) <= 0:
            raise SceneError(f"collars[{k}]: must strictly contain island {k}")
        if not dom.contains(cg):
            raise SceneError(f"collars[{k}]: must lie inside the domain")
        for m, g in enumerate(geoms):
            if m != k and cg.distance(g) <= 0:
                raise SceneError(f"collars[{k}]: meets island {m}")
    return min_gap


def scene_from_dict(d: Any) -> SceneSpec:
    if not isinstance(d, dict):
        raise SceneError("scene: expected a JSON object at top level")
    allowed = {"label", "domain", "islands", "collars", "holes", "min_resolution"}
    unknown = set(d) - allowed
    if unknown:
        raise SceneError(f"scene: unknown keys {sorted(unknown)}")
    if "domain" not in d:
        raise SceneError("domain: missing")
    if not isinstance(d.get("islands", []), list):
        raise SceneError("islands: expected a list")
    domain = shape_from_dict(d["domain"], "domain", _DOMAIN_KINDS)
    islands = [shape_from_dict(s, f"islands[{k}]", _ISLAND_KINDS) for k, s in enumerate(d.get("islands", []))]
    collars: list[Shape | None] = []
    if d.get("collars") is not None:
        if not isinstance(d["collars"], list):
            raise SceneError("collars: expected a list")
        for k, c in enumerate(d["collars"]):
            collars.append(None if c is None else shape_from_dict(c, f"collars[{k}]", _ISLAND_KINDS))
    holes = [shape_from_dict(s, f"holes[{k}]", ("rect", "disk", "polygon")) for k, s in enumerate(d.get("holes") or [])]
    label = d.get("label", "")
    if not isinstance(label, str):
        raise SceneError("label: expected a string")
    min_res = d.get("min_resolution")
    if min_res is not None and (isinstance(min_res, bool) or not isinstance(min_res, (int, float))):
        raise SceneError("min_resolution: expected a number")
    return make_scene(domain, islands, label, collars, holes, min_res)


def build_scene(text: str) -> SceneSpec:
    """Parse scene-description JSON text into a validated :class:`SceneSpec`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scene_from_dict(data)


def load_scene(path) -> SceneSpec:
    with open(path) as fh:
        return build_scene(fh.read())


def topological_complexity(scene: SceneSpec) -> int:
    """-chi(S) plus the number of island boundary components.

    Islands are simply connected, so each contributes one component; a planar
    domain with ``h`` holes has Euler characteristic ``1 - h``.
    """
    chi = 1 - len(scene.holes)
    return -chi + len(scene.islands)


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Rasterized scene.

    ``labels[row, col]`` holds EXCLUDED, OUTER_BOUNDARY, INTERIOR or
    ``ISLAND_BASE + k``.  Cartesian grids place node ``(row, col)`` at
    ``((col0 + col) / resolution, (row0 + row) / resolution)``.  Log-polar
    grids place it at ``center + exp(s_max - row * step + 1j * col * step)``
    and wrap around in the column direction.
    """

    resolution: float
    labels: np.ndarray
    scene: SceneSpec
    coords: str = "cartesian"
    origin: tuple[int, int] = (0, 0)
    center: complex = 0j
    s_max: float = 0.0
    step: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def periodic(self) -> bool:
        return self.coords == "logpolar"

    @property
    def n_islands(self) -> int:
        return self.scene.n_islands

    def island_mask(self, k: int) -> np.ndarray:
        return self.labels == ISLAND_BASE + k

    def node_xy(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = np.indices(self.labels.shape)
        if self.coords == "logpolar":
            z = self.center + np.exp(self.s_max - rows * self.step + 1j * cols * self.step)
            return z.real, z.imag
        return (self.origin[1] + cols) / self.resolution, (self.origin[0] + rows) / self.resolution

    def counts(self) -> dict[str, int]:
        lab = self.labels
        out = {
            "interior": int((lab == INTERIOR).sum()),
            "outer_boundary": int((lab == OUTER_BOUNDARY).sum()),
            "excluded": int((lab == EXCLUDED).sum()),
        }
        for k in range(self.n_islands):
            out[f"island_{k}"] = int((lab == ISLAND_BASE + k).sum())
        return out

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """All 4-neighbour pairs ``(u, v)`` of flat node indices, both non-excluded."""
        return grid_edges(self.labels, self.periodic)


def grid_edges(labels: np.ndarray, periodic: bool = False) -> tuple[np.ndarray, np.ndarray]:
    ny, nx = labels.shape
    idx = np.arange(ny * nx).reshape(ny, nx)
    live = labels != EXCLUDED
    pairs = [
        (idx[:, :-1], idx[:, 1:], live[:, :-1] & live[:, 1:]),
        (idx[:-1, :], idx[1:, :], live[:-1, :] & live[1:, :]),
    ]
    if periodic and nx > 2:
        pairs.append((idx[:, -1:], idx[:, :1], live[:, -1:] & live[:, :1]))
    us = [a[m] for a, _, m in pairs]
    vs = [b[m] for _, b, m in pairs]
    return np.concatenate(us), np.concatenate(vs)


def _neighbour_missing(inside: np.ndarray, periodic: bool) -> np.ndarray:
    """True where a node has a 4-neighbour that is outside (or off the grid)."""
    pad = np.pad(inside, 1, constant_values=False)
    if periodic:
        pad[1:-1, 0] = inside[:, -1]
        pad[1:-1, -1] = inside[:, 0]
    missing = ~pad[:-2, 1:-1] | ~pad[2:, 1:-1] | ~pad[1:-1, :-2] | ~pad[1:-1, 2:]
    return missing & inside


def _hole_rim(in_hole: np.ndarray) -> np.ndarray:
    """True where a node has a 4-neighbour inside a hole."""
    pad = np.pad(in_hole, 1, constant_values=False)
    return pad[:-2, 1:-1] | pad[2:, 1:-1] | pad[1:-1, :-2] | pad[1:-1, 2:]


def rasterize(scene: SceneSpec, resolution: float, coords: str = "cartesian") -> GridDomain:
    """Classify grid nodes of ``scene`` at ``resolution`` cells per unit.

    A node belongs to island ``k`` iff it lies in the closed island shape.
    ``coords="logpolar"`` builds a conformal log-polar grid around the centre
    of a disk domain; it requires one island covering that centre and is
    meant for concentric nests whose radii span many orders of magnitude.
    ``coords="auto"`` picks log-polar exactly when those conditions hold.
    """
    resolution = float(resolution)
    if not resolution > 0:
        raise ResolutionError("resolution must be > 0")
    if resolution < scene.required_resolution * (1 - 1e-12):
        raise ResolutionError(
            f"resolution {resolution:g} below the scene minimum {scene.required_resolution:g}"
        )
    if coords == "auto":
        coords = "logpolar" if _logpolar_core(scene) is not None else "cartesian"
    if coords == "cartesian":
        grid = _rasterize_cartesian(scene, resolution)
    elif coords == "logpolar":
        grid = _rasterize_logpolar(scene, resolution)
    else:
        raise ValueError(f"unknown coords {coords!r}")
    _check_islands(grid)
    grid.labels.setflags(write=False)
    return grid


def _rasterize_cartesian(scene: SceneSpec, resolution: float) -> GridDomain:
    dom = scene.domain.scaled(resolution)
    x0, y0, x1, y1 = dom.bounds()
    i0 = math.ceil(x0 - _CELL_EPS)
    i1 = math.floor(x1 + _CELL_EPS)
    j0 = math.ceil(y0 - _CELL_EPS)
    j1 = math.floor(y1 + _CELL_EPS)
    if isinstance(dom, HalfplaneBox):
        j0 = 0
    ys, xs = np.mgrid[j0 : j1 + 1, i0 : i1 + 1].astype(float)
    inside = dom.contains(xs, ys, _CELL_EPS)
    in_hole = np.zeros_like(inside)
    for hole in scene.holes:
        in_hole |= hole.scaled(resolution).contains(xs, ys, _CELL_EPS)
    inside &= ~in_hole
    labels = np.full(xs.shape, EXCLUDED, dtype=np.int32)
    labels[inside] = INTERIOR
    if isinstance(dom, HalfplaneBox):
        # Only y = 0 and hole rims are true boundary; box sides insulate.
        rim = _hole_rim(in_hole) & inside
        rim[0, :] |= inside[0, :]
    else:
        rim = _neighbour_missing(inside, False)
    labels[rim] = OUTER_BOUNDARY
    for k, island in enumerate(scene.islands):
        mask = island.scaled(resolution).contains(xs, ys, _CELL_EPS)
        _place_island(labels, mask, k)
    return GridDomain(resolution=resolution, labels=labels, scene=scene, origin=(j0, i0))


def _logpolar_core(scene: SceneSpec) -> tuple[int, float] | None:
    """(index, inner radius) of the island covering a disk domain's centre."""
    if not isinstance(scene.domain, Disk) or scene.holes:
        return None
    c = Point(scene.domain.cx, scene.domain.cy)
    for k, island in enumerate(scene.islands):
        if island.kind == "segment":
            continue
        if isinstance(island, Disk):
            rho = island.r - math.hypot(island.cx - c.x, island.cy - c.y)
            if rho > 0:
                return k, rho
            continue
        g = island.to_shapely()
        if g.contains(c):
            return k, g.exterior.distance(c)
    return None


def _rasterize_logpolar(scene: SceneSpec, resolution: float) -> GridDomain:
    core = _logpolar_core(scene)
    if core is None:
        raise SceneError("log-polar grids need a disk domain with an island covering its centre")
    dom = scene.domain
    n_theta = max(16, int(round(2 * math.pi * resolution)))
    step = 2 * math.pi / n_theta
    s_max = math.log(dom.r)
    s_min = math.log(core[1]) - 2 * step
    n_rows = int(math.ceil((s_max - s_min) / step)) + 1
    rows, cols = np.mgrid[0:n_rows, 0:n_theta]
    center = complex(dom.cx, dom.cy)
    z = center + np.exp(s_max - rows * step + 1j * cols * step)
    labels = np.full(z.shape, INTERIOR, dtype=np.int32)
    labels[0, :] = OUTER_BOUNDARY
    eps = 1e-12 * dom.r
    for k, island in enumerate(scene.islands):
        if island.kind == "segment":
            raise SceneError("segment islands are not supported on log-polar grids")
        mask = island.contains(z.real, z.imag, eps)
        _place_island(labels, mask, k)
    if not (labels[-1, :] == ISLAND_BASE + core[0]).all():
        raise ResolutionError("log-polar grid does not reach inside the central island")
    return GridDomain(
        resolution=resolution,
        labels=labels,
        scene=scene,
        coords="logpolar",
        center=center,
        s_max=s_max,
        step=step,
    )


def _place_island(labels: np.ndarray, mask: np.ndarray, k: int) -> None:
    hit = labels[mask]
    if (hit == EXCLUDED).any():
        raise ResolutionError(f"island {k} reaches outside the domain at this resolution")
    if (hit == OUTER_BOUNDARY).any():
        raise ResolutionError(f"island {k} touches the outer boundary at this resolution")
    if (hit >= ISLAND_BASE).any():
        other = int(hit[hit >= ISLAND_BASE][0]) - ISLAND_BASE
        raise ResolutionError(f"islands {other} and {k} share nodes at this resolution")
    labels[mask] = ISLAND_BASE + k


def _check_islands(grid: GridDomain) -> None:
    labels = grid.labels
    flat = labels.ravel()
    u, v = grid.edges()
    lu, lv = flat[u], flat[v]
    island_u = lu >= ISLAND_BASE
    island_v = lv >= ISLAND_BASE
    bad = island_u & island_v & (lu != lv)
    if bad.any():
        e = int(np.flatnonzero(bad)[0])
        a, b = sorted((int(lu[e]) - ISLAND_BASE, int(lv[e]) - ISLAND_BASE))
        raise ResolutionError(f"islands {a} and {b} are 4-adjacent at resolution {grid.resolution:g}")
    touch = (island_u & (lv == OUTER_BOUNDARY)) | (island_v & (lu == OUTER_BOUNDARY))
    if touch.any():
        e = int(np.flatnonzero(touch)[0])
        k = int(max(lu[e], lv[e])) - ISLAND_BASE
        raise ResolutionError(f"island {k} is 4-adjacent to the outer boundary at resolution {grid.resolution:g}")
    n = flat.size
    for k in range(grid.n_islands):
        nodes = np.flatnonzero(flat == ISLAND_BASE + k)
        if nodes.size < MIN_ISLAND_NODES:
            raise ResolutionError(
                f"island {k} rasterizes to {nodes.size} < {MIN_ISLAND_NODES} nodes at resolution {grid.resolution:g}"
            )
        keep = (lu == ISLAND_BASE + k) & (lv == ISLAND_BASE + k)
        adj = coo_matrix((np.ones(int(keep.sum())), (u[keep], v[keep])), shape=(n, n)).tocsr()
        sub = adj[nodes][:, nodes]
        ncomp, _ = connected_components(sub, directed=False)
        if ncomp != 1:
            raise ResolutionError(
                f"island {k} is not 4-connected at resolution {grid.resolution:g} ({ncomp} pieces)"
            )
