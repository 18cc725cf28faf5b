"""Explicit branched coverings of the unit disk and modulus transformation checks.

Two map families are supported: ``z -> z**D`` and finite Blaschke products
``prod (z - a_k) / (1 - conj(a_k) z)``.  Preimages of a target shape ``B`` are
traced by lifting a dense sample of its boundary through the map: at each
boundary sample every preimage is matched to the nearest preimage of the next
sample, and a lifted path closes after ``d`` laps around ``B``, ``d`` being the
local degree.  The resulting polygons become islands of a unit-disk scene on
which the ordinary grid machinery measures moduli.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import shapely

from .errors import CoveringError, InputError, SceneError
from .geometry import Disk, Polygon, Shape, _logpolar_core, make_scene, rasterize, shape_from_dict
from .laplace import DEFAULT_TOL, solve_potential
from .moduli import modulus

UNIT_DISK = Disk(0.0, 0.0, 1.0)
DEFAULT_SAMPLES = 720
DEFAULT_MARGIN = 1e-2
DEFAULT_POLAR_RESOLUTION = 64
CHECK_SLACK = 0.03
# Nearest preimage must be clearly nearer than the runner-up.
_MATCH_RATIO = 0.5


@dataclass(frozen=True)
class CoveringMap:
    kind: str
    D: int
    zeros: tuple[complex, ...] = ()
    _num: np.ndarray = field(default=None, repr=False, compare=False)
    _den: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "power":
            if int(self.D) != self.D or self.D < 1:
                raise CoveringError("power map degree D must be an integer >= 1")
            object.__setattr__(self, "D", int(self.D))
            object.__setattr__(self, "zeros", (0j,) * int(self.D))
        elif self.kind == "blaschke":
            zs = tuple(complex(z) for z in self.zeros)
            if not zs:
                raise CoveringError("Blaschke product needs at least one zero")
            if any(abs(z) >= 1 for z in zs):
                raise CoveringError("Blaschke zeros must lie in the open unit disk")
            object.__setattr__(self, "zeros", zs)
            object.__setattr__(self, "D", len(zs))
        else:
            raise CoveringError(f"unknown map kind {self.kind!r}")
        num = np.poly(np.array(self.zeros)) if self.zeros else np.array([1.0 + 0j])
        den = np.array([1.0 + 0j])
        for a in self.zeros:
            den = np.polymul(den, np.array([-np.conj(a), 1.0]))
        object.__setattr__(self, "_num", np.asarray(num, dtype=complex))
        object.__setattr__(self, "_den", den)

    @classmethod
    def power(cls, D: int) -> CoveringMap:
        return cls("power", D)

    @classmethod
    def blaschke(cls, zeros: Sequence[complex]) -> CoveringMap:
        return cls("blaschke", len(zeros), tuple(zeros))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "power":
            return z**self.D
        out = np.ones_like(z)
        for a in self.zeros:
            out = out * (z - a) / (1 - np.conj(a) * z)
        return out

    def preimages(self, w: complex) -> np.ndarray:
        """All ``D`` solutions of ``f(z) = w`` (with multiplicity)."""
        if self.kind == "power":
            if w == 0:
                return np.zeros(self.D, dtype=complex)
            r = abs(w) ** (1.0 / self.D)
            t = (np.angle(w) + 2 * np.pi * np.arange(self.D)) / self.D
            return r * np.exp(1j * t)
        poly = np.polysub(self._num, w * self._den)
        return np.roots(poly)

    def critical_points(self) -> np.ndarray:
        """Critical points in the open unit disk."""
        if self.D == 1:
            return np.zeros(0, dtype=complex)
        if self.kind == "power":
            return np.zeros(1, dtype=complex)
        p, q = self._num, self._den
        deriv = np.polysub(np.polymul(np.polyder(p), q), np.polymul(p, np.polyder(q)))
        roots = np.roots(deriv)
        return roots[np.abs(roots) < 1 - 1e-9]

    def critical_values(self) -> np.ndarray:
        return self(self.critical_points())

    def to_dict(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "D": self.D}
        return {"kind": "blaschke", "zeros": [[z.real, z.imag] for z in self.zeros]}


@dataclass(frozen=True)
class Component:
    """One preimage component: boundary polygon and local degree."""

    shape: Polygon
    degree: int
    hausdorff: float  # max distance of f(edge midpoints) from the target boundary

    def contains_point(self, z: complex) -> bool:
        return bool(self.shape.contains(np.array([z.real]), np.array([z.imag]))[0])

    def to_dict(self) -> dict:
        c = self.shape.to_shapely().centroid
        return {"degree": self.degree, "centroid": [c.x, c.y], "vertices": len(self.shape.points), "hausdorff": self.hausdorff}


def _boundary_distance(target: Shape, w: np.ndarray) -> np.ndarray:
    if isinstance(target, Disk):
        return np.abs(np.abs(w - complex(target.cx, target.cy)) - target.r)
    ring = target.to_shapely().exterior
    return shapely.distance(ring, shapely.points(w.real, w.imag))


def _winding(path: np.ndarray, center: complex) -> float:
    ang = np.angle(np.roll(path, -1) - center) - np.angle(path - center)
    ang = (ang + np.pi) % (2 * np.pi) - np.pi
    return float(ang.sum() / (2 * np.pi))


def _check_target(fmap: CoveringMap, target: Shape, margin: float) -> None:
    g = target.to_shapely()
    if not UNIT_DISK.to_shapely().contains(g) or any(
        abs(complex(x, y)) >= 1 - 1e-12 for x, y in g.exterior.coords
    ):
        raise CoveringError("target shape must lie strictly inside the unit disk")
    cv = fmap.critical_values()
    if cv.size:
        # margin is relative to the target's equivalent-disk radius
        dist = _boundary_distance(target, cv) / math.sqrt(g.area / math.pi)
        if dist.min() < margin:
            k = int(np.argmin(dist))
            raise CoveringError(
                f"critical value {cv[k]:.6g} lies within {margin:g} of the target boundary (relative distance {dist[k]:.3g})"
            )


def preimage_components(
    fmap: CoveringMap, target: Shape, samples: int = DEFAULT_SAMPLES, margin: float = DEFAULT_MARGIN
) -> list[Component]:
    """Trace ``f^{-1}(target)`` into polygonal components with local degrees.

    Components are ordered by the argument of their centroid.
    """
    if samples < 16:
        raise InputError("samples must be >= 16")
    _check_target(fmap, target, margin)
    w = target.boundary_points(samples)
    roots = np.array([fmap.preimages(wk) for wk in w])  # (samples, D)
    D = fmap.D
    used = np.zeros(roots.shape, dtype=bool)
    center = complex(*target.interior_point())
    comps = []
    for start in range(D):
        if used[0, start]:
            continue
        path = []
        k, j, laps = 0, start, 0
        while True:
            if used[k, j]:
                raise CoveringError("preimage tracing revisited a point; increase samples or margin")
            used[k, j] = True
            path.append(roots[k, j])
            k1 = (k + 1) % samples
            dist = np.abs(roots[k1] - roots[k, j])
            order = np.argsort(dist, kind="stable")
            if D > 1 and dist[order[0]] > _MATCH_RATIO * dist[order[1]]:
                raise CoveringError("ambiguous preimage matching near a critical value; increase samples or margin")
            k, j = k1, int(order[0])
            if k == 0:
                laps += 1
                if j == start:
                    break
                if laps > D:
                    raise CoveringError("preimage path failed to close")
        path = np.array(path)
        degree = int(round(_winding(fmap(path), center)))
        if degree != laps:
            raise CoveringError(f"winding number {degree} disagrees with lap count {laps}")
        mid = 0.5 * (path + np.roll(path, -1))
        haus = float(_boundary_distance(target, fmap(mid)).max())
        try:
            poly = Polygon(tuple((p.real, p.imag) for p in path))
        except SceneError as exc:
            raise CoveringError(f"traced preimage is not a simple polygon: {exc}") from None
        comps.append(Component(poly, degree, haus))
    total = sum(c.degree for c in comps)
    if total != D:
        raise CoveringError(f"component degrees sum to {total}, expected D = {D}")

    def key(c):
        cen = c.shape.to_shapely().centroid
        return (round(math.atan2(cen.y, cen.x) % (2 * math.pi), 9), round(math.hypot(cen.x, cen.y), 9))

    return sorted(comps, key=key)


# ---------------------------------------------------------------------------
# Grid moduli of unit-disk scenes
# ---------------------------------------------------------------------------


def _disk_modulus(islands: Sequence[Shape], resolution, polar_resolution, tol, domain: Shape = UNIT_DISK):
    """``mod(domain, union of islands)`` on a Cartesian or log-polar grid."""
    scene = make_scene(domain, list(islands))
    if _logpolar_core(scene) is not None:
        grid = rasterize(scene, polar_resolution, "logpolar")
    else:
        grid = rasterize(scene, resolution)
    f = solve_potential(grid, "islands", "outer", tol)
    return modulus(f.energy), grid.coords


@dataclass(frozen=True)
class CoveringSpec:
    fmap: CoveringMap
    B: Shape
    Bprime: Shape | None = None
    components: str | tuple[int, ...] = "all"


def covering_from_dict(d: Any) -> CoveringSpec:
    if not isinstance(d, dict):
        raise CoveringError("covering spec: expected a JSON object")
    m = d.get("map")
    if not isinstance(m, dict):
        raise CoveringError("map: missing or not an object")
    if m.get("kind") == "power":
        D = m.get("D")
        if not isinstance(D, int) or isinstance(D, bool):
            raise CoveringError("map.D: expected an integer")
        fmap = CoveringMap.power(D)
    elif m.get("kind") == "blaschke":
        zs = m.get("zeros")
        if not isinstance(zs, list) or not zs:
            raise CoveringError("map.zeros: expected a non-empty list of [x, y]")
        try:
            fmap = CoveringMap.blaschke([complex(float(z[0]), float(z[1])) for z in zs])
        except (TypeError, IndexError, ValueError) as exc:
            raise CoveringError(f"map.zeros: {exc}") from None
    else:
        raise CoveringError(f"map.kind: unknown {m.get('kind')!r}")
    if "B" not in d:
        raise CoveringError("B: missing")
    B = shape_from_dict(d["B"], "B", ("disk", "rect", "polygon"))
    Bp = shape_from_dict(d["Bprime"], "Bprime", ("disk", "rect", "polygon")) if d.get("Bprime") else None
    comps = d.get("components", "all")
    if comps != "all":
        if not isinstance(comps, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in comps):
            raise CoveringError('components: expected "all" or a list of indices')
        comps = tuple(comps)
    return CoveringSpec(fmap, B, Bp, comps)


def load_covering(path) -> CoveringSpec:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CoveringError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return covering_from_dict(data)


def _select(comps: list[Component], selection) -> list[Component]:
    if selection == "all":
        return comps
    for i in selection:
        if not 0 <= i < len(comps):
            raise CoveringError(f"component index {i} out of range (have {len(comps)})")
    return [comps[i] for i in selection]


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransformBoundsReport:
    D: int
    mod_U_A: float
    mod_V_B: float
    components: tuple[Component, ...]
    slack: float = CHECK_SLACK

    @property
    def lower_ok(self) -> bool:
        return self.mod_U_A <= self.mod_V_B * (1 + self.slack)

    @property
    def upper_ok(self) -> bool:
        return self.mod_V_B <= self.D * self.mod_U_A * (1 + self.slack)

    @property
    def verdict(self) -> bool:
        return self.lower_ok and self.upper_ok

    def to_dict(self) -> dict:
        return {
            "check": "transform_bounds",
            "D": self.D,
            "mod_U_A": self.mod_U_A,
            "mod_V_B": self.mod_V_B,
            "D_mod_U_A": self.D * self.mod_U_A,
            "components": [c.to_dict() for c in self.components],
            "lower_ok": self.lower_ok,
            "upper_ok": self.upper_ok,
            "verdict": self.verdict,
        }


def verify_transform_bounds(
    fmap: CoveringMap,
    B: Shape,
    resolution: float,
    tol: float = DEFAULT_TOL,
    samples: int = DEFAULT_SAMPLES,
    polar_resolution: float = DEFAULT_POLAR_RESOLUTION,
) -> TransformBoundsReport:
    """``mod(U, A) <= mod(V, B) <= D mod(U, A)`` for the full preimage ``A``."""
    comps = preimage_components(fmap, B, samples)
    mod_ua, _ = _disk_modulus([c.shape for c in comps], resolution, polar_resolution, tol)
    mod_vb, _ = _disk_modulus([B], resolution, polar_resolution, tol)
    return TransformBoundsReport(fmap.D, mod_ua, mod_vb, tuple(comps))


@dataclass(frozen=True)
class ExactTransformReport:
    D: int
    mod_U_A: float
    mod_V_B: float
    branched: bool
    slack: float = CHECK_SLACK

    @property
    def rel_error(self) -> float:
        return abs(self.mod_V_B - self.D * self.mod_U_A) / self.mod_V_B

    @property
    def verdict(self) -> bool:
        return self.rel_error <= self.slack

    def to_dict(self) -> dict:
        return {
            "check": "exact_transform",
            "D": self.D,
            "mod_U_A": self.mod_U_A,
            "mod_V_B": self.mod_V_B,
            "D_mod_U_A": self.D * self.mod_U_A,
            "branched": self.branched,
            "rel_error": self.rel_error,
            "verdict": self.verdict,
        }


def verify_exact_transform(
    fmap: CoveringMap,
    B: Shape,
    resolution: float,
    tol: float = DEFAULT_TOL,
    samples: int = DEFAULT_SAMPLES,
    polar_resolution: float = DEFAULT_POLAR_RESOLUTION,
    allow_branched: bool = False,
) -> ExactTransformReport:
    """``mod(V, B) = D mod(U, A)`` when ``U minus A -> V minus B`` is a covering.

    By default every critical value must lie inside ``B`` so the covering is
    unbranched; ``allow_branched=True`` lifts that precondition.
    """
    cv = fmap.critical_values()
    outside = [c for c in cv if not B.contains(np.array([c.real]), np.array([c.imag]))[0]]
    if outside and not allow_branched:
        raise CoveringError(f"critical value {outside[0]:.6g} lies in V minus B; the covering is branched there")
    comps = preimage_components(fmap, B, samples)
    mod_ua, _ = _disk_modulus([c.shape for c in comps], resolution, polar_resolution, tol)
    mod_vb, _ = _disk_modulus([B], resolution, polar_resolution, tol)
    return ExactTransformReport(fmap.D, mod_ua, mod_vb, bool(outside))


@dataclass(frozen=True)
class LowerBoundReport:
    d: int
    mod_U_A: float
    mod_V_B: float
    selected: tuple[int, ...]
    slack: float = CHECK_SLACK

    @property
    def margin(self) -> float:
        """``mod(V, B) / (d mod(U, A))``; above 1 means the inequality is strict."""
        return self.mod_V_B / (self.d * self.mod_U_A)

    @property
    def verdict(self) -> bool:
        return self.mod_V_B >= self.d * self.mod_U_A * (1 - self.slack)

    def to_dict(self) -> dict:
        return {
            "check": "lower_bound",
            "selected": list(self.selected),
            "d": self.d,
            "mod_U_A": self.mod_U_A,
            "mod_V_B": self.mod_V_B,
            "d_mod_U_A": self.d * self.mod_U_A,
            "margin": self.margin,
            "verdict": self.verdict,
        }


def verify_lower_bound(
    fmap: CoveringMap,
    B: Shape,
    selected: str | Sequence[int],
    resolution: float,
    tol: float = DEFAULT_TOL,
    samples: int = DEFAULT_SAMPLES,
    polar_resolution: float = DEFAULT_POLAR_RESOLUTION,
) -> LowerBoundReport:
    """``mod(V, B) >= d mod(U, A)`` for ``A`` a union of preimage components of total degree ``d``."""
    comps = preimage_components(fmap, B, samples)
    chosen = _select(comps, selected)
    idx = tuple(range(len(comps))) if selected == "all" else tuple(selected)
    d = sum(c.degree for c in chosen)
    mod_ua, _ = _disk_modulus([c.shape for c in chosen], resolution, polar_resolution, tol)
    mod_vb, _ = _disk_modulus([B], resolution, polar_resolution, tol)
    return LowerBoundReport(d, mod_ua, mod_vb, idx)


@dataclass(frozen=True)
class CoveringLemmaReport:
    D: int
    d: int
    component: int
    mod_U_Lambda: float
    mod_V_B: float
    mod_collar: float  # mod(B' minus B)
    epsilon: float

    @property
    def eta(self) -> float:
        """Largest admissible collar constant, capped at 1."""
        return min(1.0, self.mod_collar / self.mod_U_Lambda)

    @property
    def bound(self) -> float:
        return 2.0 / self.eta * self.d**2 * self.mod_U_Lambda

    @property
    def verdict(self) -> bool:
        return self.mod_V_B < self.bound

    @property
    def in_regime(self) -> bool:
        return self.mod_U_Lambda < self.epsilon

    def to_dict(self) -> dict:
        return {
            "check": "covering_lemma",
            "D": self.D,
            "d": self.d,
            "component": self.component,
            "mod_U_Lambda": self.mod_U_Lambda,
            "mod_V_B": self.mod_V_B,
            "mod_Bprime_B": self.mod_collar,
            "eta": self.eta,
            "bound": self.bound,
            "epsilon": self.epsilon,
            "in_regime": self.in_regime,
            "verdict": self.verdict,
        }


def covering_lemma_experiment(
    fmap: CoveringMap,
    B: Shape,
    Bprime: Shape,
    component: int,
    resolution: float,
    tol: float = DEFAULT_TOL,
    samples: int = DEFAULT_SAMPLES,
    polar_resolution: float = DEFAULT_POLAR_RESOLUTION,
    epsilon: float = 2.0,
) -> CoveringLemmaReport:
    """Measure both sides of ``mod(V - B) < 2/eta d^2 mod(U - Lambda)`` for one nest.

    ``Lambda`` is preimage component ``component`` of ``B``; ``Lambda'`` is
    the component of ``f^{-1}(B')`` containing it and ``d`` its degree.
    ``epsilon`` is the smallness threshold on ``mod(U - Lambda)`` that marks
    a run as in regime.
    """
    gb, gbp = B.to_shapely(), Bprime.to_shapely()
    if not gbp.contains(gb) or gb.distance(gbp.exterior) <= 0:
        raise CoveringError("nest invalid: B must lie strictly inside B'")
    comps = preimage_components(fmap, B, samples)
    lam = _select(comps, [component])[0]
    outer = preimage_components(fmap, Bprime, samples)
    probe = complex(*lam.shape.interior_point())
    host = [c for c in outer if c.contains_point(probe)]
    if len(host) != 1:
        raise CoveringError("could not identify the component of f^-1(B') containing Lambda")
    d = host[0].degree
    mod_ul, _ = _disk_modulus([lam.shape], resolution, polar_resolution, tol)
    mod_vb, _ = _disk_modulus([B], resolution, polar_resolution, tol)
    mod_col, _ = _disk_modulus([B], resolution, polar_resolution, tol, domain=Bprime)
    return CoveringLemmaReport(fmap.D, d, component, mod_ul, mod_vb, mod_col, epsilon)
