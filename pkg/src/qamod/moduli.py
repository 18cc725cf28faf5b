"""The moduli X, Y, Z of a family of islands and checks built on them.

Widths are energies of discrete harmonic measures (see :mod:`qamod.laplace`);
moduli are their reciprocals.

* ``X``: width from the union of all islands to the outer boundary.
* ``Y``: sum over islands of the width from island ``j`` to the outer
  boundary, other islands left free.
* ``Z``: sum over islands of the width from island ``j`` to the outer
  boundary together with every other island.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence


from .circuit_laws import harmonic_sum
from .errors import InputError, SceneError
from .geometry import ISLAND_BASE, OUTER_BOUNDARY, GridDomain, SceneSpec, Shape, make_scene, rasterize, topological_complexity
from .laplace import DEFAULT_TOL, PotentialField, solve_potential

DEFAULT_QA_THRESHOLD = 10.0
VERDICT_SLACK = 1e-6
ZERO_WIDTH = 1e-12


def modulus(width: float) -> float:
    """Reciprocal of a width; widths below 1e-12 give ``inf`` (infinite modulus)."""
    return math.inf if width < ZERO_WIDTH else 1.0 / width


def _le(a: float, b: float, slack: float) -> bool:
    return a <= b + slack * max(abs(a), abs(b))


def _run(jobs, threads: int) -> list[PotentialField]:
    """Run ``(grid, source, sink, tol)`` solves; results keep job order."""
    if threads <= 1 or len(jobs) <= 1:
        return [solve_potential(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: solve_potential(*job), jobs))


def _x_job(grid, tol):
    return (grid, "islands", "outer", tol)


def _y_job(grid, j, tol):
    return (grid, f"island:{j}", "outer", tol)


def _z_job(grid, j, tol):
    labels = grid.labels
    sink = (labels == OUTER_BOUNDARY) | ((labels >= ISLAND_BASE) & (labels != ISLAND_BASE + j))
    return (grid, f"island:{j}", sink, tol)


def _grid(scene: SceneSpec, resolution: float, coords: str) -> GridDomain:
    if scene.n_islands < 1:
        raise SceneError("moduli need at least one island")
    return rasterize(scene, resolution, coords)


def compute_X(scene: SceneSpec, resolution: float, tol: float = DEFAULT_TOL, coords: str = "cartesian") -> float:
    grid = _grid(scene, resolution, coords)
    return solve_potential(*_x_job(grid, tol)).energy


def compute_Y(
    scene: SceneSpec, resolution: float, tol: float = DEFAULT_TOL, threads: int = 1, coords: str = "cartesian"
) -> tuple[list[float], float]:
    """Per-island widths to the outer boundary and their sum."""
    grid = _grid(scene, resolution, coords)
    fields = _run([_y_job(grid, j, tol) for j in range(scene.n_islands)], threads)
    per = [f.energy for f in fields]
    return per, math.fsum(per)


def compute_Z(
    scene: SceneSpec, resolution: float, tol: float = DEFAULT_TOL, threads: int = 1, coords: str = "cartesian"
) -> tuple[list[float], float]:
    """Per-island widths to the outer boundary plus all other islands, and their sum."""
    grid = _grid(scene, resolution, coords)
    fields = _run([_z_job(grid, j, tol) for j in range(scene.n_islands)], threads)
    per = [f.energy for f in fields]
    return per, math.fsum(per)


@dataclass(frozen=True)
class ModuliReport:
    label: str
    N: int
    top: int
    X: float
    Y: float
    Y_j: tuple[float, ...]
    Z: float
    Z_j: tuple[float, ...]
    resolution: float
    tol: float
    iterations: tuple[int, ...]
    qa_threshold: float = DEFAULT_QA_THRESHOLD
    slack: float = VERDICT_SLACK
    eta_j: tuple[float, ...] | None = None
    diagnostics: tuple[dict, ...] | None = field(default=None, repr=False)

    @property
    def ratio_qa(self) -> float:
        return self.Y * self.Y / (self.X * self.Z) if self.X > 0 and self.Z > 0 else math.nan

    @property
    def xi(self) -> float:
        return self.Z / self.Y if self.Y > 0 else math.inf

    @property
    def eta_min(self) -> float | None:
        return None if self.eta_j is None else min(self.eta_j)

    @property
    def in_regime(self) -> bool:
        return self.Y >= self.qa_threshold

    @property
    def verdicts(self) -> dict[str, bool]:
        s = self.slack
        return {
            "X_le_Y": _le(self.X, self.Y, s),
            "Y_le_Z": _le(self.Y, self.Z, s),
            "Y_le_NX": _le(self.Y, self.N * self.X, s),
            "Zj_ge_Yj": all(_le(y, z, s) for y, z in zip(self.Y_j, self.Z_j)),
            "qa_law": _le(self.Y * self.Y, 2.0 * self.X * self.Z, s),
        }

    def failures(self) -> list[str]:
        """Violated inequalities, each with both sides.  The QA law counts only in regime."""
        out = []
        v = self.verdicts
        if not v["X_le_Y"]:
            out.append(f"X <= Y violated: X = {self.X:.12g}, Y = {self.Y:.12g}")
        if not v["Y_le_Z"]:
            out.append(f"Y <= Z violated: Y = {self.Y:.12g}, Z = {self.Z:.12g}")
        if not v["Y_le_NX"]:
            out.append(f"Y <= N*X violated: Y = {self.Y:.12g}, N*X = {self.N * self.X:.12g}")
        if not v["Zj_ge_Yj"]:
            out.append("Z_j >= Y_j violated for some island")
        if self.in_regime and not v["qa_law"]:
            out.append(f"Y^2 <= 2XZ violated: Y^2 = {self.Y**2:.12g}, 2XZ = {2 * self.X * self.Z:.12g}")
        return out

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "N": self.N,
            "top": self.top,
            "X": self.X,
            "Y": self.Y,
            "Y_j": list(self.Y_j),
            "Z": self.Z,
            "Z_j": list(self.Z_j),
            "ratio_qa": self.ratio_qa,
            "xi": self.xi,
            "eta_min": self.eta_min,
            "eta_j": None if self.eta_j is None else list(self.eta_j),
            "qa_threshold": self.qa_threshold,
            "in_regime": self.in_regime,
            "verdicts": self.verdicts,
            "grid": {"resolution": self.resolution, "tol": self.tol, "iterations": list(self.iterations)},
        }
        if self.diagnostics is not None:
            d["diagnostics"] = list(self.diagnostics)
        return d

    def csv_rows(self) -> list[list]:
        rows = [["island", "Y_j", "Z_j", "eta_j"]]
        for j in range(self.N):
            eta = "" if self.eta_j is None else self.eta_j[j]
            rows.append([j, self.Y_j[j], self.Z_j[j], eta])
        rows.append(["summary", self.Y, self.Z, "" if self.eta_min is None else self.eta_min])
        rows.append(["X", self.X, "ratio_qa", self.ratio_qa])
        return rows


def qa_report(
    scene: SceneSpec,
    resolution: float,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
    qa_threshold: float = DEFAULT_QA_THRESHOLD,
    diagnostics: bool = False,
    coords: str = "cartesian",
) -> ModuliReport:
    """X, Y, Z with verdicts; ``1 + 2N`` solves on one rasterization.

    When every island has a collar, the collar ratios are filled in as well.
    """
    grid = _grid(scene, resolution, coords)
    n = scene.n_islands
    jobs = [_x_job(grid, tol)]
    jobs += [_y_job(grid, j, tol) for j in range(n)]
    jobs += [_z_job(grid, j, tol) for j in range(n)]
    fields = _run(jobs, threads)
    y = [f.energy for f in fields[1 : 1 + n]]
    z = [f.energy for f in fields[1 + n :]]
    eta = None
    if scene.has_collars:
        eta = tuple(_collar_widths_to_eta(scene, y, resolution, tol, threads)[0])
    return ModuliReport(
        label=scene.label,
        N=n,
        top=topological_complexity(scene),
        X=fields[0].energy,
        Y=math.fsum(y),
        Y_j=tuple(y),
        Z=math.fsum(z),
        Z_j=tuple(z),
        resolution=float(resolution),
        tol=tol,
        iterations=tuple(f.iterations for f in fields),
        qa_threshold=qa_threshold,
        eta_j=eta,
        diagnostics=tuple(f.diagnostics() for f in fields) if diagnostics else None,
    )


# ---------------------------------------------------------------------------
# Collars
# ---------------------------------------------------------------------------


def _collar_widths_to_eta(scene, y, resolution, tol, threads):
    subs = [make_scene(scene.collars[j], [scene.islands[j]], f"collar {j}") for j in range(scene.n_islands)]
    jobs = [(rasterize(s, resolution), "islands", "outer", tol) for s in subs]
    widths = [f.energy for f in _run(jobs, threads)]
    # eta_j = mod(A'_j, A_j) / mod(S, A_j) = W(S, A_j) / W(A'_j, A_j)
    eta = [yj / w for yj, w in zip(y, widths)]
    return eta, widths


@dataclass(frozen=True)
class CollarReport:
    eta_j: tuple[float, ...]
    collar_widths: tuple[float, ...]
    Y_j: tuple[float, ...]
    Y: float
    Z: float
    tolerance: float = 0.10

    @property
    def eta_min(self) -> float:
        return min(self.eta_j)

    @property
    def xi(self) -> float:
        return self.Z / self.Y

    @property
    def xi_bound(self) -> float:
        return 1.0 / self.eta_min

    @property
    def verdict(self) -> bool:
        return self.xi <= self.xi_bound * (1.0 + self.tolerance)

    def to_dict(self) -> dict:
        return {
            "eta_j": list(self.eta_j),
            "eta_min": self.eta_min,
            "collar_widths": list(self.collar_widths),
            "collar_moduli": [modulus(w) for w in self.collar_widths],
            "Y_j": list(self.Y_j),
            "Y": self.Y,
            "Z": self.Z,
            "xi": self.xi,
            "xi_bound": self.xi_bound,
            "verdict": self.verdict,
        }


def collar_check(scene: SceneSpec, resolution: float, tol: float = DEFAULT_TOL, threads: int = 1) -> CollarReport:
    """Collar ratios ``eta_j = mod(A'_j minus A_j) / mod(S, A_j)`` and the implied separation."""
    if not scene.has_collars:
        missing = [j for j in range(scene.n_islands) if not scene.collars or scene.collars[j] is None]
        raise SceneError(f"collar_check: islands {missing} have no collar")
    per_y, y = compute_Y(scene, resolution, tol, threads)
    _, z = compute_Z(scene, resolution, tol, threads)
    eta, widths = _collar_widths_to_eta(scene, per_y, resolution, tol, threads)
    return CollarReport(tuple(eta), tuple(widths), tuple(per_y), y, z)


# ---------------------------------------------------------------------------
# Series law on a nest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroetzschReport:
    lhs: float
    outer_width: float
    inner_width: float
    slack: float = 0.01

    @property
    def rhs(self) -> float:
        return harmonic_sum((self.outer_width, self.inner_width))

    @property
    def verdict(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + self.slack)

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "outer_width": self.outer_width,
            "inner_width": self.inner_width,
            "slack": self.slack,
            "verdict": self.verdict,
        }


def _check_nested(outer: Shape, inner: Shape, what: str) -> None:
    go, gi = outer.to_shapely(), inner.to_shapely()
    if not go.contains(gi) or gi.distance(go.exterior) <= 0:
        raise SceneError(f"{what}: not strictly nested")


def groetzsch_check(
    domain: Shape, middle: Shape, inner: Shape, resolution: float, tol: float = DEFAULT_TOL, threads: int = 1
) -> GroetzschReport:
    """Compare ``W(S, A)`` with ``W(S, B') (+) W(B', A)`` for a nest ``S > B' > A``."""
    _check_nested(domain, middle, "middle shape inside domain")
    _check_nested(middle, inner, "inner shape inside middle shape")
    scenes = [
        make_scene(domain, [inner], "S, A"),
        make_scene(domain, [middle], "S, B'"),
        make_scene(middle, [inner], "B', A"),
    ]
    jobs = [(rasterize(s, resolution), "islands", "outer", tol) for s in scenes]
    lhs, outer_w, inner_w = (f.energy for f in _run(jobs, threads))
    return GroetzschReport(lhs, outer_w, inner_w)


# ---------------------------------------------------------------------------
# Comparable terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparableTermsReport:
    N: int
    eta: float
    mod_U_minus_W: float
    mod_collar: tuple[float, ...]  # mod(D'_i minus D_i)
    mod_U_minus_D: tuple[float, ...]
    mod_U_minus_Dprime: tuple[float, ...]
    delta_threshold: float

    @property
    def delta(self) -> float:
        """Smallest admissible delta: the largest ``mod(U minus D_i)``."""
        return max(self.mod_U_minus_D)

    @property
    def hypothesis_met(self) -> bool:
        ordered = all(c <= m for c, m in zip(self.mod_collar, self.mod_U_minus_D))
        return ordered and self.eta * self.delta < min(self.mod_collar)

    @property
    def bound(self) -> float:
        return 2.0 * self.delta / (self.eta * self.N)

    @property
    def in_regime(self) -> bool:
        return self.delta < self.delta_threshold

    @property
    def verdict(self) -> bool | None:
        if not self.hypothesis_met:
            return None
        return self.mod_U_minus_W < self.bound

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "eta": self.eta,
            "delta": self.delta,
            "mod_U_minus_W": self.mod_U_minus_W,
            "mod_collar": list(self.mod_collar),
            "mod_U_minus_D": list(self.mod_U_minus_D),
            "mod_U_minus_Dprime": list(self.mod_U_minus_Dprime),
            "hypothesis_met": self.hypothesis_met,
            "status": "ok" if self.hypothesis_met else "hypothesis not met",
            "bound": self.bound,
            "delta_threshold": self.delta_threshold,
            "in_regime": self.in_regime,
            "verdict": self.verdict,
        }


def comparable_terms_check(
    outer: Shape,
    inner_domain: Shape,
    disks: Sequence[tuple[Shape, Shape]],
    eta: float,
    resolution: float,
    tol: float = DEFAULT_TOL,
    delta_threshold: float = 1.0,
    threads: int = 1,
) -> ComparableTermsReport:
    """Moduli of the nest ``D_i < D'_i < W < U`` for the comparable-terms bound.

    ``disks`` lists ``(D_i, D'_i)`` pairs.  The verdict is ``None`` when the
    hypothesis ``eta*delta < mod(D'_i minus D_i) <= mod(U minus D_i) < delta``
    cannot be met by any delta.
    """
    if not disks:
        raise InputError("comparable_terms_check needs at least one (D, D') pair")
    if not 0 < eta < 1:
        raise InputError("eta must lie in (0, 1)")
    _check_nested(outer, inner_domain, "W inside U")
    for i, (d, dp) in enumerate(disks):
        _check_nested(inner_domain, dp, f"D'_{i} inside W")
        _check_nested(dp, d, f"D_{i} inside D'_{i}")
    primes = [dp.to_shapely() for _, dp in disks]
    for i in range(len(primes)):
        for k in range(i + 1, len(primes)):
            if primes[i].distance(primes[k]) <= 0:
                raise SceneError(f"D'_{i} and D'_{k} closures meet")
    scenes = [make_scene(outer, [inner_domain], "U, W")]
    scenes += [make_scene(dp, [d], f"D'_{i}, D_{i}") for i, (d, dp) in enumerate(disks)]
    scenes += [make_scene(outer, [d], f"U, D_{i}") for i, (d, _) in enumerate(disks)]
    scenes += [make_scene(outer, [dp], f"U, D'_{i}") for i, (_, dp) in enumerate(disks)]
    jobs = [(rasterize(s, resolution), "islands", "outer", tol) for s in scenes]
    mods = [modulus(f.energy) for f in _run(jobs, threads)]
    n = len(disks)
    return ComparableTermsReport(
        N=n,
        eta=eta,
        mod_U_minus_W=mods[0],
        mod_collar=tuple(mods[1 : 1 + n]),
        mod_U_minus_D=tuple(mods[1 + n : 1 + 2 * n]),
        mod_U_minus_Dprime=tuple(mods[1 + 2 * n :]),
        delta_threshold=delta_threshold,
    )
