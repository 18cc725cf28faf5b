"""Half-plane segment families, QA-ratio sweeps and grid convergence studies.

The half-plane family places islands ``A_i = [0, W] x {1/a_i}`` above the
real axis for a strictly decreasing ``a``.  For large ``W`` the strips between
consecutive segments behave like parallel-plate capacitors, which gives

    X ~ W a_1,   Y ~ W sum a_j,   Z ~ W sum (b_i + b_{i+1})

where ``b_1 = a_1``, ``b_{n+1} = 0`` and ``1/b_i`` is the gap between heights
``1/a_{i-1}`` and ``1/a_i``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import InputError
from .geometry import HalfplaneBox, SceneSpec, Segment, make_scene, rasterize
from .laplace import DEFAULT_TOL, solve_potential
from .moduli import DEFAULT_QA_THRESHOLD, ModuliReport, qa_report

QA_SWEEP_LIMIT = 4.0 / 3.0 * 1.05
SWEEP_HEADER = ["label", "n", "W", "resolution", "X", "Y", "Z", "ratio", "ratio_pred", "in_regime"]


@dataclass(frozen=True)
class HalfplaneFamily:
    a: tuple[float, ...]
    W: float = 32.0
    pad: float = 8.0
    thickness: float = 0.0  # 0 means one grid cell
    label: str = ""
    aspect: float = 4.0  # required W / max height

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        object.__setattr__(self, "a", a)
        if not a:
            raise InputError("half-plane family needs at least one height")
        if any(not x > 0 for x in a):
            raise InputError("a must be positive")
        if any(a[i + 1] >= a[i] for i in range(len(a) - 1)):
            raise InputError(f"a must be strictly decreasing, got {list(a)}")
        if not self.pad > 0:
            raise InputError("pad must be > 0")
        if self.W < self.aspect * self.heights[-1]:
            raise InputError(
                f"W = {self.W:g} too small: need W >= {self.aspect:g} x max height {self.heights[-1]:g}"
            )
        if not self.label:
            object.__setattr__(self, "label", "a=(" + ",".join(f"{x:g}" for x in a) + f") W={self.W:g}")

    @property
    def heights(self) -> tuple[float, ...]:
        return tuple(1.0 / x for x in self.a)

    @property
    def gaps(self) -> tuple[float, ...]:
        """Widths ``b_1 .. b_n`` of the strips below each segment.

        ``b_1 = a_1``; for ``i > 1`` the reciprocal of ``|1/a_i - 1/a_{i-1}|``.
        """
        h = self.heights
        return (self.a[0],) + tuple(1.0 / abs(h[i] - h[i - 1]) for i in range(1, len(h)))

    def scene(self) -> SceneSpec:
        h = self.heights
        box = HalfplaneBox(-self.pad, self.W + self.pad, h[-1] + self.pad / 2.0)
        islands = [Segment(0.0, self.W, y, self.thickness) for y in h]
        return make_scene(box, islands, self.label)

    def scaled(self, factor: float) -> HalfplaneFamily:
        return HalfplaneFamily(self.a, self.W * factor, self.pad, self.thickness, "", self.aspect)


@dataclass(frozen=True)
class Prediction:
    X: float
    Y: float
    Z: float
    b: tuple[float, ...]

    @property
    def ratio(self) -> float:
        return self.Y * self.Y / (self.X * self.Z)


def halfplane_predicted(family: HalfplaneFamily) -> Prediction:
    """Large-``W`` asymptotics of X, Y, Z for the family."""
    a, W = family.a, family.W
    b = family.gaps
    bb = b + (0.0,)
    z = math.fsum(bb[i] + bb[i + 1] for i in range(len(a)))
    return Prediction(X=W * a[0], Y=W * math.fsum(a), Z=W * z, b=b)


def halfplane_measured(
    family: HalfplaneFamily,
    resolution: float,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
    qa_threshold: float = DEFAULT_QA_THRESHOLD,
) -> ModuliReport:
    """Grid X, Y, Z of the truncated-box version of the family."""
    return qa_report(family.scene(), resolution, tol, threads, qa_threshold)


@dataclass(frozen=True)
class SweepRow:
    label: str
    n: int
    W: float
    resolution: float
    X: float
    Y: float
    Z: float
    ratio: float
    ratio_pred: float
    in_regime: bool

    def as_list(self) -> list:
        return [self.label, self.n, self.W, self.resolution, self.X, self.Y, self.Z, self.ratio, self.ratio_pred, self.in_regime]


@dataclass(frozen=True)
class SweepTable:
    rows: tuple[SweepRow, ...]
    limit: float = QA_SWEEP_LIMIT

    @property
    def running_max(self) -> tuple[float, ...]:
        out, best = [], -math.inf
        for r in self.rows:
            if r.in_regime:
                best = max(best, r.ratio)
            out.append(best)
        return tuple(out)

    @property
    def max_ratio(self) -> float:
        return self.running_max[-1] if self.rows else -math.inf

    @property
    def violations(self) -> tuple[SweepRow, ...]:
        return tuple(r for r in self.rows if r.in_regime and r.ratio > self.limit)

    @property
    def verdict(self) -> bool:
        return not self.violations

    def to_csv(self, fmt: Callable[[object], str] = str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in self.rows:
            w.writerow([fmt(x) for x in r.as_list()])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "rows": [dict(zip(SWEEP_HEADER, r.as_list())) for r in self.rows],
            "running_max": list(self.running_max),
            "max_ratio": self.max_ratio,
            "limit": self.limit,
            "verdict": self.verdict,
        }


def qa_ratio_sweep(
    families: Sequence[HalfplaneFamily],
    resolution: float,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
    qa_threshold: float = DEFAULT_QA_THRESHOLD,
) -> SweepTable:
    """Measured and predicted ``Y^2/(XZ)`` per family, rows in input order."""
    rows = []
    for fam in families:
        rep = halfplane_measured(fam, resolution, tol, threads, qa_threshold)
        pred = halfplane_predicted(fam)
        rows.append(
            SweepRow(fam.label, len(fam.a), fam.W, float(resolution), rep.X, rep.Y, rep.Z, rep.ratio_qa, pred.ratio, rep.in_regime)
        )
    return SweepTable(tuple(rows))


def default_sweep_families(W: float = 32.0, pad: float = 8.0) -> list[HalfplaneFamily]:
    """Twenty-four families with heights in [1, 4] and gaps of at least 1/2."""
    height_sets = [
        (1,), (1.5,), (2,), (3,),
        (1, 2), (1, 1.5), (1, 3), (1, 4), (2, 3), (2, 4), (1.5, 4), (1, 2.5),
        (1, 2, 4), (1, 1.5, 2), (1, 2, 3), (1, 3, 4), (1.5, 2.5, 4), (1, 2.5, 4),
        (1, 1.5, 2, 2.5), (1, 2, 3, 4), (1, 1.5, 2.5, 4), (1.5, 2, 3, 4),
        (1, 1.5, 2, 2.5, 3), (1, 1.5, 2, 3, 4),
    ]
    return [HalfplaneFamily(tuple(1.0 / h for h in hs), W, pad) for hs in height_sets]


# ---------------------------------------------------------------------------
# Convergence studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceTable:
    quantity: str
    resolutions: tuple[float, ...]
    values: tuple[float, ...]
    order: float
    extrapolated: float
    assumed_order: bool = False
    iterations: tuple[int, ...] = field(default=(), repr=False)

    @property
    def rel_diffs(self) -> tuple[float, ...]:
        v = self.values
        return tuple(abs(v[i + 1] - v[i]) / abs(v[i + 1]) for i in range(len(v) - 1))

    @property
    def monotone(self) -> bool:
        d = [self.values[i + 1] - self.values[i] for i in range(len(self.values) - 1)]
        return all(x > 0 for x in d) or all(x < 0 for x in d)

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "resolutions": list(self.resolutions),
            "values": list(self.values),
            "rel_diffs": list(self.rel_diffs),
            "monotone": self.monotone,
            "order": self.order,
            "assumed_order": self.assumed_order,
            "extrapolated": self.extrapolated,
        }


def richardson(values: Sequence[float], ratio: float) -> tuple[float, float, bool]:
    """Extrapolate the last three values of a sequence refined by ``ratio``.

    Returns ``(limit, observed order, assumed)``.  When the last two
    differences do not shrink geometrically with a common sign, the order is
    not observable and first order is assumed.
    """
    if len(values) < 3:
        raise InputError("Richardson extrapolation needs at least three values")
    f1, f2, f3 = values[-3:]
    d1, d2 = f2 - f1, f3 - f2
    if d2 == 0.0:
        return f3, math.inf, False
    q = d1 / d2
    if q > 1.0:
        p = math.log(q) / math.log(ratio)
        return f3 + d2 / (ratio**p - 1.0), p, False
    return f3 + d2 / (ratio - 1.0), 1.0, True


def _measure(scene, resolution, tol, quantity, threads):
    """(value, total solver iterations) for one resolution."""
    if quantity == "X":
        f = solve_potential(rasterize(scene, resolution), "islands", "outer", tol)
        return f.energy, f.iterations
    if quantity not in ("Y", "Z", "ratio_qa"):
        raise InputError(f"unknown quantity {quantity!r}; one of ['X', 'Y', 'Z', 'ratio_qa']")
    rep = qa_report(scene, resolution, tol, threads)
    return getattr(rep, quantity), sum(rep.iterations)


def convergence_study(
    scene: SceneSpec,
    resolutions: Sequence[float],
    tol: float = DEFAULT_TOL,
    quantity: str = "X",
    threads: int = 1,
) -> ConvergenceTable:
    """Values of ``quantity`` on a geometric ladder of resolutions, with extrapolation."""
    res = [float(r) for r in resolutions]
    if len(res) < 3:
        raise InputError("convergence_study needs at least three resolutions")
    ratio = res[1] / res[0]
    if not ratio > 1 or any(not math.isclose(res[i + 1] / res[i], ratio, rel_tol=1e-9) for i in range(len(res) - 1)):
        raise InputError(f"resolutions must form an increasing geometric progression, got {res}")
    runs = [_measure(scene, r, tol, quantity, threads) for r in res]
    values = [v for v, _ in runs]
    limit, order, assumed = richardson(values, ratio)
    return ConvergenceTable(
        quantity=quantity,
        resolutions=tuple(res),
        values=tuple(values),
        order=order,
        extrapolated=limit,
        assumed_order=assumed,
        iterations=tuple(it for _, it in runs),
    )
