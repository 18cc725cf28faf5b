"""Command-line front end.

Exit codes: 0 success, 1 a mathematical verdict failed, 2 bad input or
solver failure.  JSON output has a stable key order and floats rounded to
12 significant digits, so identical runs give byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import circuit_laws, covering, experiments, geometry, laplace, moduli
from .errors import ConvergenceError, QamodError

EXIT_OK, EXIT_VERDICT, EXIT_INPUT = 0, 1, 2
MAX_TOL = 1e-4

SCENE_SCHEMA = """scene file (JSON):
  {"label": "...", "domain": SHAPE, "islands": [SHAPE, ...],
   "collars": [SHAPE or null, ...], "min_resolution": number}
  SHAPE: {"kind":"rect","x0":..,"y0":..,"x1":..,"y1":..}
         {"kind":"disk","cx":..,"cy":..,"r":..}
         {"kind":"segment","x0":..,"x1":..,"y":..,"thickness":..}
         {"kind":"polygon","points":[[x,y],...]}
  domain may also be {"kind":"halfplane_box","x0":..,"x1":..,"y1":..}"""

COVERING_SCHEMA = """covering file (JSON):
  {"map": {"kind":"power","D":3} | {"kind":"blaschke","zeros":[[x,y],...]},
   "B": SHAPE, "Bprime": SHAPE, "components": "all" | [indices]}"""

NEST_SCHEMA = """nest file (JSON): {"S": SHAPE, "Bprime": SHAPE, "A": SHAPE} with A inside Bprime inside S"""

SWEEP_SCHEMA = """sweep file (JSON): [{"a": [1, 0.5, ...], "W": 32, "pad": 8, "label": "..."}, ...]"""


def fmt_float(x: float):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.12g}")


def normalize(obj):
    """Round floats to 12 significant digits throughout a JSON-like object."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if hasattr(obj, "item"):
        return normalize(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(normalize(obj), indent=2, allow_nan=False) + "\n"


def _csv_cell(x) -> str:
    if isinstance(x, float):
        v = fmt_float(x)
        return v if isinstance(v, str) else f"{x:.12g}"
    return str(x)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([_csv_cell(x) for x in r])
    return buf.getvalue()


class UsageError(QamodError):
    def __init__(self, message: str, schema: str = ""):
        super().__init__(message)
        self.schema = schema


def _read_json(path: str, schema: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}", schema) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}", schema) from None


def _scene(path: str) -> geometry.SceneSpec:
    try:
        return geometry.scene_from_dict(_read_json(path, SCENE_SCHEMA))
    except geometry.SceneError as exc:
        raise UsageError(f"{path}: {exc}", SCENE_SCHEMA) from None


# ---------------------------------------------------------------------------
# Subcommands; each returns (payload, ok, failure messages, csv text or None)
# ---------------------------------------------------------------------------


def cmd_width(args):
    scene = _scene(args.scene)
    grid = geometry.rasterize(scene, args.resolution, args.coords)
    f = laplace.solve_potential(grid, args.source, args.sink, args.tol)
    out = {
        "label": scene.label,
        "source": f.source_id,
        "sink": f.sink_id,
        "width": f.energy,
        "modulus": moduli.modulus(f.energy),
        "grid": {"resolution": grid.resolution, "coords": grid.coords, "shape": list(grid.shape), "counts": grid.counts()},
    }
    if args.diagnostics:
        out["diagnostics"] = f.diagnostics()
    return out, True, [], None


def cmd_xyz(args):
    scene = _scene(args.scene)
    rep = moduli.qa_report(scene, args.resolution, args.tol, args.threads, args.threshold, args.diagnostics)
    fails = rep.failures()
    return rep.to_dict(), not fails, fails, rows_to_csv(rep.csv_rows())


def cmd_collar(args):
    scene = _scene(args.scene)
    rep = moduli.collar_check(scene, args.resolution, args.tol, args.threads)
    fails = [] if rep.verdict else [f"xi <= 1/eta_min violated: xi = {rep.xi:.12g}, 1/eta_min = {rep.xi_bound:.12g}"]
    rows = [["island", "eta_j", "Y_j"]] + [[j, e, y] for j, (e, y) in enumerate(zip(rep.eta_j, rep.Y_j))]
    rows.append(["summary", rep.eta_min, rep.Y])
    return rep.to_dict(), rep.verdict, fails, rows_to_csv(rows)


def cmd_groetzsch(args):
    d = _read_json(args.nest, NEST_SCHEMA)
    if not isinstance(d, dict) or not {"S", "Bprime", "A"} <= d.keys():
        raise UsageError(f"{args.nest}: keys S, Bprime, A required", NEST_SCHEMA)
    shapes = [geometry.shape_from_dict(d[k], k) for k in ("S", "Bprime", "A")]
    rep = moduli.groetzsch_check(*shapes, args.resolution, args.tol, args.threads)
    fails = [] if rep.verdict else [f"W(S,A) <= W(S,B') (+) W(B',A) violated: lhs = {rep.lhs:.12g}, rhs = {rep.rhs:.12g}"]
    rows = [["lhs", "rhs", "outer_width", "inner_width"], [rep.lhs, rep.rhs, rep.outer_width, rep.inner_width]]
    return rep.to_dict(), rep.verdict, fails, rows_to_csv(rows)


def _read_column(path: str) -> list[float]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    vals = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        for cell in row:
            cell = cell.strip()
            if not cell:
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                if lineno == 1 and not vals:
                    continue  # header
                raise UsageError(f"{path}: line {lineno}: not a number: {cell!r}") from None
    return vals


def cmd_laws(args):
    if args.check:
        a, b = (_read_column(p) for p in args.check)
        v = circuit_laws.validate_chain(a, b)
        if not v.valid:
            raise UsageError(f"invalid chain at index {v.index}: {v.reason}")
        res = circuit_laws.arithmetic_bound(a, b)
        out = {"n": len(a), "sum_a": res.sum_a, "sum_b": res.sum_b, "ratio": res.ratio, "bound": circuit_laws.BOUND, "verdict": res.verdict}
        fails = [] if res.verdict else [f"(sum a)^2 <= 4/3 b1 sum b violated: ratio = {res.ratio:.12g}"]
        rows = [["n", "ratio", "verdict"], [len(a), res.ratio, res.verdict]]
        return out, res.verdict, fails, rows_to_csv(rows)
    if args.fuzz < 1:
        raise UsageError("--fuzz must be >= 1")
    res = circuit_laws.fuzz(args.fuzz, args.seed, args.n_max)
    ok = not res.failures
    out = {
        "samples": res.samples,
        "seed": args.seed,
        "n_max": args.n_max,
        "max_ratio": res.max_ratio,
        "argmax_seed": res.argmax_seed,
        "bound": circuit_laws.BOUND,
        "failures": list(res.failures),
        "verdict": ok,
    }
    fails = [f"bound violated for seeds {list(res.failures)[:10]}"] if not ok else []
    rows = [["samples", "max_ratio", "argmax_seed", "failures"], [res.samples, res.max_ratio, res.argmax_seed, len(res.failures)]]
    return out, ok, fails, rows_to_csv(rows)


def cmd_covering(args):
    try:
        spec = covering.covering_from_dict(_read_json(args.spec, COVERING_SCHEMA))
    except covering.CoveringError as exc:
        raise UsageError(f"{args.spec}: {exc}", COVERING_SCHEMA) from None
    kw = dict(tol=args.tol, samples=args.samples, polar_resolution=args.polar_resolution)
    checks = ["bounds", "exact", "lower", "lemma"] if args.check == "all" else [args.check]
    reports = []
    for c in checks:
        if c == "bounds":
            reports.append(covering.verify_transform_bounds(spec.fmap, spec.B, args.resolution, **kw))
        elif c == "exact":
            reports.append(
                covering.verify_exact_transform(spec.fmap, spec.B, args.resolution, allow_branched=args.allow_branched, **kw)
            )
        elif c == "lower":
            reports.append(covering.verify_lower_bound(spec.fmap, spec.B, spec.components, args.resolution, **kw))
        else:
            if spec.Bprime is None:
                raise UsageError(f"{args.spec}: the lemma check needs Bprime", COVERING_SCHEMA)
            idx = 0 if spec.components == "all" else spec.components[0]
            reports.append(
                covering.covering_lemma_experiment(spec.fmap, spec.B, spec.Bprime, idx, args.resolution, epsilon=args.epsilon, **kw)
            )
    fails = []
    for r in reports:
        counts = not isinstance(r, covering.CoveringLemmaReport) or r.in_regime
        if counts and not r.verdict:
            fails.append(f"{r.to_dict()['check']} failed: {_sides(r)}")
    out = {"map": spec.fmap.to_dict(), "reports": [r.to_dict() for r in reports]}
    rows = [["check", "verdict"]] + [[r.to_dict()["check"], r.verdict] for r in reports]
    return out, not fails, fails, rows_to_csv(rows)


def _sides(r) -> str:
    if isinstance(r, covering.TransformBoundsReport):
        return f"mod(U,A) = {r.mod_U_A:.12g}, mod(V,B) = {r.mod_V_B:.12g}, D*mod(U,A) = {r.D * r.mod_U_A:.12g}"
    if isinstance(r, covering.ExactTransformReport):
        return f"mod(V,B) = {r.mod_V_B:.12g}, D*mod(U,A) = {r.D * r.mod_U_A:.12g}"
    if isinstance(r, covering.LowerBoundReport):
        return f"mod(V,B) = {r.mod_V_B:.12g}, d*mod(U,A) = {r.d * r.mod_U_A:.12g}"
    return f"mod(V,B) = {r.mod_V_B:.12g}, bound = {r.bound:.12g}"


def _families(args) -> list[experiments.HalfplaneFamily]:
    if args.sweep == "default":
        return experiments.default_sweep_families(args.W, args.pad)
    data = _read_json(args.sweep, SWEEP_SCHEMA)
    if not isinstance(data, list) or not data:
        raise UsageError(f"{args.sweep}: expected a non-empty list of families", SWEEP_SCHEMA)
    fams = []
    for i, d in enumerate(data):
        if not isinstance(d, dict) or "a" not in d:
            raise UsageError(f"{args.sweep}: family {i}: missing 'a'", SWEEP_SCHEMA)
        try:
            fams.append(experiments.HalfplaneFamily(tuple(d["a"]), d.get("W", args.W), d.get("pad", args.pad), label=d.get("label", "")))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{args.sweep}: family {i}: {exc}", SWEEP_SCHEMA) from None
    return fams


def cmd_halfplane(args):
    if args.sweep:
        table = experiments.qa_ratio_sweep(_families(args), args.resolution, args.tol, args.threads, args.threshold)
        fails = [f"{r.label}: ratio {r.ratio:.12g} > {table.limit:.12g}" for r in table.violations]
        return table.to_dict(), table.verdict, fails, table.to_csv(_csv_cell)
    if not args.a:
        raise UsageError("halfplane needs --a heights or --sweep")
    fam = experiments.HalfplaneFamily(tuple(args.a), args.W, args.pad)
    pred = experiments.halfplane_predicted(fam)
    out = {
        "label": fam.label,
        "a": list(fam.a),
        "W": fam.W,
        "pad": fam.pad,
        "b": list(pred.b),
        "predicted": {"X": pred.X, "Y": pred.Y, "Z": pred.Z, "ratio": pred.ratio},
    }
    rows = [["quantity", "predicted", "measured"]]
    fails = []
    if args.predicted_only:
        rows += [[k, getattr(pred, k), ""] for k in ("X", "Y", "Z")] + [["ratio", pred.ratio, ""]]
    else:
        rep = experiments.halfplane_measured(fam, args.resolution, args.tol, args.threads, args.threshold)
        out["measured"] = rep.to_dict()
        fails = rep.failures()
        rows += [[k, getattr(pred, k), getattr(rep, k)] for k in ("X", "Y", "Z")] + [["ratio", pred.ratio, rep.ratio_qa]]
    return out, not fails, fails, rows_to_csv(rows)


def cmd_converge(args):
    scene = _scene(args.scene)
    t = experiments.convergence_study(scene, args.resolutions, args.tol, args.quantity, args.threads)
    rows = [["resolution", args.quantity]] + [[r, v] for r, v in zip(t.resolutions, t.values)]
    rows.append(["extrapolated", t.extrapolated])
    return t.to_dict(), True, [], rows_to_csv(rows)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
        return v

    return conv


def _tol(text):
    v = _positive(float)(text)
    if v > MAX_TOL:
        raise argparse.ArgumentTypeError(f"tol must be <= {MAX_TOL:g}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qamod", description="Conformal moduli of islands via discrete harmonic measure.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, resolution=True, default_res=None):
        if resolution:
            sp.add_argument("--resolution", type=_positive(float), required=default_res is None, default=default_res,
                            help="grid cells per unit length")
        sp.add_argument("--tol", type=_tol, default=laplace.DEFAULT_TOL, help="relative CG residual (default 1e-10)")
        sp.add_argument("--threads", type=_positive(int), default=1, help="parallel independent solves")
        sp.add_argument("--csv", action="store_true", help="emit CSV instead of JSON")
        sp.add_argument("--diagnostics", action="store_true", help="include per-solve residual records")
        sp.add_argument("--threshold", type=float, default=moduli.DEFAULT_QA_THRESHOLD,
                        help="Y above which the QA law is asserted (default 10)")
        sp.add_argument("-o", "--output", help="write to this file instead of stdout")

    sp = sub.add_parser("width", help="extremal width between two node sets")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--source", default="islands", help="selector: outer, islands, island:K, left, right, top, bottom; join with +")
    sp.add_argument("--sink", default="outer")
    sp.add_argument("--coords", choices=["cartesian", "logpolar", "auto"], default="cartesian")
    common(sp)

    sp = sub.add_parser("xyz", help="X, Y, Z moduli and QA verdicts")
    sp.add_argument("--scene", required=True)
    common(sp)

    sp = sub.add_parser("collar", help="collar ratios eta_j and the implied separation")
    sp.add_argument("--scene", required=True)
    common(sp)

    sp = sub.add_parser("groetzsch", help="series law on a nest S > B' > A")
    sp.add_argument("--nest", required=True)
    common(sp)

    sp = sub.add_parser("laws", help="chain inequality: check a chain or fuzz random ones")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--check", nargs=2, metavar=("A_CSV", "B_CSV"))
    g.add_argument("--fuzz", type=int, metavar="COUNT")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-max", type=_positive(int), default=64)
    common(sp, resolution=False)

    sp = sub.add_parser("covering", help="modulus transformation checks for an explicit covering")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--check", choices=["bounds", "exact", "lower", "lemma", "all"], default="bounds")
    sp.add_argument("--allow-branched", action="store_true")
    sp.add_argument("--samples", type=_positive(int), default=covering.DEFAULT_SAMPLES)
    sp.add_argument("--polar-resolution", type=_positive(float), default=covering.DEFAULT_POLAR_RESOLUTION)
    sp.add_argument("--epsilon", type=_positive(float), default=2.0, help="smallness threshold on mod(U - Lambda)")
    common(sp)

    sp = sub.add_parser("halfplane", help="half-plane segment family: predicted, measured or sweep")
    sp.add_argument("--a", type=_positive(float), nargs="+", help="strictly decreasing reciprocals of heights")
    sp.add_argument("--W", type=_positive(float), default=32.0)
    sp.add_argument("--pad", type=_positive(float), default=8.0)
    sp.add_argument("--sweep", help="family list file, or 'default' for the built-in 24 families")
    sp.add_argument("--predicted-only", action="store_true")
    common(sp, default_res=8.0)

    sp = sub.add_parser("converge", help="resolution ladder with Richardson extrapolation")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--resolutions", type=_positive(float), nargs="+", required=True)
    sp.add_argument("--quantity", choices=["X", "Y", "Z", "ratio_qa"], default="X")
    common(sp, resolution=False)
    return p


COMMANDS = {
    "width": cmd_width,
    "xyz": cmd_xyz,
    "collar": cmd_collar,
    "groetzsch": cmd_groetzsch,
    "laws": cmd_laws,
    "covering": cmd_covering,
    "halfplane": cmd_halfplane,
    "converge": cmd_converge,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        out, ok, fails, csv_text = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qamod {args.command}: error: {exc}", file=sys.stderr)
        if exc.schema:
            print(exc.schema, file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"qamod {args.command}: solver error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (QamodError, ValueError) as exc:
        print(f"qamod {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = csv_text if args.csv and csv_text is not None else dumps(out)
    if args.output:
        try:
            Path(args.output).write_text(text)
        except OSError as exc:
            print(f"qamod: cannot write {args.output}: {exc.strerror}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(text)
    for f in fails:
        print(f"verdict failure: {f}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
