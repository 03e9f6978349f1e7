"""Command-line front end.

Every subcommand writes <out>/<command>.json (and <command>.csv with
--format csv|both) and exits 0 when every asserted inequality holds, 1 when
one fails (named on stderr), 2 on I/O or usage errors.
"""

from __future__ import annotations

import os

_threads = os.environ.get("COARSELAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fixtures import FixtureError, generate, parse_fixture
from .metric import FiniteMetricSpace, MetricError

SIG_DIGITS = 12


def round_floats(obj):
    """Fix every float to 12 significant digits so reports are byte-stable."""
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if not math.isfinite(x) else float(f"{x:.{SIG_DIGITS}g}")
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return round_floats(obj.tolist())
    return obj


def dumps(report: dict) -> str:
    return json.dumps(round_floats(report), indent=2, sort_keys=True) + "\n"


def scalar_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("key", "value"))
    for k, v in sorted(round_floats(report).items()):
        if isinstance(v, (int, float, str, bool)) or v is None:
            w.writerow((k, "" if v is None else v))
    return buf.getvalue()


def rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{x:.{SIG_DIGITS}g}" if isinstance(x, float) else ("" if x is None else x) for x in r])
    return buf.getvalue()


class Failure(Exception):
    pass


def parse_window(text: str) -> tuple:
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be a:b, got {text!r}") from None
    return a, b


def load_space(args) -> FiniteMetricSpace:
    if args.input:
        return FiniteMetricSpace.load(args.input)
    if not args.fixture:
        raise FixtureError("give --fixture or --input")
    return generate(parse_fixture(args.fixture, args.seed))


# --- subcommands -------------------------------------------------------------
# each returns (report dict, csv text or None, list of failing inequalities)


def cmd_generate(space, args):
    return {"n": space.n, "diam": space.diam, "fixture": args.fixture, "space": space.to_json()}, None, []


def cmd_invariants(space, args):
    from .cdim import greedy_net, voronoi_cells
    from .coverings import Covering, fatten, invariants_report, lebesgue
    from .polyhedra import barycentric_coordinates, barycentric_lipschitz_bound, lipschitz_certificate

    if args.covering:
        data = json.loads(Path(args.covering).read_text())
        cov = Covering.from_json(space, data)
    else:
        s = args.scale if args.scale else space.diam / 4
        cells = voronoi_cells(space, greedy_net(space, s))
        cov = fatten(Covering(space, tuple(cells)), s / 4)
    rep = invariants_report(cov)
    fails = []
    if lebesgue(cov) > 0:
        bound = barycentric_lipschitz_bound(cov)
        lip = lipschitz_certificate(barycentric_coordinates(cov), space, bound)
        rep["barycentric_lipschitz"] = lip.to_json()
        if not lip.passed:
            fails.append(f"barycentric Lipschitz {lip.measured:.6g} > (m+2)^2/L = {bound:.6g}")
    rep["covering"] = cov.to_json()
    return rep, None, fails


def cmd_cdim(space, args):
    from .cdim import ScaleWindow, estimate_cdim

    a, b = args.window if args.window else (space.diam / 64, space.diam / 4)
    rep = estimate_cdim(space, ScaleWindow(a, b), definitions=args.definitions)
    fails = [] if rep.conclusive else ["estimate inconclusive: no plateau of multiplicity across the window"]
    return rep.to_json(), rep.to_csv(), fails


def cmd_cone(space, args):
    from .hypcone import HyperbolicCone, _dist_direct, _dist_log, chord_length, chord_two_term, level_space

    cone = HyperbolicCone(space)
    levels = [float(x) for x in args.levels.split(",")]
    rows, fails = [], []
    for t in levels:
        L = level_space(cone, t)
        pos = L.dist[L.dist > 0]
        rows.append((t, float(pos.min()) if pos.size else 0.0, L.diam))
    # log branch against direct formula across the switch, on the base's own angles
    ang = np.unique(cone.angles[cone.angles > 0])
    band = np.linspace(19.5, 20.5, 5)
    t1, t2, al = np.meshgrid(band, band, ang, indexing="ij")
    direct, logd = _dist_direct(t1, t2, al), _dist_log(t1, t2, al)
    crossover = float(np.max(np.abs(direct - logd) / direct)) if ang.size else 0.0
    small = [(t, a) for t in (0.01, 0.1, 1.0, 3.0) for a in ang if math.sinh(t) ** 2 * a**2 < 0.01]
    chord_gap = max((abs(chord_length(t, a) - chord_two_term(t, a)) for t, a in small), default=0.0)
    if crossover > 1e-9:
        fails.append(f"log-domain distance differs from direct by {crossover:.3g} > 1e-9 on the crossover band")
    rep = {"mu": cone.mu, "levels": [{"t": t, "min_dist": lo, "diam": hi} for t, lo, hi in rows],
           "crossover_rel_error": crossover, "small_angle_pairs": len(small),
           "two_term_gap": chord_gap}
    return rep, rows_csv(("t", "min_dist", "diam"), rows), fails


def cmd_delta(space, args):
    from .hypcone import HyperbolicCone, TreeError, check_tree, cone_delta, delta_certificate

    o = args.base
    if not 0 <= o < space.n:
        raise FixtureError("base point out of range")
    delta = delta_certificate(space, o)
    rep = {"base": o, "delta": delta, "n": space.n}
    fails = []
    try:
        check_tree(space)
        rep["tree"] = True
        if delta != 0:
            fails.append(f"tree metric has delta = {delta:.6g} > 0")
    except TreeError:
        rep["tree"] = False
    if args.cone:
        rep["cone_delta"] = cone_delta(HyperbolicCone(space), args.T)
    return rep, None, fails


def cmd_visual(space, args):
    from .hypcone import HyperbolicCone, visual_sandwich_check

    rep = visual_sandwich_check(HyperbolicCone(space), T=args.T)
    fails = [] if rep.passed else [f"visual sandwich fails on {len(rep.violations)} pairs"]
    return rep.to_json(), None, fails


def cmd_qs(space, args):
    from .qsmaps import certify_eta, fit_eta, snowflake_map

    f = snowflake_map(space, args.p)
    eta = fit_eta(f)
    fwd = certify_eta(f, eta)
    inv = certify_eta(f.inverse(), eta.inverse_modulus())
    fails = []
    if not fwd.passed:
        fails.append(f"fitted modulus fails on triple {fwd.failure}")
    if not inv.passed:
        fails.append(f"inverse modulus fails on triple {inv.failure}")
    return {"p": args.p, "eta": eta.to_json(), "forward": fwd.to_json(), "inverse": inv.to_json()}, None, fails


def cmd_witness(space, args):
    from .witness import run_witness

    rep = run_witness(space, args.m, args.lam, K=args.depth, seed=args.seed)
    header = ("k", "t", "tau", "saturated", "members", "mesh", "lebesgue", "level_mesh",
              "lip_band", "lip_frozen", "preimage_max")
    rows = [tuple(lv[h] for h in header) for lv in rep.per_level]
    return rep.to_json(), rows_csv(header, rows), rep.failures()


COMMANDS = {
    "generate": cmd_generate,
    "invariants": cmd_invariants,
    "cdim": cmd_cdim,
    "cone": cmd_cone,
    "delta": cmd_delta,
    "visual": cmd_visual,
    "qs": cmd_qs,
    "witness": cmd_witness,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fixture", help="fixture string, e.g. circle:256 or tree:star3")
    common.add_argument("--input", help="space JSON written by generate")
    common.add_argument("--out", default=".", help="report directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "csv", "both"), default="json")

    p = argparse.ArgumentParser(prog="coarselab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common])
    s = sub.add_parser("invariants", parents=[common])
    s.add_argument("--covering", help="covering JSON with a members list")
    s.add_argument("--scale", type=float)
    s = sub.add_parser("cdim", parents=[common])
    s.add_argument("--window", type=parse_window)
    s.add_argument("--definitions", action="store_true", help="also run the colored and multiplicity routes")
    s = sub.add_parser("cone", parents=[common])
    s.add_argument("--levels", default="0.5,2,10,25")
    s = sub.add_parser("delta", parents=[common])
    s.add_argument("--base", type=int, default=0)
    s.add_argument("--cone", action="store_true", help="also certify the cone over the space")
    s.add_argument("--T", type=float, default=12.0)
    s = sub.add_parser("visual", parents=[common])
    s.add_argument("--T", type=float, default=30.0)
    s = sub.add_parser("qs", parents=[common])
    s.add_argument("--p", type=float, default=0.5, help="snowflake exponent")
    s = sub.add_parser("witness", parents=[common])
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--lambda", dest="lam", type=float, default=4.5)
    s.add_argument("--depth", type=int, default=6)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        space = load_space(args)
    except (FixtureError, MetricError, TypeError, ValueError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 2
    try:
        report, table, fails = COMMANDS[args.command](space, args)
    except (OSError, json.JSONDecodeError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 2
    except (FixtureError, MetricError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        # schedule and covering violations name the failing clause
        report, table, fails = {"error": str(e)}, None, [str(e)]
    report = dict(report, command=args.command, passed=not fails, failures=fails)
    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.format in ("json", "both"):
            (out / f"{args.command}.json").write_text(dumps(report))
        if args.format in ("csv", "both"):
            (out / f"{args.command}.csv").write_text(table if table is not None else scalar_csv(report))
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 2
    for f in fails:
        print(f"FAIL: {f}", file=sys.stderr)
    return 1 if fails else 0


if __name__ == "__main__":
    sys.exit(main())
