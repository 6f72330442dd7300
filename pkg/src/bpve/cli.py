"""Command-line front end.

    bpve exact {dist,conditional,moments,dtable} ...
    bpve simulate ...
    bpve verify {classify,expected-count,limit-law,identities,combinatorics} ...
    bpve replay MANIFEST

Every command writes its CSV/JSON outputs plus ``<name>.manifest.json`` to
the output directory (``--out-dir``, else $BPVE_OUT_DIR, else the working
directory) and echoes the manifest on stdout.  Exit codes: 0 success,
1 failed check, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .analysis import classify, expected_count_profile, limit_law_check
from .combinatorics import composition_count, compositions, identity_l2, lemsa_sum
from .environment import EnvSpecError, Explicit, Homogeneous, PolyCritical, env_from_file, env_from_json
from .exact import DTable, conditional_distribution, level_pmf, visit_count_moments
from .simulate import SimulationConfig, run_ensemble

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _fmt(x) -> str:
    return format(float(x), ".17g") if isinstance(x, float) else str(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _pos_int(text: str) -> int:
    v = _nonneg_int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(float(t)) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _env_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("environment")
    g.add_argument("--env", help="inline JSON, or a kind name: homogeneous | poly | explicit")
    g.add_argument("--env-file", help="JSON file describing the environment")
    g.add_argument("--B", type=float, help="B for --env poly")
    g.add_argument("--i0", type=int, help="i0 for --env poly")
    g.add_argument("--p", type=float, help="p for --env homogeneous (default 0.5)")
    g.add_argument("--ps", help="comma-separated p_1..p_L for --env explicit")
    g.add_argument("--tail", type=float, help="tail probability for --env explicit (default 0.5)")


def _common_flags(p: argparse.ArgumentParser, seed: bool = False, workers: bool = False) -> None:
    p.add_argument("--out-dir", help="output directory (default $BPVE_OUT_DIR or .)")
    if seed:
        p.add_argument("--seed", type=_nonneg_int, default=0)
    if workers:
        p.add_argument("--workers", type=_pos_int, default=1)


def resolve_env(args):
    if args.env_file:
        return env_from_file(args.env_file)
    text = (args.env or "homogeneous").strip()
    if text.startswith("{"):
        return env_from_json(text)
    kind = text.lower()
    if kind in ("homogeneous", "homog"):
        return Homogeneous(0.5 if args.p is None else args.p)
    if kind in ("poly", "poly_critical", "polycritical"):
        if args.B is None:
            raise EnvSpecError("B", "--B is required with --env poly")
        return PolyCritical(args.B, args.i0)
    if kind == "explicit":
        if not args.ps:
            raise EnvSpecError("ps", "--ps is required with --env explicit")
        try:
            ps = [float(t) for t in args.ps.split(",")]
        except ValueError:
            raise EnvSpecError("ps", f"expected comma-separated numbers, got {args.ps!r}") from None
        return Explicit(ps, 0.5 if args.tail is None else args.tail)
    raise EnvSpecError("kind", f"unknown environment kind {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bpve", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"bpve {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("exact", help="exact distributions, moments and D-tables")
    exs = ex.add_subparsers(dest="what", required=True)
    p = exs.add_parser("dist", help="P(Z_n = a) for a = 0..a_max")
    p.add_argument("--n", type=_pos_int, required=True)
    p.add_argument("--a-max", type=_nonneg_int, default=10)
    p = exs.add_parser("conditional", help="P(Z_{k+n} = j | Z_k = a) for j = 0..j_max")
    p.add_argument("--k", type=_nonneg_int, required=True)
    p.add_argument("--n", type=_pos_int, required=True)
    p.add_argument("--a", type=_nonneg_int, required=True)
    p.add_argument("--j-max", type=_nonneg_int)
    p = exs.add_parser("moments", help="E|C ∩ [1,n]|^i for i = 1..k")
    p.add_argument("--n", type=_pos_int, required=True)
    p.add_argument("--a", type=_nonneg_int, required=True)
    p.add_argument("--k", type=_pos_int, default=1)
    p = exs.add_parser("dtable", help="D(1..n)")
    p.add_argument("--n", type=_pos_int, required=True)
    for p in exs.choices.values():
        _env_flags(p)
        _common_flags(p)

    p = sub.add_parser("simulate", help="Monte Carlo ensemble of level visits")
    _env_flags(p)
    _common_flags(p, seed=True, workers=True)
    p.add_argument("--n", type=_pos_int, required=True)
    p.add_argument("--a", type=_nonneg_int, required=True)
    p.add_argument("--reps", type=_pos_int, required=True)
    p.add_argument("--cap", type=_pos_int, default=10**9, help="population cap")
    p.add_argument("--record-times", action="store_true")

    ve = sub.add_parser("verify", help="run a verification suite")
    ves = ve.add_subparsers(dest="what", required=True)
    p = ves.add_parser("classify", help="finite / infinite / indeterminate verdict")
    p.add_argument("--horizon", type=_pos_int, default=100_000)
    p = ves.add_parser("expected-count", help="exact E|C ∩ [1,n]| against its prediction")
    p.add_argument("--a", type=_nonneg_int, default=0)
    p.add_argument("--n-grid", type=_int_list, default=[1000, 10000, 100000, 1000000])
    p = ves.add_parser("limit-law", help="|C ∩ [1,n]|/log n against Exp(1)")
    p.add_argument("--a", type=_nonneg_int, default=0)
    p.add_argument("--n-grid", type=_int_list, default=[1000, 10000, 100000])
    p.add_argument("--reps", type=_pos_int, default=2000)
    p = ves.add_parser("identities", help="alternating factorial identity and composition counts")
    p.add_argument("--max-a", type=_nonneg_int, default=50)
    p = ves.add_parser("combinatorics", help="composition enumeration and reciprocal-gap sums")
    p.add_argument("--max-a", type=_pos_int, default=12)
    p.add_argument("--n-grid", type=_int_list, default=[1000, 1000000])
    p.add_argument("--l", type=_pos_int, default=1)
    for name, p in ves.choices.items():
        if name in ("classify", "expected-count", "limit-law"):
            _env_flags(p)
        _common_flags(p, seed=name == "limit-law", workers=name == "limit-law")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", help="write outputs here instead of the recorded directory")
    return ap


def _out_dir(args) -> Path:
    d = Path(args.out_dir or os.environ.get("BPVE_OUT_DIR") or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_exact(args, out: Path):
    env = resolve_env(args)
    table = DTable(env)
    cfg = {"env": env.to_dict()}
    if args.what == "dist":
        pmf = level_pmf(table, args.n, args.a_max)
        path = out / "dist.csv"
        _write_csv(path, ["n", "a", "probability"], [(args.n, a, float(v)) for a, v in enumerate(pmf)])
        cfg.update(n=args.n, a_max=args.a_max)
    elif args.what == "conditional":
        ker = conditional_distribution(table, args.k, args.n, args.a, args.j_max)
        path = out / "conditional.csv"
        _write_csv(path, ["j", "probability"], [(j, float(v)) for j, v in enumerate(ker.coefficients)])
        cfg.update(k=args.k, n=args.n, a=args.a, j_max=len(ker.coefficients) - 1, tail_mass=ker.tail_mass)
    elif args.what == "moments":
        moms = visit_count_moments(table, args.n, args.a, args.k)
        logn = math.log(args.n)
        path = out / "moments.csv"
        rows = [(i, float(v), float(v) / logn**i if args.n > 1 else math.nan) for i, v in enumerate(moms, 1)]
        _write_csv(path, ["k", "moment", "moment_over_logn_k"], rows)
        cfg.update(n=args.n, a=args.a, k=args.k)
    else:
        path = out / "dtable.csv"
        table.write_csv(path, args.n)
        cfg.update(n=args.n)
    return f"exact {args.what}", cfg, [path], EXIT_OK


def cmd_simulate(args, out: Path):
    env = resolve_env(args)
    config = SimulationConfig(env, args.n, args.a, args.reps, args.seed, args.cap, args.record_times)
    result = run_ensemble(config, workers=args.workers)
    summary = dict(result.summary)
    exact = visit_count_moments(DTable(env), args.n, args.a, 1)[0]
    summary["exact_mean_visit_count"] = float(exact)
    se = summary["se_mean_visit_count"]
    summary["mean_z_score"] = (summary["mean_visit_count"] - exact) / se if se else None
    summary["config"] = config.to_dict()
    csv_path, sum_path = out / "ensemble.csv", out / "summary.json"
    result.write_csv(csv_path)
    _write_json(sum_path, summary)
    paths = [csv_path, sum_path]
    if args.record_times:
        times_path = out / "times.csv"
        result.write_times_csv(times_path)
        paths.append(times_path)
    return "simulate", config.to_dict(), paths, EXIT_OK


def cmd_verify(args, out: Path):
    what = args.what
    if what == "classify":
        env = resolve_env(args)
        verdict = classify(env, args.horizon)
        path = out / "classify.json"
        _write_json(path, verdict.to_dict())
        return "verify classify", {"env": env.to_dict(), "horizon": args.horizon}, [path], EXIT_OK

    if what == "expected-count":
        env = resolve_env(args)
        prof = expected_count_profile(env, args.a, args.n_grid)
        csv_path, json_path = out / "expected_count.csv", out / "expected_count.json"
        prof.write_csv(csv_path)
        ratios = [r["ratio"] for r in prof.rows]
        ok = True
        if len(ratios) > 1 and prof.B <= 1:
            ok = abs(ratios[-1] - 1) < abs(ratios[0] - 1)
        report = prof.to_dict() | {"improves_along_grid": ok}
        _write_json(json_path, report)
        cfg = {"env": env.to_dict(), "a": args.a, "n_grid": args.n_grid}
        return "verify expected-count", cfg, [csv_path, json_path], EXIT_OK if ok else EXIT_FAIL

    if what == "limit-law":
        env = resolve_env(args)
        config = SimulationConfig(env, max(args.n_grid), args.a, args.reps, args.seed)
        report = limit_law_check(config, args.n_grid, workers=args.workers)
        csv_path, json_path = out / "limit_law.csv", out / "limit_law.json"
        report.write_csv(csv_path)
        _write_json(json_path, report.to_dict() | {"passed": report.passed})
        cfg = config.to_dict() | {"n_grid": args.n_grid}
        return "verify limit-law", cfg, [csv_path, json_path], EXIT_OK if report.passed else EXIT_FAIL

    if what == "identities":
        rows = [(a, identity_l2(a)) for a in range(args.max_a + 1)]
        id_path = out / "identities.csv"
        _write_csv(id_path, ["a", "value", "ok"], [(a, v, int(v == 1)) for a, v in rows])
        comp_path = out / "compositions.csv"
        comp_rows = _composition_rows(min(max(args.max_a, 1), 12))
        _write_csv(comp_path, ["a", "j", "formula", "enumerated", "ok"], comp_rows)
        ok = all(v == 1 for _, v in rows) and all(r[-1] for r in comp_rows)
        return "verify identities", {"max_a": args.max_a}, [id_path, comp_path], EXIT_OK if ok else EXIT_FAIL

    # combinatorics
    comp_path = out / "compositions.csv"
    comp_rows = _composition_rows(args.max_a)
    _write_csv(comp_path, ["a", "j", "formula", "enumerated", "ok"], comp_rows)
    lem_rows, ok = [], all(r[-1] for r in comp_rows)
    for k in (1, 2):
        vals = [lemsa_sum(n, k, args.l) for n in args.n_grid]
        lem_rows += [(k, args.l, n, v) for n, v in zip(args.n_grid, vals)]
        if len(vals) > 1:
            ok = ok and abs(vals[-1] - 1) < abs(vals[0] - 1)
    lem_path = out / "lemsa.csv"
    _write_csv(lem_path, ["k", "l", "n", "value"], lem_rows)
    cfg = {"max_a": args.max_a, "n_grid": args.n_grid, "l": args.l}
    return "verify combinatorics", cfg, [comp_path, lem_path], EXIT_OK if ok else EXIT_FAIL


def _composition_rows(max_a: int):
    rows = []
    for a in range(1, max_a + 1):
        for j in range(1, a + 1):
            f = composition_count(a, j)
            e = sum(1 for _ in compositions(a, j))
            rows.append((a, j, f, e, int(f == e)))
    return rows


def _run(argv, args) -> int:
    if args.command == "replay":
        manifest = json.loads(Path(args.manifest).read_text())
        new_argv = list(manifest["argv"])
        if args.out_dir:
            new_argv += ["--out-dir", args.out_dir]
        return main(new_argv)
    out = _out_dir(args)
    t0 = time.perf_counter()
    handler = {"exact": cmd_exact, "simulate": cmd_simulate, "verify": cmd_verify}[args.command]
    name, cfg, paths, code = handler(args, out)
    manifest = {
        "command": name,
        "argv": list(argv),
        "config": cfg,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "duration_s": time.perf_counter() - t0,
        "outputs": [str(p) for p in paths],
        "exit_code": code,
    }
    man_path = out / f"{paths[0].stem}.manifest.json"
    _write_json(man_path, manifest)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _run(argv, args)
    except EnvSpecError as exc:
        print(f"bpve: invalid environment: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"bpve: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
