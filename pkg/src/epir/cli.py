"""Operator entry point: analytic sweeps, simulations, oracles, demos, serving.

Every tabular emitter writes the same CSV schema so downstream tooling
(including the plotting frontend) parses one format. Output is a pure
function of flags and seed: same invocation, byte-identical bytes.

Exit codes: 0 success, 1 assertion failure, 2 usage error, 3 capability
(instance too large for exact enumeration).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, game, mechanisms as m, service
from .core import Database, ParameterError, RngStream, SystemParams

CSV_HEADER = (
    "mechanism,n,d,d_a,u,param,param_value,epsilon,delta,cm_records,cp_accesses,"
    "eps_empirical,eps_ci_low,eps_ci_high,verdict"
)

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_USAGE = 2
EXIT_CAPABILITY = 3


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        if value == int(value) and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    return str(value)


def csv_row(
    mechanism: str,
    n: int,
    d: int,
    d_a: int,
    u: int,
    param: str,
    param_value,
    epsilon,
    delta,
    cm_records,
    cp_accesses,
    eps_empirical=None,
    eps_ci_low=None,
    eps_ci_high=None,
    verdict: str = "",
) -> str:
    cells = [
        mechanism,
        _fmt(n),
        _fmt(d),
        _fmt(d_a),
        _fmt(u),
        param,
        _fmt(param_value),
        _fmt(epsilon),
        _fmt(delta),
        _fmt(cm_records),
        _fmt(cp_accesses),
        _fmt(eps_empirical),
        _fmt(eps_ci_low),
        _fmt(eps_ci_high),
        verdict,
    ]
    return ",".join(cells)


def validate_csv(text: str) -> list[dict[str, str]]:
    """Parse emitter output, enforcing the fixed schema; used by the tests."""
    lines = [line for line in text.splitlines() if line]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"bad CSV header: {lines[0] if lines else '<empty>'}")
    names = CSV_HEADER.split(",")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(names):
            raise ValueError(f"bad CSV row width: {line}")
        row = dict(zip(names, cells))
        for col in ("epsilon", "delta", "cm_records", "cp_accesses"):
            if row[col]:
                float(row[col])  # must parse
        rows.append(row)
    return rows


def _write_output(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _default_seed() -> int:
    return int(os.environ.get("EPIR_SEED", "0"))


# --- mechanism construction from flags ---------------------------------------

MECH_NAMES = (
    "naive-dummy",
    "naive-anon",
    "direct",
    "bundled",
    "separated",
    "sparse",
    "anon-sparse",
    "subset",
    "chor",
)


def build_mechanism(name: str, p=None, theta=None, t=None) -> m.MechanismParams:
    if name == "naive-dummy":
        return m.NaiveDummy(_require_int(p, "--p"))
    if name == "naive-anon":
        return m.NaiveAnon()
    if name == "direct":
        return m.Direct(_require_int(p, "--p"))
    if name == "bundled":
        return m.BundledAnon(_require_int(p, "--p"))
    if name == "separated":
        return m.SeparatedAnon(_require_int(p, "--p"))
    if name == "sparse":
        return m.Sparse(_require_float(theta, "--theta"))
    if name == "anon-sparse":
        return m.AnonSparse(_require_float(theta, "--theta"))
    if name == "subset":
        return m.Subset(_require_int(t, "--t"))
    if name == "chor":
        return m.Chor()
    raise ParameterError(f"unknown mechanism {name!r}")


def _require_int(value, flag: str) -> int:
    if value is None:
        raise ParameterError(f"mechanism requires {flag}")
    return int(float(value))


def _require_float(value, flag: str) -> float:
    if value is None:
        raise ParameterError(f"mechanism requires {flag}")
    return float(value)


def analytic_bound(name: str, n: int, d: int, d_a: int, u: int, value: float) -> analysis.PrivacyBound:
    """Bound for one sweep point; value is the mechanism's own parameter."""
    if name == "direct":
        return analysis.eps_direct(n, d, d_a, int(value))
    if name in ("bundled", "separated"):
        # the bundled bound is also an upper bound for separated dispatch
        return analysis.eps_bundled(n, d, d_a, int(value), u)
    if name == "sparse":
        return analysis.eps_sparse(value, d, d_a)
    if name == "anon-sparse":
        return analysis.eps_anon_sparse(value, d, d_a, u)
    if name == "subset":
        return analysis.delta_subset(d, d_a, int(value))
    if name == "chor":
        return analysis.PrivacyBound(0.0, 0.0)
    if name == "naive-dummy":
        return analysis.PrivacyBound(0.0 if int(value) == n else math.inf)
    if name == "naive-anon":
        return analysis.PrivacyBound(math.inf)
    raise ParameterError(f"unknown mechanism {name!r}")


def _mech_for_cost(name: str, value: float) -> m.MechanismParams:
    if name in ("direct", "bundled", "separated", "naive-dummy"):
        return build_mechanism(name, p=int(value))
    if name in ("sparse", "anon-sparse"):
        return build_mechanism(name, theta=value)
    if name == "subset":
        return build_mechanism(name, t=int(value))
    return build_mechanism(name)


# --- sweeps -------------------------------------------------------------------


def parse_sweep(spec: str, d: int, n: int) -> tuple[str, list[float]]:
    """Parse 'param=start:stop:steps[log|lin]' into a validated grid.

    Default spacing is logarithmic for p and t, linear for theta. Integer
    parameters are rounded to their validity lattice (p to multiples of d)
    and deduplicated, preserving order.
    """
    try:
        param, rest = spec.split("=", 1)
        fields = rest.split(":")
        start, stop = float(fields[0]), float(fields[1])
        steps_txt = fields[2] if len(fields) > 2 else "50"
    except (ValueError, IndexError) as exc:
        raise ParameterError(f"bad sweep spec {spec!r}") from exc
    spacing = None
    if steps_txt.endswith("log"):
        spacing, steps_txt = "log", steps_txt[:-3]
    elif steps_txt.endswith("lin"):
        spacing, steps_txt = "lin", steps_txt[:-3]
    steps = int(float(steps_txt))
    if steps < 1 or start > stop:
        raise ParameterError(f"bad sweep range in {spec!r}")
    param = param.strip()
    if spacing is None:
        spacing = "lin" if param == "theta" else "log"
    if steps == 1:
        raw = np.array([start])
    elif spacing == "log":
        if start <= 0:
            raise ParameterError("log spacing needs a positive start")
        raw = np.geomspace(start, stop, steps)
    else:
        raw = np.linspace(start, stop, steps)

    if param == "p":
        grid, seen = [], set()
        for v in raw:
            pv = max(d, int(round(v / d)) * d)
            pv = min(pv, (n // d) * d)
            if pv > 1 and pv not in seen:
                seen.add(pv)
                grid.append(float(pv))
        return param, grid
    if param == "t":
        grid, seen = [], set()
        for v in raw:
            tv = min(max(1, int(round(v))), d)
            if tv not in seen:
                seen.add(tv)
                grid.append(float(tv))
        return param, grid
    if param == "theta":
        return param, [float(v) for v in raw]
    raise ParameterError(f"unknown sweep parameter {param!r}")


def sweep_rows(
    name: str,
    n: int,
    d: int,
    das: list[int],
    u: int,
    param: str,
    grid: list[float],
    c_acc: float,
    c_prc: float,
) -> list[str]:
    rows = []
    params = SystemParams(n=n, d=d, u=u)
    for d_a in das:
        for value in grid:
            bound = analytic_bound(name, n, d, d_a, u, value)
            cost = analysis.cost_model(_mech_for_cost(name, value), params, c_acc, c_prc)
            rows.append(
                csv_row(
                    name,
                    n,
                    d,
                    d_a,
                    u,
                    param,
                    value,
                    bound.epsilon,
                    bound.delta,
                    cost.cm_records,
                    cost.cp_accesses,
                )
            )
    return rows


def cmd_analyze(args) -> int:
    das = [int(float(x)) for x in args.da.split(",")]
    n, d, u = int(float(args.n)), int(float(args.d)), int(float(args.u))
    param, grid = parse_sweep(args.sweep, d, n)
    rows = sweep_rows(args.mech, n, d, das, u, param, grid, args.c_acc, args.c_prc)
    _write_output("\n".join([CSV_HEADER] + rows) + "\n", args.out)
    return EXIT_OK


# --- figure data ---------------------------------------------------------------

FIG_N = 10**6
FIG_D = 100
FIG_U = 1000
FIG_DAS = [50, 90, 99]


def _fig_p_grid(n: int, d: int, points: int) -> list[float]:
    raw = np.geomspace(d, n, points)
    grid, seen = [], set()
    for v in np.concatenate([raw, [10 * d, float(n)]]):
        pv = max(d, int(round(v / d)) * d)
        pv = min(pv, (n // d) * d)
        if pv > 1 and pv not in seen:
            seen.add(pv)
            grid.append(float(pv))
    return sorted(grid)


def _fig_theta_grid() -> list[float]:
    return [round(0.01 * k, 10) for k in range(1, 51)]


def figure_tables(points: int = 60) -> dict[str, list[str]]:
    """CSV bodies for the six figure files, keyed by figure id."""
    p_grid = _fig_p_grid(FIG_N, FIG_D, points)
    theta_grid = _fig_theta_grid()
    t_grid = [float(t) for t in range(1, FIG_D + 1)]
    tables: dict[str, list[str]] = {}
    tables["fig1"] = sweep_rows("direct", FIG_N, FIG_D, FIG_DAS, 1, "p", p_grid, 1.0, 1.0)
    tables["fig2"] = sweep_rows("bundled", FIG_N, FIG_D, FIG_DAS, FIG_U, "p", p_grid, 1.0, 1.0)
    tables["fig3"] = sweep_rows("sparse", FIG_N, FIG_D, FIG_DAS, 1, "theta", theta_grid, 1.0, 1.0)
    tables["fig4"] = sweep_rows(
        "anon-sparse", FIG_N, FIG_D, FIG_DAS, FIG_U, "theta", theta_grid, 1.0, 1.0
    )
    tables["fig5"] = sweep_rows("subset", FIG_N, FIG_D, FIG_DAS, 1, "t", t_grid, 1.0, 1.0)
    half = [FIG_D // 2]
    no_as = sweep_rows("direct", FIG_N, FIG_D, half, 1, "p", p_grid, 1.0, 1.0) + sweep_rows(
        "sparse", FIG_N, FIG_D, half, 1, "theta", theta_grid, 1.0, 1.0
    )
    with_as = sweep_rows(
        "bundled", FIG_N, FIG_D, half, FIG_U, "p", p_grid, 1.0, 1.0
    ) + sweep_rows("anon-sparse", FIG_N, FIG_D, half, FIG_U, "theta", theta_grid, 1.0, 1.0)
    tables["fig6a"] = no_as
    tables["fig6b"] = no_as
    tables["fig6c"] = with_as
    tables["fig6d"] = with_as
    return tables


def cmd_figures(args) -> int:
    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        probe = outdir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"cannot write to {outdir}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for fig_id, rows in figure_tables(args.points).items():
        (outdir / f"{fig_id}.csv").write_text("\n".join([CSV_HEADER] + rows) + "\n")
    return EXIT_OK


# --- simulation and oracle ------------------------------------------------------


def _game_config(args, mech) -> game.GameConfig:
    n, d, d_a, u = int(float(args.n)), int(float(args.d)), int(float(args.da)), int(float(args.u))
    params = SystemParams(n=n, d=d, d_a=d_a, u=u)
    return game.GameConfig(
        mechanism=mech,
        params=params,
        q_i=args.qi,
        q_j=args.qj,
        q_0=args.q0,
        corrupt_set=frozenset(range(d_a)),
    )


def _mech_param(mech) -> tuple[str, float]:
    if isinstance(mech, (m.Direct, m.BundledAnon, m.SeparatedAnon, m.NaiveDummy)):
        return "p", float(mech.p)
    if isinstance(mech, (m.Sparse, m.AnonSparse)):
        return "theta", mech.theta
    if isinstance(mech, m.Subset):
        return "t", float(mech.t)
    return "", ""  # type: ignore[return-value]


def cmd_simulate(args) -> int:
    mech = build_mechanism(args.mech, p=args.p, theta=args.theta, t=args.t)
    cfg = _game_config(args, mech)
    rng = RngStream(args.seed)
    trials = int(float(args.trials))
    n, d, d_a, u = cfg.params.n, cfg.params.d, cfg.params.d_a, cfg.params.u
    param, value = _mech_param(mech)
    bound = analytic_bound(args.mech, n, d, d_a, u, value if value != "" else 0)
    cost = analysis.cost_model(mech, cfg.params)
    exit_code = EXIT_OK

    if isinstance(mech, (m.Subset, m.Chor)):
        est = game.subset_delta_estimate(cfg, trials, rng)
        sigma = math.sqrt(max(bound.delta * (1 - bound.delta), 1e-12) / trials)
        ok = abs(est - bound.delta) <= 4 * sigma
        verdict = "PASS" if ok else "FAIL"
        if not ok:
            exit_code = EXIT_ASSERTION
        row = csv_row(
            args.mech, n, d, d_a, u, param, value, bound.epsilon, bound.delta,
            cost.cm_records, cost.cp_accesses, est, None, None, verdict,
        )
    else:
        report = game.monte_carlo_estimate(cfg, trials, rng)
        std = report.epsilon_std or 0.0
        if report.zero_support_witness is not None:
            verdict = "NOT-EPS-PRIVATE"
            if not math.isinf(bound.epsilon):
                exit_code = EXIT_ASSERTION
        elif math.isinf(bound.epsilon) or report.epsilon_empirical <= bound.epsilon + 4 * std:
            verdict = "PASS"
        else:
            verdict = "FAIL"
            exit_code = EXIT_ASSERTION
        row = csv_row(
            args.mech, n, d, d_a, u, param, value, bound.epsilon, bound.delta,
            cost.cm_records, cost.cp_accesses,
            report.epsilon_empirical,
            report.epsilon_empirical - 1.96 * std,
            report.epsilon_empirical + 1.96 * std,
            verdict,
        )
    _write_output("\n".join([CSV_HEADER, row]) + "\n", args.out)
    return exit_code


def cmd_oracle(args) -> int:
    mech = build_mechanism(args.mech, p=args.p, theta=args.theta, t=args.t)
    cfg = _game_config(args, mech)
    try:
        report = game.exact_oracle(cfg)
    except game.OracleSizeError as exc:
        print(f"instance too large for exact enumeration: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    n, d, d_a, u = cfg.params.n, cfg.params.d, cfg.params.d_a, cfg.params.u
    param, value = _mech_param(mech)
    bound = analytic_bound(args.mech, n, d, d_a, u, value if value != "" else 0)
    if math.isinf(report.max_ratio):
        verdict = "NOT-EPS-PRIVATE" if math.isinf(bound.epsilon) or bound.delta > 0 else "FAIL"
    else:
        tight = (
            not math.isinf(bound.epsilon)
            and abs(report.max_ratio - math.exp(bound.epsilon)) <= 1e-9 * math.exp(bound.epsilon)
        )
        verdict = "TIGHT" if tight else "LOOSE"
    row = csv_row(
        args.mech, n, d, d_a, u, param, value, bound.epsilon, bound.delta,
        None, None, report.epsilon_empirical, None, None, verdict,
    )
    _write_output("\n".join([CSV_HEADER, row]) + "\n", args.out)
    if args.verbose:
        for key, (pi, pj) in sorted(report.classes.items(), key=str):
            print(f"# class {key}: {pi:.6g} vs {pj:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_demo(args) -> int:
    mech = build_mechanism(args.mech, p=args.p, theta=args.theta, t=args.t)
    n, d = int(float(args.n)), int(float(args.d))
    params = SystemParams(n=n, d=d, b=args.b)
    rng = RngStream(args.seed)
    content = Database.random(n, params.record_bytes, rng.spawn(1)).as_array()
    databases = [Database(content.copy()) for _ in range(d)]
    q = args.q if args.q is not None else int(rng.integers(n))
    plan = mech.generate(q, params, rng)
    if args.endpoints:
        endpoints = []
        for item in args.endpoints.split(","):
            host, _, port = item.rpartition(":")
            endpoints.append((host, int(port)))
        got = service.remote_execute(plan, endpoints)
        # cross-check the reconstruction against a plain fetch of the same
        # record from the first replica
        probe = m.QueryPlan("probe", ((0, m.FetchIndices((q,))),), q, m.PICK_INDEX)
        want = service.remote_execute(probe, endpoints)
        print(f"remote retrieval of record {q} via {len(endpoints)} endpoints")
        if got != want:
            print("FAIL: reconstruction disagrees with a direct fetch", file=sys.stderr)
            return EXIT_ASSERTION
        print("record verified")
        return EXIT_OK
    else:
        before = [db.access_counter for db in databases]
        got = m.execute_plan(plan, databases, rng)
        after = [db.access_counter for db in databases]
        cost = analysis.cost_model(mech, params)
        print(f"mechanism {plan.mechanism}: retrieved record {q} of n={n}, d={d}")
        print(f"per-server accesses: {[a - b for a, b in zip(after, before)]}")
        print(f"cost model expectation: {cost.cp_accesses} accesses total, {cost.cm_records} blocks")
    if got != databases[0].record(q):
        print("FAIL: reconstructed record does not match the database", file=sys.stderr)
        return EXIT_ASSERTION
    print("record verified")
    return EXIT_OK


def cmd_serve(args) -> int:
    db = service.load_record_file(args.records, args.record_size_bits)
    srv = service.serve(db, args.listen)
    print(f"serving {len(db)} records of {db.record_bytes} bytes on {srv.endpoint}")
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        srv.shutdown()
    return EXIT_OK


# --- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epir",
        description="Multi-server relaxed-privacy information retrieval toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_mech_flags(p):
        p.add_argument("--mech", required=True, choices=MECH_NAMES)
        p.add_argument("--p", type=float, default=None, help="request count (dummy mechanisms)")
        p.add_argument("--theta", type=float, default=None, help="Bernoulli density (sparse)")
        p.add_argument("--t", type=float, default=None, help="servers contacted (subset)")

    pa = sub.add_parser("analyze", help="closed-form sweep to CSV")
    pa.add_argument("--mech", required=True, choices=MECH_NAMES)
    pa.add_argument("--n", default="1e6")
    pa.add_argument("--d", required=True)
    pa.add_argument("--da", required=True, help="comma-separated corrupt counts")
    pa.add_argument("--u", default="1")
    pa.add_argument("--sweep", required=True, help="param=start:stop:steps[log|lin]")
    pa.add_argument("--c-acc", type=float, default=1.0)
    pa.add_argument("--c-prc", type=float, default=1.0)
    pa.add_argument("--out", default=None)
    pa.set_defaults(func=cmd_analyze)

    pf = sub.add_parser("figures", help="emit the six figure CSV files")
    pf.add_argument("--out", required=True, help="output directory")
    pf.add_argument("--points", type=int, default=60)
    pf.set_defaults(func=cmd_figures)

    ps = sub.add_parser("simulate", help="Monte-Carlo game estimate to CSV")
    add_mech_flags(ps)
    ps.add_argument("--n", default="16")
    ps.add_argument("--d", default="2")
    ps.add_argument("--da", default="1")
    ps.add_argument("--u", default="1")
    ps.add_argument("--qi", type=int, default=0)
    ps.add_argument("--qj", type=int, default=1)
    ps.add_argument("--q0", type=int, default=2)
    ps.add_argument("--trials", default="100000")
    ps.add_argument("--seed", type=int, default=_default_seed())
    ps.add_argument("--out", default=None)
    ps.set_defaults(func=cmd_simulate)

    po = sub.add_parser("oracle", help="exact enumeration report")
    add_mech_flags(po)
    po.add_argument("--n", default="8")
    po.add_argument("--d", default="2")
    po.add_argument("--da", default="1")
    po.add_argument("--u", default="1")
    po.add_argument("--qi", type=int, default=0)
    po.add_argument("--qj", type=int, default=1)
    po.add_argument("--q0", type=int, default=2)
    po.add_argument("--verbose", action="store_true")
    po.add_argument("--out", default=None)
    po.set_defaults(func=cmd_oracle)

    pd = sub.add_parser("demo", help="one full retrieval with cost accounting")
    add_mech_flags(pd)
    pd.add_argument("--n", default="64")
    pd.add_argument("--d", default="3")
    pd.add_argument("--b", type=int, default=64)
    pd.add_argument("--q", type=int, default=None)
    pd.add_argument("--seed", type=int, default=_default_seed())
    pd.add_argument("--endpoints", default=None, help="comma-separated host:port per server")
    pd.set_defaults(func=cmd_demo)

    pv = sub.add_parser("serve", help="run one database server")
    pv.add_argument("--listen", required=True, help="host:port")
    pv.add_argument("--records", required=True, help="raw record file")
    pv.add_argument("--record-size-bits", type=int, required=True)
    pv.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except game.OracleSizeError as exc:
        print(f"instance too large: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY


if __name__ == "__main__":
    sys.exit(main())
