"""Command-line driver: ``cgl-dg run|sweep|verify|probe``.

Exit codes: 0 ok, 1 configuration error, 2 blow-up, 3 verification failure.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis, svg
from .assembly import IPVariant
from .evolve import ConfigError, Operators, RunConfig, run
from .mesh import build_unit_square
from .space import DGSpace

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_VERIFY = 0, 1, 2, 3

SWEEP_COLUMNS = analysis.REPORT_COLUMNS + ["status"]
PROBE_COLUMNS = ["variant", "sigma", "n", "min_quotient", "max_continuity", "symmetry_defect", "min_eigen_quotient"]

VERIFY_RATE = 1.7
VERIFY_NORM_RTOL = 0.03

log = logging.getLogger("cgl_dg")


def parse_keyvalue(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("<empty>", f"{source}:{lineno}: missing key")
        if key in out:
            raise ConfigError(key, f"{source}:{lineno}: duplicate key")
        out[key] = value
    return out


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    return RunConfig.from_mapping(parse_keyvalue(text, str(path)))


# --- sweep ----------------------------------------------------------------


@dataclass
class SweepSpec:
    methods: list
    a: list
    b: list
    sigma: list
    n: list
    dt_factor: float = 2.0
    T: float = 1.0
    pair_ab: bool = False
    extra: dict = field(default_factory=dict)

    _LISTS = ("method", "a", "b", "sigma", "n")

    @classmethod
    def from_mapping(cls, data: dict) -> "SweepSpec":
        lists = {}
        for key in cls._LISTS:
            if key not in data:
                raise ConfigError(key, "missing list")
            items = [s.strip() for s in data[key].split(",") if s.strip()]
            if not items:
                raise ConfigError(key, "empty value list")
            lists[key] = items
        try:
            methods = [IPVariant.parse(m) for m in lists["method"]]
        except ValueError as exc:
            raise ConfigError("method", str(exc)) from None
        parsed = {}
        for key, conv in (("a", float), ("b", float), ("sigma", float), ("n", int)):
            try:
                parsed[key] = [conv(v) for v in lists[key]]
            except ValueError:
                raise ConfigError(key, f"cannot parse {lists[key]!r}") from None
        scalars = {}
        for key in ("dt_factor", "T"):
            if key in data:
                try:
                    scalars[key] = float(data[key])
                except ValueError:
                    raise ConfigError(key, f"cannot parse {data[key]!r}") from None
        pair = data.get("pair_ab", "false").strip().lower() in ("1", "true", "yes")
        if pair and len(parsed["a"]) != len(parsed["b"]):
            raise ConfigError("pair_ab", "a and b lists must have equal length")
        extra = {k: v for k, v in data.items() if k not in cls._LISTS + ("dt_factor", "T", "pair_ab")}
        spec = cls(methods, parsed["a"], parsed["b"], parsed["sigma"], parsed["n"], pair_ab=pair, extra=extra,
                   **scalars)
        list(spec.configs())  # validate every cell up front
        return spec

    def groups(self):
        ab = list(zip(self.a, self.b)) if self.pair_ab else list(itertools.product(self.a, self.b))
        for method, (a, b), sigma in itertools.product(self.methods, ab, self.sigma):
            yield method, a, b, sigma

    def configs(self):
        for method, a, b, sigma in self.groups():
            for n in self.n:
                yield RunConfig.from_mapping({**self.extra, "variant": method.name, "a": a, "b": b, "sigma": sigma,
                                              "n": n, "dt_factor": self.dt_factor, "T": self.T})


def _run_cell(cfg: RunConfig):
    try:
        ops = Operators.build(cfg)
        traj = run(cfg, ops=ops)
    except Exception as exc:  # recorded per cell, never aborts the sweep
        return dict(status=f"error: {type(exc).__name__}: {exc}", norms=(math.nan, math.nan), err=math.nan)
    status = "blowup" if traj.blown_up else ("picard_warn" if traj.picard_warnings else "ok")
    if len(traj.records) >= 2:
        norms = analysis.trajectory_spacetime_norms(traj)
    else:
        norms = (traj.records[0].norm_u1, traj.records[0].norm_u2)
    err = math.nan
    if not traj.blown_up:
        e1, e2 = analysis.final_errors(traj, ops.space)
        err = math.hypot(e1, e2)
    return dict(status=status, norms=norms, err=err)


def run_sweep(spec: SweepSpec, jobs: int = 1):
    """Run all cells; results come back in spec order regardless of completion order."""
    configs = list(spec.configs())
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, configs))
    else:
        results = [_run_cell(c) for c in configs]

    reports = []
    k = 0
    for method, a, b, sigma in spec.groups():
        rep = analysis.NormReport(method.name, a, b, sigma)
        statuses = []
        for n in spec.n:
            cfg, res = configs[k], results[k]
            k += 1
            lv = analysis.LevelRecord(cfg.n, cfg.h, cfg.dt, res["norms"][0], res["norms"][1], res["err"],
                                      status="blowup" if res["status"] == "blowup" else "ok")
            rep.levels.append(lv)
            statuses.append(res["status"])
        for prev, cur in zip(rep.levels, rep.levels[1:]):
            if prev.err_l2_final > 0 and cur.err_l2_final > 0:
                cur.rate = math.log(prev.err_l2_final / cur.err_l2_final) / math.log(prev.h / cur.h)
        rep.classification = analysis.classify_stability(rep) if len(rep.levels) >= 2 else "n/a"
        for lv, st in zip(rep.levels, statuses):
            lv.status = st
        reports.append(rep)
    return reports


def sweep_rows(reports):
    for rep in reports:
        for row, lv in zip(rep.rows(), rep.levels):
            row["status"] = lv.status
            yield row


# --- subcommands ----------------------------------------------------------


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _outdir(args)
    traj = run(cfg)
    traj.to_csv(out / "trajectory.csv")
    svg.line_plot(out / "energy.svg", [("energy", traj.times, traj.energies)], title="discrete energy",
                  xlabel="t", ylabel="(|u1|^2 + |u2|^2)/2")
    if len(traj.records) >= 2:
        n1, n2 = analysis.trajectory_spacetime_norms(traj)
    else:
        n1, n2 = traj.records[0].norm_u1, traj.records[0].norm_u2
    status = "blowup" if traj.blown_up else ("picard_warn" if traj.picard_warnings else "ok")
    print(f"norm_u1={n1!r} norm_u2={n2!r} classification_input={status}")
    return EXIT_BLOWUP if traj.blown_up else EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec = SweepSpec.from_mapping(parse_keyvalue(Path(args.spec).read_text(), args.spec))
    except OSError as exc:
        print(f"config error: cannot read {args.spec}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _outdir(args)
    reports = run_sweep(spec, args.jobs)
    analysis.write_rows(out / "sweep.csv", sweep_rows(reports), SWEEP_COLUMNS)
    series = []
    for rep in reports:
        h = [lv.h for lv in rep.levels]
        tag = f"{rep.method} a={rep.a:g} b={rep.b:g} sigma={rep.sigma:g}"
        series.append((tag + " u1", h, [lv.norm_u1 for lv in rep.levels]))
        series.append((tag + " u2", h, [lv.norm_u2 for lv in rep.levels]))
    svg.line_plot(out / "norms_vs_h.svg", series, title="space-time norms", xlabel="h", ylabel="norm",
                  logx=True, logy=True)
    for rep in reports:
        print(f"{rep.method} a={rep.a!r} b={rep.b!r} sigma={rep.sigma!r}: {rep.classification}")
    return EXIT_OK


def cmd_verify(args) -> int:
    ns = args.n
    if len(ns) < 2:
        print("config error: n: need at least two levels to measure rates", file=sys.stderr)
        return EXIT_CONFIG
    try:
        configs = [RunConfig(a=args.a, b=args.b, sigma=args.sigma, variant=args.variant, n=n) for n in ns]
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = analysis.convergence_study(configs)
    _outdir(args)
    report.to_csv(Path(args.out) / "verify.csv")
    oracle = analysis.exact_spacetime_norms(configs[0].T)
    failures = []
    for lv in report.levels[1:]:
        if not lv.rate >= VERIFY_RATE:
            failures.append(f"rate n={lv.n}: {lv.rate:.4f} < {VERIFY_RATE}")
    fin = report.levels[-1]
    for name, got, want in (("norm_u1", fin.norm_u1, oracle[0]), ("norm_u2", fin.norm_u2, oracle[1])):
        rel = abs(got - want) / want
        if not rel <= VERIFY_NORM_RTOL:
            failures.append(f"{name} n={fin.n}: {got:.6f} vs oracle {want:.6f} (rel {rel:.3%})")
    for lv in report.levels:
        print(f"n={lv.n} h={lv.h:.6g} norm_u1={lv.norm_u1:.6f} norm_u2={lv.norm_u2:.6f} "
              f"err={lv.err_l2_final:.4e} rate={lv.rate:.3f}")
    if failures:
        print("verification FAILED:", file=sys.stderr)
        for f in failures:
            print("  " + f, file=sys.stderr)
        return EXIT_VERIFY
    print("verification passed")
    return EXIT_OK


def cmd_probe(args) -> int:
    try:
        variants = [IPVariant.parse(v) for v in args.variant]
        if any(s <= 0 for s in args.sigma):
            raise ConfigError("sigma", "penalty must be positive")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    space = DGSpace(build_unit_square(args.n), args.degree)
    rows = []
    for v in variants:
        for s in args.sigma:
            r = analysis.coercivity_probe(space, v, s, trials=args.trials, seed=args.seed)
            rows.append({"variant": r.variant, "sigma": repr(r.sigma), "n": r.n, "min_quotient": repr(r.min_quotient),
                         "max_continuity": repr(r.max_continuity), "symmetry_defect": repr(r.symmetry_defect),
                         "min_eigen_quotient": repr(r.min_eigen_quotient)})
    out = _outdir(args)
    analysis.write_rows(out / "probe.csv", rows, PROBE_COLUMNS)
    for row in rows:
        print(",".join(str(row[c]) for c in PROBE_COLUMNS))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel sweep cells")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    p = argparse.ArgumentParser(prog="cgl-dg", description=__doc__, parents=[common])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run one configuration")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[common], help="run a parameter sweep")
    s.add_argument("spec")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", parents=[common], help="manufactured-solution convergence gate")
    v.add_argument("--n", type=int, nargs="+", default=[6, 12, 24])
    v.add_argument("--variant", default="NIPG")
    v.add_argument("--sigma", type=float, default=1e8)
    v.add_argument("--a", type=float, default=1e-4)
    v.add_argument("--b", type=float, default=1e-4)
    v.set_defaults(func=cmd_verify)

    pr = sub.add_parser("probe", parents=[common], help="coercivity / continuity probe")
    pr.add_argument("--variant", nargs="+", default=["SIPG", "NIPG", "IIPG"])
    pr.add_argument("--sigma", type=float, nargs="+", default=[1e3])
    pr.add_argument("--n", type=int, default=4)
    pr.add_argument("--degree", type=int, default=1)
    pr.add_argument("--trials", type=int, default=100)
    pr.add_argument("--seed", type=int, default=0)
    pr.set_defaults(func=cmd_probe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not hasattr(args, "jobs"):
        args.jobs = 1
    if not hasattr(args, "out"):
        args.out = "results"
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
