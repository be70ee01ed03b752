"""Command line entry point: ``lilac run | sweep | check``."""
import argparse
import logging
import os
import sys
from typing import List, Optional

from .config import VARIANTS, WORKLOADS, ConfigError, ExperimentConfig
from .metrics import write_rows, write_table
from .runner import LivenessViolation, RunResult, run
from .sweep import sweep, write_sweep

log = logging.getLogger("lilac")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNSAFE = 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--variant", choices=sorted(VARIANTS))
    p.add_argument("--workload", choices=WORKLOADS)
    p.add_argument("--locality", type=float)
    p.add_argument("--nodes", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--duration", type=int, help="simulated seconds of load")
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lilac", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run one experiment and write CSV series")
    _common(p_run)

    p_sweep = sub.add_parser("sweep", help="run one experiment per parameter value")
    _common(p_sweep)
    p_sweep.add_argument("--param", default="locality")
    p_sweep.add_argument("--values", default="0,0.2,0.4,0.6,0.8,0.9,1.0",
                         help="comma separated values")

    p_check = sub.add_parser("check", help="run an experiment and report the safety verdicts")
    _common(p_check)
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    flags = {k: getattr(args, k) for k in ("variant", "workload", "locality", "nodes", "threads",
                                            "duration", "seed")}
    cfg = cfg.replace(**{k: v for k, v in flags.items() if v is not None})
    extra = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        extra[k] = v
    if extra:
        cfg = cfg.apply(extra)
    return cfg.validate()


def _write_run(out: str, res: RunResult):
    os.makedirs(out, exist_ok=True)
    cfg = res.config
    with open(os.path.join(out, "config.txt"), "w", encoding="utf-8") as fp:
        fp.write(cfg.to_text())
    with open(os.path.join(out, "metrics.csv"), "w", encoding="utf-8") as fp:
        write_rows(fp, res.rows, cfg.nodes)
    rec = res.recorder
    with open(os.path.join(out, "commit_log.csv"), "w", encoding="utf-8") as fp:
        write_table(fp, ["tick", "txId", "origin", "committer", "nClasses", "reused", "forwarded"],
                    rec.commit_log)
    with open(os.path.join(out, "forward_trace.csv"), "w", encoding="utf-8") as fp:
        for row in rec.forward_trace:
            fp.write(",".join(str(x) for x in row) + "\n")


def _report(res: RunResult) -> int:
    s = res.safety
    if s is None:
        return EXIT_OK
    v = s.serializability
    print(f"serializability: {'acyclic' if v.serializable else 'CYCLE ' + str(v.cycle)}")
    print(f"conservation: {s.conservation}  convergence: {s.convergence}  cq_agreement: {s.cq_agreement}")
    print(f"max forwards per tx: {s.max_forwards}  unsafe commits: {s.unsafe_commits}  accounting: {s.accounting}")
    print(f"lease handles issued: {res.lease_handles}  unresolved: {res.unresolved_handles}")
    return EXIT_OK if s.ok else EXIT_UNSAFE


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.cmd == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            results = sweep(cfg, args.param, values)
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, "sweep.csv"), "w", encoding="utf-8") as fp:
                write_sweep(fp, args.param, results, cfg.nodes)
            code = EXIT_OK
            for value, res in results:
                t = res.totals()
                print(f"{args.param}={value} throughput={t['throughput']:.1f} "
                      f"lease_reuse_rate={t['lease_reuse_rate']:.3f}")
                if res.safety is not None and not res.safety.ok:
                    print(f"  safety failures: {', '.join(res.safety.failures())}")
                    code = EXIT_UNSAFE
            return code

        res = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LivenessViolation, AssertionError) as exc:
        print(f"protocol violation: {exc}", file=sys.stderr)
        return EXIT_UNSAFE

    if args.cmd == "run":
        _write_run(args.out, res)
        t = res.totals()
        print(f"{cfg.variant} {cfg.workload}: throughput={t['throughput']:.1f} tx/s "
              f"lease_reuse_rate={t['lease_reuse_rate']:.3f} lease_req_rate={t['lease_req_rate']:.1f}/s "
              f"-> {args.out}")
        if res.safety is not None and not res.safety.ok:
            print(f"safety failures: {', '.join(res.safety.failures())}", file=sys.stderr)
            return EXIT_UNSAFE
        return EXIT_OK
    return _report(res)


if __name__ == "__main__":
    sys.exit(main())
