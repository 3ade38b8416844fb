"""``gradspin`` command line: simulate | hydro | attract | verify | moments.

Every command reads one JSON config (``--config``) plus ``--set key=value``
overrides, validates it, and writes CSV/JSON results into the output
directory.  Exit codes: 0 success, 2 invalid configuration, 3 a suite or
criterion failed, 4 I/O error.  ``GRADSPIN_THREADS`` sets the default worker
count.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import basic_coupling_gkmp, scan_criterion
from .config import ConfigError, ExperimentConfig, build_config, validate
from .engine import run_replicas
from .hydro import convergence_experiment, manifest
from .measures import InvariantSpec, empirical_moment, moment, sample_invariant, sample_profile_measure
from .measures import InitialMeasureSpec, parse_profile
from .models import ModelKind
from .numerics import RngStream
from .verify import run_all

EXIT_OK, EXIT_CONFIG, EXIT_FAILED, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("simulate", "hydro", "attract", "verify", "moments")

logger = logging.getLogger("gradspin")


class CommandFailed(Exception):
    """A suite or criterion did not pass; results were still written."""


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _manifest(config: ExperimentConfig, command: str, **extra) -> str:
    return manifest(config.to_dict(), config.content_hash(), {"command": command, **extra})


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(config: ExperimentConfig) -> Path:
    out = Path(config.out_dir)
    rows, snaps = [], []
    for N in config.sizes:
        for res in run_replicas(config, N=N):
            if res.recording is None:
                raise RuntimeError(f"replica {res.replica} failed: {res.error}")
            rec = res.recording
            for i, t in enumerate(rec.macro_times):
                obs = [("mass", rec.mass[i]), ("events", rec.events[i])]
                obs += [(f"pair:{g}", v[i]) for g, v in rec.pairings.items()]
                obs += [(f"martingale:{g}", v[i]) for g, v in rec.martingale.items()]
                obs += [(f"qv:{g}", v[i]) for g, v in rec.quadratic_variation.items()]
                rows += [[res.replica, N, _num(t), name, _num(val)] for name, val in obs]
                if rec.snapshots is not None:
                    snaps += [[res.replica, N, _num(t), x, _num(v)] for x, v in enumerate(rec.snapshots[i])]
    path = _write(out, "simulate.csv", _csv(["replica", "N", "t", "observable", "value"], rows))
    if config.snapshots:
        _write(out, "snapshots.csv", _csv(["replica", "N", "t", "site", "value"], snaps))
    _write(out, "manifest.json", _manifest(config, "simulate"))
    print(f"wrote {len(rows)} rows to {path}")
    return path


def cmd_hydro(config: ExperimentConfig):
    profile = f"const:{config.rho}" if config.rho is not None else config.profile
    table = convergence_experiment(config.spec, profile, config.sizes, config.times, config.replicas,
                                   config.seed, bins=config.bins, threads=config.threads)
    out = Path(config.out_dir)
    _write(out, "hydro_errors.csv", table.to_csv())
    _write(out, "hydro_profiles.csv", table.profiles_csv())
    _write(out, "manifest.json", _manifest(config, "hydro", D=table.D, monotone_L1=table.monotone_in_N("L1")))
    for r in table.rows:
        print(f"N={r.N:<6d} t={r.t:<8g} {r.norm:<12s} error={r.error:.5f} se={r.se:.5f}")
    return table


def cmd_attract(config: ExperimentConfig) -> dict:
    spec = config.spec
    out = Path(config.out_dir)
    if spec.kind is ModelKind.GKMP:
        report = _coupling_report(config)
    else:
        crit = scan_criterion(spec, config.n_max, config.l_max)
        _write(out, "attract_violations.csv", crit.violations_csv())
        report = crit.to_dict()
    _write(out, "attract.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    verdict = "report-only" if report["report_only"] else ("pass" if report["passed"] else "FAIL")
    print(f"{spec}: {verdict}; checked={report['checked']} violations={report['n_violations']}")
    if not report["passed"] and not report["report_only"]:
        raise CommandFailed("attractiveness check failed")
    return report


def _coupling_report(config: ExperimentConfig) -> dict:
    """Basic coupling from dominated pairs, one run per replica stream."""
    spec = config.spec
    rho = config.rho if config.rho is not None else 1.0
    exact = beyond = events = 0
    for r in range(config.replicas):
        rng = RngStream(config.seed, r)
        xi = sample_invariant(InvariantSpec(spec, rho), config.N, rng)
        eta = xi * rng.generator.random(config.N)
        res = basic_coupling_gkmp(eta, xi, spec, config.micro_T, rng, strict=False)
        exact += res.exact_violations
        beyond += res.violations
        events += res.events
    return {
        "model": spec.kind.value, "spin": spec.spin, "N": config.N, "micro_T": config.micro_T,
        "runs": config.replicas, "checked": 2 * events, "n_violations": beyond,
        "rounding_level_violations": exact, "passed": beyond == 0, "report_only": False,
    }


def cmd_verify(config: ExperimentConfig) -> list:
    results = run_all(n_max=config.verify_n_max, corrupt_diffusion=config.corrupt_diffusion, seed=config.seed)
    doc = {"suites": [r.to_dict() for r in results], "passed": all(r.passed for r in results)}
    _write(Path(config.out_dir), "verify.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<34s} worst={r.worst_residual:.3e} tol={r.tolerance:.1e}")
    worst = max(r.worst_residual for r in results)
    print(f"worst residual {worst:.3e}")
    if not doc["passed"]:
        raise CommandFailed("identity suite failed")
    return results


def cmd_moments(config: ExperimentConfig) -> str:
    spec = config.spec
    rho = config.rho if config.rho is not None else 1.0
    ispec = InvariantSpec(spec, rho)
    x = sample_invariant(ispec, config.draws, RngStream(config.seed, 0))
    rows = []
    for m in range(1, 5):
        exact = moment(ispec, m)
        est, se = empirical_moment(x, m, exact.kind)
        z = (est - exact.value) / se if se > 0 else 0.0
        rows.append([m, exact.kind, _num(exact.value), _num(est), _num(se), _num(z)])
        print(f"m={m} {exact.kind:<9s} closed={exact.value:.6g} sampled={est:.6g} se={se:.3g} z={z:+.2f}")
    text = _csv(["m", "kind", "closed", "sampled", "se", "z"], rows)
    _write(Path(config.out_dir), "moments.csv", text)
    return text


HANDLERS = {
    "simulate": cmd_simulate,
    "hydro": cmd_hydro,
    "attract": cmd_attract,
    "verify": cmd_verify,
    "moments": cmd_moments,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradspin", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON configuration file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration entry (repeatable)")
        p.add_argument("--threads", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--seed", type=int)
    return parser


def load_config(args) -> ExperimentConfig:
    document = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            document = json.load(fh)
        if not isinstance(document, dict):
            raise ConfigError("config", "top level must be a JSON object")
    overrides = list(args.overrides)
    for key in ("seed", "threads", "out_dir"):
        value = getattr(args, key)
        if value is not None:
            overrides.append(f"{key}={value}")
    return validate(build_config(document, overrides), args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"error: config: not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        HANDLERS[args.command](config)
    except CommandFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
