"""Command-line entry point.

Usage::

    alloytype SUBCOMMAND [--config PATH] [--potential PATH] [--seed N]
                         [--samples N] [--workers N] [--out DIR]

Subcommands: constants, wegner, moments, decay, counterexample, krein, selftest.

Each run writes its CSV tables and one ``manifest.json`` into
``OUT/<subcommand>/``.  ``OUT`` defaults to ``$ALLOYTYPE_OUT`` or
``./results``.  The potential file has the same schema as the ``potential``
block of a config::

    dim: 1
    entries:
      - {site: [0], value: 1.0}
      - {site: [1], value: -0.5}

Exit codes: 0 all checks passed, 1 a check failed, 2 invalid input,
3 violated hypothesis, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import yaml

from . import __version__, experiments, selftest, theory
from .config import ExperimentConfig, parse_config
from .errors import AlloyError, ConfigurationError

log = logging.getLogger("alloytype")

SUBCOMMANDS = ("constants", "wegner", "moments", "decay", "counterexample", "krein", "selftest")
EXIT_FAILED = 1

RUNNERS = {
    "wegner": experiments.run_wegner,
    "moments": experiments.run_moment_bound,
    "decay": experiments.run_decay,
    "counterexample": experiments.run_counterexample,
    "krein": experiments.krein_probe,
}


def read_potential_file(path) -> dict:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot read potential file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError("potential file must contain a mapping with dim and entries")
    return data


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alloytype",
                                description="Spectral bounds for discrete alloy-type models.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, help="YAML or JSON experiment config")
    p.add_argument("--potential", type=Path, help="single-site potential file (YAML/JSON)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load(args) -> ExperimentConfig:
    overrides = {"seed": args.seed, "samples": args.samples, "workers": args.workers}
    if args.potential is not None:
        overrides["potential"] = read_potential_file(args.potential)
    return parse_config(args.config, **overrides)


def constants_document(cfg: ExperimentConfig) -> dict:
    u, rho = cfg.potential.build(), cfg.density.build()
    c = cfg.constants
    return {
        "potential": theory.potential_report(u).to_dict(),
        "density": {"spec": rho.spec(), "norms": rho.norms()},
        "bounds": theory.bound_set(u, rho, L=c.L, eps=c.eps, s=c.s),
        "interpretations": theory.INTERPRETATIONS,
    }


def write_run(out_dir: Path, subcommand: str, cfg: ExperimentConfig | None, tables: dict,
              status: str, summary: dict, started: float, error: str | None = None) -> Path:
    run_dir = out_dir / subcommand
    run_dir.mkdir(parents=True, exist_ok=True)
    outputs = {}
    for name, table in tables.items():
        body = table.csv_text()
        path = run_dir / f"{name}.csv"
        path.write_text(body)
        outputs[name] = {"path": str(path), "sha256": hashlib.sha256(body.encode()).hexdigest()}
    manifest = {
        "manifest_version": 1,
        "tool": "alloytype",
        "version": __version__,
        "subcommand": subcommand,
        "status": status,
        "master_seed": cfg.seed if cfg else None,
        "config": cfg.echo() if cfg else None,
        "interpretations": theory.INTERPRETATIONS,
        "created": datetime.now(timezone.utc).isoformat(),
        "duration_s": time.time() - started,
        "outputs": outputs,
        "summary": summary,
    }
    if error is not None:
        manifest["error"] = error
    path = run_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def dispatch(subcommand: str, cfg: ExperimentConfig, out_dir: Path) -> int:
    started = time.time()
    if subcommand == "selftest":
        results = selftest.run(cfg.seed)
        for name, ok in results.items():
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        return 0 if all(results.values()) else EXIT_FAILED
    if subcommand == "constants":
        doc = constants_document(cfg)
        print(json.dumps(doc, indent=2, default=_json_default))
        run_dir = out_dir / "constants"
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "constants.json").write_text(json.dumps(doc, indent=2, default=_json_default))
        write_run(out_dir, subcommand, cfg, {}, "ok", doc, started)
        return 0
    try:
        result = RUNNERS[subcommand](cfg)
    except AlloyError as exc:
        write_run(out_dir, subcommand, cfg, {}, "error", {}, started, error=str(exc))
        raise
    manifest = write_run(out_dir, subcommand, cfg, result.tables,
                         "ok" if result.passed else "failed", result.summary, started)
    print(json.dumps(result.summary, indent=2, default=_json_default))
    print(f"{subcommand}: {'PASS' if result.passed else 'FAIL'} (manifest: {manifest})")
    return 0 if result.passed else EXIT_FAILED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_dir = args.out or Path(os.environ.get("ALLOYTYPE_OUT", "results"))
    try:
        cfg = load(args)
        return dispatch(args.subcommand, cfg, out_dir)
    except AlloyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
