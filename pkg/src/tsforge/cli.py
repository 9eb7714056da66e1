"""Command-line pipeline driver.

Three subcommands wired to one declarative JSON config:

* ``generate`` - build the dataset, apply the configured patterns, and
  export CSV/JSONL tables plus dataset.json and manifests.json;
* ``qa``       - read an exported dataset and emit suite.jsonl;
* ``run``      - load suite.jsonl, drive the configured agent endpoint
  over n trials, and write report.json/report.csv plus figures.

Exit codes: 0 success, 2 configuration error, 3 missing or unwritable
files, 4 endpoint missing or unusable.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import dataio, reporting
from .config import ProjectConfig, load_config
from .core import validate_dataset
from .datagen import assemble_global
from .errors import ConfigError, ForgeError
from .harness import run_suite
from .patterns import CascadeSpec, inject, inject_cascade
from .prng import substream
from .qa.suite import instantiate_suite, export_suite, load_suite

log = logging.getLogger("tsforge")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ENDPOINT = 4


def rate_per_second(rate_per_ms: float) -> float:
    """Engine rates are per millisecond; user-facing output is per
    second."""
    return rate_per_ms * 1000.0


def _out_dir(config: ProjectConfig, args) -> Path:
    return Path(args.out) if args.out else Path(config.output_dir)


def cmd_generate(config: ProjectConfig, args) -> int:
    scenario = config.scenario
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    dataset = assemble_global(scenario)
    for i, pattern in enumerate(config.patterns):
        rng = substream(scenario.seed, "inject", i)
        if isinstance(pattern, CascadeSpec):
            dataset, manifest = inject_cascade(dataset, pattern, rng)
        else:
            dataset, manifest = inject(dataset, pattern, rng)
        log.info("injected %s (%d entities affected)",
                 manifest.incident_id, len(manifest.affected_entity_ids()))
    violations = validate_dataset(dataset)
    for v in violations:
        log.warning("dataset violation: %s at %s: %s", v.kind, v.where,
                    v.detail)
    out = _out_dir(config, args)
    try:
        written = dataio.export_dataset(dataset, out)
    except OSError as exc:
        log.error("cannot write dataset: %s", exc)
        return EXIT_IO
    rows = sum(len(s.records) for _t, s in dataset.all_series())
    log.info("wrote %d files to %s (%d tables, %d rows)", len(written), out,
             len(dataset.tables), rows)
    return EXIT_OK


def cmd_qa(config: ProjectConfig, args) -> int:
    out = _out_dir(config, args)
    if not (out / "dataset.json").exists():
        log.error("no dataset found in %s; run generate first", out)
        return EXIT_IO
    dataset = dataio.import_dataset(out)
    suite_cfg = config.suite
    if args.seed is not None:
        suite_cfg = replace(suite_cfg, seed=args.seed)
    suite = instantiate_suite(dataset, suite_cfg)
    path = out / "suite.jsonl"
    try:
        export_suite(suite, path)
    except OSError as exc:
        log.error("cannot write suite: %s", exc)
        return EXIT_IO
    log.info("wrote %d items to %s", len(suite), path)
    return EXIT_OK


def cmd_run(config: ProjectConfig, args) -> int:
    if config.endpoint is None:
        log.error("no endpoint configured; add an \"endpoint\" section")
        return EXIT_ENDPOINT
    out = _out_dir(config, args)
    suite_path = out / "suite.jsonl"
    if not suite_path.exists():
        log.error("no suite found at %s; run qa first", suite_path)
        return EXIT_IO
    suite = load_suite(suite_path)
    trials = args.trials if args.trials is not None else config.trials
    records = run_suite(suite, config.endpoint, n_trials=trials)
    doc = reporting.write_report(records, suite, out, k=config.pass_k)
    metrics = doc["metrics"]
    log.info("accuracy %.3f, pass@%d %.3f, self-consistency %.3f",
             metrics["accuracy"], metrics["k"], metrics["pass_at_k"],
             metrics["self_consistency"])
    if records and all(r.category == "runtime_error" for r in records):
        log.error("endpoint never produced a gradable answer")
        return EXIT_ENDPOINT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsforge",
        description="Deterministic timeseries benchmark pipeline")
    parser.add_argument("--quiet", "-q", action="store_true",
                        help="only warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_text in (
            ("generate", cmd_generate, "generate dataset files"),
            ("qa", cmd_qa, "build the QA suite from an exported dataset"),
            ("run", cmd_run, "run the suite against the agent endpoint")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="project config JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None,
                       help="override the config output directory")
        if name == "run":
            p.add_argument("--trials", type=int, default=None,
                           help="trials per item (default from config)")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    try:
        return args.fn(config, args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except ForgeError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
