"""``wristsim`` command-line entry point."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import report, stats
from .config import MODALITY_BLOCKS, MODES, RunConfig, load_config, observer_from
from .core_types import (
    MEASURES, ParticipantRecord, load_fixture, read_participants, validate_participant,
    write_participants,
)
from .errors import WristSimError
from .protocol import (
    SessionConfig, discrimination_montecarlo, make_population, run_session, write_session,
)

log = logging.getLogger("wristsim")

EXIT_OK, EXIT_VIOLATIONS, EXIT_ERROR = 0, 1, 2


def _records(cfg: RunConfig) -> list[ParticipantRecord]:
    return read_participants(cfg.input) if cfg.input else load_fixture()


def _complete(records: list[ParticipantRecord]) -> tuple[list[ParticipantRecord], list[int]]:
    names = list(MEASURES.values())
    keep = [r for r in records if all(math.isfinite(float(getattr(r, n))) for n in names)]
    dropped = [r.pid for r in records if r not in keep]
    return keep, dropped


def _session_job(args):
    profile, observer, config, seed = args
    return run_session(profile, observer, config, np.random.default_rng(seed))


def cmd_simulate(cfg: RunConfig) -> int:
    config = cfg.session_config()
    population = make_population(cfg.participants, np.random.default_rng([cfg.seed, 0]))
    seeds = np.random.SeedSequence([cfg.seed, 1]).spawn(cfg.participants)
    jobs = [(p, o, config, s) for (p, o), s in zip(population, seeds)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            sessions = list(pool.map(_session_job, jobs))
    else:
        sessions = [_session_job(j) for j in jobs]
    # all writes happen here, in submission order
    cfg.out.mkdir(parents=True, exist_ok=True)
    for s in sessions:
        write_session(s, cfg.out / f"P{s.profile.pid:02d}")
        for e in s.errors:
            log.warning("P%d %s", s.profile.pid, e)
    write_participants([s.record for s in sessions], cfg.out / "participants.csv")
    log.info("wrote %d sessions to %s", len(sessions), cfg.out)
    return EXIT_OK


def analysis_text(records: list[ParticipantRecord]) -> tuple[str, stats.CorrelationMatrix, list, list[str]]:
    usable, dropped = _complete(records)
    if len(usable) < 3:
        raise WristSimError(f"need at least 3 complete participants, have {len(usable)}")
    cm, tests, titles = report.analyze(usable)
    lines = [f"participants: {len(usable)}"]
    if dropped:
        lines.append("dropped (incomplete measures): " + ", ".join(f"P{p}" for p in dropped))
    lines += ["", "Spearman rho", stats.format_matrix(cm, "rho"), "",
              "Spearman p", stats.format_matrix(cm, "p"), ""]
    if cm.excluded:
        lines.append("excluded (constant): " + ", ".join(cm.excluded))
    lines += [stats.format_tests(tests, titles), ""]
    for r in records:
        for v in validate_participant(r):
            lines.append(f"violation P{r.pid}: {v}")
    return "\n".join(lines) + "\n", cm, tests, titles


def cmd_analyze(cfg: RunConfig) -> int:
    text, cm, tests, titles = analysis_text(_records(cfg))
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "report.txt").write_text(text)
    stats.write_matrix_csv(cm, cfg.out / "correlations.csv")
    stats.write_tests_csv(tests, titles, cfg.out / "tests.csv")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_reproduce_paper(cfg: RunConfig) -> int:
    rep = report.reproduce(_records(cfg))
    text = report.format_report(rep)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "report.txt").write_text(text)
    report.write_checks_csv(rep, cfg.out / "checks.csv")
    stats.write_matrix_csv(rep.matrix, cfg.out / "correlations.csv")
    stats.write_tests_csv(rep.tests, rep.test_titles, cfg.out / "tests.csv")
    sys.stdout.write(text)
    # FAIL rows are findings about the data, not run errors
    return EXIT_OK


MONTECARLO_COLUMNS = ("point", "modality", "runs", "target", "median_jnd", "ratio", "bias",
                      "q25", "q75", "iqr", "incomplete", "mean_trials", "observer")


def cmd_montecarlo(cfg: RunConfig) -> int:
    config: SessionConfig = cfg.session_config()
    profile = cfg.mc_profile()
    rows = []
    for i, point in enumerate(cfg.observer_grid()):
        observer = observer_from(point)
        label = ";".join(f"{k}={v:g}" for k, v in sorted(point.items()))
        for modality in cfg.modalities:
            s = discrimination_montecarlo(MODALITY_BLOCKS[modality], profile, observer, cfg.runs,
                                          seed=cfg.seed + 7919 * i, config=config, workers=cfg.workers)
            rows.append([i, modality, s.runs, s.target, s.median_jnd, s.ratio, s.bias,
                         s.q25, s.q75, s.q75 - s.q25, s.incomplete, s.mean_trials, label])
            log.info("point %d %s: median %.4g target %.4g ratio %.3f", i, modality,
                     s.median_jnd, s.target, s.ratio)
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "montecarlo.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MONTECARLO_COLUMNS)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    for r in rows:
        print(f"point {r[0]} {r[1]:<9} median {r[4]:9.4f}  target {r[3]:9.4f}  ratio {r[5]:.3f}"
              f"  incomplete {r[10]}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    records = _records(cfg)
    bad = 0
    for r in records:
        for v in validate_participant(r):
            print(f"P{r.pid}: {v}")
            bad += 1
    print(f"{len(records)} records, {bad} violations")
    return EXIT_VIOLATIONS if bad else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "reproduce-paper": cmd_reproduce_paper,
    "montecarlo": cmd_montecarlo,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wristsim", description="Simulated wrist proprioception assessment.")
    p.add_argument("--mode", choices=MODES, default="reproduce-paper")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", type=Path, help="flat key = value file")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--runs", type=int, help="Monte Carlo repetitions per grid point")
    p.add_argument("--participants", type=int, help="simulated population size")
    p.add_argument("--input", type=Path, help="participant table (defaults to the bundled one)")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg.mode = args.mode
    for name in ("seed", "runs", "participants", "workers", "input", "out"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    for name in ("runs", "participants", "workers"):
        if getattr(cfg, name) < 1:
            raise WristSimError(f"--{name} must be >= 1")
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        log.info("config: %s", {k: v for k, v in asdict(cfg).items()})
        return COMMANDS[cfg.mode](cfg)
    except (WristSimError, OSError) as exc:
        print(f"wristsim: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
