"""Command line entry point: single runs, the ablation grid and result files.

Each run directory holds::

    config.json     run configuration plus package version
    episodes.csv    one row per recorded episode
    rolling.csv     trailing-window mean/std of the scores
    summary.txt     parameter counts and run totals, ``key = value`` lines
    checkpoint.bin  final policy parameters
"""

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, checkpoint
from .agent import LOSSES
from .cartpole import VARIANTS
from .config import RunConfig
from .errors import ConfigurationError, QdqnError, TrainingError
from .model import param_count, quantum_param_count
from .trainer import run_training

log = logging.getLogger("qdqn_dper")

EPISODE_COLUMNS = ("global_episode", "worker_id", "score", "epsilon_at_end", "wall_clock_ms")
ROLLING_WINDOW = 5000


def rolling_stats(scores, window=ROLLING_WINDOW):
    """Mean and population std of ``scores[max(0, i - window + 1) : i + 1]`` for every ``i``.

    Returns two arrays of the same length as ``scores``.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    x = np.asarray(scores, dtype=np.float64)
    if x.size == 0:
        return np.empty(0), np.empty(0)
    # shift by the first value so long runs of large scores keep precision
    d = x - x[0]
    s1 = np.concatenate([[0.0], np.cumsum(d)])
    s2 = np.concatenate([[0.0], np.cumsum(d * d)])
    hi = np.arange(1, x.size + 1)
    lo = np.maximum(0, hi - window)
    count = hi - lo
    mean_d = (s1[hi] - s1[lo]) / count
    var = np.maximum((s2[hi] - s2[lo]) / count - mean_d ** 2, 0.0)
    return mean_d + x[0], np.sqrt(var)


def ablation_grid(base):
    """The five comparison cells, each with its own seed offset."""
    cells = [
        ("quantum_per_matrix", dict(model="quantum", per=True, loss="matrix")),
        ("quantum_noper_matrix", dict(model="quantum", per=False, loss="matrix")),
        ("quantum_per_td", dict(model="quantum", per=True, loss="td")),
        ("classical_per", dict(model="classical", per=True, loss="matrix")),
        ("classical_noper", dict(model="classical", per=False, loss="matrix")),
    ]
    return [(name, base.with_(seed=base.seed + k, replay=True, **changes)) for k, (name, changes) in enumerate(cells)]


def parameter_derivation(arch):
    parts = [f"{name}{list(shape)}={int(np.prod(shape))}" for name, shape in arch.layout]
    return " + ".join(parts) + f" = {arch.size}"


def describe(config):
    arch = config.architecture
    return {
        "model": config.model,
        "param_count": param_count(arch),
        "quantum_param_count": quantum_param_count(arch),
        "derivation": parameter_derivation(arch),
    }


def write_episodes(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EPISODE_COLUMNS)
        for r in records:
            w.writerow([r.global_episode, r.worker_id, repr(float(r.score)), repr(float(r.epsilon_at_end)),
                        f"{r.wall_clock_ms:.3f}"])


def write_rolling(path, scores, window=ROLLING_WINDOW):
    mean, std = rolling_stats(scores, window)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("global_episode", "mean", "std"))
        for i, (m, s) in enumerate(zip(mean, std)):
            w.writerow([i, repr(float(m)), repr(float(s))])


def write_summary(path, config, report):
    info = describe(config)
    scores = report.scores
    head = scores[:500].mean() if scores.size else float("nan")
    tail = scores[-500:].mean() if scores.size else float("nan")
    lines = [
        ("version", __version__),
        ("seed", config.seed),
        ("model", config.model),
        ("param_count", info["param_count"]),
        ("quantum_param_count", info["quantum_param_count"]),
        ("param_derivation", info["derivation"]),
        ("episodes_recorded", len(report.episodes)),
        ("global_steps", report.total_steps),
        ("updates", report.updates),
        ("target_syncs", len(report.sync_log)),
        ("wall_time_s", f"{report.wall_time:.3f}"),
        ("mean_first_500", f"{head:.4f}"),
        ("mean_last_500", f"{tail:.4f}"),
    ]
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in lines))


def write_run(out, config, report):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    snapshot = {"version": __version__, "config": config.to_dict()}
    (out / "config.json").write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")
    write_episodes(out / "episodes.csv", report.episodes)
    write_rolling(out / "rolling.csv", report.scores)
    write_summary(out / "summary.txt", config, report)
    checkpoint.save(out / "checkpoint.bin", report.params, seed=config.seed)


def _on_off(value):
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def _positive(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="qdqn-dper", description="Train hybrid quantum DQN agents on CartPoleMod.")
    p.add_argument("--env", choices=VARIANTS)
    p.add_argument("--model", choices=("quantum", "classical"))
    p.add_argument("--per", type=_on_off, metavar="{on,off}")
    p.add_argument("--replay", type=_on_off, metavar="{on,off}", help="off trains online on each fresh trajectory")
    p.add_argument("--loss", choices=LOSSES)
    p.add_argument("--workers", type=_positive)
    p.add_argument("--episodes", type=_positive)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--config", type=Path, help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--ablation-grid", action="store_true", help="run the five comparison cells under --out")
    p.add_argument("--describe", action="store_true", help="print parameter counts and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args):
    data = {}
    if args.config is not None:
        text = args.config.read_text()
        data = json.loads(text)
        data = data.get("config", data)  # accept a config.json written by a previous run
    for name in ("env", "model", "per", "replay", "loss", "workers", "episodes", "seed"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    return RunConfig.from_dict(data)


def _progress(record):
    if (record.global_episode + 1) % 100 == 0:
        log.info("episode %d score %.0f eps %.3f", record.global_episode + 1, record.score, record.epsilon_at_end)


def _train(out, config):
    log.info("run %s: %s", out, config.to_json().replace("\n", " "))
    started = time.perf_counter()
    try:
        report = run_training(config, on_episode=_progress)
    except TrainingError as exc:
        write_run(out, config, exc.partial)
        raise
    write_run(out, config, report)
    log.info("finished %d episodes in %.1fs", len(report.episodes), time.perf_counter() - started)
    return report


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = config_from_args(args)
    except (ConfigurationError, OSError, ValueError, TypeError) as exc:
        parser.error(str(exc))
    if args.describe:
        print(json.dumps(describe(config), indent=2))
        return 0
    try:
        if args.ablation_grid:
            rows = []
            for name, cell in ablation_grid(config):
                report = _train(args.out / name, cell)
                rows.append((name, cell.seed, report.scores[-500:].mean()))
            with open(args.out / "grid.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(("cell", "seed", "mean_last_500"))
                w.writerows(rows)
        else:
            _train(args.out, config)
    except QdqnError as exc:
        print(f"qdqn-dper: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
