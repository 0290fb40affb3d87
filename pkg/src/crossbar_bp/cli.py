"""Command-line experiment runner.

Single runs and parameter grids share one path: every comma list on a grid
flag becomes an axis, and the cartesian product of the axes is run cell by
cell.  Each cell writes ``<name>.csv`` (``iteration,accuracy``) and
``<name>.json`` (final-window summary, config echo, wall clock); the run
writes ``index.json`` listing every cell and ``device_curves_nmax<N>.csv``
for each dynamic range in the grid.

Exit status: 0 when every cell succeeds, 1 when any cell fails, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import kernels, mnist_io, trainer
from .device_model import DeviceParams, trace_response
from .network import HIDDEN_PRESETS
from .trainer import ExperimentConfig

log = logging.getLogger("crossbar_bp")

MODE_ALIASES = {"onchip": "hw_onchip", "offchip": "hw_offchip", "sw": "sw_reference",
                "hw_onchip": "hw_onchip", "hw_offchip": "hw_offchip",
                "sw_reference": "sw_reference"}
MODE_SHORT = {"hw_onchip": "onchip", "hw_offchip": "offchip", "sw_reference": "sw"}

# grid axes: flag dest -> (config field, parser for one element)
AXES = {
    "beta": ("beta", float),
    "nmax": ("n_max", int),
    "method": ("method", str),
    "batch_size": ("batch_size", int),
    "sigma": ("sigma", float),
    "mode": ("mode", lambda v: MODE_ALIASES[v.strip().lower()]),
    "seed": ("seed", int),
}
# scalar flags: flag dest -> (config field, parser)
SCALARS = {
    "epochs": ("epochs", int),
    "eval_interval": ("eval_interval", int),
    "lr": ("learning_rate", float),
    "repeats": ("repeats", int),
    "final_window": ("final_window", int),
    "train_limit": ("train_limit", int),
    "init": ("init", str),
    "deadband_output": ("deadband_output", float),
    "deadband_hidden": ("deadband_hidden", float),
}
DATA_KEYS = ("train_images", "train_labels", "test_images", "test_labels")
OTHER_KEYS = ("hidden", "c", "shuffle", "out", "data_dir", "preset", "jobs",
              "snapshot_every") + DATA_KEYS

_FIG_BASE = {"n_max": 64, "batch_size": 1, "sigma": 0.0, "mode": "hw_onchip",
             "method": "b", "hidden": (200,)}


def _cells(base=None, **axes):
    base = {**_FIG_BASE, **(base or {})}
    keys = list(axes)
    return [{**base, **dict(zip(keys, combo))} for combo in itertools.product(*axes.values())]


PRESETS = {
    "fig6": [],
    "fig7": _cells(beta=[0.0, 1.0, 2.0, 3.0], method=["a", "b", "c"]),
    "fig8": (_cells(beta=[0.0, 1.0, 2.0, 3.0], method=["a", "b", "c"])
             + _cells({"mode": "sw_reference"})),
    "fig9": _cells({"beta": 2.0}, n_max=[32, 64, 128]),
    "fig10": _cells({"beta": 2.0}, batch_size=[1, 2, 5, 10]),
    "fig12": (_cells({}, beta=[0.0, 2.0], hidden=list(HIDDEN_PRESETS.values()))
              + _cells({"mode": "sw_reference"}, hidden=list(HIDDEN_PRESETS.values()))
              + _cells({"mode": "sw_reference", "epochs": 3}, hidden=[HIDDEN_PRESETS[3]])),
    "fig14": _cells({"beta": 2.0}, sigma=[0.0, 0.5, 1.0], mode=["hw_onchip", "hw_offchip"]),
}
DEVICE_CURVE_BETAS = {"fig6": [0.0, 1.0, 2.0, 3.0]}


class ConfigError(ValueError):
    pass


# -- parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="crossbar-bp",
        description="Train MLPs on simulated differential-pair conductance crossbars. "
                    "Comma lists on grid flags expand into a parameter grid.")
    g = p.add_argument_group("grid axes (comma lists)")
    g.add_argument("--beta", help="device nonlinearity (default 2)")
    g.add_argument("--nmax", help="pulses spanning the conductance range (default 64)")
    g.add_argument("--method", help="saturation update method a|b|c (default b)")
    g.add_argument("--batch-size", help="mini-batch size (default 1)")
    g.add_argument("--sigma", help="device-to-device variation std (default 0)")
    g.add_argument("--mode", help="onchip|offchip|sw (default onchip)")
    g.add_argument("--seed", help="random seed (default 1)")
    g.add_argument("--hidden", action="append",
                   help="hidden sizes as a comma list, e.g. 300,100; repeat for a grid "
                        "(default 200)")
    t = p.add_argument_group("training")
    t.add_argument("--c", help="hard-sigmoid half-width per hidden layer, comma list "
                               "(default: calibrated per preset)")
    t.add_argument("--epochs", help="passes over the training set (default 1)")
    t.add_argument("--eval-interval", help="training samples between evaluations (default 600)")
    t.add_argument("--lr", help="learning rate of the float reference (default 0.01)")
    t.add_argument("--repeats", help="off-chip transfers per cell (default 10)")
    t.add_argument("--final-window", help="checkpoints in the summary window (default 10)")
    t.add_argument("--train-limit", help="use only the first N training samples")
    t.add_argument("--init", help="initial conductances: default|zero")
    t.add_argument("--deadband-output", help="sign dead band on output deltas")
    t.add_argument("--deadband-hidden", help="sign dead band on hidden deltas")
    t.add_argument("--shuffle", action="store_true", default=None,
                   help="seeded shuffle of the training order each epoch")
    d = p.add_argument_group("data and output")
    d.add_argument("--data-dir", help=f"directory holding the MNIST files "
                                      f"(fallback: ${mnist_io.DATA_ENV})")
    for key in DATA_KEYS:
        d.add_argument("--" + key.replace("_", "-"), dest=key)
    d.add_argument("--out", help="output directory (default ./results)")
    d.add_argument("--preset", choices=sorted(PRESETS), help="named experiment grid")
    d.add_argument("--config", help="JSON file of option values; flags win")
    d.add_argument("--jobs", help="parallel cells (default: available cores)")
    d.add_argument("--snapshot-every", help="write crossbar snapshots every N checkpoints")
    d.add_argument("--dry-run", action="store_true",
                   help="print the expanded grid and exit without training")
    d.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    return p


def _read_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config: {path} must hold a table of options")
    known = set(AXES) | set(SCALARS) | set(OTHER_KEYS)
    out = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest == "n_max":
            dest = "nmax"
        if dest not in known:
            raise ConfigError(f"{key}: unknown config key")
        out[dest] = value
    return out


def _as_list(value, key) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    parts = [v.strip() for v in str(value).split(",")]
    if not all(parts):
        raise ConfigError(f"{key}: empty element in {value!r}")
    return parts


def _hidden_list(value) -> list[tuple[int, ...]]:
    # a flat list of ints is one topology; a list of lists or strings is a grid
    if isinstance(value, (list, tuple)) and value and all(isinstance(v, int) for v in value):
        value = [value]
    if not isinstance(value, (list, tuple)):
        value = [value]
    out = []
    for item in value:
        try:
            sizes = tuple(int(v) for v in _as_list(item, "hidden"))
        except ValueError:
            raise ConfigError(f"hidden: cannot parse {item!r} as layer sizes") from None
        out.append(sizes)
    return out


def parse_config(argv=None) -> dict:
    """Resolve flags and an optional config file into a run manifest.

    Returns a dict with ``cells`` (list of ExperimentConfig), ``paths``
    (dataset overrides), ``out``, ``jobs``, ``preset`` and friends.
    """
    ns = build_parser().parse_args(argv)
    file_values = _read_config_file(ns.config) if ns.config else {}
    values = {**file_values, **{k: v for k, v in vars(ns).items() if v is not None}}

    try:
        preset_cells = PRESETS[values["preset"]] if values.get("preset") else [{}]
    except KeyError:
        raise ConfigError(f"preset: unknown preset {values['preset']!r}") from None

    axes = {}
    for dest, (field, conv) in AXES.items():
        if dest in values:
            try:
                axes[field] = [conv(v) for v in _as_list(values[dest], dest)]
            except (ValueError, KeyError):
                raise ConfigError(f"{dest}: cannot parse {values[dest]!r}") from None
    if "hidden" in values:
        axes["hidden"] = _hidden_list(values["hidden"])

    scalars = {}
    for dest, (field, conv) in SCALARS.items():
        if dest in values:
            try:
                scalars[field] = conv(values[dest])
            except ValueError:
                raise ConfigError(f"{dest}: cannot parse {values[dest]!r}") from None
    if values.get("shuffle"):
        scalars["shuffle"] = True
    if "c" in values:
        try:
            scalars["c"] = tuple(float(v) for v in _as_list(values["c"], "c"))
        except ValueError:
            raise ConfigError(f"c: cannot parse {values['c']!r}") from None

    cells, seen = [], set()
    for base in preset_cells:
        keys = list(axes)
        for combo in itertools.product(*(axes[k] for k in keys)):
            fields = {**base, **dict(zip(keys, combo)), **scalars}
            try:
                cfg = ExperimentConfig(**fields)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            key = json.dumps(cfg.to_dict(), sort_keys=True)
            if key not in seen:
                seen.add(key)
                cells.append(cfg)

    jobs = values.get("jobs")
    try:
        jobs = len(os.sched_getaffinity(0)) if jobs is None else int(jobs)
    except (ValueError, AttributeError):
        jobs = os.cpu_count() or 1
    if jobs < 1:
        raise ConfigError("jobs: must be >= 1")
    snapshot_every = int(values.get("snapshot_every") or 0)

    curve_betas = DEVICE_CURVE_BETAS.get(values.get("preset"))
    if curve_betas is None:
        curve_betas = sorted({cfg.beta for cfg in cells})
    nmaxes = sorted({cfg.n_max for cfg in cells}) or [64]
    if "nmax" in axes:
        nmaxes = sorted(set(axes["n_max"]))

    return {
        "cells": cells,
        "paths": {k: values[k] for k in DATA_KEYS if values.get(k)},
        "data_dir": values.get("data_dir"),
        "out": Path(values.get("out") or "results"),
        "jobs": jobs,
        "preset": values.get("preset"),
        "curve_betas": curve_betas,
        "curve_nmax": nmaxes,
        "snapshot_every": snapshot_every,
        "dry_run": bool(values.get("dry_run")),
        "verbose": bool(values.get("verbose")),
    }


# -- output --------------------------------------------------------------

def _fmt(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


def cell_name(cfg: ExperimentConfig) -> str:
    """File stem naming a cell by its parameters."""
    parts = [MODE_SHORT[cfg.mode]]
    if cfg.mode != "sw_reference":
        parts += [f"beta{_fmt(cfg.beta)}", f"nmax{cfg.n_max}", f"method{cfg.method}"]
    parts += [f"batch{cfg.batch_size}"]
    if cfg.mode != "sw_reference":
        parts += [f"sigma{_fmt(cfg.sigma)}"]
    parts += ["hidden" + "-".join(str(h) for h in cfg.hidden), f"ep{cfg.epochs}",
              f"seed{cfg.seed}"]
    return "_".join(parts)


def write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        tmp.write_text(text, newline="")
        os.replace(tmp, path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def metrics_csv(iterations, accuracies) -> str:
    if not iterations:
        raise ValueError("no metrics records to emit")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "accuracy"])
    for it, acc in zip(iterations, accuracies):
        w.writerow([it, repr(float(acc))])
    return buf.getvalue()


def device_curves_csv(betas, n_max: int) -> str:
    """Potentiation and depression curve per nonlinearity, one pulse per row."""
    cols = []
    header = ["pulse_index"]
    for beta in betas:
        pot, dep = trace_response(DeviceParams.from_nonlinearity(beta, n_max), n_max)
        cols += [pot, dep]
        header += [f"g_potentiation_beta{_fmt(float(beta))}",
                   f"g_depression_beta{_fmt(float(beta))}"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for k in range(n_max):
        w.writerow([k + 1] + [repr(float(c[k])) for c in cols])
    return buf.getvalue()


def emit_metrics(result, cfg: ExperimentConfig, out: Path, name: str) -> dict:
    """Write the cell's CSV and summary JSON; return the summary."""
    summary = result.summary()
    if isinstance(result, trainer.OffchipResult):
        series = result.ideal
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["repeat", "accuracy"])
        for r, acc in enumerate(result.accuracies):
            w.writerow([r, repr(float(acc))])
        write_atomic(out / f"{name}_repeats.csv", buf.getvalue())
        wall = series.wall_clock
    else:
        series = result
        wall = result.wall_clock
    write_atomic(out / f"{name}.csv", metrics_csv(series.iterations, series.accuracies))
    doc = {**summary, "config": cfg.to_dict(), "seed": cfg.seed,
           "backend": kernels.BACKEND, "wall_clock": wall}
    write_atomic(out / f"{name}.json", json.dumps(doc, indent=2) + "\n")
    return summary


# -- execution -----------------------------------------------------------

_DATA_CACHE: dict = {}


def _datasets(data_dir, paths):
    key = (data_dir, tuple(sorted(paths.items())))
    if key not in _DATA_CACHE:
        _DATA_CACHE.clear()
        _DATA_CACHE[key] = mnist_io.load_mnist(data_dir, **paths)
    return _DATA_CACHE[key]


def run_cell(cfg: ExperimentConfig, data_dir, paths, out: Path, snapshot_every: int = 0,
             verbose: bool = False) -> dict:
    """Run one grid cell and write its files; failures become an error entry."""
    name = cell_name(cfg)
    entry = {"name": name, "config": cfg.to_dict()}
    try:
        train_set, test_set = _datasets(data_dir, paths)
        kwargs = {"progress": verbose}
        if snapshot_every and cfg.mode != "sw_reference":
            kwargs.update(snapshot_dir=out / f"{name}_snapshots", snapshot_every=snapshot_every)
        result = trainer.run(cfg, train_set, test_set, **kwargs)
        entry["summary"] = emit_metrics(result, cfg, out, name)
        entry["status"] = "ok"
    except Exception as exc:  # recorded per cell, never aborts the grid
        log.error("cell %s failed: %s", name, exc)
        entry["status"] = "failed"
        entry["error"] = f"{type(exc).__name__}: {exc}"
    return entry


def run_grid(manifest: dict) -> list[dict]:
    """Run every cell, write curves and the index; return the index entries."""
    out = manifest["out"]
    out.mkdir(parents=True, exist_ok=True)
    for n in manifest["curve_nmax"]:
        write_atomic(out / f"device_curves_nmax{n}.csv",
                     device_curves_csv(manifest["curve_betas"], n))
    cells = manifest["cells"] if manifest.get("preset") != "fig6" else []
    args = (manifest["data_dir"], manifest["paths"], out, manifest["snapshot_every"],
            manifest["verbose"])
    if manifest["jobs"] > 1 and len(cells) > 1:
        with ProcessPoolExecutor(min(manifest["jobs"], len(cells))) as pool:
            entries = list(pool.map(run_cell, cells, *[[a] * len(cells) for a in args]))
    else:
        entries = [run_cell(cfg, *args) for cfg in cells]
    index = {"backend": kernels.BACKEND, "cells": entries}
    write_atomic(out / "index.json", json.dumps(index, indent=2) + "\n")
    return entries


def _check_data(manifest: dict) -> None:
    try:
        mnist_io.resolve_paths(manifest["data_dir"], **manifest["paths"])
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    try:
        manifest = parse_config(argv)
    except ConfigError as exc:
        print(f"crossbar-bp: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if manifest["verbose"] else logging.WARNING,
                        format="%(asctime)s %(message)s")
    print(f"# crossbar-bp backend={kernels.BACKEND} cells={len(manifest['cells'])} "
          f"out={manifest['out']}")
    for cfg in manifest["cells"]:
        print(f"# {cell_name(cfg)} {json.dumps(cfg.to_dict(), sort_keys=True)}")
    if manifest["dry_run"]:
        return 0
    if manifest.get("preset") != "fig6":
        try:
            _check_data(manifest)
        except ConfigError as exc:
            print(f"crossbar-bp: error: {exc}", file=sys.stderr)
            return 2
    entries = run_grid(manifest)
    failed = [e for e in entries if e["status"] != "ok"]
    for e in entries:
        if e["status"] == "ok":
            print(f"{e['name']}: mean {e['summary']['mean_final_window']:.4f} "
                  f"min {e['summary']['min_final_window']:.4f} "
                  f"max {e['summary']['max_final_window']:.4f}")
        else:
            print(f"{e['name']}: FAILED {e['error']}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
