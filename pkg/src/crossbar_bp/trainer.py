"""Online training of crossbar networks and of the float reference network.

Training walks the training set in order (optionally shuffled per epoch),
runs forward and backward passes against the effective crossbar weights and
applies at most one update event per synapse per mini-batch, in the
direction of the sign of that synapse's accumulated vote.  Test accuracy is
recorded every ``eval_interval`` training samples.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import network
from .crossbar import Crossbar, UpdateMethod
from .device_model import DeviceParams
from .mnist_io import Dataset

log = logging.getLogger(__name__)

MODES = ("hw_onchip", "hw_offchip", "sw_reference")

# Hard-sigmoid half-widths per hidden preset, from the pilot sweep in
# calibrate_c over {1, 2, 5, 10, 20} (first 5,000 training samples, scored on
# training samples 50,000+; deeper presets keep the shallower choices).  The
# hardware modes share one table; the float reference has its own.  In
# hardware, deeper layers see dense activations and one-step updates on
# every row, so their sums spread wider and want a wider ramp.
DEFAULT_C = {
    (200,): (5.0,),
    (300, 100): (5.0, 10.0),
    (400, 200, 100): (5.0, 10.0, 10.0),
}
DEFAULT_C_SW = {
    (200,): (1.0,),
    (300, 100): (1.0, 1.0),
    (400, 200, 100): (1.0, 1.0, 1.0),
}
FALLBACK_C_FIRST = 5.0
FALLBACK_C_DEEPER = 10.0
FALLBACK_C_SW = 1.0

# Sign-detector dead bands: deltas with magnitude at or below these produce no
# update.  The softmax error of a non-target class is never exactly zero, so
# without an output dead band every non-target column is pushed down on every
# sample.  Zero for both gives the bare sign rule.  Values chosen by a scan
# trained on the first 50,000 training samples and scored on the rest.
DEFAULT_DEADBAND_OUTPUT = 0.15
DEFAULT_DEADBAND_HIDDEN = 0.07

# Independent random streams derived from the run seed.
_STREAM_INIT, _STREAM_VARIATION, _STREAM_SHUFFLE, _STREAM_OFFCHIP = range(4)


def default_c(hidden, mode: str = "hw_onchip") -> tuple[float, ...]:
    hidden = tuple(hidden)
    if mode == "sw_reference":
        return DEFAULT_C_SW.get(hidden, (FALLBACK_C_SW,) * len(hidden))
    if hidden in DEFAULT_C:
        return DEFAULT_C[hidden]
    return (FALLBACK_C_FIRST,) + (FALLBACK_C_DEEPER,) * (len(hidden) - 1)


@dataclass(frozen=True)
class ExperimentConfig:
    beta: float = 2.0
    n_max: int = 64
    method: str = "b"
    batch_size: int = 1
    sigma: float = 0.0
    mode: str = "hw_onchip"
    hidden: tuple[int, ...] = (200,)
    epochs: int = 1
    seed: int = 1
    eval_interval: int = 600
    c: tuple[float, ...] | None = None
    learning_rate: float = 0.01
    deadband_output: float = DEFAULT_DEADBAND_OUTPUT
    deadband_hidden: float = DEFAULT_DEADBAND_HIDDEN
    repeats: int = 10
    final_window: int = 10
    init: str = "default"
    shuffle: bool = False
    train_limit: int | None = None

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "hidden", tuple(int(h) for h in self.hidden))
        try:
            set_(self, "method", UpdateMethod.parse(self.method).value)
        except ValueError as exc:
            raise ValueError(f"method: {exc}") from None
        c = default_c(self.hidden, self.mode) if self.c is None else tuple(float(v) for v in self.c)
        if len(c) == 1 and len(self.hidden) > 1:
            c = c * len(self.hidden)
        set_(self, "c", c)
        checks = [
            ("mode", self.mode in MODES, f"one of {MODES}"),
            ("beta", self.beta >= 0, ">= 0"),
            ("n_max", int(self.n_max) == self.n_max and self.n_max >= 2, "an integer >= 2"),
            ("batch_size", self.batch_size >= 1, ">= 1"),
            ("sigma", self.sigma >= 0, ">= 0"),
            ("hidden", len(self.hidden) > 0 and min(self.hidden) >= 1, "positive sizes"),
            ("epochs", self.epochs >= 1, ">= 1"),
            ("eval_interval", self.eval_interval >= 1, ">= 1"),
            ("c", len(c) == len(self.hidden) and min(c) > 0,
             "one positive value per hidden layer"),
            ("learning_rate", self.learning_rate >= 0, ">= 0"),
            ("deadband_output", self.deadband_output >= 0, ">= 0"),
            ("deadband_hidden", self.deadband_hidden >= 0, ">= 0"),
            ("repeats", self.repeats >= 1, ">= 1"),
            ("final_window", self.final_window >= 1, ">= 1"),
            ("init", self.init in ("default", "zero"), "'default' or 'zero'"),
            ("train_limit", self.train_limit is None or self.train_limit >= 1, ">= 1"),
        ]
        for key, ok, what in checks:
            if not ok:
                raise ValueError(f"{key}: invalid value {getattr(self, key)!r}, must be {what}")

    @property
    def topology(self) -> network.Topology:
        return network.Topology(hidden=self.hidden, c=self.c)

    @property
    def deadbands(self) -> tuple[float, ...]:
        """Sign-detector dead band for each weight layer, input side first."""
        return (self.deadband_hidden,) * len(self.hidden) + (self.deadband_output,)

    def device_params(self) -> DeviceParams:
        return DeviceParams.from_nonlinearity(self.beta, self.n_max)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        d["c"] = list(self.c)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
        d = dict(d)
        for key in ("hidden", "c"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class RunResult:
    config: ExperimentConfig
    iterations: list[int] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)
    layers: list = field(default_factory=list)
    wall_clock: float = 0.0

    def record(self, iteration: int, accuracy: float) -> None:
        self.iterations.append(iteration)
        self.accuracies.append(accuracy)

    def window(self) -> np.ndarray:
        return np.asarray(self.accuracies[-self.config.final_window:])

    def summary(self) -> dict:
        w = self.window()
        return {"mean_final_window": float(np.mean(w)),
                "min_final_window": float(np.min(w)),
                "max_final_window": float(np.max(w))}


@dataclass
class OffchipResult:
    config: ExperimentConfig
    ideal: RunResult
    accuracies: list[float]

    def summary(self) -> dict:
        a = np.asarray(self.accuracies)
        return {"mean_final_window": float(a.mean()),
                "min_final_window": float(a.min()),
                "max_final_window": float(a.max()),
                "repeat_accuracies": [float(v) for v in a],
                "ideal": self.ideal.summary()}


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def build_crossbars(config: ExperimentConfig, sigma: float | None = None,
                    backend=None) -> list[Crossbar]:
    params = config.device_params()
    sigma = config.sigma if sigma is None else sigma
    init_rng = _rng(config.seed, _STREAM_INIT)
    var_rng = _rng(config.seed, _STREAM_VARIATION)
    return [Crossbar.init_array(n, m, params, init_rng, config.init, sigma, var_rng,
                                backend=backend)
            for n, m in config.topology.layer_shapes]


def init_float_weights(config: ExperimentConfig) -> list[np.ndarray]:
    """Float weights drawn the way a linear-device crossbar is initialized."""
    params = DeviceParams.from_nonlinearity(0.0, config.n_max)
    init_rng = _rng(config.seed, _STREAM_INIT)
    out = []
    for n, m in config.topology.layer_shapes:
        if config.init == "zero":
            out.append(np.zeros((n, m)))
            continue
        top = params.n_max // 8
        kp = init_rng.integers(0, top, size=(n, m), endpoint=True)
        km = init_rng.integers(0, top, size=(n, m), endpoint=True)
        out.append((kp - km) * params.nominal_step)
    return out


def evaluate(layers, test_set: Dataset, c, chunk: int = 2500) -> float:
    """Fraction of test samples whose most probable class is the label."""
    correct = 0
    for start in range(0, test_set.count, chunk):
        x = test_set.images[start:start + chunk]
        pred = network.predict(x, layers, c)
        correct += int(np.count_nonzero(pred == test_set.labels[start:start + chunk]))
    return correct / test_set.count


def _training_order(config: ExperimentConfig, n: int, epoch_rng) -> np.ndarray:
    if config.shuffle:
        return epoch_rng.permutation(n)
    return np.arange(n)


def _check_data(config: ExperimentConfig, train_set: Dataset, test_set: Dataset):
    for name, ds in (("train", train_set), ("test", test_set)):
        if ds.images.ndim != 2 or ds.images.shape[1] != network.INPUT_SIZE:
            raise ValueError(f"{name} images must be (count, {network.INPUT_SIZE})")
    n = train_set.count if config.train_limit is None else min(config.train_limit,
                                                               train_set.count)
    return n


class _Schedule:
    """Checkpoint bookkeeping: evaluate whenever a multiple of the interval is crossed."""

    def __init__(self, interval: int):
        self.interval = interval
        self.done = 0
        self.last = 0

    def advance(self, n: int) -> bool:
        self.done += n
        if self.done // self.interval > self.last // self.interval:
            self.last = self.done
            return True
        return False


def train_online(config: ExperimentConfig, train_set: Dataset, test_set: Dataset,
                 layers: list[Crossbar] | None = None, backend=None,
                 snapshot_dir=None, snapshot_every: int = 0,
                 progress: bool = False) -> RunResult:
    """Train crossbar layers with sign-only, one-pulse updates."""
    if config.mode == "sw_reference":
        raise ValueError("train_online needs a hardware mode; use train_reference_sw")
    n = _check_data(config, train_set, test_set)
    if layers is None:
        layers = build_crossbars(config, backend=backend)
    shapes = [(cb.rows, cb.cols) for cb in layers]
    if shapes != config.topology.layer_shapes:
        raise ValueError(f"crossbar shapes {shapes} do not match {config.topology.layer_shapes}")
    method = UpdateMethod.parse(config.method)
    c = config.c
    deadbands = config.deadbands
    result = RunResult(config, layers=layers)
    sched = _Schedule(config.eval_interval)
    shuffle_rng = _rng(config.seed, _STREAM_SHUFFLE)
    images, labels = train_set.images, train_set.labels
    targets = np.eye(network.OUTPUT_SIZE)
    bs = config.batch_size
    t0 = time.perf_counter()
    n_checkpoints = 0

    for _ in range(config.epochs):
        order = _training_order(config, n, shuffle_rng)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            if bs == 1:
                k = idx[0]
                trace = network.forward(images[k], layers, c)
                deltas = network.backward(trace, layers, targets[labels[k]])
                factors = network.signal_factors(trace, deltas, deadbands)
                for cb, (rows, col_dir) in zip(layers, factors):
                    cb.apply_outer(rows, col_dir, method)
            else:
                trace = network.forward(images[idx], layers, c)
                deltas = network.backward(trace, layers, targets[labels[idx]])
                for cb, a, d, t in zip(layers, trace.a, deltas.delta, deadbands):
                    votes = (a > 0).T.astype(np.float64) @ -network.delta_sign(d, t)
                    cb.apply_votes(np.rint(votes), method)
            if sched.advance(len(idx)):
                acc = evaluate(layers, test_set, c)
                result.record(sched.done, acc)
                n_checkpoints += 1
                if progress:
                    log.info("iteration %d accuracy %.4f", sched.done, acc)
                if snapshot_dir and snapshot_every and n_checkpoints % snapshot_every == 0:
                    _snapshot(layers, snapshot_dir, sched.done)
    if not result.iterations or result.iterations[-1] != sched.done:
        result.record(sched.done, evaluate(layers, test_set, c))
    if snapshot_dir:
        _snapshot(layers, snapshot_dir, None)
    result.wall_clock = time.perf_counter() - t0
    return result


def _snapshot(layers, directory, iteration):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tag = "final" if iteration is None else f"it{iteration:08d}"
    for k, cb in enumerate(layers):
        cb.save(directory / f"layer{k}_{tag}.xbar")


def train_reference_sw(config: ExperimentConfig, train_set: Dataset, test_set: Dataset,
                       weights: list[np.ndarray] | None = None,
                       progress: bool = False) -> RunResult:
    """Float-weight online backpropagation with the true hard-sigmoid derivative."""
    n = _check_data(config, train_set, test_set)
    weights = init_float_weights(config) if weights is None else [w.copy() for w in weights]
    c = config.c
    derivative = [1.0 / (2.0 * ci) for ci in c]
    lr = config.learning_rate
    result = RunResult(config, layers=weights)
    sched = _Schedule(config.eval_interval)
    shuffle_rng = _rng(config.seed, _STREAM_SHUFFLE)
    images, labels = train_set.images, train_set.labels
    targets = np.eye(network.OUTPUT_SIZE)
    bs = config.batch_size
    t0 = time.perf_counter()

    for _ in range(config.epochs):
        order = _training_order(config, n, shuffle_rng)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            x = images[idx]
            trace = network.forward(x, weights, c)
            deltas = network.backward(trace, weights, targets[labels[idx]], derivative)
            if lr:
                for w, a, d in zip(weights, trace.a, deltas.delta):
                    w -= lr * (a.T @ d)
            if sched.advance(len(idx)):
                acc = evaluate(weights, test_set, c)
                result.record(sched.done, acc)
                if progress:
                    log.info("iteration %d accuracy %.4f", sched.done, acc)
    if not result.iterations or result.iterations[-1] != sched.done:
        result.record(sched.done, evaluate(weights, test_set, c))
    result.wall_clock = time.perf_counter() - t0
    return result


def sw_gradients(weights, x, label, c) -> list[np.ndarray]:
    """Cross-entropy gradient of every weight matrix for one sample."""
    trace = network.forward(x, weights, c)
    target = network.one_hot(label)
    deltas = network.backward(trace, weights, target, [1.0 / (2.0 * ci) for ci in c])
    return [np.outer(a, d) for a, d in zip(trace.a, deltas.delta)]


def run_onchip_experiment(config: ExperimentConfig, train_set: Dataset, test_set: Dataset,
                          **kwargs) -> RunResult:
    """Train in the loop on an array whose variation is fixed at construction."""
    return train_online(config.replace(mode="hw_onchip"), train_set, test_set, **kwargs)


def transfer(ideal_layers, config: ExperimentConfig, repeat: int, backend=None) -> list[Crossbar]:
    """Program ideal weights onto a fresh array carrying sampled variation."""
    var_rng = _rng(config.seed, _STREAM_OFFCHIP, repeat)
    out = []
    for cb in ideal_layers:
        fresh = Crossbar.init_array(cb.rows, cb.cols, cb.params, scheme="zero",
                                    sigma=config.sigma, variation_rng=var_rng, backend=backend)
        fresh.program_weights(cb.nominal_weights())
        out.append(fresh)
    return out


def run_offchip_experiment(config: ExperimentConfig, train_set: Dataset, test_set: Dataset,
                           ideal: RunResult | None = None, **kwargs) -> OffchipResult:
    """Train on ideal devices, then transfer onto ``repeats`` varied arrays."""
    if ideal is None:
        ideal_cfg = config.replace(mode="hw_onchip", sigma=0.0)
        ideal = train_online(ideal_cfg, train_set, test_set, **kwargs)
    accs = []
    for r in range(config.repeats):
        layers = transfer(ideal.layers, config, r, backend=kwargs.get("backend"))
        accs.append(evaluate(layers, test_set, config.c))
    return OffchipResult(config, ideal, accs)


def run(config: ExperimentConfig, train_set: Dataset, test_set: Dataset, **kwargs):
    """Dispatch on ``config.mode``."""
    if config.mode == "sw_reference":
        kwargs.pop("snapshot_dir", None)
        kwargs.pop("snapshot_every", None)
        kwargs.pop("backend", None)
        return train_reference_sw(config, train_set, test_set, **kwargs)
    if config.mode == "hw_offchip":
        return run_offchip_experiment(config, train_set, test_set, **kwargs)
    return train_online(config, train_set, test_set, **kwargs)


C_CANDIDATES = (1.0, 2.0, 5.0, 10.0, 20.0)


def calibrate_c(config: ExperimentConfig, train_set: Dataset, fixed=(), candidates=C_CANDIDATES,
                n_train: int = 5000, holdout_start: int = 50000) -> tuple[float, dict]:
    """Pick the hard-sigmoid half-width with the best held-out accuracy.

    The first ``len(fixed)`` hidden layers keep the given values; each
    candidate is used for all remaining hidden layers.  Training uses the
    first ``n_train`` samples and scoring uses training samples from
    ``holdout_start`` on, which the pilot never trains on.  Returns the best
    value (ties go to the smaller one) and the accuracy of every candidate.
    """
    fixed = tuple(float(v) for v in fixed)
    if len(fixed) >= len(config.hidden):
        raise ValueError(f"{len(fixed)} fixed values leave no hidden layer of "
                         f"{list(config.hidden)} to calibrate")
    if holdout_start < n_train or holdout_start >= train_set.count:
        raise ValueError(f"holdout_start {holdout_start} must lie in [{n_train}, "
                         f"{train_set.count})")
    pilot = train_set.subset(n_train)
    holdout = Dataset(train_set.images[holdout_start:], train_set.labels[holdout_start:])
    scores = {}
    for value in candidates:
        c = fixed + (float(value),) * (len(config.hidden) - len(fixed))
        cfg = config.replace(c=c, epochs=1, eval_interval=n_train, train_limit=None)
        result = run(cfg, pilot, holdout)
        if cfg.mode == "hw_offchip":
            scores[float(value)] = float(np.mean(result.accuracies))
        else:
            scores[float(value)] = result.accuracies[-1]
    best = max(scores, key=lambda v: (scores[v], -v))
    return best, scores
