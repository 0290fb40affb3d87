"""Multilayer perceptron arithmetic shared by the crossbar and float networks.

Layers are weight matrices of shape ``(fan_in + 1, fan_out)`` whose last row
is the bias synapse, driven by a constant 1.  Anything convertible with
``np.asarray`` works as a layer, including :class:`~crossbar_bp.crossbar.Crossbar`,
whose array form is its effective (variation-scaled) weight matrix.

All functions accept either one sample (1-D) or a batch (2-D, samples first).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INPUT_SIZE = 784
OUTPUT_SIZE = 10
HIDDEN_PRESETS = {1: (200,), 2: (300, 100), 3: (400, 200, 100)}


@dataclass(frozen=True)
class Topology:
    hidden: tuple[int, ...] = (200,)
    c: tuple[float, ...] = (1.0,)
    inputs: int = INPUT_SIZE
    outputs: int = OUTPUT_SIZE

    def __post_init__(self):
        if len(self.hidden) == 0 or any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden sizes must be positive, got {self.hidden}")
        if len(self.c) != len(self.hidden):
            raise ValueError(f"need one c per hidden layer, got {len(self.c)} for {len(self.hidden)}")
        if any(c <= 0 for c in self.c):
            raise ValueError(f"every c must be positive, got {self.c}")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        sizes = [self.inputs, *self.hidden, self.outputs]
        return [(n + 1, m) for n, m in zip(sizes[:-1], sizes[1:])]


@dataclass
class ForwardTrace:
    a: list  # inputs to each weight layer, bias appended
    s: list  # weighted sums of every non-input layer
    gate: list  # hardware derivative of each hidden layer
    p: np.ndarray  # output probabilities


@dataclass
class DeltaSet:
    delta: list = field(default_factory=list)  # one per weight layer, in layer order


def hard_sigmoid(s, c: float):
    """0 below -c, 1 above c, linear ramp ``(s + c) / (2c)`` in between."""
    return np.clip((np.asarray(s, dtype=np.float64) + c) / (2.0 * c), 0.0, 1.0)


def hard_sigmoid_gate(s, c: float):
    """1 on the ramp (boundary included), else 0."""
    return (np.abs(np.asarray(s, dtype=np.float64)) <= c).astype(np.float64)


def softmax(s):
    s = np.asarray(s, dtype=np.float64)
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def with_bias(a):
    a = np.asarray(a, dtype=np.float64)
    ones = np.ones(a.shape[:-1] + (1,))
    return np.concatenate([a, ones], axis=-1)


def forward(x, layers, c) -> ForwardTrace:
    """Propagate pixels ``x`` (no bias slot) through ``layers``."""
    c = tuple(c)
    if len(c) != len(layers) - 1:
        raise ValueError(f"need {len(layers) - 1} c values, got {len(c)}")
    h = with_bias(x)
    a, s_all, gates = [], [], []
    for k, layer in enumerate(layers):
        w = np.asarray(layer)
        if h.shape[-1] != w.shape[0]:
            raise ValueError(f"layer {k} expects {w.shape[0]} inputs, got {h.shape[-1]}")
        a.append(h)
        s = h @ w
        s_all.append(s)
        if k < len(layers) - 1:
            gates.append(hard_sigmoid_gate(s, c[k]))
            h = with_bias(hard_sigmoid(s, c[k]))
    return ForwardTrace(a=a, s=s_all, gate=gates, p=softmax(s_all[-1]))


def one_hot(labels, n: int = OUTPUT_SIZE):
    labels = np.asarray(labels)
    return (labels[..., None] == np.arange(n)).astype(np.float64)


def output_delta(p, target):
    """Cross-entropy gradient with respect to the output weighted sums."""
    return np.asarray(p, dtype=np.float64) - np.asarray(target, dtype=np.float64)


def hidden_delta(layer, delta_next, gate):
    """Backward-weighted sum through ``layer`` (bias row skipped), times the gate."""
    w = np.asarray(layer)
    return (np.asarray(delta_next) @ w[:-1].T) * gate


def backward(trace: ForwardTrace, layers, target, derivative=None) -> DeltaSet:
    """All deltas for one trace.

    ``derivative`` scales the hidden gates; the hardware rule uses 1, the
    float reference passes ``1 / (2c)`` per layer.
    """
    deltas = [output_delta(trace.p, target)]
    for k in range(len(layers) - 1, 0, -1):
        gate = trace.gate[k - 1]
        if derivative is not None:
            gate = gate * derivative[k - 1]
        deltas.append(hidden_delta(layers[k], deltas[-1], gate))
    return DeltaSet(delta=deltas[::-1])


def _thresholds(threshold, n_layers):
    t = np.broadcast_to(np.asarray(threshold, dtype=np.float64), (n_layers,))
    if np.any(t < 0):
        raise ValueError(f"sign thresholds must be non-negative, got {threshold}")
    return t


def delta_sign(delta, threshold: float = 0.0):
    """Sign of ``delta`` with a dead band: 0 wherever ``|delta| <= threshold``.

    With ``threshold=0`` only exact zeros are silent.
    """
    d = np.asarray(delta, dtype=np.float64)
    return np.where(np.abs(d) > threshold, np.sign(d), 0.0)


def signal_factors(trace: ForwardTrace, deltas: DeltaSet, threshold=0.0):
    """Per layer, the rows with positive input and the direction of each column.

    A pair (i, j) moves in direction ``col_dir[j]`` iff ``i`` is in ``rows``.
    ``threshold`` is the sign detector's dead band, scalar or one per layer.
    Single-sample traces only.
    """
    out = []
    th = _thresholds(threshold, len(deltas.delta))
    for a, d, t in zip(trace.a, deltas.delta, th):
        rows = np.flatnonzero(a > 0)
        col_dir = (-delta_sign(d, t)).astype(np.int8)
        out.append((rows, col_dir))
    return out


def update_signals(trace: ForwardTrace, deltas: DeltaSet, threshold=0.0) -> list[np.ndarray]:
    """Direction grid per layer: +1 increase, -1 decrease, 0 none."""
    grids = []
    th = _thresholds(threshold, len(deltas.delta))
    for a, d, t in zip(trace.a, deltas.delta, th):
        grids.append(np.outer(a > 0, -delta_sign(d, t)).astype(np.int8))
    return grids


def predict(x, layers, c):
    """Class with the highest output probability (lowest index on ties)."""
    return np.argmax(forward(x, layers, c).p, axis=-1)


def cross_entropy(x, layers, c, label) -> float:
    p = forward(x, layers, c).p
    return float(-np.log(p[..., label]))
