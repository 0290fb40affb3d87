"""Differential-pair synapse array.

Each synapse is a pair of devices (G+, G-) with static variation factors
(x+, x-).  The effective weight read by the array is ``x+ * G+ - x- * G-``;
updates act on the nominal conductances only.  The effective weight matrix is
cached and refreshed pair by pair as updates land, so forward and backward
products are plain dense products against it.
"""

from __future__ import annotations

import enum
from pathlib import Path

import numpy as np

from . import kernels
from .device_model import SATURATION_TOL, DeviceParams, conductance_lattice, sample_variation

SNAPSHOT_MAGIC = "crossbar-bp-snapshot v1"


class UpdateMethod(enum.Enum):
    """What to do when the device that should be potentiated is saturated."""

    A = "a"  # reset both devices, re-program the old weight, then pulse once more
    B = "b"  # reset the opposing device and re-program it one step short
    C = "c"  # depress the opposing device one step

    @property
    def code(self) -> int:
        return "abc".index(self.value)

    @classmethod
    def parse(cls, value) -> "UpdateMethod":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key == "d":
            raise ValueError("method 'd' is the dual-saturation reset applied under every "
                             "method, not a selectable update method; choose a, b or c")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown update method {value!r}; choose a, b or c") from None


class Direction(enum.IntEnum):
    DECREASE = -1
    NONE = 0
    INCREASE = 1


class Crossbar:
    """``rows x cols`` array of conductance pairs sharing one device model."""

    def __init__(self, rows: int, cols: int, params: DeviceParams, g_plus=None, g_minus=None,
                 x_plus=None, x_minus=None, backend=None):
        if rows < 1 or cols < 1:
            raise ValueError(f"crossbar dimensions must be positive, got {rows}x{cols}")
        self.rows, self.cols = int(rows), int(cols)
        self.params = params
        shape = (self.rows, self.cols)

        def _field(value, fill):
            if value is None:
                return np.full(shape, fill, dtype=np.float64)
            arr = np.array(value, dtype=np.float64, order="C")
            if arr.shape != shape:
                raise ValueError(f"expected array of shape {shape}, got {arr.shape}")
            return arr

        self.g_plus = _field(g_plus, params.g_min)
        self.g_minus = _field(g_minus, params.g_min)
        self.x_plus = _field(x_plus, 1.0)
        self.x_minus = _field(x_minus, 1.0)
        for name in ("g_plus", "g_minus"):
            g = getattr(self, name)
            if g.min() < params.g_min or g.max() > params.g_max:
                raise ValueError(f"{name} outside [{params.g_min}, {params.g_max}]")
        if self.x_plus.min() < 0 or self.x_minus.min() < 0:
            raise ValueError("variation factors must be non-negative")
        self._k = kernels._impl if backend is None else backend
        self._w = np.empty(shape)
        self.refresh()

    @classmethod
    def init_array(cls, rows: int, cols: int, params: DeviceParams,
                   rng: np.random.Generator | None = None, scheme: str = "default",
                   sigma: float = 0.0, variation_rng: np.random.Generator | None = None,
                   backend=None) -> "Crossbar":
        """Fresh array.

        ``scheme="default"`` puts every device at an independent uniform pulse
        count in ``[0, n_max // 8]``; ``scheme="zero"`` leaves all devices at
        ``g_min``.  Variation factors are drawn from ``variation_rng`` (x+ grid
        first, then x-) unless ``sigma`` is zero.
        """
        shape = (rows, cols)
        if scheme == "zero":
            gp = gm = None
        elif scheme == "default":
            if rng is None:
                raise ValueError("default initialization needs an rng")
            lattice = conductance_lattice(params)
            top = params.n_max // 8
            gp = lattice[rng.integers(0, top, size=shape, endpoint=True)]
            gm = lattice[rng.integers(0, top, size=shape, endpoint=True)]
        else:
            raise ValueError(f"unknown initialization scheme {scheme!r}")
        xp = xm = None
        if sigma > 0:
            if variation_rng is None:
                raise ValueError("sigma > 0 needs a variation_rng")
            xp = sample_variation(sigma, variation_rng, shape)
            xm = sample_variation(sigma, variation_rng, shape)
        return cls(rows, cols, params, gp, gm, xp, xm, backend=backend)

    # -- readout ---------------------------------------------------------

    def refresh(self) -> None:
        np.subtract(self.x_plus * self.g_plus, self.x_minus * self.g_minus, out=self._w)

    @property
    def weights(self) -> np.ndarray:
        """Effective weight matrix (read-only view of the cache)."""
        view = self._w.view()
        view.flags.writeable = False
        return view

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    def nominal_weights(self) -> np.ndarray:
        return self.g_plus - self.g_minus

    def read_weight(self, i: int, j: int) -> float:
        self._check_index(i, j)
        return float(self.x_plus[i, j] * self.g_plus[i, j] - self.x_minus[i, j] * self.g_minus[i, j])

    def forward_mvm(self, voltages) -> np.ndarray:
        v = np.asarray(voltages, dtype=np.float64)
        if v.shape[-1] != self.rows:
            raise ValueError(f"forward input length {v.shape[-1]} != rows {self.rows}")
        return v @ self._w

    def backward_mvm(self, voltages) -> np.ndarray:
        v = np.asarray(voltages, dtype=np.float64)
        if v.shape[-1] != self.cols:
            raise ValueError(f"backward input length {v.shape[-1]} != cols {self.cols}")
        return v @ self._w.T

    # -- updates ---------------------------------------------------------

    def _check_index(self, i, j):
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"pair ({i}, {j}) outside {self.rows}x{self.cols} array")

    def apply_update(self, i: int, j: int, direction, method) -> None:
        """One weight-update event on pair (i, j)."""
        self._check_index(i, j)
        d = int(Direction(direction))
        self._k.apply_single(self.g_plus, self.g_minus, self.x_plus, self.x_minus, self._w,
                             i, j, d, UpdateMethod.parse(method).code, self.params,
                             SATURATION_TOL)

    def apply_outer(self, rows, col_dir, method) -> None:
        """Update pairs (i, j) for i in ``rows`` in direction ``col_dir[j]`` (+1/-1/0)."""
        rows = np.ascontiguousarray(rows, dtype=np.intp)
        col_dir = np.ascontiguousarray(col_dir, dtype=np.int8)
        if col_dir.shape != (self.cols,):
            raise ValueError(f"col_dir must have length {self.cols}")
        if rows.size and (rows.min() < 0 or rows.max() >= self.rows):
            raise IndexError("row index out of range")
        self._k.apply_outer(self.g_plus, self.g_minus, self.x_plus, self.x_minus, self._w,
                            rows, col_dir, UpdateMethod.parse(method).code, self.params,
                            SATURATION_TOL)

    def apply_votes(self, votes, method) -> None:
        """One update per pair in the direction of ``sign(votes[i, j])``."""
        votes = np.ascontiguousarray(votes, dtype=np.intc)
        if votes.shape != (self.rows, self.cols):
            raise ValueError(f"votes must have shape {(self.rows, self.cols)}")
        self._k.apply_votes(self.g_plus, self.g_minus, self.x_plus, self.x_minus, self._w,
                            votes, UpdateMethod.parse(method).code, self.params,
                            SATURATION_TOL)

    def program_weights(self, targets) -> None:
        """Write target weights assuming ideal, variation-free devices.

        The device on the sign side of each target is pulsed from ``g_min``
        until it reaches the target magnitude; the other stays at ``g_min``.
        """
        t = np.asarray(targets, dtype=np.float64)
        if t.shape != (self.rows, self.cols):
            raise ValueError(f"targets must have shape {(self.rows, self.cols)}")
        p = self.params
        if np.abs(t).max(initial=0.0) > p.span:
            raise ValueError(f"target weights exceed the representable range +-{p.span}")
        lattice = conductance_lattice(p)
        k = np.searchsorted(lattice - p.g_min, np.abs(t), side="left")
        k = np.minimum(k, p.n_max)
        g = lattice[k]
        self.g_plus = np.where(t > 0, g, p.g_min)
        self.g_minus = np.where(t < 0, g, p.g_min)
        self.refresh()

    def copy(self) -> "Crossbar":
        return Crossbar(self.rows, self.cols, self.params, self.g_plus, self.g_minus,
                        self.x_plus, self.x_minus, backend=self._k)

    # -- snapshots -------------------------------------------------------

    def save(self, path) -> None:
        """Text header line, then (g+, g-, x+, x-) per pair as little-endian float64."""
        p = self.params
        header = (f"{SNAPSHOT_MAGIC} rows={self.rows} cols={self.cols} "
                  f"alpha_p={p.alpha_p!r} beta_p={p.beta_p!r} alpha_d={p.alpha_d!r} "
                  f"beta_d={p.beta_d!r} g_min={p.g_min!r} g_max={p.g_max!r} n_max={p.n_max}\n")
        body = np.stack([self.g_plus, self.g_minus, self.x_plus, self.x_minus], axis=-1)
        Path(path).write_bytes(header.encode("ascii") + body.astype("<f8").tobytes())

    @classmethod
    def load(cls, path, backend=None) -> "Crossbar":
        raw = Path(path).read_bytes()
        nl = raw.find(b"\n")
        if nl < 0 or not raw.startswith(SNAPSHOT_MAGIC.encode()):
            raise ValueError(f"{path}: not a crossbar snapshot")
        fields = dict(tok.split("=", 1) for tok in raw[len(SNAPSHOT_MAGIC):nl].decode().split())
        rows, cols = int(fields["rows"]), int(fields["cols"])
        params = DeviceParams(float(fields["alpha_p"]), float(fields["beta_p"]),
                              float(fields["alpha_d"]), float(fields["beta_d"]),
                              float(fields["g_min"]), float(fields["g_max"]),
                              int(fields["n_max"]))
        payload = raw[nl + 1:]
        expected = rows * cols * 4 * 8
        if len(payload) != expected:
            raise ValueError(f"{path}: expected {expected} payload bytes, found {len(payload)}")
        body = np.frombuffer(payload, dtype="<f8").reshape(rows, cols, 4).astype(np.float64)
        return cls(rows, cols, params, body[..., 0], body[..., 1], body[..., 2], body[..., 3],
                   backend=backend)
