"""Behavioral model of a pulse-programmed conductance device.

Potentiation and depression follow the exponential-saturation update

    G <- G + alpha_p * exp(-beta_p * (G - G_min) / (G_max - G_min))
    G <- G - alpha_d * exp(-beta_d * (G_max - G) / (G_max - G_min))

clamped to ``[g_min, g_max]``.  ``beta`` is the nonlinearity and ``n_max`` the
number of identical pulses that carry a device from ``g_min`` to ``g_max``.
The step scale ``alpha`` is not a free parameter here: it is solved so that
exactly ``n_max`` pulses span the conductance range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SATURATION_TOL = 1e-9
_MAX_BISECTION_STEPS = 200


@dataclass(frozen=True)
class DeviceParams:
    alpha_p: float
    beta_p: float
    alpha_d: float
    beta_d: float
    g_min: float = 0.0
    g_max: float = 1.0
    n_max: int = 64

    def __post_init__(self):
        if not self.g_min < self.g_max:
            raise ValueError(f"g_min ({self.g_min}) must be below g_max ({self.g_max})")
        if self.alpha_p <= 0 or self.alpha_d <= 0:
            raise ValueError("alpha_p and alpha_d must be positive")
        if self.beta_p < 0 or self.beta_d < 0:
            raise ValueError("beta_p and beta_d must be non-negative")
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ValueError(f"n_max must be an integer >= 2, got {self.n_max}")

    @classmethod
    def from_nonlinearity(cls, beta: float, n_max: int, g_min: float = 0.0,
                          g_max: float = 1.0) -> "DeviceParams":
        """Symmetric device whose curves span the range in ``n_max`` pulses."""
        alpha = solve_step_size(beta, n_max, g_min, g_max)
        return cls(alpha, float(beta), alpha, float(beta), float(g_min), float(g_max), int(n_max))

    @property
    def span(self) -> float:
        return self.g_max - self.g_min

    @property
    def nominal_step(self) -> float:
        return self.span / self.n_max


def _unclamped_span(alpha: float, beta: float, pulses: int, g_min: float, g_max: float) -> float:
    span = g_max - g_min
    g = g_min
    for _ in range(pulses):
        g = g + alpha * math.exp(-beta * (g - g_min) / span)
    return g


def solve_step_size(beta: float, n_max: int, g_min: float = 0.0, g_max: float = 1.0) -> float:
    """Return the potentiation step scale for which ``n_max`` pulses span the range.

    With ``beta == 0`` every step is equal and the answer is exactly
    ``(g_max - g_min) / n_max``.  Otherwise the unclamped ``n_max``-pulse
    trajectory is bisected on ``alpha``; the upper bracket is returned, so the
    final pulse lands on or a hair above ``g_max`` and clamping makes the hit
    exact.
    """
    if n_max < 2 or int(n_max) != n_max:
        raise ValueError(f"n_max must be an integer >= 2, got {n_max}")
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    if not g_min < g_max:
        raise ValueError("g_min must be below g_max")
    n_max = int(n_max)
    span = g_max - g_min
    if beta == 0:
        return span / n_max

    lo, hi = span / n_max, span
    at_lo = _unclamped_span(lo, beta, n_max, g_min, g_max)
    if abs(at_lo - g_max) <= 1e-9:
        # beta too small to bend the curve measurably
        return lo
    if at_lo >= g_max:
        raise ValueError(f"no step size spans the range for beta={beta}, n_max={n_max}")
    for _ in range(_MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _unclamped_span(mid, beta, n_max, g_min, g_max) >= g_max:
            hi = mid
        else:
            lo = mid
    else:
        raise ValueError(f"step-size search did not converge for beta={beta}, n_max={n_max}")

    final = _unclamped_span(hi, beta, n_max, g_min, g_max)
    short = _unclamped_span(hi, beta, n_max - 1, g_min, g_max)
    if abs(final - g_max) > 1e-9 or short >= g_max:
        raise ValueError(f"invalid parameter combination beta={beta}, n_max={n_max}")
    return hi


def _check_range(g: float, params: DeviceParams) -> None:
    if not params.g_min <= g <= params.g_max:
        raise ValueError(f"conductance {g} outside [{params.g_min}, {params.g_max}]")


def potentiate(g: float, params: DeviceParams) -> float:
    """One potentiation pulse."""
    _check_range(g, params)
    step = params.alpha_p * math.exp(-params.beta_p * (g - params.g_min) / params.span)
    return min(params.g_max, g + step)


def depress(g: float, params: DeviceParams) -> float:
    """One depression pulse."""
    _check_range(g, params)
    step = params.alpha_d * math.exp(-params.beta_d * (params.g_max - g) / params.span)
    return max(params.g_min, g - step)


def conductance_lattice(params: DeviceParams) -> np.ndarray:
    """Conductance after k = 0..n_max potentiation pulses from ``g_min``.

    Values are produced by literally pulsing, so a device placed at
    ``lattice[k]`` is bit-identical to one pulsed k times.
    """
    out = np.empty(params.n_max + 1)
    g = params.g_min
    out[0] = g
    for k in range(1, params.n_max + 1):
        g = potentiate(g, params)
        out[k] = g
    return out


def trace_response(params: DeviceParams, pulses: int) -> tuple[np.ndarray, np.ndarray]:
    """Potentiation curve from ``g_min`` and depression curve from ``g_max``.

    Returns two arrays of length ``pulses`` holding the conductance after each
    pulse.
    """
    if pulses < 1:
        raise ValueError("pulses must be >= 1")
    pot = np.empty(pulses)
    dep = np.empty(pulses)
    g = params.g_min
    for k in range(pulses):
        g = potentiate(g, params)
        pot[k] = g
    g = params.g_max
    for k in range(pulses):
        g = depress(g, params)
        dep[k] = g
    return pot, dep


def sample_variation(sigma: float, rng: np.random.Generator, size=None):
    """Multiplicative device-to-device conductance scale, ``max(0, N(1, sigma))``."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return 1.0 if size is None else np.ones(size)
    x = np.maximum(rng.normal(1.0, sigma, size), 0.0)
    return float(x) if size is None else x
