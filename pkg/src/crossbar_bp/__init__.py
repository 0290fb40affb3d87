"""Crossbar-array backpropagation with nonlinear, saturating conductance devices."""

from .crossbar import Crossbar, Direction, UpdateMethod
from .device_model import DeviceParams
from .kernels import BACKEND
from .trainer import ExperimentConfig

__all__ = ["BACKEND", "Crossbar", "DeviceParams", "Direction", "ExperimentConfig", "UpdateMethod"]
