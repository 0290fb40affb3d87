"""Compare the compiled and numpy update kernels.

Times the per-sample update of a 785x200 crossbar (the first layer of the
default network) with MNIST-like sparsity, then a short training run on
synthetic data through each backend.

    python3 benchmarks/bench_kernels.py [--repeats N] [--samples N]
"""

import argparse
import statistics
import time

import numpy as np

from crossbar_bp import _pykernels, trainer
from crossbar_bp.crossbar import Crossbar
from crossbar_bp.device_model import DeviceParams, conductance_lattice
from crossbar_bp.mnist_io import normalize

try:
    from crossbar_bp import _kernels
except ImportError:
    _kernels = None


def backends():
    out = {"python": _pykernels}
    if _kernels is not None:
        out["cython"] = _kernels
    return out


def bench_outer(backend, beta, repeats, rng_seed=0):
    params = DeviceParams.from_nonlinearity(beta, 64)
    lat = conductance_lattice(params)
    rng = np.random.default_rng(rng_seed)
    kp, km = rng.integers(0, 65, (2, 785, 200))
    cb = Crossbar(785, 200, params, lat[kp], lat[km], backend=backend)
    # about 150 active pixels per MNIST digit
    cases = [(np.sort(rng.choice(785, 150, replace=False)),
              rng.integers(-1, 2, 200).astype(np.int8)) for _ in range(repeats)]
    times = []
    for rows, col_dir in cases:
        t = time.perf_counter()
        cb.apply_outer(rows, col_dir, "b")
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def bench_training(backend, samples):
    rng = np.random.default_rng(1)
    raw = (rng.random((samples, 784)) < 0.19) * rng.integers(0, 256, (samples, 784))
    data = normalize(raw.astype(np.uint8), rng.integers(0, 10, samples))
    cfg = trainer.ExperimentConfig(eval_interval=10**9)
    layers = trainer.build_crossbars(cfg, backend=backend)
    t = time.perf_counter()
    trainer.train_online(cfg, data, data.subset(10), layers=layers)
    return time.perf_counter() - t


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200, help="update calls timed per case")
    ap.add_argument("--samples", type=int, default=1000, help="training samples per run")
    args = ap.parse_args(argv)

    found = backends()
    if "cython" not in found:
        print("compiled extension not built; timing the numpy kernels only")
    print(f"{'case':32s}" + "".join(f"{name:>12s}" for name in found) + "    speedup")
    for beta in (0.0, 2.0):
        t = {name: bench_outer(mod, beta, args.repeats) for name, mod in found.items()}
        row = f"{f'apply_outer 785x200 beta={beta:g} (ms)':32s}"
        row += "".join(f"{v * 1e3:12.3f}" for v in t.values())
        if "cython" in t:
            row += f"{t['python'] / t['cython']:10.1f}x"
        print(row)
    t = {name: bench_training(mod, args.samples) for name, mod in found.items()}
    row = f"{f'train {args.samples} samples (s)':32s}" + "".join(f"{v:12.2f}" for v in t.values())
    if "cython" in t:
        row += f"{t['python'] / t['cython']:10.1f}x"
    print(row)


if __name__ == "__main__":
    main()
