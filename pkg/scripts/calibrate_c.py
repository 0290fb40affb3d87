"""Pilot sweep for the hard-sigmoid half-width c of each hidden preset.

Trains the default hardware cell on the first 5,000 MNIST training samples
for every candidate c and scores it on training samples 50,000+.  Presets
are calibrated shallowest first: a deeper preset keeps the values already
chosen for its leading layers and sweeps only its new last layer.  The best
values are the ones pinned in ``trainer.DEFAULT_C`` (hardware modes) and
``trainer.DEFAULT_C_SW`` (float reference).

    python3 scripts/calibrate_c.py [--data-dir DIR]
"""

import argparse

from crossbar_bp import mnist_io, network, trainer


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir", default=None)
    args = ap.parse_args(argv)
    train, _ = mnist_io.load_mnist(args.data_dir)
    for mode in ("hw_onchip", "sw_reference"):
        chosen = ()
        for hidden in network.HIDDEN_PRESETS.values():
            cfg = trainer.ExperimentConfig(hidden=hidden, mode=mode)
            best, scores = trainer.calibrate_c(cfg, train, fixed=chosen)
            chosen = chosen + (best,)
            table = "  ".join(f"c={v:g}: {100 * a:.2f}" for v, a in scores.items())
            print(f"{mode} hidden {list(hidden)}  {table}  -> c = {chosen}", flush=True)


if __name__ == "__main__":
    main()
