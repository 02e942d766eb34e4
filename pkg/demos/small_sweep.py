"""A small end-to-end sweep: train pools, run every attack, print the heatmap.

Uses configs/smoke.json (tiny pools, runs in well under a minute) and writes
its outputs to a temporary directory. With four models per ratio the
meta-classifier has almost nothing to learn from and sits near chance; the
black-box attacks already separate the pools. configs/desk.json is the
setting where the meta-classifier is meaningful.

    python demos/small_sweep.py
"""

import pathlib
import tempfile

from distinf import harness

CONFIG = pathlib.Path(__file__).resolve().parents[1] / "configs" / "smoke.json"


def main():
    cfg = harness.load_config(CONFIG)
    print(f"grid {cfg.alpha_grid}, {cfg.n_victim} victims / {cfg.n_shadow} shadows per ratio, "
          f"{cfg.repetitions} reps, config {cfg.config_hash()}")
    result = harness.run_sweep(cfg, progress=lambda rep, a0, a1: print(f"  rep {rep} pair ({a0}, {a1}) done"))

    for (a0, a1, attack), cell in result.cells().items():
        acc = cell["mean_accuracy"]
        print(f"{attack:>13} ({a0}, {a1}): omega {acc:.3f} +- {cell['std_accuracy']:.3f}, "
              f"n_leaked {cell['n_leaked_values']}")

    # upper triangle: accuracy, lower triangle: n_leaked
    print("\nmeta heatmap\n" + harness.emit_heatmap(result, "meta"))

    with tempfile.TemporaryDirectory() as tmp:
        files = harness.write_outputs(result, tmp)
        print("wrote", ", ".join(files))


if __name__ == "__main__":
    main()
