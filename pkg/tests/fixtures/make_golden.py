"""Regenerate the golden runtime fixtures (frozen, committed artifacts).

Run from the repository root:  python3 tests/fixtures/make_golden.py
The outputs are deterministic, so regeneration only changes the files if
the pipeline semantics changed; that is exactly what the regression test
is meant to catch.
"""

import json
import os

import numpy as np

from ternnet import data, runtime, teacher, ternarize
from ternnet.linalg import Rng


def main():
    out = os.path.dirname(os.path.abspath(__file__))
    rng = Rng(1007)
    ds = data.synth_blobs(rng, 900, 24, 5)
    train, test = data.split(ds, 700, 160)

    cfg = teacher.TrainConfig(epochs=30, batch_size=50, learning_rate=0.1, seed=4, early_stop_patience=8)
    trained = teacher.train_teacher(train, [24, 16, 12, 5], cfg)
    tern_cfg = ternarize.TernarizeConfig(epsilon=0.95, probe_count=600, rng_seed=2, retrain=True)
    result = ternarize.ternarize_network(trained.model, train, tern_cfg, train_cfg=cfg)

    runtime.save_model(result.model, os.path.join(out, "golden_model.tnn"))
    runtime.save_dataset(test, os.path.join(out, "golden_dataset.tnn"))
    acc = float(np.mean(runtime.batch_predict(result.model, test.inputs) == test.labels))
    first20 = [runtime.infer(result.model, runtime.pack(x)) for x in test.inputs[:20]]
    with open(os.path.join(out, "golden_expectations.json"), "w") as f:
        json.dump({"accuracy": acc, "first20": first20}, f, indent=2)
        f.write("\n")
    print(f"golden accuracy: {acc:.4f}")


if __name__ == "__main__":
    main()
