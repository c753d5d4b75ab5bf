"""Scratch hyperparameter sweep on the full 20k dataset (not shipped)."""
import time

import numpy as np

from transporter_sim import dataset, snn

spec = dataset.DatasetSpec(seed=11)
t0 = time.time()
tr, va, te = dataset.generate(spec)
print("gen: %.1fs" % (time.time() - t0), flush=True)
Xtr, ytr = tr.to_arrays()
Xva, yva = va.to_arrays()
Xte, yte = te.to_arrays()

configs = [
    ("E b95 long", dict(lif=snn.LifParams(beta=0.95), out_beta=0.995),
     dict(epochs=70, patience=18, lr_decay=0.98)),
    ("F b97 out0.997", dict(lif=snn.LifParams(beta=0.97), out_beta=0.997),
     dict(epochs=70, patience=18, lr_decay=0.98)),
    ("G b95 slope10", dict(lif=snn.LifParams(beta=0.95), out_beta=0.995),
     dict(epochs=70, patience=18, lr_decay=0.98, surrogate_slope=10.0)),
]
for name, mkw, tkw in configs:
    model = snn.init_model(seed=0, **mkw)
    cfg = snn.TrainConfig(seed=0, **tkw)
    t0 = time.time()
    hist = []
    m = snn.train_bptt((Xtr, ytr), (Xva, yva), cfg, model=model,
                       epoch_callback=lambda r: hist.append(r))
    dt = time.time() - t0
    test = snn.evaluate_mape(m, (Xte, yte))
    print(f"{name}: {dt:.0f}s epochs={len(hist)} best_val={hist[-1]['best_val_mape']:.3f} "
          f"(ep {hist[-1]['best_epoch']}) test={test:.3f}", flush=True)
