"""End-to-end training on a constructed task.

200 molecules over ~25 ring scaffolds, labeled by hydroxyl presence; the
model trains with the SAM optimizer on the combined loss (supervised +
focal reconstruction + decorrelation) under a scaffold split.
"""

import os
import tempfile

from fgrkit.datasets import make_hydroxyl_dataset, write_dataset_csv
from fgrkit.pipeline import TEST, TRAIN, evaluate_state, train

workdir = tempfile.mkdtemp(prefix="fgrkit-demo-")
csv_path = os.path.join(workdir, "hydroxyl.csv")
write_dataset_csv(make_hydroxyl_dataset(200, seed=0), csv_path, ("has_oh",))

config = {
    "data": {"path": csv_path, "task": "classification", "split": "scaffold"},
    "vocab": {"representation": "fg"},
    "model": {"latent": 64, "alpha": 0.1, "beta": 0.01},
    "optimizer": {"kind": "sam", "lr": 0.05, "rho": 0.05},
    "training": {"epochs": 15, "batch_size": 16, "seed": 0},
}

result = train(config)

print("epoch  L_e      L_r      L_ubc    L_t      valid_auc")
for record in result.log[::3] + [result.log[-1]]:
    print(f"{record['epoch']:>5}  {record['L_e']:<8.4f} {record['L_r']:<8.4f}"
          f" {record['L_ubc']:<8.4f} {record['L_t']:<8.4f} {record['valid_metric']:.4f}")

for split in (TRAIN, TEST):
    report = evaluate_state(result.state, result.enc, result.split.indices(split),
                            result.dataset.task_names, split)
    print(f"{split:>5} ROC-AUC: {report.macro['roc_auc']:.4f}")

print(f"\nbest epoch: {result.best_epoch}; split sizes:",
      {s: len(result.split.indices(s)) for s in ("train", "valid", "test")})
print("scaffold split keeps each core in exactly one partition, so the test",
      "molecules are built on ring systems the model never saw in training.")
