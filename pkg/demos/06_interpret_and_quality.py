"""Attribution and representation-quality diagnostics on a trained model.

Runs the four attribution methods on the hydroxyl toy model (the hydroxyl
bit should dominate), then the scaffold-alignment DBI and circular
uniformity profile of the latent space.
"""

import os
import tempfile

import numpy as np

from fgrkit.attribution import LogitModel, attribute_dataset, integrated_gradients
from fgrkit.datasets import make_hydroxyl_dataset, write_dataset_csv
from fgrkit.pipeline import TRAIN, train
from fgrkit.repquality import alignment_report, uniformity_report

workdir = tempfile.mkdtemp(prefix="fgrkit-demo-")
csv_path = os.path.join(workdir, "hydroxyl.csv")
write_dataset_csv(make_hydroxyl_dataset(200, seed=0), csv_path, ("has_oh",))

result = train({
    "data": {"path": csv_path, "task": "classification", "split": "scaffold"},
    "vocab": {"representation": "fg"},
    "model": {"latent": 48},
    "training": {"epochs": 12, "seed": 0},
})

# All methods attribute the pre-sigmoid logit against the all-zeros
# baseline ("no functional groups present").
idx = result.split.indices(TRAIN)
U = result.enc.X[idx]
for method in ("integrated_gradients", "gradient_shap", "feature_ablation",
               "feature_permutation"):
    rep = attribute_dataset(result.state, U, result.enc.Y[idx], result.enc.M[idx],
                            method, result.enc.feature_labels,
                            result.enc.feature_kinds)
    top = rep.top_k(3)
    print(f"{method:>22}: " + ", ".join(
        f"{row['label']} ({row['mean']:+.3f})" for row in top))

# Integrated gradients satisfy completeness: attributions sum to
# f(x) - f(baseline). The head is linear in the latent, so the identity
# is near-exact even at modest step counts.
model = LogitModel(result.state)
row = U[0]
scores = integrated_gradients(model, row, steps=128)
gap = abs(scores.sum() - (model.value(row, 0) - model.value(np.zeros_like(row), 0)))
print(f"\ncompleteness gap at 128 steps: {gap:.2e}")

# Alignment: Davies-Bouldin index over the five most populous scaffolds,
# in latent space and after the deterministic 2-D PCA projection.
align = alignment_report(result.state, result.dataset, result.enc, top_s=5)
print(f"\ntop scaffolds: {[s['size'] for s in align['scaffolds']]} members")
print(f"DBI latent: {align['dbi_latent']:.3f}   DBI 2-D: {align['dbi_2d']:.3f}"
      "   (lower = better separated)")

# Uniformity: project latents to 2-D, normalize onto the unit circle, and
# profile the angle density with a wrapped Gaussian KDE (bw = 0.2).
unif = uniformity_report(result.state, result.enc)
print(f"\nuniformity: circular integral {unif['circular_integral']:.4f}, "
      f"flatness (max/min density) {unif['flatness']:.1f}")
