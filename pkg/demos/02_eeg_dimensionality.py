"""How many directions does the 155-wide EEG feature vector really use?

Builds the tiny corpus, extracts features, prints the PCA explained-variance
curve and shows what the polynomial KPCA keeps.

    python demos/02_eeg_dimensionality.py [workdir]
"""

# %%
import sys
import tempfile
from pathlib import Path

import numpy as np

from neurovox import formats, pipeline
from neurovox.dimred import kpca_fit, kpca_transform, pca_explained_variance

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="nv-demo-"))
cfg = pipeline.ExperimentConfig(corpus_dir=str(root / "corpus"), work_dir=str(root / "work"),
                                preset="tiny", master_seed=1, kpca_dim=10,
                                kpca_train_frames=600)
pipeline.run_synth(cfg)
summary = pipeline.run_extract(cfg)
print(summary)

# %% cumulative explained variance of the standardised training features
rows = (cfg.features_path() / "explained_variance.csv").read_text().splitlines()[1:]
curve = np.array([float(r.split(",")[1]) for r in rows])
for k in (1, 5, 10, 30, 60):
    print(f"first {k:3d} components: {100 * curve[k - 1]:5.1f}% of variance")
print("components for 90%:", int(np.searchsorted(curve, 0.9) + 1))

# %% a fresh KPCA on the same rows, compared with linear PCA
train = [f for f in sorted(cfg.features_path().glob("train-*.eeg155"))]
X = np.concatenate([formats.read_features(f)[2] for f in train])
X = (X - X.mean(axis=0)) / np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
rng = np.random.default_rng(0)
sub = X[np.sort(rng.choice(len(X), 400, replace=False))]

cubic = kpca_fit(sub, 5)
linear = kpca_fit(sub, 5, degree=1)
print("cubic kernel eigenvalues: ", np.round(cubic.eigenvalues, 2))
print("linear kernel eigenvalues:", np.round(linear.eigenvalues, 2))
z = kpca_transform(cubic, X[:5])
print("first frames in KPCA coordinates:\n", np.round(z, 3))

# with a linear kernel the centred kernel trace is gamma * ||centred X||^2,
# so eigenvalue / trace is the fraction of variance per component
sub_c = sub - sub.mean(axis=0)
frac = linear.eigenvalues / (np.sum(sub_c ** 2) / sub.shape[1])
print("linear-kernel fractions:", np.round(frac, 3))
print("PCA curve increments:   ", np.round(np.diff(np.r_[0, pca_explained_variance(sub)[:5]]), 3))
