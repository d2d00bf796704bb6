"""What the discriminator sees during adversarial training.

The discriminator scores three kinds of (MFCC, EEG) pairs: generator output,
clean speech and noisy speech. Only clean pairs count as real. This runs a
short training on the tiny corpus and prints the per-epoch mean scores, then
plots the loss curves if matplotlib is installed.

    python demos/04_gan_dynamics.py [workdir]
"""

# %%
import sys
import tempfile
from pathlib import Path

from neurovox import models, pipeline
from neurovox.models import TrainConfig

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="nv-gan-"))
cfg = pipeline.ExperimentConfig(corpus_dir=str(root / "corpus"), work_dir=str(root / "work"),
                                preset="tiny", master_seed=2, kpca_dim=10, kpca_train_frames=600)
cfg.gan = TrainConfig.default_gan(epochs=30, batch_size=4, seq_len=100, hidden=32, lr_g=1e-3,
                                lr_d=1e-3)
pipeline.run_synth(cfg)
pipeline.run_extract(cfg)
state = pipeline.run_train(cfg, "gan")

# %%
d_rows = state.logs["discriminator"]
g_loss = models.epoch_means(state.logs["generator"])
d_loss = models.epoch_means(d_rows)
cols = {k: models.epoch_means(d_rows, k) for k in ("P_f_mean", "P_c_mean", "P_n_mean", "d_accuracy")}
print("epoch  L_G    L_D    P_fake P_clean P_noisy acc")
for e in range(len(g_loss)):
    print(f"{e + 1:5d} {g_loss[e]:6.3f} {d_loss[e]:6.3f}  {cols['P_f_mean'][e]:.3f}  "
          f"{cols['P_c_mean'][e]:.3f}   {cols['P_n_mean'][e]:.3f}  {cols['d_accuracy'][e]:.2f}")

# %% loss curves, as written by `neurovox plot-losses`
import importlib.util

from neurovox.cli import main

if importlib.util.find_spec("matplotlib") is None:
    print("matplotlib not installed; skipping the plot")
else:
    main(["plot-losses", "--work", cfg.work_dir, "--model", "gan"])
