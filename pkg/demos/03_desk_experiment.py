"""The whole protocol at desk scale: 4 subjects, 50 training and 20 test
utterances, both enhancement models, then the comparison table.

Training sees clean MFCC plus Gaussian noise (sigma 10); testing sees MFCC of
speech mixed with background music at -5 dB. Before any network is trained a
ridge regression checks that the EEG carries usable information.

    python demos/03_desk_experiment.py [workdir] [--quick]

The full run takes about 25 minutes on one core; --quick cuts the epochs
tenfold to see the plumbing work.
"""

# %%
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

from neurovox import pipeline

args = [a for a in sys.argv[1:] if not a.startswith("--")]
quick = "--quick" in sys.argv
root = Path(args[0]) if args else Path(tempfile.mkdtemp(prefix="nv-desk-"))
cfg = pipeline.desk_config(root / "corpus", root / "work", master_seed=7)
if quick:
    cfg.lstm = replace(cfg.lstm, epochs=cfg.lstm.epochs // 10)
    cfg.gan = replace(cfg.gan, epochs=cfg.gan.epochs // 10)
print("working in", root)

# %% corpus and features
t = time.perf_counter()
manifest = pipeline.run_synth(cfg)
print(f"{len(manifest.utterances)} utterances synthesised")
print(pipeline.run_extract(cfg))
print(f"synth + extract: {time.perf_counter() - t:.0f} s")

# %% is there anything to learn from the EEG?
ridge = pipeline.ridge_baseline(cfg)
print("test MSE vs clean MFCC: noisy input as-is %.1f, ridge without EEG %.1f, with EEG %.1f"
      % (ridge["identity_mse"], ridge["mse_without_eeg"], ridge["mse_with_eeg"]))

# %% train, enhance, evaluate
reports = {}
for name in ("lstm", "gan"):
    t = time.perf_counter()
    pipeline.run_train(cfg, name)
    pipeline.run_enhance(cfg, name)
    rep = pipeline.run_evaluate(cfg, name)
    means = rep.means()
    print(f"{name}: {time.perf_counter() - t:.0f} s, STOI noisy {means['stoi_noisy']:.3f} "
          f"-> enhanced {means['stoi_enhanced']:.3f}, spectral convergence "
          f"{means['spectral_convergence']:.3f}")
    reports[name] = rep

print(pipeline.write_comparison(cfg, reports).read_text())
