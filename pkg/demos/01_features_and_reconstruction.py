"""Walk through one synthetic utterance: speech features, the way back to a
waveform, and the EEG features that ride along with it.

    python demos/01_features_and_reconstruction.py
"""

# %%
import numpy as np

from neurovox import dsp, metrics
from neurovox.eeg import extract_eeg_features, preprocess_eeg
from neurovox.synth import SynthParams, mix_background, mixture_snr_db, synth_utterance

utt = synth_utterance(SynthParams(), seed=3)
clean = utt.clean
print(f"clean speech: {len(clean)} samples at {clean.sample_rate_hz} Hz")
print(f"EEG: {utt.eeg.data.shape[0]} channels x {utt.eeg.data.shape[1]} samples")

# %% 13 cepstra per 10 ms frame
m = dsp.mfcc(clean)
print("MFCC frames:", m.coefficients.shape)
print("c0 range: %.1f .. %.1f" % (m.coefficients[:, 0].min(), m.coefficients[:, 0].max()))

# %% MFCC keep only a smoothed envelope, so inverting them loses pitch.
# Magnitude first, then 60 Griffin-Lim iterations for a phase.
mag = dsp.mfcc_invert(m)
rebuilt, err = dsp.griffin_lim(mag, 60, return_errors=True)
print("Griffin-Lim spectral convergence: first %.3f, last %.3f" % (err[0], err[-1]))

n = min(len(clean), len(rebuilt))
rebuilt = dsp.Waveform(rebuilt.samples[:n], clean.sample_rate_hz)
print("STOI(clean, MFCC round trip) = %.3f" % metrics.stoi(clean, rebuilt))

# for reference, exact magnitudes with Griffin-Lim phase
exact = dsp.griffin_lim(dsp.stft(clean), 60)
print("STOI(clean, exact magnitude + GL phase) = %.3f"
      % metrics.stoi(clean, dsp.Waveform(exact.samples[:n], clean.sample_rate_hz)))

# %% the test-time corruption: background music at -5 dB SNR
noisy = mix_background(clean, "music_like", seed=1)
print("mixture SNR %.2f dB, STOI(clean, noisy) = %.3f"
      % (mixture_snr_db(clean, noisy), metrics.stoi(clean, noisy)))

# %% EEG: notch + bandpass, then five statistics per channel per 10 ms
feats = extract_eeg_features(preprocess_eeg(utt.eeg))
print("EEG feature matrix:", feats.features.shape)

# the coupled latents follow speech energy; so does channel rms, partly
energy = utt.frame_energy[: feats.n_frames]
rms = feats.features[: energy.size, 0::5]
corr = [abs(np.corrcoef(rms[:, c], energy)[0, 1]) for c in range(rms.shape[1])]
print("strongest |corr(channel rms, speech energy)| = %.2f (channel %d)"
      % (max(corr), int(np.argmax(corr))))
