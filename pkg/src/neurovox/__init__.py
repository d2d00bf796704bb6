"""EEG-conditioned speech enhancement on a seeded synthetic corpus.

Submodules:

``dsp``       filtering, STFT, MFCC and Griffin-Lim reconstruction
``eeg``       EEG preprocessing and the 155 per-window statistics
``dimred``    polynomial kernel PCA and explained-variance curves
``neural``    LSTM / dense layers, MSE, Adam, gradient checking
``models``    LSTM regression and GAN enhancers with their training loops
``metrics``   STOI, mean/std SNR, spectral convergence, external PESQ hook
``synth``     synthetic paired speech/EEG corpus and the corruption processes
``formats``   binary feature, EEG and checkpoint containers
``pipeline``  the staged synth/extract/train/enhance/evaluate protocol
``cli``       the ``neurovox`` command
"""

__version__ = "0.1.0"
