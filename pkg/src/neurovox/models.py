"""LSTM-regression and GAN enhancement models, their training loops and
inference."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import formats
from .dsp import N_MFCC, MfccSequence
from .neural import Adam, Dense, Lstm, mse_loss

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12
SATURATION_P = 1e-6
SATURATION_BATCHES = 50


# ------------------------------------------------------------------ losses

def _check_probs(p, name):
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError(f"{name} must be probabilities in [0, 1]")
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def gan_losses(p_fake, p_clean, p_noisy):
    """Generator loss -log(P_f) and discriminator loss
    -log(1-P_f) - log(1-P_n) - log(P_c); each term averaged over the batch."""
    pf = _check_probs(p_fake, "P_f")
    pc = _check_probs(p_clean, "P_c")
    pn = _check_probs(p_noisy, "P_n")
    loss_g = float(np.mean(-np.log(pf)))
    loss_d = float(np.mean(-np.log1p(-pf)) + np.mean(-np.log1p(-pn)) + np.mean(-np.log(pc)))
    return loss_g, loss_d


def _dlog(p, positive: bool):
    """Derivative of mean(-log(p)) (positive) or mean(-log(1-p)) w.r.t. p,
    zero where the clamp is active."""
    p = np.asarray(p, dtype=np.float64)
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    g = -1.0 / p if positive else 1.0 / (1.0 - p)
    return np.where(inside, g, 0.0) / p.size


# ------------------------------------------------------------------ models

@dataclass
class FeatureNorm:
    """Per-dimension standardisation fitted on training features."""

    mfcc_mean: np.ndarray
    mfcc_std: np.ndarray
    eeg_mean: np.ndarray
    eeg_std: np.ndarray

    @classmethod
    def fit(cls, mfcc_frames, eeg_frames):
        def stats(x):
            sd = x.std(axis=0)
            return x.mean(axis=0), np.where(sd > 1e-12, sd, 1.0)
        mm, ms = stats(np.asarray(mfcc_frames))
        em, es = stats(np.asarray(eeg_frames))
        return cls(mm, ms, em, es)

    @classmethod
    def identity(cls, eeg_dim):
        return cls(np.zeros(N_MFCC), np.ones(N_MFCC), np.zeros(eeg_dim), np.ones(eeg_dim))

    def mfcc(self, x):
        return (x - self.mfcc_mean) / self.mfcc_std

    def eeg(self, x):
        return (x - self.eeg_mean) / self.eeg_std

    def mfcc_inverse(self, x):
        return x * self.mfcc_std + self.mfcc_mean

    def arrays(self, prefix="norm"):
        return {f"{prefix}.{k}": v for k, v in asdict(self).items()}

    @classmethod
    def from_arrays(cls, arrays, prefix="norm"):
        return cls(*(arrays[f"{prefix}.{k}"] for k in ("mfcc_mean", "mfcc_std", "eeg_mean", "eeg_std")))


class Network:
    """Named layers; ``params`` flattens them as ``layer.param`` views."""

    layers: dict

    @property
    def params(self) -> dict:
        return {f"{ln}.{pn}": arr for ln, layer in self.layers.items()
                for pn, arr in layer.params.items()}

    def load_params(self, arrays: dict, prefix: str = "") -> None:
        for name, arr in self.params.items():
            src = arrays[prefix + name]
            if src.shape != arr.shape:
                raise ValueError(f"{prefix + name}: shape {src.shape} != {arr.shape}")
            arr[...] = src

    @staticmethod
    def _merge(out, layer_name, grads):
        for k, v in grads.items():
            out[f"{layer_name}.{k}"] = v


class LstmRegression(Network):
    """LSTM(13+eeg -> h) -> LSTM(h -> h) -> time-distributed dense(h -> 13)."""

    kind = "lstm"

    def __init__(self, eeg_dim=30, hidden=128, seed=0):
        rng = np.random.default_rng(seed)
        self.eeg_dim = eeg_dim
        self.hidden = hidden
        self.layers = {
            "lstm1": Lstm(N_MFCC + eeg_dim, hidden, rng),
            "lstm2": Lstm(hidden, hidden, rng),
            "out": Dense(hidden, N_MFCC, "identity", rng),
        }

    def architecture(self):
        return {"kind": self.kind, "mfcc_dim": N_MFCC, "eeg_dim": self.eeg_dim, "hidden": self.hidden}

    def forward(self, mfcc, eeg):
        x = np.concatenate([mfcc, eeg], axis=2)
        h1, c1 = self.layers["lstm1"].forward(x)
        h2, c2 = self.layers["lstm2"].forward(h1)
        y, c3 = self.layers["out"].forward(h2)
        return y, (c1, c2, c3)

    def backward(self, cache, dy):
        c1, c2, c3 = cache
        grads = {}
        g, d = self.layers["out"].backward(c3, dy)
        self._merge(grads, "out", g)
        g, d = self.layers["lstm2"].backward(c2, d)
        self._merge(grads, "lstm2", g)
        g, dx = self.layers["lstm1"].backward(c1, d)
        self._merge(grads, "lstm1", g)
        return grads, dx[..., :N_MFCC], dx[..., N_MFCC:]


class _TwoStream(Network):
    """Parallel LSTMs over MFCC and EEG, concatenated into a third LSTM."""

    def _build(self, rng, eeg_dim, hidden):
        self.eeg_dim = eeg_dim
        self.hidden = hidden
        return {
            "lstm_mfcc": Lstm(N_MFCC, hidden, rng),
            "lstm_eeg": Lstm(eeg_dim, hidden, rng),
            "lstm_joint": Lstm(2 * hidden, hidden, rng),
        }

    def _trunk_forward(self, mfcc, eeg):
        ha, ca = self.layers["lstm_mfcc"].forward(mfcc)
        hb, cb = self.layers["lstm_eeg"].forward(eeg)
        hc, cc = self.layers["lstm_joint"].forward(np.concatenate([ha, hb], axis=2))
        return hc, (ca, cb, cc)

    def _trunk_backward(self, cache, dhc, grads):
        ca, cb, cc = cache
        g, dcat = self.layers["lstm_joint"].backward(cc, dhc)
        self._merge(grads, "lstm_joint", g)
        h = self.hidden
        g, dm = self.layers["lstm_mfcc"].backward(ca, dcat[..., :h])
        self._merge(grads, "lstm_mfcc", g)
        g, de = self.layers["lstm_eeg"].backward(cb, dcat[..., h:])
        self._merge(grads, "lstm_eeg", g)
        return dm, de

    def architecture(self):
        return {"kind": self.kind, "mfcc_dim": N_MFCC, "eeg_dim": self.eeg_dim, "hidden": self.hidden}


class Generator(_TwoStream):
    kind = "generator"

    def __init__(self, eeg_dim=30, hidden=128, seed=0):
        rng = np.random.default_rng(seed)
        self.layers = self._build(rng, eeg_dim, hidden)
        self.layers["out"] = Dense(hidden, N_MFCC, "identity", rng)

    def forward(self, mfcc, eeg):
        hc, trunk = self._trunk_forward(mfcc, eeg)
        y, cd = self.layers["out"].forward(hc)
        return y, (trunk, cd)

    def backward(self, cache, dy):
        trunk, cd = cache
        grads = {}
        g, dhc = self.layers["out"].backward(cd, dy)
        self._merge(grads, "out", g)
        dm, de = self._trunk_backward(trunk, dhc, grads)
        return grads, dm, de


class Discriminator(_TwoStream):
    """Two-stream trunk; the joint LSTM's output at each sequence's last valid
    step feeds a single sigmoid unit."""

    kind = "discriminator"

    def __init__(self, eeg_dim=30, hidden=128, seed=0):
        rng = np.random.default_rng(seed)
        self.layers = self._build(rng, eeg_dim, hidden)
        self.layers["out"] = Dense(hidden, 1, "sigmoid", rng)

    def forward(self, mfcc, eeg, lengths=None):
        hc, trunk = self._trunk_forward(mfcc, eeg)
        B, T, _ = hc.shape
        lengths = np.full(B, T) if lengths is None else np.asarray(lengths)
        last = hc[np.arange(B), lengths - 1]
        p, cd = self.layers["out"].forward(last)
        return p[:, 0], (trunk, cd, lengths, hc.shape)

    def backward(self, cache, dp):
        trunk, cd, lengths, shape = cache
        grads = {}
        g, dlast = self.layers["out"].backward(cd, np.asarray(dp, dtype=np.float64)[:, None])
        self._merge(grads, "out", g)
        dhc = np.zeros(shape)
        dhc[np.arange(shape[0]), lengths - 1] = dlast
        dm, de = self._trunk_backward(trunk, dhc, grads)
        return grads, dm, de


# ------------------------------------------------------------------ data

@dataclass
class UtteranceFeatures:
    id: str
    clean: np.ndarray  # frames x 13
    eeg: np.ndarray  # frames x eeg_dim
    noisy: np.ndarray | None = None  # fixed noisy input; None -> corrupt on the fly

    def __post_init__(self):
        if self.clean.shape[1] != N_MFCC:
            raise ValueError(f"{self.id}: MFCC width {self.clean.shape[1]} != {N_MFCC}")
        if self.eeg.shape[0] != self.clean.shape[0]:
            raise ValueError(f"{self.id}: MFCC/EEG frame counts differ")
        if self.noisy is not None and self.noisy.shape != self.clean.shape:
            raise ValueError(f"{self.id}: noisy/clean shapes differ")


@dataclass
class Segments:
    clean: np.ndarray  # N x L x 13 (raw)
    eeg: np.ndarray  # N x L x k (raw)
    noisy: np.ndarray | None
    lengths: np.ndarray

    @property
    def mask(self):
        L = self.clean.shape[1]
        return (np.arange(L)[None, :] < self.lengths[:, None]).astype(np.float64)


def make_segments(items, seq_len: int) -> Segments:
    """Cut utterances into ``seq_len``-frame pieces, zero-padding the tails."""
    if not items:
        raise ValueError("empty corpus")
    eeg_dim = items[0].eeg.shape[1]
    fixed = items[0].noisy is not None
    if any((it.noisy is not None) != fixed for it in items):
        raise ValueError("either every utterance has fixed noisy MFCC or none does")
    clean, eeg, noisy, lengths = [], [], [], []
    for it in items:
        if it.eeg.shape[1] != eeg_dim:
            raise ValueError(f"{it.id}: EEG width {it.eeg.shape[1]} != {eeg_dim}")
        for s in range(0, it.clean.shape[0], seq_len):
            n = min(seq_len, it.clean.shape[0] - s)
            if n < 2:
                continue
            pad = ((0, seq_len - n), (0, 0))
            clean.append(np.pad(it.clean[s:s + n], pad))
            eeg.append(np.pad(it.eeg[s:s + n], pad))
            if fixed:
                noisy.append(np.pad(it.noisy[s:s + n], pad))
            lengths.append(n)
    return Segments(np.stack(clean), np.stack(eeg), np.stack(noisy) if fixed else None,
                    np.array(lengths))


def epoch_rng(seed: int, epoch: int):
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0x7EA1, int(epoch)]))


def _noisy_batch(seg: Segments, idx, rng, sigma):
    if seg.noisy is not None:
        return seg.noisy[idx]
    noise = rng.standard_normal(seg.clean[idx].shape) if sigma > 0 else 0.0
    return seg.clean[idx] + sigma * noise


# ------------------------------------------------------------------ training

@dataclass
class TrainConfig:
    model: str = "lstm"
    epochs: int = 1000
    batch_size: int = 100
    lr: float = 1e-3  # LSTM regression
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seq_len: int = 200
    hidden: int = 128
    noise_sigma: float = 10.0
    clip_norm: float | None = None
    seed: int = 0

    def validate(self):
        if self.model not in ("lstm", "gan"):
            raise ValueError(f"model must be 'lstm' or 'gan', got {self.model!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.seq_len < 2:
            raise ValueError("need epochs >= 1, batch_size >= 1, seq_len >= 2")

    @classmethod
    def default_lstm(cls, **kw):
        return cls(**{"model": "lstm", "epochs": 1000, "batch_size": 100, **kw})

    @classmethod
    def default_gan(cls, **kw):
        return cls(**{"model": "gan", "epochs": 200, "batch_size": 32, **kw})


@dataclass
class TrainState:
    """Everything needed to continue or use a training run."""

    config: TrainConfig
    norm: FeatureNorm
    nets: dict  # "lstm" or "generator"/"discriminator" -> Network
    optimizers: dict  # same keys -> Adam
    epoch: int = 0
    logs: dict = field(default_factory=dict)  # name -> list of row dicts
    saturated_batches: int = 0

    @property
    def model(self):
        return self.nets.get("lstm") or self.nets["generator"]


LOG_COLUMNS = {
    "lstm": ("epoch", "batch", "loss"),
    "generator": ("epoch", "batch", "loss", "P_f_mean", "P_c_mean", "P_n_mean"),
    "discriminator": ("epoch", "batch", "loss", "P_f_mean", "P_c_mean", "P_n_mean", "d_accuracy"),
}


def init_state(items, config: TrainConfig) -> TrainState:
    config.validate()
    eeg_dim = items[0].eeg.shape[1]
    norm = FeatureNorm.fit(np.concatenate([it.clean for it in items]),
                           np.concatenate([it.eeg for it in items]))
    mk = lambda lr: Adam(lr, config.beta1, config.beta2, config.adam_eps, config.clip_norm)  # noqa: E731
    if config.model == "lstm":
        nets = {"lstm": LstmRegression(eeg_dim, config.hidden, config.seed)}
        opts = {"lstm": mk(config.lr)}
    else:
        nets = {"generator": Generator(eeg_dim, config.hidden, config.seed),
                "discriminator": Discriminator(eeg_dim, config.hidden, config.seed + 1)}
        opts = {"generator": mk(config.lr_g), "discriminator": mk(config.lr_d)}
    return TrainState(config, norm, nets, opts, 0, {k: [] for k in nets})


def _check_widths(items, state):
    k = state.model.eeg_dim
    for it in items:
        if it.eeg.shape[1] != k:
            raise ValueError(f"{it.id}: EEG width {it.eeg.shape[1]} but model expects {k}")


def _run(items, config, state, on_epoch_end, stop_after, step_fn):
    state = state or init_state(items, config)
    _check_widths(items, state)
    seg = make_segments(items, state.config.seq_len)
    cfg = state.config
    last = cfg.epochs if stop_after is None else min(cfg.epochs, stop_after)
    while state.epoch < last:
        epoch = state.epoch + 1
        rng = epoch_rng(cfg.seed, epoch)
        order = rng.permutation(len(seg.lengths))
        for b, start in enumerate(range(0, order.size, cfg.batch_size)):
            step_fn(state, seg, order[start:start + cfg.batch_size], rng, epoch, b)
        state.epoch = epoch
        if on_epoch_end is not None:
            on_epoch_end(state)
    return state


def train_lstm_regression(items, config: TrainConfig | None = None, state: TrainState | None = None,
                          on_epoch_end=None, stop_after: int | None = None) -> TrainState:
    """Fit the LSTM regressor to map (noisy MFCC, EEG) to clean MFCC under MSE.

    Pass a previous ``state`` to resume; ``stop_after`` ends early after that
    epoch (used to emulate an interrupted run).
    """
    config = replace(config or TrainConfig(), model="lstm") if state is None else state.config

    def step(st, seg, idx, rng, epoch, b):
        net, norm, opt = st.nets["lstm"], st.norm, st.optimizers["lstm"]
        noisy = norm.mfcc(_noisy_batch(seg, idx, rng, st.config.noise_sigma))
        target = norm.mfcc(seg.clean[idx])
        eeg = norm.eeg(seg.eeg[idx])
        mask = seg.mask[idx][..., None]
        pred, cache = net.forward(noisy * mask, eeg * mask)
        loss, grad = mse_loss(pred, target, mask)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at epoch {epoch} batch {b}")
        grads, _, _ = net.backward(cache, grad)
        opt.step(net.params, grads)
        st.logs["lstm"].append({"epoch": epoch, "batch": b, "loss": loss})

    return _run(items, config, state, on_epoch_end, stop_after, step)


def discriminator_step(st: TrainState, fake, clean, noisy, eeg, lengths, update=True):
    """One discriminator update on the three input pairs; returns stats."""
    disc, opt = st.nets["discriminator"], st.optimizers["discriminator"]
    pf, cf = disc.forward(fake, eeg, lengths)
    pc, cc = disc.forward(clean, eeg, lengths)
    pn, cn = disc.forward(noisy, eeg, lengths)
    _, loss_d = gan_losses(pf, pc, pn)
    total = {}
    for cache, dp in ((cf, _dlog(pf, False)), (cc, _dlog(pc, True)), (cn, _dlog(pn, False))):
        g, _, _ = disc.backward(cache, dp)
        for k, v in g.items():
            total[k] = total[k] + v if k in total else v
    if update:
        opt.step(disc.params, total)
    acc = 0.5 * (np.mean(pc > 0.5) + np.mean(pf < 0.5))
    return loss_d, pf, pc, pn, acc


def generator_loss_and_grads(gen: Generator, disc: Discriminator, noisy, eeg, lengths, mask):
    """L_G = mean(-log P_f) with P_f from the (frozen) discriminator; gradients
    for the generator parameters only."""
    fake, cg = gen.forward(noisy, eeg)
    fake = fake * mask
    pf, cd = disc.forward(fake, eeg, lengths)
    loss_g = float(np.mean(-np.log(np.clip(pf, PROB_CLAMP, 1 - PROB_CLAMP))))
    _, dfake, _ = disc.backward(cd, _dlog(pf, True))
    grads, _, _ = gen.backward(cg, dfake * mask)
    return loss_g, grads, pf


def train_gan(items, config: TrainConfig | None = None, state: TrainState | None = None,
              on_epoch_end=None, stop_after: int | None = None,
              train_generator: bool = True) -> TrainState:
    """Alternate one discriminator and one generator Adam step per batch.

    ``train_generator=False`` freezes the generator (discriminator-only
    training, used for diagnostics).
    """
    config = replace(config or TrainConfig.default_gan(), model="gan") if state is None else state.config

    def step(st, seg, idx, rng, epoch, b):
        gen, disc, norm = st.nets["generator"], st.nets["discriminator"], st.norm
        mask = seg.mask[idx][..., None]
        lengths = seg.lengths[idx]
        noisy = norm.mfcc(_noisy_batch(seg, idx, rng, st.config.noise_sigma)) * mask
        clean = norm.mfcc(seg.clean[idx]) * mask
        eeg = norm.eeg(seg.eeg[idx]) * mask

        fake, _ = gen.forward(noisy, eeg)
        loss_d, pf, pc, pn, acc = discriminator_step(st, fake * mask, clean, noisy, eeg, lengths)
        st.logs["discriminator"].append({
            "epoch": epoch, "batch": b, "loss": loss_d, "P_f_mean": float(pf.mean()),
            "P_c_mean": float(pc.mean()), "P_n_mean": float(pn.mean()), "d_accuracy": float(acc)})

        if train_generator:
            loss_g, grads, pf_g = generator_loss_and_grads(gen, disc, noisy, eeg, lengths, mask)
            st.optimizers["generator"].step(gen.params, grads)
        else:
            pf_g = pf
            loss_g = float(np.mean(-np.log(np.clip(pf, PROB_CLAMP, 1 - PROB_CLAMP))))
        st.logs["generator"].append({
            "epoch": epoch, "batch": b, "loss": loss_g, "P_f_mean": float(pf_g.mean()),
            "P_c_mean": float(pc.mean()), "P_n_mean": float(pn.mean())})
        for name in ("discriminator", "generator"):
            if not np.isfinite(st.logs[name][-1]["loss"]):
                raise FloatingPointError(f"non-finite {name} loss at epoch {epoch} batch {b}")

        if pf.mean() < SATURATION_P:
            st.saturated_batches += 1
            if st.saturated_batches == SATURATION_BATCHES:
                log.warning("discriminator saturated: P_f < %g for %d consecutive batches "
                            "(epoch %d)", SATURATION_P, SATURATION_BATCHES, epoch)
        else:
            st.saturated_batches = 0

    return _run(items, config, state, on_epoch_end, stop_after, step)


def epoch_means(rows, key="loss"):
    out = {}
    for r in rows:
        out.setdefault(r["epoch"], []).append(r[key])
    return [float(np.mean(v)) for _, v in sorted(out.items())]


def log_csv(rows, columns) -> str:
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(str(r[c]) if c in ("epoch", "batch") else repr(float(r[c]))
                              for c in columns))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ inference

def enhance(model, norm: FeatureNorm, mfcc_in, eeg_reduced) -> MfccSequence:
    """Enhanced 13-wide MFCC for one utterance (same frame count as the input)."""
    m = mfcc_in.coefficients if isinstance(mfcc_in, MfccSequence) else np.asarray(mfcc_in, float)
    e = np.asarray(eeg_reduced, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != N_MFCC:
        raise ValueError(f"MFCC input must be frames x {N_MFCC}, got {m.shape}")
    if e.ndim != 2 or e.shape[1] != model.eeg_dim:
        raise ValueError(f"EEG input must be frames x {model.eeg_dim}, got {e.shape}")
    if m.shape[0] != e.shape[0]:
        raise ValueError(f"frame counts differ: MFCC {m.shape[0]} vs EEG {e.shape[0]}")
    y, _ = model.forward(norm.mfcc(m)[None], norm.eeg(e)[None])
    return MfccSequence(norm.mfcc_inverse(y[0]))


# ------------------------------------------------------------------ checkpoints

NET_CLASSES = {"lstm": LstmRegression, "generator": Generator, "discriminator": Discriminator}


def save_checkpoint(path, state: TrainState, config_hash: str, extra_header=None,
                    extra_arrays=None) -> None:
    arrays = dict(state.norm.arrays())
    header = {
        "format": "neurovox-checkpoint/1",
        "train_config": asdict(state.config),
        "config_hash": config_hash,
        "seed": state.config.seed,
        "epoch": state.epoch,
        "saturated_batches": state.saturated_batches,
        "networks": {},
    }
    for name, net in state.nets.items():
        header["networks"][name] = {"architecture": net.architecture(),
                                    "adam_step": state.optimizers[name].step_count}
        for k, v in net.params.items():
            arrays[f"net.{name}.{k}"] = v
        arrays.update(state.optimizers[name].state_arrays(f"adam.{name}"))
    for name, rows in state.logs.items():
        cols = LOG_COLUMNS[name]
        arrays[f"log.{name}"] = np.array([[r[c] for c in cols] for r in rows],
                                         dtype=np.float64).reshape(len(rows), len(cols))
    header.update(extra_header or {})
    arrays.update(extra_arrays or {})
    formats.write_checkpoint(path, header, arrays)


def load_checkpoint(path, expected_config_hash: str | None = None):
    """Return ``(TrainState, header, arrays)``."""
    header, arrays = formats.read_checkpoint(path, expected_config_hash)
    config = TrainConfig(**header["train_config"])
    nets, opts, logs = {}, {}, {}
    for name, meta in header["networks"].items():
        arch = meta["architecture"]
        net = NET_CLASSES[name](arch["eeg_dim"], arch["hidden"])
        net.load_params(arrays, f"net.{name}.")
        nets[name] = net
        lr = config.lr if name == "lstm" else (config.lr_g if name == "generator" else config.lr_d)
        opt = Adam(lr, config.beta1, config.beta2, config.adam_eps, config.clip_norm)
        opt.load_state({k: v for k, v in arrays.items() if k.startswith(f"adam.{name}.")},
                       meta["adam_step"], f"adam.{name}")
        opts[name] = opt
        cols = LOG_COLUMNS[name]
        logs[name] = [{c: (int(v) if c in ("epoch", "batch") else float(v)) for c, v in zip(cols, row)}
                      for row in arrays[f"log.{name}"]]
    state = TrainState(config, FeatureNorm.from_arrays(arrays), nets, opts, header["epoch"], logs,
                       header.get("saturated_batches", 0))
    return state, header, arrays
