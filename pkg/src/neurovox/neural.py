"""Framework-free float64 network pieces: LSTM and dense layers with exact
backward passes, MSE, Adam, and a central-difference gradient checker."""

from __future__ import annotations

import numpy as np

GATES = ("input", "forget", "cell", "output")


def sigmoid(z):
    # tanh form cannot overflow and is faster than the exp form
    return 0.5 + 0.5 * np.tanh(0.5 * np.asarray(z, dtype=np.float64))


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {name}")


class Layer:
    """Anything with an ordered ``params`` dict of float64 arrays."""

    params: dict

    def zero_grads(self):
        return {k: np.zeros_like(v) for k, v in self.params.items()}


class Lstm(Layer):
    """Single LSTM layer, gate blocks ordered [input, forget, cell, output].

    W: (4h, in), U: (4h, h), b: (4h,). Zero initial state.
    """

    def __init__(self, input_dim: int, hidden_dim: int, rng=None, forget_bias: float = 1.0):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        h = hidden_dim
        if rng is None:
            self.params = {"W": np.zeros((4 * h, input_dim)), "U": np.zeros((4 * h, h)),
                           "b": np.zeros(4 * h)}
        else:
            b = np.zeros(4 * h)
            b[h:2 * h] = forget_bias
            self.params = {"W": _uniform(rng, (4 * h, input_dim), input_dim),
                           "U": _uniform(rng, (4 * h, h), h), "b": b}

    def forward(self, x):
        """x: (B, T, in) -> hidden states (B, T, h) and a cache for backward."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.input_dim:
            raise ValueError(f"LSTM expects (batch, time, {self.input_dim}), got {x.shape}")
        B, T, _ = x.shape
        h = self.hidden_dim
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        zx = x @ W.T + b
        hs = np.zeros((B, T, h))
        cs = np.zeros((B, T, h))
        gates = np.zeros((B, T, 4 * h))
        # sigmoid(z) = 0.5 + 0.5 tanh(z/2): one tanh call covers all four gates
        scale = np.full(4 * h, 0.5)
        scale[2 * h:3 * h] = 1.0
        offset = np.where(scale == 0.5, 0.5, 0.0)
        zx *= scale
        Us = U.T * scale
        h_prev = np.zeros((B, h))
        c_prev = np.zeros((B, h))
        for t in range(T):
            a = gates[:, t]
            np.tanh(zx[:, t] + h_prev @ Us, out=a)
            a *= scale
            a += offset
            c_prev = a[:, h:2 * h] * c_prev + a[:, :h] * a[:, 2 * h:3 * h]
            cs[:, t] = c_prev
            h_prev = a[:, 3 * h:] * np.tanh(c_prev)
            hs[:, t] = h_prev
        return hs, (x, hs, cs, gates)

    def backward(self, cache, grad_h):
        """grad_h: dLoss/dh for every step, (B, T, h). Returns (param grads, dx)."""
        x, hs, cs, gates = cache
        grad_h = np.asarray(grad_h, dtype=np.float64)
        if grad_h.shape != hs.shape:
            raise ValueError(f"upstream gradient shape {grad_h.shape} != output shape {hs.shape}")
        B, T, _ = x.shape
        h = self.hidden_dim
        U = self.params["U"]
        i, f, g, o = (gates[..., k * h:(k + 1) * h] for k in range(4))
        tc = np.tanh(cs)
        c_prev = np.concatenate([np.zeros((B, 1, h)), cs[:, :-1]], axis=1)
        # local derivatives of everything except the recurrent terms, all steps at once
        dc_coef = np.concatenate([g * i * (1.0 - i), c_prev * f * (1.0 - f),
                                  i * (1.0 - g * g)], axis=2).reshape(B, T, 3, h)
        do_coef = tc * o * (1.0 - o)
        dh_to_dc = o * (1.0 - tc * tc)
        dz_all = np.zeros((B, T, 4 * h))
        dh_next = np.zeros((B, h))
        dc_next = np.zeros((B, h))
        for t in range(T - 1, -1, -1):
            dh = grad_h[:, t] + dh_next
            dc = dh * dh_to_dc[:, t] + dc_next
            dz = dz_all[:, t]
            dz[:, :3 * h] = (dc_coef[:, t] * dc[:, None, :]).reshape(B, 3 * h)
            dz[:, 3 * h:] = dh * do_coef[:, t]
            dc_next = dc * f[:, t]
            dh_next = dz @ U
        h_prev = np.concatenate([np.zeros((B, 1, h)), hs[:, :-1]], axis=1)
        flat_dz = dz_all.reshape(B * T, 4 * h)
        grads = {
            "W": flat_dz.T @ x.reshape(B * T, -1),
            "U": flat_dz.T @ h_prev.reshape(B * T, h),
            "b": flat_dz.sum(axis=0),
        }
        dx = dz_all @ self.params["W"]
        return grads, dx


class Dense(Layer):
    """Affine map over the last axis with optional sigmoid; time-distributed
    when given (B, T, in) input."""

    def __init__(self, input_dim: int, output_dim: int, activation: str = "identity", rng=None):
        if activation not in ("identity", "sigmoid"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.activation = activation
        if rng is None:
            self.params = {"W": np.zeros((output_dim, input_dim)), "b": np.zeros(output_dim)}
        else:
            self.params = {"W": _uniform(rng, (output_dim, input_dim), input_dim),
                           "b": np.zeros(output_dim)}

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"dense expects last dim {self.input_dim}, got {x.shape}")
        z = x @ self.params["W"].T + self.params["b"]
        y = sigmoid(z) if self.activation == "sigmoid" else z
        return y, (x, y)

    def backward(self, cache, grad_y):
        x, y = cache
        grad_y = np.asarray(grad_y, dtype=np.float64)
        if grad_y.shape != y.shape:
            raise ValueError(f"upstream gradient shape {grad_y.shape} != output shape {y.shape}")
        dz = grad_y * y * (1.0 - y) if self.activation == "sigmoid" else grad_y
        xf = x.reshape(-1, self.input_dim)
        dzf = dz.reshape(-1, self.output_dim)
        grads = {"W": dzf.T @ xf, "b": dzf.sum(axis=0)}
        return grads, dz @ self.params["W"]


def mse_loss(pred, target, mask=None):
    """Mean squared error and its gradient.

    ``mask`` (broadcastable to ``pred``) selects the elements that count;
    the mean runs over selected elements only.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    if mask is None:
        n = diff.size
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=np.float64), diff.shape)
        diff = diff * mask
        n = mask.sum()
    if n == 0:
        return 0.0, np.zeros_like(diff)
    return float(np.sum(diff * diff) / n), 2.0 * diff / n


class Adam:
    """Bias-corrected Adam over a dict of named parameter arrays (updated in place)."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, clip_norm=None):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.step_count = 0
        self.m = {}
        self.v = {}

    def step(self, params: dict, grads: dict) -> None:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient in parameter block {name!r}")
        if self.clip_norm is not None:
            total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if total > self.clip_norm:
                grads = {k: g * (self.clip_norm / total) for k, g in grads.items()}
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_arrays(self, prefix="adam"):
        out = {}
        for name in self.m:
            out[f"{prefix}.m.{name}"] = self.m[name]
            out[f"{prefix}.v.{name}"] = self.v[name]
        return out

    def load_state(self, arrays: dict, step_count: int, prefix="adam"):
        self.step_count = int(step_count)
        self.m, self.v = {}, {}
        for key, arr in arrays.items():
            if key.startswith(f"{prefix}.m."):
                self.m[key[len(prefix) + 3:]] = arr.copy()
            elif key.startswith(f"{prefix}.v."):
                self.v[key[len(prefix) + 3:]] = arr.copy()


def gradient_check(loss_fn, params: dict, analytic: dict, h: float = 1e-5,
                   max_entries: int | None = None, rng=None):
    """Compare analytic gradients to central differences of ``loss_fn()``.

    ``loss_fn`` takes no arguments and must read the (perturbed in place)
    ``params``. Relative error per entry is |a - n| / max(|a|, |n|, 1e-6).
    With ``max_entries`` each block is checked on a random subset.
    Returns ``{"blocks": {name: max_rel_err}, "worst": name, "max_rel_err": value}``.
    """
    blocks = {}
    for name, p in params.items():
        a = analytic[name]
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            rng = rng if rng is not None else np.random.default_rng(0)
            idx = rng.choice(flat.size, size=max_entries, replace=False)
        worst = 0.0
        for j in idx:
            old = flat[j]
            flat[j] = old + h
            up = loss_fn()
            flat[j] = old - h
            down = loss_fn()
            flat[j] = old
            num = (up - down) / (2 * h)
            ana = a.reshape(-1)[j]
            err = abs(ana - num) / max(abs(ana), abs(num), 1e-6)
            worst = max(worst, err)
        blocks[name] = worst
    worst_name = max(blocks, key=blocks.get) if blocks else None
    return {"blocks": blocks, "worst": worst_name,
            "max_rel_err": blocks[worst_name] if blocks else 0.0}
