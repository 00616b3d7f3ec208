"""Stacked GRU ordinal classifier with a batch-norm + MLP head, in plain numpy.

Data flow for an input batch of shape (B, C_in, T):

    GRU layers (inter-layer dropout) -> last hidden state h_T
    -> batch norm -> dropout -> Linear(g_r, h_d) -> ReLU
    -> Linear(h_d, e_c) -> ReLU -> Linear(e_c, C_out) -> softmax

Gate layout follows the usual (reset, update, candidate) stacking:

    r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
    z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
    n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
    h' = (1 - z) * n + z * h
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class GruConfig:
    input_channels: int
    sequence_length: int = 11
    hidden_size: int = 128
    num_layers: int = 2
    head_hidden: int = 256
    embedding: int = 64
    output_classes: int = 5
    dropout: float = 0.03
    activation: str = "relu"
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        for name in ("input_channels", "sequence_length", "hidden_size", "num_layers",
                     "head_hidden", "embedding", "output_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.activation != "relu":
            raise ValueError("only the relu activation is supported")

    def to_dict(self) -> dict:
        return asdict(self)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _linear(a: np.ndarray, w: np.ndarray, rowwise: bool) -> np.ndarray:
    """``a @ w.T``; rowwise does one matrix-vector product per row.

    BLAS blocking makes gemm results depend on the batch shape in the last
    bits, so eval mode goes row by row to keep each output independent of
    the rest of the batch.
    """
    if rowwise:
        return np.matmul(w, a[..., None])[..., 0]
    return a @ w.T


def parameter_shapes(cfg: GruConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    h = cfg.hidden_size
    for layer in range(cfg.num_layers):
        n_in = cfg.input_channels if layer == 0 else h
        shapes[f"gru{layer}.w_ih"] = (3 * h, n_in)
        shapes[f"gru{layer}.w_hh"] = (3 * h, h)
        shapes[f"gru{layer}.b_ih"] = (3 * h,)
        shapes[f"gru{layer}.b_hh"] = (3 * h,)
    shapes["bn.gamma"] = (h,)
    shapes["bn.beta"] = (h,)
    shapes["head1.w"] = (cfg.head_hidden, h)
    shapes["head1.b"] = (cfg.head_hidden,)
    shapes["head2.w"] = (cfg.embedding, cfg.head_hidden)
    shapes["head2.b"] = (cfg.embedding,)
    shapes["out.w"] = (cfg.output_classes, cfg.embedding)
    shapes["out.b"] = (cfg.output_classes,)
    return shapes


def parameter_count(cfg: GruConfig) -> int:
    return int(sum(np.prod(s) for s in parameter_shapes(cfg).values()))


class GruModel:
    """Parameters, batch-norm running moments and the forward/backward passes.

    ``forward`` keeps the intermediates of its last call; ``backward`` consumes
    them, so call the two in pairs on the same batch.
    """

    def __init__(self, config: GruConfig, params: dict[str, np.ndarray],
                 running_mean: np.ndarray | None = None,
                 running_var: np.ndarray | None = None):
        self.config = config
        expected = parameter_shapes(config)
        if set(params) != set(expected):
            raise ValueError(f"parameter names mismatch: {sorted(set(params) ^ set(expected))}")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"{name}: shape {params[name].shape} != {shape}")
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        h = config.hidden_size
        self.running_mean = np.zeros(h) if running_mean is None else np.asarray(running_mean, float)
        self.running_var = np.ones(h) if running_var is None else np.asarray(running_var, float)
        self._cache: dict | None = None
        self._rowwise = False

    @classmethod
    def initialize(cls, config: GruConfig, seed: int = 0) -> "GruModel":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, BN scale 1."""
        rng = np.random.default_rng(seed)
        params = {}
        for name, shape in parameter_shapes(config).items():
            if name == "bn.gamma":
                params[name] = np.ones(shape)
            elif len(shape) == 1:
                params[name] = np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(shape[1])
                params[name] = rng.uniform(-bound, bound, size=shape)
        return cls(config, params)

    def copy(self) -> "GruModel":
        return GruModel(self.config, {k: v.copy() for k, v in self.params.items()},
                        self.running_mean.copy(), self.running_var.copy())

    # ------------------------------------------------------------------ forward
    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        """Class probabilities, shape (B, C_out).

        In train mode batch statistics normalise the last hidden state (and
        update the running moments) and dropout masks are drawn from ``rng``.
        """
        cfg = self.config
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != cfg.input_channels or x.shape[2] != cfg.sequence_length:
            raise ValueError(f"expected input (B, {cfg.input_channels}, {cfg.sequence_length}), "
                             f"got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite values in input batch")
        if x.shape[0] == 0:
            raise ValueError("empty batch")
        p = self.params
        self._rowwise = not train
        drop = cfg.dropout if train else 0.0
        if drop > 0 and rng is None:
            rng = np.random.default_rng(0)

        seq = np.transpose(x, (2, 0, 1))  # (T, B, C)
        layers = []
        for layer in range(cfg.num_layers):
            seq_in = seq
            mask = None
            if layer > 0 and drop > 0:
                mask = (rng.random(seq.shape) >= drop) / (1.0 - drop)
                seq_in = seq * mask
            out, cache = self._gru_layer(seq_in, layer)
            layers.append({"input": seq_in, "mask": mask, **cache})
            seq = out
        h_last = seq[-1]

        if train:
            mu = h_last.mean(axis=0)
            var = h_last.var(axis=0)
            m = cfg.bn_momentum
            n = h_last.shape[0]
            unbiased = var * n / (n - 1) if n > 1 else var
            self.running_mean = (1 - m) * self.running_mean + m * mu
            self.running_var = (1 - m) * self.running_var + m * unbiased
        else:
            mu, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + cfg.bn_eps)
        xhat = (h_last - mu) * inv_std
        bn_out = p["bn.gamma"] * xhat + p["bn.beta"]
        head_mask = None
        if drop > 0:
            head_mask = (rng.random(bn_out.shape) >= drop) / (1.0 - drop)
            bn_out = bn_out * head_mask

        a1 = _linear(bn_out, p["head1.w"], not train) + p["head1.b"]
        r1 = np.maximum(a1, 0.0)
        a2 = _linear(r1, p["head2.w"], not train) + p["head2.b"]
        r2 = np.maximum(a2, 0.0)
        logits = _linear(r2, p["out.w"], not train) + p["out.b"]
        probs = _softmax(logits)
        self._cache = {"layers": layers, "train": train, "xhat": xhat, "inv_std": inv_std,
                       "bn_out": bn_out, "head_mask": head_mask, "a1": a1, "r1": r1,
                       "a2": a2, "r2": r2, "probs": probs}
        return probs

    def _gru_layer(self, seq: np.ndarray, layer: int) -> tuple[np.ndarray, dict]:
        p = self.params
        w_ih, w_hh = p[f"gru{layer}.w_ih"], p[f"gru{layer}.w_hh"]
        b_ih, b_hh = p[f"gru{layer}.b_ih"], p[f"gru{layer}.b_hh"]
        n_steps, batch, _ = seq.shape
        hs = self.config.hidden_size
        xi = _linear(seq, w_ih, self._rowwise) + b_ih  # (T, B, 3H)
        h = np.zeros((batch, hs))
        out = np.empty((n_steps, batch, hs))
        r_all = np.empty_like(out)
        z_all = np.empty_like(out)
        n_all = np.empty_like(out)
        hn_all = np.empty_like(out)
        h_prev_all = np.empty_like(out)
        for t in range(n_steps):
            hh = _linear(h, w_hh, self._rowwise) + b_hh
            r = _sigmoid(xi[t, :, :hs] + hh[:, :hs])
            z = _sigmoid(xi[t, :, hs:2 * hs] + hh[:, hs:2 * hs])
            hn = hh[:, 2 * hs:]
            n = np.tanh(xi[t, :, 2 * hs:] + r * hn)
            h_prev_all[t] = h
            h = (1.0 - z) * n + z * h
            out[t], r_all[t], z_all[t], n_all[t], hn_all[t] = h, r, z, n, hn
        return out, {"r": r_all, "z": z_all, "n": n_all, "hn": hn_all, "h_prev": h_prev_all}

    # ----------------------------------------------------------------- backward
    def backward(self, dprobs: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss w.r.t. every parameter, given dloss/dprobs."""
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        c = self._cache
        cfg = self.config
        p = self.params
        grads: dict[str, np.ndarray] = {}

        probs = c["probs"]
        dlogits = probs * (dprobs - np.sum(dprobs * probs, axis=1, keepdims=True))
        grads["out.w"] = dlogits.T @ c["r2"]
        grads["out.b"] = dlogits.sum(axis=0)
        dr2 = dlogits @ p["out.w"]
        da2 = dr2 * (c["a2"] > 0)
        grads["head2.w"] = da2.T @ c["r1"]
        grads["head2.b"] = da2.sum(axis=0)
        dr1 = da2 @ p["head2.w"]
        da1 = dr1 * (c["a1"] > 0)
        grads["head1.w"] = da1.T @ c["bn_out"]
        grads["head1.b"] = da1.sum(axis=0)
        dbn = da1 @ p["head1.w"]
        if c["head_mask"] is not None:
            dbn = dbn * c["head_mask"]

        xhat = c["xhat"]
        grads["bn.gamma"] = np.sum(dbn * xhat, axis=0)
        grads["bn.beta"] = dbn.sum(axis=0)
        dxhat = dbn * p["bn.gamma"]
        if c["train"]:
            b = dxhat.shape[0]
            dh_last = (c["inv_std"] / b) * (b * dxhat - dxhat.sum(axis=0)
                                            - xhat * np.sum(dxhat * xhat, axis=0))
        else:
            dh_last = dxhat * c["inv_std"]

        layers = c["layers"]
        top = layers[-1]
        d_out = np.zeros_like(top["r"])
        d_out[-1] = dh_last
        for layer in range(cfg.num_layers - 1, -1, -1):
            d_in = self._gru_layer_backward(layers[layer], d_out, layer, grads)
            if layers[layer]["mask"] is not None:
                d_in = d_in * layers[layer]["mask"]
            d_out = d_in

        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for {name}")
        return grads

    def _gru_layer_backward(self, cache: dict, d_out: np.ndarray, layer: int,
                            grads: dict[str, np.ndarray]) -> np.ndarray:
        p = self.params
        hs = self.config.hidden_size
        w_ih, w_hh = p[f"gru{layer}.w_ih"], p[f"gru{layer}.w_hh"]
        r_all, z_all, n_all = cache["r"], cache["z"], cache["n"]
        hn_all, h_prev_all = cache["hn"], cache["h_prev"]
        n_steps, batch, _ = r_all.shape
        dxi = np.empty((n_steps, batch, 3 * hs))
        dw_hh = np.zeros_like(w_hh)
        db_hh = np.zeros(3 * hs)
        dh_next = np.zeros((batch, hs))
        for t in range(n_steps - 1, -1, -1):
            r, z, n, hn, h_prev = r_all[t], z_all[t], n_all[t], hn_all[t], h_prev_all[t]
            dh = d_out[t] + dh_next
            dn = dh * (1.0 - z)
            dz = dh * (h_prev - n)
            dn_pre = dn * (1.0 - n * n)
            dr = dn_pre * hn
            dr_pre = dr * r * (1.0 - r)
            dz_pre = dz * z * (1.0 - z)
            dhh = np.concatenate([dr_pre, dz_pre, dn_pre * r], axis=1)
            dxi[t] = np.concatenate([dr_pre, dz_pre, dn_pre], axis=1)
            dw_hh += dhh.T @ h_prev
            db_hh += dhh.sum(axis=0)
            dh_next = dh * z + dhh @ w_hh
        x_in = cache["input"]
        grads[f"gru{layer}.w_ih"] = np.einsum("tbg,tbc->gc", dxi, x_in)
        grads[f"gru{layer}.b_ih"] = dxi.sum(axis=(0, 1))
        grads[f"gru{layer}.w_hh"] = dw_hh
        grads[f"gru{layer}.b_hh"] = db_hh
        return dxi @ w_ih
