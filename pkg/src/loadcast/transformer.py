"""Encoder-decoder transformer forecaster with a pretrain/fine-tune workflow.

The model consumes a fixed-length window of normalized load values, embeds
each scalar into d_model dimensions, adds sinusoidal positional encodings,
and runs attention + convolutional feed-forward stacks. The decoder is
autoregressive with a learned start token and a causal mask; horizons beyond
the native decoder length are covered by feeding predictions back into the
context window (recursive forecasting).
"""

from __future__ import annotations

import functools
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InsufficientDataError, ShapeError, StateError
from .nn import adam_update, conv_pool_forward, glorot_init
from .nn import autodiff as ad
from .nn.autodiff import Tensor, no_grad
from .nn.params import ParamStore
from .series import NormalizationParams, TimeSeries, fit_normalizer

PE_BASE = 10000.0
FINE_TUNE_LR_FACTOR = 0.1
EARLY_STOP_PATIENCE = 5
VALIDATION_TAIL = 0.2


@functools.lru_cache(maxsize=64)
def positional_encoding(seq_length: int, d_model: int) -> np.ndarray:
    """Sinusoidal position matrix: sin on even columns, cos on odd columns.

    Entry (pos, 2i) is sin(pos / 10000^(2i/d_model)) and (pos, 2i+1) is the
    matching cosine. Returned array is read-only and cached.
    """
    if d_model % 2 != 0:
        raise ConfigError(f"d_model must be even for sin/cos pairs, got {d_model}")
    if seq_length < 1 or d_model < 1:
        raise ConfigError("positional encoding dimensions must be positive")
    positions = np.arange(seq_length, dtype=np.float64)[:, None]
    i = np.arange(0, d_model, 2, dtype=np.float64)
    angles = positions / PE_BASE ** (i / d_model)
    pe = np.empty((seq_length, d_model))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    pe.setflags(write=False)
    return pe


def attention_weights(q, k, causal: bool = False) -> np.ndarray:
    """The row-stochastic softmax(QK^T/sqrt(d)) matrix, without applying V."""
    q, k = ad.astensor(q), ad.astensor(k)
    if q.value.shape[-1] != k.value.shape[-1]:
        raise ShapeError(f"Q/K feature dims differ: {q.value.shape[-1]} vs {k.value.shape[-1]}")
    d = q.value.shape[-1]
    scores = ad.scale(ad.matmul(q, ad.astensor(np.swapaxes(k.value, -1, -2))), 1.0 / np.sqrt(d))
    mask = None
    if causal:
        tq, tk = scores.value.shape[-2], scores.value.shape[-1]
        mask = np.tril(np.ones((tq, tk), dtype=bool))
    with no_grad():
        return ad.softmax(Tensor(scores.value), mask=mask).value


def scaled_dot_attention(q, k, v, causal: bool = False):
    """softmax(QK^T/sqrt(d))V with an optional causal mask.

    Accepts 2-D (T, d) or batched (..., T, d) arrays/Tensors; returns a
    Tensor when any input is one, else an ndarray.
    """
    qt, kt, vt = ad.astensor(q), ad.astensor(k), ad.astensor(v)
    if qt.value.shape[-1] != kt.value.shape[-1]:
        raise ShapeError(f"Q/K feature dims differ: {qt.value.shape[-1]} vs {kt.value.shape[-1]}")
    if kt.value.shape[-2] != vt.value.shape[-2]:
        raise ShapeError(f"K/V row counts differ: {kt.value.shape[-2]} vs {vt.value.shape[-2]}")
    d = qt.value.shape[-1]
    axes = list(range(kt.value.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    scores = ad.scale(ad.matmul(qt, ad.transpose(kt, axes)), 1.0 / np.sqrt(d))
    mask = None
    if causal:
        tq, tk = scores.value.shape[-2], scores.value.shape[-1]
        mask = np.tril(np.ones((tq, tk), dtype=bool))
    out = ad.matmul(ad.softmax(scores, mask=mask), vt)
    if any(isinstance(x, Tensor) for x in (q, k, v)):
        return out
    return out.value


ATTENTION_WEIGHT_NAMES = ("wq", "wk", "wv", "wo")


def multi_head_attention(x, params: ParamStore, head_count: int, causal: bool = False, kv=None, prefix: str = ""):
    """Project to per-head Q/K/V, attend in parallel, concatenate, project back.

    Expects square projection matrices named {prefix}wq/wk/wv/wo in `params`.
    `kv` switches the key/value source for cross-attention. Accepts (T, d)
    or (B, T, d) input; returns a Tensor when given one, else an ndarray.
    """
    xt = ad.astensor(x)
    d = xt.value.shape[-1]
    if d % head_count != 0:
        raise ConfigError(f"d_model {d} not divisible by head_count {head_count}")
    dh = d // head_count
    flat = xt.value.ndim == 2
    if flat:
        xt = ad.reshape(xt, (1,) + xt.value.shape)
    source = ad.astensor(kv) if kv is not None else xt
    if kv is not None and source.value.ndim == 2:
        source = ad.reshape(source, (1,) + source.value.shape)

    def split_heads(m: Tensor) -> Tensor:
        b, t, _ = m.value.shape
        return ad.transpose(ad.reshape(m, (b, t, head_count, dh)), (0, 2, 1, 3))

    qh = split_heads(ad.matmul(xt, params.tensor(prefix + "wq")))
    kh = split_heads(ad.matmul(source, params.tensor(prefix + "wk")))
    vh = split_heads(ad.matmul(source, params.tensor(prefix + "wv")))
    heads = scaled_dot_attention(qh, kh, vh, causal=causal)
    b, _, tq, _ = heads.value.shape
    merged = ad.reshape(ad.transpose(heads, (0, 2, 1, 3)), (b, tq, d))
    out = ad.matmul(merged, params.tensor(prefix + "wo"))
    if flat:
        out = ad.reshape(out, out.value.shape[1:])
    if isinstance(x, Tensor) or isinstance(kv, Tensor):
        return out
    return out.value


@dataclass(frozen=True)
class TransformerConfig:
    """Architecture dimensions; defaults keep training interactive on a CPU."""

    d_model: int = 32
    head_count: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    conv_kernel_width: int = 3
    pool_range: int = 3
    context_length: int = 24
    horizon_length: int = 6

    def __post_init__(self):
        for field in ("d_model", "head_count", "encoder_layers", "decoder_layers",
                      "context_length", "horizon_length"):
            if getattr(self, field) < 1:
                raise ConfigError(f"{field} must be positive")
        if self.d_model % self.head_count != 0:
            raise ConfigError(
                f"d_model {self.d_model} must be divisible by head_count {self.head_count}"
            )
        if self.d_model % 2 != 0:
            raise ConfigError("d_model must be even for sinusoidal positional encoding")
        if self.conv_kernel_width % 2 == 0 or self.conv_kernel_width < 1:
            raise ConfigError("conv_kernel_width must be odd and positive")
        if self.pool_range % 2 == 0 or self.pool_range < 1:
            raise ConfigError("pool_range must be odd and positive")

    def to_dict(self) -> dict:
        return {
            "d_model": self.d_model,
            "head_count": self.head_count,
            "encoder_layers": self.encoder_layers,
            "decoder_layers": self.decoder_layers,
            "conv_kernel_width": self.conv_kernel_width,
            "pool_range": self.pool_range,
            "context_length": self.context_length,
            "horizon_length": self.horizon_length,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TransformerConfig":
        return cls(**payload)


def _sequence_windows(values: np.ndarray, context: int, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """All (context, next-horizon) pairs from a 1-D array, oldest first."""
    n = len(values) - context - horizon + 1
    if n < 1:
        raise InsufficientDataError(
            f"need at least {context + horizon} points, got {len(values)}"
        )
    contexts = np.lib.stride_tricks.sliding_window_view(values, context)[:n]
    targets = np.lib.stride_tricks.sliding_window_view(values[context:], horizon)[:n]
    return np.ascontiguousarray(contexts), np.ascontiguousarray(targets)


def _guarded_normalize(values: np.ndarray) -> np.ndarray:
    """Per-series min-max squeeze; constant series map to a flat 0.5."""
    lo, hi = float(values.min()), float(values.max())
    if hi - lo < 1e-12:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


class TransformerForecaster:
    """The pretrain/fine-tune/zero-shot forecaster built on the nn substrate."""

    TRAINED_STATES = ("untrained", "pretrained", "fine_tuned")

    def __init__(self, config: TransformerConfig | None = None, init_seed: int = 0):
        self.config = config or TransformerConfig()
        self.params = ParamStore()
        self.normalizer: NormalizationParams | None = None
        self.trained = "untrained"
        self.pretrain_learning_rate = 1e-3
        self.provenance: dict = {"init_seed": init_seed}
        self._init_params(init_seed)

    # ---- construction -----------------------------------------------------

    def _init_params(self, seed: int) -> None:
        cfg = self.config
        d, k = cfg.d_model, cfg.conv_kernel_width
        rng = np.random.default_rng(seed)

        def dense(name: str, rows: int, cols: int, fan_in: int, fan_out: int):
            self.params.add(name, glorot_init(rng, fan_in, fan_out, (rows, cols)))

        dense("embed.enc.w", 1, d, 1, d)
        self.params.add("embed.enc.b", np.zeros((1, d)))
        dense("embed.dec.w", 1, d, 1, d)
        self.params.add("embed.dec.b", np.zeros((1, d)))
        self.params.add("start", rng.normal(scale=0.1, size=(1, d)))

        def attention_block(prefix: str):
            for name in ATTENTION_WEIGHT_NAMES:
                dense(prefix + name, d, d, d, d)

        def conv_block(prefix: str):
            dense(prefix + "w", k * d, d, k * d, d)
            self.params.add(prefix + "b", np.zeros((1, d)))

        def norm_block(prefix: str):
            self.params.add(prefix + "g", np.ones((1, d)))
            self.params.add(prefix + "b", np.zeros((1, d)))

        for i in range(cfg.encoder_layers):
            attention_block(f"enc{i}.attn.")
            norm_block(f"enc{i}.ln1.")
            conv_block(f"enc{i}.conv.")
            norm_block(f"enc{i}.ln2.")
        for i in range(cfg.decoder_layers):
            attention_block(f"dec{i}.self.")
            norm_block(f"dec{i}.ln1.")
            attention_block(f"dec{i}.cross.")
            norm_block(f"dec{i}.ln2.")
            conv_block(f"dec{i}.conv.")
            norm_block(f"dec{i}.ln3.")
        dense("head.w", d, 1, d, 1)
        self.params.add("head.b", np.zeros((1, 1)))

    def clone(self) -> "TransformerForecaster":
        """Independent copy with the same weights; optimizer state starts fresh."""
        twin = TransformerForecaster(self.config, init_seed=0)
        twin.params.load_values_from(self.params)
        twin.normalizer = self.normalizer
        twin.trained = self.trained
        twin.pretrain_learning_rate = self.pretrain_learning_rate
        twin.provenance = dict(self.provenance)
        return twin

    def set_normalizer(self, normalizer: NormalizationParams) -> None:
        self.normalizer = normalizer

    def state_hash(self) -> str:
        return self.params.state_hash()

    # ---- forward passes ---------------------------------------------------

    def _ln(self, prefix: str, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.params.tensor(prefix + "g"), self.params.tensor(prefix + "b"))

    def _conv_block(self, prefix: str, x: Tensor, causal: bool = False) -> Tensor:
        cfg = self.config
        kernel = ad.reshape(
            self.params.tensor(prefix + "w"),
            (cfg.conv_kernel_width, cfg.d_model, cfg.d_model),
        )
        return conv_pool_forward(
            x, kernel, self.params.tensor(prefix + "b"), cfg.pool_range, causal=causal
        )

    def _encode(self, contexts: np.ndarray) -> Tensor:
        cfg = self.config
        b, t = contexts.shape
        h = ad.add(
            ad.matmul(Tensor(contexts.reshape(b, t, 1)), self.params.tensor("embed.enc.w")),
            self.params.tensor("embed.enc.b"),
        )
        h = ad.add(h, Tensor(positional_encoding(t, cfg.d_model)))
        for i in range(cfg.encoder_layers):
            p = f"enc{i}."
            h = self._ln(p + "ln1.", ad.add(h, multi_head_attention(h, self.params, cfg.head_count, prefix=p + "attn.")))
            h = self._ln(p + "ln2.", ad.add(h, self._conv_block(p + "conv.", h)))
        return h

    def _decode(self, previous: np.ndarray, encoded: Tensor) -> Tensor:
        """Run the decoder on [start token, embedded previous values].

        previous: (B, m) with m >= 0 already-known (or generated) outputs.
        Returns hidden states (B, m + 1, d_model); position j predicts
        output step j + 1.
        """
        cfg = self.config
        b = encoded.value.shape[0]
        d = cfg.d_model
        start = ad.add(Tensor(np.zeros((b, 1, d))), ad.reshape(self.params.tensor("start"), (1, 1, d)))
        m = previous.shape[1]
        if m > 0:
            emb = ad.add(
                ad.matmul(Tensor(previous.reshape(b, m, 1)), self.params.tensor("embed.dec.w")),
                self.params.tensor("embed.dec.b"),
            )
            tokens = ad.concat([start, emb], axis=1)
        else:
            tokens = start
        h = ad.add(tokens, Tensor(positional_encoding(m + 1, d)))
        for i in range(cfg.decoder_layers):
            p = f"dec{i}."
            h = self._ln(p + "ln1.", ad.add(h, multi_head_attention(h, self.params, cfg.head_count, causal=True, prefix=p + "self.")))
            h = self._ln(p + "ln2.", ad.add(h, multi_head_attention(h, self.params, cfg.head_count, kv=encoded, prefix=p + "cross.")))
            h = self._ln(p + "ln3.", ad.add(h, self._conv_block(p + "conv.", h, causal=True)))
        return h

    def _head(self, hidden: Tensor) -> Tensor:
        b, t, _ = hidden.value.shape
        out = ad.add(ad.matmul(hidden, self.params.tensor("head.w")), self.params.tensor("head.b"))
        return ad.reshape(out, (b, t))

    def _forward_teacher(self, contexts: np.ndarray, targets: np.ndarray) -> Tensor:
        """Teacher-forced predictions (B, horizon) for training loss."""
        encoded = self._encode(contexts)
        return self._head(self._decode(targets[:, :-1], encoded))

    def forward(self, context: np.ndarray, decoder_seed: np.ndarray | None = None) -> np.ndarray:
        """One forward pass over a normalized context window.

        With decoder_seed (the horizon_length - 1 values preceding each
        prediction step, teacher forcing), the decoder runs in a single shot;
        without it the decoder feeds back its own outputs. Returns normalized
        predictions shaped like the input batch.
        """
        context = np.asarray(context, dtype=np.float64)
        flat = context.ndim == 1
        if flat:
            context = context[None, :]
        if context.shape[1] != self.config.context_length:
            raise ShapeError(
                f"context length {context.shape[1]} != configured {self.config.context_length}"
            )
        with no_grad():
            if decoder_seed is not None:
                seed = np.asarray(decoder_seed, dtype=np.float64)
                if flat and seed.ndim == 1:
                    seed = seed[None, :]
                if seed.shape != (context.shape[0], self.config.horizon_length - 1):
                    raise ShapeError(
                        f"decoder seed must be (batch, {self.config.horizon_length - 1})"
                    )
                out = self._head(self._decode(seed, self._encode(context))).value
            else:
                out = self._generate(context, self.config.horizon_length)
        return out[0] if flat else out

    def _generate(self, contexts: np.ndarray, steps: int) -> np.ndarray:
        """Autoregressive decode of `steps` <= horizon_length normalized values."""
        b = contexts.shape[0]
        with no_grad():
            encoded = self._encode(contexts)
            generated = np.zeros((b, 0))
            for _ in range(steps):
                hidden = self._head(self._decode(generated, encoded)).value
                generated = np.concatenate([generated, hidden[:, -1:]], axis=1)
        return generated

    # ---- inference --------------------------------------------------------

    def forecast(self, history, horizon_hours: int) -> np.ndarray:
        """Denormalized forecasts for the hours following `history`.

        history: TimeSeries or 1-D array with at least context_length values.
        Horizons past the native decoder length recurse: each round's
        predictions are appended to the context for the next round.
        """
        values = history.values if isinstance(history, TimeSeries) else np.asarray(history, dtype=np.float64)
        return self.forecast_batch(values[None, :], horizon_hours)[0]

    def forecast_batch(self, histories: np.ndarray, horizon_hours: int) -> np.ndarray:
        """Vectorized forecast over (B, >= context_length) rows of raw values."""
        if horizon_hours < 1:
            raise ConfigError(f"horizon must be >= 1, got {horizon_hours}")
        if self.normalizer is None:
            raise StateError("no normalizer set; fine-tune or set_normalizer first")
        histories = np.asarray(histories, dtype=np.float64)
        ctx = self.config.context_length
        if histories.shape[1] < ctx:
            raise InsufficientDataError(
                f"history has {histories.shape[1]} points, need >= {ctx}"
            )
        window = self.normalizer.apply(histories[:, -ctx:])
        chunks = []
        remaining = horizon_hours
        while remaining > 0:
            steps = min(self.config.horizon_length, remaining)
            predictions = self._generate(window, steps)
            chunks.append(predictions)
            window = np.concatenate([window, predictions], axis=1)[:, -ctx:]
            remaining -= steps
        return self.normalizer.invert(np.concatenate(chunks, axis=1))

    # ---- training ---------------------------------------------------------

    def _run_epochs(
        self,
        contexts: np.ndarray,
        targets: np.ndarray,
        epochs: int,
        learning_rate: float,
        rng: np.random.Generator,
        batch_size: int,
        val_contexts: np.ndarray | None = None,
        val_targets: np.ndarray | None = None,
        patience: int = EARLY_STOP_PATIENCE,
    ) -> list[float]:
        n = contexts.shape[0]
        for param in self.params:
            param.m[...] = 0.0
            param.v[...] = 0.0
        self.params.zero_grads()
        curve: list[float] = []
        best_val = np.inf
        best_state: dict[str, np.ndarray] | None = None
        stale = 0
        step = 0
        for _ in range(epochs):
            order = rng.permutation(n)
            total = 0.0
            for lo in range(0, n, batch_size):
                batch = order[lo : lo + batch_size]
                loss = ad.mse(self._forward_teacher(contexts[batch], targets[batch]), targets[batch])
                loss.backward()
                step += 1
                adam_update(self.params, learning_rate, step)
                total += float(loss.value) * len(batch)
            curve.append(total / n)
            if val_contexts is not None:
                with no_grad():
                    val_pred = self._forward_teacher(val_contexts, val_targets)
                    val_loss = float(np.mean((val_pred.value - val_targets) ** 2))
                if val_loss < best_val - 1e-12:
                    best_val = val_loss
                    best_state = self.params.snapshot()
                    stale = 0
                else:
                    stale += 1
                    if stale >= patience:
                        break
        if best_state is not None:
            self.params.restore(best_state)
        return curve

    def pretrain(
        self,
        corpus: list[TimeSeries],
        epochs: int = 10,
        learning_rate: float = 1e-3,
        seed: int = 0,
        batch_size: int = 256,
    ) -> list[float]:
        """Train on a corpus of series (each min-max squeezed on its own range).

        Windows from every series are pooled and shuffled each epoch; the
        loss is MSE on normalized values. Returns the per-epoch training
        curve. With epochs=0 this is a no-op that leaves the model untrained.
        """
        if not corpus:
            raise InsufficientDataError("pretraining corpus is empty")
        cfg = self.config
        need = cfg.context_length + cfg.horizon_length
        all_contexts, all_targets = [], []
        for series in corpus:
            if len(series) < need:
                raise InsufficientDataError(
                    f"series {series.name!r} has {len(series)} points, need >= {need}"
                )
            values = _guarded_normalize(series.values)
            c, t = _sequence_windows(values, cfg.context_length, cfg.horizon_length)
            all_contexts.append(c)
            all_targets.append(t)
        contexts = np.concatenate(all_contexts, axis=0)
        targets = np.concatenate(all_targets, axis=0)
        curve = self._run_epochs(
            contexts, targets, epochs, learning_rate, np.random.default_rng(seed), batch_size
        )
        if epochs > 0:
            self.trained = "pretrained"
            self.pretrain_learning_rate = learning_rate
            if self.normalizer is None:
                self.normalizer = NormalizationParams(0.0, 1.0)
            self.provenance.update(
                {"pretrain_seed": seed, "pretrain_epochs": epochs,
                 "pretrain_learning_rate": learning_rate, "corpus_series": len(corpus)}
            )
        return curve

    def fine_tune(
        self,
        target_train,
        epochs: int = 20,
        learning_rate: float | None = None,
        seed: int = 0,
        batch_size: int = 32,
    ) -> list[float]:
        """Continue training on the scarce target series at a reduced rate.

        Fits the model's normalizer on the target train slice, then runs MSE
        training with early stopping monitored on the chronological last 20%
        of windows. Requires a pretrained model.
        """
        if self.trained != "pretrained":
            raise StateError(f"fine_tune requires a pretrained model, state is {self.trained!r}")
        values = target_train.values if isinstance(target_train, TimeSeries) else np.asarray(target_train, dtype=np.float64)
        cfg = self.config
        if len(values) < cfg.context_length + 1:
            raise InsufficientDataError(
                f"target train has {len(values)} points, need >= {cfg.context_length + 1}"
            )
        if learning_rate is None:
            learning_rate = FINE_TUNE_LR_FACTOR * self.pretrain_learning_rate
        self.normalizer = fit_normalizer(values)
        normalized = self.normalizer.apply(values)
        horizon = min(cfg.horizon_length, len(values) - cfg.context_length)
        contexts, targets = _sequence_windows(normalized, cfg.context_length, horizon)
        n = contexts.shape[0]
        val_count = int(round(VALIDATION_TAIL * n)) if n >= 5 else 0
        if val_count > 0:
            split = n - val_count
            val_c, val_t = contexts[split:], targets[split:]
            contexts, targets = contexts[:split], targets[:split]
        else:
            val_c = val_t = None
        curve = self._run_epochs(
            contexts, targets, epochs, learning_rate,
            np.random.default_rng(seed), batch_size, val_c, val_t,
        )
        if epochs > 0:
            self.trained = "fine_tuned"
            self.provenance.update({"fine_tune_seed": seed, "fine_tune_epochs": epochs})
        return curve

    # ---- persistence ------------------------------------------------------

    def save(self, path: str) -> None:
        """Write the weight binary at `path` and a JSON sidecar at path + '.json'."""
        self.params.save(path)
        sidecar = {
            "config": self.config.to_dict(),
            "normalizer": self.normalizer.to_dict() if self.normalizer else None,
            "trained": self.trained,
            "pretrain_learning_rate": self.pretrain_learning_rate,
            "provenance": self.provenance,
        }
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "TransformerForecaster":
        sidecar_path = path + ".json"
        if not os.path.exists(sidecar_path):
            raise StateError(f"missing model sidecar {sidecar_path}")
        with open(sidecar_path, "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
        model = cls(TransformerConfig.from_dict(sidecar["config"]), init_seed=0)
        loaded = ParamStore.load(path)
        model.params.load_values_from(loaded)
        model.normalizer = (
            NormalizationParams.from_dict(sidecar["normalizer"]) if sidecar["normalizer"] else None
        )
        if sidecar["trained"] not in cls.TRAINED_STATES:
            raise StateError(f"unknown trained state {sidecar['trained']!r}")
        model.trained = sidecar["trained"]
        model.pretrain_learning_rate = float(sidecar["pretrain_learning_rate"])
        model.provenance = dict(sidecar.get("provenance", {}))
        return model
