"""MLP and LSTM baselines trained with Adam on the shared autodiff substrate.

Both models keep the sigmoid output head, which pins predictions inside
(0, 1); that matches targets that were min-max normalized on the training
slice.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, InsufficientDataError, NumericError
from ..nn import ParamStore, adam_update, glorot_init
from ..nn import autodiff as ad
from ..nn.autodiff import Tensor, no_grad
from ..series import SupervisedWindowSet

LSTM_GATES = ("input", "forget", "output", "cell")


def lstm_cell_step(x, h, c, params: ParamStore, prefix: str = ""):
    """One LSTM cell update returning (h_next, c_next).

    Gate order: input/forget/output sigmoids and a tanh cell candidate, each
    from x @ W + h @ U + b with parameters named {prefix}{gate}.w/u/b.
    """
    x, h, c = ad.astensor(x), ad.astensor(h), ad.astensor(c)

    def gate(name: str, squash):
        pre = ad.add(
            ad.add(
                ad.matmul(x, params.tensor(f"{prefix}{name}.w")),
                ad.matmul(h, params.tensor(f"{prefix}{name}.u")),
            ),
            params.tensor(f"{prefix}{name}.b"),
        )
        return squash(pre)

    i = gate("input", ad.sigmoid)
    f = gate("forget", ad.sigmoid)
    o = gate("output", ad.sigmoid)
    g = gate("cell", ad.tanh)
    c_next = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_next = ad.mul(o, ad.tanh(c_next))
    return h_next, c_next


def _check_finite_loss(loss: Tensor) -> None:
    if not np.isfinite(loss.value):
        raise NumericError("training loss became non-finite")


def _minibatch_train(
    params: ParamStore,
    forward_loss,
    sample_count: int,
    epochs: int,
    batch: int,
    learning_rate: float,
    rng: np.random.Generator,
) -> list[float]:
    """Shuffled minibatch Adam loop shared by the neural baselines."""
    curve = []
    step = 0
    for _ in range(epochs):
        order = rng.permutation(sample_count)
        total = 0.0
        for lo in range(0, sample_count, batch):
            chosen = order[lo : lo + batch]
            loss = forward_loss(chosen)
            _check_finite_loss(loss)
            loss.backward()
            step += 1
            adam_update(params, learning_rate, step)
            total += float(loss.value) * len(chosen)
        curve.append(total / sample_count)
    return curve


class MLPModel:
    """Dense ReLU stack with a sigmoid head, sized per the benchmark table."""

    def __init__(self, layers: tuple[int, ...] = (16, 16, 1), epochs: int = 200,
                 batch: int = 8, learning_rate: float = 1e-3):
        if not layers or layers[-1] != 1:
            raise ConfigError(f"layers must end with a single output unit, got {layers}")
        self.layers = tuple(layers)
        self.epochs = epochs
        self.batch = batch
        self.learning_rate = learning_rate
        self.params: ParamStore | None = None
        self.curve: list[float] = []

    def _build(self, input_dim: int, rng: np.random.Generator) -> ParamStore:
        params = ParamStore()
        fan_in = input_dim
        for idx, units in enumerate(self.layers, start=1):
            params.add(f"w{idx}", glorot_init(rng, fan_in, units, (fan_in, units)))
            params.add(f"b{idx}", np.zeros((1, units)))
            fan_in = units
        return params

    def _forward(self, features: np.ndarray) -> Tensor:
        h: Tensor = Tensor(features)
        last = len(self.layers)
        for idx in range(1, last + 1):
            h = ad.add(ad.matmul(h, self.params.tensor(f"w{idx}")), self.params.tensor(f"b{idx}"))
            h = ad.sigmoid(h) if idx == last else ad.relu(h)
        return ad.reshape(h, (features.shape[0],))

    def fit(self, windows: SupervisedWindowSet, seed: int = 0) -> "MLPModel":
        x, y = windows.inputs, windows.targets
        if len(y) == 0:
            raise InsufficientDataError("cannot fit on zero windows")
        rng = np.random.default_rng(seed)
        self.params = self._build(x.shape[1], rng)

        def forward_loss(chosen):
            return ad.mse(self._forward(x[chosen]), y[chosen])

        self.curve = _minibatch_train(
            self.params, forward_loss, len(y), self.epochs, self.batch,
            self.learning_rate, rng,
        )
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self.params is None:
            raise InsufficientDataError("model is not fitted")
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        with no_grad():
            return self._forward(features).value


class LSTMModel:
    """Two stacked LSTM layers over the load-lag sequence, dense sigmoid head.

    The window's lag values form a (steps x 1 feature) sequence; the two
    hour-of-day features skip the recurrence and join the final hidden state
    at the dense stage.
    """

    def __init__(self, lstm_units: tuple[int, ...] = (16, 8), dense_units: tuple[int, ...] = (8, 1),
                 epochs: int = 200, batch: int = 8, learning_rate: float = 1e-3):
        if not lstm_units:
            raise ConfigError("need at least one LSTM layer")
        if not dense_units or dense_units[-1] != 1:
            raise ConfigError(f"dense_units must end with a single output, got {dense_units}")
        self.lstm_units = tuple(lstm_units)
        self.dense_units = tuple(dense_units)
        self.epochs = epochs
        self.batch = batch
        self.learning_rate = learning_rate
        self.params: ParamStore | None = None
        self.window_length: int | None = None
        self.curve: list[float] = []

    def _build(self, rng: np.random.Generator) -> ParamStore:
        params = ParamStore()
        input_dim = 1
        for layer, units in enumerate(self.lstm_units):
            for gate in LSTM_GATES:
                prefix = f"lstm{layer}.{gate}"
                params.add(f"{prefix}.w", glorot_init(rng, input_dim, units, (input_dim, units)))
                params.add(f"{prefix}.u", glorot_init(rng, units, units, (units, units)))
                bias = np.ones((1, units)) if gate == "forget" else np.zeros((1, units))
                params.add(f"{prefix}.b", bias)
            input_dim = units
        fan_in = self.lstm_units[-1] + 2  # hidden state + hour sin/cos
        for idx, units in enumerate(self.dense_units, start=1):
            params.add(f"dense.w{idx}", glorot_init(rng, fan_in, units, (fan_in, units)))
            params.add(f"dense.b{idx}", np.zeros((1, units)))
            fan_in = units
        return params

    def _forward(self, features: np.ndarray) -> Tensor:
        w = self.window_length
        batch = features.shape[0]
        sequence = features[:, :w]
        clock = features[:, w:]
        steps = [Tensor(sequence[:, t : t + 1]) for t in range(w)]
        for layer, units in enumerate(self.lstm_units):
            h = Tensor(np.zeros((batch, units)))
            c = Tensor(np.zeros((batch, units)))
            outputs = []
            for x_t in steps:
                h, c = lstm_cell_step(x_t, h, c, self.params, prefix=f"lstm{layer}.")
                outputs.append(h)
            steps = outputs
        h = ad.concat([steps[-1], Tensor(clock)], axis=1)
        last = len(self.dense_units)
        for idx in range(1, last + 1):
            h = ad.add(ad.matmul(h, self.params.tensor(f"dense.w{idx}")), self.params.tensor(f"dense.b{idx}"))
            h = ad.sigmoid(h) if idx == last else ad.relu(h)
        return ad.reshape(h, (batch,))

    def fit(self, windows: SupervisedWindowSet, seed: int = 0) -> "LSTMModel":
        x, y = windows.inputs, windows.targets
        if len(y) == 0:
            raise InsufficientDataError("cannot fit on zero windows")
        self.window_length = windows.window_length
        rng = np.random.default_rng(seed)
        self.params = self._build(rng)

        def forward_loss(chosen):
            return ad.mse(self._forward(x[chosen]), y[chosen])

        self.curve = _minibatch_train(
            self.params, forward_loss, len(y), self.epochs, self.batch,
            self.learning_rate, rng,
        )
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self.params is None:
            raise InsufficientDataError("model is not fitted")
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        with no_grad():
            return self._forward(features).value
