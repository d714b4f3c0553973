"""Hierarchical recurrent event model.

Three LSTM layers run at every grid location with shared weights. Layer 1
reads the location's feature vector; layer l > 1 reads h^{l-1}_t and gets
m^{l-1}_t added to its candidate pre-activation. An affine head maps the
top hidden state to the next-frame feature vector.
"""
import logging
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from encoder.conv_encoder import FeatureGrid
from errors import ShapeError
from numerics.lstm import CellCache, LstmCellParams, lstm_cell_backward, lstm_cell_forward
from numerics.tensor import DTYPE, check_finite, global_norm

logger = logging.getLogger(__name__)


@dataclass
class PredictorConfig:
    hidden_size: int = 64
    num_layers: int = 3
    bptt_window: int = 8
    init_std: float = 0.1
    forget_bias: float = 1.0
    clip_norm: float = 1.0
    seed: int = 11


@dataclass
class LearningRateConfig:
    initial: float = 1e-8
    surprise_scale: float = 1e-2
    decay_scale: float = 1e-3
    min_lr: float = 1e-10
    max_lr: float = 1e-2
    ema_factor: float = 0.99


@dataclass
class ErrorHistory:
    """Exponential running mean and variance."""
    mean: float = 0.0
    var: float = 0.0
    count: int = 0

    @property
    def std(self):
        return float(np.sqrt(max(self.var, 0.0)))

    def updated(self, value, factor):
        if self.count == 0:
            return ErrorHistory(float(value), 0.0, 1)
        delta = float(value) - self.mean
        mean = self.mean + (1.0 - factor) * delta
        var = factor * (self.var + (1.0 - factor) * delta * delta)
        return ErrorHistory(mean, var, self.count + 1)


@dataclass
class StackState:
    layers: list
    head_w: np.ndarray
    head_b: np.ndarray
    h: list
    m: list
    grid_shape: tuple
    learning_rate: float = 1e-8
    error_history: ErrorHistory = field(default_factory=ErrorHistory)

    @property
    def hidden_size(self):
        return self.head_w.shape[1]

    @property
    def locations(self):
        return self.grid_shape[0] * self.grid_shape[1]

    def param_arrays(self):
        arrays = []
        for params in self.layers:
            arrays.extend(a for _, a in params.named_arrays())
        return arrays + [self.head_w, self.head_b]

    def nbytes(self):
        return sum(a.nbytes for a in self.param_arrays()) + sum(a.nbytes for a in (*self.h, *self.m))


@dataclass
class StepCache:
    layers: list
    top_hidden: np.ndarray


@dataclass
class PredictionOutcome:
    predicted: FeatureGrid
    error_scalar: float
    error_map: np.ndarray
    zoh_mask: np.ndarray
    target: np.ndarray = None


def init_state(grid_shape, cfg: PredictorConfig, lr_cfg: LearningRateConfig = None, dtype=DTYPE):
    h_f, w_f, d_f = grid_shape
    lr_cfg = lr_cfg or LearningRateConfig()
    rng = np.random.default_rng(cfg.seed)
    d_h = cfg.hidden_size
    layers = []
    for n in range(cfg.num_layers):
        d_in = d_f if n == 0 else d_h
        layers.append(LstmCellParams.initialize(d_in, d_h, rng, cfg.init_std, cfg.forget_bias, dtype))
    head_w = (rng.standard_normal((d_f, d_h)) * cfg.init_std).astype(dtype)
    head_b = np.zeros(d_f, dtype=dtype)
    zeros = [np.zeros((h_f * w_f, d_h), dtype=dtype) for _ in range(cfg.num_layers)]
    return StackState(
        layers=layers, head_w=head_w, head_b=head_b,
        h=zeros, m=[z.copy() for z in zeros],
        grid_shape=tuple(grid_shape), learning_rate=lr_cfg.initial,
    )


def stack_forward(state: StackState, grid: FeatureGrid):
    """Predict the next feature grid; returns ``(predicted, new_state, cache)``."""
    if tuple(grid.dims) != tuple(state.grid_shape):
        raise ShapeError(f"grid dims {grid.dims} do not match the stack's {state.grid_shape}")
    h_f, w_f, d_f = state.grid_shape
    x = grid.values.reshape(h_f * w_f, d_f).astype(state.head_w.dtype, copy=False)
    new_h, new_m, caches = [], [], []
    below_m = None
    for n, params in enumerate(state.layers):
        h_t, m_t, cache = lstm_cell_forward(params, x, state.h[n], state.m[n], g_extra=below_m)
        new_h.append(h_t)
        new_m.append(m_t)
        caches.append(cache)
        x, below_m = h_t, m_t
    predicted = x @ state.head_w.T + state.head_b
    check_finite(predicted, "predicted grid")
    out = FeatureGrid(predicted.reshape(h_f, w_f, d_f), grid.frame_index + 1)
    return out, replace(state, h=new_h, m=new_m), StepCache(caches, x)


def zoh_loss(predicted: FeatureGrid, actual_next: FeatureGrid, current: FeatureGrid):
    """Zero-order-hold weighted prediction error.

    mask(i,j) = mean_d |f_{t+1} - f_t|, e(i,j) = mask * (sum_d |f_{t+1} - f̂_{t+1}|)^2,
    E = mean(e).
    """
    if not (predicted.dims == actual_next.dims == current.dims):
        raise ShapeError(
            f"zoh_loss grids disagree: {predicted.dims}, {actual_next.dims}, {current.dims}"
        )
    target = actual_next.values.astype(predicted.values.dtype, copy=False)
    mask = np.abs(target - current.values).mean(axis=2)
    l1 = np.abs(target - predicted.values).sum(axis=2)
    error_map = check_finite(mask * l1 ** 2, "error map")
    return PredictionOutcome(
        predicted=predicted,
        error_scalar=float(error_map.mean()),
        error_map=error_map,
        zoh_mask=mask,
        target=target,
    )


def loss_gradient(outcome: PredictionOutcome):
    """dE/d(predicted) as an (n_locations, d_f) array."""
    pred = outcome.predicted.values
    h_f, w_f, d_f = pred.shape
    diff = outcome.target - pred
    l1 = np.abs(diff).sum(axis=2)
    scale = -(2.0 / (h_f * w_f)) * outcome.zoh_mask * l1
    grad = scale[..., None] * np.sign(diff)
    return grad.reshape(h_f * w_f, d_f).astype(pred.dtype, copy=False)


def stack_gradients(state: StackState, window, outcome: PredictionOutcome):
    """Truncated BPTT over ``window`` (oldest first; newest produced ``outcome``).

    Returns ``(layer_grads, head_w_grad, head_b_grad)``.
    """
    steps = list(window)
    if not steps:
        raise ShapeError("stack_gradients needs at least one cached step")
    d_pred = loss_gradient(outcome)
    newest = steps[-1]
    head_w_grad = d_pred.T @ newest.top_hidden
    head_b_grad = d_pred.sum(axis=0)
    d_top = d_pred @ state.head_w

    n_layers = len(state.layers)
    layer_grads = [LstmCellParams.zeros(p.d_in, p.d_h, d_pred.dtype) for p in state.layers]
    carry_h = [np.zeros_like(h) for h in state.h]
    carry_m = [np.zeros_like(m) for m in state.m]
    for k, step in enumerate(reversed(steps)):
        dh = list(carry_h)
        dm = list(carry_m)
        if k == 0:
            dh[-1] = dh[-1] + d_top
        for n in reversed(range(n_layers)):
            grads = lstm_cell_backward(step.layers[n], state.layers[n], dh[n], dm[n])
            for name, g in grads.params.named_arrays():
                acc = getattr(layer_grads[n], name)
                acc += g
            if n > 0:
                dh[n - 1] = dh[n - 1] + grads.x
                dm[n - 1] = dm[n - 1] + grads.g_extra
            carry_h[n] = grads.h_prev
            carry_m[n] = grads.m_prev
    return layer_grads, head_w_grad, head_b_grad


def continual_update(state: StackState, window, outcome: PredictionOutcome, clip_norm=1.0):
    """One clipped gradient step at the state's current learning rate."""
    layer_grads, head_w_grad, head_b_grad = stack_gradients(state, window, outcome)
    all_grads = [a for g in layer_grads for _, a in g.named_arrays()] + [head_w_grad, head_b_grad]
    norm = global_norm(all_grads)
    if norm == 0.0:
        return state
    scale = state.learning_rate * (min(1.0, clip_norm / norm))
    new_layers = []
    for params, grads in zip(state.layers, layer_grads):
        values = {}
        for (name, p), (_, g) in zip(params.named_arrays(), grads.named_arrays()):
            values[name] = p - (scale * g).astype(p.dtype, copy=False)
        new_layers.append(LstmCellParams(**values))
    head_w = state.head_w - (scale * head_w_grad).astype(state.head_w.dtype, copy=False)
    head_b = state.head_b - (scale * head_b_grad).astype(state.head_b.dtype, copy=False)
    for array in (head_w, head_b, *(a for p in new_layers for _, a in p.named_arrays())):
        check_finite(array, "updated parameter")
    return replace(state, layers=new_layers, head_w=head_w, head_b=head_b)


def adapt_learning_rate(state: StackState, error, cfg: LearningRateConfig = None):
    """Multiplicative surprise rule; returns ``(learning_rate, error_history)``."""
    cfg = cfg or LearningRateConfig()
    history = state.error_history
    lr = state.learning_rate
    if history.count > 0 and error > history.mean:
        lr *= 1.0 + cfg.surprise_scale
    else:
        lr *= 1.0 - cfg.decay_scale
    lr = min(max(lr, cfg.min_lr), cfg.max_lr)
    return lr, history.updated(error, cfg.ema_factor)


class Predictor:
    """Owns the stack state and its BPTT window for one stream."""

    def __init__(self, state: StackState, cfg: PredictorConfig, lr_cfg: LearningRateConfig):
        self.state = state
        self.cfg = cfg
        self.lr_cfg = lr_cfg
        self.window = deque(maxlen=cfg.bptt_window)
        self.pending = None

    @classmethod
    def create(cls, grid_shape, cfg, lr_cfg):
        return cls(init_state(grid_shape, cfg, lr_cfg), cfg, lr_cfg)

    def predict(self, grid):
        predicted, self.state, cache = stack_forward(self.state, grid)
        self.window.append(cache)
        self.pending = predicted
        return predicted

    @property
    def top_hidden(self):
        return self.window[-1].top_hidden if self.window else None

    def learn(self, outcome):
        lr, history = adapt_learning_rate(self.state, outcome.error_scalar, self.lr_cfg)
        self.state = replace(self.state, learning_rate=lr, error_history=history)
        self.state = continual_update(self.state, self.window, outcome, self.cfg.clip_norm)
        return self.state.learning_rate

    def nbytes(self):
        total = self.state.nbytes()
        for step in self.window:
            total += step.top_hidden.nbytes
            for cache in step.layers:
                total += sum(a.nbytes for _, a in cache.named_arrays())
        if self.pending is not None:
            total += self.pending.values.nbytes
        return total

    def to_tensors(self):
        tensors = {}
        for n, params in enumerate(self.state.layers):
            for name, array in params.named_arrays():
                tensors[f"layer{n}/{name}"] = array
            tensors[f"state/h{n}"] = self.state.h[n]
            tensors[f"state/m{n}"] = self.state.m[n]
        tensors["head/w"] = self.state.head_w
        tensors["head/b"] = self.state.head_b
        for k, step in enumerate(self.window):
            tensors[f"window/{k}/top_hidden"] = step.top_hidden
            for n, cache in enumerate(step.layers):
                for name, array in cache.named_arrays():
                    tensors[f"window/{k}/layer{n}/{name}"] = array
        if self.pending is not None:
            tensors["pending"] = self.pending.values
        extras = {
            "grid_shape": list(self.state.grid_shape),
            "learning_rate": self.state.learning_rate,
            "error_history": [self.state.error_history.mean, self.state.error_history.var, self.state.error_history.count],
            "window_length": len(self.window),
            "pending_frame": self.pending.frame_index if self.pending is not None else None,
        }
        return tensors, extras

    @classmethod
    def from_tensors(cls, tensors, extras, cfg, lr_cfg):
        n_layers = cfg.num_layers
        layers = []
        for n in range(n_layers):
            prefix = f"layer{n}/"
            layers.append(LstmCellParams(**{k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}))
        mean, var, count = extras["error_history"]
        state = StackState(
            layers=layers,
            head_w=tensors["head/w"],
            head_b=tensors["head/b"],
            h=[tensors[f"state/h{n}"] for n in range(n_layers)],
            m=[tensors[f"state/m{n}"] for n in range(n_layers)],
            grid_shape=tuple(extras["grid_shape"]),
            learning_rate=float(extras["learning_rate"]),
            error_history=ErrorHistory(float(mean), float(var), int(count)),
        )
        predictor = cls(state, cfg, lr_cfg)
        for k in range(int(extras["window_length"])):
            caches = []
            for n in range(n_layers):
                prefix = f"window/{k}/layer{n}/"
                arrays = {key[len(prefix):]: v for key, v in tensors.items() if key.startswith(prefix)}
                caches.append(CellCache(**arrays))
            predictor.window.append(StepCache(caches, tensors[f"window/{k}/top_hidden"]))
        if "pending" in tensors:
            predictor.pending = FeatureGrid(tensors["pending"], int(extras["pending_frame"]))
        return predictor
