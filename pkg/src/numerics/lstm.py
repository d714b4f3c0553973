"""LSTM cell with an exact hand-derived backward pass.

All arrays are row-batched: ``x`` is (n, d_in), ``h``/``m`` are (n, d_h).
The prediction stack runs one row per spatial location.
"""
from dataclasses import dataclass, fields

import numpy as np

from errors import ShapeError, UsageError
from numerics.tensor import DTYPE, check_finite, sigmoid

GATES = ("i", "f", "o", "g")


@dataclass
class LstmCellParams:
    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    w_hi: np.ndarray
    w_hf: np.ndarray
    w_ho: np.ndarray
    w_hg: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    def __post_init__(self):
        d_h, d_in = self.w_i.shape
        for gate in GATES:
            if getattr(self, f"w_{gate}").shape != (d_h, d_in):
                raise ShapeError(f"w_{gate} must be {(d_h, d_in)}")
            if getattr(self, f"w_h{gate}").shape != (d_h, d_h):
                raise ShapeError(f"w_h{gate} must be {(d_h, d_h)}")
            if getattr(self, f"b_{gate}").shape != (d_h,):
                raise ShapeError(f"b_{gate} must be {(d_h,)}")

    @property
    def d_in(self):
        return self.w_i.shape[1]

    @property
    def d_h(self):
        return self.w_i.shape[0]

    @classmethod
    def initialize(cls, d_in, d_h, rng, std=0.1, forget_bias=1.0, dtype=DTYPE):
        """Seeded Gaussian weights, zero biases except the forget gate."""
        values = {}
        for gate in GATES:
            values[f"w_{gate}"] = (rng.standard_normal((d_h, d_in)) * std).astype(dtype)
        for gate in GATES:
            values[f"w_h{gate}"] = (rng.standard_normal((d_h, d_h)) * std).astype(dtype)
        for gate in GATES:
            values[f"b_{gate}"] = np.zeros(d_h, dtype=dtype)
        values["b_f"][:] = forget_bias
        return cls(**values)

    @classmethod
    def zeros(cls, d_in, d_h, dtype=DTYPE):
        values = {}
        for f in fields(cls):
            if f.name.startswith("w_h"):
                values[f.name] = np.zeros((d_h, d_h), dtype=dtype)
            elif f.name.startswith("w_"):
                values[f.name] = np.zeros((d_h, d_in), dtype=dtype)
            else:
                values[f.name] = np.zeros(d_h, dtype=dtype)
        return cls(**values)

    def named_arrays(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def astype(self, dtype):
        return LstmCellParams(**{name: a.astype(dtype) for name, a in self.named_arrays()})

    def copy(self):
        return LstmCellParams(**{name: a.copy() for name, a in self.named_arrays()})


@dataclass
class CellCache:
    """Activations of one step; the weights are not kept."""
    x: np.ndarray
    h_prev: np.ndarray
    m_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    m: np.ndarray
    tanh_m: np.ndarray

    def named_arrays(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


def lstm_cell_forward(params, x_t, h_prev, m_prev, g_extra=None):
    """One step of the cell.

    ``g_extra`` is added to the candidate (g) pre-activation; the stack uses
    it to feed the lower layer's memory upward.
    Returns ``(h_t, m_t, cache)``.
    """
    if x_t.ndim != 2 or x_t.shape[1] != params.d_in:
        raise ShapeError(f"x_t must be (n, {params.d_in}), got {x_t.shape}")
    n = x_t.shape[0]
    for name, state in (("h_prev", h_prev), ("m_prev", m_prev)):
        if state.shape != (n, params.d_h):
            raise ShapeError(f"{name} must be {(n, params.d_h)}, got {state.shape}")

    def pre(gate):
        w = getattr(params, f"w_{gate}")
        wh = getattr(params, f"w_h{gate}")
        b = getattr(params, f"b_{gate}")
        return x_t @ w.T + h_prev @ wh.T + b

    i = sigmoid(pre("i"))
    f = sigmoid(pre("f"))
    o = sigmoid(pre("o"))
    g_pre = pre("g")
    if g_extra is not None:
        if g_extra.shape != g_pre.shape:
            raise ShapeError(f"g_extra must be {g_pre.shape}, got {g_extra.shape}")
        g_pre = g_pre + g_extra
    g = np.tanh(g_pre)
    m_t = f * m_prev + i * g
    tanh_m = np.tanh(m_t)
    h_t = o * tanh_m
    check_finite(h_t, "lstm hidden state")
    check_finite(m_t, "lstm memory cell")
    cache = CellCache(x_t, h_prev, m_prev, i, f, o, g, m_t, tanh_m)
    return h_t, m_t, cache


@dataclass
class CellGradients:
    params: LstmCellParams
    x: np.ndarray
    h_prev: np.ndarray
    m_prev: np.ndarray
    g_extra: np.ndarray


def lstm_cell_backward(cache, params, dh_t, dm_t=None):
    """Gradients of a scalar loss given dL/dh_t and dL/dm_t (upstream).

    ``params`` are the weights to differentiate through; truncated BPTT
    over a window of past steps passes the current weights.
    """
    if cache is None:
        raise UsageError("lstm_cell_backward called without a forward cache")
    if dm_t is None:
        dm_t = np.zeros_like(cache.m)

    d_o = dh_t * cache.tanh_m
    dm = dm_t + dh_t * cache.o * (1.0 - cache.tanh_m ** 2)
    d_f = dm * cache.m_prev
    d_i = dm * cache.g
    d_g = dm * cache.i
    dm_prev = dm * cache.f

    d_pre = {
        "i": d_i * cache.i * (1.0 - cache.i),
        "f": d_f * cache.f * (1.0 - cache.f),
        "o": d_o * cache.o * (1.0 - cache.o),
        "g": d_g * (1.0 - cache.g ** 2),
    }

    grads = {}
    dx = np.zeros_like(cache.x)
    dh_prev = np.zeros_like(cache.h_prev)
    for gate in GATES:
        delta = d_pre[gate]
        grads[f"w_{gate}"] = delta.T @ cache.x
        grads[f"w_h{gate}"] = delta.T @ cache.h_prev
        grads[f"b_{gate}"] = delta.sum(axis=0)
        dx += delta @ getattr(params, f"w_{gate}")
        dh_prev += delta @ getattr(params, f"w_h{gate}")

    return CellGradients(
        params=LstmCellParams(**grads),
        x=dx,
        h_prev=dh_prev,
        m_prev=dm_prev,
        g_extra=d_pre["g"],
    )
