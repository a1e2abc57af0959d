"""Q-network numeric core: stacked LSTM (or FCN control), BPTT, Huber, Adam.

Parameters live in a flat, ordered ``{name: ndarray}`` mapping so the
optimiser, cloning and checkpointing treat every architecture alike.

LSTM layer ``k`` stores its four gates stacked in the order
input, forget, cell, output::

    lstm{k}.W   (4H, in)     input weights
    lstm{k}.U   (4H, H)      recurrent weights
    lstm{k}.b   (4H,)        bias
    head.W      (3, H)       Q-value head
    head.b      (3,)

The FCN control uses ``fc{k}.W`` / ``fc{k}.b`` with ReLU activations on the
flattened N*6 input and the same ``head.*`` output layer.
"""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from hpfold.core.encoding import FEATURES
from hpfold.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

N_ACTIONS = 3
CHECKPOINT_VERSION = 1

Params = Dict[str, np.ndarray]

_TAG = re.compile(r"^(lstm|fcn)(?:(\d+)x(\d+))?$")


def default_lstm(n: int) -> Tuple[int, int]:
    """(layers, hidden) used for a chain of length ``n``."""
    return (2, 256) if n <= 36 else (3, 512)


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of a Q-network for chains of length ``n``.

    For the FCN control, ``layers`` and ``hidden`` describe the LSTM it is
    paired with; the dense width is solved to match that parameter count.
    """

    kind: str
    layers: int
    hidden: int
    n: int

    @classmethod
    def from_tag(cls, tag: str, n: int) -> "NetworkSpec":
        """Parse ``auto``, ``lstm2x256``, ``lstm3x512``, ``fcn`` or ``fcn2x256``.

        :param tag: architecture tag
        :param n: sequence length
        :return: network spec
        """
        tag = tag.strip().lower()
        if tag == "auto":
            tag = "lstm"
        m = _TAG.match(tag)
        if not m:
            raise ConfigError(f"Unknown architecture {tag!r}")
        kind, layers, hidden = m.groups()
        if layers is None:
            layers, hidden = default_lstm(n)
        layers, hidden = int(layers), int(hidden)
        if layers < 1 or hidden < 1:
            raise ConfigError(f"Architecture {tag!r} needs at least one layer and unit")
        return cls(kind=kind, layers=layers, hidden=hidden, n=n)

    @property
    def tag(self) -> str:
        return f"{self.kind}{self.layers}x{self.hidden}"

    @property
    def fcn_width(self) -> int:
        return fcn_width_for(self.n, self.layers, lstm_parameter_count(self.layers, self.hidden))


def lstm_parameter_count(layers: int, hidden: int) -> int:
    total = 0
    fan_in = FEATURES
    for _ in range(layers):
        total += 4 * hidden * (fan_in + hidden + 1)
        fan_in = hidden
    return total + N_ACTIONS * hidden + N_ACTIONS


def fcn_parameter_count(n: int, layers: int, width: int) -> int:
    total = FEATURES * n * width + width
    total += (layers - 1) * (width * width + width)
    return total + N_ACTIONS * width + N_ACTIONS


def fcn_width_for(n: int, layers: int, target: int) -> int:
    """Dense width whose FCN parameter count is closest to ``target``."""
    a = layers - 1
    b = FEATURES * n + 1 + (layers - 1) + N_ACTIONS
    c = N_ACTIONS - target
    if a == 0:
        guess = -c / b
    else:
        guess = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
    candidates = {max(1, int(math.floor(guess))), max(1, int(math.ceil(guess)))}
    return min(candidates, key=lambda w: abs(fcn_parameter_count(n, layers, w) - target))


@dataclass
class QNetworkParams:
    """All learnable tensors of one Q-network."""

    spec: NetworkSpec
    tensors: Params

    @property
    def dtype(self):
        return self.tensors["head.b"].dtype

    @property
    def parameter_count(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def init_params(spec: NetworkSpec, rng: np.random.Generator, dtype=np.float32) -> QNetworkParams:
    """Draw initial weights.

    LSTM and head weights are uniform on +-1/sqrt(hidden); biases are zero
    except the forget gate, which starts at 1. FCN layers use +-1/sqrt(fan_in).

    :param spec: architecture
    :param rng: weight-initialisation stream
    :param dtype: float32 for training, float64 for gradient checks
    :return: fresh parameters
    """
    tensors: Params = {}

    def uniform(shape, bound):
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    if spec.kind == "lstm":
        h = spec.hidden
        bound = 1.0 / math.sqrt(h)
        fan_in = FEATURES
        for k in range(spec.layers):
            tensors[f"lstm{k}.W"] = uniform((4 * h, fan_in), bound)
            tensors[f"lstm{k}.U"] = uniform((4 * h, h), bound)
            b = np.zeros(4 * h, dtype=dtype)
            b[h : 2 * h] = 1.0
            tensors[f"lstm{k}.b"] = b
            fan_in = h
        tensors["head.W"] = uniform((N_ACTIONS, h), bound)
    else:
        width = spec.fcn_width
        fan_in = FEATURES * spec.n
        for k in range(spec.layers):
            tensors[f"fc{k}.W"] = uniform((width, fan_in), 1.0 / math.sqrt(fan_in))
            tensors[f"fc{k}.b"] = np.zeros(width, dtype=dtype)
            fan_in = width
        tensors["head.W"] = uniform((N_ACTIONS, fan_in), 1.0 / math.sqrt(fan_in))
    tensors["head.b"] = np.zeros(N_ACTIONS, dtype=dtype)
    return QNetworkParams(spec=spec, tensors=tensors)


def zeros_like_params(params: QNetworkParams) -> Params:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


def clone_params(src: QNetworkParams) -> QNetworkParams:
    """Deep copy; later changes to either side do not leak."""
    return QNetworkParams(spec=src.spec, tensors={k: v.copy() for k, v in src.tensors.items()})


# --- forward / backward ---


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _as_batch(params: QNetworkParams, x) -> Tuple[np.ndarray, bool]:
    """Cast ``x`` to a (B, N, 6) array of the parameter dtype."""
    x = np.asarray(x)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] != FEATURES:
        raise ShapeError(f"Expected input of shape (N, {FEATURES}) or (B, N, {FEATURES}), got {x.shape}")
    if x.shape[1] != params.spec.n:
        raise ShapeError(f"Network built for N={params.spec.n}, got input with N={x.shape[1]}")
    return x.astype(params.dtype, copy=False), single


def _lstm_forward(params: QNetworkParams, xb: np.ndarray):
    t = params.tensors
    batch, n, _ = xb.shape
    layers = []
    inp = xb
    for k in range(params.spec.layers):
        W, U, b = t[f"lstm{k}.W"], t[f"lstm{k}.U"], t[f"lstm{k}.b"]
        hid = U.shape[1]
        h = np.zeros((batch, n + 1, hid), dtype=xb.dtype)
        c = np.zeros((batch, n + 1, hid), dtype=xb.dtype)
        gates = np.empty((batch, n, 4 * hid), dtype=xb.dtype)
        xw = inp @ W.T + b
        for s in range(n):
            z = xw[:, s] + h[:, s] @ U.T
            gates[:, s, : 2 * hid] = _sigmoid(z[:, : 2 * hid])
            gates[:, s, 2 * hid : 3 * hid] = np.tanh(z[:, 2 * hid : 3 * hid])
            gates[:, s, 3 * hid :] = _sigmoid(z[:, 3 * hid :])
            i, f, g, o = np.split(gates[:, s], 4, axis=1)
            c[:, s + 1] = f * c[:, s] + i * g
            h[:, s + 1] = o * np.tanh(c[:, s + 1])
        layers.append((inp, h, c, gates))
        inp = h[:, 1:]
    last = inp[:, -1]
    q = last @ t["head.W"].T + t["head.b"]
    return q, (layers, last)


def _lstm_backward(params: QNetworkParams, cache, dq: np.ndarray) -> Params:
    t = params.tensors
    layers, last = cache
    grads = zeros_like_params(params)
    grads["head.W"] = dq.T @ last
    grads["head.b"] = dq.sum(axis=0)

    batch, n = layers[-1][0].shape[:2]
    top = t["head.W"].shape[1]
    dseq = np.zeros((batch, n, top), dtype=dq.dtype)
    dseq[:, -1] = dq @ t["head.W"]

    for k in reversed(range(params.spec.layers)):
        inp, h, c, gates = layers[k]
        W, U = t[f"lstm{k}.W"], t[f"lstm{k}.U"]
        hid = U.shape[1]
        dz = np.empty((batch, n, 4 * hid), dtype=dq.dtype)
        dh_next = np.zeros((batch, hid), dtype=dq.dtype)
        dc_next = np.zeros((batch, hid), dtype=dq.dtype)
        for s in reversed(range(n)):
            i, f, g, o = np.split(gates[:, s], 4, axis=1)
            tc = np.tanh(c[:, s + 1])
            dh = dseq[:, s] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz[:, s, :hid] = dc * g * i * (1.0 - i)
            dz[:, s, hid : 2 * hid] = dc * c[:, s] * f * (1.0 - f)
            dz[:, s, 2 * hid : 3 * hid] = dc * i * (1.0 - g * g)
            dz[:, s, 3 * hid :] = dh * tc * o * (1.0 - o)
            dh_next = dz[:, s] @ U
            dc_next = dc * f
        flat = dz.reshape(-1, 4 * hid)
        grads[f"lstm{k}.W"] = flat.T @ inp.reshape(-1, inp.shape[-1])
        grads[f"lstm{k}.U"] = flat.T @ h[:, :n].reshape(-1, hid)
        grads[f"lstm{k}.b"] = flat.sum(axis=0)
        dseq = dz @ W
    return grads


def _fcn_forward(params: QNetworkParams, xb: np.ndarray):
    t = params.tensors
    a = xb.reshape(xb.shape[0], -1)
    acts = [a]
    for k in range(params.spec.layers):
        a = np.maximum(a @ t[f"fc{k}.W"].T + t[f"fc{k}.b"], 0.0)
        acts.append(a)
    q = a @ t["head.W"].T + t["head.b"]
    return q, acts


def _fcn_backward(params: QNetworkParams, acts, dq: np.ndarray) -> Params:
    t = params.tensors
    grads = zeros_like_params(params)
    grads["head.W"] = dq.T @ acts[-1]
    grads["head.b"] = dq.sum(axis=0)
    da = dq @ t["head.W"]
    for k in reversed(range(params.spec.layers)):
        dz = da * (acts[k + 1] > 0)
        grads[f"fc{k}.W"] = dz.T @ acts[k]
        grads[f"fc{k}.b"] = dz.sum(axis=0)
        da = dz @ t[f"fc{k}.W"]
    return grads


def forward_cached(params: QNetworkParams, x):
    """Q-values plus whatever ``backward_cached`` needs.

    :param params: network parameters
    :param x: encoded state(s), (N, 6) or (B, N, 6)
    :return: (q of shape (B, 3), cache)
    """
    xb, _ = _as_batch(params, x)
    return _forward_batch(params, xb)


def _forward_batch(params: QNetworkParams, xb: np.ndarray):
    if params.spec.kind == "lstm":
        return _lstm_forward(params, xb)
    return _fcn_forward(params, xb)


def backward_cached(params: QNetworkParams, cache, upstream: np.ndarray) -> Params:
    """Gradients of <upstream, Q> for the batch held in ``cache``."""
    dq = np.atleast_2d(np.asarray(upstream, dtype=params.dtype))
    if dq.shape[-1] != N_ACTIONS:
        raise ShapeError(f"Upstream must have {N_ACTIONS} columns, got shape {dq.shape}")
    if params.spec.kind == "lstm":
        return _lstm_backward(params, cache, dq)
    return _fcn_backward(params, cache, dq)


def forward(params: QNetworkParams, x) -> np.ndarray:
    """Q-values in action order (L, F, R).

    :param params: network parameters
    :param x: encoded state (N, 6) or a batch (B, N, 6)
    :return: shape (3,) for one state, (B, 3) for a batch
    """
    xb, single = _as_batch(params, x)
    q, _ = _forward_batch(params, xb)
    return q[0] if single else q


def fcn_forward(params: QNetworkParams, x) -> np.ndarray:
    """Forward pass of the fully-connected control network."""
    if params.spec.kind != "fcn":
        raise ShapeError(f"fcn_forward needs FCN parameters, got {params.spec.tag}")
    return forward(params, x)


def backward(params: QNetworkParams, x, upstream) -> Params:
    """Exact gradients of <upstream, forward(params, x)> for every tensor."""
    _, cache = forward_cached(params, x)
    return backward_cached(params, cache, upstream)


# --- loss ---


def huber(delta):
    """0.5 * d^2 inside |d| <= 1, |d| - 0.5 outside."""
    a = np.abs(delta)
    return np.where(a <= 1.0, 0.5 * np.square(delta), a - 0.5)


def huber_grad(delta):
    return np.clip(delta, -1.0, 1.0)


# --- optimiser ---


@dataclass
class AdamState:
    """Bias-corrected Adam moments for every parameter tensor."""

    m: Params
    v: Params
    t: int = 0
    lr: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: QNetworkParams, **hyper) -> "AdamState":
        return cls(m=zeros_like_params(params), v=zeros_like_params(params), **hyper)

    def hyperparameters(self) -> Dict[str, float]:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}


def global_norm(grads: Params) -> float:
    return float(math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))


def adam_step(
    params: QNetworkParams,
    grads: Params,
    state: AdamState,
    clip_norm: Optional[float] = None,
) -> Tuple[QNetworkParams, AdamState]:
    """Apply one Adam update in place.

    :param params: parameters to update
    :param grads: gradients with the same names and shapes
    :param state: optimiser moments, advanced by one step
    :param clip_norm: optional global-norm gradient clip
    :return: (params, state), the same objects
    """
    if clip_norm is not None:
        norm = global_norm(grads)
        if norm > clip_norm:
            scale = clip_norm / norm
            grads = {k: g * scale for k, g in grads.items()}

    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    step_size = state.lr / bc1
    for name, p in params.tensors.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"Gradient {name} has shape {g.shape}, parameter has {p.shape}")
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= (step_size * m / (np.sqrt(v / bc2) + state.eps)).astype(p.dtype, copy=False)
    return params, state


# --- checkpoints ---


@dataclass
class Checkpoint:
    params: QNetworkParams
    adam: Optional[AdamState] = None
    rng_state: Dict[str, Any] = field(default_factory=dict)
    counters: Dict[str, Any] = field(default_factory=dict)


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> Path:
    """Write a versioned ``.npz`` container.

    :param path: destination file
    :param checkpoint: parameters, optimiser, RNG states and counters
    :return: the written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    spec = checkpoint.params.spec
    meta = {
        "version": CHECKPOINT_VERSION,
        "spec": {"kind": spec.kind, "layers": spec.layers, "hidden": spec.hidden, "n": spec.n},
        "tag": spec.tag,
        "names": list(checkpoint.params.tensors),
        "rng_state": checkpoint.rng_state,
        "counters": checkpoint.counters,
        "adam": None,
    }
    arrays = {f"param/{k}": v for k, v in checkpoint.params.tensors.items()}
    if checkpoint.adam is not None:
        meta["adam"] = {"t": checkpoint.adam.t, **checkpoint.adam.hyperparameters()}
        arrays.update({f"adam_m/{k}": v for k, v in checkpoint.adam.m.items()})
        arrays.update({f"adam_v/{k}": v for k, v in checkpoint.adam.v.items()})
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    """Read a checkpoint written by ``save_checkpoint``."""
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"Unsupported checkpoint version {meta.get('version')} in {path}")
        spec = NetworkSpec(**meta["spec"])
        names = meta["names"]
        params = QNetworkParams(spec=spec, tensors={k: data[f"param/{k}"].copy() for k in names})
        adam = None
        if meta["adam"] is not None:
            hyper = dict(meta["adam"])
            t = hyper.pop("t")
            adam = AdamState(
                m={k: data[f"adam_m/{k}"].copy() for k in names},
                v={k: data[f"adam_v/{k}"].copy() for k in names},
                t=t,
                **hyper,
            )
    return Checkpoint(params=params, adam=adam, rng_state=meta["rng_state"], counters=meta["counters"])
