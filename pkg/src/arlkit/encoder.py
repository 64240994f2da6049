"""Small MLP with hand-written forward/backward and a decoupled-decay Adam.

The same machinery serves the encoder and the generic prediction heads used
by the gradient-descent-ascent baselines and by frozen-encoder evaluation.
Data flows column-major: a batch is a (features x batch) matrix and every
layer computes W @ h + b with the activation applied to hidden layers only.

Optional instance normalization rescales each output column to unit
Euclidean norm (guarded by a 1e-8 floor for zero vectors).
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MlpSpec",
    "EncoderParams",
    "DivergenceError",
    "init",
    "forward",
    "backward",
    "adam_step",
    "adam_extrapolate",
    "save_checkpoint",
    "load_checkpoint",
    "param_checksum",
]

INSTANCE_NORM_EPS = 1e-8
CHECKPOINT_VERSION = 1
_ACTIVATIONS = ("relu", "leaky_relu")
LEAKY_SLOPE = 0.2


class DivergenceError(RuntimeError):
    """Raised when an update or loss stops being finite."""


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "relu"
    instance_norm_output: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer widths must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden, self.output_dim]
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    @property
    def parameter_count(self) -> int:
        return sum(fo * fi + fo for fo, fi in self.layer_dims)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "output_dim": self.output_dim,
            "activation": self.activation,
            "instance_norm_output": self.instance_norm_output,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden=tuple(d["hidden"]),
            output_dim=int(d["output_dim"]),
            activation=d.get("activation", "relu"),
            instance_norm_output=bool(d.get("instance_norm_output", False)),
        )


@dataclass
class EncoderParams:
    """Layer weights/biases plus Adam state. Owned by one trainer at a time."""

    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    m_w: list[np.ndarray] = field(repr=False, default_factory=list)
    v_w: list[np.ndarray] = field(repr=False, default_factory=list)
    m_b: list[np.ndarray] = field(repr=False, default_factory=list)
    v_b: list[np.ndarray] = field(repr=False, default_factory=list)
    step: int = 0
    seed: int = 0


def init(spec: MlpSpec, seed: int) -> EncoderParams:
    """Deterministic initialization: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), b = 0."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_out, fan_in in spec.layer_dims:
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return EncoderParams(
        spec=spec,
        weights=weights,
        biases=biases,
        m_w=[np.zeros_like(w) for w in weights],
        v_w=[np.zeros_like(w) for w in weights],
        m_b=[np.zeros_like(b) for b in biases],
        v_b=[np.zeros_like(b) for b in biases],
        step=0,
        seed=seed,
    )


def _activate(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(a, 0.0)
    return np.where(a > 0.0, a, LEAKY_SLOPE * a)


def _activate_grad(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (a > 0.0).astype(np.float64)
    return np.where(a > 0.0, 1.0, LEAKY_SLOPE)


def forward(params: EncoderParams, x: np.ndarray):
    """Run the batch through the network; returns (output, cache for backward)."""
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if h.shape[0] != params.spec.input_dim:
        raise ValueError(f"expected {params.spec.input_dim} input rows, got {h.shape[0]}")
    inputs, preacts = [], []
    n_layers = len(params.weights)
    for li in range(n_layers):
        inputs.append(h)
        a = params.weights[li] @ h + params.biases[li][:, None]
        preacts.append(a)
        h = _activate(a, params.spec.activation) if li < n_layers - 1 else a
    norms = None
    if params.spec.instance_norm_output:
        norms = np.maximum(np.linalg.norm(h, axis=0), INSTANCE_NORM_EPS)
        h = h / norms[None, :]
    cache = {"inputs": inputs, "preacts": preacts, "norms": norms, "normed": h}
    return h, cache


def backward(params: EncoderParams, cache: dict, d_out: np.ndarray):
    """Backpropagate d_out = dL/d(output); returns (d_weights, d_biases, d_input).

    The instance-norm backward uses d(z/||z||)/dz = (I - zhat zhat^T) / ||z||
    per column (columns at the norm floor pass the gradient through scaled
    by the floor).
    """
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.shape != cache["normed"].shape:
        raise ValueError(f"gradient shape {d_out.shape} != output shape {cache['normed'].shape}")
    g = d_out
    if params.spec.instance_norm_output:
        norms = cache["norms"]
        zhat = cache["normed"]
        raw_norms = np.linalg.norm(cache["preacts"][-1], axis=0)
        proj = g - zhat * np.sum(zhat * g, axis=0, keepdims=True)
        g = np.where(raw_norms[None, :] > INSTANCE_NORM_EPS, proj / norms[None, :], d_out / INSTANCE_NORM_EPS)
    d_weights = [None] * len(params.weights)
    d_biases = [None] * len(params.biases)
    kind = params.spec.activation
    n_layers = len(params.weights)
    for li in range(n_layers - 1, -1, -1):
        d_a = g if li == n_layers - 1 else g * _activate_grad(cache["preacts"][li], kind)
        d_weights[li] = d_a @ cache["inputs"][li].T
        d_biases[li] = d_a.sum(axis=1)
        g = params.weights[li].T @ d_a
    return d_weights, d_biases, g


def _adam_update(m, v, t, g, lr, beta1, beta2, eps):
    """One bias-corrected Adam update; returns (m', v', delta)."""
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return m, v, -lr * m_hat / (np.sqrt(v_hat) + eps)


def adam_step(
    params: EncoderParams,
    grads,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> EncoderParams:
    """Adam with decoupled weight decay, applied in place.

    Weights (not biases) are first shrunk by (1 - lr * weight_decay), then
    the bias-corrected Adam step is applied.
    """
    d_weights, d_biases = grads[0], grads[1]
    for g in (*d_weights, *d_biases):
        if not np.all(np.isfinite(g)):
            raise DivergenceError("diverged")
    params.step += 1
    t = params.step
    shrink = 1.0 - lr * weight_decay
    for li in range(len(params.weights)):
        if weight_decay:
            params.weights[li] *= shrink
        params.m_w[li], params.v_w[li], dw = _adam_update(
            params.m_w[li], params.v_w[li], t, d_weights[li], lr, beta1, beta2, eps
        )
        params.weights[li] += dw
        params.m_b[li], params.v_b[li], db = _adam_update(
            params.m_b[li], params.v_b[li], t, d_biases[li], lr, beta1, beta2, eps
        )
        params.biases[li] += db
        if not (np.all(np.isfinite(params.weights[li])) and np.all(np.isfinite(params.biases[li]))):
            raise DivergenceError("diverged")
    return params


def adam_extrapolate(
    params: EncoderParams,
    grads,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> EncoderParams:
    """A provisional Adam step: same update rule, but nothing is committed.

    Returns a read-only evaluation copy at the extrapolated point; moment
    accumulators and the step counter of ``params`` are untouched.
    """
    d_weights, d_biases = grads[0], grads[1]
    t = params.step + 1
    shrink = 1.0 - lr * weight_decay
    weights, biases = [], []
    for li in range(len(params.weights)):
        w = params.weights[li] * shrink if weight_decay else params.weights[li].copy()
        _, _, dw = _adam_update(params.m_w[li], params.v_w[li], t, d_weights[li], lr, beta1, beta2, eps)
        weights.append(w + dw)
        _, _, db = _adam_update(params.m_b[li], params.v_b[li], t, d_biases[li], lr, beta1, beta2, eps)
        biases.append(params.biases[li] + db)
    return EncoderParams(
        spec=params.spec,
        weights=weights,
        biases=biases,
        m_w=params.m_w,
        v_w=params.v_w,
        m_b=params.m_b,
        v_b=params.v_b,
        step=params.step,
        seed=params.seed,
    )


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype=np.float64)
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(a.astype("<f8").tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(d["shape"]).copy()


def save_checkpoint(params: EncoderParams, path) -> None:
    """Write a versioned JSON checkpoint; float64 payloads are stored as the
    base64 of their little-endian IEEE-754 bytes so round trips are bit-exact."""
    arrays = {}
    for li in range(len(params.weights)):
        arrays[f"w{li}"] = _encode_array(params.weights[li])
        arrays[f"b{li}"] = _encode_array(params.biases[li])
        arrays[f"mw{li}"] = _encode_array(params.m_w[li])
        arrays[f"vw{li}"] = _encode_array(params.v_w[li])
        arrays[f"mb{li}"] = _encode_array(params.m_b[li])
        arrays[f"vb{li}"] = _encode_array(params.v_b[li])
    blob = {
        "version": CHECKPOINT_VERSION,
        "spec": params.spec.to_dict(),
        "seed": params.seed,
        "step": params.step,
        "arrays": arrays,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(blob, f, sort_keys=True, separators=(",", ":"))


def load_checkpoint(path) -> EncoderParams:
    with open(path, encoding="utf-8") as f:
        blob = json.load(f)
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('version')!r}")
    spec = MlpSpec.from_dict(blob["spec"])
    n_layers = len(spec.layer_dims)
    arrays = blob["arrays"]
    return EncoderParams(
        spec=spec,
        weights=[_decode_array(arrays[f"w{li}"]) for li in range(n_layers)],
        biases=[_decode_array(arrays[f"b{li}"]) for li in range(n_layers)],
        m_w=[_decode_array(arrays[f"mw{li}"]) for li in range(n_layers)],
        v_w=[_decode_array(arrays[f"vw{li}"]) for li in range(n_layers)],
        m_b=[_decode_array(arrays[f"mb{li}"]) for li in range(n_layers)],
        v_b=[_decode_array(arrays[f"vb{li}"]) for li in range(n_layers)],
        step=int(blob["step"]),
        seed=int(blob["seed"]),
    )


def param_checksum(params: EncoderParams) -> str:
    """SHA-256 over the spec and all weight/bias bytes; detects any mutation."""
    h = hashlib.sha256()
    h.update(json.dumps(params.spec.to_dict(), sort_keys=True).encode())
    for a in (*params.weights, *params.biases):
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()
