"""Small fully-connected networks with hand-written backprop, Adam, and
diagonal Gaussian distribution helpers.

Parameters of an :class:`MlpNetwork` live in one contiguous float64 vector.
Per-layer weight matrices and bias vectors are views into it, so an optimizer
can update the flat vector in place and the network sees the change.

Layout of the flat vector, layer by layer: weight matrix of shape
``(n_in, n_out)`` in row-major order, then the ``n_out`` biases.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidCacheError, NumericError, ShapeError

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
HALF_LOG_2PIE = 0.5 * np.log(2.0 * np.pi * np.e)

CHECKPOINT_MAGIC = b"GASIL1"


def param_count(layer_sizes):
    return sum((n_in + 1) * n_out for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]))


def orthogonal(rng, n_in, n_out, gain):
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


class MlpNetwork:
    """tanh MLP with an identity output layer.

    Args:
        layer_sizes: ``[input, hidden..., output]``.
        params: optional float64 vector used as parameter storage (not
            copied). Lets several networks share one optimizer vector.
        rng: generator for orthogonal initialization. Without it all
            parameters start at zero.
        output_gain: init gain of the last layer; hidden layers use sqrt(2).
    """

    def __init__(self, layer_sizes, params=None, rng=None, output_gain=1.0):
        self.layer_sizes = [int(n) for n in layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ShapeError(f"bad layer sizes {layer_sizes}")
        n = param_count(self.layer_sizes)
        if params is None:
            params = np.zeros(n)
        elif params.shape != (n,) or params.dtype != np.float64:
            raise ShapeError(f"parameter storage must be float64 of length {n}")
        self.params = params
        self.weights = []
        self.biases = []
        offset = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            self.weights.append(params[offset:offset + n_in * n_out].reshape(n_in, n_out))
            offset += n_in * n_out
            self.biases.append(params[offset:offset + n_out])
            offset += n_out
        if rng is not None:
            last = len(self.weights) - 1
            for i, w in enumerate(self.weights):
                gain = output_gain if i == last else np.sqrt(2.0)
                w[...] = orthogonal(rng, w.shape[0], w.shape[1], gain)
                self.biases[i][...] = 0.0

    @property
    def n_params(self):
        return self.params.size

    @property
    def input_size(self):
        return self.layer_sizes[0]

    @property
    def output_size(self):
        return self.layer_sizes[-1]

    def flatten(self):
        return self.params.copy()

    def unflatten(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != self.params.shape:
            raise ShapeError(f"expected {self.params.size} parameters, got {flat.shape}")
        self.params[...] = flat

    def forward(self, x):
        """Evaluate the network on one input vector or a ``(batch, n_in)`` array.

        Returns ``(output, cache)`` where the cache holds the input of every
        layer and is consumed by :meth:`backward`.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim not in (1, 2) or x.shape[-1] != self.layer_sizes[0]:
            raise ShapeError(f"input shape {x.shape} does not match input size {self.layer_sizes[0]}")
        cache = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                h = np.tanh(h)
                cache.append(h)
        return h, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, output_grad):
        """Gradient of ``sum(output * output_grad)`` w.r.t. the flat parameters.

        Batched inputs accumulate (sum) over the batch.
        """
        if len(cache) != len(self.weights):
            raise InvalidCacheError("cache depth does not match network")
        for a, n_in in zip(cache, self.layer_sizes[:-1]):
            if a.shape[-1] != n_in:
                raise InvalidCacheError("cache activation width does not match network")
        g = np.asarray(output_grad, dtype=np.float64)
        if g.shape != cache[0].shape[:-1] + (self.layer_sizes[-1],):
            raise InvalidCacheError(f"output gradient shape {g.shape} does not match cache")
        grad = np.empty_like(self.params)
        offset = self.params.size
        for i in range(len(self.weights) - 1, -1, -1):
            a = cache[i]
            n_in, n_out = self.weights[i].shape
            offset -= n_out
            if g.ndim == 1:
                grad[offset:offset + n_out] = g
                offset -= n_in * n_out
                grad[offset:offset + n_in * n_out] = np.outer(a, g).ravel()
            else:
                grad[offset:offset + n_out] = g.sum(axis=0)
                offset -= n_in * n_out
                grad[offset:offset + n_in * n_out] = (a.T @ g).ravel()
            if i > 0:
                # cache[i] is tanh output of the previous layer
                g = (g @ self.weights[i].T) * (1.0 - a * a)
        return grad


@dataclass
class AdamState:
    size: int
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-5
    step: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.size)
        if self.v is None:
            self.v = np.zeros(self.size)
        # scratch space so a step allocates nothing
        self._tmp = np.empty(self.size)
        self._step_dir = np.empty(self.size)


def adam_step(params, grads, state, lr=None):
    """Apply one bias-corrected Adam descent step to ``params`` in place.

    Raises :class:`NumericError` without touching anything if a gradient
    component is not finite.
    """
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError("params, grads and Adam moments must have equal length")
    if not np.isfinite(grads).all():
        raise NumericError("non-finite gradient; Adam update aborted")
    lr = state.lr if lr is None else lr
    state.step += 1
    tmp, step_dir = state._tmp, state._step_dir
    state.m *= state.beta1
    np.multiply(grads, 1.0 - state.beta1, out=tmp)
    state.m += tmp
    state.v *= state.beta2
    np.multiply(grads, 1.0 - state.beta2, out=tmp)
    tmp *= grads
    state.v += tmp
    # lr * m_hat / (sqrt(v_hat) + eps)
    np.divide(state.m, 1.0 - state.beta1 ** state.step, out=step_dir)
    step_dir *= lr
    np.divide(state.v, 1.0 - state.beta2 ** state.step, out=tmp)
    np.sqrt(tmp, out=tmp)
    tmp += state.eps
    step_dir /= tmp
    params -= step_dir
    return params


@dataclass
class DiagonalGaussian:
    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_std = np.clip(np.asarray(self.log_std, dtype=np.float64), LOG_STD_MIN, LOG_STD_MAX)

    @property
    def std(self):
        return np.exp(self.log_std)


def gaussian_log_prob(dist, action):
    """Log density of ``action``; batched means give one value per row."""
    action = np.asarray(action, dtype=np.float64)
    if action.shape[-1] != dist.mean.shape[-1]:
        raise ShapeError(f"action dimension {action.shape[-1]} != {dist.mean.shape[-1]}")
    z = (action - dist.mean) / dist.std
    return np.sum(-0.5 * z * z - dist.log_std - HALF_LOG_2PI, axis=-1)


def gaussian_log_prob_grads(dist, action):
    """Partial derivatives of the log density w.r.t. mean and (clamped) log_std."""
    std = dist.std
    diff = np.asarray(action, dtype=np.float64) - dist.mean
    d_mean = diff / (std * std)
    d_log_std = (diff / std) ** 2 - 1.0
    return d_mean, d_log_std


def gaussian_entropy(dist):
    return float(np.sum(dist.log_std + HALF_LOG_2PIE))


def sample_action(dist, rng):
    return dist.mean + dist.std * rng.standard_normal(dist.mean.shape)


def save_checkpoint(path, net, log_std=None):
    """Write ``net`` (and an optional trailing log_std vector) to ``path``.

    Format: ``b"GASIL1"``, uint32 layer count, the layer sizes as
    little-endian int32, then every parameter as little-endian float64.
    """
    with open(path, "wb") as f:
        f.write(checkpoint_bytes(net, log_std))


def checkpoint_bytes(net, log_std=None):
    sizes = net.layer_sizes
    out = [CHECKPOINT_MAGIC, struct.pack("<I", len(sizes)), np.asarray(sizes, dtype="<i4").tobytes()]
    out.append(np.asarray(net.params, dtype="<f8").tobytes())
    if log_std is not None:
        out.append(np.asarray(log_std, dtype="<f8").tobytes())
    return b"".join(out)


def load_checkpoint(path):
    """Read a checkpoint. Returns ``(net, log_std)``; log_std is None if absent."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a GASIL1 checkpoint")
    pos = len(CHECKPOINT_MAGIC)
    (n_sizes,) = struct.unpack_from("<I", data, pos)
    pos += 4
    sizes = np.frombuffer(data, dtype="<i4", count=n_sizes, offset=pos).tolist()
    pos += 4 * n_sizes
    values = np.frombuffer(data, dtype="<f8", offset=pos).astype(np.float64)
    n = param_count(sizes)
    net = MlpNetwork(sizes)
    net.unflatten(values[:n])
    rest = values[n:]
    if rest.size == 0:
        return net, None
    if rest.size != sizes[-1]:
        raise ValueError(f"{path}: trailing data of length {rest.size} is not a log_std vector")
    return net, rest.copy()
