"""A small fully-connected network engine on numpy.

Inputs are batches of row vectors, shape ``(n, width)``.  Layer ``k`` holds a
weight matrix of shape ``(fan_in, fan_out)`` and computes
``act(x @ W + b)``.
"""

from dataclasses import dataclass, field

import numpy as np

LEAK = 0.2


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# name -> (function, derivative expressed through (pre-activation, output))
ACTIVATIONS = {
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(z.dtype)),
    "leaky_relu": (
        lambda z: np.where(z > 0, z, LEAK * z),
        lambda z, a: np.where(z > 0, 1.0, LEAK),
    ),
    "sigmoid": (_sigmoid, lambda z, a: a * (1.0 - a)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
}

# variance gain for fan-in scaled initialization
_GAIN2 = {"identity": 1.0, "sigmoid": 1.0, "tanh": 1.0, "relu": 2.0, "leaky_relu": 2.0 / (1.0 + LEAK**2)}


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple
    hidden_activation: str = "relu"
    output_activation: str = "identity"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"bad layer sizes {self.layer_sizes}")
        for act in (self.hidden_activation, self.output_activation):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    def activation(self, k):
        return self.output_activation if k == self.n_layers - 1 else self.hidden_activation

    def init_variance(self, k):
        """Prescribed weight variance of layer k (gain^2 / fan_in)."""
        return _GAIN2[self.activation(k)] / self.layer_sizes[k]


@dataclass
class MlpParams:
    spec: MlpSpec
    weights: list
    biases: list = field(default_factory=list)

    def arrays(self):
        return self.weights + self.biases

    def copy(self):
        return MlpParams(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self):
        return MlpParams(self.spec, [np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])


def init_params(spec, rng):
    """Uniform fan-in scaled weights (He-style for rectifiers), zero biases."""
    weights, biases = [], []
    for k in range(spec.n_layers):
        fan_in, fan_out = spec.layer_sizes[k], spec.layer_sizes[k + 1]
        bound = np.sqrt(3.0 * spec.init_variance(k))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(spec, weights, biases)


def _as_batch(params, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.spec.layer_sizes[0]:
        raise ValueError(f"input shape {x.shape} does not match width {params.spec.layer_sizes[0]}")
    return x


def forward_cached(params, x):
    """Forward pass returning (output, cache) where cache feeds ``backward``."""
    x = _as_batch(params, x)
    inputs, pre, outs = [], [], []
    a = x
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(a)
        z = a @ w + b
        a = ACTIVATIONS[params.spec.activation(k)][0](z)
        pre.append(z)
        outs.append(a)
    return a, (inputs, pre, outs)


def forward(params, x):
    squeeze = np.ndim(x) == 1
    out, _ = forward_cached(params, x)
    return out[0] if squeeze else out


def backward(params, x, upstream, cache=None):
    """Reverse-mode gradients of ``sum(upstream * forward(x))``.

    Returns ``(grads, input_grad)`` where ``grads`` is an MlpParams of the
    same shapes as ``params``.
    """
    squeeze = np.ndim(x) == 1
    if cache is None:
        _, cache = forward_cached(params, x)
    inputs, pre, outs = cache
    g = np.asarray(upstream, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != outs[-1].shape:
        raise ValueError(f"upstream shape {g.shape} does not match output {outs[-1].shape}")
    gw, gb = [None] * params.spec.n_layers, [None] * params.spec.n_layers
    for k in reversed(range(params.spec.n_layers)):
        g = g * ACTIVATIONS[params.spec.activation(k)][1](pre[k], outs[k])
        gw[k] = inputs[k].T @ g
        gb[k] = g.sum(axis=0)
        g = g @ params.weights[k].T
    return MlpParams(params.spec, gw, gb), (g[0] if squeeze else g)


@dataclass
class OptimizerState:
    m: list
    v: list
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0


def adam_init(params, lr=2e-4, beta1=0.5, beta2=0.999, eps=1e-8):
    return OptimizerState(
        m=[np.zeros_like(a) for a in params.arrays()],
        v=[np.zeros_like(a) for a in params.arrays()],
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(params, grads, state):
    """One bias-corrected Adam update, applied in place.  Returns (params, state)."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def _rel_err(a, b):
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def grad_check(spec, seed, n_samples=3, h=1e-5):
    """Largest relative error between ``backward`` and central differences.

    Errors are measured per parameter array (and for the input gradient) as
    ``|analytic - numeric| / (|analytic| + |numeric|)`` in the 2-norm.
    """
    rng = np.random.default_rng(seed)
    params = init_params(spec, rng)
    for b in params.biases:
        b[:] = rng.normal(0.0, 0.1, size=b.shape)
    x = rng.normal(size=(n_samples, spec.layer_sizes[0]))
    up = rng.normal(size=(n_samples, spec.layer_sizes[-1]))

    def loss(p, xx):
        return float(np.sum(up * forward(p, xx)))

    grads, gx = backward(params, x, up)
    worst = 0.0
    for arr, garr in zip(params.arrays(), grads.arrays()):
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            lp = loss(params, x)
            arr[idx] = orig - h
            lm = loss(params, x)
            arr[idx] = orig
            num[idx] = (lp - lm) / (2 * h)
        worst = max(worst, _rel_err(garr, num))
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        num[idx] = (loss(params, xp) - loss(params, xm)) / (2 * h)
    return max(worst, _rel_err(gx, num))


# --- weight files ------------------------------------------------------------

def save_weights(params, path):
    """Text weight file: ``MLPv1``, layer sizes, then per layer W rows and b."""
    fmt = lambda row: " ".join(format(float(v), ".17g") for v in row)  # noqa: E731
    lines = ["MLPv1", " ".join(str(s) for s in params.spec.layer_sizes)]
    for w, b in zip(params.weights, params.biases):
        lines.extend(fmt(row) for row in w)
        lines.append(fmt(b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_weights(path, hidden_activation="relu", output_activation="identity"):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "MLPv1":
        raise ValueError(f"{path}: not an MLPv1 weight file")
    spec = MlpSpec(tuple(int(s) for s in lines[1].split()), hidden_activation, output_activation)
    pos = 2
    weights, biases = [], []
    for k in range(spec.n_layers):
        fan_in, fan_out = spec.layer_sizes[k], spec.layer_sizes[k + 1]
        w = np.array([[float(t) for t in lines[pos + i].split()] for i in range(fan_in)])
        pos += fan_in
        b = np.array([float(t) for t in lines[pos].split()])
        pos += 1
        if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise ValueError(f"{path}: layer {k} has inconsistent shape")
        weights.append(w)
        biases.append(b)
    return MlpParams(spec, weights, biases)
