"""Functional neural network: functional neurons, numeric layers, backprop, training.

The first layer computes ``U(b + sum_r int W_r(beta_r, t) X_r(t) dt)`` with
``W_r = sum_k beta_rk psi_rk``. Because the trapezoid rule is linear the
integral equals ``beta_r . c_r`` where ``c_rk = int psi_rk X_r dt`` is the
projection of the raw curve, so training runs on the projection matrix and
curve-level entry points reduce to it.

Training runs many independent networks (one per regression location, say)
over one projection matrix. The default engine is a JIT-compiled loop in
``_kernel``; the vectorised numpy engine is kept as a readable reference and
the two are tested against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ShapeError, TrainingError, ValidationError
from .fda import BasisSystem, FunctionalSample, evaluate_param_function, trapezoid_integrate


@dataclass(frozen=True)
class Activation:
    name: str

    def __post_init__(self):
        if self.name not in _ACT:
            raise ValidationError(f"unknown activation {self.name!r}; choose from {sorted(_ACT)}")

    def value(self, z):
        return _ACT[self.name][0](z)

    def derivative(self, z):
        return _ACT[self.name][1](z)

    def derivative_from(self, z, a):
        """Derivative given both pre-activation ``z`` and output ``a``."""
        if self.name == "tanh":
            return 1.0 - a * a
        if self.name == "sigmoid":
            return a * (1.0 - a)
        if self.name == "identity":
            return 1.0
        return self.derivative(z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


_ACT = {
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "sigmoid": (_sigmoid, lambda z: _sigmoid(z) * (1.0 - _sigmoid(z))),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(float)),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}


@dataclass(frozen=True)
class NetworkSpec:
    """Layer layout.

    Parameters
    ----------
    n_functional : int
        Functional neurons in the first layer.
    hidden : tuple of int
        Widths of the numeric hidden layers; a width-1 identity output layer
        is always appended.
    activation : str or tuple of str
        One name for every non-output layer, or one per layer (functional
        layer first).
    extra_inputs : int
        Scalar covariates concatenated to the functional-neuron outputs.
    """

    n_functional: int = 4
    hidden: tuple = (2,)
    activation: object = "tanh"
    extra_inputs: int = 0

    def __post_init__(self):
        hidden = tuple(int(h) for h in self.hidden)
        object.__setattr__(self, "hidden", hidden)
        if self.n_functional < 1:
            raise ValidationError("need at least one functional neuron")
        if any(h < 1 for h in hidden):
            raise ValidationError("hidden widths must be positive")
        if self.extra_inputs < 0:
            raise ValidationError("extra_inputs must be nonnegative")
        acts = self.activation
        if isinstance(acts, str):
            acts = (acts,) * (1 + len(hidden))
        acts = tuple(acts)
        if len(acts) != 1 + len(hidden):
            raise ValidationError(f"{len(acts)} activations for {1 + len(hidden)} layers")
        for a in acts:
            Activation(a)
        object.__setattr__(self, "activation", acts)

    @property
    def activations(self) -> tuple:
        return tuple(Activation(a) for a in self.activation) + (Activation("identity"),)

    @property
    def widths(self) -> tuple:
        return self.hidden + (1,)

    def with_extra_inputs(self, n: int) -> "NetworkSpec":
        return replace(self, extra_inputs=n)

    def to_dict(self):
        return {
            "n_functional": self.n_functional,
            "hidden": list(self.hidden),
            "activation": list(self.activation),
            "extra_inputs": self.extra_inputs,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["n_functional"], tuple(d["hidden"]), tuple(d["activation"]), d["extra_inputs"])


@dataclass
class NetworkParameters:
    """Functional-neuron coefficients and biases plus numeric-layer weights.

    ``beta`` has one row per functional neuron; its columns are the basis
    coefficients of every feature, concatenated. ``weights[0]`` has
    ``n_functional + extra_inputs`` rows, functional outputs first.
    """

    beta: np.ndarray
    bias: np.ndarray
    weights: list
    biases: list

    def arrays(self) -> list:
        return [self.beta, self.bias, *self.weights, *self.biases]

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "NetworkParameters":
        n = (len(arrays) - 2) // 2
        return cls(arrays[0], arrays[1], list(arrays[2 : 2 + n]), list(arrays[2 + n :]))

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, vec) -> "NetworkParameters":
        out, i = [], 0
        for a in self.arrays():
            out.append(np.asarray(vec[i : i + a.size], dtype=float).reshape(a.shape))
            i += a.size
        return NetworkParameters.from_arrays(out)

    def zeros_like(self) -> "NetworkParameters":
        return NetworkParameters.from_arrays([np.zeros_like(a) for a in self.arrays()])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def to_dict(self):
        return {
            "beta": self.beta.tolist(),
            "bias": self.bias.tolist(),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.array(d["beta"], dtype=float).reshape(len(d["bias"]), -1),
            np.array(d["bias"], dtype=float),
            [np.array(w, dtype=float) for w in d["weights"]],
            [np.array(b, dtype=float) for b in d["biases"]],
        )


@dataclass(frozen=True)
class TrainConfig:
    """Full-batch Adam schedule.

    Training stops after ``max_iter`` steps or once the best loss improved by
    less than ``tol`` (relative) over the last ``patience`` steps.
    """

    learning_rate: float = 0.03
    max_iter: int = 2000
    tol: float = 1e-6
    patience: int = 50
    seed: int = 0
    init_scale: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be positive")
        if self.patience < 1 or self.tol < 0 or self.init_scale < 0:
            raise ValidationError("invalid training configuration")

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# --------------------------------------------------------------------------
# initialisation
# --------------------------------------------------------------------------


def init_parameters(spec: NetworkSpec, n_coef: int, seed: int, scale: float = 1.0) -> NetworkParameters:
    """Fan-in scaled symmetric uniform initialisation, biases zero.

    Weights on extra scalar inputs come from their own RNG substream and the
    first numeric layer's fan-in counts the functional neurons only, so
    adding a scalar input leaves every other initial value unchanged.
    """
    main_ss, extra_ss = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.Generator(np.random.PCG64(main_ss))
    rng_extra = np.random.Generator(np.random.PCG64(extra_ss))
    j1 = spec.n_functional
    lim = scale / math.sqrt(max(n_coef, 1))
    beta = rng.uniform(-lim, lim, size=(j1, n_coef))
    bias = np.zeros(j1)
    weights, biases = [], []
    fan_in = j1
    for li, width in enumerate(spec.widths):
        lim = scale / math.sqrt(fan_in)
        w = rng.uniform(-lim, lim, size=(fan_in, width))
        if li == 0 and spec.extra_inputs:
            we = rng_extra.uniform(-lim, lim, size=(spec.extra_inputs, width))
            w = np.vstack([w, we])
        weights.append(w)
        biases.append(np.zeros(width))
        fan_in = width
    return NetworkParameters(beta, bias, weights, biases)


# --------------------------------------------------------------------------
# batched forward / backward on projection matrices
# --------------------------------------------------------------------------


def _stack(params: Sequence[NetworkParameters]) -> list:
    return [np.stack(a) for a in zip(*(p.arrays() for p in params))]


def _unstack(arrays: list, b: int) -> NetworkParameters:
    return NetworkParameters.from_arrays([a[b].copy() for a in arrays])


def _forward(arrays, spec: NetworkSpec, C, E, scale):
    """Batched forward pass.

    C : (n, P) shared projections; E : (B|1, n, e) extras or None;
    scale : (B, n) multiplier of the functional integrals or None.
    Returns predictions (B, n) and the cache needed by :func:`_backward`.
    """
    nl = len(spec.widths)
    beta, bias = arrays[0], arrays[1]
    weights, biases = arrays[2 : 2 + nl], arrays[2 + nl :]
    acts = spec.activations
    j1 = spec.n_functional
    lin = np.matmul(C, beta.transpose(0, 2, 1))  # (B, n, J1)
    if scale is not None:
        lin = scale[:, :, None] * lin
    z = lin + bias[:, None, :]
    a = acts[0].value(z)
    zs, As = [z], [a]
    for li in range(nl):
        w = weights[li]
        if li == 0:
            zn = np.matmul(a, w[:, :j1])
            if spec.extra_inputs:
                zn = zn + np.matmul(E, w[:, j1:])
        else:
            zn = np.matmul(a, w)
        zn = zn + biases[li][:, None, :]
        a = acts[li + 1].value(zn)
        zs.append(zn)
        As.append(a)
    return a[:, :, 0], (zs, As)


def _backward(arrays, spec: NetworkSpec, C, E, scale, cache, dout):
    """Gradients of ``sum_n dout * yhat`` for every parameter array."""
    nl = len(spec.widths)
    weights = arrays[2 : 2 + nl]
    zs, As = cache
    acts = spec.activations
    j1 = spec.n_functional
    gw, gb = [None] * nl, [None] * nl
    delta = dout[:, :, None] * acts[nl].derivative_from(zs[nl], As[nl])
    for li in range(nl - 1, -1, -1):
        a_prev = As[li]
        gb[li] = delta.sum(axis=1)
        if li == 0:
            g = np.matmul(a_prev.transpose(0, 2, 1), delta)
            if spec.extra_inputs:
                ge = np.matmul(np.broadcast_to(E, (delta.shape[0],) + E.shape[1:]).transpose(0, 2, 1), delta)
                g = np.concatenate([g, ge], axis=1)
            gw[li] = g
            delta = np.matmul(delta, weights[li][:, :j1].transpose(0, 2, 1)) * acts[0].derivative_from(zs[0], As[0])
        else:
            gw[li] = np.matmul(a_prev.transpose(0, 2, 1), delta)
            delta = np.matmul(delta, weights[li].transpose(0, 2, 1)) * acts[li].derivative_from(zs[li], As[li])
    gbias = delta.sum(axis=1)
    if scale is not None:
        delta = scale[:, :, None] * delta
    gbeta = np.matmul(delta.transpose(0, 2, 1), C)
    return [gbeta, gbias, *gw, *gb]


def _loss_and_grad(arrays, spec, C, E, scale, y, rw, rw_sum):
    pred, cache = _forward(arrays, spec, C, E, scale)
    resid = pred - y
    loss = 0.5 * np.sum(rw * resid**2, axis=1) / rw_sum
    grads = _backward(arrays, spec, C, E, scale, cache, rw * resid / rw_sum[:, None])
    return loss, grads


# --------------------------------------------------------------------------
# design-level API
# --------------------------------------------------------------------------


def forward_design(params: NetworkParameters, spec: NetworkSpec, C, E=None) -> np.ndarray:
    """Predictions for rows of projections ``C`` (n, P) and extras ``E`` (n, e)."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    E3 = _extras3(E, spec, C.shape[0])
    _check_shapes(params, spec, C.shape[1])
    pred, _ = _forward(_stack([params]), spec, C, E3, None)
    return pred[0]


def gradient_design(params: NetworkParameters, spec: NetworkSpec, C, E, y, row_weight=None) -> tuple:
    """Loss ``0.5 * weighted mean squared error`` and its gradient."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = C.shape[0]
    E3 = _extras3(E, spec, n)
    y = np.asarray(y, dtype=float).reshape(1, n)
    rw = np.ones((1, n)) if row_weight is None else np.asarray(row_weight, dtype=float).reshape(1, n)
    loss, grads = _loss_and_grad(_stack([params]), spec, C, E3, None, y, rw, rw.sum(axis=1))
    return float(loss[0]), _unstack(grads, 0)


def _extras3(E, spec: NetworkSpec, n: int):
    if spec.extra_inputs == 0:
        if E is not None and np.size(E) > 0:
            raise ShapeError("network takes no extra scalar inputs")
        return None
    E = np.asarray(E, dtype=float).reshape(n, -1) if np.ndim(E) < 3 else np.asarray(E, dtype=float)
    if E.shape[-1] != spec.extra_inputs:
        raise ShapeError(f"{E.shape[-1]} extra scalars, network expects {spec.extra_inputs}")
    return E[None] if E.ndim == 2 else E


def _check_shapes(params: NetworkParameters, spec: NetworkSpec, n_coef: int):
    if params.beta.shape != (spec.n_functional, n_coef):
        raise ShapeError(f"beta has shape {params.beta.shape}, expected {(spec.n_functional, n_coef)}")
    if params.weights[0].shape[0] != spec.n_functional + spec.extra_inputs:
        raise ShapeError("first numeric layer does not match the input count")
    if len(params.weights) != len(spec.widths):
        raise ShapeError("layer count does not match the network spec")


@dataclass
class TrainResult:
    params: list
    loss_history: np.ndarray
    iterations: np.ndarray
    final_loss: np.ndarray


def train_batch(
    C,
    y,
    spec: NetworkSpec,
    config: TrainConfig,
    *,
    E=None,
    scale=None,
    row_weight=None,
    checkpoint_every: int = 50,
    engine: str = "compiled",
) -> TrainResult:
    """Train ``B`` independent networks sharing the projection matrix ``C``.

    Parameters
    ----------
    C : ndarray (n, P)
        Basis projections of the raw curves.
    y : ndarray (B, n)
        Targets per network.
    E : ndarray (B|1, n, e), optional
        Extra scalar inputs, already standardised.
    scale : ndarray (B, n), optional
        Per-row multiplier of the functional integrals; ``sqrt(W)`` implements
        the geographic data transformation without copying curves.
    row_weight : ndarray (B, n), optional
        Loss weights; rows weighted 0 contribute nothing.

    engine : {"compiled", "numpy"}
        ``"compiled"`` runs a JIT-compiled per-network loop; ``"numpy"`` the
        vectorised reference implementation. Both follow the same schedule.

    Every network starts from ``init_parameters(spec, P, config.seed)`` with
    the output bias at the weighted target mean, and the best parameters seen
    are returned, so recorded losses never increase.
    """
    C = np.asarray(C, dtype=float)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    B, n = y.shape
    if C.shape[0] != n:
        raise ShapeError(f"{C.shape[0]} projection rows for {n} targets")
    rw = np.ones((B, n)) if row_weight is None else np.broadcast_to(np.asarray(row_weight, dtype=float), (B, n))
    if np.any(rw < 0):
        raise ValidationError("row weights must be nonnegative")
    rw_sum = rw.sum(axis=1)
    if np.any(rw_sum <= 0):
        raise TrainingError("a network has no rows with positive weight", iteration=0)
    if scale is not None:
        scale = np.broadcast_to(np.asarray(scale, dtype=float), (B, n))
    E3 = _extras3(E, spec, n) if spec.extra_inputs else None

    p0 = init_parameters(spec, C.shape[1], config.seed, config.init_scale)
    y_mean = np.sum(rw * y, axis=1) / rw_sum
    if engine == "compiled":
        return _train_compiled(C, y, spec, config, E3, scale, rw, p0, y_mean, checkpoint_every)
    if engine != "numpy":
        raise ValidationError(f"unknown engine {engine!r}")
    arrays = [np.repeat(a[None], B, axis=0) for a in p0.arrays()]
    arrays[-1][:, 0] = y_mean

    m = [np.zeros_like(a) for a in arrays]
    v = [np.zeros_like(a) for a in arrays]
    best = [a.copy() for a in arrays]
    best_loss = np.full(B, np.inf)
    active = np.ones(B, dtype=bool)
    stopped_at = np.full(B, config.max_iter)
    hist = []
    window = []
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.eps
    it = 0
    for it in range(config.max_iter + 1):
        loss, grads = _loss_and_grad(arrays, spec, C, E3, scale, y, rw, rw_sum)
        if not np.all(np.isfinite(loss)):
            bad = int(np.flatnonzero(~np.isfinite(loss))[0])
            raise TrainingError(f"training diverged at iteration {it} (network {bad})", iteration=it)
        improved = (loss < best_loss) & active
        if improved.any():
            for bb, a in zip(best, arrays):
                bb[improved] = a[improved]
            best_loss = np.where(improved, loss, best_loss)
        window.append(best_loss.copy())
        if it % checkpoint_every == 0:
            hist.append(best_loss.copy())
        if len(window) > config.patience:
            old = window.pop(0)
            done = (old - best_loss) <= config.tol * np.abs(old)
            newly = done & active
            stopped_at[newly] = it
            active &= ~done
        if it == config.max_iter or not active.any():
            break
        t = it + 1
        c1 = 1 - b1**t
        c2 = 1 - b2**t
        mask = active.astype(float)
        for a, g, mm, vv in zip(arrays, grads, m, v):
            mm *= b1
            mm += (1 - b1) * g
            vv *= b2
            vv += (1 - b2) * g * g
            step = lr * (mm / c1) / (np.sqrt(vv / c2) + eps)
            a -= mask.reshape((B,) + (1,) * (a.ndim - 1)) * step
    hist.append(best_loss.copy())
    return TrainResult(
        [_unstack(best, b) for b in range(B)],
        np.array(hist).T,
        stopped_at,
        best_loss,
    )


def _train_compiled(C, y, spec, config, E3, scale, rw, p0, y_mean, every) -> TrainResult:
    from ._kernel import ACT_CODES, train_one

    B, n = y.shape

    def prep(a):
        # one writable C-contiguous float64 layout, hence one compiled
        # specialisation and identical rounding across call sites
        return np.require(a, dtype=np.float64, requirements=("C", "W", "A"))

    C = prep(C)
    widths = np.array(spec.widths, dtype=np.int64)
    acts = np.array([ACT_CODES[a.name] for a in spec.activations], dtype=np.int64)
    ones = np.ones(n)
    no_extra = np.zeros((n, 0))
    params, hists, iters, losses = [], [], [], []
    for b in range(B):
        theta0 = p0.flatten()
        theta0[-1] = y_mean[b]
        s = ones if scale is None else prep(scale[b])
        e = no_extra if E3 is None else prep(E3[b if E3.shape[0] > 1 else 0])
        best, loss, hist, stopped = train_one(
            C, prep(y[b]), s, prep(rw[b]), e, theta0,
            spec.n_functional, spec.extra_inputs, widths, acts,
            config.learning_rate, config.beta1, config.beta2, config.eps,
            config.max_iter, config.tol, config.patience, every,
        )
        if stopped < 0:
            raise TrainingError(
                f"training diverged at iteration {-stopped - 1} (network {b})", iteration=-stopped - 1
            )
        params.append(p0.unflatten(best))
        hists.append(hist)
        iters.append(stopped)
        losses.append(loss)
    width = max(h.size for h in hists)
    hist = np.array([np.pad(h, (0, width - h.size), mode="edge") for h in hists])
    return TrainResult(params, hist, np.array(iters), np.array(losses))


# --------------------------------------------------------------------------
# fitted network with input standardisation
# --------------------------------------------------------------------------


@dataclass
class FittedNetwork:
    """Trained parameters plus the extra-scalar standardisation statistics."""

    spec: NetworkSpec
    params: NetworkParameters
    extra_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    extra_scale: np.ndarray = field(default_factory=lambda: np.ones(0))
    loss_history: Optional[np.ndarray] = None

    def standardize(self, E):
        if self.spec.extra_inputs == 0:
            return None
        E = np.asarray(E, dtype=float).reshape(-1, self.spec.extra_inputs)
        return (E - self.extra_mean) / self.extra_scale

    def predict_design(self, C, E=None) -> np.ndarray:
        return forward_design(self.params, self.spec, C, self.standardize(E))

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "params": self.params.to_dict(),
            "extra_mean": self.extra_mean.tolist(),
            "extra_scale": self.extra_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            NetworkSpec.from_dict(d["spec"]),
            NetworkParameters.from_dict(d["params"]),
            np.array(d["extra_mean"], dtype=float),
            np.array(d["extra_scale"], dtype=float),
        )


def extra_statistics(E, row_weight=None):
    """Column means and standard deviations of the extra scalars.

    Zero-variance columns get mean 0 and scale 1, i.e. pass through raw.
    """
    E = np.asarray(E, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    if row_weight is not None:
        E = E[np.asarray(row_weight) > 0]
    mean = E.mean(axis=0)
    sd = E.std(axis=0)
    const = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
    return np.where(const, 0.0, mean), np.where(const, 1.0, sd)


def fit_network(C, y, spec: NetworkSpec, config: TrainConfig, E=None, row_weight=None) -> FittedNetwork:
    """Train one network on a projection design; rows with weight 0 are dropped."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    keep = None
    if row_weight is not None:
        row_weight = np.asarray(row_weight, dtype=float).reshape(-1)
        if np.any(row_weight < 0):
            raise ValidationError("row weights must be nonnegative")
        keep = row_weight > 0
        C, y, row_weight = C[keep], y[keep], row_weight[keep]
        if E is not None:
            E = np.asarray(E, dtype=float).reshape(keep.size, -1)[keep]
    if y.size == 0:
        raise ValidationError("no training rows")
    mean = np.zeros(0)
    sd = np.ones(0)
    Es = None
    if spec.extra_inputs:
        E = np.asarray(E, dtype=float).reshape(y.size, spec.extra_inputs)
        mean, sd = extra_statistics(E)
        Es = ((E - mean) / sd)[None]
    rw = None if row_weight is None else row_weight[None]
    res = train_batch(C, y[None], spec, config, E=Es, row_weight=rw)
    return FittedNetwork(spec, res.params[0], mean, sd, res.loss_history[0])


# --------------------------------------------------------------------------
# curve-level API
# --------------------------------------------------------------------------


def _split_beta(beta, bases: Sequence[BasisSystem]) -> list:
    beta = np.asarray(beta, dtype=float)
    sizes = [b.size for b in bases]
    if beta.shape != (sum(sizes),):
        raise ShapeError(f"{beta.size} coefficients for bases of sizes {sizes}")
    return np.split(beta, np.cumsum(sizes)[:-1])


def functional_integrals(sample: FunctionalSample, beta, bases: Sequence[BasisSystem]) -> float:
    """``sum_r int W_r(beta_r, t) X_r(t) dt`` by trapezoid quadrature."""
    if sample.n_features != len(bases):
        raise ShapeError(f"sample has {sample.n_features} features, {len(bases)} bases given")
    total = 0.0
    for r, (br, basis) in enumerate(zip(_split_beta(beta, bases), bases)):
        if sample.grids[r] != basis.grid:
            raise ShapeError(f"feature {r} is not on its basis grid")
        total += trapezoid_integrate(evaluate_param_function(br, basis) * sample.values[r], basis.grid)
    return total


def functional_neuron_forward(sample: FunctionalSample, beta, bias: float, bases, activation="tanh") -> float:
    """Output of one functional neuron."""
    act = activation if isinstance(activation, Activation) else Activation(activation)
    return float(act.value(bias + functional_integrals(sample, beta, bases)))


def sample_projections(sample: FunctionalSample, bases: Sequence[BasisSystem]) -> np.ndarray:
    """Raw (uncentred) projections of every feature, concatenated."""
    if sample.n_features != len(bases):
        raise ShapeError(f"sample has {sample.n_features} features, {len(bases)} bases given")
    out = []
    for r, basis in enumerate(bases):
        if sample.grids[r] != basis.grid:
            raise ShapeError(f"feature {r} is not on its basis grid")
        out.append((sample.values[r] * basis.grid.weights) @ basis.functions.T)
    return np.concatenate(out)


def forward(params: NetworkParameters, spec: NetworkSpec, sample: FunctionalSample, extra_scalars=(), bases=()) -> float:
    """Network output for one sample, integrating each functional neuron on the curves."""
    extra = np.asarray(extra_scalars, dtype=float).reshape(-1)
    if extra.size != spec.extra_inputs:
        raise ShapeError(f"{extra.size} extra scalars, network expects {spec.extra_inputs}")
    acts = spec.activations
    h = np.array(
        [
            functional_neuron_forward(sample, params.beta[j], params.bias[j], bases, acts[0])
            for j in range(spec.n_functional)
        ]
    )
    a = np.concatenate([h, extra])
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = acts[li + 1].value(a @ w + b)
    return float(a[0])


def gradient(params, spec, sample, extra_scalars, target, bases) -> NetworkParameters:
    """Gradient of ``0.5 * (yhat - target)**2`` for one sample."""
    C = sample_projections(sample, bases)[None, :]
    E = np.asarray(extra_scalars, dtype=float).reshape(1, -1) if spec.extra_inputs else None
    _, g = gradient_design(params, spec, C, E, [target])
    return g


def train(rows, spec: NetworkSpec, config: TrainConfig, bases) -> FittedNetwork:
    """Train on ``(sample, extra_scalars, target, row_weight)`` tuples."""
    rows = list(rows)
    if not rows:
        raise ValidationError("no training rows")
    C = np.array([sample_projections(r[0], bases) for r in rows])
    E = np.array([np.asarray(r[1], dtype=float).reshape(-1) for r in rows]) if spec.extra_inputs else None
    y = np.array([r[2] for r in rows], dtype=float)
    rw = np.array([r[3] if len(r) > 3 else 1.0 for r in rows], dtype=float)
    return fit_network(C, y, spec, config, E=E, row_weight=rw)
