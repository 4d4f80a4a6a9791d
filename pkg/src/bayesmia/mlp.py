"""A d -> 16 -> 2 ReLU/softmax classifier trained with full-batch Adam.

Everything is plain numpy in float64.  Training takes one Adam step per
epoch on the whole dataset, so results are a deterministic function of the
data and the initialisation seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _jsonio
from .synthgen import Dataset

__all__ = [
    "HIDDEN_UNITS",
    "MlpParams",
    "AdamState",
    "TrainConfig",
    "TrainingDivergenceError",
    "init_params",
    "softmax",
    "forward",
    "loss_and_grad",
    "adam_step",
    "train",
    "fine_tune",
    "weight_l2_distance",
    "save_params",
    "load_params",
]

HIDDEN_UNITS = 16
N_CLASSES = 2
PARAM_NAMES = ("W1", "b1", "W2", "b2")


class TrainingDivergenceError(RuntimeError):
    """Loss or parameters became non-finite during optimisation."""


@dataclass(eq=False)
class MlpParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.array(getattr(self, name), dtype=np.float64))
        d, h = self.W1.shape if self.W1.ndim == 2 else (None, None)
        if (
            d is None
            or self.b1.shape != (h,)
            or self.W2.shape != (h, N_CLASSES)
            or self.b2.shape != (N_CLASSES,)
        ):
            raise ValueError(
                "inconsistent parameter shapes: "
                + ", ".join(f"{n}{getattr(self, n).shape}" for n in PARAM_NAMES)
            )

    @property
    def n_features(self) -> int:
        return self.W1.shape[0]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, n) for n in PARAM_NAMES)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def copy(self) -> "MlpParams":
        return MlpParams(*(a.copy() for a in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def __eq__(self, other) -> bool:
        if not isinstance(other, MlpParams):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "arch": [self.n_features, self.W1.shape[1], N_CLASSES],
            **{n: getattr(self, n).tolist() for n in PARAM_NAMES},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlpParams":
        if data.get("version") != 1:
            raise ValueError(f"unsupported model version {data.get('version')!r}")
        params = cls(*(np.asarray(data[n], dtype=np.float64) for n in PARAM_NAMES))
        arch = [params.n_features, params.W1.shape[1], N_CLASSES]
        if list(data.get("arch", arch)) != arch:
            raise ValueError(f"arch {data['arch']} does not match weights {arch}")
        return params


@dataclass
class AdamState:
    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    t: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: MlpParams, lr: float = 0.01, **hyper) -> "AdamState":
        zeros = tuple(np.zeros_like(a) for a in params.arrays())
        return cls(m=zeros, v=tuple(z.copy() for z in zeros), lr=lr, **hyper)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.01
    fine_tune_epochs: int = 5
    seed: int = 0

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs}")
        if int(self.fine_tune_epochs) != self.fine_tune_epochs or self.fine_tune_epochs < 1:
            raise ValueError(
                f"fine_tune_epochs must be a positive integer, got {self.fine_tune_epochs}"
            )
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "fine_tune_epochs": self.fine_tune_epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**data)


def init_params(d: int, seed: int, hidden: int = HIDDEN_UNITS) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    if d < 1:
        raise ValueError(f"need at least one input feature, got d={d}")
    rng = np.random.Generator(np.random.PCG64(seed))
    b1 = math.sqrt(6.0 / (d + hidden))
    b2 = math.sqrt(6.0 / (hidden + N_CLASSES))
    W1 = rng.uniform(-b1, b1, size=(d, hidden))
    W2 = rng.uniform(-b2, b2, size=(hidden, N_CLASSES))
    return MlpParams(W1, np.zeros(hidden), W2, np.zeros(N_CLASSES))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _check_features(params: MlpParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.n_features:
        raise ValueError(
            f"feature matrix shape {X.shape} does not match model input d={params.n_features}"
        )
    return X


def _logits(params: MlpParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pre = X @ params.W1 + params.b1
    hidden = np.maximum(pre, 0.0)
    return hidden @ params.W2 + params.b2, pre


def forward(params: MlpParams, features: np.ndarray) -> np.ndarray:
    """Class probabilities, shape (n, 2)."""
    X = _check_features(params, features)
    logits, _ = _logits(params, X)
    return softmax(logits)


def loss_and_grad(params: MlpParams, dataset: Dataset) -> tuple[float, MlpParams]:
    """Mean cross-entropy and its exact gradient (returned as an MlpParams)."""
    if dataset.n == 0:
        raise ValueError("cannot compute loss on an empty dataset")
    X = _check_features(params, dataset.features)
    y = dataset.labels
    n = X.shape[0]

    logits, pre = _logits(params, X)
    logp = _log_softmax(logits)
    loss = -float(np.mean(logp[np.arange(n), y]))

    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    hidden = np.maximum(pre, 0.0)
    gW2 = hidden.T @ dlogits
    gb2 = dlogits.sum(axis=0)
    dpre = (dlogits @ params.W2.T) * (pre > 0.0)
    gW1 = X.T @ dpre
    gb1 = dpre.sum(axis=0)
    return loss, MlpParams(gW1, gb1, gW2, gb2)


def adam_step(
    params: MlpParams, state: AdamState, grads: MlpParams
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update.  Inputs are left untouched."""
    if not grads.is_finite():
        raise TrainingDivergenceError("non-finite gradient passed to adam_step")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = [], [], []
    for p, m, v, g in zip(params.arrays(), state.m, state.v, grads.arrays()):
        if p.shape != g.shape or m.shape != p.shape:
            raise ValueError(f"shape mismatch in adam_step: {p.shape} vs {g.shape}")
        with np.errstate(over="ignore", invalid="ignore"):
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g * g
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
            raise TrainingDivergenceError("Adam moment estimates overflowed")
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(
        m=tuple(new_m), v=tuple(new_v), t=t,
        lr=state.lr, beta1=b1, beta2=b2, eps=state.eps,
    )
    return MlpParams(*new_p), new_state


def _optimise(params: MlpParams, dataset: Dataset, steps: int, lr: float) -> MlpParams:
    state = AdamState.fresh(params, lr=lr)
    for epoch in range(steps):
        loss, grads = loss_and_grad(params, dataset)
        if not math.isfinite(loss):
            raise TrainingDivergenceError(f"loss became non-finite at epoch {epoch}")
        params, state = adam_step(params, state, grads)
    if not params.is_finite():
        raise TrainingDivergenceError("parameters became non-finite")
    return params


def train(dataset: Dataset, config: TrainConfig) -> MlpParams:
    if dataset.n == 0:
        raise ValueError("cannot train on an empty dataset")
    params = init_params(dataset.d, config.seed)
    return _optimise(params, dataset, config.epochs, config.learning_rate)


def fine_tune(params: MlpParams, dataset: Dataset, config: TrainConfig) -> MlpParams:
    """Continue training a copy of ``params`` for ``config.fine_tune_epochs`` steps."""
    return _optimise(params.copy(), dataset, config.fine_tune_epochs, config.learning_rate)


def weight_l2_distance(a: MlpParams, b: MlpParams) -> float:
    for name, x, y in zip(PARAM_NAMES, a.arrays(), b.arrays()):
        if x.shape != y.shape:
            raise ValueError(f"{name} shape mismatch: {x.shape} vs {y.shape}")
    return float(np.linalg.norm(a.flat() - b.flat()))


def save_params(params: MlpParams, path) -> None:
    _jsonio.dump(params.to_dict(), path)


def load_params(path) -> MlpParams:
    return MlpParams.from_dict(_jsonio.load(path))
