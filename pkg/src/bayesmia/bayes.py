"""Gaussian likelihood calibration and posterior membership probability.

Each metric is modelled as independent Gaussian under either hypothesis
(member M=1, non-member M=0) with a shared per-metric standard deviation.
All arithmetic stays in log space; the posterior is the logistic of the
log-odds between the two hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _jsonio
from .metrics import MetricVector, extract_metric_vector
from .mlp import MlpParams, TrainConfig
from .synthgen import Dataset

__all__ = [
    "SIGMA_FLOOR",
    "LikelihoodParams",
    "Prior",
    "PosteriorResult",
    "pooled_std",
    "calibrate",
    "default_manual_params",
    "log_likelihood",
    "posterior",
    "posterior_from_model",
    "save_likelihood",
    "load_likelihood",
]

SIGMA_FLOOR = 1e-6
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

VectorLike = Union[MetricVector, Sequence[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class LikelihoodParams:
    mu_member: np.ndarray
    mu_nonmember: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        arrays = [np.array(a, dtype=np.float64).ravel() for a in
                  (self.mu_member, self.mu_nonmember, self.sigma)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].size == 0:
            raise ValueError("mu_member, mu_nonmember and sigma must share a non-zero length")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("likelihood parameters must be finite")
        if np.any(arrays[2] <= 0.0):
            raise ValueError("sigma entries must be positive")
        for name, a in zip(("mu_member", "mu_nonmember", "sigma"), arrays):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.sigma.size

    def swapped(self) -> "LikelihoodParams":
        return LikelihoodParams(self.mu_nonmember, self.mu_member, self.sigma)

    def to_dict(self) -> dict:
        return {
            "mu_member": self.mu_member.tolist(),
            "mu_nonmember": self.mu_nonmember.tolist(),
            "sigma": self.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LikelihoodParams":
        return cls(data["mu_member"], data["mu_nonmember"], data["sigma"])


@dataclass(frozen=True)
class Prior:
    p_member: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p_member < 1.0:
            raise ValueError(f"prior p_member must lie strictly in (0, 1), got {self.p_member}")


@dataclass(frozen=True)
class PosteriorResult:
    log_lik_member: float
    log_lik_nonmember: float
    posterior_member: float
    posterior_nonmember: float
    prior: Prior
    metric_vector: Optional[MetricVector] = field(default=None, compare=False)

    @property
    def log_odds(self) -> float:
        return (
            self.log_lik_member - self.log_lik_nonmember
            + math.log(self.prior.p_member) - math.log1p(-self.prior.p_member)
        )

    def to_dict(self) -> dict:
        out = {
            "prior_member": self.prior.p_member,
            "log_lik_member": self.log_lik_member,
            "log_lik_nonmember": self.log_lik_nonmember,
            "log_odds": self.log_odds,
            "posterior_member": self.posterior_member,
            "posterior_nonmember": self.posterior_nonmember,
        }
        if self.metric_vector is not None:
            out["metrics"] = self.metric_vector.to_dict()
        return out


def _as_matrix(vectors: Sequence[VectorLike], what: str) -> np.ndarray:
    rows = [v.as_array() if isinstance(v, MetricVector) else np.asarray(v, np.float64)
            for v in vectors]
    if len(rows) < 2:
        raise ValueError(f"need at least 2 {what} vectors to calibrate, got {len(rows)}")
    try:
        M = np.vstack(rows)
    except ValueError as exc:
        raise ValueError(f"{what} vectors have inconsistent lengths") from exc
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{what} vectors contain non-finite values")
    return M


def pooled_std(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise pooled standard deviation of two samples (rows = observations)."""
    n1, n0 = a.shape[0], b.shape[0]
    s1 = a.var(axis=0, ddof=1)
    s0 = b.var(axis=0, ddof=1)
    return np.sqrt(((n1 - 1) * s1 + (n0 - 1) * s0) / (n1 + n0 - 2))


def calibrate(
    member_vectors: Sequence[VectorLike],
    nonmember_vectors: Sequence[VectorLike],
    sigma_floor: float = SIGMA_FLOOR,
) -> LikelihoodParams:
    """Group means per hypothesis, pooled standard deviation floored at ``sigma_floor``."""
    A = _as_matrix(member_vectors, "member")
    B = _as_matrix(nonmember_vectors, "non-member")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"member vectors have {A.shape[1]} entries, non-member {B.shape[1]}")
    sigma = np.maximum(pooled_std(A, B), sigma_floor)
    return LikelihoodParams(A.mean(axis=0), B.mean(axis=0), sigma)


def default_manual_params(n_metrics: int) -> LikelihoodParams:
    """Members centred at 0, non-members shifted by one unit standard deviation."""
    if n_metrics < 1:
        raise ValueError(f"n_metrics must be >= 1, got {n_metrics}")
    return LikelihoodParams(np.zeros(n_metrics), np.ones(n_metrics), np.ones(n_metrics))


def log_likelihood(z: VectorLike, mu: np.ndarray, sigma: np.ndarray) -> float:
    """Sum of independent Gaussian log-densities."""
    z = np.asarray(z, dtype=np.float64).ravel()
    mu = np.asarray(mu, dtype=np.float64).ravel()
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    if not (z.shape == mu.shape == sigma.shape):
        raise ValueError(f"length mismatch: z{z.shape}, mu{mu.shape}, sigma{sigma.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("metric vector contains non-finite values")
    if np.any(sigma <= 0.0):
        raise ValueError("sigma entries must be positive")
    r = (z - mu) / sigma
    return float(np.sum(-np.log(sigma) - _HALF_LOG_2PI - 0.5 * r * r))


def _logistic(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def posterior(z: VectorLike, params: LikelihoodParams, prior: Prior = Prior()) -> PosteriorResult:
    """p(M=1 | z) for the two-hypothesis Gaussian model."""
    vec = z if isinstance(z, MetricVector) else None
    arr = np.asarray(z.as_array() if vec is not None else z, dtype=np.float64).ravel()
    if arr.size != len(params):
        raise ValueError(f"metric vector length {arr.size} != likelihood length {len(params)}")
    ll1 = log_likelihood(arr, params.mu_member, params.sigma)
    ll0 = log_likelihood(arr, params.mu_nonmember, params.sigma)
    a = ll1 + math.log(prior.p_member)
    b = ll0 + math.log1p(-prior.p_member)
    return PosteriorResult(
        log_lik_member=ll1,
        log_lik_nonmember=ll0,
        posterior_member=_logistic(a - b),
        posterior_nonmember=_logistic(b - a),
        prior=prior,
        metric_vector=vec,
    )


def posterior_from_model(
    params_model: MlpParams,
    dataset: Dataset,
    lik: LikelihoodParams,
    prior: Prior,
    config: TrainConfig,
) -> PosteriorResult:
    """Extract the metric vector of ``dataset`` under the model, then score it."""
    return posterior(extract_metric_vector(params_model, dataset, config), lik, prior)


def save_likelihood(lik: LikelihoodParams, path) -> None:
    _jsonio.dump(lik.to_dict(), path)


def load_likelihood(path) -> LikelihoodParams:
    return LikelihoodParams.from_dict(_jsonio.load(path))
