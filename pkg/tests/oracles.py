"""Independent reference computations used by the test-suite.

None of these call into the code paths they check.
"""

import math

import mpmath
import numpy as np

from bayesmia.mlp import MlpParams, PARAM_NAMES


def _reference_loss(params: MlpParams, X, y) -> np.longdouble:
    # independent re-derivation in 80-bit extended precision; float64 roundoff
    # (~eps * loss / h) would otherwise swamp gradients of order 1e-8
    ld = np.longdouble
    X = np.asarray(X, dtype=ld)
    W1, b1, W2, b2 = (np.asarray(a, dtype=ld) for a in params.arrays())
    total = ld(0)
    for x, label in zip(X, y):
        h = np.maximum(x @ W1 + b1, ld(0))
        logits = h @ W2 + b2
        m = logits.max()
        total += m + np.log(np.sum(np.exp(logits - m))) - logits[label]
    return total / ld(len(y))


def finite_difference_grad(params: MlpParams, X, y, h: float = 1e-5) -> list[np.ndarray]:
    grads = []
    for name in PARAM_NAMES:
        arr = getattr(params, name)
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            plus, minus = params.copy(), params.copy()
            getattr(plus, name)[idx] += h
            getattr(minus, name)[idx] -= h
            diff = _reference_loss(plus, X, y) - _reference_loss(minus, X, y)
            g[idx] = float(diff / (2 * np.longdouble(h)))
        grads.append(g)
    return grads


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-7) -> np.ndarray:
    """|a - b| / max(|a|, |b|, floor); the floor covers coordinates that are ~0 on both sides."""
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def pooled_std_bruteforce(group1, group0) -> list[float]:
    out = []
    n1, n0 = len(group1), len(group0)
    for i in range(len(group1[0])):
        a = [row[i] for row in group1]
        b = [row[i] for row in group0]
        ma, mb = sum(a) / n1, sum(b) / n0
        ssa = sum((v - ma) ** 2 for v in a)
        ssb = sum((v - mb) ** 2 for v in b)
        out.append(math.sqrt((ssa + ssb) / (n1 + n0 - 2)))
    return out


def gaussian_density_product(z, mu, sigma, dps: int = 60):
    """prod_i N(z_i; mu_i, sigma_i^2) in extended precision."""
    with mpmath.workdps(dps):
        p = mpmath.mpf(1)
        for zi, mi, si in zip(z, mu, sigma):
            zi, mi, si = mpmath.mpf(float(zi)), mpmath.mpf(float(mi)), mpmath.mpf(float(si))
            p *= mpmath.exp(-((zi - mi) ** 2) / (2 * si**2)) / (si * mpmath.sqrt(2 * mpmath.pi))
        return p


def posterior_direct(z, mu1, mu0, sigma, p1: float, dps: int = 60) -> float:
    """Bayes' rule written out literally: p(z|1)p(1) / (p(z|1)p(1) + p(z|0)p(0))."""
    with mpmath.workdps(dps):
        l1 = gaussian_density_product(z, mu1, sigma, dps)
        l0 = gaussian_density_product(z, mu0, sigma, dps)
        prior1 = mpmath.mpf(float(p1))
        num = l1 * prior1
        return float(num / (num + l0 * (1 - prior1)))
