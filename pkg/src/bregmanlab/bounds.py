"""Closed-form convergence bounds for the shipped schedules.

Each function returns the right-hand side of an inequality of the form
``gap_k (+ sigma_f * xi(z_k, x*)) <= bound`` for a single iteration k.
"""
import math

import numpy as np

from .errors import NonNegativeAlpha
from .schedules import p_regime


def nonsmooth_classical(k, M_f, sigma_d, sigma_f):
    return 2.0 * M_f**2 / (sigma_d * sigma_f * (k + 4))


def nonsmooth_modified(k, M_f, sigma_d, sigma_f):
    """Valid for k >= 1; returns inf at k = 0."""
    if k < 1:
        return math.inf
    return 2.0 * M_f**2 / (sigma_d * sigma_f) * (k + math.log(k) + 1.5) / ((k + 1) * (k + 2))


def structured_classical(k, L, sigma_d, sigma_f, sigma_bar, ld, delta=0.0):
    beta = (L - sigma_bar * sigma_d) / sigma_d
    factor = 1.0 - sigma_f * sigma_d / (L - sigma_bar * sigma_d + sigma_f * sigma_d)
    return beta * ld * min(factor**k, 1.0 / (k + 1)) + delta


def structured_modified(k, L, sigma_d, sigma_f, sigma_bar, ld, delta=0.0):
    gap = L - sigma_bar * sigma_d
    beta = gap / sigma_d
    r = sigma_f * sigma_d / gap
    decay = 4.0 / (k + 2) ** 2
    if r > 0:
        decay = min(decay, (1.0 + 0.5 * math.sqrt(r)) ** (-2.0 * k))
    acc = k / 3.0 + math.log(k + 2.0) / 6.0 + 1.0
    if r > 0:
        acc = min(acc, 1.0 + math.sqrt(1.0 / r))
    return beta * ld * decay + acc * delta


def cgm_smooth(k, L, max_step_sq, delta=0.0):
    """Modified CGM with lambda_k = (k+1)/2: 2L max||w_i - z_{i-1}||^2/(k+4) + (k+3) delta/3."""
    return 2.0 * L * max_step_sq / (k + 4) + (k + 3) * delta / 3.0


def cgm_holder(k, L, M, rho, diam):
    return 2.0 * L * diam**2 / (k + 4) + 2.0 ** (rho + 1) * M * diam**rho / (rho * (3.0 - rho) * (k + 2) ** (rho - 1))


def alpha_sequence(L, sigma_d, sigma_f, sigma_bar, sched, K=None):
    """alpha_k = L - sigma_d (sigma_bar + S_k (beta_{k-1} + S_{k-1} sigma_f) / lambda_k^2)."""
    K = sched.K if K is None else K
    out = np.empty(K + 1)
    for k in range(K + 1):
        lam, b_prev, _, S = sched.at(k)
        out[k] = L - sigma_d * (sigma_bar + S * (b_prev + sched.S_at(k - 1) * sigma_f) / lam**2)
    return out


def holder_general(sched, alphas, ld, max_M, rho, k):
    """beta_k l_d/S_k + (2-rho) maxM^(2/(2-rho)) / (2 rho S_k) * sum_i S_i / (-alpha_i)^(rho/(2-rho))."""
    a = np.asarray(alphas[: k + 1])
    if np.any(a >= 0):
        i = int(np.argmax(a >= 0))
        raise NonNegativeAlpha(f"alpha_{i} = {a[i]} is not negative")
    _, _, beta_k, S_k = sched.at(k)
    q = rho / (2.0 - rho)
    tail = float(np.sum(sched.S[: k + 1] / (-a) ** q))
    return beta_k * ld / S_k + (2.0 - rho) * max_M ** (2.0 / (2.0 - rho)) / (2.0 * rho * S_k) * tail


def holder_nonstrong(k, L, sigma_d, gamma, ld, max_M, rho):
    e = 1.5 * (2.0 - rho)
    den = (k + 1) * (k + 2)
    return (4.0 * L * ld / (sigma_d * den)
            + (4.0 * gamma * ld / sigma_d + max_M ** (2.0 / (2.0 - rho)) / (3.0 * rho * gamma ** (rho / (2.0 - rho))))
            * (k + 3) ** e / den)


def P_factor(k, p, rho):
    q = p + 2.0 - 2.0 * rho / (2.0 - rho)
    regime = p_regime(p, rho)
    if regime == "above":
        return (k + 1) ** (-(3.0 * rho - 2.0) / (2.0 - rho)) / q
    if regime == "equal":
        # the underlying sum over 1 <= i <= k is empty at k = 0
        return 0.0 if k == 0 else (1.0 + math.log(k)) / (k + 1) ** (p + 1)
    return (1.0 - 1.0 / q) / (k + 1) ** (p + 1)


def holder_strong(k, L, sigma_d, sigma_f, sigma_bar, p, beta, ld, max_M, rho):
    e = 2.0 / (2.0 - rho)
    q = rho / (2.0 - rho)
    base = sigma_d * sigma_bar + p * L + (p + 1) * sigma_d * beta
    t1 = (L / sigma_d + beta) * (p + 1) ** 2 * ld * (k + 2) ** (p - 1) / (k + 1) ** (p + 1)
    t2 = (p + 1) * (2.0 - rho) * max_M**e / (2.0 * rho * base**q) / (k + 1) ** (p + 1)
    t3 = (3.0 ** (p + 1) * (2.0 - rho) * max_M**e / (2.0 * rho)
          * (2.0 ** (p - 1) * (p + 1) ** 2 / (sigma_d * sigma_f)) ** q * P_factor(k, p, rho))
    return t1 + t2 + t3


def holder_strong_simple(k, L, sigma_d, sigma_f, ld, max_M):
    """rho = 1, p = 1, beta = 0, sigma_bar = sigma_f specialization."""
    return (4.0 * L * ld / (sigma_d * (k + 1) ** 2) + max_M**2 / ((sigma_d * sigma_f + L) * (k + 1) ** 2)
            + 18.0 * max_M**2 / (sigma_d * sigma_f * (k + 1)))
