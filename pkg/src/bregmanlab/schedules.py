"""Weight (lambda_k) and scaling (beta_k) parameter sequences.

A :class:`Schedule` stores finite tables for k = 0..K together with
beta_{-1}; every generator emits beta_{-1} = beta_0.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DegenerateBeta, PreconditionError, RangeViolation


@dataclass(eq=False)
class Schedule:
    kind: str
    lam: np.ndarray
    beta: np.ndarray  # beta[0] is beta_{-1}; beta[k + 1] is beta_k
    S: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.S = np.asarray(self.S, dtype=float)
        if self.beta.size != self.lam.size + 1 or self.S.size != self.lam.size:
            raise ValueError("inconsistent schedule table lengths")
        if not np.all(np.isfinite(self.S)):
            raise RangeViolation("S_k overflowed; reduce K or the growth rate of the schedule")

    @property
    def K(self):
        return self.lam.size - 1

    def beta_at(self, k):
        return float(self.beta[k + 1])

    def S_at(self, k):
        return 0.0 if k < 0 else float(self.S[k])

    def at(self, k):
        """(lambda_k, beta_{k-1}, beta_k, S_k)."""
        return float(self.lam[k]), float(self.beta[k]), float(self.beta[k + 1]), float(self.S[k])

    def validate(self):
        if np.any(self.lam <= 0):
            raise RangeViolation("weights must be positive")
        if np.any(self.beta < 0) or np.any(np.diff(self.beta) < 0):
            raise RangeViolation("scaling parameters must be nonnegative and nondecreasing")
        if not np.allclose(self.S, np.cumsum(self.lam), rtol=1e-12, atol=0.0):
            raise RangeViolation("S_k must equal the partial sums of lambda")
        return self

    def truncated(self, K):
        return Schedule(self.kind, self.lam[: K + 1], self.beta[: K + 2], self.S[: K + 1], dict(self.params))


def _from_lambda(kind, lam, beta_k, params):
    lam = np.asarray(lam, dtype=float)
    beta_k = np.asarray(beta_k, dtype=float)
    beta = np.concatenate([[beta_k[0]], beta_k])
    return Schedule(kind, lam, beta, np.cumsum(lam), params)


def simple_averaging(K, beta=0.0):
    """lambda_k = (k+1)/2 with constant beta, so S_k = (k+1)(k+2)/4."""
    k = np.arange(K + 1, dtype=float)
    return _from_lambda("simple-averaging", (k + 1) / 2, np.full(K + 1, float(beta)), {"beta": float(beta)})


def structured_beta(L, sigma_d, sigma_bar):
    gap = L - sigma_bar * sigma_d
    if gap < 0:
        raise PreconditionError(f"L={L} must be at least sigma_bar*sigma_d={sigma_bar * sigma_d}")
    if gap == 0:
        raise DegenerateBeta("L equals sigma_bar*sigma_d; the scaling parameter vanishes")
    return gap / sigma_d


def classical_structured(L, sigma_d, sigma_f, sigma_bar, K):
    """beta_k = (L - sigma_bar sigma_d)/sigma_d, lambda_0 = 1, lambda_{k+1} = (beta + S_k sigma_f)/beta."""
    beta = structured_beta(L, sigma_d, sigma_bar)
    lam = np.empty(K + 1)
    lam[0] = 1.0
    S = 1.0
    for k in range(K):
        lam[k + 1] = (beta + S * sigma_f) / beta
        S += lam[k + 1]
    return _from_lambda("classical-structured", lam, np.full(K + 1, beta),
                        {"L": L, "sigma_d": sigma_d, "sigma_f": sigma_f, "sigma_bar": sigma_bar, "beta": beta})


def modified_lambda(S, r):
    """Largest root of lam^2 = (1 + r S)(lam + S)."""
    a = 1.0 + r * S
    return 0.5 * (a + math.sqrt(a * a + 4.0 * a * S))


def modified_structured(L, sigma_d, sigma_f, sigma_bar, K, max_S=None):
    """beta as in the classical rule; lambda_{k+1} is the largest root of
    (L - sigma_bar sigma_d) lam^2 = sigma_d (S_k sigma_f + beta)(lam + S_k).

    With ``max_S`` the table stops early once S_k would exceed it.
    """
    beta = structured_beta(L, sigma_d, sigma_bar)
    r = sigma_f * sigma_d / (L - sigma_bar * sigma_d)
    lam = np.empty(K + 1)
    lam[0] = 1.0
    S = 1.0
    for k in range(K):
        nxt = modified_lambda(S, r)
        if max_S is not None and S + nxt > max_S:
            lam = lam[: k + 1]
            K = k
            break
        lam[k + 1] = nxt
        S += nxt
    return _from_lambda("modified-structured", lam, np.full(K + 1, beta),
                        {"L": L, "sigma_d": sigma_d, "sigma_f": sigma_f, "sigma_bar": sigma_bar,
                         "beta": beta, "r": r})


def modified_residual(sched):
    """Max relative residual of the defining quadratic over the table."""
    p = sched.params
    gap = p["L"] - p["sigma_bar"] * p["sigma_d"]
    worst = 0.0
    for k in range(sched.K):
        lam1, b_prev, _, _ = sched.at(k + 1)
        Sk = sched.S[k]
        lhs = gap * lam1 * lam1
        rhs = p["sigma_d"] * (Sk * p["sigma_f"] + b_prev) * (lam1 + Sk)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    return worst


def _check_rho(rho):
    if not 1.0 <= rho < 2.0:
        raise RangeViolation(f"rho={rho} must lie in [1, 2)")


def weak_nonstrong(L, sigma_d, rho, gamma, K):
    """lambda_k = (k+1)/2, beta_k = L/sigma_d + (gamma/sigma_d)(k+3)^(1.5(2-rho))."""
    _check_rho(rho)
    if not gamma > 0:
        raise RangeViolation("gamma must be positive")
    k = np.arange(K + 1, dtype=float)
    beta = L / sigma_d + gamma / sigma_d * (k + 3) ** (1.5 * (2.0 - rho))
    return _from_lambda("weak-nonstrong", (k + 1) / 2, beta,
                        {"L": L, "sigma_d": sigma_d, "rho": rho, "gamma": gamma})


def tune_gamma(M_hat, sigma_d, rho, d_star):
    """gamma* = M_hat (sigma_d / (12 (2-rho) d(x*)))^((2-rho)/2)."""
    _check_rho(rho)
    if d_star <= 0:
        raise PreconditionError("d(x*) must be positive to tune gamma")
    return M_hat * (sigma_d / (12.0 * (2.0 - rho) * d_star)) ** ((2.0 - rho) / 2.0)


def weak_strong(L, sigma_d, p, beta, K, sigma_bar=0.0):
    """lambda_k = (k+1)^p/(p+1), beta_k = (L/sigma_d + beta)(k+2)^(p-1)."""
    if p < 1:
        raise PreconditionError("p must be at least 1")
    if beta < 0:
        raise PreconditionError("beta must be nonnegative")
    if not sigma_d * sigma_bar + p * L + (p + 1) * sigma_d * beta > 0:
        raise PreconditionError("need sigma_d*sigma_bar + p*L + (p+1)*sigma_d*beta > 0")
    k = np.arange(K + 1, dtype=float)
    return _from_lambda("weak-strong", (k + 1) ** p / (p + 1), (L / sigma_d + beta) * (k + 2) ** (p - 1),
                        {"L": L, "sigma_d": sigma_d, "p": p, "beta": beta, "sigma_bar": sigma_bar})


def p_threshold(rho):
    _check_rho(rho)
    return (3.0 * rho - 2.0) / (2.0 - rho)


def p_regime(p, rho):
    """Which branch of P(k) applies: 'above', 'equal' or 'below' comparing p+1 to (3rho-2)/(2-rho)."""
    t = p_threshold(rho)
    if math.isclose(p + 1.0, t, rel_tol=1e-12, abs_tol=1e-12):
        return "equal"
    return "above" if p + 1.0 > t else "below"


def default_p(rho):
    return max(1, math.ceil(p_threshold(rho)))


def custom_table(lam, beta_with_minus1, kind="custom-table"):
    lam = np.asarray(lam, dtype=float)
    beta = np.asarray(beta_with_minus1, dtype=float)
    return Schedule(kind, lam, beta, np.cumsum(lam), {}).validate()


# ---------------------------------------------------------------------------
# growth of S_k under the modified structured rule


def sandwich(r):
    """(lower, factor, upper) with lower <= 2/(2+r+sqrt(r^2+4r)) <= upper."""
    factor = 2.0 / (2.0 + r + math.sqrt(r * r + 4.0 * r))
    return 1.0 - math.sqrt(r / (r + 1.0)), factor, (1.0 + 0.5 * math.sqrt(r)) ** -2


def _ratio(inv_S, r):
    """S_{k+1}/S_k given 1/S_k, with the discriminant factored to avoid cancellation."""
    u = inv_S + r
    return 0.5 * (u + 2.0 + math.sqrt(u * (u + 4.0)))


def growth_sequences(r, K):
    """log S_k and sum_{i<=k} S_i / S_k for the recurrence with parameter r (and r = 0 for T).

    Working with logs keeps k up to 10^4 finite for r up to 10.
    """
    def run(rr):
        logS = np.empty(K + 1)
        ratio_sum = np.empty(K + 1)
        logS[0], ratio_sum[0] = 0.0, 1.0
        ls, rs = 0.0, 1.0
        for k in range(K):
            q = _ratio(math.exp(-ls), rr)
            ls += math.log(q)
            rs = 1.0 + rs / q
            logS[k + 1], ratio_sum[k + 1] = ls, rs
        return logS, ratio_sum

    logS, sums = run(r)
    logT, tsums = run(0.0)
    return {"logS": logS, "S_ratio_sum": sums, "logT": logT, "T_ratio_sum": tsums}


def _rel(lhs, rhs):
    """One-sided relative residual (lhs - rhs)/|rhs|; positive means violated."""
    return (lhs - rhs) / abs(rhs) if rhs != 0 else lhs - rhs


def validate_growth_bounds(r, K):
    """Worst one-sided relative residuals of the four growth inequalities for k <= K."""
    seq = growth_sequences(r, K)
    lower, factor, upper = sandwich(r)
    log_factor = math.log(factor)
    gamma = (1.0 + math.sqrt(1.0 + 4.0 / r)) / 2.0 if r > 0 else math.inf
    worst = {"inverse_S": -math.inf, "sum_limit": -math.inf, "sum_compare": -math.inf, "sum_linear": -math.inf}
    logS, sums, tsums = seq["logS"], seq["S_ratio_sum"], seq["T_ratio_sum"]
    for k in range(K + 1):
        # 1/S_k <= min{4/((k+1)(k+4)), factor^k}, compared as a ratio in log space
        log_rhs = min(math.log(4.0 / ((k + 1) * (k + 4))), k * log_factor)
        worst["inverse_S"] = max(worst["inverse_S"], math.expm1(-logS[k] - log_rhs))
        if r > 0:
            worst["sum_limit"] = max(worst["sum_limit"], _rel(sums[k], gamma))
        worst["sum_compare"] = max(worst["sum_compare"], _rel(sums[k], tsums[k]))
        worst["sum_linear"] = max(worst["sum_linear"], _rel(tsums[k], k / 3.0 + math.log(k + 2.0) / 6.0 + 1.0))
    if r == 0:
        worst.pop("sum_limit")
    worst["sandwich"] = max(_rel(lower, factor), _rel(factor, upper))
    return worst
