"""Normed spaces, prox-functions, feasible sets and the closed-form subproblem solvers.

Every auxiliary function built by the methods has the canonical shape

    x -> <s, x> + c + beta * d(x) + w * Psi(x)

so a single solver, :func:`solve_canonical`, covers the prox-type subproblems
as well as the linear minimization oracle used by conditional gradient methods.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, Unbounded, UnsupportedCombination

MEMBERSHIP_TOL = 1e-9
LOG_CLAMP = 1e-300

_DUAL = {"l1": "linf", "l2": "l2", "linf": "l1"}


@dataclass(frozen=True)
class NormSpec:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in _DUAL:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if int(self.dim) < 1:
            raise ValueError("dimension must be positive")

    def __call__(self, x):
        return _norm(self.kind, x)

    def dual(self):
        return NormSpec(_DUAL[self.kind], self.dim)

    def dual_norm(self, s):
        return _norm(_DUAL[self.kind], s)


def _norm(kind, x):
    x = np.asarray(x, dtype=float)
    if kind == "l1":
        return float(np.sum(np.abs(x)))
    if kind == "l2":
        return float(np.linalg.norm(x))
    return float(np.max(np.abs(x))) if x.size else 0.0


@dataclass(frozen=True)
class L1Penalty:
    """Composite term Psi(x) = weight * ||x||_1."""

    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("l1 weight must be nonnegative")

    def __call__(self, x):
        return self.weight * float(np.sum(np.abs(x)))

    kind = "l1"


@dataclass(frozen=True, eq=False)
class ProxGeometry:
    """A prox-function d on E together with the norm it is strongly convex for.

    ``prox`` is ``"euclidean"`` for d(x) = 1/2 ||x - x0||_2^2 or ``"entropy"``
    for d(x) = sum_i x_i log(x_i / x0_i), which on the simplex with a uniform
    center equals log n + sum_i x_i log x_i.
    """

    norm: NormSpec
    prox: str
    center: np.ndarray
    sigma_d: float
    quad_growth_A: float | None = None

    def __post_init__(self):
        if self.prox not in ("euclidean", "entropy"):
            raise ValueError(f"unknown prox kind {self.prox!r}")
        center = np.array(self.center, dtype=float)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if center.shape != (self.norm.dim,):
            raise ValueError("center dimension does not match the norm")
        if not self.sigma_d > 0:
            raise ValueError("sigma_d must be positive")
        if self.prox == "entropy":
            if np.any(center <= 0) or abs(center.sum() - 1.0) > MEMBERSHIP_TOL:
                raise DomainError("entropy prox-center must be an interior point of the simplex")

    @property
    def dim(self):
        return self.norm.dim

    def d(self, x):
        x = np.asarray(x, dtype=float)
        if self.prox == "euclidean":
            diff = x - self.center
            return 0.5 * float(diff @ diff)
        xc = self._clamped(x)
        return float(np.sum(xc * np.log(xc / self.center)))

    def grad_d(self, x):
        x = np.asarray(x, dtype=float)
        if self.prox == "euclidean":
            return x - self.center
        return np.log(self._clamped(x) / self.center) + 1.0

    def _clamped(self, x):
        if np.any(x < -MEMBERSHIP_TOL):
            raise DomainError("entropy prox-function evaluated outside the nonnegative orthant")
        return np.maximum(x, LOG_CLAMP)

    def linearize_d(self, y, x):
        """l_d(y; x) = d(y) + <grad d(y), x - y>."""
        y = np.asarray(y, dtype=float)
        return self.d(y) + float(self.grad_d(y) @ (np.asarray(x, dtype=float) - y))

    def bregman(self, y, x):
        """xi(y, x) = d(x) - l_d(y; x)."""
        if self.prox == "euclidean":
            diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
            return 0.5 * float(diff @ diff)
        x = np.asarray(x, dtype=float)
        yc = self._clamped(np.asarray(y, dtype=float))
        xc = self._clamped(x)
        # sum x log(x/y) - sum x + sum y, the KL form valid off the simplex too
        return float(np.sum(xc * np.log(xc / yc)) - x.sum() + np.asarray(y, dtype=float).sum())


def bregman(geom, y, x):
    return geom.bregman(y, x)


def linearize_d(geom, y, x):
    return geom.linearize_d(y, x)


_EUCLIDEAN_SIGMA = {"l2": lambda n: 1.0, "linf": lambda n: 1.0, "l1": lambda n: 1.0 / n}
_EUCLIDEAN_A = {"l2": lambda n: 1.0, "linf": lambda n: float(n), "l1": lambda n: 1.0}


def euclidean_geometry(center, norm="l2"):
    """d(x) = 1/2 ||x - center||_2^2, with sigma_d and A computed for the chosen norm."""
    center = np.asarray(center, dtype=float)
    n = center.size
    return ProxGeometry(
        norm=NormSpec(norm, n),
        prox="euclidean",
        center=center,
        sigma_d=_EUCLIDEAN_SIGMA[norm](n),
        quad_growth_A=_EUCLIDEAN_A[norm](n),
    )


def entropy_geometry(n, center=None):
    """Negative entropy on the unit simplex, 1-strongly convex for the l1 norm."""
    center = np.full(n, 1.0 / n) if center is None else np.asarray(center, dtype=float)
    return ProxGeometry(norm=NormSpec("l1", n), prox="entropy", center=center, sigma_d=1.0)


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    kind: str
    dim: int
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None
    _frozen: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.kind not in ("box", "simplex", "euclidean-ball", "unconstrained"):
            raise ValueError(f"unknown feasible set kind {self.kind!r}")
        for name in ("lower", "upper", "center"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if self.kind == "box":
            if self.lower is None or self.upper is None or np.any(self.lower > self.upper):
                raise ValueError("box needs lower <= upper")
            if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
                raise ValueError("box bounds must be finite")
        if self.kind == "euclidean-ball":
            if self.center is None or self.radius is None or self.radius < 0:
                raise ValueError("ball needs a center and a nonnegative radius")

    @property
    def bounded(self):
        return self.kind != "unconstrained"

    def contains(self, x, tol=MEMBERSHIP_TOL):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if self.kind == "box":
            return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))
        if self.kind == "simplex":
            return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol)
        if self.kind == "euclidean-ball":
            return bool(np.linalg.norm(x - self.center) <= self.radius + tol)
        return True

    def diameter(self, norm):
        """Diam(Q) = sup ||x - y|| under ``norm``; None for unbounded sets."""
        n = self.dim
        if self.kind == "unconstrained":
            return None
        if self.kind == "box":
            return norm(self.upper - self.lower)
        if self.kind == "simplex":
            if n == 1:
                return 0.0
            return {"l1": 2.0, "l2": math.sqrt(2.0), "linf": 1.0}[norm.kind]
        r = float(self.radius)
        return {"l1": 2.0 * r * math.sqrt(n), "l2": 2.0 * r, "linf": 2.0 * r}[norm.kind]

    def sample(self, rng, m, scale=1.0):
        """Draw m feasible points (rows)."""
        n = self.dim
        if self.kind == "box":
            return self.lower + (self.upper - self.lower) * rng.random((m, n))
        if self.kind == "simplex":
            return rng.dirichlet(np.ones(n), size=m)
        if self.kind == "euclidean-ball":
            u = rng.standard_normal((m, n))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            r = self.radius * rng.random(m) ** (1.0 / n)
            return self.center + u * r[:, None]
        center = np.zeros(n) if self.center is None else self.center
        return center + scale * rng.standard_normal((m, n))

    def project(self, x):
        """Euclidean projection; only used by reference implementations."""
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return np.clip(x, self.lower, self.upper)
        if self.kind == "euclidean-ball":
            diff = x - self.center
            nrm = np.linalg.norm(diff)
            return x.copy() if nrm <= self.radius else self.center + diff * (self.radius / nrm)
        if self.kind == "simplex":
            u = np.sort(x)[::-1]
            css = np.cumsum(u) - 1.0
            idx = np.arange(1, x.size + 1)
            rho = np.nonzero(u - css / idx > 0)[0][-1]
            return np.maximum(x - css[rho] / (rho + 1.0), 0.0)
        return x.copy()


def box(lower, upper):
    lower = np.asarray(lower, dtype=float)
    return FeasibleSet("box", lower.size, lower=lower, upper=np.asarray(upper, dtype=float))


def simplex(n):
    return FeasibleSet("simplex", n)


def euclidean_ball(center, radius):
    center = np.asarray(center, dtype=float)
    return FeasibleSet("euclidean-ball", center.size, center=center, radius=float(radius))


def unconstrained(n, center=None):
    return FeasibleSet("unconstrained", n, center=None if center is None else np.asarray(center, dtype=float))


def lmo(qset, s):
    """Extreme-point minimizer of <s, x> over a bounded set; ties go to the lowest index."""
    s = np.asarray(s, dtype=float)
    if qset.kind == "unconstrained":
        raise Unbounded("linear minimization over an unbounded set")
    if qset.kind == "box":
        return np.where(s < 0, qset.upper, qset.lower).astype(float)
    if qset.kind == "simplex":
        x = np.zeros(qset.dim)
        x[int(np.argmin(s))] = 1.0
        return x
    nrm = np.linalg.norm(s)
    if nrm == 0.0:
        direction = np.zeros(qset.dim)
        direction[0] = 1.0
        return qset.center - qset.radius * direction
    return qset.center - qset.radius * s / nrm


def _soft_threshold(v, thr):
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


def _linear_l1_box(s, t, lower, upper):
    # per coordinate: minimize s_i x + t |x| over [lo, hi]; candidates in lo, 0, hi order
    cands = np.stack([lower, np.clip(0.0, lower, upper), upper])
    vals = s * cands + t * np.abs(cands)
    return cands[np.argmin(vals, axis=0), np.arange(s.size)]


def solve_canonical(geom, qset, aux, psi=None):
    """argmin over Q of <s,x> + beta d(x) + w Psi(x) for the canonical ``aux``.

    Supported: euclidean d with box, ball or unconstrained Q and Psi in {0, l1};
    entropy d on the simplex with Psi = 0. With beta = w = 0 the call is a
    linear minimization and needs a bounded Q.
    """
    s = np.asarray(aux.s, dtype=float)
    beta = float(aux.beta)
    w = float(getattr(aux, "w", 0.0))
    if beta < 0 or w < 0:
        raise ValueError("canonical coefficients beta and w must be nonnegative")
    thr_weight = w * psi.weight if (psi is not None and w > 0) else 0.0
    if psi is not None and w > 0 and getattr(psi, "kind", None) != "l1":
        raise UnsupportedCombination(f"composite term {psi!r} is not supported")

    if beta == 0.0 and thr_weight == 0.0:
        return lmo(qset, s)

    if geom.prox == "entropy":
        if qset.kind != "simplex":
            raise UnsupportedCombination("entropy prox-function is only paired with the simplex")
        if thr_weight > 0:
            raise UnsupportedCombination("entropy prox-function with a composite term")
        logits = np.log(geom.center) - s / beta
        logits -= logits.max()
        x = np.exp(logits)
        return x / x.sum()

    if qset.kind == "simplex":
        raise UnsupportedCombination("euclidean prox-function on the simplex")

    if beta > 0:
        v = geom.center - s / beta
        if thr_weight > 0:
            if qset.kind == "euclidean-ball" and np.any(qset.center != 0):
                raise UnsupportedCombination("l1 term with an off-origin ball")
            v = _soft_threshold(v, thr_weight / beta)
        return qset.project(v)

    # beta == 0 with an l1 term: piecewise-linear separable problem
    if qset.kind == "box":
        return _linear_l1_box(s, thr_weight, qset.lower, qset.upper)
    if qset.kind == "unconstrained":
        if np.any(np.abs(s) > thr_weight):
            raise Unbounded("linear term dominates the l1 term on an unbounded set")
        return np.zeros(qset.dim)
    raise UnsupportedCombination("linear plus l1 minimization over a ball")
