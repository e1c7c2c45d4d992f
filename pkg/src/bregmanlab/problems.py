"""Problem classes, lower approximation models and seeded instance generators.

Two problem classes are supported:

* :class:`NonSmoothProblem` -- a subgradient oracle and a convexity parameter
  ``sigma_f`` relative to the prox-function.
* :class:`StructuredProblem` -- a lower model builder together with constants
  (sigma_f, sigma_bar, L, delta) such that

      f(x) <= m_f(y;x) - sigma_bar * xi(y,x) + L/2 ||y - x||^2 + delta(y, x).

Every model is returned in canonical form, see :class:`CanonicalModel`.
"""
from dataclasses import dataclass, field
import hashlib
import math
from typing import Callable

import numpy as np

from . import geometry as geo
from .errors import PreconditionError, RangeViolation, UnsupportedCombination


@dataclass(frozen=True, eq=False)
class CanonicalModel:
    """m(y; x) = <s, x> + c + sigma_coeff * d(x) + psi_coeff * Psi(x)."""

    s: np.ndarray
    c: float
    sigma_coeff: float
    psi_coeff: float
    anchor: np.ndarray

    def value(self, geom, x, psi=None):
        x = np.asarray(x, dtype=float)
        out = float(self.s @ x) + self.c
        if self.sigma_coeff:
            out += self.sigma_coeff * geom.d(x)
        if self.psi_coeff and psi is not None:
            out += self.psi_coeff * psi(x)
        return out


def linear_bregman_model(geom, y, fy, g, sigma, psi_coeff=0.0, value_shift=0.0):
    """Canonical form of fy + <g, x - y> + sigma * xi(y, x) (+ psi_coeff * Psi)."""
    y = np.asarray(y, dtype=float)
    g = np.asarray(g, dtype=float)
    s = g.copy()
    c = float(fy) - float(g @ y) + value_shift
    if sigma:
        gd = geom.grad_d(y)
        s = s - sigma * gd
        c += sigma * (float(gd @ y) - geom.d(y))
    return CanonicalModel(s=s, c=c, sigma_coeff=float(sigma), psi_coeff=float(psi_coeff), anchor=y.copy())


@dataclass(frozen=True)
class HolderDelta:
    """delta(y, x) = (M / rho) ||y - x||^rho."""

    M: float
    rho: float

    def __call__(self, norm, y, x):
        if self.M == 0.0:
            return 0.0
        return self.M / self.rho * norm(np.asarray(y) - np.asarray(x)) ** self.rho


@dataclass(frozen=True)
class ConstantDelta:
    delta: float = 0.0

    def __call__(self, norm, y, x):
        return self.delta


@dataclass(eq=False)
class NonSmoothProblem:
    f: Callable
    g: Callable
    sigma_f: float
    geom: geo.ProxGeometry
    qset: geo.FeasibleSet
    M: float | None = None
    x_star: np.ndarray | None = None
    f_star: float | None = None
    psi: object = None
    name: str = "nsp"

    kind = "NSP"

    def model(self, y):
        return nsp_lower_model(self, self.geom, y)


@dataclass(eq=False)
class StructuredProblem:
    f: Callable
    model_builder: Callable
    sigma_f: float
    sigma_bar: float
    L: float
    delta_fn: object
    geom: geo.ProxGeometry
    qset: geo.FeasibleSet
    psi: object = None
    grad: Callable | None = None
    x_star: np.ndarray | None = None
    f_star: float | None = None
    name: str = "sp"

    kind = "SP"

    def __post_init__(self):
        if not 0.0 <= self.sigma_bar <= self.sigma_f:
            raise PreconditionError("need 0 <= sigma_bar <= sigma_f")
        if self.L < 0:
            raise PreconditionError("L must be nonnegative")

    def model(self, y):
        return self.model_builder(y)

    def L_at(self, y):
        return self.L

    def delta(self, y, x):
        return self.delta_fn(self.geom.norm, y, x)

    @property
    def holder(self):
        """(M, rho) if the inexactness is of Hoelder type, else None."""
        if isinstance(self.delta_fn, HolderDelta):
            return self.delta_fn.M, self.delta_fn.rho
        return None

    def M_at(self, y):
        return self.delta_fn.M if isinstance(self.delta_fn, HolderDelta) else 0.0


def nsp_lower_model(p, geom, y):
    y = np.asarray(y, dtype=float)
    return linear_bregman_model(geom, y, p.f(y), p.g(y), p.sigma_f)


def _check_L(L, sigma_bar, geom):
    if L < sigma_bar * geom.sigma_d - 1e-12 * max(1.0, L):
        raise PreconditionError(f"L={L} is below sigma_bar*sigma_d={sigma_bar * geom.sigma_d}")


def make_smooth_adapter(f, grad_f, L, sigma_f, geom, qset, sigma_bar=None, **extra):
    sigma_bar = sigma_f if sigma_bar is None else sigma_bar
    _check_L(L, sigma_bar, geom)

    def build(y):
        y = np.asarray(y, dtype=float)
        return linear_bregman_model(geom, y, f(y), grad_f(y), sigma_f)

    return StructuredProblem(f=f, model_builder=build, sigma_f=sigma_f, sigma_bar=sigma_bar, L=L,
                             delta_fn=ConstantDelta(0.0), geom=geom, qset=qset, grad=grad_f, **extra)


def make_composite_adapter(f0, grad_f0, L, sigma_f0, psi, geom, qset, sigma_psi=0.0, **extra):
    """f = f0 + Psi with Psi an l1 penalty; Psi enters the model exactly."""
    if psi is not None and getattr(psi, "kind", None) != "l1":
        raise UnsupportedCombination("only the l1 composite term is shipped")
    if sigma_psi != 0.0:
        # sigma(Psi) = {0} for the l1 norm
        raise PreconditionError("the l1 term has no positive convexity parameter")
    _check_L(L, sigma_f0, geom)
    if psi is None:
        return make_smooth_adapter(f0, grad_f0, L, sigma_f0, geom, qset, **extra)

    def f(x):
        return f0(x) + psi(x)

    def build(y):
        y = np.asarray(y, dtype=float)
        return linear_bregman_model(geom, y, f0(y), grad_f0(y), sigma_f0, psi_coeff=1.0)

    return StructuredProblem(f=f, model_builder=build, sigma_f=sigma_f0 + sigma_psi, sigma_bar=sigma_f0, L=L,
                             delta_fn=ConstantDelta(0.0), geom=geom, qset=qset, psi=psi, grad=None, **extra)


def hashed_unit(y, seed):
    """Deterministic value in [0, 1) derived from the bytes of y and a seed."""
    h = hashlib.blake2b(np.ascontiguousarray(y, dtype="<f8").tobytes(), digest_size=8,
                        key=int(seed).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little") / 2.0**64


def make_inexact_oracle_adapter(exact, delta, L, mu, geom, seed=0):
    """(delta, L, mu)-oracle: exact gradient, value lowered by (delta/2) * u(y)."""
    if exact.grad is None:
        raise PreconditionError("the exact problem must expose a gradient")
    if delta < 0 or mu < 0:
        raise PreconditionError("delta and mu must be nonnegative")
    if mu > 0 and geom.quad_growth_A is None:
        raise PreconditionError("mu > 0 needs a prox-function with quadratic growth")
    sigma = mu / geom.quad_growth_A if mu > 0 else 0.0
    _check_L(L, sigma, geom)
    f, grad = exact.f, exact.grad

    def oracle(y):
        y = np.asarray(y, dtype=float)
        shift = 0.5 * delta * hashed_unit(y, seed) if delta > 0 else 0.0
        return f(y) - shift, grad(y)

    def build(y):
        fy, gy = oracle(y)
        return linear_bregman_model(geom, y, fy, gy, sigma)

    prob = StructuredProblem(f=f, model_builder=build, sigma_f=sigma, sigma_bar=sigma, L=L,
                             delta_fn=ConstantDelta(float(delta)), geom=geom, qset=exact.qset,
                             grad=grad, x_star=exact.x_star, f_star=exact.f_star, name=exact.name + "+inexact")
    prob.oracle = oracle
    return prob


def make_weakly_smooth_adapter(f, grad_f, M, rho, sigma_f, geom, qset, **extra):
    return make_mixed_adapter(f, grad_f, 0.0, M, rho, sigma_f, geom, qset, **extra)


def make_mixed_adapter(f, grad_f, L, M, rho, sigma_f, geom, qset, **extra):
    if not 1.0 <= rho < 2.0:
        raise RangeViolation(f"rho={rho} must lie in [1, 2)")
    if M < 0:
        raise RangeViolation("M must be nonnegative")
    _check_L(L, sigma_f, geom)

    def build(y):
        y = np.asarray(y, dtype=float)
        return linear_bregman_model(geom, y, f(y), grad_f(y), sigma_f)

    return StructuredProblem(f=f, model_builder=build, sigma_f=sigma_f, sigma_bar=sigma_f, L=L,
                             delta_fn=HolderDelta(float(M), float(rho)), geom=geom, qset=qset,
                             grad=grad_f, **extra)


def estimate_holder_constant(grad, qset, norm, rho, rng, n_pairs=10_000, inflate=1.5, kink_center=None):
    """Sampled max of ||grad(x) - grad(y)||_* / ||x - y||^(rho - 1), times ``inflate``.

    Half the pairs are reflections through ``kink_center`` (when given), which is
    where the ratio of |t|^(rho-1) sign(t) type gradients peaks.
    """
    n_rand = n_pairs // 2 if kink_center is not None else n_pairs
    X = qset.sample(rng, n_rand)
    Y = qset.sample(rng, n_rand)
    if kink_center is not None:
        m = n_pairs - n_rand
        P = qset.sample(rng, m)
        # shrink toward the kink so the reflection stays feasible
        scale = rng.random(m)[:, None]
        P = kink_center + scale * (P - kink_center)
        X = np.vstack([X, P])
        Y = np.vstack([Y, 2.0 * kink_center - P])
    best = 0.0
    for x, y in zip(X, Y):
        dist = norm(x - y)
        if dist == 0.0:
            continue
        ratio = norm.dual_norm(grad(x) - grad(y)) / dist ** (rho - 1.0)
        best = max(best, ratio)
    return inflate * best


# ---------------------------------------------------------------------------
# seeded generators; every instance keeps its raw arrays in ``data`` so that it
# can be serialized and rebuilt bit-for-bit


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@dataclass(eq=False)
class Instance:
    """A generated problem: raw data plus constructors for each problem class."""

    family: str
    data: dict
    geom: geo.ProxGeometry
    qset: geo.FeasibleSet
    x_star: np.ndarray | None
    f_star: float | None
    _nsp: Callable | None = field(default=None, repr=False)
    _sp: Callable | None = field(default=None, repr=False)

    def nsp(self):
        if self._nsp is None:
            raise UnsupportedCombination(f"family {self.family} has no nonsmooth form")
        return self._nsp()

    def sp(self):
        if self._sp is None:
            raise UnsupportedCombination(f"family {self.family} has no structured form")
        return self._sp()


def make_geometry(spec, n):
    prox = spec.get("prox", "euclidean")
    if prox == "entropy":
        center = spec.get("center")
        return geo.entropy_geometry(n, None if center is None else np.asarray(center, dtype=float))
    center = spec.get("center")
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return geo.euclidean_geometry(center, spec.get("norm", "l2"))


def make_set(spec, n):
    kind = spec.get("kind", "unconstrained")
    if kind == "box":
        lo = np.broadcast_to(np.asarray(spec.get("lower", -1.0), dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(spec.get("upper", 1.0), dtype=float), (n,)).copy()
        return geo.box(lo, hi)
    if kind == "simplex":
        return geo.simplex(n)
    if kind == "euclidean-ball":
        c = np.broadcast_to(np.asarray(spec.get("center", 0.0), dtype=float), (n,)).copy()
        return geo.euclidean_ball(c, spec.get("radius", 1.0))
    if kind == "unconstrained":
        return geo.unconstrained(n)
    raise ValueError(f"unknown set kind {kind!r}")


def _interior_point(qset, rng, n):
    if qset.kind == "simplex":
        return rng.dirichlet(np.full(n, 5.0))
    if qset.kind == "box":
        mid = 0.5 * (qset.lower + qset.upper)
        return mid + 0.5 * (qset.upper - qset.lower) * (rng.random(n) - 0.5)
    if qset.kind == "euclidean-ball":
        u = rng.standard_normal(n)
        return qset.center + 0.5 * qset.radius * rng.random() * u / np.linalg.norm(u)
    return rng.standard_normal(n)


def quadratic(n, L, sigma, rng, geometry=None, feasible=None, sigma_bar=None, f_offset=None, x_star=None):
    """f(x) = 1/2 (x - x*)^T H (x - x*) + f_offset with spec(H) = linspace(sigma, L).

    x* is placed in the interior of Q so it is also the constrained minimizer.
    Convexity constants are relative to the euclidean prox-function.
    """
    geom = make_geometry(geometry or {}, n)
    qset = make_set(feasible or {}, n)
    if geom.prox != "euclidean":
        raise UnsupportedCombination("quadratic instances use the euclidean prox-function")
    Qm = _orthogonal(rng, n)
    spectrum = np.linspace(sigma, L, n) if n > 1 else np.array([L])
    H = (Qm * spectrum) @ Qm.T
    H = 0.5 * (H + H.T)
    xs = _interior_point(qset, rng, n) if x_star is None else np.asarray(x_star, dtype=float)
    if f_offset is None:
        diam = qset.diameter(geo.NormSpec("l2", n)) or 2.0 * (np.linalg.norm(xs - geom.center) + 1.0)
        f_offset = 1.0 + L * diam**2
    data = {"H": H, "x_star": xs, "L": float(L), "sigma": float(sigma), "f_offset": float(f_offset),
            "sigma_bar": None if sigma_bar is None else float(sigma_bar)}
    return build_quadratic(data, geom, qset)


def build_quadratic(data, geom, qset):
    H, xs, off = data["H"], data["x_star"], data["f_offset"]
    # sigma(f) is relative to d itself; only L depends on the chosen norm
    sig = data["sigma"]
    L_norm = data["L"] * _l2_to_norm_factor(geom.norm)
    sigma_bar = sig if data.get("sigma_bar") is None else data["sigma_bar"]

    def f(x):
        r = np.asarray(x, dtype=float) - xs
        return 0.5 * float(r @ H @ r) + off

    def grad(x):
        return H @ (np.asarray(x, dtype=float) - xs)

    def sp():
        return make_smooth_adapter(f, grad, L_norm, sig, geom, qset, sigma_bar=sigma_bar,
                                   x_star=xs.copy(), f_star=off, name="quadratic")

    def nsp():
        return NonSmoothProblem(f=f, g=grad, sigma_f=sig, geom=geom, qset=qset, x_star=xs.copy(),
                                f_star=off, name="quadratic")

    return Instance("quadratic", data, geom, qset, xs.copy(), off, _nsp=nsp, _sp=sp)


def _l2_to_norm_factor(norm):
    """c with ||x||_2^2 <= c ||x||^2 for the given norm."""
    return {"l2": 1.0, "l1": 1.0, "linf": float(norm.dim)}[norm.kind]


def pwl_strong(n, pieces, sigma, rng, geometry=None, feasible=None, f_offset=1.0):
    """max_j <a_j, x - c> + sigma * D(x, c) + f_offset, minimized at x* = c.

    The pieces come in +-a pairs so the max term is nonnegative and vanishes at c.
    D is 1/2||.||^2 for the euclidean prox and KL for the entropy prox, which makes
    sigma a valid convexity parameter relative to d.
    """
    geom = make_geometry(geometry or {}, n)
    qset = make_set(feasible or ({"kind": "simplex"} if geom.prox == "entropy" else {"kind": "box"}), n)
    half = max(1, pieces // 2)
    A = rng.standard_normal((half, n))
    if geom.prox == "entropy":
        A -= A.mean(axis=1, keepdims=True)
    A = np.vstack([A, -A])
    c = _interior_point(qset, rng, n)
    data = {"A": A, "c": c, "sigma": float(sigma), "f_offset": float(f_offset)}
    return build_pwl_strong(data, geom, qset)


def build_pwl_strong(data, geom, qset):
    A, c, sigma, off = data["A"], data["c"], data["sigma"], data["f_offset"]
    entropic = geom.prox == "entropy"
    cgeom = geo.ProxGeometry(geom.norm, geom.prox, c, geom.sigma_d) if entropic else None

    def f(x):
        x = np.asarray(x, dtype=float)
        lin = float(np.max(A @ (x - c)))
        reg = cgeom.d(x) if entropic else 0.5 * float((x - c) @ (x - c))
        return lin + sigma * reg + off

    def g(x):
        x = np.asarray(x, dtype=float)
        j = int(np.argmax(A @ (x - c)))
        reg = cgeom.grad_d(x) if entropic else x - c
        return A[j] + sigma * reg

    def nsp():
        return NonSmoothProblem(f=f, g=g, sigma_f=sigma, geom=geom, qset=qset, x_star=c.copy(),
                                f_star=off, name="pwl-strong")

    return Instance("pwl-strong", data, geom, qset, c.copy(), off, _nsp=nsp)


def holder(n, rho, rng, rows=None, mu=0.0, L_extra=None, geometry=None, feasible=None, f_offset=1.0,
           n_pairs=10_000):
    """(1/rho) sum_i |a_i^T (x - c)|^rho + mu/2 ||x - c||^2 + f_offset, minimized at c.

    The Hoelder constant of the first term's gradient is estimated by sampling.
    """
    if not 1.0 <= rho < 2.0:
        raise RangeViolation(f"rho={rho} must lie in [1, 2)")
    geom = make_geometry(geometry or {}, n)
    qset = make_set(feasible or {"kind": "box"}, n)
    if geom.prox != "euclidean":
        raise UnsupportedCombination("Hoelder instances use the euclidean prox-function")
    rows = n if rows is None else rows
    A = rng.standard_normal((rows, n)) / math.sqrt(n)
    c = _interior_point(qset, rng, n)
    data = {"A": A, "c": c, "rho": float(rho), "mu": float(mu), "f_offset": float(f_offset)}
    inst = build_holder(data, geom, qset)
    est_set = qset if qset.bounded else geo.box(c - 2.0, c + 2.0)
    data["M"] = estimate_holder_constant(inst.holder_grad, est_set, geom.norm, rho, rng, n_pairs=n_pairs,
                                         kink_center=c)
    data["L"] = float(mu if L_extra is None else max(L_extra, mu)) * _l2_to_norm_factor(geom.norm)
    return build_holder(data, geom, qset)


def holder_constant_upper(A, rho, norm):
    """Analytic bound sum_i 2^(2-rho) ||a_i||_*^rho on the Hoelder constant."""
    return sum(2.0 ** (2.0 - rho) * norm.dual_norm(a) ** rho for a in A)


def build_holder(data, geom, qset):
    A, c, rho, mu, off = data["A"], data["c"], data["rho"], data["mu"], data["f_offset"]

    def part_grad(x):
        r = A @ (np.asarray(x, dtype=float) - c)
        return A.T @ (np.sign(r) * np.abs(r) ** (rho - 1.0))

    def f(x):
        x = np.asarray(x, dtype=float)
        r = A @ (x - c)
        out = float(np.sum(np.abs(r) ** rho)) / rho + off
        if mu:
            out += 0.5 * mu * float((x - c) @ (x - c))
        return out

    def grad(x):
        out = part_grad(x)
        return out + mu * (np.asarray(x, dtype=float) - c) if mu else out

    def sp():
        return make_mixed_adapter(f, grad, data["L"], data["M"], rho, mu, geom, qset,
                                  x_star=c.copy(), f_star=off, name="holder")

    def nsp():
        return NonSmoothProblem(f=f, g=grad, sigma_f=mu, geom=geom, qset=qset, x_star=c.copy(),
                                f_star=off, name="holder")

    inst = Instance("holder", data, geom, qset, c.copy(), off, _nsp=nsp, _sp=sp if "M" in data else None)
    inst.holder_grad = part_grad
    return inst


def lasso(m, n, tau, rng, feasible=None, tol=1e-12, max_iter=20_000, reference=True):
    """1/2||Ax - b||^2 + tau ||x||_1 with f* certified by a dual-averaging lower bound."""
    geom = geo.euclidean_geometry(np.zeros(n))
    qset = make_set(feasible or {"kind": "box", "lower": -2.0, "upper": 2.0}, n)
    A = rng.standard_normal((m, n)) / math.sqrt(m)
    b = rng.standard_normal(m)
    data = {"A": A, "b": b, "tau": float(tau)}
    inst = build_lasso(data, geom, qset)
    if not reference:
        return inst
    x_ref, f_ref = lasso_reference(inst.sp(), tol=tol, max_iter=max_iter)
    data["x_star"], data["f_star"] = x_ref, f_ref
    return build_lasso(data, geom, qset)


def build_lasso(data, geom, qset):
    A, b, tau = data["A"], data["b"], data["tau"]
    eig = np.linalg.eigvalsh(A.T @ A)
    L, sig = float(eig[-1]), float(max(eig[0], 0.0))
    psi = geo.L1Penalty(tau)

    def f0(x):
        r = A @ np.asarray(x, dtype=float) - b
        return 0.5 * float(r @ r)

    def g0(x):
        return A.T @ (A @ np.asarray(x, dtype=float) - b)

    xs = data.get("x_star")
    fs = data.get("f_star")

    def sp():
        return make_composite_adapter(f0, g0, L, sig, psi, geom, qset, x_star=None if xs is None else xs.copy(),
                                      f_star=fs, name="lasso")

    return Instance("lasso", data, geom, qset, xs, fs, _sp=sp)


def lasso_reference(problem, tol=1e-12, max_iter=20_000):
    """Run the modified structured method with dual averaging until the certified gap is <= tol.

    The lower bound uses min_Q sum_i lambda_i m(x_i; .) <= S_k f*, solvable in closed form.
    """
    from .engine import RunConfig, StructuredRunner
    from .schedules import modified_structured

    sched = modified_structured(problem.L, problem.geom.sigma_d, problem.sigma_f, problem.sigma_bar, max_iter,
                                max_S=1e200)
    max_iter = sched.K
    runner = StructuredRunner(RunConfig(problem_class="SP", variant="modified", model="dual-averaging",
                                        schedule=sched, K=max_iter, strict=False, check_relations=False),
                              problem)
    best = (None, math.inf, -math.inf)
    for state in runner.iterate():
        if state.k % 25 and state.k != max_iter:
            continue
        lower = runner.model_sum_lower_bound()
        fx = problem.f(state.xhat)
        if fx < best[1] or lower > best[2]:
            best = (state.xhat.copy() if fx < best[1] else best[0], min(fx, best[1]), max(lower, best[2]))
        if best[1] - best[2] <= tol * max(1.0, abs(best[1])):
            break
    return best[0], best[2]
