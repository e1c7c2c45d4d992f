"""The nonsmooth and structured methods with an online certificate tracker.

A run keeps the auxiliary functions in canonical form, accumulates the error
term C_k and checks the relation

    S_k f(xhat_k) <= psi_k(w_k) + C_k

at every iteration. The classical variants also check the same inequality with
the weighted sum of objective values on the left.
"""
from dataclasses import dataclass, field
import math
from types import SimpleNamespace

import numpy as np

from . import bounds as bd
from .errors import (DegenerateC0, InvariantViolation, MissingReference, PreconditionError,
                     UnsupportedCombination)
from .geometry import solve_canonical
from .models import CanonicalAux, check_properties, da_step, emd_step, hybrid_step, init_aux
from .problems import ConstantDelta, linear_bregman_model

MODELS = ("extended-md", "dual-averaging", "hybrid", "mixed")
VARIANTS = ("classical", "modified")


@dataclass
class RunConfig:
    problem_class: str
    variant: str
    model: str
    schedule: object
    K: int
    probes: int = 0
    track_certificates: bool = True
    track_properties: bool = False
    strict: bool = True
    check_relations: bool = True
    tol: float = 1e-8
    ck_factor: float = 1.0
    seed: int = 0

    def validate(self, problem):
        if self.problem_class not in ("NSP", "SP", "CGM"):
            raise UnsupportedCombination(f"unknown problem class {self.problem_class!r}")
        if self.variant not in VARIANTS:
            raise UnsupportedCombination(f"unknown variant {self.variant!r}")
        if self.model not in MODELS:
            raise UnsupportedCombination(f"unknown model kind {self.model!r}")
        if self.problem_class == "NSP" and self.model == "hybrid":
            raise UnsupportedCombination("the hybrid model needs the structured method")
        if self.K > self.schedule.K:
            raise PreconditionError(f"schedule has {self.schedule.K + 1} entries, K={self.K} requested")
        if self.K < 0:
            raise PreconditionError("K must be nonnegative")
        if self.problem_class == "CGM":
            if problem.sigma_f != 0 or getattr(problem, "sigma_bar", 0.0) != 0:
                raise PreconditionError("conditional gradient mode needs sigma_f = sigma_bar = 0")
            if np.any(self.schedule.beta[: self.K + 2] != 0):
                raise PreconditionError("conditional gradient mode needs beta_k = 0")
            if not problem.qset.bounded:
                raise PreconditionError("conditional gradient mode needs a bounded feasible set")


@dataclass
class RunState:
    k: int
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    xhat: np.ndarray
    lam: float
    beta_prev: float
    beta: float
    S_prev: float
    S: float
    C: float
    min_phi: float
    min_psi: float
    f_xhat: float
    f_x: float
    weighted_f: float
    rk_residual: float
    rk2_residual: float | None
    g_norm: float = math.nan
    step_sq: float = math.nan
    delta_term: float = 0.0
    phi: CanonicalAux | None = None
    psi_aux: CanonicalAux | None = None
    model: object = None


@dataclass
class Trace:
    config: RunConfig
    problem: object
    states: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(s, name) for s in self.states], dtype=float)

    def column_stack(self, name):
        """Vector-valued field as a (K+1, n) array."""
        return np.vstack([getattr(s, name) for s in self.states])

    def __len__(self):
        return len(self.states)

    def __getitem__(self, k):
        return self.states[k]


def _scale(*values):
    return max(1.0, *(abs(v) for v in values))


class _Runner:
    def __init__(self, cfg, problem):
        cfg.validate(problem)
        self.cfg = cfg
        self.p = problem
        self.geom = problem.geom
        self.qset = problem.qset
        self.psi = problem.psi
        self.sched = cfg.schedule
        self.x0 = np.array(self.geom.center, dtype=float)
        if not self.qset.contains(self.x0):
            raise PreconditionError("the prox-center must belong to the feasible set")
        # running sum of lambda_i m(x_i; .) for certified lower bounds
        self.model_sum = CanonicalAux(np.zeros(self.geom.dim), 0.0, 0.0, 0.0)
        self.S_last = 0.0
        self.violations = []

    def _solve(self, aux):
        return solve_canonical(self.geom, self.qset, aux, self.psi)

    def _value(self, aux, x):
        return aux.value(self.geom, x, self.psi)

    def _use_emd(self, k):
        if self.cfg.model == "mixed":
            return k % 2 == 0
        return self.cfg.model == "extended-md"

    def _accumulate(self, model, lam, S):
        ms = self.model_sum
        self.model_sum = CanonicalAux(ms.s + lam * model.s, ms.c + lam * model.c,
                                      ms.beta + lam * model.sigma_coeff, ms.w + lam * model.psi_coeff)
        self.S_last = S

    def model_sum_lower_bound(self):
        """min over Q of sum_i lambda_i m(x_i; .) divided by S_k; a lower bound on f*."""
        z = self._solve(self.model_sum)
        return self._value(self.model_sum, z) / self.S_last

    def _check(self, k, lhs, rhs, label):
        residual = (lhs - rhs) / _scale(lhs)
        if self.cfg.check_relations and residual > self.cfg.tol:
            self.violations.append((label, k, residual))
            if self.cfg.strict:
                raise InvariantViolation(f"relation {label} violated at k={k}: residual {residual:.3e}",
                                         k=k, residual=residual)
        return residual


class NonsmoothRunner(_Runner):
    def iterate(self):
        cfg, p, geom, sched = self.cfg, self.p, self.geom, self.sched
        sig = p.sigma_f
        lam0, bm1, _, _ = sched.at(0)
        if lam0 * sig + bm1 <= 0:
            raise DegenerateC0("lambda_0 * sigma_f + beta_{-1} must be positive")
        phi = init_aux(bm1, geom)
        z_prev, min_prev = self.x0, 0.0
        x = self.x0.copy()
        xhat = self.x0.copy()
        C = 0.0
        weighted_f = 0.0
        for k in range(cfg.K + 1):
            lam, b_prev, b_k, S = sched.at(k)
            S_prev = sched.S_at(k - 1)
            fx = p.f(x)
            g = np.asarray(p.g(x), dtype=float)
            model = linear_bregman_model(geom, x, fx, g, sig)
            if self._use_emd(k):
                phi = emd_step(phi, min_prev, z_prev, model, lam, b_prev, b_k, S_prev, sig, geom)
            else:
                phi = da_step(phi, model, lam, b_prev, b_k)
            if not phi.beta > 0:
                raise PreconditionError(f"beta_k + S_k sigma_f vanishes at k={k}")
            self._accumulate(model, lam, S)
            z = self._solve(phi)
            min_phi = self._value(phi, z)
            gn = geom.norm.dual_norm(g)
            if cfg.variant == "classical":
                inc = lam * lam * gn * gn / (2.0 * geom.sigma_d * (b_prev + S * sig))
            else:
                inc = lam * lam * S * gn * gn / (2.0 * geom.sigma_d * (lam * lam * sig + S * (b_prev + S_prev * sig)))
            C += cfg.ck_factor * inc
            f_xhat = fx if cfg.variant == "modified" or k == 0 else p.f(xhat)
            weighted_f += lam * fx
            rk = self._check(k, S * f_xhat, min_phi + C, "relation")
            rk2 = self._check(k, weighted_f, min_phi + C, "weighted") if cfg.variant == "classical" else None
            yield RunState(k=k, x=x, z=z, w=z, xhat=xhat, lam=lam, beta_prev=b_prev, beta=b_k, S_prev=S_prev,
                           S=S, C=C, min_phi=min_phi, min_psi=min_phi, f_xhat=f_xhat, f_x=fx,
                           weighted_f=weighted_f, rk_residual=rk, rk2_residual=rk2, g_norm=gn,
                           phi=phi if cfg.track_properties else None, model=model if cfg.track_properties else None)
            if k == cfg.K:
                break
            lam_next = sched.lam[k + 1]
            S_next = sched.S[k + 1]
            xhat = (S * xhat + lam_next * z) / S_next
            x = z.copy() if cfg.variant == "classical" else xhat
            z_prev, min_prev = z, min_phi


class StructuredRunner(_Runner):
    def iterate(self):
        cfg, p, geom, sched = self.cfg, self.p, self.geom, self.sched
        sig, sbar = p.sigma_f, p.sigma_bar
        norm = geom.norm
        hybrid = cfg.model == "hybrid"
        phi = init_aux(sched.at(0)[1], geom)
        z_prev, min_prev = self.x0, 0.0
        xhat_prev = None
        C = 0.0
        weighted_f = 0.0
        for k in range(cfg.K + 1):
            lam, b_prev, b_k, S = sched.at(k)
            S_prev = sched.S_at(k - 1)
            if k == 0:
                x = self.x0.copy()
            elif cfg.variant == "classical":
                x = z_prev.copy()
            else:
                x = (S_prev * xhat_prev + lam * z_prev) / S
            model = p.model(x)
            L = p.L_at(x)
            psi_aux = None
            if hybrid:
                psi_aux = hybrid_step(phi, min_prev, z_prev, model, lam, b_prev, b_k, S_prev, sig, geom)
                phi = da_step(phi, model, lam, b_prev, b_k)
            elif self._use_emd(k):
                phi = emd_step(phi, min_prev, z_prev, model, lam, b_prev, b_k, S_prev, sig, geom)
            else:
                phi = da_step(phi, model, lam, b_prev, b_k)
            self._accumulate(model, lam, S)
            z = self._solve(phi)
            min_phi = self._value(phi, z)
            if hybrid:
                w = self._solve(psi_aux)
                min_psi = self._value(psi_aux, w)
            else:
                w, min_psi = z, min_phi
            xhat = w.copy() if k == 0 else (S_prev * xhat_prev + lam * w) / S
            kappa = b_prev + S_prev * sig
            if cfg.variant == "classical" or k == 0:
                diff = norm(w - x)
                dterm = p.delta(x, w)
                inc = lam * (0.5 * L - 0.5 * geom.sigma_d * (sbar + kappa / lam)) * diff**2 + lam * dterm
                dterm *= lam
            else:
                diff = norm(xhat - x)
                dterm = p.delta(x, xhat)
                inc = S * (0.5 * L - 0.5 * geom.sigma_d * (sbar + S * kappa / lam**2)) * diff**2 + S * dterm
                dterm *= S
            C += cfg.ck_factor * inc
            f_xhat = p.f(xhat)
            f_w = f_xhat if k == 0 else p.f(w)
            weighted_f += lam * f_w
            rk = self._check(k, S * f_xhat, min_psi + C, "relation")
            rk2 = self._check(k, weighted_f, min_psi + C, "weighted") if cfg.variant == "classical" else None
            step = w - z_prev
            yield RunState(k=k, x=x, z=z, w=w, xhat=xhat, lam=lam, beta_prev=b_prev, beta=b_k, S_prev=S_prev,
                           S=S, C=C, min_phi=min_phi, min_psi=min_psi, f_xhat=f_xhat, f_x=p.f(x),
                           weighted_f=weighted_f, rk_residual=rk, rk2_residual=rk2,
                           step_sq=float(norm(step) ** 2), delta_term=dterm,
                           phi=phi if cfg.track_properties else None,
                           psi_aux=psi_aux if cfg.track_properties else None,
                           model=model if cfg.track_properties else None)
            z_prev, min_prev, xhat_prev = z, min_phi, xhat


def _collect(runner, cfg, problem):
    trace = Trace(cfg, problem)
    for state in runner.iterate():
        trace.states.append(state)
    trace.violations = list(runner.violations)
    trace.runner = runner
    return trace


def run_nonsmooth(cfg, problem):
    if cfg.problem_class != "NSP":
        raise UnsupportedCombination("run_nonsmooth expects problem_class 'NSP'")
    return _collect(NonsmoothRunner(cfg, problem), cfg, problem)


def run_structured(cfg, problem):
    if cfg.problem_class not in ("SP", "CGM"):
        raise UnsupportedCombination("run_structured expects problem_class 'SP' or 'CGM'")
    return _collect(StructuredRunner(cfg, problem), cfg, problem)


def run_cgm(cfg, problem):
    """The structured method with sigma_f = sigma_bar = 0 and beta = 0, so every subproblem is an LMO."""
    if cfg.problem_class != "CGM":
        cfg = RunConfig(**{**cfg.__dict__, "problem_class": "CGM"})
    return _collect(StructuredRunner(cfg, problem), cfg, problem)


def run(cfg, problem):
    if cfg.problem_class == "NSP":
        return run_nonsmooth(cfg, problem)
    return run_structured(cfg, problem)


def run_classical_fw(problem, K):
    """x_{k+1} = (1 - tau_k) x_k + tau_k z_k with z_k an LMO point and tau_k = 2/(k+3).

    Returns a namespace with per-k arrays: x, z, f, gap (when f* is known) and
    the a-posteriori bound built from the first model gap, L and delta terms.
    """
    geom, qset = problem.geom, problem.qset
    if not qset.bounded:
        from .errors import Unbounded

        raise Unbounded("classical conditional gradient needs a bounded feasible set")
    from .geometry import lmo

    x = np.array(geom.center, dtype=float)
    if not qset.contains(x):
        raise PreconditionError("the prox-center must belong to the feasible set")
    diam = qset.diameter(geom.norm)
    xs, zs, fs, bnds = [], [], [], []
    lam = lambda i: (i + 1) / 2.0
    Ssum = lambda i: (i + 1) * (i + 2) / 4.0
    head = None
    acc = 0.0
    for k in range(K + 1):
        model = problem.model(x)
        if model.sigma_coeff or (model.psi_coeff and problem.psi is not None):
            raise UnsupportedCombination("classical conditional gradient needs affine models")
        z = lmo(qset, model.s)
        if k == 0:
            head = lam(0) * (problem.f(x) - model.value(geom, z))
        else:
            acc += 0.5 * diam**2 * problem.L_at(xs[-1]) * lam(k) ** 2 / Ssum(k) + Ssum(k) * problem.delta(xs[-1], x)
        xs.append(x.copy())
        zs.append(z)
        fs.append(problem.f(x))
        bnds.append((head + acc) / Ssum(k))
        tau = lam(k + 1) / Ssum(k + 1)
        x = (1.0 - tau) * x + tau * z
    f = np.array(fs)
    gap = f - problem.f_star if problem.f_star is not None else None
    return SimpleNamespace(x=np.array(xs), z=np.array(zs), f=f, gap=gap, bound=np.array(bnds), diam=diam)


# ---------------------------------------------------------------------------
# certificates


def _reference(problem, x_star):
    x_star = problem.x_star if x_star is None else x_star
    if x_star is None:
        raise MissingReference("bounds need a reference optimum x*")
    f_star = problem.f_star if problem.f_star is not None else problem.f(x_star)
    return np.asarray(x_star, dtype=float), f_star


def closed_form_bound(trace, k, ld, max_g=None, max_step_sq=None):
    """The closed-form bound for the active schedule, or None when none applies."""
    cfg, p = trace.config, trace.problem
    sched = cfg.schedule
    sp = sched.params
    geom = p.geom
    delta = p.delta_fn.delta if isinstance(getattr(p, "delta_fn", None), ConstantDelta) else None
    if cfg.problem_class == "NSP":
        if sched.kind == "simple-averaging" and sp.get("beta", 0.0) == 0.0 and p.sigma_f > 0:
            fn = bd.nonsmooth_classical if cfg.variant == "classical" else bd.nonsmooth_modified
            return fn(k, max_g, geom.sigma_d, p.sigma_f)
        return None
    if cfg.problem_class == "CGM":
        if cfg.variant != "modified" or sched.kind != "simple-averaging":
            return None
        if p.holder is not None:
            M, rho = p.holder
            return bd.cgm_holder(k, p.L, M, rho, p.qset.diameter(geom.norm))
        return bd.cgm_smooth(k, p.L, max_step_sq, delta or 0.0)
    if sched.kind == "classical-structured" and cfg.variant == "classical" and delta is not None:
        return bd.structured_classical(k, p.L, geom.sigma_d, p.sigma_f, p.sigma_bar, ld, delta)
    if sched.kind == "modified-structured" and cfg.variant == "modified" and delta is not None:
        return bd.structured_modified(k, p.L, geom.sigma_d, p.sigma_f, p.sigma_bar, ld, delta)
    if cfg.variant == "modified" and p.holder is not None:
        M, rho = p.holder
        if sched.kind == "weak-nonstrong" and p.sigma_f == 0:
            return bd.holder_nonstrong(k, p.L, geom.sigma_d, sp["gamma"], ld, M, rho)
        if sched.kind == "weak-strong" and p.sigma_f > 0:
            return bd.holder_strong(k, p.L, geom.sigma_d, p.sigma_f, p.sigma_bar, sp["p"], sp["beta"], ld, M, rho)
    return None


def certificate_bounds(trace, x_star=None):
    """Per-iteration gap, sigma_f*xi(z_k, x*), general bound, closed-form bound and distance bound."""
    p = trace.problem
    geom = p.geom
    xs, f_star = _reference(p, x_star)
    rows = []
    max_g = 0.0
    max_step = 0.0
    for st in trace.states:
        ld = geom.linearize_d(st.z, xs)
        max_g = max(max_g, st.g_norm) if not math.isnan(st.g_norm) else max_g
        max_step = max(max_step, st.step_sq) if not math.isnan(st.step_sq) else max_step
        sigma_xi = p.sigma_f * geom.bregman(st.z, xs)
        general = (st.beta * ld + st.C) / st.S
        closed = closed_form_bound(trace, st.k, ld, max_g=max_g, max_step_sq=max_step)
        dist = None
        if p.sigma_f > 0:
            dist = (st.beta * ld + st.C) / (p.sigma_f * geom.sigma_d * st.S)
        rows.append({
            "k": st.k, "f_xhat": st.f_xhat, "gap": st.f_xhat - f_star, "sigma_xi": sigma_xi, "C_k": st.C,
            "S_k": st.S, "beta_k": st.beta, "l_d": ld, "general_bound": general,
            "closed_form_bound": math.nan if closed is None else closed,
            "distance_bound": math.nan if dist is None else dist,
            "dist_sq": min(geom.norm(st.xhat - xs) ** 2, geom.norm(st.z - xs) ** 2),
            "Rk_residual": st.rk_residual, "min_f_x": None,
        })
    best = math.inf
    for st, row in zip(trace.states, rows):
        best = min(best, st.f_x)
        row["min_f_x"] = best - f_star
    return rows


def cgm_aposteriori_bound(trace):
    """Modified CGM: (1/2 Diam^2 sum L lambda_i^2/S_i + sum S_i delta(x_i, xhat_i)) / S_k."""
    p = trace.problem
    diam = p.qset.diameter(p.geom.norm)
    out, a, b = [], 0.0, 0.0
    for st in trace.states:
        a += 0.5 * diam**2 * p.L_at(st.x) * st.lam**2 / st.S
        b += st.S * p.delta(st.x, st.xhat)
        out.append((a + b) / st.S)
    return np.array(out)


def weak_smooth_bound(trace, x_star=None):
    """Hoelder general bound and the closed form for the active weak schedule.

    Raises NonNegativeAlpha when the schedule is too weak for the instance constants.
    """
    p = trace.problem
    cfg = trace.config
    if p.holder is None:
        raise PreconditionError("weak_smooth_bound needs a Hoelder-type problem")
    M, rho = p.holder
    geom = p.geom
    xs, f_star = _reference(p, x_star)
    sched = cfg.schedule
    alphas = bd.alpha_sequence(p.L, geom.sigma_d, p.sigma_f, p.sigma_bar, sched, cfg.K)
    rows = []
    for st in trace.states:
        ld = geom.linearize_d(st.z, xs)
        general = bd.holder_general(sched, alphas, ld, M, rho, st.k)
        closed = closed_form_bound(trace, st.k, ld)
        lhs = st.f_xhat - f_star + p.sigma_f * geom.bregman(st.z, xs)
        rows.append({"k": st.k, "lhs": lhs, "general_bound": general,
                     "closed_form_bound": math.nan if closed is None else closed, "alpha": alphas[st.k]})
    return rows


def property_report(trace, probes=100, rng=None):
    """Check the auxiliary-function properties on a trace recorded with track_properties."""
    p = trace.problem
    if trace.states and trace.states[0].phi is None:
        raise PreconditionError("trace was recorded without track_properties")
    rng = np.random.default_rng(trace.config.seed) if rng is None else rng
    pts = [p.qset.sample(rng, max(1, probes - probes // 4 - 1))]
    its = [st.xhat for st in trace.states] + [st.z for st in trace.states]
    idx = rng.choice(len(its), size=min(len(its), probes // 4), replace=False)
    pts.append(np.array([its[i] for i in idx]))
    if p.x_star is not None:
        pts.append(np.asarray(p.x_star, dtype=float)[None, :])
    P = np.vstack(pts)[:probes]
    recs = [SimpleNamespace(lam=s.lam, beta_prev=s.beta_prev, beta=s.beta, S_prev=s.S_prev, S=s.S, x=s.x,
                            model=s.model, phi=s.phi, psi_aux=s.psi_aux, z=s.z, w=s.w, min_phi=s.min_phi,
                            min_psi=s.min_psi) for s in trace.states]
    return check_properties(recs, p.geom, p.sigma_f, P, psi=p.psi)
