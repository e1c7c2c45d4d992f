"""Acceptance suite: ten self-contained checks with worst-case residuals.

Each ``criterion_N`` builds its own seeded fixtures and returns a dict with
keys id, name, passed, worst, detail and seconds. ``quick=True`` shrinks the
horizons and instance counts for smoke runs; the tolerances never change.
"""
import math
import time

import numpy as np

from . import engine as eng
from . import geometry as geo
from . import problems as pb
from . import schedules as sch
from .errors import DegenerateBeta, DegenerateC0, NonNegativeAlpha, RangeViolation, Unbounded

REL_TOL = 1e-8
PROP_TOL = 1e-9


def _result(cid, name, passed, worst, detail, t0):
    return {"id": cid, "name": name, "passed": bool(passed), "worst": float(worst), "detail": detail,
            "seconds": time.perf_counter() - t0}


def _excess(lhs, rhs):
    """Scaled one-sided violation; positive means lhs exceeds rhs beyond rounding."""
    return (lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def _cfg(cls, variant, model, sched, K, **kw):
    kw.setdefault("strict", False)
    return eng.RunConfig(problem_class=cls, variant=variant, model=model, schedule=sched, K=K, **kw)


def _nsp_instance(seed, n=20, sigma=1.0, **kw):
    return pb.pwl_strong(n, 10, sigma, np.random.default_rng(seed), **kw).nsp()


def _sp_instance(seed, n=10, L=5.0, sigma=0.5, **kw):
    return pb.quadratic(n, L, sigma, np.random.default_rng(seed), feasible={"kind": "box"}, **kw).sp()


def _sp_schedule(p, variant, K):
    fn = sch.classical_structured if variant == "classical" else sch.modified_structured
    return fn(p.L, p.geom.sigma_d, p.sigma_f, p.sigma_bar, K)


SHIPPED = ([("NSP", v, m) for v in eng.VARIANTS for m in ("extended-md", "dual-averaging", "mixed")]
           + [("SP", v, m) for v in eng.VARIANTS for m in ("extended-md", "dual-averaging", "hybrid")])


def _run_shipped(cls, variant, model, seed, K, ck_factor=1.0, delta=0.0):
    if cls == "NSP":
        p = _nsp_instance(seed)
        sched = sch.simple_averaging(K)
    else:
        p = _sp_instance(seed)
        if delta:
            p = _inexact(p, delta, seed)
        sched = _sp_schedule(p, variant, K)
    tr = eng.run(_cfg(cls, variant, model, sched, K, ck_factor=ck_factor), p)
    worst = -math.inf
    for st in tr.states:
        worst = max(worst, st.rk_residual, st.rk2_residual if st.rk2_residual is not None else -math.inf)
    return worst


def criterion_1(quick=False):
    """The certificate relation over the twelve shipped configurations, plus a mutation self-test."""
    t0 = time.perf_counter()
    K, seeds = (100, range(2)) if quick else (500, range(5))
    worst, per = -math.inf, {}
    for cls, variant, model in SHIPPED:
        w = max(_run_shipped(cls, variant, model, s, K) for s in seeds)
        per[f"{cls}/{variant}/{model}"] = w
        worst = max(worst, w)
    elapsed = time.perf_counter() - t0
    # an accumulator that drops its increments must be caught; the tuned structured
    # schedules zero the quadratic part of C_k, so the SP mutant runs on an inexact oracle
    mutated = {f"{cls}/{v}": _run_shipped(cls, v, "extended-md", 0, 50, ck_factor=0.0,
                                          delta=1e-2 if cls == "SP" else 0.0)
               for cls in ("NSP", "SP") for v in eng.VARIANTS}
    caught = all(w > REL_TOL for w in mutated.values())
    passed = worst <= REL_TOL and elapsed <= 60.0 and caught
    return _result(1, "certificate relation on shipped configurations", passed, worst,
                   {"per_config": per, "runtime_s": elapsed, "mutation_residuals": mutated,
                    "mutation_caught": caught}, t0)


def criterion_2(quick=False):
    """Properties of the auxiliary functions at 100 probe points per iteration."""
    t0 = time.perf_counter()
    K = 20 if quick else 50
    worst_all, per = math.inf, {}
    cases = [("SP", m) for m in ("extended-md", "dual-averaging", "hybrid")]
    cases += [("NSP", m) for m in ("extended-md", "dual-averaging")]
    for cls, model in cases:
        for variant in eng.VARIANTS:
            if cls == "NSP":
                p = _nsp_instance(3, n=8)
                sched = sch.simple_averaging(K)
            else:
                p = _sp_instance(3, n=8)
                sched = _sp_schedule(p, variant, K)
            tr = eng.run(_cfg(cls, variant, model, sched, K, track_properties=True), p)
            rep = eng.property_report(tr, probes=100, rng=np.random.default_rng(11))
            w = min(rep.worst.values())
            per[f"{cls}/{variant}/{model}"] = rep.worst
            worst_all = min(worst_all, w)
    return _result(2, "auxiliary-function properties", worst_all >= -PROP_TOL, worst_all, per, t0)


def _bound_excess(rows, start=0):
    worst = -math.inf
    for r in rows[start:]:
        b = r["closed_form_bound"]
        if math.isnan(b):
            return math.inf
        worst = max(worst, _excess(r["gap"] + r["sigma_xi"], b))
    return worst


def criterion_3(quick=False):
    """Nonsmooth strongly convex bounds for both variants."""
    t0 = time.perf_counter()
    K = 200 if quick else 1000
    worst, per = -math.inf, {}
    for sigma in (0.1, 1.0):
        for n in ((20,) if quick else (20, 100)):
            p = _nsp_instance(7 + n, n=n, sigma=sigma, f_offset=0.0)
            for variant in eng.VARIANTS:
                tr = eng.run(_cfg("NSP", variant, "extended-md", sch.simple_averaging(K), K), p)
                rows = eng.certificate_bounds(tr)
                w = _bound_excess(rows, start=0 if variant == "classical" else 1)
                per[f"sigma={sigma}/n={n}/{variant}"] = w
                worst = max(worst, w)
    return _result(3, "nonsmooth strongly convex bounds", worst <= REL_TOL, worst, per, t0)


def _inexact(p, delta, seed):
    return pb.make_inexact_oracle_adapter(p, delta, p.L, p.sigma_f, p.geom, seed=seed)


def _structured_bound_check(variant, K, seeds, deltas):
    worst, per = -math.inf, {}
    for seed in seeds:
        for delta in deltas:
            p = _sp_instance(seed, f_offset=0.0)
            if delta:
                p = _inexact(p, delta, seed)
            sched = _sp_schedule(p, variant, K)
            for model in ("extended-md", "dual-averaging", "hybrid"):
                tr = eng.run(_cfg("SP", variant, model, sched, K, check_relations=False), p)
                w = _bound_excess(eng.certificate_bounds(tr))
                per[f"seed={seed}/delta={delta}/{model}"] = w
                worst = max(worst, w)
    return worst, per


def criterion_4(quick=False):
    """Smooth strongly convex quadratics under the classical schedule, delta in {0, 1e-3}."""
    t0 = time.perf_counter()
    K = 200 if quick else 1000
    worst, per = _structured_bound_check("classical", K, range(2), (0.0, 1e-3))
    return _result(4, "structured classical bound", worst <= REL_TOL, worst, per, t0)


def _slope(ks, gaps):
    return float(np.polyfit(np.log(ks), np.log(gaps), 1)[0])


def criterion_5(quick=False):
    """Modified schedule bound, plus the O(1/k^2) decay without strong convexity."""
    t0 = time.perf_counter()
    K = 200 if quick else 1000
    worst, per = _structured_bound_check("modified", K, range(2), (0.0, 1e-3))
    # sigma_f = 0: fit log gap against log k on [K/10, K]
    p = pb.quadratic(10, 5.0, 0.0, np.random.default_rng(21), feasible={"kind": "box"}, f_offset=0.0,
                     x_star=np.full(10, 0.8)).sp()
    sched = sch.modified_structured(p.L, p.geom.sigma_d, 0.0, 0.0, K)
    tr = eng.run(_cfg("SP", "modified", "dual-averaging", sched, K, check_relations=False), p)
    gaps = tr.column("f_xhat") - p.f_star
    ks = np.arange(K // 10, K + 1)
    slope = _slope(ks, np.maximum(gaps[ks], 1e-300))
    per["slope"] = slope
    passed = worst <= REL_TOL and slope <= -1.9
    return _result(5, "structured modified bound and quadratic decay", passed, worst, per, t0)


def criterion_6(quick=False):
    """Modified conditional gradient: smooth and weakly smooth bounds."""
    t0 = time.perf_counter()
    K = 200 if quick else 1000
    n = 10
    worst, per = -math.inf, {}
    smooth = {
        "simplex": pb.quadratic(n, 4.0, 0.0, np.random.default_rng(31), f_offset=0.0,
                                geometry={"center": np.full(n, 1.0 / n)}, feasible={"kind": "simplex"}).sp(),
    }
    # optimum of the unconstrained quadratic outside the box; strong convexity is
    # hidden from the method but makes the reference minimizer converge linearly
    q = pb.quadratic(n, 4.0, 1.0, np.random.default_rng(32), f_offset=0.0, feasible={"kind": "box"},
                     x_star=np.r_[np.full(n // 2, 1.5), np.zeros(n - n // 2)]).sp()
    p = pb.make_smooth_adapter(q.f, q.grad, q.L, 0.0, q.geom, q.qset, name="quadratic-box")
    p.x_star, p.f_star = _box_reference(p)
    smooth["box"] = p
    smooth["box+inexact"] = _inexact(p, 1e-3, 5)
    for name, p in smooth.items():
        tr = eng.run_cgm(_cfg("CGM", "modified", "dual-averaging", sch.simple_averaging(K), K,
                              check_relations=False), p)
        rows = eng.certificate_bounds(tr)
        w = max(_excess(r["gap"], r["closed_form_bound"]) for r in rows)
        per[f"smooth/{name}"] = w
        worst = max(worst, w)
    for rho in (1.25, 1.5, 1.75):
        inst = pb.holder(n, rho, np.random.default_rng(40 + int(100 * rho)), f_offset=0.0,
                         n_pairs=2000 if quick else 10_000)
        p = inst.sp()
        tr = eng.run_cgm(_cfg("CGM", "modified", "dual-averaging", sch.simple_averaging(K), K,
                              check_relations=False), p)
        rows = eng.certificate_bounds(tr)
        w = max(_excess(r["gap"], r["closed_form_bound"]) for r in rows)
        per[f"holder/rho={rho}"] = w
        worst = max(worst, w)
    return _result(6, "conditional gradient bounds", worst <= REL_TOL, worst, per, t0)


def _box_reference(p, K=5000):
    """Projected gradient run to machine precision on a strongly convex problem."""
    x = np.array(p.geom.center, dtype=float)
    for _ in range(K):
        x = p.qset.project(x - p.grad(x) / p.L)
    return x, p.f(x)


def criterion_7(quick=False):
    """Weakly smooth PGM: gamma*-tuned schedule and the three p-regimes."""
    t0 = time.perf_counter()
    K = 200 if quick else 1000
    n, rho = 10, 1.5
    worst, per = -math.inf, {}
    n_pairs = 2000 if quick else 10_000
    # non-strongly-convex, gamma tuned from the estimated constant
    inst = pb.holder(n, rho, np.random.default_rng(51), f_offset=0.0, L_extra=1.0, n_pairs=n_pairs)
    p = inst.sp()
    M, _ = p.holder
    gamma = sch.tune_gamma(M, p.geom.sigma_d, rho, p.geom.d(p.x_star))
    configs = [("nonstrong", p, sch.weak_nonstrong(p.L, p.geom.sigma_d, rho, gamma, K))]
    inst = pb.holder(n, rho, np.random.default_rng(52), mu=0.5, L_extra=1.0, f_offset=0.0, n_pairs=n_pairs)
    ps = inst.sp()
    for pp in (1, 4, 5):
        regime = sch.p_regime(pp, rho)
        configs.append((f"p={pp}/{regime}", ps,
                        sch.weak_strong(ps.L, ps.geom.sigma_d, pp, 0.0, K, sigma_bar=ps.sigma_bar)))
    regimes = set()
    for name, prob, sched in configs:
        tr = eng.run(_cfg("SP", "modified", "dual-averaging", sched, K, check_relations=False), prob)
        try:
            rows = eng.weak_smooth_bound(tr)
        except NonNegativeAlpha as exc:
            per[name] = str(exc)
            worst = math.inf
            continue
        w = max(max(_excess(r["lhs"], r["general_bound"]), _excess(r["lhs"], r["closed_form_bound"]))
                for r in rows)
        if any(math.isnan(r["closed_form_bound"]) for r in rows):
            w = math.inf
        per[name] = w
        worst = max(worst, w)
        if "/" in name:
            regimes.add(name.split("/")[1])
    passed = worst <= REL_TOL and regimes == {"above", "equal", "below"}
    per["regimes"] = sorted(regimes)
    return _result(7, "weakly smooth bounds", passed, worst, per, t0)


def criterion_8(quick=False):
    """Growth inequalities for S_k, k <= 10^4, on the r grid, within one second."""
    t0 = time.perf_counter()
    K = 10_000
    worst, per = -math.inf, {}
    for r in (0.0, 1e-2, 1e-1, 1.0, 10.0):
        res = sch.validate_growth_bounds(r, K)
        per[f"r={r}"] = res
        worst = max(worst, max(res.values()))
    elapsed = time.perf_counter() - t0
    per["runtime_s"] = elapsed
    return _result(8, "growth inequalities", worst <= 1e-12 and elapsed <= 1.0, worst, per, t0)


def _pgm_reference(x0, step, K):
    xs = [x0]
    for k in range(K + 1):
        xs.append(step(k, xs[-1]))
    return np.array(xs[1:])


def criterion_9(quick=False):
    """Subproblem rewrites reproduce the engine iterates."""
    t0 = time.perf_counter()
    K = 100 if quick else 300
    per = {}
    # (a) sigma_f = 0, constant beta: projected subgradient with step lambda/beta
    p = _nsp_instance(61, sigma=0.0)
    beta = 10.0
    sched = sch.custom_table(np.ones(K + 1), np.full(K + 2, beta))
    tr = eng.run(_cfg("NSP", "classical", "extended-md", sched, K), p)
    ref = _pgm_reference(p.geom.center, lambda k, x: p.qset.project(x - p.g(x) / beta), K)
    per["a"] = float(np.max(np.abs(tr.column_stack("z") - ref)))
    # (b) step 2/(sigma_f (k+2)) in euclidean and entropic form
    sigma = 0.5
    p = _nsp_instance(62, sigma=sigma)
    tr = eng.run(_cfg("NSP", "classical", "extended-md", sch.simple_averaging(K), K), p)
    ref = _pgm_reference(p.geom.center,
                         lambda k, x: p.qset.project(x - 2.0 / (sigma * (k + 2)) * p.g(x)), K)
    per["b_euclidean"] = float(np.max(np.abs(tr.column_stack("z") - ref)))
    p = _nsp_instance(63, n=10, sigma=sigma, geometry={"prox": "entropy"})
    tr = eng.run(_cfg("NSP", "classical", "extended-md", sch.simple_averaging(K), K), p)

    def mirror(k, x):
        v = np.log(x) - 2.0 / (sigma * (k + 2)) * p.g(x)
        v = np.exp(v - v.max())
        return v / v.sum()

    ref = _pgm_reference(p.geom.center, mirror, K)
    per["b_entropy"] = float(np.max(np.abs(tr.column_stack("z") - ref)))
    # (c) classical structured schedule: gradient step 1/L then project
    p = _sp_instance(64)
    sched = sch.classical_structured(p.L, p.geom.sigma_d, p.sigma_f, p.sigma_bar, K)
    tr = eng.run(_cfg("SP", "classical", "extended-md", sched, K), p)
    ref = _pgm_reference(p.geom.center, lambda k, x: p.qset.project(x - p.grad(x) / p.L), K)
    per["c"] = float(np.max(np.abs(tr.column_stack("z") - ref)))
    passed = per["a"] <= 1e-10 and max(per["b_euclidean"], per["b_entropy"], per["c"]) <= 1e-12
    return _result(9, "reduction equivalence", passed, max(per.values()), per, t0)


def _raises(fn, exc):
    try:
        fn()
    except exc as e:
        return type(e).__name__
    except Exception as e:  # wrong type counts as a failure
        return f"wrong:{type(e).__name__}"
    return "none"


def criterion_10(quick=False):
    """Error contracts, each triggered twice to confirm determinism."""
    t0 = time.perf_counter()
    p0 = _nsp_instance(71, n=5, sigma=0.0)
    cases = {
        "DegenerateC0": (lambda: eng.run(_cfg("NSP", "classical", "extended-md", sch.simple_averaging(5), 5),
                                         p0), DegenerateC0),
        "Unbounded": (lambda: geo.lmo(geo.unconstrained(3), np.ones(3)), Unbounded),
        "DegenerateBeta": (lambda: sch.classical_structured(2.0, 1.0, 2.0, 2.0, 5), DegenerateBeta),
        "RangeViolation(nonstrong)": (lambda: sch.weak_nonstrong(1.0, 1.0, 2.0, 1.0, 5), RangeViolation),
        "RangeViolation(threshold)": (lambda: sch.p_threshold(2.0), RangeViolation),
    }
    per = {}
    ok = True
    for name, (fn, exc) in cases.items():
        got = [_raises(fn, exc) for _ in range(2)]
        per[name] = got
        ok &= got[0] == got[1] == exc.__name__
    return _result(10, "error contracts", ok, 0.0 if ok else 1.0, per, t0)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def run_all(quick=False, only=None):
    out = []
    for fn in CRITERIA:
        cid = int(fn.__name__.rsplit("_", 1)[1])
        if only is None or cid in only:
            out.append(fn(quick=quick))
    return out


def format_line(res):
    return f"criterion {res['id']:>2} {'PASS' if res['passed'] else 'FAIL'}  worst={res['worst']:.3e}  " \
           f"{res['seconds']:.2f}s  {res['name']}"
