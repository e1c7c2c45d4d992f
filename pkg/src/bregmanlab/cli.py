"""Experiment harness: generate problems, sweep methods, verify, report.

    bregmanlab gen --config cfg.json --out problems/
    bregmanlab run --config cfg.json --problems problems/ --out runs/ [--strict] [--timing]
    bregmanlab verify [--quick] --out report/
    bregmanlab report --in runs/ --out summary.json

Exit codes: 0 ok, 1 usage, 2 validation, 3 invariant violation (strict), 4 IO.
"""
import argparse
import base64
from concurrent.futures import ThreadPoolExecutor
import csv
import io
import itertools
import json
import logging
import math
import os
from pathlib import Path
import sys
import time

import jsonschema
import numpy as np

from . import acceptance
from . import engine as eng
from . import problems as pb
from . import schedules as sch
from .errors import ConfigError, FrameworkError, InvariantViolation

log = logging.getLogger("bregmanlab")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_INVARIANT, EXIT_IO = 0, 1, 2, 3, 4
CSV_SCHEMA = 1
CSV_COLUMNS = ["experiment_id", "k", "f_xhat", "gap", "sigma_xi", "C_k", "S_k", "beta_k", "general_bound",
               "closed_form_bound", "Rk_residual", "wall_time_ns"]

_str_or_list = {"oneOf": [{"type": "string"}, {"type": "array", "items": {"type": "string"}, "minItems": 1}]}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["problems"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "problems": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "family", "dim"],
                "properties": {
                    "id": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "family": {"enum": ["quadratic", "pwl-strong", "holder", "lasso"]},
                    "dim": {"type": "integer", "minimum": 1},
                    "seed": {"type": "integer", "minimum": 0},
                    "L": {"type": "number", "exclusiveMinimum": 0},
                    "sigma": {"type": "number", "minimum": 0},
                    "sigma_bar": {"type": "number", "minimum": 0},
                    "f_offset": {"type": "number"},
                    "pieces": {"type": "integer", "minimum": 1},
                    "rho": {"type": "number"},
                    "rows": {"type": "integer", "minimum": 1},
                    "mu": {"type": "number", "minimum": 0},
                    "L_extra": {"type": "number", "minimum": 0},
                    "n_pairs": {"type": "integer", "minimum": 1},
                    "m": {"type": "integer", "minimum": 1},
                    "tau": {"type": "number", "minimum": 0},
                    "geometry": {"type": "object"},
                    "feasible": {"type": "object"},
                    "inexact": {
                        "type": "object", "required": ["delta"],
                        "properties": {"delta": {"type": "number", "minimum": 0},
                                       "seed": {"type": "integer", "minimum": 0}},
                    },
                },
            },
        },
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "problem_class", "variant", "model", "schedule", "K"],
                "properties": {
                    "id": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "problem_class": {"enum": ["NSP", "SP", "CGM"]},
                    "variant": _str_or_list,
                    "model": _str_or_list,
                    "K": {"type": "integer", "minimum": 0, "maximum": 1_000_000},
                    "problems": {"type": "array", "items": {"type": "string"}},
                    "tol": {"type": "number", "exclusiveMinimum": 0},
                    "schedule": {
                        "type": "object", "required": ["kind"],
                        "properties": {"kind": {"enum": ["simple-averaging", "classical-structured",
                                                         "modified-structured", "weak-nonstrong",
                                                         "weak-strong"]}},
                    },
                },
            },
        },
    },
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# serialization


def encode_array(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"__f64__": base64.b64encode(a.tobytes()).decode("ascii"), "shape": list(a.shape)}


def decode_array(obj):
    raw = base64.b64decode(obj["__f64__"])
    return np.frombuffer(raw, dtype="<f8").reshape(obj["shape"]).astype(float)


def _encode(value):
    if isinstance(value, np.ndarray):
        return encode_array(value)
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _decode(value):
    if isinstance(value, dict):
        if "__f64__" in value:
            return decode_array(value)
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{path}: {exc.message}") from exc
    ids = [p["id"] for p in cfg["problems"]]
    if len(set(ids)) != len(ids):
        raise ConfigError("problem ids must be unique")
    for run in cfg.get("runs", []):
        for pid in run.get("problems", []):
            if pid not in ids:
                raise ConfigError(f"run {run['id']} references unknown problem {pid!r}")
        for v in _as_list(run["variant"]):
            if v not in eng.VARIANTS:
                raise ConfigError(f"run {run['id']}: unknown variant {v!r}")
        for m in _as_list(run["model"]):
            if m not in eng.MODELS:
                raise ConfigError(f"run {run['id']}: unknown model {m!r}")
    return cfg


def _as_list(v):
    return list(v) if isinstance(v, list) else [v]


# ---------------------------------------------------------------------------
# gen


def generate(spec, base_seed):
    n = spec["dim"]
    rng = np.random.default_rng([base_seed, spec.get("seed", 0)])
    geometry, feasible = spec.get("geometry"), spec.get("feasible")
    fam = spec["family"]
    if fam == "quadratic":
        return pb.quadratic(n, spec.get("L", 10.0), spec.get("sigma", 1.0), rng, geometry=geometry,
                            feasible=feasible, sigma_bar=spec.get("sigma_bar"), f_offset=spec.get("f_offset"))
    if fam == "pwl-strong":
        return pb.pwl_strong(n, spec.get("pieces", 20), spec.get("sigma", 1.0), rng, geometry=geometry,
                             feasible=feasible, f_offset=spec.get("f_offset", 1.0))
    if fam == "holder":
        return pb.holder(n, spec.get("rho", 1.5), rng, rows=spec.get("rows"), mu=spec.get("mu", 0.0),
                         L_extra=spec.get("L_extra"), geometry=geometry, feasible=feasible,
                         f_offset=spec.get("f_offset", 1.0), n_pairs=spec.get("n_pairs", 10_000))
    return pb.lasso(spec.get("m", 2 * n), n, spec.get("tau", 0.1), rng, feasible=feasible)


def instance_document(spec, inst):
    return {"schema": CSV_SCHEMA, "id": spec["id"], "family": inst.family, "dim": spec["dim"],
            "geometry": _encode(spec.get("geometry") or {}), "feasible": _encode(spec.get("feasible") or {}),
            "inexact": spec.get("inexact"), "data": _encode(inst.data)}


_BUILDERS = {"quadratic": pb.build_quadratic, "pwl-strong": pb.build_pwl_strong,
             "holder": pb.build_holder, "lasso": pb.build_lasso}


def load_instance(doc):
    n = doc["dim"]
    geom_spec = _decode(doc["geometry"])
    fam = doc["family"]
    if fam == "lasso":
        geom = pb.geo.euclidean_geometry(np.zeros(n))
        qset = pb.make_set(_decode(doc["feasible"]) or {"kind": "box", "lower": -2.0, "upper": 2.0}, n)
    else:
        geom = pb.make_geometry(geom_spec, n)
        default = {"kind": "simplex"} if fam == "pwl-strong" and geom.prox == "entropy" else {"kind": "box"}
        if fam == "quadratic":
            default = {}
        qset = pb.make_set(_decode(doc["feasible"]) or default, n)
    return _BUILDERS[fam](_decode(doc["data"]), geom, qset)


def cmd_gen(args):
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.get("seed", 0)
    for spec in cfg["problems"]:
        inst = generate(spec, seed)
        doc = instance_document(spec, inst)
        _write_text(out / f"{spec['id']}.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
        log.info("wrote %s", out / f"{spec['id']}.json")
    return EXIT_OK


def _write_text(path, text):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# run


def problem_for(inst, doc, problem_class):
    p = inst.nsp() if problem_class == "NSP" else inst.sp()
    inexact = doc.get("inexact")
    if inexact and problem_class != "NSP":
        p = pb.make_inexact_oracle_adapter(p, inexact["delta"], p.L, p.sigma_f, p.geom, seed=inexact.get("seed", 0))
    return p


def schedule_for(spec, problem, K):
    kind = spec["kind"]
    sd = problem.geom.sigma_d
    if kind == "simple-averaging":
        return sch.simple_averaging(K, spec.get("beta", 0.0))
    if kind == "classical-structured":
        return sch.classical_structured(problem.L, sd, problem.sigma_f, problem.sigma_bar, K)
    if kind == "modified-structured":
        return sch.modified_structured(problem.L, sd, problem.sigma_f, problem.sigma_bar, K)
    M, rho = problem.holder or (0.0, spec.get("rho", 1.0))
    if kind == "weak-nonstrong":
        gamma = spec.get("gamma", "auto")
        if gamma == "auto":
            gamma = sch.tune_gamma(M, sd, rho, problem.geom.d(problem.x_star))
        return sch.weak_nonstrong(problem.L, sd, rho, gamma, K)
    p = spec.get("p", "auto")
    p = sch.default_p(rho) if p == "auto" else p
    return sch.weak_strong(problem.L, sd, p, spec.get("beta", 0.0), K, sigma_bar=problem.sigma_bar)


def expand_runs(cfg):
    """(experiment id, problem id, run spec, variant, model) in a fixed order."""
    out = []
    all_ids = [p["id"] for p in cfg["problems"]]
    for run in cfg.get("runs", []):
        for pid in run.get("problems", all_ids):
            for variant, model in itertools.product(_as_list(run["variant"]), _as_list(run["model"])):
                out.append((f"{pid}__{run['id']}__{variant}__{model}", pid, run, variant, model))
    return out


def _fmt(v):
    if v is None:
        return "nan"
    return format(float(v), ".17g")


def telemetry_csv(exp_id, trace, times=None):
    buf = io.StringIO()
    buf.write(f"# schema={CSV_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    p = trace.problem
    if p.x_star is not None:
        rows = eng.certificate_bounds(trace)
    else:
        rows = [{"k": st.k, "f_xhat": st.f_xhat, "gap": math.nan, "sigma_xi": math.nan, "C_k": st.C, "S_k": st.S,
                 "beta_k": st.beta, "general_bound": math.nan, "closed_form_bound": math.nan,
                 "Rk_residual": st.rk_residual} for st in trace.states]
    for i, r in enumerate(rows):
        t = 0 if times is None else times[i]
        w.writerow([exp_id, str(r["k"])] + [_fmt(r[c]) for c in CSV_COLUMNS[2:-1]] + [str(int(t))])
    return buf.getvalue()


def execute(job, docs, strict, timing):
    exp_id, pid, run, variant, model = job
    doc = docs[pid]
    inst = load_instance(doc)
    problem = problem_for(inst, doc, run["problem_class"])
    sched = schedule_for(run["schedule"], problem, run["K"])
    cfg = eng.RunConfig(problem_class=run["problem_class"], variant=variant, model=model, schedule=sched,
                        K=run["K"], strict=strict, tol=run.get("tol", 1e-8))
    runner_cls = eng.NonsmoothRunner if cfg.problem_class == "NSP" else eng.StructuredRunner
    runner = runner_cls(cfg, problem)
    trace = eng.Trace(cfg, problem)
    times = []
    t0 = time.perf_counter_ns()
    for st in runner.iterate():
        times.append(time.perf_counter_ns() - t0)
        trace.states.append(st)
    trace.violations = list(runner.violations)
    return telemetry_csv(exp_id, trace, times if timing else None), trace.violations


def _threads():
    raw = os.environ.get("LAB_THREADS", "")
    try:
        n = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"LAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def cmd_run(args):
    cfg = load_config(args.config)
    pdir, out = Path(args.problems), Path(args.out)
    docs = {}
    for spec in cfg["problems"]:
        path = pdir / f"{spec['id']}.json"
        with open(path, encoding="utf-8") as fh:
            docs[spec["id"]] = json.load(fh)
    out.mkdir(parents=True, exist_ok=True)
    jobs = expand_runs(cfg)
    failures = []
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        futures = [pool.submit(execute, job, docs, args.strict, args.timing) for job in jobs]
        for job, fut in zip(jobs, futures):
            try:
                text, violations = fut.result()
            except InvariantViolation as exc:
                failures.append((job[0], exc))
                continue
            except FrameworkError as exc:
                raise ConfigError(f"run {job[0]}: {exc}") from exc
            _write_text(out / f"{job[0]}.csv", text)
            if violations:
                log.warning("%s: %d relation violations", job[0], len(violations))
    if failures:
        for exp_id, exc in failures:
            print(f"{exp_id}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify / report


def cmd_verify(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = acceptance.run_all(quick=args.quick)
    for r in results:
        print(acceptance.format_line(r))
    doc = {"quick": bool(args.quick), "passed": all(r["passed"] for r in results), "criteria": results}
    _write_text(out / "acceptance.json", json.dumps(doc, indent=1, default=_json_default) + "\n")
    return EXIT_OK


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def read_telemetry(path):
    with open(path, encoding="utf-8", newline="") as fh:
        head = fh.readline().strip()
        if head != f"# schema={CSV_SCHEMA}":
            raise ConfigError(f"{path}: unsupported telemetry header {head!r}")
        rows = list(csv.DictReader(fh))
    return rows


def summarize(rows, tol=1e-8):
    def col(name):
        return np.array([float(r[name]) for r in rows])

    gap, sx = col("gap"), col("sigma_xi")
    lhs = gap + sx
    out = {"iterations": len(rows), "final_gap": float(gap[-1]) if rows else math.nan,
           "max_Rk_residual": float(np.max(col("Rk_residual"))) if rows else math.nan}
    for key in ("general_bound", "closed_form_bound"):
        b = col(key)
        ok = ~np.isnan(b) & ~np.isnan(lhs)
        scale = np.maximum(1.0, np.maximum(np.abs(lhs[ok]), np.abs(b[ok])))
        out[f"{key}_checked"] = int(ok.sum())
        out[f"{key}_violations"] = int(np.sum(lhs[ok] - b[ok] > tol * scale))
    return out


def cmd_report(args):
    src = Path(args.inp)
    files = sorted(src.glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"no telemetry CSV files in {src}")
    runs = {f.stem: summarize(read_telemetry(f)) for f in files}
    total = sum(r["general_bound_violations"] + r["closed_form_bound_violations"] for r in runs.values())
    doc = {"runs": runs, "bound_violations": total}
    out = Path(args.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    _write_text(out, json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def build_parser():
    ap = _Parser(prog="bregmanlab", description="Bregman-framework first-order methods: experiments and checks.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    g = sub.add_parser("gen", help="generate problem instances")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    r = sub.add_parser("run", help="run method sweeps and write telemetry")
    r.add_argument("--config", required=True)
    r.add_argument("--problems", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--strict", action="store_true", help="abort on the first relation violation")
    r.add_argument("--timing", action="store_true", help="record wall time per iteration (not reproducible)")
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--quick", action="store_true")
    v.add_argument("--out", required=True)
    p = sub.add_parser("report", help="summarize telemetry")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    return ap


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "verify": cmd_verify, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except (ConfigError, jsonschema.ValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FrameworkError as exc:
        print(f"validation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
