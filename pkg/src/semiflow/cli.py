"""Config-driven command line front end.

``semiflow <subcommand> --config run.json [--output-dir DIR] [--seed N]``

Subcommands select pipeline stages:

=============  ==================================================
scan           assumption scans (C1, C2, Dolgopyat, rapid, cancel)
ledger         scans plus the explicit constants ledger
decompose      pole table, projectors and path agreement
reconstruct    truncated Bromwich inversion against exp(tZ)
verify         everything above plus the decay checks
=============  ==================================================

Exit codes: 0 when every check passes, 2 when a check fails (the report is
still written), 1 for configuration or I/O errors.
"""

import argparse
import copy
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .exceptions import ConfigError, SemiflowError
from .models import build_model, evolve
from .spectral import ContourSpec, bromwich_reconstruct, decompose
from .verification import (
    AssumptionParams,
    compute_ledger,
    dolgopyat_scan,
    estimate_c1,
    estimate_c2,
    exponential_decay_check,
    neumann_norm_scan,
    oscillatory_bound_check,
    rapid_decay_check,
    rapid_scan,
    required_q,
    shifted_resolvent_scan,
)

log = logging.getLogger("semiflow")

SCHEMA_VERSION = 1
COMMANDS = ("decompose", "verify", "ledger", "reconstruct", "scan")

_GRID = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 2},
        {
            "type": "object",
            "required": ["min", "max", "count"],
            "properties": {
                "min": {"type": "number"},
                "max": {"type": "number"},
                "count": {"type": "integer"},
                "spacing": {"type": "string"},
            },
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "semiflow run configuration",
    "type": "object",
    "required": ["model", "params"],
    "properties": {
        "model": {"type": "object", "required": ["type"]},
        "pipeline": {"enum": ["exponential", "rapid"]},
        "params": {
            "type": "object",
            "required": ["lambda"],
            "properties": {k: {"type": "number"} for k in (
                "lambda", "alpha", "beta", "gamma", "ell", "C12", "epsilon")},
            "additionalProperties": False,
        },
        "contour": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["shifted-line", "curved-rapid"]},
                "nodes": {"type": "integer", "minimum": 3},
                "b_cut": {"type": "number", "exclusiveMinimum": 0},
                "step": {"type": "number", "exclusiveMinimum": 0},
                "regularization": {"type": "integer", "minimum": 0},
                "bromwich_a": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "grids": {
            "type": "object",
            "properties": {k: _GRID for k in ("t", "b", "decay_t", "check_t")},
            "additionalProperties": False,
        },
        "probes": {"type": "array", "items": {"type": "object"}},
        "rapid": {
            "type": "object",
            "properties": {"p": {"type": "integer", "minimum": 1}, "q": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
    "additionalProperties": False,
}

DEFAULT_TOLERANCES = {"path_agreement": 1e-6, "reconstruction": 1e-8, "bromwich": 1e-2}


# ------------------------------------------------------------------ config


def _grid(spec, name, default):
    spec = default if spec is None else spec
    if isinstance(spec, list):
        g = np.asarray(spec, dtype=float)
        if g.size < 2:
            raise ConfigError(f"grids.{name}: count must be >= 2")
        return g
    count = spec["count"]
    spacing = spec.get("spacing", "linear")
    lo, hi = float(spec["min"]), float(spec["max"])
    if count < 2:
        raise ConfigError(f"grids.{name}: count must be >= 2")
    if spacing not in ("linear", "log"):
        raise ConfigError(f"grids.{name}: spacing must be 'linear' or 'log', got {spacing!r}")
    if not hi > lo:
        raise ConfigError(f"grids.{name}: max must exceed min")
    if spacing == "log":
        if lo <= 0:
            raise ConfigError(f"grids.{name}: log spacing needs min > 0")
        return np.logspace(math.log10(lo), math.log10(hi), count)
    return np.linspace(lo, hi, count)


def load_config(path):
    """Read and validate a JSON run configuration."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field {where}: {exc.message}") from None
    tol = cfg.get("tolerances", {})
    if any(not v > 0 for v in tol.values()):
        raise ConfigError("tolerances must be > 0")
    for name, g in cfg.get("grids", {}).items():
        _grid(g, name, None)
    p = cfg["params"]
    try:
        _params(p)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None


def _params(p):
    return AssumptionParams(
        lam=p["lambda"], alpha=p.get("alpha", 1.0), beta=p.get("beta", 2.0),
        gamma=p.get("gamma", 0.5), ell=p.get("ell"), C12=p.get("C12"), epsilon=p.get("epsilon"))


# ------------------------------------------------------------------ report


def _clean(x):
    """Convert to JSON-native values: complex as [re, im], non-finite floats as strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(float(x.real)), _clean(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


@dataclass
class RunReport:
    command: str
    config: dict
    results: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self):
        return all(self.checks.values())

    def normalize(self):
        """Replace contents by their JSON-native form so that serialization round-trips."""
        self.config = _clean(self.config)
        self.results = _clean(self.results)
        self.checks = {k: bool(v) for k, v in self.checks.items()}
        self.timing = _clean(self.timing)
        return self

    def to_dict(self):
        d = _clean(asdict(self))
        d["summary"] = {"passed": self.passed, "failed_checks": sorted(k for k, v in self.checks.items() if not v)}
        return d

    def serialize(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def parse(cls, text):
        d = json.loads(text)
        d.pop("summary", None)
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls(**d)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([format(float(v), ".17g") for v in row])


# ------------------------------------------------------------------ stages


class Runner:
    def __init__(self, cfg, out_dir, seed):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.seed = seed
        self.model = build_model(self._model_spec())
        self.params = _params(cfg["params"])
        self.pipeline = cfg.get("pipeline", "exponential")
        self.tol = {**DEFAULT_TOLERANCES, **cfg.get("tolerances", {})}
        grids = cfg.get("grids", {})
        beta = self.params.beta
        self.t_grid = _grid(grids.get("t"), "t", {"min": 1e-4, "max": 100.0, "count": 300, "spacing": "log"})
        self.b_grid = _grid(grids.get("b"), "b", {"min": beta, "max": 1e3, "count": 400, "spacing": "log"})
        self.decay_t = _grid(grids.get("decay_t"), "decay_t", {"min": 0.1, "max": 50.0, "count": 40, "spacing": "log"})
        self.check_t = _grid(grids.get("check_t"), "check_t", [1.0, 5.0, 10.0])
        self.report = RunReport("", cfg)
        self.decomposition = None

    def _model_spec(self):
        spec = dict(self.cfg["model"])
        if spec.get("type") == "random-stable" and "seed" not in spec:
            spec["seed"] = self.seed
        return spec

    def _timed(self, name, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        finally:
            self.report.timing[name] = time.perf_counter() - t0

    def _fail(self, stage, exc):
        self.report.results.setdefault(stage, {})["error"] = f"{type(exc).__name__}: {exc}"
        self.report.checks[f"{stage}.completed"] = False
        log.warning("%s stage failed: %s", stage, exc)

    def probes(self):
        n = self.model.dimension
        rng = np.random.default_rng(self.seed)
        out = []
        for k, spec in enumerate(self.cfg.get("probes", [{"random": {}}])):
            if "explicit" in spec:
                v = np.array([complex(x) if not isinstance(x, list) else complex(*x) for x in spec["explicit"]])
                if v.shape != (n,):
                    raise ConfigError(f"probes.{k}.explicit must have length {n}")
            elif "random" in spec:
                r = spec["random"] or {}
                g = np.random.default_rng(r["seed"]) if "seed" in r else rng
                v = g.standard_normal(n).astype(complex)
            elif "eigvec" in spec:
                idx = int(spec["eigvec"])
                if not 0 <= idx < n:
                    raise ConfigError(f"probes.{k}.eigvec index out of range")
                v = self.model.eigenvectors[:, idx].copy()
            else:
                raise ConfigError(f"probes.{k}: expected one of explicit, random, eigvec")
            out.append(v)
        return out

    # scans
    def scan(self):
        m, p, res = self.model, self.params, {}
        t0 = np.concatenate([[0.0], self.t_grid])
        c1 = estimate_c1(m, t0)
        c2 = estimate_c2(m, self.t_grid)
        res["c1"] = {"value": c1.value, "t_at_max": c1.t_at_max, "bounded": c1.bounded}
        res["c2"] = {"value": c2.value, "t_at_max": c2.t_at_max, "analytic_bound": c2.analytic_bound}
        write_csv(self.out / "scan_c1.csv", ["t", "norm_B_to_B"], zip(t0, c1.norms))
        write_csv(self.out / "scan_c2.csv", ["t", "ratio_B_to_A"], zip(self.t_grid, c2.ratios))
        self.report.checks["scan.c1_bounded"] = c1.bounded
        self.report.checks["scan.c2_below_analytic"] = c2.value <= c2.analytic_bound * (1 + 1e-9)
        p = p.updated(C1=c1.value, C2=c2.value)
        if self.pipeline == "exponential":
            dol = dolgopyat_scan(m, p, self.b_grid)
            res["dolgopyat"] = {"C_D": dol.C_D, "passed": dol.passed, "worst_b": dol.worst_b}
            write_csv(self.out / "scan_dolgopyat.csv", ["b", "n_tilde", "value"],
                      zip(dol.b_grid, dol.n_tilde, dol.values))
            self.report.checks["scan.dolgopyat"] = dol.passed
            p = p.updated(C_D=dol.C_D)
            osc = oscillatory_bound_check(m, p, self.b_grid)
            res["oscillatory"] = {"C4_measured": osc.C4_measured, "C4_ledger": osc.C4_ledger,
                                  "passed": osc.passed}
            write_csv(self.out / "scan_oscillatory.csv", ["b", "scaled_norm_B_to_A"], zip(osc.b_grid, osc.scaled))
            self.report.checks["scan.oscillatory"] = osc.passed
        if p.C12 is not None:
            rs = rapid_scan(m, p, self.b_grid)
            res["rapid"] = {"C10": rs.C10, "C11_fit": rs.C11_fit, "passed": rs.passed,
                            "violations": rs.violations}
            if rs.norms is not None:
                write_csv(self.out / "scan_rapid.csv", ["b", "norm_B_to_B"], zip(rs.b_grid, rs.norms))
            if self.pipeline == "rapid":
                self.report.checks["scan.rapid"] = rs.passed
            if rs.passed:
                p = p.updated(C10=rs.C10, C11=rs.C11_fit)
        self.params = p
        self.report.results["scan"] = res

    def ledger(self):
        try:
            led = compute_ledger(self.params, self.model)
        except SemiflowError as exc:
            self._fail("ledger", exc)
            return None
        res = {"constants": led.as_dict(), "formulas": led.provenance}
        vals, bounds = shifted_resolvent_scan(self.model, self.params, led, self.b_grid)
        res["shifted_resolvent_bound"] = bool(np.all(vals <= bounds))
        nvals, nbounds = neumann_norm_scan(self.model, self.params, led, self.b_grid)
        ok = np.isfinite(nvals)
        res["neumann_bound"] = bool(np.all(nvals[ok] <= nbounds[ok]))
        res["neumann_points"] = int(ok.sum())
        write_csv(self.out / "ledger_shifted_resolvent.csv", ["b", "norm_B_to_A", "bound"], zip(self.b_grid, vals, bounds))
        self.report.results["ledger"] = res
        self.report.checks["ledger.defined"] = True
        self.ledger_ = led
        return led

    def _contour(self):
        c = self.cfg.get("contour", {})
        kind = c.get("kind", "curved-rapid" if self.pipeline == "rapid" else "shifted-line")
        common = {k: c[k] for k in ("nodes", "b_cut", "step", "regularization") if k in c}
        p = self.params
        if kind == "shifted-line":
            return ContourSpec("shifted-line", ell=p.ell, **common)
        eps = p.epsilon if p.epsilon is not None else 0.5 * p.ell
        return ContourSpec("curved-rapid", ell=p.ell, epsilon=eps, C12=p.C12, **common)

    def decompose(self):
        if self.params.ell is None:
            self._fail("decompose", ConfigError("params.ell is required to decompose"))
            return None
        try:
            d = decompose(self.model, self.params, self._contour())
        except SemiflowError as exc:
            self._fail("decompose", exc)
            return None
        table = [{"z": z, "order": m, "multiplicity": k, "trace": complex(np.trace(P))}
                 for z, m, k, P in zip(d.poles, d.pole_orders, d.multiplicities, d.projectors)]
        rows = []
        for t in self.check_t:
            try:
                agree = d.path_agreement(t)
            except SemiflowError as exc:
                self._fail("decompose", exc)
                return None
            rows.append((t, agree, d.reconstruction_residual(t)))
        write_csv(self.out / "decompose_path_agreement.csv",
                  ["t", "subtraction_vs_contour", "reconstruction_residual"], rows)
        self.report.results["decompose"] = {
            "poles": table, "printed_form_exact": d.printed_form_exact,
            "strip_violations": d.report.violations if d.report else [],
            "max_path_agreement": max(r[1] for r in rows),
            "max_reconstruction_residual": max(r[2] for r in rows)}
        self.report.checks["decompose.path_agreement"] = max(r[1] for r in rows) <= self.tol["path_agreement"]
        self.report.checks["decompose.reconstruction"] = max(r[2] for r in rows) <= self.tol["reconstruction"]
        self.decomposition = d
        return d

    def reconstruct(self):
        c = self.cfg.get("contour", {})
        spec = ContourSpec("bromwich-line", a=c.get("bromwich_a", 1.0), b_cut=c.get("b_cut"),
                           step=c.get("step", 0.01), regularization=c.get("regularization", 3))
        rows = []
        for t in self.check_t:
            M = bromwich_reconstruct(self.model, t, spec)
            T = evolve(self.model, t)
            rows.append((t, np.linalg.norm(M - T, 2) / max(1.0, np.linalg.norm(T, 2))))
        write_csv(self.out / "reconstruct_error.csv", ["t", "relative_error"], rows)
        err = max(r[1] for r in rows)
        self.report.results["reconstruct"] = {"max_relative_error": err, "a": spec.a}
        self.report.checks["reconstruct.bromwich"] = err <= self.tol["bromwich"]

    def decay(self):
        d = self.decomposition
        if d is None:
            self.report.results["decay"] = {"skipped": "no decomposition"}
            return
        out = []
        probes = self.probes()
        if self.pipeline == "exponential":
            scans_ok = all(v for k, v in self.report.checks.items() if k.startswith("scan."))
            led = getattr(self, "ledger_", None)
            if not scans_ok or led is None:
                self.report.results["decay"] = {"skipped": "assumption scans failed or ledger undefined"}
                return
            for k, mu in enumerate(probes):
                r = exponential_decay_check(self.model, d, mu, self.params.ell, self.decay_t, led)
                write_csv(self.out / f"decay_probe{k}.csv", ["t", "remainder_norm_A", "bound"],
                          zip(r.t_grid, r.remainder_norms, r.bound_values))
                out.append({"probe": k, "passed": r.passed, "fitted_rate": r.fitted_rate,
                            "rate_ok": r.rate_ok, "degenerate": r.degenerate})
                self.report.checks[f"decay.probe{k}"] = r.passed
        else:
            p = self.params
            if p.C11 is None:
                self.report.results["decay"] = {"skipped": "rapid scan failed"}
                return
            rc = self.cfg.get("rapid", {})
            pp = rc.get("p", 2)
            q = rc.get("q", required_q(pp, p.C11, p.C12))
            for k, mu in enumerate(probes):
                try:
                    r = rapid_decay_check(self.model, d, mu, pp, q, self.decay_t, p.C11, p.C12)
                except SemiflowError as exc:
                    self._fail("decay", exc)
                    return
                write_csv(self.out / f"decay_probe{k}.csv", ["t", "remainder_norm_A", "bound"],
                          zip(r.t_grid, r.remainder_norms, r.bound_values))
                out.append({"probe": k, "passed": r.passed, "fitted_rate": r.fitted_rate,
                            "C_p": r.constant, "p": pp, "q": q})
                self.report.checks[f"decay.probe{k}"] = r.passed
        self.report.results["decay"] = {"probes": out}


STAGES = {
    "scan": ("scan",),
    "ledger": ("scan", "ledger"),
    "decompose": ("decompose",),
    "reconstruct": ("reconstruct",),
    "verify": ("scan", "ledger", "decompose", "decay"),
}


def run(command, config_path, output_dir=None, seed=None):
    """Run one subcommand; returns ``(exit_code, report or None)``."""
    try:
        cfg = load_config(config_path)
        if seed is None:
            seed = cfg.get("seed", 0)
        out = Path(output_dir or cfg.get("output_dir", "semiflow-out"))
        out.mkdir(parents=True, exist_ok=True)
        runner = Runner(cfg, out, seed)
    except (SemiflowError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1, None
    runner.report.command = command
    runner.report.config = copy.deepcopy(cfg)
    runner.report.config["seed"] = seed
    t_start = time.perf_counter()
    try:
        for stage in STAGES[command]:
            if stage == "ledger" and runner.pipeline == "rapid":
                continue
            runner._timed(stage, getattr(runner, stage))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1, None
    runner.report.timing["total"] = time.perf_counter() - t_start
    report = runner.report.normalize()
    try:
        (out / "report.json").write_text(report.serialize())
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return 1, report
    for name, ok in sorted(report.checks.items()):
        log.info("%-36s %s", name, "pass" if ok else "FAIL")
    return (0 if report.passed else 2), report


def build_parser():
    ap = argparse.ArgumentParser(prog="semiflow", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--output-dir", default=None, help="directory for report.json and CSVs")
        sp.add_argument("--seed", type=int, default=None, help="seed for random models and probes")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 1
    code, report = run(args.command, args.config, args.output_dir, args.seed)
    if report is not None:
        status = "PASS" if code == 0 else "FAIL"
        print(f"{args.command}: {status} ({len(report.checks)} checks)")
    return code


if __name__ == "__main__":
    sys.exit(main())
