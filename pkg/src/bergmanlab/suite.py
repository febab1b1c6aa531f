"""Sweep orchestration, suite verdicts, and report emission.

A sweep runs classify, constants, and norm for every weight triple in
its configuration, then derives pass/fail checks from the recorded
numbers alone: the exit status is a function of the report, never of
transient state.  Records are JSON-ready dicts in which every measured
quantity is a {value, tol} pair; the tolerance is the achieved
convergence indicator of whatever produced the number (the relative
move across the last two dyadic levels for trace suprema, the final
relative step for the power iteration, the panel-sum grade for fixed
quadrature functionals).  Exact grid coordinates, counters, and flags
stay plain.  Reports are serialized canonically with sorted keys and
shortest round-trip floats, so reruns with an identical configuration
are byte-identical.

Three suites ship:

* standard: identity triples omega = nu = eta over the standard-family
  sweep alpha in {-0.5, 0, 1, 3} x p in {1.5, 2, 3}.  Checks: all
  three weights classify as regular, the constant traces and the
  hypothesis ratio settle, the power iteration converges, witness
  Rayleigh quotients stay within 1.05x the iterated estimate, and the
  estimate-to-M_p ratios across the sweep fit one band of
  multiplicative width 100.
* counterexample: the derived pair over the unweighted base at p = 2.
  Checks: N_p settles while M_p diverges.
* golden: the standard sweep on the frozen reference grid, with every
  witness Rayleigh quotient compared against the shipped regression
  file at 1e-9 relative.

Non-finite measurements are serialized as the strings "inf", "-inf",
or "nan" rather than as JSON extensions, keeping every report strictly
parseable.
"""

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import metadata, resources
from pathlib import Path

import numpy as np

from .characterization import (
    ConstantTrace,
    Mp_constant,
    Np_constant,
    TripleConfig,
    hypothesis_ratio,
    p1_constant,
    test_function,
)
from .classify import classify
from .errors import DomainError
from .kernel import KernelEvaluator, MeanTable
from .operator import assemble, boyd_norm, rayleigh
from .quadrature import RadialGrid
from .weights import parse_weight

__all__ = [
    "TripleSpec",
    "SweepConfig",
    "Report",
    "run_suite",
    "emit_plot_data",
    "standard_suite",
    "counterexample_suite",
    "golden_suite",
    "golden_values",
]

_SUITES = ("standard", "counterexample", "golden", "custom")
_STANDARD_ALPHAS = (-0.5, 0.0, 1.0, 3.0)
_STANDARD_EXPONENTS = (1.5, 2.0, 3.0)

# capped witnesses rayleigh-tested against every estimate
_WITNESSES = ((1, 0.5), (4, 0.9), (16, 0.99))
_SANDWICH_SLACK = 1.05
_BAND_WIDTH = 100.0

_GOLDEN_RESOURCE = "golden/rayleigh.json"
_GOLDEN_RTOL = 1e-9

# quadrature grades inherited by fixed (non-iterated) functionals
_PANEL_TOL = 1e-12
_TAIL_TOL = 1e-10


def _scalar(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _num(value, tol):
    """A measured quantity with its achieved tolerance."""
    return {"value": _scalar(value), "tol": _scalar(tol)}


def _settle(values):
    """Relative move across the last two entries; inf when undefined."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2 or not np.all(np.isfinite(arr[-2:])) or arr[-1] == 0.0:
        return math.inf
    return float(abs(arr[-1] - arr[-2]) / abs(arr[-1]))


def _final_step(trace):
    if len(trace) < 2 or trace[-1] == 0.0:
        return 0.0
    return float(abs(trace[-1] - trace[-2]) / abs(trace[-1]))


def _slug(text):
    return re.sub(r"[^A-Za-z0-9.+-]+", "-", text).strip("-")


def _code_version():
    try:
        return metadata.version("bergmanlab")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass(frozen=True)
class TripleSpec:
    """One sweep entry: three weight specs and an exponent.

    Weights stay in mini-language form so configurations remain
    serializable; parsing happens at construction (to fail fast with
    spec diagnostics) and again inside the worker (so parallel
    configurations never share mutable weight caches).
    """

    omega: str
    nu: str
    eta: str
    p: float
    label: str = ""

    def __post_init__(self):
        for role in ("omega", "nu", "eta"):
            spec = getattr(self, role)
            parse_weight(spec)
        p = self.p
        if isinstance(p, bool) or not isinstance(p, (int, float, np.floating)):
            raise DomainError(f"exponent must be a real number, got {p!r}")
        if not (math.isfinite(p) and p >= 1.0):
            raise DomainError(f"exponent must lie in {{1}} union (1, inf), got {p}")
        object.__setattr__(self, "p", float(p))
        if not isinstance(self.label, str):
            raise DomainError("label must be a string")

    def parse(self):
        """Fresh TripleConfig with unshared weight instances."""
        return TripleConfig(parse_weight(self.omega), parse_weight(self.nu),
                            parse_weight(self.eta), self.p)


@dataclass(frozen=True)
class SweepConfig:
    """A validated sweep: triples, grid, tolerances, and output home.

    The output directory is created by run_suite before any numerics,
    so an unwritable location fails immediately rather than after the
    compute phase.
    """

    triples: tuple
    out_dir: Path
    suite: str = "custom"
    grid_levels: int = 20
    grid_nodes: int = 12
    tol: float = 1e-6
    jobs: int = 1

    def __post_init__(self):
        triples = tuple(self.triples)
        if not triples or not all(isinstance(t, TripleSpec) for t in triples):
            raise DomainError("triples must be a nonempty collection of TripleSpec")
        object.__setattr__(self, "triples", triples)
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.suite not in _SUITES:
            raise DomainError(f"unknown suite {self.suite!r}, expected one of {_SUITES}")
        for field, lo in (("grid_levels", 2), ("grid_nodes", 2), ("jobs", 1)):
            v = getattr(self, field)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < lo:
                raise DomainError(f"{field} must be an integer >= {lo}, got {v!r}")
        if not (isinstance(self.tol, (int, float)) and 0.0 < float(self.tol) < 1.0):
            raise DomainError(f"tol must lie in (0, 1), got {self.tol!r}")
        object.__setattr__(self, "tol", float(self.tol))


def standard_suite(out_dir, **overrides):
    """Identity triples over the standard-family sweep."""
    triples = tuple(
        TripleSpec(f"std:alpha={a:g}", f"std:alpha={a:g}", f"std:alpha={a:g}",
                   p, label=f"std-alpha{a:g}")
        for a in _STANDARD_ALPHAS for p in _STANDARD_EXPONENTS)
    return SweepConfig(triples, out_dir, suite="standard", **overrides)


def counterexample_suite(out_dir, **overrides):
    """The derived pair over the unweighted base at p = 2."""
    base = "std:alpha=0"
    spec = TripleSpec(base, f"cex-nu:base={base},p=2", f"cex-eta:base={base},p=2",
                      2.0, label="cex-unweighted")
    return SweepConfig((spec,), out_dir, suite="counterexample", **overrides)


def golden_suite(out_dir, **overrides):
    """The standard sweep pinned to the frozen reference grid."""
    if "grid_levels" in overrides or "grid_nodes" in overrides:
        raise DomainError("the golden suite grid is fixed by the frozen file")
    frozen = golden_values()
    cfg = standard_suite(out_dir,
                         grid_levels=frozen["grid"]["levels"],
                         grid_nodes=frozen["grid"]["nodes"], **overrides)
    return replace(cfg, suite="golden")


def golden_values():
    """The shipped witness-Rayleigh regression table."""
    text = resources.files("bergmanlab").joinpath(_GOLDEN_RESOURCE).read_text()
    return json.loads(text)


def _classify_record(report):
    tol = _TAIL_TOL
    return {
        "in_Dhat": {"holds": report.in_Dhat.holds,
                    "constant": _num(report.in_Dhat.constant, tol),
                    "exponent": _num(report.in_Dhat.exponent, tol)},
        "in_Dcheck": {"holds": report.in_Dcheck.holds,
                      "K": report.in_Dcheck.K,
                      "constant": _num(report.in_Dcheck.constant, tol),
                      "exponent": _num(report.in_Dcheck.exponent, tol)},
        "regular": {"holds": report.regular.holds,
                    "ratio_min": _num(report.regular.ratio_min, tol),
                    "ratio_max": _num(report.regular.ratio_max, tol)},
        "grid_limited": report.grid_limited,
    }


def _constants_record(mp, np_trace, hyp):
    return {
        "Mp": _num(mp.Mp_sup, _settle(mp.m)),
        "Np": _num(np_trace.Np_sup, _settle(np_trace.n)),
        "hypothesis_sup": _num(hyp.sup, _settle(hyp.values)),
        "verdicts": {"Mp": mp.verdict, "Np": np_trace.verdict,
                     "hypothesis": hyp.verdict},
        "maximizing_radii": {"Mp": mp.Mp_radius, "Np": np_trace.Np_radius,
                             "hypothesis": hyp.sup_radius},
    }


def _p1_record(report):
    return {
        "p1_sup": _num(report.sup, _settle(report.values)),
        "verdict": report.verdict,
        "maximizing_radius": report.sup_radius,
        "level": report.level,
    }


def _norm_record(cfg, grid, table, boyd_tol):
    operator = assemble(cfg, grid, table)
    estimate = boyd_norm(operator, tol=boyd_tol)
    bounds = []
    for cap, split in _WITNESSES:
        witness = test_function(cfg, cap, split, grid)
        bounds.append({"cap": cap, "split": split,
                       "value": _num(rayleigh(operator, witness), _PANEL_TOL)})
    return {
        "kind": "radial-restricted estimate",
        "estimate": _num(estimate.value, _final_step(estimate.trace)),
        "iterations": estimate.iterations,
        "converged": estimate.converged,
        "corner_mass": _num(operator.corner_mass, _PANEL_TOL),
        "testfn_lower_bounds": bounds,
    }


def _attempt(record, step, fn):
    try:
        return fn()
    except Exception as exc:
        record["errors"].append({"step": step, "type": type(exc).__name__,
                                 "message": str(exc)})
        return None


def _check(passed, value, threshold, relation):
    return {"pass": bool(passed), "value": value, "threshold": threshold,
            "relation": relation}


def _verdict_check(record, key, expected):
    constants = record.get("constants")
    if constants is None:
        return _check(False, "unavailable", expected, "==")
    got = constants["verdicts"][key]
    return _check(got == expected, got, expected, "==")


def _config_checks(record, suite, golden):
    checks = {}
    checks["no_module_errors"] = _check(not record["errors"],
                                        len(record["errors"]), 0, "==")
    if suite in ("standard", "golden"):
        reports = record.get("classify")
        if reports is None:
            checks["regular_weights"] = _check(False, "unavailable", True, "==")
        else:
            flags = [reports[role]["regular"]["holds"]
                     for role in ("omega", "nu", "eta")]
            checks["regular_weights"] = _check(all(flags), flags, True, "all ==")
        checks["Mp_settled"] = _verdict_check(record, "Mp", "finite")
        checks["Np_settled"] = _verdict_check(record, "Np", "finite")
        checks["hypothesis_holds"] = _verdict_check(record, "hypothesis", "finite")
    if suite == "counterexample":
        checks["Np_settled"] = _verdict_check(record, "Np", "finite")
        checks["Mp_diverging"] = _verdict_check(record, "Mp", "diverging")
    if record["p"] > 1.0:
        norm = record.get("norm")
        if norm is None:
            checks["power_iteration_converged"] = _check(
                False, "unavailable", True, "==")
            checks["witness_sandwich"] = _check(
                False, "unavailable", _SANDWICH_SLACK, "<=")
        else:
            checks["power_iteration_converged"] = _check(
                norm["converged"], norm["converged"], True, "==")
            estimate = norm["estimate"]["value"]
            tops = [b["value"]["value"] for b in norm["testfn_lower_bounds"]]
            if isinstance(estimate, float) and estimate > 0.0 and all(
                    isinstance(t, float) for t in tops):
                ratio = max(tops) / estimate
                checks["witness_sandwich"] = _check(
                    ratio <= _SANDWICH_SLACK, ratio, _SANDWICH_SLACK, "<=")
            else:
                checks["witness_sandwich"] = _check(
                    False, "unavailable", _SANDWICH_SLACK, "<=")
    if suite == "golden":
        checks["golden_match"] = _golden_check(record, golden)
    return checks


def _golden_check(record, golden):
    key = f"{record['label']}-p{record['p']:g}"
    norm = record.get("norm")
    frozen = golden["values"].get(key)
    if norm is None or frozen is None:
        return _check(False, "unavailable", _GOLDEN_RTOL, "<=")
    got = [b["value"]["value"] for b in norm["testfn_lower_bounds"]]
    if len(got) != len(frozen) or not all(isinstance(g, float) for g in got):
        return _check(False, "unavailable", _GOLDEN_RTOL, "<=")
    dev = max(abs(g - f) / abs(f) for g, f in zip(got, frozen))
    return _check(dev <= _GOLDEN_RTOL, dev, _GOLDEN_RTOL, "<=")


def _run_config(name, spec, grid, table, boyd_tol, suite, golden):
    record = {"name": name, "label": spec.label or _slug(spec.omega),
              "p": spec.p,
              "weights": {"omega": spec.omega, "nu": spec.nu, "eta": spec.eta},
              "errors": []}
    traces = None

    def classify_step():
        out = {}
        for role in ("omega", "nu", "eta"):
            out[role] = _classify_record(
                classify(parse_weight(record["weights"][role]), grid))
        return out

    record["classify"] = _attempt(record, "classify", classify_step)
    cfg = _attempt(record, "parse", spec.parse)
    if cfg is not None and cfg.p > 1.0:
        def constants_step():
            mp = Mp_constant(cfg, grid)
            np_trace = Np_constant(cfg, grid)
            hyp = hypothesis_ratio(cfg, grid)
            return mp, np_trace, hyp

        bundle = _attempt(record, "constants", constants_step)
        if bundle is not None:
            mp, np_trace, hyp = bundle
            record["constants"] = _constants_record(mp, np_trace, hyp)
            traces = ("theorem", mp, hyp)
            ratio = {}
            if math.isfinite(mp.Mp_sup) and mp.Mp_sup > 0.0:
                mp_tol = _settle(mp.m)
                ratio["Np_to_Mp"] = _num(np_trace.Np_sup / mp.Mp_sup,
                                         mp_tol + _settle(np_trace.n))
            record["ratios"] = ratio

        def norm_step():
            if isinstance(table, Exception):
                raise table
            return _norm_record(cfg, grid, table, boyd_tol)

        norm = _attempt(record, "norm", norm_step)
        if norm is not None:
            record["norm"] = norm
            est = norm["estimate"]["value"]
            mp_rec = record.get("constants", {}).get("Mp")
            if (mp_rec and isinstance(est, float)
                    and isinstance(mp_rec["value"], float)
                    and mp_rec["value"] > 0.0):
                tol = norm["estimate"]["tol"]
                tol = tol if isinstance(tol, float) else math.inf
                mp_tol = mp_rec["tol"] if isinstance(mp_rec["tol"], float) else math.inf
                record.setdefault("ratios", {})["boyd_to_Mp"] = _num(
                    est / mp_rec["value"], _scalar(tol + mp_tol))
    elif cfg is not None:
        def p1_step():
            return p1_constant(cfg, grid)

        report = _attempt(record, "constants", p1_step)
        if report is not None:
            record["constants_p1"] = _p1_record(report)
            traces = ("p1", report)

    record["checks"] = _config_checks(record, suite, golden)
    return record, traces


def _suite_checks(suite, records):
    checks = {}
    if suite in ("standard", "golden"):
        ratios = []
        for rec in records:
            entry = rec.get("ratios", {}).get("boyd_to_Mp")
            if entry and isinstance(entry["value"], float) and entry["value"] > 0.0:
                ratios.append(entry["value"])
        if len(ratios) == len(records) and ratios:
            spread = max(ratios) / min(ratios)
            checks["equivalence_band"] = _check(spread <= _BAND_WIDTH, spread,
                                                _BAND_WIDTH, "<=")
        else:
            checks["equivalence_band"] = _check(False, "unavailable",
                                                _BAND_WIDTH, "<=")
    return checks


@dataclass(frozen=True)
class Report:
    """Suite outcome: records, derived checks, and provenance."""

    schema: int
    suite: str
    provenance: dict
    configs: tuple
    checks: dict
    passed: bool

    @property
    def exit_status(self):
        return 0 if self.passed else 1

    def to_json(self):
        return _canonical({
            "schema": self.schema,
            "suite": self.suite,
            "provenance": self.provenance,
            "configs": list(self.configs),
            "checks": self.checks,
            "passed": self.passed,
        })


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write_trace_csv(path, traces):
    if traces is None:
        return
    if traces[0] == "theorem":
        _, mp, hyp = traces
        header = "r,Phi,Psi,m,n,hyp_ratio"
        columns = (mp.radii, mp.Phi, mp.Psi, mp.m, mp.n, hyp.values)
    else:
        _, report = traces
        header = "r,q"
        columns = (report.radii, report.values)
    rows = [header]
    for i in range(len(columns[0])):
        rows.append(",".join(repr(float(col[i])) for col in columns))
    path.write_text("\n".join(rows) + "\n")


def run_suite(cfg):
    """Run every configuration, write reports, and judge the suite.

    Per configuration the pipeline is classify, constants, norm; any
    exception is recorded under that configuration and the sweep
    continues.  Each configuration directory receives report.json and
    trace.csv; the sweep directory receives the aggregate report.json.
    The returned Report carries exit_status 0 exactly when every
    recorded check passed.
    """
    if not isinstance(cfg, SweepConfig):
        raise DomainError("run_suite needs a SweepConfig")
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    grid = RadialGrid.build(cfg.grid_levels, cfg.grid_nodes)
    golden = golden_values() if cfg.suite == "golden" else None

    tables = {}
    for spec in cfg.triples:
        if spec.p > 1.0 and spec.omega not in tables:
            try:
                tables[spec.omega] = MeanTable.build(
                    KernelEvaluator(parse_weight(spec.omega)), 1.0)
            except Exception as exc:
                tables[spec.omega] = exc

    names = [f"{i:02d}-{spec.label or _slug(spec.omega)}-p{spec.p:g}"
             for i, spec in enumerate(cfg.triples)]

    def work(item):
        i, spec = item
        return _run_config(names[i], spec, grid, tables.get(spec.omega),
                           cfg.tol, cfg.suite, golden)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(work, enumerate(cfg.triples)))
    else:
        results = [work(item) for item in enumerate(cfg.triples)]

    records = []
    for name, (record, traces) in zip(names, results):
        config_dir = out / name
        config_dir.mkdir(exist_ok=True)
        _write_trace_csv(config_dir / "trace.csv", traces)
        (config_dir / "report.json").write_text(
            _canonical({"schema": 1, **record}))
        records.append(record)

    suite_checks = _suite_checks(cfg.suite, records)
    passed = (all(c["pass"] for rec in records for c in rec["checks"].values())
              and all(c["pass"] for c in suite_checks.values())
              and not any(rec["errors"] for rec in records))
    provenance = {
        "grid": {"levels": cfg.grid_levels, "nodes": cfg.grid_nodes,
                 "cut": grid.cut},
        "tolerances": {"boyd_tol": cfg.tol, "tail_quadrature": _TAIL_TOL,
                       "panel_sums": _PANEL_TOL},
        "jobs": cfg.jobs,
        "code_version": _code_version(),
    }
    report = Report(1, cfg.suite, provenance, tuple(records), suite_checks,
                    passed)
    (out / "report.json").write_text(report.to_json())
    return report


def emit_plot_data(trace, path):
    """Write the m and n trace columns as gnuplot-ready CSV.

    The header comments carry the separator setting and a plot recipe;
    rows are shortest round-trip decimal, so the file is byte-identical
    across reruns on the same inputs.  An empty trace raises before the
    path is touched.
    """
    if not isinstance(trace, ConstantTrace):
        raise DomainError("emit_plot_data needs a ConstantTrace")
    r = np.asarray(trace.radii, dtype=float)
    m = np.asarray(trace.m, dtype=float)
    n = np.asarray(trace.n, dtype=float)
    if r.size == 0:
        raise DomainError("empty trace: nothing to emit")
    if not (r.shape == m.shape == n.shape) or r.ndim != 1:
        raise DomainError("trace columns must be 1-d and equally long")
    lines = [
        "# characterizing-constant traces over the dyadic grid",
        '# gnuplot: set datafile separator ","',
        '# gnuplot: plot "FILE" using 1:2 with lines title "m", '
        '"" using 1:3 with lines title "n"',
        "r,m,n",
    ]
    for i in range(r.size):
        lines.append(f"{float(r[i])!r},{float(m[i])!r},{float(n[i])!r}")
    Path(path).write_text("\n".join(lines) + "\n")
