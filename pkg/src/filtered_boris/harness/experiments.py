"""Convergence sweeps over epsilon and step-size resonance scans."""
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .. import __version__
from ..errors import BorisError, InsufficientData
from ..fields import make_preset
from ..integrators import MethodConfig, Variant, n_steps_for, run_trajectory
from ..reference import ERR_MODES, ErrorMetrics, ReferenceCache, compute_errors

PAPER_X0 = (1 / 3, 1 / 4, 1 / 2)
PAPER_V0 = (2 / 5, 2 / 3, 1.0)
PAPER_EPSILONS = tuple(2.0**-j for j in range(4, 14))
PAPER_METHODS = tuple(MethodConfig(v) for v in Variant)
METRICS = ("err_x", "err_vpar", "err_vperp")


def method_label(config):
    """Short name of a configuration; non-default fixed-point settings are appended."""
    label = config.variant.value
    if config.variant.implicit and (config.fp_max_iters, config.fp_tol) != (2, 1e-13):
        label += f"[fp={config.fp_max_iters}]"
    return label


@dataclass(frozen=True)
class HRule:
    """Step-size rule: ``h = value * eps`` (ratio) or ``h = 1 / value`` (reciprocal)."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("ratio", "reciprocal"):
            raise ValueError(f"unknown h rule {self.kind!r}")
        if not self.value > 0:
            raise ValueError("h rule value must be positive")

    def step(self, eps):
        return self.value * eps if self.kind == "ratio" else 1.0 / self.value

    @property
    def label(self):
        if self.kind == "ratio":
            return f"h={self.value:g}eps"
        return f"h=1/{self.value:g}"


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str = "paper-sec8"
    x0: tuple = PAPER_X0
    v0: tuple = PAPER_V0
    t_end: float = 1.0
    epsilons: tuple = PAPER_EPSILONS
    h_rules: tuple = (HRule("ratio", 1), HRule("ratio", 4), HRule("ratio", 16))
    methods: tuple = PAPER_METHODS
    err_mode: str = "sup"
    ref_tol: float = 1e-10

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        eps = list(self.epsilons)
        if not eps or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be non-empty and strictly decreasing")
        if self.err_mode not in ERR_MODES:
            raise ValueError(f"err_mode must be one of {ERR_MODES}")
        make_preset(self.preset, eps[0])

    def describe(self):
        d = asdict(self)
        d["h_rules"] = [r.label for r in self.h_rules]
        d["methods"] = [
            {"label": method_label(m), "variant": m.variant.value, "fp_mode": m.fp_mode,
             "guard": [m.guard.c_min, m.guard.k_max], "guard_policy": m.guard_policy}
            for m in self.methods
        ]
        return d


@dataclass
class Cell:
    method: str
    epsilon: float
    h: float
    rule: str
    n_steps: int
    errors: Optional[ErrorMetrics] = None
    flagged: bool = False
    res_k: int = 0
    res_min: float = 1.0
    fp_mode: str = "explicit"
    fp_iters: int = 0
    fp_residual: float = 0.0
    oracle_residual: Optional[float] = None
    status: str = "ok"
    message: str = ""

    @property
    def ok(self):
        return self.status == "ok"

    def sort_key(self):
        return (self.method, self.epsilon, self.h)


@dataclass
class ConvergenceReport:
    cells: list
    slopes: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    elapsed: float = field(default=0.0, compare=False)

    def select(self, method=None, rule=None, epsilon=None, usable=False):
        out = []
        for c in self.cells:
            if method is not None and c.method != method:
                continue
            if rule is not None and c.rule != rule:
                continue
            if epsilon is not None and c.epsilon != epsilon:
                continue
            if usable and (not c.ok or c.flagged):
                continue
            out.append(c)
        return out

    def cell(self, method, epsilon, rule):
        for c in self.select(method, rule, epsilon):
            return c
        raise KeyError((method, epsilon, rule))


def fit_slope(points):
    """Least-squares slope of ``log(err)`` against ``log(eps)``."""
    pts = list(points)
    if len(pts) < 4:
        raise InsufficientData(f"need at least 4 points, got {len(pts)}")
    eps = np.array([p[0] for p in pts], dtype=float)
    err = np.array([p[1] for p in pts], dtype=float)
    if np.any(eps <= 0) or np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise InsufficientData("slope fit needs positive finite errors")
    slope, _ = np.polyfit(np.log(eps), np.log(err), 1)
    return float(slope)


def fit_slopes(cells, metrics=METRICS):
    """Slopes per (method, rule, metric) over usable (ok, unflagged) cells."""
    groups = {}
    for c in cells:
        if c.ok and not c.flagged:
            groups.setdefault((c.method, c.rule), []).append(c)
    slopes = {}
    for (method, rule), cs in sorted(groups.items()):
        for metric in metrics:
            pts = [(c.epsilon, getattr(c.errors, metric)) for c in cs]
            try:
                slopes[(method, rule, metric)] = fit_slope(pts)
            except InsufficientData:
                slopes[(method, rule, metric)] = None
    return slopes


def _run_cell(model, config, spec, h, rule, ref, oracle_residual):
    label = method_label(config)
    try:
        n = n_steps_for(h, spec.t_end)
    except ValueError as exc:
        return Cell(label, model.epsilon, h, rule, 0, status="failed", message=str(exc))
    cell = Cell(label, model.epsilon, h, rule, n, fp_mode=config.fp_mode,
                oracle_residual=oracle_residual)
    if ref is None:
        cell.status, cell.message = "failed", "no reference solution"
        return cell
    try:
        traj = run_trajectory(spec.x0, spec.v0, model, config, h, spec.t_end)
        if spec.err_mode == "sup":
            r = ref.subsample(h)
        else:
            r = ref
        cell.errors = compute_errors(traj, r, model, spec.err_mode)
    except BorisError as exc:
        cell.status, cell.message = "failed", f"{type(exc).__name__}: {exc}"
        return cell
    ks = traj.res_k[traj.res_k > 0]
    cell.flagged = bool(len(ks))
    cell.res_k = int(ks.min()) if len(ks) else 0
    cell.res_min = float(traj.res_value.min())
    cell.fp_iters = int(traj.fp_iters.max())
    cell.fp_residual = float(traj.fp_residual.max())
    return cell


def _reference_grid(spec, hs):
    """Common sample spacing for all step sizes of one epsilon (sup mode)."""
    if spec.err_mode == "endpoint":
        return spec.t_end, 1
    dt = min(hs)
    for h in hs:
        k = round(h / dt)
        if abs(k * dt - h) > 1e-12 * h:
            dt = None
            break
    if dt is None:
        raise ValueError("step sizes for one epsilon must be integer multiples of the smallest")
    return dt, n_steps_for(dt, spec.t_end)


def _epsilon_group(spec, eps, cache_dir):
    cache = ReferenceCache(cache_dir)
    model = make_preset(spec.preset, eps)
    hs = [r.step(eps) for r in spec.h_rules]
    ref, residual, note = None, None, ""
    try:
        dt, n = _reference_grid(spec, hs)
        ref = cache.get(model, spec.x0, spec.v0, dt, n, spec.ref_tol)
        residual = ref.meta.get("halving_residual")
    except (BorisError, ValueError) as exc:
        note = f"{type(exc).__name__}: {exc}"
    cells = []
    for config in spec.methods:
        for rule, h in zip(spec.h_rules, hs):
            c = _run_cell(model, config, spec, h, rule.label, ref, residual)
            if ref is None:
                c.message = note
            cells.append(c)
    return cells, {"epsilon": eps, "halving_residual": residual, "note": note}


def _metadata(spec, kind, oracle):
    return {
        "kind": kind,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "spec": spec.describe(),
        "err_mode": spec.err_mode,
        "oracle": oracle,
    }


def run_convergence(spec, cache_dir=None, workers=1):
    """Run every (method, epsilon, h) cell of ``spec`` and fit log-log slopes.

    A cell that raises is recorded as failed instead of aborting the sweep.
    With ``workers > 1`` epsilon groups run in separate processes; the output
    is identical to the sequential run.
    """
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_epsilon_group, [spec] * len(spec.epsilons),
                                    spec.epsilons, [cache_dir] * len(spec.epsilons)))
    else:
        results = [_epsilon_group(spec, eps, cache_dir) for eps in spec.epsilons]
    cells = sorted((c for cs, _ in results for c in cs), key=Cell.sort_key)
    oracle = [info for _, info in results]
    report = ConvergenceReport(cells, fit_slopes(cells))
    report.metadata = _metadata(spec, "convergence", oracle)
    report.elapsed = time.perf_counter() - t0
    return report


def _scan_chunk(spec, eps, ks, ref):
    model = make_preset(spec.preset, eps)
    residual = ref.meta.get("halving_residual") if ref is not None else None
    cells = []
    for config in spec.methods:
        for k in ks:
            rule = HRule("reciprocal", k)
            cells.append(_run_cell(model, config, spec, rule.step(eps), rule.label, ref, residual))
    return cells


def run_resonance_scan(spec, ks, cache_dir=None, workers=1):
    """Fixed epsilon, ``h = 1/k`` for each ``k``; errors at ``t_end`` by default.

    No slopes are fitted; every cell carries its resonance flag.
    """
    if len(spec.epsilons) != 1:
        raise ValueError("a resonance scan uses exactly one epsilon")
    t0 = time.perf_counter()
    eps = spec.epsilons[0]
    ks = sorted(int(k) for k in ks)
    model = make_preset(spec.preset, eps)
    cache = ReferenceCache(cache_dir)
    ref, note = None, ""
    try:
        if spec.err_mode == "endpoint":
            ref = cache.get(model, spec.x0, spec.v0, spec.t_end, 1, spec.ref_tol)
        else:
            dt = 1.0 / math.lcm(*ks)
            ref = cache.get(model, spec.x0, spec.v0, dt, n_steps_for(dt, spec.t_end), spec.ref_tol)
    except BorisError as exc:
        note = f"{type(exc).__name__}: {exc}"
    if workers > 1:
        chunks = [ks[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = pool.map(_scan_chunk, [spec] * workers, [eps] * workers, chunks, [ref] * workers)
            cells = [c for part in parts for c in part]
    else:
        cells = _scan_chunk(spec, eps, ks, ref)
    cells.sort(key=Cell.sort_key)
    oracle = [{"epsilon": eps,
               "halving_residual": ref.meta.get("halving_residual") if ref else None,
               "note": note}]
    report = ConvergenceReport(cells, {})
    report.metadata = _metadata(spec, "resonance-scan", oracle)
    report.elapsed = time.perf_counter() - t0
    report.metadata["k_range"] = [ks[0], ks[-1]]
    return report


def paper_convergence_spec(**overrides):
    return ExperimentSpec(**overrides)


def paper_scan_spec(**overrides):
    kw = dict(epsilons=(2.0**-10,), h_rules=(), err_mode="endpoint")
    kw.update(overrides)
    return ExperimentSpec(**kw)


PAPER_SCAN_KS = tuple(range(60, 601))
