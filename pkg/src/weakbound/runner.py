"""Alpha sweeps over a configured problem, and deterministic result files."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from .config import ExperimentConfig
from .errors import SolverError, TruncationError, WeakboundError
from .graph import asymptotic_slope_graph, assemble_kirchhoff, lowest_eigenpairs_graph
from .halfline import (
    HalflineModel,
    asymptotic_slope_halfline,
    assemble_halfline,
    lowest_eigenvalue,
    slope_tail_bound,
)
from .interval import (
    assemble_neumann,
    asymptotic_slope_interval,
    bs_solve,
    lowest_eigenvalue_perturbed,
    perturbed_residual,
)
from .linalg import weighted_lowest
from .rectangle import assemble_neumann_2d, asymptotic_slope_rectangle, lowest_eigenpairs_2d

CSV_HEADER = "alpha,nu_direct,nu_bs,slope_running,residual,wall_time_ms"
FIELDS = tuple(CSV_HEADER.split(","))


@dataclass
class SweepRecord:
    alpha: float
    nu_direct: float
    nu_bs: float | None
    slope_running: float | None
    residual: float
    wall_time_ms: float | None


@dataclass
class ExperimentResult:
    records: list[SweepRecord]
    summary: dict[str, Any]


class _Problem:
    """Per-kind setup shared by all alpha points of a sweep."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.kind = cfg.kind
        V = cfg.potential
        self.V = V
        self.baseline = 0.0
        self.extra: dict[str, Any] = {}
        if self.kind in ("interval", "bs"):
            self.A = assemble_neumann(V.grid)
            self.formula = asymptotic_slope_interval(V)
        elif self.kind == "rectangle":
            self.A = assemble_neumann_2d(V.grid)
            self.formula = asymptotic_slope_rectangle(V)
        elif self.kind == "graph":
            self.A = assemble_kirchhoff(V.graph)
            self.formula = asymptotic_slope_graph(V)
        else:
            self.model = HalflineModel(cfg.get("L"), cfg.get("h"), cfg.get("closure"))
            self.A = assemble_halfline(self.model)
            self.formula = asymptotic_slope_halfline(V)
            self.baseline = lowest_eigenvalue(self.model, self.A)
            self.extra = {"baseline_nu": self.baseline, "tail_bound": slope_tail_bound(V)}

    def solve(self, alpha: float) -> SweepRecord:
        t0 = time.perf_counter()
        nu_bs = None
        kind, V, A = self.kind, self.V, self.A
        if kind in ("interval", "bs"):
            nu, psi = lowest_eigenvalue_perturbed(A, V, alpha)
            residual = perturbed_residual(A, V, alpha, nu, psi)
            if kind == "bs" and alpha < 0:
                res = bs_solve(V, alpha, self.cfg.get("bs_tol"), A)
                nu_bs, residual = res.nu_alpha, res.residual
        elif kind == "rectangle":
            eig = lowest_eigenpairs_2d(A, V, alpha, 1, self.cfg.get("method"))
            nu, residual = float(eig.values[0]), float(eig.residuals[0])
        elif kind == "graph":
            eig = lowest_eigenpairs_graph(A, V, alpha, 1)
            nu, u = float(eig.values[0]), eig.vectors[0]
            r = (A.stiffness @ u + alpha * V.lumped() * u) / A.weights - nu * u
            residual = float(np.sqrt(np.dot(A.weights, r * r)))
        else:
            g = self.model.grid
            pair = weighted_lowest(A, g.mass, alpha * g.mass * V.v)[0]
            nu = pair.value
            if alpha < 0 and not (nu < 0 and 1.0 / np.sqrt(-nu) <= self.model.L / 5):
                raise TruncationError(
                    f"alpha={alpha:g}: bound state not resolved within L/5 = {self.model.L / 5:g}; increase L"
                )
            u = pair.vector / np.sqrt(g.h)
            r = A.matvec(u) / g.mass + alpha * V.v * u - nu * u
            residual = float(np.sqrt(g.integrate(r * r)))
        slope = nu / alpha if alpha != 0 else None
        ms = 1e3 * (time.perf_counter() - t0)
        return SweepRecord(float(alpha), float(nu), nu_bs, slope, residual, ms)


def fit_slope(alphas, nus, baseline: float = 0.0) -> float:
    """Least-squares ``nu - baseline = s alpha + c alpha^2`` (plain ratio for one point)."""
    a = np.asarray(alphas, dtype=float)
    y = np.asarray(nus, dtype=float) - baseline
    if a.size == 0:
        return math.nan
    if a.size == 1:
        return float(y[0] / a[0])
    X = np.column_stack([a, a * a])
    return float(np.linalg.lstsq(X, y, rcond=None)[0][0])


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Solve every alpha of the sweep; records come back sorted by alpha."""
    try:
        prob = _Problem(cfg)
        alphas = sorted(cfg.alphas)
        if jobs > 1 and len(alphas) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                records = list(pool.map(prob.solve, alphas))
        else:
            records = [prob.solve(a) for a in alphas]
    except SolverError as exc:
        raise type(exc)(f"{cfg.source} (kind {cfg.kind}): {exc}") from exc
    records.sort(key=lambda r: r.alpha)
    return ExperimentResult(records, _summary(cfg, prob, records))


def _summary(cfg: ExperimentConfig, prob: _Problem, records: list[SweepRecord]) -> dict[str, Any]:
    neg = [r for r in records if r.alpha < 0]
    zero = [r for r in records if r.alpha == 0]
    fitted = fit_slope([r.alpha for r in neg], [r.nu_direct for r in neg], prob.baseline)
    dev = abs(fitted / prob.formula - 1.0) if neg else math.nan
    checks = {
        "slope": bool(neg) and dev <= cfg.tolerance,
        "negative": all(r.nu_direct < 0 for r in neg),
        # baseline rows should reproduce the unperturbed ground state (0 up to discretisation)
        "baseline": all(abs(r.nu_direct - prob.baseline) <= 1e-8 for r in zero),
    }
    summary: dict[str, Any] = {
        "kind": cfg.kind,
        "points": len(records),
        "fitted_slope": fitted,
        "formula_slope": prob.formula,
        "relative_deviation": dev,
        "tolerance": cfg.tolerance,
    }
    if cfg.kind == "bs":
        devs = [abs(r.nu_bs - r.nu_direct) for r in neg]
        bounds = [max(1e-8, 1e-3 * abs(r.nu_direct)) for r in neg]
        summary["max_bs_deviation"] = max(devs) if devs else math.nan
        checks["bs_agreement"] = all(d <= b for d, b in zip(devs, bounds))
    summary.update(prob.extra)
    summary["checks"] = checks
    summary["pass"] = all(checks.values())
    return summary


# -- emission ----------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return format(float(v), ".17g")


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    return v


def to_csv(records: list[SweepRecord], timings: bool = False) -> str:
    lines = [CSV_HEADER]
    for r in sorted(records, key=lambda r: r.alpha):
        row = asdict(r)
        if not timings:
            row["wall_time_ms"] = None
        lines.append(",".join(_fmt(row[f]) for f in FIELDS))
    return "\n".join(lines) + "\n"


def to_json(records: list[SweepRecord], summary: dict | None = None, timings: bool = False) -> str:
    rows = []
    for r in sorted(records, key=lambda r: r.alpha):
        row = _clean(asdict(r))
        if not timings:
            row["wall_time_ms"] = None
        rows.append(row)
    doc = {"summary": _clean(summary or {}), "records": rows}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def emit(records, fmt: str, path: str | None, summary: dict | None = None, timings: bool = False) -> str:
    """Write records as CSV or JSON to ``path`` (or just return the text when ``path`` is None).

    Wall times are left blank unless ``timings`` is set, so identical
    configurations give byte-identical files.
    """
    if fmt == "csv":
        text = to_csv(records, timings)
    elif fmt == "json":
        text = to_json(records, summary, timings)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise WeakboundError(f"cannot write {path}: {exc.strerror or exc}") from None
    return text


def read_json(text: str) -> tuple[list[SweepRecord], dict]:
    doc = json.loads(text)
    return [SweepRecord(**r) for r in doc["records"]], doc["summary"]
