"""Experiment orchestration: metrics, m-sweeps, slope fits, tables.

A sweep runs each requested solver over a grid of sample sizes with
per-cell derived seeds, so the entire experiment is a pure function of its
spec. Rows are sorted before emission and wall-clock can be zeroed, which
makes output files byte-identical across parallelism degrees.

Seed derivation: cell (m_index, trial) gets the key
``(base_seed << 32) + (cell_index << 4)`` with the low bits reserved per
role (0 instance draws, 1 truth-vector draw, 2 prior construction,
3 restart initializations), so no two roles ever share a generator stream.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from time import perf_counter

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateFit, GepflowError, ZeroVector
from .generative import subspace_containing
from .priors import Projector, SubspaceProjector, projector_from_spec
from .problems import ProblemInstance, gen_diag_b, gen_phase_retrieval, gen_spiked
from .rng import NormalStream
from .solvers import SolverConfig, run_with_restarts

__all__ = [
    "SweepSpec",
    "ResultRow",
    "SummaryCell",
    "cosine_similarity",
    "signed_distance",
    "plateau_index",
    "run_sweep",
    "fit_loglog_slope",
    "summarize",
    "rows_to_csv",
    "summary_to_text",
    "summary_to_json",
    "CSV_HEADER",
]

KINDS = ("spiked", "phase_retrieval", "diag_b")
SOLVER_NAMES = ("prfm", "rifle", "ppower")

CSV_HEADER = "solver,m,trial,cos_sim,abs_cos_sim,dist,signed_dist_min,iterations,wall_ms,status"

_GENERATORS = {
    "spiked": gen_spiked,
    "phase_retrieval": gen_phase_retrieval,
    "diag_b": gen_diag_b,
}


def _unit_checked(x, name: str) -> NDArray[np.float64]:
    v = np.asarray(x, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(v))
    if norm <= 1e-12:
        raise ZeroVector(f"{name} has zero norm")
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"{name} must be unit within 1e-8, got norm {norm:.6g}")
    return v / norm


def cosine_similarity(v_star, u) -> float:
    """Inner product of the (defensively renormalized) unit inputs."""
    v = _unit_checked(v_star, "v_star")
    uu = _unit_checked(u, "u")
    return float(uu @ v)


def signed_distance(u, v_star) -> float:
    """min(||u - v*||, ||u + v*||): distance up to the global sign.

    Computed directly from the two norms; the closed form
    sqrt(2 - 2|u'v*|) is checked against this as a property, not used here.
    """
    uu = _unit_checked(u, "u")
    v = _unit_checked(v_star, "v_star")
    return min(float(np.linalg.norm(uu - v)), float(np.linalg.norm(uu + v)))


def plateau_index(values, slack: float = 1e-7) -> int:
    """First index where the sequence stops decreasing by more than slack."""
    seq = list(values)
    for t in range(len(seq) - 1):
        if seq[t] - seq[t + 1] <= slack:
            return t
    return max(len(seq) - 1, 0)


@dataclass(frozen=True)
class SweepSpec:
    """Full description of one experiment sweep.

    `prior` is the same dict shape the projector loader accepts, with one
    extension: {"prior": "subspace", "k": int} builds, per cell, a random
    subspace that contains that cell's planted truth vector (the
    oracle-assisted prior used throughout the synthetic protocol).
    """

    kind: str
    m_values: tuple[int, ...]
    n: int
    solvers: tuple[str, ...]
    trials: int
    prior: dict | None = None
    restarts: int = 10
    eta: float = 7.0 / 32.0
    eta_prime: float = 35.0 / 32.0
    s: int | None = None
    max_iters: int = 300
    stop_tol: float | None = 1e-9
    base_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        ms = tuple(int(m) for m in self.m_values)
        if not ms or any(m < 1 for m in ms) or list(ms) != sorted(set(ms)):
            raise ValueError("m_values must be nonempty, positive, strictly ascending")
        object.__setattr__(self, "m_values", ms)
        if self.n < 2:
            raise ValueError("n must be >= 2")
        sv = tuple(self.solvers)
        if not sv or any(name not in SOLVER_NAMES for name in sv):
            raise ValueError(f"solvers must be a nonempty subset of {SOLVER_NAMES}")
        object.__setattr__(self, "solvers", sv)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not (self.eta > 0 and self.eta_prime > 0):
            raise ValueError("eta and eta_prime must be positive")
        if "rifle" in sv and (self.s is None or self.s < 1):
            raise ValueError("rifle requires a positive sparsity level s")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be >= 0")
        if self.prior is not None and self.prior.get("prior") not in (
            "sphere",
            "sparse",
            "subspace",
            "range",
        ):
            raise ValueError("unrecognized prior spec")


@dataclass(frozen=True)
class ResultRow:
    solver: str
    m: int
    trial: int
    cos_sim: float
    abs_cos_sim: float
    dist: float
    signed_dist_min: float
    iterations: int
    wall_ms: float
    status: str


def _cell_key(spec: SweepSpec, m_index: int, trial: int) -> int:
    idx = m_index * spec.trials + trial
    return (spec.base_seed << 32) + (idx << 4)


def _cell_projector(spec: SweepSpec, v_star, prior_seed: int) -> Projector:
    pr = spec.prior if spec.prior is not None else {"prior": "sphere"}
    if pr.get("prior") == "subspace" and "k" in pr:
        gen = subspace_containing(v_star, int(pr["k"]), seed=prior_seed)
        return SubspaceProjector(basis=gen.basis)
    return projector_from_spec(pr)


def _run_cell(spec: SweepSpec, m_index: int, trial: int) -> list[ResultRow]:
    m = spec.m_values[m_index]
    key = _cell_key(spec, m_index, trial)
    raw = NormalStream(key + 1, stream=0).unit_vector(spec.n)
    v_star = np.abs(raw)
    v_star = v_star / float(np.linalg.norm(v_star))
    instance: ProblemInstance = _GENERATORS[spec.kind](v_star, m, seed=key)
    # Metric reference is the population GEP optimum (unit leading
    # generalized eigenvector). It equals the planted vector when B = I;
    # for anisotropic B the two differ and the optimum is the honest target.
    truth_v = instance.truth.v_lead
    p = _cell_projector(spec, truth_v, key + 2)

    rows: list[ResultRow] = []
    for solver in spec.solvers:
        cfg = SolverConfig(
            step_size=spec.eta, max_iters=spec.max_iters, stop_tol=spec.stop_tol
        )
        start = perf_counter()
        try:
            result = run_with_restarts(
                solver,
                instance.a_hat,
                instance.b_hat,
                cfg,
                spec.restarts,
                key + 3,
                p=p,
                s=spec.s,
                eta_prime=spec.eta_prime,
                v_star=truth_v,
            )
        except GepflowError as exc:
            wall = (perf_counter() - start) * 1000.0
            rows.append(
                ResultRow(
                    solver=solver, m=m, trial=trial,
                    cos_sim=math.nan, abs_cos_sim=math.nan,
                    dist=math.nan, signed_dist_min=math.nan,
                    iterations=0, wall_ms=wall, status=type(exc).__name__,
                )
            )
            continue
        wall = (perf_counter() - start) * 1000.0
        u = result.estimate
        cos = cosine_similarity(truth_v, u)
        rows.append(
            ResultRow(
                solver=solver, m=m, trial=trial,
                cos_sim=cos, abs_cos_sim=abs(cos),
                dist=float(np.linalg.norm(u - truth_v)),
                signed_dist_min=signed_distance(u, truth_v),
                iterations=result.trace.iterations_run,
                wall_ms=wall, status="ok",
            )
        )
    return rows


def run_sweep(spec: SweepSpec, *, jobs: int = 1, timing: str = "real") -> list[ResultRow]:
    """Execute the sweep; deterministic for a fixed spec at any jobs count.

    timing="zero" blanks the wall_ms column so output files can be compared
    byte-for-byte across machines and parallelism degrees.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    if timing not in ("real", "zero"):
        raise ValueError('timing must be "real" or "zero"')
    cells = [
        (mi, t) for mi in range(len(spec.m_values)) for t in range(spec.trials)
    ]
    if jobs == 1:
        batches = [_run_cell(spec, mi, t) for mi, t in cells]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(lambda c: _run_cell(spec, *c), cells))
    rows = [row for batch in batches for row in batch]
    if timing == "zero":
        rows = [replace(row, wall_ms=0.0) for row in rows]
    rows.sort(key=lambda r: (r.solver, r.m, r.trial))
    return rows


def fit_loglog_slope(pairs) -> tuple[float, float, float]:
    """Least-squares line through (log m, log error); returns
    (slope, intercept, r_squared)."""
    pts = [(float(m), float(e)) for m, e in pairs]
    if len({m for m, _ in pts}) < 3:
        raise DegenerateFit("need at least 3 distinct m values")
    for m, e in pts:
        if not (m > 0 and e > 0) or not (math.isfinite(m) and math.isfinite(e)):
            raise DegenerateFit(f"invalid point ({m}, {e})")
    xs = [math.log(m) for m, _ in pts]
    ys = [math.log(e) for _, e in pts]
    k = len(pts)
    mx = sum(xs) / k
    my = sum(ys) / k
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    syy = sum((y - my) ** 2 for y in ys)
    slope = sxy / sxx
    intercept = my - slope * mx
    r_squared = 1.0 if syy == 0.0 else (sxy * sxy) / (sxx * syy)
    return slope, intercept, r_squared


@dataclass(frozen=True)
class SummaryCell:
    solver: str
    m: int
    count: int
    mean_abs_cos: float
    std_abs_cos: float
    mean_signed_dist: float
    std_signed_dist: float
    median_signed_dist: float


def _mean_std(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    mean = sum(values) / len(values)
    if len(values) == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


def summarize(rows) -> list[SummaryCell]:
    """Per-(solver, m) mean/std/median over successful rows only.

    Cells whose every run failed still appear, with count 0 and NaN stats,
    so silent data loss is impossible.
    """
    keys: list[tuple[str, int]] = []
    for row in rows:
        if (row.solver, row.m) not in keys:
            keys.append((row.solver, row.m))
    keys.sort()
    cells = []
    for solver, m in keys:
        ok = [r for r in rows if r.solver == solver and r.m == m and r.status == "ok"]
        cos_mean, cos_std = _mean_std([r.abs_cos_sim for r in ok])
        d_mean, d_std = _mean_std([r.signed_dist_min for r in ok])
        median = float(np.median([r.signed_dist_min for r in ok])) if ok else math.nan
        cells.append(
            SummaryCell(
                solver=solver, m=m, count=len(ok),
                mean_abs_cos=cos_mean, std_abs_cos=cos_std,
                mean_signed_dist=d_mean, std_signed_dist=d_std,
                median_signed_dist=median,
            )
        )
    return cells


def rows_to_csv(rows) -> str:
    """Render rows as CSV text (shortest-round-trip float formatting, so
    identical rows always produce identical bytes)."""
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.solver},{r.m},{r.trial},{r.cos_sim!r},{r.abs_cos_sim!r},"
            f"{r.dist!r},{r.signed_dist_min!r},{r.iterations},"
            f"{r.wall_ms:.3f},{r.status}"
        )
    return "\n".join(lines) + "\n"


def summary_to_text(cells) -> str:
    """Aligned plain-text table of the summary cells."""
    header = (
        f"{'solver':<8}{'m':>8}{'count':>7}"
        f"{'abs_cos (mean+/-std)':>24}{'signed_dist (mean+/-std)':>28}{'median_dist':>14}"
    )
    lines = [header, "-" * len(header)]
    for c in cells:
        lines.append(
            f"{c.solver:<8}{c.m:>8}{c.count:>7}"
            f"{f'{c.mean_abs_cos:.4f} +/- {c.std_abs_cos:.4f}':>24}"
            f"{f'{c.mean_signed_dist:.4f} +/- {c.std_signed_dist:.4f}':>28}"
            f"{c.median_signed_dist:>14.4f}"
        )
    return "\n".join(lines) + "\n"


def summary_to_json(cells) -> list[dict]:
    """JSON-safe summary (NaN becomes null)."""

    def _safe(x: float):
        return None if isinstance(x, float) and math.isnan(x) else x

    out = []
    for c in cells:
        out.append(
            {
                "solver": c.solver,
                "m": c.m,
                "count": c.count,
                "mean_abs_cos": _safe(c.mean_abs_cos),
                "std_abs_cos": _safe(c.std_abs_cos),
                "mean_signed_dist": _safe(c.mean_signed_dist),
                "std_signed_dist": _safe(c.std_signed_dist),
                "median_signed_dist": _safe(c.median_signed_dist),
            }
        )
    return out
