"""Iterative leading-eigenvector estimators under structural priors.

Three solvers share one skeleton: track the Rayleigh quotient
rho_t = (u'Au)/(u'Bu), take a gradient-flavored step, and map back into the
prior's feasible set.

* projected Rayleigh flow: u <- P(u + eta * (A - rho B) u)
* truncated Rayleigh flow ("rifle"): u <- truncate(u + (eta'/rho)(A - rho B) u, s)
* projected power iteration ("ppower"): u <- P(A u), ignoring B entirely

All runs are deterministic. Restart initializations for run_with_restarts
come from NormalStream(seed, stream=j) for restart j >= 1 (restart 0 uses
the configured start vector), so parallel and serial execution agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from .errors import (
    AllRunsFailed,
    DegenerateGap,
    DenominatorNonPositive,
    GepflowError,
    NonPositiveRho,
    ZeroVector,
)
from .linalg import MatrixPair, as_sym_matrix, generalized_eig
from .priors import Projector, project, sparse_truncate
from .rng import NormalStream

__all__ = [
    "SolverConfig",
    "TraceRow",
    "RunTrace",
    "RestartResult",
    "default_init",
    "prfm",
    "rifle",
    "ppower",
    "run_with_restarts",
    "exact_solve",
    "trace_to_json",
]


def default_init(n: int) -> NDArray[np.float64]:
    """The all-ones direction, normalized."""
    return np.ones(n) / math.sqrt(n)


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Shared iteration settings.

    `init` of None means the all-ones direction, filled in at solve time
    once the dimension is known. `stop_tol` of None disables early stopping
    for fixed-iteration-count runs.
    """

    step_size: float
    max_iters: int
    init: NDArray[np.float64] | None = None
    denominator_floor: float = 1e-10
    record_trace: bool = True
    stop_tol: float | None = 1e-9

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.denominator_floor <= 0:
            raise ValueError("denominator_floor must be positive")
        if self.init is not None:
            u = np.asarray(self.init, dtype=np.float64).reshape(-1)
            if abs(float(np.linalg.norm(u)) - 1.0) > 1e-10:
                raise ValueError("init must be a unit vector within 1e-10")
            object.__setattr__(self, "init", u)


@dataclass(frozen=True)
class TraceRow:
    """One recorded iterate: Rayleigh quotient plus truth-relative metrics.

    cos_sim and dist are None when the true direction is not supplied.
    """

    t: int
    rho: float
    cos_sim: float | None
    dist: float | None


@dataclass(frozen=True, eq=False)
class RunTrace:
    """Per-iteration records for one solver run.

    When recording is enabled, rows has iterations_run + 1 entries: one per
    visited iterate, including the final one.
    """

    rows: tuple[TraceRow, ...]
    final_vector: NDArray[np.float64]
    iterations_run: int


@dataclass(frozen=True, eq=False)
class RestartResult:
    """Winning run of a restart batch, plus what failed along the way."""

    estimate: NDArray[np.float64]
    trace: RunTrace
    objective: float
    restart_index: int
    failures: tuple[str, ...]


def _resolve_init(cfg: SolverConfig, n: int) -> NDArray[np.float64]:
    if cfg.init is None:
        return default_init(n)
    if cfg.init.shape[0] != n:
        raise ValueError(f"init has length {cfg.init.shape[0]}, expected {n}")
    return cfg.init.copy()


def _truth_columns(u: NDArray[np.float64], v_star):
    if v_star is None:
        return None, None
    return float(u @ v_star), float(np.linalg.norm(u - v_star))


def _guarded_rho(a, b, u, floor: float, t: int) -> float:
    den = float(u @ (b @ u))
    if den <= floor:
        raise DenominatorNonPositive(t, den)
    return float(u @ (a @ u)) / den


def _final_trace(rows, record, u, iterations):
    return RunTrace(
        rows=tuple(rows) if record else (),
        final_vector=u,
        iterations_run=iterations,
    )


def prfm(
    a_hat,
    b_hat,
    p: Projector,
    cfg: SolverConfig,
    v_star=None,
) -> tuple[NDArray[np.float64], RunTrace]:
    """Projected Rayleigh flow: ascend u'Au/u'Bu, project onto the prior.

    Each iteration evaluates rho_t at the current iterate, steps along
    (A - rho_t B) u scaled by the configured step size, and projects the
    result back into the prior's feasible set. A nonpositive quotient
    denominator at any iterate (including the final one) raises
    DenominatorNonPositive rather than clamping.
    """
    a = as_sym_matrix(a_hat, name="a_hat")
    b = as_sym_matrix(b_hat, name="b_hat")
    if a.shape != b.shape:
        raise ValueError("a_hat and b_hat dimensions differ")
    u = _resolve_init(cfg, a.shape[0])
    v = None if v_star is None else np.asarray(v_star, dtype=np.float64).reshape(-1)

    rows: list[TraceRow] = []
    iterations = 0
    for t in range(cfg.max_iters):
        rho = _guarded_rho(a, b, u, cfg.denominator_floor, t)
        if cfg.record_trace:
            cos, dist = _truth_columns(u, v)
            rows.append(TraceRow(t=t, rho=rho, cos_sim=cos, dist=dist))
        u_next = project(p, u + cfg.step_size * (a @ u - rho * (b @ u)))
        iterations = t + 1
        moved = float(np.linalg.norm(u_next - u))
        u = u_next
        if cfg.stop_tol is not None and moved <= cfg.stop_tol:
            break

    rho = _guarded_rho(a, b, u, cfg.denominator_floor, iterations)
    if cfg.record_trace:
        cos, dist = _truth_columns(u, v)
        rows.append(TraceRow(t=iterations, rho=rho, cos_sim=cos, dist=dist))
    return u, _final_trace(rows, cfg.record_trace, u, iterations)


def rifle(
    a_hat,
    b_hat,
    s: int,
    eta_prime: float,
    cfg: SolverConfig,
    v_star=None,
) -> tuple[NDArray[np.float64], RunTrace]:
    """Truncated Rayleigh flow: step size eta'/rho_t, then keep top-s entries.

    Requires rho_t to stay positive (it divides the step); a nonpositive
    quotient raises NonPositiveRho at the offending iteration.
    """
    a = as_sym_matrix(a_hat, name="a_hat")
    b = as_sym_matrix(b_hat, name="b_hat")
    if a.shape != b.shape:
        raise ValueError("a_hat and b_hat dimensions differ")
    if eta_prime <= 0:
        raise ValueError("eta_prime must be positive")
    u = _resolve_init(cfg, a.shape[0])
    v = None if v_star is None else np.asarray(v_star, dtype=np.float64).reshape(-1)

    rows: list[TraceRow] = []
    iterations = 0
    for t in range(cfg.max_iters):
        rho = _guarded_rho(a, b, u, cfg.denominator_floor, t)
        if rho <= cfg.denominator_floor:
            raise NonPositiveRho(t, rho)
        if cfg.record_trace:
            cos, dist = _truth_columns(u, v)
            rows.append(TraceRow(t=t, rho=rho, cos_sim=cos, dist=dist))
        u_next = sparse_truncate(u + (eta_prime / rho) * (a @ u - rho * (b @ u)), s)
        iterations = t + 1
        moved = float(np.linalg.norm(u_next - u))
        u = u_next
        if cfg.stop_tol is not None and moved <= cfg.stop_tol:
            break

    rho = _guarded_rho(a, b, u, cfg.denominator_floor, iterations)
    if cfg.record_trace:
        cos, dist = _truth_columns(u, v)
        rows.append(TraceRow(t=iterations, rho=rho, cos_sim=cos, dist=dist))
    return u, _final_trace(rows, cfg.record_trace, u, iterations)


def ppower(
    a_hat,
    p: Projector,
    cfg: SolverConfig,
    v_star=None,
) -> tuple[NDArray[np.float64], RunTrace]:
    """Projected power iteration on A alone (the B-blind baseline).

    The trace's rho column records u'Au, i.e. the Rayleigh quotient with
    B = identity, so traces stay comparable across solvers even though this
    method never sees B.
    """
    a = as_sym_matrix(a_hat, name="a_hat")
    u = _resolve_init(cfg, a.shape[0])
    v = None if v_star is None else np.asarray(v_star, dtype=np.float64).reshape(-1)

    rows: list[TraceRow] = []
    iterations = 0
    for t in range(cfg.max_iters):
        if cfg.record_trace:
            cos, dist = _truth_columns(u, v)
            rows.append(TraceRow(t=t, rho=float(u @ (a @ u)), cos_sim=cos, dist=dist))
        w = a @ u
        if float(np.linalg.norm(w)) <= 1e-12:
            raise ZeroVector(f"a_hat @ u vanished at iteration {t}")
        u_next = project(p, w)
        iterations = t + 1
        moved = float(np.linalg.norm(u_next - u))
        u = u_next
        if cfg.stop_tol is not None and moved <= cfg.stop_tol:
            break

    if cfg.record_trace:
        cos, dist = _truth_columns(u, v)
        rows.append(
            TraceRow(t=iterations, rho=float(u @ (a @ u)), cos_sim=cos, dist=dist)
        )
    return u, _final_trace(rows, cfg.record_trace, u, iterations)


def run_with_restarts(
    solver: str,
    a_hat,
    b_hat,
    cfg: SolverConfig,
    restarts: int,
    seed: int,
    *,
    p: Projector | None = None,
    s: int | None = None,
    eta_prime: float | None = None,
    v_star=None,
) -> RestartResult:
    """Best-of-restarts wrapper around one solver.

    Restart 0 uses the configured start vector; restart j >= 1 starts from a
    uniform random unit vector pushed into the nonnegative orthant (absolute
    value), drawn from NormalStream(seed, stream=j). The winner maximizes
    the empirical quotient (u'Au)/(u'Bu), or u'Au for the B-blind power
    baseline; individual failures are collected and only a full wipeout
    raises AllRunsFailed.
    """
    if solver not in ("prfm", "rifle", "ppower"):
        raise ValueError(f"unknown solver {solver!r}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    a = as_sym_matrix(a_hat, name="a_hat")
    n = a.shape[0]
    b = None if b_hat is None else as_sym_matrix(b_hat, name="b_hat")
    if solver in ("prfm", "rifle") and b is None:
        raise ValueError(f"{solver} needs b_hat")

    best: RestartResult | None = None
    failures: list[str] = []
    for j in range(restarts):
        if j == 0:
            run_cfg = cfg
        else:
            u0 = np.abs(NormalStream(seed, stream=j).unit_vector(n))
            u0 /= np.linalg.norm(u0)
            run_cfg = replace(cfg, init=u0)
        try:
            if solver == "prfm":
                estimate, trace = prfm(a, b, p, run_cfg, v_star=v_star)
            elif solver == "rifle":
                estimate, trace = rifle(a, b, s, eta_prime, run_cfg, v_star=v_star)
            else:
                estimate, trace = ppower(a, p, run_cfg, v_star=v_star)
        except GepflowError as exc:
            failures.append(f"restart {j}: {type(exc).__name__}: {exc}")
            continue
        if solver == "ppower":
            objective = float(estimate @ (a @ estimate))
        else:
            objective = float(estimate @ (a @ estimate)) / float(
                estimate @ (b @ estimate)
            )
        if best is None or objective > best.objective:
            best = RestartResult(
                estimate=estimate,
                trace=trace,
                objective=objective,
                restart_index=j,
                failures=(),
            )
    if best is None:
        raise AllRunsFailed("; ".join(failures))
    return RestartResult(
        estimate=best.estimate,
        trace=best.trace,
        objective=best.objective,
        restart_index=best.restart_index,
        failures=tuple(failures),
    )


def exact_solve(pair: MatrixPair) -> NDArray[np.float64]:
    """Dense-oracle leading generalized eigenvector, unit-normalized.

    Refuses near-degenerate leading gaps, where "the" leading direction is
    not well defined.
    """
    spectrum = generalized_eig(pair)
    if spectrum.gap <= 1e-10:
        raise DegenerateGap(f"leading gap {spectrum.gap:.3e} <= 1e-10")
    return spectrum.leading_unit


def trace_to_json(solver: str, cfg: SolverConfig, trace: RunTrace, status: str) -> dict:
    """Serialize one run in the external trace schema."""
    return {
        "solver": solver,
        "config": {
            "step_size": cfg.step_size,
            "max_iters": cfg.max_iters,
            "denominator_floor": cfg.denominator_floor,
            "stop_tol": cfg.stop_tol,
            "record_trace": cfg.record_trace,
        },
        "rows": [
            {"t": r.t, "rho": r.rho, "cos_sim": r.cos_sim, "dist": r.dist}
            for r in trace.rows
        ],
        "final": [float(x) for x in trace.final_vector],
        "status": status,
    }
