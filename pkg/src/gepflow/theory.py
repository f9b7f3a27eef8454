"""Convergence-condition arithmetic and inequality validators.

The monotone-descent guarantee for the projected Rayleigh flow is governed
by two step-size functionals of the population pair,

    gamma1 = eta * (lambda_1 - lambda_2) * lambda_min(B)
    gamma2 = eta * (lambda_1 - lambda_n) * lambda_max(B),

an initial alignment nu0 = u0' v*, and the condition number kappa(B). From
these the per-step contraction factor is assembled and three checkable
conditions are reported:

* step_sum_ok:    gamma1 + gamma2 < 2   (combined step small enough)
* contraction_ok: contraction < 1       (the exact descent condition)
* step_floor_ok:  3*gamma1 + gamma2 > 3 (step large enough, approximate
                  surrogate used to justify protocol step sizes)

The three supporting inequalities behind the descent proof (a sandwich on
the quadratic form x'(rho B - A)x, a lower bound on the step inner product,
and a coefficient-versus-chord bound) are exposed as checkers that evaluate
both sides numerically; they hold for every valid draw, so a randomized
suite failing indicates an implementation bug.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateGap, NonPositiveAlignment, RhoOutOfRange
from .linalg import GeneralizedSpectrum, MatrixPair, _eigvalsh, as_sym_matrix, generalized_eig
from .problems import ProblemInstance
from .rng import NormalStream

__all__ = [
    "ConvergenceConditions",
    "SandwichCheck",
    "InnerCheck",
    "CoefficientCheck",
    "DenominatorCheck",
    "LemmaSuiteResult",
    "compute_conditions",
    "conditions_from_gammas",
    "check_lemma_sandwich",
    "check_lemma_inner",
    "check_lemma_coefficient",
    "check_denominator_positivity",
    "run_lemma_suites",
]

LEMMA_SLACK = 1e-9

#: Denominators at or below this are treated as effectively nonpositive,
#: matching the solvers' default runtime guard.
DENOMINATOR_FLOOR = 1e-10


@dataclass(frozen=True)
class ConvergenceConditions:
    """Step-size functionals, contraction factor, and condition flags."""

    gamma1: float
    gamma2: float
    nu0: float
    kappa_b: float
    b0: float
    c0: float
    contraction: float
    contraction_defined: bool
    step_sum_ok: bool
    contraction_ok: bool
    step_floor_ok: bool
    nu0_positive: bool


def conditions_from_gammas(
    gamma1: float, gamma2: float, *, nu0: float, kappa_b: float
) -> ConvergenceConditions:
    """Assemble the condition report from already-known functionals.

    gamma2 >= gamma1 is required (it holds by construction when the gammas
    come from a spectrum, since lambda_1 - lambda_n >= lambda_1 - lambda_2
    and lambda_max >= lambda_min).
    """
    if gamma1 < 0 or gamma2 < gamma1:
        raise ValueError("need 0 <= gamma1 <= gamma2")
    if kappa_b < 1:
        raise ValueError("kappa_b must be >= 1")
    c0 = (gamma2 - gamma1) / 2.0
    b0 = (
        (2.0 - (gamma1 + gamma2))
        + gamma1 * (2.0 * kappa_b - (1.0 + nu0))
        + 3.0 * gamma2 * kappa_b * math.sqrt(2.0 * (1.0 - nu0))
    )
    if c0 < 1.0:
        contraction = (b0 + math.sqrt((1.0 - c0) * c0)) / (1.0 - c0)
        defined = True
    else:
        contraction = math.nan
        defined = False
    return ConvergenceConditions(
        gamma1=gamma1,
        gamma2=gamma2,
        nu0=nu0,
        kappa_b=kappa_b,
        b0=b0,
        c0=c0,
        contraction=contraction,
        contraction_defined=defined,
        step_sum_ok=(gamma1 + gamma2) < 2.0,
        contraction_ok=defined and contraction < 1.0,
        step_floor_ok=(3.0 * gamma1 + gamma2) > 3.0,
        nu0_positive=nu0 > 0.0,
    )


def compute_conditions(
    spectrum: GeneralizedSpectrum, b, eta: float, u0
) -> ConvergenceConditions:
    """Evaluate the descent conditions for a population spectrum and start.

    `spectrum` must come from the population pair, not sample estimates;
    `b` is the population B whose extreme eigenvalues enter the gammas.
    nu0 may come out negative: the report flags it rather than erroring.
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    lam = spectrum.eigenvalues
    if lam.shape[0] < 2:
        raise DegenerateGap("need at least two eigenvalues")
    if spectrum.gap <= 1e-10:
        raise DegenerateGap(f"leading gap {spectrum.gap:.3e} <= 1e-10")
    b = as_sym_matrix(b, name="b")
    b_eigs = _eigvalsh(b)
    b_max, b_min = float(b_eigs[0]), float(b_eigs[-1])
    if b_min <= 0:
        raise ValueError("population B must be positive definite")
    u = np.asarray(u0, dtype=np.float64).reshape(-1)
    nu0 = float(u @ spectrum.leading_unit)
    gamma1 = eta * float(lam[0] - lam[1]) * b_min
    gamma2 = eta * float(lam[0] - lam[-1]) * b_max
    return conditions_from_gammas(gamma1, gamma2, nu0=nu0, kappa_b=b_max / b_min)


# ---------------------------------------------------------------------------
# inequality checkers


@dataclass(frozen=True)
class SandwichCheck:
    lower: float
    middle: float
    upper: float
    holds: bool


@dataclass(frozen=True)
class InnerCheck:
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class CoefficientCheck:
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class DenominatorCheck:
    value: float
    positive: bool


def _spectrum_of(pair: MatrixPair, spectrum: GeneralizedSpectrum | None):
    return generalized_eig(pair) if spectrum is None else spectrum


def _b_extremes(pair: MatrixPair) -> tuple[float, float]:
    eigs = _eigvalsh(pair.b)
    return float(eigs[-1]), float(eigs[0])  # (min, max)


def _check_rho(rho: float, lam) -> None:
    if not (float(lam[1]) < rho <= float(lam[0]) + 1e-12):
        raise RhoOutOfRange(
            f"rho {rho:.6g} outside ({float(lam[1]):.6g}, {float(lam[0]):.6g}]"
        )


def check_lemma_sandwich(
    pair: MatrixPair,
    rho: float,
    x,
    spectrum: GeneralizedSpectrum | None = None,
) -> SandwichCheck:
    """Two-sided bound on x'(rho B - A)x via the extreme eigenvalues.

    With f1 = v1' B x the leading coefficient of x in the B-orthonormal
    eigenbasis:

        (rho - lambda_2) lambda_min(B) ||x||^2 - (lambda_1 - lambda_2) f1^2
          <= x'(rho B - A) x <=
        (rho - lambda_n) lambda_max(B) ||x||^2 - (lambda_1 - lambda_n) f1^2
    """
    spec = _spectrum_of(pair, spectrum)
    lam = spec.eigenvalues
    _check_rho(rho, lam)
    b_min, b_max = _b_extremes(pair)
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    f1 = float(spec.eigenvectors[:, 0] @ (pair.b @ xv))
    nsq = float(xv @ xv)
    middle = float(xv @ (rho * (pair.b @ xv) - pair.a @ xv))
    lower = (rho - float(lam[1])) * b_min * nsq - (float(lam[0]) - float(lam[1])) * f1**2
    upper = (rho - float(lam[-1])) * b_max * nsq - (float(lam[0]) - float(lam[-1])) * f1**2
    holds = (lower - LEMMA_SLACK) <= middle <= (upper + LEMMA_SLACK)
    return SandwichCheck(lower=lower, middle=middle, upper=upper, holds=holds)


def check_lemma_inner(
    pair: MatrixPair,
    rho: float,
    eta: float,
    x,
    y,
    spectrum: GeneralizedSpectrum | None = None,
) -> InnerCheck:
    """Lower bound on the step inner product eta <(rho B - A) x, y>.

    With tau1 = eta (rho - lambda_2) lambda_min(B) and
    tau2 = eta (rho - lambda_n) lambda_max(B):

        lhs >= ((tau1+tau2)/2) x'y - ((tau2-tau1)/4)(||x||^2 + ||y||^2)
               - eta (lambda_1 - lambda_2) f1 g1
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    spec = _spectrum_of(pair, spectrum)
    lam = spec.eigenvalues
    _check_rho(rho, lam)
    b_min, b_max = _b_extremes(pair)
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    yv = np.asarray(y, dtype=np.float64).reshape(-1)
    v1 = spec.eigenvectors[:, 0]
    f1 = float(v1 @ (pair.b @ xv))
    g1 = float(v1 @ (pair.b @ yv))
    tau1 = eta * (rho - float(lam[1])) * b_min
    tau2 = eta * (rho - float(lam[-1])) * b_max
    lhs = eta * float(yv @ (rho * (pair.b @ xv) - pair.a @ xv))
    rhs = (
        ((tau1 + tau2) / 2.0) * float(xv @ yv)
        - ((tau2 - tau1) / 4.0) * (float(xv @ xv) + float(yv @ yv))
        - eta * (float(lam[0]) - float(lam[1])) * f1 * g1
    )
    return InnerCheck(lhs=lhs, rhs=rhs, holds=lhs >= rhs - LEMMA_SLACK)


def check_lemma_coefficient(
    pair: MatrixPair,
    x,
    spectrum: GeneralizedSpectrum | None = None,
) -> CoefficientCheck:
    """Bound the leading-coefficient error by the chord to the optimum.

    For unit x with nu = x'v* > 0, h = x - v*, and d = 1/||v1||_2:

        (f1 - d)^2 <= (lambda_max(B) - (1 + nu) lambda_min(B) / 2) ||h||^2
    """
    spec = _spectrum_of(pair, spectrum)
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    if abs(float(np.linalg.norm(xv)) - 1.0) > 1e-10:
        raise ValueError("x must be a unit vector")
    v_star = spec.leading_unit
    nu = float(xv @ v_star)
    if nu <= 0:
        raise NonPositiveAlignment(f"x'v* = {nu:.6g} <= 0")
    b_min, b_max = _b_extremes(pair)
    f1 = float(spec.eigenvectors[:, 0] @ (pair.b @ xv))
    h = xv - v_star
    lhs = (f1 - spec.scale_d) ** 2
    rhs = (b_max - (1.0 + nu) * b_min / 2.0) * float(h @ h)
    return CoefficientCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + LEMMA_SLACK)


def check_denominator_positivity(instance: ProblemInstance, u) -> DenominatorCheck:
    """Report u' B_hat u and whether it clears the solver floor.

    Advisory only: positivity for all near-optimal vectors is guaranteed by
    theory only under sample-size conditions this checker cannot certify.
    """
    uv = np.asarray(u, dtype=np.float64).reshape(-1)
    value = float(uv @ (instance.b_hat @ uv))
    return DenominatorCheck(value=value, positive=value > DENOMINATOR_FLOOR)


# ---------------------------------------------------------------------------
# randomized suites


@dataclass(frozen=True)
class LemmaSuiteResult:
    """Outcome of one randomized inequality suite."""

    name: str
    draws: int
    failures: int
    worst_slack: float


def _random_population_pair(stream: NormalStream, n: int) -> MatrixPair:
    g = stream.matrix(n, n)
    a = (g + g.T) / 2.0
    m = stream.matrix(n, n)
    b = m @ m.T + np.eye(n)
    return MatrixPair(a=a, b=(b + b.T) / 2.0)


def run_lemma_suites(
    draws: int = 10_000,
    n_max: int = 8,
    seed: int = 0,
    draws_per_pair: int = 20,
) -> tuple[LemmaSuiteResult, ...]:
    """Randomized validation of all three inequalities.

    Pairs are drawn as (symmetric Gaussian A, Gram-plus-identity B) with
    dimensions cycling over 2..n_max; each pair is reused for
    `draws_per_pair` draws of (rho, x, y) so the eigendecomposition cost is
    amortized. Returns one result per inequality; every failure counts draws
    whose `holds` flag came back False. worst_slack is the most adverse
    margin observed (negative slack would mean a violation beyond
    tolerance).
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    pairs = (draws + draws_per_pair - 1) // draws_per_pair
    counts = {"sandwich": 0, "inner": 0, "coefficient": 0}
    fails = {"sandwich": 0, "inner": 0, "coefficient": 0}
    worst = {"sandwich": math.inf, "inner": math.inf, "coefficient": math.inf}

    done = 0
    for i in range(pairs):
        stream = NormalStream(seed, stream=i)
        n = 2 + (i % (n_max - 1))
        pair = _random_population_pair(stream, n)
        spectrum = generalized_eig(pair)
        lam = spectrum.eigenvalues
        if float(lam[0] - lam[1]) <= 1e-8:
            continue  # skip near-degenerate gaps; rho range would be empty
        todo = min(draws_per_pair, draws - done)
        for _ in range(todo):
            frac = stream.uniforms(1)[0]
            rho = float(lam[1]) + max(frac, 1e-12) * float(lam[0] - lam[1])
            x = stream.normals(n)
            y = stream.normals(n)
            eta = 0.5 * stream.uniforms(1)[0]

            s = check_lemma_sandwich(pair, rho, x, spectrum=spectrum)
            counts["sandwich"] += 1
            fails["sandwich"] += 0 if s.holds else 1
            worst["sandwich"] = min(
                worst["sandwich"], s.middle - s.lower, s.upper - s.middle
            )

            r = check_lemma_inner(pair, rho, eta, x, y, spectrum=spectrum)
            counts["inner"] += 1
            fails["inner"] += 0 if r.holds else 1
            worst["inner"] = min(worst["inner"], r.lhs - r.rhs)

            xu = x / float(np.linalg.norm(x))
            if float(xu @ spectrum.leading_unit) < 0:
                xu = -xu
            if float(xu @ spectrum.leading_unit) > 0:
                c = check_lemma_coefficient(pair, xu, spectrum=spectrum)
                counts["coefficient"] += 1
                fails["coefficient"] += 0 if c.holds else 1
                worst["coefficient"] = min(worst["coefficient"], c.rhs - c.lhs)
        done += todo
        if done >= draws:
            break

    return tuple(
        LemmaSuiteResult(
            name=name,
            draws=counts[name],
            failures=fails[name],
            worst_slack=worst[name],
        )
        for name in ("sandwich", "inner", "coefficient")
    )
