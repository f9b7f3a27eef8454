"""Dense symmetric linear algebra for generalized eigenvalue problems.

Everything here works on plain float64 numpy arrays. Symmetric matrices are
validated by :func:`as_sym_matrix`; the pair (A, B) with B positive definite
is carried by :class:`MatrixPair`; full decompositions are returned as
:class:`GeneralizedSpectrum`.

The symmetric eigensolver is a cyclic Jacobi iteration: deterministic
(fixed rotation order, no data-dependent pivoting) and accurate to near
machine precision, which matters more than speed at the dimensions used
here (n up to a few hundred). The generalized problem is reduced to it by
Cholesky whitening; a singular B is refused, never regularized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DenominatorNearZero,
    NonConvergence,
    NotPositiveDefinite,
)
from .rng import NormalStream

__all__ = [
    "MatrixPair",
    "GeneralizedSpectrum",
    "as_sym_matrix",
    "sym_eig",
    "cholesky",
    "generalized_eig",
    "rayleigh_quotient",
    "spectral_norm",
    "condition_kappa",
    "crawford_number_estimate",
    "matrix_to_json",
    "matrix_from_json",
]

#: Cholesky pivots at or below this are treated as "not positive definite".
PIVOT_FLOOR = 1e-12

#: Relative symmetry tolerance for validating inputs.
SYMMETRY_RTOL = 1e-12


def as_sym_matrix(a, *, name: str = "matrix") -> NDArray[np.float64]:
    """Validate and return `a` as a float64 symmetric square matrix.

    Checks: two-dimensional, square, dim >= 1, all entries finite, and
    symmetric up to a relative tolerance of 1e-12 (scaled by the largest
    absolute entry).
    """
    arr = np.array(a, dtype=np.float64, order="C")
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError(f"{name} must have dim >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    scale = float(np.max(np.abs(arr))) or 1.0
    if np.max(np.abs(arr - arr.T)) > SYMMETRY_RTOL * scale:
        raise ValueError(f"{name} is not symmetric within tolerance")
    return arr


def _as_vector(u, n: int | None = None, *, name: str = "vector") -> NDArray[np.float64]:
    v = np.asarray(u, dtype=np.float64).reshape(-1)
    if n is not None and v.shape[0] != n:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


@dataclass(frozen=True, eq=False)
class MatrixPair:
    """A symmetric matrix `a` with a symmetric positive definite `b`.

    Construction validates symmetry, matching dimensions, and positive
    definiteness of `b` (Cholesky with all pivots > 1e-12); the lower
    Cholesky factor computed during validation is cached on the instance.
    """

    a: NDArray[np.float64]
    b: NDArray[np.float64]
    chol_lower: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self):
        a = as_sym_matrix(self.a, name="a")
        b = as_sym_matrix(self.b, name="b")
        if a.shape != b.shape:
            raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "chol_lower", cholesky(b))

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True, eq=False)
class GeneralizedSpectrum:
    """Full solution of A v = lambda B v for a definite pair.

    Fields
    ------
    eigenvalues : descending array of the n generalized eigenvalues
    eigenvectors : n x n array whose columns are B-orthonormal eigenvectors
        (v_i^T B v_j = delta_ij), signs fixed so each column's
        largest-magnitude entry is positive
    leading_unit : unit 2-norm version of the leading eigenvector (v*)
    scale_d : d = 1 / ||v_1||_2, so leading_unit = scale_d * v_1
    gap : lambda_1 - lambda_2 (inf when n == 1); consumers needing a
        simple leading eigenvalue must check this themselves
    """

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]
    leading_unit: NDArray[np.float64]
    scale_d: float
    gap: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


# ---------------------------------------------------------------------------
# symmetric eigendecomposition (cyclic Jacobi)


def _jacobi_sweeps(
    d: NDArray[np.float64],
    v: NDArray[np.float64] | None,
    max_sweeps: int,
) -> None:
    """Run cyclic Jacobi rotations on `d` in place until off-diagonal decay.

    `d` must be exactly symmetric on entry. If `v` is given, rotations are
    accumulated into it (columns become eigenvectors). Raises NonConvergence
    if the sweep budget runs out.
    """
    n = d.shape[0]
    fro = float(np.linalg.norm(d))
    if n == 1 or fro == 0.0:
        return
    stop = 1e-14 * fro
    # Entries below skip_floor cannot lift the off-diagonal norm above stop.
    skip_floor = stop / n
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(d - np.diag(np.diag(d))))
        if off <= stop:
            return
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = d[p, q]
                if abs(apq) <= skip_floor:
                    continue
                rotated = True
                theta = (d[q, q] - d[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.hypot(1.0, theta)
                )
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                app, aqq = d[p, p], d[q, q]
                colp = c * d[:, p] - s * d[:, q]
                colq = s * d[:, p] + c * d[:, q]
                d[:, p] = colp
                d[:, q] = colq
                d[p, :] = colp
                d[q, :] = colq
                # The 2x2 intersection block needs the two-sided formulas.
                d[p, p] = app - t * apq
                d[q, q] = aqq + t * apq
                d[p, q] = 0.0
                d[q, p] = 0.0
                if v is not None:
                    vp = c * v[:, p] - s * v[:, q]
                    v[:, q] = s * v[:, p] + c * v[:, q]
                    v[:, p] = vp
        if not rotated:
            return
    raise NonConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")


def _fix_signs(vectors: NDArray[np.float64]) -> None:
    """Flip columns in place so each largest-|entry| coordinate is positive."""
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        if col[int(np.argmax(np.abs(col)))] < 0.0:
            np.negative(col, out=col)


def _eigvalsh(s: NDArray[np.float64]) -> NDArray[np.float64]:
    """Descending eigenvalues only (skips eigenvector accumulation)."""
    d = (s + s.T) / 2.0
    _jacobi_sweeps(d, None, 100 * max(d.shape[0], 1))
    w = np.diag(d).copy()
    return w[np.argsort(-w, kind="stable")]


def sym_eig(
    s,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Parameters
    ----------
    s : array_like
        Symmetric matrix (validated by :func:`as_sym_matrix`).

    Returns
    -------
    (eigenvalues, eigenvectors)
        Eigenvalues in descending order; eigenvectors as the columns of an
        orthonormal matrix in matching order, signs fixed so each column's
        largest-magnitude entry is positive. Ties in the ordering are broken
        stably (original diagonal position).

    Raises
    ------
    NonConvergence
        If 100 * n sweeps do not reduce the off-diagonal norm.
    """
    a = as_sym_matrix(s)
    n = a.shape[0]
    d = (a + a.T) / 2.0
    v = np.eye(n)
    _jacobi_sweeps(d, v, 100 * n)
    w = np.diag(d).copy()
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    _fix_signs(v)
    return w, v


# ---------------------------------------------------------------------------
# Cholesky and triangular solves


def cholesky(b) -> NDArray[np.float64]:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises NotPositiveDefinite as soon as any pivot is <= 1e-12; callers
    that want to refuse near-singular matrices get that behavior for free.
    """
    a = as_sym_matrix(b)
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - low[j, :j] @ low[j, :j]
        if d <= 0.0:
            raise NotPositiveDefinite(f"pivot {d:.6g} <= 0 at column {j}")
        pivot = math.sqrt(d)
        if pivot <= PIVOT_FLOOR:
            raise NotPositiveDefinite(
                f"pivot {pivot:.6g} <= {PIVOT_FLOOR} at column {j}"
            )
        low[j, j] = pivot
        if j + 1 < n:
            low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / pivot
    return low


def _forward_sub(low: NDArray[np.float64], rhs: NDArray[np.float64]) -> NDArray[np.float64]:
    """Solve low @ X = rhs for lower-triangular `low` (rhs may be a matrix)."""
    x = np.array(rhs, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
        squeeze = True
    else:
        squeeze = False
    for i in range(low.shape[0]):
        x[i] = (x[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x[:, 0] if squeeze else x


def _back_sub(up: NDArray[np.float64], rhs: NDArray[np.float64]) -> NDArray[np.float64]:
    """Solve up @ X = rhs for upper-triangular `up` (rhs may be a matrix)."""
    x = np.array(rhs, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
        squeeze = True
    else:
        squeeze = False
    for i in range(up.shape[0] - 1, -1, -1):
        x[i] = (x[i] - up[i, i + 1 :] @ x[i + 1 :]) / up[i, i]
    return x[:, 0] if squeeze else x


# ---------------------------------------------------------------------------
# generalized eigenproblem


def generalized_eig(pair: MatrixPair) -> GeneralizedSpectrum:
    """Solve A v = lambda B v by Cholesky whitening.

    With B = L L^T, the symmetric problem C = L^-1 A L^-T is solved by
    :func:`sym_eig` and eigenvectors are mapped back through L^-T, then
    rescaled to exact B-orthonormality (v_i^T B v_i = 1) and sign-fixed.

    Returns a :class:`GeneralizedSpectrum`; see its field docs. Propagates
    NotPositiveDefinite (from pair construction) and NonConvergence.
    """
    low = pair.chol_lower
    x = _forward_sub(low, pair.a)
    c = _forward_sub(low, x.T).T
    c = (c + c.T) / 2.0
    w, q = sym_eig(c)
    vecs = _back_sub(low.T, q)
    # Columns are already near B-orthonormal; renormalize exactly.
    bv = pair.b @ vecs
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, bv))
    vecs /= norms
    _fix_signs(vecs)
    v1 = vecs[:, 0]
    v1_norm = float(np.linalg.norm(v1))
    scale_d = 1.0 / v1_norm
    leading = v1 * scale_d
    gap = float(w[0] - w[1]) if w.shape[0] > 1 else math.inf
    return GeneralizedSpectrum(
        eigenvalues=w,
        eigenvectors=vecs,
        leading_unit=leading,
        scale_d=scale_d,
        gap=gap,
    )


# ---------------------------------------------------------------------------
# scalars


def rayleigh_quotient(a, b, u) -> float:
    """Generalized Rayleigh quotient (u^T a u) / (u^T b u).

    Scale-invariant in u. The denominator guard rejects
    |u^T b u| <= 1e-12 * ||u||^2 * ||b||_F; the Frobenius norm is an upper
    bound on the spectral norm, so the guard is marginally conservative but
    avoids an O(n^3) norm computation per call.
    """
    am = as_sym_matrix(a, name="a")
    bm = as_sym_matrix(b, name="b")
    if am.shape != bm.shape:
        raise ValueError("a and b must have matching dimensions")
    v = _as_vector(u, am.shape[0], name="u")
    den = float(v @ bm @ v)
    floor = 1e-12 * float(v @ v) * float(np.linalg.norm(bm))
    if abs(den) <= floor:
        raise DenominatorNearZero(f"|u^T b u| = {abs(den):.6g} <= {floor:.6g}")
    return float(v @ am @ v) / den


def spectral_norm(s) -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    a = as_sym_matrix(s)
    w = _eigvalsh(a)
    return max(abs(float(w[0])), abs(float(w[-1])))


def condition_kappa(b) -> float:
    """Condition number lambda_max / lambda_min of a positive definite matrix."""
    a = as_sym_matrix(b)
    cholesky(a)  # rejects non-PD inputs with the standard pivot floor
    w = _eigvalsh(a)
    lo = float(w[-1])
    if lo <= 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {lo:.6g} <= 0")
    return float(w[0]) / lo


def crawford_number_estimate(pair: MatrixPair, samples: int, seed: int) -> float:
    """Sampled upper estimate of the definiteness measure of (A, B).

    Draws `samples` uniform unit vectors from NormalStream(seed, stream=0),
    one vector at a time (so a longer run extends a shorter one with the
    same seed), and returns the minimum of sqrt((u^T A u)^2 + (u^T B u)^2).
    The exact minimum over the sphere is >= lambda_min(B) for a definite
    pair; the sampled value only ever overestimates it.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    stream = NormalStream(seed, stream=0)
    n = pair.dim
    best = math.inf
    for _ in range(samples):
        u = stream.unit_vector(n)
        qa = float(u @ pair.a @ u)
        qb = float(u @ pair.b @ u)
        best = min(best, math.hypot(qa, qb))
    return best


# ---------------------------------------------------------------------------
# serialization


def matrix_to_json(a) -> dict:
    """Serialize a symmetric matrix to {"dim": n, "rows": [[...], ...]}.

    Values are emitted as Python floats; the JSON writer's shortest-repr
    encoding makes the round trip bit-stable under IEEE-754 parsing.
    """
    arr = as_sym_matrix(a)
    return {"dim": int(arr.shape[0]), "rows": [[float(x) for x in row] for row in arr]}


def matrix_from_json(obj: dict) -> NDArray[np.float64]:
    """Inverse of :func:`matrix_to_json`, with shape validation."""
    if not isinstance(obj, dict) or "dim" not in obj or "rows" not in obj:
        raise ValueError("matrix JSON must have 'dim' and 'rows' keys")
    n = int(obj["dim"])
    arr = np.array(obj["rows"], dtype=np.float64)
    if arr.shape != (n, n):
        raise ValueError(f"matrix JSON rows have shape {arr.shape}, expected ({n}, {n})")
    return as_sym_matrix(arr)
