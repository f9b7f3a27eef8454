"""Structural priors and their (approximate) metric projections.

Each projector maps an arbitrary nonzero vector to the prior's feasible set:

* sphere: the full unit sphere (pure normalization);
* sparse: unit vectors with at most s nonzero entries;
* subspace: unit vectors in the span of an orthonormal basis (closed form);
* range: unit vectors output by a generative decoder (iterative, seeded).

Projections are deterministic; the range prior folds its Adam seed into the
projector so repeated calls agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import ZeroVector
from .generative import (
    Generator,
    LatentProjectionConfig,
    SubspaceGenerator,
    model_from_json,
    project_to_range,
    subspace_project,
)

__all__ = [
    "SphereProjector",
    "SparseProjector",
    "SubspaceProjector",
    "RangeProjector",
    "Projector",
    "project",
    "sparse_truncate",
    "projector_from_spec",
]


@dataclass(frozen=True)
class SphereProjector:
    """No structural restriction beyond unit norm."""


@dataclass(frozen=True)
class SparseProjector:
    """At most `s` nonzero entries."""

    s: int

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("sparsity level must be >= 1")


@dataclass(frozen=True, eq=False)
class SubspaceProjector:
    """Unit vectors in the span of an orthonormal n x k basis."""

    basis: NDArray[np.float64]
    _decoder: SubspaceGenerator = field(init=False, repr=False)

    def __post_init__(self):
        decoder = SubspaceGenerator(
            basis=np.asarray(self.basis, dtype=np.float64), latent_radius=1.0
        )
        object.__setattr__(self, "basis", decoder.basis)
        object.__setattr__(self, "_decoder", decoder)


@dataclass(frozen=True, eq=False)
class RangeProjector:
    """Range of a generative decoder, reached by seeded latent descent."""

    model: Generator
    config: LatentProjectionConfig = LatentProjectionConfig()


Projector = SphereProjector | SparseProjector | SubspaceProjector | RangeProjector


def sparse_truncate(x, s: int) -> NDArray[np.float64]:
    """Keep the s largest-magnitude entries, zero the rest, renormalize.

    This is the exact metric projection onto the set of unit vectors with at
    most s nonzeros. Magnitude ties are broken toward the lowest index.
    Raises ZeroVector when nothing survives truncation.
    """
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    if s < 1:
        raise ValueError("sparsity level must be >= 1")
    keep = np.argsort(-np.abs(xv), kind="stable")[:s]
    out = np.zeros_like(xv)
    out[keep] = xv[keep]
    norm = float(np.linalg.norm(out))
    if norm <= 1e-12:
        raise ZeroVector("nothing left after sparse truncation")
    return out / norm


def project(p: Projector, x) -> NDArray[np.float64]:
    """Project `x` onto the feasible set of prior `p`.

    Exact for sphere, sparse, and subspace priors; approximate (best of the
    configured restarts) for the range prior.
    """
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    if isinstance(p, SphereProjector):
        norm = float(np.linalg.norm(xv))
        if norm <= 1e-12:
            raise ZeroVector("cannot normalize a (near-)zero vector")
        return xv / norm
    if isinstance(p, SparseProjector):
        return sparse_truncate(xv, p.s)
    if isinstance(p, SubspaceProjector):
        return subspace_project(p._decoder, xv)
    if isinstance(p, RangeProjector):
        return project_to_range(p.model, xv, p.config).point
    raise TypeError(f"unknown projector type {type(p).__name__}")


def projector_from_spec(spec: dict, base_dir: str = ".") -> Projector:
    """Build a projector from its JSON description.

    Keys: "prior" in {"sphere", "sparse", "subspace", "range"}; "s" for the
    sparse level; "model_path" (relative to base_dir) for subspace and range
    priors; optional "projection" object with LatentProjectionConfig
    overrides for the range prior.
    """
    import json
    import os

    if not isinstance(spec, dict) or "prior" not in spec:
        raise ValueError("prior spec must be an object with a 'prior' key")
    kind = spec["prior"]
    if kind == "sphere":
        return SphereProjector()
    if kind == "sparse":
        if "s" not in spec:
            raise ValueError("sparse prior needs an 's' level")
        return SparseProjector(s=int(spec["s"]))
    if kind in ("subspace", "range"):
        path = spec.get("model_path")
        if not path:
            raise ValueError(f"{kind} prior needs a 'model_path'")
        with open(os.path.join(base_dir, path)) as fh:
            model = model_from_json(json.load(fh))
        if kind == "subspace":
            if not isinstance(model, SubspaceGenerator):
                raise ValueError("subspace prior requires a basis-form model")
            return SubspaceProjector(basis=model.basis)
        cfg = LatentProjectionConfig(**spec.get("projection", {}))
        return RangeProjector(model=model, config=cfg)
    raise ValueError(f"unknown prior {kind!r}")
