"""Generative decoders mapping a latent ball into the unit sphere.

Two families serve as desk-scale stand-ins for pretrained decoders: a
feed-forward MLP with explicit forward/backward passes, and a linear
subspace decoder that admits a closed-form projection oracle. Both expose
the same surface: `forward`, `backward`, `lipschitz_upper_bound`,
`project_to_range` (iterative, Adam in latent space), with
`subspace_project` as the exact oracle for the subspace family.

Stream usage: `random_mlp`/`random_subspace` draw from
NormalStream(seed, stream=0) (weights row-major then bias, layer by layer;
the subspace draws its n*k basis entries row-major). `project_to_range`
draws restart i's latent start from NormalStream(cfg.seed, stream=i).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import AllRestartsDegenerate, DegenerateOutput, DegenerateProjection
from .linalg import _eigvalsh
from .rng import NormalStream

__all__ = [
    "LatentClampWarning",
    "Layer",
    "MlpGenerator",
    "SubspaceGenerator",
    "LatentProjectionConfig",
    "RangeProjection",
    "forward",
    "backward",
    "lipschitz_upper_bound",
    "project_to_range",
    "subspace_project",
    "random_mlp",
    "random_subspace",
    "subspace_containing",
    "default_latent_radius",
    "model_to_json",
    "model_from_json",
]

#: Pre-normalization norm floor below which decoding is considered degenerate.
MIN_NORM_DEFAULT = 1e-6

ACTIVATIONS = ("relu", "sigmoid", "identity")

#: Lipschitz constant of each activation (sigmoid' peaks at 1/4).
_ACT_LIPSCHITZ = {"relu": 1.0, "sigmoid": 0.25, "identity": 1.0}


class LatentClampWarning(UserWarning):
    """Raised (as a warning) when a latent input is clamped to the ball."""


def default_latent_radius(latent_dim: int) -> float:
    """Desk-scale latent-radius convention r = 3 * sqrt(k)."""
    return 3.0 * math.sqrt(latent_dim)


@dataclass(frozen=True, eq=False)
class Layer:
    """One affine layer: activation(weight @ h + bias)."""

    weight: NDArray[np.float64]
    bias: NDArray[np.float64]
    activation: str

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 2:
            raise ValueError("layer weight must be 2-D")
        if b.shape[0] != w.shape[0]:
            raise ValueError(
                f"bias length {b.shape[0]} does not match weight rows {w.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)


@dataclass(frozen=True, eq=False)
class MlpGenerator:
    """Feed-forward decoder G: ball of radius r in R^k -> S^(n-1).

    When `normalized` is set the raw output is divided by its 2-norm;
    raw norms at or below `min_norm` raise DegenerateOutput instead of
    producing a meaningless direction.
    """

    layers: tuple[Layer, ...]
    latent_radius: float
    normalized: bool = True
    min_norm: float = MIN_NORM_DEFAULT

    def __post_init__(self):
        if not self.layers:
            raise ValueError("need at least one layer")
        dims = [self.layers[0].weight.shape[1]]
        for layer in self.layers:
            if layer.weight.shape[1] != dims[-1]:
                raise ValueError("layer dimensions do not chain")
            dims.append(layer.weight.shape[0])
        if dims[0] >= dims[-1]:
            raise ValueError("latent_dim must be smaller than output_dim")
        if self.latent_radius <= 0 or self.min_norm <= 0:
            raise ValueError("latent_radius and min_norm must be positive")
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def latent_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]


@dataclass(frozen=True, eq=False)
class SubspaceGenerator:
    """Linear decoder z -> Qz / ||Qz|| over an orthonormal basis Q (n x k)."""

    basis: NDArray[np.float64]
    latent_radius: float

    def __post_init__(self):
        q = np.asarray(self.basis, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] < q.shape[1]:
            raise ValueError("basis must be n x k with k <= n")
        gram = q.T @ q
        if np.max(np.abs(gram - np.eye(q.shape[1]))) > 1e-10:
            raise ValueError("basis columns are not orthonormal within 1e-10")
        if self.latent_radius <= 0:
            raise ValueError("latent_radius must be positive")
        object.__setattr__(self, "basis", q)

    @property
    def latent_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def output_dim(self) -> int:
        return self.basis.shape[0]


Generator = MlpGenerator | SubspaceGenerator


@dataclass(frozen=True)
class LatentProjectionConfig:
    """Adam settings for the iterative range projection."""

    steps: int = 100
    learning_rate: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.restarts < 1:
            raise ValueError("steps and restarts must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True, eq=False)
class RangeProjection:
    """Best point found by `project_to_range` and where it came from."""

    point: NDArray[np.float64]
    latent: NDArray[np.float64]
    distance: float
    restart_index: int


# ---------------------------------------------------------------------------
# forward / backward


def _clamp_latent(gen: Generator, z) -> NDArray[np.float64]:
    zv = np.asarray(z, dtype=np.float64).reshape(-1)
    if zv.shape[0] != gen.latent_dim:
        raise ValueError(f"latent has length {zv.shape[0]}, expected {gen.latent_dim}")
    norm = float(np.linalg.norm(zv))
    if norm > gen.latent_radius:
        # Rescaling-induced 1-ulp overshoots are silent; real violations warn.
        if norm > gen.latent_radius * (1.0 + 1e-9):
            warnings.warn(
                f"latent norm {norm:.6g} clamped to radius {gen.latent_radius:.6g}",
                LatentClampWarning,
                stacklevel=3,
            )
        zv = zv * (gen.latent_radius / norm)
    return zv


def _activate(name: str, x: NDArray[np.float64]) -> NDArray[np.float64]:
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-x))
    return x


def _activate_grad(name: str, pre: NDArray[np.float64], post: NDArray[np.float64]):
    if name == "relu":
        # Subgradient at exactly 0 is taken as 0.
        return (pre > 0.0).astype(np.float64)
    if name == "sigmoid":
        return post * (1.0 - post)
    return np.ones_like(pre)


def _mlp_trace(gen: MlpGenerator, z: NDArray[np.float64]):
    """Forward pass keeping per-layer (pre, post) activations."""
    h = z
    cache = []
    for layer in gen.layers:
        pre = layer.weight @ h + layer.bias
        post = _activate(layer.activation, pre)
        cache.append((pre, post))
        h = post
    return h, cache


def _raw_forward(gen: Generator, z: NDArray[np.float64]) -> NDArray[np.float64]:
    if isinstance(gen, SubspaceGenerator):
        return gen.basis @ z
    return _mlp_trace(gen, z)[0]


def forward(gen: Generator, z) -> NDArray[np.float64]:
    """Decode a latent vector to the generator's output sphere.

    Latents outside the ball are clamped to its boundary (and flagged with a
    LatentClampWarning). For a normalized generator the output has unit norm;
    DegenerateOutput is raised when the raw output norm is at or below the
    generator's floor, since no direction can be assigned.
    """
    zv = _clamp_latent(gen, z)
    raw = _raw_forward(gen, zv)
    if isinstance(gen, MlpGenerator) and not gen.normalized:
        return raw
    floor = gen.min_norm if isinstance(gen, MlpGenerator) else MIN_NORM_DEFAULT
    norm = float(np.linalg.norm(raw))
    if norm <= floor:
        raise DegenerateOutput(f"raw output norm {norm:.6g} <= {floor:.6g}")
    return raw / norm


def backward(gen: Generator, z, cotangent) -> NDArray[np.float64]:
    """Gradient of <forward(gen, z), cotangent> with respect to z.

    The normalization layer is differentiated analytically; ReLU uses
    subgradient 0 at kinks. Evaluated at the clamped latent, mirroring
    `forward`.
    """
    zv = _clamp_latent(gen, z)
    cot = np.asarray(cotangent, dtype=np.float64).reshape(-1)
    if cot.shape[0] != gen.output_dim:
        raise ValueError(
            f"cotangent has length {cot.shape[0]}, expected {gen.output_dim}"
        )

    if isinstance(gen, SubspaceGenerator):
        raw = gen.basis @ zv
        norm = float(np.linalg.norm(raw))
        if norm <= MIN_NORM_DEFAULT:
            raise DegenerateOutput(f"raw output norm {norm:.6g} too small")
        out = raw / norm
        grad_raw = (cot - float(out @ cot) * out) / norm
        return gen.basis.T @ grad_raw

    raw, cache = _mlp_trace(gen, zv)
    if gen.normalized:
        norm = float(np.linalg.norm(raw))
        if norm <= gen.min_norm:
            raise DegenerateOutput(f"raw output norm {norm:.6g} <= {gen.min_norm:.6g}")
        out = raw / norm
        grad = (cot - float(out @ cot) * out) / norm
    else:
        grad = cot
    for layer, (pre, post) in zip(reversed(gen.layers), reversed(cache)):
        grad = layer.weight.T @ (grad * _activate_grad(layer.activation, pre, post))
    return grad


def _weight_spectral_norm(w: NDArray[np.float64]) -> float:
    gram = w @ w.T if w.shape[0] <= w.shape[1] else w.T @ w
    gram = (gram + gram.T) / 2.0
    top = float(_eigvalsh(gram)[0])
    return math.sqrt(max(top, 0.0))


def lipschitz_upper_bound(gen: Generator) -> float:
    """Product-of-layer-norms Lipschitz bound on the raw (pre-norm) map."""
    if isinstance(gen, SubspaceGenerator):
        return 1.0  # orthonormal columns: exactly norm-preserving
    bound = 1.0
    for layer in gen.layers:
        bound *= _weight_spectral_norm(layer.weight) * _ACT_LIPSCHITZ[layer.activation]
    return bound


# ---------------------------------------------------------------------------
# range projection


def subspace_project(gen: SubspaceGenerator, x) -> NDArray[np.float64]:
    """Exact nearest unit vector in span(Q): QQ^T x / ||QQ^T x||."""
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    if xv.shape[0] != gen.output_dim:
        raise ValueError(f"target has length {xv.shape[0]}, expected {gen.output_dim}")
    coeff = gen.basis.T @ xv
    norm = float(np.linalg.norm(coeff))  # equals ||QQ^T x|| for orthonormal Q
    if norm <= 1e-12:
        raise DegenerateProjection("target is orthogonal to the subspace")
    return gen.basis @ (coeff / norm)


def _objective_and_grad(gen: Generator, z: NDArray[np.float64], x: NDArray[np.float64]):
    point = forward(gen, z)
    diff = point - x
    value = float(diff @ diff)
    grad = 2.0 * backward(gen, z, diff)
    return value, grad, point


def project_to_range(
    gen: Generator,
    x,
    cfg: LatentProjectionConfig,
    *,
    warm_starts: tuple = (),
) -> RangeProjection:
    """Approximate the closest range point to `x` by Adam in latent space.

    Runs `cfg.restarts` independent descents on z -> ||forward(gen, z) - x||^2
    (more if extra `warm_starts` are supplied; warm starts fill the first
    slots). Random starts are uniform in the ball of radius 0.9 * r, drawn
    from NormalStream(cfg.seed, stream=restart_index). After every Adam step
    the iterate is clipped back into the radius-r ball. Returns the best
    point seen anywhere along any trajectory, so the achieved distance never
    exceeds the distance at any sampled start; ties keep the earliest
    (lowest restart, earliest step) candidate.

    Raises AllRestartsDegenerate only if every restart dies with
    DegenerateOutput before recording a candidate.
    """
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    if xv.shape[0] != gen.output_dim:
        raise ValueError(f"target has length {xv.shape[0]}, expected {gen.output_dim}")
    if not np.all(np.isfinite(xv)):
        raise ValueError("target has non-finite entries")

    k = gen.latent_dim
    radius = gen.latent_radius
    total = max(cfg.restarts, len(warm_starts))
    best: RangeProjection | None = None

    for restart in range(total):
        if restart < len(warm_starts):
            z = np.asarray(warm_starts[restart], dtype=np.float64).reshape(-1)
            if z.shape[0] != k:
                raise ValueError("warm start has wrong latent dimension")
            norm = float(np.linalg.norm(z))
            if norm > radius:
                z = z * (radius / norm)
        else:
            z = NormalStream(cfg.seed, stream=restart).ball_point(k, 0.9 * radius)

        m = np.zeros(k)
        v = np.zeros(k)
        try:
            value, grad, point = _objective_and_grad(gen, z, xv)
        except DegenerateOutput:
            continue
        best = _candidate(point, z, value, restart, best)
        for step in range(1, cfg.steps + 1):
            m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad
            v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad * grad
            m_hat = m / (1.0 - cfg.adam_beta1**step)
            v_hat = v / (1.0 - cfg.adam_beta2**step)
            z = z - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
            norm = float(np.linalg.norm(z))
            if norm > radius:
                z = z * (radius / norm)
            try:
                value, grad, point = _objective_and_grad(gen, z, xv)
            except DegenerateOutput:
                break
            best = _candidate(point, z, value, restart, best)

    if best is None:
        raise AllRestartsDegenerate(f"all {total} restarts hit degenerate outputs")
    return best


def _candidate(
    point: NDArray[np.float64],
    z: NDArray[np.float64],
    value: float,
    restart: int,
    best: RangeProjection | None,
) -> RangeProjection:
    distance = math.sqrt(max(value, 0.0))
    if best is not None and distance >= best.distance:
        return best
    return RangeProjection(
        point=point.copy(), latent=z.copy(), distance=distance, restart_index=restart
    )


# ---------------------------------------------------------------------------
# seeded constructors


def random_mlp(
    output_dim: int,
    latent_dim: int,
    *,
    hidden: tuple[int, ...] = (),
    activation: str = "relu",
    seed: int = 0,
    latent_radius: float | None = None,
) -> MlpGenerator:
    """Random-weight MLP decoder (stand-in for a trained model).

    Weights are N(0, 2/fan_in) (He scaling), biases N(0, 0.01), drawn from
    NormalStream(seed, stream=0) layer by layer, weight row-major then bias.
    The final layer uses the identity activation so outputs are not confined
    to an orthant; earlier layers use `activation`.
    """
    if latent_dim >= output_dim:
        raise ValueError("latent_dim must be smaller than output_dim")
    stream = NormalStream(seed, stream=0)
    dims = [latent_dim, *hidden, output_dim]
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        w = stream.matrix(fan_out, fan_in) * math.sqrt(2.0 / fan_in)
        b = stream.normals(fan_out) * 0.1
        act = "identity" if i == len(dims) - 2 else activation
        layers.append(Layer(weight=w, bias=b, activation=act))
    radius = latent_radius if latent_radius is not None else default_latent_radius(latent_dim)
    return MlpGenerator(layers=tuple(layers), latent_radius=radius)


def _orthonormalize(columns: NDArray[np.float64]) -> NDArray[np.float64]:
    q, r = np.linalg.qr(columns)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def random_subspace(
    output_dim: int,
    latent_dim: int,
    *,
    seed: int = 0,
    latent_radius: float | None = None,
) -> SubspaceGenerator:
    """Uniformly random orthonormal basis (QR of a Gaussian matrix)."""
    stream = NormalStream(seed, stream=0)
    raw = stream.matrix(output_dim, latent_dim)
    radius = latent_radius if latent_radius is not None else default_latent_radius(latent_dim)
    return SubspaceGenerator(basis=_orthonormalize(raw), latent_radius=radius)


def subspace_containing(
    vector,
    latent_dim: int,
    *,
    seed: int = 0,
    latent_radius: float | None = None,
) -> SubspaceGenerator:
    """Random subspace whose span contains the given (nonzero) vector.

    The first basis column is the normalized vector itself; the remaining
    latent_dim - 1 columns complete it with seeded Gaussian draws.
    """
    v = np.asarray(vector, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(v))
    if norm <= 1e-12:
        raise ValueError("vector must be nonzero")
    n = v.shape[0]
    if not 1 <= latent_dim <= n:
        raise ValueError("need 1 <= latent_dim <= len(vector)")
    stream = NormalStream(seed, stream=0)
    cols = np.empty((n, latent_dim))
    cols[:, 0] = v / norm
    for j in range(1, latent_dim):
        cols[:, j] = stream.normals(n)
    q = _orthonormalize(cols)
    # QR keeps column 0 equal to +/- the input direction; force +.
    if float(q[:, 0] @ v) < 0.0:
        q[:, 0] = -q[:, 0]
    radius = latent_radius if latent_radius is not None else default_latent_radius(latent_dim)
    return SubspaceGenerator(basis=q, latent_radius=radius)


# ---------------------------------------------------------------------------
# serialization


def model_to_json(gen: Generator) -> dict:
    """Serialize a generator to its JSON model schema."""
    if isinstance(gen, SubspaceGenerator):
        return {
            "latent_dim": gen.latent_dim,
            "output_dim": gen.output_dim,
            "latent_radius": float(gen.latent_radius),
            "basis": [[float(x) for x in row] for row in gen.basis],
        }
    return {
        "latent_dim": gen.latent_dim,
        "output_dim": gen.output_dim,
        "latent_radius": float(gen.latent_radius),
        "normalized": bool(gen.normalized),
        "layers": [
            {
                "activation": layer.activation,
                "weight": [[float(x) for x in row] for row in layer.weight],
                "bias": [float(x) for x in layer.bias],
            }
            for layer in gen.layers
        ],
    }


def model_from_json(obj: dict) -> Generator:
    """Load a generator from its JSON form; validates the dimension chain."""
    if not isinstance(obj, dict):
        raise ValueError("model JSON must be an object")
    radius = float(obj.get("latent_radius", 0.0))
    if "basis" in obj:
        gen: Generator = SubspaceGenerator(
            basis=np.array(obj["basis"], dtype=np.float64), latent_radius=radius
        )
    elif "layers" in obj:
        layers = tuple(
            Layer(
                weight=np.array(entry["weight"], dtype=np.float64),
                bias=np.array(entry["bias"], dtype=np.float64),
                activation=str(entry["activation"]),
            )
            for entry in obj["layers"]
        )
        gen = MlpGenerator(
            layers=layers,
            latent_radius=radius,
            normalized=bool(obj.get("normalized", True)),
            min_norm=float(obj.get("min_norm", MIN_NORM_DEFAULT)),
        )
    else:
        raise ValueError("model JSON needs either 'layers' or 'basis'")
    if gen.latent_dim != int(obj["latent_dim"]) or gen.output_dim != int(obj["output_dim"]):
        raise ValueError("declared model dimensions do not match the data")
    return gen
