"""Explicit-Euler dynamics for the message-passing model family.

Each variant is one exact update rule on feature matrices.  ``step_model``
applies a single step; ``run_trajectory`` iterates it while keeping the state
as a unit-Frobenius direction plus a log-scale accumulator, so exponentially
growing or shrinking flows never overflow.  Renormalization is applied only
when the step commutes with scaling (homogeneous linear variants); runs with
an active source term or a nonlinearity iterate the raw state and report
overflow instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .energy import (
    WeightSet,
    as_features,
    dirichlet_energy,
    lp_energy,
    parametric_energy,
    rayleigh_quotient,
)
from .errors import ConfigurationError, NumericError, ValidationError
from .graphs import (
    Graph,
    adjacency_matrix,
    degree_vector,
    edge_array,
    normalized_adjacency,
    normalized_laplacian,
    spectral_decomposition,
)

__all__ = [
    "ModelSpec",
    "FeatureState",
    "Trajectory",
    "VARIANTS",
    "LINEAR_VARIANTS",
    "NONLINEAR_VARIANTS",
    "ACTIVATIONS",
    "normalize_variant",
    "step_model",
    "run_trajectory",
    "spectral_filter_step",
    "random_walk_laplacian",
]

LINEAR_VARIANTS = frozenset(
    {
        "gradient_flow",
        "no_residual",
        "graff",
        "heat",
        "label_propagation",
        "cgnn",
        "grand_linear",
        "pde_gcn_d",
        "harmonic",
        "laplacian_omega_eq_w",
    }
)
NONLINEAR_VARIANTS = frozenset(
    {"gradient_flow_nonlinear", "graff_nonlinear", "diag_nonlinear"}
)
VARIANTS = LINEAR_VARIANTS | NONLINEAR_VARIANTS

_WEIGHT_VARIANTS = frozenset(
    {
        "gradient_flow",
        "gradient_flow_nonlinear",
        "no_residual",
        "graff",
        "graff_nonlinear",
        "harmonic",
        "laplacian_omega_eq_w",
        "diag_nonlinear",
    }
)


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _tanh_relu(x: np.ndarray) -> np.ndarray:
    return np.tanh(np.maximum(x, 0.0))


#: Named entrywise activations; every entry satisfies x * sigma(x) >= 0.
ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda x: x,
    "relu": _relu,
    "tanh": np.tanh,
    "tanh_relu": _tanh_relu,
}


def normalize_variant(name: str) -> str:
    """Accept CamelCase, ACRONYM or snake_case variant names; return the
    canonical tag (e.g. ``GradientFlow``, ``GRAFF``, ``PDE-GCN_D`` all work)."""
    if not isinstance(name, str):
        raise ConfigurationError(f"variant must be a string, got {name!r}")
    text = name.strip().replace("-", "_")
    # underscore at lower->Upper boundaries and before the last capital of an
    # acronym run followed by a word (GRANDLinear -> GRAND_Linear)
    snake = re.sub(
        r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])", "_", text
    ).lower()
    snake = re.sub(r"__+", "_", snake)
    aliases = {
        "pde_gcnd": "pde_gcn_d",
        "pdegcnd": "pde_gcn_d",
        "grand": "grand_linear",
    }
    snake = aliases.get(snake, snake)
    if snake not in VARIANTS:
        raise ConfigurationError(
            f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}"
        )
    return snake


def resolve_sigma(sigma) -> Callable[[np.ndarray], np.ndarray]:
    if callable(sigma):
        return sigma
    if isinstance(sigma, str) and sigma in ACTIVATIONS:
        return ACTIVATIONS[sigma]
    raise ConfigurationError(
        f"unknown activation {sigma!r}; expected a callable or one of "
        f"{sorted(ACTIVATIONS)}"
    )


def _check_admissible_sigma(fn: Callable[[np.ndarray], np.ndarray]) -> None:
    """Sample the activation and require x * sigma(x) >= 0 everywhere."""
    xs = np.linspace(-5.0, 5.0, 1000)
    ys = np.asarray(fn(xs), dtype=float)
    if ys.shape != xs.shape or not np.all(np.isfinite(ys)):
        raise ValidationError("activation must map finite reals to finite reals")
    if float(np.min(xs * ys)) < -1e-12:
        raise ValidationError(
            "activation is inadmissible: x * sigma(x) < 0 at a sampled point"
        )


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of one dynamics: variant tag plus its parameters.

    ``weights`` feeds the weight-based variants (W, Omega, Wtilde, omega_diag,
    beta); ``mu`` is the label-propagation clamping strength; ``KtK`` the
    constant positive-semidefinite channel metric of the diffusion-with-metric
    variant; ``OmegaTilde`` the channel mixer of the residual-diffusion
    variant, whose constant source is dropped when ``source_free`` is set.
    """

    variant: str
    weights: WeightSet | None = None
    tau: float = 0.5
    sigma: str | Callable[[np.ndarray], np.ndarray] = "identity"
    mu: float = 0.0
    KtK: np.ndarray | None = None
    OmegaTilde: np.ndarray | None = None
    source_free: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        tau = float(self.tau)
        if not np.isfinite(tau) or tau <= 0:
            raise ValidationError(f"step size tau must be positive, got {self.tau!r}")
        object.__setattr__(self, "tau", tau)

        if self.variant in _WEIGHT_VARIANTS:
            if self.weights is None:
                raise ConfigurationError(f"variant {self.variant!r} needs weights")
            if not isinstance(self.weights, WeightSet):
                raise ConfigurationError("weights must be a WeightSet")
        if self.variant == "diag_nonlinear":
            if np.any(self.weights.omega_diag > 1e-12):
                raise ValidationError(
                    "diag_nonlinear requires nonpositive channel weights omega_diag"
                )
        if self.variant == "label_propagation":
            mu = float(self.mu)
            if not np.isfinite(mu) or mu < 0:
                raise ValidationError(
                    f"label propagation needs mu >= 0, got {self.mu!r}"
                )
            object.__setattr__(self, "mu", mu)
        if self.variant == "cgnn":
            if self.OmegaTilde is None:
                raise ConfigurationError("variant 'cgnn' needs OmegaTilde")
            ot = np.asarray(self.OmegaTilde, dtype=float)
            if ot.ndim != 2 or ot.shape[0] != ot.shape[1]:
                raise ValidationError("OmegaTilde must be a square matrix")
            if not np.all(np.isfinite(ot)):
                raise ValidationError("OmegaTilde contains non-finite entries")
            ot.setflags(write=False)
            object.__setattr__(self, "OmegaTilde", ot)
        if self.variant == "pde_gcn_d":
            if self.KtK is None:
                raise ConfigurationError("variant 'pde_gcn_d' needs KtK")
            ktk = np.asarray(self.KtK, dtype=float)
            if ktk.ndim != 2 or ktk.shape[0] != ktk.shape[1]:
                raise ValidationError("KtK must be a square matrix")
            scale = max(1.0, float(np.abs(ktk).max()))
            if float(np.abs(ktk - ktk.T).max()) > 1e-12 * scale:
                raise ValidationError("KtK must be symmetric")
            if float(np.linalg.eigvalsh(ktk).min()) < -1e-10:
                raise ValidationError("KtK must be positive semidefinite")
            ktk.setflags(write=False)
            object.__setattr__(self, "KtK", ktk)

        if self.variant in NONLINEAR_VARIANTS:
            _check_admissible_sigma(resolve_sigma(self.sigma))
        elif not (self.sigma == "identity" or self.sigma is None):
            raise ConfigurationError(
                f"variant {self.variant!r} is linear; an activation is only "
                "accepted by the *_nonlinear and diag_nonlinear variants"
            )

    @property
    def channels(self) -> int | None:
        if self.weights is not None:
            return self.weights.d
        if self.OmegaTilde is not None:
            return self.OmegaTilde.shape[0]
        if self.KtK is not None:
            return self.KtK.shape[0]
        return None

    @property
    def has_active_source(self) -> bool:
        """True when the update couples to the reference features F0."""
        v = self.variant
        if v in ("gradient_flow", "gradient_flow_nonlinear"):
            return self.weights.has_source
        if v in ("graff", "graff_nonlinear"):
            return self.weights.beta != 0.0
        if v == "cgnn":
            return not self.source_free
        if v == "label_propagation":
            return self.mu > 0.0
        return False

    @property
    def is_homogeneous(self) -> bool:
        """True when one step commutes with rescaling the state."""
        return self.variant in LINEAR_VARIANTS and not self.has_active_source


@dataclass(frozen=True)
class FeatureState:
    """Features as a unit-Frobenius direction times exp(log_scale)."""

    direction: np.ndarray
    log_scale: float

    def features(self) -> np.ndarray:
        """Materialize the raw feature matrix (may overflow for huge scales)."""
        return self.direction * float(np.exp(self.log_scale))


@dataclass(frozen=True)
class Trajectory:
    """Per-step diagnostics of one run, plus the final overflow-safe state.

    Arrays have one entry per recorded step, including the initial state at
    index 0; ``directions[k]`` is the unit-Frobenius state after k steps.
    """

    steps: np.ndarray
    times: np.ndarray
    rayleigh: np.ndarray
    dirichlet: np.ndarray
    energy: np.ndarray
    log_scale: np.ndarray
    directions: np.ndarray
    final: FeatureState


@lru_cache(maxsize=512)
def random_walk_laplacian(g: Graph) -> np.ndarray:
    """Random-walk Laplacian I - D^{-1} A of the self-loop-augmented graph."""
    a = adjacency_matrix(g) + np.eye(g.n)
    d = degree_vector(g) + 1.0
    lap = np.eye(g.n) - a / d[:, None]
    lap.setflags(write=False)
    return lap


def _flow_increment(spec: ModelSpec, g: Graph, F: np.ndarray, F0) -> np.ndarray:
    """The pre-activation update direction Z with step F + tau * sigma(Z)."""
    v = spec.variant
    w = spec.weights
    if v in ("gradient_flow", "gradient_flow_nonlinear"):
        z = -F @ w.Omega + normalized_adjacency(g) @ F @ w.W
        if w.has_source:
            z = z - _need_reference(spec, g, F0) @ w.Wtilde
        return z
    if v in ("graff", "graff_nonlinear"):
        z = -F * w.omega_diag[None, :] + normalized_adjacency(g) @ F @ w.W
        if w.beta != 0.0:
            z = z - w.beta * _need_reference(spec, g, F0)
        return z
    if v == "heat":
        return -normalized_laplacian(g) @ F
    if v == "label_propagation":
        z = -normalized_laplacian(g) @ F
        if spec.mu > 0.0:
            z = z - spec.mu * (F - _need_reference(spec, g, F0))
        return z
    if v == "cgnn":
        z = -normalized_laplacian(g) @ F + F @ spec.OmegaTilde
        if not spec.source_free:
            z = z + _need_reference(spec, g, F0)
        return z
    if v == "grand_linear":
        return -random_walk_laplacian(g) @ F
    if v == "pde_gcn_d":
        return -normalized_laplacian(g) @ F @ spec.KtK
    if v == "harmonic":
        return -normalized_laplacian(g) @ F @ (w.W @ w.W)
    if v == "laplacian_omega_eq_w":
        return -normalized_laplacian(g) @ F @ w.W
    if v == "diag_nonlinear":
        return normalized_laplacian(g) @ F * (-w.omega_diag[None, :])
    raise ConfigurationError(f"unhandled variant {v!r}")  # unreachable


def step_model(spec: ModelSpec, g: Graph, F, F0=None) -> np.ndarray:
    """One explicit-Euler step of the chosen variant.

    The discarding variant replaces the state by ``tau * A_bar F W``; all
    others are residual updates ``F + tau * sigma(Z)`` with the variant's
    pre-activation ``Z`` and sigma = identity for the linear family.
    """
    feats = as_features(g, F)
    _check_spec_channels(spec, feats)
    if spec.variant == "no_residual":
        out = spec.tau * (normalized_adjacency(g) @ feats @ spec.weights.W)
    else:
        z = _flow_increment(spec, g, feats, F0)
        if spec.variant in NONLINEAR_VARIANTS:
            z = resolve_sigma(spec.sigma)(z)
        out = feats + spec.tau * z
    if not np.all(np.isfinite(out)):
        raise NumericError(
            "step produced non-finite values (overflow); use run_trajectory, "
            "which keeps homogeneous linear dynamics renormalized"
        )
    return out


def run_trajectory(spec: ModelSpec, g: Graph, F0, steps: int) -> Trajectory:
    """Iterate ``step_model`` for ``steps`` steps with overflow-safe bookkeeping.

    For homogeneous linear variants the state is renormalized to unit
    Frobenius norm after every step and the removed log-factor accumulates in
    ``log_scale`` (the direction sequence is identical to the unnormalized
    one).  Source-coupled and nonlinear runs iterate the raw state; overflow
    raises a numeric error naming the failing step.
    """
    if not isinstance(steps, (int, np.integer)) or steps < 0:
        raise ValidationError(f"steps must be a nonnegative integer, got {steps!r}")
    feats = as_features(g, F0)
    _check_spec_channels(spec, feats)
    norm = float(np.linalg.norm(feats))
    if norm == 0.0:
        raise ValidationError("initial features must be nonzero")

    renormalize = spec.is_homogeneous
    reference = feats  # source / clamping reference, in raw units
    direction = feats / norm
    log_scale = float(np.log(norm))
    raw = feats

    count = int(steps) + 1
    rec_rayleigh = np.empty(count)
    rec_dirichlet = np.empty(count)
    rec_energy = np.empty(count)
    rec_log = np.empty(count)
    rec_dirs = np.empty((count,) + feats.shape)

    def record(k: int, dir_k: np.ndarray, log_k: float) -> None:
        rec_rayleigh[k] = rayleigh_quotient(g, dir_k)
        rec_dirichlet[k] = dirichlet_energy(g, dir_k)
        rec_energy[k] = _trajectory_energy(spec, g, dir_k, reference)
        rec_log[k] = log_k
        rec_dirs[k] = dir_k

    record(0, direction, log_scale)
    for k in range(1, count):
        if renormalize:
            new = step_model(spec, g, direction, F0=reference)
            step_norm = float(np.linalg.norm(new))
            if not np.isfinite(step_norm) or step_norm == 0.0:
                raise NumericError(
                    f"state collapsed or overflowed at step {k} "
                    f"(norm {step_norm!r})"
                )
            direction = new / step_norm
            log_scale += float(np.log(step_norm))
        else:
            try:
                raw = step_model(spec, g, raw, F0=reference)
            except NumericError as exc:
                raise NumericError(f"overflow at step {k}: {exc}") from None
            norm = float(np.linalg.norm(raw))
            if not np.isfinite(norm):
                # entries can still be finite while the sum of squares is not
                raise NumericError(
                    f"overflow at step {k}: feature norm exceeds the floating "
                    "range; reduce tau or the step count"
                )
            if norm == 0.0:
                raise NumericError(f"state collapsed to zero at step {k}")
            direction = raw / norm
            log_scale = float(np.log(norm))
        record(k, direction, log_scale)

    rec_dirs.setflags(write=False)
    return Trajectory(
        steps=np.arange(count),
        times=np.arange(count) * spec.tau,
        rayleigh=rec_rayleigh,
        dirichlet=rec_dirichlet,
        energy=rec_energy,
        log_scale=rec_log,
        directions=rec_dirs,
        final=FeatureState(direction=direction, log_scale=log_scale),
    )


def spectral_filter_step(g: Graph, W, tau: float, F) -> np.ndarray:
    """The gradient-flow step applied channel-wise in the eigenbasis of W.

    Diagonalizing W decouples the update into d independent scalar filters
    ``z_r <- z_r + tau * mu_r * A_bar z_r``; mapping back must agree with
    ``step_model`` for the residual-free gradient flow to machine precision.
    """
    feats = as_features(g, F)
    w = np.asarray(W, dtype=float)
    pair = spectral_decomposition(w)
    if pair.eigenvalues.shape[0] != feats.shape[1]:
        raise ValidationError(
            f"W must be {feats.shape[1]}x{feats.shape[1]} for these features"
        )
    z = feats @ pair.eigenvectors
    z = z + float(tau) * (normalized_adjacency(g) @ z) * pair.eigenvalues[None, :]
    return z @ pair.eigenvectors.T


def _need_reference(spec: ModelSpec, g: Graph, F0) -> np.ndarray:
    if F0 is None:
        raise ConfigurationError(
            f"variant {spec.variant!r} couples to the reference features; pass F0"
        )
    return as_features(g, F0, name="F0")


def _check_spec_channels(spec: ModelSpec, feats: np.ndarray) -> None:
    d = spec.channels
    if d is not None and d != feats.shape[1]:
        raise ValidationError(
            f"model expects d={d} channels but features have {feats.shape[1]}"
        )


def _trajectory_energy(spec: ModelSpec, g: Graph, direction: np.ndarray, ref) -> float:
    """The natural scalar energy of the unit direction for this variant."""
    v = spec.variant
    w = spec.weights
    if v in ("gradient_flow", "gradient_flow_nonlinear"):
        return parametric_energy(g, direction, w, F0=ref if w.has_source else None)
    if v == "no_residual":
        return parametric_energy(g, direction, WeightSet(W=w.W))
    if v in ("graff", "graff_nonlinear"):
        eff = WeightSet(
            W=w.W,
            Omega=np.diag(w.omega_diag),
            Wtilde=w.beta * np.eye(w.d),
        )
        return parametric_energy(g, direction, eff, F0=ref if w.beta != 0.0 else None)
    if v == "label_propagation":
        return lp_energy(g, direction, ref, spec.mu)
    if v == "harmonic":
        e = edge_array(g)
        scaled = direction / np.sqrt(degree_vector(g))[:, None]
        diffs = scaled[e[:, 1]] - scaled[e[:, 0]]
        return float(np.sum((diffs @ w.W.T) ** 2))
    if v == "laplacian_omega_eq_w":
        return parametric_energy(g, direction, WeightSet(W=w.W, Omega=w.W))
    return dirichlet_energy(g, direction)
