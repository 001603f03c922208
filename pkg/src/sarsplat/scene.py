"""Scene representation: anisotropic Gaussian scatterers.

A scene is stored struct-of-arrays for vectorized rendering; individual
scatterers can be viewed through :class:`GaussianPrimitive`.  The covariance
of each scatterer is parameterized as R(q) diag(exp(s))^2 R(q)^T so gradient
steps can never leave the positive-definite cone, and extinction
coefficients live in softplus pre-activation space so they stay positive
with non-vanishing gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from .sh import N_SH_COEFFS
from .validation import InvalidParameterError, as_float_array, check_unit_quaternion


def softplus(x):
    """Numerically stable log(1 + exp(x))."""
    x = np.asarray(x, dtype=np.float64)
    return np.logaddexp(0.0, x)


def softplus_inverse(y):
    """Inverse of softplus for y > 0: log(expm1(y))."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise InvalidParameterError("softplus_inverse requires positive input")
    return y + np.log(-np.expm1(-y))


def softplus_grad(x):
    """d softplus / dx = sigmoid(x)."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activate_extinction(raw: float) -> float:
    """Map an unconstrained pre-activation to a strictly positive extinction rate."""
    if not np.isfinite(raw):
        raise InvalidParameterError(f"extinction pre-activation is non-finite: {raw}")
    return float(softplus(raw))


def quats_to_rotation_matrices(quats: np.ndarray) -> np.ndarray:
    """Convert quaternions (w, x, y, z) to rotation matrices, normalizing first.

    Args:
        quats: (N, 4) array; rows need not be unit length.

    Returns:
        (N, 3, 3) rotation matrices.
    """
    q = np.asarray(quats, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def covariance_from_params(rotation, log_scales) -> np.ndarray:
    """Assemble the 3x3 covariance R(q) diag(exp(s))^2 R(q)^T.

    Args:
        rotation: unit quaternion (w, x, y, z).
        log_scales: per-axis log standard deviations, log-meters.

    Returns:
        Symmetric positive-definite 3x3 matrix with eigenvalues exp(2 s_i).
    """
    q = check_unit_quaternion(rotation)
    s = as_float_array(log_scales, "log_scales", (3,))
    R = quats_to_rotation_matrices(q[None])[0]
    M = R * np.exp(s)[None, :]
    cov = M @ M.T
    return 0.5 * (cov + cov.T)


def covariances_from_arrays(quats: np.ndarray, log_scales: np.ndarray) -> np.ndarray:
    """Vectorized covariance assembly for (N, 4) quats and (N, 3) log scales."""
    R = quats_to_rotation_matrices(quats)
    M = R * np.exp(log_scales)[:, None, :]
    cov = M @ np.swapaxes(M, -1, -2)
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


@dataclass(frozen=True)
class GaussianPrimitive:
    """One anisotropic scatterer.

    Attributes:
        position: world-frame center, meters.
        rotation: unit quaternion (w, x, y, z) for the covariance rotation factor.
        log_scales: log standard deviations per local axis, log-meters.
        sh_coeffs: 16 real-SH coefficients of the phase function, degrees 0-3.
        ke_forward_raw: softplus pre-activation of the forward extinction rate (1/m).
        ke_backward_raw: softplus pre-activation of the backward extinction rate (1/m).
    """

    position: np.ndarray
    rotation: np.ndarray
    log_scales: np.ndarray
    sh_coeffs: np.ndarray
    ke_forward_raw: float
    ke_backward_raw: float

    @property
    def ke_forward(self) -> float:
        return activate_extinction(self.ke_forward_raw)

    @property
    def ke_backward(self) -> float:
        return activate_extinction(self.ke_backward_raw)

    def covariance(self) -> np.ndarray:
        return covariance_from_params(self.rotation, self.log_scales)


@dataclass
class Scene:
    """Ordered collection of Gaussian scatterers, stored struct-of-arrays.

    Attributes:
        positions: (N, 3) centers, meters, world frame.
        rotations: (N, 4) unit quaternions (w, x, y, z).
        log_scales: (N, 3) log standard deviations.
        sh_coeffs: (N, 16) phase-function SH coefficients.
        ke_raw: (N, 2) extinction pre-activations, columns (forward, backward).
        metadata: free-form key/value pairs carried through serialization.
    """

    positions: np.ndarray
    rotations: np.ndarray
    log_scales: np.ndarray
    sh_coeffs: np.ndarray
    ke_raw: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.positions)
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(n, 3)
        self.rotations = np.ascontiguousarray(self.rotations, dtype=np.float64).reshape(n, 4)
        self.log_scales = np.ascontiguousarray(self.log_scales, dtype=np.float64).reshape(n, 3)
        self.sh_coeffs = np.ascontiguousarray(self.sh_coeffs, dtype=np.float64).reshape(n, N_SH_COEFFS)
        self.ke_raw = np.ascontiguousarray(self.ke_raw, dtype=np.float64).reshape(n, 2)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __iter__(self) -> Iterator[GaussianPrimitive]:
        return (self.primitive(i) for i in range(len(self)))

    def primitive(self, i: int) -> GaussianPrimitive:
        return GaussianPrimitive(
            position=self.positions[i].copy(),
            rotation=self.rotations[i].copy(),
            log_scales=self.log_scales[i].copy(),
            sh_coeffs=self.sh_coeffs[i].copy(),
            ke_forward_raw=float(self.ke_raw[i, 0]),
            ke_backward_raw=float(self.ke_raw[i, 1]),
        )

    @classmethod
    def from_primitives(cls, primitives, metadata: dict | None = None) -> "Scene":
        prims = list(primitives)
        if not prims:
            return cls.empty(metadata=metadata)
        return cls(
            positions=np.array([p.position for p in prims], dtype=np.float64),
            rotations=np.array([p.rotation for p in prims], dtype=np.float64),
            log_scales=np.array([p.log_scales for p in prims], dtype=np.float64),
            sh_coeffs=np.array([p.sh_coeffs for p in prims], dtype=np.float64),
            ke_raw=np.array(
                [[p.ke_forward_raw, p.ke_backward_raw] for p in prims], dtype=np.float64
            ),
            metadata=dict(metadata or {}),
        )

    @classmethod
    def empty(cls, metadata: dict | None = None) -> "Scene":
        return cls(
            positions=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)),
            log_scales=np.zeros((0, 3)),
            sh_coeffs=np.zeros((0, N_SH_COEFFS)),
            ke_raw=np.zeros((0, 2)),
            metadata=dict(metadata or {}),
        )

    def copy(self) -> "Scene":
        return Scene(
            positions=self.positions.copy(),
            rotations=self.rotations.copy(),
            log_scales=self.log_scales.copy(),
            sh_coeffs=self.sh_coeffs.copy(),
            ke_raw=self.ke_raw.copy(),
            metadata=dict(self.metadata),
        )

    def select(self, index) -> "Scene":
        """Scene restricted to the given boolean mask or index array."""
        return Scene(
            positions=self.positions[index],
            rotations=self.rotations[index],
            log_scales=self.log_scales[index],
            sh_coeffs=self.sh_coeffs[index],
            ke_raw=self.ke_raw[index],
            metadata=dict(self.metadata),
        )

    def normalized_rotations(self) -> np.ndarray:
        return self.rotations / np.linalg.norm(self.rotations, axis=1, keepdims=True)

    def covariances(self) -> np.ndarray:
        """(N, 3, 3) world-frame covariances."""
        return covariances_from_arrays(self.rotations, self.log_scales)

    def ke_activated(self) -> np.ndarray:
        """(N, 2) positive extinction rates (forward, backward)."""
        return softplus(self.ke_raw)

    def validate(self) -> None:
        for name in ("positions", "rotations", "log_scales", "sh_coeffs", "ke_raw"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr).all(axis=tuple(range(1, arr.ndim))))[0])
                raise InvalidParameterError(f"scene.{name} non-finite at primitive {bad}")
        norms = np.linalg.norm(self.rotations, axis=1)
        if len(self) and np.any(norms < 1e-12):
            bad = int(np.flatnonzero(norms < 1e-12)[0])
            raise InvalidParameterError(f"scene.rotations near-zero at primitive {bad}")


def concatenate_scenes(scenes) -> Scene:
    scenes = [s for s in scenes if len(s)]
    if not scenes:
        return Scene.empty()
    meta: dict[str, Any] = {}
    for s in scenes:
        meta.update(s.metadata)
    return Scene(
        positions=np.concatenate([s.positions for s in scenes]),
        rotations=np.concatenate([s.rotations for s in scenes]),
        log_scales=np.concatenate([s.log_scales for s in scenes]),
        sh_coeffs=np.concatenate([s.sh_coeffs for s in scenes]),
        ke_raw=np.concatenate([s.ke_raw for s in scenes]),
        metadata=meta,
    )
