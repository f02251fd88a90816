"""Elementary 3D types: rotations, 9-DoF poses, and the SVD projection onto SO(3).

All functions are pure and operate on plain numpy arrays; a raw (unconstrained)
3x3 matrix is just an ndarray, while validated rotations are wrapped in
``Rotation`` so downstream code can rely on orthogonality.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMatrix

ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Rotation:
    """A 3x3 matrix constrained to SO(3) (orthogonal, det = +1)."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {m.shape}")
        err = np.linalg.norm(m.T @ m - np.eye(3))
        if err > 1e-7:
            raise ValueError(f"matrix is not orthogonal (|R^T R - I|_F = {err:.3e})")
        if abs(np.linalg.det(m) - 1.0) > 1e-7:
            raise ValueError("matrix has det != +1 (reflection or degenerate)")
        object.__setattr__(self, "m", m)

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.eye(3))

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation(project_to_so3(self.m @ other.m).m)

    def inverse(self) -> "Rotation":
        return Rotation(self.m.T)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.m.T


@dataclass(frozen=True)
class Pose9DoF:
    """Rotation + translation + anisotropic per-axis scale.

    Composition order is fixed: scale, then rotate, then translate,
    i.e. ``x_world = R @ (s * x) + t``.
    """

    r: Rotation = field(default_factory=Rotation.identity)
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    s: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        s = np.asarray(self.s, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(s))):
            raise ValueError("pose has non-finite components")
        if np.any(s <= 0):
            raise ValueError("pose scale components must be positive")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "s", s)

    @staticmethod
    def identity() -> "Pose9DoF":
        return Pose9DoF()


def project_to_so3(m: np.ndarray) -> Rotation:
    """Project an arbitrary 3x3 matrix onto the nearest rotation (Frobenius).

    Uses the SVD construction R = U diag(1, 1, det(U V^T)) V^T, which among
    all rotations minimizes |R - M|_F.

    Raises DegenerateMatrix when the two smallest singular values both vanish,
    in which case the nearest rotation is not unique.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise ValueError("expected a finite 3x3 matrix")
    u, sv, vt = np.linalg.svd(m)
    if sv[1] < 1e-12 and sv[2] < 1e-12:
        raise DegenerateMatrix(
            "two smallest singular values below 1e-12; nearest rotation not unique"
        )
    d = np.sign(np.linalg.det(u @ vt))
    r = u @ np.diag([1.0, 1.0, d]) @ vt
    # Re-orthogonalize to push numerical drift below the Rotation tolerance.
    u2, _, vt2 = np.linalg.svd(r)
    r = u2 @ np.diag([1.0, 1.0, np.sign(np.linalg.det(u2 @ vt2))]) @ vt2
    return Rotation(r)


def so3_projection_jacobian(m: np.ndarray) -> np.ndarray:
    """9x9 Jacobian d vec(R) / d vec(M) of the SO(3) projection (row-major vec).

    Derived from the SVD differential; only valid away from singular-value
    degeneracies (pairwise gaps should exceed ~1e-3 for accurate results).
    """
    m = np.asarray(m, dtype=np.float64)
    u, sv, vt = np.linalg.svd(m)
    v = vt.T
    d = np.sign(np.linalg.det(u @ vt))
    signs = np.array([1.0, 1.0, d])

    jac = np.zeros((9, 9))
    for row in range(3):
        for col in range(3):
            e = np.zeros((3, 3))
            e[row, col] = 1.0
            a = u.T @ e @ v
            # dR = U K V^T with K the pairwise-stable combination of the
            # SVD rotation differentials; diagonal entries vanish.
            k = np.zeros((3, 3))
            for i in range(3):
                for j in range(i + 1, 3):
                    if signs[i] == signs[j]:
                        # Removable singularity form: valid whenever
                        # sigma_i + sigma_j > 0, including repeated sigmas.
                        val = signs[i] * (a[i, j] - a[j, i]) / (sv[i] + sv[j])
                        k[i, j] = val
                        k[j, i] = -val
                    else:
                        # Reflection pair: unique only while sigma_i > sigma_j.
                        val = (a[i, j] + a[j, i]) / (sv[i] - sv[j])
                        k[i, j] = val
                        k[j, i] = val
            dr = u @ k @ v.T
            jac[:, 3 * row + col] = dr.reshape(-1)
    return jac


def chain_rotation_grad(m: np.ndarray, grad_r: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. the projected rotation back to the raw matrix."""
    jac = so3_projection_jacobian(m)
    return (jac.T @ np.asarray(grad_r, dtype=np.float64).reshape(-1)).reshape(3, 3)


def geodesic_distance(a: Rotation, b: Rotation) -> float:
    """Angle in radians of the relative rotation a^T b, clamped to [0, pi]."""
    c = (np.trace(a.m.T @ b.m) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def apply_pose(p: Pose9DoF, x: np.ndarray) -> np.ndarray:
    """Map canonical points to the world frame: R @ (s * x) + t.

    Accepts a single 3-vector or an (..., 3) batch.
    """
    x = np.asarray(x, dtype=np.float64)
    return (p.s * x) @ p.r.m.T + p.t


def inverse_apply_pose(p: Pose9DoF, y: np.ndarray) -> np.ndarray:
    """Map world points back to the canonical frame: S^-1 R^T (y - t)."""
    y = np.asarray(y, dtype=np.float64)
    return ((y - p.t) @ p.r.m) / p.s


def rotation_about_axis(axis: np.ndarray, angle: float) -> Rotation:
    """Rodrigues rotation by `angle` radians about a (non-zero) axis."""
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-15:
        raise ValueError("axis must be non-zero")
    k = axis / n
    kx = np.array([
        [0.0, -k[2], k[1]],
        [k[2], 0.0, -k[0]],
        [-k[1], k[0], 0.0],
    ])
    r = np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)
    return project_to_so3(r)


def random_rotation(rng: np.random.Generator) -> Rotation:
    """Uniform-ish random rotation from a projected Gaussian matrix."""
    return project_to_so3(rng.normal(size=(3, 3)))
