"""Real spherical harmonics, degrees 0-3, orthonormal convention.

Basis ordering is (l, m) = (0,0), (1,-1), (1,0), (1,1), (2,-2) ... (3,3),
16 functions total.  Polynomials are written in homogeneous form so that
values and Cartesian gradients are exact for unit direction vectors.
"""

from __future__ import annotations

import numpy as np

N_SH_COEFFS = 16
MAX_SH_DEGREE = 3

SH_C0 = 0.28209479177387814  # 1/2 sqrt(1/pi)
SH_C1 = 0.4886025119029199   # sqrt(3/(4 pi))
SH_C2 = (
    1.0925484305920792,      # xy, yz, xz
    0.31539156525252005,     # (2z^2 - x^2 - y^2)
    0.5462742152960396,      # (x^2 - y^2)
)
SH_C3 = (
    0.5900435899266435,      # y(3x^2 - y^2), x(x^2 - 3y^2)
    2.890611442640554,       # xyz
    0.4570457994644658,      # y(4z^2 - x^2 - y^2), x(4z^2 - x^2 - y^2)
    0.3731763325901154,      # z(2z^2 - 3x^2 - 3y^2)
    1.445305721320277,       # z(x^2 - y^2)
)

# Number of coefficients active at a given degree: (deg+1)^2.
def n_coeffs_for_degree(degree: int) -> int:
    return (min(degree, MAX_SH_DEGREE) + 1) ** 2


def eval_sh_basis(dirs: np.ndarray) -> np.ndarray:
    """Evaluate all 16 basis functions at unit directions.

    Args:
        dirs: (..., 3) unit vectors.

    Returns:
        (..., 16) basis values.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    xx, yy, zz = x * x, y * y, z * z

    out = np.empty(dirs.shape[:-1] + (N_SH_COEFFS,), dtype=np.float64)
    out[..., 0] = SH_C0
    out[..., 1] = SH_C1 * y
    out[..., 2] = SH_C1 * z
    out[..., 3] = SH_C1 * x
    out[..., 4] = SH_C2[0] * x * y
    out[..., 5] = SH_C2[0] * y * z
    out[..., 6] = SH_C2[1] * (2.0 * zz - xx - yy)
    out[..., 7] = SH_C2[0] * x * z
    out[..., 8] = SH_C2[2] * (xx - yy)
    out[..., 9] = SH_C3[0] * y * (3.0 * xx - yy)
    out[..., 10] = SH_C3[1] * x * y * z
    out[..., 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
    out[..., 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    out[..., 13] = SH_C3[2] * x * (4.0 * zz - xx - yy)
    out[..., 14] = SH_C3[4] * z * (xx - yy)
    out[..., 15] = SH_C3[0] * x * (xx - 3.0 * yy)
    return out


def eval_sh_basis_grad(dirs: np.ndarray) -> np.ndarray:
    """Cartesian gradients of the 16 basis polynomials.

    Gradients are of the homogeneous polynomials; project through the
    direction-normalization Jacobian to differentiate through a
    non-normalized direction.

    Args:
        dirs: (..., 3) unit vectors.

    Returns:
        (..., 16, 3) d(basis)/d(x, y, z).
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    xx, yy, zz = x * x, y * y, z * z
    zero = np.zeros_like(x)

    g = np.empty(dirs.shape[:-1] + (N_SH_COEFFS, 3), dtype=np.float64)
    g[..., 0, :] = 0.0
    g[..., 1, 0], g[..., 1, 1], g[..., 1, 2] = zero, SH_C1 + zero, zero
    g[..., 2, 0], g[..., 2, 1], g[..., 2, 2] = zero, zero, SH_C1 + zero
    g[..., 3, 0], g[..., 3, 1], g[..., 3, 2] = SH_C1 + zero, zero, zero
    c20 = SH_C2[0]
    g[..., 4, 0], g[..., 4, 1], g[..., 4, 2] = c20 * y, c20 * x, zero
    g[..., 5, 0], g[..., 5, 1], g[..., 5, 2] = zero, c20 * z, c20 * y
    c21 = SH_C2[1]
    g[..., 6, 0], g[..., 6, 1], g[..., 6, 2] = -2.0 * c21 * x, -2.0 * c21 * y, 4.0 * c21 * z
    g[..., 7, 0], g[..., 7, 1], g[..., 7, 2] = c20 * z, zero, c20 * x
    c22 = SH_C2[2]
    g[..., 8, 0], g[..., 8, 1], g[..., 8, 2] = 2.0 * c22 * x, -2.0 * c22 * y, zero
    c30, c31, c32, c33, c34 = SH_C3
    g[..., 9, 0], g[..., 9, 1], g[..., 9, 2] = c30 * 6.0 * x * y, c30 * (3.0 * xx - 3.0 * yy), zero
    g[..., 10, 0], g[..., 10, 1], g[..., 10, 2] = c31 * y * z, c31 * x * z, c31 * x * y
    g[..., 11, 0] = c32 * (-2.0 * x * y)
    g[..., 11, 1] = c32 * (4.0 * zz - xx - 3.0 * yy)
    g[..., 11, 2] = c32 * 8.0 * y * z
    g[..., 12, 0] = c33 * (-6.0 * x * z)
    g[..., 12, 1] = c33 * (-6.0 * y * z)
    g[..., 12, 2] = c33 * (6.0 * zz - 3.0 * xx - 3.0 * yy)
    g[..., 13, 0] = c32 * (4.0 * zz - 3.0 * xx - yy)
    g[..., 13, 1] = c32 * (-2.0 * x * y)
    g[..., 13, 2] = c32 * 8.0 * x * z
    g[..., 14, 0], g[..., 14, 1], g[..., 14, 2] = c34 * 2.0 * x * z, -c34 * 2.0 * y * z, c34 * (xx - yy)
    g[..., 15, 0], g[..., 15, 1], g[..., 15, 2] = c30 * (3.0 * xx - 3.0 * yy), c30 * (-6.0 * x * y), zero
    return g
