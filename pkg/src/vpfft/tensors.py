"""Symmetric tensor algebra in Mandel (orthonormal 6-vector) form.

Second-order tensors are arrays of shape ``(..., 6)`` ordered
``(xx, yy, zz, sqrt2*yz, sqrt2*xz, sqrt2*xy)``; fourth-order tensors are
arrays of shape ``(..., 6, 6)``. In this basis the double contraction is a
plain dot product and composition of fourth-order tensors is a matrix
product, so every function here broadcasts over leading axes.
"""
import numpy as np

SQRT2 = np.sqrt(2.0)

# (row, col) of the 3x3 tensor for every Mandel slot
MANDEL_INDEX = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
_WEIGHT = np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])

# in-plane slots (xx, yy, sqrt2*xy) used by the plane-strain solver
IN_PLANE = np.array([0, 1, 5])


class SingularTensorError(ArithmeticError):
    """Raised when a fourth-order tensor cannot be inverted reliably."""


def from_matrix(a):
    """Convert symmetric ``(..., 3, 3)`` tensors to Mandel ``(..., 6)``."""
    a = np.asarray(a, dtype=float)
    out = np.empty(a.shape[:-2] + (6,))
    for k, (i, j) in enumerate(MANDEL_INDEX):
        out[..., k] = 0.5 * (a[..., i, j] + a[..., j, i]) * _WEIGHT[k]
    return out


def to_matrix(m):
    """Convert Mandel ``(..., 6)`` vectors back to symmetric 3x3 matrices."""
    m = np.asarray(m, dtype=float)
    out = np.empty(m.shape[:-1] + (3, 3))
    for k, (i, j) in enumerate(MANDEL_INDEX):
        out[..., i, j] = out[..., j, i] = m[..., k] / _WEIGHT[k]
    return out


def identity2():
    return np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


def identity4():
    """Symmetric fourth-order identity ``Is``."""
    return np.eye(6)


def dyad(a, b):
    """Dyadic product ``a (x) b`` of second-order tensors."""
    return np.asarray(a)[..., :, None] * np.asarray(b)[..., None, :]


def identity_dyad():
    """``I (x) I``."""
    i = identity2()
    return dyad(i, i)


def deviatoric_projector():
    """``Id = Is - I(x)I/3``, mapping a tensor onto its deviatoric part."""
    return identity4() - identity_dyad() / 3.0


class StandardTensors:
    """Frequently used constant tensors, built once."""

    I = identity2()
    II = identity_dyad()
    Is = identity4()
    Id = deviatoric_projector()


def ddot(a, b):
    """Double contraction of two second-order tensors."""
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def ddot42(t, a):
    """Apply a fourth-order tensor to a second-order tensor, ``t : a``."""
    return np.einsum("...ij,...j->...i", t, a)


def ddot44(t, s):
    """Compose two fourth-order tensors, ``t : s``."""
    return np.matmul(t, s)


def trace(a):
    a = np.asarray(a)
    return a[..., 0] + a[..., 1] + a[..., 2]


def deviator(a):
    """Deviatoric part ``a - tr(a) I / 3``."""
    a = np.asarray(a, dtype=float)
    out = a.copy()
    out[..., :3] -= trace(a)[..., None] / 3.0
    return out


def equivalent_stress(s):
    """Von Mises equivalent stress ``sqrt(3/2 s^d : s^d)``."""
    d = deviator(s)
    return np.sqrt(1.5 * ddot(d, d))


def equivalent_strain(e):
    """Equivalent strain ``sqrt(2/3 e^d : e^d)``, work conjugate to the
    equivalent stress."""
    d = deviator(e)
    return np.sqrt(2.0 / 3.0 * ddot(d, d))


def invert4(t, cond_cap=1e12):
    """Invert fourth-order tensors on the 6-dimensional Mandel space.

    Raises
    ------
    SingularTensorError
        If any 6x6 matrix has a condition number above ``cond_cap``.
    """
    t = np.asarray(t, dtype=float)
    cond = np.linalg.cond(t)
    if np.any(~np.isfinite(cond) | (cond > cond_cap)):
        raise SingularTensorError(
            f"fourth-order tensor is singular (condition {np.max(cond):.3e} > {cond_cap:.1e})"
        )
    return np.linalg.inv(t)
