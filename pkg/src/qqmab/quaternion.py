"""Quaternions in symplectic form ``q = z + zeta*j``.

Both components may be python complex scalars or numpy arrays of the same
shape, so a single :class:`Quaternion` can also hold a whole grid of values.
Arithmetic then acts elementwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

PURE_TOL = 1e-12


class QuaternionDomainError(ValueError):
    """Raised when an operation is called outside its domain."""


@dataclass(frozen=True, eq=False)
class Quaternion:
    z: complex | np.ndarray
    zeta: complex | np.ndarray = 0j

    # make ``ndarray * Quaternion`` dispatch to __rmul__ instead of broadcasting
    __array_ufunc__ = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_real4(cls, w, x, y, k) -> "Quaternion":
        """Build from Hamilton components ``w + x i + y j + k k``."""
        return cls(np.asarray(w) + 1j * np.asarray(x), np.asarray(y) + 1j * np.asarray(k))

    @classmethod
    def zeros(cls, shape) -> "Quaternion":
        return cls(np.zeros(shape, complex), np.zeros(shape, complex))

    # -- views ----------------------------------------------------------------
    def real4(self) -> np.ndarray:
        """Hamilton components stacked on the last axis: (w, x, y, k)."""
        z = np.asarray(self.z, complex)
        zeta = np.asarray(self.zeta, complex)
        z, zeta = np.broadcast_arrays(z, zeta)
        return np.stack([z.real, z.imag, zeta.real, zeta.imag], axis=-1)

    @property
    def shape(self) -> tuple:
        return np.broadcast(np.asarray(self.z), np.asarray(self.zeta)).shape

    def __getitem__(self, idx) -> "Quaternion":
        z, zeta = np.broadcast_arrays(np.asarray(self.z, complex), np.asarray(self.zeta, complex))
        return Quaternion(z[idx], zeta[idx])

    # -- algebra --------------------------------------------------------------
    def __add__(self, other):
        other = as_quaternion(other)
        return Quaternion(self.z + other.z, self.zeta + other.zeta)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_quaternion(other)
        return Quaternion(self.z - other.z, self.zeta - other.zeta)

    def __rsub__(self, other):
        return as_quaternion(other) - self

    def __neg__(self):
        return Quaternion(-self.z, -self.zeta)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return quat_mul(self, other)
        # complex scalar on the right: zeta*j*c = zeta*conj(c)*j
        return Quaternion(self.z * other, self.zeta * np.conj(other))

    def __rmul__(self, other):
        # complex scalar on the left commutes through z and zeta
        return Quaternion(other * self.z, other * self.zeta)

    def __truediv__(self, other):
        if isinstance(other, Quaternion):
            return quat_mul(self, quat_inverse(other))
        other = np.asarray(other)
        if np.iscomplexobj(other) and np.any(other.imag != 0):
            raise TypeError("divide by a real scalar or a Quaternion")
        return Quaternion(self.z / other.real, self.zeta / other.real)

    def conj(self) -> "Quaternion":
        return quat_conj(self)

    def norm2(self):
        return np.abs(self.z) ** 2 + np.abs(self.zeta) ** 2

    def norm(self):
        return np.sqrt(self.norm2())

    @property
    def real(self):
        return np.real(self.z)

    def __repr__(self) -> str:
        return f"Quaternion(z={self.z!r}, zeta={self.zeta!r})"


def as_quaternion(value) -> Quaternion:
    if isinstance(value, Quaternion):
        return value
    return Quaternion(value, 0j)


ONE = Quaternion(1 + 0j, 0j)
I = Quaternion(1j, 0j)
J = Quaternion(0j, 1 + 0j)
K = Quaternion(0j, 1j)


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Symplectic product (z1 + w1 j)(z2 + w2 j) using the rule ``c j = j conj(c)``."""
    return Quaternion(
        a.z * b.z - a.zeta * np.conj(b.zeta),
        a.z * b.zeta + a.zeta * np.conj(b.z),
    )


def quat_conj(a: Quaternion) -> Quaternion:
    return Quaternion(np.conj(a.z), -a.zeta)


def right_mul_i(a: Quaternion) -> Quaternion:
    """``a|i``, i.e. ``a * i`` with the imaginary unit acting from the right."""
    return Quaternion(1j * a.z, -1j * a.zeta)


def quat_inverse(a: Quaternion) -> Quaternion:
    n2 = a.norm2()
    if np.any(n2 == 0):
        raise QuaternionDomainError("zero quaternion has no inverse")
    c = quat_conj(a)
    return Quaternion(c.z / n2, c.zeta / n2)


def quat_exp(u: Quaternion, pure_tol: float = PURE_TOL) -> Quaternion:
    """Exponential of a pure imaginary quaternion (a unit quaternion).

    Works elementwise on array-valued input.
    """
    re = np.real(u.z)
    if np.any(np.abs(re) > pure_tol):
        raise QuaternionDomainError(
            f"quat_exp needs a pure quaternion; |real part| = {np.max(np.abs(re)):.3e}"
        )
    v = Quaternion(1j * np.imag(u.z), u.zeta)
    theta = v.norm()
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(theta > 1e-8, np.sin(theta) / np.where(theta > 0, theta, 1.0),
                        1.0 - theta**2 / 6.0)
    return Quaternion(np.cos(theta) + sinc * v.z, sinc * v.zeta)


class UnitPhaseAngles(NamedTuple):
    theta: float
    gamma: float
    omega: float


def k_from_angles(theta, gamma=None, omega=None) -> Quaternion:
    """``cos(theta) e^{i gamma} + sin(theta) e^{i omega} j``; arrays allowed.

    Also accepts a single :class:`UnitPhaseAngles`.
    """
    if isinstance(theta, UnitPhaseAngles):
        theta, gamma, omega = theta
    return Quaternion(np.cos(theta) * np.exp(1j * np.asarray(gamma)),
                      np.sin(theta) * np.exp(1j * np.asarray(omega)))


def real_matrix(a: Quaternion) -> np.ndarray:
    """4x4 real left-multiplication matrix acting on (w, x, y, k) columns."""
    w, x, y, k = np.moveaxis(a.real4(), -1, 0)
    return np.stack([
        np.stack([w, -x, -y, -k], -1),
        np.stack([x, w, -k, y], -1),
        np.stack([y, k, w, -x], -1),
        np.stack([k, -y, x, w], -1),
    ], -2)
