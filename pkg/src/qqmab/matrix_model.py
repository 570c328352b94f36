"""Finite quaternionic eigenproblems ``(H + L j)(phi + chi j) = (phi + chi j) eps``.

With the rule ``z j = j conj(z)`` the product splits into the complex pair::

    (H - eps) phi - L conj(chi) = 0
    (H - conj(eps)) chi + L conj(phi) = 0

(for real eps the two eps coincide).  Conjugating the second line and acting
on ``w = (phi, conj(chi))`` gives the doubled complex matrix::

    M = [[H, -L], [conj(L), conj(H)]],   M w = eps w

used as a brute-force eigensolver.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quaternion import Quaternion, quat_mul

HERMITIAN_TOL = 1e-12
COMMUTE_TOL = 1e-10


class PreconditionError(ValueError):
    """Raised when a matrix model does not meet an operation's precondition."""

    def __init__(self, message: str, deviation: float):
        super().__init__(f"{message} (deviation {deviation:.3e})")
        self.deviation = deviation


@dataclass(frozen=True, eq=False)
class MatrixModel:
    H: np.ndarray
    L: np.ndarray
    phi: np.ndarray
    chi: np.ndarray
    eps: complex = 0.0

    def __post_init__(self):
        H = np.asarray(self.H, complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("H must be square")
        dev = float(np.max(np.abs(H - H.conj().T), initial=0.0))
        if dev > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(H), initial=0.0))):
            raise PreconditionError("H is not hermitian", dev)
        n = H.shape[0]
        for name in ("L",):
            if np.shape(getattr(self, name)) != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
        for name in ("phi", "chi"):
            if np.shape(getattr(self, name)) != (n,):
                raise ValueError(f"{name} must have length {n}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "L", np.asarray(self.L, complex))
        object.__setattr__(self, "phi", np.asarray(self.phi, complex))
        object.__setattr__(self, "chi", np.asarray(self.chi, complex))

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def theta(self) -> np.ndarray:
        """[H, L]."""
        return self.H @ self.L - self.L @ self.H

    @property
    def operator(self) -> Quaternion:
        return Quaternion(self.H, self.L)

    @property
    def state(self) -> Quaternion:
        return Quaternion(self.phi, self.chi)


def quaternion_matvec(A: Quaternion, x: Quaternion) -> Quaternion:
    """Quaternionic matrix-vector product sum_k A_ik x_k, entrywise via quat_mul."""
    rows = A.z.shape[0]
    X = Quaternion(np.broadcast_to(x.z, (rows,) + x.z.shape), np.broadcast_to(x.zeta, (rows,) + x.zeta.shape))
    prod = quat_mul(A, X)
    return Quaternion(prod.z.sum(axis=1), prod.zeta.sum(axis=1))


@dataclass(frozen=True)
class SplitResidual:
    quaternionic: Quaternion
    first: np.ndarray
    second: np.ndarray
    identity_defect: float

    @property
    def quaternionic_norm(self) -> float:
        return float(np.sqrt(np.sum(self.quaternionic.norm2())))

    @property
    def pair_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.first) ** 2) + np.sum(np.abs(self.second) ** 2)))


def eigen_split_residual(mm: MatrixModel) -> SplitResidual:
    """Quaternionic residual (H + Lj)Phi - Phi eps against the complex pair.

    ``identity_defect`` is the larger of the componentwise mismatch and the
    mismatch between the squared norms, relative to the operator scale.
    """
    A = mm.operator
    Phi = mm.state
    eps = complex(mm.eps)
    lhs = quaternion_matvec(A, Phi)
    quat = lhs - Phi * eps
    first = (mm.H - eps * np.eye(mm.n)) @ mm.phi - mm.L @ mm.chi.conj()
    second = (mm.H - np.conj(eps) * np.eye(mm.n)) @ mm.chi + mm.L @ mm.phi.conj()
    scale = max(1.0, _scale(mm))
    comp = max(float(np.max(np.abs(quat.z - first))), float(np.max(np.abs(quat.zeta - second))))
    qn2 = float(np.sum(quat.norm2()))
    pn2 = float(np.sum(np.abs(first) ** 2) + np.sum(np.abs(second) ** 2))
    defect = max(comp / scale, abs(qn2 - pn2) / scale**2)
    return SplitResidual(quat, first, second, defect)


def _scale(mm: MatrixModel) -> float:
    nrm = np.linalg.norm
    return float((nrm(mm.H, 2) + nrm(mm.L, 2) + abs(mm.eps)) * max(nrm(mm.phi) + nrm(mm.chi), 1e-300))


def doubled_matrix(H: np.ndarray, L: np.ndarray) -> np.ndarray:
    """[[H, -L], [conj(L), conj(H)]] acting on (phi, conj(chi))."""
    H = np.asarray(H, complex)
    L = np.asarray(L, complex)
    return np.block([[H, -L], [L.conj(), H.conj()]])


def quaternionic_eigensolve(H: np.ndarray, L: np.ndarray) -> list[MatrixModel]:
    """All right eigenpairs of H + Lj from a dense solve of the doubled matrix."""
    n = np.shape(H)[0]
    vals, vecs = np.linalg.eig(doubled_matrix(H, L))
    out = []
    for k in np.argsort(vals.real + 1e-9 * vals.imag, kind="stable"):
        w = vecs[:, k]
        out.append(MatrixModel(H, L, w[:n], w[n:].conj(), complex(vals[k])))
    return out


def _real_eps(eps: complex) -> complex:
    return eps.real if abs(eps.imag) <= 1e-13 * max(1.0, abs(eps)) else eps


@dataclass(frozen=True)
class DecouplingResult:
    phi_residual: float
    chi_residual: float
    printed_phi_residual: float
    printed_chi_residual: float
    scale: float

    @property
    def max_residual(self) -> float:
        return max(self.phi_residual, self.chi_residual)


def _require_real_symmetric(H: np.ndarray):
    dev = float(np.max(np.abs(H.imag), initial=0.0))
    if dev > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(H)))):
        raise PreconditionError("H must be real symmetric for decoupling", dev)


def decouple_commuting(mm: MatrixModel, *, require_real: bool = True) -> DecouplingResult:
    """Residuals of [(H - eps)^2 + L conj(L)] phi and [(H - conj eps)^2 + L conj(L)] chi.

    Requires [H, L] = 0.  The decoupled equations follow from the split pair
    only when H is real; pass ``require_real=False`` to evaluate (not assert)
    the residual for complex H.  The unsquared form [(H - eps) + L conj(L)] Xi
    is evaluated as well and reported without judgement.
    """
    theta = mm.theta
    dev = float(np.max(np.abs(theta), initial=0.0))
    if dev > COMMUTE_TOL * max(1.0, _op_scale(mm) ** 2):
        raise PreconditionError("[H, L] does not vanish", dev)
    if require_real:
        _require_real_symmetric(mm.H)
    return _decoupled(mm, np.zeros_like(theta))


def decouple_noncommuting(mm: MatrixModel, *, operator_theta: bool = False) -> DecouplingResult:
    """Residuals of [(H - eps)^2 + L conj(L)] phi - theta conj(chi) and its partner.

    The partner equation is [(H - conj eps)^2 + L conj(L)] chi + theta conj(phi).
    By default theta = [H, L] must be a multiple of the identity; with
    ``operator_theta`` the matrix theta is used as is.
    """
    _require_real_symmetric(mm.H)
    theta = mm.theta
    if not operator_theta:
        c = np.trace(theta) / mm.n
        dev = float(np.max(np.abs(theta - c * np.eye(mm.n))))
        if dev > COMMUTE_TOL * max(1.0, _op_scale(mm) ** 2):
            raise PreconditionError("[H, L] is not a multiple of the identity", dev)
        theta = c * np.eye(mm.n)
    return _decoupled(mm, theta)


def _op_scale(mm: MatrixModel) -> float:
    return float(np.linalg.norm(mm.H, 2) + np.linalg.norm(mm.L, 2))


def _decoupled(mm: MatrixModel, theta: np.ndarray) -> DecouplingResult:
    eps = _real_eps(complex(mm.eps))
    I = np.eye(mm.n)
    A = mm.H - eps * I
    B = mm.H - np.conj(eps) * I
    LL = mm.L @ mm.L.conj()
    r_phi = (A @ A + LL) @ mm.phi - theta @ mm.chi.conj()
    r_chi = (B @ B + LL) @ mm.chi + theta @ mm.phi.conj()
    p_phi = (A + LL) @ mm.phi
    p_chi = (B + LL) @ mm.chi
    scale = float((_op_scale(mm) + abs(eps)) ** 2 * max(np.linalg.norm(mm.phi) + np.linalg.norm(mm.chi), 1e-300))
    nrm = np.linalg.norm
    return DecouplingResult(float(nrm(r_phi)) / scale, float(nrm(r_chi)) / scale,
                            float(nrm(p_phi)) / scale, float(nrm(p_chi)) / scale, scale)


def commutator_trace(H: np.ndarray, L: np.ndarray) -> complex:
    """tr [H, L]; always 0, so a scalar commutator c Id forces c = 0."""
    return complex(np.trace(H @ L - L @ H))


# ---------------------------------------------------------------------------
# constructions


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (A + A.conj().T) / 2


def random_model(n: int, rng: np.random.Generator) -> MatrixModel:
    """Random hermitian H, complex L, state and real eps."""
    c = lambda *s: rng.normal(size=s) + 1j * rng.normal(size=s)  # noqa: E731
    return MatrixModel(random_hermitian(n, rng), c(n, n), c(n), c(n), float(rng.normal()))


def commuting_real_pair(n: int, rng: np.random.Generator, *, antisymmetric_l: bool = False):
    """Real symmetric H and real L with [H, L] = 0, rotated by a random orthogonal matrix.

    With a symmetric (diagonal-in-basis) L the eigenvalues are complex;
    ``antisymmetric_l`` pairs degenerate levels of H with 2x2 rotation blocks
    of L and yields real eigenvalues.
    """
    O, _ = np.linalg.qr(rng.normal(size=(n, n)))
    if antisymmetric_l:
        if n % 2:
            raise ValueError("antisymmetric construction needs even n")
        h = np.repeat(rng.normal(size=n // 2), 2)
        L0 = np.zeros((n, n))
        for k, l in enumerate(rng.normal(size=n // 2)):
            L0[2 * k, 2 * k + 1], L0[2 * k + 1, 2 * k] = -l, l
    else:
        h = rng.normal(size=n)
        L0 = np.diag(rng.normal(size=n))
    H = O @ np.diag(h) @ O.T
    L = O @ L0 @ O.T
    return (H + H.T) / 2, L
