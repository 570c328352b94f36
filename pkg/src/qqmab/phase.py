"""K-phase wave functions, their vector potentials and constraint residuals.

A left quaternionic wave function ``Phi = K phi`` is parametrised by three
real angle fields through

    K = cos(Theta) e^{i Gamma} + sin(Theta) e^{i Omega} j,

and couples to the connection ``Q = alpha i + beta j`` (``alpha`` real,
``beta`` complex).  Every function here samples those objects on a
:class:`~qqmab.fields.GridSpec` and turns one of the constraint equations
into a residual field, summarised by a :class:`ResidualReport`.

Angles enter mostly through their gradients, which may be supplied directly
(needed when an angle is multivalued) or are otherwise taken by finite
differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fields import GridSpec, ScalarField, VectorField, diff, fd_divergence, fd_gradient, fd_laplacian
from .quaternion import Quaternion, quat_mul

SINGULAR_TOL = 1e-9
GRAD_ZERO_TOL = 1e-12


class ConstraintError(ValueError):
    """A constraint required by the construction is violated."""

    def __init__(self, message: str, violation: float):
        super().__init__(f"{message} (max violation {violation:.3e})")
        self.violation = violation


class SingularConfigurationError(ValueError):
    """sin/cos of Theta vanish where the formula divides by them."""


class DegenerateFamilyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers


def _dot(a, b):
    """Sum over the leading (component) axis."""
    return np.sum(a * b, axis=0)


def _qdot(a: Quaternion, b: Quaternion) -> Quaternion:
    prod = quat_mul(a, b)
    return Quaternion(np.sum(prod.z, axis=0), np.sum(prod.zeta, axis=0))


def _qscale(q: Quaternion, c) -> Quaternion:
    """q * c for complex c (c multiplies from the right)."""
    return q * c


def _as_array(values, grid: GridSpec):
    if isinstance(values, ScalarField):
        values = values.values
    if callable(values):
        values = values(*grid.coords())
    return np.broadcast_to(np.asarray(values), grid.shape)


def _as_vector(values, grid: GridSpec):
    if values is None:
        return None
    if isinstance(values, VectorField):
        values = values.values
    if callable(values):
        values = values(*grid.coords())
    return np.broadcast_to(np.asarray(values, float), (grid.dim,) + grid.shape)


def _near_multiple(x, period: float, offset: float = 0.0, tol: float = SINGULAR_TOL):
    r = np.mod(np.asarray(x) - offset + 0.5 * period, period) - 0.5 * period
    return np.abs(r) < tol


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True, eq=False)
class PhaseTriple:
    """Sampled Theta, Gamma, Omega plus optional exact gradients/Laplacians."""

    grid: GridSpec
    theta: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    grad_theta: np.ndarray | None = None
    grad_gamma: np.ndarray | None = None
    grad_omega: np.ndarray | None = None
    lap_theta: np.ndarray | None = None
    lap_gamma: np.ndarray | None = None
    lap_omega: np.ndarray | None = None

    @classmethod
    def build(cls, grid: GridSpec, theta, gamma, omega, *, grads=None, laps=None) -> "PhaseTriple":
        """Accepts arrays, constants or callables ``f(x, y, ...)`` for every entry.

        ``grads``/``laps`` are optional dicts keyed by ``"theta"``,
        ``"gamma"``, ``"omega"``.
        """
        grads = grads or {}
        laps = laps or {}
        kw = {}
        for name in ("theta", "gamma", "omega"):
            if name in grads:
                kw[f"grad_{name}"] = _as_vector(grads[name], grid)
            if name in laps:
                kw[f"lap_{name}"] = _as_array(laps[name], grid).astype(float)
        return cls(grid, _as_array(theta, grid).astype(float), _as_array(gamma, grid).astype(float),
                   _as_array(omega, grid).astype(float), **kw)

    def gradient(self, name: str) -> np.ndarray:
        given = getattr(self, f"grad_{name}")
        if given is not None:
            return given
        return fd_gradient(ScalarField(self.grid, getattr(self, name))).values

    def laplacian(self, name: str) -> np.ndarray:
        given = getattr(self, f"lap_{name}")
        if given is not None:
            return given
        if getattr(self, f"grad_{name}") is not None:
            return fd_divergence(VectorField(self.grid, self.gradient(name))).values
        return fd_laplacian(ScalarField(self.grid, getattr(self, name))).values

    def k_field(self) -> Quaternion:
        return Quaternion(np.cos(self.theta) * np.exp(1j * self.gamma),
                          np.sin(self.theta) * np.exp(1j * self.omega))

    def theta_is_constant(self, tol: float = GRAD_ZERO_TOL) -> bool:
        return bool(np.nanmax(np.abs(self.gradient("theta"))) <= tol)


@dataclass(frozen=True, eq=False)
class KDerivatives:
    """grad K = p e^{iG} + q e^{iW} j,  lap K = u e^{iG} + v e^{iW} j."""

    p: np.ndarray
    q: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def grad_k(self, ph: PhaseTriple) -> Quaternion:
        return Quaternion(self.p * np.exp(1j * ph.gamma), self.q * np.exp(1j * ph.omega))

    def lap_k(self, ph: PhaseTriple) -> Quaternion:
        return Quaternion(self.u * np.exp(1j * ph.gamma), self.v * np.exp(1j * ph.omega))


def k_derivatives_analytic(ph: PhaseTriple) -> KDerivatives:
    c, s = np.cos(ph.theta), np.sin(ph.theta)
    gt, gg, go = ph.gradient("theta"), ph.gradient("gamma"), ph.gradient("omega")
    lt, lg, lo = ph.laplacian("theta"), ph.laplacian("gamma"), ph.laplacian("omega")
    p = -s * gt + 1j * c * gg
    q = c * gt + 1j * s * go
    gt2 = _dot(gt, gt)
    u = -c * (_dot(gg, gg) + gt2) - s * lt + 1j * (c * lg - 2 * s * _dot(gg, gt))
    v = -s * (_dot(go, go) + gt2) + c * lt + 1j * (s * lo + 2 * c * _dot(go, gt))
    return KDerivatives(p, q, u, v)


def k_derivatives_fd(ph: PhaseTriple) -> KDerivatives:
    """Same quantities from finite differences of the sampled K field."""
    K = ph.k_field()
    g = ph.grid
    grad = [diff(K, g, a) for a in range(g.dim)]
    lap = None
    from .fields import diff2
    for a in range(g.dim):
        t = diff2(K, g, a)
        lap = t if lap is None else lap + t
    eg, eo = np.exp(-1j * ph.gamma), np.exp(-1j * ph.omega)
    p = np.stack([d.z for d in grad]) * eg
    q = np.stack([d.zeta for d in grad]) * eo
    return KDerivatives(p, q, lap.z * eg, lap.zeta * eo)


def k_derivatives(ph: PhaseTriple, source: str = "analytic") -> KDerivatives:
    if source == "analytic":
        return k_derivatives_analytic(ph)
    if source == "fd":
        return k_derivatives_fd(ph)
    raise ValueError(f"unknown derivative source {source!r}")


@dataclass(frozen=True, eq=False)
class PotentialPair:
    """Q = alpha i + beta j with real ``alpha`` and complex ``beta`` (component axis first)."""

    grid: GridSpec
    alpha: np.ndarray
    beta: np.ndarray
    div_alpha: np.ndarray | None = None
    div_beta: np.ndarray | None = None

    def __post_init__(self):
        alpha = np.asarray(self.alpha)
        if np.iscomplexobj(alpha):
            if np.nanmax(np.abs(alpha.imag), initial=0.0) > 0:
                raise ConstraintError("alpha must be real", float(np.nanmax(np.abs(alpha.imag))))
            alpha = alpha.real
        object.__setattr__(self, "alpha", np.asarray(alpha, float))
        object.__setattr__(self, "beta", np.asarray(self.beta, complex))

    @property
    def Q(self) -> Quaternion:
        return Quaternion(1j * self.alpha, self.beta)

    @property
    def eta(self) -> np.ndarray:
        """Q.Q = -(|alpha|^2 + sum |beta_k|^2)."""
        return -(_dot(self.alpha, self.alpha) + _dot(np.abs(self.beta), np.abs(self.beta)))

    def divergence_alpha(self) -> np.ndarray:
        if self.div_alpha is not None:
            return self.div_alpha
        return fd_divergence(VectorField(self.grid, self.alpha)).values

    def divergence_beta(self) -> np.ndarray:
        if self.div_beta is not None:
            return self.div_beta
        return fd_divergence(VectorField(self.grid, self.beta)).values

    def div_Q(self) -> Quaternion:
        return Quaternion(1j * self.divergence_alpha(), self.divergence_beta())

    def perturbed(self, d_alpha=None, d_beta=None) -> "PotentialPair":
        a = self.alpha if d_alpha is None else self.alpha + d_alpha
        b = self.beta if d_beta is None else self.beta + d_beta
        return PotentialPair(self.grid, a, b)


# ---------------------------------------------------------------------------
# reports


@dataclass(eq=False)
class EquationResidual:
    label: str
    field: np.ndarray | Quaternion
    magnitude: np.ndarray
    max: float
    mean: float

    @classmethod
    def of(cls, label: str, values, region: np.ndarray | None = None) -> "EquationResidual":
        if isinstance(values, Quaternion):
            mag = np.asarray(values.norm(), float)
        else:
            values = np.asarray(values)
            mag = np.abs(values)
            if mag.ndim > (region.ndim if region is not None else mag.ndim):
                mag = np.sqrt(np.sum(mag**2, axis=0))
        mag = np.array(mag, float)
        if region is not None:
            mag = np.where(region, mag, np.nan)
        finite = mag[np.isfinite(mag)]
        mx = float(finite.max()) if finite.size else 0.0
        mean = float(finite.mean()) if finite.size else 0.0
        return cls(label, values, mag, mx, mean)


@dataclass(eq=False)
class ResidualReport:
    equations: dict[str, EquationResidual]
    grid: dict
    config: dict = field(default_factory=dict)

    @classmethod
    def build(cls, grid: GridSpec, items: dict, config: dict | None = None,
              region: np.ndarray | None = None) -> "ResidualReport":
        region = grid.valid if region is None else (region & grid.valid)
        eqs = {k: EquationResidual.of(k, v, region) for k, v in items.items()}
        return cls(eqs, grid.metadata(), dict(config or {}))

    def __getitem__(self, label: str) -> EquationResidual:
        return self.equations[label]

    @property
    def max(self) -> float:
        return max(e.max for e in self.equations.values())

    def to_dict(self) -> dict:
        return {
            "equations": [{"label": e.label, "max": e.max, "mean": e.mean}
                          for e in self.equations.values()],
            "grid": self.grid,
            "config": self.config,
        }


# ---------------------------------------------------------------------------
# potentials


def _lam_array(lam, grid: GridSpec) -> np.ndarray:
    return np.broadcast_to(np.asarray(lam, complex), grid.shape)


def _check_not_singular(theta, where: np.ndarray | None = None, what="cos(Theta)"):
    bad = _near_multiple(theta, np.pi, np.pi / 2) if what == "cos(Theta)" else _near_multiple(theta, np.pi)
    if where is not None:
        bad = bad & where
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise SingularConfigurationError(f"{what} vanishes at node {node}")


def reality_check(ph: PhaseTriple, lam) -> float:
    """max |(tan^2 Theta - |lambda|^2) grad Theta| over the valid nodes."""
    _check_not_singular(ph.theta, ph.grid.valid)
    lam = _lam_array(lam, ph.grid)
    gt = ph.gradient("theta")
    viol = np.abs(np.tan(ph.theta) ** 2 - np.abs(lam) ** 2) * np.sqrt(_dot(gt, gt))
    viol = np.where(ph.grid.valid, viol, np.nan)
    return float(np.nanmax(viol)) if np.isfinite(viol).any() else 0.0


def potentials_from_phase(ph: PhaseTriple, lam, tol: float = 1e-9) -> PotentialPair:
    """alpha, beta that solve the gradient-coefficient constraints for a given lambda."""
    violation = reality_check(ph, lam)
    if violation > tol:
        raise ConstraintError("alpha is not real for this (phase, lambda)", violation)
    lam = _lam_array(lam, ph.grid)
    l2 = np.abs(lam) ** 2
    gt, gg, go = ph.gradient("theta"), ph.gradient("gamma"), ph.gradient("omega")
    alpha = (gg + l2 * go) / (1 + l2)
    moving = np.sqrt(_dot(gt, gt)) > GRAD_ZERO_TOL
    sin2 = np.sin(2 * ph.theta)
    _check_not_singular(ph.theta, moving & ph.grid.valid, what="sin(2 Theta)")
    _check_not_singular(ph.theta, moving & ph.grid.valid, what="cos(Theta)")
    safe = np.where(moving, sin2, 1.0)
    theta_term = np.where(moving, 2 * gt / safe, 0.0)
    beta = lam / (1 + l2) * (theta_term + 1j * (gg - go))
    return PotentialPair(ph.grid, alpha, beta)


# ---------------------------------------------------------------------------
# residuals of the master equation and its symplectic parts


def _phi_and_grad(phi, grid: GridSpec):
    phi = np.asarray(_as_array(phi, grid), complex)
    return phi, fd_gradient(ScalarField(grid, phi)).values


def master_residual(ph: PhaseTriple, pot: PotentialPair, phi, *, kd: KDerivatives | None = None,
                    derivatives: str = "fd", region=None, config=None) -> ResidualReport:
    """Quaternion residual of the K-phase ansatz in the Schrodinger equation.

    [lap K - (div Q) K - 2 Q.grad K + (Q.Q) K] phi + 2 (grad K - Q K).grad phi

    Evaluated with quaternion products throughout.  ``derivatives`` selects
    finite differences of the sampled K (default) or the closed-form
    K derivatives when ``kd`` is not given.
    """
    kd = kd or k_derivatives(ph, derivatives)
    phi, gphi = _phi_and_grad(phi, ph.grid)
    K = ph.k_field()
    Q = pot.Q
    gK = kd.grad_k(ph)
    QQ = _qdot(Q, Q)
    bracket = kd.lap_k(ph) - quat_mul(pot.div_Q(), K) - 2 * _qdot(Q, gK) + quat_mul(QQ, K)
    Kb = Quaternion(np.broadcast_to(K.z, Q.z.shape), np.broadcast_to(K.zeta, Q.zeta.shape))
    cov = gK - quat_mul(Q, Kb)
    grad_term = cov * gphi
    res = bracket * phi + 2 * Quaternion(np.sum(grad_term.z, 0), np.sum(grad_term.zeta, 0))
    return ResidualReport.build(ph.grid, {"q_ctr": res}, config, region)


def _split_parts(ph, pot, kd, phi, gphi):
    c, s = np.cos(ph.theta), np.sin(ph.theta)
    eg, emo = np.exp(1j * ph.gamma), np.exp(-1j * ph.omega)
    p, q, u, v = kd.p, kd.q, kd.u, kd.v
    a, b = pot.alpha, pot.beta
    da, db = pot.divergence_alpha(), pot.divergence_beta()
    eta = pot.eta
    qb, bb = np.conj(q), np.conj(b)
    cqe = (((u - 1j * c * da - 2j * _dot(a, p) + c * eta) * eg
            + (s * db + 2 * _dot(b, qb)) * emo) * phi
           + 2 * _dot((p - 1j * c * a) * eg + s * b * emo, gphi))
    qqe = (((np.conj(v) + 1j * s * da + 2j * _dot(a, qb) + s * eta) * emo
            - (c * np.conj(db) + 2 * _dot(bb, p)) * eg) * phi
           + 2 * _dot((qb + 1j * s * a) * emo - c * bb * eg, gphi))
    return cqe, qqe


def split_residuals(ph: PhaseTriple, pot: PotentialPair, phi, *, kd: KDerivatives | None = None,
                    derivatives: str = "fd", region=None, config=None) -> ResidualReport:
    """Complex (``cqe``) and j-part (``qqe``) equations evaluated from their closed forms.

    ``qqe`` is the complex conjugate of the j-component of the master
    residual, so ``|master|^2 = |cqe|^2 + |qqe|^2`` node by node.
    """
    kd = kd or k_derivatives(ph, derivatives)
    phi, gphi = _phi_and_grad(phi, ph.grid)
    cqe, qqe = _split_parts(ph, pot, kd, phi, gphi)
    return ResidualReport.build(ph.grid, {"cqe": cqe, "qqe": qqe}, config, region)


def _constraint_terms(ph, pot, kd, lam):
    c, s = np.cos(ph.theta), np.sin(ph.theta)
    p, q, u, v = kd.p, kd.q, kd.u, kd.v
    a, b = pot.alpha, pot.beta
    da, db = pot.divergence_alpha(), pot.divergence_beta()
    eta = pot.eta
    qb, bb = np.conj(q), np.conj(b)
    lam = _lam_array(lam, ph.grid)
    A = u - 1j * c * da - 2j * _dot(a, p) + c * eta
    Bp = c * np.conj(db) + 2 * _dot(bb, p)
    Aq = np.conj(v) + 1j * s * da + 2j * _dot(a, qb) + s * eta
    B = s * db + 2 * _dot(b, qb)
    return {
        "C1": A + lam * Bp,
        "C2": lam * Aq - B,
        "Cnabla1": p - 1j * c * a + lam * c * bb,
        "Cnabla2": lam * (qb + 1j * s * a) - s * b,
    }


def coefficient_constraints(ph: PhaseTriple, pot: PotentialPair, lam, *, kd: KDerivatives | None = None,
                            region=None, config=None) -> ResidualReport:
    """The four proportionality conditions between the complex and j-part equations.

    ``C2`` and ``Cnabla2`` are multiplied through by lambda, so lambda = 0 is
    allowed.  K derivatives default to the closed forms.
    """
    kd = kd or k_derivatives_analytic(ph)
    return ResidualReport.build(ph.grid, _constraint_terms(ph, pot, kd, lam), config, region)


def reduced_residual(ph: PhaseTriple, lam, phi, *, region=None, config=None) -> ResidualReport:
    """Residual left once the potentials are eliminated.

    Constant Theta uses the short form (label ``CC1``); otherwise the full
    expression with grad|lambda| and grad Theta terms (label ``C7``).
    """
    g = ph.grid
    lam = _lam_array(lam, g)
    phi, gphi = _phi_and_grad(phi, g)
    c, s = np.cos(ph.theta), np.sin(ph.theta)
    eg, emo = np.exp(1j * ph.gamma), np.exp(-1j * ph.omega)
    l2 = np.abs(lam) ** 2
    gD = ph.gradient("gamma") - ph.gradient("omega")
    lD = ph.laplacian("gamma") - ph.laplacian("omega")
    pref = (l2 * c * eg + lam * s * emo) / (1 + l2)
    tail = pref * ((1j * lD - _dot(gD, gD)) * phi + 2j * _dot(gD, gphi))
    if ph.theta_is_constant():
        return ResidualReport.build(g, {"CC1": tail}, config, region)

    valid = g.valid
    _check_not_singular(ph.theta, valid, "cos(Theta)")
    _check_not_singular(ph.theta, valid, "sin(Theta)")
    gt = ph.gradient("theta")
    lt = ph.laplacian("theta")
    absl = np.abs(lam)
    if np.ndim(absl) and np.ptp(absl[np.isfinite(absl)]) > 0:
        g_absl = fd_gradient(ScalarField(g, np.asarray(absl, float))).values
    else:
        g_absl = np.zeros((g.dim,) + g.shape)
    sin2 = np.sin(2 * ph.theta)
    t1 = 2j * absl / (1 + l2) ** 2 * (c * eg - lam * s * emo) * _dot(g_absl, gD)
    t2 = -2j / (1 + l2) * (l2 * s * eg - lam * c * emo) * _dot(gD, gt)
    t3 = -(c * eg + lam * s * emo) * (1 + 4 / sin2**2 * l2 / (1 + l2) ** 2) * _dot(gt, gt)
    t4 = -(s * eg - lam * c * emo) * lt
    t6 = -2 / (1 + l2) * (l2 * c * eg - lam * s * emo) * _dot(gt, gphi) / (s * c)
    res = (t1 + t2 + t3 + t4) * phi + tail + t6
    return ResidualReport.build(g, {"C7": res}, config, region)


# ---------------------------------------------------------------------------
# right (phi K) form


def _right_form(ph, pot, kd, phi, gphi):
    """Quaternion residual for Phi = phi K and its (complex, conj j) parts."""
    K = ph.k_field()
    Q = pot.Q
    gK = kd.grad_k(ph)
    QQ = _qdot(Q, Q)
    divQ_minus_eta = pot.div_Q() - QQ
    t1 = phi * kd.lap_k(ph)
    t2 = -2 * _qdot(Q, phi * gK)
    t3 = -quat_mul(divQ_minus_eta, phi * K)
    gpK = gphi * gK
    Kb = Quaternion(np.broadcast_to(K.z, Q.z.shape), np.broadcast_to(K.zeta, Q.zeta.shape))
    QgpK = quat_mul(Q * gphi, Kb)
    t4 = 2 * Quaternion(np.sum(gpK.z - QgpK.z, 0), np.sum(gpK.zeta - QgpK.zeta, 0))
    res = t1 + t2 + t3 + t4
    return res, np.asarray(res.z), np.conj(res.zeta)


def right_form_residual(ph: PhaseTriple, pot: PotentialPair, phi, *, kd: KDerivatives | None = None,
                        derivatives: str = "fd", region=None, config=None) -> ResidualReport:
    """Residual for the right wave function ``Phi = phi K`` (labels A2, A3, A4)."""
    kd = kd or k_derivatives(ph, derivatives)
    phi, gphi = _phi_and_grad(phi, ph.grid)
    res, a3, a4 = _right_form(ph, pot, kd, phi, gphi)
    return ResidualReport.build(ph.grid, {"A2": res, "A3": a3, "A4": a4}, config, region)


def right_form_constraints(ph: PhaseTriple, pot: PotentialPair, lam, *, kd: KDerivatives | None = None,
                           region=None, config=None) -> ResidualReport:
    """Proportionality conditions read off the right-form residual by probing.

    The right-form parts are R-linear in ``phi``:
    ``R = a phi + b conj(phi) + c.grad phi + d.grad conj(phi)``.  The
    coefficients are recovered numerically from constant and linear probe
    functions, then combined with lambda exactly like the left-form
    conditions, so the result is directly comparable to
    :func:`coefficient_constraints`.
    """
    g = ph.grid
    kd = kd or k_derivatives_analytic(ph)
    lam = _lam_array(lam, g)
    zero_grad = np.zeros((g.dim,) + g.shape, complex)
    one = np.ones(g.shape, complex)

    def parts(phi, gphi):
        _, a3, a4 = _right_form(ph, pot, kd, phi, gphi)
        return a3, a4

    r1 = parts(one, zero_grad)
    ri = parts(1j * one, zero_grad)
    a = [(x - 1j * y) / 2 for x, y in zip(r1, ri)]
    b = [(x + 1j * y) / 2 for x, y in zip(r1, ri)]
    c_coef = [[], []]
    d_coef = [[], []]
    for axis in range(g.dim):
        unit = np.zeros_like(zero_grad)
        unit[axis] = 1.0
        # phi = 0 at the node itself isolates the gradient coefficients
        s1 = parts(0 * one, unit)
        si = parts(0 * one, 1j * unit)
        for k in range(2):
            c_coef[k].append((s1[k] - 1j * si[k]) / 2)
            d_coef[k].append((s1[k] + 1j * si[k]) / 2)
    c3, c4 = (np.stack(x) for x in c_coef)
    d3, d4 = (np.stack(x) for x in d_coef)
    emg, eo = np.exp(-1j * ph.gamma), np.exp(1j * ph.omega)
    items = {
        "C1": (a[0] - lam * a[1]) * emg,
        "C2": (lam * b[1] - b[0]) * eo,
        "Cnabla1": (c3 - lam * c4) * emg / 2,
        "Cnabla2": (lam * d4 - d3) * eo / 2,
    }
    return ResidualReport.build(g, items, config, region)


# ---------------------------------------------------------------------------
# exact families


@dataclass(frozen=True, eq=False)
class FamilySolution:
    phase: PhaseTriple
    potentials: PotentialPair
    lam: np.ndarray | complex

    @property
    def K(self) -> Quaternion:
        return self.phase.k_field()


def family_simple(grid: GridSpec, omega, L: Quaternion, *, grad_omega=None, lap_omega=None,
                  tol: float = 1e-12) -> FamilySolution:
    """K = e^{i Omega} L with a constant unit quaternion L; alpha = grad Omega, beta = 0."""
    l1, l2 = complex(L.z), complex(L.zeta)
    if abs(np.hypot(abs(l1), abs(l2)) - 1) > tol:
        raise ValueError(f"L must be a unit quaternion, |L| = {np.hypot(abs(l1), abs(l2))!r}")
    omega = _as_array(omega, grid).astype(float)
    theta = np.arctan2(abs(l2), abs(l1))
    grads, laps = {"theta": np.zeros((grid.dim,) + grid.shape)}, {"theta": np.zeros(grid.shape)}
    if grad_omega is not None:
        go = _as_vector(grad_omega, grid)
        grads.update(gamma=go, omega=go)
    if lap_omega is not None:
        lo = _as_array(lap_omega, grid)
        laps.update(gamma=lo, omega=lo)
    ph = PhaseTriple.build(grid, np.full(grid.shape, theta), omega + np.angle(l1), omega + np.angle(l2),
                           grads=grads, laps=laps)
    alpha = ph.gradient("omega")
    pot = PotentialPair(grid, alpha, np.zeros(alpha.shape, complex),
                        div_alpha=None if lap_omega is None else ph.laplacian("omega"))
    return FamilySolution(ph, pot, 0j)


def family_ab(ph: PhaseTriple, *, tol: float = SINGULAR_TOL) -> FamilySolution:
    """Constant-Theta family with lambda = -tan(Theta) e^{i(Gamma+Omega)}.

    alpha = cos^2 grad Gamma + sin^2 grad Omega,
    beta  = -i sin cos e^{i(Gamma+Omega)} grad(Gamma - Omega).
    """
    if not ph.theta_is_constant():
        raise DegenerateFamilyError("family_ab needs a constant Theta")
    th = ph.theta[ph.grid.valid]
    if np.any(_near_multiple(th, np.pi / 2, tol=tol)):
        raise DegenerateFamilyError("Theta is a multiple of pi/2; the family degenerates")
    c, s = np.cos(ph.theta), np.sin(ph.theta)
    gg, go = ph.gradient("gamma"), ph.gradient("omega")
    phase = np.exp(1j * (ph.gamma + ph.omega))
    alpha = c**2 * gg + s**2 * go
    beta = -1j * s * c * phase * (gg - go)
    lam = -np.tan(ph.theta) * phase
    return FamilySolution(ph, PotentialPair(ph.grid, alpha, beta), lam)


def covariance_defect(ph: PhaseTriple, pot: PotentialPair, derivatives: str = "fd", region=None) -> ResidualReport:
    """|grad K - Q K| per node: vanishes exactly for pure-gauge potentials."""
    kd = k_derivatives(ph, derivatives)
    K = ph.k_field()
    Q = pot.Q
    Kb = Quaternion(np.broadcast_to(K.z, Q.z.shape), np.broadcast_to(K.zeta, Q.zeta.shape))
    d = kd.grad_k(ph) - quat_mul(Q, Kb)
    mag = np.sqrt(np.sum(np.abs(d.z) ** 2 + np.abs(d.zeta) ** 2, axis=0))
    return ResidualReport.build(ph.grid, {"gradK-QK": mag}, None, region)


# ---------------------------------------------------------------------------
# curls


@dataclass(frozen=True, eq=False)
class CurlFields:
    curl_alpha: np.ndarray
    curl_beta: np.ndarray
    curl_beta_analytic: np.ndarray


def curl_fields(pot: PotentialPair, ph: PhaseTriple) -> CurlFields:
    """Numerical curls of alpha and beta, and -sin(2 Theta) e^{i(G+W)} grad G x grad W."""
    from .fields import fd_curl
    g = pot.grid
    if g.dim != 2:
        raise ValueError("curl_fields is implemented for 2D grids")
    ca = fd_curl(VectorField(g, pot.alpha)).values
    cb = fd_curl(VectorField(g, pot.beta)).values
    gg, go = ph.gradient("gamma"), ph.gradient("omega")
    cross = gg[0] * go[1] - gg[1] * go[0]
    analytic = -np.sin(2 * ph.theta) * np.exp(1j * (ph.gamma + ph.omega)) * cross
    return CurlFields(ca, cb, analytic)


# ---------------------------------------------------------------------------
# the varying-Theta case


@dataclass(frozen=True)
class ProbeResult:
    min_violation: float
    violations: tuple[float, ...]
    control_violation: float | None = None


def _random_smooth(rng: np.random.Generator, X, Y, length: float, modes: int = 3, amp: float = 0.3):
    """Random sum of sines with its exact gradient and Laplacian."""
    val, grad, lap = np.zeros_like(X), np.zeros((2,) + X.shape), np.zeros_like(X)
    for _ in range(modes):
        kx, ky = 2 * np.pi * rng.integers(-1, 2, size=2) / length
        ph0 = rng.uniform(0, 2 * np.pi)
        a = rng.normal(0, amp)
        arg = kx * X + ky * Y + ph0
        val += a * np.sin(arg)
        grad += a * np.cos(arg) * np.stack([kx + 0 * X, ky + 0 * X])
        lap -= a * (kx**2 + ky**2) * np.sin(arg)
    return val, grad, lap


def _probe_violation(grid, theta, gamma, omega, lam) -> float:
    names = ("theta", "gamma", "omega")
    ph = PhaseTriple.build(grid, theta[0], gamma[0], omega[0],
                           grads=dict(zip(names, (theta[1], gamma[1], omega[1]))),
                           laps=dict(zip(names, (theta[2], gamma[2], omega[2]))))
    pot = potentials_from_phase(ph, lam)
    rep = coefficient_constraints(ph, pot, lam)
    c1, c2 = rep["C1"].field, rep["C2"].field
    return float(np.max(np.abs(np.stack([c1.real, c1.imag, c2.real, c2.imag]))))


def no_solution_probe(samples: int, seed: int, *, n: int = 32, length: float = 1.0,
                      control: bool = True) -> ProbeResult:
    """Search random varying-Theta configurations for a solution of (C1),(C2).

    With |lambda| = tan(Theta) the gradient conditions hold by construction;
    the four real conditions from (C1) and (C2) are evaluated and the worst
    node of each sample recorded.  A genuine solution would drive a sample's
    violation to discretisation level.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    grid = GridSpec.square(n, length)
    X, Y = grid.coords()
    out = []
    for _ in range(samples):
        base = rng.uniform(0.45, 1.1)
        tilt = rng.uniform(0.1, 0.3) * rng.choice([-1.0, 1.0], size=2)
        wob = _random_smooth(rng, X, Y, length, 2, 0.05)
        theta = (base + tilt[0] * (X - length / 2) + tilt[1] * (Y - length / 2) + wob[0],
                 np.stack([tilt[0] + 0 * X, tilt[1] + 0 * X]) + wob[1], wob[2])
        gamma = _random_smooth(rng, X, Y, length)
        omega = _random_smooth(rng, X, Y, length)
        varth = _random_smooth(rng, X, Y, length)[0]
        out.append(_probe_violation(grid, theta, gamma, omega, np.tan(theta[0]) * np.exp(1j * varth)))
    ctrl = None
    if control:
        t0 = rng.uniform(0.45, 1.1)
        theta = (np.full(grid.shape, t0), np.zeros((2,) + grid.shape), np.zeros(grid.shape))
        gamma = _random_smooth(rng, X, Y, length)
        omega = _random_smooth(rng, X, Y, length)
        lam = -np.tan(t0) * np.exp(1j * (gamma[0] + omega[0]))
        ctrl = _probe_violation(grid, theta, gamma, omega, lam)
    return ProbeResult(min(out), tuple(out), ctrl)
