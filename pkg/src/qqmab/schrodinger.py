"""Grid evolution of the quaternionic Schrodinger equation.

The equation ``(Pi^2/2m + V) Psi = hbar (d_t Psi) i`` with
``Pi Psi = -hbar (grad - Q) Psi i`` is advanced as the coupled complex pair
``Psi = psi1 + psi2 j``::

    d_t psi1 = -i (H Psi)_1 / hbar,    d_t psi2 = +i (H Psi)_2 / hbar.

Two discretisations of ``(grad - Q)^2`` are offered:

``covariant``
    lattice form with link transporters ``U(x) = P exp(int_{x+h}^{x} Q.dl)``
    (computed with :func:`~qqmab.fields.transport_segments`).  Exactly
    hermitian for unit links, and exact on ``K phi`` when the links are the
    exact transporters of a pure gauge.
``expanded``
    ``lap Psi - div(Q Psi) - Q.grad Psi + (Q.Q) Psi`` with central
    differences.

Time stepping is classical RK4; probability is measured, never renormalised.
"""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fields import (Connection, GridSpec, ScalarField, VectorField, diff, fd_divergence, fmt,
                     transport_segments)
from .phase import PotentialPair
from .quaternion import Quaternion, quat_conj, quat_mul, right_mul_i

RK4_IMAG_BOUND = 2 * np.sqrt(2)


class StabilityError(ValueError):
    """Time step violates the explicit scheme's stability bound."""


class InstabilityError(RuntimeError):
    """Probability grew beyond the configured factor during evolution."""


@dataclass(frozen=True)
class SimulationParams:
    dt: float
    steps: int
    hbar: float = 1.0
    mass: float = 1.0
    scheme: str = "rk4"
    operator: str = "covariant"
    link_refinement: int = 8
    stability_factor: float = 2.5
    norm_growth_limit: float = 1.5
    norm_drift_tol: float = 1e-6
    continuity_tol: float = np.inf

    def __post_init__(self):
        if not self.hbar > 0 or not self.mass > 0:
            raise ValueError("hbar and mass must be positive")
        if self.dt < 0 or self.steps < 0:
            raise ValueError("dt and steps must be non-negative")
        if self.scheme != "rk4":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.operator not in ("covariant", "expanded"):
            raise ValueError(f"unknown operator {self.operator!r}")
        if self.stability_factor > RK4_IMAG_BOUND:
            raise ValueError("stability_factor exceeds the RK4 imaginary-axis bound")


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Real potential V and connection Q.

    ``connection`` (analytic Q at arbitrary points) is used for the link
    transporters when given; otherwise Q is interpolated linearly between
    the sampled nodes of ``potentials``.
    """

    grid: GridSpec
    V: np.ndarray | float = 0.0
    potentials: PotentialPair | None = None
    connection: Connection | None = None

    def __post_init__(self):
        V = np.asarray(self.V)
        if np.iscomplexobj(V) and np.any(V.imag != 0):
            raise ValueError("V must be real")
        object.__setattr__(self, "V", np.broadcast_to(V.real.astype(float), self.grid.shape))

    @property
    def Q(self) -> Quaternion:
        g = self.grid
        if self.potentials is not None:
            return self.potentials.Q
        if self.connection is not None:
            q = self.connection(g.points())
            return Quaternion(q.z.T.reshape((g.dim,) + g.shape), q.zeta.T.reshape((g.dim,) + g.shape))
        z = np.zeros((g.dim,) + g.shape, complex)
        return Quaternion(z, z.copy())

    @property
    def is_free(self) -> bool:
        return self.potentials is None and self.connection is None


@dataclass(eq=False)
class WaveState:
    psi: Quaternion
    t: float = 0.0

    @classmethod
    def from_complex(cls, phi, t: float = 0.0) -> "WaveState":
        phi = np.asarray(phi, complex)
        return cls(Quaternion(phi, np.zeros_like(phi)), t)

    @classmethod
    def factored(cls, K: Quaternion, phi, t: float = 0.0) -> "WaveState":
        """Psi = K phi."""
        return cls(K * np.asarray(phi, complex), t)

    def copy(self) -> "WaveState":
        return WaveState(Quaternion(np.array(self.psi.z), np.array(self.psi.zeta)), self.t)


@dataclass(eq=False)
class ObservableSeries:
    step: list = field(default_factory=list)
    t: list = field(default_factory=list)
    total_probability: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    continuity_residual_max: list = field(default_factory=list)

    COLUMNS = ("step", "t", "total_probability", "energy", "continuity_residual_max")

    def norm_drift(self) -> float:
        p = np.asarray(self.total_probability)
        return float(np.max(np.abs(p - p[0])) / p[0])

    def max_continuity(self) -> float:
        c = np.asarray(self.continuity_residual_max, float)
        c = c[np.isfinite(c)]
        return float(c.max()) if c.size else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.COLUMNS) + "\n")
        for row in zip(*(getattr(self, c) for c in self.COLUMNS)):
            buf.write(f"{row[0]}," + ",".join(fmt(v) for v in row[1:]) + "\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# operators


def _shift(a: np.ndarray, k: int, axis: int, periodic: bool) -> np.ndarray:
    """out[i] = a[i + k], zero outside a non-periodic grid."""
    if periodic:
        return np.roll(a, -k, axis=axis)
    out = np.zeros_like(a)
    n = a.shape[axis]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k >= 0:
        src[axis], dst[axis] = slice(k, n), slice(0, n - k)
    else:
        src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _qshift(q: Quaternion, k: int, axis: int, periodic: bool) -> Quaternion:
    return Quaternion(_shift(q.z, k, axis, periodic), _shift(q.zeta, k, axis, periodic))


def build_links(ham: HamiltonianSpec, refinement: int = 8) -> list[Quaternion]:
    """Transporter from node x + h e_a back to x, one array per axis."""
    g = ham.grid
    pts = g.points()
    links = []
    for a in range(g.dim):
        step = np.zeros(g.dim)
        step[a] = g.h[a]
        if ham.connection is not None:
            conn = ham.connection
        else:
            conn = _interpolated_connection(ham, a)
        U = transport_segments(conn, pts + step, pts, refinement)
        links.append(Quaternion(U.z.reshape(g.shape), U.zeta.reshape(g.shape)))
    return links


def _interpolated_connection(ham: HamiltonianSpec, axis: int) -> Connection:
    """Linear interpolation of sampled Q along grid lines of ``axis``."""
    g = ham.grid
    Q = ham.Q
    lo = np.asarray(g.origin)
    h = np.asarray(g.h)

    def conn(points: np.ndarray) -> Quaternion:
        s = (points - lo) / h
        base = np.floor(s[:, axis] + 1e-12).astype(int)
        t = s[:, axis] - base
        idx = np.rint(s).astype(int)
        i0 = idx.copy()
        i0[:, axis] = base
        i1 = i0.copy()
        i1[:, axis] = base + 1
        if g.periodic:
            i0 %= np.asarray(g.n)
            i1 %= np.asarray(g.n)
        else:
            i1 = np.minimum(i1, np.asarray(g.n) - 1)
        z0 = Q.z[(slice(None),) + tuple(i0.T)].T
        z1 = Q.z[(slice(None),) + tuple(i1.T)].T
        w0 = Q.zeta[(slice(None),) + tuple(i0.T)].T
        w1 = Q.zeta[(slice(None),) + tuple(i1.T)].T
        t = t[:, None]
        return Quaternion((1 - t) * z0 + t * z1, (1 - t) * w0 + t * w1)

    return conn


class QuaternionHamiltonian:
    """Applies H = -(hbar^2/2m)(grad - Q)^2 + V to quaternion grid functions."""

    def __init__(self, ham: HamiltonianSpec, hbar: float = 1.0, mass: float = 1.0,
                 operator: str = "covariant", link_refinement: int = 8):
        self.ham = ham
        self.grid = ham.grid
        self.hbar = hbar
        self.mass = mass
        self.operator = operator
        self.valid = ham.grid.valid
        if operator == "covariant":
            self.links = None if ham.is_free else build_links(ham, link_refinement)
        elif operator == "expanded":
            Q = ham.Q
            self.Q = Q
            self.QQ = Quaternion(np.sum(quat_mul(Q, Q).z, 0), np.sum(quat_mul(Q, Q).zeta, 0))
        else:
            raise ValueError(f"unknown operator {operator!r}")

    def covariant_laplacian(self, psi: Quaternion) -> Quaternion:
        g = self.grid
        per = g.periodic
        out_z = np.zeros(g.shape, complex)
        out_w = np.zeros(g.shape, complex)
        for a in range(g.dim):
            fwd = _qshift(psi, 1, a, per)
            bwd = _qshift(psi, -1, a, per)
            if self.links is not None:
                U = self.links[a]
                fwd = quat_mul(U, fwd)
                Ub = _qshift(quat_conj(U), -1, a, per)
                bwd = quat_mul(Ub, bwd)
            h2 = g.h[a] ** 2
            out_z += (fwd.z + bwd.z - 2 * psi.z) / h2
            out_w += (fwd.zeta + bwd.zeta - 2 * psi.zeta) / h2
        return Quaternion(out_z, out_w)

    def expanded_laplacian(self, psi: Quaternion) -> Quaternion:
        g = self.grid
        per = g.periodic
        Q = self.Q
        out = Quaternion(np.zeros(g.shape, complex), np.zeros(g.shape, complex))
        for a in range(g.dim):
            h = g.h[a]
            fwd = _qshift(psi, 1, a, per)
            bwd = _qshift(psi, -1, a, per)
            lap = (fwd + bwd - 2 * psi) / h**2
            dpsi = (fwd - bwd) / (2 * h)
            Qa = Q[a]
            Qpsi = quat_mul(Qa, psi)
            dQpsi = (_qshift(Qpsi, 1, a, per) - _qshift(Qpsi, -1, a, per)) / (2 * h)
            out = out + lap - dQpsi - quat_mul(Qa, dpsi)
        return out + quat_mul(self.QQ, psi)

    def laplacian(self, psi: Quaternion) -> Quaternion:
        if self.grid.mask is not None:
            psi = Quaternion(np.where(self.valid, psi.z, 0), np.where(self.valid, psi.zeta, 0))
        if self.operator == "covariant":
            out = self.covariant_laplacian(psi)
        else:
            out = self.expanded_laplacian(psi)
        if self.grid.mask is not None:
            out = Quaternion(np.where(self.valid, out.z, 0), np.where(self.valid, out.zeta, 0))
        return out

    def apply(self, psi: Quaternion) -> Quaternion:
        lap = self.laplacian(psi)
        k = -self.hbar**2 / (2 * self.mass)
        V = self.ham.V
        return Quaternion(k * lap.z + V * psi.z, k * lap.zeta + V * psi.zeta)

    def time_derivative(self, psi: Quaternion) -> Quaternion:
        """d_t Psi = -(H Psi) i / hbar."""
        Hpsi = self.apply(psi)
        return Quaternion(-1j * Hpsi.z / self.hbar, 1j * Hpsi.zeta / self.hbar)

    def spectral_bound(self) -> float:
        """Upper bound on the spectral radius of H / hbar."""
        g = self.grid
        kin = self.hbar / (2 * self.mass) * sum(4 / h**2 for h in g.h)
        extra = 0.0
        if self.operator == "expanded":
            Q = self.Q
            qmax = float(np.max(np.sqrt(np.sum(np.abs(Q.z) ** 2 + np.abs(Q.zeta) ** 2, 0))))
            extra = self.hbar / (2 * self.mass) * (qmax**2 + sum(2 * qmax / h for h in g.h))
        return kin + extra + float(np.max(np.abs(self.ham.V))) / self.hbar


# ---------------------------------------------------------------------------
# observables


def inner(a: Quaternion, b: Quaternion, grid: GridSpec) -> complex:
    """<a, b> = sum a* b dV, returned as its complex (z) part."""
    prod = quat_mul(quat_conj(a), b)
    mask = grid.valid
    return complex(np.sum(np.where(mask, prod.z, 0)) * grid.cell_volume)


def probability_density(state: WaveState) -> np.ndarray:
    """rho = Psi Psi* (real)."""
    return np.asarray(state.psi.norm2(), float)


def total_probability(state: WaveState, grid: GridSpec) -> float:
    rho = probability_density(state)
    return float(np.sum(np.where(grid.valid, rho, 0)) * grid.cell_volume)


def momentum_apply(psi: Quaternion, pot: PotentialPair | Quaternion | None, grid: GridSpec,
                   hbar: float = 1.0) -> Quaternion:
    """Pi Psi = -hbar (grad Psi - Q Psi) i, one quaternion per component.

    ``pot`` is a PotentialPair, the sampled connection Q itself, or None.
    """
    grad = [diff(psi, grid, a) for a in range(grid.dim)]
    gz = np.stack([d.z for d in grad])
    gw = np.stack([d.zeta for d in grad])
    if pot is not None:
        Q = pot.Q if isinstance(pot, PotentialPair) else pot
        P = Quaternion(np.broadcast_to(psi.z, Q.z.shape), np.broadcast_to(psi.zeta, Q.zeta.shape))
        QP = quat_mul(Q, P)
        gz, gw = gz - QP.z, gw - QP.zeta
    out = right_mul_i(Quaternion(gz, gw))
    return Quaternion(-hbar * out.z, -hbar * out.zeta)


def momentum_squared_apply(psi: Quaternion, pot: PotentialPair | Quaternion | None, grid: GridSpec,
                           hbar: float = 1.0) -> Quaternion:
    """Pi . Pi Psi by applying the finite-difference momentum twice."""
    first = momentum_apply(psi, pot, grid, hbar)
    out = None
    for a in range(grid.dim):
        second = momentum_apply(first[a], pot, grid, hbar)[a]
        out = second if out is None else out + second
    return out


def probability_current(state: WaveState, ham: HamiltonianSpec, params: SimulationParams) -> np.ndarray:
    """j = (1/2m)[Psi* Pi Psi + (Psi* Pi Psi)*] = Re(Psi* Pi Psi)/m."""
    g = ham.grid
    P = momentum_apply(state.psi, None if ham.is_free else ham.Q, g, params.hbar)
    conj = quat_conj(state.psi)
    C = Quaternion(np.broadcast_to(conj.z, P.z.shape), np.broadcast_to(conj.zeta, P.zeta.shape))
    return np.real(quat_mul(C, P).z) / params.mass


def continuity_residual(series: ObservableSeries) -> float:
    return series.max_continuity()


def energy_expectation(op: QuaternionHamiltonian, psi: Quaternion) -> float:
    g = op.grid
    return inner(psi, op.apply(psi), g).real / inner(psi, psi, g).real


# ---------------------------------------------------------------------------
# evolution


def rk4_step(op: QuaternionHamiltonian, psi: Quaternion, dt: float) -> Quaternion:
    f = op.time_derivative
    k1 = f(psi)
    k2 = f(psi + k1 * (dt / 2))
    k3 = f(psi + k2 * (dt / 2))
    k4 = f(psi + k3 * dt)
    return psi + (k1 + 2 * k2 + 2 * k3 + k4) * (dt / 6)


def check_stability(op: QuaternionHamiltonian, params: SimulationParams) -> float:
    bound = params.dt * op.spectral_bound()
    if bound > params.stability_factor:
        raise StabilityError(
            f"dt*|H|/hbar = {bound:.3f} exceeds the bound {params.stability_factor}; "
            f"use dt <= {params.stability_factor / op.spectral_bound():.3e}")
    return bound


def evolve(state: WaveState, ham: HamiltonianSpec, params: SimulationParams, *,
           operator: QuaternionHamiltonian | None = None,
           diagnostics: bool = True) -> tuple[WaveState, ObservableSeries]:
    """Advance ``state`` by ``params.steps`` RK4 steps, recording observables each step.

    The continuity residual at step k uses the centred difference of rho over
    steps k-1, k+1 (one-sided second order at the ends) and the divergence of
    the current at step k.
    """
    op = operator or QuaternionHamiltonian(ham, params.hbar, params.mass, params.operator,
                                           params.link_refinement)
    if params.steps > 0 and params.dt > 0:
        check_stability(op, params)
    g = ham.grid
    psi = state.psi
    psi = Quaternion(np.array(psi.z, complex), np.array(psi.zeta, complex))
    series = ObservableSeries()
    p0 = None
    rhos, divs = [], []

    def record(k, t, psi_k):
        nonlocal p0
        st = WaveState(psi_k, t)
        p = total_probability(st, g)
        if p0 is None:
            p0 = p
        series.step.append(k)
        series.t.append(t)
        series.total_probability.append(p)
        series.energy.append(energy_expectation(op, psi_k) if diagnostics else float("nan"))
        if diagnostics:
            j = probability_current(st, ham, params)
            divs.append(fd_divergence(VectorField(g, j)).values)
            rhos.append(probability_density(st))
        return p

    t = state.t
    record(0, t, psi)
    for k in range(1, params.steps + 1):
        psi = rk4_step(op, psi, params.dt)
        t = state.t + k * params.dt
        p = record(k, t, psi)
        if not np.isfinite(p) or p > params.norm_growth_limit * p0:
            raise InstabilityError(
                f"total probability grew from {p0:.6g} to {p:.6g} at step {k} (t={t:.6g})")
    series.continuity_residual_max = _continuity(rhos, divs, params.dt, g) if diagnostics \
        else [float("nan")] * len(series.step)
    return WaveState(psi, t), series


def _continuity(rhos, divs, dt, grid: GridSpec) -> list[float]:
    n = len(rhos)
    if n < 3 or dt == 0:
        return [float("nan")] * n
    valid = grid.valid
    out = []
    for k in range(n):
        if k == 0:
            drho = (-3 * rhos[0] + 4 * rhos[1] - rhos[2]) / (2 * dt)
        elif k == n - 1:
            drho = (3 * rhos[k] - 4 * rhos[k - 1] + rhos[k - 2]) / (2 * dt)
        else:
            drho = (rhos[k + 1] - rhos[k - 1]) / (2 * dt)
        r = np.abs(drho + divs[k])
        r = r[valid & np.isfinite(r)]
        out.append(float(r.max()) if r.size else float("nan"))
    return out


# ---------------------------------------------------------------------------
# complex reference and energy extraction


def complex_reference_evolution(phi0: np.ndarray, grid: GridSpec, t: float, hbar: float = 1.0,
                                mass: float = 1.0, V: float = 0.0) -> np.ndarray:
    """Exact time evolution of the semi-discrete free complex problem.

    On a periodic grid every Fourier mode is an eigenvector of the 3-point
    Laplacian with eigenvalue ``-sum (2 - 2 cos(k h)) / h^2``; the modes are
    propagated exactly.  Independent of the RK4 machinery.
    """
    if not grid.periodic:
        raise ValueError("the Fourier reference needs a periodic grid")
    fhat = np.fft.fftn(phi0)
    lam = np.zeros(grid.shape)
    for a, (n, h) in enumerate(zip(grid.n, grid.h)):
        k = 2 * np.pi * np.fft.fftfreq(n, d=h)
        shape = [1] * grid.dim
        shape[a] = n
        lam = lam + ((2 - 2 * np.cos(k * h)) / h**2).reshape(shape)
    energy = hbar**2 / (2 * mass) * lam + V
    return np.fft.ifftn(fhat * np.exp(-1j * energy * t / hbar))


def box_mode(grid: GridSpec, modes: tuple[int, ...], lengths: tuple[float, ...]):
    """Dirichlet box eigenmode prod sin(n pi x / L) and its discrete energy (hbar = m = 1 units scaled later).

    The grid is expected to hold the interior nodes x = h, 2h, ..., L - h.
    Returns (phi, discrete eigenvalue of -lap/2).
    """
    coords = grid.coords()
    phi = np.ones(grid.shape)
    lam = 0.0
    for x, n, L, h in zip(coords, modes, lengths, grid.h):
        phi = phi * np.sin(n * np.pi * x / L)
        lam += (2 - 2 * np.cos(n * np.pi * h / L)) / h**2
    return phi.astype(complex), 0.5 * lam


def box_grid(nodes: tuple[int, ...], lengths: tuple[float, ...]) -> GridSpec:
    """Interior nodes of a hard-wall box [0, L]^d (walls are implicit zeros)."""
    h = tuple(L / (n + 1) for n, L in zip(nodes, lengths))
    return GridSpec(tuple(nodes), h, h, periodic=False)


@dataclass
class EnergyCheck:
    epsilon: float
    epsilon_phase_rate: float
    E: float
    abs_error: float
    rel_error: float
    variance: float
    warning: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def energy_equality_check(K: Quaternion, phi: np.ndarray, ham: HamiltonianSpec, params: SimulationParams,
                          *, E: float | None = None, variance_tol: float = 1e-6,
                          rate_steps: int = 20) -> EnergyCheck:
    """Energy of Psi = K phi under the quaternionic H compared with the complex E.

    ``E`` defaults to the expectation of the complex (Q = 0) discrete
    Hamiltonian in ``phi``.  epsilon is the quaternionic expectation value,
    cross-checked by the rotation rate of <Psi(0), Psi(t)> over
    ``rate_steps`` RK4 steps.
    """
    g = ham.grid
    op = QuaternionHamiltonian(ham, params.hbar, params.mass, params.operator, params.link_refinement)
    phi = np.asarray(phi, complex)
    if E is None:
        free = QuaternionHamiltonian(HamiltonianSpec(g, ham.V), params.hbar, params.mass)
        E = energy_expectation(free, Quaternion(phi, np.zeros_like(phi)))
    psi = K * phi
    eps = energy_expectation(op, psi)
    Hpsi = op.apply(psi)
    resid = Hpsi - psi * eps
    variance = float(np.sqrt(inner(resid, resid, g).real / inner(psi, psi, g).real)) / max(abs(eps), 1e-300)
    warning = None
    if variance > variance_tol:
        warning = f"input is not an eigenstate: relative |H Psi - eps Psi| = {variance:.3e}"
        warnings.warn(warning, stacklevel=2)
    dt = params.dt
    if dt > 0:
        check_stability(op, params)
    cur = psi
    for _ in range(rate_steps):
        cur = rk4_step(op, cur, dt)
    w = inner(psi, cur, g)
    t = rate_steps * dt
    eps_rate = float(-params.hbar * np.angle(w) / t) if t > 0 else float("nan")
    err = abs(eps - E)
    return EnergyCheck(eps, eps_rate, E, err, err / abs(E), variance, warning)
