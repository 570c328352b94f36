"""Quaternionic Aharonov-Bohm configuration around an infinite solenoid.

Outside the solenoid ``alpha = c0 phi_hat / r`` with ``c0 = q Flux / (2 pi hbar)``.
The quaternionic family with constant Theta splits alpha as
``cos^2 Theta gGamma + sin^2 Theta gOmega`` with::

    gGamma = -c0 y / (r^2 cos^2 Theta) x_hat,   gOmega = c0 x / (r^2 sin^2 Theta) y_hat

and ``beta = -i sin Theta cos Theta exp(i(Gamma + Omega)) (gGamma - gOmega)``.
Neither gGamma nor gOmega is curl free, so Gamma and Omega are rebuilt by
integrating along a radial segment from the reference point followed by an
azimuthal arc; the branch cut lies on the ray opposite the reference
direction.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .fields import (GridSpec, Polyline, ScalarField, VectorField, fd_curl, fmt, line_integral,
                     path_ordered_product)
from .quaternion import Quaternion, quat_conj, quat_mul

GAUSS_NODES = 48


class MaskedRegionError(ValueError):
    """Evaluation requested inside the solenoid."""


class ConvergenceError(RuntimeError):
    """Holonomy did not settle under refinement doubling."""


@dataclass(frozen=True)
class SolenoidConfig:
    R: float = 0.5
    flux: float = 1.0
    charge: float = 1.0
    hbar: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.R > 0 or not self.hbar > 0:
            raise ValueError("R and hbar must be positive")

    @classmethod
    def from_field(cls, R: float, B: float, **kw) -> "SolenoidConfig":
        return cls(R=R, flux=np.pi * R**2 * B, **kw)

    @property
    def B(self) -> float:
        return self.flux / (np.pi * self.R**2)

    @property
    def c0(self) -> float:
        """q Flux / (2 pi hbar), so |alpha| = c0 / r."""
        return self.charge * self.flux / (2 * np.pi * self.hbar)

    @property
    def ab_phase(self) -> float:
        return self.charge * self.flux / self.hbar


def _polar(cfg: SolenoidConfig, points, check: bool = True):
    P = np.atleast_2d(np.asarray(points, float))
    x = P[:, 0] - cfg.center[0]
    y = P[:, 1] - cfg.center[1]
    r2 = x * x + y * y
    if check and np.any(r2 <= cfg.R**2):
        bad = P[np.argmax(r2 <= cfg.R**2)]
        raise MaskedRegionError(f"point {tuple(bad)} lies inside the solenoid (R={cfg.R})")
    return x, y, r2


def solenoid_alpha(cfg: SolenoidConfig, points) -> np.ndarray:
    """alpha = (q/hbar) A = c0 (-y, x) / r^2 at each point, shape (M, 2)."""
    x, y, r2 = _polar(cfg, points)
    return cfg.c0 * np.stack([-y / r2, x / r2], axis=-1)


@dataclass(frozen=True, eq=False)
class ABSetup:
    """Two-path geometry: source, two apex points on opposite sides, a screen line.

    Path 1 runs source -> (0, +apex) -> screen point, path 2 through
    (0, -apex) (coordinates relative to the solenoid centre).
    """

    solenoid: SolenoidConfig = field(default_factory=SolenoidConfig)
    theta: float = np.pi / 4
    source_x: float = -8.0
    screen_x: float = 8.0
    apex: float = 2.0
    screen_y: tuple[float, ...] = tuple(np.linspace(-3.0, 3.0, 61))
    reference_point: tuple[float, float] | None = None
    clearance: float = 2.0
    grid_n: int = 128
    grid_length: float = 8.0
    complex_limit: bool = False
    refinement: int = 64
    convergence_tol: float = 1e-7
    max_refinement: int = 8192

    def __post_init__(self):
        s = self.solenoid
        if not (1e-6 < self.theta < np.pi / 2 - 1e-6):
            raise ValueError("theta must lie in (0, pi/2) away from the ends by 1e-6")
        if self.refinement < 1:
            raise ValueError("refinement must be >= 1")
        object.__setattr__(self, "screen_y", tuple(float(v) for v in self.screen_y))
        if len(self.screen_y) < 1:
            raise ValueError("screen needs at least one point")
        if self.reference_point is None:
            object.__setattr__(self, "reference_point", (s.center[0] + 2 * s.R + self.h_clear, s.center[1]))
        for y in self.screen_y:
            for p in self.paths(y):
                d = _min_distance(p, s.center)
                if d < s.R + self.h_clear:
                    raise MaskedRegionError(f"path to screen y={y} passes within {d:.4g} of the axis")

    @property
    def grid(self) -> GridSpec:
        s = self.solenoid
        L = self.grid_length
        g = GridSpec.square(self.grid_n, L, origin=(s.center[0] - L / 2, s.center[1] - L / 2))
        return g.masked_where(lambda X, Y: (X - s.center[0]) ** 2 + (Y - s.center[1]) ** 2 <= s.R**2)

    @property
    def h_clear(self) -> float:
        """Clearance from the solenoid surface in grid-cell units."""
        return self.clearance * self.grid_length / self.grid_n

    @property
    def c(self) -> float:
        return float(np.cos(self.theta))

    @property
    def s(self) -> float:
        return float(np.sin(self.theta))

    def paths(self, y_screen: float) -> tuple[Polyline, Polyline]:
        cx, cy = self.solenoid.center
        src = (cx + self.source_x, cy)
        scr = (cx + self.screen_x, cy + y_screen)
        up = Polyline(np.array([src, (cx, cy + self.apex), scr]))
        down = Polyline(np.array([src, (cx, cy - self.apex), scr]))
        return up, down

    def with_(self, **kw) -> "ABSetup":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return ABSetup(**d)


def _min_distance(path: Polyline, center) -> float:
    c = np.asarray(center, float)
    best = np.inf
    for a, b in zip(path.points[:-1], path.points[1:]):
        d = b - a
        t = np.clip(np.dot(c - a, d) / np.dot(d, d), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(a + t * d - c)))
    return best


# ---------------------------------------------------------------------------
# phase gradients and angle reconstruction


def ab_phase_gradients(setup: ABSetup, points) -> tuple[np.ndarray, np.ndarray]:
    """(gGamma, gOmega) at the points, each of shape (M, 2)."""
    x, y, r2 = _polar(setup.solenoid, points)
    c0 = setup.solenoid.c0
    zero = np.zeros_like(x)
    gG = np.stack([-c0 * y / (r2 * setup.c**2), zero], axis=-1)
    gW = np.stack([zero, c0 * x / (r2 * setup.s**2)], axis=-1)
    return gG, gW


def _gauss(n: int = GAUSS_NODES):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1), 0.5 * w


def reconstruct_angle(setup: ABSetup, which: str, points) -> np.ndarray:
    """Gamma or Omega at the points by Gauss-Legendre quadrature of the prescribed gradient.

    Path: radial segment from the reference point to the target radius, then
    the azimuthal arc of angle in (-pi, pi] about the reference direction.
    """
    idx = {"gamma": 0, "omega": 1}[which]
    cfg = setup.solenoid
    x, y, r2 = _polar(cfg, points)
    r = np.sqrt(r2)
    phi = np.arctan2(y, x)
    rx, ry = setup.reference_point[0] - cfg.center[0], setup.reference_point[1] - cfg.center[1]
    r0, phi0 = float(np.hypot(rx, ry)), float(np.arctan2(ry, rx))
    dphi = np.angle(np.exp(1j * (phi - phi0)))
    t, w = _gauss()
    # radial leg at angle phi0
    rr = r0 + np.outer(r - r0, t)
    er = np.array([np.cos(phi0), np.sin(phi0)])
    pts = np.stack([rr * er[0], rr * er[1]], -1).reshape(-1, 2) + np.asarray(cfg.center)
    g = ab_phase_gradients(setup, pts)[idx].reshape(rr.shape + (2,))
    radial = (g @ er) @ w * (r - r0)
    # azimuthal arc at radius r
    ph = phi0 + np.outer(dphi, t)
    rr = np.broadcast_to(r[:, None], ph.shape)
    pts = np.stack([rr * np.cos(ph), rr * np.sin(ph)], -1).reshape(-1, 2) + np.asarray(cfg.center)
    g = ab_phase_gradients(setup, pts)[idx].reshape(ph.shape + (2,))
    tang = g[..., 0] * (-np.sin(ph)) + g[..., 1] * np.cos(ph)
    arc = (tang * rr) @ w * dphi
    return radial + arc


def reconstructed_gradient(setup: ABSetup, which: str, points) -> np.ndarray:
    """Gradient of :func:`reconstruct_angle` away from the cut.

    Both prescribed fields are homogeneous of degree -1 about the axis, so
    r g.phi_hat is independent of r and the arc contributes no radial
    derivative; the radial derivative comes from the radial leg alone.
    """
    idx = {"gamma": 0, "omega": 1}[which]
    cfg = setup.solenoid
    x, y, r2 = _polar(cfg, points)
    phi = np.arctan2(y, x)
    rx, ry = setup.reference_point[0] - cfg.center[0], setup.reference_point[1] - cfg.center[1]
    phi0 = float(np.arctan2(ry, rx))
    r = np.sqrt(r2)
    er0 = np.array([np.cos(phi0), np.sin(phi0)])
    on_ref = np.stack([r * er0[0], r * er0[1]], -1) + np.asarray(cfg.center)
    g_ref = ab_phase_gradients(setup, on_ref)[idx]
    g = ab_phase_gradients(setup, points)[idx]
    er = np.stack([np.cos(phi), np.sin(phi)], -1)
    ep = np.stack([-np.sin(phi), np.cos(phi)], -1)
    radial = np.sum(g_ref * er0, -1)
    tang = np.sum(g * ep, -1)
    return radial[:, None] * er + tang[:, None] * ep


def on_cut(setup: ABSetup, points, width: float) -> np.ndarray:
    """True where a point lies within ``width`` of the branch-cut ray."""
    cfg = setup.solenoid
    P = np.atleast_2d(np.asarray(points, float)) - np.asarray(cfg.center)
    ref = np.asarray(setup.reference_point) - np.asarray(cfg.center)
    d = -ref / np.linalg.norm(ref)
    along = P @ d
    perp = np.abs(P[:, 0] * d[1] - P[:, 1] * d[0])
    return (along > 0) & (perp <= width)


# ---------------------------------------------------------------------------
# beta and its curl


def beta_field(setup: ABSetup, points) -> np.ndarray:
    """beta at the points, shape (M, 2), complex; zero in the complex limit."""
    P = np.atleast_2d(np.asarray(points, float))
    if setup.complex_limit:
        _polar(setup.solenoid, P)
        return np.zeros(P.shape, complex)
    gG, gW = ab_phase_gradients(setup, P)
    phase = reconstruct_angle(setup, "gamma", P) + reconstruct_angle(setup, "omega", P)
    f = -1j * setup.s * setup.c * np.exp(1j * phase)
    return f[:, None] * (gG - gW)


def beta_curl_analytic(setup: ABSetup, points) -> np.ndarray:
    """Closed-form z-curl 2|alpha|^2 sin(2 phi) / sin(2 Theta) exp(i(Gamma + Omega))."""
    x, y, r2 = _polar(setup.solenoid, points)
    a2 = setup.solenoid.c0**2 / r2
    sin2phi = 2 * x * y / r2
    phase = reconstruct_angle(setup, "gamma", points) + reconstruct_angle(setup, "omega", points)
    return 2 * a2 * sin2phi / np.sin(2 * setup.theta) * np.exp(1j * phase)


def gamma_curl_analytic(setup: ABSetup, points) -> np.ndarray:
    """z-curl of gGamma: (c0 / cos^2 Theta)(r^2 - 2 y^2) / r^4."""
    x, y, r2 = _polar(setup.solenoid, points)
    return setup.solenoid.c0 / setup.c**2 * (r2 - 2 * y * y) / r2**2


def omega_curl_analytic(setup: ABSetup, points) -> np.ndarray:
    """z-curl of gOmega: (c0 / sin^2 Theta)(y^2 - x^2) / r^4."""
    x, y, r2 = _polar(setup.solenoid, points)
    return setup.solenoid.c0 / setup.s**2 * (y * y - x * x) / r2**2


def path_dependence_term(setup: ABSetup, points) -> np.ndarray:
    """Exact curl of beta minus the closed form.

    f [ i (grad(Gamma_r + Omega_r) - (gGamma + gOmega)) x (gGamma - gOmega)
        + curl(gGamma - gOmega) ]  with f = -i sin cos exp(i(Gamma_r + Omega_r)).
    """
    P = np.atleast_2d(np.asarray(points, float))
    gG, gW = ab_phase_gradients(setup, P)
    grad = reconstructed_gradient(setup, "gamma", P) + reconstructed_gradient(setup, "omega", P)
    phase = reconstruct_angle(setup, "gamma", P) + reconstruct_angle(setup, "omega", P)
    f = -1j * setup.s * setup.c * np.exp(1j * phase)
    d = grad - (gG + gW)
    e = gG - gW
    cross = d[:, 0] * e[:, 1] - d[:, 1] * e[:, 0]
    curl = gamma_curl_analytic(setup, P) - omega_curl_analytic(setup, P)
    return f * (1j * cross + curl)


def loop_closure_defect(setup: ABSetup, radius: float | None = None, n: int = 4096) -> dict:
    """Circulation of the prescribed gradients around a circle about the axis."""
    cfg = setup.solenoid
    radius = radius if radius is not None else 2 * cfg.R + setup.h_clear
    loop = Polyline.circle(cfg.center, radius, n)
    out = {}
    for idx, name, exact in ((0, "gamma", np.pi * cfg.c0 / setup.c**2), (1, "omega", np.pi * cfg.c0 / setup.s**2)):
        val = line_integral(lambda P, i=idx: ab_phase_gradients(setup, P)[i], loop)
        out[name] = {"numeric": float(val), "analytic": float(exact)}
    return out


@dataclass(frozen=True, eq=False)
class ABFields:
    grid: GridSpec
    alpha: VectorField
    g_gamma: VectorField
    g_omega: VectorField
    beta: VectorField
    curl_alpha: ScalarField
    curl_g_gamma: ScalarField
    curl_beta: ScalarField
    curl_beta_analytic: ScalarField
    curl_beta_exact: ScalarField
    curl_g_gamma_analytic: ScalarField


def sample_fields(setup: ABSetup, grid: GridSpec | None = None) -> ABFields:
    """Sampled alpha, gradients, beta and curls on the masked grid (NaN inside the solenoid)."""
    g = grid or setup.grid
    pts = g.points()
    ok = g.valid.reshape(-1)
    P = pts[ok]

    def vec(vals, dtype=float):
        out = np.full((g.size, 2), np.nan, dtype=dtype)
        out[ok] = vals
        return VectorField(g, out.T.reshape((2,) + g.shape))

    def sca(vals, dtype=float):
        out = np.full(g.size, np.nan, dtype=dtype)
        out[ok] = vals
        return ScalarField(g, out.reshape(g.shape))

    gG, gW = ab_phase_gradients(setup, P)
    alpha = vec(solenoid_alpha(setup.solenoid, P))
    beta = vec(beta_field(setup, P), complex)
    analytic = beta_curl_analytic(setup, P)
    exact = analytic + path_dependence_term(setup, P)
    GG = vec(gG)
    return ABFields(g, alpha, GG, vec(gW), beta, fd_curl(alpha), fd_curl(GG), fd_curl(beta),
                    sca(analytic, complex), sca(exact, complex), sca(gamma_curl_analytic(setup, P)))


# ---------------------------------------------------------------------------
# holonomy and interference


def connection(setup: ABSetup):
    """Q = alpha i + beta j as a callable on (M, 2) point arrays."""
    def conn(P: np.ndarray) -> Quaternion:
        alpha = solenoid_alpha(setup.solenoid, P)
        return Quaternion(1j * alpha, beta_field(setup, P))
    return conn


def _holonomy(setup: ABSetup, path: Polyline) -> tuple[Quaternion, int, float]:
    conn = connection(setup)
    r = setup.refinement
    prev = path_ordered_product(conn, path, r)
    while True:
        r2 = 2 * r
        cur = path_ordered_product(conn, path, r2)
        change = float(np.sqrt((cur - prev).norm2()))
        if change < setup.convergence_tol:
            return cur, r2, change
        if r2 >= setup.max_refinement:
            raise ConvergenceError(f"holonomy change {change:.3e} at refinement {r2} above "
                                   f"{setup.convergence_tol:.1e}")
        prev, r = cur, r2


@dataclass(frozen=True)
class HolonomyPair:
    K1: Quaternion
    K2: Quaternion
    refinement: int
    change: float

    @property
    def witness(self) -> float:
        return noncommutativity_witness(self.K1, self.K2)

    @property
    def relative(self) -> Quaternion:
        """conj(K1) K2, the holonomy of the loop path 2 then path 1 reversed."""
        return quat_mul(quat_conj(self.K1), self.K2)


def holonomy_pair(setup: ABSetup, y_screen: float = 0.0) -> HolonomyPair:
    p1, p2 = setup.paths(y_screen)
    K1, r1, c1 = _holonomy(setup, p1)
    K2, r2, c2 = _holonomy(setup, p2)
    return HolonomyPair(K1, K2, max(r1, r2), max(c1, c2))


def noncommutativity_witness(K1: Quaternion, K2: Quaternion) -> float:
    """|K1 K2 - K2 K1|."""
    d = quat_mul(K1, K2) - quat_mul(K2, K1)
    return float(np.sqrt(d.norm2()))


def fringe_shift(k_dl: np.ndarray, intensity: np.ndarray) -> tuple[float, float]:
    """Phase delta of the best fit A + B cos(k dl + delta); returns (delta mod 2 pi, rms fit error)."""
    M = np.stack([np.ones_like(k_dl), np.cos(k_dl), np.sin(k_dl)], -1)
    coef, *_ = np.linalg.lstsq(M, intensity, rcond=None)
    resid = intensity - M @ coef
    delta = float(np.mod(np.arctan2(-coef[2], coef[1]), 2 * np.pi))
    return delta, float(np.sqrt(np.mean(resid**2)))


def circular_distance(a: float, b: float) -> float:
    return float(abs(np.angle(np.exp(1j * (a - b)))))


@dataclass(frozen=True, eq=False)
class InterferenceResult:
    screen_y: np.ndarray
    path_difference: np.ndarray
    complex_intensity: np.ndarray
    quaternionic_intensity: np.ndarray
    holonomies: list[HolonomyPair]
    wavenumber: float
    fringe_shift: float
    fringe_fit_rms: float
    complex_fringe_shift: float
    witness: float
    loop_closure: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("screen_y,complex_intensity,quaternionic_intensity\n")
        for y, a, b in zip(self.screen_y, self.complex_intensity, self.quaternionic_intensity):
            buf.write(f"{fmt(y)},{fmt(a)},{fmt(b)}\n")
        return buf.getvalue()

    def summary(self) -> dict:
        mid = self.holonomies[len(self.holonomies) // 2]
        return {
            "wavenumber": self.wavenumber,
            "fringe_shift": self.fringe_shift,
            "fringe_fit_rms": self.fringe_fit_rms,
            "complex_fringe_shift": self.complex_fringe_shift,
            "witness": self.witness,
            "loop_closure_defect": self.loop_closure,
            "holonomy_K1": [float(v) for v in mid.K1.real4()],
            "holonomy_K2": [float(v) for v in mid.K2.real4()],
            "holonomy_refinement": max(h.refinement for h in self.holonomies),
        }


def interference_pattern(setup: ABSetup, k: float) -> InterferenceResult:
    """Two-path intensities along the screen.

    complex: |e^{ik l1} + e^{ik l2 + i delta}|^2 with delta = q Flux / hbar;
    quaternionic: |K1 e^{ik l1} + K2 e^{ik l2}|^2 with holonomies per screen point.
    """
    ys = np.asarray(setup.screen_y)
    delta = setup.solenoid.ab_phase
    dl, ci, qi, hol = [], [], [], []
    for y in ys:
        p1, p2 = setup.paths(y)
        l1, l2 = p1.length(), p2.length()
        hp = holonomy_pair(setup, y)
        e1, e2 = np.exp(1j * k * l1), np.exp(1j * k * l2)
        ci.append(abs(e1 + e2 * np.exp(1j * delta)) ** 2)
        amp = hp.K1 * e1 + hp.K2 * e2
        val = float(amp.norm2())
        if not (np.isfinite(val) and val >= 0):
            raise ArithmeticError(f"intensity {val} at screen y={y} is not a non-negative real")
        qi.append(val)
        dl.append(l2 - l1)
        hol.append(hp)
    dl = np.asarray(dl)
    qi = np.asarray(qi)
    ci = np.asarray(ci)
    shift, rms = fringe_shift(k * dl, qi)
    cshift, _ = fringe_shift(k * dl, ci)
    mid = hol[len(hol) // 2]
    return InterferenceResult(ys, dl, ci, qi, hol, k, shift, rms, cshift, mid.witness,
                              loop_closure_defect(setup))


def brute_force_intensity(K1: Quaternion, K2: Quaternion, l1: float, l2: float, k: float) -> float:
    """|K1 e^{ik l1} + K2 e^{ik l2}|^2 via the Hamilton product on (w, x, y, z) components."""
    def hamilton(a, b):
        w1, x1, y1, z1 = a
        w2, x2, y2, z2 = b
        return (w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2)

    def comps(q):
        return tuple(float(v) for v in q.real4())

    a = hamilton(comps(K1), (np.cos(k * l1), np.sin(k * l1), 0.0, 0.0))
    b = hamilton(comps(K2), (np.cos(k * l2), np.sin(k * l2), 0.0, 0.0))
    return sum((u + v) ** 2 for u, v in zip(a, b))


def lorentz_radial_force(setup: ABSetup, velocity: float, points, extraction: str = "modulus") -> dict:
    """Radial force q v |curl beta| from the closed-form curl; a speculative reading.

    ``extraction`` picks the real number taken from the complex curl:
    ``modulus``, ``real`` or ``imag``.
    """
    curl = beta_curl_analytic(setup, points)
    pick = {"modulus": np.abs, "real": np.real, "imag": np.imag}
    if extraction not in pick:
        raise ValueError(f"unknown extraction {extraction!r}")
    force = setup.solenoid.charge * velocity * pick[extraction](curl)
    return {"force": force, "extraction": extraction,
            "label": "speculative: qualitative radial-force remark, not a derived result"}
