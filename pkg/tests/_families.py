"""Analytic test configurations shared by several test modules.

Fields vary on a length scale ``1/kappa`` over the unit square; gradients
and Laplacians are supplied in closed form.
"""
import numpy as np

from qqmab.fields import GridSpec
from qqmab.phase import PhaseTriple, family_ab, family_simple
from qqmab.quaternion import Quaternion

THETA_AB = np.pi / 5
L_SIMPLE = Quaternion(np.sqrt(0.5), 1j * np.sqrt(0.5))


def smooth_phi(X, Y, kappa=1.0):
    x, y = kappa * X, kappa * Y
    return np.exp(1j * (0.8 * x - 0.5 * y)) * (1 + 0.3 * np.sin(2 * x + y))


def ab_angles(kappa=1.0):
    k = kappa

    def gamma(x, y):
        return 1.3 * k * x + 0.4 * np.sin(2 * k * y)

    def omega(x, y):
        return 0.7 * np.cos(k * (x + y)) - 0.5 * k * y

    def g_gamma(x, y):
        return np.stack([1.3 * k + 0 * x, 0.8 * k * np.cos(2 * k * y)])

    def g_omega(x, y):
        s = -0.7 * k * np.sin(k * (x + y))
        return np.stack([s, s - 0.5 * k])

    def l_gamma(x, y):
        return -1.6 * k * k * np.sin(2 * k * y)

    def l_omega(x, y):
        return -1.4 * k * k * np.cos(k * (x + y))

    return gamma, omega, g_gamma, g_omega, l_gamma, l_omega


def simple_omega(kappa=1.0):
    k = kappa

    def omega(x, y):
        return 1.1 * k * x + 0.6 * np.sin(k * (x + 2 * y))

    def grad(x, y):
        c = 0.6 * k * np.cos(k * (x + 2 * y))
        return np.stack([1.1 * k + c, 2 * c])

    def lap(x, y):
        return -3.0 * k * k * np.sin(k * (x + 2 * y))

    return omega, grad, lap


def ab_family(n, kappa=1.0, theta=THETA_AB, laps=True, length=1.0):
    g = GridSpec.square(n, length)
    X, Y = g.coords()
    G, W, gG, gW, lG, lW = ab_angles(kappa)
    ph = PhaseTriple.build(g, theta, G(X, Y), W(X, Y),
                           grads={"theta": np.zeros((2,) + g.shape), "gamma": gG(X, Y), "omega": gW(X, Y)},
                           laps={"theta": np.zeros(g.shape), "gamma": lG(X, Y), "omega": lW(X, Y)} if laps else None)
    return g, family_ab(ph)


def simple_family(n, kappa=1.0, L=L_SIMPLE, length=1.0):
    g = GridSpec.square(n, length)
    X, Y = g.coords()
    W, gW, lW = simple_omega(kappa)
    return g, family_simple(g, W(X, Y), L, grad_omega=gW(X, Y), lap_omega=lW(X, Y))


def ab_connection(kappa=1.0, theta=THETA_AB):
    G, W, gG, gW, _, _ = ab_angles(kappa)
    c, s = np.cos(theta), np.sin(theta)

    def conn(P):
        x, y = P[:, 0], P[:, 1]
        a = c * c * gG(x, y) + s * s * gW(x, y)
        b = -1j * s * c * np.exp(1j * (G(x, y) + W(x, y))) * (gG(x, y) - gW(x, y))
        return Quaternion(1j * a.T, b.T)

    return conn


def simple_connection(kappa=1.0):
    _, gW, _ = simple_omega(kappa)

    def conn(P):
        a = gW(P[:, 0], P[:, 1]).T
        return Quaternion(1j * a, np.zeros_like(a, complex))

    return conn


def orders(values):
    v = np.asarray(values, float)
    return np.log2(v[:-1] / v[1:])
