"""Scalar filter functions and the closed-form frequency/time integrals built from them.

Every operator-level integral in this package reduces to scalar coefficients of the form

    W(nu1, nu2) = int w(omega) fhat(omega - nu1) fhat(omega - nu2) d omega
    T(x)        = int k(t) exp(i x t) dt

where ``w`` is piecewise exponential (shifted Metropolis, Dirichlet and s-weighted
frequency filters) and ``k`` is one of the time filters.  The Gaussian product collapses
to a normal density of variance sigma^2 centred at (nu1 + nu2)/2, so W is a Gaussian
expectation of a piecewise exponential and has an erfc closed form.  Quadrature versions
are kept alongside for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr


def fhat(omega, sigma: float):
    """Frequency-domain Gaussian filter exp(-w^2/4s^2)/sqrt(s sqrt(2 pi))."""
    omega = np.asarray(omega, dtype=float)
    return np.exp(-(omega**2) / (4 * sigma**2)) / np.sqrt(sigma * np.sqrt(2 * np.pi))


def f_time(t, sigma: float):
    """Time-domain Gaussian filter whose unitary Fourier transform is :func:`fhat`."""
    t = np.asarray(t, dtype=float)
    return np.exp(-(sigma**2) * t**2) * np.sqrt(sigma * np.sqrt(2 / np.pi))


@dataclass(frozen=True)
class PiecewiseExp:
    """w(x) = exp(c_left + k_left x) for x < a, exp(c_right + k_right x) for x >= a."""

    a: float
    c_left: float
    k_left: float
    c_right: float
    k_right: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(
            x < self.a,
            np.exp(self.c_left + self.k_left * np.minimum(x, self.a)),
            np.exp(self.c_right + self.k_right * np.maximum(x, self.a)),
        )

    def log_gauss_mean(self, mu, std: float):
        """log E[w(X)] for X ~ N(mu, std^2), elementwise in mu."""
        mu = np.asarray(mu, dtype=float)
        kl, kr = self.k_left, self.k_right
        left = self.c_left + kl * mu + 0.5 * kl**2 * std**2 + log_ndtr((self.a - mu - kl * std**2) / std)
        right = self.c_right + kr * mu + 0.5 * kr**2 * std**2 + log_ndtr((mu + kr * std**2 - self.a) / std)
        return np.logaddexp(left, right)

    def sup(self) -> float:
        # log-concave-or-monotone pieces: the max over each piece is at an end
        vals = [np.exp(self.c_left + self.k_left * self.a), np.exp(self.c_right + self.k_right * self.a)]
        if self.k_left < 0:
            vals.append(np.inf)
        if self.k_right > 0:
            vals.append(np.inf)
        return float(max(vals))


def metropolis(beta: float, sigma: float) -> PiecewiseExp:
    """Shifted Metropolis weight exp(-beta max(w + beta sigma^2/2, 0))."""
    a = -beta * sigma**2 / 2
    return PiecewiseExp(a, 0.0, 0.0, -beta**2 * sigma**2 / 2, -beta)


def unit_weight() -> PiecewiseExp:
    return PiecewiseExp(0.0, 0.0, 0.0, 0.0, 0.0)


def dirichlet_h(beta: float, sigma: float) -> PiecewiseExp:
    """h(w) = exp(-sigma^2 beta^2 / 8 - beta |w| / 2)."""
    c = -(sigma**2) * beta**2 / 8
    return PiecewiseExp(0.0, c, beta / 2, c, -beta / 2)


def s_weighted_h(s: float, beta: float, sigma: float) -> PiecewiseExp:
    """h_s(w) = exp(s beta (2w - s beta sigma^2)/2) h(w - s beta sigma^2)."""
    a = s * beta * sigma**2
    base = -(s**2) * beta**2 * sigma**2 / 2 - sigma**2 * beta**2 / 8
    return PiecewiseExp(
        a,
        base - beta * a / 2,
        s * beta + beta / 2,
        base + beta * a / 2,
        s * beta - beta / 2,
    )


# ------------------------------------------------------------------ time filters


def g_time(t, beta: float):
    return _sech(2 * np.pi * np.asarray(t, dtype=float) / beta) / beta


def g_s_time(t, s: float, beta: float):
    x = 2 * np.pi * np.asarray(t, dtype=float) / beta
    # cosh(x)/(cosh(2x)+cos(2 pi s)) written to avoid overflow for large |x|
    e = np.exp(-np.abs(x))
    num = 0.5 * (1 + e**2) * e
    den = 0.5 * (1 + e**4) + np.cos(2 * np.pi * s) * e**2
    return 2 / beta * np.cos(s * np.pi) * num / den


def g_adb_time(t, s: float, beta: float):
    x = 2 * np.pi * np.asarray(t, dtype=float) / beta
    c = np.cos(s * np.pi)
    ch = np.cosh(np.minimum(np.abs(x), 700))
    return np.log1p(2 * c / (ch - c)) / (2 * np.pi * beta)


def coherent_c_time(t, beta: float):
    """c(t) = 1/(beta sinh(2 pi t / beta)); singular at t = 0."""
    return 1.0 / (beta * np.sinh(2 * np.pi * np.asarray(t, dtype=float) / beta))


def _sech(x):
    x = np.abs(np.asarray(x, dtype=float))
    e = np.exp(-x)
    return 2 * e / (1 + e**2)


def g_ft(x, beta: float):
    """int g(t) exp(i x t) dt = 1 / (2 cosh(beta x / 4))."""
    return 0.5 * _sech(beta * np.asarray(x, dtype=float) / 4)


def g_s_ft(x, s: float, beta: float):
    """int g_s(t) exp(i x t) dt = cosh(s beta x / 2) / (2 cosh(beta x / 4))."""
    x = np.abs(np.asarray(x, dtype=float))
    a, b = abs(s) * beta * x / 2, beta * x / 4
    return 0.5 * np.exp(a - b) * (1 + np.exp(-2 * a)) / (1 + np.exp(-2 * b))


def g_adb_ft(x, s: float, beta: float):
    """int g^ADB_s(t) exp(i x t) dt = sinh(r beta x / 2) / (beta x cosh(beta x / 4)), r = 1/2 - |s|."""
    x = np.abs(np.asarray(x, dtype=float))
    r = 0.5 - abs(s)
    small = x * beta < 1e-8
    xs = np.where(small, 1.0, x)
    a, b = r * beta * xs / 2, beta * xs / 4
    val = np.exp(a - b) * (1 - np.exp(-2 * a)) / (1 + np.exp(-2 * b)) / (beta * xs)
    return np.where(small, r / 2, val)


def coherent_c_ft(x, beta: float):
    """Principal value int c(t) exp(i x t) dt = (i/2) tanh(beta x / 4)."""
    return 0.5j * np.tanh(beta * np.asarray(x, dtype=float) / 4)


def time_ft_quadrature(func, x: float, odd: bool = False, **kw) -> complex:
    """int func(t) exp(i x t) dt by adaptive quadrature for an even or odd filter."""
    if odd:
        val, _ = integrate.quad(lambda t: 2 * func(t) * np.sin(x * t), 0, np.inf, limit=400, **kw)
        return 1j * val
    val, _ = integrate.quad(lambda t: 2 * func(t) * np.cos(x * t), 0, np.inf, limit=400, **kw)
    return complex(val)


def coherent_c_ft_pv(x: float, beta: float, T: float | None = None) -> complex:
    """Principal-value transform of c(t) by direct quadrature.

    With a symmetric excision around t = 0 the cosine part cancels exactly and the
    remaining sine integrand 2 c(t) sin(x t) is bounded at the origin, so the
    principal value is an ordinary integral over (0, T).
    """
    T = 40 * beta if T is None else T

    def f(t):
        if t < 1e-8:
            return x / np.pi
        return 2 * coherent_c_time(t, beta) * np.sin(x * t)

    val, _ = integrate.quad(f, 0.0, T, limit=400, epsabs=1e-14, epsrel=1e-13)
    return 1j * val


# ------------------------------------------------------------- frequency pairs


def pair_integral(weight: PiecewiseExp, nu1, nu2, sigma: float):
    """Closed form of int w(w) fhat(w - nu1) fhat(w - nu2) dw (broadcasting)."""
    nu1 = np.asarray(nu1, dtype=float)
    nu2 = np.asarray(nu2, dtype=float)
    mean = 0.5 * (nu1 + nu2)
    log_val = -((nu1 - nu2) ** 2) / (8 * sigma**2) + weight.log_gauss_mean(mean, sigma)
    return np.exp(log_val)


def pair_integral_quad(weight: PiecewiseExp, nu1: float, nu2: float, sigma: float, span: float | None = None) -> float:
    """Adaptive Gauss-Kronrod version of :func:`pair_integral` for a single pair."""
    centre = 0.5 * (nu1 + nu2)
    half = (abs(nu1 - nu2) / 2 + 12 * sigma) if span is None else span
    f = lambda w: weight(w) * fhat(w - nu1, sigma) * fhat(w - nu2, sigma)
    pts = [p for p in (weight.a,) if centre - half < p < centre + half]
    val, _ = integrate.quad(f, centre - half, centre + half, points=pts or None, limit=400, epsabs=0, epsrel=1e-13)
    return val
