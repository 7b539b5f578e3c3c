"""Polytropic equation-of-state family with explicit speed-of-light dependence.

The fluid is closed by a one-parameter family of barotropic-in-p equations of
state.  For a finite light speed c the proper energy density is

    rho_c(eta, p) = m0 * (p / A_c(eta))**(1/gamma) + p / ((gamma - 1) c**2),

with A_c(eta) = A_inf(eta) * (1 + a1 / c**2), and in the c -> infinity limit

    rho_inf(eta, p) = m0 * (p / A_inf(eta))**(1/gamma).

All quantities below (sound speed, the pressure-equation coefficient q, the
gravitating density) are closed-form consequences of these two formulas.
Finite-c quantities converge to their limits at rate c**-2; `rate_check`
measures that rate empirically over a sampling box.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PhysicalConstants:
    """Gravitational coupling, potential mass parameter, and light speed.

    c = math.inf selects the Newtonian (Euler-Poisson) limit everywhere.
    kappa must be positive: the kappa -> 0 regime is outside scope and the
    elliptic/step operators divide by kappa**2.
    """

    grav_g: float = 1.0
    kappa: float = 1.0
    c: float = math.inf

    def __post_init__(self):
        if not (self.grav_g > 0):
            raise ValueError("grav_g must be positive")
        if not (self.kappa > 0):
            raise ValueError("kappa must be positive (kappa=0 is outside scope)")
        if not (self.c > 0):
            raise ValueError("c must be positive (use math.inf for the limit)")

    @property
    def finite_c(self):
        return math.isfinite(self.c)

    @property
    def inv_c_sq(self):
        return 0.0 if not self.finite_c else 1.0 / self.c**2


@dataclass(frozen=True)
class PolytropicEos:
    """Parameters of the polytropic family.

    m0 > 0 is the mass scale, gamma > 1 the adiabatic index, a_inf > 0 the
    limiting entropy coefficient, and a1 the first-order coefficient of the
    c**-2 correction to the entropy function.
    """

    m0: float = 1.0
    gamma: float = 2.0
    a_inf: float = 1.0
    a1: float = 0.0

    def __post_init__(self):
        if not (self.m0 > 0):
            raise ValueError("m0 must be positive")
        if not (self.gamma > 1):
            raise ValueError("gamma must exceed 1")
        if not (self.a_inf > 0):
            raise ValueError("a_inf must be positive")

    def entropy_coeff(self, consts):
        """A_c = A_inf (1 + a1/c**2); equals a_inf in the limit."""
        return self.a_inf * (1.0 + self.a1 * consts.inv_c_sq)


def mass_density(consts, eos, eta, p):
    """Proper energy density rho_c(eta, p); rho_inf when c is infinite.

    eta enters only through the (currently eta-independent) entropy
    coefficient; the argument is kept for signature stability across the
    family.  p must be positive.
    """
    a = eos.entropy_coeff(consts)
    base = eos.m0 * (np.asarray(p) / a) ** (1.0 / eos.gamma)
    if consts.finite_c:
        return base + np.asarray(p) * consts.inv_c_sq / (eos.gamma - 1.0)
    return base


def drho_dp(consts, eos, eta, p):
    """Partial derivative of rho_c with respect to p, i.e. 1/sound_speed_sq."""
    a = eos.entropy_coeff(consts)
    p = np.asarray(p)
    base = eos.m0 * (p / a) ** (1.0 / eos.gamma) / (eos.gamma * p)
    if consts.finite_c:
        return base + consts.inv_c_sq / (eos.gamma - 1.0)
    return base


def sound_speed_sq(consts, eos, eta, p):
    """Squared sound speed s_c**2 = (d rho_c / d p)**-1.

    Raises ValueError if causality (s_c < c) fails anywhere, which for this
    family can only happen through invalid parameters.
    """
    ss = 1.0 / drho_dp(consts, eos, eta, p)
    if consts.finite_c and np.any(ss >= consts.c**2):
        raise ValueError("sound speed reached the light speed: non-causal state")
    return ss


def q_coefficient(consts, eos, eta, p, phi=None):
    """Coefficient q_c of the velocity divergence in the pressure equation.

    q_c = s_c**2 * exp(4 phi / c**2) * (rho_c + p/c**2); for the polytropic
    family this collapses to gamma * exp(4 phi/c**2) * p exactly.  In the
    limit q_inf = s_inf**2 * rho_inf = gamma * p.
    """
    ss = sound_speed_sq(consts, eos, eta, p)
    rho = mass_density(consts, eos, eta, p)
    if consts.finite_c:
        if phi is None:
            raise ValueError("finite-c q needs the potential")
        return ss * np.exp(4.0 * phi * consts.inv_c_sq) * (rho + np.asarray(p) * consts.inv_c_sq)
    return ss * rho


def gravitating_density(consts, eos, eta, p, phi=None):
    """Source density r_c = exp(4 phi/c**2) rho_c; r_inf = rho_inf."""
    rho = mass_density(consts, eos, eta, p)
    if consts.finite_c:
        if phi is None:
            raise ValueError("finite-c gravitating density needs the potential")
        return np.exp(4.0 * phi * consts.inv_c_sq) * rho
    return rho


def lorentz_factor_sq(consts, v):
    """gamma_c**2 = c**2 / (c**2 - |v|**2); identically 1 in the limit.

    v has shape (3, ...).  Raises on |v| >= c.
    """
    vsq = np.sum(np.square(np.asarray(v)), axis=0)
    if not consts.finite_c:
        return np.ones_like(vsq)
    if np.any(vsq >= consts.c**2):
        raise ValueError("superluminal velocity")
    return consts.c**2 / (consts.c**2 - vsq)


def background_potential(consts, eos, eta_bar, p_bar, tol=1e-14, max_iter=200):
    """Spatially constant background potential phi_bar.

    In the limit the background constraint is linear:

        phi_bar_inf = -4 pi G rho_inf(eta_bar, p_bar) / kappa**2.

    For finite c it is the scalar root of

        F(phi) = kappa**2 phi
                 + 4 pi G exp(4 phi/c**2) (rho_c(eta_bar,p_bar) - 3 p_bar/c**2)

    which is bracketed in [-8 pi G rho_c / kappa**2, 0] and polished by a
    bisection-safeguarded Newton iteration to |F| <= tol.
    """
    g, kap = consts.grav_g, consts.kappa
    rho = float(mass_density(consts, eos, eta_bar, p_bar))
    if not consts.finite_c:
        return -4.0 * math.pi * g * rho / kap**2

    icc = consts.inv_c_sq
    src = rho - 3.0 * p_bar * icc
    if src <= 0:
        raise ValueError("background source density must be positive")

    def f_and_df(phi):
        e = math.exp(4.0 * phi * icc)
        f = kap**2 * phi + 4.0 * math.pi * g * e * src
        df = kap**2 + 16.0 * math.pi * g * icc * e * src
        return f, df

    lo = -8.0 * math.pi * g * rho / kap**2
    hi = 0.0
    flo, _ = f_and_df(lo)
    fhi, _ = f_and_df(hi)
    if not (flo < 0 < fhi):
        raise ValueError("background potential bracket failed")
    phi = -4.0 * math.pi * g * src / kap**2  # Newtonian guess
    best_phi, best_f = phi, math.inf
    for _ in range(max_iter):
        f, df = f_and_df(phi)
        if abs(f) < best_f:
            best_phi, best_f = phi, abs(f)
        if abs(f) <= tol:
            return phi
        if f > 0:
            hi = phi
        else:
            lo = phi
        step = phi - f / df
        # fall back to bisection when Newton leaves the bracket
        phi = step if lo < step < hi else 0.5 * (lo + hi)
    if best_f <= 1e-12:  # roundoff-limited but well within contract
        return best_phi
    raise RuntimeError("background potential iteration did not converge")


def _fit_slope(cs, vals):
    """Least-squares slope of log(vals) against log(cs)."""
    x = np.log(np.asarray(cs, dtype=float))
    y = np.log(np.asarray(vals, dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def rate_check(eos, eta_box, p_box, c_values, n_samples=200, seed=0):
    """Empirical c**-2 convergence rates of the family toward its limit.

    Samples (eta, p) uniformly from the closed boxes plus a potential sample
    in [-1, 0] (at phi = 0 the pressure coefficient q_c = gamma p exactly and
    its gap would vanish identically), evaluates the gaps |rho_c - rho_inf|,
    |s_c**2 - s_inf**2|, |q_c - q_inf| in the sup norm over the samples for
    each c, and returns a dict of fitted log-log slopes.  All three should
    sit near -2.
    """
    rng = np.random.default_rng(seed)
    eta = rng.uniform(eta_box[0], eta_box[1], n_samples)
    p = rng.uniform(p_box[0], p_box[1], n_samples)
    phi = rng.uniform(-1.0, 0.0, n_samples)
    inf = PhysicalConstants(c=math.inf)
    rho_inf = mass_density(inf, eos, eta, p)
    ss_inf = sound_speed_sq(inf, eos, eta, p)
    q_inf = q_coefficient(inf, eos, eta, p)
    gaps = {"rho": [], "sound_sq": [], "q": []}
    for c in c_values:
        k = PhysicalConstants(c=c)
        gaps["rho"].append(np.max(np.abs(mass_density(k, eos, eta, p) - rho_inf)))
        gaps["sound_sq"].append(np.max(np.abs(sound_speed_sq(k, eos, eta, p) - ss_inf)))
        gaps["q"].append(np.max(np.abs(q_coefficient(k, eos, eta, p, phi) - q_inf)))
    return {name: _fit_slope(c_values, vals) for name, vals in gaps.items()}
