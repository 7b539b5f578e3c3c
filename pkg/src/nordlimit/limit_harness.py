"""The main experiment: sweep the light speed and fit convergence rates.

One Euler-Poisson run and one finite-c run per sweep value start from
matched data; at matched output times the finite-c solution is pulled back
to limit variables (eta, exp(-4 phi/c**2) P, v) and compared in discrete
Sobolev norms.  The report records, per c,

    supWdiff   = sup_t | w_limit - w_c |_{H^(N-1)},
    supPhidiff = sup_t | (phi_limit - phibar_limit) - (phi_c - phibar_c) |_{H^(N+1) proxy},
    phiBarGap  = | phibar_limit - phibar_c |,

with least-squares log-log slopes.  The H^(N+1) figure is a proxy: it
applies spectral derivatives of order up to N+1 to the stored potential
fields, which is well-defined on the band-limited grid representation but
is not a claim about continuum H^(N+1) control.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import eos as eos_mod
from . import euler_nordstrom as en
from . import euler_poisson as ep
from . import initial_data


@dataclass
class SweepConfig:
    """Everything needed to reproduce the sweep."""

    n: int = 32
    length: float = 2.0 * math.pi
    grav_g: float = 0.05
    kappa: float = 1.0
    m0: float = 1.0
    gamma: float = 2.0
    a_inf: float = 1.0
    a1: float = 0.0
    eta_bar: float = 1.0
    p_bar: float = 1.0
    amp_eta: float = 0.05
    amp_p: float = 0.05
    amp_v: tuple = (0.05, 0.0, 0.0)
    center: tuple = (math.pi, math.pi, math.pi)
    width: float = math.pi / 4.0
    c_values: tuple = (10.0, 20.0, 40.0, 80.0, 160.0)
    t_final: float = 0.2
    cfl: float = 0.5
    sobolev_order: int = 4
    n_outputs: int = 20
    mollify_eps: float = 0.2
    eta_box: tuple = (0.5, 1.5)
    p_box: tuple = (0.5, 1.5)

    def validate(self):
        cs = list(self.c_values)
        if len(cs) < 3 or any(b <= a for a, b in zip(cs, cs[1:])):
            raise ValueError("c_values must be ascending with >= 3 entries")
        if not all(math.isfinite(c) and c > 0 for c in cs):
            raise ValueError("c_values must be finite and positive")
        if not (self.t_final > 0):
            raise ValueError("t_final must be positive")
        if self.sobolev_order < 4:
            raise ValueError("sobolev_order must be >= 4")
        if not (0 < self.cfl <= 1):
            raise ValueError("cfl must lie in (0, 1]")
        return self

    def make_grid(self):
        from .fields import Grid3
        return Grid3(self.n, self.length)

    def make_eos(self):
        return eos_mod.PolytropicEos(m0=self.m0, gamma=self.gamma,
                                     a_inf=self.a_inf, a1=self.a1)

    def make_perturbation(self):
        return initial_data.PerturbationSpec(
            amp_eta=self.amp_eta, amp_p=self.amp_p, amp_v=tuple(self.amp_v),
            center=tuple(self.center), width=self.width)

    def consts(self, c):
        return eos_mod.PhysicalConstants(grav_g=self.grav_g, kappa=self.kappa, c=c)


def fit_slope(cs, vals):
    """Log-log slope and root-mean-square fit residual."""
    x = np.log(np.asarray(cs, float))
    # floor at 1e-300 so exactly-zero samples (quiet sweeps) stay finite
    y = np.log(np.maximum(np.asarray(vals, float), 1e-300))
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


@dataclass
class RateReport:
    c_values: list
    sup_w: list
    sup_phi: list
    phi_bar_gap: list
    slope_w: float = math.nan
    slope_phi: float = math.nan
    slope_gap: float = math.nan
    resid_w: float = math.nan
    resid_phi: float = math.nan
    resid_gap: float = math.nan

    def fit(self):
        self.slope_w, self.resid_w = fit_slope(self.c_values, self.sup_w)
        self.slope_phi, self.resid_phi = fit_slope(self.c_values, self.sup_phi)
        self.slope_gap, self.resid_gap = fit_slope(self.c_values, self.phi_bar_gap)
        return self


@dataclass
class SweepResult:
    """RateReport plus the raw trajectories for downstream diagnostics."""

    config: SweepConfig
    report: RateReport
    bundle: object
    ep_traj: object
    en_trajs: dict = field(default_factory=dict)
    en_bundles: dict = field(default_factory=dict)
    abort_reasons: dict = field(default_factory=dict)


def run_sweep(config, keep_trajectories=True):
    """Run the full experiment; returns a SweepResult with a fitted report."""
    config.validate()
    grid = config.make_grid()
    eos = config.make_eos()
    consts_inf = config.consts(math.inf)
    bundle = initial_data.build_newtonian_data(
        config.make_perturbation(), consts_inf, eos, grid,
        eta_bar=config.eta_bar, p_bar=config.p_bar,
        admissible_box=(config.eta_box, config.p_box))

    ep_traj = ep.run(ep.from_bundle(bundle, consts_inf), config.t_final,
                     cfl=config.cfl, n_outputs=config.n_outputs,
                     eta_box=config.eta_box, p_box=config.p_box)
    if not ep_traj.ok:
        raise RuntimeError("limit-system run aborted: " + ep_traj.abort_reason)

    order = config.sobolev_order
    result = SweepResult(config=config, report=None, bundle=bundle,
                         ep_traj=ep_traj)
    sup_w, sup_phi, gaps = [], [], []
    for c in config.c_values:
        consts_c = config.consts(c)
        lifted = initial_data.lift_to_relativistic(bundle, consts_c)
        traj = en.run(en.from_bundle(lifted), config.t_final, cfl=config.cfl,
                      n_outputs=config.n_outputs,
                      eta_box=config.eta_box, p_box=config.p_box)
        if not traj.ok:
            result.abort_reasons[c] = traj.abort_reason
            raise RuntimeError(
                "finite-c run aborted at c=%g: %s" % (c, traj.abort_reason))
        icc = consts_c.inv_c_sq
        w_sup = 0.0
        phi_sup = 0.0
        for m in range(len(traj.ts)):
            script_w = np.concatenate([
                traj.ws[m][:1],
                (np.exp(-4.0 * traj.phis[m] * icc) * traj.ws[m][1])[None],
                traj.ws[m][2:]])
            w_sup = max(w_sup, grid.sobolev_norm(
                ep_traj.ws[m] - script_w, order - 1))
            dev = ((ep_traj.phis[m] - bundle.phi_bar_inf)
                   - (traj.phis[m] - lifted.phi_bar_c))
            phi_sup = max(phi_sup, grid.sobolev_norm(dev, order + 1))
        sup_w.append(w_sup)
        sup_phi.append(phi_sup)
        gaps.append(abs(bundle.phi_bar_inf - lifted.phi_bar_c))
        if keep_trajectories:
            result.en_trajs[c] = traj
            result.en_bundles[c] = lifted
    result.report = RateReport(c_values=list(config.c_values), sup_w=sup_w,
                               sup_phi=sup_phi, phi_bar_gap=gaps).fit()
    return result


def newtonian_operator_residual(w, dt_w, phi, consts_inf, eos, grid):
    """Pointwise residual of the limit system applied to (w, d_t w, phi)."""
    eta, p = w[0], w[1]
    v = w[2:]
    r_inf = eos_mod.mass_density(consts_inf, eos, eta, p)
    q_inf = eos_mod.q_coefficient(consts_inf, eos, eta, p)
    deta = grid.gradient(eta)
    dp = grid.gradient(p)
    dv = np.stack([grid.gradient(v[j]) for j in range(3)])
    dphi = grid.gradient(phi)
    adv = lambda grad: np.einsum("k...,k...->...", v, grad)
    res = np.empty_like(w)
    res[0] = dt_w[0] + adv(deta)
    res[1] = dt_w[1] + adv(dp) + q_inf * (dv[0, 0] + dv[1, 1] + dv[2, 2])
    res[2:] = (r_inf * (dt_w[2:] + np.einsum("k...,jk...->j...", v, dv))
               + dp + r_inf * dphi)
    return res


def approximate_solution_residuals(traj, phi_data, w_data_inf, consts, eos,
                                   grid, order):
    """Sup-in-time norms of the two closeness residuals of a finite-c run.

    The first residual applies the limit-system operator to the pulled-back
    finite-c solution (time derivative by centered differences at output
    times); the second measures how far the potential deviation is from
    solving the screened Poisson equation sourced by the limit density.
    Also works on a limit-system trajectory, where the first residual is
    the pure time-differencing floor and the second is ~0.
    """
    consts_inf = eos_mod.PhysicalConstants(grav_g=consts.grav_g,
                                           kappa=consts.kappa, c=math.inf)
    icc = consts.inv_c_sq
    fourpg = 4.0 * math.pi * consts.grav_g

    def script_w(m):
        w = traj.ws[m]
        if not consts.finite_c:
            return w
        return np.concatenate([
            w[:1], (np.exp(-4.0 * traj.phis[m] * icc) * w[1])[None], w[2:]])

    rho_data = eos_mod.mass_density(consts_inf, eos, w_data_inf[0], w_data_inf[1])
    sup_e1 = 0.0
    sup_e2 = 0.0
    for m in range(len(traj.ts)):
        wm = script_w(m)
        e2 = (grid.laplacian(traj.phis[m] - phi_data)
              - consts.kappa**2 * (traj.phis[m] - phi_data)
              - fourpg * (eos_mod.mass_density(consts_inf, eos, wm[0], wm[1])
                          - rho_data))
        sup_e2 = max(sup_e2, grid.sobolev_norm(e2, order - 1))
        if 1 <= m <= len(traj.ts) - 2:
            dt_out = traj.ts[m + 1] - traj.ts[m - 1]
            dt_w = (script_w(m + 1) - script_w(m - 1)) / dt_out
            e1 = newtonian_operator_residual(wm, dt_w, traj.phis[m],
                                             consts_inf, eos, grid)
            sup_e1 = max(sup_e1, grid.sobolev_norm(e1, order - 1))
    return sup_e1, sup_e2


def emit_report(report, out_dir, thresholds=None):
    """Write the rate CSV and a human-readable summary; returns file paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "rates.csv")
    with open(csv_path, "w") as fh:
        fh.write("c,supWdiff,supPhidiff,phiBarGap\n")
        for i, c in enumerate(report.c_values):
            fh.write("%.17g,%.17g,%.17g,%.17g\n" % (
                c, report.sup_w[i], report.sup_phi[i], report.phi_bar_gap[i]))
    summary_path = os.path.join(out_dir, "summary.txt")
    thresholds = thresholds or {"slope_w": -0.9, "slope_phi": -0.9}
    lines = [
        "convergence-rate sweep summary",
        "c values: %s" % (list(report.c_values),),
        "fluid slope: %.4f (rms fit residual %.4f)" % (report.slope_w, report.resid_w),
        "potential slope: %.4f (rms fit residual %.4f)" % (report.slope_phi, report.resid_phi),
        "background-gap slope: %.4f (rms fit residual %.4f)" % (report.slope_gap, report.resid_gap),
    ]
    ok = (report.slope_w <= thresholds["slope_w"]
          and report.slope_phi <= thresholds["slope_phi"]
          and abs(report.slope_gap + 2.0) <= 0.1)
    lines.append("acceptance thresholds: %s" % ("PASS" if ok else "FAIL"))
    with open(summary_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return csv_path, summary_path
