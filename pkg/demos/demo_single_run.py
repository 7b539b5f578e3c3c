"""One finite-c run next to its limit run, from matched data.

Evolves both systems from the same data, pulls the finite-c solution back
to limit variables at matched output times, and prints the growing-in-time
but shrinking-in-c gap together with basic run diagnostics.

Run from the repository root:

    python3 demos/demo_single_run.py
"""

import math

import numpy as np

from nordlimit import eos
from nordlimit import euler_nordstrom as en
from nordlimit import euler_poisson as ep
from nordlimit.fields import Grid3
from nordlimit.initial_data import (PerturbationSpec, build_newtonian_data,
                                    lift_to_relativistic)

c = 20.0
grid = Grid3(16, 2 * math.pi)
eosf = eos.PolytropicEos()
consts_inf = eos.PhysicalConstants(grav_g=0.05, kappa=1.0, c=math.inf)
consts = eos.PhysicalConstants(grav_g=0.05, kappa=1.0, c=c)
box = ((0.5, 1.5), (0.5, 1.5))

spec = PerturbationSpec(amp_eta=0.05, amp_p=0.05, amp_v=(0.05, 0.0, 0.0),
                        center=(math.pi,) * 3, width=math.pi / 4)
bundle = build_newtonian_data(spec, consts_inf, eosf, grid, admissible_box=box)
lifted = lift_to_relativistic(bundle, consts)

t_final, n_outputs = 0.1, 10
print("evolving both systems to t = %g ..." % t_final)
limit = ep.run(ep.from_bundle(bundle, consts_inf), t_final,
               n_outputs=n_outputs, eta_box=box[0], p_box=box[1])
finite = en.run(en.from_bundle(lifted), t_final, n_outputs=n_outputs,
                eta_box=box[0], p_box=box[1])
assert limit.ok and finite.ok

print("limit-system step %g, finite-c step %g (resolves the wave operator)"
      % (limit.dt, finite.dt))
print()
print("%8s  %16s  %16s" % ("t", "max fluid gap", "max potential gap"))
icc = 1.0 / c**2
for m in range(len(limit.ts)):
    pulled = np.concatenate([
        finite.ws[m][:1],
        (np.exp(-4.0 * finite.phis[m] * icc) * finite.ws[m][1])[None],
        finite.ws[m][2:]])
    w_gap = float(np.max(np.abs(pulled - limit.ws[m])))
    phi_gap = float(np.max(np.abs(
        (finite.phis[m] - lifted.phi_bar_c)
        - (limit.phis[m] - bundle.phi_bar_inf))))
    print("%8.3f  %16.6e  %16.6e" % (limit.ts[m], w_gap, phi_gap))

print()
print("constant background potentials: limit %.6f, finite-c %.6f"
      % (bundle.phi_bar_inf, lifted.phi_bar_c))
print("their gap, %.2e, shrinks like 1/c^2" %
      abs(bundle.phi_bar_inf - lifted.phi_bar_c))
