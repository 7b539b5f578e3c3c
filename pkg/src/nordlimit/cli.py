"""Command-line entry point: config parsing and experiment orchestration.

Subcommands: run-en (finite-c run), run-ep (limit run), sweep (the rate
experiment), check (invariant suite), info (snapshot inspection).  Configs
are INI-style key = value sections; unknown keys are warnings by default
and hard errors under --strict.  Exit codes: 0 success, 1 usage or config
error, 2 check/threshold failure.
"""

import argparse
import configparser
import json
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from . import energy_currents as ec
from . import eos as eos_mod
from . import euler_nordstrom as en
from . import euler_poisson as ep
from . import fields
from . import initial_data
from . import limit_harness as lh

CONFIG_SCHEMA = {
    "grid": {"n": int, "length": float},
    "constants": {"grav_g": float, "kappa": float},
    "eos": {"m0": float, "gamma": float, "a_inf": float, "a1": float},
    "background": {"eta": float, "p": float},
    "admissible": {"eta_min": float, "eta_max": float,
                   "p_min": float, "p_max": float},
    "perturbation": {"amp_eta": float, "amp_p": float, "amp_vx": float,
                     "amp_vy": float, "amp_vz": float, "center_x": float,
                     "center_y": float, "center_z": float, "width": float},
    "run": {"t_final": float, "cfl": float, "n_outputs": int,
            "sobolev_order": int, "mollify_eps": float, "c": str},
    "sweep": {"c_values": str},
}


class ConfigError(Exception):
    pass


def parse_config(path, strict=False):
    """Read and type-check a config file against the schema.

    Returns a {section: {key: value}} dict containing only the keys present
    in the file.  Unknown sections or keys raise under strict, warn
    otherwise.
    """
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError("config file not found: %s" % path)
    out = {}
    unknown = []
    for section in cp.sections():
        schema = CONFIG_SCHEMA.get(section)
        if schema is None:
            unknown.append(section)
            continue
        out[section] = {}
        for key, raw in cp.items(section):
            typ = schema.get(key)
            if typ is None:
                unknown.append("%s.%s" % (section, key))
                continue
            try:
                out[section][key] = typ(raw)
            except ValueError as exc:
                raise ConfigError("bad value for %s.%s: %s" % (section, key, exc))
    if unknown:
        msg = "unknown config keys: " + ", ".join(sorted(unknown))
        if strict:
            raise ConfigError(msg)
        print("warning: " + msg, file=sys.stderr)
    return out


def serialize_config(cfg):
    """Inverse of parse_config: render a config dict back to INI text."""
    lines = []
    for section in sorted(cfg):
        lines.append("[%s]" % section)
        for key in sorted(cfg[section]):
            lines.append("%s = %s" % (key, cfg[section][key]))
        lines.append("")
    return "\n".join(lines)


def sweep_config_from(cfg):
    """Build a SweepConfig from a parsed config dict (defaults fill gaps)."""
    sc = lh.SweepConfig()
    get = lambda sec, key, dflt: cfg.get(sec, {}).get(key, dflt)
    sc.n = get("grid", "n", sc.n)
    sc.length = get("grid", "length", sc.length)
    sc.grav_g = get("constants", "grav_g", sc.grav_g)
    sc.kappa = get("constants", "kappa", sc.kappa)
    sc.m0 = get("eos", "m0", sc.m0)
    sc.gamma = get("eos", "gamma", sc.gamma)
    sc.a_inf = get("eos", "a_inf", sc.a_inf)
    sc.a1 = get("eos", "a1", sc.a1)
    sc.eta_bar = get("background", "eta", sc.eta_bar)
    sc.p_bar = get("background", "p", sc.p_bar)
    sc.eta_box = (get("admissible", "eta_min", sc.eta_box[0]),
                  get("admissible", "eta_max", sc.eta_box[1]))
    sc.p_box = (get("admissible", "p_min", sc.p_box[0]),
                get("admissible", "p_max", sc.p_box[1]))
    pert = cfg.get("perturbation", {})
    sc.amp_eta = pert.get("amp_eta", sc.amp_eta)
    sc.amp_p = pert.get("amp_p", sc.amp_p)
    sc.amp_v = (pert.get("amp_vx", sc.amp_v[0]),
                pert.get("amp_vy", sc.amp_v[1]),
                pert.get("amp_vz", sc.amp_v[2]))
    sc.center = (pert.get("center_x", sc.center[0]),
                 pert.get("center_y", sc.center[1]),
                 pert.get("center_z", sc.center[2]))
    sc.width = pert.get("width", sc.width)
    sc.t_final = get("run", "t_final", sc.t_final)
    sc.cfl = get("run", "cfl", sc.cfl)
    sc.n_outputs = get("run", "n_outputs", sc.n_outputs)
    sc.sobolev_order = get("run", "sobolev_order", sc.sobolev_order)
    sc.mollify_eps = get("run", "mollify_eps", sc.mollify_eps)
    if "sweep" in cfg and "c_values" in cfg["sweep"]:
        try:
            sc.c_values = tuple(float(x) for x in cfg["sweep"]["c_values"].split(","))
        except ValueError as exc:
            raise ConfigError("bad sweep.c_values: %s" % exc)
    # kappa > 0 is a structural requirement of the screened operators
    if sc.kappa <= 0:
        raise ConfigError("constants.kappa must be > 0: the screened "
                          "(kappa > 0) operator is what makes the potential "
                          "solvable; kappa = 0 is outside scope")
    return sc


def _run_c_value(cfg):
    raw = cfg.get("run", {}).get("c", "inf").strip().lower()
    if raw in ("inf", "infinity"):
        return math.inf
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError("run.c must be a positive number or 'inf'")
    if val <= 0:
        raise ConfigError("run.c must be positive")
    return val


class Manifest:
    """Run manifest: config, environment, emitted files, pass/fail flags."""

    def __init__(self, out_dir, cfg, args):
        self.path = os.path.join(out_dir, "manifest.json")
        self.data = {
            "tool_version": __version__,
            "config": cfg,
            "seed": args.seed,
            "threads": args.threads,
            "strict": bool(args.strict),
            "host": platform.node(),
            "platform": platform.platform(),
            "start_time": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "end_time": None,
            "outputs": [],
            "checks": {},
            "notes": [
                "sup-over-time norms are taken at output times only",
                "admissible compact box taken from the [admissible] section",
            ],
        }

    def add_output(self, path):
        self.data["outputs"].append(os.path.basename(path))

    def set_check(self, name, ok):
        self.data["checks"][name] = bool(ok)

    def write(self):
        self.data["end_time"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        with open(self.path, "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _out_dir(args):
    out = os.environ.get("NORDLIMIT_OUT") or args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_diagnostics(path, traj, grid, order, kg=None, ratios=None):
    with open(path, "w") as fh:
        fh.write("t,dt,minEta,minP,maxV,hNw,kgE,minRatio,maxRatio\n")
        for m, t in enumerate(traj.ts):
            w = traj.ws[m]
            vmax = float(np.max(np.sqrt(np.sum(w[2:] ** 2, axis=0))))
            hn = grid.sobolev_norm(w, order,
                                   background=[float(np.mean(f)) for f in w])
            kge = kg[m] if kg is not None else 0.0
            rmin, rmax = ratios[m] if ratios is not None else (0.0, 0.0)
            fh.write("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                     % (t, traj.dt, float(np.min(w[0])), float(np.min(w[1])),
                        vmax, hn, kge, rmin, rmax))


def cmd_run_en(args):
    cfg = parse_config(args.config, args.strict)
    sc = sweep_config_from(cfg)
    c = _run_c_value(cfg)
    if not math.isfinite(c):
        raise ConfigError("run-en needs a finite run.c")
    out = _out_dir(args)
    manifest = Manifest(out, cfg, args)
    try:
        grid, eos = sc.make_grid(), sc.make_eos()
        bundle = initial_data.build_newtonian_data(
            sc.make_perturbation(), sc.consts(math.inf), eos, grid,
            eta_bar=sc.eta_bar, p_bar=sc.p_bar,
            admissible_box=(sc.eta_box, sc.p_box))
        lifted = initial_data.lift_to_relativistic(bundle, sc.consts(c))
        traj = en.run(en.from_bundle(lifted), sc.t_final, cfl=sc.cfl,
                      n_outputs=sc.n_outputs, eta_box=sc.eta_box, p_box=sc.p_box)
        consts = sc.consts(c)
        kg = []
        for m in range(len(traj.ts)):
            st = en.RelState(w=traj.ws[m], phi=traj.phis[m], pi=traj.pis[m],
                             t=traj.ts[m], consts=consts, eos=eos, grid=grid)
            kg.append(ec.kg_energy(st, lifted.phi_c, sc.sobolev_order))
        diag = os.path.join(out, "run_en_diagnostics.csv")
        _write_diagnostics(diag, traj, grid, sc.sobolev_order, kg=kg)
        snap = os.path.join(out, "run_en_final.nrdf")
        fields.write_snapshot(snap, grid, traj.ts[-1], np.concatenate(
            [traj.ws[-1], traj.phis[-1][None], traj.pis[-1][None]]))
        manifest.add_output(diag)
        manifest.add_output(snap)
        manifest.set_check("run_completed", traj.ok)
        if not traj.ok:
            print("run aborted: " + traj.abort_reason, file=sys.stderr)
            return 2
        print("run-en complete: t=%g, dt=%g, outputs=%d" %
              (traj.ts[-1], traj.dt, len(traj.ts)))
        return 0
    finally:
        manifest.write()


def cmd_run_ep(args):
    cfg = parse_config(args.config, args.strict)
    sc = sweep_config_from(cfg)
    out = _out_dir(args)
    manifest = Manifest(out, cfg, args)
    try:
        grid, eos = sc.make_grid(), sc.make_eos()
        bundle = initial_data.build_newtonian_data(
            sc.make_perturbation(), sc.consts(math.inf), eos, grid,
            eta_bar=sc.eta_bar, p_bar=sc.p_bar,
            admissible_box=(sc.eta_box, sc.p_box))
        traj = ep.run(ep.from_bundle(bundle, sc.consts(math.inf)), sc.t_final,
                      cfl=sc.cfl, n_outputs=sc.n_outputs,
                      eta_box=sc.eta_box, p_box=sc.p_box)
        diag = os.path.join(out, "run_ep_diagnostics.csv")
        _write_diagnostics(diag, traj, grid, sc.sobolev_order)
        snap = os.path.join(out, "run_ep_final.nrdf")
        fields.write_snapshot(snap, grid, traj.ts[-1], np.concatenate(
            [traj.ws[-1], traj.phis[-1][None]]))
        manifest.add_output(diag)
        manifest.add_output(snap)
        manifest.set_check("run_completed", traj.ok)
        if not traj.ok:
            print("run aborted: " + traj.abort_reason, file=sys.stderr)
            return 2
        drift = float(np.max(np.abs(traj.ws[-1] - traj.ws[0])))
        print("run-ep complete: t=%g, dt=%g, max state change=%.3g" %
              (traj.ts[-1], traj.dt, drift))
        return 0
    finally:
        manifest.write()


def cmd_sweep(args):
    cfg = parse_config(args.config, args.strict)
    sc = sweep_config_from(cfg)
    out = _out_dir(args)
    manifest = Manifest(out, cfg, args)
    try:
        result = lh.run_sweep(sc, keep_trajectories=False)
        csv_path, summary_path = lh.emit_report(result.report, out)
        manifest.add_output(csv_path)
        manifest.add_output(summary_path)
        rep = result.report
        ok = (rep.slope_w <= -0.9 and rep.slope_phi <= -0.9
              and abs(rep.slope_gap + 2.0) <= 0.1)
        manifest.set_check("rate_thresholds", ok)
        print(open(summary_path).read(), end="")
        return 0 if ok else 2
    finally:
        manifest.write()


def cmd_check(args):
    cfg = parse_config(args.config, args.strict)
    sc = sweep_config_from(cfg)
    out = _out_dir(args)
    manifest = Manifest(out, cfg, args)
    rng = np.random.default_rng(args.seed)
    results = {}
    try:
        grid, eos = sc.make_grid(), sc.make_eos()
        slopes = eos_mod.rate_check(eos, sc.eta_box, sc.p_box,
                                    sc.c_values, seed=args.seed)
        results["eos_rates"] = all(s <= -1.9 for s in slopes.values())

        consts_inf = sc.consts(math.inf)
        bundle = initial_data.build_newtonian_data(
            sc.make_perturbation(), consts_inf, eos, grid,
            eta_bar=sc.eta_bar, p_bar=sc.p_bar,
            admissible_box=(sc.eta_box, sc.p_box))
        c_mid = sc.c_values[len(sc.c_values) // 2]
        consts_c = sc.consts(c_mid)
        lifted = initial_data.lift_to_relativistic(bundle, consts_c)
        t_short = min(sc.t_final, 0.1)
        traj = en.run(en.from_bundle(lifted), t_short, cfl=sc.cfl,
                      n_outputs=max(8, sc.n_outputs),
                      eta_box=sc.eta_box, p_box=sc.p_box)
        results["en_run"] = traj.ok

        # positivity along the trajectory
        variations = rng.normal(size=(16, 5))
        ok = True
        for m in range(len(traj.ts)):
            bg = ec.background_coeffs(consts_c, eos, traj.ws[m], traj.phis[m])
            lo, _ = ec.positivity_ratio(consts_c, bg, variations)
            ok = ok and lo > 0
        results["positivity"] = ok

        # divergence identity on the stored run
        smoothed = initial_data.mollify_bundle(lifted, sc.mollify_eps)
        rep = ec.divergence_identity_check(
            traj, smoothed.w_c, lifted.phi_c, consts_c, eos, grid,
            eta_bar=sc.eta_bar, p_bar=sc.p_bar)
        results["divergence_identity"] = rep.max_defect <= 1e-3
        rep.write_csv(os.path.join(out, "divergence_check.csv"))
        manifest.add_output(os.path.join(out, "divergence_check.csv"))

        # scalar-field energy inequality
        sup_l = 0.0
        ok = True
        e0 = None
        for m in range(len(traj.ts)):
            st = en.RelState(w=traj.ws[m], phi=traj.phis[m], pi=traj.pis[m],
                             t=traj.ts[m], consts=consts_c, eos=eos, grid=grid)
            l = ec.assemble_eov_inhomogeneity(st, smoothed.w_c, lifted.phi_c)[5]
            sup_l = max(sup_l, grid.sobolev_norm(l, sc.sobolev_order))
            e = ec.kg_energy(st, lifted.phi_c, sc.sobolev_order)
            if e0 is None:
                e0 = e
            bound = e0 + consts_c.c * traj.ts[m] * sup_l * (1.0 + 1e-3)
            ok = ok and e <= bound
        results["kg_inequality"] = ok

        for name, flag in sorted(results.items()):
            manifest.set_check(name, flag)
            print("%-24s %s" % (name, "PASS" if flag else "FAIL"))
        return 0 if all(results.values()) else 2
    finally:
        manifest.write()


def cmd_info(args):
    grid, t, data = fields.read_snapshot(args.snapshot)
    print("snapshot: %s" % args.snapshot)
    print("  n = %d, L = %.17g, t = %.17g, ncomp = %d"
          % (grid.n, grid.length, t, data.shape[0]))
    for i, comp in enumerate(data):
        print("  comp %d: L2 = %.10g, Linf = %.10g, mean = %.10g"
              % (i, grid.l2_norm(comp), float(np.max(np.abs(comp))),
                 float(np.mean(comp))))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="nordlimit",
        description="Numerical laboratory for the light-speed limit of a "
                    "self-gravitating relativistic fluid")
    ap.add_argument("--config", metavar="PATH", help="run configuration file")
    ap.add_argument("--out", metavar="DIR", help="output directory "
                    "(env NORDLIMIT_OUT overrides)")
    ap.add_argument("--threads", type=int, metavar="N",
                    default=os.cpu_count() or 1,
                    help="worker pool size (results are thread-count independent)")
    ap.add_argument("--seed", type=int, metavar="U64", default=0,
                    help="seed for randomized checks")
    ap.add_argument("--strict", action="store_true",
                    help="treat unknown config keys as errors")
    sub = ap.add_subparsers(dest="command")
    sub.add_parser("run-en", help="run the finite-c system")
    sub.add_parser("run-ep", help="run the limit system")
    sub.add_parser("sweep", help="run the convergence-rate experiment")
    sub.add_parser("check", help="run the invariant suite")
    info = sub.add_parser("info", help="print snapshot header and norms")
    info.add_argument("snapshot", help="snapshot file path")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "info":
            return cmd_info(args)
        if not args.config:
            print("error: --config is required for this command", file=sys.stderr)
            return 1
        handler = {"run-en": cmd_run_en, "run-ep": cmd_run_ep,
                   "sweep": cmd_sweep, "check": cmd_check}[args.command]
        return handler(args)
    except (ConfigError, ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
