"""Command-line front end: ``fhnlif <command> [flags]``.

Every run writes into ``<out>/<command>-<hash>/`` where the hash covers the
command and the full configuration, together with ``manifest.json`` holding
that configuration, the seed and library versions.  A one-line JSON summary
is printed on stdout.  Failures print ``{"error": code, "message": ...}`` on
stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import attractor_checks as ac
from . import firing_isi as fi
from .config import RunConfig, dump_config, load_config, parse_floats
from .errors import BlowUpError, FhnLifError, InvalidArgumentError
from .fhn_model import fhn_system, fixed_point, validate_excitable
from .lif_reduction import (polar_radial_model, radial_ou_model, sigma_eff, sigma_eff_trace,
                            simulate_radial)
from .linearization import approximation_experiment, lambda_condition, normal_form
from .output import dumps, versions, write_csv, write_json
from .sde_engine import brownian_path, integrate
from .spectral import compare_radial, compare_shifted_linearized

COMMANDS = ("fixed-point", "simulate", "linearize", "lif", "firing-prob", "fit-sigmoid",
            "isi", "psd", "verify", "table1")

EXIT_CODES = {"invalid-argument": 2, "blow-up": 3}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidArgumentError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--seed", type=int)
    common.add_argument("--sigma0", type=float)
    common.add_argument("--noise", choices=("additive", "multiplicative"))
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--quick", action="store_true", help="divide trial counts by 10")

    parser = _Parser(prog="fhnlif", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "verify":
            p.add_argument("suite", nargs="?", default="attractor", choices=("attractor",))
        if name == "fit-sigmoid":
            p.add_argument("--input", metavar="CSV", help="firing-prob CSV to fit instead of simulating")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    params = cfg.params
    if args.sigma0 is not None or args.noise is not None:
        params = params.with_noise(sigma0=args.sigma0, kind=args.noise)
    cfg = replace(cfg, params=params)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    if args.quick:
        cfg = cfg.scaled(10)
    return cfg


# ---------------------------------------------------------------------------
# commands; each returns the summary dict


def cmd_fixed_point(cfg: RunConfig, out: Path, args) -> dict:
    fp = fixed_point(cfg.params)
    rep = validate_excitable(cfg.params)
    res = {"v_e": fp.v_e, "w_e": fp.w_e, "p": fp.p, "q": fp.q, "delta": fp.delta,
           "mu": fp.mu, "nu": fp.nu, "mu_over_nu": fp.mu / fp.nu if fp.nu else None,
           "jacobian": fp.jacobian, "excitable": rep.passed}
    write_json(out / "fixed_point.json", res)
    return res


def cmd_simulate(cfg: RunConfig, out: Path, args) -> dict:
    x0 = parse_floats(cfg.knob("x0"))
    n = int(round(cfg.T / cfg.dt))
    traj = integrate(fhn_system(cfg.params), np.array(x0), brownian_path(cfg.seed, 0, cfg.dt, n))
    every = int(cfg.knob("save_every"))
    write_csv(out / "trajectory.csv", ("t", "v", "w"),
              ((t, v, w) for t, (v, w) in zip(traj.t[::every], traj.x[::every])))
    v = traj.x[:, 0]
    spikes = int(np.sum((v[:-1] < 0) & (v[1:] >= 0)))
    res = {"x0": x0, "T": cfg.T, "n_spikes": spikes, "v_max": float(v.max()),
           "final_state": traj.x[-1]}
    write_json(out / "simulate.json", res)
    return res


def cmd_linearize(cfg: RunConfig, out: Path, args) -> dict:
    nf = normal_form(cfg.params)
    lam = lambda_condition(cfg.params)
    rows = [approximation_experiment(cfg.params, r, cfg.trials, cfg.seed, T=cfg.T, dt=cfg.dt).to_json_dict()
            for r in parse_floats(cfg.knob("r_values"))]
    res = {
        "mu": nf.mu, "nu": nf.nu, "Q": nf.Q, "Q_inv": nf.Q_inv, "h_e": nf.h_e,
        "h_e_norm_sq": float(nf.h_e @ nf.h_e), "distance_scale": nf.distance_scale,
        "lambda": lam.lam, "b1_norm": lam.b1_norm, "lambda_sigma0_bound": lam.sigma0_bound,
        "experiments": rows,
    }
    write_json(out / "linearize.json", res)
    return {k: v for k, v in res.items() if k != "experiments"} | {
        "ratios": [r["ratio"] for r in rows]}


def cmd_lif(cfg: RunConfig, out: Path, args) -> dict:
    models = [radial_ou_model(cfg.params), polar_radial_model(cfg.params, phase=float(cfg.knob("phase")))]
    n = int(round(cfg.T / cfg.dt))
    every = int(cfg.knob("save_every"))
    n -= n % every
    paths = [simulate_radial(m, m.reset_state, n, cfg.dt, cfg.seed, [0], save_every=every, channel=1 + i)
             for i, m in enumerate(models)]
    write_csv(out / "lif_paths.csv", ("t", "radial_ou", "polar_radial"),
              zip(paths[0].t, paths[0].r[0], paths[1].r[0]))
    res = {"models": [m.summary() for m in models],
           "sigma_eff_trace": sigma_eff_trace(cfg.params),
           "sigma_eff": sigma_eff(cfg.params),
           "path_means": [float(p.r[0].mean()) for p in paths],
           "stationary_mean": models[0].stationary_mean,
           "n_reflections": [p.n_reflections for p in paths]}
    write_json(out / "lif.json", res)
    return res


def _firing_table(cfg: RunConfig, params):
    grid = fi.probe_grid(params, cfg.trials, int(cfg.knob("n_points")))
    return fi.estimate_firing_prob(params, grid, cfg.seed, dt=cfg.dt,
                                   cap_periods=float(cfg.knob("cap_periods")))


FIRING_HEADER = ("sigma0", "i", "l_i", "p_hat", "se")


def cmd_firing_prob(cfg: RunConfig, out: Path, args) -> dict:
    table = _firing_table(cfg, cfg.params)
    write_csv(out / "firing_prob.csv", FIRING_HEADER, table.rows())
    return {"sigma0": table.sigma0, "n_trials": table.n_trials, "n_points": len(table.l),
            "n_capped": int(np.sum(table.n_capped))}


def read_firing_csv(path):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidArgumentError(f"cannot read firing table {path}: {exc}") from exc
    if data.shape[1] != len(FIRING_HEADER):
        raise InvalidArgumentError(f"{path}: expected columns {','.join(FIRING_HEADER)}")
    return data[:, 2], data[:, 3], float(data[0, 0])


def _fit(cfg: RunConfig, params, table=None):
    table = table if table is not None else _firing_table(cfg, params)
    return fi.transform_fit(fi.fit_sigmoid(table), normal_form(params)), table


def cmd_fit_sigmoid(cfg: RunConfig, out: Path, args) -> dict:
    if getattr(args, "input", None):
        l, p, s0 = read_firing_csv(args.input)
        params = cfg.params.with_noise(sigma0=s0)
        fit = fi.transform_fit(fi.fit_sigmoid((l, p, s0)), normal_form(params))
    else:
        fit, table = _fit(cfg, cfg.params)
        write_csv(out / "firing_prob.csv", FIRING_HEADER, table.rows())
    res = fit.to_json_dict()
    write_json(out / "fit.json", res)
    return res


def cmd_isi(cfg: RunConfig, out: Path, args) -> dict:
    fit, table = _fit(cfg, cfg.params)
    write_csv(out / "firing_prob.csv", FIRING_HEADER, table.rows())
    t_grid = fi.density_grid(float(cfg.knob("t_max")), int(cfg.knob("density_points")))
    M, n = int(cfg.knob("M")), int(cfg.knob("n"))
    dens = {}
    for m in (radial_ou_model(cfg.params), polar_radial_model(cfg.params, phase=float(cfg.knob("phase")))):
        d = fi.isi_density(m, fit, t_grid, M, n, cfg.seed, dt=cfg.dt)
        dens[m.kind] = d
        write_csv(out / f"isi_{m.kind}.csv", ("t", "g_t", "se"), zip(d.t, d.g, d.se))
    sample = fi.isi_histogram(cfg.params, int(cfg.knob("n_spikes")), cfg.seed, dt=cfg.dt)
    write_csv(out / "isi_samples.csv", ("isi",), ((x,) for x in sample.isis))
    result = fi.compare_isi(sample, dens)
    res = {"fit": fit.to_json_dict(), "ks": result.ks,
           "mass": {k: d.mass for k, d in dens.items()},
           "n_spikes": int(len(sample.isis)), "n_censored": sample.n_censored,
           "mean_isi": float(np.mean(sample.isis)) if len(sample.isis) else None,
           "M": M, "n": n}
    write_json(out / "isi.json", res)
    return res


def cmd_psd(cfg: RunConfig, out: Path, args) -> dict:
    n_seeds, T = int(cfg.knob("n_seeds")), float(cfg.knob("psd_T"))
    lin = compare_shifted_linearized(cfg.params, cfg.seed, n_seeds=n_seeds, T=T, dt=cfg.dt)
    rad = compare_radial(cfg.params, cfg.seed, n_seeds=n_seeds, T=T, dt=cfg.dt,
                         phase=float(cfg.knob("phase")))
    for comp, d in lin["components"].items():
        write_csv(out / f"psd_shifted_{comp}.csv", ("freq", "power"), zip(d["freqs"], d["shifted"]))
        write_csv(out / f"psd_linearized_{comp}.csv", ("freq", "power"), zip(d["freqs"], d["linearized"]))
    for name, p in rad["spectra"].items():
        write_csv(out / f"psd_{name}.csv", ("freq", "power"), p.to_rows())
    res = {
        "linearization": {"overlap": lin["overlap"], "n_segments": lin["n_segments"], "scale": lin["scale"],
                          "components": {k: v["overlap"] for k, v in lin["components"].items()}},
        "radial": {"overlap": rad["overlap"], "n_segments": rad["n_segments"], "scale": rad["scale"],
                   "pairs": rad["pairs"]},
    }
    write_json(out / "psd.json", res)
    return res


def cmd_verify(cfg: RunConfig, out: Path, args) -> dict:
    res = ac.verify_attractor(cfg.params, cfg.seed, quick=bool(args.quick),
                              n_paths=int(cfg.knob("pullback_paths")),
                              horizons=parse_floats(cfg.knob("horizons")))
    write_json(out / "attractor.json", res)
    return res


def cmd_table1(cfg: RunConfig, out: Path, args) -> dict:
    sigmas = [args.sigma0] if args.sigma0 is not None else parse_floats(cfg.knob("sigma0_list"))
    rows, all_rows = [], []
    for s in sigmas:
        fit, table = _fit(cfg, cfg.params.with_noise(sigma0=s))
        rows.append(fit.to_json_dict())
        all_rows.extend(table.rows())
    write_csv(out / "firing_prob.csv", FIRING_HEADER, all_rows)
    write_csv(out / "table1.csv", ("sigma0", "a", "b", "a_star", "b_star"),
              ((r["sigma0"], r["a"], r["b"], r["a_star"], r["b_star"]) for r in rows))
    res = {"rows": rows}
    if len(rows) >= 3:
        res["spearman_b"] = fi.spearman(sigmas, [r["b"] for r in rows])
    write_json(out / "table1.json", res)
    return res


HANDLERS = {
    "fixed-point": cmd_fixed_point, "simulate": cmd_simulate, "linearize": cmd_linearize,
    "lif": cmd_lif, "firing-prob": cmd_firing_prob, "fit-sigmoid": cmd_fit_sigmoid, "isi": cmd_isi,
    "psd": cmd_psd, "verify": cmd_verify, "table1": cmd_table1,
}


def output_dir(cfg: RunConfig, command: str) -> Path:
    return Path(cfg.output_dir) / f"{command}-{cfg.digest(command)}"


def run(command: str, cfg: RunConfig, args=None) -> tuple:
    """Execute one command; returns ``(output_dir, summary)``."""
    if command not in HANDLERS:
        raise InvalidArgumentError(f"unknown command {command!r}")
    if args is None:
        args = build_parser().parse_args([command])
    out = output_dir(cfg, command)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dump_config(cfg))
    write_json(out / "manifest.json", {"command": command, "seed": cfg.seed, "config": cfg.to_dict(),
                                       "versions": versions()})
    return out, HANDLERS[command](cfg, out, args)


def _error(exc: Exception) -> int:
    code = getattr(exc, "code", "internal")
    payload = {"error": code, "message": str(exc)}
    if isinstance(exc, BlowUpError):
        payload["step_index"] = exc.step_index
    print(json.dumps(payload), file=sys.stderr)
    return EXIT_CODES.get(code, 1)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        out, summary = run(args.command, cfg, args)
    except FhnLifError as exc:
        return _error(exc)
    print(dumps({"command": args.command, "output_dir": str(out), "result": summary}, indent=0)
          .replace("\n", ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
