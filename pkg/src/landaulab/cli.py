"""Command-line entry point: ``landaulab <subcommand> ...``.

Exit codes: 0 success, 2 precondition failure, 3 verdict false,
64 usage error, 66 unreadable input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .coefficients import (PotentialParams, certify_a_bounds, certify_bc_bounds, coefficients_from_values,
                           compute_coefficients, precompute_kernels, verify_divergence_identities)
from .estimates import (BarrierSpec, PreconditionError, bootstrap_exponents, certified_alpha0,
                        certify_gaussian_supersolution, holder_quotient, verify_decay_envelope,
                        verify_gaussian_propagation, verify_polynomial_barrier)
from .grid import KineticPoint, PhaseGrid, VelocityGrid, metric_dL, metric_dP
from .hydro import HydroBounds, check_admissible, hydro_state
from .initial import PRESETS, make_initial
from .snapshot import read_field, write_coefficients, write_field
from .solver import AdmissibilityError, CFLError, RunRecord, SolverConfig, run

EXIT_OK, EXIT_PRECONDITION, EXIT_VERDICT, EXIT_USAGE, EXIT_NOINPUT = 0, 2, 3, 64, 66


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _bool(s):
    if isinstance(s, bool):
        return s
    if s.lower() in ("1", "true", "yes"):
        return True
    if s.lower() in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _dt(s):
    return s if s == "auto" else float(s)


def _alpha(s):
    return s if s == "auto" else float(s)


# key, type, default, help
_GRID = [
    ("dim", int, 2, "velocity dimension d (2 or 3)"),
    ("L", float, 8.0, "velocity half-width"),
    ("N", int, 64, "points per velocity axis (even)"),
    ("gamma", float, -1.0, "interaction exponent in (-2, 0]"),
]
_BOUNDS = [
    ("m0", float, 0.5, "lower mass bound"),
    ("M0", float, 2.0, "upper mass bound"),
    ("E0", float, 10.0, "upper energy bound"),
    ("H0", float, 5.0, "upper entropy bound"),
]
_SOLVE = _GRID + _BOUNDS + [
    ("preset", str, "maxwellian", f"initial data: one of {list(PRESETS)} or a path to an .lfs file"),
    ("form", str, "divergence-flux", "divergence-flux or non-divergence"),
    ("dt", _dt, "auto", "time step or 'auto'"),
    ("cfl_safety", float, 0.5, "fraction of the explicit stability limit"),
    ("t_end", float, 1.0, "final time"),
    ("snapshot_stride", int, 10, "steps between snapshots"),
    ("freeze_coefficients", _bool, False, "keep the initial coefficients"),
    ("advection", str, "centered", "centered or upwind face values for b f"),
    ("positivity_limiter", _bool, True, "conservative flux limiter keeping f >= 0"),
]
SCHEMAS = {
    "coeffs": [("input", str, None, "input .lfs snapshot"), ("gamma", float, None, "interaction exponent")],
    "hydro": [("input", str, None, "input .lfs snapshot")] + _BOUNDS,
    "solve-hom": _SOLVE,
    "solve-inhom": _SOLVE + [
        ("Nx", int, 16, "points of the periodic x lattice"),
        ("X", float, 1.0, "x period"),
        ("density_modulation", float, 0.1, "epsilon in 1 + epsilon sin(2 pi x / X)"),
    ],
    "verify-bounds": [
        ("input", str, None, "input .lfs snapshot"),
        ("gamma", float, None, "interaction exponent"),
        ("alpha", float, None, "Gaussian exponent to certify (optional)"),
    ] + _BOUNDS,
    "decay-report": [
        ("run_dir", str, None, "directory written by solve-hom/solve-inhom"),
        ("envelope", str, "decay", "decay, gaussian or polynomial"),
        ("K0", float, None, "decay constant to test (optional)"),
        ("alpha", float, 0.05, "Gaussian exponent"),
        ("C0", float, None, "Gaussian initial constant (default: measured)"),
        ("p", float, 5.0, "polynomial tail exponent"),
    ],
    "bootstrap-exponents": [
        ("d", int, 3, "dimension"),
        ("gamma", float, -1.0, "interaction exponent"),
        ("C", float, 1.0, "constant in the fixed-point map"),
    ],
    "holder": [
        ("run_dir", str, None, "directory written by solve-hom/solve-inhom"),
        ("alpha", _alpha, None, "Gaussian weight exponent, 'auto' for the certified alpha0 of the first "
                                "snapshot; omit for polynomial-weight mode"),
        ("n_pairs", int, 12000, "number of sampled pairs"),
        ("t_min", float, None, "earliest snapshot time used"),
    ],
    "metric": [
        ("z1", str, None, "packed t,x...,v... (2d+1 numbers)"),
        ("z2", str, None, "packed t,x...,v..."),
        ("gamma", float, -1.0, "interaction exponent (d_L only)"),
    ],
}
_WRITES = {"coeffs", "hydro", "solve-hom", "solve-inhom", "verify-bounds", "decay-report", "holder"}


def _flag(key):
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="landaulab", description="Landau collision operator laboratory")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, keys in SCHEMAS.items():
        p = sub.add_parser(name)
        for key, typ, _default, help_ in keys:
            p.add_argument(_flag(key), dest=key, type=typ, default=None, help=help_)
        if name == "metric":
            g = p.add_mutually_exclusive_group()
            g.add_argument("--dP", action="store_true", help="closed-form kinetic distance")
            g.add_argument("--dL", action="store_true", help="transform-deformed distance")
        p.add_argument("--config", help="JSON file with default values for the keys above")
        p.add_argument("--out", help="output directory" + (" (required)" if name in _WRITES else ""))
        p.add_argument("--force", action="store_true", help="overwrite an existing manifest")
        p.add_argument("--threads", type=int, default=None, help="FFT worker threads (default: all cores)")
        p.add_argument("--seed", type=int, default=0, help="seed for sampling operations")
        p.add_argument("--print-config-schema", action="store_true", help="print the config keys and exit")
    return parser


def resolve_config(command: str, ns: argparse.Namespace) -> dict:
    cfg = {key: default for key, _t, default, _h in SCHEMAS[command]}
    if ns.config:
        try:
            loaded = json.loads(Path(ns.config).read_text())
        except OSError as exc:
            raise InputError(f"cannot read config {ns.config}: {exc}") from exc
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        types = {key: typ for key, typ, _d, _h in SCHEMAS[command]}
        for k, v in loaded.items():
            cfg[k] = v if v is None or isinstance(v, bool) else types[k](v)
    for key, *_ in SCHEMAS[command]:
        val = getattr(ns, key)
        if val is not None:
            cfg[key] = val
    return cfg


def schema(command: str) -> dict:
    return {key: {"type": getattr(t, "__name__", str(t)).lstrip("_"), "default": d, "help": h}
            for key, t, d, h in SCHEMAS[command]}


def _digest(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=repr).encode()).hexdigest()


class Outputs:
    def __init__(self, out: Path | None, force: bool):
        self.dir = out
        self.paths: list = []
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            if (out / "manifest.json").exists() and not force:
                raise FileExistsError(f"{out / 'manifest.json'} exists; pass --force to overwrite")

    def path(self, name: str) -> Path:
        p = self.dir / name
        self.paths.append(str(p))
        return p

    def manifest(self, command, cfg, inputs, seed):
        if self.dir is None:
            return
        doc = {"command": command, "config": cfg, "config_digest": _digest(cfg), "tool_version": __version__,
               "inputs": inputs, "outputs": self.paths, "seed": seed}
        (self.dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=repr) + "\n")


def _read(path):
    if path is None:
        raise UsageError("--input is required")
    try:
        return read_field(path)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def _gamma_gate(header, gamma):
    hg = header.get("gamma")
    if gamma is None:
        if hg is None:
            raise UsageError("--gamma is required (snapshot header carries none)")
        return float(hg)
    if hg is not None and not np.isclose(float(hg), gamma, rtol=0, atol=1e-12):
        raise PreconditionError(f"--gamma {gamma!r} contradicts snapshot header gamma {float(hg)!r}")
    return float(gamma)


def _bounds(cfg) -> HydroBounds:
    return HydroBounds(cfg["m0"], cfg["M0"], cfg["E0"], cfg["H0"])


def _load_run(run_dir) -> RunRecord:
    d = Path(run_dir)
    files = sorted(d.glob("snap_*.lfs"))
    if not files:
        raise InputError(f"no snapshots found in {run_dir}")
    snaps, gamma = [], None
    for f in files:
        fld, header = _read(f)
        snaps.append(fld)
        gamma = header.get("gamma")
    snaps.sort(key=lambda s: s.time)
    rec = RunRecord(SolverConfig(), PotentialParams.for_dim(snaps[0].vgrid.dim, float(gamma)))
    rec.snapshots = snaps
    return rec


def _verdict_code(holds) -> int:
    return EXIT_OK if holds else EXIT_VERDICT


# --------------------------------------------------------------------------


def cmd_coeffs(cfg, out: Outputs, threads, seed):
    f, header = _read(cfg["input"])
    gamma = _gamma_gate(header, cfg["gamma"])
    params = PotentialParams.for_dim(f.vgrid.dim, gamma)
    pack = precompute_kernels(f.vgrid, params, threads)
    co = compute_coefficients(f, pack, threads)
    out.paths.extend(str(p) for p in write_coefficients(out.dir / "coeffs", f.grid, co, gamma, f.time))
    certs = [verify_divergence_identities(co)] + certify_a_bounds(co, params) + certify_bc_bounds(co, f, params)
    rows = [[c.as_row()[k] for k in ("inequality_id", "constant", "worst_v", "holds")] for c in certs]
    _write_csv(out.path("certificates.csv"), ["inequality_id", "constant", "worst_v", "holds"], rows)
    return EXIT_OK, [cfg["input"]]


def cmd_hydro(cfg, out: Outputs, threads, seed):
    f, _ = _read(cfg["input"])
    st = hydro_state(f)
    rep = check_admissible(f, _bounds(cfg))
    bad = {k for k, _ in rep.failures}
    rows = [[_fmt(f.time), k, _fmt(st.mass[k]), _fmt(st.energy[k]), _fmt(st.entropy[k]), k not in bad]
            for k in range(st.mass.size)]
    _write_csv(out.path("hydro.csv"), ["t", "x_index", "mass", "energy", "entropy", "admissible"], rows)
    return EXIT_OK, [cfg["input"]]


def _solve(cfg, out: Outputs, threads, inhom: bool):
    vg = VelocityGrid(cfg["dim"], cfg["L"], cfg["N"])
    grid = PhaseGrid(vg, cfg["X"], cfg["Nx"]) if inhom else PhaseGrid(vg)
    inputs = []
    if cfg["preset"] in PRESETS:
        kw = {"density_modulation": cfg["density_modulation"]} if inhom else {}
        f0 = make_initial(grid, cfg["preset"], **kw)
    else:
        f0, header = _read(cfg["preset"])
        inputs.append(cfg["preset"])
        _gamma_gate(header, cfg["gamma"])
        if f0.grid != grid:
            raise PreconditionError("initial snapshot grid does not match the configured grid")
    params = PotentialParams.for_dim(cfg["dim"], cfg["gamma"])
    scfg = SolverConfig(form=cfg["form"], dt=cfg["dt"], cfl_safety=cfg["cfl_safety"], t_end=cfg["t_end"],
                        snapshot_stride=cfg["snapshot_stride"], freeze_coefficients=cfg["freeze_coefficients"],
                        advection=cfg["advection"], positivity_limiter=cfg["positivity_limiter"])
    rec = run(f0, _bounds(cfg), scfg, params, workers=threads)
    for k, s in enumerate(rec.snapshots):
        write_field(out.path(f"snap_{k:05d}.lfs"), s, cfg["gamma"])
    keys = ["t", "mass", "energy", "entropy", "min_f", "max_f", "clamps", "limited"]
    ints = {"clamps", "limited"}
    _write_csv(out.path("trace.csv"), keys, [[r[k] if k in ints else _fmt(r[k]) for k in keys] for r in rec.trace])
    return EXIT_OK, inputs


def cmd_verify_bounds(cfg, out: Outputs, threads, seed):
    f, header = _read(cfg["input"])
    gamma = _gamma_gate(header, cfg["gamma"])
    rep = check_admissible(f, _bounds(cfg))
    if not rep.admissible:
        raise PreconditionError(f"snapshot not admissible: {rep.failures}")
    params = PotentialParams.for_dim(f.vgrid.dim, gamma)
    pack = precompute_kernels(f.vgrid, params, threads)
    co = compute_coefficients(f, pack, threads)
    certs = [verify_divergence_identities(co)] + certify_a_bounds(co, params) + certify_bc_bounds(co, f, params)
    docs = []
    for c in certs:
        wp = None if c.worst_point is None else [float(x) for x in np.ravel(c.worst_point)]
        docs.append({"inequality_id": c.inequality_id, "holds": bool(c.holds), "constant": float(c.constant),
                     "worst_point": wp, "parameters": {"gamma": gamma, **{k: float(v) for k, v in c.details.items()
                                                                          if np.isscalar(v)}}})
    if cfg["alpha"] is not None:
        g = certify_gaussian_supersolution(co, cfg["alpha"], gamma)
        docs.append({"inequality_id": "gaussian_supersolution", "holds": bool(g.success), "constant": g.margin,
                     "worst_point": None,
                     "parameters": {"alpha": cfg["alpha"], "R0": g.R0, "alpha0": certified_alpha0(co, gamma)}})
    rows = [[d["inequality_id"], _fmt(d["constant"]), "" if d["worst_point"] is None else
             ";".join(_fmt(x) for x in d["worst_point"]), d["holds"]] for d in docs]
    _write_csv(out.path("certificates.csv"), ["inequality_id", "constant", "worst_v", "holds"], rows)
    out.path("verdicts.json").write_text(json.dumps(docs, indent=2) + "\n")
    return _verdict_code(all(d["holds"] for d in docs)), [cfg["input"]]


def cmd_decay_report(cfg, out: Outputs, threads, seed):
    if cfg["run_dir"] is None:
        raise UsageError("--run-dir is required")
    rec = _load_run(cfg["run_dir"])
    kind = cfg["envelope"]
    if kind == "decay":
        v = verify_decay_envelope(rec, cfg["K0"])
        doc = v.as_json("decay_envelope", {"K0": cfg["K0"]})
    elif kind == "gaussian":
        vg = rec.snapshots[0].vgrid
        pack = precompute_kernels(vg, rec.params, threads)
        a0 = certified_alpha0(coefficients_from_values(rec.snapshots[0].values, pack), rec.params.gamma)
        C0 = cfg["C0"]
        if C0 is None:
            C0 = float(np.max(rec.snapshots[0].values / np.exp(-cfg["alpha"] * vg.speed**2)))
        v = verify_gaussian_propagation(rec, C0, cfg["alpha"], a0, pack)
        doc = v.as_json("gaussian_propagation", {"alpha": cfg["alpha"], "alpha0": a0, "C0": C0,
                                                 "growth_C": v.details["growth_C"], "t0": v.details["t0"]})
    elif kind == "polynomial":
        v = verify_polynomial_barrier(rec, BarrierSpec("polynomial-lower", cfg["p"]))
        doc = v.as_json("polynomial_lower_bound", {"p": cfg["p"], "beta": v.details["beta"]})
    else:
        raise UsageError(f"unknown envelope {kind!r}")
    out.path("verdict.json").write_text(json.dumps(doc, indent=2) + "\n")
    return _verdict_code(v.holds), [cfg["run_dir"]]


def cmd_bootstrap(cfg, out: Outputs, threads, seed):
    rep = bootstrap_exponents(cfg["d"], cfg["gamma"], cfg["C"])
    print("alpha_sequence: " + ", ".join(f"{a:.12g}" for a in rep.alpha_sequence))
    print(f"steps={rep.steps}")
    print(f"min_gain={rep.min_gain!r}")
    print(f"K_star={rep.K_star!r}")
    if out.dir is not None:
        doc = {"gamma": rep.gamma, "d": rep.d, "alpha_sequence": rep.alpha_sequence, "P_values": rep.P_values,
               "steps": rep.steps, "K_star": rep.K_star, "C_used": rep.C_used, "gains": rep.gains}
        out.path("exponents.json").write_text(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK, []


def cmd_holder(cfg, out: Outputs, threads, seed):
    if cfg["run_dir"] is None:
        raise UsageError("--run-dir is required")
    rec = _load_run(cfg["run_dir"])
    alpha = cfg["alpha"]
    if alpha == "auto":
        pack = precompute_kernels(rec.snapshots[0].vgrid, rec.params, threads)
        alpha = certified_alpha0(coefficients_from_values(rec.snapshots[0].values, pack), rec.params.gamma)
    res = holder_quotient(rec, alpha, n_pairs=cfg["n_pairs"], seed=seed, t_min=cfg["t_min"])
    z1, z2 = res.worst_pair
    doc = {"inequality_id": "holder_quotient", "holds": bool(np.isfinite(res.constant)), "constant": res.constant,
           "worst_point": [{"t": z.t, "x": z.x.tolist(), "v": z.v.tolist()} for z in (z1, z2)],
           "parameters": {"beta_fit": res.beta_fit, "mode": res.mode, "strata": res.strata, "seed": seed,
                          "alpha": alpha}}
    out.path("verdict.json").write_text(json.dumps(doc, indent=2) + "\n")
    _write_csv(out.path("beta_sweep.csv"), ["beta", "p99_over_median"],
               [[_fmt(b), _fmt(r)] for b, r in res.p99_over_median.items()])
    return _verdict_code(doc["holds"]), [cfg["run_dir"]]


def _point(packed: str) -> KineticPoint:
    vals = [float(x) for x in packed.split(",")]
    if len(vals) % 2 == 0 or len(vals) < 5:
        raise UsageError(f"expected 2d+1 comma-separated numbers, got {len(vals)}")
    d = (len(vals) - 1) // 2
    return KineticPoint(vals[0], np.array(vals[1:1 + d]), np.array(vals[1 + d:]))


def cmd_metric(cfg, out: Outputs, threads, seed, use_dl=False):
    if cfg["z1"] is None or cfg["z2"] is None:
        raise UsageError("--z1 and --z2 are required")
    z1, z2 = _point(cfg["z1"]), _point(cfg["z2"])
    if z1.v.size != z2.v.size:
        raise UsageError("z1 and z2 have different dimensions")
    val = metric_dL(z1, z2, cfg["gamma"]) if use_dl else metric_dP(z1, z2)
    print(repr(val))
    return EXIT_OK, []


COMMANDS = {
    "coeffs": cmd_coeffs,
    "hydro": cmd_hydro,
    "solve-hom": lambda c, o, t, s: _solve(c, o, t, False),
    "solve-inhom": lambda c, o, t, s: _solve(c, o, t, True),
    "verify-bounds": cmd_verify_bounds,
    "decay-report": cmd_decay_report,
    "bootstrap-exponents": cmd_bootstrap,
    "holder": cmd_holder,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if ns.print_config_schema:
        print(json.dumps(schema(ns.command), indent=2, default=repr))
        return EXIT_OK
    threads = ns.threads if ns.threads is not None else (os.cpu_count() or 1)
    try:
        cfg = resolve_config(ns.command, ns)
        if ns.command in _WRITES and not ns.out:
            raise UsageError("--out is required")
        out = Outputs(Path(ns.out) if ns.out else None, ns.force)
        if ns.command == "metric":
            code, inputs = cmd_metric(cfg, out, threads, ns.seed, use_dl=ns.dL)
        else:
            code, inputs = COMMANDS[ns.command](cfg, out, threads, ns.seed)
        out.manifest(ns.command, cfg, inputs, ns.seed)
        return code
    except UsageError as exc:
        print(f"landaulab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"landaulab: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except (PreconditionError, AdmissibilityError, CFLError, FileExistsError, ValueError) as exc:
        print(f"landaulab: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
