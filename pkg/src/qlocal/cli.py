"""Command line driver for the four headline experiments plus the oracle suite.

Subcommands: sector-overlap | time-reversal-demo | evolve | master-eq |
oracle-check.  Outputs are plot-ready CSV series and JSON reports,
written atomically; identical config + seed produces byte-identical
files.  Exit codes: 0 success, 2 config error, 3 numerical-diagnostic
failure, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import master as master_mod
from .algebra import QuasiLocalOperator, commutator
from .config import ExperimentConfig, load_config, parse_config
from .dynamics import (
    HamiltonianSpec,
    Window,
    WindowEvolution,
    kinetic_density,
    momentum_density,
    number_density,
)
from .errors import (
    CapExceeded,
    ConfigError,
    LeakageError,
    NearSingularResolvent,
    PlateauNotFound,
    QlocalError,
)
from .reversal import (
    check_TLT_equals_L,
    reverse_background,
    reverse_operator,
    sector_of_reversal,
)
from .states import Background, LocalVector, cross_sector_overlap_partial

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIAGNOSTIC = 3
EXIT_CAP = 4


class OracleFailure(QlocalError):
    pass


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else _fmt(c) for c in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: Path, obj):
    _atomic_write(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


# -- commands -----------------------------------------------------------


def cmd_sector_overlap(cfg: ExperimentConfig) -> int:
    bg1 = cfg.background
    bg2 = cfg.background2 or reverse_background(bg1)
    rows = []
    for n in range(cfg.overlap_radius + 1):
        val = cross_sector_overlap_partial(bg1, bg2, n)
        rows.append((n, abs(val)))
    out = cfg.out_dir / "sector_overlap.csv"
    write_csv(out, ["n", "overlap_abs"], rows)
    print(f"wrote {out} ({len(rows)} radii)")
    return EXIT_OK


def _sign_of(op_fwd: QuasiLocalOperator, op_rev: QuasiLocalOperator, window) -> int:
    ref = op_fwd.embed_dense(window)
    rev = op_rev.embed_dense(window)
    scale = max(float(np.abs(ref).max()), 1e-30)
    if np.abs(rev - ref).max() <= 1e-12 * scale:
        return 1
    if np.abs(rev + ref).max() <= 1e-12 * scale:
        return -1
    return 0


def cmd_time_reversal_demo(cfg: ExperimentConfig) -> int:
    spec = cfg.hamiltonian
    verdict = sector_of_reversal(cfg.background)
    window = Window.chain(cfg.reversal_window)
    residual = check_TLT_equals_L(spec, window)

    probe = Window.chain(2 * spec.hopping_offset + 1, start=-spec.hopping_offset).sites
    center = (0, 0, 0)
    num = number_density(spec, center)
    kin = kinetic_density(spec, center)
    mom = momentum_density(spec, center, 0)
    signs = {
        "number": _sign_of(num, reverse_operator(num), probe),
        "kinetic": _sign_of(kin, reverse_operator(kin), probe),
        "momentum": _sign_of(mom, reverse_operator(mom), probe),
    }
    report = {
        "verdict": verdict.verdict,
        "q": verdict.q,
        "per_class_overlaps": list(verdict.per_class),
        "tlt_residual": residual,
        "sign_table": signs,
        "window_sites": cfg.reversal_window,
    }
    out = cfg.out_dir / "time_reversal.json"
    write_json(out, report)
    print(f"wrote {out} (verdict: {verdict.verdict}, q={verdict.q:.6f})")
    return EXIT_OK


def cmd_evolve(cfg: ExperimentConfig) -> int:
    spec = cfg.hamiltonian
    n_sites = int(cfg.evolve["window"])
    anchors = sorted(cfg.overrides) or [(0, 0, 0)]
    lo = min(a[0] for a in anchors)
    hi = max(a[0] for a in anchors)
    pad = max(0, n_sites - (hi - lo + 1))
    window = Window.box((lo - pad // 2 - pad % 2, 0, 0), (hi + pad // 2, 0, 0))
    if cfg.dim != 1:
        raise ConfigError("the evolve command currently drives 1-d experiments")
    for a in anchors:
        if not window.contains(a):
            raise ConfigError(f"override site {a} outside the evolution window")

    v0 = LocalVector.from_overrides(cfg.background, cfg.overrides)
    ev = WindowEvolution(spec, window)
    psi0 = ev.state_vector(v0)
    if np.linalg.norm(psi0) == 0:
        raise ConfigError("initial state has zero norm")

    sites = window.sites
    n_ops = [number_density(spec, s).embed_dense(sites) for s in sites]
    inner = window.interior(1).sites
    p_ops = {s: momentum_density(spec, s, 0).embed_dense(sites) for s in inner}
    H = ev.hamiltonian

    buffer = int(cfg.evolve["buffer"])
    tol = float(cfg.evolve["tol"])
    t_grid = np.arange(0.0, float(cfg.evolve["t_max"]) + 1e-12, float(cfg.evolve["dt"]))
    header = (
        ["t", "norm", "norm_drift", "energy", "energy_drift_rel", "leakage"]
        + [f"n_{s[0]}" for s in sites]
        + [f"p_{s[0]}" for s in inner]
    )
    rows = []
    norm0 = float(np.linalg.norm(psi0))
    e0 = float(np.real(np.vdot(psi0, H @ psi0)) / norm0**2)
    for t in t_grid:
        psi = ev.evolve_vec(psi0, float(t))
        nrm = float(np.linalg.norm(psi))
        energy = float(np.real(np.vdot(psi, H @ psi)) / nrm**2)
        leak = ev.boundary_state_leakage(psi, cfg.background, buffer)
        if leak > tol:
            raise LeakageError(
                f"t={t}: leakage {leak:.3e} above tol {tol:.1e}; enlarge window/buffer"
            )
        row = [
            float(t),
            nrm,
            nrm - norm0,
            energy,
            abs(energy - e0) / max(abs(e0), 1.0),
            leak,
        ]
        row += [float(np.real(np.vdot(psi, op @ psi)) / nrm**2) for op in n_ops]
        row += [float(np.real(np.vdot(psi, p_ops[s] @ psi)) / nrm**2) for s in inner]
        rows.append(row)
    out = cfg.out_dir / "evolution.csv"
    write_csv(out, header, rows)
    print(f"wrote {out} ({len(rows)} time points, {len(sites)} sites)")
    return EXIT_OK


def cmd_master_eq(cfg: ExperimentConfig) -> int:
    spec = cfg.hamiltonian
    m = cfg.master
    window = Window.chain(int(m["window"]))
    table = master_mod.compare_exact_vs_master(
        spec,
        window,
        couplings=m["couplings"],
        t_grid=m["t_grid"],
        eta=m["eta"],
        etas=m["etas"],
        basis_preset=m["basis"],
        max_spread=float(m["max_spread"]),
        cap=int(m["cap"]),
    )
    rows = [(r.coupling, r.t, r.gsq_t, r.error) for r in table.rows]
    out_csv = cfg.out_dir / "master_errors.csv"
    write_csv(out_csv, ["coupling", "t", "gsq_t", "error"], rows)

    g_ref = float(m["couplings"][0])
    sup = master_mod.build_superoperator(
        spec.with_coupling(g_ref), window, cap=int(m["cap"])
    )
    basis = master_mod.BASIS_PRESETS[m["basis"]](spec.with_coupling(g_ref), window)
    blocks = master_mod.project_split(sup, basis)
    if m["eta"] is not None:
        eta = float(m["eta"])
        plateau = None
    else:
        report = master_mod.weak_coupling_pole(
            blocks, m["etas"], max_spread=float(m["max_spread"])
        )
        eta = report.plateau_eta
        plateau = report.to_dict()
    gen = master_mod.dispersion_dissipation(blocks, eta)

    ratios = {str(t0): vals for t0, vals in table.ratios.items()}
    monotone = all(
        all(v < 1.0 for v in vals if not np.isnan(v)) for vals in ratios.values()
    )
    report_obj = {
        "reference_coupling": g_ref,
        "eta": eta,
        "generator": gen.to_dict(),
        "plateau": plateau if plateau is not None else table.plateau.get(g_ref),
        "van_hove_ratios": ratios,
        "monotone_weak_coupling": bool(monotone),
    }
    out_json = cfg.out_dir / "master_generator.json"
    write_json(out_json, report_obj)
    print(f"wrote {out_csv} and {out_json} (monotone: {monotone})")
    return EXIT_OK


def _random_quasilocal(rng, trunc, sites, max_support):
    support_size = int(rng.integers(1, max_support + 1))
    chosen = rng.choice(len(sites), size=support_size, replace=False)
    n_terms = int(rng.integers(1, 3))
    op = QuasiLocalOperator.zero(trunc)
    for _ in range(n_terms):
        coeff = complex(rng.standard_normal(), rng.standard_normal())
        site_ops = {}
        for idx in chosen:
            m = rng.standard_normal((trunc.dim, trunc.dim)) + 1j * rng.standard_normal(
                (trunc.dim, trunc.dim)
            )
            site_ops[sites[int(idx)]] = m
        op = op + QuasiLocalOperator.from_product(trunc, site_ops, coeff)
    return op


def cmd_oracle_check(cfg: ExperimentConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    trunc = cfg.trunc
    n_sites = int(cfg.oracle["sites"])
    checks = int(cfg.oracle["checks"])
    max_support = min(int(cfg.oracle["max_support"]), n_sites)
    window = Window.chain(n_sites).sites
    worst = {"add": 0.0, "multiply": 0.0, "adjoint": 0.0, "commutator": 0.0}
    for _ in range(checks):
        A = _random_quasilocal(rng, trunc, window, max_support)
        B = _random_quasilocal(rng, trunc, window, max_support)
        da, db = A.embed_dense(window), B.embed_dense(window)
        worst["add"] = max(worst["add"], float(np.abs((A + B).embed_dense(window) - (da + db)).max()))
        worst["multiply"] = max(
            worst["multiply"], float(np.abs((A * B).embed_dense(window) - da @ db).max())
        )
        worst["adjoint"] = max(
            worst["adjoint"], float(np.abs(A.adjoint().embed_dense(window) - da.conj().T).max())
        )
        worst["commutator"] = max(
            worst["commutator"],
            float(np.abs(commutator(A, B).embed_dense(window) - (da @ db - db @ da)).max()),
        )
    tol = 1e-12
    passed = {k: v <= tol for k, v in worst.items()}
    for k in sorted(worst):
        print(f"{'PASS' if passed[k] else 'FAIL'} {k}: max entrywise error {worst[k]:.3e}")
    out = cfg.out_dir / "oracle_check.json"
    write_json(
        out,
        {
            "checks": checks,
            "sites": n_sites,
            "n_max": trunc.n_max,
            "seed": cfg.seed,
            "tolerance": tol,
            "max_errors": worst,
            "passed": all(passed.values()),
        },
    )
    print(f"wrote {out}")
    if not all(passed.values()):
        raise OracleFailure(f"oracle equivalences failed: {worst}")
    return EXIT_OK


# -- argument plumbing ---------------------------------------------------

_COMMANDS = {
    "sector-overlap": cmd_sector_overlap,
    "time-reversal-demo": cmd_time_reversal_demo,
    "evolve": cmd_evolve,
    "master-eq": cmd_master_eq,
    "oracle-check": cmd_oracle_check,
}


def _apply_overrides(data: dict, args, command: str) -> dict:
    if args.nmax is not None:
        data.setdefault("lattice", {})["n_max"] = args.nmax
    if args.g is not None:
        data.setdefault("hamiltonian", {})["g"] = args.g
    if args.eta is not None:
        data.setdefault("master", {})["eta"] = args.eta
        data["master"].pop("etas", None)
    if args.window is not None:
        section = "master" if command == "master-eq" else "evolve"
        data.setdefault(section, {})["window"] = args.window
        if command == "time-reversal-demo":
            data.setdefault("reversal", {})["window"] = args.window
    if args.t_max is not None:
        data.setdefault("evolve", {})["t_max"] = args.t_max
    if args.dt is not None:
        data.setdefault("evolve", {})["dt"] = args.dt
    if args.out is not None:
        data.setdefault("output", {})["directory"] = args.out
    if args.seed is not None:
        data.setdefault("output", {})["seed"] = args.seed
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlocal",
        description="lattice sector dynamics and dissipative generator extraction",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML or JSON experiment file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--g", type=float, default=None, help="interaction coupling")
        p.add_argument("--eta", type=float, default=None, help="fixed pole broadening")
        p.add_argument("--window", type=int, default=None, help="window size (sites)")
        p.add_argument("--nmax", type=int, default=None, help="per-site occupation cap")
        p.add_argument("--t-max", dest="t_max", type=float, default=None)
        p.add_argument("--dt", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = load_config(args.config)
        data = _apply_overrides(data, args, args.command)
        cfg = parse_config(data)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceeded as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (LeakageError, PlateauNotFound, NearSingularResolvent, OracleFailure) as exc:
        print(f"numerical diagnostic failure: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTIC


if __name__ == "__main__":
    sys.exit(main())
