"""Command-line entry point: ``doublewell <command> --config run.toml --out results/``."""

import argparse
import os
import sys

import numpy as np

from . import kernels
from .bogoliubov import (
    coupling_vector,
    cutoff_ladder,
    empirical_lambda0,
    excited_blocks,
    quadratic_ground_energy,
    variance_coefficient_bound,
)
from .harness import (
    ConfigError,
    build_context,
    csv_text,
    parse_config,
    run_scan,
    trial_sigma_sq,
    write_rows,
)
from .meanfield import gap_report
from .oracle import (
    assemble_full_hamiltonian,
    excitation_decomposition,
    fock_dimension,
    oracle_ground_state,
)
from .twomode import (
    assemble_bose_hubbard,
    assemble_identity_form,
    assemble_two_mode_hamiltonian,
    fock_ground_state,
    gaussian_trial_state,
    model_from_basis,
)


def _each_L(cfg):
    return sorted(set(cfg.L))


def _out(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def cmd_hartree(cfg, args):
    rows = []
    for L in _each_L(cfg):
        hr = build_context(cfg, L, n_modes=4).hartree
        rows.append(dict(L=L, **{"lambda": cfg.lam}, mu_plus=hr.mu_plus,
                         e_hartree=hr.e_hartree, iterations=hr.iterations, residual=hr.residual))
    path = _out(args, "hartree.csv")
    write_rows(rows, ("L", "lambda", "mu_plus", "e_hartree", "iterations", "residual"), path)
    return path


def cmd_spectrum(cfg, args):
    rows = []
    for L in _each_L(cfg):
        ctx = build_context(cfg, L)
        b = ctx.basis
        for w in b.warnings:
            print(f"L={L}: {w}", file=sys.stderr)
        for i, (mu, parity) in enumerate(zip(b.eigenvalues, b.parities)):
            rows.append(dict(L=L, index=i + 1, parity=parity, mu=mu,
                             splitting=b.splittings[i // 2] if i % 2 == 0 else None))
    path = _out(args, "spectrum.csv")
    write_rows(rows, ("L", "index", "parity", "mu", "splitting"), path)
    return path


def cmd_twomode(cfg, args):
    rows = []
    for L in _each_L(cfg):
        ctx = build_context(cfg, L, n_modes=4)
        report = gap_report(ctx.basis, ctx.spec)
        for L_, N in cfg.points():
            if L_ != L:
                continue
            model = model_from_basis(ctx.basis, ctx.potential, ctx.kernel, N)
            H = assemble_two_mode_hamiltonian(model)
            ident = assemble_identity_form(model)
            gs = fock_ground_state(H)
            bh = fock_ground_state(assemble_bose_hubbard(N, model.gap, model.w[0, 0, 0, 0], cfg.lam))
            sig = trial_sigma_sq(cfg, N, model.gap, -np.log(report.T) / np.log(N))
            trial = gaussian_trial_state(N, model.gap, sigma_sq=sig)
            rows.append(dict(
                L=L, N=N, E_0=model.E_0, E_N_w=model.E_N_w, mu=model.mu, U=model.U,
                hop_constant=model.hop_constant, E_2mode=gs.energy, variance=gs.variance,
                variance_over_N=gs.variance / N, E_BH=bh.energy, variance_BH=bh.variance,
                sigma_sq_used=sig, E_trial=trial.energy(H),
                identity_deviation=float(np.abs(H.bands - ident.bands).max() / H.max_abs()),
            ))
    cols = ("L", "N", "E_0", "E_N_w", "mu", "U", "hop_constant", "E_2mode", "variance",
            "variance_over_N", "E_BH", "variance_BH", "sigma_sq_used", "E_trial",
            "identity_deviation")
    path = _out(args, "twomode.csv")
    write_rows(rows, cols, path)
    return path


def cmd_bogoliubov(cfg, args):
    rows, bounds = [], []
    ladder = cfg.bogoliubov.M
    for L in _each_L(cfg):
        ctx = build_context(cfg, L)
        b, k = ctx.basis, ctx.kernel
        results, _ = cutoff_ladder(b, k, cfg.lam, ladder)
        sym, _ = cutoff_ladder(b, k, cfg.lam, ladder, method="symplectic")
        for r, q in zip(results, sym):
            rows.append(dict(L=L, M=r.M, E_bog=r.e_bog, E_bog_right=r.e_bog_right,
                             E_bog_left=r.e_bog_left, E_bog_symplectic=q.e_bog))
        M = max(ladder)
        right = excited_blocks(b, k, cfg.lam, M, "right")
        left = excited_blocks(b, k, cfg.lam, M, "left")
        vr, vl = coupling_vector(b, k, M, "right"), coupling_vector(b, k, M, "left")
        U = model_from_basis(b, ctx.potential, k, 2).U
        est = empirical_lambda0(right, left, vr, vl, U, lam_max=max(cfg.lam, 1e-12))
        bounds.append(dict(L=L, M=M, U=U,
                           bound=variance_coefficient_bound(right, left, vr, vl, U, cfg.lam),
                           lambda0=est.lambda0, positive_up_to_lambda=int(est.positive_up_to_max)))
    path = _out(args, "bogoliubov.csv")
    write_rows(rows, ("L", "M", "E_bog", "E_bog_right", "E_bog_left", "E_bog_symplectic"), path)
    write_rows(bounds, ("L", "M", "U", "bound", "lambda0", "positive_up_to_lambda"),
               _out(args, "variance_bound.csv"))
    return path


def cmd_oracle(cfg, args):
    rng = np.random.default_rng(args.seed)
    modes = cfg.oracle.modes
    rows = []
    for L in _each_L(cfg):
        ctx = build_context(cfg, L)
        for L_, N in cfg.points():
            if L_ != L:
                continue
            if fock_dimension(modes, N) > cfg.oracle.max_dim:
                print(f"skip L={L} N={N}: oracle dimension above cap", file=sys.stderr)
                continue
            H, fb = assemble_full_hamiltonian(ctx.basis, ctx.potential, ctx.kernel, cfg.lam, N,
                                              modes, cfg.oracle.max_dim)
            res = oracle_ground_state(H, fb)
            model = model_from_basis(ctx.basis, ctx.potential, ctx.kernel, N)
            e2 = fock_ground_state(assemble_two_mode_hamiltonian(model)).energy
            M = (modes - 2) // 2
            e_bog = None
            if M >= 1:
                e_bog = sum(
                    quadratic_ground_energy(bl.A, bl.B)
                    for bl in (excited_blocks(ctx.basis, ctx.kernel, cfg.lam, M, side)
                               for side in ("right", "left"))
                )
            psi = rng.normal(size=fb.dim)
            psi /= np.linalg.norm(psi)
            dec = excitation_decomposition(psi, fb)
            rows.append(dict(
                L=L, N=N, M_modes=modes, dim=fb.dim, E_oracle=res.energy, E_2mode=e2,
                E_bog_same_modes=e_bog, n_perp=res.n_perp, n_perp_sq=res.n_perp_sq,
                variance=res.variance, mean_imbalance=res.mean_imbalance, n_minus=res.n_minus,
                isometry_defect=abs(dec.norm_sq() - 1.0),
            ))
    cols = ("L", "N", "M_modes", "dim", "E_oracle", "E_2mode", "E_bog_same_modes", "n_perp",
            "n_perp_sq", "variance", "mean_imbalance", "n_minus", "isometry_defect")
    path = _out(args, "oracle.csv")
    write_rows(rows, cols, path)
    return path


def cmd_scan(cfg, args):
    records = run_scan(cfg, out_dir=args.out, workers=args.workers)
    failed = sum(1 for r in records if r.values.get("error"))
    if failed:
        print(f"{failed} of {len(records)} points recorded errors", file=sys.stderr)
    if args.print:
        sys.stdout.write(csv_text(records))
    return os.path.join(args.out, cfg.output.csv)


COMMANDS = {
    "hartree": (cmd_hartree, "minimize the Hartree functional for each L"),
    "spectrum": (cmd_spectrum, "mean-field eigenvalues, parities and doublet splittings"),
    "twomode": (cmd_twomode, "two-mode constants, ground states and trial energies"),
    "bogoliubov": (cmd_bogoliubov, "Bogoliubov energies along the cutoff ladder"),
    "oracle": (cmd_oracle, "exact diagonalization on a truncated mode set"),
    "scan": (cmd_scan, "full (L, N) scan with CSV and optional SVG output"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="doublewell", description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s 0.1.0 (kernels: {kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (overrides the config)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized checks; never affects physics")
        if name == "scan":
            p.add_argument("--print", action="store_true", help="also echo the CSV")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    if not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    func = COMMANDS[args.command][0]
    path = func(cfg, args)
    print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
