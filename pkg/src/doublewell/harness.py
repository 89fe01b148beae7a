"""Scan configuration, orchestration and output (CSV, optional SVG).

A config is a TOML file::

    s = 2.0
    lambda = 0.1
    L = [4, 6, 8, 10]
    N = [200]
    pairing = "grid"        # every (L, N) combination; "zip" pairs them in order
    workers = 1

    [kernel]       amplitude, range, family
    [grid]         n, x_max (omit for the default domain rule)
    [bogoliubov]   M = [8, 16, 32]
    [trial]        sigma_rule, sigma_fixed, sigma_constant
    [tolerances]   hartree, max_iter
    [oracle]       enabled, modes, max_dim
    [output]       csv, timings, svg

Hartree and mean-field work depends only on ``L``, so each ``L`` is one task;
all ``N`` values for that ``L`` reuse its basis.
"""

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .bogoliubov import cutoff_ladder
from .discretization import (
    KernelSpec,
    PotentialSpec,
    build_grid,
    default_x_max,
    double_well_potential,
    interaction_kernel,
)
from .meanfield import gap_report, mean_field_spectrum, minimize_hartree
from .oracle import assemble_full_hamiltonian, fock_dimension, oracle_ground_state
from .twomode import (
    SIGMA_RULES,
    assemble_two_mode_hamiltonian,
    sigma_squared,
    fock_ground_state,
    gaussian_trial_state,
    model_from_basis,
)

CSV_VERSION = 1
CSV_COLUMNS = (
    "N", "L", "s", "lambda", "T", "delta", "gap", "gap_over_T", "mu_plus", "mu_minus",
    "excited_gap", "E_2mode", "E_ref", "E_bog", "M_bog", "E_bog_increment", "variance",
    "variance_over_N", "sigma_sq_used", "E_trial", "E_oracle", "oracle_n_perp",
    "oracle_n_perp_sq", "oracle_variance", "error", "csv_version",
)


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GridConfig:
    n: int = 2049
    x_max: float = None


@dataclass(frozen=True)
class BogoliubovConfig:
    M: tuple = (8, 16, 32)


@dataclass(frozen=True)
class TrialConfig:
    sigma_rule: str = "sqrt_gap_N"
    sigma_fixed: float = None
    sigma_constant: float = 1.0  # fallback of the delta_above_2 rule


@dataclass(frozen=True)
class Tolerances:
    hartree: float = 1e-10
    max_iter: int = 50_000


@dataclass(frozen=True)
class OracleConfig:
    enabled: bool = False
    modes: int = 4
    max_dim: int = 20_000


@dataclass(frozen=True)
class OutputConfig:
    csv: str = "scan.csv"
    timings: str = "timings.csv"
    svg: str = None


@dataclass(frozen=True)
class ExperimentConfig:
    potential: PotentialSpec
    kernel: KernelSpec
    lam: float
    L: tuple
    N: tuple
    pairing: str = "grid"
    workers: int = 1
    grid: GridConfig = GridConfig()
    bogoliubov: BogoliubovConfig = BogoliubovConfig()
    trial: TrialConfig = TrialConfig()
    tolerances: Tolerances = Tolerances()
    oracle: OracleConfig = OracleConfig()
    output: OutputConfig = OutputConfig()

    def points(self):
        """``(L, N)`` pairs in scan order."""
        if self.pairing == "zip":
            pts = list(zip(self.L, self.N))
        else:
            pts = [(L, N) for L in self.L for N in self.N]
        return sorted(pts)


_SECTIONS = {
    "kernel": KernelSpec,
    "grid": GridConfig,
    "bogoliubov": BogoliubovConfig,
    "trial": TrialConfig,
    "tolerances": Tolerances,
    "oracle": OracleConfig,
    "output": OutputConfig,
}
_TOP = ("s", "lambda", "L", "N", "pairing", "workers")


def _check_keys(table, allowed, where):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}; allowed: {sorted(allowed)}")


def _number_list(value, name, kind):
    if not isinstance(value, (list, tuple)):
        value = [value]
    try:
        out = tuple(kind(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of numbers") from exc
    return out


def _section(cls, table, where):
    names = {f.name for f in fields(cls)}
    _check_keys(table, names, f"[{where}]")
    return cls(**table)


def config_from_dict(raw):
    raw = dict(raw)
    _check_keys(raw, set(_TOP) | set(_SECTIONS), "top level")
    for key in ("s", "lambda", "L", "N"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    s = float(raw["s"])
    if not s >= 2:
        raise ConfigError(f"s must be ≥ 2 (got {s})")
    lam = float(raw["lambda"])
    if not lam >= 0:
        raise ConfigError(f"lambda out of range [0, inf): {lam}")
    Ls = _number_list(raw["L"], "L", float)
    Ns = _number_list(raw["N"], "N", int)
    if not Ls or not Ns:
        raise ConfigError("empty scan: L and N lists must be non-empty")
    if any(L < 0 for L in Ls):
        raise ConfigError("L values out of range [0, inf)")
    if any(N < 2 for N in Ns):
        raise ConfigError("N values out of range [2, inf)")
    pairing = raw.get("pairing", "grid")
    if pairing not in ("grid", "zip"):
        raise ConfigError(f"pairing must be 'grid' or 'zip', got {pairing!r}")
    if pairing == "zip" and len(Ls) != len(Ns):
        raise ConfigError("pairing 'zip' needs L and N lists of equal length")
    workers = int(raw.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers out of range [1, inf)")

    sec = {}
    for name, cls in _SECTIONS.items():
        table = raw.get(name, {})
        if not isinstance(table, dict):
            raise ConfigError(f"[{name}] must be a table")
        try:
            sec[name] = _section(cls, table, name)
        except ValueError as exc:  # KernelSpec validation
            raise ConfigError(str(exc)) from exc

    grid = sec["grid"]
    if int(grid.n) < 3:
        raise ConfigError("grid.n out of range [3, inf)")
    grid = GridConfig(int(grid.n), None if grid.x_max is None else float(grid.x_max))
    if grid.x_max is not None and grid.x_max <= 0:
        raise ConfigError("grid.x_max out of range (0, inf)")

    M = _number_list(sec["bogoliubov"].M, "bogoliubov.M", int)
    if not M or min(M) < 1:
        raise ConfigError("bogoliubov.M must be a non-empty list of integers >= 1")
    bog = BogoliubovConfig(tuple(sorted(set(M))))

    trial = sec["trial"]
    if trial.sigma_rule not in SIGMA_RULES:
        raise ConfigError(f"trial.sigma_rule must be one of {SIGMA_RULES}")
    if trial.sigma_rule == "fixed" and trial.sigma_fixed is None:
        raise ConfigError("trial.sigma_fixed is required with sigma_rule = 'fixed'")
    if trial.sigma_fixed is not None and trial.sigma_fixed < 1:
        raise ConfigError("trial.sigma_fixed out of range [1, inf)")
    trial = TrialConfig(
        trial.sigma_rule,
        None if trial.sigma_fixed is None else float(trial.sigma_fixed),
        float(trial.sigma_constant),
    )

    tol = sec["tolerances"]
    if not tol.hartree > 0 or int(tol.max_iter) < 1:
        raise ConfigError("tolerances out of range: hartree > 0, max_iter >= 1")
    tol = Tolerances(float(tol.hartree), int(tol.max_iter))

    orc = sec["oracle"]
    if int(orc.modes) < 2 or int(orc.max_dim) < 1:
        raise ConfigError("oracle.modes out of range [2, inf)")
    orc = OracleConfig(bool(orc.enabled), int(orc.modes), int(orc.max_dim))

    return ExperimentConfig(
        potential=PotentialSpec(s=s, L=0.0),
        kernel=sec["kernel"],
        lam=lam,
        L=Ls,
        N=Ns,
        pairing=pairing,
        workers=workers,
        grid=grid,
        bogoliubov=bog,
        trial=trial,
        tolerances=tol,
        oracle=orc,
        output=sec["output"],
    )


def parse_config(path):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(cfg):
    def clean(obj):
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in asdict(obj).items() if v is not None}

    out = {
        "s": cfg.potential.s,
        "lambda": cfg.lam,
        "L": list(cfg.L),
        "N": list(cfg.N),
        "pairing": cfg.pairing,
        "workers": cfg.workers,
    }
    for name in _SECTIONS:
        out[name] = clean(getattr(cfg, name))
    return out


def serialize_config(cfg):
    return tomli_w.dumps(config_to_dict(cfg))


# --------------------------------------------------------------------------
# scan


@dataclass(frozen=True)
class ScanRecord:
    values: dict = field(repr=False)
    runtime_ms: float = 0.0

    def __getitem__(self, key):
        return self.values[key]

    @property
    def key(self):
        return (self.values["L"], self.values["N"])


def _grid_for(cfg, L):
    x_max = cfg.grid.x_max if cfg.grid.x_max is not None else default_x_max(L, cfg.kernel.range)
    return build_grid(-x_max, x_max, cfg.grid.n)


def trial_sigma_sq(cfg, N, gap, delta):
    t = cfg.trial
    fixed = t.sigma_fixed if t.sigma_rule == "fixed" else t.sigma_constant
    return sigma_squared(N, gap, t.sigma_rule, delta=delta, fixed=fixed)


@dataclass(frozen=True)
class MeanFieldContext:
    spec: PotentialSpec
    grid: object = field(repr=False)
    potential: np.ndarray = field(repr=False)
    kernel: object = field(repr=False)
    hartree: object = field(repr=False)
    basis: object = field(repr=False)


def build_context(cfg, L, n_modes=None):
    """Grid, potential, kernel, Hartree minimizer and mode basis for one ``L``."""
    spec = PotentialSpec(cfg.potential.s, L)
    grid = _grid_for(cfg, L)
    V = double_well_potential(grid, spec)
    kernel = interaction_kernel(grid, cfg.kernel)
    hartree = minimize_hartree(
        grid, V, kernel, cfg.lam, tol=cfg.tolerances.hartree,
        max_iter=cfg.tolerances.max_iter, L=L,
    )
    if n_modes is None:
        n_modes = max(2 * max(cfg.bogoliubov.M) + 2, 2 * ((cfg.oracle.modes + 1) // 2), 4)
    basis = mean_field_spectrum(grid, V, kernel, hartree, n_modes)
    return MeanFieldContext(spec, grid, V, kernel, hartree, basis)


def _run_L(cfg, L, Ns):
    """All records for one well separation."""
    t0 = time.perf_counter()
    base = {"L": L, "s": cfg.potential.s, "lambda": cfg.lam, "csv_version": CSV_VERSION}
    records = []
    try:
        ctx = build_context(cfg, L)
        spec, V, kernel, basis = ctx.spec, ctx.potential, ctx.kernel, ctx.basis
        report = gap_report(basis, spec)
        ladder, increment = cutoff_ladder(basis, kernel, cfg.lam, cfg.bogoliubov.M)
        bog = ladder[-1]
        shared = {
            "T": report.T,
            "gap": report.gap,
            "gap_over_T": report.gap_over_T,
            "mu_plus": basis.mu_plus,
            "mu_minus": basis.mu_minus,
            "excited_gap": report.excited_gap,
            "E_bog": bog.e_bog,
            "M_bog": bog.M,
            "E_bog_increment": increment,
        }
    except Exception as exc:  # recorded per point, scan continues
        elapsed = (time.perf_counter() - t0) * 1e3
        return [
            ScanRecord({**base, "N": N, "error": f"{type(exc).__name__}: {exc}"}, elapsed)
            for N in Ns
        ]
    setup_ms = (time.perf_counter() - t0) * 1e3

    for N in Ns:
        t1 = time.perf_counter()
        row = {**base, **shared, "N": N}
        try:
            model = model_from_basis(basis, V, kernel, N)
            H = assemble_two_mode_hamiltonian(model)
            gs = fock_ground_state(H)
            delta = -math.log(report.T) / math.log(N)
            sigma_sq = trial_sigma_sq(cfg, N, report.gap, delta)
            trial = gaussian_trial_state(N, report.gap, sigma_sq=sigma_sq)
            row.update(
                delta=delta,
                E_2mode=gs.energy,
                E_ref=model.E_0 + model.E_N_w - N * report.gap / 2,
                variance=gs.variance,
                variance_over_N=gs.variance / N,
                sigma_sq_used=sigma_sq,
                E_trial=trial.energy(H),
            )
            if cfg.oracle.enabled:
                if fock_dimension(cfg.oracle.modes, N) <= cfg.oracle.max_dim:
                    Hf, fb = assemble_full_hamiltonian(
                        basis, V, kernel, cfg.lam, N, cfg.oracle.modes, cfg.oracle.max_dim
                    )
                    orc = oracle_ground_state(Hf, fb)
                    row.update(
                        E_oracle=orc.energy,
                        oracle_n_perp=orc.n_perp,
                        oracle_n_perp_sq=orc.n_perp_sq,
                        oracle_variance=orc.variance,
                    )
            bad = [k for k, v in row.items() if isinstance(v, float) and not math.isfinite(v)]
            if bad:
                raise FloatingPointError(f"non-finite fields {bad}")
            if not (report.gap > 0 and bog.e_bog <= 0 and gs.variance >= 0):
                raise ArithmeticError("record violates gap > 0, E_bog <= 0 or variance >= 0")
        except Exception as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        elapsed = (time.perf_counter() - t1) * 1e3 + setup_ms / len(Ns)
        records.append(ScanRecord(row, elapsed))
    return records


def _run_task(args):
    cfg, L, Ns = args
    return _run_L(cfg, L, Ns)


def run_scan(cfg, out_dir=None, workers=None):
    """Run every (L, N) point; write CSV/timings/SVG into ``out_dir`` if given."""
    points = cfg.points()
    if not points:
        raise ConfigError("empty scan")
    by_L = {}
    for L, N in points:
        by_L.setdefault(L, []).append(N)
    tasks = [(cfg, L, tuple(Ns)) for L, Ns in sorted(by_L.items())]
    workers = cfg.workers if workers is None else int(workers)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    records = sorted((r for chunk in chunks for r in chunk), key=lambda r: r.key)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_csv(records, os.path.join(out_dir, cfg.output.csv))
        write_timings(records, os.path.join(out_dir, cfg.output.timings))
        if cfg.output.svg:
            write_svg(records, os.path.join(out_dir, cfg.output.svg))
    return records


# --------------------------------------------------------------------------
# output


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(records, columns=CSV_COLUMNS):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in records:
        writer.writerow([_fmt(r.values.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(records, path, columns=CSV_COLUMNS):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(records, columns))


def write_rows(rows, columns, path):
    """Generic table writer used by the single-stage subcommands."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_timings(records, path):
    rows = [{"L": r["L"], "N": r["N"], "runtime_ms": r.runtime_ms} for r in records]
    write_rows(rows, ("L", "N", "runtime_ms"), path)


def write_svg(records, path, width=640, height=440):
    """Log-log polylines of variance/N against T, one line per N."""
    pts = [
        (r["N"], r.values.get("T"), r.values.get("variance_over_N"))
        for r in records
        if not r.values.get("error")
    ]
    pts = [(N, T, v) for N, T, v in pts if T and v and T > 0 and v > 0]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg_text(pts, width, height))


def svg_text(points, width=640, height=440):
    pad = 60
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
    )
    if not points:
        return head + '<text x="20" y="30">no data</text>\n</svg>\n'
    lx = np.log10([p[1] for p in points])
    ly = np.log10([p[2] for p in points])
    x0, x1 = math.floor(lx.min()), math.ceil(lx.max())
    y0, y1 = math.floor(ly.min()), math.ceil(ly.max())
    x1 = max(x1, x0 + 1)
    y1 = max(y1, y0 + 1)

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [head]
    parts.append(
        f'<polyline points="{pad},{pad} {pad},{height - pad} {width - pad},{height - pad}" '
        'fill="none" stroke="black"/>\n'
    )
    for e in range(x0, x1 + 1):
        parts.append(f'<text x="{sx(e):.1f}" y="{height - pad + 18}" font-size="11" '
                     f'text-anchor="middle">1e{e}</text>\n')
    for e in range(y0, y1 + 1):
        parts.append(f'<text x="{pad - 6}" y="{sy(e) + 4:.1f}" font-size="11" '
                     f'text-anchor="end">1e{e}</text>\n')
    parts.append(f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle">T</text>\n')
    parts.append(f'<text x="15" y="{height / 2}" transform="rotate(-90 15 {height / 2})" '
                 'text-anchor="middle">variance / N</text>\n')
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    for i, N in enumerate(sorted({p[0] for p in points})):
        line = sorted((math.log10(T), math.log10(v)) for n, T, v in points if n == N)
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in line)
        color = colors[i % len(colors)]
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>\n')
        parts.append(f'<text x="{width - pad + 4}" y="{pad + 14 * i}" font-size="11" '
                     f'fill="{color}">N={N}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)
