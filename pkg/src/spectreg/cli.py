"""Config-driven command line: reproducible experiments and reports.

Every command reads one YAML config, writes CSV tables (plus optional SVG)
into the output directory, and stamps each file with the config hash and
seed.  Outputs are byte-identical for identical config+seed regardless of
--jobs; floats are therefore serialized with repr (shortest round trip).

Exit codes: 2 invalid config, 3 bad data, 4 violated model hypothesis.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import AssumptionError, ConfigError, DataError, SpectregError
from .estimator import fit_mercer
from .filters import measure_qualification, tikhonov, verify_constants
from .lowerbound import fano_report
from .mercer import error_norm, sample
from .rates import ModelParams, envelope, lambda_rule, run_rate_experiment
from .spectrum import (check_doubling, check_effdim_bound, check_sandwich,
                       check_scaling, count_F_vec, effdim_bound_factor,
                       effective_dimension, gee_vec, verify_decay)

__all__ = ["main"]


# ------------------------------------------------------------------
# output plumbing
# ------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _header(cfg: ExperimentConfig) -> str:
    return f"# config_sha256={cfg.sha256} seed={cfg.seed}"


def _write_csv(out_dir: Path, name: str, cfg: ExperimentConfig, cols, rows) -> Path:
    lines = [_header(cfg), ",".join(cols)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path = out_dir / name
    path.write_bytes(("\n".join(lines) + "\n").encode())
    return path


def _write_text(out_dir: Path, name: str, cfg: ExperimentConfig, lines) -> Path:
    path = out_dir / name
    path.write_bytes(("\n".join([_header(cfg), *lines]) + "\n").encode())
    return path


def _svg_loglog(path: Path, cfg: ExperimentConfig, series, xlabel: str, ylabel: str):
    """Minimal log-log polyline plot; series = [(label, xs, ys), ...]."""
    W, H, pad = 640, 440, 56
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys) if y > 0]
    lx = [np.log10(x) for x, _ in pts]
    ly = [np.log10(y) for _, y in pts]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    sx = lambda v: pad + (np.log10(v) - x0) / max(x1 - x0, 1e-12) * (W - 2 * pad)
    sy = lambda v: H - pad - (np.log10(v) - y0) / max(y1 - y0, 1e-12) * (H - 2 * pad)
    colors = ("#1f6fb2", "#c44e52", "#55a868", "#8172b2")
    body = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
            f'<!-- {_header(cfg)[2:]} -->',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
            f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
            f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle" font-size="13">{xlabel} (log)</text>',
            f'<text x="16" y="{H // 2}" font-size="13" transform="rotate(-90 16 {H // 2})" '
            f'text-anchor="middle">{ylabel} (log)</text>']
    for k, (label, xs, ys) in enumerate(series):
        keep = [(x, y) for x, y in zip(xs, ys) if y > 0]
        if not keep:
            continue
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in keep)
        color = colors[k % len(colors)]
        body.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        body.append(f'<text x="{W - pad - 4}" y="{pad + 16 * (k + 1)}" text-anchor="end" '
                    f'font-size="12" fill="{color}">{label}</text>')
    body.append("</svg>")
    path.write_bytes(("\n".join(body) + "\n").encode())
    return path


def _gate(profile, side: str, command: str):
    """Refuse to run when the dyadic decay half backing the command fails."""
    rep = verify_decay(profile)
    if side == "upper" and not rep.eigup_ok:
        raise AssumptionError(
            f"{command} requires the upper dyadic decay bound "
            f"mu_2j/mu_j <= 2^-nu_upper, violated at j={list(rep.eigup_violations)[:6]}; {rep}")
    if side == "lower" and not rep.eiglow_ok:
        raise AssumptionError(
            f"{command} requires the lower dyadic decay bound "
            f"mu_2j/mu_j >= 2^-nu_lower, violated at j={list(rep.eiglow_violations)[:6]}; {rep}")


# ------------------------------------------------------------------
# commands
# ------------------------------------------------------------------

def cmd_spectrum_report(cfg: ExperimentConfig, args) -> int:
    profile = cfg.require("profile")
    out = Path(cfg.out)
    r = cfg.problem.source.r if cfg.problem is not None else 0.5
    ts = np.unique(profile.eigenvalues)[::-1]          # breakpoints, descending
    F = count_F_vec(profile, ts)
    G = gee_vec(profile, ts, r)
    _write_csv(out, "spectrum.csv", cfg, ("t", "F", "G"),
               [(t, int(f), g) for t, f, g in zip(ts, F, G)])
    factor = effdim_bound_factor(profile.nu_lower)
    _write_csv(out, "effdim.csv", cfg, ("lambda", "effdim", "count_times_factor"),
               [(lam, effective_dimension(profile, float(lam)), float(f) * factor)
                for lam, f in zip(ts, F)])
    checks = [check_scaling(profile, r), check_doubling(profile, r),
              check_sandwich(profile, r), check_effdim_bound(profile)]
    decay = verify_decay(profile)
    lines = [f"r = {_fmt(r)}", *map(str, checks), str(decay),
             f"all passed: {_fmt(all(c.ok for c in checks))}",
             f"eigup: {_fmt(decay.eigup_ok)}", f"eiglow: {_fmt(decay.eiglow_ok)}"]
    _write_text(out, "properties.txt", cfg, lines)
    print("\n".join(lines))
    return 0


def _load_xy(path: str):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)   # empty file: we raise below
            data = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"data file {path} is not numeric two-column CSV: {exc}") from exc
    if data.size == 0 or data.shape[0] == 0:
        raise DataError(f"data file {path} has no rows")
    if data.shape[1] != 2:
        raise DataError(f"data file {path} must have exactly 2 columns, got {data.shape[1]}")
    x, y = data[:, 0], data[:, 1]
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DataError("design points must lie in [0, 1]")
    return x, y


def cmd_fit(cfg: ExperimentConfig, args) -> int:
    problem = cfg.require("problem")
    filt = cfg.filter if cfg.filter is not None else tikhonov()
    out = Path(cfg.out)
    fit_cfg = cfg.fit or {}
    synthetic = args.data is None
    if synthetic:
        if "n" not in fit_cfg:
            raise ConfigError("synthetic fit needs fit.n (or pass --data)")
        n = int(fit_cfg["n"])
        ds = sample(problem, n, cfg.seed)
        x, y = ds.x, ds.y
    else:
        x, y = _load_xy(args.data)
        n = len(x)
    if "lam" in fit_cfg:
        lam, lam_source = float(fit_cfg["lam"]), "config"
    else:
        lam = lambda_rule(ModelParams.from_problem(problem), n)
        lam_source = "lambda_rule"
    result = fit_mercer(problem, x, y, lam, filt)
    _write_csv(out, "alpha.csv", cfg, ("index", "x", "y", "alpha"),
               [(i, xi, yi, ai) for i, (xi, yi, ai) in enumerate(zip(x, y, result.alpha))])
    lines = [f"n = {n}", f"synthetic = {_fmt(synthetic)}",
             f"filter = {filt.kind}", f"lambda = {_fmt(lam)}",
             f"lambda_source = {lam_source}", f"kappa_sq = {_fmt(result.kappa_sq)}"]
    if synthetic:
        for s in (0.0, 0.5):
            err = error_norm(problem, result.eigencoeffs, s)
            lines.append(f"error_s{s:g} = {_fmt(err)}")
    _write_text(out, "fit.txt", cfg, lines)
    print("\n".join(lines))
    return 0


def cmd_rates(cfg: ExperimentConfig, args) -> int:
    problem = cfg.require("problem")
    rates_cfg = cfg.require("rates")
    filt = cfg.filter if cfg.filter is not None else tikhonov()
    _gate(problem.profile, "upper", "rates")
    out = Path(cfg.out)
    s = float(rates_cfg["s"])
    report = run_rate_experiment(problem, filt, rates_cfg["n_grid"],
                                 rates_cfg["replicates"], s,
                                 seed=cfg.seed, jobs=args.jobs)
    cols = ["n", "lambda", "theoretical", "mean", "median", "q10", "q90"]
    rows = [[row.n, row.lam, row.theoretical, row.mean, row.median, row.q10, row.q90]
            for row in report.rows]
    if "eta" in rates_cfg:
        eta = float(rates_cfg["eta"])
        params = ModelParams.from_problem(problem)
        cols += ["envelope", "admissible"]
        for values, row in zip(rows, report.rows):
            env = envelope(params, row.n, row.lam, eta, filt, s)
            values += [env.bound, env.admissible]
    _write_csv(out, "rates.csv", cfg, tuple(cols), rows)
    _write_csv(out, "errors.csv", cfg, ("n", "replicate", "error"),
               [(row.n, i, e) for row in report.rows for i, e in enumerate(row.errors)])
    gap = (None if report.theoretical_slope is None
           else report.fitted_slope - report.theoretical_slope)
    _write_csv(out, "slope.csv", cfg, ("fitted_slope", "theoretical_slope", "gap"),
               [(report.fitted_slope, report.theoretical_slope, gap)])
    if args.svg:
        ns = [row.n for row in report.rows]
        _svg_loglog(out / "rates.svg", cfg,
                    [("median error", ns, [row.median for row in report.rows]),
                     ("theoretical", ns, [row.theoretical for row in report.rows])],
                    "n", "error")
    print(f"fitted slope {report.fitted_slope!r}, theoretical {report.theoretical_slope!r}")
    return 0


def cmd_lowerbound(cfg: ExperimentConfig, args) -> int:
    problem = cfg.require("problem")
    lb_cfg = cfg.require("lowerbound")
    _gate(problem.profile, "lower", "lowerbound")
    out = Path(cfg.out)
    params = ModelParams.from_problem(problem)
    report = fano_report(params, float(lb_cfg["s"]), int(lb_cfg["n"]), seed=cfg.seed)
    _write_csv(out, "fano.csv", cfg,
               ("epsilon", "m", "n_codes", "omega", "lower_bound_prob", "valid",
                "reason", "kl_mean", "kl_max", "bound_display", "bound_corrected"),
               [(report.epsilon, report.m, report.n_codes, report.omega,
                 report.lower_bound_prob, report.valid, report.reason,
                 report.kl_mean, report.kl_max, report.bound_display,
                 report.bound_corrected)])
    _write_csv(out, "kl_pairs.csv", cfg, ("i", "j", "kl"), report.kl_pairs)
    print(str(report))
    return 0


def cmd_filter_check(cfg: ExperimentConfig, args) -> int:
    filt = cfg.filter if cfg.filter is not None else tikhonov()
    out = Path(cfg.out)
    report = verify_constants(filt)
    _write_csv(out, "constants.csv", cfg,
               ("condition", "declared", "measured", "worst_lambda", "worst_t", "ok"),
               [(w.condition, w.declared, w.measured, w.worst_lam, w.worst_t, w.ok)
                for w in report.worst_points])
    qs = sorted({1.0, 2.0, 4.0} | ({float(filt.qualification)}
                                   if np.isfinite(filt.qualification) else set()))
    entries = measure_qualification(filt, qs)
    _write_csv(out, "qualification.csv", cfg, ("q", "gamma_q_hat", "saturates"),
               [(e.q, e.gamma_q_hat, e.saturates) for e in entries])
    print(f"{filt.kind}: constants {'hold' if report.holds else 'VIOLATED'}")
    print(str(report))
    return 0


# ------------------------------------------------------------------
# entry point
# ------------------------------------------------------------------

_COMMANDS = {
    "spectrum-report": cmd_spectrum_report,
    "fit": cmd_fit,
    "rates": cmd_rates,
    "lowerbound": cmd_lowerbound,
    "filter-check": cmd_filter_check,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectreg",
        description="Spectral-regularization regression experiments from a YAML config.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the YAML config")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--svg", action="store_true", help="also render SVG plots")
        if name == "fit":
            p.add_argument("--data", default=None, help="two-column x,y CSV")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, out_override=args.out)
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except AssumptionError as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return 4
    except SpectregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
