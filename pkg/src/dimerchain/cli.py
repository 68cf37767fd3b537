"""Command-line front end.

Every subcommand reads a JSON config (``--config``), applies flag overrides
and writes CSV data plus a JSON summary into ``--out``.  Exit codes:
0 success, 2 configuration error, 3 domain result (e.g. no mid-gap
frequency), 4 numerical convergence failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dislocation, spectra, stability
from .errors import ConvergenceError, DimerChainError
from .geometry import UNIT_SPHERE_CAPACITY, UNIT_SPHERE_VOLUME, ChainParams, build_finite_chain
from .io import write_csv, write_json

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_CONVERGENCE = 0, 2, 3, 4

PRESETS = {
    "unit-sphere": {"eps": 1.0, "cap_b": UNIT_SPHERE_CAPACITY, "vol_b": UNIT_SPHERE_VOLUME,
                    "delta": 1.0 / 7000.0},
}

PARAM_KEYS = ("L", "l", "eps", "delta", "cap_b", "vol_b", "vol1")
COMMAND_KEYS = {
    "bands": {"grid"},
    "gap": set(),
    "midgap": {"N_max", "interval"},
    "sweep": {"K", "d_grid"},
    "stability": {"K", "d", "d_grid", "sigma", "sigmas", "trials", "seed", "threads"},
    "modes": {"K", "d", "line_points", "line_padding"},
    "diagnostics": {"l_values", "samples"},
}
COMMON_KEYS = {"preset", "out", *PARAM_KEYS}


class ConfigError(Exception):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    command: str
    values: dict
    params: ChainParams
    out: Path

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"missing required field '{key}' for command '{self.command}'")
        return self.values[key]


def _key_line(text: str, key: str) -> int | None:
    needle = json.dumps(key)
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return None


def _where(source: str, text: str, key: str) -> str:
    line = _key_line(text, key) if text else None
    return f"{source}:{line}: " if line else f"{source}: "


def load_config(command: str, path: str | None, overrides: dict) -> ExperimentConfig:
    text, source, values = "", "<flags>", {}
    if path is not None:
        source = path
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(values, dict):
            raise ConfigError(f"{path}:1: config must be a JSON object")
    values.update({k: v for k, v in overrides.items() if v is not None})

    allowed = COMMON_KEYS | COMMAND_KEYS[command]
    for key in values:
        if key not in allowed:
            raise ConfigError(f"{_where(source, text, key)}unknown key '{key}' for command '{command}'")

    merged = {}
    preset = values.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"{_where(source, text, 'preset')}unknown preset '{preset}' "
                              f"(available: {', '.join(PRESETS)})")
        merged.update(PRESETS[preset])
    merged.update({k: v for k, v in values.items() if k != "preset"})

    for key in ("L", "l", "eps", "delta"):
        if key not in merged:
            raise ConfigError(f"{source}: missing required field '{key}'")
    for key in PARAM_KEYS:
        if key in merged and not (isinstance(merged[key], (int, float)) and not isinstance(merged[key], bool)):
            raise ConfigError(f"{_where(source, text, key)}field '{key}' must be a number")
    try:
        params = ChainParams(**{k: float(merged[k]) for k in PARAM_KEYS if k in merged})
    except DimerChainError as exc:
        raise ConfigError(f"{source}: invalid chain parameters: {exc}") from exc
    out = Path(merged.get("out", "."))
    return ExperimentConfig(command, merged, params, out)


def _int(cfg: ExperimentConfig, key: str, default=None, minimum: int = 0) -> int:
    value = cfg.get(key, default) if default is not None else cfg.require(key)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"field '{key}' must be an integer >= {minimum}, got {value!r}")
    return value


def _float(cfg: ExperimentConfig, key: str, default=None) -> float:
    value = cfg.get(key, default) if default is not None else cfg.require(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"field '{key}' must be a finite number, got {value!r}")
    return float(value)


def _float_list(cfg: ExperimentConfig, key: str, default=None) -> list[float]:
    value = cfg.get(key, default) if default is not None else cfg.require(key)
    if not isinstance(value, list) or not value or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"field '{key}' must be a non-empty list of numbers")
    return [float(v) for v in value]


def _params_summary(params: ChainParams) -> dict:
    return {"L": params.L, "l": params.l, "eps": params.eps, "delta": params.delta,
            "cap_b": params.cap_b, "vol_b": params.vol_b, "vol1": params.vol1}


# ---------------------------------------------------------------------------
# commands


def cmd_bands(cfg: ExperimentConfig) -> list[Path]:
    """Band structure CSV and gap summary."""
    grid = _int(cfg, "grid", 1024, minimum=64)
    bs = spectra.band_structure(cfg.params, grid)
    rows = zip(bs.alphas, bs.lambda1, bs.lambda2, bs.omega1, bs.omega2)
    csv_path = write_csv(cfg.out / "bands.csv", ["alpha", "lambda1", "lambda2", "omega1", "omega2"], rows)
    summary = {"params": _params_summary(cfg.params), "grid": grid, "rows": int(bs.alphas.size),
               "gap_lo": bs.gap_lo, "gap_hi": bs.gap_hi, "gap_width": bs.gap_width,
               "lambda_gap": list(bs.lambda_gap), "invalid_samples": int((~bs.valid).sum())}
    if bs.gap_width > 0 and bs.valid.sum() > 20:
        c1, c2 = bs.fit_edge_curvature()
        summary["edge_curvature"] = {"c1": c1, "c2": c2}
    return [csv_path, write_json(cfg.out / "bands_summary.json", summary)]


def cmd_gap(cfg: ExperimentConfig) -> list[Path]:
    """Gap edges at the zone boundary."""
    lo, hi = spectra.band_gap(cfg.params)
    summary = {"params": _params_summary(cfg.params), "gap_lo": lo, "gap_hi": hi, "gap_width": hi - lo}
    return [write_json(cfg.out / "gap.json", summary)]


def cmd_midgap(cfg: ExperimentConfig) -> list[Path]:
    """Mid-gap frequencies for N = 1..N_max removed dimers."""
    n_max = _int(cfg, "N_max", 5, minimum=1)
    want_interval = bool(cfg.get("interval", False))
    params = cfg.params
    lo, hi = spectra.band_gap(params)
    unit = dislocation.solve_midgap_unit(params)
    pairs = [dislocation.solve_midgap_removed(params, n) for n in range(1, n_max + 1)]
    rows = [(n, w1, w2, lo, hi) for n, (w1, w2) in enumerate(pairs, start=1)]
    files = [write_csv(cfg.out / "midgap.csv", ["N", "omega1", "omega2", "gap_lo", "gap_hi"], rows)]
    summary = {"params": _params_summary(params), "gap": [lo, hi], "unit_roots": list(unit),
               "N": list(range(1, n_max + 1)), "omega1": [p[0] for p in pairs],
               "omega2": [p[1] for p in pairs]}
    if want_interval:
        if n_max < 3:
            raise ConfigError("'interval' needs N_max >= 3 for the limit fit")
        fit = dislocation.fit_omega_infinity(params, n_max, pairs)
        summary["interval"] = [pairs[0][0], pairs[0][1]]
        summary["omega_inf"] = fit.omega_inf
        summary["omega_inf_fit_residual"] = fit.residual
    files.append(write_json(cfg.out / "midgap_summary.json", summary))
    return files


def cmd_sweep(cfg: ExperimentConfig) -> list[Path]:
    """Finite-chain spectra over a dislocation grid."""
    K = _int(cfg, "K", minimum=1)
    d_grid = _float_list(cfg, "d_grid")
    sweep = stability.dislocation_sweep(cfg.params, K, d_grid)
    rows = [(d, i, lam, w) for d, lams, ws in zip(sweep.d_grid, sweep.lambdas, sweep.spectra)
            for i, (lam, w) in enumerate(zip(lams, ws))]
    files = [write_csv(cfg.out / "sweep.csv", ["d", "index", "lambda", "omega"], rows)]
    summary = {"params": _params_summary(cfg.params), "K": K, "resonators": 4 * K + 2,
               "gap": list(sweep.gap), "d_grid": sweep.d_grid,
               "in_gap_counts": stability.in_gap_counts(sweep),
               "errors": {str(k): v for k, v in sweep.errors.items()}}
    files.append(write_json(cfg.out / "sweep_summary.json", summary))
    return files


def cmd_stability(cfg: ExperimentConfig) -> list[Path]:
    """Variance statistics under positional disorder."""
    K = _int(cfg, "K", minimum=1)
    trials = _int(cfg, "trials", minimum=2)
    seed = _int(cfg, "seed", 0)
    threads = _int(cfg, "threads", 1, minimum=1)
    sigmas = _float_list(cfg, "sigmas") if "sigmas" in cfg.values else [_float(cfg, "sigma")]
    d_grid = _float_list(cfg, "d_grid") if "d_grid" in cfg.values else [_float(cfg, "d")]
    rows, summary = [], {"params": _params_summary(cfg.params), "K": K, "trials": trials,
                         "seed": seed, "runs": []}
    for sigma in sigmas:
        scan = stability.min_variance_scan(cfg.params, K, d_grid, sigma, trials, seed, threads)
        for rep in scan.reports:
            for b in range(rep.branches):
                rows.append((rep.sigma, rep.d, b, rep.mean[b], rep.variance[b], rep.stderr[b],
                             rep.trials, rep.rejections))
        summary["runs"].append({
            "sigma": sigma, "d_star": scan.d_star, "branch_star": scan.branch_star,
            "failures": [r.failures for r in scan.reports],
            "branch_mixing_risk": [r.branch_mixing_risk for r in scan.reports],
        })
    header = ["sigma", "d", "branch", "mean", "variance", "stderr", "trials", "rejections"]
    return [write_csv(cfg.out / "stability.csv", header, rows),
            write_json(cfg.out / "stability_summary.json", summary)]


def cmd_modes(cfg: ExperimentConfig) -> list[Path]:
    """In-gap modes, decay fits and a line field."""
    K = _int(cfg, "K", minimum=1)
    d = _float(cfg, "d", 0.0)
    n_line = _int(cfg, "line_points", 2001, minimum=2)
    pad = _float(cfg, "line_padding", 10.0)
    chain = build_finite_chain(cfg.params, K, d)
    result = spectra.finite_spectrum(chain)
    lo, hi = spectra.band_gap(cfg.params)
    f = result.frequencies
    idx = np.nonzero((f > lo) & (f < hi))[0]
    files, modes = [], []
    x = np.linspace(chain.centers[0] - pad, chain.centers[-1] + pad, n_line)
    inside = np.any(np.abs(x[:, None] - chain.centers[None, :]) <= chain.radius, axis=1)
    x_out = x[~inside]
    pts = np.column_stack([x_out, np.zeros_like(x_out), np.zeros_like(x_out)])
    fields = []
    for j in idx:
        v = result.modes[:, j]
        rate, r2 = spectra.decay_rate(v, chain.centers)
        files.append(write_csv(cfg.out / f"mode_{j}.csv", ["index", "center", "amplitude"],
                               zip(range(len(chain)), chain.centers, v)))
        fields.append(spectra.mode_field(chain, v, pts))
        modes.append({"index": int(j), "omega": float(f[j]), "lambda": float(result.matrix_eigvals[j]),
                      "decay_rate": rate, "r_squared": r2})
    header = ["x1"] + [f"u_mode_{j}" for j in idx]
    files.append(write_csv(cfg.out / "field_line.csv", header, zip(x_out, *fields)))
    summary = {"params": _params_summary(cfg.params), "K": K, "d": d, "gap": [lo, hi],
               "modes": modes, "nonphysical_eigenvalues": result.nonphysical}
    files.append(write_json(cfg.out / "modes_summary.json", summary))
    return files


def cmd_diagnostics(cfg: ExperimentConfig) -> list[Path]:
    """Sign and monotonicity checks of the mid-gap equations."""
    samples = _int(cfg, "samples", 50, minimum=3)
    l_values = _float_list(cfg, "l_values", [cfg.params.l])
    reports = []
    for l in l_values:
        try:
            params = cfg.params.with_(l=l)
        except DimerChainError as exc:
            raise ConfigError(f"invalid entry {l} in 'l_values': {exc}") from exc
        reports.append(dislocation.appendix_b_diagnostics(params, samples))
    summary = {"params": _params_summary(cfg.params), "reports": reports,
               "ok": all(r["ok"] for r in reports)}
    return [write_json(cfg.out / "diagnostics.json", summary)]


COMMANDS = {
    "bands": cmd_bands,
    "gap": cmd_gap,
    "midgap": cmd_midgap,
    "sweep": cmd_sweep,
    "stability": cmd_stability,
    "modes": cmd_modes,
    "diagnostics": cmd_diagnostics,
}


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dimerchain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, help=func.__doc__ or name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--out", help="output directory (default: config 'out' or .)")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--grid", type=int)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field (value parsed as JSON)")
        if name == "midgap":
            p.add_argument("--interval", action="store_true", default=None,
                           help="also report the attainable interval and its limit point")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = _parse_set(args.set)
        if args.out is not None:
            overrides["out"] = args.out
        if getattr(args, "interval", None):
            overrides["interval"] = True
        for flag in ("seed", "threads", "grid"):
            value = getattr(args, flag)
            if value is not None:
                if flag not in COMMAND_KEYS[args.command]:
                    raise ConfigError(f"--{flag} is not used by '{args.command}'")
                overrides[flag] = value
        cfg = load_config(args.command, args.config, overrides)
        files = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DimerChainError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    for path in files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
