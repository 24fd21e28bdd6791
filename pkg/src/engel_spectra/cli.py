"""Batch driver: one subcommand per computation, CSV rows plus a JSON summary.

Every subcommand writes ``PREFIX.csv`` and ``PREFIX.json`` (``PREFIX``
defaults to the command name) and prints the JSON summary.  Parameters
come from flags, from a flat ``key = value`` file given with ``--config``,
or from built-in defaults, in that order of precedence.

Exit codes: 0 success, 1 usage or domain error, 2 convergence failure.
"""

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

from . import engel_group, frequency_space, quartic_oscillator, semiclassics, spectral_sums
from ._parallel import THREADS_ENV
from .errors import ConvergenceError, DomainError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    """``"a,b,c"`` or a range ``"start:stop:count"``."""
    text = str(text).strip()
    if ":" in text:
        start, stop, count = text.split(":")
        return [float(v) for v in np.linspace(float(start), float(stop), int(count))]
    return [float(v) for v in text.split(",") if v.strip()]


def _point(text):
    values = _floats(text)
    if len(values) != 4:
        raise argparse.ArgumentTypeError("expected four comma-separated numbers")
    return tuple(values)


def _frequency(text):
    """``n,m,nu,lambda`` or ``boundary:n,m,nu`` (the lambda -> 0 limit)."""
    text = str(text).strip()
    try:
        if text.startswith("boundary:"):
            n, m, nu = text.split(":", 1)[1].split(",")
            return frequency_space.BoundaryPoint.harmonic(int(n), int(m), float(nu))
        n, m, nu, lam = text.split(",")
        return frequency_space.FrequencyPoint(int(n), int(m), float(nu), float(lam))
    except (ValueError, DomainError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive(kind):
    def parse(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"{text} must be positive")
        return value

    return parse


# name: (type, default, help)
_COMMON = {
    "output": (str, None, "output prefix for the .csv and .json files"),
    "threads": (_positive(int), None, f"worker threads (overrides {THREADS_ENV})"),
    "eig_tol": (_positive(float), 1e-9, "eigenvalue tolerance"),
}

_COMMANDS = {
    "spectrum": {
        "mu": (_floats, "0", "mu values: a,b,c or start:stop:count"),
        "m_max": (int, 10, "largest eigenvalue index"),
    },
    "weyl": {
        "mu": (float, 0.0, "oscillator parameter"),
        "level": (_positive(float), 400.0, "counting level"),
    },
    "single-well": {
        "mu": (float, -25.0, "oscillator parameter for the count (<= -5)"),
        "level": (float, 4.0, "level in units of mu^2"),
        "ground_mu": (float, -100.0, "parameter for the harmonic ground-state ratio"),
    },
    "double-well": {
        "h": (_positive(float), 0.01, "semiclassical parameter"),
        "pairs": (_positive(int), 3, "number of tunneling doublets"),
    },
    "bohr": {
        "h": (_positive(float), 0.005, "semiclassical parameter"),
        "lower": (float, 0.05, "window start"),
        "upper": (float, 0.5, "window end (< 1)"),
    },
    "sphere-constant": {
        "m_max": (int, 40, "largest eigenvalue index"),
        "M": (_positive(float), 40.0, "mu cutoff"),
        "tail_mode": (str, spectral_sums.EXTRAPOLATE, "extrapolate or semiclassical"),
        "rel_tol": (_positive(float), 0.01, "allowed relative interval width"),
    },
    "summability": {
        "gamma": (_floats, "2.5,1.9", "exponents"),
        "m_max": (int, 40, "largest eigenvalue index"),
        "M": (_positive(float), 40.0, "mu cutoff"),
    },
    "magic-check": {
        "profile": (str, "exp", "exp (r^power e^{-t r}) or power (r^{-power} on (0, cutoff])"),
        "t": (_positive(float), 1.0, "rate of the exponential profile"),
        "power": (float, 0.0, "power of r"),
        "cutoff": (_positive(float), 1.0, "support end of the power profile"),
        "m_max": (int, 40, "largest eigenvalue index"),
        "M": (_positive(float), 40.0, "mu cutoff"),
        "rel_tol": (_positive(float), 0.01, "relative tolerance"),
        "step": (_positive(float), 0.04, "lattice step"),
    },
    "heat": {
        "t": (_floats, "1", "times"),
        "x": (_point, "0,0,0,0", "group element x1,x2,x3,x4"),
        "step": (_positive(float), 0.1, "lattice step"),
        "m_max": (int, 40, "largest eigenvalue index"),
        "trace": (int, 0, "1 to compare with the closed-form trace (builds the eigenvalue table)"),
    },
    "fourier-check": {
        "nu": (_floats, "0.2", "nu values"),
        "lam": (_floats, "1", "lambda values (nonzero)"),
        "modes": (int, 5, "largest mode index N"),
        "x": (_point, "0.4,-0.3,0.5,0.2", "group element for the W checks"),
        "plancherel": (int, 0, "1 to run the Plancherel ratio on the default window"),
    },
    "distance": {
        "p": (_frequency, None, "n,m,nu,lambda or boundary:n,m,nu"),
        "q": (_frequency, None, "n,m,nu,lambda or boundary:n,m,nu"),
    },
}


def _build_parser():
    parser = _Parser(prog="engel-spectra", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, params in _COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file")
        for key, (_, _, text) in {**_COMMON, **params}.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=text)
    return parser


def read_config(path):
    """Flat ``key = value`` lines; ``#`` starts a comment; keys may use ``-`` or ``_``."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _resolve(command, args):
    params = {**_COMMON, **_COMMANDS[command]}
    config = read_config(args.config) if args.config else {}
    unknown = set(config) - set(params)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    resolved = {}
    for key, (kind, default, _) in params.items():
        raw = getattr(args, key)
        if raw is None:
            raw = config.get(key, default)
        if raw is None:
            if key in ("output", "threads"):
                resolved[key] = None
                continue
            raise UsageError(f"--{key.replace('_', '-')} is required")
        try:
            resolved[key] = kind(raw) if isinstance(raw, str) or kind in (int, float) else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad value for {key}: {exc}") from exc
    return resolved


# ---------------------------------------------------------------------------
# output


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if dataclasses.is_dataclass(value):
        return {"type": type(value).__name__, **_jsonable(dataclasses.asdict(value))}
    return value


class Result:
    """Rows for the CSV file plus the values and error estimates of the summary."""

    def __init__(self, header):
        self.header = list(header)
        self.rows = []
        self.values = {}
        self.errors = {}

    def row(self, *values):
        self.rows.append([_fmt(v) for v in values])

    def value(self, key, value, error="exact"):
        self.values[key] = value
        self.errors[key] = error


def _emit(command, inputs, result, runtime, prefix):
    prefix = prefix or command
    with open(prefix + ".csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(result.header)
        writer.writerows(result.rows)
    summary = {
        "command": command,
        "inputs": _jsonable(inputs),
        "values": _jsonable(result.values),
        "error_estimates": _jsonable(result.errors),
        "runtime": runtime,
    }
    with open(prefix + ".json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


# ---------------------------------------------------------------------------
# commands


def _numerics(cfg, max_index=10):
    return quartic_oscillator.NumericsSpec(eig_tol=cfg["eig_tol"], max_index=max_index)


def _trunc(cfg, **extra):
    keys = {"m_max", "M", "tail_mode", "rel_tol"}
    options = {k: cfg[k] for k in keys if k in cfg}
    return spectral_sums.TruncationSpec(eig_tol=cfg["eig_tol"], workers=cfg["threads"], **options, **extra)


def cmd_spectrum(cfg):
    out = Result(["mu", "m", "energy", "error_estimate"])
    spec = _numerics(cfg, cfg["m_max"])
    for mu in cfg["mu"]:
        result = quartic_oscillator.spectrum(mu, spec)
        for m, (e, err) in enumerate(zip(result.energies, result.est_errors)):
            out.row(mu, m, e, err)
        out.value(f"E0(mu={mu:g})", result.energies[0], result.est_errors[0])
    return out


def cmd_weyl(cfg):
    count, prediction = semiclassics.weyl_count(cfg["mu"], cfg["level"], None)
    volume = semiclassics.phase_volume(semiclassics.QUARTIC, 1.0)
    ratio = 2.0 * math.pi * count / cfg["level"] ** 0.75
    rel = abs(ratio - volume) / volume
    out = Result(["mu", "level", "count", "prediction", "volume", "relative_deviation"])
    out.row(cfg["mu"], cfg["level"], count, prediction, volume, rel)
    out.value("count", count)
    out.value("prediction", prediction, "exact")
    out.value("relative_deviation", rel, "exact")
    return out


def cmd_single_well(cfg):
    ratio = semiclassics.single_well_check(cfg["mu"], cfg["level"], _numerics(cfg))
    ground = semiclassics.harmonic_ground_ratio(cfg["ground_mu"], _numerics(cfg))
    out = Result(["quantity", "mu", "value"])
    out.row("count_ratio", cfg["mu"], ratio)
    out.row("ground_ratio", cfg["ground_mu"], ground)
    out.value("count_ratio", ratio)
    out.value("ground_ratio", ground, cfg["eig_tol"])
    return out


def cmd_double_well(cfg):
    h = cfg["h"]
    doublets = semiclassics.double_well_lowspec(h, cfg["pairs"] - 1, _numerics(cfg))
    out = Result(["k", "lower", "upper", "splitting", "resolved", "lower_over_harmonic", "error_estimate"])
    for d in doublets:
        out.row(d.k, d.lower, d.upper, d.splitting, d.resolved,
                d.lower / (math.sqrt(2.0) * h * (2 * d.k + 1)), cfg["eig_tol"] * d.lower)
    ground = doublets[0]
    out.value("ground_ratio", ground.lower / (math.sqrt(2.0) * h), cfg["eig_tol"])
    out.value("splitting_over_ground", ground.splitting / ground.lower, cfg["eig_tol"])
    out.value("splitting_resolved", ground.resolved)
    return out


def cmd_bohr(cfg):
    entries = semiclassics.bohr_sommerfeld_residuals(cfg["h"], cfg["lower"], cfg["upper"], _numerics(cfg))
    out = Result(["j", "member", "energy", "residual", "residual_over_h", "flagged"])
    for e in entries:
        out.row(e.j, e.member, e.energy, e.residual, e.residual / cfg["h"], e.flagged)
    worst = max((abs(e.residual) / cfg["h"] for e in entries if not e.flagged), default=float("nan"))
    out.value("max_residual_over_h", worst, cfg["eig_tol"] / cfg["h"])
    out.value("levels", len(entries))
    return out


def cmd_sphere_constant(cfg):
    trunc = _trunc(cfg)
    result = spectral_sums.sphere_constant(trunc)
    b = result.breakdown
    out = Result(["quantity", "value", "error_estimate"])
    out.row("C_G", result.value, (result.upper - result.lower) / 2)
    out.row("lower", result.lower, "exact")
    out.row("upper", result.upper, "exact")
    out.row("core", 3 * b.core, 3 * b.quadrature_error)
    out.row("positive_tail", 3 * b.positive_tail, 3 * b.positive_tail_uncertainty)
    out.row("negative_tail_bound", 3 * b.negative_tail, 1.5 * b.negative_tail)
    out.row("index_tail", 3 * b.index_tail, 3 * b.index_tail_uncertainty)
    out.value("C_G", result.value, (result.upper - result.lower) / 2)
    out.value("interval", [result.lower, result.upper])
    out.value("relative_width", result.relative_width)
    return out


def cmd_summability(cfg):
    trunc = _trunc(cfg)
    table = spectral_sums.spectrum_table(trunc)
    out = Result(["gamma", "total", "zero", "minus", "plus", "quadrature_error", "tail_exponent", "label"])
    for gamma in cfg["gamma"]:
        total, report = spectral_sums.summability_integral(gamma, trunc, table)
        out.row(gamma, total, report.zero, report.minus, report.plus,
                report.quadrature_error, report.tail_exponent, report.label)
        out.value(f"gamma={gamma:g}", {"total": total, "tail_exponent": report.tail_exponent,
                                       "label": report.label}, report.quadrature_error)
    return out


def _profile(cfg):
    if cfg["profile"] == "exp":
        return spectral_sums.RadialProfile.exponential(cfg["t"], cfg["power"])
    if cfg["profile"] == "power":
        return spectral_sums.RadialProfile.power_cutoff(cfg["power"], cfg["cutoff"])
    raise UsageError("profile must be exp or power")


def cmd_magic_check(cfg):
    profile = _profile(cfg)
    trunc = _trunc(cfg)
    table = spectral_sums.spectrum_table(trunc)
    lhs = spectral_sums.magic_lhs(profile, trunc, table, step=cfg["step"])
    constant = spectral_sums.sphere_constant(trunc, table)
    rhs = constant.value * profile.radial_moment()
    rel = abs(lhs.value - rhs) / abs(rhs) if rhs else abs(lhs.value)
    out = Result(["quantity", "value", "error_estimate"])
    out.row("lhs", lhs.value, lhs.error_estimate)
    out.row("rhs", rhs, abs(rhs) * constant.relative_width / 2)
    out.row("rel_diff", rel, "exact")
    out.value("lhs", lhs.value, lhs.error_estimate)
    out.value("rhs", rhs, abs(rhs) * constant.relative_width / 2)
    out.value("rel_diff", rel)
    out.value("within_tolerance", rel <= cfg["rel_tol"])
    return out


def cmd_heat(cfg):
    trunc = _trunc(cfg)
    x = cfg["x"]
    out = Result(["t", "x1", "x2", "x3", "x4", "value", "quadrature_error",
                  "imaginary_residual", "truncation_bound"])
    for t in cfg["t"]:
        h = frequency_space.heat_kernel_at(t, x, trunc, step=cfg["step"])
        out.row(t, *x, h.value, h.quadrature_error, h.imaginary_residual, h.truncation_bound)
        out.value(f"h(t={t:g})", h.value, h.quadrature_error + h.truncation_bound)
    if cfg["trace"]:
        for t in cfg["t"]:
            out.value(f"trace_formula(t={t:g})", spectral_sums.heat_trace_density(t, trunc))
    return out


def cmd_fourier_check(cfg):
    spec = frequency_space.FourierSpec(numerics=_numerics(cfg))
    u = engel_group.GaussHermiteFunction.gaussian()
    left = -1.0 * engel_group.sublaplacian(u, "left")
    count = cfg["modes"] + 1
    out = Result(["n", "m", "nu", "lam", "re", "im", "abs_error_estimate"])
    identity_dev = column_dev = relation = 0.0
    for nu in cfg["nu"]:
        for lam in cfg["lam"]:
            f, gap = frequency_space.fourier_matrix(u, nu, lam, count, spec)
            for n in range(count):
                for m in range(count):
                    out.row(n, m, nu, lam, f[n, m].real, f[n, m].imag, gap[n, m])
            w0, _ = frequency_space.w_matrix(nu, lam, engel_group.IDENTITY, count, spec)
            identity_dev = max(identity_dev, float(np.max(np.abs(w0 - np.eye(count)))))
            wide, _ = frequency_space.w_matrix(nu, lam, cfg["x"], 4 * count + 20, spec)
            norms = np.sum(np.abs(wide[:, :count]) ** 2, axis=0)
            column_dev = max(column_dev, float(np.max(np.abs(norms - 1.0))))
            g, _ = frequency_space.fourier_matrix(left, nu, lam, count, spec)
            energies = abs(lam) ** (2.0 / 3.0) * quartic_oscillator.eigenvalues(
                nu / abs(lam) ** (4.0 / 3.0), spec.numerics.covering(count - 1))[:count]
            expected = f * energies[None, :]
            mask = np.abs(expected) > 1e-6 * np.max(np.abs(expected))
            rel = np.abs(g - expected)[mask] / np.abs(expected[mask])
            relation = max(relation, float(np.max(rel)))
    out.value("w_identity_deviation", identity_dev)
    out.value("column_norm_deviation", column_dev)
    out.value("spectral_relation_rel_error", relation)
    if cfg["plancherel"]:
        result = frequency_space.plancherel_check(u, frequency_space.FrequencyWindow(workers=cfg["threads"]), spec)
        out.value("plancherel_ratio", result.ratio, result.quadrature_error)
        out.value("plancherel_last_shell", result.last_shell)
    return out


def cmd_distance(cfg):
    d = frequency_space.frequency_distance(cfg["p"], cfg["q"], _numerics(cfg))
    out = Result(["p", "q", "distance", "error_estimate"])
    out.row(str(cfg["p"]), str(cfg["q"]), d, cfg["eig_tol"])
    out.value("distance", d, cfg["eig_tol"])
    return out


_HANDLERS = {
    "spectrum": cmd_spectrum,
    "weyl": cmd_weyl,
    "single-well": cmd_single_well,
    "double-well": cmd_double_well,
    "bohr": cmd_bohr,
    "sphere-constant": cmd_sphere_constant,
    "summability": cmd_summability,
    "magic-check": cmd_magic_check,
    "heat": cmd_heat,
    "fourier-check": cmd_fourier_check,
    "distance": cmd_distance,
}


def run(argv=None):
    """Run one subcommand; returns the process exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _build_parser().parse_args(argv)
        cfg = _resolve(args.command, args)
    except (UsageError, OSError) as exc:
        print(exc, file=sys.stderr)
        return 1
    if cfg["threads"] is not None:
        os.environ[THREADS_ENV] = str(cfg["threads"])
    start = time.perf_counter()
    try:
        result = _HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 2
    runtime = time.perf_counter() - start
    inputs = {k: v for k, v in cfg.items() if k != "output"}
    summary = _emit(args.command, inputs, result, runtime, cfg["output"])
    print(json.dumps(summary, indent=2))
    return 0


def main():
    sys.exit(run())
