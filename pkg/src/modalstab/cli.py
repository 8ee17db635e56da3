"""Command line: ``certify``, ``simulate``, ``sweep`` and ``check-order``.

Exit codes: 0 ok, 1 input error, 2 not certifiable (or a failed order
check), 3 numerical blow-up.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import csv
import io
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .analysis import (
    Verdict,
    absorbing_entry,
    check_algebraic_decay,
    check_nonincreasing,
    compare_to_certificate,
    default_window,
    fit_csv,
    fit_exponential,
    write_verdict,
)
from .config import (
    ExperimentConfig,
    build_experiment,
    canonical_json,
    certificate,
    config_hash,
    load_config,
    with_override,
)
from .control import SteadyStateError
from .spectral import DomainError
from .timeint import NumericalBlowup, Scheme, advance, richardson_order_check

log = logging.getLogger("modalstab")

EXIT_OK, EXIT_INPUT, EXIT_UNCERTIFIED, EXIT_BLOWUP = 0, 1, 2, 3

# default decay series per model and the series the guaranteed rate refers to
DEFAULT_SERIES = {
    "NSV2D": "z_grad",
    "BBMB": "z_energy",
    "KdVB": "z_norm",
    "SDWave": "wave_energy",
    "NDWave": "lyapunov",
}
ORDER_BANDS = {Scheme.IMEX_CNAB2: (1.8, 2.2), Scheme.RK4: (3.7, 4.3), Scheme.IMEX_EULER: (0.8, 1.2)}


class InputError(Exception):
    pass


def _load(path, seed: int | None) -> tuple[ExperimentConfig, Path]:
    try:
        cfg = load_config(path)
    except (OSError, ValidationError, ValueError) as exc:
        raise InputError(f"invalid config {path}: {exc}") from exc
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
        cfg = ExperimentConfig.model_validate(cfg.model_dump(mode="json"), strict=False)
    return cfg, Path(path).resolve().parent


def _build(cfg: ExperimentConfig, base: Path):
    try:
        return build_experiment(cfg, base)
    except (DomainError, SteadyStateError, OSError, KeyError) as exc:
        raise InputError(str(exc)) from exc


def _out_dir(cfg: ExperimentConfig, out: str | None, base: Path) -> Path:
    p = Path(out) if out is not None else Path(cfg.output_dir)
    if not p.is_absolute() and out is None:
        p = base / p
    p.mkdir(parents=True, exist_ok=True)
    return p


# ----------------------------------------------------------------------------
# certify


def cmd_certify(cfg: ExperimentConfig, base: Path, out: Path) -> int:
    exp = _build(cfg, base)
    report = certificate(exp)
    (out / "certificate.json").write_text(report.to_json() + "\n")
    log.info("%s: %s (mu_min=%s, N_min=%s)", report.model_kind,
             "certified" if report.certified else "not certifiable", report.mu_min, report.N_min)
    return EXIT_OK if report.certified else EXIT_UNCERTIFIED


# ----------------------------------------------------------------------------
# simulate


@dataclass(frozen=True)
class SimulationResult:
    verdict: Verdict
    fitted_rate: float
    r_squared: float
    certified: bool
    series: str


def _absorbing_radius(exp, report) -> float | None:
    """Radius of the absorbing ball for ``||u||^2 + alpha^2 ||grad u||^2`` (NSV with forcing only)."""
    if exp.model.kind.value != "NSV2D":
        return None
    r0 = report.constants.get("r0", 0.0)
    if not (r0 > 0 and math.isfinite(r0)):
        return None
    return float(r0 * exp.model.alpha**2)


def _analyze(exp, record, report, out: Path, figures: bool) -> SimulationResult:
    acfg = exp.config.analysis
    kind = exp.model.kind.value
    series = acfg.series or DEFAULT_SERIES[kind]
    if series not in record.data:
        series = "u_grad" if "u_grad" in record.data else record.columns[1]
    t, y = record.t, record[series]
    extra: dict = {"series": series}
    fit = None
    if kind == "NDWave":
        t_lo = t[0] + acfg.window_frac * (t[-1] - t[0])
        if t[-1] > 2.0:
            t_lo = max(1.0, t_lo)
        try:
            alg = check_algebraic_decay(t, np.abs(y), 0.5, t_lo=t_lo)
        except DomainError as exc:
            extra["fit_error"] = str(exc)
            alg = None
        if alg is not None:
            extra["algebraic"] = {"exponent": 0.5, "sup": alg.sup, "t_at_sup": alg.t_at_sup,
                                  "bounded": alg.bounded}
        if not report.certified or alg is None:
            verdict = Verdict.NOT_APPLICABLE
        else:
            verdict = Verdict.PASS if alg.bounded else Verdict.FAIL
    else:
        entry = None
        radius = _absorbing_radius(exp, report)
        if radius is not None:
            energy = record["u_energy"]
            if "v_energy" in record.data:
                energy = np.maximum(energy, record["v_energy"])
            entry = absorbing_entry(t, energy, radius)
            extra["absorbing_radius"] = radius
            extra["absorbing_entry"] = entry
        try:
            fit = fit_exponential(t, y, default_window(t, acfg.window_frac, entry), floor=acfg.floor)
        except DomainError as exc:
            extra["fit_error"] = str(exc)
            fit = None
        verdict = compare_to_certificate(fit, report, acfg.slack) if fit is not None else Verdict.NOT_APPLICABLE
    if "lyapunov" in record.data:
        mono = check_nonincreasing(record["lyapunov"])
        extra["lyapunov_nonincreasing"] = mono.ok
        extra["lyapunov_worst_increase"] = mono.worst_increase
    if kind == "SDWave" and "wave_energy" in record.data:
        E0 = report.constants["E0"]
        ratio = record["wave_energy"] / (E0 * np.exp(-report.guaranteed_rate * t)) if E0 > 0 else np.inf
        extra["E0"] = E0
        extra["max_ratio_to_bound"] = float(np.max(ratio))
    write_verdict(out / "verdict.json", verdict, fit, report, extra)
    if fit is not None:
        (out / "fit.csv").write_text(fit_csv(t, y, fit))
    if figures:
        from .plotting import plot_fit, plot_norms

        plot_norms(record, out / "run_norms.png", title=f"{kind}  mu={exp.controller.mu:g}  N={exp.controller.N}")
        if fit is not None:
            plot_fit(t, y, fit, out / "fit.png", label=series,
                     guaranteed=report.guaranteed_rate if report.certified else None)
    rate = math.nan if fit is None else fit.fitted_rate
    r2 = math.nan if fit is None else fit.r_squared
    return SimulationResult(verdict, rate, r2, report.certified, series)


def run_simulation(cfg: ExperimentConfig, base: Path, out: Path, figures: bool = True) -> SimulationResult:
    """Simulate, write ``run.csv`` / ``run.meta.json`` and the analysis outputs."""
    exp = _build(cfg, base)
    report = certificate(exp)
    (out / "certificate.json").write_text(report.to_json() + "\n")
    meta = {
        "config": json.loads(canonical_json(cfg)),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "version": __version__,
    }
    if exp.steady_residual is not None:
        meta["steady_state_residual"] = exp.steady_residual
    epsilon = cfg.certify.epsilon
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        try:
            record = advance(exp.model, exp.controller, exp.state, exp.integrator,
                             reference=exp.reference, epsilon=epsilon, meta=meta)
        except NumericalBlowup as exc:
            np.save(out / "blowup_state.npy", exc.last_state)
            (out / "blowup.json").write_text(json.dumps(
                {"step": exc.step, "time": exc.time, "config_hash": meta["config_hash"],
                 "warnings": [str(w.message) for w in caught]}, indent=2) + "\n")
            raise
        finally:
            for w in caught:
                log.warning("%s", w.message)
    record.write(out, "run")
    return _analyze(exp, record, report, out, figures)


def cmd_simulate(cfg: ExperimentConfig, base: Path, out: Path) -> int:
    res = run_simulation(cfg, base, out)
    log.info("verdict %s (series %s, rate %.6g, r2 %.6g)", res.verdict.value, res.series,
             res.fitted_rate, res.r_squared)
    return EXIT_OK


# ----------------------------------------------------------------------------
# sweep


def _sweep_row(args):
    i, value, cfg_json, axis, base, out = args
    row = {"index": i, "value": value, "fitted_rate": math.nan, "r_squared": math.nan,
           "verdict": "", "certified": "", "error": ""}
    try:
        cfg = with_override(ExperimentConfig.model_validate_json(cfg_json), axis, value)
        run_dir = Path(out) / f"run_{i:03d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        res = run_simulation(cfg, Path(base), run_dir, figures=False)
        row.update(fitted_rate=res.fitted_rate, r_squared=res.r_squared,
                   verdict=res.verdict.value, certified=res.certified)
    except NumericalBlowup as exc:
        row["error"] = f"blowup: {exc}"
    except (InputError, DomainError, ValidationError, SteadyStateError) as exc:
        row["error"] = f"input: {exc}".replace("\n", " ")
    return row


def cmd_sweep(cfg: ExperimentConfig, base: Path, out: Path, axis: str, values: list[float],
              workers: int = 1) -> int:
    """One simulation per value; rows are written in input order."""
    try:
        for v in values[:1]:
            with_override(cfg, axis, v)
        if not values:
            with_override(cfg, axis, 0.0)
    except (DomainError, ValidationError) as exc:
        raise InputError(str(exc)) from exc
    cfg_json = cfg.model_dump_json()
    jobs = [(i, v, cfg_json, axis, str(base), str(out)) for i, v in enumerate(values)]
    if workers > 1 and len(jobs) > 1:
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    cols = ["index", "value", "fitted_rate", "r_squared", "verdict", "certified", "error"]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(r[k]) if isinstance(r[k], float) else r[k] for k in cols})
    (out / "sweep.csv").write_text(buf.getvalue())
    if rows:
        from .plotting import plot_sweep

        plot_sweep([r["value"] for r in rows], [r["fitted_rate"] for r in rows],
                   [r["verdict"] for r in rows], out / "sweep.png", axis)
    log.info("sweep over %s: %d rows", axis, len(rows))
    return EXIT_OK


# ----------------------------------------------------------------------------
# check-order


def cmd_check_order(cfg: ExperimentConfig, base: Path, out: Path, dts: list[float] | None,
                    scheme: str | None) -> int:
    exp = _build(cfg, base)
    sch = Scheme(scheme) if scheme else exp.integrator.scheme
    dt = exp.integrator.dt
    dts = dts or [4 * dt, 2 * dt, dt]
    try:
        res = richardson_order_check(exp.model, exp.controller, exp.state, dts, exp.integrator.t_end,
                                     sch, reference=exp.reference)
    except DomainError as exc:
        raise InputError(str(exc)) from exc
    lo, hi = ORDER_BANDS[sch]
    passed = res.status == "degenerate" or res.within(lo, hi)
    doc = {
        "scheme": sch.value, "status": res.status,
        "order": None if math.isnan(res.order) else res.order,
        "orders": list(res.orders), "errors": list(res.errors), "dts": list(res.dts),
        "band": [lo, hi], "passed": passed,
    }
    (out / "order.json").write_text(json.dumps(doc, indent=2) + "\n")
    log.info("%s observed order %s (%s)", sch.value, doc["order"], res.status)
    return EXIT_OK if passed else EXIT_UNCERTIFIED


# ----------------------------------------------------------------------------
# entry point


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modalstab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="experiment JSON")
        sp.add_argument("--out", help="output directory (default: config output_dir)")
        sp.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")

    common(sub.add_parser("certify", help="evaluate the sufficient conditions; write certificate.json"))
    common(sub.add_parser("simulate", help="run, analyze and plot one experiment"))
    sw = sub.add_parser("sweep", help="simulate over a list of values of one numeric field")
    common(sw)
    sw.add_argument("--axis", required=True, help="dotted config field, e.g. controller.mu")
    sw.add_argument("--values", required=True, type=_floats, help="comma-separated values")
    sw.add_argument("--workers", type=int, default=1)
    co = sub.add_parser("check-order", help="observed convergence order of the time integrator")
    common(co)
    co.add_argument("--dts", type=_floats, help="comma-separated geometric step sizes")
    co.add_argument("--scheme", choices=[s.value for s in Scheme])
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise InputError("--seed must be an unsigned 64-bit integer")
        cfg, base = _load(args.config, args.seed)
        out = _out_dir(cfg, args.out, base)
        if args.command == "certify":
            return cmd_certify(cfg, base, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, base, out)
        if args.command == "sweep":
            return cmd_sweep(cfg, base, out, args.axis, args.values, args.workers)
        return cmd_check_order(cfg, base, out, args.dts, args.scheme)
    except InputError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except NumericalBlowup as exc:
        log.error("%s", exc)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
