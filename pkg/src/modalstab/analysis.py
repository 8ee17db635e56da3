"""Post-processing of recorded runs: decay fits, monotonicity and verdicts."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .models import ModelKind, ModelSpec
from .spectral import DomainError
from .thresholds import ThresholdReport

FLOOR = 1e-13
MIN_SAMPLES = 10


@dataclass(frozen=True)
class DecayFit:
    window: tuple[float, float]
    fitted_rate: float
    r_squared: float
    floor_reached: bool
    n_samples: int = 0
    intercept: float = math.nan

    def line(self, t) -> np.ndarray:
        """Fitted ``log value`` at times ``t``."""
        return self.intercept - self.fitted_rate * np.asarray(t, dtype=float)

    def to_dict(self) -> dict:
        return asdict(self)


def default_window(t, frac: float = 0.2, entry_time: float | None = None) -> tuple[float, float]:
    """Discard the first ``frac`` of the horizon and anything before ``entry_time``."""
    t = np.asarray(t, dtype=float)
    lo = t[0] + frac * (t[-1] - t[0])
    if entry_time is not None:
        lo = max(lo, entry_time)
    return float(lo), float(t[-1])


def fit_exponential(t, values, window: tuple[float, float] | None = None, floor: float = FLOOR) -> DecayFit:
    """Least-squares line through ``(t, log value)``; the rate is minus the slope.

    Only samples inside ``window`` and above ``floor`` enter the fit.  If the
    series reaches the floor and fewer than ``MIN_SAMPLES`` remain, the rate is
    ``nan`` and ``floor_reached`` is set.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape:
        raise DomainError("time and value arrays differ in length")
    lo, hi = (float(t[0]), float(t[-1])) if window is None else map(float, window)
    if not lo < hi:
        raise DomainError("window needs t_lo < t_hi")
    inwin = (t >= lo) & (t <= hi)
    if np.any(y[inwin] < 0):
        raise DomainError("values must be positive")
    keep = inwin & (y > floor)
    floor_reached = bool(np.any(inwin & (y <= floor)))
    n = int(keep.sum())
    if n < MIN_SAMPLES:
        if floor_reached:
            return DecayFit((lo, hi), math.nan, math.nan, True, n)
        raise DomainError(f"only {n} samples in the fit window (need {MIN_SAMPLES})")
    tk, ly = t[keep], np.log(y[keep])
    slope, intercept = np.polyfit(tk, ly, 1)
    resid = ly - (intercept + slope * tk)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-28 * max(1.0, float(np.sum(ly**2))) else max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFit((lo, hi), float(-slope), r2, floor_reached, n, float(intercept))


@dataclass(frozen=True)
class AlgebraicCheck:
    sup: float
    t_at_sup: float
    bounded: bool
    last_decade_max: float
    earlier_max: float


def check_algebraic_decay(t, values, exponent: float, t_lo: float = 1.0, growth_tol: float = 1.1) -> AlgebraicCheck:
    """Is ``value * t**exponent`` bounded on ``t >= t_lo``?

    A growth trend is flagged when the maximum of the scaled series over the
    last decade ``[t_end / 10, t_end]`` exceeds ``growth_tol`` times its
    maximum before that decade.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    sel = t >= t_lo
    if sel.sum() < 2:
        raise DomainError("need samples beyond t_lo")
    ts, s = t[sel], y[sel] * t[sel] ** exponent
    i = int(np.argmax(s))
    sup = float(s[i])
    split = ts[-1] / 10.0
    last = s[ts >= split]
    earlier = s[ts < split]
    if earlier.size == 0:
        # horizon shorter than a decade past t_lo: compare halves instead
        half = ts.size // 2
        earlier, last = s[:half], s[half:]
    last_max, earlier_max = float(last.max()), float(earlier.max())
    bounded = math.isfinite(sup) and last_max <= growth_tol * earlier_max
    return AlgebraicCheck(sup, float(ts[i]), bool(bounded), last_max, earlier_max)


class Verdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    NOT_APPLICABLE = "NOT_APPLICABLE"


def compare_to_certificate(fit: DecayFit, report: ThresholdReport, slack: float = 0.05) -> Verdict:
    """``PASS`` iff the observed rate is at least the guaranteed one, less ``slack``."""
    if not report.certified or report.guaranteed_rate is None or math.isnan(fit.fitted_rate):
        return Verdict.NOT_APPLICABLE
    if fit.fitted_rate >= report.guaranteed_rate * (1 - slack):
        return Verdict.PASS
    return Verdict.FAIL


@dataclass(frozen=True)
class MonotoneCheck:
    ok: bool
    worst_increase: float
    worst_index: int


def check_nonincreasing(values, rtol: float = 1e-9, floor: float = FLOOR) -> MonotoneCheck:
    """Each step may grow by at most ``rtol`` relative to the current value.

    Steps where both values are below ``floor`` times the series maximum are
    roundoff noise and skipped.
    """
    y = np.asarray(values, dtype=float)
    if y.size < 2:
        return MonotoneCheck(True, 0.0, -1)
    scale = float(np.max(np.abs(y)))
    prev, nxt = y[:-1], y[1:]
    rel = (nxt - prev) / np.maximum(np.abs(prev), 1e-300)
    noise = (np.abs(prev) <= floor * scale) & (np.abs(nxt) <= floor * scale)
    rel = np.where(noise, -np.inf, rel)
    i = int(np.argmax(rel))
    worst = float(rel[i])
    return MonotoneCheck(bool(worst <= rtol), max(worst, 0.0) if math.isfinite(worst) else 0.0, i)


def absorbing_entry(t, values, radius: float) -> float | None:
    """First recorded time after which ``values`` stay at or below ``radius``."""
    t = np.asarray(t, dtype=float)
    above = np.nonzero(np.asarray(values, dtype=float) > radius)[0]
    if above.size == 0:
        return float(t[0])
    j = int(above[-1]) + 1
    return float(t[j]) if j < t.size else None


def energy_identity_residual(record, model: ModelSpec) -> np.ndarray:
    """Discrete residual of ``d/dt E + 2 nu ||grad u||^2 - 2 (h, u)`` at step midpoints.

    ``E = ||u||^2 + alpha^2 ||grad u||^2``; the derivative is a forward
    difference and the other terms are trapezoidal averages, so the residual
    of an exact solution is second order in the record spacing.
    """
    if model.kind not in (ModelKind.NSV2D, ModelKind.BBMB, ModelKind.KDVB):
        raise DomainError("energy identity check is for the first-order models")
    t = record["t"]
    E = record["u_energy"]
    G = record["u_grad"] ** 2
    H = record["u_h_inner"]
    dE = np.diff(E) / np.diff(t)
    return dE + model.nu * (G[1:] + G[:-1]) - (H[1:] + H[:-1])


# ----------------------------------------------------------------------------
# output


def fit_csv(t, values, fit: DecayFit) -> str:
    """Plot-ready rows ``t, log_value, fitted_line, in_window``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "log_value", "fitted_line", "in_window"])
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    line = fit.line(t)
    lo, hi = fit.window
    for ti, yi, li in zip(t, y, line):
        ly = math.log(yi) if yi > 0 else -math.inf
        w.writerow([repr(float(ti)), repr(ly), repr(float(li)), int(lo <= ti <= hi and yi > FLOOR)])
    return buf.getvalue()


def write_verdict(path, verdict: Verdict, fit: DecayFit | None, report: ThresholdReport | None,
                  extra: dict | None = None) -> Path:
    doc = {
        "verdict": verdict.value,
        "fit": None if fit is None else {k: _finite(v) for k, v in fit.to_dict().items()},
        "guaranteed_rate": None if report is None else report.guaranteed_rate,
        "certified": None if report is None else report.certified,
    }
    doc.update(extra or {})
    p = Path(path)
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return p


def _finite(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, tuple):
        return list(v)
    return v
