"""Least-squares recovery of decay constants and comb-shape readout.

All problems here are small and dense, so the solver is a damped
Gauss-Newton loop on analytic Jacobians rather than a general
optimizer. Positivity of time constants is enforced by fitting their
logarithms; the fast/slow ordering of the double exponential is built
into the parameterization (slow = fast + exp(gap)), which removes
both bound constraints and the permutation ambiguity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .comb import CombSpec, SpectrumGrid
from .errors import ConfigError, ValidationError

__all__ = [
    "FitResult",
    "fit_afc_decay",
    "fit_double_exponential",
    "fit_comb_parameters",
    "load_points_csv",
    "format_report",
]

_GRAD_TOL = 1e-10
_MAX_ITER = 500


@dataclass(frozen=True)
class FitResult:
    """Outcome of one fit.

    parameters and uncertainties share keys; keys carry the unit as a
    suffix where the quantity is not dimensionless. Uncertainties are
    1-sigma values from the local quadratic model, NaN when there are
    no degrees of freedom left.
    """

    parameters: dict[str, float]
    uncertainties: dict[str, float]
    residual_norm: float
    converged: bool
    message: str = ""
    n_iterations: int = 0


def _gauss_newton(fun, beta0):
    """Minimize ||r(beta)||^2 where fun(beta) returns (r, J).

    Levenberg damping keeps the cost monotone: a trial step is only
    accepted when it does not increase the cost, otherwise the damping
    grows and the step shrinks. Convergence is a relative-gradient
    test, so an exactly interpolating fit converges immediately.
    """
    beta = np.asarray(beta0, dtype=float)
    r, jac = fun(beta)
    cost = float(r @ r)
    lam = 1e-3
    for it in range(1, _MAX_ITER + 1):
        grad = jac.T @ r
        if np.max(np.abs(grad)) <= _GRAD_TOL * (1.0 + cost):
            return beta, r, jac, True, it - 1, "gradient below tolerance"
        hess = jac.T @ jac
        scale = np.maximum(np.diag(hess), 1e-30)
        stepped = False
        while lam < 1e15:
            try:
                step = np.linalg.solve(hess + lam * np.diag(scale), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            if not np.all(np.isfinite(step)):
                lam *= 10.0
                continue
            r_new, jac_new = fun(beta + step)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                beta = beta + step
                drop = cost - cost_new
                r, jac, cost = r_new, jac_new, cost_new
                lam = max(lam / 10.0, 1e-12)
                stepped = True
                break
            lam *= 10.0
        if not stepped:
            return beta, r, jac, False, it, "damping exhausted without descent"
        if drop <= 1e-12 * max(cost + drop, 1e-300):
            return beta, r, jac, True, it, "cost decrease below tolerance"
    return beta, r, jac, False, _MAX_ITER, "iteration limit reached"


def _covariance(r: np.ndarray, jac: np.ndarray):
    """Parameter covariance from the residual and Jacobian, or None."""
    dof = r.size - jac.shape[1]
    if dof <= 0:
        return None
    try:
        inv = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return None
    return (float(r @ r) / dof) * inv


def _as_points(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Validate and time-sort an (n, 2) table; returns (t, y, order)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("points must be an (n, 2) table of (time, value)")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points must be finite")
    order = np.argsort(pts[:, 0], kind="stable")
    return pts[order, 0], pts[order, 1], order


def _as_weights(weights, order: np.ndarray) -> np.ndarray:
    if weights is None:
        return np.ones(order.size)
    w = np.asarray(weights, dtype=float)
    if w.shape != (order.size,):
        raise ValidationError("weights must match the number of points")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValidationError("weights must be finite and non-negative")
    return w[order]


def fit_afc_decay(points, weights=None) -> FitResult:
    """Recover (eta0, T2) from echo-efficiency decay data.

    Model: eta(t) = eta0 * exp(-4 t / T2). Two points interpolate
    exactly; uncertainties then have no degrees of freedom and come
    back NaN. Initialization is deterministic: log-linear regression
    on the tail for the time constant, amplitude from the first point.
    """
    t, y, order = _as_points(points)
    w = _as_weights(weights, order)
    if t.size < 2:
        raise ValidationError("need at least two points")
    if np.any(t < 0):
        raise ValidationError("storage times must be non-negative")
    if np.any(y <= 0):
        raise ValidationError("efficiencies must be positive")
    if np.ptp(t) == 0:
        raise ValidationError("need at least two distinct times")

    tail = slice(t.size // 2, None) if t.size > 3 else slice(None)
    if np.ptp(t[tail]) == 0:
        tail = slice(None)
    slope = np.polyfit(t[tail], np.log(y[tail]), 1)[0]
    t2_init = -4.0 / slope if slope < 0 else 10.0 * np.ptp(t)
    eta0_init = y[0] * np.exp(4.0 * t[0] / t2_init)

    def fun(beta):
        eta0, t2 = np.exp(beta)
        m = eta0 * np.exp(-4.0 * t / t2)
        jac = np.column_stack((w * m, w * m * 4.0 * t / t2))
        return w * (m - y), jac

    beta, r, jac, ok, n_it, msg = _gauss_newton(
        fun, [np.log(eta0_init), np.log(t2_init)]
    )
    eta0, t2 = np.exp(beta)
    cov = _covariance(r, jac)
    if cov is not None:
        with np.errstate(invalid="ignore"):
            sig = np.sqrt(np.diag(cov))
    else:
        sig = (np.nan, np.nan)
    return FitResult(
        parameters={"eta0": float(eta0), "t2_afc_s": float(t2)},
        uncertainties={
            "eta0": float(eta0 * sig[0]),
            "t2_afc_s": float(t2 * sig[1]),
        },
        residual_norm=float(np.linalg.norm(r)),
        converged=ok,
        message=msg,
        n_iterations=n_it,
    )


def _double_exp_init(t: np.ndarray, z: np.ndarray) -> list[float]:
    """Deterministic start for the double exponential, on sign-fixed data."""
    n = t.size
    k = max(2, n // 3)
    tail_t, tail_z = t[-k:], z[-k:]
    pos = tail_z > 0
    if pos.sum() >= 2 and np.ptp(tail_t[pos]) > 0:
        slope, icept = np.polyfit(tail_t[pos], np.log(tail_z[pos]), 1)
        tau_s = -1.0 / slope if slope < 0 else 10.0 * np.ptp(t)
        b0 = np.exp(icept)
    else:
        tau_s = t[-1]
        b0 = max(z[-1], 0.1 * np.max(np.abs(z)))
    resid = z - b0 * np.exp(-t / tau_s)
    head_t, head_r = t[:k], resid[:k]
    pos = head_r > 0
    if pos.sum() >= 2 and np.ptp(head_t[pos]) > 0:
        slope = np.polyfit(head_t[pos], np.log(head_r[pos]), 1)[0]
        tau_f = -1.0 / slope if slope < 0 else tau_s / 20.0
    else:
        tau_f = tau_s / 20.0
    tau_f = min(tau_f, tau_s / 2.0)
    a0 = resid[0] * np.exp(t[0] / tau_f)
    if not np.isfinite(a0) or a0 == 0.0:
        a0 = 0.1 * np.max(np.abs(z))
    return [a0, b0, np.log(tau_f), np.log(tau_s - tau_f)]


def fit_double_exponential(points, weights=None) -> FitResult:
    """Recover (A, B, T1_fast, T1_slow) from a relative-depth trace.

    Model: d(t) = A exp(-t/T1_fast) + B exp(-t/T1_slow), with
    T1_slow = T1_fast + exp(gap) keeping the ordering strict.
    Amplitudes carry either sign, so hole traces (negative depth) fit
    without preprocessing. An amplitude consistent with zero, or a
    collapsed gap between the two time constants, is flagged in the
    message rather than raised: the fit is still the least-squares
    answer, it just does not support two scales.
    """
    t, y, order = _as_points(points)
    w = _as_weights(weights, order)
    if t.size < 5:
        raise ValidationError("need at least five points")
    if np.any(t <= 0):
        raise ValidationError("times must be positive")
    if t[-1] / t[0] < 10.0:
        raise ValidationError(
            "time span too narrow to separate two scales (need max/min >= 10)"
        )

    sign = 1.0 if y[np.argmax(np.abs(y))] >= 0 else -1.0
    z = sign * y

    def fun(beta):
        a, b, q, v = beta
        tau_f = np.exp(q)
        tau_s = tau_f + np.exp(v)
        ef = np.exp(-t / tau_f)
        es = np.exp(-t / tau_s)
        m = a * ef + b * es
        jac = np.column_stack(
            (
                w * ef,
                w * es,
                w * (a * ef * t / tau_f + b * es * t * tau_f / tau_s**2),
                w * (b * es * t * (tau_s - tau_f) / tau_s**2),
            )
        )
        return w * (m - z), jac

    beta, r, jac, ok, n_it, msg = _gauss_newton(fun, _double_exp_init(t, z))
    a, b = sign * beta[0], sign * beta[1]
    tau_f = float(np.exp(beta[2]))
    tau_s = tau_f + float(np.exp(beta[3]))
    cov = _covariance(r, jac)
    if cov is not None:
        with np.errstate(invalid="ignore"):
            sig = np.sqrt(np.diag(cov))
        grad_s = np.array([0.0, 0.0, tau_f, tau_s - tau_f])
        sig_tau_s = float(np.sqrt(max(grad_s @ cov @ grad_s, 0.0)))
        unc = {
            "a": float(sig[0]),
            "b": float(sig[1]),
            "t1_fast_s": float(tau_f * sig[2]),
            "t1_slow_s": sig_tau_s,
        }
    else:
        unc = {k: np.nan for k in ("a", "b", "t1_fast_s", "t1_slow_s")}

    scale = np.max(np.abs(z))
    notes = []
    for name, amp in (("fast", beta[0]), ("slow", beta[1])):
        thr = max(2.0 * unc["b" if name == "slow" else "a"], 1e-9 * scale)
        if not np.isfinite(thr):
            thr = 1e-9 * scale
        if abs(amp) <= thr:
            notes.append(
                f"{name} amplitude consistent with zero; "
                "a single exponential is adequate"
            )
    if tau_s <= 1.05 * tau_f:
        notes.append("time scales indistinguishable (slow within 5% of fast)")
    if notes:
        msg = msg + "; " + "; ".join(notes)
    return FitResult(
        parameters={
            "a": float(a),
            "b": float(b),
            "t1_fast_s": tau_f,
            "t1_slow_s": tau_s,
        },
        uncertainties=unc,
        residual_norm=float(np.linalg.norm(r)),
        converged=ok,
        message=msg,
        n_iterations=n_it,
    )


def _tooth_maxima(freqs: np.ndarray, vals: np.ndarray, delta: float):
    """Per-period maxima and their positions, periods anchored at freqs[0]."""
    idx = np.floor((freqs - freqs[0]) / delta).astype(int)
    maxima, positions = [], []
    for n in range(idx.max() + 1):
        sel = idx == n
        if sel.sum() < 3:
            continue
        seg = vals[sel]
        k = int(np.argmax(seg))
        maxima.append(seg[k])
        positions.append(freqs[sel][k])
    return np.asarray(maxima), np.asarray(positions)


def _mean_fwhm(freqs, vals, positions, level) -> float:
    """Mean full width at the given level around each listed peak."""
    step = freqs[1] - freqs[0]
    widths = []
    for pos in positions:
        k = int(round((pos - freqs[0]) / step))
        i = k
        while i > 0 and vals[i] > level:
            i -= 1
        if vals[i] > level:
            continue
        left = freqs[i] + (level - vals[i]) / (vals[i + 1] - vals[i]) * step
        i = k
        while i < vals.size - 1 and vals[i] > level:
            i += 1
        if vals[i] > level:
            continue
        right = freqs[i - 1] + (vals[i - 1] - level) / (vals[i - 1] - vals[i]) * step
        widths.append(right - left)
    if not widths:
        raise ValidationError("no tooth crosses its half-maximum level")
    return float(np.mean(widths))


def fit_comb_parameters(spectrum: SpectrumGrid, spec: CombSpec) -> FitResult:
    """Read peak depth, finesse and background off a comb spectrum.

    Robust direct estimates (low quantile for the background, median
    tooth maximum for the peak, mean full width at half maximum for
    the tooth width) seed a profile fit of rectangular teeth with
    arctangent edges, which is the closed form of a square comb seen
    through a Lorentzian line. The refinement matters: on a broadened
    comb the direct peak estimate alone is biased low by roughly the
    tail fraction the line pushes out of each tooth.
    """
    freqs = np.asarray(spectrum.frequencies, dtype=float)
    vals = np.asarray(spectrum.values, dtype=float)
    step = freqs[1] - freqs[0]
    if np.max(np.abs(np.diff(freqs) - step)) > 1e-9 * step:
        raise ValidationError("spectrum grid must be uniform")
    delta = spec.delta
    if freqs[-1] - freqs[0] < 3.0 * delta:
        raise ValidationError("spectrum must cover at least three comb periods")
    if delta < 3.0 * step:
        raise ValidationError("grid too coarse to resolve one period")

    d0_init = float(np.quantile(vals, 0.05))
    maxima, positions = _tooth_maxima(freqs, vals, delta)
    d_init = float(np.median(maxima)) - d0_init
    if d_init <= 1e-7 * max(1.0, abs(float(np.median(maxima)))):
        raise ValidationError("no periodic comb structure detected")
    width_init = _mean_fwhm(freqs, vals, positions, d0_init + 0.5 * d_init)
    width_init = min(max(width_init, step), 0.95 * delta)
    # circular mean of peak positions within one period
    ang = np.exp(2j * np.pi * (positions % delta) / delta)
    center_init = float(np.angle(np.mean(ang)) / (2 * np.pi) * delta % delta)

    n_lo = int(np.floor((freqs[0] - center_init) / delta)) - 2
    n_hi = int(np.ceil((freqs[-1] - center_init) / delta)) + 2
    centers = center_init + np.arange(n_lo, n_hi + 1) * delta

    def fun(beta):
        d0, d, c, lw, lh = beta
        wid, h = np.exp(lw), np.exp(lh)
        x = freqs[:, None] - (centers + (c - center_init))[None, :]
        up = (x + 0.5 * wid) / h
        un = (x - 0.5 * wid) / h
        tooth = np.arctan(up) - np.arctan(un)
        dp = 1.0 / (1.0 + up * up)
        dn = 1.0 / (1.0 + un * un)
        m = d0 + (d / np.pi) * tooth.sum(axis=1)
        jac = np.column_stack(
            (
                np.ones(freqs.size),
                tooth.sum(axis=1) / np.pi,
                (d / np.pi) * (-1.0 / h) * (dp - dn).sum(axis=1),
                (d / np.pi) * (wid / (2.0 * h)) * (dp + dn).sum(axis=1),
                (d / np.pi) * (-(up * dp) + un * dn).sum(axis=1),
            )
        )
        return m - vals, jac

    beta0 = [d0_init, d_init, center_init, np.log(width_init), np.log(step)]
    beta, r, jac, ok, n_it, msg = _gauss_newton(fun, beta0)
    d0, d = float(beta[0]), float(beta[1])
    width = float(np.exp(beta[3]))
    finesse = delta / width
    cov = _covariance(r, jac)
    if cov is not None:
        with np.errstate(invalid="ignore"):
            sig = np.sqrt(np.diag(cov))
        unc = {
            "d": float(sig[1]),
            "finesse": float(finesse * sig[3]),
            "d0": float(sig[0]),
        }
    else:
        unc = {"d": np.nan, "finesse": np.nan, "d0": np.nan}
    return FitResult(
        parameters={"d": d, "finesse": float(finesse), "d0": d0},
        uncertainties=unc,
        residual_norm=float(np.linalg.norm(r)),
        converged=ok,
        message=msg,
        n_iterations=n_it,
    )


def load_points_csv(path) -> np.ndarray:
    """Two-column (x, y) CSV with an optional one-line header."""
    rows = []
    try:
        with open(path, newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) < 2:
                    raise ConfigError(f"{path}: row {i + 1}: need two columns")
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if i == 0 and not rows:
                        continue  # header line
                    raise ConfigError(
                        f"{path}: row {i + 1}: non-numeric value"
                    ) from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise ConfigError(f"{path}: fewer than two data rows")
    return np.asarray(rows, dtype=float)


def format_report(result: FitResult) -> str:
    """Plain-text fit report: one status block, one value per line."""
    lines = [
        f"converged: {'yes' if result.converged else 'NO'}",
        f"iterations: {result.n_iterations}",
        f"residual_norm: {result.residual_norm:.6e}",
        f"message: {result.message}",
        "parameter,value,uncertainty",
    ]
    for key, val in result.parameters.items():
        lines.append(f"{key},{val:.9g},{result.uncertainties.get(key, np.nan):.3g}")
    return "\n".join(lines) + "\n"
