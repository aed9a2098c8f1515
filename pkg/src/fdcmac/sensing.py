"""Energy detection during the full-duplex sensing stage.

The detector integrates ``f_s * t_s`` samples against a threshold ``eps``.
While the SU transmits at ``p_sen`` its own leakage ``I(p_sen)`` adds to the
noise floor ``N0``, so every probability below is written in terms of the
normalised threshold ``eps / (N0 + I)``.

Internally the threshold is handled as the standardised statistic

    z = (eps / (N0 + I) - 1) * sqrt(f_s * t_s)

which makes the false-alarm probability simply ``Q(z)`` and gives the
calibration a bracket that does not depend on the power levels.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .core import PuModel, SensingConfig, SicModel, _q, q_inverse, self_interference
from .exceptions import ApproximationUnavailable, CalibrationError, DomainError, NumericalError

__all__ = [
    "SensingOutcomeModel",
    "Pf00Approximation",
    "noise_floor",
    "false_alarm_p00",
    "detection_p01",
    "average_detection",
    "calibrate_threshold",
    "sensing_model",
    "approx_pf00_and_derivatives",
]

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-12
QUAD_MAX_ABSERR = 1e-10
_SQRT1_2 = 1.0 / math.sqrt(2.0)


def noise_floor(p_sen, sc: SensingConfig, sic: SicModel) -> float:
    """Noise plus residual self-interference seen by the detector."""
    return sc.n0_noise + self_interference(p_sen, sic)


def _check_ts(t_s):
    if not (t_s > 0.0 and math.isfinite(t_s)):
        raise DomainError(f"sensing time must be > 0, got {t_s}")


def _pd01_std(z, frac_absent, g_sqrt_n, g):
    """Detection probability for a standardised threshold ``z``.

    ``frac_absent = t / t_s`` is the share of the window before the PU shows
    up.  At ``frac_absent = 1`` this is exactly ``Q(z)``.
    """
    present = 1.0 - frac_absent
    num = z - present * g_sqrt_n
    den = np.sqrt(present * (g + 1.0) ** 2 + frac_absent)
    return _q(num / den)


def _pd01_scalar(z, frac_absent, g_sqrt_n, g):
    present = 1.0 - frac_absent
    x = (z - present * g_sqrt_n) / math.sqrt(present * (g + 1.0) ** 2 + frac_absent)
    return 0.5 * math.erfc(x * _SQRT1_2)


def _quad(f, a, b, what):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, abserr = integrate.quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    if not math.isfinite(val) or abserr > QUAD_MAX_ABSERR:
        raise NumericalError(f"{what}: quadrature did not converge", residual=abserr)
    return val


# ---------------------------------------------------------------------------
# Closed-form probabilities
# ---------------------------------------------------------------------------

def _standardise(eps, t_s, p_sen, sc, sic):
    ns = noise_floor(p_sen, sc, sic)
    sqrt_n = math.sqrt(sc.f_s * t_s)
    return (eps / ns - 1.0) * sqrt_n, ns, sqrt_n


def false_alarm_p00(eps, t_s, p_sen, sc: SensingConfig, sic: SicModel):
    """False-alarm probability when the PU stays idle over the sensing stage."""
    _check_ts(t_s)
    if not eps > 0.0:
        raise DomainError(f"threshold must be > 0, got {eps}")
    z, _, _ = _standardise(eps, t_s, p_sen, sc, sic)
    return float(_q(z))


def detection_p01(eps, t_s, t, p_sen, p_pu, sc: SensingConfig, sic: SicModel):
    """Detection probability when the PU turns active ``t`` seconds into the
    sensing stage.  ``t`` may be an array."""
    _check_ts(t_s)
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0.0) | (t_arr > t_s)):
        raise DomainError(f"PU arrival offset must lie in [0, t_s={t_s}], got {t!r}")
    z, ns, sqrt_n = _standardise(eps, t_s, p_sen, sc, sic)
    g = p_pu / ns
    out = _pd01_std(z, t_arr / t_s, g * sqrt_n, g)
    if out.ndim == 0:
        return float(out)
    return out


def _cond_idle_pdf(pu: PuModel, t_s):
    """Density of the PU arrival offset given that it falls inside [0, t_s]."""
    tau = pu.tau_id_bar
    norm = tau * -math.expm1(-t_s / tau)
    return lambda t: math.exp(-t / tau) / norm


def _avg_detection_std(z, t_s, g, sqrt_n, pu: PuModel):
    pdf = _cond_idle_pdf(pu, t_s)
    g_sqrt_n = g * sqrt_n
    return _quad(lambda t: _pd01_scalar(z, t / t_s, g_sqrt_n, g) * pdf(t), 0.0, t_s,
                 "average detection")


def average_detection(eps, t_s, p_sen, pu: PuModel, sc: SensingConfig, sic: SicModel) -> float:
    """Detection probability averaged over a PU arrival inside the sensing
    window, weighted by the conditional idle-time density."""
    _check_ts(t_s)
    z, ns, sqrt_n = _standardise(eps, t_s, p_sen, sc, sic)
    return _avg_detection_std(z, t_s, pu.p_pu / ns, sqrt_n, pu)


# ---------------------------------------------------------------------------
# Threshold calibration
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=65536)
def _calibrate_std(t_s, p_sen, pd_target, pu: PuModel, sc: SensingConfig, sic: SicModel):
    ns = noise_floor(p_sen, sc, sic)
    sqrt_n = math.sqrt(sc.f_s * t_s)
    g = pu.p_pu / ns

    def gap(z):
        return _avg_detection_std(z, t_s, g, sqrt_n, pu) - pd_target

    # eps > 0 means z > -sqrt_n
    z_lo = max(-40.0, -sqrt_n * (1.0 - 1e-12))
    z_hi = g * sqrt_n + 40.0
    f_lo = gap(z_lo)
    if f_lo < 0.0:
        raise CalibrationError(
            f"detection target {pd_target} unreachable with a positive threshold "
            f"(t_s={t_s}, p_sen={p_sen}); best achievable {f_lo + pd_target:.6g}")
    if gap(z_hi) > 0.0:
        raise CalibrationError(f"detection target {pd_target} too low to bracket")
    z_star = optimize.brentq(gap, z_lo, z_hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    return z_star, ns, sqrt_n, g


def calibrate_threshold(t_s, p_sen, pd_target, pu: PuModel, sc: SensingConfig, sic: SicModel) -> float:
    """Threshold ``eps*`` at which the average detection equals ``pd_target``."""
    _check_ts(t_s)
    if not 0.0 < pd_target < 1.0:
        raise DomainError(f"pd_target must lie in (0, 1), got {pd_target}")
    z_star, ns, sqrt_n, _ = _calibrate_std(float(t_s), float(p_sen), float(pd_target), pu, sc, sic)
    return ns * (1.0 + z_star / sqrt_n)


@dataclass(frozen=True)
class SensingOutcomeModel:
    """Calibrated detector for one (t_s, p_sen) pair."""

    t_s: float
    p_sen: float
    epsilon_star: float
    pf00: float
    gamma_ps: float
    pd_avg: float
    z_star: float
    noise_floor: float
    sqrt_n: float
    approx: "Pf00Approximation | None" = None

    def pd01(self, t):
        """Vectorised detection probability for arrival offsets ``t``."""
        t = np.asarray(t, dtype=float)
        out = _pd01_std(self.z_star, t / self.t_s, self.gamma_ps * self.sqrt_n, self.gamma_ps)
        if out.ndim == 0:
            return float(out)
        return out

    def pd01_scalar(self, t: float) -> float:
        return _pd01_scalar(self.z_star, t / self.t_s, self.gamma_ps * self.sqrt_n, self.gamma_ps)


def sensing_model(t_s, p_sen, pu: PuModel, sc: SensingConfig, sic: SicModel,
                  with_approx: bool = False) -> SensingOutcomeModel:
    """Calibrate the detector (or use ``sc.epsilon`` when pinned)."""
    _check_ts(t_s)
    ns = noise_floor(p_sen, sc, sic)
    sqrt_n = math.sqrt(sc.f_s * t_s)
    g = pu.p_pu / ns
    if sc.epsilon is None:
        z_star = _calibrate_std(float(t_s), float(p_sen), float(sc.pd_target), pu, sc, sic)[0]
        pd_avg = sc.pd_target
    else:
        z_star = (sc.epsilon / ns - 1.0) * sqrt_n
        pd_avg = _avg_detection_std(z_star, t_s, g, sqrt_n, pu)
    approx = approx_pf00_and_derivatives(t_s, p_sen, sc.pd_target, pu, sc, sic) if with_approx else None
    return SensingOutcomeModel(
        t_s=float(t_s), p_sen=float(p_sen),
        epsilon_star=ns * (1.0 + z_star / sqrt_n),
        pf00=float(_q(z_star)), gamma_ps=g, pd_avg=pd_avg,
        z_star=z_star, noise_floor=ns, sqrt_n=sqrt_n, approx=approx,
    )


# ---------------------------------------------------------------------------
# Single-Q approximation of the average detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pf00Approximation:
    """Closed-form stand-in for the calibrated false-alarm curve.

    The averaged detection probability is replaced by
    ``Q((eps/(N0+I) - gamma_bar - 1) * sqrt(f_s t_s) / (gamma1_bar + 1))``.
    Holding the fitted constants fixed, meeting the detection target with
    equality gives ``pf00(t_s) = Q(alpha_bar + gamma_bar * sqrt(f_s t_s))``,
    whose derivatives in ``t_s`` are available in closed form.
    """

    gamma_bar: float
    gamma1_bar: float
    alpha_bar: float
    f_s: float
    t_s: float
    fit_rms: float = 0.0

    def _y(self, t_s):
        return self.alpha_bar + self.gamma_bar * np.sqrt(self.f_s * np.asarray(t_s, dtype=float))

    def pf00_at(self, t_s):
        return _q(self._y(t_s))

    def d_pf00_at(self, t_s):
        t_s = np.asarray(t_s, dtype=float)
        s = self.gamma_bar * np.sqrt(self.f_s * t_s)
        y = self.alpha_bar + s
        return -s / (2.0 * math.sqrt(2.0 * math.pi) * t_s) * np.exp(-0.5 * y * y)

    def d2_pf00_at(self, t_s):
        t_s = np.asarray(t_s, dtype=float)
        s = self.gamma_bar * np.sqrt(self.f_s * t_s)
        y = self.alpha_bar + s
        return s / (4.0 * math.sqrt(2.0 * math.pi) * t_s ** 2) * (1.0 + y * s) * np.exp(-0.5 * y * y)

    @property
    def pf00(self) -> float:
        return float(self.pf00_at(self.t_s))

    @property
    def d_pf00_dTs(self) -> float:
        return float(self.d_pf00_at(self.t_s))

    @property
    def d2_pf00_dTs2(self) -> float:
        return float(self.d2_pf00_at(self.t_s))


def approx_pf00_and_derivatives(t_s, p_sen, pd_target, pu: PuModel, sc: SensingConfig,
                                sic: SicModel, n_grid: int = 21) -> Pf00Approximation:
    """Fit ``gamma_bar`` and ``gamma1_bar`` around the calibrated threshold.

    The single-Q form is linear in ``z`` after a probit transform, so the two
    constants come from a least-squares line through
    ``Q^-1(avg_detection(eps_k))`` on a log-spaced grid of thresholds
    ``eps_k`` centred on ``eps*``.
    """
    _check_ts(t_s)
    z_star, ns, sqrt_n, g = _calibrate_std(float(t_s), float(p_sen), float(pd_target), pu, sc, sic)
    u_star = 1.0 + z_star / sqrt_n
    # +-1 standard unit of the detector statistic: local enough that the
    # line through the probits reproduces the calibrated point closely
    half_width = 1.0 * (1.0 + g) / (u_star * sqrt_n)
    eps_grid = ns * u_star * np.exp(np.linspace(-half_width, half_width, n_grid))
    z_grid = (eps_grid / ns - 1.0) * sqrt_n
    pd = np.array([_avg_detection_std(z, t_s, g, sqrt_n, pu) for z in z_grid])
    keep = (pd > 1e-9) & (pd < 1.0 - 1e-9)
    if keep.sum() < 3:
        raise ApproximationUnavailable("too few informative grid points to fit the approximation")
    probit = q_inverse(pd[keep])
    slope, intercept = np.polyfit(z_grid[keep], probit, 1)
    if not (np.isfinite(slope) and slope > 0.0):
        raise ApproximationUnavailable(f"fitted slope {slope!r} is not positive")
    gamma1_bar = 1.0 / slope - 1.0
    gamma_bar = -intercept / (slope * sqrt_n)
    if not gamma_bar * sqrt_n > 1e-9:
        raise ApproximationUnavailable(f"fitted gamma_bar {gamma_bar!r} is not positive")
    resid = probit - (slope * z_grid[keep] + intercept)
    alpha_bar = (gamma1_bar + 1.0) * q_inverse(pd_target)
    return Pf00Approximation(
        gamma_bar=float(gamma_bar), gamma1_bar=float(gamma1_bar), alpha_bar=float(alpha_bar),
        f_s=sc.f_s, t_s=float(t_s), fit_rms=float(np.sqrt(np.mean(resid ** 2))),
    )
