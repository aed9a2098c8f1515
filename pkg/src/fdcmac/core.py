"""Shared domain types, unit helpers and the Gaussian tail function.

Everything in here is in SI seconds and linear power.  Powers are normalised
to the receiver noise (``SensingConfig.n0_noise``), so a 15 dB transmit power
is ``db_to_linear(15) ~= 31.62``.  Conversion to and from dB happens only at
the I/O edges (the manifest reader and the CLI).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .exceptions import DomainError

__all__ = [
    "Mode",
    "ContentionParams",
    "PuModel",
    "SicModel",
    "AccessConfig",
    "SensingConfig",
    "Scenario",
    "ThroughputReport",
    "q_function",
    "q_inverse",
    "self_interference",
    "db_to_linear",
    "linear_to_db",
]

SIGMA_DEFAULT = 20e-6


# ---------------------------------------------------------------------------
# Gaussian tail
# ---------------------------------------------------------------------------

def q_function(x):
    """Standard normal tail probability ``Q(x) = P[N(0, 1) > x]``.

    Works on scalars and numpy arrays.  ``ndtr(-x)`` keeps full relative
    accuracy deep in the upper tail, where ``0.5 * erfc`` would be fine too
    but ``1 - Phi(x)`` would not.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"q_function needs finite input, got {x!r}")
    out = special.ndtr(-arr)
    if out.ndim == 0:
        return float(out)
    return out


def q_inverse(prob):
    """Inverse of :func:`q_function` on the open interval (0, 1)."""
    arr = np.asarray(prob, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError(f"q_inverse needs 0 < prob < 1, got {prob!r}")
    # Q^-1(p) = -Phi^-1(p); using p directly avoids the 1-p cancellation.
    out = -special.ndtri(arr)
    if out.ndim == 0:
        return float(out)
    return out


def _q(x):
    # unchecked fast path for inner loops
    return special.ndtr(-x)


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------

def db_to_linear(db):
    out = 10.0 ** (np.asarray(db, dtype=float) / 10.0)
    if out.ndim == 0:
        return float(out)
    return out


def linear_to_db(linear):
    arr = np.asarray(linear, dtype=float)
    if not np.all(arr > 0.0):
        raise DomainError(f"linear_to_db needs a positive value, got {linear!r}")
    out = 10.0 * np.log10(arr)
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

class Mode(str, enum.Enum):
    """Transmission-stage mode: one-way (HDTx) or two-way (FDTx)."""

    HDTX = "HDTx"
    FDTX = "FDTx"

    @property
    def theta(self) -> int:
        """1 when the transmission stage suffers self-interference."""
        return 1 if self is Mode.FDTX else 0

    @property
    def phi(self) -> int:
        """Number of simultaneous data flows in the transmission stage."""
        return 2 if self is Mode.FDTX else 1

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        key = str(value).strip().lower()
        for m in cls:
            if m.value.lower() == key or m.name.lower() == key:
                return m
        raise DomainError(f"unknown transmission mode {value!r} (use HDTx or FDTx)")


def _check(cond, msg):
    if not cond:
        raise DomainError(msg)


@dataclass(frozen=True)
class ContentionParams:
    """p-persistent contention inputs.  Durations in seconds.

    The defaults are the slot timing used throughout the numerical study:
    sigma = 20 us, DIFS = 10 sigma, SIFS = 2 sigma, RTS = CTS = ACK = 20 sigma,
    PD = 1 us, with 40 contending pairs at p = 0.0022.
    """

    n0: int = 40
    p: float = 0.0022
    sigma: float = SIGMA_DEFAULT
    difs: float = 10 * SIGMA_DEFAULT
    sifs: float = 2 * SIGMA_DEFAULT
    rts: float = 20 * SIGMA_DEFAULT
    cts: float = 20 * SIGMA_DEFAULT
    ack: float = 20 * SIGMA_DEFAULT
    pd: float = 1e-6

    def __post_init__(self):
        _check(int(self.n0) == self.n0 and self.n0 >= 1, f"n0 must be an integer >= 1, got {self.n0}")
        object.__setattr__(self, "n0", int(self.n0))
        _check(0.0 < self.p <= 1.0, f"p must satisfy 0 < p <= 1, got {self.p}")
        for name in ("sigma", "difs", "sifs", "rts", "cts", "ack", "pd"):
            v = getattr(self, name)
            _check(math.isfinite(v) and v >= 0.0, f"{name} must be a finite duration >= 0, got {v}")
        _check(self.pd <= self.sigma, f"pd ({self.pd}) must not exceed the slot length sigma ({self.sigma})")


@dataclass(frozen=True)
class PuModel:
    """Primary-user on/off process with exponential idle and active periods."""

    tau_id_bar: float = 0.150
    tau_ac_bar: float = 0.050
    t_eva: float = 0.040
    p_pu: float = 0.01

    def __post_init__(self):
        _check(self.tau_id_bar > 0.0, f"tau_id_bar must be > 0, got {self.tau_id_bar}")
        _check(self.tau_ac_bar > 0.0, f"tau_ac_bar must be > 0, got {self.tau_ac_bar}")
        _check(self.t_eva > 0.0, f"t_eva must be > 0, got {self.t_eva}")
        _check(math.isfinite(self.p_pu) and self.p_pu >= 0.0, f"p_pu must be >= 0, got {self.p_pu}")
        _check(0.0 < self.p_h0 < 1.0, "idle probability must lie strictly inside (0, 1)")

    @property
    def p_h0(self) -> float:
        return self.tau_id_bar / (self.tau_id_bar + self.tau_ac_bar)

    @property
    def p_h1(self) -> float:
        return 1.0 - self.p_h0

    @property
    def inv_delta_tau(self) -> float:
        """``1/tau_ac - 1/tau_id`` in 1/s; zero when the means coincide."""
        return 1.0 / self.tau_ac_bar - 1.0 / self.tau_id_bar

    def idle_pdf(self, t):
        return np.exp(-np.asarray(t) / self.tau_id_bar) / self.tau_id_bar

    def idle_cdf(self, t):
        return -np.expm1(-np.asarray(t) / self.tau_id_bar)


@dataclass(frozen=True)
class SicModel:
    """Residual self-interference ``I(P) = zeta * P**xi``."""

    zeta: float = 0.08
    xi: float = 0.95

    def __post_init__(self):
        _check(math.isfinite(self.zeta) and self.zeta >= 0.0, f"zeta must be >= 0, got {self.zeta}")
        _check(0.0 <= self.xi <= 1.0, f"xi must lie in [0, 1], got {self.xi}")


@dataclass(frozen=True)
class SensingConfig:
    """Energy-detector setup.  ``epsilon`` is normally left ``None`` and
    calibrated so the average detection probability equals ``pd_target``."""

    f_s: float = 6e6
    n0_noise: float = 1.0
    pd_target: float = 0.8
    epsilon: float | None = None

    def __post_init__(self):
        _check(self.f_s > 0.0, f"f_s must be > 0, got {self.f_s}")
        _check(self.n0_noise > 0.0, f"n0_noise must be > 0, got {self.n0_noise}")
        _check(0.0 < self.pd_target < 1.0, f"pd_target must lie in (0, 1), got {self.pd_target}")
        _check(self.epsilon is None or self.epsilon > 0.0, f"epsilon must be > 0, got {self.epsilon}")


@dataclass(frozen=True)
class AccessConfig:
    """Data-phase configuration of the winning SU pair.

    ``p_dat`` defaults to ``p_max``: the transmission stage always runs at
    full power.
    """

    t_frame: float = 0.015
    t_s: float = 0.00244
    p_sen: float = 10 ** 0.46552
    p_max: float = 10 ** 1.5
    mode: Mode = Mode.FDTX
    p_dat: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if self.p_dat is None:
            object.__setattr__(self, "p_dat", self.p_max)
        _check(self.t_frame > 0.0, f"t_frame must be > 0, got {self.t_frame}")
        _check(0.0 <= self.t_s <= self.t_frame, f"t_s must lie in [0, t_frame], got {self.t_s}")
        _check(self.p_max >= 0.0, f"p_max must be >= 0, got {self.p_max}")
        _check(0.0 <= self.p_sen <= self.p_max * (1 + 1e-12), f"p_sen must lie in [0, p_max], got {self.p_sen}")
        _check(math.isclose(self.p_dat, self.p_max, rel_tol=1e-12, abs_tol=0.0),
               f"p_dat ({self.p_dat}) must equal p_max ({self.p_max})")

    @property
    def theta(self) -> int:
        return self.mode.theta

    @property
    def phi(self) -> int:
        return self.mode.phi

    def with_(self, **changes) -> "AccessConfig":
        # keep p_dat tied to p_max when only p_max changes
        if "p_max" in changes and "p_dat" not in changes:
            changes["p_dat"] = None
        return replace(self, **changes)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to evaluate the throughput of one configuration."""

    contention: ContentionParams = field(default_factory=ContentionParams)
    pu: PuModel = field(default_factory=PuModel)
    sic: SicModel = field(default_factory=SicModel)
    sensing: SensingConfig = field(default_factory=SensingConfig)
    access: AccessConfig = field(default_factory=AccessConfig)

    def __post_init__(self):
        _check(self.access.t_frame < self.pu.t_eva,
               f"frame length {self.access.t_frame} s must be shorter than the evacuation time {self.pu.t_eva} s")

    def with_access(self, **changes) -> "Scenario":
        return replace(self, access=self.access.with_(**changes))

    def replace(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class ThroughputReport:
    """Normalised throughput of one configuration with every intermediate.

    Times in seconds, bits in bits/Hz, ``nt`` in bits/s/Hz and the SINRs in
    ``gammas`` linear.
    """

    t_ove: float
    t_cont_bar: float
    b1: float
    b2: float
    b3: float
    nt: float
    gammas: dict
    pf00: float
    epsilon: float
    k_e: float
    delta_tau_inv: float
    b31: float = 0.0
    b32: float = 0.0
    t_frame: float = 0.0
    t_s: float = 0.0
    p_sen: float = 0.0

    @property
    def bits(self) -> float:
        return self.b1 + self.b2 + self.b3

    def as_row(self) -> dict:
        row = {
            "t_s": self.t_s,
            "p_sen": self.p_sen,
            "p_sen_db": linear_to_db(self.p_sen) if self.p_sen > 0 else float("-inf"),
            "nt": self.nt,
            "b1": self.b1,
            "b2": self.b2,
            "b3": self.b3,
            "b31": self.b31,
            "b32": self.b32,
            "t_ove": self.t_ove,
            "t_cont_bar": self.t_cont_bar,
            "pf00": self.pf00,
            "epsilon": self.epsilon,
            "k_e": self.k_e,
            "delta_tau_inv": self.delta_tau_inv,
        }
        for k in ("gamma_s1", "gamma_s2", "gamma_d1", "gamma_d2", "gamma_ps"):
            row[k] = self.gammas[k]
        return row


# ---------------------------------------------------------------------------
# Self-interference
# ---------------------------------------------------------------------------

def self_interference(power, sic: SicModel):
    """Residual self-interference power for a transmit power (linear)."""
    arr = np.asarray(power, dtype=float)
    if not np.all(arr >= 0.0):
        raise DomainError(f"transmit power must be >= 0, got {power!r}")
    # A silent transmitter leaks nothing, even when xi == 0.
    on = arr > 0.0
    out = np.zeros_like(arr)
    out[on] = sic.zeta * arr[on] ** sic.xi
    if out.ndim == 0:
        return float(out)
    return out
