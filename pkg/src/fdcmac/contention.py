"""Contention overhead of one contention-and-access cycle.

Slots are generic p-persistent slots: idle when nobody transmits, a
successful RTS/CTS exchange when exactly one of the ``n0`` pairs transmits,
a collision otherwise.  Idle runs are counted in slots and converted to
seconds with ``sigma``; a collision costs ``t_coll`` and the final success
``t_succ`` (no extra slot).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ContentionParams
from .exceptions import InfeasibleContentionError

__all__ = [
    "ContentionStats",
    "slot_probabilities",
    "successful_and_collision_durations",
    "contention_overhead",
]


@dataclass(frozen=True)
class ContentionStats:
    p_succ: float
    p_idle: float
    p_coll: float
    t_succ: float
    t_coll: float
    t_idle_bar: float   # mean idle run, in slots
    n_coll_bar: float   # mean collisions before the success
    t_cont_bar: float   # seconds
    t_ove: float        # seconds

    @property
    def mean_idle_slots(self) -> float:
        """Expected idle slots per cycle (one idle run per RTS attempt)."""
        return self.t_idle_bar * (self.n_coll_bar + 1.0)


def _log_terms(cp: ContentionParams):
    """Return (log P_idle, -expm1(log P_idle), log P_succ) in a stable way."""
    n0, p = cp.n0, cp.p
    if p == 1.0:
        log_idle = -math.inf
        log_succ = 0.0 if n0 == 1 else -math.inf
        return log_idle, 1.0, log_succ
    log1mp = math.log1p(-p)
    log_idle = n0 * log1mp
    busy = -math.expm1(log_idle)
    log_succ = math.log(n0) + math.log(p) + (n0 - 1) * log1mp
    return log_idle, busy, log_succ


def slot_probabilities(cp: ContentionParams):
    """Per-slot probabilities ``(p_succ, p_idle, p_coll)``."""
    log_idle, _, log_succ = _log_terms(cp)
    p_idle = math.exp(log_idle)
    p_succ = math.exp(log_succ)
    p_coll = 1.0 - p_succ - p_idle
    if p_coll < 0.0:
        # only round-off can get here: p_succ + p_idle <= 1 analytically
        p_coll = 0.0
    return p_succ, p_idle, p_coll


def successful_and_collision_durations(cp: ContentionParams):
    t_succ = cp.difs + cp.rts + cp.sifs + cp.cts + 2.0 * cp.pd
    t_coll = cp.difs + cp.rts + cp.pd
    return t_succ, t_coll


def contention_overhead(cp: ContentionParams) -> ContentionStats:
    """Average contention time and the full per-cycle overhead ``t_ove``.

    Raises :class:`InfeasibleContentionError` when no slot can succeed.
    """
    log_idle, busy, log_succ = _log_terms(cp)
    if log_succ == -math.inf or math.exp(log_succ) == 0.0:
        raise InfeasibleContentionError(
            f"n0={cp.n0}, p={cp.p}: the success probability per slot is zero")
    p_succ, p_idle, p_coll = slot_probabilities(cp)
    t_succ, t_coll = successful_and_collision_durations(cp)

    t_idle_bar = p_idle / busy
    # (1 - P_idle) / P_succ - 1, computed in the log domain for large n0*p
    n_coll_bar = max(math.exp(math.log(busy) - log_succ) - 1.0, 0.0)

    t_cont_bar = n_coll_bar * t_coll + t_idle_bar * cp.sigma * (n_coll_bar + 1.0) + t_succ
    t_ove = t_cont_bar + 2.0 * cp.sifs + 2.0 * cp.pd + cp.ack
    return ContentionStats(
        p_succ=p_succ, p_idle=p_idle, p_coll=p_coll,
        t_succ=t_succ, t_coll=t_coll,
        t_idle_bar=t_idle_bar, n_coll_bar=n_coll_bar,
        t_cont_bar=t_cont_bar, t_ove=t_ove,
    )
