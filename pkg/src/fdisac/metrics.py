"""Nonlinear ground-truth metrics evaluated directly on codewords and channels.

Everything here works on complex vectors; the MILP in ``fdisac.milp`` must
agree with these functions on every one-hot assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fdisac.beams import Codebook, Codeword
from fdisac.channels import ChannelSet


@dataclass(frozen=True)
class SlotAssignment:
    """Mode and beams of a single timeslot.

    A well-formed slot carries a transmit index exactly when it is active
    and a receive index exactly when it senses.
    """

    comm_on: bool = False
    sense_on: bool = False
    tx_index: int | None = None
    rx_index: int | None = None

    @property
    def active(self) -> bool:
        return self.comm_on or self.sense_on

    @classmethod
    def idle(cls) -> SlotAssignment:
        return cls()

    @classmethod
    def comm(cls, tx_index: int) -> SlotAssignment:
        return cls(True, False, tx_index, None)

    @classmethod
    def sense(cls, tx_index: int, rx_index: int) -> SlotAssignment:
        return cls(False, True, tx_index, rx_index)

    @classmethod
    def shared(cls, tx_index: int, rx_index: int) -> SlotAssignment:
        return cls(True, True, tx_index, rx_index)


def _weights(cw) -> np.ndarray:
    return cw.weights if isinstance(cw, Codeword) else np.asarray(cw)


def comm_gain(h_bar: np.ndarray, tx) -> float:
    """Noise-normalized beamforming gain |h_bar^H t|^2."""
    return float(abs(np.vdot(h_bar, _weights(tx))) ** 2)


def comm_rate_bits(h_bar: np.ndarray, tx, bandwidth_hz: float, slot_s: float) -> float:
    """Bits delivered in one slot: W T log2(1 + |h_bar^H t|^2)."""
    if not bandwidth_hz > 0 or not slot_s > 0:
        raise ValueError("bandwidth_hz and slot_s must be positive")
    return bandwidth_hz * slot_s * float(np.log2(1.0 + comm_gain(h_bar, tx)))


def _beams(assignment: SlotAssignment, tx_cb: Codebook, rx_cb: Codebook):
    if not assignment.sense_on:
        raise ValueError("sensing SINR is undefined on a slot without sensing")
    if assignment.tx_index is None or assignment.rx_index is None:
        raise ValueError("a sensing slot needs both a transmit and a receive codeword")
    return tx_cb[assignment.tx_index].weights, rx_cb[assignment.rx_index].weights


def sinr_terms(channels: ChannelSet, t: np.ndarray, r: np.ndarray) -> tuple[float, float, float]:
    """(|r^H A t|^2, |r^H Q t|^2, sigma_sen^2 ||r||^2) for a beam pair."""
    target = abs(np.vdot(r, channels.steering_outer @ t)) ** 2
    leak = abs(np.vdot(r, channels.si_matrix @ t)) ** 2
    noise = channels.sensing.noise_power_w * float(np.vdot(r, r).real)
    return float(target), float(leak), noise


def sensing_sinr(
    channels: ChannelSet, assignment: SlotAssignment, upsilon: float, tx_cb: Codebook, rx_cb: Codebook
) -> float:
    """|r^H G t|^2 / (|r^H R t|^2 + sigma_sen^2 ||r||^2) with G = psi A, R = upsilon Q."""
    if upsilon < 0:
        raise ValueError(f"upsilon must be non-negative, got {upsilon}")
    t, r = _beams(assignment, tx_cb, rx_cb)
    target, leak, noise = sinr_terms(channels, t, r)
    psi = channels.sensing.reflection_coeff
    return psi**2 * target / (upsilon**2 * leak + noise)


def worst_case_sinr(channels: ChannelSet, assignment: SlotAssignment, tx_cb: Codebook, rx_cb: Codebook) -> float:
    return sensing_sinr(channels, assignment, channels.si.worst_case, tx_cb, rx_cb)


def robust_sinr_feasible(
    channels: ChannelSet, assignment: SlotAssignment, tx_cb: Codebook, rx_cb: Codebook
) -> bool:
    """Whether the SINR threshold holds for every SI factor in the uncertainty set.

    The worst case sits at ``nominal + radius``, which gives the closed form
    |r^H A t|^2 >= (Lambda/psi^2) ((nominal+radius)^2 |r^H Q t|^2 + sigma^2 ||r||^2).
    """
    t, r = _beams(assignment, tx_cb, rx_cb)
    target, leak, noise = sinr_terms(channels, t, r)
    s = channels.sensing
    rhs = s.sinr_threshold / s.reflection_coeff**2 * (channels.si.worst_case**2 * leak + noise)
    return bool(target >= rhs)


@dataclass
class ScheduleReport:
    total_bits: float
    feasible: bool
    violation: str | None = None
    slot_bits: list[float] = field(default_factory=list)
    worst_sinr: list[float] = field(default_factory=list)


def evaluate_schedule(
    channels: ChannelSet,
    schedule: list[SlotAssignment],
    tx_cb: Codebook,
    rx_cb: Codebook,
    bandwidth_hz: float,
    slot_s: float,
    min_sensing: int,
    n_slots: int,
) -> ScheduleReport:
    """Throughput and feasibility of a complete schedule.

    Infeasibility is returned, never raised. ``violation`` names the first
    failed constraint in the order C4, C6, C9, C13, C12, with the slot index
    where one applies.
    """
    if len(schedule) != n_slots:
        raise ValueError(f"schedule has {len(schedule)} slots, expected {n_slots}")

    slot_bits = []
    for a in schedule:
        bits = 0.0
        if a.comm_on and a.tx_index is not None and 0 <= a.tx_index < len(tx_cb):
            bits = comm_rate_bits(channels.h_bar, tx_cb[a.tx_index], bandwidth_hz, slot_s)
        slot_bits.append(bits)
    total = float(sum(slot_bits))

    violation = None
    if sum(a.active for a in schedule) > n_slots:
        violation = "C4"
    if violation is None:
        for s, a in enumerate(schedule):
            if (a.tx_index is not None) != a.active or (
                a.tx_index is not None and not 0 <= a.tx_index < len(tx_cb)
            ):
                violation = f"C6 (slot {s})"
                break
            if (a.rx_index is not None) != a.sense_on or (
                a.rx_index is not None and not 0 <= a.rx_index < len(rx_cb)
            ):
                violation = f"C9 (slot {s})"
                break
    if violation is None and sum(a.sense_on for a in schedule) < min_sensing:
        violation = "C13"


    well_formed = violation is None or violation == "C13"
    worst = []
    for s, a in enumerate(schedule):
        if a.sense_on and well_formed:
            worst.append(worst_case_sinr(channels, a, tx_cb, rx_cb))
            if violation is None and not robust_sinr_feasible(channels, a, tx_cb, rx_cb):
                violation = f"C12 (slot {s})"
        else:
            worst.append(float("nan"))

    return ScheduleReport(total, violation is None, violation, slot_bits, worst)
