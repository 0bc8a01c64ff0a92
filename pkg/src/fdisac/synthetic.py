"""Random small problem instances built from the physical models.

Used by the property-based tests and the solver cross-checks: codebooks are
random direction/beamwidth subsets of the default ones, channels are fresh
Rician draws, the arrays sit side by side at a random short distance so the
residual SI actually matters, and the SINR threshold is placed at a random
quantile of the achievable worst-case SINRs (sometimes above all of them).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fdisac.beams import DEFAULT_DIRECTIONS, RX_BEAMWIDTHS, TX_BEAMWIDTHS, ArrayGeometry, Codebook, build_codebook
from fdisac.channels import (
    ChannelSet,
    CommChannelParams,
    SensingParams,
    SiUncertainty,
    build_channel_set,
    rician_channel,
)
from fdisac.metrics import SlotAssignment
from fdisac.milp import CoefficientTable, precompute


@dataclass(frozen=True, eq=False)
class Instance:
    channels: ChannelSet
    tx_cb: Codebook
    rx_cb: Codebook
    coeffs: CoefficientTable
    n_slots: int
    min_sensing: int
    bandwidth_hz: float = 200e6
    slot_s: float = 1e-3


def _random_codebook(rng, geometry, beamwidths, max_size, power) -> Codebook:
    n_dir = int(rng.integers(1, min(3, max_size) + 1))
    n_bw = int(rng.integers(1, min(len(beamwidths), max_size // n_dir) + 1))
    dirs = np.sort(rng.choice(DEFAULT_DIRECTIONS, n_dir, replace=False))
    bws = [beamwidths[i] for i in np.sort(rng.choice(len(beamwidths), n_bw, replace=False))]
    return build_codebook(geometry, dirs, bws, power)


def random_instance(
    rng: np.random.Generator, max_tx: int = 6, max_rx: int = 6, max_slots: int = 3,
    bandwidth_hz: float = 200e6, slot_s: float = 1e-3,
) -> Instance:
    tx = ArrayGeometry(8)
    rx = ArrayGeometry(16, axis_offset=float(rng.uniform(0.01, 0.3)))
    tx_cb = _random_codebook(rng, tx, TX_BEAMWIDTHS, max_tx, 1.0)
    rx_cb = _random_codebook(rng, rx, RX_BEAMWIDTHS, max_rx, 0.25)

    comm = CommChannelParams(
        k_factor=float(rng.uniform(0, 100)), los_angle_deg=float(rng.uniform(60, 120)),
        distance_m=float(rng.uniform(20, 200)),
    )
    h = rician_channel(tx, comm, rng)
    nominal = float(rng.uniform(0, 0.8))
    si = SiUncertainty(nominal, float(rng.uniform(0, 0.2)))
    sensing = SensingParams(target_angle_deg=float(rng.uniform(55, 125)),
                            reflection_coeff=float(rng.uniform(3e-4, 1e-3)))
    channels = build_channel_set(tx, rx, comm, sensing, si, h, layout_angle_deg=90.0)

    # place the threshold among the achievable worst-case SINRs
    probe = precompute(channels, tx_cb, rx_cb, bandwidth_hz, slot_s)
    sinr = np.array([[probe.worst_sinr(b, c) for c in range(probe.n_rx)] for b in range(probe.n_tx)])
    q = rng.uniform(0, 1.25)
    lam = float(np.quantile(sinr, q)) if q <= 1 else float(sinr.max()) * 1.5
    lam = max(lam, 1e-6)
    channels = channels.with_sensing(sinr_threshold=lam)
    coeffs = probe.with_scenario(sinr_threshold=lam)

    n_slots = int(rng.integers(1, max_slots + 1))
    min_sensing = int(rng.integers(0, n_slots + 1))
    channels = channels.with_sensing(min_sensing_slots=min_sensing)
    return Instance(channels, tx_cb, rx_cb, coeffs, n_slots, min_sensing, bandwidth_hz, slot_s)


def random_schedule(rng: np.random.Generator, inst: Instance, p_malformed: float = 0.0):
    """Uniform random per-slot modes and indices; ``p_malformed`` corrupts a slot's mode/index pairing."""
    T, R = len(inst.tx_cb), len(inst.rx_cb)
    out = []
    for _ in range(inst.n_slots):
        comm, sense = bool(rng.integers(2)), bool(rng.integers(2))
        tx = int(rng.integers(T)) if comm or sense else None
        rx = int(rng.integers(R)) if sense else None
        if rng.random() < p_malformed:
            kind = int(rng.integers(3))
            if kind == 0:
                tx = None if tx is not None else int(rng.integers(T))
            elif kind == 1:
                rx = None if rx is not None else int(rng.integers(R))
            else:
                comm, sense = (not comm, sense) if rng.integers(2) else (comm, not sense)
        out.append(SlotAssignment(comm, sense, tx, rx))
    return out
