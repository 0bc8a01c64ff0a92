"""Propagation objects: Rician downlink, monostatic sensing and self-interference."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from fdisac.beams import ArrayGeometry, steering_vector

SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def wavelength_m(carrier_ghz: float) -> float:
    return SPEED_OF_LIGHT / (carrier_ghz * 1e9)


@dataclass(frozen=True)
class CommChannelParams:
    k_factor: float = 100.0
    los_angle_deg: float = 90.0
    distance_m: float = 60.0
    carrier_ghz: float = 41.0
    noise_power_dbw: float = -114.0

    def __post_init__(self):
        if self.k_factor < 0:
            raise ValueError(f"k_factor must be non-negative, got {self.k_factor}")
        if not self.distance_m > 0:
            raise ValueError(f"distance_m must be positive, got {self.distance_m}")

    @property
    def noise_power_w(self) -> float:
        return db_to_linear(self.noise_power_dbw)


@dataclass(frozen=True)
class SensingParams:
    target_angle_deg: float = 90.0
    reflection_coeff: float = 6e-4
    noise_power_dbw: float = -74.0
    sinr_threshold: float = 3.0
    min_sensing_slots: int = 1

    def __post_init__(self):
        if not self.reflection_coeff > 0:
            raise ValueError(f"reflection_coeff must be positive, got {self.reflection_coeff}")
        if not self.sinr_threshold > 0:
            raise ValueError(f"sinr_threshold must be positive, got {self.sinr_threshold}")
        if self.min_sensing_slots < 0:
            raise ValueError(f"min_sensing_slots must be non-negative, got {self.min_sensing_slots}")

    @property
    def noise_power_w(self) -> float:
        return db_to_linear(self.noise_power_dbw)


@dataclass(frozen=True)
class SiUncertainty:
    """Residual SI factor known only up to ``|actual - nominal| <= radius``."""

    nominal: float = 0.0
    radius: float = 0.0
    cap: float = 1.0

    def __post_init__(self):
        if self.nominal < 0:
            raise ValueError(f"nominal SI factor must be non-negative, got {self.nominal}")
        if self.radius < 0:
            raise ValueError(f"uncertainty radius must be non-negative, got {self.radius}")
        if self.nominal + self.radius > self.cap + 1e-12:
            raise ValueError(f"nominal + radius = {self.nominal + self.radius} exceeds cap {self.cap}")

    @property
    def worst_case(self) -> float:
        return self.nominal + self.radius

    @property
    def interval(self) -> tuple[float, float]:
        return max(0.0, self.nominal - self.radius), self.nominal + self.radius


def uma_pathloss_db(distance_m: float, carrier_ghz: float) -> float:
    """Large-scale loss ``28 + 22 log10(l) + 20 log10(f_c)`` with l in m, f_c in GHz."""
    if not distance_m > 0 or not carrier_ghz > 0:
        raise ValueError("distance_m and carrier_ghz must be positive")
    return 28.0 + 22.0 * np.log10(distance_m) + 20.0 * np.log10(carrier_ghz)


def los_component(geometry: ArrayGeometry, angle_deg: float) -> np.ndarray:
    # unit-modulus entries: per-element power 1, like the NLoS part
    return steering_vector(geometry, angle_deg) * np.sqrt(geometry.n_elements)


def rician_channel(geometry: ArrayGeometry, params: CommChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Downlink channel ``h = 10^(-PL/20) * v`` with Rician small-scale fading ``v``."""
    k = params.k_factor
    n = geometry.n_elements
    nlos = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    if np.isinf(k):
        v = los_component(geometry, params.los_angle_deg)
    else:
        v = np.sqrt(k / (k + 1)) * los_component(geometry, params.los_angle_deg) + np.sqrt(1 / (k + 1)) * nlos
    gain = 10.0 ** (-uma_pathloss_db(params.distance_m, params.carrier_ghz) / 20.0)
    return gain * v


def sensing_outer(tx_geom: ArrayGeometry, rx_geom: ArrayGeometry, theta_deg: float) -> np.ndarray:
    """Rank-one monostatic response ``a_rx(theta) a_tx(theta)^H``, shape (N_rx, N_tx)."""
    return np.outer(steering_vector(rx_geom, theta_deg), steering_vector(tx_geom, theta_deg).conj())


def element_distances(
    tx_geom: ArrayGeometry, rx_geom: ArrayGeometry, carrier_ghz: float, layout_angle_deg: float = 0.0
) -> np.ndarray:
    """Pairwise receive/transmit element distances in meters, shape (N_rx, N_tx).

    Both arrays are parallel to the x axis. The transmit array is centered at
    ``(tx.axis_offset, 0)``; the receive center sits at distance
    ``rx.axis_offset - tx.axis_offset`` from it along ``layout_angle_deg``
    (0 = collinear, 90 = side by side).
    """
    lam = wavelength_m(carrier_ghz)
    sep = rx_geom.axis_offset - tx_geom.axis_offset
    ang = np.deg2rad(layout_angle_deg)
    xt = tx_geom.element_positions(lam)
    xr = rx_geom.element_positions(lam) - rx_geom.axis_offset + tx_geom.axis_offset + sep * np.cos(ang)
    yr = sep * np.sin(ang)
    return np.hypot(xr[:, None] - xt[None, :], yr)


def si_channel(
    tx_geom: ArrayGeometry, rx_geom: ArrayGeometry, carrier_ghz: float, layout_angle_deg: float = 0.0
) -> np.ndarray:
    """Near-field spherical-wave SI channel Q, shape (N_rx, N_tx)."""
    lam = wavelength_m(carrier_ghz)
    d = element_distances(tx_geom, rx_geom, carrier_ghz, layout_angle_deg)
    if np.any(d <= 0):
        raise ValueError("transmit and receive elements coincide")
    scale = 1.0 / np.sqrt(tx_geom.n_elements * rx_geom.n_elements)
    return lam / (4 * np.pi * d) * scale * np.exp(-2j * np.pi * d / lam)


def residual_si(q: np.ndarray, upsilon: float) -> np.ndarray:
    if upsilon < 0:
        raise ValueError(f"upsilon must be non-negative, got {upsilon}")
    return upsilon * q


@dataclass(frozen=True, eq=False)
class ChannelSet:
    h: np.ndarray
    h_bar: np.ndarray
    steering_outer: np.ndarray
    si_matrix: np.ndarray
    sensing: SensingParams
    si: SiUncertainty

    @property
    def sensing_channel(self) -> np.ndarray:
        """G = psi * A(theta)."""
        return self.sensing.reflection_coeff * self.steering_outer

    def with_uncertainty(self, si: SiUncertainty) -> ChannelSet:
        return replace(self, si=si)

    def with_sensing(self, **changes) -> ChannelSet:
        """Copy with sensing parameters replaced; ``target_angle_deg`` is not allowed here."""
        if "target_angle_deg" in changes:
            raise ValueError("changing the target angle requires rebuilding steering_outer")
        return replace(self, sensing=replace(self.sensing, **changes))


def build_channel_set(
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    comm: CommChannelParams,
    sensing: SensingParams,
    si: SiUncertainty,
    h: np.ndarray,
    *,
    layout_angle_deg: float = 0.0,
    q: np.ndarray | None = None,
) -> ChannelSet:
    """Assemble a ChannelSet around an already drawn downlink channel ``h``."""
    h = np.asarray(h, dtype=complex)
    if h.shape != (tx_geom.n_elements,):
        raise ValueError(f"h must have shape ({tx_geom.n_elements},), got {h.shape}")
    if q is None:
        q = si_channel(tx_geom, rx_geom, comm.carrier_ghz, layout_angle_deg)
    a = sensing_outer(tx_geom, rx_geom, sensing.target_angle_deg)
    h_bar = h / np.sqrt(comm.noise_power_w)
    return ChannelSet(h, h_bar, a, np.asarray(q, dtype=complex), sensing, si)
