"""Uniform linear arrays, steering vectors and direction/beamwidth codebooks.

Beamwidth is controlled by switching off the outermost elements of the
array and renormalizing, so every codeword of a codebook carries the same
power.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# (beamwidth_deg, n_active) pairs for half-wavelength ULAs, HPBW ~ 101.5 deg / n_active
TX_BEAMWIDTHS = ((13.0, 8), (17.0, 6), (26.0, 4), (60.0, 2))
RX_BEAMWIDTHS = ((6.0, 16), (13.0, 8), (17.0, 6), (26.0, 4))
DEFAULT_DIRECTIONS = tuple(float(d) for d in range(50, 131, 5))


@dataclass(frozen=True)
class ArrayGeometry:
    """A uniform linear array lying on a shared axis.

    ``element_spacing`` is in wavelengths; ``axis_offset`` is the position of
    the array center along the axis in meters.
    """

    n_elements: int
    element_spacing: float = 0.5
    axis_offset: float = 0.0

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise ValueError(f"n_elements must be a positive integer, got {self.n_elements}")
        if not self.element_spacing > 0:
            raise ValueError(f"element_spacing must be positive, got {self.element_spacing}")

    @property
    def phase_positions(self) -> np.ndarray:
        """Element phase offsets 2*pi*spacing*[(-N+1)/2, ..., (N-1)/2]."""
        n = self.n_elements
        return 2 * np.pi * self.element_spacing * (np.arange(n) - (n - 1) / 2)

    def element_positions(self, wavelength: float) -> np.ndarray:
        """Element coordinates along the array axis in meters."""
        n = self.n_elements
        return self.axis_offset + self.element_spacing * wavelength * (np.arange(n) - (n - 1) / 2)


def _check_angle(theta_deg: float) -> None:
    if not 0.0 < theta_deg < 180.0:
        raise ValueError(f"angle must lie in the open interval (0, 180) degrees, got {theta_deg}")


def steering_vector(geometry: ArrayGeometry, theta_deg: float) -> np.ndarray:
    """Unit-norm array response ``exp(j*phi*cos(theta)) / sqrt(N)``."""
    _check_angle(theta_deg)
    phase = geometry.phase_positions * np.cos(np.deg2rad(theta_deg))
    return np.exp(1j * phase) / np.sqrt(geometry.n_elements)


@dataclass(frozen=True, eq=False)
class Codeword:
    index: int
    direction_deg: float
    beamwidth_deg: float
    n_active: int
    weights: np.ndarray = field(repr=False)

    @property
    def power(self) -> float:
        return float(np.vdot(self.weights, self.weights).real)


def active_slice(n_elements: int, n_active: int) -> slice:
    # centered; odd leftover goes to the upper side so ties fall toward lower indices
    start = (n_elements - n_active) // 2
    return slice(start, start + n_active)


def make_codeword(
    geometry: ArrayGeometry,
    direction_deg: float,
    n_active: int,
    power: float,
    *,
    index: int = 0,
    beamwidth_deg: float = float("nan"),
) -> Codeword:
    """Matched beam toward ``direction_deg`` using the ``n_active`` central elements.

    The active entries follow the full-array steering vector at the steering
    direction, the rest are exactly zero, and the weights are scaled so that
    their squared norm equals ``power``.
    """
    _check_angle(direction_deg)
    if int(n_active) != n_active or not 1 <= n_active <= geometry.n_elements:
        raise ValueError(f"n_active must be in [1, {geometry.n_elements}], got {n_active}")
    if not power > 0:
        raise ValueError(f"power must be positive, got {power}")

    sl = active_slice(geometry.n_elements, n_active)
    weights = np.zeros(geometry.n_elements, dtype=complex)
    phase = geometry.phase_positions[sl] * np.cos(np.deg2rad(direction_deg))
    weights[sl] = np.exp(1j * phase) * np.sqrt(power / n_active)
    return Codeword(index, float(direction_deg), float(beamwidth_deg), int(n_active), weights)


@dataclass(frozen=True, eq=False)
class Codebook:
    codewords: tuple[Codeword, ...]
    directions: tuple[float, ...]
    beamwidths: tuple[float, ...]

    def __len__(self):
        return len(self.codewords)

    def __getitem__(self, i) -> Codeword:
        return self.codewords[i]

    def __iter__(self):
        return iter(self.codewords)

    @property
    def matrix(self) -> np.ndarray:
        """Codeword weights stacked as rows, shape (L, N)."""
        return np.stack([cw.weights for cw in self.codewords])

    def position(self, direction_deg: float, beamwidth_deg: float) -> int:
        """Index of the codeword with the given direction and beamwidth."""
        d = self.directions.index(float(direction_deg))
        w = self.beamwidths.index(float(beamwidth_deg))
        return d * len(self.beamwidths) + w


def build_codebook(
    geometry: ArrayGeometry,
    directions,
    beamwidth_map,
    power: float,
) -> Codebook:
    """All (direction, beamwidth) codewords, direction-major, indices from 0.

    ``beamwidth_map`` is a sequence of ``(beamwidth_deg, n_active)`` pairs.
    """
    directions = tuple(float(d) for d in directions)
    beamwidth_map = tuple((float(bw), int(n)) for bw, n in beamwidth_map)
    if not directions:
        raise ValueError("directions must be nonempty")
    if not beamwidth_map:
        raise ValueError("beamwidth_map must be nonempty")
    if len(set(directions)) != len(directions):
        raise ValueError("duplicate directions")
    if any(b <= a for a, b in zip(directions, directions[1:])):
        raise ValueError("directions must be strictly increasing")
    beamwidths = tuple(bw for bw, _ in beamwidth_map)
    if len(set(beamwidths)) != len(beamwidths):
        raise ValueError("duplicate beamwidths")

    codewords = []
    for direction in directions:
        for bw, n_active in beamwidth_map:
            codewords.append(
                make_codeword(geometry, direction, n_active, power, index=len(codewords), beamwidth_deg=bw)
            )
    return Codebook(tuple(codewords), directions, beamwidths)


def beampattern(geometry: ArrayGeometry, weights: np.ndarray, thetas_deg) -> np.ndarray:
    """Power gain |a(theta)^H w|^2 over a grid of angles."""
    thetas = np.asarray(thetas_deg, dtype=float)
    phase = np.outer(np.cos(np.deg2rad(thetas)), geometry.phase_positions)
    response = np.exp(1j * phase) / np.sqrt(geometry.n_elements)
    return np.abs(response.conj() @ weights) ** 2


def half_power_beamwidth(geometry: ArrayGeometry, weights: np.ndarray, step_deg: float = 0.1) -> float:
    """Width in degrees of the contiguous main-lobe region at or above half the peak."""
    grid = np.arange(step_deg, 180.0, step_deg)
    gain = beampattern(geometry, weights, grid)
    peak = int(np.argmax(gain))
    above = gain >= gain[peak] / 2
    lo = peak
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = peak
    while hi < len(grid) - 1 and above[hi + 1]:
        hi += 1
    return float(grid[hi] - grid[lo])
