"""Deterministic diffusion channel model for a point source and passive spherical receiver.

All quantities are slot-indexed: time is divided into sampling slots of
duration ``sample_period`` and slot ``k`` refers to time ``k * sample_period``
on the transmitter's clock.  The transmitter releases ``molecules_per_one``
molecules at the start of slot ``l * samples_per_bit`` for every 1-bit ``l``,
and the receiver counts molecules inside its volume once per slot.
"""

from dataclasses import dataclass
from math import pi

import numpy as np

__all__ = [
    "ChannelParams",
    "hitting_probability",
    "expected_single_release",
    "expected_signal",
    "expected_isi",
    "peak_sample_index",
    "single_release_profile",
    "superposed_means",
    "observed_means",
]


@dataclass(frozen=True)
class ChannelParams:
    """Physical and protocol constants of one transmitter/receiver link.

    Parameters
    ----------
    rx_radius : float
        Receiver sphere radius [m].
    distance : float
        Distance from the point transmitter to the receiver center [m].
        Must exceed ``rx_radius`` (transmitter outside the receiver).
    diffusion : float
        Diffusion coefficient of the signalling molecule [m^2/s].
    sample_period : float
        Duration of one sampling slot [s].
    samples_per_bit : int
        Number of sampling slots per symbol interval.
    seq_length : int
        Number of bits per transmitted sequence.
    molecules_per_one : int
        Molecules released for each 1-bit.
    bit_one_prior : float
        Prior probability of a 1-bit (the 0-bit prior is the complement).
    """

    rx_radius: float
    distance: float
    diffusion: float
    sample_period: float
    samples_per_bit: int
    seq_length: int
    molecules_per_one: int
    bit_one_prior: float = 0.5

    def __post_init__(self):
        for name in ("rx_radius", "distance", "diffusion", "sample_period"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.distance > self.rx_radius:
            raise ValueError("distance must exceed rx_radius")
        for name in ("samples_per_bit", "seq_length", "molecules_per_one"):
            value = getattr(self, name)
            if not (isinstance(value, (int, np.integer)) and value >= 1):
                raise ValueError(f"{name} must be an integer >= 1")
        if not 0.0 < self.bit_one_prior < 1.0:
            raise ValueError("bit_one_prior must lie strictly between 0 and 1")

    @property
    def rx_volume(self) -> float:
        """Receiver sphere volume [m^3]."""
        return 4.0 / 3.0 * pi * self.rx_radius**3

    @property
    def bit_zero_prior(self) -> float:
        return 1.0 - self.bit_one_prior

    @property
    def n_samples(self) -> int:
        """Total number of sampling slots in one sequence."""
        return self.samples_per_bit * self.seq_length


def _as_slot_array(k):
    """Validate slot indices: integer-valued and nonnegative."""
    arr = np.asarray(k)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("sample index must be integer-valued")
        arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError("sample index must be nonnegative")
    return arr


def hitting_probability(params: ChannelParams, k):
    """Probability that one released molecule is inside the receiver at slot ``k``.

    Evaluates ``V_RX / (4*pi*D*k*dt)^(3/2) * exp(-d^2 / (4*D*k*dt))`` for
    ``k >= 1``.  The value at ``k = 0`` is defined as exactly 0: at the
    release instant the impulse has not spread, and the transmitter sits
    outside the receiver.

    Accepts a scalar or an array of slot indices; rejects negative indices.
    """
    arr = _as_slot_array(k)
    t = arr * params.sample_period
    with np.errstate(divide="ignore", invalid="ignore"):
        spread = (4.0 * pi * params.diffusion * t) ** 1.5
        prob = params.rx_volume / spread * np.exp(
            -params.distance**2 / (4.0 * params.diffusion * t)
        )
    prob = np.where(arr == 0, 0.0, prob)
    if np.isscalar(k) or arr.ndim == 0:
        return float(prob)
    return prob


def expected_single_release(params: ChannelParams, k):
    """Expected molecule count at slot ``k`` from a single release at slot 0."""
    return params.molecules_per_one * hitting_probability(params, k)


def single_release_profile(params: ChannelParams, upper: int) -> np.ndarray:
    """Expected single-release counts for slots ``0..upper`` as an array."""
    return expected_single_release(params, np.arange(upper + 1))


def superposed_means(params: ChannelParams, bits) -> np.ndarray:
    """Expected superposed signal over slots ``1..M*L``.

    Entry ``i`` of the returned array is the mean count at transmitter slot
    ``i + 1``, summing the single-release response of every 1-bit released
    at or before that slot.
    """
    bits = check_bits(bits, params.seq_length)
    m, total = params.samples_per_bit, params.n_samples
    profile = single_release_profile(params, total)
    means = np.zeros(total + 1)
    for l in np.flatnonzero(bits):
        start = l * m
        means[start:] += profile[: total + 1 - start]
    return means[1:]


def expected_signal(params: ChannelParams, bits, k):
    """Mean observed count at transmitter slot ``k`` under bit sequence ``bits``.

    The signal is defined as exactly 0 outside slots ``1..M*L`` (including
    windows that an offset receiver clips past either edge).
    """
    means = superposed_means(params, bits)
    arr = np.asarray(k)
    valid = (arr >= 1) & (arr <= params.n_samples)
    idx = np.where(valid, arr - 1, 0)
    out = np.where(valid, means[idx], 0.0)
    if np.isscalar(k) or arr.ndim == 0:
        return float(out)
    return out


def expected_isi(params: ChannelParams, decided_prefix, j):
    """Average interference the receiver expects at its sample index ``j``.

    ``decided_prefix`` holds the decisions for all bits before the one being
    decoded.  The receiver assumes its clock matches the transmitter's, so
    each decided 1-bit ``n`` contributes the single-release mean at lag
    ``j - n*M``.
    """
    prefix = np.asarray(decided_prefix, dtype=np.int64)
    if prefix.ndim != 1:
        raise ValueError("decided_prefix must be one-dimensional")
    if prefix.size and not np.all((prefix == 0) | (prefix == 1)):
        raise ValueError("decided_prefix entries must be 0 or 1")
    arr = np.asarray(j)
    scalar = np.isscalar(j) or arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.zeros(arr.shape, dtype=float)
    m = params.samples_per_bit
    for n in np.flatnonzero(prefix):
        lag = arr - n * m
        mask = lag >= 1
        if np.any(mask):
            out[mask] += expected_single_release(params, lag[mask])
    return float(out[0]) if scalar else out


def peak_sample_index(params: ChannelParams) -> int:
    """Window position (1-based, in ``1..M``) where the largest single-release
    mean is expected.  Ties break toward the smaller index."""
    profile = single_release_profile(params, params.samples_per_bit)
    return int(np.argmax(profile[1:])) + 1


def check_bits(bits, seq_length: int) -> np.ndarray:
    """Validate a bit sequence: binary entries, exactly ``seq_length`` long."""
    arr = np.asarray(bits, dtype=np.int64)
    if arr.ndim != 1 or arr.size != seq_length:
        raise ValueError(f"bit sequence must have length {seq_length}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bit sequence entries must be 0 or 1")
    return arr


def observed_means(params: ChannelParams, bits, offset: int = 0) -> np.ndarray:
    """Mean counts seen by a receiver whose clock is ``offset`` samples off.

    Entry ``i`` is the mean of the receiver's sample ``i + 1``, which lands
    on transmitter slot ``i + 1 - offset``.  Positive offsets therefore pull
    every window toward earlier slots (previous-symbol territory); negative
    offsets push windows later, into following symbols.  Slots outside
    ``1..M*L`` contribute the zero signal.
    """
    check_offset(params, offset)
    readings = np.arange(1, params.n_samples + 1)
    return expected_signal(params, bits, readings - offset)


def check_offset(params: ChannelParams, offset: int) -> int:
    if not isinstance(offset, (int, np.integer)):
        raise ValueError("offset must be an integer number of samples")
    if abs(int(offset)) >= params.n_samples:
        raise ValueError(
            f"|offset| must be smaller than M*L = {params.n_samples} samples"
        )
    return int(offset)
