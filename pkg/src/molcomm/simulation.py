"""Monte Carlo trace generation and empirical bit-error measurement.

Three fidelities are available:

* ``poisson`` -- each sample is an independent Poisson draw around the
  superposed mean signal; this is exactly the model the analysis assumes.
* ``binomial`` -- each release contributes an independent Binomial draw per
  sample (the pre-approximation molecule-counting model), so per-sample
  variance sits below the Poisson fidelity's.
* ``particle`` -- molecules perform independent 3-D Brownian motion from the
  transmitter and are counted inside the receiver sphere at sample times.

Reproducibility: every random quantity derives from a single root seed.
Sequence bits come from the child stream ``spawn_key=(0,)``; the traces for
sequence ``i`` come from the child stream ``spawn_key=(1, i)``, with all of
that sequence's realizations drawn as one block from it.  Work on distinct
sequences can therefore run concurrently without changing any result.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import clone

from .analysis import ErrorReport
from .channel import ChannelParams, hitting_probability, observed_means
from .detectors import TraceDetector
from .validation import check_bit_matrix, check_bits, check_offset

__all__ = [
    "DEFAULT_SEED",
    "SimConfig",
    "generate_sequences",
    "sequence_stream",
    "trace_stream",
    "draw_trace_poisson",
    "draw_trace_binomial",
    "simulate_particles",
    "draw_traces",
    "measure_ber",
    "empirical_threshold_sweep",
]

DEFAULT_SEED = 12345

_FIDELITIES = ("poisson", "binomial", "particle")


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings: fidelity, per-sequence realizations, root seed."""

    fidelity: str = "poisson"
    realizations: int = 1
    rng_seed: int = DEFAULT_SEED
    particle_substeps: int = 10

    def __post_init__(self):
        if self.fidelity not in _FIDELITIES:
            raise ValueError(f"fidelity must be one of {_FIDELITIES}")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.particle_substeps < 1:
            raise ValueError("particle_substeps must be >= 1")


def sequence_stream(rng_seed: int) -> np.random.Generator:
    """Child generator that produces the random bit sequences."""
    return np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(0,)))


def trace_stream(rng_seed: int, sequence_index: int) -> np.random.Generator:
    """Child generator that produces all traces of one sequence."""
    return np.random.default_rng(
        np.random.SeedSequence(rng_seed, spawn_key=(1, sequence_index))
    )


def generate_sequences(params: ChannelParams, count: int, rng_seed: int) -> np.ndarray:
    """Draw ``count`` random bit sequences using the channel's bit-1 prior."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = sequence_stream(rng_seed)
    return (rng.random((count, params.seq_length)) < params.bit_one_prior).astype(np.int64)


def draw_traces(params: ChannelParams, bits, offset: int, rng: np.random.Generator,
                count: int = 1, fidelity: str = "poisson",
                particle_substeps: int = 10) -> np.ndarray:
    """Draw ``count`` observation traces, shape ``(count, M*L)``."""
    if fidelity == "poisson":
        mu = observed_means(params, bits, offset)
        return rng.poisson(mu, size=(count, params.n_samples))
    if fidelity == "binomial":
        return _binomial_traces(params, bits, offset, rng, count)
    if fidelity == "particle":
        bits = check_bits(bits, params.seq_length)
        offset = check_offset(params, offset)
        return np.stack(
            [_particle_trace(params, bits, offset, particle_substeps, rng) for _ in range(count)]
        )
    raise ValueError(f"fidelity must be one of {_FIDELITIES}")


def draw_trace_poisson(params: ChannelParams, bits, offset: int,
                       rng: np.random.Generator) -> np.ndarray:
    """One trace with every sample an independent Poisson draw around its mean."""
    return draw_traces(params, bits, offset, rng, count=1, fidelity="poisson")[0]


def _binomial_traces(params, bits, offset, rng, count):
    bits = check_bits(bits, params.seq_length)
    offset = check_offset(params, offset)
    m, total, n_mol = params.samples_per_bit, params.n_samples, params.molecules_per_one
    slots = np.arange(1, total + 1) - offset
    in_block = (slots >= 1) & (slots <= total)
    out = np.zeros((count, total), dtype=np.int64)
    for l in np.flatnonzero(bits):
        lag = slots - l * m
        mask = in_block & (lag >= 1)
        probs = np.zeros(total)
        probs[mask] = hitting_probability(params, lag[mask])
        out += rng.binomial(n_mol, probs, size=(count, total))
    return out


def draw_trace_binomial(params: ChannelParams, bits, offset: int,
                        rng: np.random.Generator) -> np.ndarray:
    """One trace where each release contributes an independent Binomial count
    per sample (the exact counting model the Poisson fidelity approximates)."""
    return _binomial_traces(params, bits, offset, rng, 1)[0]


def _particle_trace(params, bits, offset, substeps, rng):
    m, total = params.samples_per_bit, params.n_samples
    n_mol = params.molecules_per_one
    sigma = np.sqrt(2.0 * params.diffusion * params.sample_period / substeps)
    r2 = params.rx_radius**2
    counts = np.zeros(total + 1, dtype=np.int64)
    for l in np.flatnonzero(bits):
        release_slot = l * m
        pos = np.zeros((n_mol, 3))
        for slot in range(release_slot + 1, total + 1):
            for _ in range(substeps):
                pos += rng.standard_normal((n_mol, 3)) * sigma
            dx = pos[:, 0] - params.distance
            counts[slot] += int(
                np.count_nonzero(dx * dx + pos[:, 1] ** 2 + pos[:, 2] ** 2 <= r2)
            )
    slots = np.arange(1, total + 1) - offset
    valid = (slots >= 1) & (slots <= total)
    return np.where(valid, counts[np.clip(slots, 0, total)], 0)


def simulate_particles(params: ChannelParams, bits, offset: int, config: SimConfig,
                       rng: np.random.Generator) -> np.ndarray:
    """One particle-based trace: molecules released at the transmitter diffuse
    by Gaussian substeps and are counted inside the receiver at sample times.

    Molecules persist indefinitely (unbounded medium, no reactions).  Because
    the sphere is a passive observer polled only at sample instants, the
    substep count does not change the sampled statistics; it is honored
    literally for forward compatibility.
    """
    bits = check_bits(bits, params.seq_length)
    offset = check_offset(params, offset)
    return _particle_trace(params, bits, offset, config.particle_substeps, rng)


def _decode_errors(detector, traces, bits, feedback):
    if feedback == "decided" or not detector.uses_feedback:
        decided = detector.decode(traces)
    elif feedback == "genie":
        genie = np.broadcast_to(bits, (traces.shape[0], bits.size))
        decided = detector.decode(traces, feedback_bits=genie)
    else:
        raise ValueError("feedback must be 'decided' or 'genie'")
    return (decided != bits[None, :]).sum(axis=0)


def measure_ber(detector: TraceDetector, sequences, offset: int, tau: float,
                config: SimConfig, feedback: str = "decided") -> ErrorReport:
    """Empirical error rates from decoding freshly drawn traces.

    Each sequence gets ``config.realizations`` traces from its own child
    stream; decisions use the receiver's realized feedback by default, or the
    true prior bits with ``feedback='genie'`` (for comparison against the
    genie-aided analysis).  Deterministic given ``config.rng_seed``.
    """
    params = detector.channel
    offset = check_offset(params, offset)
    B = check_bit_matrix(sequences, params)
    det = clone(detector)
    det.set_params(threshold=float(tau))
    errors = np.zeros(params.seq_length, dtype=np.int64)
    for i, bits in enumerate(B):
        rng = trace_stream(config.rng_seed, i)
        traces = draw_traces(
            params, bits, offset, rng,
            count=config.realizations, fidelity=config.fidelity,
            particle_substeps=config.particle_substeps,
        )
        errors += _decode_errors(det, traces, bits, feedback)
    trials = B.shape[0] * config.realizations
    per_bit = errors / trials
    return ErrorReport(
        detector=detector.kind,
        threshold=float(tau),
        offset=offset,
        per_bit=per_bit,
        average=float(per_bit.mean()),
        source=config.fidelity,
        n_sequences=B.shape[0],
        rng_seed=config.rng_seed,
        feedback=feedback if detector.uses_feedback else None,
        extra={"realizations": config.realizations},
    )


def empirical_threshold_sweep(detector: TraceDetector, sequences, offset: int,
                              taus, config: SimConfig,
                              feedback: str = "decided") -> np.ndarray:
    """Empirical average error at every threshold, reusing one set of traces.

    Draws the same traces :func:`measure_ber` would draw and decodes them at
    each threshold in ``taus``; returns one average error per threshold.
    """
    params = detector.channel
    offset = check_offset(params, offset)
    B = check_bit_matrix(sequences, params)
    taus = np.asarray(taus, dtype=float)
    errors = np.zeros(taus.size, dtype=np.int64)
    dets = [clone(detector) for _ in taus]
    for det, tau in zip(dets, taus):
        det.set_params(threshold=float(tau))
    for i, bits in enumerate(B):
        rng = trace_stream(config.rng_seed, i)
        traces = draw_traces(
            params, bits, offset, rng,
            count=config.realizations, fidelity=config.fidelity,
            particle_substeps=config.particle_substeps,
        )
        for t, det in enumerate(dets):
            errors[t] += _decode_errors(det, traces, bits, feedback).sum()
    trials = B.shape[0] * config.realizations * params.seq_length
    return errors / trials
