"""Acceptance suite: one test per shipping criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Protocol shared by the sweep criteria: 1000 random 20-bit sequences from the
default seed, one Poisson-fidelity trace per sequence (20000 bits total),
thresholds optimized analytically on an integer grid, empirical errors
measured at the optimized threshold.  Standard errors are binomial,
``sqrt(p*(1-p)/n_bits)``, computed from the analytic probability.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

import molcomm.simulation as sim_mod
from molcomm import (
    ChannelParams,
    DEFAULT_SEED,
    SimConfig,
    expected_single_release,
    generate_sequences,
    hitting_probability,
    make_detector,
    measure_ber,
    optimal_threshold,
    simulate_particles,
    stats,
)
from molcomm.cli import _search_threshold

ALL_KINDS = ["single-sample", "energy", "async-peak", "energy-df", "async-peak-df"]
N_BITS = 20_000  # 1000 sequences x 20 bits


def report(number, name, ok, detail):
    print(f"[acceptance] criterion {number} ({name}): {'PASS' if ok else 'FAIL'} :: {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


def binom_se(p, n=N_BITS):
    return math.sqrt(max(p * (1.0 - p), 1e-300) / n)


@pytest.fixture(scope="module")
def sim():
    return SimConfig()


@pytest.fixture(scope="module")
def fig_sync(params40, sequences40):
    """Optimal thresholds and analytic minima, synchronized 40 ms link."""
    out = {}
    for kind in ALL_KINDS:
        det = make_detector(kind, params40)
        tau, err = optimal_threshold(det, sequences40, 0)
        out[kind] = (det, tau, err)
    return out


def test_criterion_1_channel_peak(params40):
    peak = expected_single_release(params40, 1)
    ok_analytic = abs(peak - 6.16) <= 0.01

    single = ChannelParams(0.5e-6, 5e-6, 1e-10, 0.04, 5, 1, 20000)
    cfg = SimConfig(fidelity="particle", particle_substeps=1)
    rng = np.random.default_rng(np.random.SeedSequence(DEFAULT_SEED, spawn_key=(2, 0)))
    reps = 1000
    total = 0.0
    for _ in range(reps):
        total += simulate_particles(single, [1], 0, cfg, rng)[0]
    particle_peak = total / reps
    rel = abs(particle_peak - peak) / peak
    ok_particle = rel <= 0.05
    report(
        1, "channel peak",
        ok_analytic and ok_particle,
        f"analytic peak {peak:.4f} (target 6.16 +/- 0.01), particle mean "
        f"{particle_peak:.4f} over {reps} runs (rel {100*rel:.2f}%, limit 5%)",
    )


def test_criterion_2_tail_ratio(params40):
    ratio = hitting_probability(params40, 5) / hitting_probability(params40, 1)
    report(
        2, "tail ratio",
        abs(ratio - 0.312) <= 0.005,
        f"response at 200 ms over peak = {ratio:.5f} (target 0.312 +/- 0.005)",
    )


def test_criterion_3_synchronized_minima(fig_sync, sequences40, sim):
    brackets = {
        "single-sample": (0.09, None),
        "async-peak": (None, 0.07),
        "async-peak-df": (None, 0.05),
        "energy-df": (0.005, 0.012),
    }
    details, ok = [], True
    for kind in ALL_KINDS:
        det, tau, analytic = fig_sync[kind]
        lo, hi = brackets.get(kind, (None, None))
        if lo is not None and not analytic > lo:
            ok = False
        if hi is not None and not analytic < hi:
            ok = False
        empirical = measure_ber(det, sequences40, 0, tau, sim).average
        sigma = abs(empirical - analytic) / binom_se(analytic)
        if sigma > 3.0:
            ok = False
        details.append(f"{kind}: tau*={tau:.0f} analytic={analytic:.4f} "
                       f"empirical={empirical:.4f} ({sigma:.1f} se)")
    report(3, "synchronized minima", ok, "; ".join(details))


def test_criterion_4_offset_crossover(params40, sequences40, sim):
    """At 40 ms sampling the feedback peak detector must beat the feedback
    energy detector for offsets of 3, 4 and 5 samples (over 100 ms).

    Note: at an offset of 5 samples (one full symbol) no window contains any
    current-bit signal, so both detectors sit at chance level and the strict
    comparison there reflects realization noise only.
    """
    details, ok = [], True
    for delta in (3, 4, 5):
        values = {}
        for kind in ("async-peak-df", "energy-df"):
            det = make_detector(kind, params40)
            tau, _ = optimal_threshold(det, sequences40, delta)
            values[kind] = measure_ber(det, sequences40, delta, tau, sim).average
        below = values["async-peak-df"] < values["energy-df"]
        if not below:
            ok = False
        details.append(
            f"offset {delta}: peak-df {values['async-peak-df']:.4f} "
            f"{'<' if below else '>='} energy-df {values['energy-df']:.4f}"
        )
    report(4, "offset crossover", ok, "; ".join(details))


def test_criterion_5_offset_resilience(params8, sequences8, sim):
    """At 8 ms sampling: the single-sample detector collapses once the offset
    reaches its sampling position, while the peak detectors stay within twice
    their synchronized error at an offset of 5 samples.

    Note: the model's true decay factor for the feedback peak detector is
    about 2.1-2.2 (the receiver's zero-offset interference estimate skews 40
    ms against the actual arrivals), slightly outside the asserted factor of
    2; the plain peak detector sits comfortably inside it.
    """
    details, ok = [], True

    det = make_detector("single-sample", params8)
    for delta in (5, 6, 10, 15):
        tau, _ = optimal_threshold(det, sequences8, delta)
        err = measure_ber(det, sequences8, delta, tau, sim).average
        if not err >= 0.4:
            ok = False
        details.append(f"single-sample offset {delta}: {err:.3f}")

    for kind in ("async-peak", "async-peak-df"):
        det = make_detector(kind, params8)
        errs = {}
        for delta in (0, 5):
            tau, _ = optimal_threshold(det, sequences8, delta)
            errs[delta] = measure_ber(det, sequences8, delta, tau, sim).average
        ratio = errs[5] / errs[0]
        if not ratio <= 2.0:
            ok = False
        details.append(f"{kind}: {errs[0]:.4f} -> {errs[5]:.4f} (x{ratio:.2f}, limit x2)")
    report(5, "offset resilience", ok, "; ".join(details))


def test_criterion_6_samples_trend(params40, sim):
    """At zero offset the single-sample detector stops improving beyond 5
    samples per symbol (same physical sampling time), while every other
    detector strictly improves as the symbol is sampled more finely.

    Strict improvement is asserted on the analytic optima (the feedback
    energy detector reaches error levels no 20000-bit measurement can
    resolve); the measurements are cross-checked against the analysis under
    genie feedback, the conditioning the closed form assumes.
    """
    m_values = [2, 5, 10, 25, 50]
    analytic = {kind: [] for kind in ALL_KINDS}
    empirical = {kind: [] for kind in ALL_KINDS}
    for m in m_values:
        channel = replace(params40, samples_per_bit=m, sample_period=0.2 / m)
        seqs = generate_sequences(channel, 1000, DEFAULT_SEED)
        for kind in ALL_KINDS:
            det = make_detector(kind, channel)
            tau, err = _search_threshold(det, seqs, 0, np.arange(0, 101.0))
            analytic[kind].append(err)
            empirical[kind].append(
                measure_ber(det, seqs, 0, tau, sim, feedback="genie").average
            )

    details, ok = [], True

    ss_ana = analytic["single-sample"][1:]
    if not np.allclose(ss_ana, ss_ana[0], rtol=1e-9):
        ok = False
    ss_emp = empirical["single-sample"][1:]
    for value in ss_emp[1:]:
        if abs(value - ss_emp[0]) > 3 * math.sqrt(2) * binom_se(ss_ana[0]):
            ok = False
    details.append(
        "single-sample constant for M>=5: analytic "
        + "/".join(f"{v:.4f}" for v in ss_ana)
        + " empirical " + "/".join(f"{v:.4f}" for v in ss_emp)
    )

    for kind in ("async-peak", "async-peak-df", "energy", "energy-df"):
        values = analytic[kind]
        strictly = all(b < a for a, b in zip(values, values[1:]))
        if not strictly:
            ok = False
        within = all(
            abs(e - a) <= 3 * binom_se(a)
            for a, e in zip(values, empirical[kind])
        )
        if not within:
            ok = False
        details.append(
            f"{kind} improving: " + ">".join(f"{v:.2e}" for v in values)
            + ("" if within else " (genie measurement off)")
        )
    report(6, "samples trend", ok, "; ".join(details))


def test_criterion_7_poisson_cdf_oracle():
    means = np.round(np.arange(0.1, 100.0 + 1e-9, 0.1), 10)
    thresholds = np.arange(0, 301)
    worst = 0.0
    for mu in means:
        # independent oracle: pmf recurrence accumulated in order
        pmf = np.empty(301)
        pmf[0] = math.exp(-mu)
        for i in range(1, 301):
            pmf[i] = pmf[i - 1] * mu / i
        oracle = np.minimum(np.cumsum(pmf), 1.0)
        got = stats.poisson_cdf(thresholds, float(mu))
        worst = max(worst, float(np.max(np.abs(got - oracle))))
    report(
        7, "poisson cdf oracle", worst <= 1e-10,
        f"max |cdf - pmf summation| = {worst:.2e} over {means.size}x301 grid (limit 1e-10)",
    )


def test_criterion_8_exceedance_vs_monte_carlo():
    rng = np.random.default_rng(2719)
    n_draws = 1_000_000
    checked = 0
    worst = 0.0
    details = []
    while checked < 50:
        m = int(rng.integers(1, 6))
        means = rng.uniform(0.0, 6.0, size=m)
        shifts = np.where(rng.random(m) < 0.5, 0.0, rng.uniform(0.1, 3.9, m))
        tau = float(rng.integers(0, 9)) + (0.5 if rng.random() < 0.3 else 0.0)
        use_sum = checked % 2 == 1
        if use_sum:
            shift = float(shifts.sum())
            exact = stats.sum_exceed_prob(means, shift, tau)
        else:
            exact = stats.max_exceed_prob(means, shifts, tau)
        if not 0.001 < exact < 0.999:
            continue
        draws = rng.poisson(means, size=(n_draws, m))
        if use_sum:
            est = float(np.mean(draws.sum(axis=1) - shift >= tau))
        else:
            est = float(np.mean((draws - shifts).max(axis=1) >= tau))
        se = math.sqrt(exact * (1 - exact) / n_draws)
        sigma = abs(est - exact) / se
        worst = max(worst, sigma)
        if sigma > 3.0:
            details.append(
                f"case {checked} ({'sum' if use_sum else 'max'}): exact {exact:.5f} "
                f"mc {est:.5f} ({sigma:.1f} se)"
            )
        checked += 1
    report(
        8, "exceedance vs monte carlo",
        worst <= 3.0,
        f"50 randomized cases, 1e6 draws each, worst deviation {worst:.2f} se"
        + ("; " + "; ".join(details) if details else ""),
    )


def test_criterion_9_binomial_approximation(fig_sync, sequences40, sim):
    det, tau, analytic = fig_sync["async-peak"]
    poisson_err = measure_ber(det, sequences40, 0, tau, sim).average
    binomial_err = measure_ber(
        det, sequences40, 0, tau, replace(sim, fidelity="binomial")
    ).average
    se = math.sqrt(2.0) * binom_se(analytic)
    sigma = abs(binomial_err - poisson_err) / se
    report(
        9, "binomial approximation", sigma <= 3.0,
        f"poisson {poisson_err:.4f} vs binomial {binomial_err:.4f} ({sigma:.1f} se)",
    )


def test_criterion_10_exact_invariants(params40, sequences40, sim):
    rng = np.random.default_rng(55)
    traces = rng.poisson(2.0, size=(64, 100))
    zeros = np.zeros((64, 20), dtype=int)
    collapse = True
    for df_kind, plain_kind in (("async-peak-df", "async-peak"), ("energy-df", "energy")):
        df = make_detector(df_kind, params40, threshold=4)
        plain = make_detector(plain_kind, params40, threshold=4)
        if not np.array_equal(df.decode(traces, feedback_bits=zeros), plain.decode(traces)):
            collapse = False

    det = make_detector("async-peak-df", params40, threshold=4)
    deterministic = np.array_equal(det.predict(traces), det.predict(traces))
    r1 = measure_ber(det, sequences40[:200], 0, 4.0, sim)
    r2 = measure_ber(det, sequences40[:200], 0, 4.0, sim)
    deterministic = deterministic and np.array_equal(r1.per_bit, r2.per_bit)

    report(
        10, "exact invariants",
        collapse and deterministic,
        f"feedback collapse exact: {collapse}; simulation determinism exact: {deterministic}",
    )
