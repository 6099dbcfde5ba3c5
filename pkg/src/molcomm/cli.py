"""Experiment harness.

Four experiment types, each writing a CSV of results plus a sidecar
``<out>.meta.json`` holding the fully resolved configuration and seed so any
row can be replayed bit-identically:

* ``cir``             -- expected and one sampled single-release response.
* ``threshold-sweep`` -- analytic and empirical average error per threshold.
* ``offset-sweep``    -- per clock offset: analytically optimal threshold and
                          the empirical error measured at that threshold.
* ``samples-sweep``   -- the offset-sweep procedure at zero offset, varying
                          the samples per symbol at a fixed symbol duration.

Configs are JSON objects or flat ``key = value`` text; unknown keys are
rejected.  Unset channel keys fall back to the reference parameter set
(0.5 um receiver at 5 um, D = 1e-10 m^2/s, 20-bit sequences, 2e4 molecules
per 1-bit, 40 ms sampling with 5 samples per 200 ms symbol).
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .analysis import optimal_threshold, threshold_sweep
from .channel import ChannelParams, observed_means
from .detectors import DETECTOR_KINDS, make_detector
from .simulation import (
    DEFAULT_SEED,
    SimConfig,
    draw_traces,
    empirical_threshold_sweep,
    generate_sequences,
    measure_ber,
    trace_stream,
)

EXPERIMENTS = ("cir", "threshold-sweep", "offset-sweep", "samples-sweep")

SYMBOL_PERIOD = 0.2  # s; ties sample_period and samples_per_bit defaults

_CHANNEL_DEFAULTS = {
    "rx_radius": 0.5e-6,
    "distance": 5e-6,
    "diffusion": 1e-10,
    "seq_length": 20,
    "molecules_per_one": 20000,
    "bit_one_prior": 0.5,
}

_ALLOWED_KEYS = {
    "experiment", "rx_radius", "distance", "diffusion", "sample_period",
    "samples_per_bit", "seq_length", "molecules_per_one", "bit_one_prior",
    "detectors", "thresholds", "offsets", "samples", "fidelity",
    "realizations", "rng_seed", "particle_substeps", "n_sequences",
    "output_path",
}


class CliError(Exception):
    """Configuration or execution problem reported with a nonzero exit."""


@dataclass
class ExperimentConfig:
    experiment: str
    channel: ChannelParams
    detectors: list
    thresholds: np.ndarray
    offsets: list
    samples: list
    sim: SimConfig
    n_sequences: int
    output_path: str

    def resolved(self) -> dict:
        """Plain-dict echo of every resolved setting (metadata sidecar)."""
        ch = self.channel
        return {
            "experiment": self.experiment,
            "rx_radius": ch.rx_radius,
            "distance": ch.distance,
            "diffusion": ch.diffusion,
            "sample_period": ch.sample_period,
            "samples_per_bit": ch.samples_per_bit,
            "seq_length": ch.seq_length,
            "molecules_per_one": ch.molecules_per_one,
            "bit_one_prior": ch.bit_one_prior,
            "detectors": list(self.detectors),
            "thresholds": [float(t) for t in self.thresholds],
            "offsets": [int(d) for d in self.offsets],
            "offsets_ms": [1e3 * d * ch.sample_period for d in self.offsets],
            "samples": [int(m) for m in self.samples],
            "fidelity": self.sim.fidelity,
            "realizations": self.sim.realizations,
            "rng_seed": self.sim.rng_seed,
            "particle_substeps": self.sim.particle_substeps,
            "n_sequences": self.n_sequences,
            "output_path": self.output_path,
        }


def _parse_flat_value(text: str):
    token = text.strip()
    if "," in token:
        return [_parse_flat_value(part) for part in token.split(",")]
    try:
        return json.loads(token)
    except json.JSONDecodeError:
        return token


def _read_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read config file {path!r}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError(f"config {path!r} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise CliError(f"config {path!r} must hold a JSON object")
        return raw
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise CliError(f"config {path!r} line {lineno}: expected 'key = value'")
        key, _, value = body.partition("=")
        raw[key.strip()] = _parse_flat_value(value)
    return raw


def _coerce(raw, key, kind):
    value = raw[key]
    try:
        if kind == "int":
            out = int(value)
            if out != float(value):
                raise ValueError
            return out
        if kind == "float":
            return float(value)
        if kind == "str":
            if not isinstance(value, str):
                raise ValueError
            return value
        if kind == "list":
            return list(value) if isinstance(value, (list, tuple)) else [value]
    except (TypeError, ValueError):
        pass
    raise CliError(f"config field {key!r} has invalid value {value!r}")


def parse_config(path=None, overrides=None, experiment=None) -> ExperimentConfig:
    """Load, default-fill and validate an experiment configuration.

    ``overrides`` (seed, output path, experiment from the command line) win
    over file contents.  Raises :class:`CliError` with a field-level message
    on any problem.
    """
    raw = _read_config_file(path) if path is not None else {}
    unknown = set(raw) - _ALLOWED_KEYS
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}")
    raw = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    if experiment is not None:
        if "experiment" in raw and raw["experiment"] != experiment:
            raise CliError(
                f"config requests experiment {raw['experiment']!r} but the "
                f"command line selected {experiment!r}"
            )
        raw["experiment"] = experiment
    if "experiment" not in raw:
        raise CliError("no experiment selected")
    if raw["experiment"] not in EXPERIMENTS:
        raise CliError(f"unknown experiment {raw['experiment']!r}; expected one of {EXPERIMENTS}")

    channel_kwargs = {k: _coerce(raw, k, "float") for k in
                      ("rx_radius", "distance", "diffusion", "bit_one_prior") if k in raw}
    for k in ("seq_length", "molecules_per_one"):
        if k in raw:
            channel_kwargs[k] = _coerce(raw, k, "int")
    for k, v in _CHANNEL_DEFAULTS.items():
        channel_kwargs.setdefault(k, v)

    # Sampling grid: unset halves follow the fixed symbol duration.
    has_dt, has_m = "sample_period" in raw, "samples_per_bit" in raw
    if has_dt:
        channel_kwargs["sample_period"] = _coerce(raw, "sample_period", "float")
    if has_m:
        channel_kwargs["samples_per_bit"] = _coerce(raw, "samples_per_bit", "int")
    if has_dt and not has_m:
        m = round(SYMBOL_PERIOD / channel_kwargs["sample_period"])
        channel_kwargs["samples_per_bit"] = max(1, int(m))
    elif has_m and not has_dt:
        channel_kwargs["sample_period"] = SYMBOL_PERIOD / channel_kwargs["samples_per_bit"]
    elif not has_dt and not has_m:
        channel_kwargs["sample_period"] = 0.04
        channel_kwargs["samples_per_bit"] = 5

    try:
        channel = ChannelParams(**channel_kwargs)
    except ValueError as exc:
        raise CliError(f"invalid channel parameters: {exc}") from exc

    detectors = [str(d) for d in _coerce(raw, "detectors", "list")] if "detectors" in raw \
        else sorted(DETECTOR_KINDS)
    bad = [d for d in detectors if d not in DETECTOR_KINDS]
    if bad:
        raise CliError(f"unknown detector kinds: {', '.join(bad)}")
    if not detectors:
        raise CliError("detector list must be nonempty")

    thresholds = np.asarray(
        [float(t) for t in _coerce(raw, "thresholds", "list")] if "thresholds" in raw
        else np.arange(0, 101), dtype=float,
    )
    if thresholds.size == 0 or np.any(thresholds < 0):
        raise CliError("thresholds must be a nonempty list of nonnegative values")

    if "offsets" in raw:
        offsets = [int(d) for d in _coerce(raw, "offsets", "list")]
    elif abs(channel.sample_period - 0.008) < 1e-12:
        offsets = list(range(-6, 16))
    else:
        offsets = list(range(-2, 6))
    for d in offsets:
        if abs(d) >= channel.n_samples:
            raise CliError(
                f"offset {d} invalid: |offset| must be below M*L = {channel.n_samples}"
            )

    samples = [int(m) for m in _coerce(raw, "samples", "list")] if "samples" in raw \
        else [2, 5, 10, 25, 50]
    if any(m < 1 for m in samples):
        raise CliError("samples entries must be >= 1")

    try:
        sim = SimConfig(
            fidelity=_coerce(raw, "fidelity", "str") if "fidelity" in raw else "poisson",
            realizations=_coerce(raw, "realizations", "int") if "realizations" in raw else 1,
            rng_seed=_coerce(raw, "rng_seed", "int") if "rng_seed" in raw else DEFAULT_SEED,
            particle_substeps=_coerce(raw, "particle_substeps", "int")
            if "particle_substeps" in raw else 10,
        )
    except ValueError as exc:
        raise CliError(f"invalid simulation settings: {exc}") from exc

    n_sequences = _coerce(raw, "n_sequences", "int") if "n_sequences" in raw else 1000
    if n_sequences < 1:
        raise CliError("n_sequences must be >= 1")

    output_path = _coerce(raw, "output_path", "str") if "output_path" in raw \
        else f"{raw['experiment']}.csv"

    return ExperimentConfig(
        experiment=raw["experiment"],
        channel=channel,
        detectors=detectors,
        thresholds=thresholds,
        offsets=offsets,
        samples=samples,
        sim=sim,
        n_sequences=n_sequences,
        output_path=output_path,
    )


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _search_threshold(detector, sequences, offset, base_grid):
    """Optimal threshold with automatic grid extension.

    If the minimum lands on the top grid point the integer grid is extended
    (the error rises again for large thresholds, so an interior minimum
    exists); arbitrary user grids are used as given.
    """
    grid = np.sort(np.asarray(base_grid, dtype=float))
    integer_grid = np.allclose(grid, np.rint(grid))
    while True:
        tau, err = optimal_threshold(detector, sequences, offset, grid)
        if not integer_grid or tau < grid[-1] or grid[-1] > 5000:
            return tau, err
        grid = np.arange(0, 2 * int(grid[-1]) + 1, dtype=float)


def _run_cir(config: ExperimentConfig):
    ch = config.channel
    bits = np.zeros(ch.seq_length, dtype=np.int64)
    bits[0] = 1
    expected = observed_means(ch, bits, 0)
    rng = trace_stream(config.sim.rng_seed, 0)
    sampled = draw_traces(
        ch, bits, 0, rng, count=1,
        fidelity=config.sim.fidelity, particle_substeps=config.sim.particle_substeps,
    )[0]
    header = ["sample_index", "time_ms", "expected_count", "observed_count", "rng_seed"]
    rows = [
        [k + 1, 1e3 * (k + 1) * ch.sample_period, expected[k], int(sampled[k]),
         config.sim.rng_seed]
        for k in range(ch.n_samples)
    ]
    return header, rows


def _run_threshold_sweep(config: ExperimentConfig):
    ch = config.channel
    sequences = generate_sequences(ch, config.n_sequences, config.sim.rng_seed)
    taus = config.thresholds
    header = ["detector", "tau", "analytic_error", "empirical_error", "rng_seed"]
    rows = []
    for kind in config.detectors:
        detector = make_detector(kind, ch)
        size = int(np.rint(taus).max()) + 1 if np.allclose(taus, np.rint(taus)) else None
        if size is not None:
            curve = threshold_sweep(detector, sequences, 0, size)
            analytic = curve[np.rint(taus).astype(int)]
        else:
            analytic = [
                optimal_threshold(detector, sequences, 0, [t])[1] for t in taus
            ]
        empirical = empirical_threshold_sweep(detector, sequences, 0, taus, config.sim)
        for tau, a_err, e_err in zip(taus, analytic, empirical):
            rows.append([kind, _fmt(tau), a_err, e_err, config.sim.rng_seed])
    return header, rows


def _run_offset_sweep(config: ExperimentConfig, offsets=None, channel=None):
    ch = channel or config.channel
    sequences = generate_sequences(ch, config.n_sequences, config.sim.rng_seed)
    header = ["detector", "offset", "offset_ms", "optimal_tau",
              "analytic_error", "empirical_error", "rng_seed"]
    rows = []
    for kind in config.detectors:
        detector = make_detector(kind, ch)
        for delta in (config.offsets if offsets is None else offsets):
            tau, analytic = _search_threshold(detector, sequences, delta, config.thresholds)
            report = measure_ber(detector, sequences, delta, tau, config.sim)
            rows.append([
                kind, delta, 1e3 * delta * ch.sample_period, _fmt(tau),
                analytic, report.average, config.sim.rng_seed,
            ])
    return header, rows


def _run_samples_sweep(config: ExperimentConfig):
    base = config.channel
    symbol_period = base.samples_per_bit * base.sample_period
    header = ["detector", "samples_per_bit", "sample_period_ms", "optimal_tau",
              "analytic_error", "empirical_error", "rng_seed"]
    rows = []
    for m in config.samples:
        ch = replace(base, samples_per_bit=int(m), sample_period=symbol_period / m)
        sequences = generate_sequences(ch, config.n_sequences, config.sim.rng_seed)
        for kind in config.detectors:
            detector = make_detector(kind, ch)
            tau, analytic = _search_threshold(detector, sequences, 0, config.thresholds)
            report = measure_ber(detector, sequences, 0, tau, config.sim)
            rows.append([
                kind, int(m), 1e3 * ch.sample_period, _fmt(tau),
                analytic, report.average, config.sim.rng_seed,
            ])
    return header, rows


def run_experiment(config: ExperimentConfig) -> str:
    """Execute the configured experiment; write the CSV and metadata files."""
    runners = {
        "cir": _run_cir,
        "threshold-sweep": _run_threshold_sweep,
        "offset-sweep": _run_offset_sweep,
        "samples-sweep": _run_samples_sweep,
    }
    header, rows = runners[config.experiment](config)
    out = config.output_path
    meta_path = (out[:-4] if out.endswith(".csv") else out) + ".meta.json"
    try:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(cell) for cell in row])
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump(
                {"version": __version__, "config": config.resolved()},
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write output {out!r}: {exc}") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molcomm",
        description="Diffusive molecular communication detection experiments.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON or flat key=value config file")
        p.add_argument("--seed", type=int, help="override the root RNG seed")
        p.add_argument("--out", help="override the output CSV path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"rng_seed": args.seed, "output_path": args.out}
    try:
        config = parse_config(args.config, overrides, experiment=args.experiment)
        out = run_experiment(config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
