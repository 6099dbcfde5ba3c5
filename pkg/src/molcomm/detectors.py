"""Symbol-by-symbol threshold detectors over observation traces.

Every detector follows the scikit-learn estimator protocol: construct with
``(channel, threshold)``, then call ``predict`` on one trace or a stack of
traces to decode bit sequences.  The decision window for bit ``l`` is the
``M`` receiver samples ``l*M + 1 .. (l+1)*M``; the detector never sees the
transmitter clock, so a timing offset shows up only through the trace
statistics, not through the windowing.

Five rules are provided:

* ``single-sample`` -- one observation per window, at the position where the
  single-release response peaks.
* ``energy`` -- the sum of all window observations.
* ``async-peak`` -- the largest window observation, which needs no knowledge
  of when the peak occurs.
* ``energy-df`` / ``async-peak-df`` -- the same statistics after subtracting
  the interference expected from previously decided bits (computed under the
  receiver's assumption that its clock matches the transmitter's).
"""

import numpy as np
from sklearn.base import BaseEstimator

from .channel import ChannelParams, peak_sample_index, single_release_profile
from .validation import check_traces

__all__ = [
    "TraceDetector",
    "SingleSampleDetector",
    "EnergyDetector",
    "AsyncPeakDetector",
    "EnergyFeedbackDetector",
    "AsyncPeakFeedbackDetector",
    "DETECTOR_KINDS",
    "make_detector",
]


class TraceDetector(BaseEstimator):
    """Base class: windowing, thresholding and the decision-feedback loop."""

    kind = None
    uses_feedback = False

    def __init__(self, channel: ChannelParams, threshold: float = 1.0):
        self.channel = channel
        self.threshold = threshold

    def _validate(self):
        if not isinstance(self.channel, ChannelParams):
            raise ValueError("channel must be a ChannelParams instance")
        if not self.threshold >= 0:
            raise ValueError("threshold must be nonnegative")

    def fit(self, X=None, y=None):
        """No-op fit (parameter validation only); present for pipeline use."""
        self._validate()
        return self

    def predict(self, X):
        """Decode bit sequences from traces.

        Parameters
        ----------
        X : array-like
            One trace of length ``M*L`` or a stack ``(n, M*L)`` of
            nonnegative integer counts.

        Returns
        -------
        ndarray
            Decoded bits, shape ``(L,)`` for a single trace or ``(n, L)``.
        """
        single = np.asarray(X).ndim == 1
        decided = self.decode(X)
        return decided[0] if single else decided

    def decode(self, X, feedback_bits=None) -> np.ndarray:
        """Decode a stack of traces, optionally with genie-aided feedback.

        When ``feedback_bits`` is given (shape ``(n, L)``), decision-feedback
        detectors subtract the interference implied by those bits instead of
        their own (possibly wrong) prior decisions.  Non-feedback detectors
        ignore the argument.
        """
        self._validate()
        X = check_traces(X, self.channel)
        n = X.shape[0]
        L = self.channel.seq_length
        decided = np.zeros((n, L), dtype=np.int64)
        if feedback_bits is not None:
            feedback_bits = np.asarray(feedback_bits, dtype=np.int64)
            if feedback_bits.shape != (n, L):
                raise ValueError("feedback_bits must match the trace stack shape")
        ref = decided if feedback_bits is None else feedback_bits
        for l in range(L):
            stats = self._statistics(X, l, ref[:, :l])
            decided[:, l] = stats >= self.threshold
        return decided

    def decision_statistic(self, trace, bit_index: int, decided_prefix=()) -> float:
        """The scalar compared against the threshold for one bit of one trace.

        ``decided_prefix`` must hold the ``bit_index`` decisions made before
        this bit; it only influences the decision-feedback detectors.
        """
        self._validate()
        X = check_traces(np.atleast_2d(trace), self.channel)
        if X.shape[0] != 1:
            raise ValueError("decision_statistic expects a single trace")
        if not 0 <= bit_index < self.channel.seq_length:
            raise ValueError("bit_index out of range")
        prefix = np.asarray(decided_prefix, dtype=np.int64).reshape(1, -1)
        if prefix.shape[1] != bit_index:
            raise ValueError("decided_prefix must hold one decision per prior bit")
        return float(self._statistics(X, bit_index, prefix)[0])

    def _window(self, X, l):
        m = self.channel.samples_per_bit
        return X[:, l * m : (l + 1) * m]

    def _statistics(self, X, l, prefix):
        raise NotImplementedError

    def _expected_isi_rows(self, l, prefix):
        """Interference the receiver expects in bit ``l``'s window, per trace.

        Row ``i`` of ``prefix`` holds trace ``i``'s decided bits ``0..l-1``;
        the result has one column per window sample.  Assumes zero clock
        offset, which is all the receiver can do.
        """
        m = self.channel.samples_per_bit
        kernel = self._feedback_kernel()
        if l == 0:
            return np.zeros((prefix.shape[0], m))
        return prefix @ kernel[l:0:-1]

    def _feedback_kernel(self) -> np.ndarray:
        """Row ``g`` holds the single-release means at lags ``g*M+1..g*M+M``."""
        params = self.channel
        key = (params.samples_per_bit, params.seq_length)
        if getattr(self, "_kernel_key", None) != key:
            m, L = params.samples_per_bit, params.seq_length
            profile = single_release_profile(params, params.n_samples)
            lags = np.arange(1, m + 1)[None, :] + m * np.arange(L)[:, None]
            self._kernel = profile[lags]
            self._kernel_key = key
        return self._kernel


class SingleSampleDetector(TraceDetector):
    """Compares one a-priori chosen observation per window to the threshold.

    The sampling position is where the single-release mean peaks; it is fixed
    on the receiver's own clock, so a timing offset moves the sample off the
    true peak.
    """

    kind = "single-sample"

    def _statistics(self, X, l, prefix):
        return self._window(X, l)[:, peak_sample_index(self.channel) - 1].astype(float)


class EnergyDetector(TraceDetector):
    """Compares the sum of all window observations to the threshold."""

    kind = "energy"

    def _statistics(self, X, l, prefix):
        return self._window(X, l).sum(axis=1).astype(float)


class AsyncPeakDetector(TraceDetector):
    """Compares the largest window observation to the threshold."""

    kind = "async-peak"

    def _statistics(self, X, l, prefix):
        return self._window(X, l).max(axis=1).astype(float)


class EnergyFeedbackDetector(TraceDetector):
    """Energy detector with decision feedback: the expected-interference sum
    is subtracted from the window total before thresholding."""

    kind = "energy-df"
    uses_feedback = True

    def _statistics(self, X, l, prefix):
        isi = self._expected_isi_rows(l, prefix)
        return self._window(X, l).sum(axis=1) - isi.sum(axis=1)


class AsyncPeakFeedbackDetector(TraceDetector):
    """Peak detector with decision feedback: each observation is reduced by
    the interference expected at that sample before taking the maximum.  The
    adaptive values may be negative; they are compared to the threshold
    as-is."""

    kind = "async-peak-df"
    uses_feedback = True

    def _statistics(self, X, l, prefix):
        isi = self._expected_isi_rows(l, prefix)
        return (self._window(X, l) - isi).max(axis=1)


DETECTOR_KINDS = {
    cls.kind: cls
    for cls in (
        SingleSampleDetector,
        EnergyDetector,
        AsyncPeakDetector,
        EnergyFeedbackDetector,
        AsyncPeakFeedbackDetector,
    )
}


def make_detector(kind: str, channel: ChannelParams, threshold: float = 1.0) -> TraceDetector:
    """Instantiate a detector by its kind string (see ``DETECTOR_KINDS``)."""
    try:
        cls = DETECTOR_KINDS[kind]
    except KeyError:
        raise ValueError(
            f"unknown detector kind {kind!r}; expected one of {sorted(DETECTOR_KINDS)}"
        ) from None
    return cls(channel, threshold)
