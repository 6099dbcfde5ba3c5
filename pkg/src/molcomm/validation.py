"""Input validation helpers shared by the detector estimators and the
simulation/analysis entry points."""

import numpy as np

from .channel import ChannelParams, check_bits, check_offset

__all__ = ["check_traces", "check_bit_matrix", "check_bits", "check_offset"]


def check_traces(X, params: ChannelParams) -> np.ndarray:
    """Validate observation traces against the channel geometry.

    Accepts a single trace of length ``M*L`` or a stack of traces with shape
    ``(n, M*L)``; returns a 2-D int64 array.  Entries must be nonnegative
    integer counts.
    """
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != params.n_samples:
        raise ValueError(
            f"traces must have {params.n_samples} samples per row "
            f"(samples_per_bit * seq_length), got shape {np.asarray(X).shape}"
        )
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("trace entries must be integer counts")
        arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError("trace entries must be nonnegative")
    return arr.astype(np.int64, copy=False)


def check_bit_matrix(bits, params: ChannelParams) -> np.ndarray:
    """Validate a stack of bit sequences with shape ``(n, seq_length)``."""
    arr = np.asarray(bits, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != params.seq_length:
        raise ValueError(f"bit sequences must have length {params.seq_length}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bit sequence entries must be 0 or 1")
    return arr
