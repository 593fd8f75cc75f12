"""Input validation helpers for the estimator interface."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import InputError
from .model import ObservationModel


def check_signal_profiles(X, model: ObservationModel) -> np.ndarray:
    """Validate a ``(steps, n_agents)`` array of signal indices against ``model``.

    Returns an int64 copy.  Every column ``i`` must index into agent ``i``'s
    signal space.
    """
    try:
        arr = check_array(X, dtype=None, ensure_2d=True, ensure_all_finite=True)
    except ValueError as exc:
        raise InputError(f"signal profiles: {exc}") from None
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise InputError("signal profiles must hold integer signal indices")
    arr = arr.astype(np.int64)
    if arr.shape[1] != model.n:
        raise InputError(f"signal profiles have {arr.shape[1]} columns, the model has {model.n} agents")
    sizes = np.array([s.signal_space_size for s in model.structures])
    bad = (arr < 0) | (arr >= sizes[None, :])
    if bad.any():
        step, agent = np.argwhere(bad)[0]
        raise InputError(f"step {step}: signal {arr[step, agent]} outside agent {agent}'s signal space")
    return arr


def check_hypothesis_index(theta: int, m: int) -> int:
    if isinstance(theta, bool) or not isinstance(theta, (int, np.integer)) or not 0 <= theta < m:
        raise InputError(f"hypothesis index must be an integer in 0..{m - 1}, got {theta!r}")
    return int(theta)
