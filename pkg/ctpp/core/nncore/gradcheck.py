"""
Finite-difference verification of reverse-mode gradients.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from ctpp.core.exceptions import EvaluationError
from ctpp.core.nncore import tensor as T
from ctpp.core.nncore.params import ParamStore
from ctpp.core.nncore.tensor import Tensor

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-8


@dataclass
class GradCheckResult:
    """Largest elementwise relative error, overall and per parameter name."""

    max_error: float = 0.0
    per_param: Dict[str, float] = field(default_factory=dict)

    def per_group(self, store: ParamStore) -> Dict[str, float]:
        grouped: Dict[str, float] = {}
        for name, error in self.per_param.items():
            group = store.group_of(name)
            grouped[group] = max(grouped.get(group, 0.0), error)
        return grouped


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = DENOMINATOR_FLOOR) -> np.ndarray:
    denominator = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denominator


def _evaluate(loss_fn: Callable[[], Tensor]) -> float:
    with T.no_grad():
        value = float(loss_fn().data)
    if not np.isfinite(value):
        raise EvaluationError(f"loss evaluated to {value}")
    return value


def grad_check(
    loss_fn: Callable[[], Tensor],
    store: ParamStore,
    h: float = 1e-5,
    names: Optional[Iterable[str]] = None,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    floor: float = DENOMINATOR_FLOOR,
) -> GradCheckResult:
    """
    Compare reverse-mode gradients of ``loss_fn()`` against central differences.

    Args:
        loss_fn: closure returning a scalar Tensor built from ``store``'s parameters
        store: parameters to perturb
        h: finite-difference step
        names: subset of parameter names to check (default: all)
        max_entries: check at most this many randomly chosen entries per parameter
        rng: generator used to choose the entries
        floor: smallest denominator of the relative error

    Returns:
        GradCheckResult with the maximum relative error per parameter
    """
    names = list(names) if names is not None else store.names()
    params = [store[name] for name in names]
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise EvaluationError(f"loss evaluated to {loss.data}")
    analytic = T.grad(loss, params)
    rng = rng if rng is not None else np.random.default_rng(0)

    result = GradCheckResult()
    for name, param, exact in zip(names, params, analytic):
        flat = param.data.reshape(-1)
        entries = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            entries = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        numeric = np.empty(entries.size)
        for slot, entry in enumerate(entries):
            original = flat[entry]
            flat[entry] = original + h
            plus = _evaluate(loss_fn)
            flat[entry] = original - h
            minus = _evaluate(loss_fn)
            flat[entry] = original
            numeric[slot] = (plus - minus) / (2.0 * h)
        error = float(relative_error(exact.reshape(-1)[entries], numeric, floor).max(initial=0.0))
        result.per_param[name] = error
        result.max_error = max(result.max_error, error)
        logger.debug("gradcheck %s: max relative error %.3e", name, error)
    return result
