"""Class-distribution arithmetic: weighted L1 distances, drift and divergence bounds.

The distance in use throughout is a weighted L1 ("earth mover's") distance
between class-proportion vectors, the weight of class c being its gradient
norm.  Class universes only ever grow, so vectors of different lengths are
reconciled by zero-padding the shorter one: a class absent from an earlier
frame simply carries proportion 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "SUM_TOLERANCE",
    "ClassDistribution",
    "ClassGradientNorms",
    "DivergenceReport",
    "weighted_emd",
    "temporal_drift_bound",
    "collective_divergence_bound",
    "v_bound_terms",
]

SUM_TOLERANCE = 1e-9


class ClassDistribution:
    """Per-class proportion vector.

    Entries are nonnegative and sum to 1 within ``SUM_TOLERANCE``.  The
    all-zero vector is allowed as the "empty dataset" sentinel.
    """

    __slots__ = ("_p",)

    def __init__(self, proportions: Iterable[float]):
        p = np.asarray(list(proportions) if not isinstance(proportions, np.ndarray) else proportions, dtype=float)
        if p.ndim != 1:
            raise ValueError("proportions must be a 1-D vector")
        if not np.all(np.isfinite(p)):
            raise ValueError("proportions must be finite")
        if np.any(p < 0):
            raise ValueError("proportions must be nonnegative")
        total = float(p.sum())
        if total != 0.0 and abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"proportions sum to {total!r}, expected 1 within {SUM_TOLERANCE}")
        p.flags.writeable = False
        self._p = p

    @classmethod
    def from_counts(cls, counts: Iterable[float]) -> "ClassDistribution":
        """Normalize raw per-class sample counts by a single division."""
        c = np.asarray(list(counts) if not isinstance(counts, np.ndarray) else counts, dtype=float)
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        total = c.sum()
        if total == 0:
            return cls(np.zeros_like(c))
        return cls(c / total)

    @property
    def proportions(self) -> np.ndarray:
        return self._p

    @property
    def num_classes(self) -> int:
        return self._p.shape[0]

    @property
    def is_empty(self) -> bool:
        """True for the all-zero "empty dataset" sentinel."""
        return bool(self._p.sum() == 0.0)

    def padded(self, num_classes: int) -> np.ndarray:
        """Proportions extended with zeros to ``num_classes`` entries."""
        if num_classes < self.num_classes:
            raise ValueError("cannot shrink a class universe")
        if num_classes == self.num_classes:
            return self._p
        out = np.zeros(num_classes)
        out[: self.num_classes] = self._p
        return out

    def __len__(self) -> int:
        return self.num_classes

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClassDistribution):
            return NotImplemented
        n = max(self.num_classes, other.num_classes)
        return bool(np.array_equal(self.padded(n), other.padded(n)))

    def __repr__(self) -> str:
        return f"ClassDistribution({self._p.tolist()})"


class ClassGradientNorms:
    """Per-class gradient norms used as distance weights (all nonnegative, finite)."""

    __slots__ = ("_w",)

    def __init__(self, norms: Iterable[float]):
        w = np.asarray(list(norms) if not isinstance(norms, np.ndarray) else norms, dtype=float)
        if w.ndim != 1:
            raise ValueError("norms must be a 1-D vector")
        if not np.all(np.isfinite(w)):
            raise ValueError("norms must be finite")
        if np.any(w < 0):
            raise ValueError("norms must be nonnegative")
        w.flags.writeable = False
        self._w = w

    @classmethod
    def ones(cls, num_classes: int) -> "ClassGradientNorms":
        return cls(np.ones(num_classes))

    @property
    def norms(self) -> np.ndarray:
        return self._w

    @property
    def num_classes(self) -> int:
        return self._w.shape[0]

    def padded(self, num_classes: int) -> np.ndarray:
        if num_classes < self.num_classes:
            raise ValueError("cannot shrink a class universe")
        if num_classes == self.num_classes:
            return self._w
        out = np.zeros(num_classes)
        out[: self.num_classes] = self._w
        return out

    def __len__(self) -> int:
        return self.num_classes

    def __repr__(self) -> str:
        return f"ClassGradientNorms({self._w.tolist()})"


@dataclass(frozen=True)
class DivergenceReport:
    """Outcome of a collective-divergence evaluation for a scheduled set."""

    collective_divergence_bound: float
    aggregate_distribution: ClassDistribution
    drift_bound_per_client: dict[int, float] = field(default_factory=dict)


def _as_weights(weights) -> np.ndarray:
    if isinstance(weights, ClassGradientNorms):
        return weights.norms
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("negative weight entry")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    return w


def _as_proportions(dist) -> np.ndarray:
    if isinstance(dist, ClassDistribution):
        return dist.proportions
    return np.asarray(dist, dtype=float)


def weighted_emd(p, q, weights) -> float:
    """Weighted L1 distance sum_c |p_c - q_c| * w_c.

    Inputs of different lengths are zero-padded to the longest.  Symmetric
    in (p, q); zero iff p and q agree wherever the weight is positive.
    """
    pv = _as_proportions(p)
    qv = _as_proportions(q)
    wv = _as_weights(weights)
    n = max(pv.shape[0], qv.shape[0], wv.shape[0])
    pad = lambda v: np.pad(v, (0, n - v.shape[0]))
    return float(np.sum(np.abs(pad(pv) - pad(qv)) * pad(wv)))


def temporal_drift_bound(p_now, p_prev, weights) -> float:
    """Upper bound on a client's gradient change across consecutive frames.

    Classes that appear in the current frame but not the previous one enter
    with prior proportion 0 (the previous vector is zero-padded).
    """
    return weighted_emd(p_now, p_prev, weights)


def collective_divergence_bound(
    selected: Iterable[int],
    distributions: Mapping[int, ClassDistribution],
    sample_counts: Mapping[int, int],
    global_dist: ClassDistribution,
    weights: ClassGradientNorms,
    prev_distributions: Mapping[int, ClassDistribution] | None = None,
) -> DivergenceReport:
    """Weighted-EMD bound on the gap between a scheduled set's aggregate
    gradient and the global gradient.

    The aggregate distribution is the sample-count-weighted mean of the
    selected clients' distributions (weights D_n / sum D_n over the set).
    When ``prev_distributions`` is given, the per-client temporal drift
    bounds are reported alongside.
    """
    sel = list(selected)
    if not sel:
        raise ValueError("selected set must be nonempty")
    for cid in sel:
        if cid not in distributions:
            raise ValueError(f"client {cid} missing from distributions")
        if cid not in sample_counts:
            raise ValueError(f"client {cid} missing from sample_counts")
        if sample_counts[cid] <= 0:
            raise ValueError(f"client {cid} has nonpositive sample count")

    n_classes = max(
        global_dist.num_classes,
        weights.num_classes,
        max(distributions[cid].num_classes for cid in sel),
    )
    total = float(sum(sample_counts[cid] for cid in sel))
    aggregate = np.zeros(n_classes)
    for cid in sorted(sel):
        aggregate += (sample_counts[cid] / total) * distributions[cid].padded(n_classes)
    aggregate_dist = ClassDistribution(aggregate)

    bound = weighted_emd(aggregate_dist, global_dist, weights)

    drift: dict[int, float] = {}
    if prev_distributions is not None:
        for cid in sel:
            drift[cid] = temporal_drift_bound(
                distributions[cid], prev_distributions[cid], weights
            )
    return DivergenceReport(
        collective_divergence_bound=bound,
        aggregate_distribution=aggregate_dist,
        drift_bound_per_client=drift,
    )


def v_bound_terms(
    tau: int,
    eta: float,
    beta: float,
    g: float,
    sigma: float,
    batch: int,
    selected_count: int,
    divergence: float,
) -> tuple[float, float, float]:
    """Diagnostic decomposition of the per-round federated-vs-centralized gap.

    Returns (iteration error, sampling variance, collective divergence):
    (tau(tau-1)/2 * eta*beta*g,  eta*tau*sigma/sqrt(S*b),  eta*tau*divergence).
    """
    if tau < 1:
        raise ValueError("tau must be a positive integer")
    if eta <= 0 or beta <= 0 or g <= 0:
        raise ValueError("eta, beta, g must be positive")
    if batch < 1 or selected_count < 1:
        raise ValueError("batch and selected_count must be positive integers")
    if sigma < 0 or divergence < 0:
        raise ValueError("sigma and divergence must be nonnegative")
    iteration = 0.5 * tau * (tau - 1) * eta * beta * g
    sampling = eta * tau * sigma / np.sqrt(selected_count * batch)
    collective = eta * tau * divergence
    return (float(iteration), float(sampling), float(collective))
