"""Naive-Bayes region labelling of visible objects from SRG includes weights.

With independent objects and a flat prior over regions the posterior is
proportional to the product of ``p(o | R)`` over the candidate objects; the
evidence term is a shared constant, so normalising the product by its sum
is enough. Each visible object is labelled with the arg-max region of the
posterior built from itself and its ``k`` nearest visible neighbours.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import SRG

SMOOTHING_EPS = 1e-4


def smoothing(weight: float, eps: float = SMOOTHING_EPS) -> float:
    """Floor a likelihood so one unseen object cannot zero a region out."""
    if not 0.0 <= weight <= 1.0:
        raise ValueError("weight must be a probability")
    return max(weight, eps)


def normalize_scores(scores: np.ndarray) -> np.ndarray:
    total = scores.sum()
    if total <= 0:
        return np.full(len(scores), 1.0 / len(scores))
    return scores / total


@dataclass(frozen=True, eq=False)
class RegionPosterior:
    scores: np.ndarray
    objects: tuple = ()

    @property
    def degenerate(self) -> bool:
        """True when no region has any support; ``probs`` is then uniform."""
        return not np.any(self.scores > 0)

    @property
    def probs(self) -> np.ndarray:
        return normalize_scores(self.scores)

    @property
    def argmax(self) -> int:
        # np.argmax returns the first maximum: ties go to the lower region index
        return int(np.argmax(self.probs))

    def update(self, likelihood: np.ndarray, obj: int) -> "RegionPosterior":
        """Fold in one more observed object category."""
        return RegionPosterior(self.scores * likelihood[obj], self.objects + (obj,))


class RegionEstimator:
    """Precomputed smoothed likelihood table ``p(o | R)`` for one SRG."""

    def __init__(self, srg: SRG, eps: float = SMOOTHING_EPS):
        self.srg = srg
        self.eps = eps
        raw = srg.includes_matrix()
        self.likelihood = np.maximum(raw, eps) if eps > 0 else raw

    def prior(self) -> RegionPosterior:
        return RegionPosterior(np.ones(self.srg.space.n_regions))

    def posterior(self, candidates) -> RegionPosterior:
        post = self.prior()
        for obj in candidates:
            post = post.update(self.likelihood, obj)
        return post

    def visible_regions(self, visible, k: int = 4) -> dict:
        if k < 0:
            raise ValueError("k must be non-negative")
        out = {}
        for obj in visible:
            others = sorted((o for o in visible if o.id != obj.id),
                            key=lambda o: (math.hypot(o.cell[0] - obj.cell[0], o.cell[1] - obj.cell[1]), o.id))
            cands = (obj,) + tuple(others[:k])
            post = self.posterior([o.category for o in cands])
            out[obj.id] = RegionEstimate(obj, post.argmax, tuple(o.id for o in cands), post)
        return out


@dataclass(frozen=True)
class RegionEstimate:
    obj: object
    region: int
    candidates: tuple
    posterior: RegionPosterior

    def trace(self, space) -> dict:
        """Interpretable record: which objects drove the label, and the scores."""
        return {
            "object_id": self.obj.id,
            "object": space.objects[self.obj.category],
            "candidate_ids": list(self.candidates),
            "candidate_objects": [space.objects[c] for c in self.posterior.objects],
            "region": space.regions[self.region],
            "scores": {space.regions[i]: float(p) for i, p in enumerate(self.posterior.probs)},
        }


def region_posterior(srg: SRG, candidate_objects, eps: float = SMOOTHING_EPS) -> RegionPosterior:
    return RegionEstimator(srg, eps).posterior(candidate_objects)


def visible_regions(srg: SRG, visible, k: int = 4, eps: float = SMOOTHING_EPS) -> dict:
    """Map visible object id -> :class:`RegionEstimate`."""
    return RegionEstimator(srg, eps).visible_regions(visible, k)
