"""Core value types for labeled multi-Bernoulli densities and Gaussian mixtures.

Everything in this module is treated as an immutable value: filters build new
objects instead of mutating old ones, so instances can be shared freely across
Monte Carlo trials and worker processes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Label",
    "GaussianComponent",
    "GaussianMixture",
    "ClassConditionedDensity",
    "Track",
    "LmbDensity",
    "AssociationMap",
    "HypothesisWeight",
    "lmb_set_weight",
    "mixture_moments",
    "prune_and_merge",
]


@dataclass(frozen=True, order=True)
class Label:
    """Track identity: scan index of birth plus an index separating same-scan births."""

    birth_time: int
    birth_index: int

    def __str__(self) -> str:
        return f"{self.birth_time}.{self.birth_index}"


def _sym(mat: np.ndarray) -> np.ndarray:
    # Symmetrize to absorb floating point drift from repeated updates.
    return 0.5 * (mat + mat.T)


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    """One weighted Gaussian term of a mixture over the 6-D kinematic state."""

    weight: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = _sym(np.array(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean size {mean.size}")
        if self.weight < 0.0:
            raise ValueError(f"component weight must be nonnegative, got {self.weight}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    def validate(self, tol: float = 1e-9) -> None:
        """Check symmetry and near positive semidefiniteness of the covariance."""
        if not np.allclose(self.covariance, self.covariance.T, rtol=tol, atol=tol):
            raise ValueError("covariance is not symmetric")
        eig = np.linalg.eigvalsh(self.covariance)
        floor = -tol * max(eig.max(), 1.0)
        if eig.min() < floor:
            raise ValueError(f"covariance has eigenvalue {eig.min()} below {floor}")


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Ordered sequence of Gaussian components; weights sum to 1 when normalized."""

    components: tuple[GaussianComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    def __len__(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def total_weight(self) -> float:
        return float(sum(c.weight for c in self.components))

    def scaled(self, factor: float) -> "GaussianMixture":
        return GaussianMixture(
            tuple(GaussianComponent(c.weight * factor, c.mean, c.covariance) for c in self.components)
        )

    def normalized(self) -> "GaussianMixture":
        total = self.total_weight()
        if total <= 0.0:
            raise ValueError("cannot normalize a mixture with zero total weight")
        return self.scaled(1.0 / total)

    @staticmethod
    def single(mean: np.ndarray, covariance: np.ndarray) -> "GaussianMixture":
        return GaussianMixture((GaussianComponent(1.0, mean, covariance),))


@dataclass(frozen=True, eq=False)
class ClassConditionedDensity:
    """Spatial density of one track, split by class hypothesis and motion model.

    ``mixtures[j][m]`` is the (normalized) mixture of class ``j+1`` under its
    ``m``-th motion model, ``model_probs[j]`` the model probabilities of class
    ``j+1`` and ``class_probs`` the probability vector over classes 1..J.
    """

    mixtures: tuple[tuple[GaussianMixture, ...], ...]
    model_probs: tuple[np.ndarray, ...]
    class_probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mixtures", tuple(tuple(ms) for ms in self.mixtures))
        object.__setattr__(
            self, "model_probs", tuple(np.array(p, dtype=float) for p in self.model_probs)
        )
        object.__setattr__(self, "class_probs", np.array(self.class_probs, dtype=float))
        if len(self.mixtures) != self.class_probs.size:
            raise ValueError("one mixture bank per class is required")
        if len(self.model_probs) != len(self.mixtures):
            raise ValueError("one model probability vector per class is required")
        for bank, probs in zip(self.mixtures, self.model_probs):
            if len(bank) != probs.size:
                raise ValueError("model probabilities do not match the model bank size")

    @property
    def n_classes(self) -> int:
        return len(self.mixtures)

    def class_mixture(self, class_id: int) -> GaussianMixture:
        """Flatten the model bank of ``class_id`` into one normalized mixture."""
        bank = self.mixtures[class_id - 1]
        probs = self.model_probs[class_id - 1]
        comps: list[GaussianComponent] = []
        for mu, gm in zip(probs, bank):
            comps.extend(
                GaussianComponent(mu * c.weight, c.mean, c.covariance) for c in gm.components
            )
        return GaussianMixture(tuple(comps))

    def validate(self, tol: float = 1e-9) -> None:
        if np.any(self.class_probs < -tol) or np.any(self.class_probs > 1.0 + tol):
            raise ValueError("class probabilities outside [0, 1]")
        if abs(self.class_probs.sum() - 1.0) > tol:
            raise ValueError(f"class probabilities sum to {self.class_probs.sum()}")
        for probs in self.model_probs:
            if abs(probs.sum() - 1.0) > tol:
                raise ValueError(f"model probabilities sum to {probs.sum()}")
        for bank in self.mixtures:
            for gm in bank:
                if abs(gm.total_weight() - 1.0) > 1e-6:
                    raise ValueError("class mixtures must be normalized")

    @staticmethod
    def from_single_gaussian(
        mean: np.ndarray,
        covariance: np.ndarray,
        class_probs: Sequence[float],
        models_per_class: Sequence[int],
    ) -> "ClassConditionedDensity":
        """Common birth form: the same Gaussian for every class and model."""
        banks = []
        mprobs = []
        for n_models in models_per_class:
            banks.append(tuple(GaussianMixture.single(mean, covariance) for _ in range(n_models)))
            mprobs.append(np.full(n_models, 1.0 / n_models))
        return ClassConditionedDensity(tuple(banks), tuple(mprobs), np.array(class_probs, float))


@dataclass(frozen=True, eq=False)
class Track:
    """Labeled Bernoulli component: existence probability plus class-conditioned density."""

    label: Label
    existence: float
    density: ClassConditionedDensity

    def __post_init__(self):
        if not 0.0 <= self.existence <= 1.0 + 1e-12:
            raise ValueError(f"existence probability {self.existence} outside [0, 1]")
        object.__setattr__(self, "existence", float(min(self.existence, 1.0)))


@dataclass(frozen=True, eq=False)
class LmbDensity:
    """Labeled multi-Bernoulli density: independent tracks with distinct labels."""

    tracks: tuple[Track, ...]

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        labels = [t.label for t in self.tracks]
        if len(set(labels)) != len(labels):
            raise ValueError("track labels must be distinct")

    def __len__(self) -> int:
        return len(self.tracks)

    @property
    def labels(self) -> tuple[Label, ...]:
        return tuple(t.label for t in self.tracks)

    def track(self, label: Label) -> Track:
        for t in self.tracks:
            if t.label == label:
                return t
        raise KeyError(label)


@dataclass(frozen=True)
class AssociationMap:
    """Per-track assignment to a radar and an ESM measurement index.

    Indices are 0-based into the scan's measurement arrays; ``None`` marks a
    missed detection on that sensor. Non-miss indices are injective per sensor.
    """

    entries: tuple[tuple[Label, tuple[int | None, int | None]], ...]

    def __post_init__(self):
        entries = tuple(sorted(self.entries, key=lambda e: e[0]))
        object.__setattr__(self, "entries", entries)
        radar = [a for _, (a, _) in entries if a is not None]
        esm = [b for _, (_, b) in entries if b is not None]
        if len(set(radar)) != len(radar):
            raise ValueError("radar indices must be assigned to at most one track")
        if len(set(esm)) != len(esm):
            raise ValueError("ESM indices must be assigned to at most one track")

    @staticmethod
    def from_dict(mapping: Mapping[Label, tuple[int | None, int | None]]) -> "AssociationMap":
        return AssociationMap(tuple(mapping.items()))

    def as_dict(self) -> dict[Label, tuple[int | None, int | None]]:
        return dict(self.entries)

    def assignment(self, label: Label) -> tuple[int | None, int | None]:
        for lab, pair in self.entries:
            if lab == label:
                return pair
        raise KeyError(label)

    def is_all_miss(self) -> bool:
        return all(a is None and b is None for _, (a, b) in self.entries)


@dataclass(frozen=True)
class HypothesisWeight:
    """Weight of one (label set, association map) hypothesis of an update."""

    label_set: frozenset[Label]
    assoc: AssociationMap
    weight: float


def lmb_set_weight(density: LmbDensity, label_set: Iterable[Label]) -> float:
    """Probability that exactly ``label_set`` of the density's tracks exist.

    Product of r over the set and (1 - r) over its complement; summing over
    every subset of labels yields one.
    """
    wanted = set(label_set)
    known = set(density.labels)
    unknown = wanted - known
    if unknown:
        raise ValueError(f"labels not present in the density: {sorted(unknown)}")
    weight = 1.0
    for track in density.tracks:
        weight *= track.existence if track.label in wanted else (1.0 - track.existence)
    return weight


def mixture_moments(gm: GaussianMixture) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of a Gaussian mixture (covariance includes the spread term)."""
    if len(gm) == 0:
        raise ValueError("cannot take moments of an empty mixture")
    weights = gm.weights
    total = weights.sum()
    if total <= 0.0:
        raise ValueError("mixture weights sum to zero")
    weights = weights / total
    means = np.stack([c.mean for c in gm.components])
    mean = weights @ means
    dim = mean.size
    cov = np.zeros((dim, dim))
    for w, comp in zip(weights, gm.components):
        diff = comp.mean - mean
        cov += w * (comp.covariance + np.outer(diff, diff))
    return mean, _sym(cov)


def _merge_components(comps: Sequence[GaussianComponent]) -> GaussianComponent:
    # Moment-preserving merge: combined weight, mean and covariance match the sub-mixture.
    weight = sum(c.weight for c in comps)
    mean = sum(c.weight * c.mean for c in comps) / weight
    dim = mean.size
    cov = np.zeros((dim, dim))
    for c in comps:
        diff = c.mean - mean
        cov += c.weight * (c.covariance + np.outer(diff, diff))
    return GaussianComponent(weight, mean, cov / weight)


def prune_and_merge(
    gm: GaussianMixture,
    prune_thresh: float = 1e-5,
    merge_dist: float = 4.0,
    max_components: int = 20,
) -> GaussianMixture:
    """Standard mixture housekeeping: prune small weights, merge close components, cap count.

    Closeness is the squared Mahalanobis distance to the heaviest remaining
    component, measured in that component's covariance. The result is
    renormalized; if pruning would empty a nonempty mixture the single largest
    component is kept.
    """
    if len(gm) == 0:
        return gm
    survivors = [c for c in gm.components if c.weight >= prune_thresh]
    if not survivors:
        survivors = [max(gm.components, key=lambda c: c.weight)]

    merged: list[GaussianComponent] = []
    remaining = sorted(survivors, key=lambda c: -c.weight)
    while remaining:
        pivot = remaining[0]
        try:
            inv = np.linalg.inv(pivot.covariance)
        except np.linalg.LinAlgError:
            inv = np.linalg.pinv(pivot.covariance)
        group = []
        rest = []
        for c in remaining:
            diff = c.mean - pivot.mean
            if float(diff @ inv @ diff) < merge_dist:
                group.append(c)
            else:
                rest.append(c)
        merged.append(_merge_components(group) if len(group) > 1 else group[0])
        remaining = rest

    merged.sort(key=lambda c: -c.weight)
    merged = merged[:max_components]
    return GaussianMixture(tuple(merged)).normalized()


def enumerate_label_subsets(labels: Sequence[Label]) -> Iterable[frozenset[Label]]:
    """All subsets of a label collection (test helper for weight normalization)."""
    for size in range(len(labels) + 1):
        for combo in itertools.combinations(labels, size):
            yield frozenset(combo)
