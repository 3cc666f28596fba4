"""Class-dependent linear-Gaussian motion models and the class-conditioned prediction step.

The kinematic state is the fixed 6-vector [x, vx, ax, y, vy, ay]. Constant
velocity models live in the same space with a small acceleration variance
floor so every class shares one state space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .rfs import ClassConditionedDensity, GaussianComponent, GaussianMixture

__all__ = [
    "MotionModel",
    "ClassModelSet",
    "build_cv_model",
    "build_ca_model",
    "predict_mixture",
    "predict_class_density",
]

STATE_DIM = 6
POS_IDX = (0, 3)
VEL_IDX = (1, 4)
ACC_IDX = (2, 5)

# Acceleration variance floor keeping CV-class covariances invertible in 6-D.
CV_ACCEL_VAR = 1e-6


@dataclass(frozen=True, eq=False)
class MotionModel:
    name: str
    transition: np.ndarray
    process_noise: np.ndarray

    def __post_init__(self):
        F = np.array(self.transition, dtype=float)
        Q = 0.5 * (np.asarray(self.process_noise, dtype=float) + np.asarray(self.process_noise, dtype=float).T)
        if F.shape != (STATE_DIM, STATE_DIM) or Q.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("motion model matrices must be 6x6")
        object.__setattr__(self, "transition", F)
        object.__setattr__(self, "process_noise", Q)


@dataclass(frozen=True, eq=False)
class ClassModelSet:
    """Motion model bank of one class with its Markov switching matrix."""

    class_id: int
    models: tuple[MotionModel, ...]
    switch_matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        pi = np.array(self.switch_matrix, dtype=float)
        n = len(self.models)
        if pi.shape != (n, n):
            raise ValueError("switch matrix must be square with one row per model")
        if not np.allclose(pi.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("switch matrix rows must sum to 1")
        object.__setattr__(self, "switch_matrix", pi)

    @property
    def n_models(self) -> int:
        return len(self.models)


def build_cv_model(T: float, sigma_v2: float = 1.0, accel_var: float = CV_ACCEL_VAR) -> MotionModel:
    """Constant-velocity model embedded in the 6-D state space.

    Position/velocity blocks follow the usual [[1, T], [0, 1]] transition with
    process noise sigma_v2 * [[T^2, T], [T, 1]]; acceleration states persist
    uncoupled with a tiny variance floor.
    """
    if T <= 0.0:
        raise ValueError(f"scan period must be positive, got {T}")
    F = np.eye(STATE_DIM)
    Q = np.zeros((STATE_DIM, STATE_DIM))
    for p, v, a in zip(POS_IDX, VEL_IDX, ACC_IDX):
        F[p, v] = T
        Q[p, p] = T**2 * sigma_v2
        Q[p, v] = Q[v, p] = T * sigma_v2
        Q[v, v] = sigma_v2
        Q[a, a] = accel_var
    return MotionModel("CV", F, Q)


def build_ca_model(T: float, sigma_a2: float = 10.0) -> MotionModel:
    """Constant-acceleration model on both axes of the 6-D state space."""
    if T <= 0.0:
        raise ValueError(f"scan period must be positive, got {T}")
    F = np.eye(STATE_DIM)
    Q = np.zeros((STATE_DIM, STATE_DIM))
    q_block = sigma_a2 * np.array(
        [
            [T**4 / 4.0, T**3 / 2.0, T**2 / 2.0],
            [T**3 / 2.0, T**2, T],
            [T**2 / 2.0, T, 1.0],
        ]
    )
    for p, v, a in zip(POS_IDX, VEL_IDX, ACC_IDX):
        F[p, v] = T
        F[p, a] = 0.5 * T**2
        F[v, a] = T
        idx = np.ix_((p, v, a), (p, v, a))
        Q[idx] = q_block
    return MotionModel("CA", F, Q)


def predict_mixture(gm: GaussianMixture, model: MotionModel) -> GaussianMixture:
    """Push every component of a mixture through one linear-Gaussian model."""
    F, Q = model.transition, model.process_noise
    return GaussianMixture(
        tuple(
            GaussianComponent(c.weight, F @ c.mean, F @ c.covariance @ F.T + Q)
            for c in gm.components
        )
    )


def _mix_model_bank(
    bank: tuple[GaussianMixture, ...], model_probs: np.ndarray, switch: np.ndarray
) -> tuple[list[GaussianMixture], np.ndarray]:
    # IMM interaction: mixed prior of model m is the mixture of all models'
    # densities weighted by the mixing probabilities pi[i, m] mu[i] / mu_plus[m].
    mu_plus = model_probs @ switch
    mixed: list[GaussianMixture] = []
    for m in range(len(bank)):
        if mu_plus[m] <= 1e-300:
            mixed.append(bank[m])
            continue
        comps = []
        for i, gm in enumerate(bank):
            mix_w = switch[i, m] * model_probs[i] / mu_plus[m]
            if mix_w <= 0.0:
                continue
            comps.extend(
                GaussianComponent(mix_w * c.weight, c.mean, c.covariance) for c in gm.components
            )
        mixed.append(GaussianMixture(tuple(comps)))
    return mixed, mu_plus


def predict_class_density(
    density: ClassConditionedDensity,
    model_sets: Mapping[int, ClassModelSet],
    p_s: float,
) -> tuple[ClassConditionedDensity, float]:
    """One-scan prediction of a class-conditioned density.

    Single-model classes push their mixture through the model; multi-model
    classes first apply the IMM mixing step, then predict each model's mixture
    with its own dynamics. Returns the predicted density together with the
    survival factor that scales the existence probability (survival is state
    independent here).
    """
    banks: list[tuple[GaussianMixture, ...]] = []
    mprobs: list[np.ndarray] = []
    for j in range(1, density.n_classes + 1):
        if j not in model_sets:
            raise ValueError(f"no model set configured for class {j}")
        ms = model_sets[j]
        bank = density.mixtures[j - 1]
        probs = density.model_probs[j - 1]
        if ms.n_models != len(bank):
            raise ValueError(
                f"class {j} carries {len(bank)} model mixtures but the model set has {ms.n_models}"
            )
        if ms.n_models == 1:
            banks.append((predict_mixture(bank[0], ms.models[0]),))
            mprobs.append(np.array([1.0]))
        else:
            mixed, mu_plus = _mix_model_bank(bank, probs, ms.switch_matrix)
            banks.append(
                tuple(predict_mixture(gm, model) for gm, model in zip(mixed, ms.models))
            )
            mprobs.append(mu_plus / mu_plus.sum())
    predicted = ClassConditionedDensity(tuple(banks), tuple(mprobs), density.class_probs)
    return predicted, float(p_s)
