"""Reward data shared by the finite- and infinite-horizon solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .markov import Distribution, MarkovModel, stationary_distribution


@dataclass(frozen=True)
class RewardSpec:
    """Running reward f (per unit time), terminal reward g, and cached mu(f)."""

    f: np.ndarray
    g: np.ndarray
    mu_f: float


def make_rewards(model: MarkovModel, f, g, mu: Distribution | None = None) -> RewardSpec:
    """Validate per-state rewards and cache mu(f) against the invariant law."""
    fv = np.asarray(f, dtype=float)
    gv = np.asarray(g, dtype=float)
    n = model.n_states
    if fv.shape != (n,) or gv.shape != (n,):
        raise DimensionMismatch(
            f"f and g must each have shape ({n},), got {fv.shape} and {gv.shape}"
        )
    if not (np.isfinite(fv).all() and np.isfinite(gv).all()):
        raise ValueError("rewards must be finite")
    if mu is None:
        mu = stationary_distribution(model)
    return RewardSpec(f=fv, g=gv, mu_f=float(mu.weights @ fv))
