"""Closed-form rate exponents and parameter recommendations.

The exponents depend on the smoothness of the target density (``alpha``),
the concentration of the contamination (``beta``) and the dimension.  The
recommended block size, depth and tree count follow the asymptotic
scalings with all unspecified constants set to 1, so they are starting
points for tuning rather than guarantees of optimality.

All functions here are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["TheoryInputs", "RecommendedParams", "gammas", "recommend"]


@dataclass(frozen=True)
class TheoryInputs:
    alpha: float
    beta: float
    d: int
    n: int
    n_outliers: int

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 <= self.beta <= 1:
            raise ValueError("beta must lie in [0, 1]")
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        if self.n < 2:
            raise ValueError("sample size must be at least 2")
        if not 0 <= self.n_outliers <= self.n:
            raise ValueError("outlier count must lie in [0, n]")


@dataclass(frozen=True)
class RecommendedParams:
    alpha_prime: float
    gamma1: float
    gamma2: float
    m: int
    p: int
    trees: int


def gammas(alpha: float, beta: float, d: int) -> tuple[float, float, float]:
    """Return ``(alpha', gamma1, gamma2)``.

    ``alpha' = (1 - 2**-alpha) / ln 2`` is the effective smoothness of a
    midpoint-split partition, ``gamma1 = alpha' / (d + 2 alpha')`` governs
    the estimation rate ``m**-gamma1`` and ``gamma2`` the admissible
    block-size threshold ``(n / n_outliers)**gamma2``.

    Note ``gamma2 >= 1`` holds whenever ``d >= 2 alpha'``, in particular
    for every ``d >= 2``; in one dimension with large ``alpha`` and
    ``beta > 0`` it can drop below 1.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    if d < 1:
        raise ValueError("dimension must be at least 1")
    alpha_prime = (1.0 - 2.0**-alpha) / math.log(2.0)
    gamma1 = alpha_prime / (d + 2.0 * alpha_prime)
    gamma2 = (d + 2.0 * alpha_prime) / ((1.0 - beta) * d + 2.0 * (1.0 + beta) * alpha_prime)
    return alpha_prime, gamma1, gamma2


def recommend(inputs: TheoryInputs) -> RecommendedParams:
    """Theory-scaled choices for block size, depth and tree count.

    With no outliers the threshold is infinite and the full sample is one
    block.  Rounding is to the nearest integer with floors at ``m = 1``,
    ``p = 0`` and ``trees = 1``.
    """
    alpha_prime, gamma1, gamma2 = gammas(inputs.alpha, inputs.beta, inputs.d)
    if inputs.n_outliers == 0:
        m = inputs.n
    else:
        threshold = (inputs.n / inputs.n_outliers) ** gamma2
        m = int(round(min(float(inputs.n), threshold)))
    m = max(1, min(m, inputs.n))
    p = max(0, int(round(((1.0 - 2.0 * gamma1) / math.log(2.0)) * math.log(m))))
    trees = max(1, int(round(m ** (2.0 * gamma1))))
    return RecommendedParams(
        alpha_prime=alpha_prime,
        gamma1=gamma1,
        gamma2=gamma2,
        m=m,
        p=p,
        trees=trees,
    )
