"""Posterior state over the message set: Bayes updates, predictive output
law, MAP decoding, and the shifted log-likelihood functional used by the
stopping-time analysis.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ImpossibleObservation

BELIEF_SUM_TOL = 1e-10


@dataclass(frozen=True)
class Belief:
    """Immutable posterior snapshot rho over M messages at time `step`."""

    rho: np.ndarray
    step: int = 0

    def __post_init__(self):
        arr = np.asarray(self.rho, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise DimensionMismatch(f"posterior must be a 1-d vector, got {arr.shape}")
        if np.any(arr < 0):
            raise DimensionMismatch("posterior entries must be nonnegative")
        total = float(arr.sum())
        if abs(total - 1.0) > 1e-6:
            raise DimensionMismatch(f"posterior sums to {total:.9g}")
        arr = arr / total
        arr.setflags(write=False)
        object.__setattr__(self, "rho", arr)

    @property
    def num_messages(self):
        return self.rho.shape[0]


def uniform_belief(num_messages: int) -> Belief:
    return Belief(np.full(num_messages, 1.0 / num_messages), step=0)


@dataclass(frozen=True)
class ThresholdParams:
    """Target error epsilon and the derived posterior threshold rho_tilde.

    rho_tilde = 1 - 1/(1 + max(log2 M, log2(1/epsilon))) separates the
    communication-like regime (all posteriors small) from the
    confirmation-like regime (one dominant message); it is >= 1/2 whenever
    M >= 2.
    """

    epsilon: float
    rho_tilde: float

    @property
    def log_odds_threshold(self):
        return math.log2(self.rho_tilde / (1.0 - self.rho_tilde))


def threshold_params(num_messages: int, epsilon: float) -> ThresholdParams:
    if num_messages < 2:
        raise DimensionMismatch("need at least two messages")
    if not 0 < epsilon < 1:
        raise DimensionMismatch("epsilon must lie in (0, 1)")
    peak = max(math.log2(num_messages), math.log2(1.0 / epsilon))
    rho_tilde = 1.0 - 1.0 / (1.0 + peak)
    assert rho_tilde >= 0.5
    return ThresholdParams(epsilon=epsilon, rho_tilde=rho_tilde)


def _assignment_array(gamma, m):
    arr = np.asarray(getattr(gamma, "assignment", gamma), dtype=int)
    if arr.shape != (m,):
        raise DimensionMismatch(
            f"encoding map covers {arr.shape} messages, posterior has {m}")
    return arr


def predictive_distribution(b: Belief, ch, gamma):
    """P(next output = y) = sum_j rho_j P(y | gamma(j))."""
    assignment = _assignment_array(gamma, b.num_messages)
    return b.rho @ ch.transition[assignment]


def bayes_update(b: Belief, ch, gamma, y: int) -> Belief:
    """Posterior after sending via `gamma` and observing output y.

    Renormalizes after the update to damp float drift over long sessions.
    Raises ImpossibleObservation when the predictive mass of y is zero
    (cannot happen on strictly positive channels).
    """
    assignment = _assignment_array(gamma, b.num_messages)
    lik = ch.transition[assignment, y]
    post = b.rho * lik
    total = float(post.sum())
    if total <= 0.0:
        raise ImpossibleObservation(f"output {y} has zero predictive probability")
    post /= total
    return Belief(post, step=b.step + 1)


def map_decode(b: Belief):
    """(argmax index, posterior mass); ties resolved to the lowest index."""
    idx = int(np.argmax(b.rho))
    return idx, float(b.rho[idx])


def u_tilde(b: Belief, tp: ThresholdParams) -> float:
    """Shifted average log-likelihood
    sum_i rho_i log2(rho_i/(1-rho_i)) - log2(rho_tilde/(1-rho_tilde)).

    +inf when some posterior equals 1 exactly.  Nonnegative values imply a
    posterior at or above rho_tilde; values >= log2(1/epsilon) imply a
    posterior at or above 1 - epsilon.
    """
    terms = []
    for r in b.rho:
        if r == 0.0:
            continue
        if r == 1.0:
            return math.inf
        terms.append(r * math.log2(r / (1.0 - r)))
    return math.fsum(terms) - tp.log_odds_threshold


def log_odds(rho):
    """Vector of log2(rho_i / (1 - rho_i)); +-inf at the boundary."""
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log2(rho) - np.log2(1.0 - rho)
