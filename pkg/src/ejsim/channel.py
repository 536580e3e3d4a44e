"""Discrete memoryless channel model: validation, output sampling, capacity
(via alternating maximization), the divergence constants C1/C2, and
symmetry-structure detection.

All logarithms are base 2; capacities are in bits per channel use.
"""

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .divergences import kl_divergence
from .errors import (
    ChannelInvalid,
    DegenerateChannel,
    IndexOutOfRange,
    InfiniteC2,
    NegativeEntry,
    NoConvergence,
    NonStochasticRow,
    NotBinaryInput,
    SearchSpaceTooLarge,
)

ROW_SUM_TOL = 1e-9
PAIRING_TOL = 1e-12
PAIRING_SEARCH_LIMIT = 8
BA_DEFAULT_TOL = 1e-9
BA_MAX_ITER = 100_000


@dataclass(frozen=True)
class Channel:
    """Row-stochastic matrix P(Y=y | X=x) over finite alphabets.

    Immutable after construction; safe to share across workers.
    """

    transition: np.ndarray
    strictly_positive: bool
    cum_rows: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def num_inputs(self):
        return self.transition.shape[0]

    @property
    def num_outputs(self):
        return self.transition.shape[1]


@dataclass(frozen=True)
class ChannelConstants:
    """Capacity C, capacity-achieving input law, and the constants C1, C2.

    c1 is the largest KL divergence between two input rows (bits), c2 the
    largest output-likelihood ratio across inputs.  c1/c2 are None until
    channel_constants fills them in.  c1_pair records which ordered input
    pair attains c1, since downstream guarantees are orientation-sensitive.
    """

    capacity: float
    input_dist: np.ndarray
    c1: float | None
    c2: float | None
    ba_tolerance: float
    c1_pair: tuple[int, int] | None = None


def validate_channel(matrix) -> Channel:
    """Check and normalize a transition matrix, returning a Channel.

    Rows may deviate from unit sum by at most 1e-9 and are renormalized.
    Raises NegativeEntry, NonStochasticRow, or DegenerateChannel (identical
    rows carry no information, so the capacity would be zero).
    """
    arr = np.array(matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ChannelInvalid(f"expected a 2-d matrix, got shape {arr.shape}")
    if np.any(arr < 0):
        raise NegativeEntry("transition probabilities must be nonnegative")
    sums = arr.sum(axis=1)
    off = np.abs(sums - 1.0)
    if np.any(off > ROW_SUM_TOL):
        bad = int(np.argmax(off))
        raise NonStochasticRow(f"row {bad} sums to {sums[bad]:.12g}")
    arr = arr / sums[:, None]
    if arr.shape[0] == 1 or np.all(np.abs(arr - arr[0]) <= 1e-12):
        raise DegenerateChannel("all rows identical: the channel carries no information")
    arr.setflags(write=False)
    cum = np.cumsum(arr, axis=1)
    cum.setflags(write=False)
    return Channel(transition=arr, strictly_positive=bool(np.all(arr > 0)), cum_rows=cum)


def sample_output(ch: Channel, x: int, rng) -> int:
    """Draw one output symbol for input x using the given numpy Generator."""
    if not 0 <= x < ch.num_inputs:
        raise IndexOutOfRange(f"input {x} outside [0, {ch.num_inputs})")
    y = int(np.searchsorted(ch.cum_rows[x], rng.random(), side="right"))
    return min(y, ch.num_outputs - 1)


def _divergences_to_mixture(p, q_floor):
    """Row-wise D(P_x || q) in bits for a fixed output law q (vectorized)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        contrib = np.where(p > 0, p * (np.log2(p) - np.log2(q_floor)), 0.0)
    return contrib.sum(axis=1)


def blahut_arimoto(ch: Channel, tol: float = BA_DEFAULT_TOL,
                   max_iter: int = BA_MAX_ITER) -> ChannelConstants:
    """Capacity and capacity-achieving input distribution.

    Alternating maximization from the uniform start; stops once the duality
    gap max_x D(P_x||q) - sum_x r_x D(P_x||q) falls below tol.  The returned
    capacity is the lower estimate, so it never exceeds the true value.  The
    fixed point reached from the uniform start is taken as the canonical
    input law when the maximizer is not unique.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = ch.transition
    r = np.full(ch.num_inputs, 1.0 / ch.num_inputs)
    for _ in range(max_iter):
        q = r @ p
        q = np.maximum(q, 1e-300)
        d = _divergences_to_mixture(p, q)
        lower = float(r @ d)
        upper = float(d.max())
        if upper - lower < tol:
            return ChannelConstants(capacity=lower, input_dist=r,
                                    c1=None, c2=None, ba_tolerance=tol)
        r = r * np.exp2(d - upper)
        r /= r.sum()
    raise NoConvergence(f"duality gap still above {tol} after {max_iter} iterations")


def channel_constants(ch: Channel, partial: ChannelConstants) -> ChannelConstants:
    """Fill in C1 and C2 next to an already-computed capacity.

    C1 = max over ordered input pairs of D(P_x || P_x'); C2 = max over
    outputs of the max/min likelihood ratio across inputs.  Requires a
    strictly positive channel, otherwise C2 is infinite and the audit
    machinery downstream cannot be used.
    """
    if not ch.strictly_positive:
        raise InfiniteC2("a zero transition probability makes C2 infinite")
    p = ch.transition
    c2 = float(np.max(p.max(axis=0) / p.min(axis=0)))
    c1 = -1.0
    pair = (0, 0)
    for x in range(ch.num_inputs):
        for x2 in range(ch.num_inputs):
            if x == x2:
                continue
            d = kl_divergence(p[x], p[x2])
            if d > c1:
                c1, pair = d, (x, x2)
    cap = partial.capacity
    assert cap > 0 and cap <= c1 + 1e-12 and c1 <= math.log2(c2) + 1e-12, (cap, c1, c2)
    assert c2 >= 1.0
    assert abs(float(partial.input_dist.sum()) - 1.0) <= 1e-12
    return ChannelConstants(capacity=cap, input_dist=partial.input_dist,
                            c1=c1, c2=c2, ba_tolerance=partial.ba_tolerance,
                            c1_pair=pair)


def derive_constants(ch: Channel, tol: float = BA_DEFAULT_TOL) -> ChannelConstants:
    """Convenience: run the capacity iteration and fill in C1/C2."""
    return channel_constants(ch, blahut_arimoto(ch, tol))


@dataclass(frozen=True)
class SymmetryPairing:
    """Involution f over outputs with P(y|0) = P(f(y)|1) for every y."""

    permutation: tuple[int, ...]


def detect_symmetric_pairing(ch: Channel, search_limit: int = PAIRING_SEARCH_LIMIT,
                             candidate=None):
    """Find an output involution pairing the two input rows, if one exists.

    Searches permutations in lexicographic order and returns the smallest
    involution satisfying the pairing identity to 1e-12, or None.  With
    `candidate` given, only that permutation is verified.  Raises
    SearchSpaceTooLarge when |Y| exceeds search_limit and no candidate is
    supplied.
    """
    if ch.num_inputs != 2:
        raise NotBinaryInput("pairing symmetry is defined for binary-input channels")
    ny = ch.num_outputs
    p = ch.transition

    def matches(perm):
        perm = np.asarray(perm, dtype=int)
        if np.any(perm[perm] != np.arange(ny)):
            return False
        return bool(np.all(np.abs(p[0] - p[1, perm]) <= PAIRING_TOL))

    if candidate is not None:
        if len(candidate) != ny:
            raise ChannelInvalid("candidate permutation has the wrong length")
        return SymmetryPairing(tuple(int(v) for v in candidate)) if matches(candidate) else None

    if ny > search_limit:
        raise SearchSpaceTooLarge(
            f"|Y| = {ny} exceeds the pairing search limit {search_limit}")
    for perm in itertools.permutations(range(ny)):
        if matches(perm):
            return SymmetryPairing(perm)
    return None


# -- ready-made channels ------------------------------------------------------

def bsc(p: float) -> Channel:
    """Binary symmetric channel with crossover probability p."""
    if not 0 <= p <= 1:
        raise ChannelInvalid("crossover probability must lie in [0, 1]")
    return validate_channel([[1.0 - p, p], [p, 1.0 - p]])


def kary_symmetric_channel(k: int, p: float) -> Channel:
    """K-ary symmetric channel: stays put w.p. 1-p, else uniform over the rest."""
    if k < 2:
        raise ChannelInvalid("need at least two symbols")
    if not 0 < p < (k - 1) / k:
        raise ChannelInvalid(f"error probability must lie in (0, {(k-1)/k:.4g})")
    off = p / (k - 1)
    m = np.full((k, k), off)
    np.fill_diagonal(m, 1.0 - p)
    return validate_channel(m)


def is_bsc(ch: Channel):
    """Crossover probability if the channel is a BSC with p in (0, 1/2), else None."""
    if ch.num_inputs != 2 or ch.num_outputs != 2:
        return None
    p = ch.transition
    if abs(p[0, 0] - p[1, 1]) > 1e-12 or abs(p[0, 1] - p[1, 0]) > 1e-12:
        return None
    cross = float(p[0, 1])
    return cross if 0 < cross < 0.5 else None


def is_kary_symmetric(ch: Channel):
    """Error probability if the channel is K-ary symmetric (K = |X| = |Y|), else None."""
    k = ch.num_inputs
    if ch.num_outputs != k or k < 2:
        return None
    p = ch.transition
    diag = np.diag(p)
    off = p[~np.eye(k, dtype=bool)]
    if np.ptp(diag) > 1e-12 or (off.size and np.ptp(off) > 1e-12):
        return None
    if off.size and abs((diag[0] + (k - 1) * off[0]) - 1.0) > 1e-9:
        return None
    err = float(1.0 - diag[0])
    return err if 0 < err < (k - 1) / k else None


def asymmetric_uniform_ternary(eta: float = 0.25, *, smoothing: float = 0.01,
                               spread: float | None = None) -> Channel:
    """Strictly positive binary-input ternary-output channel with uniform
    capacity-achieving input distribution and no output-pairing symmetry.

    Row 0 is the smoothed step [1-eta-smoothing, eta, smoothing]; row 1 keeps
    a deliberately different middle mass (`spread`, default eta - 0.03) and
    its first entry is solved by bisection so both inputs are equally
    informative about the output, which places the optimal input law at
    (1/2, 1/2).  Rows are oriented so that D(P0 || P1) attains the pairwise
    maximum C1.
    """
    if not 0 < eta < 0.5:
        raise ChannelInvalid("eta must lie in (0, 1/2)")
    if spread is None:
        spread = eta - 0.03
    if not 0 < smoothing < eta or not 0 < spread < 1:
        raise ChannelInvalid("smoothing/spread outside the usable range")
    p0 = np.array([1.0 - eta - smoothing, eta, smoothing])

    def gap(z):
        p1 = np.array([z, spread, 1.0 - spread - z])
        mix = 0.5 * (p0 + p1)
        return kl_divergence(p0, mix) - kl_divergence(p1, mix)

    zs = np.linspace(1e-6, 1.0 - spread - 1e-6, 400)
    vals = [gap(z) for z in zs]
    lo = None
    for a, b, va, vb in zip(zs, zs[1:], vals, vals[1:]):
        if va == 0.0 or va * vb < 0:
            lo, hi, vlo = a, b, va
            break
    if lo is None:
        raise ChannelInvalid("no equal-information solution in the search range")
    if vlo == 0.0:
        z_star = lo
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            vm = gap(mid)
            if vm == 0.0:
                lo = hi = mid
                break
            if vm * vlo > 0:
                lo, vlo = mid, vm
            else:
                hi = mid
        z_star = 0.5 * (lo + hi)

    p1 = np.array([z_star, spread, 1.0 - spread - z_star])
    assert abs(gap(z_star)) < 1e-10
    if kl_divergence(p0, p1) < kl_divergence(p1, p0):
        p0, p1 = p1, p0
    ch = validate_channel(np.vstack([p0, p1]))
    assert ch.strictly_positive
    assert detect_symmetric_pairing(ch) is None
    return ch


# -- file interface -----------------------------------------------------------

def load_channel(path) -> Channel:
    """Read a channel spec file: JSON with fields inputs, outputs, rows."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise ChannelInvalid(f"cannot read channel file: {e}") from e
    except json.JSONDecodeError as e:
        raise ChannelInvalid(f"channel file is not valid JSON: {e}") from e
    for key in ("inputs", "outputs", "rows"):
        if key not in doc:
            raise ChannelInvalid(f"channel file missing field {key!r}")
    rows = doc["rows"]
    try:
        arr = np.array(rows, dtype=float)
    except (TypeError, ValueError) as e:
        raise ChannelInvalid(f"rows are not numeric: {e}") from e
    if arr.ndim != 2 or arr.shape != (int(doc["inputs"]), int(doc["outputs"])):
        raise ChannelInvalid(
            f"rows have shape {arr.shape}, expected ({doc['inputs']}, {doc['outputs']})")
    return validate_channel(arr)


def save_channel(ch: Channel, path):
    doc = {"inputs": ch.num_inputs, "outputs": ch.num_outputs,
           "rows": ch.transition.tolist()}
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def channel_digest(ch: Channel) -> str:
    """Stable short hash of the transition matrix, for output provenance."""
    payload = json.dumps(ch.transition.tolist()).encode()
    return hashlib.sha256(payload).hexdigest()[:16]
