"""Encoding schemes: posterior matching, greedy EJS maximization, the
median-split family for binary-input channels, the exact and iterative
balanced-partition algorithms, and the K-ary symmetric partition rule.

Every encoder is a pure function of the posterior (plus channel metadata
bound at scheme construction); randomized encoders expose their law and are
sampled with an explicit stream.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import channel as channel_mod
from .belief import Belief
from .divergences import ejs_divergence, _ejs_batch
from .errors import (
    NoValidPartitionFound,
    NotBinaryInput,
    SchemeChannelMismatch,
    SearchSpaceTooLarge,
)

MAXEJS_DEFAULT_LIMIT = 2 ** 20
ALG1_DEFAULT_LIMIT = 20
KARY_EXHAUSTIVE_LIMIT = 2 ** 20

SCHEME_IDS = ("pm", "maxejs", "ghbz", "bz-prop", "bz-nu", "alg1", "alg2", "kary")


@dataclass(frozen=True)
class EncodingFunction:
    """Deterministic map message -> channel input, stored as a tuple."""

    assignment: tuple

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(v) for v in self.assignment))

    def as_array(self):
        return np.asarray(self.assignment, dtype=int)

    def __len__(self):
        return len(self.assignment)


@dataclass(frozen=True)
class RandomizedEncoder:
    """Randomized encoding rule, in one of two representations.

    `atoms`: explicit support, a tuple of (EncodingFunction, weight) pairs
    with weights summing to one.  `matrix`: product form, an M x |X| matrix
    of per-message input laws; realizations draw every message's input
    independently.
    """

    atoms: tuple = None
    matrix: np.ndarray = None

    @classmethod
    def explicit(cls, pairs):
        pairs = tuple((g if isinstance(g, EncodingFunction) else EncodingFunction(g), float(w))
                      for g, w in pairs)
        total = math.fsum(w for _, w in pairs)
        assert abs(total - 1.0) <= 1e-12, total
        return cls(atoms=pairs, matrix=None)

    @classmethod
    def product_form(cls, matrix):
        arr = np.array(matrix, dtype=float)
        assert arr.ndim == 2
        assert np.all(np.abs(arr.sum(axis=1) - 1.0) <= 1e-12)
        arr.setflags(write=False)
        return cls(atoms=None, matrix=arr)

    def sample(self, rng) -> EncodingFunction:
        if self.atoms is not None:
            weights = np.array([w for _, w in self.atoms])
            idx = int(np.searchsorted(np.cumsum(weights), rng.random(), side="right"))
            return self.atoms[min(idx, len(self.atoms) - 1)][0]
        cum = np.cumsum(self.matrix, axis=1)
        u = rng.random(self.matrix.shape[0])
        picks = [int(np.searchsorted(cum[i], u[i], side="right")) for i in range(len(u))]
        nx = self.matrix.shape[1]
        return EncodingFunction(tuple(min(p, nx - 1) for p in picks))


# -- posterior matching -------------------------------------------------------

def pm_encoder(b: Belief, consts) -> RandomizedEncoder:
    """Product-form posterior matching against the capacity-achieving law.

    Message i's interval of cumulative posterior mass is matched onto the
    input intervals of pi*: the i,x entry is the overlap of the two
    intervals divided by rho_i, with cumulative sums taken in fixed message
    order.  Zero-overlap candidates get weight zero; messages with zero
    posterior are parked on input 0 (weight-zero rows never affect the EJS).
    """
    rho = b.rho
    pi = np.asarray(consts.input_dist, dtype=float)
    hi_r = np.cumsum(rho)
    lo_r = hi_r - rho
    hi_p = np.cumsum(pi)
    lo_p = hi_p - pi
    overlap = (np.minimum(hi_r[:, None], hi_p[None, :])
               - np.maximum(lo_r[:, None], lo_p[None, :]))
    np.maximum(overlap, 0.0, out=overlap)
    lam = np.empty_like(overlap)
    for i in range(rho.shape[0]):
        if rho[i] > 0:
            lam[i] = overlap[i] / rho[i]
            lam[i] /= lam[i].sum()
        else:
            lam[i] = 0.0
            lam[i, 0] = 1.0
    return RandomizedEncoder.product_form(lam)


# -- greedy EJS maximization --------------------------------------------------

def maxejs_encoder(b: Belief, ch, search_limit: int = MAXEJS_DEFAULT_LIMIT) -> EncodingFunction:
    """Exhaustive argmax of EJS(rho, gamma) over all |X|^M deterministic maps.

    Ties resolve to the lexicographically smallest assignment.  Raises
    SearchSpaceTooLarge above `search_limit` candidates.
    """
    rho = b.rho
    m = rho.shape[0]
    nx = ch.num_inputs
    n_maps = nx ** m
    if n_maps > search_limit:
        raise SearchSpaceTooLarge(
            f"{nx}^{m} = {n_maps} maps exceed the search limit {search_limit}")

    if np.any(rho >= 1.0):
        best_val, best = -1.0, None
        for assignment in itertools.product(range(nx), repeat=m):
            val = ejs_divergence(rho, ch.transition[np.asarray(assignment)])
            if val > best_val:
                best_val, best = val, assignment
        return EncodingFunction(best)

    best_val, best = -1.0, None
    chunk = 4096
    buf = []
    for assignment in itertools.product(range(nx), repeat=m):
        buf.append(assignment)
        if len(buf) == chunk:
            best_val, best = _scan_chunk(rho, ch, buf, best_val, best)
            buf = []
    if buf:
        best_val, best = _scan_chunk(rho, ch, buf, best_val, best)
    return EncodingFunction(best)


def _scan_chunk(rho, ch, assignments, best_val, best):
    arr = np.asarray(assignments, dtype=int)
    vals = _ejs_batch(rho, ch.transition[arr])
    idx = int(np.argmax(vals))
    if vals[idx] > best_val:
        return float(vals[idx]), assignments[idx]
    return best_val, best


# -- median-split family ------------------------------------------------------

def _split_at(k, m):
    """gamma sending messages 0..k to input 0 and the rest to input 1."""
    return EncodingFunction(tuple(0 if i <= k else 1 for i in range(m)))


def _best_split(rho):
    cums = np.cumsum(rho)
    k = int(np.argmin(np.abs(cums - 0.5)))
    return k, float(cums[k] - 0.5)


def ghbz_encoder(b: Belief) -> EncodingFunction:
    """Deterministic median split: cut the message line where the cumulative
    posterior is closest to 1/2 (ties to the lowest index)."""
    k, _ = _best_split(b.rho)
    return _split_at(k, b.num_messages)


def bz_randomized_encoder(b: Belief, rule: str = "proportional",
                          crossover: float | None = None) -> RandomizedEncoder:
    """Two-atom randomization over the best and second-best median splits.

    The second split sits one message towards the lighter side; with
    imbalances d1 <= d2 of the two splits, the proportional rule weights the
    best split by d2/(d1+d2).  The `bz-nu` rule uses the crossover-dependent
    weighting nu(x) = log2((0.5+(1-2p)x)/(0.5-(1-2p)x)) instead, which never
    puts less weight on the best split than the proportional rule.  An
    exactly balanced best split collapses to a single atom.
    """
    rho = b.rho
    m = b.num_messages
    cums = np.cumsum(rho)
    k, s = _best_split(rho)
    g1 = _split_at(k, m)
    if s == 0.0:
        return RandomizedEncoder.explicit([(g1, 1.0)])
    k2 = k - (1 if s > 0 else -1)
    cum2 = cums[k2] if k2 >= 0 else 0.0
    d1 = abs(s)
    d2 = abs(cum2 - 0.5)
    g2 = _split_at(k2, m)
    if rule == "proportional":
        lam = d2 / (d1 + d2)
    elif rule == "bz-nu":
        if crossover is None or not 0 < crossover < 0.5:
            raise ValueError("bz-nu needs a crossover probability in (0, 1/2)")
        a = 1.0 - 2.0 * crossover

        def nu(x):
            return math.log2((0.5 + a * x) / (0.5 - a * x)) if x > 0 else 0.0

        lam = nu(d2) / (nu(d1) + nu(d2))
    else:
        raise ValueError(f"unknown randomization rule {rule!r}")
    return RandomizedEncoder.explicit([(g1, lam), (g2, 1.0 - lam)])


# -- balanced binary partitions -----------------------------------------------

def check_binary_condition(b: Belief, gamma) -> bool:
    """True iff delta = (mass on 0) - (mass on 1) satisfies 0 <= delta and
    delta < rho_i for every message i assigned to input 0 (strict, on the
    given floats)."""
    assignment = np.asarray(getattr(gamma, "assignment", gamma), dtype=int)
    rho = b.rho
    side0 = assignment == 0
    delta = float(rho[side0].sum() - rho[~side0].sum())
    if delta < 0.0:
        return False
    return bool(np.all(rho[side0] > delta))


def _pattern_rows(lo, hi, m):
    """Rows lo..hi-1 of the 2^m assignment table, MSB-first (lexicographic)."""
    n = np.arange(lo, hi, dtype=np.int64)[:, None]
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)[None, :]
    return ((n >> shifts) & 1).astype(np.int8)


def binary_partition_alg1(b: Belief, search_limit: int = ALG1_DEFAULT_LIMIT) -> EncodingFunction:
    """Exact minimizer of the nonnegative imbalance over all 2^M partitions.

    Returns the lexicographically smallest assignment attaining
    min { delta_gamma : delta_gamma >= 0 } where
    delta_gamma = (mass on 0) - (mass on 1).
    """
    rho = b.rho
    m = b.num_messages
    if m > search_limit:
        raise SearchSpaceTooLarge(f"2^{m} partitions exceed the limit 2^{search_limit}")
    best_delta, best_n = math.inf, -1
    chunk = 1 << 16
    for lo in range(0, 1 << m, chunk):
        hi = min(lo + chunk, 1 << m)
        bits = _pattern_rows(lo, hi, m)
        deltas = (1.0 - 2.0 * bits) @ rho
        ok = deltas >= 0.0
        if not ok.any():
            continue
        idx = np.flatnonzero(ok)
        j = idx[int(np.argmin(deltas[idx]))]
        if deltas[j] < best_delta:
            best_delta, best_n = float(deltas[j]), lo + int(j)
    bits = _pattern_rows(best_n, best_n + 1, m)[0]
    return EncodingFunction(tuple(int(v) for v in bits))


def binary_partition_alg2(b: Belief) -> EncodingFunction:
    """Iterative balanced partition.

    Repeatedly moves the smallest-posterior message off the heavy side,
    swapping sides whenever the balance flips, until every message left on
    the heavy side outweighs the imbalance.  Terminates within M(M-1)/2
    rounds; argmin ties resolve to the lowest index.
    """
    m = b.num_messages
    if m == 1:
        return EncodingFunction((0,))
    rho = b.rho.tolist()
    s0 = set(range(m))
    s1 = set()
    r0, r1 = 1.0, 0.0
    rho_min, delta = 0.0, 1.0
    rounds = 0
    max_rounds = m * (m - 1) // 2
    while rho_min < delta:
        rounds += 1
        assert rounds <= max_rounds, "partition loop exceeded its round bound"
        k = min(s0, key=lambda i: (rho[i], i))
        s0.remove(k)
        s1.add(k)
        r0 -= rho[k]
        r1 += rho[k]
        if r0 < r1:
            s0, s1 = s1, s0
            r0, r1 = r1, r0
        delta = r0 - r1
        rho_min = min((rho[i] for i in s0), default=math.inf)
    return EncodingFunction(tuple(0 if i in s0 else 1 for i in range(m)))


# -- K-ary symmetric partition --------------------------------------------------

def check_kary_condition(b: Belief, gamma, k: int) -> bool:
    """K-way analogue of the binary balance condition (non-strict).

    Whenever class x carries mass >= max(1/K, mass of x'), its lead over x'
    must not exceed any single posterior inside class x.
    """
    assignment = np.asarray(getattr(gamma, "assignment", gamma), dtype=int)
    rho = b.rho
    masses = np.bincount(assignment, weights=rho, minlength=k)
    lightest = float(masses.min())
    for x in range(k):
        if masses[x] < 1.0 / k:
            continue
        members = rho[assignment == x]
        if members.size == 0:
            continue
        if masses[x] - lightest > float(members.min()):
            return False
    return True


def kary_symmetric_encoder(b: Belief, k: int,
                           exhaustive_limit: int = KARY_EXHAUSTIVE_LIMIT) -> EncodingFunction:
    """K-way partition satisfying the symmetric balance condition.

    Greedy pass (heaviest remaining message onto the lightest class),
    then a repair loop that moves the lightest member out of an offending
    class; if repair stalls, falls back to exhaustive search.  The output is
    always verified against the condition before being returned.
    """
    if k < 2:
        raise SchemeChannelMismatch("K-ary partition needs K >= 2")
    rho = b.rho
    m = b.num_messages
    order = np.argsort(-rho, kind="stable")
    assignment = np.zeros(m, dtype=int)
    masses = np.zeros(k)
    for i in order:
        x = int(np.argmin(masses))
        assignment[i] = x
        masses[x] += rho[i]

    for _ in range(m * k):
        if check_kary_condition(b, assignment, k):
            return EncodingFunction(tuple(int(v) for v in assignment))
        lightest = float(masses.min())
        worst, worst_excess = -1, 0.0
        for x in range(k):
            members = rho[assignment == x]
            if masses[x] < 1.0 / k or members.size == 0:
                continue
            excess = masses[x] - lightest - float(members.min())
            if excess > worst_excess:
                worst, worst_excess = x, excess
        if worst < 0:
            break
        candidates = np.flatnonzero(assignment == worst)
        mover = candidates[int(np.argmin(rho[candidates]))]
        target = int(np.argmin(masses))
        masses[worst] -= rho[mover]
        masses[target] += rho[mover]
        assignment[mover] = target

    if check_kary_condition(b, assignment, k):
        return EncodingFunction(tuple(int(v) for v in assignment))
    if k ** m <= exhaustive_limit:
        for cand in itertools.product(range(k), repeat=m):
            if check_kary_condition(b, cand, k):
                return EncodingFunction(cand)
    raise NoValidPartitionFound(
        f"no K={k} partition found for M={m}; this should be unreachable")


# -- scheme registry ------------------------------------------------------------

@dataclass(frozen=True)
class Scheme:
    """A bound encoding scheme plus its guarantee metadata.

    `encode` maps a Belief to an EncodingFunction or RandomizedEncoder.
    `exponent_optimal` selects the audit thresholds: such schemes promise
    EJS >= rho_tilde * C1 in the confirmation regime on top of EJS >= C.
    `in_scope` is True when this channel belongs to the class for which the
    scheme's guarantees are proved; out-of-scope runs are simulated but
    audit findings are reported rather than enforced.
    """

    scheme_id: str
    encode: callable
    exponent_optimal: bool
    in_scope: bool
    note: str = ""


def _require_binary(ch, scheme_id):
    if ch.num_inputs != 2:
        raise NotBinaryInput(f"scheme {scheme_id!r} needs a binary-input channel")


def _has_pairing(ch):
    try:
        return channel_mod.detect_symmetric_pairing(ch) is not None
    except Exception:
        return False


def _uniform_input_law(consts, tol=1e-6):
    pi = np.asarray(consts.input_dist)
    return bool(np.all(np.abs(pi - 1.0 / pi.shape[0]) <= tol))


def make_scheme(scheme_id: str, ch, consts) -> Scheme:
    """Bind a scheme identifier to a channel, validating compatibility."""
    if scheme_id == "pm":
        return Scheme(scheme_id, lambda b: pm_encoder(b, consts),
                      exponent_optimal=False, in_scope=True)

    if scheme_id == "maxejs":
        def encode(b):
            n_maps = ch.num_inputs ** b.num_messages
            if n_maps > MAXEJS_DEFAULT_LIMIT:
                if ch.num_inputs == 2:
                    return binary_partition_alg2(b)
                raise SearchSpaceTooLarge(
                    f"{n_maps} maps exceed the exhaustive limit and no fallback applies")
            return maxejs_encoder(b, ch)
        note = ("falls back to alg2 beyond the exhaustive search limit"
                if ch.num_inputs == 2 else "")
        return Scheme(scheme_id, encode, exponent_optimal=True, in_scope=True, note=note)

    if scheme_id == "ghbz":
        _require_binary(ch, scheme_id)
        return Scheme(scheme_id, ghbz_encoder, exponent_optimal=False,
                      in_scope=_has_pairing(ch))

    if scheme_id in ("bz-prop", "bz-nu"):
        _require_binary(ch, scheme_id)
        if scheme_id == "bz-nu":
            p = channel_mod.is_bsc(ch)
            if p is None:
                raise SchemeChannelMismatch(
                    "bz-nu needs a binary symmetric channel with crossover in (0, 1/2)")
            return Scheme(scheme_id,
                          lambda b: bz_randomized_encoder(b, "bz-nu", crossover=p),
                          exponent_optimal=False, in_scope=True)
        return Scheme(scheme_id, lambda b: bz_randomized_encoder(b, "proportional"),
                      exponent_optimal=False, in_scope=_has_pairing(ch))

    if scheme_id in ("alg1", "alg2"):
        _require_binary(ch, scheme_id)
        fn = binary_partition_alg1 if scheme_id == "alg1" else binary_partition_alg2
        return Scheme(scheme_id, fn, exponent_optimal=True,
                      in_scope=_uniform_input_law(consts))

    if scheme_id == "kary":
        p = channel_mod.is_kary_symmetric(ch)
        if p is None:
            raise SchemeChannelMismatch("kary needs a K-ary symmetric channel")
        k = ch.num_inputs
        return Scheme(scheme_id, lambda b: kary_symmetric_encoder(b, k),
                      exponent_optimal=True, in_scope=True)

    raise KeyError(f"unknown scheme id {scheme_id!r}")
