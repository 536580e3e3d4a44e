"""Divergence kernel: KL, Jensen-Shannon, extrinsic Jensen-Shannon (EJS),
and the average log-likelihood functional U.

All values are in bits.  The conventions 0*log(a/0) = 0 and
b*log(b/0) = +inf (for b > 0) are honoured; +inf propagates through sums.
Scalar KL sums use math.fsum so results do not depend on the ordering of
the support, which keeps the derived channel constants exactly invariant
under output relabelling.
"""

import math

import numpy as np

from .errors import (
    DegenerateM,
    SupportMismatch,
    SupportTooLarge,
    WeightDimensionMismatch,
    ZeroSamples,
)

WEIGHT_SUM_TOL = 1e-12
MIXTURE_FLOOR = 1e-300
EXPLICIT_SUPPORT_LIMIT = 64
DEFAULT_MC_SAMPLES = 4096


def _as_dist(p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise SupportMismatch(f"expected a 1-d distribution, got shape {p.shape}")
    return p


def kl_divergence(p, q):
    """D(p || q) in bits; +inf when p puts mass where q does not."""
    p = _as_dist(p)
    q = _as_dist(q)
    if p.shape != q.shape:
        raise SupportMismatch(f"support sizes differ: {p.shape[0]} vs {q.shape[0]}")
    mask = p > 0
    ps = p[mask]
    qs = q[mask]
    if np.any(qs <= MIXTURE_FLOOR):
        return math.inf
    return math.fsum(ps * np.log2(ps / qs))


def entropy(p):
    """Shannon entropy in bits with the 0*log(1/0) = 0 convention."""
    p = _as_dist(p)
    ps = p[p > 0]
    return -math.fsum(ps * np.log2(ps))


def _check_weights(rho, m):
    rho = _as_dist(rho)
    if rho.shape[0] != m:
        raise WeightDimensionMismatch(
            f"weight vector has length {rho.shape[0]}, family has {m} members")
    if abs(float(rho.sum()) - 1.0) > 1e-9 or np.any(rho < 0):
        raise WeightDimensionMismatch("weights must be a probability vector")
    return rho


def _as_family(fam):
    fam = np.asarray(fam, dtype=float)
    if fam.ndim != 2:
        raise SupportMismatch(f"expected an M x |Y| family, got shape {fam.shape}")
    return fam


def js_divergence(rho, fam):
    """Jensen-Shannon divergence JS(rho; P_1..P_M) in bits.

    Computed both as the weighted KL sum to the mixture and as
    H(mixture) - sum_i rho_i H(P_i); the two forms must agree to 1e-12,
    which doubles as an internal numerical check.
    """
    fam = _as_family(fam)
    rho = _check_weights(rho, fam.shape[0])
    mix = rho @ fam
    kl_form = math.fsum(
        rho[i] * kl_divergence(fam[i], mix) for i in range(fam.shape[0]) if rho[i] > 0)
    ent_form = entropy(mix) - math.fsum(
        rho[i] * entropy(fam[i]) for i in range(fam.shape[0]) if rho[i] > 0)
    assert abs(kl_form - ent_form) <= 1e-12, (kl_form, ent_form)
    return kl_form


def ejs_divergence(rho, fam):
    """Extrinsic Jensen-Shannon divergence EJS(rho; P_1..P_M) in bits.

    Main branch: sum_i rho_i * D(P_i || sum_{j != i} rho_j/(1-rho_i) P_j).
    When some rho_i == 1 the extrinsic mixture is empty and the value is
    max_{j != i} D(P_i || P_j) instead.
    """
    fam = _as_family(fam)
    m = fam.shape[0]
    if m < 2:
        raise DegenerateM(f"need at least two distributions, got {m}")
    rho = _check_weights(rho, m)

    ones = np.flatnonzero(rho >= 1.0)
    if ones.size:
        i = int(ones[0])
        return max(kl_divergence(fam[i], fam[j]) for j in range(m) if j != i)

    total = rho @ fam
    terms = []
    for i in range(m):
        if rho[i] == 0:
            continue
        mix = (total - rho[i] * fam[i]) / (1.0 - rho[i])
        np.maximum(mix, 0.0, out=mix)  # guard cancellation noise
        terms.append(rho[i] * kl_divergence(fam[i], mix))
    return math.fsum(terms)


def avg_log_likelihood_u(rho):
    """U(rho) = sum_i rho_i log2((1-rho_i)/rho_i); -inf when some rho_i == 1."""
    rho = _as_dist(rho)
    terms = []
    for r in rho:
        if r == 0.0:
            continue
        if r == 1.0:
            return -math.inf
        terms.append(r * math.log2((1.0 - r) / r))
    return math.fsum(terms)


def _ejs_batch(rho, fams):
    """EJS for a batch of families, shape (B, M, |Y|) -> (B,).

    Requires all rho_i < 1 (the degenerate branch is handled by the
    scalar path).  +inf appears where some P_i has mass the extrinsic
    mixture lacks.
    """
    rho = np.asarray(rho, dtype=float)
    total = np.einsum("m,bmy->by", rho, fams)
    mix = total[:, None, :] - rho[None, :, None] * fams
    np.maximum(mix, 0.0, out=mix)
    mix /= (1.0 - rho)[None, :, None]

    pos = fams > 0
    bad = pos & (mix <= MIXTURE_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        contrib = np.where(pos & ~bad, fams * (np.log2(fams) - np.log2(mix)), 0.0)
    d = contrib.sum(axis=2)
    d[bad.any(axis=2)] = math.inf

    active = rho > 0
    with np.errstate(invalid="ignore"):
        weighted = np.where(active[None, :], rho[None, :] * d, 0.0)
    return weighted.sum(axis=1)


def _family_for(ch, assignment):
    assignment = np.asarray(assignment, dtype=int)
    return ch.transition[assignment]


def _ejs_det(rho, fam):
    """EJS of one deterministic family; vectorized fast path when no weight
    sits at 1 (the scalar path handles the degenerate branch)."""
    if np.all(rho < 1.0):
        return float(_ejs_batch(rho, fam[None, :, :])[0])
    return ejs_divergence(rho, fam)


def ejs_of_encoder(rho, ch, enc, mc_samples=DEFAULT_MC_SAMPLES, rng=None):
    """EJS of an encoding rule against a channel, as (value, stderr) in bits.

    `enc` may be a deterministic map (any int sequence or an object with an
    `assignment` attribute), an explicit-support randomized encoder (object
    with `atoms`: pairs of (map, weight)), or a product-form randomized
    encoder (object with `matrix`: M x |X| rows of per-message input laws).
    Deterministic and explicit-support values are exact (stderr 0); the
    product form is estimated by Monte Carlo over `mc_samples` independent
    realizations drawn from `rng`.
    """
    rho = _as_dist(rho)

    atoms = getattr(enc, "atoms", None)
    if atoms is not None:
        if len(atoms) > EXPLICIT_SUPPORT_LIMIT:
            raise SupportTooLarge(
                f"explicit support of {len(atoms)} atoms exceeds {EXPLICIT_SUPPORT_LIMIT}")
        value = math.fsum(
            w * _ejs_det(rho, _family_for(ch, g.assignment))
            for g, w in atoms if w > 0)
        return value, 0.0

    matrix = getattr(enc, "matrix", None)
    if matrix is not None:
        if mc_samples < 1:
            raise ZeroSamples("mc_samples must be >= 1")
        if rng is None:
            raise ValueError("product-form EJS estimation needs an rng")
        if np.any(rho >= 1.0):
            # every realization shares the same degenerate-branch treatment
            draws = _sample_product(matrix, rng, mc_samples)
            vals = np.array([ejs_divergence(rho, _family_for(ch, a)) for a in draws])
        else:
            draws = _sample_product(matrix, rng, mc_samples)
            vals = np.empty(mc_samples)
            chunk = 4096
            for lo in range(0, mc_samples, chunk):
                hi = min(lo + chunk, mc_samples)
                vals[lo:hi] = _ejs_batch(rho, ch.transition[draws[lo:hi]])
        if np.isinf(vals).any():
            return math.inf, 0.0
        mean = float(vals.mean())
        stderr = float(vals.std(ddof=1) / math.sqrt(mc_samples)) if mc_samples > 1 else 0.0
        return mean, stderr

    assignment = np.asarray(getattr(enc, "assignment", enc), dtype=int)
    if assignment.shape[0] != rho.shape[0]:
        raise WeightDimensionMismatch(
            f"encoder maps {assignment.shape[0]} messages, weights have {rho.shape[0]}")
    return _ejs_det(rho, _family_for(ch, assignment)), 0.0


def _sample_product(matrix, rng, n):
    """Draw n encoding maps, each message's input independent per its row."""
    matrix = np.asarray(matrix, dtype=float)
    m, nx = matrix.shape
    cum = np.cumsum(matrix, axis=1)
    u = rng.random((n, m))
    out = np.empty((n, m), dtype=int)
    for i in range(m):
        out[:, i] = np.searchsorted(cum[i], u[:, i], side="right")
    np.clip(out, 0, nx - 1, out=out)
    return out
