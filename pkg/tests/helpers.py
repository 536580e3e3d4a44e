"""Shared sampling utilities for the test suite."""

import numpy as np

import ejsim as ej


def random_posterior(rng, m, concentration=1.0):
    return rng.dirichlet(np.full(m, concentration))


def spiked_posterior(rng, m, floor):
    """Posterior whose largest entry is drawn from [floor, ~1)."""
    top = floor + (0.999 - floor) * rng.random()
    rest = rng.dirichlet(np.ones(m - 1)) * (1.0 - top)
    out = np.concatenate(([top], rest))
    rng.shuffle(out)
    return out


def random_channel(rng, nx, ny):
    """Strictly positive channel with Dirichlet rows."""
    while True:
        rows = rng.dirichlet(np.ones(ny), size=nx)
        rows = np.maximum(rows, 1e-9)
        rows /= rows.sum(axis=1, keepdims=True)
        try:
            return ej.validate_channel(rows)
        except ej.errors.DegenerateChannel:
            continue


def random_involution(rng, n):
    """Uniform-ish random involution on range(n), as an index array."""
    perm = np.arange(n)
    free = list(range(n))
    rng.shuffle(free)
    while len(free) >= 2:
        a = free.pop()
        if rng.random() < 0.5:
            continue  # fixed point
        b = free.pop()
        perm[a], perm[b] = b, a
    return perm


def random_symmetric_binary(rng, ny):
    """Binary-input channel satisfying the output-pairing symmetry."""
    while True:
        p0 = rng.dirichlet(np.ones(ny))
        p0 = np.maximum(p0, 1e-6)
        p0 /= p0.sum()
        f = random_involution(rng, ny)
        if np.all(f == np.arange(ny)):
            continue  # identity pairing would force identical rows
        p1 = p0[f]
        try:
            return ej.validate_channel(np.vstack([p0, p1])), f
        except ej.errors.DegenerateChannel:
            continue


def mutual_information_joint(joint):
    """I(Theta; Y) from a joint pmf by the direct double sum (bits)."""
    joint = np.asarray(joint, dtype=float)
    rows = joint.sum(axis=1)
    cols = joint.sum(axis=0)
    prod = np.outer(rows, cols)
    mask = joint > 0
    return float(np.sum(joint[mask] * np.log2(joint[mask] / prod[mask])))
