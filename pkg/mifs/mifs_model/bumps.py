"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Smooth cutoff functions shared by every compactly supported construction.  All functions are
vectorised over numpy arrays and return (value, derivative) pairs where a derivative is needed.
"""

import numpy as np

# max of d/du of smooth_step, attained at u = 1/2
SMOOTH_STEP_MAX_SLOPE = 2.0

# the fragmentation cutoff is 1 on [-1, 1] and vanishes outside +/- (2 - THETA_DELTA0)
THETA_DELTA0 = 0.1


def _g(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """exp(-1/u) for u > 0 and its derivative, zero otherwise"""
    u = np.asarray(u, dtype=float)
    pos = u > 0
    safe = np.where(pos, u, 1.0)
    val = np.where(pos, np.exp(-1.0 / safe), 0.0)
    der = np.where(pos, val / safe**2, 0.0)
    return val, der


def smooth_step(u) -> tuple[np.ndarray, np.ndarray]:
    """
    C-infinity step: 0 for u <= 0, 1 for u >= 1
    :param u: array of arguments
    :return: (S(u), S'(u))
    """
    a, da = _g(u)
    b, db = _g(1.0 - np.asarray(u, dtype=float))
    denom = a + b
    val = a / denom
    der = (da * b + a * db) / denom**2
    return val, der


def plateau(s, inner: float, outer: float) -> tuple[np.ndarray, np.ndarray]:
    """
    even cutoff in s: 1 for |s| <= inner, 0 for |s| >= outer
    :return: (value, d/ds)
    """
    if not 0 <= inner < outer:
        raise ValueError(f'plateau needs 0 <= inner < outer, got {inner}, {outer}')
    s = np.asarray(s, dtype=float)
    width = outer - inner
    val, der = smooth_step((outer - np.abs(s)) / width)
    return val, -der * np.sign(s) / width


def compact_bump(s) -> tuple[np.ndarray, np.ndarray]:
    """the normalised bump exp(1 - 1/(1 - s^2)) on |s| < 1, equal to 1 at the origin"""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    w = np.where(inside, 1.0 - s**2, 1.0)
    val = np.where(inside, np.exp(1.0 - 1.0 / w), 0.0)
    der = np.where(inside, val * (-2.0 * s) / w**2, 0.0)
    return val, der


def theta(s, delta0: float = THETA_DELTA0) -> tuple[np.ndarray, np.ndarray]:
    """the layer cutoff of the fragmentation construction"""
    return plateau(s, 1.0, 2.0 - delta0)


def log_radius_step(r, r_in: float, r_out: float) -> tuple[np.ndarray, np.ndarray]:
    """
    radial cutoff that is smooth in log(r): 1 for r <= r_in, 0 for r >= r_out
    The derivative in r is bounded by SMOOTH_STEP_MAX_SLOPE / (r * log(r_out / r_in)).
    :return: (value, d/dr)
    """
    if not 0 < r_in < r_out:
        raise ValueError(f'log_radius_step needs 0 < r_in < r_out, got {r_in}, {r_out}')
    r = np.asarray(r, dtype=float)
    span = np.log(r_out / r_in)
    safe = np.where(r > 0, r, r_in)
    u = np.log(r_out / safe) / span
    val, der = smooth_step(u)
    return val, np.where(r > 0, -der / (safe * span), 0.0)
