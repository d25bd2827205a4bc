"""Exhaustive-enumeration audits of the privacy, security and masking claims.

Run at a small prime so the full noise space is enumerable. Each audit
extracts the affine noise-to-message map from the production builders (a
zero-noise call gives the deterministic part, a unit-noise call gives the
coefficient), sweeps the entire noise space, and compares the exact induced
distributions:

  * queries: identical for different hidden indices, and uniform;
  * updates: identical for different (index, delta) pairs, and uniform;
  * storage: identical for different submodel values, uniform, and the
    map from the masking vector to the stored symbol is a bijection.

All total-variation distances must be exactly zero. Negative controls
repeat each audit with the noise term removed, which must push the
distance away from zero; they guard against a silently broken builder.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .field import make_field, gen_eval_constants
from .planfile import fraction_str
from .protocol import build_queries, build_updates, derive_code, encode_subpacket

ZERO = Fraction(0)


def _tv(counts_a: np.ndarray, counts_b: np.ndarray) -> Fraction:
    total_a = int(counts_a.sum())
    total_b = int(counts_b.sum())
    diff = abs(
        counts_a.astype(object) * total_b - counts_b.astype(object) * total_a
    ).sum()
    return Fraction(int(diff), 2 * total_a * total_b)


def _tv_uniform(counts: np.ndarray) -> Fraction:
    uniform = np.full(counts.shape, 1, dtype=object)
    return _tv(counts, np.asarray(uniform))


def _query_counts(q, spec, consts, n, theta, m_count, noise_on) -> np.ndarray:
    """Joint distribution of the M query symbols over the full noise space."""
    det = build_queries(
        theta, m_count, spec, consts, [n],
        noise=np.zeros((spec.y, spec.K, m_count), dtype=np.int64),
    ).vectors[n][0, 0, :]
    unit = np.zeros((spec.y, spec.K, m_count), dtype=np.int64)
    coeffs = []
    for m in range(m_count):
        unit[:] = 0
        unit[0, 0, m] = 1
        shifted = build_queries(theta, m_count, spec, consts, [n], noise=unit).vectors[n][0, 0, :]
        coeffs.append(int((shifted[m] - det[m]) % q))
    if not noise_on:
        coeffs = [0] * m_count
    grids = np.meshgrid(*[np.arange(q)] * m_count, indexing="ij")
    counts = np.zeros((q,) * m_count, dtype=np.int64)
    coords = tuple(
        (int(det[m]) + coeffs[m] * grids[m]) % q for m in range(m_count)
    )
    np.add.at(counts, coords, 1)
    return counts


def _update_counts(q, spec, consts, participants, n, theta, delta_val, noise_on) -> np.ndarray:
    delta = np.array([[[delta_val]]], dtype=np.int64)
    det = build_updates(
        delta, theta, spec, consts, participants, (),
        noise=np.zeros((spec.K, 1), dtype=np.int64),
    ).payload[n][0, 0]
    shifted = build_updates(
        delta, theta, spec, consts, participants, (),
        noise=np.ones((spec.K, 1), dtype=np.int64),
    ).payload[n][0, 0]
    coeff = int((shifted - det) % q) if noise_on else 0
    values = (int(det) + coeff * np.arange(q)) % q
    return np.bincount(values, minlength=q)


def _storage_counts(q, spec, consts, n, w_val, noise_on) -> tuple[np.ndarray, bool]:
    w = np.array([[[[w_val]]]], dtype=np.int64)  # (S=1, M=1, y=1, K=1)
    zero = np.zeros((1, spec.y, spec.x + 1, 1), dtype=np.int64)
    det = encode_subpacket(w, spec, consts, [n], noise=zero)[n][0, 0, 0]
    unit = zero.copy()
    unit[0, 0, 0, 0] = 1
    shifted = encode_subpacket(w, spec, consts, [n], noise=unit)[n][0, 0, 0]
    coeff = int((shifted - det) % q) if noise_on else 0
    values = (int(det) + coeff * np.arange(q)) % q
    counts = np.bincount(values, minlength=q)
    bijection = bool((counts == 1).all())
    return counts, bijection


def audit_privacy(q: int = 251, m_count: int = 2, seed: int = 0) -> dict:
    """Full enumeration audit at modulus q; every main distance must be 0."""
    field = make_field(q)
    spec = derive_code(1, 4)
    consts = gen_eval_constants(field, 4, spec.y, spec.K, seed=seed)
    participants = [1, 2, 3, 4]

    query_theta = ZERO
    query_uniform = ZERO
    for n in participants:
        counts = [
            _query_counts(q, spec, consts, n, theta, m_count, True)
            for theta in (1, 2)
        ]
        query_theta = max(query_theta, _tv(counts[0], counts[1]))
        query_uniform = max(query_uniform, *(_tv_uniform(c) for c in counts))
    ctrl = [
        _query_counts(q, spec, consts, 1, theta, m_count, False) for theta in (1, 2)
    ]
    query_control = _tv(ctrl[0], ctrl[1])

    update_pairs = ZERO
    update_uniform = ZERO
    cases = [(1, 17), (2, 200), (1, 0)]
    for n in participants:
        dists = [
            _update_counts(q, spec, consts, participants, n, theta, dv, True)
            for theta, dv in cases
        ]
        for i in range(len(dists)):
            for j in range(i + 1, len(dists)):
                update_pairs = max(update_pairs, _tv(dists[i], dists[j]))
            update_uniform = max(update_uniform, _tv_uniform(dists[i]))
    ctrl = [
        _update_counts(q, spec, consts, participants, 1, theta, dv, False)
        for theta, dv in cases[:2]
    ]
    update_control = _tv(ctrl[0], ctrl[1])

    storage_w = ZERO
    storage_uniform = ZERO
    bijection = True
    for n in participants:
        dists = []
        for w_val in (0, 123):
            counts, bij = _storage_counts(q, spec, consts, n, w_val, True)
            bijection &= bij
            dists.append(counts)
        storage_w = max(storage_w, _tv(dists[0], dists[1]))
        storage_uniform = max(storage_uniform, *(_tv_uniform(c) for c in dists))
    ctrl = [
        _storage_counts(q, spec, consts, 1, w_val, False)[0] for w_val in (0, 123)
    ]
    storage_control = _tv(ctrl[0], ctrl[1])

    max_tv = max(query_theta, query_uniform, update_pairs, update_uniform,
                 storage_w, storage_uniform)
    controls_ok = query_control > 0 and update_control > 0 and storage_control > 0
    return {
        "q": q,
        "m": m_count,
        "query": {
            "tv_theta": fraction_str(query_theta),
            "tv_uniform": fraction_str(query_uniform),
        },
        "update": {
            "tv_pairs": fraction_str(update_pairs),
            "tv_uniform": fraction_str(update_uniform),
        },
        "storage": {
            "tv_values": fraction_str(storage_w),
            "tv_uniform": fraction_str(storage_uniform),
            "bijection": bijection,
        },
        "controls": {
            "query": fraction_str(query_control),
            "update": fraction_str(update_control),
            "storage": fraction_str(storage_control),
            "nonzero": controls_ok,
        },
        "max_tv": fraction_str(max_tv),
        "ok": max_tv == 0 and bijection and controls_ok,
    }
