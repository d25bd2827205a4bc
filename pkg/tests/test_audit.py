from fractions import Fraction as F

import numpy as np
import pytest

import pruw.audit as audit_mod
from pruw.audit import _tv, audit_privacy
from pruw.errors import CompositeModulus


def test_tv_math():
    a = np.array([1, 1, 1, 1])
    assert _tv(a, a) == 0
    point_a = np.array([4, 0, 0, 0])
    point_b = np.array([0, 4, 0, 0])
    assert _tv(point_a, point_b) == 1
    assert _tv(point_a, a) == F(3, 4)
    # scale invariance
    assert _tv(np.array([2, 2]), np.array([500, 500])) == 0


def test_audit_all_distances_exactly_zero():
    report = audit_privacy(q=251, m_count=2)
    assert report["ok"]
    assert report["max_tv"] == "0"
    assert report["query"]["tv_theta"] == "0"
    assert report["query"]["tv_uniform"] == "0"
    assert report["update"]["tv_pairs"] == "0"
    assert report["update"]["tv_uniform"] == "0"
    assert report["storage"]["tv_values"] == "0"
    assert report["storage"]["tv_uniform"] == "0"
    assert report["storage"]["bijection"] is True


def test_audit_negative_controls_nonzero():
    report = audit_privacy(q=251, m_count=2)
    assert report["controls"]["nonzero"]
    assert F(report["controls"]["query"]) > 0
    assert F(report["controls"]["update"]) > 0
    assert F(report["controls"]["storage"]) > 0


def test_audit_small_prime():
    report = audit_privacy(q=13, m_count=2)
    assert report["ok"] and report["max_tv"] == "0"


def test_audit_rejects_composite_modulus():
    with pytest.raises(CompositeModulus):
        audit_privacy(q=10)


def test_broken_query_builder_detected(monkeypatch):
    # a builder that silently drops its noise must surface as nonzero TV
    real = audit_mod.build_queries

    def broken(theta, m_count, spec, consts, participants, rng=None, noise=None):
        if noise is not None:
            noise = np.zeros_like(np.asarray(noise))
        return real(theta, m_count, spec, consts, participants, rng=rng, noise=noise)

    monkeypatch.setattr(audit_mod, "build_queries", broken)
    report = audit_privacy(q=251, m_count=2)
    assert not report["ok"]
    assert F(report["query"]["tv_theta"]) > 0
