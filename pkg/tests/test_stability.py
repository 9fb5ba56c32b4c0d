import numpy as np
import pytest

from resetfreq.config import with_reset_matrix
from resetfreq.model import clegg, fore
from resetfreq.stability import (assess_stability, h_beta_search, is_controllable,
                                 is_observable, open_loop_df_condition, spr_check,
                                 verify_certificate)


def test_df_condition_clauses():
    c = open_loop_df_condition(clegg(), 1.0)
    assert not c.hurwitz and c.contraction and c.spectral_radius == 0.0
    assert not c
    for w in (0.1, 1.0, 100.0):
        assert open_loop_df_condition(fore(2.0, 0.9), w)
        assert open_loop_df_condition(fore(2.0, 1.0), w)


def test_spr_scalar_examples():
    assert spr_check([[1.0]], [[-1.0]], [[1.0]]) > 0
    assert spr_check([[1.0]], [[1.0]], [[1.0]]) == -np.inf


def test_rank_checks():
    A = np.array([[-1.0, 0.0], [0.0, -2.0]])
    assert is_controllable(A, [[1.0], [1.0]])
    assert not is_controllable(A, [[1.0], [0.0]])
    assert is_observable(A, [[1.0, 1.0]])
    assert not is_observable(A, [[0.0, 1.0]])


@pytest.mark.parametrize("name", ["spcid", "cg1", "cg2"])
def test_certificate_found_and_reverified(systems, name):
    sys = systems[name]
    cert = h_beta_search(sys)
    assert cert is not None
    chk = verify_certificate(sys, cert.rho, cert.beta)
    assert chk["ok"] and chk["rho_pd"] and chk["jump"] < 0 and chk["spr_margin"] > 0
    for c in (0.5, 2.0):
        s = cert.scaled(c)
        assert verify_certificate(sys, s.rho, s.beta)["ok"]


def test_search_with_user_grid_returns_none_or_valid(systems):
    sys = systems["cg1"]
    cert = h_beta_search(sys, betas=[0.0, 1.0, -1.0])
    assert cert is None or verify_certificate(sys, cert.rho, cert.beta)["ok"]


def test_identity_reset_reduces_to_lti(systems):
    rep = assess_stability(systems["pid"])
    assert rep.status == "reduces to LTI" and rep.ok and rep.certificate is None
    sys = with_reset_matrix(systems["spcid"], np.eye(1))
    assert h_beta_search(sys) is None
    assert assess_stability(sys).status == "reduces to LTI"


def test_report_statuses(systems):
    assert assess_stability(systems["cg1"]).status == "certified"
    with pytest.warns(RuntimeWarning):
        rep = assess_stability(systems["ppcid"])
    # the search over the documented grid finds no certificate for this loop
    assert rep.status == "no certificate found" and not rep.ok
