import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenred.costs import GroundCostSpec, cost_bm, cost_bm_symmetrized, cost_norm
from scenred.errors import CertificateMissing, NotSymmetric, SupportMismatch
from scenred.measures import dirac, random_distribution, uniform, union_support
from scenred.otsolve import wasserstein_p
from scenred.problems import build_newsvendor, expected_value, toy_knapsack
from scenred.regret import certify_domination, regret_matrix
from scenred.stability import check_stability, check_symmetric_shortcut, stability_pipeline


@pytest.fixture(scope="module")
def newsvendor():
    return build_newsvendor(0.0, 1.0, 1.0, [12, 18])


def test_identical_distributions(newsvendor):
    P = uniform([(10,), (20,)])
    C = cost_norm(P.atoms)
    cert = certify_domination(regret_matrix(newsvendor, P.atoms), C)
    rep = check_stability(newsvendor, P, P, C, cert)
    assert rep.lhs_forward == 0 and rep.bound_forward == 0 and rep.passed


def test_newsvendor_bm_pipeline(newsvendor):
    res = stability_pipeline(newsvendor, uniform([(10,), (20,)]), dirac((10,)), GroundCostSpec("BM", {"alpha": 0.1}))
    assert res.certificate.valid and res.report.passed and res.report.taint == "exact"


def test_norm_cost_with_certified_beta_bounds_by_w1():
    inst = build_newsvendor(0.2, 1.0, 3.0, range(0, 31, 3))
    rng = np.random.default_rng(4)
    cands = [(float(v),) for v in range(31)]
    for _ in range(10):
        P, nu = random_distribution(rng, cands, 4), random_distribution(rng, cands, 3)
        union = union_support(P, nu)
        C = cost_norm(union)
        cert = certify_domination(regret_matrix(inst, union), C)
        rep = check_stability(inst, P, nu, C, cert)
        assert rep.passed
        assert abs(expected_value(inst, P)[0] - expected_value(inst, nu)[0]) <= cert.beta_hat * wasserstein_p(P, nu) + 1e-7


def test_missing_or_invalid_certificates(newsvendor):
    P, nu = uniform([(10,), (20,)]), dirac((10,))
    C = cost_norm(P.atoms)
    with pytest.raises(CertificateMissing):
        check_stability(newsvendor, P, nu, C)
    cert = certify_domination(regret_matrix(newsvendor, [(10,)]), cost_norm([(10,)]))
    with pytest.raises(SupportMismatch):
        check_stability(newsvendor, P, nu, C, cert)
    bad = certify_domination(regret_matrix(newsvendor, P.atoms), cost_norm(P.atoms).scaled(0.0))
    with pytest.raises(CertificateMissing):
        check_stability(newsvendor, P, nu, C, bad)


def test_structural_beta_is_accepted(newsvendor):
    P, nu = uniform([(10,), (20,)]), dirac((20,))
    rep = check_stability(newsvendor, P, nu, cost_norm(P.atoms), beta=1.0)
    assert rep.beta == 1.0 and rep.passed


def test_symmetric_shortcut_matches_two_sided_path():
    inst = build_newsvendor(0.2, 1.0, 3.0, range(0, 31, 3))
    rng = np.random.default_rng(6)
    cands = [(float(v),) for v in range(31)]
    for _ in range(10):
        P, nu = random_distribution(rng, cands, 4), random_distribution(rng, cands, 4)
        union = union_support(P, nu)
        for C in (cost_bm_symmetrized(inst, union, alpha=0.2), cost_norm(union)):
            cert = certify_domination(regret_matrix(inst, union), C)
            full = check_stability(inst, P, nu, C, cert)
            short = check_symmetric_shortcut(inst, P, nu, C, cert)
            assert abs(full.bound_forward - full.bound_backward) <= 1e-9
            assert abs(short.bound_forward - full.bound_forward) <= 1e-9
            assert short.passed == full.passed


def test_symmetric_shortcut_rejects_asymmetric_cost():
    inst = build_newsvendor(0.2, 1.0, 3.0, range(0, 31, 3))
    P, nu = uniform([(0.0,), (9.0,), (30.0,)]), uniform([(3.0,), (27.0,)])
    union = union_support(P, nu)
    C = cost_bm(inst, union, alpha=0.1)
    assert not C.symmetric_flag
    cert = certify_domination(regret_matrix(inst, union), C)
    with pytest.raises(NotSymmetric):
        check_symmetric_shortcut(inst, P, nu, C, cert)


def test_halved_beta_breaks_a_tight_case():
    inst = toy_knapsack()
    P, nu = dirac((3.0,)), dirac((6.0,))
    union = union_support(P, nu)
    C = cost_norm(union)
    cert = certify_domination(regret_matrix(inst, union), C)
    rep = check_stability(inst, P, nu, C, cert)
    assert rep.passed and rep.lhs_forward == pytest.approx(rep.bound_forward)
    assert not check_stability(inst, P, nu, C, cert, beta=cert.beta_hat / 2).passed


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 3.0))
def test_bm_stability_property(seed, alpha):
    rng = np.random.default_rng(seed)
    inst = build_newsvendor(rng.random(), rng.random() * 3, rng.random() * 3, range(0, 31, 5))
    cands = [(float(v),) for v in range(31)]
    P, nu = random_distribution(rng, cands, 5), random_distribution(rng, cands, 3)
    assert stability_pipeline(inst, P, nu, GroundCostSpec("BM", {"alpha": alpha})).report.passed
