import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from freeent import blockmat as bm
from freeent import entropy as en
from freeent import pdf
from freeent.free_group import Alphabet, ball, length_lex_chain
from freeent.montecarlo import random_rep
from freeent.pdf import RadiusError


def haagerup_closed_form(values):
    return sum(math.log(1 - abs(v) ** 2) for v in values)


def szego_integral(t):
    """``∫ log w dθ/2π`` for the spectral density of ``t^|j|``."""
    w = lambda th: (1 - t**2) / abs(1 - t * np.exp(1j * th)) ** 2
    val, _ = integrate.quad(lambda th: math.log(w(th)), -math.pi, math.pi, epsabs=1e-13)
    return val / (2 * math.pi)


@pytest.mark.parametrize("t", [0.1, 0.5, 0.8])
def test_rank_one_matches_szego_quadrature(t):
    rep = en.h_ann(pdf.haagerup(t, r=1), n_max=3)
    oracle = szego_integral(t)
    for vals in (rep.seq1, rep.seq2, rep.seward_partial, rep.verblunsky_partial):
        assert np.allclose(vals, oracle, atol=1e-10)


@pytest.mark.parametrize("values", [[0.4, 0.4], [0.3 + 0.4j, 0.2], [0.7, -0.1j, 0.5]])
def test_haagerup_closed_form(values):
    phi = pdf.haagerup(values)
    n_max = 2 if len(values) == 2 else 1
    rep = en.h_ann(phi, n_max=n_max)
    expect = haagerup_closed_form(values)
    for vals in (rep.seq1, rep.seq2, rep.avg, rep.seward_partial, rep.verblunsky_partial):
        assert np.allclose(vals, expect, atol=1e-10)
    assert rep.converged


def test_h_ball_direct_determinant():
    t = 0.35
    phi = pdf.haagerup(t, r=2)
    G = pdf.block_gram(phi, ball(1, Alphabet(2))).matrix
    direct = np.linalg.slogdet(G)[1] - 2 * math.log(1 - t**2)
    assert en.h_ball(phi, 1) == pytest.approx(direct, abs=1e-12)


def test_regular_character_is_zero():
    rep = en.h_ann(pdf.regular_character(2, k=2), n_max=2)
    assert rep.seq1 == pytest.approx([0.0] * 3, abs=1e-13)
    assert rep.seward_partial == pytest.approx([0.0] * 3, abs=1e-13)


def test_scaling_law():
    phi = pdf.diag_join(pdf.haagerup(0.3, r=2), pdf.haagerup(0.5j, r=2), radius=4)
    T = np.array([[2.0, 1.0j], [0.0, 0.5]])
    psi = pdf.congruence(phi, T)
    shift = 2 * math.log(abs(np.linalg.det(T)))
    a, b = en.h_ann(phi, n_max=1), en.h_ann(psi, n_max=1)
    assert np.allclose(np.array(b.seq1) - np.array(a.seq1), shift, atol=1e-10)
    assert np.allclose(np.array(b.seq2) - np.array(a.seq2), shift, atol=1e-10)
    assert np.allclose(np.array(b.seward_partial) - np.array(a.seward_partial), shift, atol=1e-10)


def test_additivity_under_joining():
    phi, psi = pdf.haagerup([0.2, 0.6]), pdf.haagerup([0.5, 0.1j])
    joined = en.h_ann(pdf.diag_join(phi, psi, radius=4), n_max=1)
    a, b = en.h_ann(phi, n_max=1), en.h_ann(psi, n_max=1)
    assert np.allclose(joined.seq1, np.add(a.seq1, b.seq1), atol=1e-10)
    assert np.allclose(joined.seq2, np.add(a.seq2, b.seq2), atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
def test_upper_bound_and_interleaving_random(seed, w):
    rng = np.random.default_rng(seed)
    phi = pdf.haagerup(0.6, r=2)
    # mix a Haagerup function with a random representation on B_4
    rep_vals = {}
    rep = random_rep(2, 20, seed)
    V = np.linalg.qr(rng.standard_normal((20, 1)) + 1j * rng.standard_normal((20, 1)))[0]
    orb = rep.orbit(V, ball(4, Alphabet(2)))
    for g, x in orb.items():
        rep_vals[g] = (1 - w) * phi.value(g) + w * (V.conj().T @ x)
    table = pdf.PdFunction(2, 1, 4, "table", {"table": rep_vals})
    r = en.h_ann(table, n_max=1)
    assert max(r.seq1 + r.seq2) <= 1e-12  # log det phi(e) = 0
    assert r.seq2[1] <= r.seq1[0] + 1e-9
    assert r.seq1[0] <= r.seq2[0] + 1e-9
    assert r.seq1[1] <= r.seq2[1] + 1e-9
    assert np.allclose(r.avg, r.seward_partial, atol=1e-9)


def test_radius_errors():
    phi = pdf.haagerup(0.3, r=2, radius=3)
    with pytest.raises(RadiusError):
        en.seq1(phi, 1)
    assert en.feasible_n(phi, 500, Alphabet(2)) == 0


def test_singular_input_reports_minus_inf():
    rep = en.h_ann(pdf.haagerup(1.0, r=2), n_max=1)
    assert rep.seq1[0] == -math.inf
    assert rep.first_singular_n == 0


def test_seward_requires_length_lex_chain():
    alph = Alphabet(2)
    other = Alphabet(2, (2, -2, 1, -1))
    with pytest.raises(ValueError):
        en.seward_sum(pdf.haagerup(0.3, r=2), 1, chain=length_lex_chain(2, other), alphabet=alph)


def test_seward_terms_nonpositive():
    phi = pdf.mollify(pdf.haagerup(0.5, r=2), 0.4)
    res = en.seward_sum(phi, 2)
    assert all(t <= 1e-12 for t in res.terms)


def test_verblunsky_series_along_other_chain():
    phi = pdf.haagerup([0.5, 0.3j])
    alph = Alphabet(2, (-2, 1, 2, -1))
    ch = length_lex_chain(2, alph)
    s = en.verblunsky_series(phi, ch, N=len(ball(1, alph)) - 1)
    assert s.partial == pytest.approx(haagerup_closed_form([0.5, 0.3]), abs=1e-12)


def test_mollified_trace_shape():
    tr = en.h_zero_mollified(pdf.haagerup(0.5, r=2), [0.5, 0.2], n_max=1)
    assert tr.increasing and tr.values[0] < tr.values[1] < 0
    with pytest.raises(ValueError):
        en.h_zero_mollified(pdf.haagerup(0.5, r=2), [0.2, 0.5])


def _enumerated_sphere_norm(phi, n):
    return math.sqrt(sum(abs(phi.value(g)[0, 0]) ** 2 for g in ball(n, phi.alphabet()) if len(g) == n))


@pytest.mark.parametrize("values", [[0.5, 0.5], [0.9, 0.2j], [0.3, 0.6, 0.1]])
def test_sphere_norm_transfer_matches_enumeration(values):
    phi = pdf.haagerup(values)
    for n in range(0, 5 if len(values) == 2 else 4):
        assert en.sphere_norm(phi, n) == pytest.approx(_enumerated_sphere_norm(phi, n), rel=1e-12)
        table = phi.to_table(n)
        assert en.sphere_norm(table, n) == pytest.approx(en.sphere_norm(phi, n), rel=1e-12)


def test_sphere_norm_haagerup_closed_form():
    # |S_n| t^{2n} for equal parameters
    t = 0.4
    for n in range(1, 8):
        size = 4 * 3 ** (n - 1)
        assert en.sphere_norm(pdf.haagerup(t, r=2), n) == pytest.approx(math.sqrt(size) * t**n, rel=1e-12)


def test_tempered_classes():
    assert en.tempered_test(pdf.haagerup(0.3, r=2), 24).classification == "tempered"
    assert en.tempered_test(pdf.haagerup(0.9, r=2), 24).classification == "nontempered"
    assert en.tempered_test(pdf.regular_character(2), 24).classification == "tempered"
    slope = en.tempered_test(pdf.haagerup(0.8, r=2), 24).slope
    assert slope == pytest.approx(math.log(0.8 * math.sqrt(3)), abs=0.01)


def test_big_w():
    assert en.big_w([1.0, 0.0]) == [5.0, 17.0]


def test_hann_aux_bound_below_entropy():
    for t in (0.3, 0.5, 0.7):
        phi = pdf.haagerup(t, r=2)
        b = en.hann_aux_bound(phi, 1.0, 10)
        assert 0 < b <= -haagerup_closed_form([t, t])
    with pytest.raises(ValueError):
        en.hann_aux_bound(pdf.haagerup(0.3, r=2), 0.0, 5)


def test_gronwall():
    eps = 0.5
    d = en.gronwall_delta(eps)
    assert 0 < d < 1
    v = [math.exp(0.3 * n) for n in range(1, 15)]
    res = en.gronwall_check(v, eps, A=2.0)
    assert res.hypothesis and res.conclusion
    # a fast-growing sequence violates the hypothesis at some n
    bad = en.gronwall_check([math.exp(3 * n) for n in range(1, 10)], eps, A=1.0)
    assert not bad.hypothesis and bad.conclusion is None
    with pytest.raises(ValueError):
        en.gronwall_check([1.0], eps, A=0.5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=12), st.floats(0.1, 2.0), st.floats(1.0, 10.0))
def test_gronwall_implication(v, eps, A):
    res = en.gronwall_check(v, eps, A)
    if res.hypothesis:
        assert res.conclusion
