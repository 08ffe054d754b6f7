"""
Tests for G_0 of model spaces, pushforwards computed from sheaf data and Riemann-Roch.
"""
from fractions import Fraction

import pytest

import corrclass
from corrclass import Space


P1 = Space((1,))
P2 = Space((2,))


@pytest.mark.parametrize('d,expected', [(-3, 1), (-2, 0), (-1, 0), (0, 1), (1, 3), (2, 6)])
def test_chi_of_line_bundles_on_plane(d, expected):
    assert corrclass.k_chi(corrclass.k_line_bundle(P2, (d,))) == expected


def test_chi_projective_matches_binomial():
    assert corrclass.k_chi_projective(3, 1) == 4
    assert corrclass.k_chi_projective(1, -5) == -4


def test_line_basis_of_t():
    """t = 1 - [O(-1)]"""
    ring = corrclass.space_k_ring(P1)
    t = corrclass.KClass(P1, corrclass.ring_generator(ring, 0))
    assert corrclass.k_to_line_basis(t) == {(-1,): -1, (0,): 1}
    assert corrclass.k_format(t, basis='line') == '-1 * O(-1) + 1 * O(0)'


def test_line_bundle_products():
    """O(1) (x) O(-1) = O"""
    a = corrclass.k_line_bundle(P2, (1,))
    b = corrclass.k_line_bundle(P2, (-1,))
    assert corrclass.k_tensor(a, b) == corrclass.k_one(P2)


def test_k_of_bundle_sums_summands():
    E = corrclass.bundle_make(P2, [(0,), (1,)])
    assert corrclass.k_chi(corrclass.k_of_bundle(E)) == 4


def test_k_pushforward_of_embedding_uses_koszul_factor():
    i = corrclass.morphism_embedding(P1, P2)
    pushed = corrclass.k_pushforward(i, corrclass.k_one(P1))
    assert pushed.element == corrclass.ring_monomial(corrclass.space_k_ring(P2), (1,))
    bare = corrclass.k_pushforward(i, corrclass.k_one(P1), koszul=False)
    assert bare == corrclass.k_one(P2)


def test_k_pushforward_checks_space():
    i = corrclass.morphism_embedding(P1, P2)
    with pytest.raises(corrclass.StructuralError):
        corrclass.k_pushforward(i, corrclass.k_one(P2))


def test_td_bfm_integrates_to_chi():
    for d in range(-2, 4):
        a = corrclass.k_line_bundle(P2, (d,))
        integral = corrclass.integrate(P2, corrclass.td_bfm(a))
        assert corrclass.ypoly_constant_term(integral) == corrclass.k_chi(a)


def test_k_chern_character_of_line_bundle():
    a = corrclass.k_line_bundle(P1, (3,))
    ring = corrclass.space_chow_ring(P1)
    assert corrclass.k_chern_character(a) == corrclass.ring_element(ring, {(0,): 1, (1,): 3})


def test_hrr_passes(tally):
    corrclass.check_hrr(tally, max_n=2)
    result = tally.result()
    assert result.cases > 0
    assert result.failures == ()


def test_hrr_detects_missing_koszul_factor(tally):
    corrclass.check_hrr(tally, max_n=2, koszul=False)
    result = tally.result()
    assert result.failures
    assert all('pushed into' in failure['case'] for failure in result.failures)


@pytest.mark.parametrize('assignment,source,target', [
    ([0], (1,), (2,)),
    ([1], (1, 2), (2,)),
    ([corrclass.CONSTANT, 0], (1,), (1, 2)),
    ([], (1, 1), ()),
])
def test_grr_along_model_morphisms(tally, assignment, source, target):
    f = corrclass.morphism_make(Space(source), Space(target), assignment)
    corrclass.check_grr(f, tally)
    assert tally.result().failures == ()


def test_grr_without_koszul_fails_on_embedding(tally):
    i = corrclass.morphism_embedding(P1, P2)
    corrclass.check_grr(i, tally, koszul=False)
    assert tally.result().failures


def test_projection_formula(tally):
    corrclass.check_projection_formula(corrclass.morphism_embedding(P1, P2), tally)
    corrclass.check_projection_formula(corrclass.morphism_make(Space((1, 1)), P1, [1]), tally)
    assert tally.result().failures == ()


def test_base_change(tally):
    g = corrclass.morphism_make(Space((1, 2)), P2, [1])
    h = corrclass.morphism_embedding(P1, P2)
    corrclass.check_base_change(g, h, tally)
    result = tally.result()
    assert result.cases == 4
    assert result.failures == ()
