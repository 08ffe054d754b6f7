"""
Tests for constructible functions, relative motivic classes and their transformations.
"""
import random

import pytest

import corrclass
from corrclass import Space, Subvariety


P1 = Space((1,))
P2 = Space((2,))


def test_cf_pushforward_weights_by_euler_characteristic():
    to_point = corrclass.morphism_to_point(P2)
    phi = corrclass.cf_indicator(Subvariety(P2, (2,)))
    assert corrclass.cf_pushforward(to_point, phi) == corrclass.cf_make(corrclass.POINT, [((), 3)])


def test_cf_pullback_needs_smooth_map():
    i = corrclass.morphism_embedding(P1, P2)
    with pytest.raises(corrclass.UnsupportedLegError):
        corrclass.cf_pullback(i, corrclass.cf_indicator(Subvariety(P2, (1,))))


def test_cf_multiply_and_format():
    Z = corrclass.cf_indicator(Subvariety(P2, (1,)))
    W = corrclass.cf_indicator(Subvariety(P2, (0,)))
    phi = corrclass.cf_add(corrclass.cf_scale(Z, 2), corrclass.cf_scale(W, -1))
    assert corrclass.cf_format(phi) == '-1*ind(L(0)) + 2*ind(L(1))'
    assert corrclass.cf_multiply(Z, W) == W


def test_mac_chern_of_line_in_plane():
    """c_*(1_L) = i_* c(TP1) = h + 2h^2"""
    value = corrclass.mac_chern(corrclass.cf_indicator(Subvariety(P2, (1,))))
    ring = corrclass.space_chow_ring(P2)
    assert value == corrclass.ring_element(ring, {(1,): 1, (2,): 2})


def test_mac_chern_of_space_is_euler_characteristic():
    X = Space((1, 2))
    value = corrclass.mac_chern(corrclass.cf_indicator(Subvariety(X, X.dims)))
    assert corrclass.integrate(X, value) == corrclass.ypoly(6)


def test_mot_generator_ignores_apex_order():
    h1 = corrclass.morphism_make(Space((1, 2)), P2, [1])
    h2 = corrclass.morphism_make(Space((2, 1)), P2, [0])
    assert corrclass.mot_generator(h1) == corrclass.mot_generator(h2)
    assert corrclass.mot_add(corrclass.mot_of_morphism(h1), corrclass.mot_of_morphism(h2)).terms[0][1] == 2


def test_hirzebruch_class_of_line_in_plane():
    value = corrclass.hirzebruch_Ty(corrclass.mot_of_subvariety(Subvariety(P2, (1,))))
    ring = corrclass.space_chow_ring(P2)
    assert value == corrclass.ring_element(ring, {(1,): 1, (2,): corrclass.ypoly(1, -1)})


def test_epsilon_and_gamma_of_projective_line_over_point():
    m = corrclass.mot_of_morphism(corrclass.morphism_to_point(P1))
    assert corrclass.epsilon_map(m) == corrclass.cf_make(corrclass.POINT, [((), 2)])
    assert corrclass.gamma_map(m) == corrclass.k_one(corrclass.POINT)
    assert corrclass.mot_format(m) == '1*P(1)[]'


def test_mot_pullback_needs_smooth_map():
    i = corrclass.morphism_embedding(P1, P2)
    with pytest.raises(corrclass.UnsupportedLegError):
        corrclass.mot_pullback(i, corrclass.mot_of_subvariety(Subvariety(P2, (0,))))


def test_mot_pullback_along_projection():
    g = corrclass.morphism_make(Space((1, 2)), P2, [1])
    pulled = corrclass.mot_pullback(g, corrclass.mot_of_subvariety(Subvariety(P2, (0,))))
    assert pulled.space == Space((1, 2))
    (key, n), = pulled.terms
    assert key[0] == (1,)
    assert n == 1


@pytest.mark.parametrize('dims', [(1,), (2,), (1, 1)])
def test_triangles_commute(tally, dims):
    corrclass.check_triangles(Space(dims), tally)
    result = tally.result()
    assert result.cases == 4 * len(corrclass.space_subvarieties(Space(dims)))
    assert result.failures == ()
