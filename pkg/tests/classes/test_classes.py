"""
Tests for multiplicative classes of bundles and tangent bundles.
"""
from fractions import Fraction

import pytest

import corrclass


P1 = corrclass.Space((1,))
P2 = corrclass.Space((2,))


def test_chern_class_of_projective_plane():
    """c(TP2) = (1 + h)^3"""
    c = corrclass.tangent_class('chern', P2)
    assert corrclass.ring_format(c) == '1 + 3 * h1 + 3 * h1^2'
    assert corrclass.integrate(P2, c) == corrclass.ypoly(3)


@pytest.mark.parametrize('n', [0, 1, 2, 3, 4])
def test_todd_genus_of_projective_space_is_one(n):
    X = corrclass.Space((n,))
    assert corrclass.integrate(X, corrclass.tangent_class('todd', X)) == corrclass.YPOLY_ONE


def test_signature_of_projective_plane():
    assert corrclass.integrate(P2, corrclass.tangent_class('lclass', P2)) == corrclass.YPOLY_ONE


def test_chi_y_genus_of_projective_line():
    """Integral of T_y(TP1) is 1 - y"""
    hirzebruch = corrclass.tangent_class('hirzebruch', P1)
    assert corrclass.integrate(P1, hirzebruch) == corrclass.ypoly(1, -1)


def test_todd_class_of_projective_plane():
    todd = corrclass.tangent_class('todd', P2)
    ring = corrclass.space_chow_ring(P2)
    assert todd == corrclass.ring_element(ring, {(0,): 1, (1,): Fraction(3, 2), (2,): 1})


def test_genus_class_rejects_unknown_kind():
    with pytest.raises(corrclass.StructuralError):
        corrclass.genus_class('pontryagin', [], corrclass.space_chow_ring(P1))


def test_genus_class_needs_degree_one_roots():
    ring = corrclass.space_chow_ring(P2)
    with pytest.raises(corrclass.DomainError):
        corrclass.genus_class('chern', [corrclass.ring_monomial(ring, (2,))])


def test_genus_class_of_empty_roots_needs_ring():
    with pytest.raises(corrclass.StructuralError):
        corrclass.genus_class('todd', [])


def test_bundle_classes():
    X = corrclass.Space((1, 1))
    E = corrclass.bundle_make(X, [(1, 0), (0, 2)])
    chern = corrclass.bundle_class('chern', E)
    assert corrclass.ring_format(chern) == '1 + 2 * h2 + 1 * h1 + 2 * h1*h2'
    ch = corrclass.bundle_class('ch', E)
    assert corrclass.ring_constant_term(ch) == corrclass.ypoly(2)
    assert corrclass.bundle_format(E) == 'O(0,2) + O(1,0)'


def test_bundle_degrees_on_point_factor_are_dropped():
    X = corrclass.Space((0, 2))
    E = corrclass.bundle_make(X, [(5, 1)])
    assert E.summands == ((0, 1),)


def test_bundle_tensor_and_dual():
    X = corrclass.Space((2,))
    E = corrclass.bundle_make(X, [(1,), (2,)])
    L = corrclass.bundle_make(X, [(-1,)])
    assert corrclass.bundle_tensor(E, L).summands == ((0,), (1,))
    assert corrclass.bundle_dual(E).summands == ((-2,), (-1,))
    assert corrclass.bundle_rank(corrclass.bundle_whitney(E, L)) == 3


def test_bundle_mismatched_multidegree():
    with pytest.raises(corrclass.StructuralError):
        corrclass.bundle_make(corrclass.Space((1, 1)), [(1,)])


def test_relative_genus_of_projection():
    """The relative tangent bundle of P1 x P2 -> P2 is the tangent bundle of the P1 factor"""
    X = corrclass.Space((1, 2))
    g = corrclass.morphism_make(X, P2, [1])
    relative = corrclass.relative_genus('chern', g)
    ring = corrclass.space_chow_ring(X)
    assert relative == corrclass.ring_element(ring, {(0, 0): 1, (1, 0): 2})


def test_relative_genus_of_embedding_is_virtual():
    """td(TP1) / i^* td(TP2) for the linear P1 in P2"""
    i = corrclass.morphism_embedding(P1, P2)
    relative = corrclass.relative_genus('chern', i)
    ring = corrclass.space_chow_ring(P1)
    # (1 + 2h) / (1 + 3h) = 1 - h mod h^2
    assert relative == corrclass.ring_element(ring, {(0,): 1, (1,): -1})
