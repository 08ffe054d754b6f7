"""
Tests for cobordism bicycles: products, push and pull operations, grading and the bicycle functors.
"""
import random

import pytest

import corrclass
from corrclass import Space


P1 = Space((1,))
X = Space((1, 1))


def point_bicycle(apex: Space, summands):
    to_point = corrclass.morphism_to_point(apex)
    return corrclass.bicycle_make(to_point, to_point, corrclass.bundle_make(apex, summands))


def test_bicycle_needs_smooth_right_leg():
    i = corrclass.morphism_embedding(P1, Space((2,)))
    identity = corrclass.morphism_identity(P1)
    with pytest.raises(corrclass.UnsupportedLegError):
        corrclass.bicycle_make(identity, i, corrclass.bundle_make(P1, []))


def test_bicycle_grade_and_format():
    b = point_bicycle(P1, [(1,), (0,)])
    assert corrclass.bicycle_grade(b) == (1, 2)
    assert corrclass.bicycle_format(b) == 'P() <- P(1) -> P() { left [], right [] } with O(0) + O(1)'


@pytest.mark.parametrize('mode,grade', [('whitney', (3, 3)), ('tensor', (3, 2))])
def test_product_grades(mode, grade):
    alpha = point_bicycle(P1, [(1,), (0,)])
    beta = point_bicycle(Space((2,)), [(2,)])
    assert corrclass.bicycle_grade(corrclass.bicycle_product(mode, alpha, beta)) == grade


def test_unknown_product():
    b = point_bicycle(P1, [])
    with pytest.raises(corrclass.StructuralError):
        corrclass.bicycle_product('cup', b, b)


@pytest.mark.parametrize('name,expected', [
    ('Hcl:chern', '1'),
    ('Hch', '1'),
    ('Hcl1cl2:chern:chern', '3'),
    ('G0tensor', '2'),
])
def test_functor_values_on_projective_line(name, expected):
    """pt <- P1 -> pt with E = O(1)"""
    b = point_bicycle(P1, [(1,)])
    matrix = corrclass.operator_matrix_json(corrclass.bicycle_operator(name, b))
    assert matrix == {'()': {'()': expected}}


def test_bicycle_functor_arity():
    with pytest.raises(corrclass.StructuralError):
        corrclass.bicycle_functor_parse('Hcl')
    with pytest.raises(corrclass.StructuralError):
        corrclass.bicycle_functor_parse('Hfoo:chern')
    with pytest.raises(corrclass.StructuralError):
        corrclass.bicycle_functor_parse('Hcl:ahat')
    assert corrclass.bicycle_functor_parse('Hclch:todd').product == 'tensor'


def test_decomposition(tally):
    p = corrclass.morphism_make(X, P1, [0])
    q = corrclass.morphism_make(X, P1, [1])
    b = corrclass.bicycle_make(p, q, corrclass.bundle_make(X, [(1, -1), (0, 2)]))
    assert corrclass.check_decomposition(b, tally)


def test_push_and_pull_sides():
    b = corrclass.bicycle_identity(X, [(1, 0)])
    p = corrclass.morphism_make(X, P1, [1])
    pushed = corrclass.bicycle_push('left_proper', p, b)
    assert (pushed.source, pushed.target) == (P1, X)
    pushed = corrclass.bicycle_push('right_smooth', p, b)
    assert (pushed.source, pushed.target) == (X, P1)
    with pytest.raises(corrclass.StructuralError):
        corrclass.bicycle_push('left_smooth', p, b)
    i = corrclass.morphism_embedding(P1, Space((2,)))
    with pytest.raises(corrclass.UnsupportedLegError):
        corrclass.bicycle_push('right_smooth', i, corrclass.bicycle_identity(P1))


def test_double_push_and_pull_bounds():
    p = corrclass.morphism_make(X, P1, [1])
    with pytest.raises(corrclass.StructuralError):
        corrclass.bicycle_double_push(p, corrclass.bicycle_identity(P1))
    with pytest.raises(corrclass.StructuralError):
        corrclass.bicycle_double_pull(p, corrclass.bicycle_identity(X))


def test_double_squares(tally):
    p = corrclass.morphism_make(X, P1, [1])
    pushed = corrclass.bicycle_identity(X, [(1, 1)])
    pulled = corrclass.bicycle_make(corrclass.morphism_identity(P1), corrclass.morphism_identity(P1),
                                    corrclass.bundle_make(P1, [(2,)]))
    for name in ('Hcl:chern', 'Hcl1cl2:todd:chern', 'G0tensor', 'Htdch'):
        corrclass.check_double_squares(corrclass.bicycle_functor_parse(name), p, pushed, pulled, tally)
    result = tally.result()
    assert result.cases == 8
    assert result.failures == ()


def test_naturality(tally):
    p = corrclass.morphism_make(X, P1, [0])
    q = corrclass.morphism_make(X, P1, [1])
    b = corrclass.bicycle_make(p, q, corrclass.bundle_make(X, [(1, 0)]))
    assert corrclass.check_bicycle_naturality(b, tally)


def test_bicyclesum_grades():
    a = point_bicycle(P1, [(1,)])
    b = point_bicycle(Space((2,)), [])
    total = corrclass.bicyclesum_add(corrclass.bicyclesum_of(a), corrclass.bicyclesum_of(b))
    assert list(corrclass.bicyclesum_grades(total)) == [(1, 1), (2, 0)]


@pytest.mark.slow
def test_bicycle_theorems():
    main, commutativity = corrclass.check_bicycle_theorems(random.Random(3), count=2, max_dim=2)
    assert main.cases > 0
    assert main.failures == ()
    assert commutativity.informational
    assert commutativity.name == 'bicycle-suite commutativity'
