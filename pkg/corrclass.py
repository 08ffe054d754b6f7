#!/usr/bin/env python3
"""
corrclass - exact operator identities for correspondences over products of projective spaces
"""
import argparse
import collections
import concurrent.futures
import functools
import itertools
import json
import logging
import math
import os
import random
import re
import sys
import time
from collections import namedtuple
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union


logger = logging.getLogger('corrclass')

# Version of the JSON report layout
REPORT_SCHEMA = 1

# Marker used in morphism assignment tables for a target factor mapped to its base point
CONSTANT = -1



### ERRORS ###

class CorrclassError(ValueError):
    """Base class of every precondition violation raised by corrclass."""


class StructuralError(CorrclassError):
    """Objects, rings, or legs do not line up."""


class DomainError(CorrclassError):
    """A nilpotency or invertibility precondition does not hold."""


class UnsupportedLegError(CorrclassError):
    """A leg is outside the morphism class the operation needs."""


class ScenarioError(CorrclassError):
    """Lexical, syntax, or resolution error in a scenario file."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{line}:{column}: {message}" if line else message)
        self.message = message
        self.line = line
        self.column = column



### RATIONALS ###

def rational_format(value) -> str:
    """Format a rational as "p/q", or "p" when the denominator is 1."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def rational_parse(text: str) -> Fraction:
    """Parse the "p/q" form produced by rational_format."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise DomainError(f"Invalid rational: {text!r}") from e


def binomial_ext(x, j: int) -> Fraction:
    """Extended binomial coefficient x(x-1)...(x-j+1)/j! for any rational x."""
    if j < 0:
        return Fraction(0)
    result = Fraction(1)
    for i in range(j):
        result *= Fraction(x) - i
    return result / math.factorial(j)



### POLYNOMIALS IN Y ###
# Coefficients of every ring element: polynomials in the Hirzebruch parameter y

YPoly = namedtuple('YPoly', ['coeffs'])


def ypoly(*coeffs) -> YPoly:
    """Build a YPoly from the coefficients of y^0, y^1, ... dropping trailing zeros."""
    values = [Fraction(c) for c in coeffs]
    while values and values[-1] == 0:
        values.pop()
    return YPoly(tuple(values))


YPOLY_ZERO = YPoly(())
YPOLY_ONE = ypoly(1)
YPOLY_Y = ypoly(0, 1)


def ypoly_coerce(value) -> YPoly:
    if isinstance(value, YPoly):
        return value
    return ypoly(value)


def ypoly_degree(p: YPoly) -> int:
    """Degree in y; the zero polynomial has degree -1."""
    return len(p.coeffs) - 1


def ypoly_is_zero(p: YPoly) -> bool:
    return not p.coeffs


def ypoly_constant_term(p: YPoly) -> Fraction:
    return p.coeffs[0] if p.coeffs else Fraction(0)


def ypoly_add(p: YPoly, q: YPoly) -> YPoly:
    n = max(len(p.coeffs), len(q.coeffs))
    return ypoly(*[(p.coeffs[i] if i < len(p.coeffs) else 0) + (q.coeffs[i] if i < len(q.coeffs) else 0)
                   for i in range(n)])


def ypoly_neg(p: YPoly) -> YPoly:
    return YPoly(tuple(-c for c in p.coeffs))


def ypoly_sub(p: YPoly, q: YPoly) -> YPoly:
    return ypoly_add(p, ypoly_neg(q))


def ypoly_scale(p: YPoly, c) -> YPoly:
    c = Fraction(c)
    if c == 0:
        return YPOLY_ZERO
    return YPoly(tuple(a * c for a in p.coeffs))


def ypoly_mul(p: YPoly, q: YPoly) -> YPoly:
    if not p.coeffs or not q.coeffs:
        return YPOLY_ZERO
    out = [Fraction(0)] * (len(p.coeffs) + len(q.coeffs) - 1)
    for i, a in enumerate(p.coeffs):
        if a == 0:
            continue
        for j, b in enumerate(q.coeffs):
            out[i + j] += a * b
    return ypoly(*out)


def ypoly_pow(p: YPoly, n: int) -> YPoly:
    result = YPOLY_ONE
    for _ in range(n):
        result = ypoly_mul(result, p)
    return result


def ypoly_eval(p: YPoly, value) -> Fraction:
    """Evaluate at y = value (Horner)."""
    result = Fraction(0)
    for c in reversed(p.coeffs):
        result = result * Fraction(value) + c
    return result


def _term_format(coeff: Fraction, factors: List[str]) -> str:
    if not factors:
        return rational_format(coeff)
    return f"{rational_format(coeff)} * {'*'.join(factors)}"


def ypoly_format(p: YPoly) -> str:
    terms = [_term_format(c, [f"y^{j}"] if j else []) for j, c in enumerate(p.coeffs) if c != 0]
    return ' + '.join(terms) if terms else '0'



### NILPOTENT RINGS ###
# Q[y][g_1..g_k]/(g_i^{d_i}): Chow rings use symbol 'h', K-rings use symbol 't'

NilpotentRing = namedtuple('NilpotentRing', ['orders', 'symbol'])

# terms: sorted tuple of (exponent vector, YPoly), no zero coefficient
RingElement = namedtuple('RingElement', ['ring', 'terms'])


@functools.lru_cache(maxsize=None)
def ring_make(orders: Tuple[int, ...], symbol: str = 'h') -> NilpotentRing:
    orders = tuple(int(d) for d in orders)
    if any(d < 1 for d in orders):
        raise StructuralError(f"Truncation orders must be >= 1, got {orders}")
    return NilpotentRing(orders, symbol)


def _ring_collect(ring: NilpotentRing, acc: Dict[Tuple[int, ...], YPoly]) -> RingElement:
    return RingElement(ring, tuple(sorted((e, c) for e, c in acc.items() if c.coeffs)))


def ring_element(ring: NilpotentRing, terms) -> RingElement:
    """Build a normalized element from (exponent, coefficient) pairs or a mapping.

    Exponents at or beyond a truncation order are dropped; coefficients may be
    YPoly, int or Fraction.
    """
    if isinstance(terms, dict):
        terms = terms.items()
    acc = {}
    for exp, coeff in terms:
        exp = tuple(int(e) for e in exp)
        if len(exp) != len(ring.orders):
            raise StructuralError(f"Exponent {exp} does not fit a ring with {len(ring.orders)} generators")
        if any(e < 0 for e in exp):
            raise StructuralError(f"Negative exponent in {exp}")
        if any(e >= d for e, d in zip(exp, ring.orders)):
            continue
        coeff = ypoly_coerce(coeff)
        acc[exp] = ypoly_add(acc[exp], coeff) if exp in acc else coeff
    return _ring_collect(ring, acc)


def ring_zero(ring: NilpotentRing) -> RingElement:
    return RingElement(ring, ())


def ring_scalar(ring: NilpotentRing, value) -> RingElement:
    return ring_element(ring, [((0,) * len(ring.orders), value)])


def ring_one(ring: NilpotentRing) -> RingElement:
    return ring_scalar(ring, 1)


def ring_monomial(ring: NilpotentRing, exp: Sequence[int], coeff=1) -> RingElement:
    return ring_element(ring, [(exp, coeff)])


def ring_generator(ring: NilpotentRing, index: int) -> RingElement:
    exp = [0] * len(ring.orders)
    exp[index] = 1
    return ring_monomial(ring, exp)


def ring_monomials(ring: NilpotentRing) -> List[Tuple[int, ...]]:
    """Canonical monomial basis in lexicographic order."""
    return list(itertools.product(*(range(d) for d in ring.orders)))


def ring_top(ring: NilpotentRing) -> Tuple[int, ...]:
    return tuple(d - 1 for d in ring.orders)


def ring_is_zero(a: RingElement) -> bool:
    return not a.terms


def ring_coefficient(a: RingElement, exp: Sequence[int]) -> YPoly:
    exp = tuple(exp)
    for e, c in a.terms:
        if e == exp:
            return c
    return YPOLY_ZERO


def ring_constant_term(a: RingElement) -> YPoly:
    return ring_coefficient(a, (0,) * len(a.ring.orders))


def _ring_check(a: RingElement, b: RingElement):
    if a.ring != b.ring:
        raise StructuralError(f"Ring mismatch: {a.ring} vs {b.ring}")


def ring_add(a: RingElement, b: RingElement) -> RingElement:
    _ring_check(a, b)
    acc = dict(a.terms)
    for e, c in b.terms:
        acc[e] = ypoly_add(acc[e], c) if e in acc else c
    return _ring_collect(a.ring, acc)


def ring_neg(a: RingElement) -> RingElement:
    return RingElement(a.ring, tuple((e, ypoly_neg(c)) for e, c in a.terms))


def ring_sub(a: RingElement, b: RingElement) -> RingElement:
    return ring_add(a, ring_neg(b))


def ring_scale(a: RingElement, scalar) -> RingElement:
    """Multiply by a YPoly (or rational) scalar."""
    scalar = ypoly_coerce(scalar)
    return _ring_collect(a.ring, {e: ypoly_mul(c, scalar) for e, c in a.terms})


def ring_mul(a: RingElement, b: RingElement) -> RingElement:
    _ring_check(a, b)
    orders = a.ring.orders
    acc = {}
    for ea, ca in a.terms:
        for eb, cb in b.terms:
            exp = tuple(x + y for x, y in zip(ea, eb))
            if any(e >= d for e, d in zip(exp, orders)):
                continue
            product = ypoly_mul(ca, cb)
            acc[exp] = ypoly_add(acc[exp], product) if exp in acc else product
    return _ring_collect(a.ring, acc)


def ring_pow(a: RingElement, n: int) -> RingElement:
    result = ring_one(a.ring)
    for _ in range(n):
        result = ring_mul(result, a)
    return result


RING_OPERATIONS = {
    'add': ring_add,
    'sub': ring_sub,
    'mul': ring_mul,
    'scalar_mul': ring_scale,
}


def ring_arith(a: RingElement, b, op: str) -> RingElement:
    """Dispatch one of add, sub, mul, scalar_mul (b is a YPoly for scalar_mul)."""
    if op not in RING_OPERATIONS:
        raise StructuralError(f"Unknown ring operation: {op}")
    return RING_OPERATIONS[op](a, b)


def ring_specialize_y(a: RingElement, value) -> RingElement:
    """Substitute a rational for y."""
    return _ring_collect(a.ring, {e: ypoly(ypoly_eval(c, value)) for e, c in a.terms})


def ring_to_vector(a: RingElement) -> Dict[Tuple[int, ...], YPoly]:
    return dict(a.terms)


def ring_from_vector(ring: NilpotentRing, vector: Dict) -> RingElement:
    return ring_element(ring, vector)


def ring_format(a: RingElement) -> str:
    """Format as "c * h1^2*h2*y^1 + ..." with terms in lexicographic exponent order."""
    parts = []
    for exp, coeff in a.terms:
        monomial = [f"{a.ring.symbol}{i + 1}" + (f"^{e}" if e > 1 else '') for i, e in enumerate(exp) if e]
        for j, c in enumerate(coeff.coeffs):
            if c != 0:
                parts.append(_term_format(c, monomial + ([f"y^{j}"] if j else [])))
    return ' + '.join(parts) if parts else '0'



### SERIES CORE ###

UnivariateSeries = namedtuple('UnivariateSeries', ['name', 'coefficient'])


def series_make(name: str, generator: Callable[[int], Any]) -> UnivariateSeries:
    """Wrap a coefficient generator; coefficients are memoized and returned as YPoly."""
    @functools.lru_cache(maxsize=None)
    def coefficient(j: int) -> YPoly:
        return ypoly_coerce(generator(j))
    return UnivariateSeries(name, coefficient)


@functools.lru_cache(maxsize=None)
def bernoulli_numbers(n: int) -> Tuple[Fraction, ...]:
    """Bernoulli numbers B_0..B_n with B_1 = +1/2 (Akiyama-Tanigawa)."""
    numbers = []
    row = []
    for m in range(n + 1):
        row.append(Fraction(1, m + 1))
        for j in range(m, 0, -1):
            row[j - 1] = j * (row[j - 1] - row[j])
        numbers.append(row[0])
    return tuple(numbers)


def _todd_coefficient(j: int) -> Fraction:
    return bernoulli_numbers(j)[j] / math.factorial(j)


def _lclass_coefficient(j: int) -> Fraction:
    if j % 2:
        return Fraction(0)
    return 2 ** j * bernoulli_numbers(j)[j] / math.factorial(j)


def _hirzebruch_coefficient(j: int) -> YPoly:
    # x(1+y)/(1-e^{-x(1+y)}) - xy
    if j == 0:
        return YPOLY_ONE
    if j == 1:
        return ypoly(Fraction(1, 2), Fraction(-1, 2))
    return ypoly_scale(ypoly_pow(ypoly(1, 1), j), _todd_coefficient(j))


SERIES_EXP = series_make('exp', lambda j: Fraction(1, math.factorial(j)))
SERIES_TODD = series_make('todd', _todd_coefficient)
SERIES_LCLASS = series_make('lclass', _lclass_coefficient)
SERIES_CHERN = series_make('chern', lambda j: 1 if j <= 1 else 0)
SERIES_HIRZEBRUCH = series_make('hirzebruch', _hirzebruch_coefficient)


@functools.lru_cache(maxsize=None)
def series_line_bundle(degree: int) -> UnivariateSeries:
    """(1 - t)^(-degree), the class of O(degree) in the variable t."""
    return series_make(f'line({degree})', lambda j: binomial_ext(degree + j - 1, j))


def series_product(s: UnivariateSeries, t: UnivariateSeries) -> UnivariateSeries:
    return series_make(f'{s.name}*{t.name}',
                       lambda j: functools.reduce(ypoly_add,
                                                  (ypoly_mul(s.coefficient(i), t.coefficient(j - i))
                                                   for i in range(j + 1)),
                                                  YPOLY_ZERO))


def series_substitute(s: UnivariateSeries, x: RingElement) -> RingElement:
    """Evaluate sum_j c_j x^j; x must be nilpotent so the sum is finite."""
    if not ypoly_is_zero(ring_constant_term(x)):
        raise DomainError(f"Series {s.name} needs an argument with zero constant term, got {ring_format(x)}")
    result = ring_zero(x.ring)
    power = ring_one(x.ring)
    j = 0
    while not ring_is_zero(power):
        coeff = s.coefficient(j)
        if coeff.coeffs:
            result = ring_add(result, ring_scale(power, coeff))
        power = ring_mul(power, x)
        j += 1
    return result


def invert_unit(u: RingElement) -> RingElement:
    """Inverse of an element whose constant term is a nonzero rational."""
    constant = ring_constant_term(u)
    if ypoly_degree(constant) != 0:
        raise DomainError(f"Cannot invert {ring_format(u)}: constant term is not a nonzero rational")
    inverse = 1 / constant.coeffs[0]
    one = ring_one(u.ring)
    negated = ring_sub(one, ring_scale(u, inverse))
    result = one
    power = one
    while True:
        power = ring_mul(power, negated)
        if ring_is_zero(power):
            break
        result = ring_add(result, power)
    return ring_scale(result, inverse)



### CHARACTERISTIC CLASSES ###

# One factor series per genus; adding a multiplicative class is one entry here
GENUS_KINDS = {
    'chern': SERIES_CHERN,
    'todd': SERIES_TODD,
    'lclass': SERIES_LCLASS,
    'hirzebruch': SERIES_HIRZEBRUCH,
}


def genus_series(kind: str) -> UnivariateSeries:
    try:
        return GENUS_KINDS[kind]
    except KeyError:
        raise StructuralError(f"Unknown genus kind: {kind} (expected one of {', '.join(GENUS_KINDS)})") from None


def genus_class(kind: str, roots: Iterable[RingElement], ring: Optional[NilpotentRing] = None) -> RingElement:
    """Multiplicative class prod_i Q(alpha_i) of a list of Chern roots.

    Args:
        kind: one of GENUS_KINDS
        roots: degree-one ring elements, all in the same ring
        ring: the ring to use when roots is empty

    Returns:
        The truncated product, constant term 1
    """
    series = genus_series(kind)
    counts = collections.Counter(roots)
    if ring is None:
        if not counts:
            raise StructuralError("An empty root list needs an explicit ring")
        ring = next(iter(counts)).ring
    result = ring_one(ring)
    for root, multiplicity in sorted(counts.items()):
        if root.ring != ring:
            raise StructuralError(f"Root {ring_format(root)} lives in a different ring")
        if any(sum(e) != 1 for e, _ in root.terms):
            raise DomainError(f"Chern root {ring_format(root)} is not of degree one")
        result = ring_mul(result, ring_pow(series_substitute(series, root), multiplicity))
    return result


def linear_form(ring: NilpotentRing, degrees: Sequence[int]) -> RingElement:
    """sum_i d_i g_i, the first Chern class of O(d_1, ..., d_k)."""
    terms = []
    for i, d in enumerate(degrees):
        exp = [0] * len(degrees)
        exp[i] = 1
        terms.append((exp, d))
    return ring_element(ring, terms)


def chern_character(bundle, space=None) -> RingElement:
    """ch of a sum of line bundles: sum of exp(c_1(L))."""
    space = bundle.base if space is None else space
    if bundle.base != space:
        raise StructuralError(f"Bundle lives on {space_format(bundle.base)}, not {space_format(space)}")
    ring = space_chow_ring(space)
    total = ring_zero(ring)
    for degrees in bundle.summands:
        total = ring_add(total, series_substitute(SERIES_EXP, linear_form(ring, degrees)))
    return total


def bundle_class(kind: str, bundle) -> RingElement:
    """cl(E) for a genus kind, or ch(E) for kind 'ch'."""
    if kind == 'ch':
        return chern_character(bundle)
    return genus_class(kind, bundle_roots(bundle), space_chow_ring(bundle.base))



### MODEL SPACES ###
# Objects: products of projective spaces P(n_1) x ... x P(n_k); the empty product is the point

Space = namedtuple('Space', ['dims'])

# assignment[j]: source factor pulled into target factor j, or CONSTANT
Morphism = namedtuple('Morphism', ['source', 'target', 'assignment'])

MorphismClass = namedtuple('MorphismClass', ['is_smooth', 'is_proper', 'is_iso', 'is_lci', 'relative_dimension'])

# summands: sorted tuple of multidegrees, one per line bundle
VectorBundle = namedtuple('VectorBundle', ['base', 'summands'])

# dims: per-factor dimension of the canonical linear subspace
Subvariety = namedtuple('Subvariety', ['ambient', 'dims'])

POINT = Space(())


def space_make(dims: Iterable[int]) -> Space:
    dims = tuple(int(n) for n in dims)
    if any(n < 0 for n in dims):
        raise StructuralError(f"Factor dimensions must be >= 0, got {dims}")
    return Space(dims)


def space_dimension(X: Space) -> int:
    return sum(X.dims)


def space_product(X: Space, Y: Space) -> Space:
    return Space(X.dims + Y.dims)


def space_euler(X: Space) -> int:
    """Topological Euler characteristic prod (n_i + 1)."""
    return math.prod(n + 1 for n in X.dims)


def space_chow_ring(X: Space) -> NilpotentRing:
    return ring_make(tuple(n + 1 for n in X.dims), 'h')


def space_k_ring(X: Space) -> NilpotentRing:
    return ring_make(tuple(n + 1 for n in X.dims), 't')


def space_format(X: Space) -> str:
    return f"P({','.join(str(n) for n in X.dims)})"


def space_subvarieties(X: Space) -> List[Tuple[int, ...]]:
    """Dimension vectors of all canonical linear subvarieties, lexicographic."""
    return list(itertools.product(*(range(n + 1) for n in X.dims)))


def morphism_make(source: Space, target: Space, assignment: Iterable[int]) -> Morphism:
    """Validate an assignment table and normalize it.

    A target factor pulled from a P^0 factor is the canonical point, so it is
    stored as CONSTANT.
    """
    assignment = tuple(int(a) for a in assignment)
    if len(assignment) != len(target.dims):
        raise StructuralError(f"Assignment {assignment} does not cover the {len(target.dims)} factors of "
                              f"{space_format(target)}")
    used = set()
    normalized = []
    for j, a in enumerate(assignment):
        if a == CONSTANT:
            normalized.append(CONSTANT)
            continue
        if not 0 <= a < len(source.dims):
            raise StructuralError(f"Target factor {j + 1} pulls from missing source factor {a + 1}")
        if a in used:
            raise StructuralError(f"Source factor {a + 1} is pulled twice")
        used.add(a)
        if source.dims[a] > target.dims[j]:
            raise StructuralError(f"Cannot embed P{source.dims[a]} into P{target.dims[j]}")
        normalized.append(CONSTANT if source.dims[a] == 0 else a)
    return Morphism(source, target, tuple(normalized))


def morphism_identity(X: Space) -> Morphism:
    return Morphism(X, X, tuple(CONSTANT if n == 0 else i for i, n in enumerate(X.dims)))


def morphism_to_point(X: Space) -> Morphism:
    return Morphism(X, POINT, ())


def morphism_point(X: Space) -> Morphism:
    """Inclusion of the canonical base point."""
    return Morphism(POINT, X, (CONSTANT,) * len(X.dims))


def morphism_projection(X: Space, keep: Sequence[int]) -> Morphism:
    """Projection onto the listed factors, in the listed order."""
    return morphism_make(X, Space(tuple(X.dims[i] for i in keep)), keep)


def morphism_permutation(X: Space, order: Sequence[int]) -> Morphism:
    if sorted(order) != list(range(len(X.dims))):
        raise StructuralError(f"{order} is not a permutation of the factors of {space_format(X)}")
    return morphism_projection(X, order)


def morphism_embedding(source: Space, target: Space) -> Morphism:
    """Factorwise canonical linear embedding."""
    if len(source.dims) != len(target.dims):
        raise StructuralError(f"Cannot embed {space_format(source)} factorwise into {space_format(target)}")
    return morphism_make(source, target, range(len(source.dims)))


def morphism_product(f: Morphism, g: Morphism) -> Morphism:
    """f x g between the product spaces."""
    shift = len(f.source.dims)
    return morphism_make(space_product(f.source, g.source), space_product(f.target, g.target),
                         f.assignment + tuple(CONSTANT if a == CONSTANT else a + shift for a in g.assignment))


def morphism_used(f: Morphism) -> set:
    return {a for a in f.assignment if a != CONSTANT}


def morphism_format(f: Morphism) -> str:
    entries = ', '.join(f"t{j + 1} <- {'const' if a == CONSTANT else f's{a + 1}'}"
                        for j, a in enumerate(f.assignment))
    return f"{space_format(f.source)} -> {space_format(f.target)} {{ {entries} }}" if entries else \
        f"{space_format(f.source)} -> {space_format(f.target)} {{ }}"


def compose_morphisms(f: Morphism, g: Morphism) -> Morphism:
    """g after f."""
    if f.target != g.source:
        raise StructuralError(f"Cannot compose: {space_format(f.target)} is not {space_format(g.source)}")
    return morphism_make(f.source, g.target,
                         tuple(CONSTANT if a == CONSTANT else f.assignment[a] for a in g.assignment))


def classify_morphism(f: Morphism) -> MorphismClass:
    """Morphism class predicates.

    Every model space is complete and every model morphism factors as an
    embedding after a projection, so is_proper and is_lci always hold.
    """
    smooth = all(a != CONSTANT and f.source.dims[a] == m
                 for a, m in zip(f.assignment, f.target.dims) if m > 0)
    used = morphism_used(f)
    iso = smooth and all(i in used for i, n in enumerate(f.source.dims) if n > 0)
    return MorphismClass(is_smooth=smooth, is_proper=True, is_iso=iso, is_lci=True,
                         relative_dimension=space_dimension(f.source) - space_dimension(f.target))


def fiber_product(g: Morphism, h: Morphism) -> Tuple[Space, Morphism, Morphism]:
    """Fiber product of a smooth g: M -> Y with any h: N -> Y.

    Writing M = Y x A through g, the fiber product is W = N x A where A
    lists the factors of M that g projects away, in their order.

    Returns:
        (W, h_tilde: W -> M, g_tilde: W -> N) with g . h_tilde == h . g_tilde
    """
    if g.target != h.target:
        raise StructuralError(f"Fiber product over different bases: {space_format(g.target)} vs "
                              f"{space_format(h.target)}")
    if not classify_morphism(g).is_smooth:
        raise UnsupportedLegError(f"Fiber product needs a smooth leg, got {morphism_format(g)}")
    M, N = g.source, h.source
    image = morphism_used(g)
    extra = [i for i in range(len(M.dims)) if i not in image]
    W = Space(N.dims + tuple(M.dims[i] for i in extra))
    lifted = [CONSTANT] * len(M.dims)
    for j, a in enumerate(g.assignment):
        if a != CONSTANT:
            lifted[a] = h.assignment[j]
    for k, i in enumerate(extra):
        lifted[i] = len(N.dims) + k
    h_tilde = morphism_make(W, M, lifted)
    g_tilde = morphism_make(W, N, range(len(N.dims)))
    return W, h_tilde, g_tilde


def _monomial_pullback(f: Morphism, exp: Tuple[int, ...]) -> Optional[Tuple[int, ...]]:
    pulled = [0] * len(f.source.dims)
    for j, e in enumerate(exp):
        if e == 0:
            continue
        a = f.assignment[j]
        if a == CONSTANT or e > f.source.dims[a]:
            return None
        pulled[a] = e
    return tuple(pulled)


def _monomial_pushforward(f: Morphism, exp: Tuple[int, ...], shift: bool = True) -> Optional[Tuple[int, ...]]:
    used = morphism_used(f)
    if any(exp[i] != n for i, n in enumerate(f.source.dims) if i not in used):
        return None
    pushed = []
    for a, m in zip(f.assignment, f.target.dims):
        if a == CONSTANT:
            pushed.append(m if shift else 0)
        else:
            pushed.append(exp[a] + (m - f.source.dims[a] if shift else 0))
    return tuple(pushed)


def _ring_pullback(f: Morphism, a: RingElement, ring: NilpotentRing) -> RingElement:
    acc = {}
    for exp, coeff in a.terms:
        pulled = _monomial_pullback(f, exp)
        if pulled is not None:
            acc[pulled] = coeff
    return _ring_collect(ring, acc)


def chow_pullback(f: Morphism, c: RingElement) -> RingElement:
    """Ring map h_j -> h_sigma(j) (pulled factors) or 0 (constant factors)."""
    if c.ring != space_chow_ring(f.target):
        raise StructuralError(f"Class does not live on {space_format(f.target)}")
    return _ring_pullback(f, c, space_chow_ring(f.source))


def chow_pushforward(f: Morphism, c: RingElement) -> RingElement:
    """Proper pushforward.

    A monomial survives iff every projected-away factor carries its top power;
    an embedding P^n -> P^m raises the exponent by m - n and the base point of
    P^m is h^m.
    """
    if c.ring != space_chow_ring(f.source):
        raise StructuralError(f"Class does not live on {space_format(f.source)}")
    acc = {}
    for exp, coeff in c.terms:
        pushed = _monomial_pushforward(f, exp)
        if pushed is not None:
            acc[pushed] = ypoly_add(acc[pushed], coeff) if pushed in acc else coeff
    return _ring_collect(space_chow_ring(f.target), acc)


def integrate(X: Space, c: RingElement) -> YPoly:
    """Degree of the top-dimensional part: coefficient of prod h_i^{n_i}."""
    if c.ring != space_chow_ring(X):
        raise StructuralError(f"Class does not live on {space_format(X)}")
    return ring_coefficient(c, X.dims)


def tangent_roots(X: Space) -> List[RingElement]:
    """Euler-sequence roots: h_i repeated n_i + 1 times."""
    ring = space_chow_ring(X)
    roots = []
    for i, n in enumerate(X.dims):
        if n > 0:
            roots.extend([ring_generator(ring, i)] * (n + 1))
    return roots


def tangent_class(kind: str, X: Space) -> RingElement:
    return genus_class(kind, tangent_roots(X), space_chow_ring(X))


def relative_genus(kind: str, f: Morphism) -> RingElement:
    """Genus of the relative tangent bundle of f, virtual when f is not smooth."""
    ring = space_chow_ring(f.source)
    if classify_morphism(f).is_smooth:
        used = morphism_used(f)
        roots = []
        for i, n in enumerate(f.source.dims):
            if n > 0 and i not in used:
                roots.extend([ring_generator(ring, i)] * (n + 1))
        return genus_class(kind, roots, ring)
    pulled = chow_pullback(f, tangent_class(kind, f.target))
    return ring_mul(tangent_class(kind, f.source), invert_unit(pulled))



### BUNDLES AND SUBVARIETIES ###

def bundle_make(base: Space, summands: Iterable[Sequence[int]]) -> VectorBundle:
    summands = tuple(sorted(tuple(int(d) for d in degrees) for degrees in summands))
    for degrees in summands:
        if len(degrees) != len(base.dims):
            raise StructuralError(f"Multidegree {degrees} does not match {space_format(base)}")
    # degrees on a P^0 factor carry no information
    summands = tuple(sorted(tuple(0 if n == 0 else d for d, n in zip(degrees, base.dims))
                            for degrees in summands))
    return VectorBundle(base, summands)


def bundle_trivial(base: Space, rank: int = 1) -> VectorBundle:
    return bundle_make(base, [(0,) * len(base.dims)] * rank)


def bundle_rank(E: VectorBundle) -> int:
    return len(E.summands)


def bundle_roots(E: VectorBundle) -> List[RingElement]:
    ring = space_chow_ring(E.base)
    return [linear_form(ring, degrees) for degrees in E.summands]


def bundle_whitney(E: VectorBundle, F: VectorBundle) -> VectorBundle:
    if E.base != F.base:
        raise StructuralError("Whitney sum of bundles on different spaces")
    return bundle_make(E.base, E.summands + F.summands)


def bundle_tensor(E: VectorBundle, F: VectorBundle) -> VectorBundle:
    if E.base != F.base:
        raise StructuralError("Tensor product of bundles on different spaces")
    return bundle_make(E.base, [tuple(a + b for a, b in zip(d, e)) for d in E.summands for e in F.summands])


def bundle_dual(E: VectorBundle) -> VectorBundle:
    return bundle_make(E.base, [tuple(-d for d in degrees) for degrees in E.summands])


def bundle_pullback(f: Morphism, E: VectorBundle) -> VectorBundle:
    """Pullback of line-bundle multidegrees along f."""
    if E.base != f.target:
        raise StructuralError(f"Bundle lives on {space_format(E.base)}, not {space_format(f.target)}")
    summands = []
    for degrees in E.summands:
        pulled = [0] * len(f.source.dims)
        for d, a in zip(degrees, f.assignment):
            if a != CONSTANT:
                pulled[a] = d
        summands.append(pulled)
    return bundle_make(f.source, summands)


def bundle_format(E: VectorBundle) -> str:
    if not E.summands:
        return '0'
    return ' + '.join(f"O({','.join(str(d) for d in degrees)})" for degrees in E.summands)


def subvariety_make(ambient: Space, dims: Iterable[int]) -> Subvariety:
    dims = tuple(int(m) for m in dims)
    if len(dims) != len(ambient.dims) or any(not 0 <= m <= n for m, n in zip(dims, ambient.dims)):
        raise StructuralError(f"L({','.join(map(str, dims))}) is not a subvariety of {space_format(ambient)}")
    return Subvariety(ambient, dims)


def subvariety_space(Z: Subvariety) -> Space:
    return Space(Z.dims)


def subvariety_embedding(Z: Subvariety) -> Morphism:
    return morphism_embedding(Space(Z.dims), Z.ambient)


def subvariety_format(Z: Subvariety) -> str:
    return f"L({','.join(str(m) for m in Z.dims)})"



### HOMOLOGY CYCLES ###
# H_*(X) in the basis of linear cycles [P^a_1 x ... x P^a_k]; Poincare duality is computed, not assumed

# terms: sorted tuple of (cycle dims, YPoly)
HomologyClass = namedtuple('HomologyClass', ['space', 'terms'])


def homology_make(space: Space, terms) -> HomologyClass:
    if isinstance(terms, dict):
        terms = terms.items()
    acc = {}
    for dims, coeff in terms:
        dims = tuple(dims)
        if len(dims) != len(space.dims) or any(not 0 <= a <= n for a, n in zip(dims, space.dims)):
            raise StructuralError(f"Cycle {dims} does not live on {space_format(space)}")
        coeff = ypoly_coerce(coeff)
        acc[dims] = ypoly_add(acc[dims], coeff) if dims in acc else coeff
    return HomologyClass(space, tuple(sorted((d, c) for d, c in acc.items() if c.coeffs)))


def pd_cap(X: Space, c: RingElement) -> HomologyClass:
    """Cap with the fundamental class: h^e -> [P^(n - e)]."""
    if c.ring != space_chow_ring(X):
        raise StructuralError(f"Class does not live on {space_format(X)}")
    return homology_make(X, [(tuple(n - e for n, e in zip(X.dims, exp)), coeff) for exp, coeff in c.terms])


def pd_inverse(z: HomologyClass) -> RingElement:
    X = z.space
    return ring_element(space_chow_ring(X), [(tuple(n - a for n, a in zip(X.dims, dims)), coeff)
                                             for dims, coeff in z.terms])


def homology_pushforward(f: Morphism, z: HomologyClass) -> HomologyClass:
    """Image of linear cycles; zero when a fiber direction has positive dimension."""
    if z.space != f.source:
        raise StructuralError(f"Cycle does not live on {space_format(f.source)}")
    used = morphism_used(f)
    terms = []
    for dims, coeff in z.terms:
        if any(dims[i] > 0 for i in range(len(dims)) if i not in used):
            continue
        terms.append((tuple(0 if a == CONSTANT else dims[a] for a in f.assignment), coeff))
    return homology_make(f.target, terms)


def homology_pullback(f: Morphism, z: HomologyClass) -> HomologyClass:
    """f^dot = PD_source . f^* . PD_target^-1."""
    if z.space != f.target:
        raise StructuralError(f"Cycle does not live on {space_format(f.target)}")
    return pd_cap(f.source, chow_pullback(f, pd_inverse(z)))


def pullback_dot(f: Morphism, c: RingElement) -> RingElement:
    """f^dot on a class given through its Chow representative."""
    return pd_inverse(homology_pullback(f, pd_cap(f.target, c)))


def pushforward_dot(f: Morphism, c: RingElement) -> RingElement:
    """Cohomological pushforward f_dot = PD^-1 . f_* . PD."""
    return pd_inverse(homology_pushforward(f, pd_cap(f.source, c)))


def homology_format(z: HomologyClass) -> str:
    parts = [f"{ypoly_format(c)} * [{space_format(Space(d))}]" for d, c in z.terms]
    return ' + '.join(parts) if parts else '0'



### K-THEORY ###
# G_0(X) (x) Q = Q[t_1..t_k]/(t_i^{n_i+1}) with t_i = 1 - [O_i(-1)]

KClass = namedtuple('KClass', ['space', 'element'])


def k_make(space: Space, element: RingElement) -> KClass:
    if element.ring != space_k_ring(space):
        raise StructuralError(f"K-class element does not live on {space_format(space)}")
    return KClass(space, element)


def k_zero(space: Space) -> KClass:
    return KClass(space, ring_zero(space_k_ring(space)))


def k_one(space: Space) -> KClass:
    return KClass(space, ring_one(space_k_ring(space)))


def k_line_bundle(space: Space, degrees: Sequence[int]) -> KClass:
    """[O(d_1, ..., d_k)] = prod (1 - t_i)^(-d_i)."""
    ring = space_k_ring(space)
    result = ring_one(ring)
    for i, d in enumerate(degrees):
        if space.dims[i] == 0 or d == 0:
            continue
        result = ring_mul(result, series_substitute(series_line_bundle(d), ring_generator(ring, i)))
    return KClass(space, result)


def k_of_bundle(E: VectorBundle) -> KClass:
    total = k_zero(E.base)
    for degrees in E.summands:
        total = k_add(total, k_line_bundle(E.base, degrees))
    return total


def _k_check(a: KClass, b: KClass):
    if a.space != b.space:
        raise StructuralError(f"K-classes on different spaces: {space_format(a.space)} vs {space_format(b.space)}")


def k_add(a: KClass, b: KClass) -> KClass:
    _k_check(a, b)
    return KClass(a.space, ring_add(a.element, b.element))


def k_sub(a: KClass, b: KClass) -> KClass:
    _k_check(a, b)
    return KClass(a.space, ring_sub(a.element, b.element))


def k_scale(a: KClass, scalar) -> KClass:
    return KClass(a.space, ring_scale(a.element, scalar))


def k_tensor(a: KClass, b: KClass) -> KClass:
    _k_check(a, b)
    return KClass(a.space, ring_mul(a.element, b.element))


def k_pullback(f: Morphism, a: KClass) -> KClass:
    """Ring map t_j -> t_sigma(j) or 0; canonical embeddings pull O(-1) back to O(-1)."""
    if a.space != f.target:
        raise StructuralError(f"K-class does not live on {space_format(f.target)}")
    return KClass(f.source, _ring_pullback(f, a.element, space_k_ring(f.source)))


@functools.lru_cache(maxsize=None)
def k_chi_projective(p: int, degree: int) -> Fraction:
    """chi(P^p, O(d)) = (d+1)(d+2)...(d+p)/p!, valid for every integer d."""
    return binomial_ext(degree + p, p)


@functools.lru_cache(maxsize=None)
def _k_chi_monomial(p: int, j: int) -> Fraction:
    # t^j = sum_a C(j,a) (-1)^a [O(-a)]
    return sum((math.comb(j, a) * (-1) ** a * k_chi_projective(p, -a) for a in range(j + 1)), Fraction(0))


def k_pushforward(f: Morphism, a: KClass, koszul: bool = True) -> KClass:
    """Proper pushforward computed from sheaf data, independently of Chow.

    Projected-away factors integrate to chi(P^p, -); an embedding of
    codimension c multiplies by t^c (Koszul resolution of a linear subspace);
    the base point of P^m is t^m. With koszul=False the Koszul factors are
    omitted, which is wrong and serves as a negative control.
    """
    if a.space != f.source:
        raise StructuralError(f"K-class does not live on {space_format(f.source)}")
    used = morphism_used(f)
    dropped = [i for i in range(len(f.source.dims)) if i not in used]
    acc = {}
    for exp, coeff in a.element.terms:
        scalar = math.prod((_k_chi_monomial(f.source.dims[i], exp[i]) for i in dropped), start=Fraction(1))
        if scalar == 0:
            continue
        pushed = []
        for source_index, m in zip(f.assignment, f.target.dims):
            if source_index == CONSTANT:
                pushed.append(m if koszul else 0)
            else:
                pushed.append(exp[source_index] + (m - f.source.dims[source_index] if koszul else 0))
        pushed = tuple(pushed)
        term = ypoly_scale(coeff, scalar)
        acc[pushed] = ypoly_add(acc[pushed], term) if pushed in acc else term
    return KClass(f.target, ring_element(space_k_ring(f.target), acc))


def k_chi(a: KClass) -> Fraction:
    """Holomorphic Euler characteristic: pushforward to the point."""
    return ypoly_constant_term(ring_constant_term(k_pushforward(morphism_to_point(a.space), a).element))


def k_chern_character(a: KClass) -> RingElement:
    """Ring map t_i -> 1 - exp(-h_i) into the Chow ring."""
    X = a.space
    ring = space_chow_ring(X)
    one = ring_one(ring)
    images = [ring_sub(one, series_substitute(SERIES_EXP, ring_neg(ring_generator(ring, i))))
              for i in range(len(X.dims))]
    total = ring_zero(ring)
    for exp, coeff in a.element.terms:
        term = ring_scalar(ring, coeff)
        for i, e in enumerate(exp):
            if e:
                term = ring_mul(term, ring_pow(images[i], e))
        total = ring_add(total, term)
    return total


def td_bfm(a: KClass) -> RingElement:
    """Todd class transformation on a smooth model space: ch(a) td(TX)."""
    return ring_mul(k_chern_character(a), tangent_class('todd', a.space))


def k_to_line_basis(a: KClass) -> Dict[Tuple[int, ...], Fraction]:
    """Coefficients in the basis [O(-a_1, ..., -a_k)], keyed by the (negative) degrees."""
    acc = collections.defaultdict(Fraction)
    for exp, coeff in a.element.terms:
        scalar = ypoly_constant_term(coeff)
        for shifts in itertools.product(*(range(e + 1) for e in exp)):
            sign = (-1) ** sum(shifts)
            weight = math.prod(math.comb(e, s) for e, s in zip(exp, shifts))
            acc[tuple(-s for s in shifts)] += sign * weight * scalar
    return {d: c for d, c in sorted(acc.items()) if c != 0}


def k_format(a: KClass, basis: str = 't') -> str:
    if basis == 't':
        return ring_format(a.element)
    parts = [f"{rational_format(c)} * O({','.join(str(d) for d in degrees)})"
             for degrees, c in k_to_line_basis(a).items()]
    return ' + '.join(parts) if parts else '0'



### CONSTRUCTIBLE FUNCTIONS ###

# terms: sorted tuple of (subvariety dims, int)
ConstructibleFn = namedtuple('ConstructibleFn', ['space', 'terms'])


def cf_make(space: Space, terms) -> ConstructibleFn:
    if isinstance(terms, dict):
        terms = terms.items()
    acc = collections.Counter()
    for dims, n in terms:
        subvariety_make(space, dims)
        acc[tuple(dims)] += int(n)
    return ConstructibleFn(space, tuple(sorted((d, n) for d, n in acc.items() if n)))


def cf_indicator(Z: Subvariety) -> ConstructibleFn:
    return ConstructibleFn(Z.ambient, ((Z.dims, 1),))


def cf_zero(space: Space) -> ConstructibleFn:
    return ConstructibleFn(space, ())


def cf_add(a: ConstructibleFn, b: ConstructibleFn) -> ConstructibleFn:
    if a.space != b.space:
        raise StructuralError("Constructible functions on different spaces")
    return cf_make(a.space, a.terms + b.terms)


def cf_scale(a: ConstructibleFn, n: int) -> ConstructibleFn:
    return cf_make(a.space, [(d, c * n) for d, c in a.terms])


def cf_pushforward(f: Morphism, phi: ConstructibleFn) -> ConstructibleFn:
    """Integration along fibers with respect to the topological Euler characteristic."""
    if phi.space != f.source:
        raise StructuralError(f"Constructible function does not live on {space_format(f.source)}")
    used = morphism_used(f)
    terms = []
    for dims, n in phi.terms:
        euler = math.prod(dims[i] + 1 for i in range(len(dims)) if i not in used)
        terms.append((tuple(0 if a == CONSTANT else dims[a] for a in f.assignment), n * euler))
    return cf_make(f.target, terms)


def cf_preimage(f: Morphism, phi: ConstructibleFn) -> ConstructibleFn:
    """phi . f for any model morphism."""
    if phi.space != f.target:
        raise StructuralError(f"Constructible function does not live on {space_format(f.target)}")
    terms = []
    for dims, n in phi.terms:
        pulled = list(f.source.dims)
        for j, a in enumerate(f.assignment):
            if a != CONSTANT:
                pulled[a] = min(f.source.dims[a], dims[j])
        terms.append((tuple(pulled), n))
    return cf_make(f.source, terms)


def cf_pullback(g: Morphism, phi: ConstructibleFn) -> ConstructibleFn:
    if not classify_morphism(g).is_smooth:
        raise UnsupportedLegError(f"Constructible pullback needs a smooth morphism, got {morphism_format(g)}")
    return cf_preimage(g, phi)


def cf_multiply(a: ConstructibleFn, b: ConstructibleFn) -> ConstructibleFn:
    """Pointwise product; canonical linear subspaces meet in the smaller one."""
    if a.space != b.space:
        raise StructuralError("Constructible functions on different spaces")
    return cf_make(a.space, [(tuple(min(x, y) for x, y in zip(d, e)), m * n)
                             for d, m in a.terms for e, n in b.terms])


def mac_chern(phi: ConstructibleFn) -> RingElement:
    """MacPherson's Chern class: sum n_Z i_*(c(TZ))."""
    X = phi.space
    total = ring_zero(space_chow_ring(X))
    for dims, n in phi.terms:
        Z = Subvariety(X, dims)
        pushed = chow_pushforward(subvariety_embedding(Z), tangent_class('chern', Space(dims)))
        total = ring_add(total, ring_scale(pushed, n))
    return total


def cf_format(phi: ConstructibleFn) -> str:
    parts = [f"{n}*ind(L({','.join(map(str, dims))}))" for dims, n in phi.terms]
    return ' + '.join(parts) if parts else '0'



### MOTIVIC CLASSES ###
# K_0(V/X) on generators [V -> X]; a generator key is (V dims, assignment) in canonical form

MotivicClass = namedtuple('MotivicClass', ['space', 'terms'])


def mot_generator(h: Morphism) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Canonical key of [V -h-> X] up to isomorphism of V."""
    order = apex_canonical_order(h.source.dims, [h.assignment])
    dims, (assignment,), _ = apex_reorder(h.source.dims, order, [h.assignment])
    return dims, assignment


def mot_structure_morphism(X: Space, key) -> Morphism:
    dims, assignment = key
    return Morphism(Space(dims), X, assignment)


def mot_make(space: Space, terms) -> MotivicClass:
    if isinstance(terms, dict):
        terms = terms.items()
    acc = collections.Counter()
    for key, n in terms:
        acc[mot_generator(mot_structure_morphism(space, key))] += int(n)
    return MotivicClass(space, tuple(sorted((k, n) for k, n in acc.items() if n)))


def mot_of_morphism(h: Morphism) -> MotivicClass:
    return MotivicClass(h.target, ((mot_generator(h), 1),))


def mot_of_subvariety(Z: Subvariety) -> MotivicClass:
    return mot_of_morphism(subvariety_embedding(Z))


def mot_zero(space: Space) -> MotivicClass:
    return MotivicClass(space, ())


def mot_add(a: MotivicClass, b: MotivicClass) -> MotivicClass:
    if a.space != b.space:
        raise StructuralError("Motivic classes on different spaces")
    return mot_make(a.space, a.terms + b.terms)


def mot_scale(a: MotivicClass, n: int) -> MotivicClass:
    return mot_make(a.space, [(k, c * n) for k, c in a.terms])


def mot_pushforward(f: Morphism, m: MotivicClass) -> MotivicClass:
    """[V -> X] -> [V -> X -> Y]."""
    if m.space != f.source:
        raise StructuralError(f"Motivic class does not live on {space_format(f.source)}")
    return mot_make(f.target, [(mot_generator(compose_morphisms(mot_structure_morphism(m.space, key), f)), n)
                               for key, n in m.terms])


def mot_pullback(g: Morphism, m: MotivicClass) -> MotivicClass:
    """[V -> Y] -> [X x_Y V -> X] for smooth g: X -> Y."""
    if m.space != g.target:
        raise StructuralError(f"Motivic class does not live on {space_format(g.target)}")
    if not classify_morphism(g).is_smooth:
        raise UnsupportedLegError(f"Motivic pullback needs a smooth morphism, got {morphism_format(g)}")
    terms = []
    for key, n in m.terms:
        _, h_tilde, _ = fiber_product(g, mot_structure_morphism(m.space, key))
        terms.append((mot_generator(h_tilde), n))
    return mot_make(g.source, terms)


def hirzebruch_Ty(m: MotivicClass) -> RingElement:
    """Motivic Hirzebruch class: sum n h_*(T_y(TV))."""
    total = ring_zero(space_chow_ring(m.space))
    for key, n in m.terms:
        h = mot_structure_morphism(m.space, key)
        total = ring_add(total, ring_scale(chow_pushforward(h, tangent_class('hirzebruch', h.source)), n))
    return total


def epsilon_map(m: MotivicClass) -> ConstructibleFn:
    """[V -h-> X] -> h_* 1_V."""
    total = cf_zero(m.space)
    for key, n in m.terms:
        h = mot_structure_morphism(m.space, key)
        total = cf_add(total, cf_scale(cf_pushforward(h, cf_indicator(Subvariety(h.source, h.source.dims))), n))
    return total


def gamma_map(m: MotivicClass) -> KClass:
    """[V -h-> X] -> h_* [O_V]."""
    total = k_zero(m.space)
    for key, n in m.terms:
        h = mot_structure_morphism(m.space, key)
        total = k_add(total, k_scale(k_pushforward(h, k_one(h.source)), n))
    return total


def mot_key_format(key) -> str:
    dims, assignment = key
    return f"{space_format(Space(dims))}[{','.join('c' if a == CONSTANT else f's{a + 1}' for a in assignment)}]"


def mot_format(m: MotivicClass) -> str:
    parts = [f"{n}*{mot_key_format(key)}" for key, n in m.terms]
    return ' + '.join(parts) if parts else '0'



### APEX CANONICALIZATION ###
# Isomorphisms of model spaces are factor permutations; a canonical apex is the
# lexicographically minimal relabelling after dropping P^0 factors

def apex_canonical_order(dims: Sequence[int], assignments: Sequence[Sequence[int]],
                         summands: Sequence[Sequence[int]] = ()) -> List[int]:
    """Old factor indices in canonical order (P^0 factors dropped).

    Factors are sorted by dimension; within a block of equal dimension the
    permutation giving the smallest (assignments, summands) key wins.
    """
    kept = sorted((i for i, n in enumerate(dims) if n > 0), key=lambda i: dims[i])
    blocks = [list(group) for _, group in itertools.groupby(kept, key=lambda i: dims[i])]
    best_key, best_order = None, kept
    for choice in itertools.product(*(itertools.permutations(block) for block in blocks)):
        order = [i for block in choice for i in block]
        _, new_assignments, new_summands = apex_reorder(dims, order, assignments, summands)
        key = (new_assignments, new_summands)
        if best_key is None or key < best_key:
            best_key, best_order = key, order
    return best_order


def apex_reorder(dims: Sequence[int], order: Sequence[int], assignments: Sequence[Sequence[int]],
                 summands: Sequence[Sequence[int]] = ()) -> Tuple[Tuple[int, ...], Tuple, Tuple]:
    position = {old: new for new, old in enumerate(order)}
    new_dims = tuple(dims[i] for i in order)
    new_assignments = tuple(tuple(CONSTANT if a == CONSTANT else position[a] for a in assignment)
                            for assignment in assignments)
    new_summands = tuple(sorted(tuple(degrees[i] for i in order) for degrees in summands))
    return new_dims, new_assignments, new_summands



### CORRESPONDENCES ###

# left: apex -> source (the proper leg), right: apex -> target
Correspondence = namedtuple('Correspondence', ['source', 'target', 'apex', 'left', 'right', 'tags'])

# terms: sorted tuple of (canonical Correspondence, int)
CorrSum = namedtuple('CorrSum', ['source', 'target', 'terms'])

TAG_PREDICATES = {
    'proper': lambda cls: cls.is_proper,
    'smooth': lambda cls: cls.is_smooth,
    'lci': lambda cls: cls.is_lci,
    'iso': lambda cls: cls.is_iso,
}

DEFAULT_TAGS = ('proper', 'smooth')


def corr_make(left: Morphism, right: Morphism, tags: Tuple[str, str] = DEFAULT_TAGS) -> Correspondence:
    """Span source <-left- apex -right-> target whose legs satisfy the tag predicates."""
    if left.source != right.source:
        raise StructuralError(f"Legs start at different apexes: {space_format(left.source)} vs "
                              f"{space_format(right.source)}")
    tags = tuple(tags)
    if len(tags) != 2 or any(tag not in TAG_PREDICATES for tag in tags):
        raise StructuralError(f"Tags must be two of {', '.join(TAG_PREDICATES)}, got {tags}")
    for leg, tag, side in ((left, tags[0], 'left'), (right, tags[1], 'right')):
        if not TAG_PREDICATES[tag](classify_morphism(leg)):
            raise UnsupportedLegError(f"The {side} leg {morphism_format(leg)} is not {tag}")
    return Correspondence(left.target, right.target, left.source, left, right, tags)


def corr_identity(X: Space, tags: Tuple[str, str] = DEFAULT_TAGS) -> Correspondence:
    identity = morphism_identity(X)
    return corr_make(identity, identity, tags)


def corr_from_pushforward(f: Morphism) -> Correspondence:
    """Proper-identity correspondence target(f) <-f- source(f) -id-> source(f)."""
    return corr_make(f, morphism_identity(f.source))


def corr_from_pullback(g: Morphism) -> Correspondence:
    """Identity-smooth correspondence source(g) <-id- source(g) -g-> target(g)."""
    return corr_make(morphism_identity(g.source), g)


def corr_canonicalize(c: Correspondence) -> Correspondence:
    order = apex_canonical_order(c.apex.dims, [c.left.assignment, c.right.assignment])
    dims, (left, right), _ = apex_reorder(c.apex.dims, order, [c.left.assignment, c.right.assignment])
    apex = Space(dims)
    return Correspondence(c.source, c.target, apex, Morphism(apex, c.source, left),
                          Morphism(apex, c.target, right), c.tags)


def corr_is_isomorphic(c: Correspondence, d: Correspondence) -> bool:
    return corr_canonicalize(c) == corr_canonicalize(d)


def corr_compose(alpha: Correspondence, beta: Correspondence) -> Correspondence:
    """alpha o beta for alpha: X <- M -> Y and beta: Y <- N -> Z, through M x_Y N."""
    if alpha.target != beta.source:
        raise StructuralError(f"Cannot compose correspondences: {space_format(alpha.target)} is not "
                              f"{space_format(beta.source)}")
    if alpha.tags != beta.tags:
        raise StructuralError(f"Cannot compose {alpha.tags} with {beta.tags} correspondences")
    W, h_tilde, g_tilde = fiber_product(alpha.right, beta.left)
    left = compose_morphisms(h_tilde, alpha.left)
    right = compose_morphisms(g_tilde, beta.right)
    return corr_canonicalize(Correspondence(alpha.source, beta.target, W, left, right, alpha.tags))


def corr_format(c: Correspondence) -> str:
    text = (f"{space_format(c.source)} <- {space_format(c.apex)} -> {space_format(c.target)} "
            f"{{ left [{_assignment_format(c.left)}], right [{_assignment_format(c.right)}] }}")
    if c.tags != DEFAULT_TAGS:
        text += f" tags {' '.join(c.tags)}"
    return text


def _assignment_format(f: Morphism) -> str:
    return ','.join('c' if a == CONSTANT else f's{a + 1}' for a in f.assignment)


def corrsum_make(source: Space, target: Space, terms: Iterable[Tuple[Correspondence, int]]) -> CorrSum:
    acc = collections.Counter()
    for c, n in terms:
        if c.source != source or c.target != target:
            raise StructuralError(f"Correspondence {corr_format(c)} is not in Corr({space_format(source)}, "
                                  f"{space_format(target)})")
        acc[corr_canonicalize(c)] += int(n)
    return CorrSum(source, target, tuple(sorted((c, n) for c, n in acc.items() if n)))


def corrsum_of(c: Correspondence) -> CorrSum:
    return corrsum_make(c.source, c.target, [(c, 1)])


def corrsum_zero(source: Space, target: Space) -> CorrSum:
    return CorrSum(source, target, ())


def corrsum_add(a: CorrSum, b: CorrSum) -> CorrSum:
    if (a.source, a.target) != (b.source, b.target):
        raise StructuralError("Cannot add correspondence sums between different spaces")
    return corrsum_make(a.source, a.target, a.terms + b.terms)


def corrsum_scale(a: CorrSum, n: int) -> CorrSum:
    return corrsum_make(a.source, a.target, [(c, m * n) for c, m in a.terms])


def corrsum_compose(a: CorrSum, b: CorrSum) -> CorrSum:
    """Bilinear extension of corr_compose."""
    if a.target != b.source:
        raise StructuralError(f"Cannot compose sums: {space_format(a.target)} is not {space_format(b.source)}")
    return corrsum_make(a.source, b.target, [(corr_compose(c, d), m * n) for c, m in a.terms for d, n in b.terms])


def corrsum_format(a: CorrSum) -> str:
    parts = [f"{n}*[{corr_format(c)}]" for c, n in a.terms]
    return ' + '.join(parts) if parts else '0'



### LINEAR OPERATORS ###
# A functor value hom(F(Y), F(X)) as a map on vectors {basis key: YPoly} with a declared domain basis

LinearOperator = namedtuple('LinearOperator', ['domain', 'codomain', 'basis', 'apply'])

FUNCTOR_IDS = ('G0', 'HTodd', 'F', 'HChern', 'K0V', 'HHirz', 'HSm')

# Homology functors and the genus twisting the pullback leg
FUNCTOR_GENUS = {
    'HTodd': 'todd',
    'HChern': 'chern',
    'HHirz': 'hirzebruch',
}

# Functors that need a smooth pullback leg
FUNCTOR_SMOOTH_ONLY = ('F', 'HChern', 'K0V', 'HHirz')

# name: (source functor, target functor)
NATURAL_TRANSFORMATIONS = {
    'td_bfm': ('G0', 'HTodd'),
    'mac_chern': ('F', 'HChern'),
    'hirzebruch_Ty': ('K0V', 'HHirz'),
}


def functor_check(functor: str):
    if functor not in FUNCTOR_IDS:
        raise StructuralError(f"Unknown functor: {functor} (expected one of {', '.join(FUNCTOR_IDS)})")


def functor_basis(functor: str, X: Space) -> Tuple:
    """Canonical basis of the value group, sorted."""
    functor_check(functor)
    if functor == 'G0':
        return tuple(ring_monomials(space_k_ring(X)))
    if functor in FUNCTOR_GENUS:
        return tuple(ring_monomials(space_chow_ring(X)))
    if functor in ('F', 'HSm'):
        return tuple(space_subvarieties(X))
    return tuple(sorted(mot_generator(subvariety_embedding(Subvariety(X, dims)))
                        for dims in space_subvarieties(X)))


def functor_value(functor: str, X: Space, vector: Dict):
    """Turn a basis vector into the value object of the functor on X."""
    if functor == 'G0':
        return KClass(X, ring_from_vector(space_k_ring(X), vector))
    if functor in FUNCTOR_GENUS:
        return ring_from_vector(space_chow_ring(X), vector)
    if functor == 'F':
        return cf_make(X, [(k, _vector_integer(c)) for k, c in vector.items()])
    if functor == 'K0V':
        return mot_make(X, [(k, _vector_integer(c)) for k, c in vector.items()])
    if functor == 'HSm':
        return homology_make(X, vector)
    raise StructuralError(f"Unknown functor: {functor}")


def functor_vector(functor: str, value) -> Dict:
    if functor == 'G0':
        return ring_to_vector(value.element)
    if functor in FUNCTOR_GENUS or functor == 'HSm':
        return dict(value.terms)
    return {k: ypoly(n) for k, n in value.terms}


def _vector_integer(c: YPoly) -> int:
    value = ypoly_constant_term(c)
    if ypoly_degree(c) > 0 or value.denominator != 1:
        raise DomainError(f"Expected an integer coefficient, got {ypoly_format(c)}")
    return value.numerator


def _vector_accumulate(total: Dict, vector: Dict, scale=1):
    for key, coeff in vector.items():
        coeff = ypoly_scale(coeff, scale)
        total[key] = ypoly_add(total[key], coeff) if key in total else coeff


def _vector_prune(vector: Dict) -> Dict:
    return {k: c for k, c in sorted(vector.items()) if c.coeffs}


def span_apply(functor: str, left: Morphism, right: Morphism, twist: bool = True) -> Callable[[Dict], Dict]:
    """The map F(Y) -> F(X) of a span X <-left- M -right-> Y: push along left after twisted pull along right.

    Args:
        functor: one of FUNCTOR_IDS
        left: proper leg M -> X
        right: M -> Y, smooth unless the functor is G0, HTodd or HSm
        twist: multiply by the relative genus of the right leg (homology functors only)
    """
    functor_check(functor)
    if functor in FUNCTOR_SMOOTH_ONLY and not classify_morphism(right).is_smooth:
        raise UnsupportedLegError(f"{functor} needs a smooth right leg, got {morphism_format(right)}")
    M, Y = right.source, right.target
    if functor == 'G0':
        def apply(vector):
            pulled = k_pullback(right, KClass(Y, ring_from_vector(space_k_ring(Y), vector)))
            return ring_to_vector(k_pushforward(left, pulled).element)
    elif functor in FUNCTOR_GENUS:
        factor = relative_genus(FUNCTOR_GENUS[functor], right) if twist else ring_one(space_chow_ring(M))

        def apply(vector):
            pulled = chow_pullback(right, ring_from_vector(space_chow_ring(Y), vector))
            return ring_to_vector(chow_pushforward(left, ring_mul(factor, pulled)))
    elif functor == 'F':
        def apply(vector):
            return functor_vector('F', cf_pushforward(left, cf_pullback(right, functor_value('F', Y, vector))))
    elif functor == 'K0V':
        def apply(vector):
            return functor_vector('K0V', mot_pushforward(left, mot_pullback(right, functor_value('K0V', Y, vector))))
    else:
        def apply(vector):
            return functor_vector('HSm', homology_pushforward(left, homology_pullback(right, homology_make(Y, vector))))
    return apply


def operator_make(functor: str, domain: Space, codomain: Space, maps: Sequence[Tuple[Callable, int]]) -> LinearOperator:
    """Operator sum_i n_i map_i over the canonical basis of functor(domain)."""
    maps = tuple(maps)

    def apply(vector):
        total = {}
        for function, n in maps:
            _vector_accumulate(total, function(vector), n)
        return _vector_prune(total)
    return LinearOperator(domain, codomain, functor_basis(functor, domain), apply)


def corr_operator(functor: str, a: Union[Correspondence, CorrSum], twist: bool = True) -> LinearOperator:
    """Value of a functor on a correspondence or a sum: F(target) -> F(source)."""
    if isinstance(a, Correspondence):
        a = corrsum_of(a)
    return operator_make(functor, a.target, a.source,
                         [(span_apply(functor, c.left, c.right, twist), n) for c, n in a.terms])


def operator_identity(functor: str, X: Space) -> LinearOperator:
    return LinearOperator(X, X, functor_basis(functor, X), _vector_prune)


def operator_compose(A: LinearOperator, B: LinearOperator) -> LinearOperator:
    """A after B."""
    if B.codomain != A.domain:
        raise StructuralError(f"Cannot compose operators: {space_format(B.codomain)} is not "
                              f"{space_format(A.domain)}")
    return LinearOperator(B.domain, A.codomain, B.basis, lambda vector: A.apply(B.apply(vector)))


def operator_sum(A: LinearOperator, B: LinearOperator) -> LinearOperator:
    if (A.domain, A.codomain) != (B.domain, B.codomain):
        raise StructuralError("Cannot add operators between different spaces")

    def apply(vector):
        total = dict(A.apply(vector))
        _vector_accumulate(total, B.apply(vector))
        return _vector_prune(total)
    return LinearOperator(A.domain, A.codomain, A.basis, apply)


def operator_scale(A: LinearOperator, scalar) -> LinearOperator:
    def apply(vector):
        total = {}
        _vector_accumulate(total, A.apply(vector), scalar)
        return _vector_prune(total)
    return LinearOperator(A.domain, A.codomain, A.basis, apply)


def operator_column(A: LinearOperator, key) -> Dict:
    return _vector_prune(A.apply({key: YPOLY_ONE}))


def operator_matrix(A: LinearOperator) -> Dict:
    """Columns of A over its domain basis."""
    return {key: operator_column(A, key) for key in A.basis}


def operator_witness(A: LinearOperator, B: LinearOperator):
    """Smallest basis vector on which A and B differ, or None."""
    if (A.domain, A.codomain) != (B.domain, B.codomain):
        raise StructuralError("Cannot compare operators between different spaces")
    for key in A.basis:
        if operator_column(A, key) != operator_column(B, key):
            return key
    return None


def operator_equal(A: LinearOperator, B: LinearOperator) -> bool:
    return operator_witness(A, B) is None


def transformation_operator(name: str, X: Space) -> LinearOperator:
    """The natural transformation as an operator source functor(X) -> target functor(X)."""
    if name not in NATURAL_TRANSFORMATIONS:
        raise StructuralError(f"Unknown transformation: {name} (expected one of "
                              f"{', '.join(NATURAL_TRANSFORMATIONS)})")
    source_functor, _ = NATURAL_TRANSFORMATIONS[name]
    transform = {'td_bfm': td_bfm, 'mac_chern': mac_chern, 'hirzebruch_Ty': hirzebruch_Ty}[name]

    def apply(vector):
        return _vector_prune(ring_to_vector(transform(functor_value(source_functor, X, vector))))
    return LinearOperator(X, X, functor_basis(source_functor, X), apply)


def key_format(key) -> str:
    if key and isinstance(key[0], tuple):
        return mot_key_format(key)
    return f"({','.join(str(k) for k in key)})"


def vector_json(vector: Dict) -> Dict[str, str]:
    return {key_format(k): ypoly_format(c) for k, c in sorted(vector.items())}


def operator_matrix_json(A: LinearOperator) -> Dict[str, Dict[str, str]]:
    return {key_format(k): vector_json(column) for k, column in operator_matrix(A).items()}


def operator_format(A: LinearOperator) -> str:
    lines = []
    for key, column in operator_matrix(A).items():
        image = ' + '.join(f"{ypoly_format(c)} {key_format(k)}" for k, c in column.items()) or '0'
        lines.append(f"{key_format(key)} -> {image}")
    return '\n'.join(lines)



### CHECKS ###

CheckResult = namedtuple('CheckResult', ['name', 'suite', 'cases', 'passes', 'failures', 'informational'])


class CheckTally:
    """Counts identity checks and keeps failure entries with both operators."""

    def __init__(self, name: str, suite: str, informational: bool = False):
        self.name = name
        self.suite = suite
        self.informational = informational
        self.cases = 0
        self.passes = 0
        self.failures = []

    def operators(self, label: str, left: LinearOperator, right: LinearOperator) -> bool:
        self.cases += 1
        witness = operator_witness(left, right)
        if witness is None:
            self.passes += 1
            return True
        logger.debug("%s: %s differs at %s", self.name, label, key_format(witness))
        self.failures.append({
            'case': label,
            'witness': key_format(witness),
            'left': vector_json(operator_column(left, witness)),
            'right': vector_json(operator_column(right, witness)),
            'left_matrix': operator_matrix_json(left),
            'right_matrix': operator_matrix_json(right),
        })
        return False

    def values(self, label: str, left, right, render: Callable[[Any], str] = str) -> bool:
        self.cases += 1
        if left == right:
            self.passes += 1
            return True
        logger.debug("%s: %s differs", self.name, label)
        self.failures.append({'case': label, 'left': render(left), 'right': render(right)})
        return False

    def error(self, label: str, error: Exception):
        self.cases += 1
        self.failures.append({'case': label, 'error': str(error)})

    def result(self) -> CheckResult:
        return CheckResult(self.name, self.suite, self.cases, self.passes, tuple(self.failures), self.informational)


def check_functoriality(functor: str, alpha, beta, name: Optional[str] = None,
                        tally: Optional[CheckTally] = None) -> CheckResult:
    """F(alpha o beta) == F(alpha) F(beta) for correspondences or sums."""
    alpha = corrsum_of(alpha) if isinstance(alpha, Correspondence) else alpha
    beta = corrsum_of(beta) if isinstance(beta, Correspondence) else beta
    tally = tally or CheckTally(name or f"functoriality {functor}", 'functoriality')
    composite = corr_operator(functor, corrsum_compose(alpha, beta))
    product = operator_compose(corr_operator(functor, alpha), corr_operator(functor, beta))
    tally.operators(f"{functor}(a o b) = {functor}(a) {functor}(b)", composite, product)
    return tally.result()


def check_naturality(transformation: str, alpha, twist: bool = True, name: Optional[str] = None,
                     tally: Optional[CheckTally] = None) -> CheckResult:
    """tau_X . F(alpha) == H(alpha) . tau_Y; twist=False drops the genus twist of H."""
    alpha = corrsum_of(alpha) if isinstance(alpha, Correspondence) else alpha
    source_functor, target_functor = NATURAL_TRANSFORMATIONS[transformation]
    tally = tally or CheckTally(name or f"naturality {transformation}", 'naturality')
    left = operator_compose(transformation_operator(transformation, alpha.source),
                            corr_operator(source_functor, alpha))
    right = operator_compose(corr_operator(target_functor, alpha, twist=twist),
                             transformation_operator(transformation, alpha.target))
    tally.operators(f"{transformation} {source_functor} -> {target_functor}", left, right)
    return tally.result()



### BICYCLES ###
# Cobordism bicycles [X <-p- V -s-> Y; E]: a proper-smooth correspondence with a bundle on the apex

Bicycle = namedtuple('Bicycle', ['source', 'target', 'apex', 'left', 'right', 'bundle'])

BicycleSum = namedtuple('BicycleSum', ['source', 'target', 'terms'])

# product: 'whitney' or 'tensor'; theory: 'chow' or 'k'; tangent: genus of T_s or None;
# bundle: genus kind or 'ch' applied to E
BicycleFunctor = namedtuple('BicycleFunctor', ['name', 'product', 'theory', 'tangent', 'bundle'])

BICYCLE_PRODUCTS = ('whitney', 'tensor')

BICYCLE_PUSH_SIDES = ('left_proper', 'right_smooth')

BICYCLE_PULL_SIDES = ('left_smooth', 'right_proper')

BICYCLE_FUNCTOR_SAMPLES = (
    'Hcl:chern', 'Hcl:todd', 'Hcl:lclass', 'Hcl:hirzebruch', 'Hch',
    'Hcl1cl2:todd:chern', 'Hcl1cl2:hirzebruch:lclass', 'Hclch:chern', 'G0tensor', 'Htdch',
)


def bicycle_make(left: Morphism, right: Morphism, bundle: VectorBundle) -> Bicycle:
    if left.source != right.source or bundle.base != left.source:
        raise StructuralError("Legs and bundle of a bicycle must share the apex")
    if not classify_morphism(right).is_smooth:
        raise UnsupportedLegError(f"The right leg of a bicycle must be smooth, got {morphism_format(right)}")
    return Bicycle(left.target, right.target, left.source, left, right, bundle)


def bicycle_from_corr(c: Correspondence, bundle: VectorBundle) -> Bicycle:
    return bicycle_make(c.left, c.right, bundle)


def bicycle_identity(X: Space, summands: Iterable[Sequence[int]] = ()) -> Bicycle:
    identity = morphism_identity(X)
    return bicycle_make(identity, identity, bundle_make(X, summands))


def bicycle_grade(b: Bicycle) -> Tuple[int, int]:
    """(relative dimension of the right leg, rank of the bundle)."""
    return classify_morphism(b.right).relative_dimension, bundle_rank(b.bundle)


def bicycle_canonicalize(b: Bicycle) -> Bicycle:
    legs = [b.left.assignment, b.right.assignment]
    order = apex_canonical_order(b.apex.dims, legs, b.bundle.summands)
    dims, (left, right), summands = apex_reorder(b.apex.dims, order, legs, b.bundle.summands)
    apex = Space(dims)
    return Bicycle(b.source, b.target, apex, Morphism(apex, b.source, left), Morphism(apex, b.target, right),
                   bundle_make(apex, summands))


def bicycle_corr(b: Bicycle) -> Correspondence:
    return Correspondence(b.source, b.target, b.apex, b.left, b.right, DEFAULT_TAGS)


def bicycle_format(b: Bicycle) -> str:
    return (f"{space_format(b.source)} <- {space_format(b.apex)} -> {space_format(b.target)} "
            f"{{ left [{_assignment_format(b.left)}], right [{_assignment_format(b.right)}] }} "
            f"with {bundle_format(b.bundle)}")


def bicycle_product(mode: str, alpha: Bicycle, beta: Bicycle) -> Bicycle:
    """alpha o beta with the pulled-back bundles combined by Whitney sum or tensor product."""
    if mode not in BICYCLE_PRODUCTS:
        raise StructuralError(f"Unknown bicycle product: {mode}")
    if alpha.target != beta.source:
        raise StructuralError(f"Cannot compose bicycles: {space_format(alpha.target)} is not "
                              f"{space_format(beta.source)}")
    W, h_tilde, g_tilde = fiber_product(alpha.right, beta.left)
    E = bundle_pullback(h_tilde, alpha.bundle)
    F = bundle_pullback(g_tilde, beta.bundle)
    bundle = bundle_whitney(E, F) if mode == 'whitney' else bundle_tensor(E, F)
    return bicycle_canonicalize(Bicycle(alpha.source, beta.target, W, compose_morphisms(h_tilde, alpha.left),
                                        compose_morphisms(g_tilde, beta.right), bundle))


def bicycle_push(side: str, f: Morphism, b: Bicycle) -> Bicycle:
    """Compose the left leg with a proper f, or the right leg with a smooth f."""
    if side == 'left_proper':
        return bicycle_canonicalize(bicycle_make(compose_morphisms(b.left, f), b.right, b.bundle))
    if side == 'right_smooth':
        if not classify_morphism(f).is_smooth:
            raise UnsupportedLegError(f"Right pushforward needs a smooth map, got {morphism_format(f)}")
        return bicycle_canonicalize(bicycle_make(b.left, compose_morphisms(b.right, f), b.bundle))
    raise StructuralError(f"Unknown push side: {side} (expected one of {', '.join(BICYCLE_PUSH_SIDES)})")


def bicycle_pull(side: str, f: Morphism, b: Bicycle) -> Bicycle:
    """Base change of the left leg along a smooth f, or of the right leg along a proper f."""
    if side == 'left_smooth':
        if not classify_morphism(f).is_smooth:
            raise UnsupportedLegError(f"Left pullback needs a smooth map, got {morphism_format(f)}")
        W, h_tilde, g_tilde = fiber_product(f, b.left)
        return bicycle_canonicalize(bicycle_make(h_tilde, compose_morphisms(g_tilde, b.right),
                                                 bundle_pullback(g_tilde, b.bundle)))
    if side == 'right_proper':
        W, h_tilde, g_tilde = fiber_product(b.right, f)
        return bicycle_canonicalize(bicycle_make(compose_morphisms(h_tilde, b.left), g_tilde,
                                                 bundle_pullback(h_tilde, b.bundle)))
    raise StructuralError(f"Unknown pull side: {side} (expected one of {', '.join(BICYCLE_PULL_SIDES)})")


def bicycle_double_push(f: Morphism, b: Bicycle) -> Bicycle:
    """f_** : bicycles on (X, X) -> bicycles on (Y, Y) for a proper smooth f: X -> Y."""
    if b.source != f.source or b.target != f.source:
        raise StructuralError("Double pushforward needs a bicycle from the source of f to itself")
    if not classify_morphism(f).is_smooth:
        raise UnsupportedLegError(f"Double pushforward needs a smooth map, got {morphism_format(f)}")
    return bicycle_push('right_smooth', f, bicycle_push('left_proper', f, b))


def bicycle_double_pull(f: Morphism, b: Bicycle) -> Bicycle:
    """f^** : bicycles on (Y, Y) -> bicycles on (X, X) through two successive fiber squares."""
    if b.source != f.target or b.target != f.target:
        raise StructuralError("Double pullback needs a bicycle from the target of f to itself")
    if not classify_morphism(f).is_smooth:
        raise UnsupportedLegError(f"Double pullback needs a smooth map, got {morphism_format(f)}")
    return bicycle_pull('right_proper', f, bicycle_pull('left_smooth', f, b))


def bicycle_decompose(b: Bicycle) -> Tuple[Bicycle, Bicycle, Bicycle]:
    """[X <- V], [V; E], [V -> Y] whose Whitney product gives back b."""
    V = b.apex
    identity = morphism_identity(V)
    return (bicycle_make(b.left, identity, bundle_make(V, ())),
            bicycle_make(identity, identity, b.bundle),
            bicycle_make(identity, b.right, bundle_make(V, ())))


def bicyclesum_make(source: Space, target: Space, terms: Iterable[Tuple[Bicycle, int]]) -> BicycleSum:
    acc = collections.Counter()
    for b, n in terms:
        if b.source != source or b.target != target:
            raise StructuralError(f"Bicycle {bicycle_format(b)} is not between {space_format(source)} and "
                                  f"{space_format(target)}")
        acc[bicycle_canonicalize(b)] += int(n)
    return BicycleSum(source, target, tuple(sorted((b, n) for b, n in acc.items() if n)))


def bicyclesum_of(b: Bicycle) -> BicycleSum:
    return bicyclesum_make(b.source, b.target, [(b, 1)])


def bicyclesum_add(a: BicycleSum, b: BicycleSum) -> BicycleSum:
    if (a.source, a.target) != (b.source, b.target):
        raise StructuralError("Cannot add bicycle sums between different spaces")
    return bicyclesum_make(a.source, a.target, a.terms + b.terms)


def bicyclesum_compose(mode: str, a: BicycleSum, b: BicycleSum) -> BicycleSum:
    return bicyclesum_make(a.source, b.target,
                           [(bicycle_product(mode, c, d), m * n) for c, m in a.terms for d, n in b.terms])


def bicyclesum_grades(a: BicycleSum) -> Dict[Tuple[int, int], BicycleSum]:
    """Split a sum into its bigraded pieces."""
    buckets = collections.defaultdict(list)
    for b, n in a.terms:
        buckets[bicycle_grade(b)].append((b, n))
    return {grade: BicycleSum(a.source, a.target, tuple(terms)) for grade, terms in sorted(buckets.items())}


def bicyclesum_format(a: BicycleSum) -> str:
    parts = [f"{n}*[{bicycle_format(b)}]" for b, n in a.terms]
    return ' + '.join(parts) if parts else '0'


def bicycle_functor(name: str, *kinds: str) -> BicycleFunctor:
    """Build one of Hcl(cl), Hch, Hcl1cl2(cl1, cl2), Hclch(cl), G0tensor, Htdch."""
    arity = {'Hcl': 1, 'Hch': 0, 'Hcl1cl2': 2, 'Hclch': 1, 'G0tensor': 0, 'Htdch': 0}
    if name not in arity:
        raise StructuralError(f"Unknown bicycle functor: {name} (expected one of {', '.join(arity)})")
    if len(kinds) != arity[name]:
        raise StructuralError(f"{name} takes {arity[name]} genus kinds, got {len(kinds)}")
    for kind in kinds:
        genus_series(kind)
    full_name = ':'.join((name,) + kinds)
    if name == 'Hcl':
        return BicycleFunctor(full_name, 'whitney', 'chow', None, kinds[0])
    if name == 'Hch':
        return BicycleFunctor(full_name, 'tensor', 'chow', None, 'ch')
    if name == 'Hcl1cl2':
        return BicycleFunctor(full_name, 'whitney', 'chow', kinds[0], kinds[1])
    if name == 'Hclch':
        return BicycleFunctor(full_name, 'tensor', 'chow', kinds[0], 'ch')
    if name == 'G0tensor':
        return BicycleFunctor(full_name, 'tensor', 'k', None, 'ch')
    return BicycleFunctor(full_name, 'tensor', 'chow', 'todd', 'ch')


def bicycle_functor_parse(text: str) -> BicycleFunctor:
    """Parse "Hcl1cl2:todd:chern" style names."""
    name, *kinds = text.split(':')
    return bicycle_functor(name, *kinds)


def _bicycle_basis_functor(F: BicycleFunctor) -> str:
    return 'G0' if F.theory == 'k' else 'HTodd'


def bicycle_span_apply(F: BicycleFunctor, b: Bicycle, twist: bool = True) -> Callable[[Dict], Dict]:
    """p_*(cl1(T_s) cl2(E) s^*), or p_!([E] (x) s^*) in K-theory."""
    Y = b.target
    if F.theory == 'k':
        bundle = k_of_bundle(b.bundle)

        def apply(vector):
            pulled = k_pullback(b.right, KClass(Y, ring_from_vector(space_k_ring(Y), vector)))
            return ring_to_vector(k_pushforward(b.left, k_tensor(bundle, pulled)).element)
        return apply
    factor = bundle_class(F.bundle, b.bundle)
    if F.tangent is not None and twist:
        factor = ring_mul(factor, relative_genus(F.tangent, b.right))

    def apply(vector):
        pulled = chow_pullback(b.right, ring_from_vector(space_chow_ring(Y), vector))
        return ring_to_vector(chow_pushforward(b.left, ring_mul(factor, pulled)))
    return apply


def bicycle_operator(F: Union[BicycleFunctor, str], b: Union[Bicycle, BicycleSum], twist: bool = True) -> LinearOperator:
    if isinstance(F, str):
        F = bicycle_functor_parse(F)
    if isinstance(b, Bicycle):
        b = bicyclesum_of(b)
    return operator_make(_bicycle_basis_functor(F), b.target, b.source,
                         [(bicycle_span_apply(F, c, twist), n) for c, n in b.terms])


def bicycle_leg_operator(F: BicycleFunctor, left: Morphism, right: Morphism) -> LinearOperator:
    """p_*(cl1(T_s) s^*) without a bundle factor: the twisted pull and plain push of the squares."""
    if F.theory == 'k':
        return operator_make('G0', right.target, left.target, [(span_apply('G0', left, right), 1)])
    factor = relative_genus(F.tangent, right) if F.tangent else ring_one(space_chow_ring(right.source))
    Y = right.target

    def apply(vector):
        pulled = chow_pullback(right, ring_from_vector(space_chow_ring(Y), vector))
        return ring_to_vector(chow_pushforward(left, ring_mul(factor, pulled)))
    return operator_make('HTodd', right.target, left.target, [(apply, 1)])


def check_bicycle_functoriality(F: BicycleFunctor, alpha: Bicycle, beta: Bicycle, tally: CheckTally) -> bool:
    composite = bicycle_operator(F, bicycle_product(F.product, alpha, beta))
    product = operator_compose(bicycle_operator(F, alpha), bicycle_operator(F, beta))
    return tally.operators(f"{F.name} covariance under {F.product}", composite, product)


def check_bicycle_naturality(b: Bicycle, tally: CheckTally, twist: bool = True) -> bool:
    """td_bfm . G0tensor(b) == Htdch(b) . td_bfm."""
    left = operator_compose(transformation_operator('td_bfm', b.source), bicycle_operator('G0tensor', b))
    right = operator_compose(bicycle_operator('Htdch', b, twist=twist), transformation_operator('td_bfm', b.target))
    return tally.operators("td_bfm G0tensor -> Htdch", left, right)


def check_double_squares(F: BicycleFunctor, f: Morphism, pushed: Optional[Bicycle], pulled: Optional[Bicycle],
                         tally: CheckTally):
    """H(f_** b) = f_* H(b) (cl1(T_f) f^*) and H(f^** b) = (cl1(T_f) f^*) H(b) f_*."""
    X, Y = f.source, f.target
    push = bicycle_leg_operator(F, f, morphism_identity(X))
    pull = bicycle_leg_operator(F, morphism_identity(X), f)
    if pushed is not None:
        tally.operators(f"{F.name} double pushforward square",
                        bicycle_operator(F, bicycle_double_push(f, pushed)),
                        operator_compose(push, operator_compose(bicycle_operator(F, pushed), pull)))
    if pulled is not None:
        tally.operators(f"{F.name} double pullback square",
                        bicycle_operator(F, bicycle_double_pull(f, pulled)),
                        operator_compose(pull, operator_compose(bicycle_operator(F, pulled), push)))


def check_decomposition(b: Bicycle, tally: CheckTally) -> bool:
    first, middle, last = bicycle_decompose(b)
    rebuilt = bicycle_product('whitney', bicycle_product('whitney', first, middle), last)
    return tally.values("[X <- V] o [V; E] o [V -> Y] = b", rebuilt, bicycle_canonicalize(b), bicycle_format)


def check_bicycle_grades(alpha: Bicycle, beta: Bicycle, tally: CheckTally):
    (m, r), (n, k) = bicycle_grade(alpha), bicycle_grade(beta)
    tally.values("whitney grade (m+n, r+k)", bicycle_grade(bicycle_product('whitney', alpha, beta)), (m + n, r + k))
    tally.values("tensor grade (m+n, rk)", bicycle_grade(bicycle_product('tensor', alpha, beta)), (m + n, r * k))


def check_bicycle_theorems(rng: random.Random, count: int = 50, max_dim: int = 4, twist: bool = True,
                           name: str = 'bicycle-suite') -> List[CheckResult]:
    """Randomized battery over bicycles between spaces of total dimension <= max_dim.

    Covers covariance of every sample functor under its product, td_bfm
    naturality, the double pushforward and pullback squares, the Whitney
    decomposition, grade laws, bilinearity and associativity of both products.
    Commutativity is only observed and reported as informational.
    """
    tally = CheckTally(name, 'bicycle')
    observed = CheckTally(f"{name} commutativity", 'bicycle', informational=True)
    functors = [bicycle_functor_parse(text) for text in BICYCLE_FUNCTOR_SAMPLES]
    for index in range(count):
        alpha, beta = random_composable_bicycles(rng, max_dim)
        logger.debug("%s: case %d %s / %s", name, index, bicycle_format(alpha), bicycle_format(beta))
        for F in functors:
            check_bicycle_functoriality(F, alpha, beta, tally)
        check_bicycle_naturality(alpha, tally, twist=twist)
        check_decomposition(alpha, tally)
        check_bicycle_grades(alpha, beta, tally)
        gamma = random_bicycle(rng, alpha.source, alpha.target, max_dim)
        for mode in BICYCLE_PRODUCTS:
            left = bicyclesum_compose(mode, bicyclesum_add(bicyclesum_of(alpha), bicyclesum_of(gamma)),
                                      bicyclesum_of(beta))
            right = bicyclesum_add(bicyclesum_of(bicycle_product(mode, alpha, beta)),
                                   bicyclesum_of(bicycle_product(mode, gamma, beta)))
            tally.values(f"{mode} bilinearity", left, right, bicyclesum_format)
        delta = random_bicycle(rng, beta.target, beta.target, max_dim)
        for mode in BICYCLE_PRODUCTS:
            tally.values(f"{mode} associativity",
                         bicycle_product(mode, bicycle_product(mode, alpha, beta), delta),
                         bicycle_product(mode, alpha, bicycle_product(mode, beta, delta)), bicycle_format)
        Y = random_space(rng, max(max_dim - 1, 0))
        X, f = random_smooth_over(rng, Y, max_dim)
        pushed = random_bicycle(rng, X, X, max_dim)
        pulled = random_bicycle(rng, Y, Y, max(max_dim - (space_dimension(X) - space_dimension(Y)), 0))
        for F in rng.sample(functors, 3):
            check_double_squares(F, f, pushed, pulled, tally)
        other = random_bicycle(rng, X, X, max_dim)
        for mode in BICYCLE_PRODUCTS:
            observed.values(f"{mode} commutativity", bicycle_product(mode, pushed, other),
                            bicycle_product(mode, other, pushed), bicycle_format)
    return [tally.result(), observed.result()]



### ZIGZAGS ###
# Finite sequences of correspondences composed by juxtaposition, never by fiber products

Zigzag = namedtuple('Zigzag', ['source', 'target', 'links', 'kind'])

ZigzagSum = namedtuple('ZigzagSum', ['source', 'target', 'terms'])

# Functors each kind of zigzag admits
ZIGZAG_KINDS = {
    'pro_smooth': ('F', 'HChern', 'G0', 'HTodd', 'K0V', 'HHirz'),
    'pro_lci': ('G0', 'HTodd'),
    'smooth_objects': ('HSm',),
}

ZIGZAG_TAGS = {
    'pro_smooth': ('proper', 'smooth'),
    'pro_lci': ('proper', 'lci'),
    'smooth_objects': ('proper', 'proper'),
}


def zigzag_kind_check(kind: str):
    if kind not in ZIGZAG_KINDS:
        raise StructuralError(f"Unknown zigzag kind: {kind} (expected one of {', '.join(ZIGZAG_KINDS)})")


def zigzag_make(links: Iterable[Correspondence], kind: str, source: Optional[Space] = None) -> Zigzag:
    """Zigzag of the given kind; an empty link list needs source and is the identity."""
    zigzag_kind_check(kind)
    checked = tuple(corr_canonicalize(corr_make(link.left, link.right, ZIGZAG_TAGS[kind])) for link in links)
    if not checked:
        if source is None:
            raise StructuralError("An empty zigzag needs an explicit space")
        return Zigzag(source, source, (), kind)
    for previous, link in zip(checked, checked[1:]):
        if previous.target != link.source:
            raise StructuralError(f"Zigzag links do not meet: {space_format(previous.target)} vs "
                                  f"{space_format(link.source)}")
    if source is not None and checked[0].source != source:
        raise StructuralError(f"Zigzag starts at {space_format(checked[0].source)}, not {space_format(source)}")
    return Zigzag(checked[0].source, checked[-1].target, checked, kind)


def zigzag_identity(X: Space, kind: str) -> Zigzag:
    return zigzag_make((), kind, source=X)


def zigzag_length(z: Zigzag) -> int:
    return len(z.links)


def zigzag_juxtapose(alpha: Zigzag, beta: Zigzag) -> Zigzag:
    if alpha.kind != beta.kind:
        raise StructuralError(f"Cannot juxtapose {alpha.kind} and {beta.kind} zigzags")
    if alpha.target != beta.source:
        raise StructuralError(f"Cannot juxtapose: {space_format(alpha.target)} is not {space_format(beta.source)}")
    return Zigzag(alpha.source, beta.target, alpha.links + beta.links, alpha.kind)


def zigzag_format(z: Zigzag) -> str:
    if not z.links:
        return f"id {space_format(z.source)} kind {z.kind}"
    return ' ~ '.join(f"[{corr_format(link)}]" for link in z.links) + f" kind {z.kind}"


def zigzag_operator(functor: str, z: Union[Zigzag, ZigzagSum], twist: bool = True) -> LinearOperator:
    """Composite of the per-link operators, F(X_k) -> F(X_0); linear over sums."""
    if isinstance(z, ZigzagSum):
        maps = [(zigzag_operator(functor, term, twist).apply, n) for term, n in z.terms]
        return operator_make(functor, z.target, z.source, maps)
    if functor not in ZIGZAG_KINDS[z.kind]:
        raise UnsupportedLegError(f"{z.kind} zigzags do not carry the functor {functor}")
    result = operator_identity(functor, z.source)
    for link in z.links:
        result = operator_compose(result, corr_operator(functor, link, twist=twist))
    return result


def zigzag_collapse(z: Zigzag) -> Correspondence:
    """Compose the links through fiber products (needs smooth right legs)."""
    result = corr_identity(z.source)
    for link in z.links:
        result = corr_compose(result, Correspondence(link.source, link.target, link.apex, link.left, link.right,
                                                     DEFAULT_TAGS))
    return result


def zigzagsum_make(source: Space, target: Space, terms: Iterable[Tuple[Zigzag, int]]) -> ZigzagSum:
    acc = collections.Counter()
    for z, n in terms:
        if z.source != source or z.target != target:
            raise StructuralError("Zigzag does not fit the sum")
        acc[z] += int(n)
    return ZigzagSum(source, target, tuple(sorted(((z, n) for z, n in acc.items() if n),
                                                  key=lambda item: (zigzag_length(item[0]), item))))


def zigzagsum_of(z: Zigzag) -> ZigzagSum:
    return zigzagsum_make(z.source, z.target, [(z, 1)])


def zigzagsum_add(a: ZigzagSum, b: ZigzagSum) -> ZigzagSum:
    if (a.source, a.target) != (b.source, b.target):
        raise StructuralError("Cannot add zigzag sums between different spaces")
    return zigzagsum_make(a.source, a.target, a.terms + b.terms)


def zigzagsum_grades(a: ZigzagSum) -> Dict[int, ZigzagSum]:
    """Split a sum by zigzag length."""
    buckets = collections.defaultdict(list)
    for z, n in a.terms:
        buckets[zigzag_length(z)].append((z, n))
    return {k: ZigzagSum(a.source, a.target, tuple(terms)) for k, terms in sorted(buckets.items())}


def homology_pullback_operator(f: Morphism) -> LinearOperator:
    """f^dot on the cycle basis: H(target) -> H(source)."""
    return operator_make('HSm', f.target, f.source,
                         [(lambda vector: dict(homology_pullback(f, homology_make(f.target, vector)).terms), 1)])


def smooth_operators(left: Morphism, right: Morphism) -> Dict[str, LinearOperator]:
    """The three operators of a span between smooth objects that depend only on its isomorphism class."""
    X, Y = left.target, right.target

    def dot_pull(vector):
        pulled = chow_pullback(right, ring_from_vector(space_chow_ring(Y), vector))
        return ring_to_vector(pushforward_dot(left, pulled))
    return {
        'g_* f^dot': operator_make('HSm', X, Y, [(span_apply('HSm', right, left), 1)]),
        'f_* g^dot': operator_make('HSm', Y, X, [(span_apply('HSm', left, right), 1)]),
        'f_dot g^*': operator_make('HTodd', Y, X, [(dot_pull, 1)]),
    }


def check_pullback_dot(f: Morphism, g: Morphism, tally: CheckTally) -> bool:
    """(g . f)^dot == f^dot . g^dot."""
    return tally.operators("(g o f)^dot = f^dot g^dot", homology_pullback_operator(compose_morphisms(f, g)),
                           operator_compose(homology_pullback_operator(f), homology_pullback_operator(g)))


def check_iso_invariance(c: Correspondence, tally: CheckTally, limit: int = 24):
    """Relabelled apexes give the same operators."""
    M = c.apex
    reference = smooth_operators(c.left, c.right)
    functors = [F for F in ('G0', 'HTodd', 'F', 'HChern') if F not in FUNCTOR_SMOOTH_ONLY
                or classify_morphism(c.right).is_smooth]
    for order in itertools.islice(itertools.permutations(range(len(M.dims))), 1, limit + 1):
        permuted = Space(tuple(M.dims[i] for i in order))
        inverse = [0] * len(order)
        for k, i in enumerate(order):
            inverse[i] = k
        relabel = morphism_make(permuted, M, inverse)
        left, right = compose_morphisms(relabel, c.left), compose_morphisms(relabel, c.right)
        for label, operator in smooth_operators(left, right).items():
            tally.operators(f"{label} under apex permutation {order}", operator, reference[label])
        for functor in functors:
            tally.operators(f"{functor} under apex permutation {order}",
                            operator_make(functor, c.target, c.source, [(span_apply(functor, left, right), 1)]),
                            operator_make(functor, c.target, c.source, [(span_apply(functor, c.left, c.right), 1)]))


def check_zigzag_functoriality(functor: str, alpha: Zigzag, beta: Zigzag, tally: CheckTally) -> bool:
    joined = zigzag_juxtapose(alpha, beta)
    tally.values("length grading", zigzag_length(joined), zigzag_length(alpha) + zigzag_length(beta))
    return tally.operators(f"{functor}(a ~ b) = {functor}(a) {functor}(b) [{alpha.kind}]",
                           zigzag_operator(functor, joined),
                           operator_compose(zigzag_operator(functor, alpha), zigzag_operator(functor, beta)))


def check_zigzag_naturality(transformation: str, z: Zigzag, tally: CheckTally, twist: bool = True) -> bool:
    source_functor, target_functor = NATURAL_TRANSFORMATIONS[transformation]
    left = operator_compose(transformation_operator(transformation, z.source), zigzag_operator(source_functor, z))
    right = operator_compose(zigzag_operator(target_functor, z, twist=twist),
                             transformation_operator(transformation, z.target))
    return tally.operators(f"{transformation} through a {z.kind} zigzag", left, right)


def check_zigzag_vs_corr(z: Zigzag, tally: CheckTally, functors: Sequence[str] = ZIGZAG_KINDS['pro_smooth']):
    collapsed = zigzag_collapse(z)
    for functor in functors:
        tally.operators(f"{functor} zigzag = composed correspondence", zigzag_operator(functor, z),
                        corr_operator(functor, collapsed))


def check_vrr_link(g: Morphism, tally: CheckTally) -> bool:
    """td_bfm(g^* a) == td(T_g) g^* td_bfm(a) on the t-monomial basis."""
    left = operator_compose(transformation_operator('td_bfm', g.source),
                            operator_make('G0', g.target, g.source, [(span_apply('G0', morphism_identity(g.source), g), 1)]))
    right = operator_compose(operator_make('HTodd', g.target, g.source,
                                           [(span_apply('HTodd', morphism_identity(g.source), g), 1)]),
                             transformation_operator('td_bfm', g.target))
    return tally.operators(f"Verdier-Riemann-Roch along {morphism_format(g)}", left, right)


def check_zigzag_laws(rng: random.Random, count: int = 20, max_dim: int = 4, twist: bool = True,
                      name: str = 'zigzag-suite') -> List[CheckResult]:
    """Randomized battery for pro-smooth, pro-lci and smooth-object zigzags."""
    tally = CheckTally(name, 'zigzag')
    for index in range(count):
        alpha, beta = random_composable_zigzags(rng, 'pro_smooth', max_dim)
        logger.debug("%s: case %d %s / %s", name, index, zigzag_format(alpha), zigzag_format(beta))
        for functor in ZIGZAG_KINDS['pro_smooth']:
            check_zigzag_functoriality(functor, alpha, beta, tally)
        for transformation in NATURAL_TRANSFORMATIONS:
            check_zigzag_naturality(transformation, alpha, tally, twist=twist)
        if space_dimension(zigzag_collapse(alpha).apex) <= max_dim:
            check_zigzag_vs_corr(alpha, tally)
        alpha, beta = random_composable_zigzags(rng, 'pro_lci', max_dim)
        for functor in ZIGZAG_KINDS['pro_lci']:
            check_zigzag_functoriality(functor, alpha, beta, tally)
        check_zigzag_naturality('td_bfm', alpha, tally, twist=twist)
        for link in alpha.links:
            check_vrr_link(link.right, tally)
        alpha, beta = random_composable_zigzags(rng, 'smooth_objects', max_dim)
        check_zigzag_functoriality('HSm', alpha, beta, tally)
        check_zigzag_collapse_remark(rng, max_dim, tally)
    return [tally.result()]


def check_zigzag_collapse_remark(rng: random.Random, max_dim: int, tally: CheckTally):
    """Proper-identity and identity-smooth zigzags equal a single correspondence."""
    X2 = random_space(rng, max_dim)
    X1 = random_space(rng, max_dim)
    X0 = random_space(rng, max_dim)
    f2, f1 = random_morphism(rng, X2, X1), random_morphism(rng, X1, X0)
    proper = zigzag_make([corr_from_pushforward(f1), corr_from_pushforward(f2)], 'pro_smooth')
    single = corr_from_pushforward(compose_morphisms(f2, f1))
    for functor in ('G0', 'HChern', 'F'):
        tally.operators(f"{functor} proper-identity zigzag collapses", zigzag_operator(functor, proper),
                        corr_operator(functor, single))
    Y0 = random_space(rng, max_dim)
    Y1, g1 = random_smooth_over(rng, Y0, max_dim)
    Y2, g2 = random_smooth_over(rng, Y1, max_dim)
    smooth = zigzag_make([corr_from_pullback(g2), corr_from_pullback(g1)], 'pro_smooth')
    single = corr_from_pullback(compose_morphisms(g2, g1))
    for functor in ('G0', 'HTodd', 'K0V'):
        tally.operators(f"{functor} identity-smooth zigzag collapses", zigzag_operator(functor, smooth),
                        corr_operator(functor, single))


def check_smooth_laws(rng: random.Random, count: int = 20, max_dim: int = 4,
                      name: str = 'smooth-suite') -> List[CheckResult]:
    """Poincare-duality pullback functoriality and isomorphism invariance on smooth objects."""
    tally = CheckTally(name, 'smooth')
    for _ in range(count):
        X, Y, Z = random_space(rng, max_dim), random_space(rng, max_dim), random_space(rng, max_dim)
        f, g = random_morphism(rng, X, Y), random_morphism(rng, Y, Z)
        check_pullback_dot(f, g, tally)
        c = random_span(rng, X, Y, max_dim, ZIGZAG_TAGS['smooth_objects'])
        check_iso_invariance(c, tally, limit=6)
    return [tally.result()]



### THEORY CHECKS ###

def k_pushforward_operator(f: Morphism, koszul: bool = True) -> LinearOperator:
    """f_! as an operator G0(source) -> G0(target)."""
    def apply(vector):
        pushed = k_pushforward(f, KClass(f.source, ring_from_vector(space_k_ring(f.source), vector)), koszul)
        return ring_to_vector(pushed.element)
    return operator_make('G0', f.source, f.target, [(apply, 1)])


def chow_pushforward_operator(f: Morphism) -> LinearOperator:
    return operator_make('HTodd', f.source, f.target, [(span_apply('HTodd', f, morphism_identity(f.source)), 1)])


def check_hrr(tally: CheckTally, max_n: int = 4, koszul: bool = True):
    """Riemann-Roch on P^n for O(d), -3 <= d <= 5, and along the linear subspaces of P^n."""
    for n in range(max_n + 1):
        X = Space((n,))
        for d in range(-3, 6):
            a = k_line_bundle(X, (d,))
            expected = binomial_ext(d + n, n)
            tally.values(f"integral of ch(O({d})) td(T) over P{n}", ypoly_constant_term(integrate(X, td_bfm(a))),
                         expected, rational_format)
            tally.values(f"chi(P{n}, O({d}))", k_chi(a), expected, rational_format)
            for m in range(n):
                L = Space((m,))
                iota = morphism_embedding(L, X)
                b = k_line_bundle(L, (d,))
                tally.values(f"td_bfm of O_P{m}({d}) pushed into P{n}",
                             td_bfm(k_pushforward(iota, b, koszul=koszul)),
                             chow_pushforward(iota, td_bfm(b)), ring_format)


def check_specializations(tally: CheckTally, rng: random.Random, count: int = 200, max_dim: int = 6):
    """T_y at y = -1, 0, 1 against the Chern, Todd and L classes of random roots."""
    for _ in range(count):
        ring = space_chow_ring(random_space(rng, max_dim))
        roots = [linear_form(ring, [rng.randint(-2, 2) for _ in ring.orders]) for _ in range(rng.randint(0, 4))]
        hirzebruch = genus_class('hirzebruch', roots, ring)
        for value, kind in ((-1, 'chern'), (0, 'todd'), (1, 'lclass')):
            tally.values(f"T_y at y = {value} is the {kind} class", ring_specialize_y(hirzebruch, value),
                         genus_class(kind, roots, ring), ring_format)


def check_grr(f: Morphism, tally: CheckTally, koszul: bool = True):
    """Grothendieck-Riemann-Roch along f, then Verdier-Riemann-Roch for f as a pullback."""
    tally.operators(f"Grothendieck-Riemann-Roch along {morphism_format(f)}",
                    operator_compose(transformation_operator('td_bfm', f.target), k_pushforward_operator(f, koszul)),
                    operator_compose(chow_pushforward_operator(f), transformation_operator('td_bfm', f.source)))
    check_vrr_link(f, tally)


def check_base_change(g: Morphism, h: Morphism, tally: CheckTally, functors: Sequence[str] = ('HTodd', 'G0', 'F', 'K0V')):
    """g^* h_* == h~_* g~^* on the model fiber square of a smooth g and any h."""
    W, h_tilde, g_tilde = fiber_product(g, h)
    M, N, Y = g.source, h.source, g.target
    for functor in functors:
        left = operator_make(functor, N, M, [(span_apply(functor, h_tilde, g_tilde, twist=False), 1)])
        right = operator_compose(
            operator_make(functor, Y, M, [(span_apply(functor, morphism_identity(M), g, twist=False), 1)]),
            operator_make(functor, N, Y, [(span_apply(functor, h, morphism_identity(N)), 1)]))
        tally.operators(f"{functor} base change over {space_format(Y)}", left, right)


def check_projection_formula(f: Morphism, tally: CheckTally):
    """f_*(f^* a . b) == a . f_* b in the Chow ring, in K-theory and for constructible functions."""
    X, Y = f.source, f.target
    chow_x, chow_y = space_chow_ring(X), space_chow_ring(Y)
    k_x, k_y = space_k_ring(X), space_k_ring(Y)
    for a_exp in ring_monomials(chow_y):
        for b_exp in ring_monomials(chow_x):
            a, b = ring_monomial(chow_y, a_exp), ring_monomial(chow_x, b_exp)
            tally.values(f"Chow projection formula at {key_format(a_exp)} x {key_format(b_exp)}",
                         chow_pushforward(f, ring_mul(chow_pullback(f, a), b)),
                         ring_mul(a, chow_pushforward(f, b)), ring_format)
            a, b = KClass(Y, ring_monomial(k_y, a_exp)), KClass(X, ring_monomial(k_x, b_exp))
            tally.values(f"K projection formula at {key_format(a_exp)} x {key_format(b_exp)}",
                         k_pushforward(f, k_tensor(k_pullback(f, a), b)).element,
                         k_tensor(a, k_pushforward(f, b)).element, ring_format)
    for a_dims in space_subvarieties(Y):
        for b_dims in space_subvarieties(X):
            a, b = cf_indicator(Subvariety(Y, a_dims)), cf_indicator(Subvariety(X, b_dims))
            tally.values(f"constructible projection formula at {key_format(a_dims)} x {key_format(b_dims)}",
                         cf_pushforward(f, cf_multiply(cf_preimage(f, a), b)),
                         cf_multiply(a, cf_pushforward(f, b)), cf_format)


def check_triangles(X: Space, tally: CheckTally):
    """T_y at y = -1 and y = 0 against c_* . epsilon and td_* . gamma on generators of K_0(V/X)."""
    generators = []
    for dims in space_subvarieties(X):
        generators.append(mot_of_subvariety(Subvariety(X, dims)))
        generators.append(mot_of_morphism(morphism_make(Space(dims + (1,)), X, range(len(dims)))))
    for m in generators:
        hirzebruch = hirzebruch_Ty(m)
        label = mot_format(m)
        tally.values(f"T_(-1) = c_* epsilon on {label}", ring_specialize_y(hirzebruch, -1),
                     mac_chern(epsilon_map(m)), ring_format)
        tally.values(f"T_0 = td_* gamma on {label}", ring_specialize_y(hirzebruch, 0),
                     td_bfm(gamma_map(m)), ring_format)


def check_corr_suite(rng: random.Random, count: int = 10, max_dim: int = 4, twist: bool = True,
                     koszul: bool = True, name: str = 'corr-suite') -> List[CheckResult]:
    """Random composable proper-smooth pairs: covariance, naturality, base change, projection formula, GRR."""
    tally = CheckTally(name, 'corr')
    for index in range(count):
        alpha, beta = random_composable_corrs(rng, max_dim)
        logger.debug("%s: case %d [%s] / [%s]", name, index, corr_format(alpha), corr_format(beta))
        for functor in ZIGZAG_KINDS['pro_smooth']:
            check_functoriality(functor, alpha, beta, tally=tally)
        for transformation in NATURAL_TRANSFORMATIONS:
            check_naturality(transformation, alpha, twist=twist, tally=tally)
        check_base_change(alpha.right, beta.left, tally)
        check_projection_formula(alpha.left, tally)
        check_grr(alpha.left, tally, koszul=koszul)
    return [tally.result()]



### RANDOM ###
# Generators draw only from the rng they are given, so every suite is reproducible from its seed

def random_space(rng: random.Random, max_dim: int, max_factors: int = 3) -> Space:
    """Up to max_factors factors of dimension 1..3, total dimension <= max_dim."""
    dims = []
    budget = max_dim
    for _ in range(rng.randint(0, max_factors)):
        if budget < 1:
            break
        n = rng.randint(1, min(3, budget))
        dims.append(n)
        budget -= n
    return Space(tuple(dims))


def random_morphism(rng: random.Random, X: Space, Y: Space) -> Morphism:
    available = [i for i, n in enumerate(X.dims) if n > 0]
    assignment = []
    for m in Y.dims:
        candidates = [i for i in available if X.dims[i] <= m]
        if candidates and rng.random() < 0.75:
            i = rng.choice(candidates)
            available.remove(i)
            assignment.append(i)
        else:
            assignment.append(CONSTANT)
    return morphism_make(X, Y, assignment)


def random_smooth_over(rng: random.Random, Y: Space, max_dim: int) -> Tuple[Space, Morphism]:
    """A product M = Y x A with shuffled factors and its projection onto Y."""
    extra = random_space(rng, max(max_dim - space_dimension(Y), 0), max_factors=2)
    factors = [('base', j) for j, n in enumerate(Y.dims) if n > 0] + [('fiber', k) for k in range(len(extra.dims))]
    rng.shuffle(factors)
    M = Space(tuple(Y.dims[j] if side == 'base' else extra.dims[j] for side, j in factors))
    position = {factor: i for i, factor in enumerate(factors)}
    g = morphism_make(M, Y, [position[('base', j)] if n > 0 else CONSTANT for j, n in enumerate(Y.dims)])
    return M, g


def random_corr(rng: random.Random, X: Space, Y: Space, max_dim: int) -> Correspondence:
    M, s = random_smooth_over(rng, Y, max_dim)
    return corr_make(random_morphism(rng, M, X), s)


def random_span(rng: random.Random, X: Space, Y: Space, max_dim: int,
                tags: Tuple[str, str] = ('proper', 'lci')) -> Correspondence:
    M = random_space(rng, max_dim)
    return corr_make(random_morphism(rng, M, X), random_morphism(rng, M, Y), tags)


def random_composable_corrs(rng: random.Random, max_dim: int) -> Tuple[Correspondence, Correspondence]:
    """A composable pair whose composite apex stays within max_dim."""
    for _ in range(32):
        X, Y, Z = random_space(rng, max_dim), random_space(rng, max_dim), random_space(rng, max_dim)
        alpha, beta = random_corr(rng, X, Y, max_dim), random_corr(rng, Y, Z, max_dim)
        if space_dimension(alpha.apex) + space_dimension(beta.apex) - space_dimension(Y) <= max_dim:
            return alpha, beta
    return alpha, corr_identity(Y)


def random_bundle(rng: random.Random, X: Space, max_rank: int = 2) -> VectorBundle:
    return bundle_make(X, [[rng.randint(-2, 3) for _ in X.dims] for _ in range(rng.randint(0, max_rank))])


def random_bicycle(rng: random.Random, X: Space, Y: Space, max_dim: int) -> Bicycle:
    c = random_corr(rng, X, Y, max_dim)
    return bicycle_from_corr(c, random_bundle(rng, c.apex))


def random_composable_bicycles(rng: random.Random, max_dim: int) -> Tuple[Bicycle, Bicycle]:
    alpha, beta = random_composable_corrs(rng, max_dim)
    return (bicycle_from_corr(alpha, random_bundle(rng, alpha.apex)),
            bicycle_from_corr(beta, random_bundle(rng, beta.apex)))


def random_link(rng: random.Random, kind: str, X: Space, Y: Space, max_dim: int) -> Correspondence:
    if kind == 'pro_smooth':
        c = random_corr(rng, X, Y, max_dim)
        return corr_make(c.left, c.right, ZIGZAG_TAGS[kind])
    return random_span(rng, X, Y, max_dim, ZIGZAG_TAGS[kind])


def random_composable_zigzags(rng: random.Random, kind: str, max_dim: int,
                              max_length: int = 2) -> Tuple[Zigzag, Zigzag]:
    lengths = rng.randint(1, max_length), rng.randint(1, max_length)
    current = random_space(rng, max_dim)
    links = []
    for _ in range(sum(lengths)):
        following = random_space(rng, max_dim)
        links.append(random_link(rng, kind, current, following, max_dim))
        current = following
    return zigzag_make(links[:lengths[0]], kind), zigzag_make(links[lengths[0]:], kind)



### SCENARIO DSL ###
# Statements end with ';'. Spaces are names or literals P(n_1,...,n_k); legs are morphism
# names or inline tables [s2,c,s1]; bundles are names or literals O(1,0) + O(0,2).

Token = namedtuple('Token', ['kind', 'text', 'line', 'column'])

# A reference to a declared name, with its source position
Ref = namedtuple('Ref', ['name', 'line', 'column'])

Statement = namedtuple('Statement', ['kind', 'name', 'fields', 'line', 'column'])

Scenario = namedtuple('Scenario', ['statements', 'env'])

TOKEN_PATTERN = re.compile(r"""
    (?P<newline>\n)
  | (?P<blank>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->|<-)
  | (?P<number>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:[-:][A-Za-z0-9_]+)*)
  | (?P<punct>[;=:(){}\[\],*+~-])
""", re.VERBOSE)

DECLARATION_KINDS = ('space', 'morphism', 'bundle', 'subvariety', 'cf', 'motive', 'corr', 'bicycle', 'zigzag')

# DSL spelling of zigzag kinds and bicycle sides
DSL_ZIGZAG_KINDS = {'pro-smooth': 'pro_smooth', 'pro-lci': 'pro_lci', 'smooth-objects': 'smooth_objects'}

DSL_BICYCLE_SIDES = {side.replace('_', '-'): side for side in BICYCLE_PUSH_SIDES + BICYCLE_PULL_SIDES}

# what: (suite, argument kinds); 'arrow' is a corr, bicycle or zigzag, 'bicycle*' one or more bicycles
DIRECTIVES = {
    'hrr': ('ktheory', ()),
    'specializations': ('classes', ()),
    'functoriality': ('corr', ('functor', 'arrow', 'arrow')),
    'naturality': ('corr', ('transformation', 'arrow')),
    'grr': ('ktheory', ('morphism',)),
    'base-change': ('corr', ('morphism', 'morphism')),
    'projection-formula': ('corr', ('morphism',)),
    'triangles': ('motivic', ('space',)),
    'double-squares': ('bicycle', ('functor', 'morphism', 'bicycle*')),
    'decomposition': ('bicycle', ('bicycle',)),
    'pullback-dot': ('smooth', ('morphism', 'morphism')),
    'iso-invariance': ('smooth', ('corr',)),
    'zigzag-vs-corr': ('zigzag', ('zigzag',)),
    'corr-suite': ('corr', ()),
    'bicycle-suite': ('bicycle', ()),
    'zigzag-suite': ('zigzag', ()),
    'smooth-suite': ('smooth', ()),
}

DIRECTIVE_OPTIONS = ('count', 'max-dim', 'max-n')

DIRECTIVE_CONTROLS = ('twist', 'koszul')


def scenario_tokenize(text: str) -> List[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = TOKEN_PATTERN.match(text, pos)
        if match is None:
            raise ScenarioError(f"Unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup
        if kind == 'newline':
            line, line_start = line + 1, match.end()
        elif kind not in ('blank', 'comment'):
            tokens.append(Token(kind, match.group(), line, pos - line_start + 1))
        pos = match.end()
    tokens.append(Token('eof', '', line, pos - line_start + 1))
    return tokens


class ScenarioParser:
    """Recursive-descent parser producing Statements; names are resolved later."""

    def __init__(self, text: str):
        self.tokens = scenario_tokenize(text)
        self.index = 0

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.index + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.peek()
        self.index += 1
        return token

    def error(self, message: str, token: Optional[Token] = None):
        token = token or self.peek()
        found = 'end of input' if token.kind == 'eof' else repr(token.text)
        raise ScenarioError(f"{message}, found {found}", token.line, token.column)

    def at(self, text: str) -> bool:
        token = self.peek()
        return token.kind in ('name', 'punct', 'arrow') and token.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.index += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"Expected {text!r}")
        return self.advance()

    def name(self, what: str = 'a name') -> Token:
        if self.peek().kind != 'name':
            self.error(f"Expected {what}")
        return self.advance()

    def ref(self, what: str = 'a name') -> Ref:
        token = self.name(what)
        return Ref(token.text, token.line, token.column)

    def integer(self) -> int:
        sign = -1 if self.accept('-') else 1
        if self.peek().kind != 'number':
            self.error("Expected an integer")
        return sign * int(self.advance().text)

    def integer_list(self) -> Tuple[int, ...]:
        self.expect('(')
        values = []
        if not self.at(')'):
            values.append(self.integer())
            while self.accept(','):
                values.append(self.integer())
        self.expect(')')
        return tuple(values)

    def space(self):
        if self.at('P') and self.peek(1).text == '(':
            self.advance()
            return self.integer_list()
        return self.ref('a space')

    def leg(self):
        if self.accept('['):
            entries = []
            while not self.at(']'):
                token = self.name("'s<index>' or 'c'")
                if token.text == 'c':
                    entries.append(CONSTANT)
                elif re.fullmatch(r's[1-9][0-9]*', token.text):
                    entries.append(int(token.text[1:]) - 1)
                else:
                    self.error("Expected 's<index>' or 'c'", token)
                if not self.at(']'):
                    self.expect(',')
            self.expect(']')
            return tuple(entries)
        return self.ref('a morphism')

    def bundle(self):
        if self.at('O') and self.peek(1).text == '(':
            summands = []
            while True:
                self.expect('O')
                summands.append(self.integer_list())
                if not self.accept('+'):
                    return tuple(summands)
        if self.peek().kind == 'number' and self.peek().text == '0':
            self.advance()
            return ()
        return self.ref('a bundle')

    def linear_terms(self, function: str) -> Tuple[Tuple[int, Ref], ...]:
        """[-] [n *] function(NAME) {(+|-) [n *] function(NAME)}."""
        terms = []
        sign = -1 if self.accept('-') else 1
        while True:
            n = 1
            if self.peek().kind == 'number':
                n = int(self.advance().text)
                self.expect('*')
            self.expect(function)
            self.expect('(')
            terms.append((sign * n, self.ref()))
            self.expect(')')
            if self.accept('+'):
                sign = 1
            elif self.accept('-'):
                sign = -1
            else:
                return tuple(terms)

    def statement(self) -> Statement:
        keyword = self.name('a statement keyword')
        line, column = keyword.line, keyword.column
        kind = keyword.text
        if kind in ('check', 'eval'):
            fields = self.check_fields() if kind == 'check' else self.eval_fields()
            self.expect(';')
            return Statement(kind, None, fields, line, column)
        if kind not in DECLARATION_KINDS:
            self.error("Expected a statement keyword", keyword)
        name = self.name(f"a {kind} name").text
        fields = getattr(self, f"{kind}_fields")()
        self.expect(';')
        return Statement(kind, name, fields, line, column)

    def space_fields(self) -> Dict:
        self.expect('=')
        return {'space': self.space()}

    def morphism_fields(self) -> Dict:
        if self.accept('='):
            form = self.name("'id', 'to-point' or 'compose'")
            if form.text in ('id', 'to-point'):
                return {'form': form.text, 'space': self.space()}
            if form.text == 'compose':
                return {'form': 'compose', 'first': self.ref('a morphism'), 'second': self.ref('a morphism')}
            self.error("Expected 'id', 'to-point' or 'compose'", form)
        self.expect(':')
        source = self.space()
        self.expect('->')
        target = self.space()
        self.expect('{')
        entries = []
        while not self.at('}'):
            token = self.name("'t<index>'")
            if not re.fullmatch(r't[1-9][0-9]*', token.text):
                self.error("Expected 't<index>'", token)
            self.expect('<-')
            value = self.name("'s<index>' or 'const'")
            if value.text == 'const':
                entries.append((int(token.text[1:]), CONSTANT))
            elif re.fullmatch(r's[1-9][0-9]*', value.text):
                entries.append((int(token.text[1:]), int(value.text[1:]) - 1))
            else:
                self.error("Expected 's<index>' or 'const'", value)
            if not self.at('}'):
                self.expect(',')
        self.expect('}')
        return {'form': 'table', 'source': source, 'target': target, 'entries': tuple(sorted(entries))}

    def bundle_fields(self) -> Dict:
        self.expect('on')
        base = self.space()
        self.expect('=')
        summands = self.bundle()
        if isinstance(summands, Ref):
            self.error("Expected a bundle literal")
        return {'base': base, 'summands': summands}

    def subvariety_fields(self) -> Dict:
        self.expect('in')
        ambient = self.space()
        self.expect('=')
        self.expect('L')
        return {'ambient': ambient, 'dims': self.integer_list()}

    def cf_fields(self) -> Dict:
        self.expect('=')
        return {'terms': self.linear_terms('ind')}

    def motive_fields(self) -> Dict:
        self.expect('=')
        return {'terms': self.linear_terms('gen')}

    def span_fields(self) -> Dict:
        self.expect(':')
        source = self.space()
        self.expect('<-')
        apex = self.space()
        self.expect('->')
        target = self.space()
        self.expect('{')
        self.expect('left')
        left = self.leg()
        self.expect(',')
        self.expect('right')
        right = self.leg()
        self.expect('}')
        return {'form': 'span', 'source': source, 'apex': apex, 'target': target, 'left': left, 'right': right}

    def corr_fields(self) -> Dict:
        if self.accept('='):
            form = self.name("'compose', 'pushforward', 'pullback' or 'id'")
            if form.text == 'compose':
                return {'form': 'compose', 'first': self.ref('a corr'), 'second': self.ref('a corr')}
            if form.text in ('pushforward', 'pullback'):
                return {'form': form.text, 'morphism': self.ref('a morphism')}
            if form.text == 'id':
                return {'form': 'id', 'space': self.space()}
            self.error("Expected 'compose', 'pushforward', 'pullback' or 'id'", form)
        fields = self.span_fields()
        fields['tags'] = None
        if self.accept('tags'):
            fields['tags'] = (self.name('a tag').text, self.name('a tag').text)
        return fields

    def bicycle_fields(self) -> Dict:
        if self.accept('='):
            form = self.name('a bicycle form')
            if form.text == 'prod':
                mode = self.name("'whitney' or 'tensor'").text
                return {'form': 'prod', 'mode': mode, 'first': self.ref('a bicycle'),
                        'second': self.ref('a bicycle')}
            if form.text in ('push', 'pull'):
                side = self.name('a side')
                return {'form': form.text, 'side': side.text, 'morphism': self.ref('a morphism'),
                        'bicycle': self.ref('a bicycle')}
            if form.text in ('double-push', 'double-pull'):
                return {'form': form.text, 'morphism': self.ref('a morphism'), 'bicycle': self.ref('a bicycle')}
            if form.text == 'id':
                return {'form': 'id', 'space': self.space()}
            self.error("Expected 'prod', 'push', 'pull', 'double-push', 'double-pull' or 'id'", form)
        fields = self.span_fields()
        self.expect('with')
        fields['bundle'] = self.bundle()
        return fields

    def zigzag_fields(self) -> Dict:
        self.expect('=')
        if self.accept('id'):
            fields = {'form': 'id', 'space': self.space()}
        else:
            links = [self.ref('a corr')]
            while self.accept('~'):
                links.append(self.ref('a corr'))
            fields = {'form': 'links', 'links': tuple(links)}
        self.expect('kind')
        kind = self.name('a zigzag kind')
        if kind.text not in DSL_ZIGZAG_KINDS:
            self.error(f"Expected one of {', '.join(DSL_ZIGZAG_KINDS)}", kind)
        fields['kind'] = kind.text
        return fields

    def check_fields(self) -> Dict:
        what = self.name('a check name')
        if what.text not in DIRECTIVES:
            self.error(f"Unknown check (expected one of {', '.join(DIRECTIVES)})", what)
        args, options, without = [], {}, None
        while self.peek().kind == 'name' and self.peek().text not in DIRECTIVE_OPTIONS + ('without',):
            args.append(self.ref())
        while not self.at(';'):
            option = self.name('an option')
            if option.text in DIRECTIVE_OPTIONS:
                if self.peek().kind != 'number':
                    self.error(f"Expected a number after {option.text}")
                options[option.text] = int(self.advance().text)
            elif option.text == 'without':
                control = self.name("'twist' or 'koszul'")
                if control.text not in DIRECTIVE_CONTROLS:
                    self.error("Expected 'twist' or 'koszul'", control)
                without = control.text
            else:
                self.error("Expected 'count', 'max-dim', 'max-n' or 'without'", option)
        return {'what': what.text, 'args': tuple(args), 'options': options, 'without': without}

    def eval_fields(self) -> Dict:
        target = self.ref()
        functor = self.name('a functor').text if self.accept('functor') else None
        return {'target': target, 'functor': functor}

    def parse(self) -> List[Statement]:
        statements = []
        while self.peek().kind != 'eof':
            statements.append(self.statement())
        return statements


def _resolve(env: Dict, ref: Ref, *kinds: str):
    if ref.name not in env:
        raise ScenarioError(f"Unknown name '{ref.name}'", ref.line, ref.column)
    kind, value = env[ref.name]
    if kinds and kind not in kinds:
        raise ScenarioError(f"'{ref.name}' is a {kind}, expected a {' or '.join(kinds)}", ref.line, ref.column)
    return value


def _resolve_space(env: Dict, node) -> Space:
    return _resolve(env, node, 'space') if isinstance(node, Ref) else space_make(node)


def _resolve_leg(env: Dict, node, apex: Space, target: Space) -> Morphism:
    if isinstance(node, Ref):
        f = _resolve(env, node, 'morphism')
        if (f.source, f.target) != (apex, target):
            raise StructuralError(f"Morphism '{node.name}' is {morphism_format(f)}, expected "
                                  f"{space_format(apex)} -> {space_format(target)}")
        return f
    return morphism_make(apex, target, node)


def _resolve_bundle(env: Dict, node, base: Space) -> VectorBundle:
    if isinstance(node, Ref):
        E = _resolve(env, node, 'bundle')
        if E.base != base:
            raise StructuralError(f"Bundle '{node.name}' lives on {space_format(E.base)}, not {space_format(base)}")
        return E
    return bundle_make(base, node)


def _resolve_span(env: Dict, fields: Dict) -> Tuple[Morphism, Morphism]:
    source, apex, target = (_resolve_space(env, fields[k]) for k in ('source', 'apex', 'target'))
    return _resolve_leg(env, fields['left'], apex, source), _resolve_leg(env, fields['right'], apex, target)


def _resolve_linear(env: Dict, terms, kinds: Tuple[str, ...], convert) -> List:
    values = []
    for n, ref in terms:
        kind = env.get(ref.name, (None,))[0]
        values.append((n, convert(kind, _resolve(env, ref, *kinds))))
    return values


def scenario_declare(env: Dict, statement: Statement):
    """Build the value of one declaration and bind it."""
    kind, fields = statement.kind, statement.fields
    if kind == 'space':
        value = _resolve_space(env, fields['space'])
    elif kind == 'morphism':
        if fields['form'] == 'id':
            value = morphism_identity(_resolve_space(env, fields['space']))
        elif fields['form'] == 'to-point':
            value = morphism_to_point(_resolve_space(env, fields['space']))
        elif fields['form'] == 'compose':
            value = compose_morphisms(_resolve(env, fields['first'], 'morphism'),
                                      _resolve(env, fields['second'], 'morphism'))
        else:
            source, target = _resolve_space(env, fields['source']), _resolve_space(env, fields['target'])
            table = dict(fields['entries'])
            if sorted(table) != list(range(1, len(target.dims) + 1)) or len(table) != len(fields['entries']):
                raise StructuralError(f"Entries must list t1..t{len(target.dims)} exactly once")
            value = morphism_make(source, target, [table[j] for j in sorted(table)])
    elif kind == 'bundle':
        value = bundle_make(_resolve_space(env, fields['base']), fields['summands'])
    elif kind == 'subvariety':
        value = subvariety_make(_resolve_space(env, fields['ambient']), fields['dims'])
    elif kind == 'cf':
        terms = _resolve_linear(env, fields['terms'], ('subvariety',), lambda _, Z: Z)
        if len({Z.ambient for _, Z in terms}) != 1:
            raise StructuralError("Indicator terms live on different spaces")
        value = cf_make(terms[0][1].ambient, [(Z.dims, n) for n, Z in terms])
    elif kind == 'motive':
        terms = _resolve_linear(env, fields['terms'], ('morphism', 'subvariety'),
                                lambda k, v: subvariety_embedding(v) if k == 'subvariety' else v)
        if len({h.target for _, h in terms}) != 1:
            raise StructuralError("Generators map to different spaces")
        value = mot_make(terms[0][1].target, [(mot_generator(h), n) for n, h in terms])
    elif kind == 'corr':
        form = fields['form']
        if form == 'compose':
            value = corr_compose(_resolve(env, fields['first'], 'corr'), _resolve(env, fields['second'], 'corr'))
        elif form == 'pushforward':
            value = corr_from_pushforward(_resolve(env, fields['morphism'], 'morphism'))
        elif form == 'pullback':
            value = corr_from_pullback(_resolve(env, fields['morphism'], 'morphism'))
        elif form == 'id':
            value = corr_identity(_resolve_space(env, fields['space']))
        else:
            left, right = _resolve_span(env, fields)
            value = corr_make(left, right, fields['tags'] or DEFAULT_TAGS)
    elif kind == 'bicycle':
        value = _declare_bicycle(env, fields)
    else:
        zigzag_kind = DSL_ZIGZAG_KINDS[fields['kind']]
        if fields['form'] == 'id':
            value = zigzag_identity(_resolve_space(env, fields['space']), zigzag_kind)
        else:
            value = zigzag_make([_resolve(env, ref, 'corr') for ref in fields['links']], zigzag_kind)
    env[statement.name] = (kind, value)


def _declare_bicycle(env: Dict, fields: Dict) -> Bicycle:
    form = fields['form']
    if form == 'prod':
        if fields['mode'] not in BICYCLE_PRODUCTS:
            raise StructuralError(f"Unknown bicycle product: {fields['mode']}")
        return bicycle_product(fields['mode'], _resolve(env, fields['first'], 'bicycle'),
                               _resolve(env, fields['second'], 'bicycle'))
    if form in ('push', 'pull'):
        sides = BICYCLE_PUSH_SIDES if form == 'push' else BICYCLE_PULL_SIDES
        side = DSL_BICYCLE_SIDES.get(fields['side'])
        if side not in sides:
            raise StructuralError(f"Unknown {form} side: {fields['side']} (expected one of "
                                  f"{', '.join(s.replace('_', '-') for s in sides)})")
        operation = bicycle_push if form == 'push' else bicycle_pull
        return operation(side, _resolve(env, fields['morphism'], 'morphism'), _resolve(env, fields['bicycle'], 'bicycle'))
    if form in ('double-push', 'double-pull'):
        operation = bicycle_double_push if form == 'double-push' else bicycle_double_pull
        return operation(_resolve(env, fields['morphism'], 'morphism'), _resolve(env, fields['bicycle'], 'bicycle'))
    if form == 'id':
        return bicycle_identity(_resolve_space(env, fields['space']))
    left, right = _resolve_span(env, fields)
    return bicycle_make(left, right, _resolve_bundle(env, fields['bundle'], left.source))


def scenario_validate_directive(env: Dict, statement: Statement):
    """Check argument count and argument kinds of a check or eval statement."""
    fields = statement.fields
    if statement.kind == 'eval':
        _resolve(env, fields['target'])
        return
    _, signature = DIRECTIVES[fields['what']]
    args = fields['args']
    variadic = bool(signature) and signature[-1].endswith('*')
    if len(args) < len(signature) or (len(args) > len(signature) and not variadic):
        raise ScenarioError(f"check {fields['what']} takes {len(signature)}{' or more' if variadic else ''} "
                            f"arguments, got {len(args)}", statement.line, statement.column)
    for index, ref in enumerate(args):
        expected = signature[min(index, len(signature) - 1)].rstrip('*')
        if expected == 'functor':
            continue
        if expected == 'transformation':
            if ref.name not in NATURAL_TRANSFORMATIONS:
                raise ScenarioError(f"Unknown transformation '{ref.name}' (expected one of "
                                    f"{', '.join(NATURAL_TRANSFORMATIONS)})", ref.line, ref.column)
        elif expected == 'arrow':
            _resolve(env, ref, 'corr', 'bicycle', 'zigzag')
        else:
            _resolve(env, ref, expected)


def parse_scenario(text: str) -> Scenario:
    """Parse and resolve a scenario; every error is a ScenarioError with a position."""
    statements = ScenarioParser(text).parse()
    env = {}
    for statement in statements:
        if statement.kind in ('check', 'eval'):
            scenario_validate_directive(env, statement)
            continue
        if statement.name in env:
            raise ScenarioError(f"'{statement.name}' is already defined", statement.line, statement.column)
        try:
            scenario_declare(env, statement)
        except ScenarioError:
            raise
        except CorrclassError as e:
            raise ScenarioError(f"{statement.kind} '{statement.name}': {e}", statement.line, statement.column) from e
    logger.info("parsed %d statements, %d declarations", len(statements), len(env))
    return Scenario(tuple(statements), env)


def _space_node_format(node) -> str:
    return node.name if isinstance(node, Ref) else space_format(Space(node))


def _leg_node_format(node) -> str:
    if isinstance(node, Ref):
        return node.name
    return f"[{','.join('c' if a == CONSTANT else f's{a + 1}' for a in node)}]"


def _bundle_node_format(node) -> str:
    if isinstance(node, Ref):
        return node.name
    return ' + '.join(f"O({','.join(map(str, degrees))})" for degrees in node) if node else '0'


def _linear_format(terms, function: str) -> str:
    text = ''
    for index, (n, ref) in enumerate(terms):
        sign = '-' if n < 0 else '+'
        body = f"{function}({ref.name})" if abs(n) == 1 else f"{abs(n)}*{function}({ref.name})"
        if index == 0:
            text = body if sign == '+' else f"-{body}"
        else:
            text += f" {sign} {body}"
    return text


def _span_format(fields: Dict) -> str:
    return (f": {_space_node_format(fields['source'])} <- {_space_node_format(fields['apex'])} -> "
            f"{_space_node_format(fields['target'])} {{ left {_leg_node_format(fields['left'])}, "
            f"right {_leg_node_format(fields['right'])} }}")


def statement_format(statement: Statement) -> str:
    """Canonical one-line text of a statement."""
    kind, fields = statement.kind, statement.fields
    head = f"{kind} {statement.name}"
    if kind == 'space':
        body = f"{head} = {_space_node_format(fields['space'])}"
    elif kind == 'morphism':
        if fields['form'] in ('id', 'to-point'):
            body = f"{head} = {fields['form']} {_space_node_format(fields['space'])}"
        elif fields['form'] == 'compose':
            body = f"{head} = compose {fields['first'].name} {fields['second'].name}"
        else:
            entries = ', '.join(f"t{j} <- {'const' if a == CONSTANT else f's{a + 1}'}" for j, a in fields['entries'])
            body = (f"{head} : {_space_node_format(fields['source'])} -> {_space_node_format(fields['target'])} "
                    f"{{ {entries} }}" if entries else
                    f"{head} : {_space_node_format(fields['source'])} -> {_space_node_format(fields['target'])} {{ }}")
    elif kind == 'bundle':
        body = f"{head} on {_space_node_format(fields['base'])} = {_bundle_node_format(fields['summands'])}"
    elif kind == 'subvariety':
        body = f"{head} in {_space_node_format(fields['ambient'])} = L({','.join(map(str, fields['dims']))})"
    elif kind == 'cf':
        body = f"{head} = {_linear_format(fields['terms'], 'ind')}"
    elif kind == 'motive':
        body = f"{head} = {_linear_format(fields['terms'], 'gen')}"
    elif kind == 'corr':
        form = fields['form']
        if form == 'compose':
            body = f"{head} = compose {fields['first'].name} {fields['second'].name}"
        elif form in ('pushforward', 'pullback'):
            body = f"{head} = {form} {fields['morphism'].name}"
        elif form == 'id':
            body = f"{head} = id {_space_node_format(fields['space'])}"
        else:
            body = f"{head} {_span_format(fields)}"
            if fields['tags']:
                body += f" tags {' '.join(fields['tags'])}"
    elif kind == 'bicycle':
        form = fields['form']
        if form == 'prod':
            body = f"{head} = prod {fields['mode']} {fields['first'].name} {fields['second'].name}"
        elif form in ('push', 'pull'):
            body = f"{head} = {form} {fields['side']} {fields['morphism'].name} {fields['bicycle'].name}"
        elif form in ('double-push', 'double-pull'):
            body = f"{head} = {form} {fields['morphism'].name} {fields['bicycle'].name}"
        elif form == 'id':
            body = f"{head} = id {_space_node_format(fields['space'])}"
        else:
            body = f"{head} {_span_format(fields)} with {_bundle_node_format(fields['bundle'])}"
    elif kind == 'zigzag':
        if fields['form'] == 'id':
            body = f"{head} = id {_space_node_format(fields['space'])} kind {fields['kind']}"
        else:
            body = f"{head} = {' ~ '.join(ref.name for ref in fields['links'])} kind {fields['kind']}"
    elif kind == 'check':
        parts = ['check', fields['what']] + [ref.name for ref in fields['args']]
        for option in DIRECTIVE_OPTIONS:
            if option in fields['options']:
                parts += [option, str(fields['options'][option])]
        if fields['without']:
            parts += ['without', fields['without']]
        body = ' '.join(parts)
    else:
        body = f"eval {fields['target'].name}" + (f" functor {fields['functor']}" if fields['functor'] else '')
    return body + ';'


def scenario_format(scenario: Scenario) -> str:
    return ''.join(statement_format(statement) + '\n' for statement in scenario.statements)


def scenario_load(path: str) -> Scenario:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except (IOError, UnicodeDecodeError) as e:
        raise ScenarioError(f"Cannot read {path}: {e}") from e
    return parse_scenario(text)



### SUITES AND REPORTS ###

# Option defaults that differ from the configured count and max-dim
DIRECTIVE_DEFAULTS = {
    'specializations': {'count': 200, 'max-dim': 6},
}


def _arrow_kind(value) -> str:
    for kind, cls in (('corr', Correspondence), ('bicycle', Bicycle), ('zigzag', Zigzag)):
        if isinstance(value, cls):
            return kind
    raise StructuralError(f"Expected a corr, bicycle or zigzag, got {type(value).__name__}")


def _run_hrr(tally, args, options, rng):
    check_hrr(tally, options['max-n'], options['koszul'])


def _run_specializations(tally, args, options, rng):
    check_specializations(tally, rng, options['count'], options['max-dim'])


def _run_functoriality(tally, args, options, rng):
    functor, alpha, beta = args
    kinds = {_arrow_kind(alpha), _arrow_kind(beta)}
    if len(kinds) != 1:
        raise StructuralError("Functoriality needs two arrows of the same type")
    kind = kinds.pop()
    if kind == 'corr':
        check_functoriality(functor, alpha, beta, tally=tally)
    elif kind == 'zigzag':
        check_zigzag_functoriality(functor, alpha, beta, tally)
    else:
        check_bicycle_functoriality(bicycle_functor_parse(functor), alpha, beta, tally)


def _run_naturality(tally, args, options, rng):
    transformation, alpha = args
    kind = _arrow_kind(alpha)
    if kind == 'corr':
        check_naturality(transformation, alpha, twist=options['twist'], tally=tally)
    elif kind == 'zigzag':
        check_zigzag_naturality(transformation, alpha, tally, twist=options['twist'])
    elif transformation != 'td_bfm':
        raise UnsupportedLegError(f"Bicycles carry td_bfm only, not {transformation}")
    else:
        check_bicycle_naturality(alpha, tally, twist=options['twist'])


def _run_double_squares(tally, args, options, rng):
    F, f = bicycle_functor_parse(args[0]), args[1]
    for b in args[2:]:
        if b.source == b.target == f.source:
            check_double_squares(F, f, b, None, tally)
        elif b.source == b.target == f.target:
            check_double_squares(F, f, None, b, tally)
        else:
            raise StructuralError(f"Bicycle {bicycle_format(b)} is not an endomorphism of the source or target of f")


def _run_zigzag_vs_corr(tally, args, options, rng):
    z = args[0]
    functors = [F for F in ZIGZAG_KINDS[z.kind] if F in ZIGZAG_KINDS['pro_smooth']]
    if not functors:
        raise UnsupportedLegError(f"{z.kind} zigzags share no functor with correspondences")
    check_zigzag_vs_corr(z, tally, functors)


DIRECTIVE_RUNNERS = {
    'hrr': _run_hrr,
    'specializations': _run_specializations,
    'functoriality': _run_functoriality,
    'naturality': _run_naturality,
    'grr': lambda tally, args, options, rng: check_grr(args[0], tally, koszul=options['koszul']),
    'base-change': lambda tally, args, options, rng: check_base_change(args[0], args[1], tally),
    'projection-formula': lambda tally, args, options, rng: check_projection_formula(args[0], tally),
    'triangles': lambda tally, args, options, rng: check_triangles(args[0], tally),
    'double-squares': _run_double_squares,
    'decomposition': lambda tally, args, options, rng: check_decomposition(args[0], tally),
    'pullback-dot': lambda tally, args, options, rng: check_pullback_dot(args[0], args[1], tally),
    'iso-invariance': lambda tally, args, options, rng: check_iso_invariance(args[0], tally),
    'zigzag-vs-corr': _run_zigzag_vs_corr,
    'corr-suite': lambda tally, args, options, rng: check_corr_suite(
        rng, options['count'], options['max-dim'], options['twist'], options['koszul'], tally.name),
    'bicycle-suite': lambda tally, args, options, rng: check_bicycle_theorems(
        rng, options['count'], options['max-dim'], options['twist'], tally.name),
    'zigzag-suite': lambda tally, args, options, rng: check_zigzag_laws(
        rng, options['count'], options['max-dim'], options['twist'], tally.name),
    'smooth-suite': lambda tally, args, options, rng: check_smooth_laws(
        rng, options['count'], options['max-dim'], tally.name),
}


def run_directive(name: str, statement: Statement, env: Dict, seed: int, defaults: Dict) -> List[CheckResult]:
    """Run one check statement; precondition violations become failures of that directive."""
    fields = statement.fields
    what = fields['what']
    suite, signature = DIRECTIVES[what]
    options = {**defaults, **DIRECTIVE_DEFAULTS.get(what, {}), **fields['options'],
               'twist': fields['without'] != 'twist', 'koszul': fields['without'] != 'koszul'}
    args = []
    for index, ref in enumerate(fields['args']):
        expected = signature[min(index, len(signature) - 1)]
        args.append(ref.name if expected in ('functor', 'transformation') else env[ref.name][1])
    tally = CheckTally(name, suite)
    logger.info("running %s", name)
    try:
        extra = DIRECTIVE_RUNNERS[what](tally, args, options, random.Random(f"{seed}:{name}"))
    except CorrclassError as e:
        logger.debug("%s: %s", name, e)
        tally.error(f"{what} precondition", e)
        extra = None
    if isinstance(extra, list):
        return extra
    return [tally.result()]


def result_entry(result: CheckResult) -> Dict[str, Any]:
    return {
        'name': result.name,
        'suite': result.suite,
        'cases': result.cases,
        'passes': result.passes,
        'failures': list(result.failures),
        'informational': result.informational,
    }


def scenario_evaluate(env: Dict, name: str, functor: Optional[str] = None) -> Dict[str, Any]:
    """Describe a declared value; with a functor, also its operator matrix."""
    if name not in env:
        raise StructuralError(f"Unknown name '{name}'")
    kind, value = env[name]
    result = {'kind': kind}
    if kind == 'space':
        result.update(value=space_format(value), dimension=space_dimension(value), euler=space_euler(value),
                      todd=ring_format(tangent_class('todd', value)))
    elif kind == 'morphism':
        cls = classify_morphism(value)
        result.update(value=morphism_format(value), smooth=cls.is_smooth, iso=cls.is_iso,
                      relative_dimension=cls.relative_dimension)
    elif kind == 'bundle':
        result.update(value=bundle_format(value), rank=bundle_rank(value),
                      chern=ring_format(bundle_class('chern', value)), ch=ring_format(chern_character(value)))
    elif kind == 'subvariety':
        result.update(value=subvariety_format(value), chern=ring_format(mac_chern(cf_indicator(value))))
    elif kind == 'cf':
        result.update(value=cf_format(value), chern=ring_format(mac_chern(value)))
    elif kind == 'motive':
        result.update(value=mot_format(value), hirzebruch=ring_format(hirzebruch_Ty(value)),
                      epsilon=cf_format(epsilon_map(value)), gamma=k_format(gamma_map(value)))
    elif kind == 'corr':
        result.update(value=corr_format(value))
    elif kind == 'bicycle':
        result.update(value=bicycle_format(value), grade=list(bicycle_grade(value)))
    else:
        result.update(value=zigzag_format(value), length=zigzag_length(value))
    if functor is not None:
        if kind == 'corr':
            operator = corr_operator(functor, value)
        elif kind == 'zigzag':
            operator = zigzag_operator(functor, value)
        elif kind == 'bicycle':
            operator = bicycle_operator(functor, value)
        else:
            raise StructuralError(f"A {kind} does not take a functor")
        result.update(functor=functor, matrix=operator_matrix_json(operator))
    return result


def _eval_entry(name: str, statement: Statement, env: Dict) -> Dict[str, Any]:
    entry = {'name': name, 'suite': 'eval', 'cases': 0, 'passes': 0, 'failures': [], 'informational': True,
             'value': None}
    try:
        entry['value'] = scenario_evaluate(env, statement.fields['target'].name, statement.fields['functor'])
    except CorrclassError as e:
        entry['failures'] = [{'case': 'eval', 'error': str(e)}]
        entry['informational'] = False
    return entry


def run_suites(scenario: Scenario, seed: int = 1, suites: Optional[Sequence[str]] = None, jobs: int = 1,
               timing: bool = False, defaults: Optional[Dict[str, int]] = None) -> Dict[str, Any]:
    """Run every check and eval statement and assemble the report.

    Args:
        scenario: parsed scenario
        seed: master seed; each directive draws from Random(f"{seed}:{name}")
        suites: suite groups or check names to keep, None for all
        jobs: worker threads
        timing: add wall-clock seconds (makes the output run-dependent)
        defaults: 'count' and 'max-dim' for directives that do not set them
    """
    defaults = {'count': 10, 'max-dim': 4, 'max-n': 4, **(defaults or {})}
    selected = []
    for statement in scenario.statements:
        if statement.kind == 'eval':
            if not suites or 'eval' in suites:
                selected.append(statement)
        elif statement.kind == 'check':
            what = statement.fields['what']
            if not suites or what in suites or DIRECTIVES[what][0] in suites:
                selected.append(statement)
    names, seen = [], collections.Counter()
    for statement in selected:
        name = statement_format(statement)[:-1]
        seen[name] += 1
        names.append(name if seen[name] == 1 else f"{name} #{seen[name]}")

    def run(item):
        name, statement = item
        start = time.perf_counter()
        if statement.kind == 'eval':
            entries = [_eval_entry(name, statement, scenario.env)]
        else:
            entries = [result_entry(r) for r in run_directive(name, statement, scenario.env, seed, defaults)]
        if timing:
            for entry in entries:
                entry['seconds'] = round(time.perf_counter() - start, 6)
        return entries

    start = time.perf_counter()
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(jobs, 1)) as executor:
        batches = list(executor.map(run, zip(names, selected)))
    entries = [entry for batch in batches for entry in batch]
    report = {
        'schema': REPORT_SCHEMA,
        'seed': seed,
        'directives': entries,
        'summary': {
            'directives': len(entries),
            'cases': sum(entry['cases'] for entry in entries),
            'failures': sum(len(entry['failures']) for entry in entries if not entry['informational']),
        },
    }
    if timing:
        report['seconds'] = round(time.perf_counter() - start, 6)
    logger.info("%d directives, %d failures", len(entries), report['summary']['failures'])
    return report


def emit_report(report: Dict[str, Any], output_format: str = 'json') -> str:
    if output_format == 'json':
        return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False)
    lines = []
    for entry in report['directives']:
        if entry['suite'] == 'eval' and entry['value'] is not None:
            lines.append(f"EVAL {entry['name']}")
            for key, value in sorted(entry['value'].items()):
                lines.append(f"  {key}: {json.dumps(value, sort_keys=True) if isinstance(value, dict) else value}")
            continue
        if entry['informational']:
            status = 'INFO'
        else:
            status = 'FAIL' if entry['failures'] else 'PASS'
        lines.append(f"{status} {entry['name']} ({entry['passes']}/{entry['cases']} cases)")
        for failure in entry['failures']:
            lines.append(f"  case: {failure['case']}")
            for key in ('witness', 'error', 'left', 'right'):
                if key in failure:
                    value = failure[key]
                    lines.append(f"    {key}: {json.dumps(value, sort_keys=True) if isinstance(value, dict) else value}")
    summary = report['summary']
    lines.append(f"{summary['directives']} directives, {summary['cases']} cases, {summary['failures']} failures")
    return '\n'.join(lines)



### RANDOM SCENARIOS ###

def random_scenario_text(seed: int = 1, max_total_dim: int = 4, counts: Optional[Dict[str, int]] = None) -> str:
    """Scenario text with random composable pairs and the check battery over them.

    counts: 'pairs' (correspondences), 'bicycles' and 'zigzags', each the number
    of composable pairs to generate.
    """
    if max_total_dim < 0:
        raise StructuralError(f"max_total_dim must be >= 0, got {max_total_dim}")
    counts = {'pairs': 10, 'bicycles': 10, 'zigzags': 10, **(counts or {})}
    rng = random.Random(seed)
    lines = []
    morphisms = {}

    def morphism_name(f: Morphism) -> str:
        if f not in morphisms:
            morphisms[f] = f"m{len(morphisms) + 1}"
            lines.append(f"morphism {morphisms[f]} : {morphism_format(f)};")
        return morphisms[f]

    def span(keyword: str, name: str, left: Morphism, right: Morphism, suffix: str = ''):
        left_name, right_name = morphism_name(left), morphism_name(right)
        lines.append(f"{keyword} {name} : {space_format(left.target)} <- {space_format(left.source)} -> "
                     f"{space_format(right.target)} {{ left {left_name}, right {right_name} }}{suffix};")

    X = random_space(rng, max_total_dim)
    lines.append(f"space X = {space_format(X)};")
    lines.append("check hrr;")
    lines.append(f"check specializations count 20 max-dim {max_total_dim};")
    lines.append("check triangles X;")
    Y, Z = random_space(rng, max_total_dim), random_space(rng, max_total_dim)
    f, g = random_morphism(rng, X, Y), random_morphism(rng, Y, Z)
    lines.append(f"check pullback-dot {morphism_name(f)} {morphism_name(g)};")

    for i in range(1, counts['pairs'] + 1):
        alpha, beta = random_composable_corrs(rng, max_total_dim)
        span('corr', f"a{i}", alpha.left, alpha.right)
        span('corr', f"b{i}", beta.left, beta.right)
        for functor in ZIGZAG_KINDS['pro_smooth']:
            lines.append(f"check functoriality {functor} a{i} b{i};")
        for transformation in NATURAL_TRANSFORMATIONS:
            lines.append(f"check naturality {transformation} a{i};")
        lines.append(f"check base-change {morphism_name(alpha.right)} {morphism_name(beta.left)};")
        lines.append(f"check projection-formula {morphism_name(alpha.left)};")
        lines.append(f"check grr {morphism_name(alpha.left)};")

    for i in range(1, counts['bicycles'] + 1):
        alpha, beta = random_composable_bicycles(rng, max_total_dim)
        span('bicycle', f"c{i}", alpha.left, alpha.right, f" with {bundle_format(alpha.bundle)}")
        span('bicycle', f"d{i}", beta.left, beta.right, f" with {bundle_format(beta.bundle)}")
        for functor in BICYCLE_FUNCTOR_SAMPLES:
            lines.append(f"check functoriality {functor} c{i} d{i};")
        lines.append(f"check naturality td_bfm c{i};")
        lines.append(f"check decomposition c{i};")
        base = random_space(rng, max(max_total_dim - 1, 0))
        total, p = random_smooth_over(rng, base, max_total_dim)
        pushed = random_bicycle(rng, total, total, max_total_dim)
        pulled = random_bicycle(rng, base, base, max(max_total_dim - (space_dimension(total) - space_dimension(base)), 0))
        span('bicycle', f"e{i}", pushed.left, pushed.right, f" with {bundle_format(pushed.bundle)}")
        span('bicycle', f"p{i}", pulled.left, pulled.right, f" with {bundle_format(pulled.bundle)}")
        lines.append(f"check double-squares {rng.choice(BICYCLE_FUNCTOR_SAMPLES)} {morphism_name(p)} e{i} p{i};")

    kinds = tuple(ZIGZAG_KINDS)
    for i in range(1, counts['zigzags'] + 1):
        kind = kinds[(i - 1) % len(kinds)]
        alpha, beta = random_composable_zigzags(rng, kind, max_total_dim)
        suffix = '' if kind == 'pro_smooth' else f" tags {' '.join(ZIGZAG_TAGS[kind])}"
        names = []
        for k, link in enumerate(alpha.links + beta.links, 1):
            names.append(f"l{i}_{k}")
            span('corr', names[-1], link.left, link.right, suffix)
        dsl_kind = kind.replace('_', '-')
        split = zigzag_length(alpha)
        lines.append(f"zigzag z{i} = {' ~ '.join(names[:split])} kind {dsl_kind};")
        lines.append(f"zigzag w{i} = {' ~ '.join(names[split:])} kind {dsl_kind};")
        for functor in ZIGZAG_KINDS[kind]:
            lines.append(f"check functoriality {functor} z{i} w{i};")
        if kind == 'pro_smooth':
            for transformation in NATURAL_TRANSFORMATIONS:
                lines.append(f"check naturality {transformation} z{i};")
            if space_dimension(zigzag_collapse(alpha).apex) <= max_total_dim:
                lines.append(f"check zigzag-vs-corr z{i};")
        elif kind == 'pro_lci':
            lines.append(f"check naturality td_bfm z{i};")
        else:
            lines.append(f"check iso-invariance {names[0]};")
    return ''.join(line + '\n' for line in lines)


def random_scenario(seed: int = 1, max_total_dim: int = 4, counts: Optional[Dict[str, int]] = None) -> Scenario:
    return parse_scenario(random_scenario_text(seed, max_total_dim, counts))



### CONFIGURATION ###

CONFIG_DEFAULTS = {'seed': 1, 'format': 'json', 'max_dim': 4, 'count': 10, 'jobs': 1}

CONFIG_ENVIRONMENT = {'seed': 'CORRCLASS_SEED', 'format': 'CORRCLASS_FORMAT', 'max_dim': 'CORRCLASS_MAX_DIM'}


def config_get_path() -> Path:
    """
    Get the path to the config file.
    Defaults to $HOME/.config/corrclass/config.json.
    Can be overridden with CORRCLASS_CONFIG_PATH environment variable.
    """
    config_override = os.environ.get('CORRCLASS_CONFIG_PATH')
    if config_override:
        return Path(config_override)
    home = os.environ.get('HOME', os.path.expanduser('~'))
    return Path(home) / '.config' / 'corrclass' / 'config.json'


def config_read() -> Dict[str, Any]:
    """
    Read defaults, then the config file, then CORRCLASS_* environment variables.
    Command-line flags are applied on top by the caller.
    """
    config = dict(CONFIG_DEFAULTS)
    config_path = config_get_path()
    if config_path.exists():
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (IOError, json.JSONDecodeError) as e:
            print(f"Error: Failed to read config file: {e}", file=sys.stderr)
            sys.exit(2)
        if not isinstance(data, dict):
            print(f"Error: Config file {config_path} must hold a JSON object", file=sys.stderr)
            sys.exit(2)
        config.update({key: data[key] for key in CONFIG_DEFAULTS if key in data})
    for key, variable in CONFIG_ENVIRONMENT.items():
        value = os.environ.get(variable)
        if value:
            config[key] = value
    try:
        for key in ('seed', 'max_dim', 'count', 'jobs'):
            config[key] = int(config[key])
    except (TypeError, ValueError):
        print(f"Error: Invalid configuration value for {key}: {config[key]!r}", file=sys.stderr)
        sys.exit(2)
    if config['format'] not in ('json', 'text'):
        print(f"Error: Invalid format: {config['format']!r} (expected json or text)", file=sys.stderr)
        sys.exit(2)
    return config



### COMMANDS ###

def command_load(path: str) -> Scenario:
    try:
        return scenario_load(path)
    except ScenarioError as e:
        print(f"Error: {path}:{e}", file=sys.stderr)
        sys.exit(2)


def command_check(path: str, seed: int, suites: Optional[str], output_format: str, jobs: int, timing: bool,
                  config: Dict[str, Any]):
    """
    Run every check and eval statement of a scenario and print the report.
    Exit status is 1 when any check fails.
    """
    scenario = command_load(path)
    selected = [s.strip() for s in suites.split(',') if s.strip()] if suites else None
    report = run_suites(scenario, seed, selected, jobs, timing,
                        defaults={'count': config['count'], 'max-dim': config['max_dim']})
    print(emit_report(report, output_format))
    sys.exit(1 if report['summary']['failures'] else 0)


def command_eval(path: str, name: str, functor: Optional[str], output_format: str):
    scenario = command_load(path)
    try:
        value = scenario_evaluate(scenario.env, name, functor)
    except CorrclassError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(2)
    if output_format == 'json':
        print(json.dumps(value, indent=2, sort_keys=True, ensure_ascii=False))
        return
    for key, item in sorted(value.items()):
        print(f"{key}: {json.dumps(item, sort_keys=True) if isinstance(item, dict) else item}")


def command_random(seed: int, max_dim: int, count: int):
    """Print a random scenario in canonical form."""
    if max_dim < 0 or count < 0:
        print("Error: --max-dim and --count must be >= 0", file=sys.stderr)
        sys.exit(2)
    counts = {'pairs': count, 'bicycles': count, 'zigzags': count}
    print(scenario_format(random_scenario(seed, max_dim, counts)), end='')


def command_fmt(path: str):
    print(scenario_format(command_load(path)), end='')


def main():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', '-v', action='store_true', help='Log progress and failing cases to stderr')

    parser = argparse.ArgumentParser(description='corrclass - exact operator identities for correspondences')
    subparsers = parser.add_subparsers(dest='command', help='Commands')

    # Check command
    check_parser = subparsers.add_parser('check', parents=[common], help='Run the checks of a scenario')
    check_parser.add_argument('file', help='Scenario file (.ccs)')
    check_parser.add_argument('--seed', type=int, help='Master seed (default: CORRCLASS_SEED or 1)')
    check_parser.add_argument('--suites', help='Comma-separated suite groups or check names to run')
    check_parser.add_argument('--format', choices=['json', 'text'], help='Report format')
    check_parser.add_argument('--jobs', type=int, help='Run directives on this many threads')
    check_parser.add_argument('--timing', action='store_true', help='Add wall-clock seconds to the report')

    # Eval command
    eval_parser = subparsers.add_parser('eval', parents=[common], help='Evaluate a declared name')
    eval_parser.add_argument('file', help='Scenario file (.ccs)')
    eval_parser.add_argument('--expr', required=True, help='Declared name to evaluate')
    eval_parser.add_argument('--functor', help='Functor whose operator matrix to print')
    eval_parser.add_argument('--format', choices=['json', 'text'], help='Output format')

    # Random command
    random_parser = subparsers.add_parser('random', parents=[common], help='Print a random scenario')
    random_parser.add_argument('--seed', type=int, help='Seed (default: CORRCLASS_SEED or 1)')
    random_parser.add_argument('--max-dim', type=int, help='Bound on the total dimension of every space')
    random_parser.add_argument('--count', type=int, help='Composable pairs of each kind')

    # Fmt command
    fmt_parser = subparsers.add_parser('fmt', parents=[common], help='Pretty-print a scenario')
    fmt_parser.add_argument('file', help='Scenario file (.ccs)')

    args = parser.parse_args()

    logging.basicConfig(format='%(name)s:%(levelname)s:%(message)s',
                        level=logging.DEBUG if getattr(args, 'verbose', False) else logging.WARNING)

    if args.command is None:
        parser.print_help()
        sys.exit(2)

    config = config_read()

    if args.command == 'check':
        command_check(args.file, config['seed'] if args.seed is None else args.seed, args.suites,
                      args.format or config['format'], config['jobs'] if args.jobs is None else args.jobs,
                      args.timing, config)
    elif args.command == 'eval':
        command_eval(args.file, args.expr, args.functor, args.format or config['format'])
    elif args.command == 'random':
        command_random(config['seed'] if args.seed is None else args.seed,
                       config['max_dim'] if args.max_dim is None else args.max_dim,
                       config['count'] if args.count is None else args.count)
    elif args.command == 'fmt':
        command_fmt(args.file)


if __name__ == '__main__':
    main()
