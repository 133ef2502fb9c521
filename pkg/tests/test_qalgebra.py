import numpy as np
import pytest

from QAlgebra import Monomial, NCMatrix, NCPoly, drop_scalar, flow_factor, normal_form, random_poly, random_word, \
    sigma, star
from QScalar import Exact


def gen(letter):
    return NCPoly.gen(letter)


def test_commutation_rules():
    assert normal_form("ba") == normal_form("ab") * Exact.spower(-2)
    assert normal_form("db") == normal_form("bd") * Exact.spower(-2)
    assert normal_form("cb") == normal_form("bc")
    assert normal_form("ad") == NCPoly.one() + normal_form("bc") * Exact.spower(2)
    assert normal_form("da") == NCPoly.one() + normal_form("bc") * Exact.spower(-2)


def test_normal_form_is_strategy_independent():
    rng = np.random.default_rng(3)
    for _ in range(200):
        word = random_word(rng, 6)
        assert normal_form(word, "leftmost") == normal_form(word, "rightmost")


def test_unknown_letters_are_rejected():
    with pytest.raises(ValueError):
        normal_form("abx")


def test_product_is_associative():
    rng = np.random.default_rng(11)
    for _ in range(20):
        x, y, z = (random_poly(rng, 2, terms=2) for _ in range(3))
        assert (x * y) * z == x * (y * z)


def test_fundamental_unitary_is_unitary():
    u = NCMatrix.from_words([["a", "b"], ["c", "d"]])
    assert u.star() @ u == NCMatrix.identity(2)
    assert u @ u.star() == NCMatrix.identity(2)


def test_star_is_an_antimultiplicative_involution():
    rng = np.random.default_rng(5)
    for _ in range(20):
        x, y = random_poly(rng, 3), random_poly(rng, 3)
        assert star(star(x)) == x
        assert star(x * y) == star(y) * star(x)


def test_star_on_generators():
    assert star(gen("a")) == gen("d")
    assert star(gen("b")) == gen("c") * Exact.spower(2, -1)


def test_weights():
    assert Monomial.from_word("a").weight2("n") == -1
    assert Monomial.from_word("b").weight2("n") == 1
    assert Monomial.from_word("ab").weight2("n") == 0
    assert Monomial.from_word("ab").weight2("m") == -2
    assert normal_form("da").homogeneous_weight2("n") == 0
    assert (gen("a") + gen("b")).homogeneous_weight2("n") is None


def test_modular_flow_on_generators():
    a = gen("a")
    assert sigma(1j, a) == a * Exact.spower(-1)
    assert sigma(-2j, a) == a * Exact.spower(2)
    assert sigma(1j, gen("b")) == gen("b") * Exact.spower(1)


def test_modular_flow_is_an_automorphism_and_a_group():
    rng = np.random.default_rng(8)
    for _ in range(20):
        x, y = random_poly(rng, 3), random_poly(rng, 3)
        assert sigma(1j, x * y) == sigma(1j, x) * sigma(1j, y)
        assert sigma(1j, sigma(-2j, x)) == sigma(-1j, x)
        assert star(sigma(1j, x)) == sigma(-1j, star(x))


def test_non_integral_flow_needs_a_context(ctx):
    with pytest.raises(ValueError):
        flow_factor(0.3, 1)
    value = flow_factor(0.3, 2, "n", ctx)
    # q^{i z (-1/2) w2} with w2 = 2
    assert value == pytest.approx(complex(0.5 ** (-0.3j)))


def test_drop_scalar():
    x = normal_form("ad")
    assert drop_scalar(x) == normal_form("bc") * Exact.spower(2)
    assert drop_scalar(NCPoly.one()).is_zero()
