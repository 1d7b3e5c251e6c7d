import random

import pytest
from hypothesis import given, settings, strategies as st

from featmc.errors import DiagramMismatchError, InvalidProductError
from featmc.features import FeatureDiagram, Product, parse_feature_expression
from featmc.profiles import (
    DenseProfile,
    GuardedProfile,
    add,
    complement,
    constant,
    eval_profile,
    exceeds,
    from_dense,
    indicator,
    mul,
    pointwise_max,
    probability_range_findings,
    sub,
    to_dense,
)
from featmc.rational import ONE, ZERO, rational


WIPER = FeatureDiagram(("spd2", "very", "eco"))
MINEPUMP = FeatureDiagram(("W", "A", "V"))


def alpha_profile():
    return GuardedProfile(
        WIPER,
        [
            (parse_feature_expression("!spd2"), rational("0.8")),
            (parse_feature_expression("spd2 & !very"), rational("0.5")),
            (parse_feature_expression("spd2 & very"), rational("0.2")),
        ],
        ZERO,
    )


def wiper_product(spd2=0, very=0, eco=0):
    return Product(("spd2", "very", "eco"), (bool(spd2), bool(very), bool(eco)))


class TestEval:
    def test_alpha_profile_on_very_sensitive(self):
        assert eval_profile(alpha_profile(), wiper_product(1, 1, 0)) == rational("0.2")

    def test_constant(self):
        p = constant(rational("0.125"), MINEPUMP)
        for prod in MINEPUMP.valid_products():
            assert eval_profile(p, prod) == rational("0.125")

    def test_reward_profile_eco(self):
        r = GuardedProfile(
            WIPER,
            [
                (parse_feature_expression("!eco"), rational(3)),
                (parse_feature_expression("eco"), rational(2)),
            ],
        )
        assert eval_profile(r, wiper_product(eco=1)) == 2
        assert eval_profile(r, wiper_product(eco=0)) == 3

    def test_invalid_product(self):
        d = FeatureDiagram(("f",), parse_feature_expression("f"))
        p = constant(ONE, d)
        with pytest.raises(InvalidProductError):
            eval_profile(p, Product(("f",), (False,)))

    def test_first_match_wins(self):
        p = GuardedProfile(
            WIPER,
            [
                (parse_feature_expression("spd2"), ONE),
                (parse_feature_expression("spd2 & very"), ZERO),
            ],
        )
        assert eval_profile(p, wiper_product(1, 1, 0)) == 1


class TestArithmetic:
    def test_constant_product(self):
        a = constant(rational("0.875"), MINEPUMP)
        b = constant(rational("0.125"), MINEPUMP)
        assert mul(a, b).equals_pointwise(constant(rational("0.109375"), MINEPUMP))

    def test_one_is_multiplicative_unit(self):
        p = alpha_profile()
        assert mul(p, constant(ONE, WIPER)).equals_pointwise(p)

    def test_guarded_times_constant_pointwise(self):
        d = MINEPUMP
        p = GuardedProfile(
            d,
            [(parse_feature_expression("V"), rational("0.9"))],
            rational("0.75"),
        )
        result = mul(p, constant(rational("0.125"), d))
        for prod in d.valid_products():
            assert result.evaluate(prod) == p.evaluate(prod) * rational("0.125")

    def test_zero_is_additive_unit(self):
        p = alpha_profile()
        assert add(p, constant(ZERO, WIPER)).equals_pointwise(p)

    def test_beta_as_difference(self):
        # the heavy-rain probability equals 0.8 minus the light-rain one
        beta = sub(constant(rational("0.8"), WIPER), alpha_profile())
        assert beta.evaluate(wiper_product(0, 0, 0)) == 0
        assert beta.evaluate(wiper_product(1, 0, 0)) == rational("0.3")
        assert beta.evaluate(wiper_product(1, 1, 0)) == rational("0.6")

    def test_complement_of_indicator(self):
        ind = indicator(parse_feature_expression("eco"), WIPER)
        comp = complement(ind)
        assert comp.evaluate(wiper_product(eco=1)) == 0
        assert comp.evaluate(wiper_product(eco=0)) == 1

    def test_diagram_mismatch(self):
        with pytest.raises(DiagramMismatchError):
            mul(constant(ONE, WIPER), constant(ONE, MINEPUMP))


class TestIndicator:
    def test_true_false(self):
        assert indicator(parse_feature_expression("true"), WIPER).equals_pointwise(
            constant(ONE, WIPER)
        )
        assert indicator(parse_feature_expression("false"), WIPER).equals_pointwise(
            constant(ZERO, WIPER)
        )

    def test_spd2_covers_half_the_products(self):
        ind = indicator(parse_feature_expression("spd2"), WIPER)
        assert sum(ind.dense_values()) == 4


class TestMaxAndExceeds:
    def test_exceeds_on_equal_is_false(self):
        p = alpha_profile()
        assert not exceeds(p, p, ZERO)

    def test_exceeds_constants(self):
        assert exceeds(
            constant(rational("0.2"), WIPER),
            constant(rational("0.1"), WIPER),
            rational("1e-12"),
        )

    def test_pointwise_max_against_half(self):
        result = pointwise_max(alpha_profile(), constant(rational("0.5"), WIPER))
        for prod in WIPER.valid_products():
            expected = max(alpha_profile().evaluate(prod), rational("0.5"))
            assert result.evaluate(prod) == expected
            if not prod["spd2"]:
                assert result.evaluate(prod) == rational("0.8")
            else:
                assert result.evaluate(prod) == rational("0.5")


class TestDense:
    def test_round_trip(self):
        p = alpha_profile()
        back = from_dense(to_dense(p).values, WIPER)
        assert back.equals_pointwise(p)

    def test_constant_is_flat(self):
        assert set(to_dense(constant(rational(2), WIPER)).values) == {rational(2)}

    def test_alpha_dense_entries(self):
        values = set(to_dense(alpha_profile()).values)
        assert values == {rational("0.8"), rational("0.5"), rational("0.2")}

    def test_operations_commute_with_to_dense(self):
        p = alpha_profile()
        q = indicator(parse_feature_expression("eco"), WIPER)
        dense_first = [a + b for a, b in zip(to_dense(p).values, to_dense(q).values)]
        assert list(to_dense(add(p, q)).values) == dense_first


def test_probability_range_validator():
    bad = GuardedProfile(
        WIPER, [(parse_feature_expression("eco"), rational("1.5"))], ZERO
    )
    findings = probability_range_findings(bad)
    assert len(findings) == 1 and "1.5" in findings[0] or "3/2" in findings[0]
    assert probability_range_findings(alpha_profile()) == []


# ---------------------------------------------------------------------------
# Algebraic laws on random profiles
# ---------------------------------------------------------------------------

_small_diagram = FeatureDiagram(("p", "q"))


@st.composite
def _profiles(draw):
    grain = 8
    cases = []
    for guard_text in draw(
        st.lists(st.sampled_from(["p", "!p", "p & q", "q"]), max_size=2)
    ):
        cases.append(
            (parse_feature_expression(guard_text), rational(draw(st.integers(0, grain)), grain))
        )
    default = rational(draw(st.integers(0, grain)), grain)
    if draw(st.booleans()):
        return GuardedProfile(_small_diagram, cases, default)
    values = [
        rational(draw(st.integers(0, grain)), grain)
        for _ in _small_diagram.valid_products()
    ]
    return DenseProfile(_small_diagram, values)


@settings(max_examples=60)
@given(_profiles(), _profiles(), _profiles())
def test_mul_add_laws(a, b, c):
    products = _small_diagram.valid_products()

    def values(p):
        return [p.evaluate(x) for x in products]

    assert values(mul(a, b)) == [x * y for x, y in zip(values(a), values(b))]
    assert values(add(a, b)) == [x + y for x, y in zip(values(a), values(b))]
    assert mul(a, b).equals_pointwise(mul(b, a))
    assert add(a, b).equals_pointwise(add(b, a))
    assert mul(mul(a, b), c).equals_pointwise(mul(a, mul(b, c)))
    assert add(add(a, b), c).equals_pointwise(add(a, add(b, c)))
    assert mul(a, constant(ONE, _small_diagram)).equals_pointwise(a)
    assert add(a, constant(ZERO, _small_diagram)).equals_pointwise(a)
