import json
from fractions import Fraction
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoa.algebra import OperatorPoly
from hoa.dsl import BUILTIN_NAMES, SystemDef, builtin, parse_operator, parse_system, render_system
from hoa.errors import DslError, HoaError, NonHermitianError, UndeclaredModeError

SIX = "mode A coherent(alpha); mode B vacuum; mode C vacuum; H = g*Ad^2*B^3*C + hc"


def test_six_wave_source_matches_builtin():
    parsed = parse_system(SIX)
    assert parsed.same_physics(builtin("six_wave"))
    assert parse_system("system six_wave;\n" + SIX) == builtin("six_wave")


def test_shg_source_with_relabelled_modes():
    parsed = parse_system("mode A coherent(alpha); mode B vacuum; H = g*Ad^2*B + hc")
    shg = builtin("shg")
    assert parsed.labels == ["A", "B"]
    assert parsed.same_physics(shg)
    # written with an explicit hbar, which is set to one
    assert parse_system("mode a1 coherent(alpha); mode a2 vacuum; H = hbar*g*(a2d*a1^2 + a1d^2*a2)").h_int == shg.h_int


def test_undeclared_mode():
    with pytest.raises(UndeclaredModeError) as err:
        parse_system("H = g*Ad*A")
    assert err.value.line == 1 and err.value.column == 7


def test_missing_hc_is_rejected():
    with pytest.raises(NonHermitianError):
        parse_system("mode A coherent(alpha); mode B vacuum; mode C vacuum; H = g*Ad^2*B^3*C")


def test_explicit_conjugates_are_accepted():
    sys = parse_system("mode A vacuum; mode B vacuum; H = i*g*Ad*B - i*g*A*Bd")
    assert sys.is_hermitian()


@pytest.mark.parametrize(
    "src, fragment",
    [
        ("mode A vacuum; H = g*(Ad + A", "expected ')'"),
        ("mode A vacuum; H = g*A^99 + hc", "exponent 99"),
        ("mode A vacuum; H = g*A^x", "exponent must be"),
        ("mode A vacuum; H = g*t*Ad*A", "time symbol"),
        ("mode A vacuum; H = hc", "'hc' must follow"),
        ("mode A vacuum; H = g*A + hc + hc", "only once"),
        ("mode A vacuum; mode A vacuum; H = 0", "declared twice"),
        ("mode A vacuum; mode Ad vacuum; H = 0", "collides"),
        ("mode A coherent(a); mode B coherent(b); H = 0", "only one mode"),
        ("mode A vacuum; H = Ad*A / A", "numeric constant"),
        ("mode A vacuum; H = Ad*A / 0", "division by zero"),
        ("mode A vacuum", "no Hamiltonian"),
        ("mode A vacuum; H = $", "unexpected character"),
        ("mode A vacuum; H = Ad*A; H = Ad*A", "twice"),
    ],
)
def test_positioned_errors(src, fragment):
    with pytest.raises(DslError) as err:
        parse_system(src)
    assert fragment in str(err.value)


def test_error_positions_span_lines():
    with pytest.raises(DslError) as err:
        parse_system("mode A vacuum;\nmode B vacuum;\nH = g*Ad*Q + hc")
    assert (err.value.line, err.value.column) == (3, 10)


def test_symbols_rationals_and_comments():
    src = """
    # two couplings
    symbol kappa;
    mode A coherent(beta) freq wa;
    mode B vacuum;
    H = 3/2*g*Ad*B + kappa*(Ad^2*B^2) + hc
    """
    sys = parse_system(src)
    assert sys.parameters == ["g", "kappa"]
    assert sys.frequencies == {"A": "wa", "B": "w2"}
    assert sys.initial[0].amplitude == "beta"
    assert sys.h_int.coefficient({0: (1, 0), 1: (0, 1)}, {"g": 1}) == Fraction(3, 2)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtins_are_hermitian_and_round_trip(name):
    sys = builtin(name)
    assert sys.is_hermitian()
    assert parse_system(render_system(sys)) == sys
    assert SystemDef.from_json(json.loads(sys.dumps())) == sys


def test_builtin_shapes():
    six = builtin("six_wave")
    assert len(six.modes) == 3 and len(six.h_int) == 2
    assert six.h_int == parse_operator("g*(Ad^2*B^3*C + A^2*Bd^3*Cd)", ["A", "B", "C"])
    shg = builtin("shg")
    assert len(shg.modes) == 2
    assert shg.h_int == parse_operator("g*(A2d*A1^2 + A1d^2*A2)", ["A1", "A2"])
    assert shg.pump_mode == 0
    with pytest.raises(HoaError):
        builtin("eight_wave")


def _random_program(rng: random.Random) -> str:
    n = rng.randint(1, 3)
    labels = rng.sample(["A", "B", "C", "a1", "a2", "X"], n)
    decl = []
    for k, lab in enumerate(labels):
        decl.append(f"mode {lab} {'coherent(alpha)' if k == 0 else 'vacuum'};")
    terms = []
    for _ in range(rng.randint(1, 3)):
        factors = []
        num = rng.randint(1, 5)
        den = rng.randint(1, 3)
        factors.append(f"{num}/{den}" if den > 1 else str(num))
        if rng.random() < 0.4:
            factors.append("i")
        factors.append("g" if rng.random() < 0.8 else "kappa")
        for lab in labels:
            c, a = rng.randint(0, 2), rng.randint(0, 2)
            if c:
                factors.append(f"{lab}d^{c}")
            if a:
                factors.append(f"{lab}^{a}")
        terms.append("*".join(factors))
    body = " + ".join(terms) + " + hc"
    return "symbol kappa;\n" + "\n".join(decl) + f"\nH = {body}"


def test_round_trip_random_programs():
    rng = random.Random(20240611)
    for _ in range(50):
        src = _random_program(rng)
        sys = parse_system(src)
        assert parse_system(render_system(sys)) == sys, src


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=80))
def test_parser_never_crashes_on_bytes(data):
    try:
        parse_system(data)
    except DslError:
        pass


tokens = st.sampled_from(
    ["mode", "A", "B", "Ad", "Bd", "vacuum", "coherent", "(", ")", "alpha", ";", "H", "=", "g", "*", "+", "-",
     "^", "2", "/", "hc", "i", "t", "symbol", ",", "k", "\n"]
)


@settings(max_examples=300, deadline=None)
@given(st.lists(tokens, max_size=30))
def test_parser_never_crashes_on_token_soup(toks):
    try:
        parse_system(" ".join(toks))
    except DslError:
        pass
