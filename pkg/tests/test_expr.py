import math

import pytest
from hypothesis import given, strategies as st

from i4sim import expr as ex
from i4sim.errors import (
    DivisionByZeroError,
    ExpressionSyntaxError,
    UnboundIdentifierError,
    UnknownFunctionError,
)


def ev(source, env=None, t=0.0, tables=None):
    return ex.evaluate(ex.parse_expr(source), env or {}, t, tables)


class TestParsing:
    def test_precedence(self):
        assert ev("2 + 3 * 4") == 14.0
        assert ev("(2 + 3) * 4") == 20.0
        assert ev("2 - 3 - 4") == -5.0
        assert ev("16 / 4 / 2") == 2.0

    def test_unary_minus(self):
        assert ev("-3") == -3.0
        assert ev("--3") == 3.0
        assert ev("2 * -3") == -6.0

    def test_scientific_literals(self):
        assert ev("1e3") == 1000.0
        assert ev("2.5e-2") == 0.025
        assert ev(".5") == 0.5

    def test_min_max_variadic(self):
        assert ev("min(3, 5)") == 3.0
        assert ev("max(1, 2, 3, 4)") == 4.0

    def test_call_tree_shape(self):
        tree = ex.parse_expr("min(a, b)")
        assert isinstance(tree, ex.Call)
        assert tree.func == "min"
        assert tree.args == [ex.Ident("a"), ex.Ident("b")]

    def test_syntax_error_position(self):
        with pytest.raises(ExpressionSyntaxError) as e:
            ex.parse_expr("1 + + 2")
        assert e.value.line == 1
        assert e.value.col == 5

    def test_unknown_function(self):
        with pytest.raises(UnknownFunctionError):
            ex.parse_expr("sin(1)")

    def test_arity_errors(self):
        with pytest.raises(ExpressionSyntaxError):
            ex.parse_expr("min(1)")
        with pytest.raises(ExpressionSyntaxError):
            ex.parse_expr("clamp(1, 2)")

    def test_unbalanced_paren(self):
        with pytest.raises(ExpressionSyntaxError):
            ex.parse_expr("(1 + 2")

    def test_bad_token(self):
        with pytest.raises(ExpressionSyntaxError):
            ex.parse_expr("1 $ 2")


class TestEvaluation:
    def test_identifier_env(self):
        assert ev("a + b", {"a": 1.0, "b": 2.0}) == 3.0

    def test_time_symbol(self):
        assert ev("time * 2", t=3.0) == 6.0

    def test_unbound(self):
        with pytest.raises(UnboundIdentifierError):
            ev("missing")

    def test_zero_over_zero_guard(self):
        assert ev("0 / 0") == 0.0
        assert ev("a / b", {"a": 0.0, "b": 0.0}) == 0.0

    def test_nonzero_over_zero_raises(self):
        with pytest.raises(DivisionByZeroError):
            ev("1 / 0")

    def test_clamp(self):
        assert ev("clamp(5, 0, 1)") == 1.0
        assert ev("clamp(-1, 0, 1)") == 0.0
        # liquidity-factor boundary: cash at reserve gives 0
        assert ev("clamp((c - r) / b, 0, 1)", {"c": 7.0, "r": 7.0, "b": 2.0}) == 0.0

    def test_if_positive(self):
        assert ev("if_positive(1, 10, 20)") == 10.0
        assert ev("if_positive(0, 10, 20)") == 20.0
        assert ev("if_positive(-1, 10, 20)") == 20.0

    def test_step_at_strictly_after(self):
        assert ev("step_at(2, 5)", t=2.0) == 0.0
        assert ev("step_at(2, 5)", t=2.0001) == 5.0

    def test_pulse_window(self):
        src = "pulse(1, 2, 7)"
        assert ev(src, t=1.0) == 0.0
        assert ev(src, t=1.5) == 7.0
        assert ev(src, t=3.0) == 7.0
        assert ev(src, t=3.5) == 0.0

    def test_lookup_interpolates_and_clamps(self):
        tables = {"tbl": [(0.0, 0.0), (1.0, 10.0), (2.0, 10.0)]}
        assert ev("lookup(tbl, 0.5)", tables=tables) == 5.0
        assert ev("lookup(tbl, -3)", tables=tables) == 0.0
        assert ev("lookup(tbl, 9)", tables=tables) == 10.0

    def test_smooth_without_state_passes_input(self):
        # outside the engine, smooth has no bound state and is transparent
        assert ev("smooth(4, 2)") == 4.0


class TestPrinting:
    CASES = [
        "a + b * c",
        "(a + b) * c",
        "a - (b - c)",
        "a / (b / c)",
        "-a * b",
        "min(a, b, clamp(x, 0, 1))",
        "smooth(step_at(0, 1), 2)",
        "a - -b",
    ]

    @pytest.mark.parametrize("source", CASES)
    def test_round_trip_fixed_point(self, source):
        tree = ex.parse_expr(source)
        printed = ex.to_source(tree)
        assert ex.parse_expr(printed) == tree
        # canonical: printing is a fixed point
        assert ex.to_source(ex.parse_expr(printed)) == printed

    @given(st.recursive(
        st.one_of(
            st.floats(min_value=0, max_value=1e6, allow_nan=False).map(ex.Num),
            st.sampled_from(["a", "b", "c", "time"]).map(ex.Ident),
        ),
        lambda children: st.one_of(
            st.tuples(st.sampled_from("+-*/"), children, children).map(
                lambda t: ex.Binary(t[0], t[1], t[2])
            ),
            children.map(ex.Unary),
            st.tuples(children, children).map(lambda t: ex.Call("min", list(t))),
        ),
        max_leaves=12,
    ))
    def test_round_trip_arbitrary_trees(self, tree):
        assert ex.parse_expr(ex.to_source(tree)) == tree


class TestCompiled:
    ENV = {"a": 3.7, "b": -1.2, "c": 0.0031}
    CASES = [
        "a + b * c - a / b",
        "min(a, b, c) + max(a, b)",
        "clamp(a * b, -1, 1)",
        "if_positive(b, a, c)",
        "step_at(1, a) + pulse(0.5, 1, b)",
        "-a / (b + c)",
    ]

    @pytest.mark.parametrize("source", CASES)
    def test_bit_identical_to_tree_walk(self, source):
        tree = ex.parse_expr(source)
        fn = ex.compile_expr(tree)
        for t in (0.0, 0.7, 1.25, 2.0):
            walked = ex.evaluate(tree, dict(self.ENV), t)
            compiled = fn(dict(self.ENV), t)
            assert compiled == walked  # bitwise, not approx

    def test_compiled_division_guard(self):
        fn = ex.compile_expr(ex.parse_expr("a / b"))
        assert fn({"a": 0.0, "b": 0.0}, 0.0) == 0.0
        with pytest.raises(DivisionByZeroError):
            fn({"a": 1.0, "b": 0.0}, 0.0)

    @given(st.floats(min_value=-100, max_value=100, allow_nan=False),
           st.floats(min_value=-100, max_value=100, allow_nan=False))
    def test_property_bit_identity(self, a, b):
        tree = ex.parse_expr("a * b + a - b + min(a, b) * max(a, b)")
        fn = ex.compile_expr(tree)
        env = {"a": a, "b": b}
        assert fn(dict(env), 0.0) == ex.evaluate(tree, dict(env), 0.0)


class TestAnalysis:
    def test_identifiers_excludes_time(self):
        assert ex.identifiers(ex.parse_expr("a + time * b")) == {"a", "b"}

    def test_lookup_table_not_an_identifier(self):
        tree = ex.parse_expr("lookup(tbl, x)")
        assert ex.identifiers(tree) == {"x"}
        assert ex.referenced_tables(tree) == {"tbl"}

    def test_smooth_calls_in_post_order(self):
        tree = ex.parse_expr("smooth(smooth(x, 2), 3)")
        calls = ex.smooth_calls(tree)
        assert len(calls) == 2
        # inner first: its tau is the literal 2
        assert calls[0].args[1] == ex.Num(2)
