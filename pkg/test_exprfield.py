"""
Tests for expression fields: parsing, symbolic derivatives, evaluation
"""
import math

import numpy as np
import pytest

from app.exceptions import CatalogError, ExpressionSyntaxError, UnknownIdentifierError
from app.models import BallDomain
from app.services.exprfield import (
    evaluate,
    load_field_file,
    parse_expression,
    parse_field,
    simplify,
    symbolic_derivative,
    to_source,
)
from app.services.fields import catalog_lookup

DEGENERATE_ABC = "sin(z) - cos(y), cos(z), -sin(y)"


def value_at(tree, x=0.0, y=0.0, z=0.0) -> float:
    env = {"x": np.asarray(x), "y": np.asarray(y), "z": np.asarray(z)}
    return float(evaluate(tree, env))


def test_precedence_and_associativity():
    assert value_at(parse_expression("2^3^2")) == 512.0
    assert value_at(parse_expression("-x^2"), x=3.0) == -9.0
    assert value_at(parse_expression("8 / 4 / 2")) == 1.0
    assert value_at(parse_expression("1 - 2 - 3")) == -4.0
    assert value_at(parse_expression("2 * pi")) == pytest.approx(2.0 * math.pi)
    assert value_at(parse_expression("log(e)")) == pytest.approx(1.0)


def test_syntax_errors_carry_offsets():
    with pytest.raises(ExpressionSyntaxError) as excinfo:
        parse_expression("sin(x")
    assert excinfo.value.offset == 5
    assert "offset 5" in str(excinfo.value)

    with pytest.raises(UnknownIdentifierError) as excinfo:
        parse_expression("x + foo")
    assert excinfo.value.offset == 4

    with pytest.raises(ExpressionSyntaxError) as excinfo:
        parse_expression("x $ y")
    assert excinfo.value.offset == 2

    with pytest.raises(ExpressionSyntaxError):
        parse_field("x, y")


def test_symbolic_derivative_matches_calculus():
    tree = parse_expression("x * sin(x) + y^3 + exp(2*z)")
    dx = symbolic_derivative(tree, "x")
    dy = symbolic_derivative(tree, "y")
    dz = symbolic_derivative(tree, "z")
    assert value_at(dx, x=0.7) == pytest.approx(math.sin(0.7) + 0.7 * math.cos(0.7))
    assert value_at(dy, y=2.0) == pytest.approx(12.0)
    assert value_at(dz, z=0.5) == pytest.approx(2.0 * math.exp(1.0))
    # constants vanish
    assert to_source(symbolic_derivative(parse_expression("y^3"), "x")) == "0.0"


def test_simplify_folds_constants():
    assert to_source(simplify(parse_expression("0 * x + 1 * y"))) == "y"
    assert value_at(simplify(parse_expression("2 + 3"))) == 5.0


@pytest.mark.parametrize(
    "source",
    [
        "2^3^2 - x",
        "-(x - y) * z / (y / z)",
        "(x - y) - (z - 1)",
        "(-x)^2 + -x^2",
        "exp(sin(x)^2) / sqrt(1 + y^2) - log(z)",
        "x^y * cos(pi * z)",
    ],
)
def test_printed_source_reparses_to_equal_values(source):
    rng = np.random.default_rng(21)
    x, y, z = rng.uniform(0.5, 2.0, size=(3, 100))
    for tree in (parse_expression(source), symbolic_derivative(parse_expression(source), "x")):
        again = parse_expression(to_source(tree))
        expected = np.broadcast_to(evaluate(tree, {"x": x, "y": y, "z": z}), x.shape)
        assert np.allclose(evaluate(again, {"x": x, "y": y, "z": z}), expected, rtol=1e-12, atol=1e-12)


def test_power_with_variable_exponent_uses_log():
    dy = symbolic_derivative(parse_expression("x^y"), "y")
    assert "log" in to_source(dy)
    assert value_at(dy, x=2.0, y=3.0) == pytest.approx(8.0 * math.log(2.0))


def test_expression_abc_is_beltrami():
    field = parse_field(DEGENERATE_ABC)
    rng = np.random.default_rng(2)
    points = rng.uniform(0, 2 * math.pi, size=(40, 3))
    reference = catalog_lookup("abc:1,0,-1")
    assert np.allclose(field.eval(points), reference.eval(points), atol=1e-14)
    assert np.allclose(field.curl(points), field.eval(points), atol=1e-14)
    assert np.allclose(field.divergence(points), 0.0, atol=1e-14)
    assert np.allclose(field.lambda_at(points[field.eval(points).any(axis=1)]), 1.0)


def test_partials_are_cached_and_capped():
    field = parse_field(DEGENERATE_ABC)
    p = np.array([0.1, 0.2, 0.3])
    assert np.allclose(field.partial((0, 0, 2), p), [-math.sin(0.3), -math.cos(0.3), 0.0])
    assert field.derivative_tree(0, (0, 0, 2)) is field.derivative_tree(0, (0, 0, 2))
    assert field.partial((0, 0, 7), p) is None


def test_ball_tangency_check():
    rotation = parse_field("-y, x, 0", BallDomain(radius=1.0))
    radial = parse_field("x, y, z", BallDomain(radius=1.0))
    assert rotation.tangent_to_boundary
    assert not radial.tangent_to_boundary


def test_load_field_file(tmp_path):
    path = tmp_path / "abc.txt"
    path.write_text("# degenerate ABC\nsin(z) - cos(y)\ncos(z)\n-sin(y)\n", encoding="utf-8")
    field = load_field_file(str(path))
    assert field.name == f"expr:{path}"
    assert np.allclose(field.eval([0.0, 0.0, 0.0]), [-1.0, 1.0, 0.0])

    via_catalog = catalog_lookup(f"expr:{path}")
    assert np.allclose(via_catalog.eval([1.0, 2.0, 3.0]), field.eval([1.0, 2.0, 3.0]))


def test_load_field_file_errors(tmp_path):
    with pytest.raises(CatalogError):
        load_field_file(str(tmp_path / "missing.txt"))
    path = tmp_path / "two.txt"
    path.write_text("x\ny\n", encoding="utf-8")
    with pytest.raises(ExpressionSyntaxError):
        load_field_file(str(path))
