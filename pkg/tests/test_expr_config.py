import glob
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weakbound.config import parse_config, parse_config_text, serialize_config
from weakbound.errors import ConfigError
from weakbound.expr import parse_expression

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


@pytest.mark.parametrize(
    "src, expected",
    [
        ("1 + 2 * 3", 7.0),
        ("(1 + 2) * 3", 9.0),
        ("2 ^ 3 ^ 2", 512.0),
        ("-2 ^ 2", -4.0),
        ("2 ^ -1", 0.5),
        ("8 / 4 / 2", 1.0),
        ("1 - 2 - 3", -4.0),
        ("--3", 3.0),
        ("1.5e1 + .5", 15.5),
        ("cos(pi)", -1.0),
        ("abs(-3) + exp(0) + sin(0)", 4.0),
    ],
)
def test_grammar_and_precedence(src, expected):
    assert float(parse_expression(src)(x=np.array(0.0))) == pytest.approx(expected, rel=1e-15)


def test_variables_are_vectorised():
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(parse_expression("x^2 + 1")(x=x), x**2 + 1)
    f = parse_expression("x * y", ("x", "y"))
    np.testing.assert_allclose(f(x=x, y=2 * x), 2 * x * x)
    # constant expressions broadcast to the grid
    assert parse_expression("3")(x=x).shape == x.shape


@pytest.mark.parametrize(
    "src, message",
    [
        ("1 +", "column 4"),
        ("q", "unknown name 'q' at column 1"),
        ("x + y", "unknown name 'y' at column 5"),
        ("(1 + x", "column 7"),
        ("1 $ 2", "column 3"),
        ("cos x", "column 5"),
        ("foo(x)", "column 1"),
        ("", "empty expression"),
        ("1 2", "column 3"),
    ],
)
def test_expression_errors_carry_column(src, message):
    with pytest.raises(ConfigError, match=message):
        parse_expression(src)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0.1, 10))
def test_expression_matches_python(a, b, c):
    src = f"{a!r} * x + {b!r} / {c!r} - x ^ 2"
    x = np.linspace(-2, 2, 7)
    np.testing.assert_allclose(parse_expression(src)(x=x), a * x + b / c - x**2, rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(CONFIGS, "*.toml"))))
def test_shipped_configs_parse_and_round_trip(path):
    cfg = parse_config(path)
    assert cfg.potential is not None
    text = serialize_config(cfg)
    again = parse_config_text(text, cfg.base_dir)
    assert serialize_config(again) == text
    assert again.alphas == cfg.alphas


def test_geometric_alpha_range():
    cfg = parse_config_text('kind = "interval"\npotential = "x"\nalpha_start = -0.1\nalpha_ratio = 0.5\nalpha_count = 3\n')
    assert cfg.alphas == (-0.1, -0.05, -0.025)
    assert cfg.get("n") == 2001
    assert cfg.tolerance == 0.05


@given(
    st.lists(st.floats(-1.0, -1e-8, allow_nan=False), min_size=1, max_size=6, unique=True),
    st.integers(3, 5000),
    st.floats(1e-4, 0.5),
)
def test_serialize_is_a_fixed_point(alphas, n, tol):
    text = f'kind = "interval"\nn = {n}\npotential = "1 + x"\nalphas = {alphas!r}\ntolerance = {tol!r}\n'
    once = serialize_config(parse_config_text(text))
    assert serialize_config(parse_config_text(once)) == once
    assert list(parse_config_text(once).alphas) == alphas


@pytest.mark.parametrize(
    "text, message",
    [
        ('kind = "interval"\npotential = "x"\nalphas = [-0.1]\nnx = 4\n', r"<config>:4:1: unknown key 'nx'"),
        ('kind = "disk"\n', r"<config>:1:1: kind must be one of"),
        ('potential = "x"\n', "missing required key 'kind'"),
        ('kind = "interval"\nalphas = [-0.1]\n', "missing 'potential'"),
        ('kind = "interval"\npotential = "x"\n', "missing 'alphas'"),
        ('kind = "interval"\npotential = "x"\nalphas = [0.1]\n', r"<config>:3:1: alphas must be negative"),
        ('kind = "interval"\npotential = "x"\nalphas = [-0.1, -0.1]\n', "distinct"),
        ('kind = "interval"\npotential = "x"\n  n = 2\nalphas = [-0.1]\n', r"<config>:3:3: 'n' = 2 outside"),
        ('kind = "interval"\npotential = "x - 2"\nalphas = [-0.1]\n', r"<config>:2:1: .*node 0"),
        ('kind = "interval"\npotential = "x +"\nalphas = [-0.1]\n', r"<config>:2:1: .*column 4"),
        ('kind = "interval"\npotential = "x"\nalphas = [-0.1]\nformat = "xml"\n', "format must be"),
        ('kind = "interval"\npotential = "x"\nalphas = "a"\n', "non-empty list"),
        ('kind = "interval"\npotential = "x"\nalphas = [-0.1]\nalpha_count = 3\n', "not both"),
        ('kind = "interval"\npotential = "x"\nalpha_start = -0.1\n', "needs alpha_start"),
        ('kind = "interval"\npotential = "x"\nalpha_start = -0.1\nalpha_ratio = 2\nalpha_count = 3\n', "(0, 1)"),
        ('kind = "halfline"\npotential = "x"\nalphas = [-0.1]\nL = 10\n', "at least 50"),
        ('kind = "rectangle"\npotential = "x"\nalphas = [-0.1]\nmethod = "qr"\n', "method must be"),
        ('kind = "graph"\nalphas = [-0.1]\n', "needs a 'graph' file"),
        ('kind = "graph"\ngraph = "nope.txt"\nalphas = [-0.1]\n', "graph file not found"),
        ('kind = "interval"\npotential = "v.csv"\nalphas = [-0.1]\n', "not found"),
        ("kind = \n", "<config>"),
    ],
)
def test_config_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config_text(text)


def test_csv_potential(tmp_path):
    (tmp_path / "v.csv").write_text("# x, v\n0, 1\n1, 3\n")
    (tmp_path / "c.toml").write_text('kind = "interval"\nn = 5\npotential = "v.csv"\nalphas = [-0.1]\n')
    cfg = parse_config(str(tmp_path / "c.toml"))
    np.testing.assert_allclose(cfg.potential.v, [1, 1.5, 2, 2.5, 3])


def test_graph_config_without_potential(tmp_path):
    (tmp_path / "g.txt").write_text("vertices 2\nedge 0 1 1.0\n")
    (tmp_path / "c.toml").write_text('kind = "graph"\ngraph = "g.txt"\nalphas = [-0.1]\n')
    with pytest.raises(ConfigError, match="no potential"):
        parse_config(str(tmp_path / "c.toml"))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="No such file"):
        parse_config(str(tmp_path / "absent.toml"))
