"""Tests for the model specification language."""

import numpy as np
import pandas as pd
import pytest

from levyhjmm.core.errors import ParseError
from levyhjmm.core.levy_models import LevyKind
from levyhjmm.core.quasi_exp import ExpPoly
from levyhjmm.core.spec_dsl import (
    ConstantPhi,
    SigmoidShortRatePhi,
    TabulatedCurve,
    format_spec,
    has_errors,
    parse,
    parse_bytes,
    parse_document,
    validate,
)

from .conftest import CORPUS, SPEC_DIR, spec_text

ALL_SPECS = CORPUS + ("vasicek_xexp", "sigmoid_cp")


def codes(diagnostics):
    return {d.code for d in diagnostics}


class TestParse:
    """Interpretation of well-formed documents."""

    def test_vasicek(self, load):
        spec = load("vasicek")
        assert spec.levy.kind == LevyKind.BROWNIAN
        assert spec.levy.c == 1.0
        assert spec.p == 1
        assert spec.terms[0].phi == ConstantPhi(value=1.0)
        assert spec.terms[0].lam == ExpPoly.exponential(0.2, 1.0)
        assert spec.initial_curve == ExpPoly.constant(0.03)
        assert spec.k_interval.as_tuple() == (-0.5, 0.5)

    def test_sigmoid(self, load):
        spec = load("sigmoid_cp")
        phi = spec.terms[0].phi
        assert isinstance(phi, SigmoidShortRatePhi)
        assert phi(np.array([-1.0, 0.0, 1.0])) == pytest.approx([0.2, 1.1, 2.0], abs=1e-6)
        assert spec.initial_curve.is_zero

    def test_sum_of_terms_and_comments(self):
        spec = parse(spec_text(lam="exp_poly(rho = 0.1, theta = 1.0)  # first\n + exp_poly(rho = 0.1, theta = 2.0)"))
        assert len(spec.terms[0].lam.terms) == 2

    def test_phi_defaults_to_constant_one(self):
        text = spec_text().replace("phi = constant(value = 1.0)", "")
        assert parse(text).terms[0].phi == ConstantPhi(value=1.0)

    def test_two_terms(self):
        text = spec_text().replace(
            "volatility {",
            "volatility {\n  term { lambda = exp_poly(rho = 0.1, theta = 3.0) }",
        )
        assert parse(text).p == 2

    def test_with_grid(self, load):
        spec = load("vasicek", x_max=10.0, n_grid=101)
        config = spec.curve_config()
        assert (config.x_max, config.n_grid) == (10.0, 101)
        assert spec.initial_forward_curve().values.shape == (101,)


class TestRoundTrip:
    """Printing then parsing gives back the same model."""

    @pytest.mark.parametrize("name", ALL_SPECS)
    def test_corpus(self, load, name):
        spec = load(name)
        text = format_spec(spec)
        again = parse(text)
        assert again == spec
        assert format_spec(again) == text

    def test_tabulated(self, tmp_path):
        xs = np.linspace(0.0, 30.0, 61)
        pd.DataFrame({"x": xs, "value": 0.5 * np.exp(-2.0 * xs)}).to_csv(tmp_path / "lam.csv", index=False)
        spec = parse(spec_text(lam='tabulated(file = "lam.csv")'), base_dir=tmp_path)
        assert isinstance(spec.terms[0].lam, TabulatedCurve)
        assert parse(format_spec(spec), base_dir=tmp_path) == spec

    def test_escaped_strings(self):
        doc = parse_document('note = "a \\"quoted\\" word\\n"')
        assert doc.items[0].value.value == 'a "quoted" word\n'


class TestParseErrors:
    """Positions and expected-token sets of syntax and value errors."""

    def test_missing_value(self):
        with pytest.raises(ParseError) as info:
            parse("version = 1\nlevy {\n  kind = brownian\n  b = \n}")
        assert (info.value.line, info.value.column) == (5, 1)
        assert info.value.expected == {"number", "string", "identifier"}
        assert str(info.value).startswith("5:1:")

    def test_missing_equals(self):
        with pytest.raises(ParseError) as info:
            parse("levy { kind brownian }")
        assert (info.value.line, info.value.column) == (1, 13)
        assert info.value.expected == {"'{'", "'='"}

    def test_unterminated_string(self):
        with pytest.raises(ParseError, match="unterminated string") as info:
            parse_document('x = "abc')
        assert info.value.column == 5

    def test_unexpected_character(self):
        with pytest.raises(ParseError) as info:
            parse_document("version = 1\n  @")
        assert (info.value.line, info.value.column) == (2, 3)

    def test_malformed_number(self):
        with pytest.raises(ParseError, match="malformed number"):
            parse_document("x = 1abc")

    def test_empty(self):
        with pytest.raises(ParseError, match="empty specification"):
            parse("# nothing here\n")

    def test_missing_block(self):
        text = spec_text().replace("space { beta = 0.5  beta_prime = 1.0  }", "")
        with pytest.raises(ParseError, match="missing required block 'space'"):
            parse(text)

    def test_unknown_block(self):
        with pytest.raises(ParseError, match="unknown block 'foo'") as info:
            parse(spec_text(extra="foo { }"))
        assert info.value.column == 1

    def test_key_not_for_kind(self):
        with pytest.raises(ParseError, match="does not apply to brownian") as info:
            parse(spec_text(levy="kind = brownian\n  intensity = 1.0"))
        assert info.value.line == 4

    def test_bad_levy_parameters(self):
        with pytest.raises(ParseError):
            parse(spec_text(levy="kind = compound_poisson  intensity = 1.0  jumps = exponential(rate = -1.0)"))

    def test_unsupported_version(self):
        with pytest.raises(ParseError, match="unsupported version"):
            parse(spec_text().replace("version = 1", "version = 2"))

    def test_bad_k_interval(self):
        with pytest.raises(ParseError, match="interior"):
            parse(spec_text(extra="k_interval { lo = 0.1  hi = 0.5 }"))

    def test_invalid_utf8(self):
        with pytest.raises(ParseError, match="UTF-8") as info:
            parse_bytes(b"version = 1\n\xff")
        assert (info.value.line, info.value.column) == (2, 1)

    def test_deep_nesting(self):
        text = "x = " + "f(a = " * 40 + "1" + ")" * 40
        with pytest.raises(ParseError, match="nested deeper"):
            parse_document(text)

    def test_missing_table(self, tmp_path):
        with pytest.raises(ParseError, match="cannot read curve table"):
            parse(spec_text(lam='tabulated(file = "nope.csv")'), base_dir=tmp_path)


class TestFuzz:
    """Mutated inputs either parse or fail with a positioned ParseError."""

    def test_mutations(self):
        rng = np.random.default_rng(99)
        sources = [(SPEC_DIR / f"{name}.spec").read_bytes() for name in ALL_SPECS]
        for _ in range(2000):
            data = bytearray(sources[rng.integers(len(sources))])
            for _ in range(rng.integers(1, 4)):
                i = int(rng.integers(len(data)))
                action = rng.integers(3)
                if action == 0:
                    del data[i]
                elif action == 1:
                    data.insert(i, int(rng.integers(256)))
                else:
                    data[i] = int(rng.integers(256))
            try:
                parse_bytes(bytes(data), base_dir=SPEC_DIR)
            except ParseError as e:
                assert e.line >= 1
                assert e.column >= 1

    def test_random_bytes(self):
        rng = np.random.default_rng(100)
        for _ in range(500):
            data = rng.integers(0, 256, size=int(rng.integers(0, 64)), dtype=np.uint8).tobytes()
            with pytest.raises(ParseError):
                parse_bytes(data)

    @pytest.mark.slow
    def test_many_random_bytes(self):
        rng = np.random.default_rng(101)
        for _ in range(100_000):
            data = rng.integers(0, 256, size=int(rng.integers(0, 128)), dtype=np.uint8).tobytes()
            with pytest.raises(ParseError) as excinfo:
                parse_bytes(data)
            assert excinfo.value.line >= 1


class TestValidate:
    """Admissibility diagnostics."""

    @pytest.mark.parametrize("name", ALL_SPECS)
    def test_corpus_is_valid(self, load, name):
        assert not has_errors(validate(load(name)))

    def test_sigmoid_reports_lipschitz(self, load):
        assert "phi_lipschitz" in codes(validate(load("sigmoid_cp")))

    def test_slow_decay(self):
        # rate exactly beta_prime / 4
        diagnostics = validate(parse(spec_text(lam="exp_poly(rho = 0.01, theta = 0.25)")))
        assert "not_in_H0" in codes(diagnostics)
        assert has_errors(diagnostics)

    def test_no_decay(self):
        assert "no_decay" in codes(validate(parse(spec_text(lam="exp_poly(rho = 0.01)"))))

    def test_k_outside_domain(self):
        levy = "kind = compound_poisson  intensity = 1.0  jumps = exponential(rate = 5.0)"
        spec = parse(spec_text(levy=levy, extra="k_interval { lo = -1.0  hi = 6.0 }"))
        assert "k_outside_domain" in codes(validate(spec))

    def test_volatility_exits_k(self):
        spec = parse(spec_text(lam="exp_poly(rho = 2.0, theta = 1.0)"))
        assert "volatility_exits_k" in codes(validate(spec))

    def test_space_ordering(self):
        text = spec_text().replace("beta = 0.5  beta_prime = 1.0", "beta = 1.0  beta_prime = 0.5")
        assert codes(validate(parse(text))) == {"space_ordering"}

    def test_tabulated_decaying(self, tmp_path):
        xs = np.linspace(0.0, 40.0, 401)
        pd.DataFrame({"x": xs, "value": 0.5 * np.exp(-2.0 * xs)}).to_csv(tmp_path / "lam.csv", index=False)
        spec = parse(spec_text(lam='tabulated(file = "lam.csv")'), base_dir=tmp_path)
        diagnostics = validate(spec)
        assert codes(diagnostics) == {"unverifiable_beyond_grid"}
        assert not has_errors(diagnostics)

    def test_tabulated_flat(self, tmp_path):
        pd.DataFrame({"x": [0.0, 40.0], "value": [0.1, 0.1]}).to_csv(tmp_path / "lam.csv", index=False)
        spec = parse(spec_text(lam='tabulated(file = "lam.csv")'), base_dir=tmp_path)
        assert "not_in_H0" in codes(validate(spec))
