"""Coefficient functions, hypothesis validation and presets."""

import numpy as np
import pytest

from fpflow import (
    CoefficientFn,
    ModelSpec,
    b_star,
    b_star_deriv,
    get_preset,
    linear_ou,
    soft_confinement,
    spec_from_config,
    validate_hypotheses,
)


def test_b_star_zero(ou_spec):
    assert b_star(ou_spec, 0.0) == 0.0


def test_b_star_unit_mobility(ou_spec):
    # b identically 1, so b*(r) = r
    assert b_star(ou_spec, 2.0) == pytest.approx(2.0, abs=0)


def test_b_star_soft_mobility(soft_spec):
    # b(1) = 1 + e^{-1}
    expected = 1.0 + np.exp(-1.0)
    assert b_star(soft_spec, 1.0) == pytest.approx(expected, rel=1e-14)


def test_b_star_rejects_nonfinite(ou_spec):
    with pytest.raises(ValueError):
        b_star(ou_spec, np.nan)
    with pytest.raises(ValueError):
        b_star_deriv(ou_spec, np.inf)


def test_b_star_deriv_matches_finite_differences(preset_spec, rng):
    r = rng.uniform(-8.0, 8.0, size=100)
    eps = 1e-6
    fd = (b_star(preset_spec, r + eps) - b_star(preset_spec, r - eps)) / (2 * eps)
    analytic = b_star_deriv(preset_spec, r)
    assert np.allclose(analytic, fd, rtol=1e-6, atol=1e-8)


def test_validate_linear_ou_passes_with_drift_note(ou_spec):
    report = validate_hypotheses(ou_spec, sample_range=(-10.0, 10.0))
    assert report.passed
    assert any("override" in note for note in report.notes)


def test_validate_soft_confinement_passes(soft_spec):
    report = validate_hypotheses(soft_spec)
    assert report.passed
    # drift magnitude |x| / sqrt(1 + x^2) < 1 everywhere
    x = np.linspace(-50, 50, 501)[:, None]
    assert np.all(np.abs(soft_spec.drift(x)) <= 1.0)


def test_validate_presets_wide_range(preset_spec):
    report = validate_hypotheses(preset_spec, sample_range=(-50.0, 50.0),
                                 n_samples=10_000)
    assert report.passed


def test_validate_catches_degenerate_slope(ou_spec):
    bad = ModelSpec(
        beta=CoefficientFn(eval=lambda r: r * r, deriv=lambda r: 2.0 * r),
        b=ou_spec.b,
        potential=ou_spec.potential,
        gamma1=0.5,
        gamma2=3.0,
        b0=1.0,
        gamma3=1.0,
        drift_override=ou_spec.drift_override,
    )
    report = validate_hypotheses(bad, sample_range=(0.0, 1.0), n_samples=100)
    assert not report.passed
    assert any(h == "beta_slope" for h, _, _ in report.violations)


def test_validation_report_dict_shape(soft_spec):
    d = validate_hypotheses(soft_spec).to_dict()
    assert d["passed"] is True
    assert d["violations"] == []


def test_get_preset_roundtrip():
    assert get_preset("linear-ou").name == "linear-ou"
    assert get_preset("soft-confinement").name == "soft-confinement"
    with pytest.raises(KeyError):
        get_preset("no-such-preset")


def test_preset_constants_documented():
    ou = linear_ou()
    assert (ou.gamma1, ou.gamma2, ou.b0, ou.gamma3) == (1.0, 1.0, 1.0, 1.0)
    assert ou.omega_bound == 0.0
    soft = soft_confinement()
    assert (soft.gamma1, soft.gamma2, soft.b0, soft.gamma3) == (2.0, 3.0, 1.0, 2.0)
    assert soft.omega_bound == 5.0
    for spec in (ou, soft):
        assert spec.lambda_max == 0.1


def test_spec_from_config_reproduces_soft_coefficients(soft_spec, rng):
    block = {
        "beta": {"poly": [0.0, 2.0], "terms": [{"kind": "arctan", "weight": 1.0}]},
        "b": {"poly": [1.0], "terms": [{"kind": "gauss", "weight": 1.0}]},
        "potential": {"kind": "soft"},
        "constants": {"gamma1": 2.0, "gamma2": 3.0, "b0": 1.0, "gamma3": 2.0},
    }
    spec = spec_from_config(block)
    r = rng.uniform(-5, 5, size=200)
    assert np.allclose(spec.beta(r), soft_spec.beta(r), rtol=1e-12)
    assert np.allclose(spec.beta.deriv(r), soft_spec.beta.deriv(r), rtol=1e-12)
    assert np.allclose(spec.b(r), soft_spec.b(r), rtol=1e-12)
    assert validate_hypotheses(spec).passed


def test_spec_from_config_rejects_unknown_terms():
    with pytest.raises(ValueError):
        spec_from_config({
            "beta": {"terms": [{"kind": "sinc"}]},
            "b": {"poly": [1.0]},
            "constants": {"gamma1": 1, "gamma2": 1, "b0": 1, "gamma3": 1},
        })
    with pytest.raises(ValueError):
        spec_from_config({
            "beta": {"poly": [0.0, 1.0]},
            "b": {"poly": [1.0]},
            "potential": {"kind": "hexagonal"},
            "constants": {"gamma1": 1, "gamma2": 1, "b0": 1, "gamma3": 1},
        })


def test_validate_hypotheses_preconditions(ou_spec):
    with pytest.raises(ValueError):
        validate_hypotheses(ou_spec, n_samples=1)
    with pytest.raises(ValueError):
        validate_hypotheses(ou_spec, sample_range=(1.0, 1.0))
