"""Model catalogue: evaluator algebra, contracts, descriptor round trips.

Expected values are computed by hand from each model's defining formula, so
the catalogue code cannot agree with this file by accident.
"""

import math

import numpy as np
import pytest

from paralyap import models
from paralyap.models import (
    BoundaryCondition,
    McfPoly,
    PorousMedium,
    RhoLaplacianPoly,
    SampleBox,
    from_descriptor,
    instantiate,
    validate_spec,
)


def _builtin_roster():
    """Every builtin with a sampling box where its evaluators are regular."""
    return [
        (from_descriptor({"model": "heat"}), SampleBox()),
        (from_descriptor({"model": "rho_laplacian_poly", "rho": 3.0, "n": 1.0}), SampleBox()),
        (from_descriptor({"model": "rho_laplacian_poly", "rho": 3.0, "n": 2.0}), SampleBox()),
        (from_descriptor({"model": "mcf_poly", "n": 1.0}), SampleBox()),
        (from_descriptor({"model": "mcf_poly", "n": 2.0}), SampleBox()),
        (from_descriptor({"model": "inverse_mcf"}), SampleBox()),
        (from_descriptor({"model": "porous_medium", "m": 2.0}), SampleBox(u=(0.2, 1.0))),
        (from_descriptor({"model": "rho_laplacian_pure", "rho": 3.0}), SampleBox()),
        (from_descriptor({"model": "mcf_pure"}), SampleBox()),
        (
            from_descriptor({"model": "quasilinear_gradient",
                             "a": {"kind": "mcf"}, "h": {"kind": "linear", "slope": -1.0}}),
            SampleBox(),
        ),
        (
            from_descriptor({"model": "filtration", "a": {"kind": "power", "exponent": 3.0}}),
            SampleBox(u=(0.2, 1.0)),
        ),
    ]


def test_every_builtin_satisfies_the_pointwise_contracts():
    for spec, box in _builtin_roster():
        report = validate_spec(spec, box=box, n_samples=500, seed=3)
        assert report.passed, f"{spec.name}: {report.counts} {report.violations[:2]}"
        assert report.max_consistency_residual <= 1e-10


def test_rho_poly_evaluators():
    spec = from_descriptor({"model": "rho_laplacian_poly", "rho": 3.0, "n": 1.0})
    # diffusion (rho-1)|p|^(rho-2) = 2|p|; reaction carries -u_x^n moved left.
    assert spec.diffusion_coeff(0.3, 0.5, -2.0) == pytest.approx(4.0)
    assert spec.reaction(0.0, 0.0, 0.7) == pytest.approx(-0.7)
    # resolved evolution: ut = 2|p| q + p^n
    assert spec.rhs(0.0, 0.0, -2.0, 1.5) == pytest.approx(4.0 * 1.5 - 2.0)


def test_inverse_curvature_evaluators():
    spec = from_descriptor({"model": "inverse_mcf"})
    # ut = (1+p^2)^2 / (1+p^2-q): at p=1, q=0.5 that is 4 / 1.5.
    assert spec.rhs(0.0, 0.0, 1.0, 0.5) == pytest.approx(4.0 / 1.5)
    assert spec.diffusion_coeff(0.0, 0.0, 1.0) == pytest.approx(1.0)
    assert spec.reaction(0.0, 0.0, 1.0) == pytest.approx(-2.0)
    # the time-carrying part reproduces diffusion*q - reaction exactly
    ut = spec.rhs(0.0, 0.0, 1.0, 0.5)
    assert spec.f1_weight(0.0, 0.0, 1.0, 0.5, ut) == pytest.approx(1.0 * 0.5 + 2.0)


def test_porous_medium_evaluators():
    spec = from_descriptor({"model": "porous_medium", "m": 2.0})
    # (u^2)_xx = 2u u_xx + 2 u_x^2
    assert spec.diffusion_coeff(0.0, 0.5, 0.0) == pytest.approx(1.0)
    assert spec.reaction(0.0, 0.5, 3.0) == pytest.approx(-2.0 * 9.0)
    assert spec.rhs(0.0, 0.5, 3.0, 0.25) == pytest.approx(1.0 * 0.25 + 18.0)
    assert spec.params["divergence_form_m"] == 2.0


def test_shipped_gradient_weights():
    rho = from_descriptor({"model": "rho_laplacian_poly", "rho": 3.0, "n": 2.0})
    # g = -n log(p/p0): at p = 0.5, p0 = 1 that is 2 log 2.
    assert rho.closed_forms.g_of_p(0.5, 1.0, 0.0) == pytest.approx(2.0 * math.log(2.0))

    pme = from_descriptor({"model": "porous_medium", "m": 2.0})
    assert pme.closed_forms.g_of_p(0.25, 1.0, 0.0) == pytest.approx(math.log(4.0))

    imcf = from_descriptor({"model": "inverse_mcf"})
    assert imcf.closed_forms.g_of_p(1.0, 0.0, 0.0) == pytest.approx(math.log(0.5))
    # this is the one builtin whose unit-constant normalization sits at 0
    assert imcf.closed_forms.canonical_p0 == 0.0
    assert rho.closed_forms.canonical_p0 == 1.0


def test_closed_form_density_values():
    rho = from_descriptor({"model": "rho_laplacian_poly", "rho": 3.0, "n": 1.0})
    # (rho-1)/((rho-n)(rho-n-1)) |p|^(rho-n) - u = |p|^2 - u
    assert rho.closed_forms.lagrangian(0.25, -2.0) == pytest.approx(4.0 - 0.25)

    pure = models.pure_rho_laplacian(3.0)
    assert pure.closed_forms.lagrangian(0.7, 1.0) == pytest.approx(1.0 / 3.0)

    mcf = models.pure_mean_curvature()
    assert mcf.closed_forms.lagrangian(0.0, 1.0) == pytest.approx(math.sqrt(2.0))


def test_degenerate_reaction_exponent_disables_the_oracle():
    # n = rho - 1 makes the closed-form coefficient singular.
    spec = from_descriptor({"model": "rho_laplacian_poly", "rho": 3.0, "n": 2.0})
    assert spec.closed_forms.lagrangian is None
    assert "singular" in spec.closed_forms.lagrangian_note

    mcf1 = from_descriptor({"model": "mcf_poly", "n": 1.0})
    assert mcf1.closed_forms.lagrangian is None


def test_constructor_guards():
    with pytest.raises(ValueError):
        RhoLaplacianPoly(1.5, 1.0)
    with pytest.raises(ValueError):
        McfPoly(-1.0)
    with pytest.raises(ValueError):
        PorousMedium(0.5)
    with pytest.raises(ValueError):
        models.pure_rho_laplacian(1.0)


def test_boundary_condition_builders():
    d = BoundaryCondition.dirichlet()
    assert d.kind == "dirichlet"
    n = BoundaryCondition.neumann()
    assert n.kind == "robin" and n.robin_b(0.7) == 0.0
    r = BoundaryCondition.robin(lambda u: 2.0 * u)
    assert r.kind == "robin" and r.robin_b(0.5) == 1.0


def test_descriptor_boundary_conditions():
    spec = from_descriptor({
        "model": "heat",
        "bc": [{"kind": "robin", "b": {"kind": "linear", "slope": 2.0}}, "dirichlet"],
    })
    assert spec.bc_left.kind == "robin"
    assert spec.bc_left.robin_b(0.5) == pytest.approx(1.0)
    assert spec.bc_right.kind == "dirichlet"


def test_descriptor_errors():
    with pytest.raises(ValueError):
        from_descriptor({"model": "no_such_model"})
    with pytest.raises(ValueError):
        from_descriptor({"rho": 3.0})
    with pytest.raises(ValueError):
        from_descriptor({"model": "heat", "bc": ["dirichlet"]})
    with pytest.raises(ValueError):
        from_descriptor({"model": "heat", "bc": ["dirichlet", "free"]})
    with pytest.raises(ValueError):
        from_descriptor({"model": "quasilinear_gradient", "a": {"kind": "no_such"}})


def test_descriptor_is_recorded_in_params():
    d = {"model": "mcf_poly", "n": 2.0}
    spec = from_descriptor(d)
    assert spec.params["descriptor"] == d
    assert spec.name == "mcf_poly"


def test_instantiate_rejects_unknown_model():
    with pytest.raises(ValueError):
        instantiate(object())


def test_validator_reports_a_broken_model_instead_of_raising():
    good = from_descriptor({"model": "heat"})
    # Corrupt the time-carrying weight so the sign contract fails.
    import dataclasses
    bad = dataclasses.replace(good, f1_weight=lambda x, u, p, q, ut: -ut)
    report = validate_spec(bad, n_samples=200, seed=1)
    assert not report.passed
    assert "f1_weight_sign" in report.counts or "evolution_consistency" in report.counts
    payload = report.to_dict()
    assert payload["passed"] is False and payload["n_samples"] == 200


def test_filtration_derivative_fallback():
    # Only a itself supplied: derivatives come from central differences.
    filt = models.Filtration(a=lambda u: np.asarray(u, dtype=float) ** 3)
    spec = instantiate(filt)
    assert spec.diffusion_coeff(0.0, 0.5, 0.0) == pytest.approx(3.0 * 0.25, rel=1e-5)
    assert spec.diffusion_coeff_du(0.0, 0.5, 0.0) == pytest.approx(3.0, rel=1e-3)
