"""Tests for the Sigma and Stokes-Ritz projections and the coupled Ritz evolution."""

import numpy as np
import pytest

from fsi_thinwall.fields import ZERO_FIELDS, AnalyticFields, zero_gradient
from fsi_thinwall.forms import assemble_operators
from fsi_thinwall.mesh import build_rect_mesh
from fsi_thinwall.mms import ExactSolution, projection_study, ritz_study
from fsi_thinwall.projections import (
    RitzProjector,
    compute_nh,
    dirichlet_ritz_errors,
    supercloseness_errors,
    tilde_P,
)


def test_discrete_normal_on_flat_sigma(th_periodic):
    """Test that n_h equals the exact normal on straight Sigma lines."""
    ops = th_periodic
    nh = compute_nh(ops)

    assert np.allclose(ops.S.evaluate(nh.coeffs), ops.S.normals.T, atol=1e-12)
    assert nh.norm**2 == pytest.approx(ops.mesh.sigma_length())
    assert nh.lam(nh.coeffs) == pytest.approx(1.0)


def test_tilde_P_removes_normal_flux(th_dirichlet):
    """Test that P~ annihilates n_h, has zero flux and is idempotent."""
    ops = th_dirichlet
    nh = compute_nh(ops)
    w = np.random.default_rng(0).standard_normal(ops.S.n_dofs)
    Pw = tilde_P(w, nh)

    assert np.allclose(tilde_P(nh.coeffs, nh), 0.0, atol=1e-12)
    assert abs(nh.flux(Pw)) < 1e-12 * max(1.0, np.abs(w).max())
    assert np.allclose(tilde_P(Pw, nh), Pw)

    tangential = ops.S.interpolate(lambda x, y: np.stack([np.ones_like(x), np.zeros_like(x)]))
    assert np.allclose(tilde_P(tangential, nh), tangential)


def test_sigma_ritz_reproduces_constants(th_periodic):
    """Test that R^S returns constant Sigma fields exactly."""
    ops = th_periodic

    def eta(x, y):
        return np.stack([np.full_like(x, 1.5), np.full_like(x, -2.0)])

    fields = AnalyticFields(eta=eta, deta=lambda x, y: np.zeros((2, np.size(x))))
    coeffs = RitzProjector(ops).ritz_RhS(fields)
    assert np.allclose(coeffs, ops.S.interpolate(eta))


def test_dirichlet_ritz_reproduces_discrete_members(th_dirichlet):
    """Test that R^D returns a discrete pair with zero normal flux unchanged."""
    ops = th_dirichlet

    def u(x, y):
        return np.stack([y**2, np.zeros_like(x)])

    def grad_u(x, y):
        g = np.zeros((2, 2, np.size(x)))
        g[0, 1] = 2.0 * y
        return g

    def p(x, y):
        return x + y

    fields = AnalyticFields(u=u, grad_u=grad_u, p=p)
    u_h, p_h = RitzProjector(ops).ritz_RhD(fields)

    assert np.allclose(u_h, ops.V.interpolate(u), atol=1e-10)
    assert np.allclose(p_h, ops.Q.interpolate(p), atol=1e-10)


def test_dirichlet_ritz_divergence_and_linearity(th_periodic, params):
    """Test b(1, R^D u) = 0 for divergence-free u and linearity in the data."""
    ops = th_periodic
    projector = RitzProjector(ops)
    fields = ExactSolution(params).fields(1.0)
    u_h, p_h = projector.ritz_RhD(fields)

    assert abs(np.ones(ops.n_p) @ (ops.B @ u_h)) < 1e-12 * max(1.0, np.abs(u_h).max())
    u2, p2 = projector.ritz_RhD(fields.scaled(2.0))
    assert np.allclose(u2, 2.0 * u_h, atol=1e-12)
    assert np.allclose(p2, 2.0 * p_h, atol=1e-11)
    assert projector.dirichlet_solver is projector.dirichlet_solver


def test_projections_scale_with_their_data(th_periodic, params):
    """Test that scaling the analytic data by c scales every projection by c."""
    projector = RitzProjector(th_periodic)
    exact = ExactSolution(params)
    fields0, rates0 = exact.fields(0.3), exact.rates(0.3)
    c = -2.0

    def close(scaled, base):
        return np.allclose(scaled, c * base, rtol=0.0, atol=1e-12 * max(1.0, np.abs(base).max()))

    assert close(projector.ritz_RhS(fields0.scaled(c)), projector.ritz_RhS(fields0))
    assert close(
        projector.initial_Rsh_eta(fields0.scaled(c)), projector.initial_Rsh_eta(fields0)
    )
    base = projector.initial_Rh_eta(fields0, rates0)
    scaled = projector.initial_Rh_eta(fields0.scaled(c), rates0.scaled(c))
    for s, b in zip(scaled, base):
        assert close(s, b)


def test_initial_values_vanish_for_zero_data(th_periodic):
    """Test that zero analytic inputs give zero initial projections."""
    projector = RitzProjector(th_periodic)
    eta0, u0, p0 = projector.initial_Rh_eta(ZERO_FIELDS, ZERO_FIELDS)

    assert np.all(eta0 == 0.0)
    assert np.all(u0 == 0.0)
    assert np.all(p0 == 0.0)
    assert np.all(projector.initial_Rsh_eta(ZERO_FIELDS) == 0.0)


def test_initial_velocity_trace_has_zero_flux(th_periodic, params):
    """Test that R_h u(0) restricted to Sigma carries no normal flux."""
    ops = th_periodic
    exact = ExactSolution(params)
    projector = RitzProjector(ops)
    _, u0, _ = projector.initial_Rh_eta(exact.fields(0.5), exact.rates(0.5))

    assert abs(projector.nh.flux(ops.R @ u0)) < 1e-12 * max(1.0, np.abs(u0).max())


@pytest.mark.parametrize("bc_fixture", ["th_periodic", "th_dirichlet"])
def test_initial_displacement_is_extension_independent(request, bc_fixture, params):
    """Test that zero-interior and harmonic extensions give the same R_sh eta(0)."""
    ops = request.getfixturevalue(bc_fixture)
    projector = RitzProjector(ops)
    fields0 = ExactSolution(params).fields(0.3)

    zero = projector.initial_Rsh_eta(fields0, extension="zero")
    harmonic = projector.initial_Rsh_eta(fields0, extension="harmonic")
    assert np.allclose(zero, harmonic, atol=1e-11 * max(1.0, np.abs(zero).max()))
    with pytest.raises(ValueError, match="Unknown extension"):
        projector.initial_Rsh_eta(fields0, extension="lifting")


def test_ritz_evolution_keeps_divergence_constraint(th_periodic, params):
    """Test the discrete divergence identity along the RK4 trajectory."""
    exact = ExactSolution(params)
    projector = RitzProjector(th_periodic)
    trajectory = projector.ritz_evolve(exact.fields, 0.1, 4, rates0=exact.rates(0.0))

    assert len(trajectory.times) == 5
    assert len(trajectory.errors) == 5
    assert max(trajectory.divergence_residual) <= 1e-10
    assert np.isfinite(trajectory.max_error())
    assert trajectory.max_error("u_L2") <= trajectory.max_error("combined")
    with pytest.raises(ValueError):
        projector.ritz_evolve(exact.fields, 0.1, 0)


def test_ritz_evolution_of_zero_data_is_zero(th_periodic):
    """Test that zero trajectories stay zero."""
    trajectory = RitzProjector(th_periodic).ritz_evolve(lambda t: ZERO_FIELDS, 0.1, 2)

    assert all(np.all(eta == 0.0) for eta in trajectory.eta)
    assert trajectory.max_error() == 0.0


def test_ntd_map_is_symmetric_and_positive(th_periodic, mini_dirichlet):
    """Test symmetry, positivity and the energy identity of the discrete NtD map."""
    for ops in (th_periodic, mini_dirichlet):
        check = RitzProjector(ops).ntd_symmetry_check(trials=5, seed=1)

        assert check.trials == 5
        assert check.max_asymmetry <= 1e-12
        assert check.min_quadratic > 0.0
        assert check.max_identity_error <= 1e-10


def test_projection_error_helpers(th_periodic, params):
    """Test the scalar error summaries of R^D and of the initial displacements."""
    exact = ExactSolution(params)
    projector = RitzProjector(th_periodic)

    errors = dirichlet_ritz_errors(projector, exact.fields(1.0))
    assert set(errors) == {"u_L2", "u_H1", "p_L2"}
    assert all(v >= 0.0 for v in errors.values())
    assert supercloseness_errors(projector, exact.fields(0.0), exact.rates(0.0)) >= 0.0


def test_zero_gradient_shape():
    """Test the shape of the default gradient field."""
    assert zero_gradient(np.zeros(3), np.zeros(3)).shape == (2, 2, 3)


@pytest.mark.slow
def test_ntd_symmetry_at_fine_mesh():
    """Test the NtD asymmetry bound for 20 random pairs at h = 1/16."""
    mesh = build_rect_mesh(32, 16, 2.0, 1.0, periodic=True)
    ops = assemble_operators(mesh, "th", 1.0, 1.0, 1.0)
    check = RitzProjector(ops).ntd_symmetry_check(trials=20, seed=0)

    assert check.max_asymmetry <= 1e-12
    assert check.min_quadratic > 0.0


@pytest.mark.slow
def test_dirichlet_ritz_rates():
    """Test R^D orders r + 1 in L2 and r in the energy norm for Taylor-Hood."""
    result = projection_study("th", "periodic", levels=3, base_level=4)
    rates = result.rates.set_index("column")["slope"]

    assert rates["err_RhD_u_L2"] == pytest.approx(3.0, abs=0.3)
    assert rates["err_RhD_energy"] == pytest.approx(2.0, abs=0.3)
    assert result.table["ntd_asymmetry"].max() <= 1e-12


@pytest.mark.slow
def test_coupled_ritz_rates():
    """Test the max-in-time Ritz error and the supercloseness gap at order r + 1."""
    result = ritz_study("th", "periodic", levels=3, base_level=4, T=0.1)
    rates = result.rates.set_index("column")["slope"]

    assert rates["err_ritz_combined"] >= 2.7
    assert rates["err_superclose_H1Sigma"] >= 2.6
    assert result.table["divergence_residual"].max() <= 1e-10
