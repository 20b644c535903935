"""Tests for the manufactured solution, error norms and convergence studies."""

import logging

import numpy as np
import pandas as pd
import pytest
import sympy

from fsi_thinwall.mms import (
    ERROR_KEYS,
    REFERENCE_ERRORS_TH_PERIODIC,
    REFERENCE_ORDERS,
    ConvergenceResult,
    ExactSolution,
    LevelSpec,
    ManufacturedProblem,
    add_orders,
    build_level_operators,
    check_orders,
    compare_monolithic,
    convergence_study,
    error_norms,
    exact_fields,
    simulate_level,
    sources,
    step_count,
)
from fsi_thinwall.scheme import PhysicalParams, make_state

PARAMS = PhysicalParams(rho_f=1.3, mu=0.7, rho_s=1.1, eps_s=0.4, C0=2.0, C1=0.5)
H = 1e-3


def _d1(f, h=H):
    """Fourth-order central first derivative of a function of one variable."""
    return lambda s: (f(s - 2 * h) - 8 * f(s - h) + 8 * f(s + h) - f(s + 2 * h)) / (12 * h)


def _d2(f, h=H):
    """Fourth-order central second derivative."""
    return lambda s: (
        -f(s - 2 * h) + 16 * f(s - h) - 30 * f(s) + 16 * f(s + h) - f(s + 2 * h)
    ) / (12 * h * h)


def test_exact_solution_is_divergence_free():
    """Test div u = 0 symbolically."""
    exact = ExactSolution()
    x, y = sympy.symbols("x y", real=True)
    div = exact.u[0].diff(x) + exact.u[1].diff(y)

    assert sympy.simplify(div) == 0


def test_kinematic_coupling_on_sigma():
    """Test u = d_t eta on both Sigma lines."""
    exact = ExactSolution()
    x = np.linspace(0.0, 2.0, 17)
    for t in (0.0, 0.4, 1.3):
        fields, rates = exact.fields(t), exact.rates(t)
        for y in (np.zeros_like(x), np.ones_like(x)):
            assert np.allclose(fields.u(x, y), rates.eta(x, y), atol=1e-13)


def test_fluid_source_matches_finite_differences():
    """Test f_f = rho_f d_t u + grad p - mu lap u at random points."""
    exact = ExactSolution(PARAMS)
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0.0, 2.0, 6), rng.uniform(0.0, 1.0, 6)
    t = 0.37

    ut = _d1(lambda s: exact.fields(s).u(x, y))(t)
    px = _d1(lambda s: exact.fields(t).p(s, y))(x)
    py = _d1(lambda s: exact.fields(t).p(x, s))(y)
    lap = _d2(lambda s: exact.fields(t).u(s, y))(x) + _d2(lambda s: exact.fields(t).u(x, s))(y)
    expected = PARAMS.rho_f * ut + np.stack([px, py]) - PARAMS.mu * lap

    assert np.allclose(exact.fluid_source(t)(x, y), expected, rtol=1e-6, atol=1e-6)


def test_structure_source_matches_finite_differences():
    """Test f_s = rs d_tt eta - C0 d_xx eta + C1 eta + sigma(u, p) n on both lines."""
    exact = ExactSolution(PARAMS)
    x = np.linspace(0.1, 1.9, 7)
    t = 0.81
    for y_value, normal in ((0.0, np.array([0.0, -1.0])), (1.0, np.array([0.0, 1.0]))):
        y = np.full_like(x, y_value)
        fields = exact.fields(t)
        ett = _d2(lambda s: exact.fields(s).eta(x, y))(t)
        exx = _d2(lambda s: exact.fields(t).eta(s, y))(x)
        G = fields.grad_u(x, y)
        stress = -fields.p(x, y) * np.eye(2)[:, :, None] + PARAMS.mu * (G + G.transpose(1, 0, 2))
        traction = np.einsum("ijn,j->in", stress, normal)
        expected = PARAMS.rho_eps * ett - PARAMS.C0 * exx + PARAMS.C1 * fields.eta(x, y) + traction

        assert np.allclose(exact.structure_source(t)(x, y), expected, rtol=1e-6, atol=1e-6)


def test_module_level_helpers_agree():
    """Test exact_fields and sources against the ExactSolution methods."""
    exact = ExactSolution(PARAMS)
    x, y = np.array([0.3, 1.1]), np.array([0.0, 1.0])
    f_f, f_s = sources(0.2, PARAMS)

    assert np.allclose(exact_fields(0.2, PARAMS).p(x, y), exact.fields(0.2).p(x, y))
    assert np.allclose(f_f(x, y), exact.fluid_source(0.2)(x, y))
    assert np.allclose(f_s(x, y), exact.structure_source(0.2)(x, y))


def test_fields_vanish_at_time_zero_except_displacement():
    """Test the initial values of the manufactured fields."""
    fields = ExactSolution().fields(0.0)
    x, y = np.array([0.25, 0.5]), np.array([0.0, 1.0])

    assert np.allclose(fields.u(x, y), 0.0)
    assert np.allclose(fields.p(x, y), 0.0)
    assert np.allclose(fields.eta(x, y)[1], -4.0 * np.cos(2 * np.pi * x))


def test_error_norms_of_interpolant(params):
    """Test the error table keys and that interpolants beat the zero state."""
    ops = build_level_operators(
        LevelSpec(M=4, tau=0.1, T=0.1, element="th", bc="periodic", params=params)
    )
    exact = ExactSolution(params)
    fields = exact.fields(0.5)
    state = make_state(
        ops, ops.V.interpolate(fields.u), ops.Q.interpolate(fields.p), ops.S.interpolate(fields.eta)
    )
    errors = error_norms(ops, state, fields)

    assert set(errors) == set(ERROR_KEYS)
    assert all(np.isfinite(v) and v >= 0.0 for v in errors.values())

    zero = make_state(ops, np.zeros(ops.n_u), np.zeros(ops.n_p), np.zeros(ops.S.n_dofs))
    zero_errors = error_norms(ops, zero, fields)
    for key in ("err_u_L2", "err_p_L2", "err_eta_L2Sigma"):
        assert errors[key] < 0.5 * zero_errors[key]


def test_manufactured_dirichlet_values(th_dirichlet, params):
    """Test that side data interpolate the exact velocity."""
    exact = ExactSolution(params)
    problem = ManufacturedProblem(exact)
    values = problem.dirichlet_values(th_dirichlet, 0.6)
    dofs = th_dirichlet.V.constrained_dofs

    assert np.allclose(values[dofs], th_dirichlet.V.interpolate(exact.fields(0.6).u)[dofs])
    assert problem.structure_load(th_dirichlet, 0.6).shape == (th_dirichlet.S.n_dofs,)


@pytest.mark.parametrize(
    "T, tau, n, adjusted", [(0.1, 0.03, 4, 0.025), (0.1, 0.01, 10, 0.01), (0.1, 0.5, 1, 0.1)]
)
def test_step_count(T, tau, n, adjusted):
    """Test step counts reaching T exactly."""
    steps, tau_used = step_count(T, tau)

    assert steps == n
    assert tau_used == pytest.approx(adjusted)


def test_step_count_rejects_nonpositive():
    """Test errors for nonpositive T and tau."""
    with pytest.raises(ValueError):
        step_count(0.0, 0.1)
    with pytest.raises(ValueError):
        step_count(0.1, -0.1)


def test_add_orders_on_synthetic_table():
    """Test pairwise orders and least-squares rates of a power law."""
    h = np.array([1 / 4, 1 / 8, 1 / 16])
    table = pd.DataFrame({"h": h, "err_a": 3.0 * h**2, "err_b": 0.5 * h**3})
    result = add_orders(table, ["err_a", "err_b", "err_missing"])

    assert np.isnan(result.table["order_err_a"].iloc[0])
    assert np.allclose(result.table["order_err_a"].iloc[1:], 2.0)
    rates = result.rates.set_index("column")
    assert rates.loc["err_b", "slope"] == pytest.approx(3.0)
    assert rates.loc["err_b", "stderr"] == pytest.approx(0.0, abs=1e-10)
    assert result.last_orders() == pytest.approx({"err_a": 2.0, "err_b": 3.0})
    assert list(result.rates.columns) == ["column", "slope", "stderr", "last_pair"]


def _reference_result(scale: float = 1.0, coarsest: int = 8) -> ConvergenceResult:
    h = 1.0 / (coarsest * np.array([1, 2, 4]))
    columns = {"h": h}
    for col, order in REFERENCE_ORDERS[("th", "periodic")].items():
        columns[col] = scale * REFERENCE_ERRORS_TH_PERIODIC[col] * (h * 8) ** order
    return add_orders(pd.DataFrame(columns), list(REFERENCE_ORDERS[("th", "periodic")]))


def test_check_orders():
    """Test the acceptance comparison with reference orders and magnitudes."""
    assert check_orders(_reference_result(), "th", "periodic") == []

    failures = check_orders(_reference_result(scale=3.0), "th", "periodic")
    assert len(failures) == 4
    assert all("not within x2" in f for f in failures)

    assert check_orders(_reference_result(), "mini", "periodic") == []
    failures = check_orders(_reference_result(), "mini", "dirichlet")
    assert any(f.startswith("err_u_L2") for f in failures)


def test_check_orders_warns_without_reference_level(caplog):
    """Test that a table without h = 1/8 skips the magnitudes with a warning."""
    result = _reference_result(scale=3.0, coarsest=16)

    with caplog.at_level(logging.WARNING, logger="fsi_thinwall.mms"):
        assert check_orders(result, "th", "periodic") == []
    assert "No h = 1/8 level" in caplog.text


def test_simulate_level_records_maxima(params):
    """Test a tiny level run with max-over-time errors."""
    spec = LevelSpec(
        M=2,
        tau=0.025,
        T=0.05,
        element="th",
        bc="periodic",
        params=params,
        record_max_errors=True,
    )
    final, errors = simulate_level(spec)

    assert final.step == 2
    assert final.time == pytest.approx(0.05)
    for key in ERROR_KEYS:
        assert np.isfinite(errors[key])
        assert errors[f"max_{key}"] >= errors[key]


def test_simulate_level_rejects_unknown_bc(params):
    """Test the boundary condition check."""
    with pytest.raises(ValueError, match="boundary condition"):
        simulate_level(LevelSpec(M=2, tau=0.1, T=0.1, element="th", bc="neumann", params=params))


def test_small_convergence_study_schema():
    """Test the table layout of a two-level study."""
    result = convergence_study(
        "mini", "dirichlet", levels=2, beta=0.5, T=0.02, tau_rule=lambda h: 0.01, base_level=2
    )

    table = result.table
    assert list(table["h"]) == pytest.approx([0.5, 0.25])
    assert list(table["steps"]) == [2, 2]
    for key in ERROR_KEYS:
        assert f"order_{key}" in table
    assert set(result.rates["column"]) == set(ERROR_KEYS)


@pytest.mark.slow
def test_taylor_hood_periodic_orders():
    """Test observed orders and magnitudes of the periodic Taylor-Hood study."""
    result = convergence_study("th", "periodic", levels=3, beta=0.5, T=0.1)

    assert check_orders(result, "th", "periodic") == []


@pytest.mark.slow
@pytest.mark.parametrize("element", ["th", "mini"])
def test_dirichlet_orders(element):
    """Test observed orders with Dirichlet side conditions."""
    base_level = 16 if element == "mini" else 8
    result = convergence_study(
        element, "dirichlet", levels=3, beta=0.5, T=0.1, base_level=base_level
    )

    assert check_orders(result, element, "dirichlet") == []


@pytest.mark.slow
def test_partitioned_monolithic_distance_is_first_order():
    """Test that the splitting distance to the monolithic solution shrinks linearly in tau."""
    result = compare_monolithic([1e-2, 5e-3, 2.5e-3], M=16, T=0.1)

    assert result.last_orders()["diff_u_L2"] == pytest.approx(1.0, abs=0.4)
