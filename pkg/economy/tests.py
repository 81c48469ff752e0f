import json
import math
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.contrib.auth import get_user_model
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from rest_framework.test import APITestCase

from config.exceptions import ConfigurationError, DomainError
from config.serializers import validate_config
from economy.elasticities import (
    ANALYTIC,
    competitive_limit_elasticities,
    composed_labor_elasticity,
    elasticity_grid,
    elasticity_report,
    implied_terms,
    incidence_summary,
    numeric_elasticities,
    numeric_elasticity,
    payroll_tax_components,
    random_valid_params,
    reform_effect,
    revenue_tax_elasticities_analytic,
    verify_labor_composition,
)
from economy.equilibrium import (
    cost_minimize,
    industry_equilibrium,
    labor_foc_gap,
    profit_maximize,
    total_cost,
    treated_equilibrium,
)
from economy.params import MARKUP, PRICE_TAKING, EconomyParams, TaxPolicy
from economy.serializers import EconomyParamsSerializer
from economy.technology import ces_output, labor_supply_wage, log_output_per_capital, markdown


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


class LaborSupplyTests(SimpleTestCase):
    def test_unit_labor(self):
        self.assertEqual(labor_supply_wage(1.0, 1.0, 2.78), 1.0)

    def test_flat_supply_limit(self):
        self.assertAlmostEqual(labor_supply_wage(2.0, 1.0, 1e9), 1.0, delta=1e-8)

    def test_direct_evaluation(self):
        self.assertAlmostEqual(labor_supply_wage(2.0, 1.0, 2.78), 2 ** (1 / 2.78), places=12)
        self.assertAlmostEqual(labor_supply_wage(2.0, 1.0, 2.78), 1.2832, places=4)

    def test_increasing(self):
        self.assertLess(labor_supply_wage(1.0, 1.0, 2.78), labor_supply_wage(1.1, 1.0, 2.78))

    def test_domain_errors(self):
        with self.assertRaises(DomainError):
            labor_supply_wage(0.0, 1.0, 2.78)
        with self.assertRaises(DomainError):
            labor_supply_wage(1.0, -1.0, 2.78)


class CesOutputTests(SimpleTestCase):
    def test_symmetric_unit_inputs(self):
        self.assertAlmostEqual(ces_output(1.0, 1.0, 0.5, 0.5, 0.5), 1.0, places=14)

    def test_cobb_douglas_branch(self):
        self.assertAlmostEqual(ces_output(4.0, 1.0, 0.5, 0.5, 1e-8), 2.0, places=12)
        self.assertAlmostEqual(ces_output(4.0, 1.0, 0.5, 0.5, 0.0), 2.0, places=12)

    def test_harmonic_form(self):
        brute = (0.3 * 2.0 ** -1 + 0.7 * 3.0 ** -1) ** -1
        self.assertAlmostEqual(ces_output(2.0, 3.0, 0.3, 0.7, -1.0), brute, places=12)

    def test_constant_returns(self):
        for rho in (-2.0, -0.5, 0.0, 0.3, 0.9):
            base = ces_output(1.7, 0.4, 0.35, 0.65, rho)
            self.assertLess(rel(ces_output(3.7 * 1.7, 3.7 * 0.4, 0.35, 0.65, rho), 3.7 * base), 1e-12)

    def test_rho_at_least_one_rejected(self):
        with self.assertRaises(DomainError):
            ces_output(1.0, 1.0, 0.5, 0.5, 1.0)


class MarkdownTests(SimpleTestCase):
    def test_calibrated_markdown(self):
        self.assertAlmostEqual(markdown(2.78), 1 / 2.78, places=12)
        self.assertEqual(round(markdown(2.78), 4), 0.3597)

    def test_limits(self):
        self.assertEqual(markdown(1.0), 1.0)
        self.assertLess(markdown(1e12), 1e-11)

    def test_non_positive_rejected(self):
        with self.assertRaises(DomainError):
            markdown(0.0)


class EconomyParamsTests(SimpleTestCase):
    def test_shares_must_sum_to_one(self):
        with self.assertRaises(ConfigurationError) as ctx:
            EconomyParams(s_L=0.6, s_K=0.6)
        self.assertEqual(ctx.exception.key, "s_K")

    def test_markup_needs_elastic_demand(self):
        with self.assertRaises(ConfigurationError) as ctx:
            EconomyParams(eta=0.5, market_mode=MARKUP)
        self.assertEqual(ctx.exception.key, "eta")
        EconomyParams(eta=0.5, market_mode=PRICE_TAKING)

    def test_theta_below_one_rejected(self):
        with self.assertRaises(ConfigurationError):
            EconomyParams(theta=0.9)

    def test_perturbed_skips_range_checks(self):
        p = EconomyParams(theta=1.0).perturbed(theta=0.99999)
        self.assertEqual(p.theta, 0.99999)

    def test_round_trip_and_unknown_keys(self):
        p = EconomyParams(rho=0.3, eps=5.0)
        self.assertEqual(EconomyParams.from_dict(p.to_dict()), p)
        with self.assertRaises(ConfigurationError) as ctx:
            EconomyParams.from_dict({"rho": 0.3, "gamma": 1.0})
        self.assertEqual(ctx.exception.key, "gamma")

    def test_serializer_rejects_unknown_key(self):
        with self.assertRaises(ConfigurationError) as ctx:
            validate_config(EconomyParamsSerializer, {"eps": 2.0, "sigma": 3.0})
        self.assertEqual(ctx.exception.key, "sigma")

    def test_serializer_names_invalid_field(self):
        with self.assertRaises(ConfigurationError) as ctx:
            validate_config(EconomyParamsSerializer, {"eta": 0.8})
        self.assertEqual(ctx.exception.key, "eta")


class CostMinimizeTests(SimpleTestCase):
    def test_symmetric_calibration(self):
        # theta w0 (1 + 1/eps) L^(1/eps) = r at L = K = 0.5
        params = EconomyParams(s_L=0.5, s_K=0.5, rho=0.5, eps=1.0, theta=1.0, w0=1.0, r=1.0)
        L, K, _ = cost_minimize(0.5, params)
        self.assertAlmostEqual(L, 0.5, places=10)
        self.assertAlmostEqual(K, 0.5, places=10)

    def test_output_constraint_holds(self):
        params = EconomyParams(s_L=0.4, s_K=0.6, rho=-0.7, eps=3.0)
        L, K, _ = cost_minimize(2.5, params)
        self.assertLess(rel(ces_output(L, K, 0.4, 0.6, -0.7), 2.5), 1e-10)

    def test_cost_beats_grid_search(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            s_L = float(rng.uniform(0.2, 0.8))
            params = EconomyParams(
                s_L=s_L,
                s_K=1.0 - s_L,
                rho=float(rng.uniform(-2.0, 0.8)),
                eps=float(rng.uniform(0.5, 20.0)),
                theta=float(rng.uniform(1.0, 1.5)),
            )
            L, K, _ = cost_minimize(1.0, params)
            best = total_cost(L, K, params)
            x_star = math.log(L / K)
            grid = []
            for x in np.linspace(x_star - 2.0, x_star + 2.0, 2000):
                k = math.exp(-log_output_per_capital(x, params.s_L, params.s_K, params.rho))
                grid.append(total_cost(k * math.exp(x), k, params))
            self.assertLessEqual(best, min(grid) + 1e-6)

    def test_marginal_cost_is_envelope(self):
        params = EconomyParams(s_L=0.45, s_K=0.55, rho=0.2, eps=2.78)
        Q = 1.3
        h = 1e-5 * Q
        up = cost_minimize(Q + h, params)
        down = cost_minimize(Q - h, params)
        fd = (total_cost(up.L, up.K, params) - total_cost(down.L, down.K, params)) / (2 * h)
        self.assertLess(rel(cost_minimize(Q, params).marginal_cost, fd), 1e-4)


class ProfitMaximizeTests(SimpleTestCase):
    def test_competitive_markup_limit(self):
        eq = profit_maximize(EconomyParams(eta=1e9, tau_rev=0.0))
        self.assertLess(rel(eq.p, eq.marginal_cost), 1e-6)

    def test_lerner_identity(self):
        eq = profit_maximize(EconomyParams(eta=2.0, tau_rev=0.0))
        self.assertGreater(eq.profit, 0)
        self.assertAlmostEqual(eq.p * (1 - eq.tau_rev) / eq.marginal_cost, 2.0, delta=1e-8)

    def test_profit_beats_grid_search(self):
        for params in random_valid_params(np.random.default_rng(5), 4):
            eq = profit_maximize(params)
            grid = []
            for Q in np.linspace(0.5 * eq.Q, 1.5 * eq.Q, 2000):
                mix = cost_minimize(float(Q), params)
                price = params.A * Q ** (-1.0 / params.eta)
                grid.append((1 - params.tau_rev) * price * Q - total_cost(mix.L, mix.K, params))
            self.assertGreaterEqual(eq.profit, max(grid) - 1e-6)

    def test_equilibrium_invariants(self):
        params = EconomyParams(s_L=0.4, s_K=0.6, rho=-1.0, eps=4.0, eta=3.0, tau_rev=0.05)
        eq = profit_maximize(params)
        self.assertLess(rel(ces_output(eq.L, eq.K, 0.4, 0.6, -1.0), eq.Q), 1e-9)
        self.assertLess(rel(eq.w, labor_supply_wage(eq.L, params.w0, params.eps)), 1e-12)
        self.assertLess(labor_foc_gap(eq, params), 1e-8)
        self.assertAlmostEqual(eq.labor_cost_share + eq.capital_cost_share, 1.0, places=12)
        self.assertAlmostEqual(eq.markdown, 0.25, places=12)

    def test_deterministic(self):
        params = EconomyParams(rho=0.3, eps=5.0, eta=2.5)
        self.assertEqual(profit_maximize(params), profit_maximize(params))

    def test_continuous_in_parameters(self):
        params = EconomyParams(rho=0.3, eps=5.0, eta=2.5)
        base = profit_maximize(params)
        for name in ("rho", "eps", "eta", "theta"):
            moved = profit_maximize(replace(params, **{name: getattr(params, name) * (1 + 1e-6)}))
            for attr in ("L", "K", "Q"):
                self.assertLess(rel(getattr(moved, attr), getattr(base, attr)), 1e-4)

    def test_price_taking_clears_market(self):
        params = EconomyParams(eta=0.11, market_mode=PRICE_TAKING)
        eq = profit_maximize(params)
        self.assertLess(rel(eq.p * (1 - params.tau_rev), eq.marginal_cost), 1e-10)
        self.assertLess(rel(eq.p, params.A * eq.Q ** (-1 / 0.11)), 1e-9)

    def test_price_taking_fixed_price(self):
        params = EconomyParams(eta=0.5, market_mode=PRICE_TAKING, price=3.0, tau_rev=0.1)
        eq = profit_maximize(params)
        self.assertEqual(eq.p, 3.0)
        self.assertLess(rel(0.9 * 3.0, eq.marginal_cost), 1e-10)

    def test_inelastic_demand(self):
        eq = profit_maximize(EconomyParams(eta=0.0, market_mode=PRICE_TAKING))
        self.assertAlmostEqual(eq.Q, 1.0, places=14)


class IndustryEquilibriumTests(SimpleTestCase):
    def test_no_treated_firms_reduces_to_control_firm(self):
        params = EconomyParams(m=0.0, tau_rev=0.1, theta=1.3178, theta_control=1.5)
        industry = industry_equilibrium(params)
        single = profit_maximize(params.with_updates(theta=1.5, tau_rev=0.0, theta_control=None, m=1.0))
        for attr in ("Q", "L", "K", "p"):
            self.assertLess(rel(getattr(industry.control, attr), getattr(single, attr)), 1e-8)

    def test_all_treated_reduces_to_single_firm(self):
        params = EconomyParams(m=1.0, tau_rev=0.1)
        industry = industry_equilibrium(params)
        single = profit_maximize(params)
        for attr in ("Q", "L", "K", "p"):
            self.assertLess(rel(getattr(industry.treated, attr), getattr(single, attr)), 1e-8)

    def test_common_price_first_order_conditions(self):
        params = EconomyParams(m=0.5, tau_rev=0.1)
        industry = industry_equilibrium(params)
        self.assertLess(abs(industry.foc_residual), 1e-8)
        expected = 0.5 * industry.treated.Q + 0.5 * industry.control.Q
        self.assertAlmostEqual(industry.aggregate_Q, expected, places=12)
        self.assertEqual(industry.treated.p, industry.control.p)

    def test_explicit_policies(self):
        params = EconomyParams(m=0.3)
        industry = industry_equilibrium(
            params, treated_policy=TaxPolicy(theta=1.1178, tau_rev=0.015), control_policy=TaxPolicy(theta=1.3178)
        )
        self.assertEqual(industry.treated.theta, 1.1178)
        self.assertGreater(industry.treated.L, industry.control.L)

    def test_fixed_price_industry(self):
        params = EconomyParams(m=0.4, eta=0.5, market_mode=PRICE_TAKING, price=2.0, tau_rev=0.05)
        industry = industry_equilibrium(params)
        self.assertEqual(industry.p_index, 2.0)
        self.assertLess(abs(industry.foc_residual), 1e-9)

    def test_treated_equilibrium_switches_on_share(self):
        self.assertEqual(treated_equilibrium(EconomyParams(m=1.0)), profit_maximize(EconomyParams(m=1.0)))
        params = EconomyParams(m=0.2, tau_rev=0.05)
        self.assertEqual(treated_equilibrium(params).tau_rev, 0.05)


class NumericElasticityTests(SimpleTestCase):
    def test_zero_step_rejected(self):
        with self.assertRaises(DomainError):
            numeric_elasticity("L", "theta", EconomyParams(), step=0.0)

    def test_unknown_target_rejected(self):
        with self.assertRaises(DomainError):
            numeric_elasticity("utility", "theta", EconomyParams())

    def test_competitive_labor_response(self):
        params = EconomyParams(eps=1e6, rho=0.0, eta=2.0, s_L=0.5, s_K=0.5)
        value = numeric_elasticity("L", "theta", params)
        self.assertLess(rel(value, -1.5), 0.01)

    def test_cobb_douglas_closed_form(self):
        # with eps = 1, s_L = s_K = 1/2 and eta = 2 the labor response is -0.6, output -0.4
        params = EconomyParams(eps=1.0, rho=0.0, eta=2.0)
        values = numeric_elasticities(params, "theta")
        self.assertAlmostEqual(values["L"], -0.6, delta=1e-7)
        self.assertAlmostEqual(values["Q"], -0.4, delta=1e-7)

    def test_revenue_tax_response_is_small(self):
        params = EconomyParams(tau_rev=0.015, m=0.015, eta=2.0)
        self.assertLess(abs(numeric_elasticity("revenue", "tau_rev", params)), 0.01)

    def test_zero_revenue_tax_has_zero_response(self):
        values = numeric_elasticities(EconomyParams(tau_rev=0.0), "tau_rev")
        self.assertTrue(all(v == 0.0 for v in values.values()))

    def test_richardson_agrees(self):
        params = EconomyParams(rho=-0.5, eps=3.0, eta=2.5)
        plain = numeric_elasticity("K", "theta", params)
        extrapolated = numeric_elasticity("K", "theta", params, richardson=True)
        self.assertAlmostEqual(plain, extrapolated, delta=1e-6)

    def test_wage_moves_with_labor(self):
        params = EconomyParams(eps=2.78, rho=0.2)
        summary = incidence_summary(params)
        self.assertAlmostEqual(summary["wage"], numeric_elasticity("L", "theta", params) / 2.78, delta=1e-8)

    def test_signs_on_random_grid(self):
        for params in random_valid_params(np.random.default_rng(3), 10):
            values = numeric_elasticities(params, "theta")
            self.assertLess(values["L"], 0)
            self.assertLess(values["Q"], 0)


class RevenueTaxFormulaTests(SimpleTestCase):
    def test_no_tax(self):
        self.assertEqual(revenue_tax_elasticities_analytic(EconomyParams(tau_rev=0.0, m=0.3)), (0.0, 0.0))

    def test_unit_demand_elasticity(self):
        params = EconomyParams(eta=1.0, market_mode=PRICE_TAKING, tau_rev=0.2, m=0.4)
        nu, _ = revenue_tax_elasticities_analytic(params)
        self.assertEqual(nu, 0.0)

    def test_direct_evaluation(self):
        nu, xi = revenue_tax_elasticities_analytic(EconomyParams(m=1.0, tau_rev=0.015, eta=2.0))
        self.assertAlmostEqual(nu, -0.015 / 0.985, places=12)
        self.assertAlmostEqual(nu, -0.01523, places=5)
        self.assertAlmostEqual(xi, -0.03046, places=5)

    def test_closed_form_matches_solver_when_all_firms_treated(self):
        params = EconomyParams(m=1.0, tau_rev=0.015, eta=2.0, eps=1e6, rho=0.0)
        nu, xi = revenue_tax_elasticities_analytic(params)
        numeric = numeric_elasticities(params, "tau_rev")
        self.assertLess(rel(numeric["revenue"], nu), 1e-3)
        self.assertLess(rel(numeric["K"], xi), 1e-3)

    def test_small_treated_share_is_approximately_zero(self):
        params = EconomyParams(m=0.015, tau_rev=0.015, eta=2.0)
        numeric = numeric_elasticities(params, "tau_rev")
        for name in ("revenue", "K", "L"):
            self.assertLess(abs(numeric[name]), 0.01)
        nu, xi = revenue_tax_elasticities_analytic(params)
        self.assertLess(abs(nu), 0.01)
        self.assertLess(abs(xi), 0.01)

    def test_mismatch_is_logged_below_full_treatment(self):
        params = EconomyParams(m=0.5, tau_rev=0.1, eps=1.0)
        with self.assertLogs("economy.elasticities", level="WARNING"):
            elasticity_report(params)

    def test_mismatch_is_logged_with_market_power_at_full_treatment(self):
        params = EconomyParams(m=1.0, tau_rev=0.015, eta=2.0, eps=2.78, rho=0.0)
        with self.assertLogs("economy.elasticities", level="WARNING") as logs:
            report = elasticity_report(params)
        self.assertTrue(any(line.startswith("WARNING:economy.elasticities:nu:") for line in logs.output))
        nu, _ = revenue_tax_elasticities_analytic(params)
        self.assertGreater(rel(report.nu, nu), 0.1)


class PayrollComponentTests(SimpleTestCase):
    def test_flat_marginal_cost_in_competitive_limit(self):
        for rho in (-1.0, 0.0, 0.5):
            components = payroll_tax_components(EconomyParams(eps=1e6, rho=rho))
            self.assertLess(abs(components.eps_lambda_Q), 1e-3)

    def test_calibrated_components(self):
        components = payroll_tax_components(EconomyParams(rho=0.0, s_L=0.5, s_K=0.5, eps=2.78, eta=2.0))
        for value in (components.eps_lambda_theta, components.eps_Q_theta, components.eps_lambda_Q):
            self.assertTrue(math.isfinite(value))
        self.assertGreater(components.eps_lambda_theta, 0)
        self.assertLess(components.eps_lambda_theta, 1)

    def test_marginal_cost_response_matches_cost_function(self):
        params = EconomyParams(rho=0.3, eps=2.78, eta=2.0)
        eq = profit_maximize(params)
        Q, h_q, h_t = eq.Q, 1e-4 * eq.Q, 1e-3

        def marginal_cost(theta):
            up = cost_minimize(Q + h_q, params, theta=theta)
            down = cost_minimize(Q - h_q, params, theta=theta)
            return (total_cost(up.L, up.K, params, theta) - total_cost(down.L, down.K, params, theta)) / (2 * h_q)

        oracle = (
            math.log(marginal_cost(eq.theta * math.exp(h_t))) - math.log(marginal_cost(eq.theta * math.exp(-h_t)))
        ) / (2 * h_t)
        self.assertAlmostEqual(payroll_tax_components(params).eps_lambda_theta, oracle, delta=1e-4)


class LaborCompositionTests(SimpleTestCase):
    def test_cobb_douglas_calibration(self):
        self.assertLess(verify_labor_composition(EconomyParams(rho=0.0, eps=2.78, eta=2.0, tau_rev=0.0)), 1e-4)

    def test_complements(self):
        self.assertLess(verify_labor_composition(EconomyParams(rho=-1.0, eps=1.0, eta=3.0)), 1e-4)

    def test_competitive_regime(self):
        self.assertLess(verify_labor_composition(EconomyParams(eps=1e6, rho=0.5)), 1e-3)

    def test_random_grid(self):
        for params in random_valid_params(np.random.default_rng(2024), 100):
            self.assertLess(verify_labor_composition(params), 1e-4, msg=str(params))

    def test_composition_reproduces_direct_value(self):
        params = EconomyParams(rho=0.4, eps=6.0, eta=1.8)
        composed = composed_labor_elasticity(payroll_tax_components(params), params)
        self.assertAlmostEqual(composed, numeric_elasticity("L", "theta", params), delta=1e-4)


class CompetitiveLimitTests(SimpleTestCase):
    def test_all_labor(self):
        eps_L, _ = competitive_limit_elasticities(1.0, 0.0, 0.3, 2.5)
        self.assertAlmostEqual(eps_L, -2.5, places=12)

    def test_arithmetic(self):
        eps_L, eps_K = competitive_limit_elasticities(0.5, 0.5, 0.0, 1.0)
        self.assertAlmostEqual(eps_L, -1.0, places=12)
        self.assertAlmostEqual(eps_K, 0.0, places=12)

    def test_invalid_shares(self):
        with self.assertRaises(DomainError):
            competitive_limit_elasticities(1.5, -0.5, 0.0, 1.0)

    def test_large_eps_matches_formula(self):
        for rho in (-1.0, 0.0, 0.5):
            for eta in (1.5, 3.0):
                params = EconomyParams(eps=1e5, rho=rho, eta=eta)
                eq = profit_maximize(params)
                limit_L, limit_K = competitive_limit_elasticities(
                    eq.labor_cost_share, eq.capital_cost_share, rho, eta
                )
                values = numeric_elasticities(params, "theta")
                self.assertLess(rel(values["L"], limit_L), 0.01)
                self.assertLess(rel(values["K"], limit_K), 0.01)

    def test_gap_shrinks_as_supply_flattens(self):
        gaps = []
        for eps in (1.0, 5.0, 25.0, 125.0):
            report = elasticity_report(EconomyParams(eps=eps, rho=0.0, eta=2.0))
            gaps.append(abs(report.eps_L_theta - report.eps_L_theta_inf))
        self.assertEqual(gaps, sorted(gaps, reverse=True))


class ReformEffectTests(SimpleTestCase):
    def test_pure_payroll_shock(self):
        params = EconomyParams()
        effect = reform_effect(params, -0.133, 0.0)
        self.assertEqual(effect.beta_L, numeric_elasticity("L", "theta", params) * -0.133)
        self.assertEqual(effect.revenue_tax, {"L": 0.0, "K": 0.0, "revenue": 0.0})

    def test_revenue_tax_term_is_small(self):
        params = EconomyParams(tau_rev=0.015, m=0.015)
        effect = reform_effect(params, -0.133, math.log(1.015))
        revenue_term = abs(effect.revenue_tax["L"] * effect.phi2)
        self.assertLess(revenue_term, 0.05 * abs(effect.beta_L))

    def test_numeric_source(self):
        params = EconomyParams(tau_rev=0.015, m=1.0, eps=1e6)
        mixed = reform_effect(params, -0.133, 0.01)
        numeric = reform_effect(params, -0.133, 0.01, source="numeric")
        self.assertAlmostEqual(mixed.beta_R, numeric.beta_R, delta=1e-6)


class ReportTests(SimpleTestCase):
    def test_analytic_report_only_has_closed_forms(self):
        report = elasticity_report(EconomyParams(tau_rev=0.015), method=ANALYTIC)
        self.assertIsNone(report.eps_L_theta)
        self.assertIsNone(report.zeta)
        self.assertIsNotNone(report.nu)
        self.assertIsNotNone(report.eps_L_theta_inf)

    def test_numeric_report_is_finite(self):
        report = elasticity_report(EconomyParams(tau_rev=0.015))
        for name, value in report.as_dict().items():
            if name not in ("method", "params_snapshot"):
                self.assertTrue(math.isfinite(value), msg=name)

    def test_grid_order_independent_of_workers(self):
        points = random_valid_params(np.random.default_rng(9), 3)
        serial = elasticity_grid(points, workers=1)
        parallel = elasticity_grid(points, workers=2)
        self.assertEqual([r.as_dict() for r in serial], [r.as_dict() for r in parallel])

    def test_implied_chi_in_competitive_limit(self):
        terms = implied_terms(EconomyParams(eps=1e6, tau_rev=0.015, m=1.0))
        self.assertAlmostEqual(terms["chi"], 1.0, delta=1e-3)


class EconomyCommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _config(self, data):
        path = self.root / "config.json"
        path.write_text(json.dumps(data))
        return str(path)

    def test_solve_is_reproducible(self):
        config = self._config({"params": {"rho": 0.3, "eps": 2.78, "eta": 2.0}})
        call_command("economy", "solve", "--config", config, "--out", str(self.root / "a"))
        call_command("economy", "solve", "--config", config, "--out", str(self.root / "b"))
        first = (self.root / "a" / "equilibrium.json").read_bytes()
        self.assertEqual(first, (self.root / "b" / "equilibrium.json").read_bytes())
        payload = json.loads(first)
        self.assertIn("lambda", payload["equilibrium"])
        manifest = json.loads((self.root / "a" / "manifest.json").read_text())
        self.assertEqual(manifest["config"]["params"]["rho"], 0.3)
        self.assertIn("equilibrium.csv", manifest["artifacts"])

    def test_unknown_key_exits_with_config_code(self):
        config = self._config({"params": {"rho": 0.3, "bogus": 1}})
        with self.assertRaises(CommandError) as ctx:
            call_command("economy", "solve", "--config", config, "--out", str(self.root / "bad"))
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("bogus", str(ctx.exception))
        self.assertFalse((self.root / "bad" / "manifest.json").exists())

    def test_elasticities_grid_csv(self):
        config = self._config({"grid": [{"eps": 5.0}, {"rho": -0.5}], "phi1": -0.133})
        call_command("economy", "elasticities", "--config", config, "--out", str(self.root / "el"))
        lines = (self.root / "el" / "elasticities.csv").read_text().strip().splitlines()
        self.assertEqual(len(lines), 4)
        self.assertIn("beta_L", lines[0])

    def test_limits(self):
        call_command("economy", "limits", "--out", str(self.root / "lim"))
        summary = json.loads((self.root / "lim" / "limits.json").read_text())
        self.assertEqual(len(summary["rows"]), 6)
        self.assertLess(summary["max_rel_gap_L"], 0.01)


class EconomyApiTests(APITestCase):
    def setUp(self):
        self.user = get_user_model().objects.create_user(username="analyst", password="pass12345")

    def test_requires_authentication(self):
        response = self.client.post("/api/economy/solve/", {}, format="json")
        self.assertIn(response.status_code, (401, 403))

    def test_solve(self):
        self.client.force_authenticate(self.user)
        response = self.client.post("/api/economy/solve/", {"eta": 2.0, "tau_rev": 0.0}, format="json")
        self.assertEqual(response.status_code, 200)
        self.assertAlmostEqual(response.data["p"] / response.data["lambda"], 2.0, places=8)

    def test_invalid_params(self):
        self.client.force_authenticate(self.user)
        response = self.client.post("/api/economy/solve/", {"eta": 0.5}, format="json")
        self.assertEqual(response.status_code, 400)
        self.assertIn("eta", response.data)

    def test_industry(self):
        self.client.force_authenticate(self.user)
        response = self.client.post("/api/economy/industry/", {"m": 0.5, "tau_rev": 0.1}, format="json")
        self.assertEqual(response.status_code, 200)
        self.assertIn("treated", response.data)

    def test_elasticities(self):
        self.client.force_authenticate(self.user)
        response = self.client.post(
            "/api/economy/elasticities/", {"params": {"tau_rev": 0.015}, "phi2": 0.0149}, format="json"
        )
        self.assertEqual(response.status_code, 200)
        self.assertLess(response.data["report"]["eps_L_theta"], 0)
        self.assertIn("beta_L", response.data["reform_effect"])
