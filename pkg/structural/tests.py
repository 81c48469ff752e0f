import json
import math
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag

from config.exceptions import ConfigurationError, SolverError
from config.serializers import validate_config
from economy.params import EconomyParams
from structural.estimation import ParamBox, cmd_estimate, latin_hypercube_starts, nelder_mead
from structural.moments import (
    PENALTY,
    MomentVector,
    cmd_objective,
    model_moments,
    moments_at,
    quadratic_distance,
    simulate_moments,
    weighting_matrix,
)
from structural.serializers import CmdFitConfigSerializer
from structural.sweep import competitive_sigma, sigma_sensitivity_sweep

PHI1 = -0.133
TRUTH = EconomyParams(eps=2.78, eta=2.0, rho=0.3)


def noiseless_moments(params=TRUTH, phi2=0.0):
    beta = model_moments(params, PHI1, phi2)
    return moments_at(params, PHI1, phi2, np.diag((0.01 * beta) ** 2))


class MomentVectorTests(SimpleTestCase):
    def test_asymmetric_vcov_rejected(self):
        vcov = np.eye(3)
        vcov[0, 1] = 0.5
        with self.assertRaises(ConfigurationError) as ctx:
            MomentVector(0.1, 0.0, 0.0, vcov)
        self.assertEqual(ctx.exception.key, "vcov")

    def test_negative_variance_rejected(self):
        with self.assertRaises(ConfigurationError):
            MomentVector(0.1, 0.0, 0.0, np.diag([1.0, -1.0, 1.0]))

    def test_wrong_shape_rejected(self):
        with self.assertRaises(ConfigurationError):
            MomentVector(0.1, 0.0, 0.0, np.eye(2))

    def test_from_dict(self):
        moments = MomentVector.from_dict({"beta_L": 0.1, "beta_K": 0.2, "beta_R": 0.3, "vcov": np.eye(3).tolist()})
        np.testing.assert_allclose(moments.values, [0.1, 0.2, 0.3])


class WeightingTests(SimpleTestCase):
    def test_inverse_of_diagonal(self):
        np.testing.assert_allclose(weighting_matrix(np.diag([1.0, 2.0, 4.0])), np.diag([1.0, 0.5, 0.25]))

    def test_singular_falls_back_to_ridge(self):
        weight = weighting_matrix(np.zeros((3, 3)))
        np.testing.assert_allclose(weight, np.eye(3) * 1e10)

    def test_quadratic_form_with_identity(self):
        self.assertEqual(quadratic_distance(np.ones(3), np.eye(3)), 3.0)


class ObjectiveTests(SimpleTestCase):
    def test_zero_at_generating_params(self):
        self.assertLessEqual(cmd_objective(noiseless_moments(), TRUTH, PHI1, 0.0), 1e-10)

    def test_increases_along_a_ray(self):
        base = noiseless_moments()
        direction = np.array([1.0, -2.0, 0.5])
        values = []
        for t in (0.0, 1e-4, 1e-3, 1e-2):
            beta = base.values + t * direction
            moved = MomentVector(beta[0], beta[1], beta[2], base.vcov)
            values.append(cmd_objective(moved, TRUTH, PHI1, 0.0))
        self.assertTrue(all(a < b for a, b in zip(values, values[1:])))

    def test_solver_failure_is_penalized(self):
        with mock.patch("structural.moments.model_moments", side_effect=SolverError("no root")):
            self.assertEqual(cmd_objective(noiseless_moments(), TRUTH, PHI1, 0.0), PENALTY)

    def test_simulated_moments_are_reproducible(self):
        vcov = noiseless_moments().vcov
        a = simulate_moments(TRUTH, PHI1, 0.0, vcov, np.random.default_rng(5))
        b = simulate_moments(TRUTH, PHI1, 0.0, vcov, np.random.default_rng(5))
        np.testing.assert_array_equal(a.values, b.values)


class SimplexTests(SimpleTestCase):
    def test_quadratic_bowl(self):
        target = np.array([0.3, 0.7])
        result = nelder_mead(lambda z: float(np.sum((z - target) ** 2)), [0.9, 0.1], ftol=0.0, xtol=1e-10)
        self.assertTrue(result.converged)
        np.testing.assert_allclose(result.z, target, atol=1e-6)

    def test_stops_on_objective(self):
        result = nelder_mead(lambda z: float(np.sum(z**2)), [0.5], ftol=1e-4)
        self.assertEqual(result.reason, "objective")
        self.assertLess(result.value, 1e-4)

    def test_evaluation_cap(self):
        result = nelder_mead(lambda z: float(np.sum((z - 0.5) ** 2)) + 1.0, [0.0, 0.0, 0.0], max_evals=10)
        self.assertFalse(result.converged)
        self.assertEqual(result.reason, "max_evals")

    def test_minimum_outside_the_cube_lands_on_the_face(self):
        result = nelder_mead(lambda z: float((z[0] - 2.0) ** 2), [0.5], ftol=0.0)
        self.assertTrue(result.converged)
        self.assertLessEqual(result.z[0], 1.0)
        self.assertAlmostEqual(result.z[0], 1.0, places=5)


class ParamBoxTests(SimpleTestCase):
    def test_eta_lower_limit_is_open(self):
        with self.assertRaises(ConfigurationError):
            ParamBox(eta=(1.01, 5.0))

    def test_eps_outside_range(self):
        with self.assertRaises(ConfigurationError) as ctx:
            ParamBox(eps=(0.1, 200.0))
        self.assertEqual(ctx.exception.key, "box.eps")

    def test_eps_is_log_scaled(self):
        box = ParamBox(eps=(0.1, 100.0))
        self.assertAlmostEqual(box.values_at([0.5, 0.0, 0.0])["eps"], math.sqrt(10.0), places=12)

    def test_fixed_coordinates_are_not_searched(self):
        box = ParamBox(eps=(2.0, 2.0), eta=(1.5, 3.0), rho=(0.3, 0.3))
        self.assertEqual(box.free, ("eta",))
        self.assertEqual(box.values_at([1.0]), {"eps": 2.0, "eta": 3.0, "rho": 0.3})

    def test_latin_hypercube_is_seeded(self):
        a = latin_hypercube_starts(3, 8, seed=11)
        np.testing.assert_array_equal(a, latin_hypercube_starts(3, 8, seed=11))
        self.assertEqual(a.shape, (8, 3))
        self.assertTrue(np.all((a >= 0) & (a <= 1)))
        # one point per stratum in every coordinate
        for column in a.T:
            self.assertEqual(sorted(np.floor(column * 8).astype(int)), list(range(8)))


class EstimationTests(SimpleTestCase):
    def test_degenerate_box_returns_truth(self):
        result = cmd_estimate(noiseless_moments(), PHI1, 0.0, ParamBox.around(2.78, 2.0, 0.3))
        self.assertTrue(result.converged)
        self.assertEqual((result.eps_hat, result.eta_hat, result.rho_hat), (2.78, 2.0, 0.3))
        self.assertLessEqual(result.objective_value, 1e-10)
        self.assertAlmostEqual(result.sigma_KL_hat, 1 / 0.7, places=12)

    def test_too_few_starts_rejected(self):
        with self.assertRaises(ConfigurationError):
            cmd_estimate(noiseless_moments(), PHI1, 0.0, starts=4)

    def test_noiseless_recovery(self):
        result = cmd_estimate(noiseless_moments(), PHI1, 0.0, seed=3)
        self.assertTrue(result.converged)
        self.assertLess(result.objective_value, 1e-8)
        self.assertGreaterEqual(result.starts_tried, 8)
        for estimate, truth in ((result.eps_hat, 2.78), (result.eta_hat, 2.0), (result.rho_hat, 0.3)):
            self.assertLess(abs(estimate - truth) / truth, 1e-3)

    @tag("slow")
    def test_weighting_does_not_move_noiseless_minimizer(self):
        moments = noiseless_moments()
        weighted = cmd_estimate(moments, PHI1, 0.0, seed=3)
        unweighted = cmd_estimate(moments, PHI1, 0.0, seed=3, weight=np.eye(3))
        for name in ("eps_hat", "eta_hat", "rho_hat"):
            self.assertAlmostEqual(getattr(weighted, name), getattr(unweighted, name), delta=1e-4)

    @tag("slow")
    def test_recovery_under_moment_noise(self):
        rng = np.random.default_rng(2024)
        beta = model_moments(TRUTH, PHI1, 0.0)
        vcov = np.diag((0.01 * beta) ** 2)
        errors = {"eps": [], "eta": [], "rho": []}
        for replication in range(20):
            moments = simulate_moments(TRUTH, PHI1, 0.0, vcov, rng)
            result = cmd_estimate(moments, PHI1, 0.0, seed=replication, workers=4)
            errors["eps"].append(abs(result.eps_hat - 2.78) / 2.78)
            errors["eta"].append(abs(result.eta_hat - 2.0) / 2.0)
            errors["rho"].append(abs(result.rho_hat - 0.3) / 0.3)
        for name, values in errors.items():
            self.assertLess(float(np.median(values)), 0.10, name)


class SweepTests(SimpleTestCase):
    # sigma = 1 solves the flat-supply response at eta = 0.5 with Cobb-Douglas shares of one half
    BETA_L = -PHI1 * 0.75

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.table = sigma_sensitivity_sweep(cls.BETA_L, [1.0, 100.0, 1e6], [0.5, 3.5], PHI1)

    def _cell(self, eps, eta):
        rows = self.table[(self.table["eps"] == eps) & (self.table["eta"] == eta)]
        self.assertEqual(len(rows), 1)
        return rows.iloc[0]

    def test_competitive_inversion(self):
        self.assertAlmostEqual(competitive_sigma(self.BETA_L, PHI1, 0.5), 1.0, delta=1e-4)

    def test_competitive_rows_appended(self):
        competitive = self.table[self.table["eps"] == math.inf]
        self.assertEqual(sorted(competitive["eta"]), [0.5, 3.5])
        self.assertEqual(len(self.table), 3 * 2 + 2)

    def test_flat_supply_column_matches_competitive_inversion(self):
        cell = self._cell(1e6, 0.5)
        self.assertTrue(cell["feasible"])
        self.assertLess(abs(cell["sigma_hat"] - 1.0), 0.01)

    def test_sigma_falls_towards_competitive_value(self):
        sigmas = [self._cell(eps, 0.5)["sigma_hat"] for eps in (1.0, 100.0, 1e6)]
        self.assertGreaterEqual(sigmas[0], sigmas[1])
        self.assertGreaterEqual(sigmas[1], sigmas[2] - 1e-3)

    def test_bias_shrinks_by_an_order_of_magnitude(self):
        low = abs(self._cell(1.0, 0.5)["relative_bias"])
        high = abs(self._cell(100.0, 0.5)["relative_bias"])
        self.assertGreater(low, 10 * high)

    def test_unreachable_cells_are_flagged(self):
        cell = self._cell(1e6, 3.5)
        self.assertFalse(cell["feasible"])
        self.assertTrue(math.isnan(cell["sigma_hat"]))

    def test_markup_mode_above_unit_demand(self):
        self.assertEqual(self._cell(100.0, 3.5)["market_mode"], "markup")
        self.assertEqual(self._cell(100.0, 0.5)["market_mode"], "price_taking")


class FitConfigTests(SimpleTestCase):
    def test_needs_exactly_one_moment_source(self):
        with self.assertRaises(ConfigurationError) as ctx:
            validate_config(CmdFitConfigSerializer, {})
        self.assertEqual(ctx.exception.key, "moments")

    def test_box_outside_range(self):
        with self.assertRaises(ConfigurationError) as ctx:
            validate_config(CmdFitConfigSerializer, {
                "truth": {"eps": 2.78, "eta": 2.0, "rho": 0.3},
                "box": {"rho": [-9.0, 0.5]},
            })
        self.assertEqual(ctx.exception.key, "box.rho")


class CmdCommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _config(self, data):
        path = self.root / "config.json"
        path.write_text(json.dumps(data))
        return str(path)

    def test_fit_in_degenerate_box(self):
        config = self._config({
            "truth": {"eps": 2.78, "eta": 2.0, "rho": 0.3},
            "box": {"eps": [2.78, 2.78], "eta": [2.0, 2.0], "rho": [0.3, 0.3]},
        })
        call_command("cmd", "fit", "--config", config, "--out", str(self.root / "fit"))
        payload = json.loads((self.root / "fit" / "cmd_result.json").read_text())
        self.assertLessEqual(payload["estimates"][0]["result"]["objective_value"], 1e-10)
        manifest = json.loads((self.root / "fit" / "manifest.json").read_text())
        self.assertEqual(manifest["truth"], {"eps": 2.78, "eta": 2.0, "rho": 0.3})

    def test_too_few_starts_exits_with_config_code(self):
        config = self._config({"truth": {"eps": 2.78, "eta": 2.0, "rho": 0.3}, "starts": 4})
        with self.assertRaises(CommandError) as ctx:
            call_command("cmd", "fit", "--config", config, "--out", str(self.root / "bad"))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_sweep_writes_table_and_chart(self):
        config = self._config({"eps_grid": [5.0, 1e6], "eta_grid": [0.5, 1.5]})
        call_command("cmd", "sweep", "--config", config, "--out", str(self.root / "sweep"))
        lines = (self.root / "sweep" / "sweep.csv").read_text().strip().splitlines()
        self.assertTrue(lines[0].startswith("eps,eta,market_mode,rho_hat,sigma_hat,feasible"))
        self.assertEqual(len(lines), 1 + 2 * 2 + 2)
        svg = (self.root / "sweep" / "sweep.svg").read_text()
        self.assertIn("<svg", svg)
