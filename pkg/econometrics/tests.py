import json
import math
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import statsmodels.api as sm
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag

from config.exceptions import AbsorptionError, ConfigurationError, DomainError, EstimationError, InferenceError
from econometrics.balance import balance_check
from econometrics.covariance import cluster_robust_vcov
from econometrics.event_study import (
    FIRM,
    add_event_columns,
    event_frame,
    event_study,
    joint_pretrend_rejects,
    pooled_did,
    post_period_mean,
    pre_period_coefficients,
)
from econometrics.fixed_effects import absorb_fixed_effects, absorbed_dof, group_codes, singleton_mask
from econometrics.matching import MATCHED_POST, decile_codes, matching_did
from econometrics.postprocess import (
    elasticity_postprocess,
    labor_cost_first_stage,
    labor_market_ratios,
    statutory_dlog,
)
from econometrics.regression import ols, tsls
from econometrics.specs import RegressionSpec, event_column, event_times
from panels.firms import FirmPanelConfig
from panels.io import generate_panel, replication_seed
from panels.sectors import SectorTreeConfig


def firm_panel(n_firms=600, seed=3, sectors=None, **firm_options):
    dataset = generate_panel(
        sectors or SectorTreeConfig(),
        FirmPanelConfig(n_firms=n_firms, **firm_options),
        seed=seed,
        with_workers=False,
    )
    return dataset.firms


def unbalanced_frame(seed=0, firms=25, years=10, keep=0.8):
    rng = np.random.default_rng(seed)
    grid = pd.DataFrame(
        [(f, y) for f in range(firms) for y in range(years)], columns=["firm", "year"]
    )
    frame = grid[rng.random(len(grid)) < keep].reset_index(drop=True)
    n = len(frame)
    firm_fe = rng.normal(size=firms)[frame["firm"]]
    year_fe = rng.normal(size=years)[frame["year"]]
    frame["x"] = rng.normal(size=n) + 0.5 * firm_fe
    frame["y"] = 1.5 * frame["x"] + firm_fe + year_fe + rng.normal(scale=0.3, size=n)
    frame["g"] = frame["firm"] % 5
    return frame


class SpecTests(SimpleTestCase):
    def test_event_times_skip_reference(self):
        self.assertEqual(event_times(), [-4, -3, -2, 0, 1, 2, 3])
        self.assertEqual(event_column("D", -2), "D_k-2")

    def test_order_condition(self):
        with self.assertRaises(ConfigurationError):
            RegressionSpec(outcome="y", endogenous=("a", "b"), instruments=("z",))

    def test_reference_period_is_not_a_regressor(self):
        with self.assertRaises(ConfigurationError):
            RegressionSpec(outcome="y", controls=(event_column("D", -1),))


class FixedEffectsTests(SimpleTestCase):
    def test_single_fixed_effect_is_one_sweep(self):
        codes = np.array([0, 0, 1, 1, 1, 2, 2])
        values = np.arange(7, dtype=float)[:, None] ** 2
        out, sweeps = absorb_fixed_effects(values, [codes])
        self.assertEqual(sweeps, 1)
        for g in range(3):
            self.assertAlmostEqual(out[codes == g, 0].mean(), 0.0, places=12)

    def test_absorption_is_idempotent(self):
        frame = unbalanced_frame(keep=1.0)
        codes = [group_codes(frame, "firm"), group_codes(frame, "year")]
        once, _ = absorb_fixed_effects(frame[["x", "y"]].to_numpy(), codes)
        twice, _ = absorb_fixed_effects(once, codes)
        np.testing.assert_allclose(twice, once, atol=1e-8)

    def test_non_convergence_names_column(self):
        frame = unbalanced_frame()
        codes = [group_codes(frame, "firm"), group_codes(frame, "year")]
        with self.assertRaises(AbsorptionError) as ctx:
            absorb_fixed_effects(frame[["x", "y"]].to_numpy(), codes, max_sweeps=1, names=["x", "y"])
        self.assertIn(ctx.exception.column, ("x", "y"))
        self.assertEqual(ctx.exception.sweeps, 1)

    def test_singletons_removed_iteratively(self):
        a = np.array([0, 0, 1, 2, 2])
        b = np.array([0, 1, 1, 2, 2])
        np.testing.assert_array_equal(singleton_mask([a, b]), [False, False, False, True, True])

    def test_interaction_key(self):
        frame = pd.DataFrame({"s": [1, 1, 2, 2], "year": [2010, 2011, 2010, 2010]})
        codes = group_codes(frame, "s:year")
        self.assertEqual(codes[2], codes[3])
        self.assertEqual(len(set(codes)), 3)

    def test_two_way_matches_dummy_regression(self):
        frame = unbalanced_frame()
        self.assertLessEqual(len(frame), 500)
        report = ols(RegressionSpec(outcome="y", controls=("x",), fixed_effects=("firm", "year")), frame)

        dummies = pd.get_dummies(frame["firm"], prefix="f", dtype=float)
        years = pd.get_dummies(frame["year"], prefix="t", drop_first=True, dtype=float)
        X = np.column_stack([frame["x"].to_numpy(), dummies.to_numpy(), years.to_numpy()])
        beta, *_ = np.linalg.lstsq(X, frame["y"].to_numpy(), rcond=None)
        self.assertAlmostEqual(report.coef("x"), beta[0], delta=1e-8)

    def test_absorbed_dof_skips_effects_nested_in_clusters(self):
        frame = pd.DataFrame([(f, y) for f in range(6) for y in range(4)], columns=["firm", "year"])
        codes = [group_codes(frame, "firm"), group_codes(frame, "year")]
        self.assertEqual(absorbed_dof(codes), 6 + 4 - 1)
        self.assertEqual(absorbed_dof(codes, clusters=(frame["firm"] // 2).to_numpy()), 4)
        self.assertEqual(absorbed_dof([]), 0)


class CovarianceTests(SimpleTestCase):
    def test_matches_sum_over_clusters(self):
        rng = np.random.default_rng(11)
        n = 50
        frame = pd.DataFrame({"x1": rng.normal(size=n), "x2": rng.normal(size=n), "g": np.arange(n) % 7})
        frame["y"] = 1.0 + 0.5 * frame["x1"] - frame["x2"] + rng.normal(size=n)
        report = ols(RegressionSpec(outcome="y", controls=("x1", "x2"), cluster="g"), frame)

        X = np.column_stack([np.ones(n), frame["x1"], frame["x2"]])
        y = frame["y"].to_numpy()
        beta = np.linalg.solve(X.T @ X, X.T @ y)
        resid = y - X @ beta
        meat = np.zeros((3, 3))
        for g in range(7):
            s = X[frame["g"] == g].T @ resid[frame["g"] == g]
            meat += np.outer(s, s)
        bread = np.linalg.inv(X.T @ X)
        factor = 7 / 6 * (n - 1) / (n - 3)
        oracle = factor * bread @ meat @ bread
        ses = [report.se(name) for name in ("const", "x1", "x2")]
        np.testing.assert_allclose(ses, np.sqrt(np.diag(oracle)), rtol=1e-10)

    def test_matches_statsmodels_cluster_fit(self):
        rng = np.random.default_rng(12)
        n = 300
        frame = pd.DataFrame({"x": rng.normal(size=n), "g": rng.integers(0, 20, size=n)})
        frame["y"] = 0.3 - 0.7 * frame["x"] + rng.normal(size=n)
        report = ols(RegressionSpec(outcome="y", controls=("x",), cluster="g"), frame)

        X = sm.add_constant(frame[["x"]].to_numpy())
        fit = sm.OLS(frame["y"].to_numpy(), X).fit(cov_type="cluster", cov_kwds={"groups": frame["g"].to_numpy()})
        np.testing.assert_allclose([report.coef("const"), report.coef("x")], fit.params, rtol=1e-10)
        np.testing.assert_allclose([report.se("const"), report.se("x")], fit.bse, rtol=1e-8)
        self.assertEqual(report.n_clusters, 20)

    def test_single_cluster_rejected(self):
        X = np.ones((5, 1))
        with self.assertRaises(InferenceError):
            cluster_robust_vcov(X, np.arange(5.0), np.zeros(5))


class RegressionTests(SimpleTestCase):
    def test_perfect_fit_has_zero_standard_errors(self):
        x = np.linspace(0, 1, 40)
        frame = pd.DataFrame({"x": x, "y": 1.0 + 2.0 * x, "g": np.arange(40) % 4})
        report = ols(RegressionSpec(outcome="y", controls=("x",), cluster="g"), frame)
        self.assertAlmostEqual(report.coef("x"), 2.0, places=10)
        self.assertAlmostEqual(report.coef("const"), 1.0, places=10)
        self.assertAlmostEqual(report.se("x"), 0.0, places=10)
        self.assertAlmostEqual(report.r2, 1.0, places=10)

    def test_known_slope(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=10_000)
        frame = pd.DataFrame({"x": x, "y": 2.0 * x + rng.normal(size=x.size)})
        report = ols(RegressionSpec(outcome="y", controls=("x",)), frame)
        self.assertLess(abs(report.coef("x") - 2.0), 3 * report.se("x"))

    def test_absorbed_control_is_dropped(self):
        frame = unbalanced_frame()
        frame["firm_level"] = frame["firm"] * 0.1
        report = ols(RegressionSpec(outcome="y", controls=("x", "firm_level"), fixed_effects=("firm",)), frame)
        self.assertIn("firm_level", report.dropped)
        self.assertNotIn("firm_level", report.coefficients)

    def test_missing_column(self):
        with self.assertRaises(ConfigurationError):
            ols(RegressionSpec(outcome="y", controls=("nope",)), pd.DataFrame({"y": [1.0, 2.0]}))

    def test_self_instrumented_equals_ols(self):
        frame = unbalanced_frame()
        iv = tsls(RegressionSpec(outcome="y", endogenous=("x",), instruments=("x",), fixed_effects=("firm",)), frame)
        ls = ols(RegressionSpec(outcome="y", controls=("x",), fixed_effects=("firm",)), frame)
        self.assertAlmostEqual(iv.coef("x"), ls.coef("x"), places=10)
        self.assertAlmostEqual(iv.se("x"), ls.se("x"), places=10)

    def test_absorbed_instrument_is_an_error(self):
        frame = unbalanced_frame()
        frame["z"] = frame["firm"] * 1.0
        with self.assertRaises(EstimationError):
            tsls(RegressionSpec(outcome="y", endogenous=("x",), instruments=("z",), fixed_effects=("firm",)), frame)


class PooledDidTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.panel = firm_panel(n_firms=2000, seed=21)

    def test_wald_identity(self):
        did = pooled_did(self.panel)
        iv = did.iv.coef("treated_now")
        self.assertAlmostEqual(iv, did.wald_ratio, delta=1e-10 * max(1.0, abs(iv)))

    def test_recovers_late(self):
        did = pooled_did(self.panel)
        iv = did.iv["treated_now"]
        self.assertLess(abs(iv.coef - 0.09), 3 * iv.se)
        reduced = did.reduced_form["eligible_now"]
        self.assertLess(abs(reduced.coef - did.pi * 0.09), 3 * reduced.se)
        self.assertGreater(did.iv.first_stage_F["treated_now"], 10)

    def test_row_order_does_not_matter(self):
        shuffled = self.panel.sample(frac=1.0, random_state=4)
        a = pooled_did(self.panel).iv["treated_now"]
        b = pooled_did(shuffled).iv["treated_now"]
        self.assertAlmostEqual(a.coef, b.coef, delta=1e-8)
        self.assertAlmostEqual(a.se, b.se, delta=1e-8)

    def test_size_subsample(self):
        did = pooled_did(self.panel, subsample={"size_class": ["small", "medium"]})
        self.assertLess(did.iv.n_obs, len(self.panel))

    def test_labor_cost_first_stage(self):
        cost = labor_cost_first_stage(self.panel)
        self.assertAlmostEqual(cost["statutory_dlog"], -0.157, places=3)
        self.assertLess(abs(cost["iv_dlog"] - cost["panel_statutory_dlog"]), 4 * cost["iv_se"] + 1e-6)

    @tag("slow")
    def test_iv_mean_over_replications(self):
        estimates = []
        for rep in range(200):
            did = pooled_did(firm_panel(n_firms=5000, seed=replication_seed(60, rep)))
            iv = did.iv.coef("treated_now")
            self.assertAlmostEqual(iv, did.wald_ratio, delta=1e-10 * max(1.0, abs(iv)))
            estimates.append(iv)
        # acceptance band: mean within 0.5 Monte Carlo standard errors of 0.09, the
        # Monte Carlo SE being the sd of single-replication estimates (not sd / sqrt(200))
        mc_se_multiple = 0.5
        self.assertLess(abs(np.mean(estimates) - 0.09), mc_se_multiple * np.std(estimates, ddof=1))

    @tag("slow")
    def test_ci_coverage_under_serially_correlated_errors(self):
        covered, ses, estimates = 0, [], []
        for rep in range(200):
            panel = firm_panel(n_firms=5000, seed=replication_seed(70, rep), error="ar1", serial_corr_rho=0.5)
            did = pooled_did(panel)
            self.assertGreaterEqual(did.iv.n_clusters, 100)
            iv = did.iv["treated_now"]
            low, high = iv.ci()
            covered += low <= 0.09 <= high
            ses.append(iv.se)
            estimates.append(iv.coef)
        self.assertGreaterEqual(covered / 200, 0.92)
        self.assertLessEqual(covered / 200, 0.98)
        self.assertAlmostEqual(np.mean(ses) / np.std(estimates, ddof=1), 1.0, delta=0.2)


class EventStudyTests(SimpleTestCase):
    def test_trim_drops_out_of_window_years(self):
        panel = firm_panel(n_firms=200, seed=2)
        frame = add_event_columns(panel, FIRM)
        own = frame["year"] - frame["first_treated_year"]
        treated = frame["first_treated_year"] > 0
        self.assertTrue(own[treated].between(-4, 3).all())
        never = (panel["cohort"] == 0) & (panel["first_treated_year"] == 0)
        self.assertEqual(int(never.sum()), int(((frame["cohort"] == 0) & ~treated).sum()))

    def test_step_effect(self):
        report = event_study(firm_panel(n_firms=2000, seed=8))
        self.assertNotIn(-1, report.event_profile)
        self.assertTrue(0.06 <= post_period_mean(report) <= 0.12)
        for k, c in pre_period_coefficients(report).items():
            self.assertLess(abs(c.t), 3.0, msg=f"k={k}")
        frame = event_frame(report)
        self.assertEqual(list(frame["k"]), [-4, -3, -2, 0, 1, 2, 3])

    def test_pretrend_is_detected(self):
        sectors = SectorTreeConfig(confounding=True, trend_shift=0.05)
        report = event_study(firm_panel(n_firms=2000, seed=8, sectors=sectors))
        self.assertTrue(joint_pretrend_rejects(report))

    def test_binned_endpoints_keep_all_rows(self):
        panel = firm_panel(n_firms=300, seed=9)
        report = event_study(panel, endpoints="bin")
        self.assertEqual(report.n_obs + report.singletons_dropped, len(panel))

    def test_unknown_endpoint_mode(self):
        with self.assertRaises(ConfigurationError):
            add_event_columns(firm_panel(n_firms=50), FIRM, endpoints="wrap")

    @tag("slow")
    def test_null_effect_pre_and_post_pass(self):
        stats = []
        for rep in range(20):
            panel = firm_panel(n_firms=800, seed=replication_seed(30, rep), att_employment=0.0)
            stats += [abs(c.t) for c in event_study(panel).event_profile.values()]
        self.assertGreaterEqual(np.mean(np.array(stats) < 1.96), 0.9)


class MatchingTests(SimpleTestCase):
    def twin_panel(self, n_pairs=20):
        rng = np.random.default_rng(1)
        base = rng.normal(size=(n_pairs, 3))
        rows = []
        for firm in range(2 * n_pairs):
            treated = firm < n_pairs
            emp, wage, hires = base[firm % n_pairs]
            for year in (2010, 2011, 2012, 2013):
                effect = 0.1 if treated and year >= 2012 else 0.0
                rows.append({
                    "firm_id": firm + 1,
                    "year": year,
                    "first_treated_year": 2012 if treated else 0,
                    "log_employment": emp + 0.01 * (year - 2010) + effect,
                    "log_avg_wage": wage,
                    "hires": hires,
                    "cluster": firm % 6,
                })
        return pd.DataFrame(rows)

    def test_identical_populations_fully_matched(self):
        result = matching_did(self.twin_panel())
        self.assertEqual(result.unmatched, [])
        self.assertEqual(len(result.pairs), 20)
        self.assertAlmostEqual(result.report.coef(MATCHED_POST), 0.1, places=8)

    def test_no_controls_is_an_error(self):
        panel = self.twin_panel()
        panel["first_treated_year"] = 2012
        with self.assertRaises(EstimationError):
            matching_did(panel)

    def test_equal_values_share_a_decile(self):
        codes = decile_codes([1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0])
        self.assertEqual(codes[0], codes[1])

    def test_placebo_is_near_zero(self):
        result = matching_did(firm_panel(n_firms=1500, seed=12), placebo=True, seed=3)
        self.assertLess(abs(result.effect.t), 3.0)

    @tag("slow")
    def test_placebo_rarely_rejects(self):
        passed = []
        for rep in range(100):
            panel = firm_panel(n_firms=500, seed=replication_seed(40, rep))
            passed.append(abs(matching_did(panel, placebo=True, seed=rep).effect.t) < 1.96)
        self.assertGreaterEqual(np.mean(passed), 0.9)


class BalanceTests(SimpleTestCase):
    def test_mechanical_covariate(self):
        panel = firm_panel(n_firms=300, seed=5)
        panel["mirror"] = panel["eligible_ever"].astype(float)
        result = balance_check(panel, covariates=("mirror", "log_employment"))
        self.assertAlmostEqual(result.baseline.coef("mirror"), 1.0, places=8)
        self.assertAlmostEqual(result.baseline.r2, 1.0, places=8)
        self.assertIn("mirror", result.twfe.dropped)

    def test_constant_covariate_dropped_in_twfe(self):
        panel = firm_panel(n_firms=300, seed=5)
        panel["constant_covariate"] = 1.0
        result = balance_check(panel, covariates=("log_avg_wage", "constant_covariate"))
        self.assertIn("constant_covariate", result.twfe.dropped)

    def test_independent_covariate_is_balanced(self):
        panel = firm_panel(n_firms=1000, seed=6, att_employment=0.0)
        panel["noise"] = np.random.default_rng(0).normal(size=len(panel))
        result = balance_check(panel, covariates=("noise",))
        self.assertLess(abs(result.baseline["noise"].t), 3.0)
        self.assertLess(abs(result.twfe["noise"].t), 3.0)


class PostprocessTests(SimpleTestCase):
    def test_employment_elasticity(self):
        self.assertAlmostEqual(elasticity_postprocess(0.0944, -0.133), -0.71, delta=0.005)

    def test_null_effect(self):
        self.assertEqual(elasticity_postprocess(0.0, -0.157), 0.0)

    def test_zero_cost_change(self):
        with self.assertRaises(DomainError):
            elasticity_postprocess(0.09, 0.0)

    def test_statutory_change_differs_from_estimate(self):
        self.assertAlmostEqual(statutory_dlog(), math.log(1.12) - math.log(1.31), places=12)
        self.assertGreater(abs(statutory_dlog() - (-0.133)), 0.02)

    def test_ratios(self):
        ratios = labor_market_ratios(0.09, 0.04, 0.0)
        self.assertAlmostEqual(ratios["employment_over_net_earnings"], 2.25)
        self.assertIsNone(ratios["employment_over_gross_earnings"])


class EstimateCommandTests(TestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls.tmp.name)
        config = cls.root / "panel.json"
        config.write_text(json.dumps({"firms": {"n_firms": 1500}, "workers": {"workers_per_firm": 2.0}}))
        call_command("panel", "generate", "--config", str(config), "--seed", "5", "--out", str(cls.root / "panel"))

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def _config(self, name, data):
        path = self.root / name
        path.write_text(json.dumps(data))
        return str(path)

    def _estimate(self, action, out, config=None):
        args = ["estimate", action, "--input", str(self.root / "panel"), "--out", str(self.root / out)]
        if config:
            args += ["--config", config]
        call_command(*args)
        return self.root / out

    def test_event_study_end_to_end(self):
        out = self._estimate("event-study", "es")
        lines = (out / "event_study.csv").read_text().strip().splitlines()
        self.assertEqual(lines[0], "k,beta,se")
        self.assertEqual(len(lines), 8)
        payload = json.loads((out / "event_study.json").read_text())
        self.assertTrue(0.06 <= payload["post_period_mean"] <= 0.12)
        self.assertIn("<svg", (out / "event_study.svg").read_text())

    def test_event_study_is_reproducible(self):
        first = self._estimate("event-study", "es_a")
        second = self._estimate("event-study", "es_b")
        self.assertEqual((first / "event_study.json").read_bytes(), (second / "event_study.json").read_bytes())

    def test_did_reports_elasticity(self):
        out = self._estimate("did", "did")
        payload = json.loads((out / "did.json").read_text())
        employment = payload["outcomes"]["log_employment"]
        self.assertAlmostEqual(employment["iv"]["coefficients"]["treated_now"]["coef"], employment["wald_ratio"], places=10)
        self.assertLess(payload["employment_elasticity"]["estimated_cost_change"], 0)

    def test_worker_level_did(self):
        config = self._config("worker.json", {"level": "worker"})
        out = self._estimate("did", "did_worker", config)
        payload = json.loads((out / "did.json").read_text())
        self.assertIn("log_net_earnings", payload["outcomes"])

    def test_match_did_and_balance(self):
        out = self._estimate("match-did", "match")
        self.assertTrue((out / "matched_pairs.csv").exists())
        out = self._estimate("balance", "balance")
        payload = json.loads((out / "balance.json").read_text())
        self.assertIn("baseline", payload)

    def test_missing_input_exits_with_config_code(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("estimate", "did", "--out", str(self.root / "nowhere"))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_unknown_config_key_exits_with_config_code(self):
        config = self._config("bad.json", {"windows": [-4, 3]})
        with self.assertRaises(CommandError) as ctx:
            self._estimate("event-study", "bad", config)
        self.assertEqual(ctx.exception.returncode, 1)

    def test_report_replots_event_study(self):
        source = self._estimate("event-study", "es_source")
        call_command("report", "plot", "--input", str(source), "--out", str(self.root / "replot"))
        self.assertIn("<svg", (self.root / "replot" / "event_study.svg").read_text())

    def test_report_without_csv_exits_with_config_code(self):
        empty = self.root / "empty"
        empty.mkdir(exist_ok=True)
        with self.assertRaises(CommandError) as ctx:
            call_command("report", "plot", "--input", str(empty), "--out", str(self.root / "replot_empty"))
        self.assertEqual(ctx.exception.returncode, 1)
