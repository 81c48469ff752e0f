import json
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag

from config.exceptions import ConfigurationError
from econometrics.event_study import FIRM, event_study, pooled_did
from econometrics.regression import ols
from econometrics.specs import RegressionSpec
from panels.compliance import YEARS, assign_compliance, first_treated_years
from panels.firms import BASELINE_TAX_RATE, TAX_CUT, FirmPanelConfig, generate_firm_panel, size_class
from panels.io import DATASET_JSON, FIRMS_CSV, WORKERS_CSV, generate_panel, read_panel, replication_seed, write_panel
from panels.sectors import NEVER, SectorTreeConfig, generate_sector_tree
from panels.workers import WorkerPanelConfig, generate_worker_panel, meets_tenure_rule


def small_tree(seed=1, **options):
    return generate_sector_tree(SectorTreeConfig(**options), seed)


def firms_for(tree, n=400, seed=0):
    rng = np.random.default_rng(seed)
    return pd.DataFrame({"firm_id": np.arange(1, n + 1), "sector_7d": rng.choice(tree.codes, size=n)})


class SectorTreeTests(SimpleTestCase):
    def test_example_tree_is_deterministic(self):
        config = SectorTreeConfig(sectors_1d=3, sectors_7d=30, states=2)
        a = generate_sector_tree(config, 7)
        b = generate_sector_tree(config, 7)
        self.assertEqual(len(a.frame), 30)
        self.assertTrue(a.frame.equals(b.frame))
        self.assertEqual(a.states, (1, 2))
        self.assertTrue(set(a.frame["cohort"]) <= {NEVER, 2012, 2013, 2014})

    def test_codes_nest(self):
        frame = small_tree().frame
        self.assertTrue((frame["sector_7d"] // 100 == frame["sector_5d"]).all())
        self.assertTrue((frame["sector_5d"] // 1000 == frame["sector_1d"]).all())

    def test_eligible_count_is_binomial(self):
        counts = [len(small_tree(seed=s).eligible) for s in range(20)]
        for count in counts:
            self.assertTrue(2 <= count <= 16)
        self.assertLess(abs(np.mean(counts) - 9.0), 3 * np.sqrt(30 * 0.3 * 0.7 / 20))

    def test_confounding_shifts_eligible_trends(self):
        frame = small_tree(confounding=True, trend_shift=0.04).frame
        eligible = frame["cohort"] != NEVER
        self.assertTrue((frame.loc[eligible, "trend"] == 0.04).all())
        self.assertTrue((frame.loc[~eligible, "trend"] == 0.0).all())

    def test_zero_count_rejected(self):
        with self.assertRaises(ConfigurationError) as ctx:
            SectorTreeConfig(sectors_1d=0)
        self.assertEqual(ctx.exception.key, "sectors_1d")


class ComplianceTests(SimpleTestCase):
    def test_perfect_compliance(self):
        tree = small_tree()
        flags = assign_compliance(tree, firms_for(tree), p_take=1.0, p_ncm=0.0, seed=2)
        np.testing.assert_array_equal(flags["treated_now"], flags["eligible_now"])

    def test_null_compliance(self):
        tree = small_tree()
        flags = assign_compliance(tree, firms_for(tree), p_take=0.0, p_ncm=0.0, seed=2)
        self.assertEqual(int(flags["treated_now"].sum()), 0)

    def test_treatment_is_absorbing(self):
        tree = small_tree()
        flags = assign_compliance(tree, firms_for(tree), p_take=0.7, p_ncm=0.05, seed=3)
        steps = flags.groupby("firm_id")["treated_now"].diff().dropna()
        self.assertGreaterEqual(steps.min(), 0)
        self.assertEqual(len(flags), 400 * len(YEARS))

    def test_probability_out_of_range(self):
        with self.assertRaises(ConfigurationError):
            first_treated_years(np.array([2012]), 1.2, 0.0, np.random.default_rng(0))

    def test_first_stage_near_take_up_gap(self):
        panel = generate_panel(firm_config=FirmPanelConfig(n_firms=10_000), seed=11, with_workers=False).firms
        spec = RegressionSpec(
            outcome="treated_now", controls=("eligible_now",), fixed_effects=FIRM.fixed_effects, cluster=FIRM.cluster
        )
        pi = ols(spec, panel)["eligible_now"]
        self.assertGreater(pi.coef, 0)
        self.assertLess(abs(pi.coef - 0.65), 3 * pi.se)


class FirmPanelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tree = small_tree(seed=4)
        cls.frame, cls.truth = generate_firm_panel(cls.tree, FirmPanelConfig(n_firms=500), seed=9)

    def test_size_class_cutoffs(self):
        self.assertEqual(list(size_class([9, 10, 49, 50])), ["small", "medium", "medium", "large"])

    def test_tax_rate_follows_treatment(self):
        treated = self.frame["treated_now"] == 1
        np.testing.assert_allclose(self.frame.loc[treated, "payroll_tax_rate"], BASELINE_TAX_RATE - TAX_CUT)
        np.testing.assert_allclose(self.frame.loc[~treated, "payroll_tax_rate"], BASELINE_TAX_RATE)

    def test_eligibility_follows_cohort(self):
        cohort = self.frame["cohort"]
        expected = ((cohort != NEVER) & (self.frame["year"] >= cohort)).astype(int)
        np.testing.assert_array_equal(self.frame["eligible_now"], expected)

    def test_truth_recorded(self):
        for key in ("att_employment", "take_up_prob", "ncm_prob", "first_stage_dlog_cost", "serial_corr_rho"):
            self.assertIn(key, self.truth)
        self.assertAlmostEqual(self.truth["first_stage_dlog_cost"], np.log1p(0.1178) - np.log1p(0.3178), places=12)

    def test_same_seed_same_frame(self):
        again, _ = generate_firm_panel(self.tree, FirmPanelConfig(n_firms=500), seed=9)
        self.assertTrue(self.frame.equals(again))

    def test_invalid_serial_correlation(self):
        with self.assertRaises(ConfigurationError):
            FirmPanelConfig(error="ar1", serial_corr_rho=1.0)

    def test_size_heterogeneous_effects_are_ordered(self):
        config = FirmPanelConfig(n_firms=5000, att_by_size={"small": 0.15, "medium": 0.09, "large": 0.03})
        panel = generate_panel(firm_config=config, seed=13, with_workers=False).firms
        estimates = [
            pooled_did(panel, subsample={"size_class": size}).iv.coef("treated_now")
            for size in ("small", "medium", "large")
        ]
        self.assertEqual(estimates, sorted(estimates, reverse=True))

    @tag("slow")
    def test_pre_period_outcomes_balanced_on_eligibility(self):
        passed = []
        for rep in range(100):
            panel = generate_panel(
                firm_config=FirmPanelConfig(n_firms=500), seed=replication_seed(50, rep), with_workers=False
            ).firms
            pre = panel[panel["year"] < 2012]
            report = ols(RegressionSpec(outcome="log_employment", controls=("eligible_ever",), cluster="cluster"), pre)
            passed.append(abs(report["eligible_ever"].t) < 1.96)
        self.assertGreaterEqual(np.mean(passed), 0.9)


class WorkerPanelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        tree = small_tree(seed=5)
        cls.firms, _ = generate_firm_panel(tree, FirmPanelConfig(n_firms=300), seed=2)
        cls.workers, cls.truth = generate_worker_panel(cls.firms, WorkerPanelConfig(mover_rate=0.2), seed=3)

    def test_tenure_rule(self):
        self.assertTrue(meets_tenure_rule(2009, 2011))
        self.assertFalse(meets_tenure_rule(2010, 2011))
        self.assertTrue((self.workers["tenure_pre"] >= 3).all())

    def test_gross_net_identity(self):
        rates = self.firms[["firm_id", "year", "payroll_tax_rate"]]
        merged = self.workers.merge(rates, on=["firm_id", "year"], how="left")
        np.testing.assert_allclose(
            merged["gross_earnings"], merged["net_earnings"] * (1.0 + merged["payroll_tax_rate"]), rtol=1e-15
        )

    def test_movers_keep_base_assignment(self):
        base = self.firms[["firm_id", "year", "eligible_now"]].rename(
            columns={"firm_id": "firm_id_base", "eligible_now": "base_eligible"}
        )
        merged = self.workers.merge(base, on=["firm_id_base", "year"], how="left")
        np.testing.assert_array_equal(merged["eligible_now"], merged["base_eligible"])
        self.assertTrue((merged["firm_id"] != merged["firm_id_base"]).any())

    def test_no_moves_in_base_period(self):
        early = self.workers[self.workers["year"] <= 2011]
        self.assertTrue((early["firm_id"] == early["firm_id_base"]).all())

    def test_profile_recorded(self):
        self.assertEqual(self.truth["att_net_earnings"], {"0": 0.0, "1": 0.0, "2": 0.02, "3": 0.04})

    @tag("slow")
    def test_event_study_recovers_earnings_profile(self):
        dataset = generate_panel(firm_config=FirmPanelConfig(n_firms=3000), seed=17)
        report = event_study(dataset.workers, level="worker")
        for k, target in ((0, 0.0), (3, 0.04)):
            c = report.event_profile[k]
            self.assertLess(abs(c.coef - target), 3 * c.se, msg=f"k={k}")


class PanelIoTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_same_seed_byte_identical_csv(self):
        config = FirmPanelConfig(n_firms=150)
        write_panel(generate_panel(firm_config=config, seed=42), self.root / "a")
        write_panel(generate_panel(firm_config=config, seed=42), self.root / "b")
        for name in (FIRMS_CSV, WORKERS_CSV, DATASET_JSON):
            self.assertEqual((self.root / "a" / name).read_bytes(), (self.root / "b" / name).read_bytes())

    def test_read_back(self):
        dataset = generate_panel(firm_config=FirmPanelConfig(n_firms=100), seed=1)
        write_panel(dataset, self.root / "p")
        loaded = read_panel(self.root / "p")
        self.assertEqual(list(loaded.firms.columns), list(dataset.firms.columns))
        self.assertEqual(len(loaded.workers), len(dataset.workers))
        self.assertEqual(loaded.truth["take_up_prob"], 0.7)

    def test_missing_directory(self):
        with self.assertRaises(ConfigurationError):
            read_panel(self.root / "absent")

    def test_replication_seeds_differ(self):
        self.assertNotEqual(replication_seed(7, 0), replication_seed(7, 1))
        self.assertEqual(replication_seed(7, 3), replication_seed(7, 3))


class PanelCommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _config(self, data):
        path = self.root / "config.json"
        path.write_text(json.dumps(data))
        return str(path)

    def test_generate(self):
        config = self._config({"firms": {"n_firms": 120}})
        call_command("panel", "generate", "--config", config, "--seed", "3", "--out", str(self.root / "out"))
        manifest = json.loads((self.root / "out" / "manifest.json").read_text())
        self.assertEqual(manifest["seed"], 3)
        self.assertEqual(manifest["truth"]["take_up_prob"], 0.7)
        self.assertEqual(sorted(manifest["artifacts"]), sorted([DATASET_JSON, FIRMS_CSV, WORKERS_CSV]))

    def test_invalid_probability_exits_with_config_code(self):
        config = self._config({"firms": {"p_take": 1.5}})
        with self.assertRaises(CommandError) as ctx:
            call_command("panel", "generate", "--config", config, "--out", str(self.root / "bad"))
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertFalse((self.root / "bad" / FIRMS_CSV).exists())
