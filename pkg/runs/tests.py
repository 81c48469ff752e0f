import json
import math
import tempfile
from pathlib import Path

import pandas as pd
from django.conf import settings
from django.contrib.auth import get_user_model
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings
from rest_framework.test import APITestCase

from runs.artifacts import MANIFEST_NAME, ArtifactWriter, dumps, read_frame, read_manifest
from runs.cli import run
from runs.models import RunRecord

NO_LEDGER = {**settings.INCIDENCE, "RECORD_RUNS": False}


class ArtifactWriterTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_commit_moves_files_into_place(self):
        writer = ArtifactWriter(self.root / "out")
        writer.write_json("a.json", {"x": 1})
        writer.write_csv("b.csv", pd.DataFrame({"k": [1, 2], "v": [0.5, 0.25]}))
        writer.write_manifest(command="test")
        writer.commit()
        names = sorted(p.name for p in (self.root / "out").iterdir())
        self.assertEqual(names, ["a.json", "b.csv", MANIFEST_NAME])
        self.assertEqual(read_manifest(self.root / "out")["artifacts"], ["a.json", "b.csv"])
        self.assertEqual(list(read_frame(self.root / "out" / "b.csv")["v"]), [0.5, 0.25])

    def test_discard_leaves_nothing(self):
        writer = ArtifactWriter(self.root / "out")
        writer.write_json("a.json", {"x": 1})
        writer.discard()
        self.assertEqual(list((self.root / "out").iterdir()), [])

    def test_duplicate_name_rejected(self):
        writer = ArtifactWriter(self.root / "out")
        writer.write_json("a.json", {})
        with self.assertRaises(ValueError):
            writer.write_json("a.json", {})
        writer.discard()

    def test_dumps_is_strict_json(self):
        text = dumps({"nan": math.nan, "inf": [math.inf, 1.0], "b": 2})
        self.assertEqual(json.loads(text), {"b": 2, "inf": [None, 1.0], "nan": None})
        self.assertLess(text.index('"b"'), text.index('"inf"'))


@override_settings(INCIDENCE=NO_LEDGER)
class CliTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _config(self, name, data):
        path = self.root / name
        path.write_text(json.dumps(data))
        return str(path)

    def test_success_returns_zero(self):
        self.assertEqual(run(["economy", "solve", "--out", str(self.root / "eq")]), 0)
        self.assertTrue((self.root / "eq" / MANIFEST_NAME).exists())

    def test_bad_config_returns_one(self):
        config = self._config("bad.json", {"params": {"eta": 0.5}})
        self.assertEqual(run(["economy", "solve", "--config", config, "--out", str(self.root / "bad")]), 1)

    def test_zero_workers_returns_one(self):
        self.assertEqual(run(["economy", "solve", "--workers", "0", "--out", str(self.root / "w")]), 1)

    def test_estimation_failure_returns_two(self):
        panel = self._config(
            "panel.json", {"firms": {"n_firms": 150, "p_take": 0.0, "p_ncm": 0.0}, "with_workers": False}
        )
        self.assertEqual(run(["panel", "generate", "--config", panel, "--seed", "4", "--out", str(self.root / "p")]), 0)
        code = run(["estimate", "did", "--input", str(self.root / "p"), "--out", str(self.root / "did")])
        self.assertEqual(code, 2)
        self.assertFalse((self.root / "did" / "did.json").exists())

    def test_usage_errors_return_one(self):
        self.assertEqual(run(["economy", "bogus-action"]), 1)
        self.assertEqual(run(["economy", "solve", "--seed", "not-a-number"]), 1)
        self.assertEqual(run(["economy"]), 1)

    def test_usage_error_through_call_command(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("economy", "bogus-action")
        self.assertEqual(ctx.exception.returncode, 1)



class RunLedgerTests(TestCase):
    def test_finish_sets_status(self):
        ok = RunRecord.objects.create(command="economy solve", output_dir="out")
        ok.finish(0)
        bad = RunRecord.objects.create(command="estimate did", output_dir="out")
        bad.finish(2, "weak instrument")
        ok.refresh_from_db()
        bad.refresh_from_db()
        self.assertEqual((ok.status, ok.exit_code), ("SUCCEEDED", 0))
        self.assertEqual((bad.status, bad.message), ("FAILED", "weak instrument"))
        self.assertIsNotNone(bad.finished_at)

    def test_command_records_run(self):
        with tempfile.TemporaryDirectory() as tmp:
            call_command("economy", "solve", "--seed", "5", "--out", tmp)
        record = RunRecord.objects.get(command="economy solve")
        self.assertEqual(record.status, "SUCCEEDED")
        self.assertEqual(record.seed, "5")
        self.assertIn("--seed", record.argv)


class RunApiTests(APITestCase):
    def setUp(self):
        self.user = get_user_model().objects.create_user(username="analyst", password="pass12345")
        for i in range(12):
            record = RunRecord.objects.create(command="panel generate" if i % 3 else "estimate did", output_dir=f"out/{i}")
            record.finish(0 if i % 4 else 2)

    def test_requires_authentication(self):
        response = self.client.get("/api/runs/")
        self.assertIn(response.status_code, (401, 403))

    def test_list_paginates(self):
        self.client.force_authenticate(self.user)
        response = self.client.get("/api/runs/", {"page_size": 5})
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.data["count"], 12)
        self.assertEqual(response.data["total_pages"], 3)
        self.assertEqual(len(response.data["results"]), 5)

    def test_filters(self):
        self.client.force_authenticate(self.user)
        response = self.client.get("/api/runs/", {"command": "estimate did"})
        self.assertEqual(response.data["count"], 4)
        response = self.client.get("/api/runs/", {"status": "failed"})
        self.assertEqual(response.data["count"], 3)

    def test_detail(self):
        self.client.force_authenticate(self.user)
        record = RunRecord.objects.filter(status="FAILED").first()
        response = self.client.get(f"/api/runs/{record.pk}/")
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.data["exit_code"], 2)
        self.assertGreaterEqual(response.data["duration_seconds"], 0)
