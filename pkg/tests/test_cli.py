import io
import json
import subprocess
import sys

import requests

from commentator.analytics import ExportFilters
from commentator.storage import Store
from conftest import make_corpus_csv, run_app

THREE_ROWS = make_corpus_csv([
    "I am feeling very thand today",
    "Aaj ka weather bahut accha hai",
    "kal milte hain at the office",
])


def run_cli(*args, db_dir=None):
    argv = [sys.executable, "-m", "commentator.cli", *args]
    if db_dir is not None:
        argv += ["--db-dir", str(db_dir)]
    return subprocess.run(argv, capture_output=True, text=True, timeout=60)


def seeded_store(config, engine):
    """Store with three sentences and two annotators' LID annotations."""
    store = Store(config, owner=True)
    store.import_sentences(io.StringIO(THREE_ROWS), engine)
    first = store.create_account("a1", "password-1")
    second = store.create_account("a2", "password-2")
    store.save_annotation(first, "lid", 1, ["en", "en", "en", "en", "hi", "un"])
    store.save_annotation(second, "lid", 1, ["en", "en", "en", "en", "hi", "un"])
    store.save_annotation(first, "lid", 2, ["hi"] * 6)
    return store


class TestImportCommand:
    def test_import_reports_and_exits_zero(self, tmp_path):
        csv_path = tmp_path / "demo.csv"
        csv_path.write_text(THREE_ROWS, encoding="utf-8")
        result = run_cli("import", str(csv_path), db_dir=tmp_path / "data")
        assert result.returncode == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["inserted"] == 3

    def test_import_missing_file_is_runtime_error(self, tmp_path):
        result = run_cli("import", str(tmp_path / "nope.csv"), db_dir=tmp_path / "data")
        assert result.returncode == 2
        assert "error" in result.stderr

    def test_import_refused_while_store_owned(self, config, engine, tmp_path):
        csv_path = tmp_path / "demo.csv"
        csv_path.write_text(THREE_ROWS, encoding="utf-8")
        with Store(config, owner=True):
            result = run_cli("import", str(csv_path), db_dir=config.db_dir)
        assert result.returncode == 2
        assert "locked" in result.stderr


class TestExportCommand:
    def test_export_matches_library_bytes(self, config, engine):
        store = seeded_store(config, engine)
        expected = store.export_csv(ExportFilters(task="lid"))
        store.close()
        result = run_cli("export", "lid", db_dir=config.db_dir)
        assert result.returncode == 0, result.stderr
        assert result.stdout == expected

    def test_export_bad_task_is_usage_error(self, tmp_path):
        result = run_cli("export", "badtask", db_dir=tmp_path / "data")
        assert result.returncode == 1

    def test_export_with_filters_and_out_file(self, config, engine, tmp_path):
        store = seeded_store(config, engine)
        expected = store.export_csv(ExportFilters(task="lid", min_cmi=1.0))
        store.close()
        out = tmp_path / "filtered.csv"
        result = run_cli("export", "lid", "--min-cmi", "1", "--out", str(out),
                         db_dir=config.db_dir)
        assert result.returncode == 0, result.stderr
        assert out.read_text(encoding="utf-8") == expected

    def test_export_by_username(self, config, engine):
        store = seeded_store(config, engine)
        expected = store.export_csv(
            ExportFilters(task="lid", annotator_ids=frozenset({1})))
        store.close()
        result = run_cli("export", "lid", "--annotators", "a1", db_dir=config.db_dir)
        assert result.stdout == expected

    def test_export_without_store_is_runtime_error(self, tmp_path):
        result = run_cli("export", "lid", db_dir=tmp_path / "missing")
        assert result.returncode == 2

    def test_cli_export_equals_http_export_while_serving(self, config, engine):
        store = seeded_store(config, engine)
        store.create_account("boss", "adminpassword", role="admin")
        with run_app(config, store=store, engine=engine) as (base, _):
            token = requests.post(f"{base}/api/auth/login", json={
                "username": "boss", "password": "adminpassword"}).json()["token"]
            http_bytes = requests.get(
                f"{base}/api/admin/export", params={"task": "lid", "min_cmi": "1"},
                headers={"Authorization": f"Bearer {token}"}).content
            result = run_cli("export", "lid", "--min-cmi", "1", db_dir=config.db_dir)
        store.close()
        assert result.returncode == 0, result.stderr
        assert result.stdout.encode("utf-8") == http_bytes


class TestReportCommand:
    def test_report_prints_analytics_json(self, config, engine):
        seeded_store(config, engine).close()
        result = run_cli("report", "lid", db_dir=config.db_dir)
        assert result.returncode == 0, result.stderr
        document = json.loads(result.stdout)
        assert document["task"] == "lid"
        assert document["corpus_size"] == 3
        assert document["kappa"]["mean"] == 1.0  # the two annotators agree on s1

    def test_report_bad_task_is_usage_error(self, tmp_path):
        assert run_cli("report", "nope", db_dir=tmp_path).returncode == 1


class TestUserCommand:
    def test_user_add_prints_id(self, tmp_path):
        result = run_cli("user", "add", "mira", "--password", "longpassword",
                         db_dir=tmp_path / "data")
        assert result.returncode == 0, result.stderr
        assert result.stdout.strip().isdigit()

    def test_user_add_admin_role(self, config, engine):
        result = run_cli("user", "add", "boss", "--role", "admin",
                         "--password", "longpassword", db_dir=config.db_dir)
        assert result.returncode == 0
        with Store(config) as store:
            account = store.authenticate("boss", "longpassword")
            assert account.role == "admin"

    def test_duplicate_user_is_runtime_error(self, tmp_path):
        db_dir = tmp_path / "data"
        assert run_cli("user", "add", "mira", "--password", "longpassword",
                       db_dir=db_dir).returncode == 0
        result = run_cli("user", "add", "mira", "--password", "longpassword",
                         db_dir=db_dir)
        assert result.returncode == 2

    def test_weak_password_is_runtime_error(self, tmp_path):
        result = run_cli("user", "add", "mira", "--password", "short",
                         db_dir=tmp_path / "data")
        assert result.returncode == 2


class TestUsage:
    def test_no_command_is_usage_error(self):
        assert run_cli().returncode == 1

    def test_unknown_command_is_usage_error(self):
        assert run_cli("frobnicate").returncode == 1

    def test_version_flag(self):
        result = run_cli("--version")
        assert result.returncode == 0
        assert "commentator" in result.stdout
