import importlib.util
from pathlib import Path

import pytest

SCRIPT = Path(__file__).resolve().parents[2] / "scripts" / "check_architecture.py"


@pytest.fixture(scope="module")
def checker():
    spec = importlib.util.spec_from_file_location("check_architecture", SCRIPT)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


class TestArchitecture:
    """Layer import rules"""

    def test_source_tree_has_no_violations(self, checker):
        assert checker.check_layer_violations() == []

    def test_detects_upward_import(self, checker, tmp_path):
        shared = tmp_path / "src" / "shared"
        shared.mkdir(parents=True)
        (shared / "bad.py").write_text("from src.services.network_service import train_ddnn\n")
        violations = checker.check_layer_violations(tmp_path)
        assert len(violations) == 1
        assert violations[0]["violates"] == "services"

    def test_every_layer_present(self, checker):
        assert all(count > 0 for count in checker.layer_distribution().values())
