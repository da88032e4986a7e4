import json
from pathlib import Path

import pytest

from pathml.config import AsDescriptor, CampaignConfig, ServerDescriptor, validate_isd_as

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_manifest():
    return json.loads((FIXTURES / "manifest.json").read_text())["fixtures"]


def read_fixture(name: str) -> str:
    return (FIXTURES / name).read_text()


@pytest.fixture
def ia():
    return validate_isd_as


@pytest.fixture
def base_config():
    local = validate_isd_as("19-ffaa:0:1301")
    ases = tuple(
        AsDescriptor(validate_isd_as(f"19-ffaa:0:130{i}"), f"10.0.0.{i}", f"as{i}") for i in (2, 3, 4)
    )
    servers = tuple(ServerDescriptor(a.isd_as, a.ip, 30100, f"bw{k}") for k, a in enumerate(ases))
    return CampaignConfig(local, ases, servers, storage_root="store", seed=42)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
