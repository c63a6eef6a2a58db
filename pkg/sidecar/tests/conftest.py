import json
import os

import pytest
from fastapi.testclient import TestClient

from divlex_sidecar.app import create_app

CHARGE_NAMES = [
    "theft",
    "fraud",
    "smuggling",
    "bribery",
    "arson",
    "embezzlement",
    "kidnapping",
    "forgery",
]


@pytest.fixture(scope="session")
def charge_names():
    return list(CHARGE_NAMES)


@pytest.fixture(scope="session")
def vocab_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("vocab") / "vocab.jsonl"
    lines = [json.dumps({"id": i, "name": name}) for i, name in enumerate(CHARGE_NAMES)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _modes():
    modes = ["fallback"]
    if os.environ.get("SIDECAR_TEST_TRANSFORMER"):
        modes.append("transformer")
    return modes


@pytest.fixture(scope="session", params=_modes())
def client(request, vocab_file):
    app = create_app(vocab_path=str(vocab_file), mode=request.param)
    with TestClient(app) as c:
        yield c
