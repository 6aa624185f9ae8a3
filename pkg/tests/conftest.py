from __future__ import annotations

import pytest

from cracking_aegis.protocol import PromptVersion, assemble_system_prompt, default_persona
from cracking_aegis.script import canonical_script_path, load_script_file


@pytest.fixture(scope="session")
def script():
    return load_script_file(canonical_script_path())


@pytest.fixture(scope="session")
def bundle_v3(script):
    return assemble_system_prompt(default_persona(), script, PromptVersion.V3)
