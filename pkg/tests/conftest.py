import json
from pathlib import Path

import pytest

from forge.corpus import build_xref, load_snapshot

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
RECIPES = REPO_ROOT / "recipes"


@pytest.fixture(scope="session")
def manifest():
    return json.loads((Path(__file__).parent / "fixtures" / "manifest.json").read_text())


@pytest.fixture(scope="session")
def snapshot():
    return load_snapshot(FIXTURES)


@pytest.fixture(scope="session")
def graph(snapshot):
    return build_xref(snapshot)


@pytest.fixture(scope="session")
def recipes_dir():
    return RECIPES


@pytest.fixture(scope="session")
def repo_root():
    return REPO_ROOT


def recipe_path(name: str) -> Path:
    return RECIPES / f"{name}.recipe"


@pytest.fixture(scope="session")
def int64_recipe():
    from forge.recipes import load_recipe

    return load_recipe(recipe_path("int64"))


@pytest.fixture(scope="session")
def junit_recipe():
    from forge.recipes import load_recipe

    return load_recipe(recipe_path("junit-upgrade"))


@pytest.fixture(scope="session")
def time_recipe():
    from forge.recipes import load_recipe

    return load_recipe(recipe_path("time-api"))


@pytest.fixture(scope="session")
def flag_recipe():
    from forge.recipes import load_recipe

    return load_recipe(recipe_path("flag-cleanup"))
