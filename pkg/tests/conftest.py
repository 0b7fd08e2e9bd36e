from pathlib import Path

import pytest

from ephs.modelfile import load_model

MODELS = Path(__file__).resolve().parents[1] / "models"
DATA = Path(__file__).resolve().parent / "data"


def model_path(name: str) -> Path:
    return MODELS / name


@pytest.fixture(scope="session")
def motor():
    return load_model(model_path("motor.ephs").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def oscillator():
    return load_model(model_path("oscillator.ephs").read_text(encoding="utf-8"))
