import pathlib

import pytest

from fdq.relation import load_csv

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def iowa():
    return load_csv(DATA_DIR / "iowa.csv", name="IOWA")


@pytest.fixture(scope="session")
def customers():
    return load_csv(DATA_DIR / "customers.csv", name="customers")


@pytest.fixture()
def data_dir():
    return DATA_DIR
