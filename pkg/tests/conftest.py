import numpy as np
import pytest

from capsulewardrobe.catalog import AttributeVocab, Catalog, make_garment


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        status = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {name}: {status}", flush=True)


@pytest.fixture
def tiny_catalog():
    """2 layers x 3 garments over a 10-attribute vocab."""
    vocab = AttributeVocab([f"a{i}" for i in range(10)])
    garments = [
        make_garment("top1", 0, [0, 1], {"season": "winter"}),
        make_garment("top2", 0, [1, 2], {"season": "summer"}),
        make_garment("top3", 0, [2, 3], {"season": "winter"}),
        make_garment("bot1", 1, [4, 5], {"season": "winter"}),
        make_garment("bot2", 1, [5, 6], {"season": "summer"}),
        make_garment("bot3", 1, [6, 7], {"season": "winter"}),
    ]
    return Catalog(vocab, 2, garments)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
