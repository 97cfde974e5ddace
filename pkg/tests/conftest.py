import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from sbchain.core import KeyPair, Transaction, sign  # noqa: E402

settings.register_profile(
    "repo", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


class FakeView:
    """Plain dict-backed account view."""

    def __init__(self, nonces=None, balances=None):
        self.nonces = dict(nonces or {})
        self.balances = dict(balances or {})

    def nonce(self, a):
        return self.nonces.get(a, 0)

    def balance(self, a):
        return self.balances.get(a, 0)


@pytest.fixture(scope="session")
def keys():
    return [KeyPair.from_seed(b"test-%d" % i) for i in range(8)]


def pay(key, to, nonce, value=1, gas=21000, price=1, payload=b""):
    return sign(Transaction(key.address, to, nonce, value, gas, price, payload), key)
