from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from sbchain.core import U128_MAX, Transaction, sign
from sbchain.metrics import NodeMetrics
from sbchain.txmgr import (
    Reason,
    TxPool,
    ValidationOutcome,
    eager_validate,
)

from conftest import FakeView, pay

RICH = 10**18


def view_for(*keys, balance=RICH):
    return FakeView(balances={k.address: balance for k in keys})


def test_outcome_invariant():
    ValidationOutcome(True, Reason.OK)
    with pytest.raises(ValueError):
        ValidationOutcome(True, Reason.NonceGap)
    with pytest.raises(ValueError):
        ValidationOutcome(False, Reason.OK)


def test_valid_tx_accepted(keys):
    out = eager_validate(pay(keys[0], keys[1].address, 0), view_for(keys[0]))
    assert out.accepted and out.reason is Reason.OK


def test_oversized_tx_rejected(keys):
    tx = pay(keys[0], keys[1].address, 0, gas=2_000_000, payload=b"\x00" * 40_000)
    assert eager_validate(tx, view_for(keys[0])).reason is Reason.TooLarge


def test_value_above_u128_is_too_large(keys):
    tx = pay(keys[0], keys[1].address, 0, value=U128_MAX + 1)
    assert eager_validate(tx, view_for(keys[0])).reason is Reason.TooLarge


def test_negative_value(keys):
    tx = pay(keys[0], keys[1].address, 0, value=-1)
    assert eager_validate(tx, view_for(keys[0])).reason is Reason.NegativeValue


def test_gas_over_block_limit(keys):
    tx = pay(keys[0], keys[1].address, 0, gas=30_000_001)
    assert eager_validate(tx, view_for(keys[0])).reason is Reason.GasExceedsBlockLimit


def test_bad_signature(keys):
    tx = replace(pay(keys[0], keys[1].address, 0), value=2)
    assert eager_validate(tx, view_for(keys[0])).reason is Reason.BadSignature


def test_nonce_gap_then_ok_after_commit(keys):
    view = view_for(keys[0])
    tx = pay(keys[0], keys[1].address, 5)
    assert eager_validate(tx, view).reason is Reason.NonceGap
    view.nonces[keys[0].address] = 5
    assert eager_validate(tx, view).accepted


def test_stale_nonce_is_gap(keys):
    view = view_for(keys[0])
    view.nonces[keys[0].address] = 3
    assert eager_validate(pay(keys[0], keys[1].address, 2), view).reason is Reason.NonceGap


def test_insufficient_balance(keys):
    view = view_for(keys[0], balance=21000)
    assert eager_validate(pay(keys[0], keys[1].address, 0, value=1), view).reason is \
        Reason.InsufficientBalance
    assert eager_validate(pay(keys[0], keys[1].address, 0, value=0), view).accepted


def test_insufficient_gas(keys):
    tx = pay(keys[0], keys[1].address, 0, gas=20999)
    assert eager_validate(tx, view_for(keys[0])).reason is Reason.InsufficientGas


def test_check_order_first_failure_wins(keys):
    # negative value and bad signature and nonce gap: value check comes first
    tx = replace(pay(keys[0], keys[1].address, 9, value=-5), gas_price=2)
    assert eager_validate(tx, view_for(keys[0])).reason is Reason.NegativeValue
    # bad signature beats nonce gap and balance
    tx = replace(pay(keys[0], keys[1].address, 9), gas_price=2)
    assert eager_validate(tx, FakeView()).reason is Reason.BadSignature
    # nonce gap beats balance and gas
    tx = pay(keys[0], keys[1].address, 9, gas=100)
    assert eager_validate(tx, FakeView()).reason is Reason.NonceGap


def test_eager_validation_counts(keys):
    m = NodeMetrics()
    eager_validate(pay(keys[0], keys[1].address, 0), view_for(keys[0]), metrics=m)
    eager_validate(pay(keys[0], keys[1].address, 0, value=-1), view_for(keys[0]), metrics=m)
    assert m.eager_validations == 2
    assert m.signature_checks == 1


# -- pool ----------------------------------------------------------------------


def make_pool(keys, threshold=100, cap=100_000, balance=RICH):
    view = view_for(*keys, balance=balance)
    return TxPool(view, threshold=threshold, cap=cap), view


def test_pool_reserves_nonces(keys):
    pool, _ = make_pool(keys)
    k = keys[0]
    assert pool.submit(pay(k, keys[1].address, 0)).accepted
    assert pool.submit(pay(k, keys[1].address, 1)).accepted
    assert pool.submit(pay(k, keys[1].address, 1, value=2)).reason is Reason.NonceGap
    assert pool.submit(pay(k, keys[1].address, 3)).reason is Reason.NonceGap
    assert pool.nonce(k.address) == 2


def test_pool_reserves_balance(keys):
    pool, _ = make_pool(keys[:2], balance=50_000)
    k = keys[0]
    assert pool.submit(pay(k, keys[1].address, 0, value=1000)).accepted
    # 50000 - 22000 left = 28000 < 21000 + 10000
    assert pool.submit(pay(k, keys[1].address, 1, value=10_000)).reason is Reason.InsufficientBalance
    assert pool.submit(pay(k, keys[1].address, 1, value=7000)).accepted


def test_duplicate(keys):
    pool, _ = make_pool(keys)
    tx = pay(keys[0], keys[1].address, 0)
    assert pool.submit(tx).accepted
    assert pool.submit(tx).reason is Reason.Duplicate


def test_pool_full(keys):
    pool, _ = make_pool(keys, cap=2)
    assert pool.submit(pay(keys[0], keys[1].address, 0)).accepted
    assert pool.submit(pay(keys[1], keys[0].address, 0)).accepted
    assert pool.submit(pay(keys[2], keys[0].address, 0)).reason is Reason.PoolFull


def test_threshold_cuts_one_block(keys):
    pool, _ = make_pool(keys)
    for i in range(250):
        assert pool.submit(pay(keys[i % 5], keys[7].address, i // 5)).accepted
    b1 = pool.maybe_build_proposal()
    assert len(b1.transactions) == 100
    assert len(pool) == 150
    assert len(pool.block_queue) == 1


def test_tick_flushes_small_pool(keys):
    pool, _ = make_pool(keys)
    for i in range(3):
        pool.submit(pay(keys[0], keys[1].address, i))
    assert pool.maybe_build_proposal() is None
    block = pool.maybe_build_proposal(tick=True)
    assert len(block.transactions) == 3
    assert pool.maybe_build_proposal(tick=True) is None


def test_block_orders_sender_nonces(keys):
    pool, _ = make_pool(keys, threshold=10)
    for i in range(10):
        pool.submit(pay(keys[i % 2], keys[7].address, i // 2))
    block = pool.maybe_build_proposal()
    for k in keys[:2]:
        nonces = [t.nonce for t in block.transactions if t.sender == k.address]
        assert nonces == sorted(nonces) == list(range(5))


def test_commit_releases_reservations(keys):
    pool, view = make_pool(keys)
    k = keys[0]
    for i in range(3):
        pool.submit(pay(k, keys[1].address, i))
    block = pool.maybe_build_proposal(tick=True)
    view.nonces[k.address] = 3
    view.balances[k.address] -= 3 * 21001
    pool.on_commit(block)
    assert pool.balance(k.address) == view.balances[k.address]
    assert pool.nonce(k.address) == 3
    assert pool.submit(pay(k, keys[1].address, 3)).accepted


def test_included_but_dropped_block_frees_nonces(keys):
    # execution dropped the block's txs: reservation goes, the nonce is reusable
    pool, _ = make_pool(keys)
    tx = pay(keys[0], keys[1].address, 0)
    pool.submit(tx)
    block = pool.maybe_build_proposal(tick=True)
    pool.on_commit(block)
    assert pool.nonce(keys[0].address) == 0


def test_accept_remote_never_proposes(keys):
    pool, _ = make_pool(keys)
    assert pool.accept_remote(pay(keys[0], keys[1].address, 0)).accepted
    assert len(pool) == 0
    assert pool.maybe_build_proposal(tick=True) is None
    assert pool.nonce(keys[0].address) == 1


def test_threshold_must_be_positive(keys):
    with pytest.raises(ValueError):
        TxPool(FakeView(), threshold=0)


# brute-force model: per-sender expected nonce and remaining balance
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 4), st.integers(0, 40_000)),
                max_size=30))
def test_pool_matches_reference_model(ops):
    from sbchain.core import KeyPair

    ks = [KeyPair.from_seed(b"model-%d" % i) for i in range(3)]
    start = 80_000
    pool = TxPool(FakeView(balances={k.address: start for k in ks}))
    nonce = {k.address: 0 for k in ks}
    spent = {k.address: 0 for k in ks}
    for who, nonce_off, value in ops:
        k = ks[who]
        n = nonce[k.address] + (nonce_off - 2 if nonce_off > 1 else 0)
        if n < 0:
            n = 0
        tx = sign(Transaction(k.address, ks[(who + 1) % 3].address, n, value, 21000, 1), k)
        out = pool.submit(tx)
        if n != nonce[k.address]:
            expected = Reason.NonceGap
        elif start - spent[k.address] < value + 21000:
            expected = Reason.InsufficientBalance
        else:
            expected = Reason.OK
        if out.reason is Reason.Duplicate:
            continue
        assert out.reason is expected
        if out.accepted:
            nonce[k.address] += 1
            spent[k.address] += value + 21000
    for k in ks:
        assert pool.nonce(k.address) == nonce[k.address]
        assert pool.balance(k.address) == start - spent[k.address]
