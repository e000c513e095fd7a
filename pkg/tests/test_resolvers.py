import random

import pytest

import oracles
from escape_sim.contracts import L1Contracts, register_resolver_live
from escape_sim.encoding import pad32, to_hex
from escape_sim.errors import (
    MissingSlotProof,
    NoResolver,
    NothingToEscape,
    NotOwner,
    ResolverNotYetActive,
    UnknownResolver,
    ZeroSupply,
)
from escape_sim.resolvers import (
    Erc20Resolver,
    Erc721Resolver,
    Payout,
    SlotReadContext,
    UniV2Resolver,
    default_resolver,
    dispatch,
    erc20_balance_slot,
    erc721_owner_slot,
    resolve_erc20,
    resolve_erc721,
    resolve_univ2,
    resolver_from_id,
)
from escape_sim.state import TokenLayout, WorldState

A = bytes.fromhex("11" * 20)
B = bytes.fromhex("22" * 20)
DEPLOYER = bytes.fromhex("d0" * 20)
TOKEN = bytes.fromhex("70" * 20)
POOL = bytes.fromhex("90" * 20)
X = bytes.fromhex("a0" * 20)
Y = bytes.fromhex("b0" * 20)


def ctx_of(reads):
    return SlotReadContext(b"\x00" * 32, reads)


# -- slot formulas -----------------------------------------------------------


def test_erc20_balance_slot_vector():
    user = bytes(19) + b"\x01"
    expected = oracles.keccak256(bytes(31) + b"\x01" + bytes(32))
    assert erc20_balance_slot(user, 0) == expected
    assert erc20_balance_slot(user, pad32(0)) == expected


def test_erc20_balance_slot_distinct():
    rng = random.Random(1)
    seen = set()
    for _ in range(1000):
        seen.add(erc20_balance_slot(rng.randbytes(20), 0))
    assert len(seen) == 1000
    assert erc20_balance_slot(A, 0) != erc20_balance_slot(A, 1)


def test_erc721_owner_slot_vectors():
    assert erc721_owner_slot(0, 0) == oracles.keccak256(bytes(64))
    assert erc721_owner_slot(7, 2) == oracles.mapping_slot(7, 2)
    world = WorldState()
    nft = world.erc721_deploy(DEPLOYER, TokenLayout.erc721(owners_slot=2))
    world.erc721_mint(nft, 7, A)
    assert world.read_storage(nft, erc721_owner_slot(7, 2)) == pad32(A)
    assert len({erc721_owner_slot(i, 0) for i in range(1000)}) == 1000


# -- ERC-20 ------------------------------------------------------------------


def test_resolve_erc20():
    layout = TokenLayout.erc20()
    slot = erc20_balance_slot(A, 0)
    out = resolve_erc20(ctx_of({(TOKEN, slot): pad32(500)}), TOKEN, A, layout)
    assert out.payouts == (Payout(TOKEN, amount=500),)
    assert out.entitled == A
    assert out.slots_consulted == ((TOKEN, slot),)
    with pytest.raises(NothingToEscape):
        resolve_erc20(ctx_of({(TOKEN, slot): None}), TOKEN, A, layout)
    with pytest.raises(MissingSlotProof):
        resolve_erc20(ctx_of({}), TOKEN, A, layout)


def test_resolve_is_pure():
    ctx = ctx_of({(TOKEN, erc20_balance_slot(A, 0)): pad32(9)})
    layout = TokenLayout.erc20()
    assert resolve_erc20(ctx, TOKEN, A, layout) == resolve_erc20(ctx, TOKEN, A, layout)


# -- ERC-721 -----------------------------------------------------------------


def test_resolve_erc721():
    layout = TokenLayout.erc721(owners_slot=2)
    slot = erc721_owner_slot(7, 2)
    ctx = ctx_of({(TOKEN, slot): pad32(A), (TOKEN, erc721_owner_slot(8, 2)): None})
    out = resolve_erc721(ctx, TOKEN, 7, A, layout)
    assert out.payouts == (Payout(TOKEN, token_id=7),)
    assert out.discriminator == pad32(7)
    with pytest.raises(NotOwner):
        resolve_erc721(ctx, TOKEN, 7, B, layout)
    with pytest.raises(NothingToEscape):
        resolve_erc721(ctx, TOKEN, 8, A, layout)
    with pytest.raises(MissingSlotProof):
        resolve_erc721(ctx, TOKEN, 9, A, layout)


# -- Uniswap v2 --------------------------------------------------------------


def univ2_reads(lp, total, bal_x, bal_y, layout=TokenLayout.univ2()):
    word = lambda v: pad32(v) if v else None  # noqa: E731
    return {
        (POOL, pad32(layout.token0_slot)): pad32(X),
        (POOL, pad32(layout.token1_slot)): pad32(Y),
        (X, erc20_balance_slot(POOL, 0)): word(bal_x),
        (Y, erc20_balance_slot(POOL, 0)): word(bal_y),
        (POOL, pad32(layout.total_supply_slot)): word(total),
        (POOL, erc20_balance_slot(A, layout.balances_slot)): word(lp),
    }


TOKEN_LAYOUTS = {X: TokenLayout.erc20(), Y: TokenLayout.erc20()}


def amounts(outcome):
    return {p.asset: p.amount for p in outcome.payouts}


@pytest.mark.parametrize(
    "lp, total, bal_x, bal_y, expected",
    [
        (100, 1000, 5000, 300, {X: 500, Y: 30}),
        (1000, 1000, 5000, 300, {X: 5000, Y: 300}),
        (1, 3, 10, 10, {X: 3, Y: 3}),
        (1, 3, 10, 2, {X: 3}),  # the Y share floors to zero and is dropped
    ],
)
def test_resolve_univ2_arithmetic(lp, total, bal_x, bal_y, expected):
    ctx = ctx_of(univ2_reads(lp, total, bal_x, bal_y))
    out = resolve_univ2(ctx, POOL, A, TokenLayout.univ2(), TOKEN_LAYOUTS)
    assert amounts(out) == expected
    assert out.entitled == A


def test_resolve_univ2_errors():
    layout = TokenLayout.univ2()
    with pytest.raises(NothingToEscape):
        resolve_univ2(ctx_of(univ2_reads(0, 1000, 5, 5)), POOL, A, layout, TOKEN_LAYOUTS)
    with pytest.raises(ZeroSupply):
        resolve_univ2(ctx_of(univ2_reads(10, 0, 5, 5)), POOL, A, layout, TOKEN_LAYOUTS)
    with pytest.raises(NoResolver):
        resolve_univ2(ctx_of(univ2_reads(10, 10, 5, 5)), POOL, A, layout, {X: TokenLayout.erc20()})


def test_resolve_univ2_withholding_each_slot_fails():
    full = univ2_reads(100, 1000, 5000, 300)
    layout = TokenLayout.univ2()
    out = resolve_univ2(ctx_of(full), POOL, A, layout, TOKEN_LAYOUTS)
    assert set(out.slots_consulted) == set(full)
    for missing in full:
        reads = {k: v for k, v in full.items() if k != missing}
        with pytest.raises(MissingSlotProof):
            resolve_univ2(ctx_of(reads), POOL, A, layout, TOKEN_LAYOUTS)


def test_resolve_univ2_from_real_world():
    world = WorldState()
    x = world.erc20_deploy(DEPLOYER)
    y = world.erc20_deploy(DEPLOYER, TokenLayout.erc20(balances_slot=3, total_supply_slot=4))
    pool = world.univ2_deploy(DEPLOYER, x, y)
    for who, (ax, ay) in {A: (400, 100), B: (200, 50)}.items():
        world.erc20_mint(x, who, ax)
        world.erc20_mint(y, who, ay)
        world.univ2_add_liquidity(pool, who, ax, ay)
    layouts = {x: world.layouts[x], y: world.layouts[y]}
    snap = world.snapshot()
    pl = world.layouts[pool]
    bundles = [
        snap.get_proof(pool, [pad32(pl.token0_slot), pad32(pl.token1_slot), pad32(pl.total_supply_slot),
                              erc20_balance_slot(A, pl.balances_slot)]),
        snap.get_proof(x, [erc20_balance_slot(pool, 0)]),
        snap.get_proof(y, [erc20_balance_slot(pool, 3)]),
    ]
    ctx = SlotReadContext.from_verified(snap.root, [b.verify(snap.root) for b in bundles])
    out = resolve_univ2(ctx, pool, A, pl, layouts)
    assert amounts(out) == {x: 400, y: 100}


# -- identifiers and dispatch --------------------------------------------------


def test_resolver_ids():
    assert resolver_from_id("erc20") == Erc20Resolver(0)
    assert resolver_from_id("erc20@3").layout().balances_slot == 3
    assert resolver_from_id("erc721@2") == Erc721Resolver(2)
    assert resolver_from_id("univ2") == UniV2Resolver()
    assert resolver_from_id("univ2@0,1,6,7").resolver_id == "univ2"
    assert resolver_from_id("univ2@8,9,10,11").resolver_id == "univ2@8,9,10,11"
    for bad in ("erc1155", "erc20@x", "univ2@1,1,2,3", "erc20@1,2,3", ""):
        with pytest.raises(UnknownResolver):
            resolver_from_id(bad)


def test_default_resolver():
    assert default_resolver(TokenLayout.erc20(balances_slot=5, total_supply_slot=6)).resolver_id == "erc20@5"
    assert default_resolver(TokenLayout.erc721()).resolver_id == "erc721"
    with pytest.raises(NoResolver):
        default_resolver(TokenLayout.wallet())


def _l1_with_root(ts=1000, delay=100, layouts=None):
    l1 = L1Contracts.deploy(delay, layouts or {})
    l1.oracle.propose_root(b"\x01" * 32, ts, 1)
    return l1


def test_dispatch_live_registration():
    l1 = _l1_with_root()
    register_resolver_live(l1.messenger, l1.registry, TOKEN, "erc20@4", 900)
    assert dispatch(l1.registry, TOKEN, 1100, {}).resolver_id == "erc20@4"
    with pytest.raises(ResolverNotYetActive):
        dispatch(l1.registry, TOKEN, 1099, {})


def test_dispatch_defaults():
    layouts = {TOKEN: TokenLayout.erc20(), A: TokenLayout.wallet()}
    l1 = _l1_with_root(layouts=layouts)
    assert dispatch(l1.registry, TOKEN, 1100, layouts).resolver_id == "erc20"
    with pytest.raises(NoResolver):
        dispatch(l1.registry, A, 1100, layouts)
    with pytest.raises(NoResolver):
        dispatch(l1.registry, B, 1100, layouts)


def test_dispatch_post_failure_waits_2t():
    l1 = _l1_with_root()
    l1.registry.register_post_failure_create(DEPLOYER, 0, oracles.create_address(DEPLOYER, 0), "erc20", 1100)
    target = oracles.create_address(DEPLOYER, 0)
    with pytest.raises(ResolverNotYetActive):
        dispatch(l1.registry, target, 1199, {})
    assert dispatch(l1.registry, target, 1200, {}).resolver_id == "erc20"


def test_payout_json():
    assert Payout(TOKEN, amount=5).to_json() == {"asset": to_hex(TOKEN), "amount": "5"}
    assert Payout(TOKEN, token_id=7).to_json() == {"asset": to_hex(TOKEN), "tokenId": "7"}
