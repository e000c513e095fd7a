"""Escaping ERC-20 and ERC-721 balances by hand, without the scenario runner.

The operator posts a root, halts, and after the escape delay a user proves
their token balance slot against that root.
"""

from escape_sim import L1Contracts, WorldState
from escape_sim.contracts import register_resolver_live
from escape_sim.errors import EscapeNotEnabled, NullifierUsed
from escape_sim.resolvers import erc20_balance_slot, erc721_owner_slot
from escape_sim.state import TokenLayout

T = 604_800
deployer, alice = bytes.fromhex("d0" * 20), bytes.fromhex("11" * 20)

world = WorldState()
l1 = L1Contracts.deploy(T)
usdt = world.erc20_deploy(deployer, TokenLayout.erc20(balances_slot=3, total_supply_slot=4))
punks = world.erc721_deploy(deployer, TokenLayout.erc721(owners_slot=2))

l1.bridge.deposit_erc20(world, alice, usdt, alice, 250)
l1.bridge.deposit_erc721(world, alice, punks, 7, alice)
register_resolver_live(l1.messenger, l1.registry, usdt, "erc20@3", 900)
register_resolver_live(l1.messenger, l1.registry, punks, "erc721@2", 900)

l1.oracle.propose_root(world.state_root(), 1000, 1)
snapshot = world.snapshot()
l1.messenger.halt()
print("operator halted; escapes open at", l1.bridge.clock.opens_at())

usdt_proof = snapshot.get_proof(usdt, [erc20_balance_slot(alice, 3)])
try:
    l1.bridge.escape_asset(1000 + T - 1, alice, usdt, [usdt_proof])
except EscapeNotEnabled as exc:
    print("one second early:", exc)

receipt = l1.bridge.escape_asset(1000 + T, alice, usdt, [usdt_proof])
print("ERC-20 payout:", [p.to_json() for p in receipt.payouts])

nft_proof = snapshot.get_proof(punks, [erc721_owner_slot(7, 2)])
receipt = l1.bridge.escape_asset(1000 + T, alice, punks, [nft_proof], {"token_id": 7})
print("ERC-721 payout:", [p.to_json() for p in receipt.payouts])

try:
    l1.bridge.escape_asset(1000 + T + 5, alice, usdt, [usdt_proof])
except NullifierUsed as exc:
    print("second attempt:", exc)
