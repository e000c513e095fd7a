"""Liquidity providers escape a Uniswap v2 pair and split its reserves.

Each provider receives floor(lp * balance / totalSupply) of both tokens.
Rounding leaves a little dust in escrow; the sum never exceeds the pool.
"""

import random

from escape_sim import L1Contracts, WorldState
from escape_sim.encoding import pad32
from escape_sim.resolvers import erc20_balance_slot

rng = random.Random(7)
deployer = bytes.fromhex("d0" * 20)
world = WorldState()
l1 = L1Contracts.deploy(100)
x, y = world.erc20_deploy(deployer), world.erc20_deploy(deployer)
pool = world.univ2_deploy(deployer, x, y)
for token in (x, y, pool):
    l1.bridge.default_layouts[token] = world.layouts[token]

providers = [rng.randbytes(20) for _ in range(5)]
for who in providers:
    ax, ay = rng.randint(1_000, 50_000), rng.randint(1_000, 50_000)
    l1.bridge.deposit_erc20(world, who, x, who, ax)
    l1.bridge.deposit_erc20(world, who, y, who, ay)
    world.univ2_add_liquidity(pool, who, ax, ay)

total = world.erc20_total_supply(pool)
reserves = {x: world.erc20_balance(x, pool), y: world.erc20_balance(y, pool)}
print(f"pool: {total} LP tokens, reserves x={reserves[x]} y={reserves[y]}")

l1.oracle.propose_root(world.state_root(), 1000, 1)
snap = world.snapshot()
l1.messenger.halt()

layout = world.layouts[pool]
paid = {x: 0, y: 0}
for who in providers:
    bundles = [
        snap.get_proof(pool, [pad32(layout.token0_slot), pad32(layout.token1_slot),
                              pad32(layout.total_supply_slot), erc20_balance_slot(who, layout.balances_slot)]),
        snap.get_proof(x, [erc20_balance_slot(pool, 0)]),
        snap.get_proof(y, [erc20_balance_slot(pool, 0)]),
    ]
    receipt = l1.bridge.escape_asset(1100, who, pool, bundles)
    got = {p.asset: p.amount for p in receipt.payouts}
    for token, amount in got.items():
        paid[token] += amount
    print(f"  {who.hex()[:8]}  lp={world.erc20_balance(pool, who):>6}  x={got.get(x, 0):>6}  y={got.get(y, 0):>6}")

for name, token in (("x", x), ("y", y)):
    print(f"token {name}: paid {paid[token]} of {reserves[token]}, dust {reserves[token] - paid[token]}")
