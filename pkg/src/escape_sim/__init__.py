"""Simulate escaping a failed rollup: prove L2 balances against the last
valid state root and withdraw them from the L1 bridge.

The layers, bottom up:

- :mod:`escape_sim.encoding`  keccak-256, strict RLP, CREATE/CREATE2 addresses
- :mod:`escape_sim.mpt`       hexary Merkle Patricia trie with proofs
- :mod:`escape_sim.state`     L2 world state, token storage layouts, proof bundles
- :mod:`escape_sim.resolvers` turn proven storage into payouts per asset type
- :mod:`escape_sim.contracts` L1 oracle, resolver registry, delegates and bridge
- :mod:`escape_sim.scenario`  JSON scenario runner and bundled fixtures
"""

from .contracts import DEFAULT_ESCAPE_DELAY, L1Bridge, L1Contracts, L2Oracle, NullifierKey
from .encoding import (
    create2_address,
    create_address,
    keccak256,
    rlp_decode,
    rlp_encode,
)
from .errors import EscapeSimError
from .mpt import EMPTY_ROOT, Trie, trie_from_items, verify_proof
from .resolvers import resolver_from_id
from .scenario import Report, Scenario, load_fixture, load_scenario, run_scenario
from .state import AccountState, ProofBundle, StateSnapshot, TokenLayout, WorldState, mapping_slot

__version__ = "0.1.0"

__all__ = [
    "AccountState",
    "DEFAULT_ESCAPE_DELAY",
    "EMPTY_ROOT",
    "EscapeSimError",
    "L1Bridge",
    "L1Contracts",
    "L2Oracle",
    "NullifierKey",
    "ProofBundle",
    "Report",
    "Scenario",
    "StateSnapshot",
    "TokenLayout",
    "Trie",
    "WorldState",
    "create2_address",
    "create_address",
    "keccak256",
    "load_fixture",
    "load_scenario",
    "mapping_slot",
    "resolver_from_id",
    "rlp_decode",
    "rlp_encode",
    "run_scenario",
    "trie_from_items",
    "verify_proof",
]
