"""Simulated L2 world state with real account/storage tries.

The ledger is storage-level: ERC-20, ERC-721 and Uniswap-v2-style pair
contracts are modelled by writing the same storage slots their Solidity
counterparts would, so proofs produced here look like ``eth_getProof``
responses from a real node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .encoding import (
    EMPTY_CODE_HASH,
    ZERO_WORD,
    as_address,
    as_word,
    bytes_to_int,
    create2_address,
    create_address,
    from_hex,
    int_to_bytes,
    keccak256,
    pad32,
    rlp_decode,
    rlp_encode,
    to_hex,
)
from .errors import (
    AlreadyMinted,
    InsufficientBalance,
    InvalidProof,
    MalformedRlp,
    NotOwner,
    UnknownContract,
)
from .mpt import EMPTY_ROOT, Trie, secure_key, verify_proof

ERC20 = "erc20"
ERC721 = "erc721"
UNIV2 = "univ2pair"
WALLET = "wallet"


def mapping_slot(key: int | bytes, slot_index: int) -> bytes:
    """Storage key of ``mapping[key]`` for a mapping declared at ``slot_index``."""
    return keccak256(pad32(key) + pad32(slot_index))


@dataclass(frozen=True)
class TokenLayout:
    """Storage slot indices of a token-like contract.

    Defaults follow the common layouts: an ERC-20/721 mapping at index 0,
    and the Uniswap v2 pair ordering (``totalSupply`` 0, ``balanceOf`` 1,
    ``token0`` 6, ``token1`` 7).
    """

    kind: str
    balances_slot: Optional[int] = None
    owners_slot: Optional[int] = None
    total_supply_slot: Optional[int] = None
    token0_slot: Optional[int] = None
    token1_slot: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in (ERC20, ERC721, UNIV2, WALLET):
            raise ValueError(f"unknown layout kind {self.kind!r}")
        used = [s for s in self.slots().values() if s is not None]
        if len(used) != len(set(used)):
            raise ValueError(f"slot indices collide in {self}")
        if any(s < 0 for s in used):
            raise ValueError("slot indices must be non-negative")

    def slots(self) -> dict[str, Optional[int]]:
        return {
            "balances_slot": self.balances_slot,
            "owners_slot": self.owners_slot,
            "total_supply_slot": self.total_supply_slot,
            "token0_slot": self.token0_slot,
            "token1_slot": self.token1_slot,
        }

    @classmethod
    def erc20(cls, balances_slot: int = 0, total_supply_slot: int = 2) -> "TokenLayout":
        return cls(ERC20, balances_slot=balances_slot, total_supply_slot=total_supply_slot)

    @classmethod
    def erc721(cls, owners_slot: int = 0) -> "TokenLayout":
        return cls(ERC721, owners_slot=owners_slot)

    @classmethod
    def univ2(
        cls,
        total_supply_slot: int = 0,
        balances_slot: int = 1,
        token0_slot: int = 6,
        token1_slot: int = 7,
    ) -> "TokenLayout":
        return cls(
            UNIV2,
            balances_slot=balances_slot,
            total_supply_slot=total_supply_slot,
            token0_slot=token0_slot,
            token1_slot=token1_slot,
        )

    @classmethod
    def wallet(cls) -> "TokenLayout":
        return cls(WALLET)

    @classmethod
    def default(cls, kind: str) -> "TokenLayout":
        return {ERC20: cls.erc20, ERC721: cls.erc721, UNIV2: cls.univ2, WALLET: cls.wallet}[kind]()

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        out.update({k: v for k, v in self.slots().items() if v is not None})
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TokenLayout":
        return cls(**obj)


def placeholder_code_hash(kind: str) -> bytes:
    """Code hash recorded for a ledger-level contract of ``kind``."""
    return keccak256(b"escape-sim:" + kind.encode())


# ---------------------------------------------------------------------------
# accounts and storage values


@dataclass(frozen=True)
class AccountState:
    nonce: int = 0
    balance: int = 0
    storage_root: bytes = EMPTY_ROOT
    code_hash: bytes = EMPTY_CODE_HASH

    def rlp(self) -> bytes:
        return rlp_encode(
            [int_to_bytes(self.nonce), int_to_bytes(self.balance), self.storage_root, self.code_hash]
        )

    @classmethod
    def from_rlp(cls, data: bytes) -> "AccountState":
        try:
            fields = rlp_decode(data)
        except MalformedRlp as exc:
            raise InvalidProof(f"account leaf is not RLP: {exc}") from None
        if (
            not isinstance(fields, list)
            or len(fields) != 4
            or not all(isinstance(f, bytes) for f in fields)
        ):
            raise InvalidProof("account leaf is not a 4-item list")
        nonce, balance, storage_root, code_hash = fields
        for scalar in (nonce, balance):
            if scalar[:1] == b"\x00":
                raise InvalidProof("account integer with leading zero octet")
        if len(storage_root) != 32 or len(code_hash) != 32:
            raise InvalidProof("account hash fields must be 32 octets")
        return cls(bytes_to_int(nonce), bytes_to_int(balance), storage_root, code_hash)


def encode_storage_value(word: bytes) -> bytes:
    """Trie leaf for a storage word: RLP of the left-trimmed big-endian integer."""
    return rlp_encode(word.lstrip(b"\x00"))


def decode_storage_value(leaf: bytes) -> bytes:
    try:
        raw = rlp_decode(leaf)
    except MalformedRlp as exc:
        raise InvalidProof(f"storage leaf is not RLP: {exc}") from None
    if not isinstance(raw, bytes) or not raw or len(raw) > 32 or raw[0] == 0:
        raise InvalidProof("storage leaf is not a canonical nonzero word")
    return pad32(raw)


# ---------------------------------------------------------------------------
# proof bundles


@dataclass(frozen=True)
class StorageProof:
    slot: bytes
    value: Optional[bytes]  # 32-octet word, or None when proven absent
    proof: tuple[bytes, ...]


@dataclass(frozen=True)
class ProofBundle:
    """Account proof plus selected storage-slot proofs against one state root."""

    root: bytes
    address: bytes
    account: Optional[AccountState]
    account_proof: tuple[bytes, ...]
    storage_proofs: tuple[StorageProof, ...] = ()

    def verify(self, root: Optional[bytes] = None) -> "VerifiedBundle":
        """Check every proof in the bundle; raises :class:`InvalidProof`.

        ``root`` defaults to the bundle's declared root; passing it checks
        the declaration too.
        """
        if root is not None and root != self.root:
            raise InvalidProof("bundle declares a different state root")
        leaf = verify_proof(self.root, secure_key(self.address), self.account_proof)
        account = None if leaf is None else AccountState.from_rlp(leaf)
        if account != self.account and not (account is None and self.account == AccountState()):
            raise InvalidProof("declared account fields disagree with the proof")
        storage_root = EMPTY_ROOT if account is None else account.storage_root
        slots: dict[bytes, Optional[bytes]] = {}
        for sp in self.storage_proofs:
            leaf = verify_proof(storage_root, secure_key(sp.slot), sp.proof)
            value = None if leaf is None else decode_storage_value(leaf)
            if value != sp.value:
                raise InvalidProof(f"declared value of slot {to_hex(sp.slot)} disagrees with the proof")
            slots[sp.slot] = value
        return VerifiedBundle(self.root, self.address, account, slots)

    def to_json(self) -> dict:
        """``eth_getProof``-shaped JSON (plus the ``stateRoot`` it was taken at)."""
        acct = self.account or AccountState()
        return {
            "stateRoot": to_hex(self.root),
            "address": to_hex(self.address),
            "accountProof": [to_hex(n) for n in self.account_proof],
            "balance": hex(acct.balance),
            "nonce": hex(acct.nonce),
            "storageHash": to_hex(acct.storage_root),
            "codeHash": to_hex(acct.code_hash),
            "storageProof": [
                {
                    "key": to_hex(sp.slot),
                    "value": hex(bytes_to_int(sp.value or ZERO_WORD)),
                    "proof": [to_hex(n) for n in sp.proof],
                }
                for sp in self.storage_proofs
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProofBundle":
        account = AccountState(
            nonce=int(obj["nonce"], 16),
            balance=int(obj["balance"], 16),
            storage_root=as_word(obj["storageHash"]),
            code_hash=as_word(obj["codeHash"]),
        )
        storage = []
        for sp in obj.get("storageProof", []):
            value = int(sp["value"], 16)
            storage.append(
                StorageProof(
                    as_word(sp["key"]),
                    pad32(value) if value else None,
                    tuple(from_hex(n) for n in sp["proof"]),
                )
            )
        return cls(
            root=as_word(obj["stateRoot"]),
            address=as_address(obj["address"]),
            account=None if account == AccountState() else account,
            account_proof=tuple(from_hex(n) for n in obj["accountProof"]),
            storage_proofs=tuple(storage),
        )


@dataclass(frozen=True)
class VerifiedBundle:
    root: bytes
    address: bytes
    account: Optional[AccountState]
    slots: dict


# ---------------------------------------------------------------------------
# snapshots


class StateSnapshot:
    """Immutable view of the world at one state root; safe to share."""

    def __init__(self, account_trie: Trie, accounts: dict, storage_tries: dict, storages: dict):
        self._account_trie = account_trie
        self._accounts = accounts
        self._storage_tries = storage_tries
        self._storages = storages
        self.root = account_trie.root_hash()

    def account(self, address: bytes) -> Optional[AccountState]:
        return self._accounts.get(address)

    def read_storage(self, address: bytes, slot: bytes) -> Optional[bytes]:
        return self._storages.get(address, {}).get(slot)

    def storage(self, address: bytes) -> dict[bytes, bytes]:
        """Nonzero slots of ``address`` (a copy)."""
        return dict(self._storages.get(address, {}))

    def addresses(self) -> list[bytes]:
        return sorted(self._accounts)

    def get_proof(self, address: bytes, slots: Iterable[bytes] = ()) -> ProofBundle:
        address = as_address(address)
        account_proof = self._account_trie.prove(secure_key(address))
        storage_trie = self._storage_tries.get(address, Trie())
        storage_proofs = []
        for slot in slots:
            slot = as_word(slot)
            storage_proofs.append(
                StorageProof(
                    slot,
                    self.read_storage(address, slot),
                    tuple(storage_trie.prove(secure_key(slot))),
                )
            )
        return ProofBundle(
            root=self.root,
            address=address,
            account=self.account(address),
            account_proof=tuple(account_proof),
            storage_proofs=tuple(storage_proofs),
        )

    def to_json(self) -> dict:
        accounts = []
        for address in self.addresses():
            acct = self._accounts[address]
            storage = self._storages.get(address, {})
            accounts.append(
                {
                    "address": to_hex(address),
                    "nonce": str(acct.nonce),
                    "balance": str(acct.balance),
                    "code_hash": to_hex(acct.code_hash),
                    "storage": {to_hex(k): to_hex(storage[k]) for k in sorted(storage)},
                }
            )
        return {"state_root": to_hex(self.root), "accounts": accounts}

    @classmethod
    def from_json(cls, obj: dict) -> "StateSnapshot":
        world = WorldState()
        for entry in obj["accounts"]:
            address = as_address(entry["address"])
            world.set_account(
                address,
                nonce=int(entry["nonce"]),
                balance=int(entry["balance"]),
                code_hash=as_word(entry["code_hash"]),
            )
            for slot, value in entry.get("storage", {}).items():
                world.write_storage(address, as_word(slot), as_word(value))
        snap = world.snapshot()
        declared = obj.get("state_root")
        if declared is not None and as_word(declared) != snap.root:
            raise ValueError(
                f"snapshot declares root {declared} but its contents hash to {to_hex(snap.root)}"
            )
        return snap


# ---------------------------------------------------------------------------
# world state


@dataclass
class _Account:
    nonce: int = 0
    balance: int = 0
    code_hash: bytes = EMPTY_CODE_HASH


class WorldState:
    """Mutable L2 state owned by a single writer (the scenario driver).

    Roots are maintained incrementally: storage tries are updated on every
    write, and account leaves of touched addresses are refreshed lazily in
    :meth:`state_root`.
    """

    def __init__(self) -> None:
        self._accounts: dict[bytes, _Account] = {}
        self._storages: dict[bytes, dict[bytes, bytes]] = {}
        self._storage_tries: dict[bytes, Trie] = {}
        self._account_trie = Trie()
        self._dirty: set[bytes] = set()
        self.layouts: dict[bytes, TokenLayout] = {}
        self.clock = 0

    # -- raw access -------------------------------------------------------

    def _touch(self, address: bytes) -> _Account:
        self._dirty.add(address)
        return self._accounts.setdefault(address, _Account())

    def set_account(
        self, address: bytes, *, nonce: int = 0, balance: int = 0, code_hash: bytes = EMPTY_CODE_HASH
    ) -> None:
        if nonce < 0 or balance < 0:
            raise ValueError("nonce and balance are non-negative")
        acct = self._touch(address)
        acct.nonce, acct.balance, acct.code_hash = nonce, balance, code_hash

    def account(self, address: bytes) -> Optional[AccountState]:
        acct = self._accounts.get(address)
        if acct is None:
            return None
        trie = self._storage_tries.get(address)
        return AccountState(
            acct.nonce, acct.balance, trie.root_hash() if trie else EMPTY_ROOT, acct.code_hash
        )

    def read_storage(self, address: bytes, slot: bytes) -> Optional[bytes]:
        return self._storages.get(address, {}).get(slot)

    def read_uint(self, address: bytes, slot: bytes) -> int:
        return bytes_to_int(self.read_storage(address, slot) or ZERO_WORD)

    def write_storage(self, address: bytes, slot: bytes, value: bytes | int) -> None:
        """Write a 32-octet word; zero removes the slot entirely."""
        word = pad32(value) if isinstance(value, int) else as_word(value)
        if word == ZERO_WORD and self.read_storage(address, slot) is None:
            return
        self._touch(address)
        storage = self._storages.setdefault(address, {})
        trie = self._storage_tries.get(address, Trie())
        key = secure_key(slot)
        if word == ZERO_WORD:
            storage.pop(slot, None)
            trie = trie.delete(key)
        else:
            storage[slot] = word
            trie = trie.insert(key, encode_storage_value(word))
        self._storage_tries[address] = trie

    def state_root(self) -> bytes:
        return self._refresh().root_hash()

    def _refresh(self) -> Trie:
        for address in sorted(self._dirty):
            self._account_trie = self._account_trie.insert(
                secure_key(address), self.account(address).rlp()
            )
        self._dirty.clear()
        return self._account_trie

    def snapshot(self) -> StateSnapshot:
        trie = self._refresh()
        return StateSnapshot(
            trie,
            {a: self.account(a) for a in self._accounts},
            dict(self._storage_tries),
            {a: dict(s) for a, s in self._storages.items() if s},
        )

    def get_proof(self, address: bytes, slots: Iterable[bytes] = ()) -> ProofBundle:
        return self.snapshot().get_proof(address, slots)

    # -- ETH --------------------------------------------------------------

    def balance(self, address: bytes) -> int:
        acct = self._accounts.get(address)
        return acct.balance if acct else 0

    def set_balance(self, address: bytes, amount: int) -> None:
        if amount < 0:
            raise ValueError("balances are non-negative")
        self._touch(address).balance = amount

    def credit_eth(self, address: bytes, amount: int) -> None:
        if amount < 0:
            raise ValueError("credit amount must be non-negative")
        self._touch(address).balance += amount

    def transfer_eth(self, sender: bytes, to: bytes, amount: int) -> None:
        if self.balance(sender) < amount:
            raise InsufficientBalance(f"{to_hex(sender)} holds {self.balance(sender)} wei")
        self._touch(sender).balance -= amount
        self._touch(to).balance += amount

    # -- deployment -------------------------------------------------------

    def nonce(self, address: bytes) -> int:
        acct = self._accounts.get(address)
        return acct.nonce if acct else 0

    def deploy(
        self,
        deployer: bytes,
        layout: TokenLayout,
        *,
        salt: Optional[bytes] = None,
        bytecode_hash: Optional[bytes] = None,
    ) -> bytes:
        """Deploy a ledger-level contract with CREATE, or CREATE2 when ``salt`` is given."""
        deployer = as_address(deployer)
        if salt is None:
            address = create_address(deployer, self.nonce(deployer))
        else:
            if bytecode_hash is None:
                bytecode_hash = placeholder_code_hash(layout.kind)
            address = create2_address(deployer, salt, bytecode_hash)
        if address in self.layouts:
            raise ValueError(f"contract already deployed at {to_hex(address)}")
        self._touch(deployer).nonce += 1
        contract = self._touch(address)
        contract.nonce = 1
        contract.code_hash = placeholder_code_hash(layout.kind)
        self.layouts[address] = layout
        return address

    def _layout(self, contract: bytes, kind: str) -> TokenLayout:
        layout = self.layouts.get(contract)
        if layout is None or layout.kind != kind:
            raise UnknownContract(f"{to_hex(contract)} is not a deployed {kind} contract")
        return layout

    # -- ERC-20 -----------------------------------------------------------

    def erc20_deploy(self, deployer: bytes, layout: Optional[TokenLayout] = None, **create2) -> bytes:
        return self.deploy(deployer, layout or TokenLayout.erc20(), **create2)

    def _fungible_layout(self, token: bytes) -> TokenLayout:
        layout = self.layouts.get(token)
        if layout is None or layout.kind not in (ERC20, UNIV2):
            raise UnknownContract(f"{to_hex(token)} is not a fungible token")
        return layout

    def erc20_balance(self, token: bytes, holder: bytes) -> int:
        layout = self._fungible_layout(token)
        return self.read_uint(token, mapping_slot(holder, layout.balances_slot))

    def erc20_total_supply(self, token: bytes) -> int:
        layout = self._fungible_layout(token)
        return self.read_uint(token, pad32(layout.total_supply_slot))

    def erc20_mint(self, token: bytes, to: bytes, amount: int) -> None:
        layout = self._fungible_layout(token)
        slot = mapping_slot(to, layout.balances_slot)
        self.write_storage(token, slot, self.read_uint(token, slot) + amount)
        if layout.total_supply_slot is not None:
            supply = pad32(layout.total_supply_slot)
            self.write_storage(token, supply, self.read_uint(token, supply) + amount)

    def erc20_transfer(self, token: bytes, sender: bytes, to: bytes, amount: int) -> None:
        layout = self._fungible_layout(token)
        src = mapping_slot(sender, layout.balances_slot)
        have = self.read_uint(token, src)
        if have < amount:
            raise InsufficientBalance(f"{to_hex(sender)} holds {have}, needs {amount}")
        self.write_storage(token, src, have - amount)
        dst = mapping_slot(to, layout.balances_slot)
        self.write_storage(token, dst, self.read_uint(token, dst) + amount)

    def erc20_burn(self, token: bytes, holder: bytes, amount: int) -> None:
        layout = self._fungible_layout(token)
        slot = mapping_slot(holder, layout.balances_slot)
        have = self.read_uint(token, slot)
        if have < amount:
            raise InsufficientBalance(f"{to_hex(holder)} holds {have}, needs {amount}")
        self.write_storage(token, slot, have - amount)
        if layout.total_supply_slot is not None:
            supply = pad32(layout.total_supply_slot)
            self.write_storage(token, supply, self.read_uint(token, supply) - amount)

    # -- ERC-721 ----------------------------------------------------------

    def erc721_deploy(self, deployer: bytes, layout: Optional[TokenLayout] = None, **create2) -> bytes:
        return self.deploy(deployer, layout or TokenLayout.erc721(), **create2)

    def erc721_owner(self, token: bytes, token_id: int) -> Optional[bytes]:
        layout = self._layout(token, ERC721)
        word = self.read_storage(token, mapping_slot(token_id, layout.owners_slot))
        return None if word is None else word[12:]

    def erc721_mint(self, token: bytes, token_id: int, to: bytes) -> None:
        layout = self._layout(token, ERC721)
        if self.erc721_owner(token, token_id) is not None:
            raise AlreadyMinted(f"token id {token_id} already has an owner")
        self.write_storage(token, mapping_slot(token_id, layout.owners_slot), pad32(as_address(to)))

    def erc721_transfer(self, token: bytes, token_id: int, sender: bytes, to: bytes) -> None:
        layout = self._layout(token, ERC721)
        if self.erc721_owner(token, token_id) != sender:
            raise NotOwner(f"{to_hex(sender)} does not own token id {token_id}")
        self.write_storage(token, mapping_slot(token_id, layout.owners_slot), pad32(as_address(to)))

    # -- Uniswap v2 pair --------------------------------------------------

    def univ2_deploy(
        self, deployer: bytes, token_x: bytes, token_y: bytes, layout: Optional[TokenLayout] = None, **create2
    ) -> bytes:
        layout = layout or TokenLayout.univ2()
        for token in (token_x, token_y):
            self._fungible_layout(token)
        pool = self.deploy(deployer, layout, **create2)
        self.write_storage(pool, pad32(layout.token0_slot), pad32(token_x))
        self.write_storage(pool, pad32(layout.token1_slot), pad32(token_y))
        return pool

    def univ2_tokens(self, pool: bytes) -> tuple[bytes, bytes]:
        layout = self._layout(pool, UNIV2)
        t0 = self.read_storage(pool, pad32(layout.token0_slot)) or ZERO_WORD
        t1 = self.read_storage(pool, pad32(layout.token1_slot)) or ZERO_WORD
        return t0[12:], t1[12:]

    def univ2_add_liquidity(self, pool: bytes, provider: bytes, amount_x: int, amount_y: int) -> int:
        """Move both amounts into the pool and mint LP tokens to ``provider``.

        The first deposit mints ``isqrt(x * y)``; later deposits mint the
        smaller pro-rata share. No minimum-liquidity lock.
        """
        layout = self._layout(pool, UNIV2)
        token_x, token_y = self.univ2_tokens(pool)
        if self.erc20_balance(token_x, provider) < amount_x or self.erc20_balance(token_y, provider) < amount_y:
            raise InsufficientBalance(f"{to_hex(provider)} cannot fund the deposit")
        bal_x = self.erc20_balance(token_x, pool)
        bal_y = self.erc20_balance(token_y, pool)
        total = self.read_uint(pool, pad32(layout.total_supply_slot))
        if total == 0:
            minted = math.isqrt(amount_x * amount_y)
        else:
            minted = min(amount_x * total // bal_x, amount_y * total // bal_y)
        self.erc20_transfer(token_x, provider, pool, amount_x)
        self.erc20_transfer(token_y, provider, pool, amount_y)
        self.erc20_mint(pool, provider, minted)
        return minted

    # -- wallets ----------------------------------------------------------

    def wallet_deploy(self, deployer: bytes, **create2) -> bytes:
        return self.deploy(deployer, TokenLayout.wallet(), **create2)


__all__ = [
    "AccountState",
    "ERC20",
    "ERC721",
    "ProofBundle",
    "StateSnapshot",
    "StorageProof",
    "TokenLayout",
    "UNIV2",
    "VerifiedBundle",
    "WALLET",
    "WorldState",
    "decode_storage_value",
    "encode_storage_value",
    "mapping_slot",
    "placeholder_code_hash",
]
