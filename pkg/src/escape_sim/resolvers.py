"""Resolvers: locate a user's entitlement inside L2 contract storage.

A resolver only ever sees storage words that arrived with a verified proof
(:class:`SlotReadContext`). Asking for anything else raises
:class:`MissingSlotProof` rather than defaulting to zero, so an escape can
never succeed on an unproven read.

Resolvers are named by stable string identifiers:

``erc20`` / ``erc20@N``
    balance mapping at storage index N (default 0)
``erc721`` / ``erc721@N``
    owner mapping at storage index N (default 0)
``univ2`` / ``univ2@S,B,T0,T1``
    Uniswap v2 pair with totalSupply at S, balanceOf at B, token0/token1 at
    T0/T1 (default ``0,1,6,7``)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Union

from .encoding import ZERO_ADDRESS, ZERO_WORD, bytes_to_int, pad32, to_hex
from .errors import (
    MissingSlotProof,
    NoResolver,
    NothingToEscape,
    NotOwner,
    ResolverNotYetActive,
    UnknownResolver,
    ZeroSupply,
)
from .state import ERC20, ERC721, UNIV2, WALLET, TokenLayout, VerifiedBundle, mapping_slot

ETH = ZERO_ADDRESS


def erc20_balance_slot(user: bytes, balances_slot_index: int | bytes) -> bytes:
    """``keccak256(abi.encode(uint256(uint160(user)), uint256(BALANCES_SLOT)))``"""
    return mapping_slot(user, _as_index(balances_slot_index))


def erc721_owner_slot(token_id: int | bytes, owners_slot_index: int | bytes) -> bytes:
    """``keccak256(abi.encode(tokenId, uint256(OWNERS_SLOT)))``"""
    return mapping_slot(token_id, _as_index(owners_slot_index))


def _as_index(index: int | bytes) -> int:
    return index if isinstance(index, int) else bytes_to_int(index)


# ---------------------------------------------------------------------------
# outcome types and read context


@dataclass(frozen=True)
class Payout:
    """One asset leaving escrow. Exactly one of ``amount``/``token_id`` applies."""

    asset: bytes
    amount: int = 0
    token_id: Optional[int] = None

    @property
    def is_nft(self) -> bool:
        return self.token_id is not None

    def to_json(self) -> dict:
        if self.is_nft:
            return {"asset": to_hex(self.asset), "tokenId": str(self.token_id)}
        return {"asset": to_hex(self.asset), "amount": str(self.amount)}


@dataclass(frozen=True)
class ResolverOutcome:
    payouts: tuple[Payout, ...]
    entitled: bytes
    slots_consulted: tuple[tuple[bytes, bytes], ...]
    # Third component of the nullifier key: the token id for NFTs, zero otherwise.
    discriminator: bytes = ZERO_WORD


class SlotReadContext:
    """Proof-backed storage reads at one state root."""

    def __init__(self, root: bytes, reads: Mapping[tuple[bytes, bytes], Optional[bytes]]):
        self.root = root
        self._reads = dict(reads)

    @classmethod
    def from_verified(cls, root: bytes, bundles: Iterable[VerifiedBundle]) -> "SlotReadContext":
        reads = {}
        for vb in bundles:
            if vb.root != root:
                raise ValueError("bundle verified against a different root")
            for slot, value in vb.slots.items():
                reads[(vb.address, slot)] = value
        return cls(root, reads)

    def covers(self, contract: bytes, slot: bytes) -> bool:
        return (contract, slot) in self._reads

    def read(self, contract: bytes, slot: bytes) -> Optional[bytes]:
        try:
            return self._reads[(contract, slot)]
        except KeyError:
            raise MissingSlotProof(
                f"no verified proof for slot {to_hex(slot)} of {to_hex(contract)}"
            ) from None

    def proven(self) -> list[tuple[bytes, bytes]]:
        return sorted(self._reads)


class _Reader:
    """Wraps a context and records every slot a resolver looks at."""

    def __init__(self, ctx) -> None:
        self.ctx = ctx
        self.consulted: list[tuple[bytes, bytes]] = []

    def word(self, contract: bytes, slot: bytes) -> Optional[bytes]:
        self.consulted.append((contract, slot))
        return self.ctx.read(contract, slot)

    def uint(self, contract: bytes, slot: bytes) -> int:
        return bytes_to_int(self.word(contract, slot) or ZERO_WORD)

    def address(self, contract: bytes, slot: bytes) -> bytes:
        return (self.word(contract, slot) or ZERO_WORD)[12:]


# ---------------------------------------------------------------------------
# concrete resolution logic


def resolve_erc20(ctx, token: bytes, user: bytes, layout: TokenLayout) -> ResolverOutcome:
    reader = _Reader(ctx)
    balance = reader.uint(token, erc20_balance_slot(user, layout.balances_slot))
    if balance == 0:
        raise NothingToEscape(f"{to_hex(user)} holds no {to_hex(token)}")
    return ResolverOutcome((Payout(token, amount=balance),), user, tuple(reader.consulted))


def resolve_erc721(ctx, token: bytes, token_id: int, claim_by: bytes, layout: TokenLayout) -> ResolverOutcome:
    reader = _Reader(ctx)
    word = reader.word(token, erc721_owner_slot(token_id, layout.owners_slot))
    if word is None:
        raise NothingToEscape(f"token id {token_id} of {to_hex(token)} is unminted")
    owner = word[12:]
    if owner != claim_by:
        raise NotOwner(f"token id {token_id} is owned by {to_hex(owner)}")
    return ResolverOutcome(
        (Payout(token, token_id=token_id),), claim_by, tuple(reader.consulted), pad32(token_id)
    )


TokenLayouts = Union[Mapping[bytes, TokenLayout], Callable[[bytes], TokenLayout]]


def resolve_univ2(
    ctx, pool: bytes, provider: bytes, pool_layout: TokenLayout, token_layouts: TokenLayouts
) -> ResolverOutcome:
    """Pro-rata share of both pool balances for one LP, as ``burn`` computes it.

    ``token_layouts`` maps each pool token to the ERC-20 layout used to find
    the pool's own balance in it.
    """
    lookup = token_layouts if callable(token_layouts) else token_layouts.__getitem__
    reader = _Reader(ctx)
    # the pool's tokens, read from its own storage
    token_x = reader.address(pool, pad32(pool_layout.token0_slot))
    token_y = reader.address(pool, pad32(pool_layout.token1_slot))
    # the pool's balance in each token contract
    balances = []
    for token in (token_x, token_y):
        try:
            layout = lookup(token)
        except KeyError:
            raise NoResolver(f"no ERC-20 layout known for pool token {to_hex(token)}") from None
        balances.append(reader.uint(token, erc20_balance_slot(pool, layout.balances_slot)))
    total = reader.uint(pool, pad32(pool_layout.total_supply_slot))
    lp = reader.uint(pool, erc20_balance_slot(provider, pool_layout.balances_slot))
    if lp == 0:
        raise NothingToEscape(f"{to_hex(provider)} holds no LP tokens of {to_hex(pool)}")
    if total == 0:
        raise ZeroSupply(f"pool {to_hex(pool)} reports zero LP supply")
    payouts = tuple(
        Payout(token, amount=lp * bal // total)
        for token, bal in zip((token_x, token_y), balances)
        if lp * bal // total > 0
    )
    if not payouts:
        raise NothingToEscape("LP share rounds down to zero in both tokens")
    return ResolverOutcome(payouts, provider, tuple(reader.consulted))


# ---------------------------------------------------------------------------
# resolver objects and identifiers


class Resolver:
    kind: str

    @property
    def resolver_id(self) -> str:
        raise NotImplementedError

    def layout(self) -> TokenLayout:
        raise NotImplementedError

    def resolve(self, ctx, contract: bytes, account: bytes, args: Mapping, token_layouts) -> ResolverOutcome:
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        return isinstance(other, Resolver) and self.resolver_id == other.resolver_id

    def __hash__(self) -> int:
        return hash(self.resolver_id)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.resolver_id}>"


class Erc20Resolver(Resolver):
    kind = ERC20

    def __init__(self, balances_slot: int = 0) -> None:
        self.balances_slot = balances_slot

    @property
    def resolver_id(self) -> str:
        return "erc20" if self.balances_slot == 0 else f"erc20@{self.balances_slot}"

    def layout(self) -> TokenLayout:
        return TokenLayout(ERC20, balances_slot=self.balances_slot)

    def resolve(self, ctx, contract, account, args, token_layouts):
        return resolve_erc20(ctx, contract, account, self.layout())


class Erc721Resolver(Resolver):
    kind = ERC721

    def __init__(self, owners_slot: int = 0) -> None:
        self.owners_slot = owners_slot

    @property
    def resolver_id(self) -> str:
        return "erc721" if self.owners_slot == 0 else f"erc721@{self.owners_slot}"

    def layout(self) -> TokenLayout:
        return TokenLayout.erc721(self.owners_slot)

    def resolve(self, ctx, contract, account, args, token_layouts):
        if "token_id" not in args:
            raise NothingToEscape("ERC-721 escape needs a token_id argument")
        return resolve_erc721(ctx, contract, int(args["token_id"]), account, self.layout())


class UniV2Resolver(Resolver):
    kind = UNIV2
    _DEFAULT = (0, 1, 6, 7)

    def __init__(self, total_supply_slot=0, balances_slot=1, token0_slot=6, token1_slot=7) -> None:
        self.slots = (total_supply_slot, balances_slot, token0_slot, token1_slot)

    @property
    def resolver_id(self) -> str:
        if self.slots == self._DEFAULT:
            return "univ2"
        return "univ2@" + ",".join(str(s) for s in self.slots)

    def layout(self) -> TokenLayout:
        return TokenLayout.univ2(*self.slots)

    def resolve(self, ctx, contract, account, args, token_layouts):
        return resolve_univ2(ctx, contract, account, self.layout(), token_layouts)


_FACTORIES = {"erc20": Erc20Resolver, "erc721": Erc721Resolver, "univ2": UniV2Resolver}


def resolver_from_id(resolver_id: str) -> Resolver:
    name, _, params = resolver_id.partition("@")
    factory = _FACTORIES.get(name)
    if factory is None:
        raise UnknownResolver(f"unknown resolver {resolver_id!r}")
    try:
        args = [int(p) for p in params.split(",")] if params else []
        resolver = factory(*args)
        resolver.layout()
    except (TypeError, ValueError) as exc:
        raise UnknownResolver(f"bad parameters in {resolver_id!r}: {exc}") from None
    return resolver


def default_resolver(layout: TokenLayout) -> Resolver:
    """Default resolver parameterized by a contract's declared layout."""
    if layout.kind == ERC20:
        return Erc20Resolver(layout.balances_slot)
    if layout.kind == ERC721:
        return Erc721Resolver(layout.owners_slot)
    if layout.kind == UNIV2:
        return UniV2Resolver(
            layout.total_supply_slot, layout.balances_slot, layout.token0_slot, layout.token1_slot
        )
    raise NoResolver(f"no default resolver for {layout.kind} contracts")


def dispatch(registry, l2_contract: bytes, now: int, default_layouts: Mapping[bytes, TokenLayout]) -> Resolver:
    """Pick the resolver for ``l2_contract`` at time ``now``.

    A registered resolver wins and must be past its activation time;
    otherwise the default resolver for the contract's declared layout is
    used, active as soon as escapes are.
    """
    registration = registry.registration(l2_contract)
    if registration is not None:
        activation = registry.activation_time(registration)
        if now < activation:
            raise ResolverNotYetActive(
                f"{registration.kind} resolver for {to_hex(l2_contract)} activates at {activation}"
            )
        return resolver_from_id(registration.resolver_id)
    layout = default_layouts.get(l2_contract)
    if layout is None or layout.kind == WALLET:
        raise NoResolver(f"no resolver registered or defaulted for {to_hex(l2_contract)}")
    return default_resolver(layout)


def erc20_layout_lookup(registry, now: int, default_layouts: Mapping[bytes, TokenLayout]):
    """Layout lookup for pool tokens, routed through ordinary ERC-20 dispatch."""

    def lookup(token: bytes) -> TokenLayout:
        try:
            resolver = dispatch(registry, token, now, default_layouts)
        except NoResolver:
            raise KeyError(token) from None
        if resolver.kind != ERC20:
            raise KeyError(token)
        return resolver.layout()

    return lookup


__all__ = [
    "ETH",
    "Erc20Resolver",
    "Erc721Resolver",
    "Payout",
    "Resolver",
    "ResolverOutcome",
    "SlotReadContext",
    "UniV2Resolver",
    "default_resolver",
    "dispatch",
    "erc20_balance_slot",
    "erc20_layout_lookup",
    "erc721_owner_slot",
    "resolve_erc20",
    "resolve_erc721",
    "resolve_univ2",
    "resolver_from_id",
]
