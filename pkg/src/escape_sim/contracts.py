"""L1-side state machines: oracle, messenger, registries and the bridge.

These are ledger models of the Solidity contracts, not deployments. Time
is a logical integer clock passed in as ``now`` by the driver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

from .encoding import ZERO_WORD, create2_address, create_address, keccak256, to_hex
from .errors import (
    AlreadyMinted,
    DeployerMismatch,
    EscapeNotEnabled,
    EscrowInsufficient,
    L2AlreadyFailed,
    LiveResolverExists,
    NonMonotoneTimestamp,
    NothingToEscape,
    NotViaMessenger,
    NoValidRoot,
    NullifierUsed,
    StaleRoot,
)
from .resolvers import ETH, Payout, SlotReadContext, dispatch, erc20_layout_lookup, resolver_from_id
from .state import ProofBundle, TokenLayout, WorldState

DEFAULT_ESCAPE_DELAY = 604_800  # seven days

LIVE = "live"
POST_FAILURE = "post_failure"


# ---------------------------------------------------------------------------
# L2Oracle


@dataclass(frozen=True)
class StateRootRecord:
    root: bytes
    timestamp: int
    l2_block_number: int
    valid: bool = True

    def to_json(self) -> dict:
        return {
            "root": to_hex(self.root),
            "timestamp": str(self.timestamp),
            "l2_block_number": str(self.l2_block_number),
        }


class L2Oracle:
    """Append-only record of state roots whose validity proof was accepted."""

    def __init__(self) -> None:
        self.records: list[StateRootRecord] = []

    def propose_root(self, root: bytes, timestamp: int, block_number: int, valid: bool = True) -> bool:
        """Record ``root`` if its validity proof passed; returns whether it was accepted."""
        if self.records and timestamp < self.records[-1].timestamp:
            raise NonMonotoneTimestamp(
                f"timestamp {timestamp} precedes latest accepted {self.records[-1].timestamp}"
            )
        if not valid:
            return False
        self.records.append(StateRootRecord(root, timestamp, block_number, True))
        return True

    def latest(self) -> StateRootRecord:
        if not self.records:
            raise NoValidRoot("oracle holds no valid state root")
        return self.records[-1]


class EscapeClock:
    """The time trigger: escapes open ``delay`` after the latest valid root.

    Live-registered (and default) resolvers activate at the same moment;
    resolvers registered after the failure wait twice as long.
    """

    def __init__(self, oracle: L2Oracle, delay: int = DEFAULT_ESCAPE_DELAY) -> None:
        if delay < 0:
            raise ValueError("escape delay must be non-negative")
        self.oracle = oracle
        self.delay = delay

    def opens_at(self) -> int:
        return self.oracle.latest().timestamp + self.delay

    def enabled(self, now: int) -> bool:
        return now >= self.opens_at()

    def activation_time(self, kind: str) -> int:
        factor = 2 if kind == POST_FAILURE else 1
        return self.oracle.latest().timestamp + factor * self.delay


def escape_enabled(oracle: L2Oracle, delay: int, now: int) -> bool:
    return EscapeClock(oracle, delay).enabled(now)


# ---------------------------------------------------------------------------
# cross-domain messaging and registries


class CrossDomainMessenger:
    """Relays L2 -> L1 calls while the L2 is live.

    During a relay ``x_domain_message_sender`` names the L2 contract that
    sent the message, and the callee sees the messenger as its caller.
    """

    def __init__(self) -> None:
        self.live = True
        self._sender: Optional[bytes] = None

    @property
    def x_domain_message_sender(self) -> bytes:
        if self._sender is None:
            raise NotViaMessenger("no cross-domain message is being relayed")
        return self._sender

    def halt(self) -> None:
        self.live = False

    def relay(self, l2_sender: bytes, target: Callable, *args, **kwargs):
        if not self.live:
            raise L2AlreadyFailed("the L2 no longer relays messages")
        self._sender = l2_sender
        try:
            return target(self, *args, **kwargs)
        finally:
            self._sender = None


@dataclass(frozen=True)
class ResolverRegistration:
    l2_contract: bytes
    resolver_id: str
    kind: str
    registered_at: int

    def to_json(self) -> dict:
        return {
            "l2_contract": to_hex(self.l2_contract),
            "resolver": self.resolver_id,
            "kind": self.kind,
            "registered_at": str(self.registered_at),
        }


class ResolverRegistry:
    def __init__(self, messenger: CrossDomainMessenger, clock: EscapeClock) -> None:
        self.messenger = messenger
        self.clock = clock
        self.registrations: dict[bytes, ResolverRegistration] = {}

    def set_resolver(self, msg_sender, resolver_id: str, now: int) -> None:
        """Live registration; only callable by the messenger (last write wins)."""
        if msg_sender is not self.messenger:
            raise NotViaMessenger("setResolver must arrive through the cross-domain messenger")
        resolver_from_id(resolver_id)
        sender = self.messenger.x_domain_message_sender
        self.registrations[sender] = ResolverRegistration(sender, resolver_id, LIVE, now)

    def _register_post_failure(self, derived: bytes, l2_contract: bytes, resolver_id: str, now: int) -> None:
        if not self.clock.enabled(now):
            raise EscapeNotEnabled("post-failure registration opens with the escape hatch")
        if derived != l2_contract:
            raise DeployerMismatch(f"caller derives {to_hex(derived)}, not {to_hex(l2_contract)}")
        existing = self.registrations.get(l2_contract)
        if existing is not None and existing.kind == LIVE:
            raise LiveResolverExists(f"{to_hex(l2_contract)} registered its own resolver while live")
        resolver_from_id(resolver_id)
        self.registrations[l2_contract] = ResolverRegistration(l2_contract, resolver_id, POST_FAILURE, now)

    def register_post_failure_create(
        self, caller: bytes, nonce: int, l2_contract: bytes, resolver_id: str, now: int
    ) -> None:
        self._register_post_failure(create_address(caller, nonce), l2_contract, resolver_id, now)

    def register_post_failure_create2(
        self, caller: bytes, salt: bytes, bytecode_hash: bytes, l2_contract: bytes, resolver_id: str, now: int
    ) -> None:
        self._register_post_failure(
            create2_address(caller, salt, bytecode_hash), l2_contract, resolver_id, now
        )

    def registration(self, l2_contract: bytes) -> Optional[ResolverRegistration]:
        return self.registrations.get(l2_contract)

    def activation_time(self, registration: ResolverRegistration) -> int:
        return self.clock.activation_time(registration.kind)


def register_resolver_live(
    messenger: CrossDomainMessenger, registry: ResolverRegistry, l2_contract: bytes, resolver_id: str, now: int
) -> None:
    """Send ``setResolver`` from ``l2_contract`` over the messenger."""
    messenger.relay(l2_contract, registry.set_resolver, resolver_id, now)


@dataclass(frozen=True)
class DelegateRecord:
    l2_wallet: bytes
    l1_delegate: bytes
    registered_at: int


class DelegateRegistry:
    def __init__(self, messenger: CrossDomainMessenger) -> None:
        self.messenger = messenger
        self.delegates: dict[bytes, DelegateRecord] = {}

    def set_delegate(self, msg_sender, l1_delegate: bytes, now: int) -> None:
        if msg_sender is not self.messenger:
            raise NotViaMessenger("setDelegate must arrive through the cross-domain messenger")
        wallet = self.messenger.x_domain_message_sender
        self.delegates[wallet] = DelegateRecord(wallet, l1_delegate, now)

    def delegate_of(self, l2_wallet: bytes) -> Optional[bytes]:
        record = self.delegates.get(l2_wallet)
        return record.l1_delegate if record else None


def register_delegate(
    messenger: CrossDomainMessenger, delegates: DelegateRegistry, l2_wallet: bytes, l1_delegate: bytes, now: int
) -> None:
    messenger.relay(l2_wallet, delegates.set_delegate, l1_delegate, now)


# ---------------------------------------------------------------------------
# bridge


@dataclass(frozen=True)
class NullifierKey:
    escaper: bytes
    asset_contract: bytes
    discriminator: bytes = ZERO_WORD

    def digest(self) -> bytes:
        return keccak256(self.escaper + self.asset_contract + self.discriminator)


@dataclass(frozen=True)
class EscapeReceipt:
    claimer: bytes
    entitled: bytes
    root: bytes
    payouts: tuple[Payout, ...]
    nullifiers: tuple[bytes, ...]
    slots_consulted: tuple[tuple[bytes, bytes], ...] = ()
    resolver_id: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "claimer": to_hex(self.claimer),
            "entitled": to_hex(self.entitled),
            "root": to_hex(self.root),
            "resolver": self.resolver_id,
            "payouts": [p.to_json() for p in self.payouts],
            "nullifiers": [to_hex(n) for n in self.nullifiers],
            "slots_consulted": [
                {"contract": to_hex(c), "slot": to_hex(s)} for c, s in self.slots_consulted
            ],
        }


@dataclass
class _Ledger:
    """Per-asset accounting used for the conservation checksum."""

    deposited: int = 0
    paid: int = 0
    escrow: int = 0


class L1Bridge:
    """Escrow for bridged assets and the escape-hatch entry points.

    Deposits are applied to the L2 world directly (the forced-inclusion
    path) unless ``apply_on_l2`` is false, which models a deposit that lands
    after the operator stopped.
    """

    def __init__(
        self,
        oracle: L2Oracle,
        registry: ResolverRegistry,
        delegates: DelegateRegistry,
        default_layouts: Optional[Mapping[bytes, TokenLayout]] = None,
    ) -> None:
        self.oracle = oracle
        self.registry = registry
        self.delegates = delegates
        self.clock = registry.clock
        self.default_layouts: dict[bytes, TokenLayout] = dict(default_layouts or {})
        self.l1_tokens: dict[bytes, bytes] = {}
        self.ledgers: dict[bytes, _Ledger] = {ETH: _Ledger()}
        self.nft_escrow: set[tuple[bytes, int]] = set()
        self.nullifiers: set[bytes] = set()
        self.l1_balances: dict[bytes, dict[bytes, int]] = {}
        self.l1_nfts: dict[bytes, set[tuple[bytes, int]]] = {}
        self.receipts: list[EscapeReceipt] = []

    @property
    def escape_delay(self) -> int:
        return self.clock.delay

    @property
    def eth_escrow(self) -> int:
        return self.ledgers[ETH].escrow

    def token_escrow(self, l1_token: bytes) -> int:
        ledger = self.ledgers.get(l1_token)
        return ledger.escrow if ledger else 0

    def escape_enabled(self, now: int) -> bool:
        return self.clock.enabled(now)

    def l1_token_for(self, l2_token: bytes) -> bytes:
        """L1 counterpart of an L2 token; unmapped tokens share their L2 address."""
        return self.l1_tokens.get(l2_token, l2_token)

    def map_token(self, l2_token: bytes, l1_token: bytes) -> None:
        self.l1_tokens[l2_token] = l1_token

    # -- deposits ---------------------------------------------------------

    def deposit_eth(self, world: WorldState, l1_user: bytes, l2_recipient: bytes, amount: int, apply_on_l2: bool = True) -> None:
        if amount <= 0:
            raise ValueError("deposit amount must be positive")
        ledger = self.ledgers[ETH]
        ledger.deposited += amount
        ledger.escrow += amount
        if apply_on_l2:
            world.credit_eth(l2_recipient, amount)

    def deposit_erc20(
        self, world: WorldState, l1_user: bytes, l2_token: bytes, l2_recipient: bytes, amount: int, apply_on_l2: bool = True
    ) -> None:
        if amount <= 0:
            raise ValueError("deposit amount must be positive")
        if apply_on_l2:
            world.erc20_mint(l2_token, l2_recipient, amount)
        ledger = self.ledgers.setdefault(self.l1_token_for(l2_token), _Ledger())
        ledger.deposited += amount
        ledger.escrow += amount

    def deposit_erc721(
        self, world: WorldState, l1_user: bytes, l2_token: bytes, token_id: int, l2_recipient: bytes, apply_on_l2: bool = True
    ) -> None:
        key = (self.l1_token_for(l2_token), token_id)
        if key in self.nft_escrow:
            raise AlreadyMinted(f"token id {token_id} is already escrowed")
        if apply_on_l2:
            world.erc721_mint(l2_token, token_id, l2_recipient)
        self.nft_escrow.add(key)

    # -- escapes ----------------------------------------------------------

    def _authorized(self, claimer: bytes, entitled: bytes) -> bool:
        return claimer == entitled or self.delegates.delegate_of(entitled) == claimer

    def _check_open(self, now: int):
        latest = self.oracle.latest()
        if not self.clock.enabled(now):
            raise EscapeNotEnabled(f"escapes open at {self.clock.opens_at()}, now is {now}")
        return latest

    def _verify(self, latest: StateRootRecord, bundle: ProofBundle):
        if bundle.root != latest.root:
            raise StaleRoot(f"bundle proves against {to_hex(bundle.root)}, latest is {to_hex(latest.root)}")
        return bundle.verify(latest.root)

    def _settle(self, claimer, entitled, latest, payouts, key, consulted, resolver_id) -> EscapeReceipt:
        nullifier = key.digest()
        if nullifier in self.nullifiers:
            raise NullifierUsed(f"{to_hex(entitled)} already escaped {to_hex(key.asset_contract)}")
        l1_payouts = []
        for p in payouts:
            asset = p.asset if p.asset == ETH else self.l1_token_for(p.asset)
            l1_payouts.append(Payout(asset, p.amount, p.token_id))
        for p in l1_payouts:
            if p.is_nft:
                if (p.asset, p.token_id) not in self.nft_escrow:
                    raise EscrowInsufficient(f"token id {p.token_id} of {to_hex(p.asset)} is not escrowed")
            elif self.ledgers.get(p.asset, _Ledger()).escrow < p.amount:
                raise EscrowInsufficient(f"escrow of {to_hex(p.asset)} cannot cover {p.amount}")
        for p in l1_payouts:
            if p.is_nft:
                self.nft_escrow.remove((p.asset, p.token_id))
                self.l1_nfts.setdefault(claimer, set()).add((p.asset, p.token_id))
            else:
                ledger = self.ledgers[p.asset]
                ledger.escrow -= p.amount
                ledger.paid += p.amount
                balances = self.l1_balances.setdefault(claimer, {})
                balances[p.asset] = balances.get(p.asset, 0) + p.amount
        self.nullifiers.add(nullifier)
        receipt = EscapeReceipt(
            claimer, entitled, latest.root, tuple(l1_payouts), (nullifier,), tuple(consulted), resolver_id
        )
        self.receipts.append(receipt)
        return receipt

    def escape_eth(self, now: int, claimer: bytes, bundle: ProofBundle) -> EscapeReceipt:
        """Pay out the full proven ETH balance of ``bundle.address``."""
        latest = self._check_open(now)
        verified = self._verify(latest, bundle)
        entitled = bundle.address
        if not self._authorized(claimer, entitled):
            raise NothingToEscape(f"{to_hex(claimer)} may not escape for {to_hex(entitled)}")
        key = NullifierKey(entitled, ETH)
        if key.digest() in self.nullifiers:
            raise NullifierUsed(f"{to_hex(entitled)} already escaped its ETH")
        if verified.account is None or verified.account.balance == 0:
            raise NothingToEscape(f"{to_hex(entitled)} has no ETH at the latest root")
        payout = Payout(ETH, amount=verified.account.balance)
        return self._settle(claimer, entitled, latest, [payout], key, (), None)

    def escape_asset(
        self,
        now: int,
        claimer: bytes,
        l2_contract: bytes,
        bundles: Iterable[ProofBundle],
        args: Optional[Mapping] = None,
    ) -> EscapeReceipt:
        """Escape whatever the contract's resolver says ``claimer`` is owed.

        ``args["account"]`` names the L2 address being claimed for (default:
        the claimer itself, or the wallet the claimer is delegate of).
        """
        args = dict(args or {})
        latest = self._check_open(now)
        resolver = dispatch(self.registry, l2_contract, now, self.default_layouts)
        verified = [self._verify(latest, b) for b in bundles]
        ctx = SlotReadContext.from_verified(latest.root, verified)
        account = args.get("account", claimer)
        if not self._authorized(claimer, account):
            raise NothingToEscape(f"{to_hex(claimer)} may not escape for {to_hex(account)}")
        lookup = erc20_layout_lookup(self.registry, now, self.default_layouts)
        outcome = resolver.resolve(ctx, l2_contract, account, args, lookup)
        key = NullifierKey(outcome.entitled, l2_contract, outcome.discriminator)
        return self._settle(
            claimer, outcome.entitled, latest, outcome.payouts, key, outcome.slots_consulted, resolver.resolver_id
        )

    # -- views ------------------------------------------------------------

    def conservation(self) -> dict[bytes, dict]:
        """Per-asset deposited / paid / escrow totals and whether they balance."""
        return {
            asset: {
                "deposited": ledger.deposited,
                "paid": ledger.paid,
                "escrow": ledger.escrow,
                "balanced": ledger.paid + ledger.escrow == ledger.deposited,
            }
            for asset, ledger in self.ledgers.items()
        }

    def snapshot(self) -> dict:
        """JSON-ready dump of all bridge and registry state."""
        return {
            "escape_delay": str(self.escape_delay),
            "eth_escrow": str(self.eth_escrow),
            "token_escrow": {
                to_hex(a): str(l.escrow) for a, l in sorted(self.ledgers.items()) if a != ETH
            },
            "nft_escrow": [
                {"asset": to_hex(a), "token_id": str(i)} for a, i in sorted(self.nft_escrow)
            ],
            "nullifiers": sorted(to_hex(n) for n in self.nullifiers),
            "l1_balances": {
                to_hex(holder): {to_hex(a): str(v) for a, v in sorted(assets.items())}
                for holder, assets in sorted(self.l1_balances.items())
            },
            "l1_nfts": {
                to_hex(holder): [{"asset": to_hex(a), "token_id": str(i)} for a, i in sorted(items)]
                for holder, items in sorted(self.l1_nfts.items())
            },
            "resolvers": [r.to_json() for _, r in sorted(self.registry.registrations.items())],
            "delegates": {
                to_hex(w): to_hex(r.l1_delegate) for w, r in sorted(self.delegates.delegates.items())
            },
            "state_roots": [r.to_json() for r in self.oracle.records],
        }


@dataclass
class L1Contracts:
    """The four L1 machines wired together, as a scenario uses them."""

    oracle: L2Oracle
    messenger: CrossDomainMessenger
    registry: ResolverRegistry
    delegates: DelegateRegistry
    bridge: L1Bridge

    @classmethod
    def deploy(cls, escape_delay: int = DEFAULT_ESCAPE_DELAY, default_layouts=None) -> "L1Contracts":
        oracle = L2Oracle()
        messenger = CrossDomainMessenger()
        clock = EscapeClock(oracle, escape_delay)
        registry = ResolverRegistry(messenger, clock)
        delegates = DelegateRegistry(messenger)
        bridge = L1Bridge(oracle, registry, delegates, default_layouts)
        return cls(oracle, messenger, registry, delegates, bridge)


__all__ = [
    "DEFAULT_ESCAPE_DELAY",
    "CrossDomainMessenger",
    "DelegateRecord",
    "DelegateRegistry",
    "EscapeClock",
    "EscapeReceipt",
    "L1Bridge",
    "L1Contracts",
    "L2Oracle",
    "LIVE",
    "NullifierKey",
    "POST_FAILURE",
    "ResolverRegistration",
    "ResolverRegistry",
    "StateRootRecord",
    "escape_enabled",
    "register_delegate",
    "register_resolver_live",
]
