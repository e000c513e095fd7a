"""Deterministic scenario driver.

A scenario file describes named accounts and contracts, a timeline of
actions on a logical clock, and final assertions. :func:`run_scenario`
plays it against a fresh L2 world and set of L1 contracts and returns a
:class:`Report` whose canonical JSON is byte-identical across runs.

Timeline entries look like ``{"action": "escape_eth", "claimer": "alice",
"expect": "NullifierUsed"}``. ``at`` pins an absolute time, and
``advance_clock`` takes ``by`` as an integer or an expression in the
escape delay such as ``"T"``, ``"2T-1"`` or ``"T+5"``.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .contracts import DEFAULT_ESCAPE_DELAY, L1Contracts, register_delegate, register_resolver_live
from .encoding import ZERO_WORD, as_address, as_word, from_hex, to_hex
from .errors import EscapeSimError, L2AlreadyFailed, ParseError, SchemaViolation
from .resolvers import ETH, dispatch, erc20_layout_lookup
from .state import ERC20, ERC721, UNIV2, WALLET, StateSnapshot, TokenLayout, WorldState, placeholder_code_hash

FIXTURES_ENV = "ESCAPE_SIM_FIXTURES"

_COMMON = {"action", "at", "expect", "note"}
_ACTIONS: dict[str, tuple[set, set]] = {
    # kind: (required fields, optional fields)
    "deposit_eth": ({"from", "amount"}, {"to"}),
    "erc20_mint": ({"token", "to", "amount"}, set()),
    "erc20_transfer": ({"token", "from", "to", "amount"}, set()),
    "erc721_mint": ({"token", "to", "token_id"}, set()),
    "erc721_transfer": ({"token", "from", "to", "token_id"}, set()),
    "add_liquidity": ({"pool", "provider", "amount_x", "amount_y"}, {"expect_lp"}),
    "sequencer_mint_eth": ({"to", "amount"}, set()),
    "propose_root": (set(), {"valid"}),
    "register_resolver_live": ({"contract", "resolver"}, set()),
    "register_resolver_post_failure": (
        {"caller", "contract", "resolver"},
        {"nonce", "salt", "bytecode_hash"},
    ),
    "register_delegate": ({"wallet", "delegate"}, set()),
    "operator_failure": (set(), set()),
    "escape_eth": ({"claimer"}, {"account", "use_root", "expect_payouts"}),
    "escape_asset": (
        {"claimer", "contract"},
        {"args", "use_root", "withhold_slot", "expect_payouts"},
    ),
    "advance_clock": ({"by"}, set()),
}
_ASSERTIONS: dict[str, set] = {
    "l1_balance": {"holder", "asset", "amount"},
    "l1_nft": {"holder", "asset", "token_id"},
    "eth_escrow": {"amount"},
    "token_escrow": {"token", "amount"},
    "nullifier_count": {"count"},
    "conservation": set(),
}
_CONTRACT_FIELDS = {"name", "kind", "deployer", "layout", "default_resolver", "l1_address", "create2", "token_x", "token_y"}
_TOP_FIELDS = {"name", "description", "parameters", "genesis", "timeline", "assertions"}
_DELAY_EXPR = re.compile(r"^(\d*)T([+-]\d+)?$")


def parse_amount(value: Any, what: str = "amount") -> int:
    """Integers arrive as JSON ints or decimal strings; floats are refused."""
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise SchemaViolation(f"{what} must be an integer or decimal string, got {value!r}")
    if isinstance(value, str):
        if not value.isdigit():
            raise SchemaViolation(f"{what} must be a non-negative decimal string, got {value!r}")
        value = int(value)
    if value < 0:
        raise SchemaViolation(f"{what} must be non-negative")
    return value


def parse_delay_expr(value: Any, escape_delay: int) -> int:
    if isinstance(value, str):
        m = _DELAY_EXPR.match(value.replace(" ", ""))
        if m:
            factor = int(m.group(1) or 1)
            return factor * escape_delay + int(m.group(2) or 0)
    return parse_amount(value, "advance_clock.by")


# ---------------------------------------------------------------------------
# scenario model


@dataclass(frozen=True)
class ContractSpec:
    name: str
    kind: str
    deployer: str
    layout: TokenLayout
    default_resolver: bool = True
    l1_address: Optional[bytes] = None
    salt: Optional[bytes] = None
    bytecode_hash: Optional[bytes] = None
    token_x: Optional[str] = None
    token_y: Optional[str] = None


@dataclass(frozen=True)
class Action:
    index: int
    kind: str
    params: dict
    at: Optional[int] = None
    expect: str = "ok"


@dataclass
class Scenario:
    name: str
    description: str
    escape_delay: int
    accounts: dict[str, bytes]
    contracts: list[ContractSpec]
    timeline: list[Action]
    assertions: list[dict] = field(default_factory=list)

    @classmethod
    def from_dict(cls, obj: Any) -> "Scenario":
        if not isinstance(obj, dict):
            raise SchemaViolation("scenario must be a JSON object")
        _no_unknown(obj, _TOP_FIELDS, "scenario")
        for key in ("name", "timeline"):
            if key not in obj:
                raise SchemaViolation(f"scenario is missing {key!r}")
        params = obj.get("parameters", {})
        _no_unknown(params, {"escape_delay"}, "parameters")
        delay = parse_amount(params.get("escape_delay", DEFAULT_ESCAPE_DELAY), "parameters.escape_delay")

        genesis = obj.get("genesis", {})
        _no_unknown(genesis, {"accounts", "contracts"}, "genesis")
        accounts = {}
        for name, addr in genesis.get("accounts", {}).items():
            accounts[name] = _parse_address(addr, f"genesis.accounts.{name}")
        contracts = [
            _parse_contract(c, i, accounts) for i, c in enumerate(genesis.get("contracts", []))
        ]
        names = set(accounts) | {c.name for c in contracts}
        if len(names) != len(accounts) + len(contracts):
            raise SchemaViolation("account and contract names must be unique")
        by_name = {c.name: c for c in contracts}
        for c in contracts:
            if c.kind == UNIV2:
                for t in (c.token_x, c.token_y):
                    if t not in by_name or by_name[t].kind != ERC20:
                        raise SchemaViolation(f"pool {c.name!r} needs ERC-20 tokens, got {t!r}")

        timeline_raw = obj["timeline"]
        if not isinstance(timeline_raw, list):
            raise SchemaViolation("timeline must be a list")
        timeline = [_parse_action(a, i, names) for i, a in enumerate(timeline_raw)]
        scenario = cls(
            name=str(obj["name"]),
            description=str(obj.get("description", "")),
            escape_delay=delay,
            accounts=accounts,
            contracts=contracts,
            timeline=timeline,
            assertions=[_parse_assertion(a, i, names) for i, a in enumerate(obj.get("assertions", []))],
        )
        scenario.validate_timeline(delay)
        return scenario

    def validate_timeline(self, escape_delay: int) -> None:
        """Timestamps must never move backwards; at most one operator failure."""
        clock = 0
        failures = 0
        for action in self.timeline:
            if action.at is not None:
                if action.at < clock:
                    raise SchemaViolation(
                        f"timeline[{action.index}]: at={action.at} is before the clock ({clock})"
                    )
                clock = action.at
            if action.kind == "advance_clock":
                step = parse_delay_expr(action.params["by"], escape_delay)
                if step < 0:
                    raise SchemaViolation(
                        f"timeline[{action.index}]: advance_clock by {action.params['by']!r} is negative when T={escape_delay}"
                    )
                clock += step
            elif action.kind == "operator_failure":
                failures += 1
        if failures > 1:
            raise SchemaViolation("a scenario may contain at most one operator_failure")


def _no_unknown(obj: Any, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{where} must be an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise SchemaViolation(f"{where}: unknown field(s) {', '.join(extra)}")


def _parse_address(value: Any, where: str) -> bytes:
    try:
        return as_address(value)
    except (ValueError, TypeError) as exc:
        raise SchemaViolation(f"{where}: {exc}") from None


def _parse_word(value: Any, where: str) -> bytes:
    try:
        return as_word(value)
    except (ValueError, TypeError) as exc:
        raise SchemaViolation(f"{where}: {exc}") from None


def _check_ref(value: Any, names: set, where: str) -> None:
    if isinstance(value, str) and (value in names or value == "ETH"):
        return
    _parse_address(value, where)


def _parse_contract(obj: Any, i: int, accounts: dict) -> ContractSpec:
    where = f"genesis.contracts[{i}]"
    _no_unknown(obj, _CONTRACT_FIELDS, where)
    for key in ("name", "kind", "deployer"):
        if key not in obj:
            raise SchemaViolation(f"{where} is missing {key!r}")
    kind = obj["kind"]
    if kind not in (ERC20, ERC721, UNIV2, WALLET):
        raise SchemaViolation(f"{where}: unknown contract kind {kind!r}")
    if obj["deployer"] not in accounts:
        _parse_address(obj["deployer"], f"{where}.deployer")
    layout = TokenLayout.default(kind)
    if "layout" in obj:
        overrides = obj["layout"]
        _no_unknown(overrides, set(layout.slots()), f"{where}.layout")
        try:
            layout = TokenLayout(kind, **{**layout.slots(), **overrides})
        except (TypeError, ValueError) as exc:
            raise SchemaViolation(f"{where}.layout: {exc}") from None
    salt = bytecode_hash = None
    if "create2" in obj:
        c2 = obj["create2"]
        _no_unknown(c2, {"salt", "bytecode_hash"}, f"{where}.create2")
        salt = _parse_word(c2.get("salt"), f"{where}.create2.salt")
        if "bytecode_hash" in c2:
            bytecode_hash = _parse_word(c2["bytecode_hash"], f"{where}.create2.bytecode_hash")
    if (kind == UNIV2) != ("token_x" in obj and "token_y" in obj):
        raise SchemaViolation(f"{where}: token_x/token_y are required exactly for univ2pair contracts")
    return ContractSpec(
        name=obj["name"],
        kind=kind,
        deployer=obj["deployer"],
        layout=layout,
        default_resolver=bool(obj.get("default_resolver", kind != WALLET)),
        l1_address=_parse_address(obj["l1_address"], f"{where}.l1_address") if "l1_address" in obj else None,
        salt=salt,
        bytecode_hash=bytecode_hash,
        token_x=obj.get("token_x"),
        token_y=obj.get("token_y"),
    )


_REF_FIELDS = {"from", "to", "token", "pool", "provider", "contract", "caller", "wallet", "delegate", "claimer", "account"}
_AMOUNT_FIELDS = {"amount", "amount_x", "amount_y", "token_id", "nonce", "expect_lp"}


def _parse_action(obj: Any, i: int, names: set) -> Action:
    where = f"timeline[{i}]"
    if not isinstance(obj, dict) or "action" not in obj:
        raise SchemaViolation(f"{where}: each entry needs an 'action' field")
    kind = obj["action"]
    if kind not in _ACTIONS:
        raise SchemaViolation(f"{where}: unknown action kind {kind!r}")
    required, optional = _ACTIONS[kind]
    _no_unknown(obj, required | optional | _COMMON, where)
    missing = sorted(required - set(obj))
    if missing:
        raise SchemaViolation(f"{where}: {kind} is missing {', '.join(missing)}")
    params = {k: v for k, v in obj.items() if k not in _COMMON}
    for key in _REF_FIELDS & set(params):
        _check_ref(params[key], names, f"{where}.{key}")
    for key in _AMOUNT_FIELDS & set(params):
        params[key] = parse_amount(params[key], f"{where}.{key}")
    for key in ("salt", "bytecode_hash"):
        if key in params:
            _parse_word(params[key], f"{where}.{key}")
    if "args" in params:
        _no_unknown(params["args"], {"account", "token_id"}, f"{where}.args")
        if "account" in params["args"]:
            _check_ref(params["args"]["account"], names, f"{where}.args.account")
        if "token_id" in params["args"]:
            params["args"] = {**params["args"], "token_id": parse_amount(params["args"]["token_id"], f"{where}.args.token_id")}
    if params.get("use_root", "latest") not in ("latest", "previous", "current"):
        raise SchemaViolation(f"{where}.use_root must be latest, previous or current")
    if kind == "register_resolver_post_failure" and ("nonce" in params) == ("salt" in params):
        raise SchemaViolation(f"{where}: give either nonce (create) or salt (create2)")
    if kind == "advance_clock":
        by = params["by"]
        if not (isinstance(by, str) and _DELAY_EXPR.match(by.replace(" ", ""))):
            parse_amount(by, f"{where}.by")
    at = parse_amount(obj["at"], f"{where}.at") if "at" in obj else None
    expect = obj.get("expect", "ok")
    if not isinstance(expect, str):
        raise SchemaViolation(f"{where}.expect must be a string")
    return Action(i, kind, params, at, expect)


def _parse_assertion(obj: Any, i: int, names: set) -> dict:
    where = f"assertions[{i}]"
    if not isinstance(obj, dict) or obj.get("kind") not in _ASSERTIONS:
        raise SchemaViolation(f"{where}: unknown assertion kind {obj.get('kind') if isinstance(obj, dict) else obj!r}")
    fields = _ASSERTIONS[obj["kind"]]
    _no_unknown(obj, fields | {"kind"}, where)
    missing = sorted(fields - set(obj))
    if missing:
        raise SchemaViolation(f"{where}: missing {', '.join(missing)}")
    out = dict(obj)
    for key in ("holder", "asset", "token"):
        if key in out:
            _check_ref(out[key], names, f"{where}.{key}")
    for key in ("amount", "token_id", "count"):
        if key in out:
            out[key] = parse_amount(out[key], f"{where}.{key}")
    return out


def load_scenario(path: str | os.PathLike) -> Scenario:
    """Read and validate a scenario file; JSON errors carry line/column context."""
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return Scenario.from_dict(obj)
    except SchemaViolation as exc:
        raise SchemaViolation(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# reports


def canonical(obj: Any) -> Any:
    """Convert ints to decimal strings recursively; JSON output then has no numbers."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, bytes):
        return to_hex(obj)
    raise TypeError(f"cannot canonicalize {type(obj).__name__}")


@dataclass
class Report:
    scenario: str
    escape_delay: int
    actions: list[dict]
    assertions: list[dict]
    bridge: dict
    conservation: dict
    post_failure_silence: bool
    final_root: Optional[str]

    @property
    def failures(self) -> list[str]:
        out = [
            f"action {a['index']} ({a['action']}): expected {a['expected']}, got {a['status']}"
            + (f" [{a['mismatch']}]" if a.get("mismatch") else "")
            for a in self.actions
            if not a["pass"]
        ]
        out += [f"assertion {a['index']} ({a['kind']}): {a['detail']}" for a in self.assertions if not a["pass"]]
        if not self.post_failure_silence:
            out.append("a root or live registration succeeded after operator failure")
        return out

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return canonical(
            {
                "scenario": self.scenario,
                "parameters": {"escape_delay": self.escape_delay},
                "actions": self.actions,
                "assertions": self.assertions,
                "bridge": self.bridge,
                "nullifiers": self.bridge["nullifiers"],
                "conservation": self.conservation,
                "post_failure_silence": self.post_failure_silence,
                "final_valid_root": self.final_root,
                "failures": self.failures,
                "passed": self.passed,
            }
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# execution


class _PlanningContext:
    """Unverified reads straight from a snapshot, used to decide which proofs to fetch."""

    def __init__(self, snapshot: StateSnapshot) -> None:
        self.snapshot = snapshot
        self.reads: list[tuple[bytes, bytes]] = []

    def read(self, contract: bytes, slot: bytes):
        self.reads.append((contract, slot))
        return self.snapshot.read_storage(contract, slot)


def plan_asset_escape(l1: L1Contracts, snapshot: StateSnapshot, now: int, contract: bytes, account: bytes, args: dict):
    """Slots the dispatched resolver will read for this claim, grouped by contract.

    Plays the part of a user querying an L2 node before submitting proofs.
    """
    bridge = l1.bridge
    try:
        resolver = dispatch(l1.registry, contract, now, bridge.default_layouts)
    except EscapeSimError:
        return {}
    ctx = _PlanningContext(snapshot)
    try:
        resolver.resolve(ctx, contract, account, args, erc20_layout_lookup(l1.registry, now, bridge.default_layouts))
    except EscapeSimError:
        pass
    grouped: dict[bytes, list[bytes]] = {}
    for c, s in ctx.reads:
        if s not in grouped.setdefault(c, []):
            grouped[c].append(s)
    return grouped


class ScenarioRunner:
    def __init__(self, scenario: Scenario, escape_delay: Optional[int] = None) -> None:
        self.scenario = scenario
        self.escape_delay = scenario.escape_delay if escape_delay is None else escape_delay
        if escape_delay is not None:
            scenario.validate_timeline(self.escape_delay)
        self.world = WorldState()
        self.l1 = L1Contracts.deploy(self.escape_delay)
        self.clock = 0
        self.failed = False
        self.block_number = 0
        self.snapshots: dict[bytes, StateSnapshot] = {}
        self.names: dict[str, bytes] = dict(scenario.accounts)
        self.contracts: dict[bytes, ContractSpec] = {}
        self._deploy_genesis()

    # -- setup ------------------------------------------------------------

    def _deploy_genesis(self) -> None:
        world, bridge = self.world, self.l1.bridge
        for spec in self.scenario.contracts:
            deployer = self.addr(spec.deployer)
            create2 = {}
            if spec.salt is not None:
                create2 = {"salt": spec.salt, "bytecode_hash": spec.bytecode_hash}
            if spec.kind == UNIV2:
                address = world.univ2_deploy(
                    deployer, self.addr(spec.token_x), self.addr(spec.token_y), spec.layout, **create2
                )
            else:
                address = world.deploy(deployer, spec.layout, **create2)
            self.names[spec.name] = address
            self.contracts[address] = spec
            if spec.default_resolver and spec.kind != WALLET:
                bridge.default_layouts[address] = spec.layout
            if spec.l1_address is not None:
                bridge.map_token(address, spec.l1_address)

    def addr(self, ref: str) -> bytes:
        if ref == "ETH":
            return ETH
        if ref in self.names:
            return self.names[ref]
        return as_address(ref)

    def asset(self, ref: str) -> bytes:
        address = self.addr(ref)
        return address if address == ETH else self.l1.bridge.l1_token_for(address)

    # -- running ----------------------------------------------------------

    def run(self) -> Report:
        outcomes = []
        for action in self.scenario.timeline:
            if action.at is not None:
                self.clock = action.at
            outcomes.append(self._execute(action))
        assertions = [self._check(i, a) for i, a in enumerate(self.scenario.assertions)]
        failed_at = next(
            (o["index"] for o in outcomes if o["action"] == "operator_failure"), None
        )
        silence = failed_at is None or not any(
            o["index"] > failed_at
            and o["action"] in ("propose_root", "register_resolver_live", "register_delegate")
            and o["status"] == "ok"
            for o in outcomes
        )
        try:
            final_root = to_hex(self.l1.oracle.latest().root)
        except EscapeSimError:
            final_root = None
        conservation = {
            ("ETH" if asset == ETH else to_hex(asset)): entry
            for asset, entry in sorted(self.l1.bridge.conservation().items())
        }
        return Report(
            scenario=self.scenario.name,
            escape_delay=self.escape_delay,
            actions=outcomes,
            assertions=assertions,
            bridge=self.l1.bridge.snapshot(),
            conservation=conservation,
            post_failure_silence=silence,
            final_root=final_root,
        )

    def _execute(self, action: Action) -> dict:
        outcome = {"index": action.index, "action": action.kind, "at": self.clock, "expected": action.expect}
        mismatch = None
        try:
            detail = getattr(self, "_do_" + action.kind)(action.params)
            status = "ok"
            if isinstance(detail, dict) and detail.pop("_rejected", False):
                status = "rejected"
        except EscapeSimError as exc:
            status, detail = exc.code, {"message": str(exc)}
        if status == "ok" and action.kind in ("escape_eth", "escape_asset") and "expect_payouts" in action.params:
            expected = [self._expected_payout(p) for p in action.params["expect_payouts"]]
            if expected != detail["payouts"]:
                mismatch = f"payouts {detail['payouts']} != expected {expected}"
        if status == "ok" and action.kind == "add_liquidity" and "expect_lp" in action.params:
            if detail["lp_minted"] != action.params["expect_lp"]:
                mismatch = f"lp_minted {detail['lp_minted']} != expected {action.params['expect_lp']}"
        outcome.update(status=status, detail=detail)
        outcome["pass"] = status == action.expect and mismatch is None
        if mismatch:
            outcome["mismatch"] = mismatch
        return outcome

    def _expected_payout(self, p: dict) -> dict:
        out = {"asset": to_hex(self.asset(p["asset"]))}
        if "token_id" in p:
            out["tokenId"] = str(parse_amount(p["token_id"]))
        else:
            out["amount"] = str(parse_amount(p["amount"]))
        return out

    def _require_live(self) -> None:
        if self.failed:
            raise L2AlreadyFailed("the operator has failed; the L2 accepts no transactions")

    # -- action handlers --------------------------------------------------

    def _do_deposit_eth(self, p):
        sender = self.addr(p["from"])
        recipient = self.addr(p.get("to", p["from"]))
        self.l1.bridge.deposit_eth(self.world, sender, recipient, p["amount"], apply_on_l2=not self.failed)
        return {"l2_credit": "unapplied" if self.failed else "applied"}

    def _do_erc20_mint(self, p):
        self.l1.bridge.deposit_erc20(
            self.world, self.addr(p["to"]), self.addr(p["token"]), self.addr(p["to"]), p["amount"],
            apply_on_l2=not self.failed,
        )
        return {"l2_credit": "unapplied" if self.failed else "applied"}

    def _do_erc20_transfer(self, p):
        self._require_live()
        self.world.erc20_transfer(self.addr(p["token"]), self.addr(p["from"]), self.addr(p["to"]), p["amount"])
        return {}

    def _do_erc721_mint(self, p):
        self.l1.bridge.deposit_erc721(
            self.world, self.addr(p["to"]), self.addr(p["token"]), p["token_id"], self.addr(p["to"]),
            apply_on_l2=not self.failed,
        )
        return {"l2_credit": "unapplied" if self.failed else "applied"}

    def _do_erc721_transfer(self, p):
        self._require_live()
        self.world.erc721_transfer(self.addr(p["token"]), p["token_id"], self.addr(p["from"]), self.addr(p["to"]))
        return {}

    def _do_add_liquidity(self, p):
        self._require_live()
        minted = self.world.univ2_add_liquidity(
            self.addr(p["pool"]), self.addr(p["provider"]), p["amount_x"], p["amount_y"]
        )
        return {"lp_minted": minted}

    def _do_sequencer_mint_eth(self, p):
        # unbacked L2 credit, the kind of transition a validity proof rejects
        self._require_live()
        self.world.credit_eth(self.addr(p["to"]), p["amount"])
        return {}

    def _do_propose_root(self, p):
        self._require_live()
        snapshot = self.world.snapshot()
        self.block_number += 1
        accepted = self.l1.oracle.propose_root(snapshot.root, self.clock, self.block_number, bool(p.get("valid", True)))
        if accepted:
            self.snapshots[snapshot.root] = snapshot
        detail = {"root": to_hex(snapshot.root), "l2_block_number": self.block_number}
        if not accepted:
            detail["_rejected"] = True
        return detail

    def _do_register_resolver_live(self, p):
        register_resolver_live(self.l1.messenger, self.l1.registry, self.addr(p["contract"]), p["resolver"], self.clock)
        return {}

    def _do_register_resolver_post_failure(self, p):
        caller, contract = self.addr(p["caller"]), self.addr(p["contract"])
        registry = self.l1.registry
        if "nonce" in p:
            registry.register_post_failure_create(caller, p["nonce"], contract, p["resolver"], self.clock)
        else:
            if "bytecode_hash" in p:
                bytecode_hash = from_hex(p["bytecode_hash"])
            else:
                # default to the hash the genesis deployment used
                spec = self.contracts.get(contract)
                bytecode_hash = ZERO_WORD
                if spec is not None:
                    bytecode_hash = spec.bytecode_hash or placeholder_code_hash(spec.kind)
            registry.register_post_failure_create2(
                caller, from_hex(p["salt"]), bytecode_hash, contract, p["resolver"], self.clock
            )
        return {}

    def _do_register_delegate(self, p):
        register_delegate(self.l1.messenger, self.l1.delegates, self.addr(p["wallet"]), self.addr(p["delegate"]), self.clock)
        return {}

    def _do_operator_failure(self, p):
        self.failed = True
        self.l1.messenger.halt()
        return {}

    def _do_advance_clock(self, p):
        self.clock += parse_delay_expr(p["by"], self.escape_delay)
        return {"clock": self.clock}

    def proof_snapshot(self, use_root: str) -> StateSnapshot:
        records = self.l1.oracle.records
        if use_root == "current" or not records:
            return self.world.snapshot()
        if use_root == "previous" and len(records) >= 2:
            return self.snapshots[records[-2].root]
        return self.snapshots[records[-1].root]

    def _do_escape_eth(self, p):
        claimer = self.addr(p["claimer"])
        account = self.addr(p.get("account", p["claimer"]))
        bundle = self.proof_snapshot(p.get("use_root", "latest")).get_proof(account)
        receipt = self.l1.bridge.escape_eth(self.clock, claimer, bundle)
        return receipt.to_json()

    def _do_escape_asset(self, p):
        claimer = self.addr(p["claimer"])
        contract = self.addr(p["contract"])
        args = dict(p.get("args", {}))
        if "account" in args:
            args["account"] = self.addr(args["account"])
        account = args.get("account", claimer)
        snapshot = self.proof_snapshot(p.get("use_root", "latest"))
        plan = plan_asset_escape(self.l1, snapshot, self.clock, contract, account, args)
        if p.get("withhold_slot") and plan:
            last = list(plan)[-1]
            plan[last] = plan[last][:-1]
        plan.setdefault(contract, [])
        bundles = [snapshot.get_proof(c, slots) for c, slots in plan.items()]
        receipt = self.l1.bridge.escape_asset(self.clock, claimer, contract, bundles, args)
        return receipt.to_json()

    # -- assertions -------------------------------------------------------

    def _check(self, index: int, a: dict) -> dict:
        bridge = self.l1.bridge
        kind = a["kind"]
        if kind == "l1_balance":
            holder, asset = self.addr(a["holder"]), self.asset(a["asset"])
            actual = bridge.l1_balances.get(holder, {}).get(asset, 0)
            ok = actual == a["amount"]
        elif kind == "l1_nft":
            holder, asset = self.addr(a["holder"]), self.asset(a["asset"])
            actual = (asset, a["token_id"]) in bridge.l1_nfts.get(holder, set())
            ok = actual
        elif kind == "eth_escrow":
            actual = bridge.eth_escrow
            ok = actual == a["amount"]
        elif kind == "token_escrow":
            actual = bridge.token_escrow(self.asset(a["token"]))
            ok = actual == a["amount"]
        elif kind == "nullifier_count":
            actual = len(bridge.nullifiers)
            ok = actual == a["count"]
        else:  # conservation
            sheet = bridge.conservation()
            ok = all(entry["balanced"] for entry in sheet.values())
            actual = ok
        expected = {k: v for k, v in a.items() if k != "kind"}
        return {
            "index": index,
            "kind": kind,
            "expected": expected,
            "actual": actual,
            "pass": ok,
            "detail": f"expected {json.dumps(canonical(expected), sort_keys=True)}, got {canonical(actual)}",
        }


def run_scenario(scenario: Scenario, escape_delay: Optional[int] = None) -> Report:
    """Play ``scenario`` from genesis; ``escape_delay`` overrides its T."""
    return ScenarioRunner(scenario, escape_delay).run()


# ---------------------------------------------------------------------------
# bundled fixtures


def fixtures_dir() -> Path:
    override = os.environ.get(FIXTURES_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("escape_sim") / "fixtures"))


def list_fixtures() -> list[Path]:
    return sorted(fixtures_dir().glob("*.json"))


def load_fixture(name: str) -> Scenario:
    return load_scenario(fixtures_dir() / f"{name}.json")
