"""Byte-level primitives: keccak-256, RLP, hex helpers and contract addresses.

Everything here is a pure function over immutable ``bytes``. Integers that
enter RLP are converted to their minimal big-endian form (zero is the empty
string), which is what Ethereum clients hash when deriving addresses and
trie leaves.
"""

from __future__ import annotations

from typing import Union

from Crypto.Hash import keccak as _keccak

from .errors import MalformedRlp

RlpItem = Union[bytes, list]

ZERO_ADDRESS = bytes(20)
ZERO_WORD = bytes(32)


def keccak256(data: bytes) -> bytes:
    """Keccak-256 with the original ``0x01`` padding (not SHA3-256)."""
    return _keccak.new(digest_bits=256, data=bytes(data)).digest()


EMPTY_CODE_HASH = keccak256(b"")


# ---------------------------------------------------------------------------
# hex and integer conventions


def to_hex(data: bytes) -> str:
    return "0x" + bytes(data).hex()


def from_hex(text: str) -> bytes:
    """Parse a ``0x``-prefixed hex string. Odd lengths are rejected."""
    if not isinstance(text, str):
        raise ValueError(f"expected hex string, got {type(text).__name__}")
    body = text[2:] if text[:2] in ("0x", "0X") else text
    if len(body) % 2:
        raise ValueError(f"odd-length hex string: {text!r}")
    return bytes.fromhex(body)


def int_to_bytes(value: int) -> bytes:
    """Minimal big-endian encoding; zero maps to ``b""``."""
    if value < 0:
        raise ValueError("negative integers have no RLP encoding")
    return value.to_bytes((value.bit_length() + 7) // 8, "big")


def bytes_to_int(data: bytes) -> int:
    return int.from_bytes(data, "big")


def pad32(value: int | bytes) -> bytes:
    """Left-zero-pad an integer or byte string to a 32-octet word."""
    if isinstance(value, int):
        return value.to_bytes(32, "big")
    if len(value) > 32:
        raise ValueError(f"cannot pad {len(value)} octets into a word")
    return bytes(32 - len(value)) + bytes(value)


def as_address(value: bytes | str) -> bytes:
    raw = from_hex(value) if isinstance(value, str) else bytes(value)
    if len(raw) != 20:
        raise ValueError(f"address must be 20 octets, got {len(raw)}")
    return raw


def as_word(value: bytes | str | int) -> bytes:
    if isinstance(value, int):
        return pad32(value)
    raw = from_hex(value) if isinstance(value, str) else bytes(value)
    if len(raw) != 32:
        raise ValueError(f"word must be 32 octets, got {len(raw)}")
    return raw


# ---------------------------------------------------------------------------
# RLP


def _length_prefix(length: int, offset: int) -> bytes:
    if length < 56:
        return bytes([offset + length])
    encoded_len = int_to_bytes(length)
    return bytes([offset + 55 + len(encoded_len)]) + encoded_len


def rlp_encode(item) -> bytes:
    """Encode a byte string or (nested) list of byte strings.

    Non-negative ints are accepted as a convenience and encoded as their
    minimal big-endian byte string.
    """
    if isinstance(item, int) and not isinstance(item, bool):
        item = int_to_bytes(item)
    if isinstance(item, (bytes, bytearray, memoryview)):
        item = bytes(item)
        if len(item) == 1 and item[0] < 0x80:
            return item
        return _length_prefix(len(item), 0x80) + item
    if isinstance(item, (list, tuple)):
        payload = b"".join(rlp_encode(x) for x in item)
        return _length_prefix(len(payload), 0xC0) + payload
    raise TypeError(f"cannot RLP-encode {type(item).__name__}")


def _decode_length(data: bytes, pos: int, short_base: int, long_base: int) -> tuple[int, int]:
    """Return (payload_start, payload_length) for the prefix at ``pos``."""
    prefix = data[pos]
    if prefix <= long_base:
        return pos + 1, prefix - short_base
    len_of_len = prefix - long_base
    start = pos + 1 + len_of_len
    if start > len(data):
        raise MalformedRlp("truncated length-of-length")
    len_bytes = data[pos + 1 : start]
    if len_bytes[0] == 0:
        raise MalformedRlp("length with leading zero octet")
    length = bytes_to_int(len_bytes)
    if length < 56:
        raise MalformedRlp("long form used for short payload")
    return start, length


def _decode_at(data: bytes, pos: int) -> tuple[RlpItem, int]:
    if pos >= len(data):
        raise MalformedRlp("unexpected end of input")
    prefix = data[pos]
    if prefix < 0x80:
        return data[pos : pos + 1], pos + 1
    if prefix < 0xC0:
        start, length = _decode_length(data, pos, 0x80, 0xB7)
        end = start + length
        if end > len(data):
            raise MalformedRlp("truncated string payload")
        if length == 1 and data[start] < 0x80:
            raise MalformedRlp("single octet below 0x80 must encode as itself")
        return data[start:end], end
    start, length = _decode_length(data, pos, 0xC0, 0xF7)
    end = start + length
    if end > len(data):
        raise MalformedRlp("truncated list payload")
    items = []
    cursor = start
    while cursor < end:
        item, cursor = _decode_at(data, cursor)
        if cursor > end:
            raise MalformedRlp("list element overruns list payload")
        items.append(item)
    return items, end


def rlp_decode(data: bytes) -> RlpItem:
    """Strictly decode exactly one canonical RLP item."""
    data = bytes(data)
    if not data:
        raise MalformedRlp("empty input")
    item, end = _decode_at(data, 0)
    if end != len(data):
        raise MalformedRlp(f"{len(data) - end} trailing octets")
    return item


# ---------------------------------------------------------------------------
# contract addresses


def create_address(deployer: bytes, nonce: int) -> bytes:
    """Address of a contract deployed with CREATE by ``deployer`` at ``nonce``."""
    return keccak256(rlp_encode([as_address(deployer), int_to_bytes(nonce)]))[12:]


def create2_address(deployer: bytes, salt: bytes, bytecode_hash: bytes) -> bytes:
    """Address of a CREATE2 deployment; ``bytecode_hash`` is keccak of the init code."""
    preimage = b"\xff" + as_address(deployer) + as_word(salt) + as_word(bytecode_hash)
    return keccak256(preimage)[12:]
