"""Independent reference implementations used to check the package.

Nothing here imports ``escape_sim``. The keccak is a straight transcription
of Keccak-f[1600] with the original 0x01 padding; the RLP encoder and the
trie builder follow the Ethereum yellow-paper definitions directly and
favour obviousness over speed (the trie is rebuilt from scratch by
recursive partitioning, no incremental updates, no shared code paths).
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

# ---------------------------------------------------------------------------
# Keccak-256

_RC = [
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
]

_ROT = [
    [0, 36, 3, 41, 18],
    [1, 44, 10, 45, 2],
    [62, 6, 43, 15, 61],
    [28, 55, 25, 21, 56],
    [27, 20, 39, 8, 14],
]

_MASK = (1 << 64) - 1


def _rol(x: int, n: int) -> int:
    n %= 64
    return ((x << n) | (x >> (64 - n))) & _MASK


def _keccak_f(a: list[list[int]]) -> None:
    for rc in _RC:
        c = [a[x][0] ^ a[x][1] ^ a[x][2] ^ a[x][3] ^ a[x][4] for x in range(5)]
        d = [c[(x - 1) % 5] ^ _rol(c[(x + 1) % 5], 1) for x in range(5)]
        for x in range(5):
            for y in range(5):
                a[x][y] ^= d[x]
        b = [[0] * 5 for _ in range(5)]
        for x in range(5):
            for y in range(5):
                b[y][(2 * x + 3 * y) % 5] = _rol(a[x][y], _ROT[x][y])
        for x in range(5):
            for y in range(5):
                a[x][y] = b[x][y] ^ ((~b[(x + 1) % 5][y]) & b[(x + 2) % 5][y])
        a[0][0] ^= rc


def keccak256(data: bytes) -> bytes:
    rate = 136
    msg = bytearray(data)
    msg.append(0x01)
    while len(msg) % rate:
        msg.append(0)
    msg[-1] |= 0x80
    state = [[0] * 5 for _ in range(5)]
    for off in range(0, len(msg), rate):
        block = msg[off:off + rate]
        for i in range(rate // 8):
            lane = int.from_bytes(block[8 * i:8 * i + 8], "little")
            state[i % 5][i // 5] ^= lane
        _keccak_f(state)
    out = b"".join(state[i % 5][i // 5].to_bytes(8, "little") for i in range(4))
    return out


# ---------------------------------------------------------------------------
# RLP


def rlp(item) -> bytes:
    """Encode bytes, non-negative ints, or (nested) lists."""
    if isinstance(item, int):
        item = item.to_bytes((item.bit_length() + 7) // 8, "big") if item else b""
    if isinstance(item, (bytes, bytearray)):
        item = bytes(item)
        if len(item) == 1 and item[0] < 0x80:
            return item
        return _length_prefix(len(item), 0x80) + item
    payload = b"".join(rlp(x) for x in item)
    return _length_prefix(len(payload), 0xC0) + payload


def _length_prefix(n: int, offset: int) -> bytes:
    if n < 56:
        return bytes([offset + n])
    ln = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return bytes([offset + 55 + len(ln)]) + ln


# ---------------------------------------------------------------------------
# Merkle Patricia trie, rebuilt from scratch


def _nibbles(key: bytes) -> tuple[int, ...]:
    out = []
    for b in key:
        out += [b >> 4, b & 0xF]
    return tuple(out)


def _hex_prefix(nibs: tuple[int, ...], leaf: bool) -> bytes:
    flag = 2 if leaf else 0
    if len(nibs) % 2:
        nibs = (flag + 1,) + nibs
    else:
        nibs = (flag, 0) + nibs
    return bytes(16 * nibs[i] + nibs[i + 1] for i in range(0, len(nibs), 2))


def trie_root(items: Mapping[bytes, bytes], hasher: Callable[[bytes], bytes] = keccak256) -> bytes:
    """Root of the trie holding ``items`` (keys used verbatim, empty values skipped)."""
    pairs = [(_nibbles(k), v) for k, v in items.items() if v]
    if not pairs:
        return hasher(rlp(b""))
    return hasher(rlp(_build(pairs, 0, hasher)))


def _ref(node, hasher):
    encoded = rlp(node)
    return node if len(encoded) < 32 else hasher(encoded)


def _build(pairs, depth, hasher):
    if len(pairs) == 1:
        nibs, value = pairs[0]
        return [_hex_prefix(nibs[depth:], True), value]
    shortest = min(len(k) for k, _ in pairs)
    common = 0
    while depth + common < shortest and len({k[depth + common] for k, _ in pairs}) == 1:
        common += 1
    if common:
        child = _build(pairs, depth + common, hasher)
        return [_hex_prefix(pairs[0][0][depth:depth + common], False), _ref(child, hasher)]
    branch: list = [b""] * 17
    for nib in range(16):
        group = [(k, v) for k, v in pairs if len(k) > depth and k[depth] == nib]
        if group:
            branch[nib] = _ref(_build(group, depth + 1, hasher), hasher)
    for k, v in pairs:
        if len(k) == depth:
            branch[16] = v
    return branch


# ---------------------------------------------------------------------------
# Ethereum-style world root


def storage_root(storage: Mapping[bytes, int], hasher: Callable[[bytes], bytes] = keccak256) -> bytes:
    """Secure storage trie root for 32-octet slot keys and integer values."""
    return trie_root({hasher(slot): rlp(value) for slot, value in storage.items() if value}, hasher)


def world_root(accounts: Iterable[tuple[bytes, int, int, Mapping[bytes, int], bytes]],
               hasher: Callable[[bytes], bytes] = keccak256) -> bytes:
    """``accounts`` yields (address, nonce, balance, storage, code_hash)."""
    leaves = {}
    for address, nonce, balance, storage, code_hash in accounts:
        leaves[hasher(address)] = rlp([nonce, balance, storage_root(storage, hasher), code_hash])
    return trie_root(leaves, hasher)


def mapping_slot(key: bytes | int, index: int, hasher: Callable[[bytes], bytes] = keccak256) -> bytes:
    if isinstance(key, int):
        key = key.to_bytes(32, "big")
    return hasher(key.rjust(32, b"\x00") + index.to_bytes(32, "big"))


def create_address(deployer: bytes, nonce: int) -> bytes:
    return keccak256(rlp([deployer, nonce]))[12:]


def create2_address(deployer: bytes, salt: bytes, code_hash: bytes) -> bytes:
    return keccak256(b"\xff" + deployer + salt + code_hash)[12:]


def pro_rata(lp: int, total: int, balance: int) -> int:
    """Uniswap v2 burn share, floor division."""
    return lp * balance // total
