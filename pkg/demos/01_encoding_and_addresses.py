"""Hashing, RLP and contract addresses.

Everything the simulator commits to is built from three primitives: the
original Keccak-256, strict RLP, and the two contract-address rules.
"""

from escape_sim import create2_address, create_address, keccak256, rlp_decode, rlp_encode

print("keccak256('')    =", keccak256(b"").hex())
print("keccak256('abc') =", keccak256(b"abc").hex())

# RLP: byte strings, minimal big-endian integers and nested lists
for item in (b"dog", 0, 1024, [b"cat", [b"", 7]]):
    encoded = rlp_encode(item)
    print(f"rlp({item!r:24}) = {encoded.hex()}")
print("round trip:", rlp_decode(rlp_encode([b"cat", b"dog"])))

# Strict decoding rejects non-canonical forms such as a single byte < 0x80
# wrapped in a length prefix.
try:
    rlp_decode(bytes.fromhex("8105"))
except Exception as exc:
    print("rejected 0x8105:", type(exc).__name__)

deployer = bytes.fromhex("6ac7ea33f8831ea9dcc53393aaa88b25a785dbf0")
for nonce in range(3):
    print(f"CREATE  deployer nonce {nonce} -> 0x{create_address(deployer, nonce).hex()}")

init_code_hash = keccak256(b"\x00")
print("CREATE2 zero deployer, zero salt ->", "0x" + create2_address(bytes(20), bytes(32), init_code_hash).hex())
