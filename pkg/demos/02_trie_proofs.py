"""Building a Merkle-Patricia trie and checking proofs against its root."""

from escape_sim import EMPTY_ROOT, trie_from_items, verify_proof
from escape_sim.errors import InvalidProof

items = {b"do": b"verb", b"dog": b"puppy", b"doge": b"coin", b"horse": b"stallion"}
trie = trie_from_items(items.items())
root = trie.root_hash()
print("empty root:", EMPTY_ROOT.hex())
print("root:      ", root.hex())

proof = trie.prove(b"dog")
print(f"proof for 'dog' has {len(proof)} hash-referenced node(s)")
print("verified value:", verify_proof(root, b"dog", proof))

# a key that is not in the trie gets a proof of absence
print("'cat' proves absent:", verify_proof(root, b"cat", trie.prove(b"cat")) is None)

# flipping one bit anywhere in the proof breaks the hash chain
tampered = bytearray(proof[-1])
tampered[-1] ^= 0x01
try:
    verify_proof(root, b"dog", proof[:-1] + [bytes(tampered)])
except InvalidProof as exc:
    print("tampered proof rejected:", exc)
