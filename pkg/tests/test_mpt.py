import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from escape_sim.encoding import keccak256, rlp_encode, to_hex
from escape_sim.errors import InvalidProof, WrongKeyLength
from escape_sim.mpt import (
    EMPTY_ROOT,
    Trie,
    hex_prefix_decode,
    hex_prefix_encode,
    key_to_nibbles,
    nibbles_to_key,
    secure_key,
    trie_from_items,
    verify_proof,
)


def random_items(rng, n, key_len=32, max_value=40):
    return {rng.randbytes(key_len): rng.randbytes(rng.randint(1, max_value)) for _ in range(n)}


def test_empty_root():
    assert to_hex(EMPTY_ROOT) == "0x56e81f171bcc55a6ff8345e692c0f86e5b48e01b996cadc001622fb5e363b421"
    assert Trie().root_hash() == EMPTY_ROOT == oracles.trie_root({})


def test_single_insert_changes_root():
    trie = Trie().insert(b"\x01", b"v")
    assert trie.root_hash() != EMPTY_ROOT
    assert trie.root_hash() == oracles.trie_root({b"\x01": b"v"})


def test_last_write_wins():
    trie = Trie().insert(b"k", b"v1").insert(b"k", b"v2")
    assert trie.get(b"k") == b"v2"
    assert len(trie) == 1


def test_persistence():
    t1 = Trie().insert(b"a", b"1")
    t2 = t1.insert(b"b", b"2")
    assert t1.get(b"b") is None
    assert t2.get(b"a") == b"1"


def test_known_vector():
    # the classic doe/dog/dogglesworth example from the Ethereum wiki
    items = {b"do": b"verb", b"dog": b"puppy", b"doge": b"coin", b"horse": b"stallion"}
    expected = "0x5991bb8c6514148a29db676a14ac506cd2cd5775ace63c30a4fe457715e9ac84"
    assert to_hex(trie_from_items(items.items()).root_hash()) == expected
    assert to_hex(oracles.trie_root(items)) == expected


def test_order_independence_1000():
    rng = random.Random(1)
    items = list(random_items(rng, 1000).items())
    shuffled = items[:]
    rng.shuffle(shuffled)
    assert trie_from_items(items).root_hash() == trie_from_items(shuffled).root_hash()


def test_500_entries_match_reference():
    rng = random.Random(2)
    items = random_items(rng, 500)
    assert trie_from_items(items.items()).root_hash() == oracles.trie_root(items)


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.binary(min_size=1, max_size=4), st.binary(min_size=1, max_size=40), max_size=30))
def test_matches_reference_with_prefix_keys(items):
    # short keys that are prefixes of each other exercise branch values
    assert trie_from_items(items.items()).root_hash() == oracles.trie_root(items)


def test_delete_restores_root():
    rng = random.Random(3)
    for _ in range(30):
        items = random_items(rng, rng.randint(1, 80), key_len=rng.choice([2, 32]))
        keys = list(items)
        removed = set(rng.sample(keys, rng.randint(0, len(keys))))
        trie = trie_from_items(items.items())
        for k in removed:
            trie = trie.delete(k)
        kept = {k: v for k, v in items.items() if k not in removed}
        assert trie.root_hash() == trie_from_items(kept.items()).root_hash() == oracles.trie_root(kept)


def test_insert_empty_value_deletes():
    trie = Trie().insert(b"a", b"1").insert(b"b", b"2")
    assert trie.insert(b"b", b"").root_hash() == Trie().insert(b"a", b"1").root_hash()
    assert trie.delete(b"zz") is trie


def test_items_and_len():
    rng = random.Random(4)
    items = random_items(rng, 64, key_len=5)
    trie = trie_from_items(items.items())
    assert dict(trie.items()) == items
    assert len(trie) == 64


def test_hex_prefix():
    assert hex_prefix_encode([1, 2, 3, 4, 5], False) == bytes([0x11, 0x23, 0x45])
    assert hex_prefix_encode([0, 1, 2, 3, 4, 5], False) == bytes([0x00, 0x01, 0x23, 0x45])
    assert hex_prefix_encode([0, 15, 1, 12, 11, 8], True) == bytes([0x20, 0x0F, 0x1C, 0xB8])
    assert hex_prefix_encode([15, 1, 12, 11, 8], True) == bytes([0x3F, 0x1C, 0xB8])
    for nibs in ([], [7], [1, 2], [0, 0, 0]):
        for leaf in (True, False):
            assert hex_prefix_decode(hex_prefix_encode(nibs, leaf)) == (tuple(nibs), leaf)
    with pytest.raises(InvalidProof):
        hex_prefix_decode(b"\x40")
    with pytest.raises(InvalidProof):
        hex_prefix_decode(b"\x01")  # even flag with a nonzero pad nibble


def test_nibbles_round_trip():
    assert key_to_nibbles(b"\xab\x01") == (10, 11, 0, 1)
    assert nibbles_to_key((10, 11, 0, 1)) == b"\xab\x01"


def test_secure_key():
    assert secure_key(bytes(20)) == oracles.keccak256(bytes(20))
    assert secure_key(bytes(32)) == oracles.keccak256(bytes(32))
    for bad in (bytes(5), bytes(0), bytes(21), bytes(33)):
        with pytest.raises(WrongKeyLength):
            secure_key(bad)


# -- proofs ------------------------------------------------------------------


def test_single_leaf_proof():
    trie = Trie().insert(b"\x01" * 32, b"value")
    proof = trie.prove(b"\x01" * 32)
    assert len(proof) == 1
    assert verify_proof(trie.root_hash(), b"\x01" * 32, proof) == b"value"
    assert verify_proof(trie.root_hash(), b"\x02" * 32, proof) is None


def test_all_keys_of_100_entry_trie():
    rng = random.Random(5)
    items = random_items(rng, 100)
    trie = trie_from_items(items.items())
    root = trie.root_hash()
    for k, v in items.items():
        assert verify_proof(root, k, trie.prove(k)) == v
    for _ in range(100):
        k = rng.randbytes(32)
        assert verify_proof(root, k, trie.prove(k)) is None


def test_empty_trie_proofs():
    assert Trie().prove(b"x") == []
    assert verify_proof(EMPTY_ROOT, b"x", []) is None
    with pytest.raises(InvalidProof):
        verify_proof(keccak256(b"other"), b"x", [])


def test_proof_with_inline_nodes():
    # tiny values keep leaves under 32 octets so they travel inline
    items = {bytes([i, j]): bytes([i ^ j or 1]) for i in range(3) for j in range(5)}
    trie = trie_from_items(items.items())
    root = trie.root_hash()
    for k, v in items.items():
        proof = trie.prove(k)
        assert verify_proof(root, k, proof) == v
    assert verify_proof(root, b"\x09\x09", trie.prove(b"\x09\x09")) is None


def test_wrong_root_rejected():
    rng = random.Random(6)
    items = random_items(rng, 20)
    trie = trie_from_items(items.items())
    k = next(iter(items))
    with pytest.raises(InvalidProof):
        verify_proof(keccak256(b"nope"), k, trie.prove(k))


def test_extra_and_missing_nodes():
    rng = random.Random(7)
    items = random_items(rng, 200)
    trie = trie_from_items(items.items())
    root = trie.root_hash()
    k = next(iter(items))
    proof = trie.prove(k)
    assert len(proof) >= 2
    with pytest.raises(InvalidProof):
        verify_proof(root, k, proof[:-1])
    with pytest.raises(InvalidProof):
        verify_proof(root, k, proof + [proof[-1]])
    with pytest.raises(InvalidProof):
        verify_proof(root, k, [proof[0]] + proof[2:])


def test_bit_flips_in_small_proof():
    rng = random.Random(8)
    items = random_items(rng, 8)
    trie = trie_from_items(items.items())
    root = trie.root_hash()
    for k in items:
        proof = trie.prove(k)
        for i, node in enumerate(proof):
            for pos in range(len(node)):
                for bit in range(8):
                    mutated = bytearray(node)
                    mutated[pos] ^= 1 << bit
                    bad = proof[:i] + [bytes(mutated)] + proof[i + 1 :]
                    with pytest.raises(InvalidProof):
                        verify_proof(root, k, bad)


def test_proof_for_other_key_never_lies():
    rng = random.Random(9)
    items = random_items(rng, 50)
    # a few short values so some children are inlined
    items.update({rng.randbytes(32): b"\x01" for _ in range(10)})
    trie = trie_from_items(items.items())
    root = trie.root_hash()
    keys = list(items)
    for k in keys:
        proof = trie.prove(k)
        for other in keys:
            if other == k:
                continue
            try:
                got = verify_proof(root, other, proof)
            except InvalidProof:
                continue
            assert got == items.get(other)


def test_forged_short_hash_ref_rejected():
    # a node short enough to inline must not be accepted by hash
    leaf = rlp_encode([hex_prefix_encode([1, 2, 0], True), b"\x05"])
    assert len(leaf) < 32
    branch = [b""] * 17
    branch[0] = keccak256(leaf)
    branch[1] = keccak256(b"filler")
    root_node = rlp_encode(branch)
    with pytest.raises(InvalidProof):
        verify_proof(keccak256(root_node), b"\x01\x20", [root_node, leaf])


def test_node_store_contains_root():
    trie = trie_from_items(random_items(random.Random(10), 40).items())
    store = trie.node_store()
    assert trie.root_hash() in store
    for h, blob in store.items():
        assert keccak256(blob) == h
