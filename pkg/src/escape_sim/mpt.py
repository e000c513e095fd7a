"""Hexary Merkle Patricia Trie with inclusion/absence proofs.

Tries are persistent: ``insert`` and ``delete`` return a new :class:`Trie`
that shares unchanged subtrees with the old one, so a root taken at any
point stays valid for proof generation after later writes.

The trie is value-opaque. Callers RLP-encode leaf values themselves and
apply :func:`secure_key` when they want Ethereum's hashed keying.
"""

from __future__ import annotations

from typing import Iterator, Optional, Sequence

from .encoding import keccak256, rlp_decode, rlp_encode
from .errors import InvalidProof, MalformedRlp, WrongKeyLength

EMPTY_ROOT = keccak256(rlp_encode(b""))

Nibbles = tuple


def key_to_nibbles(key: bytes) -> Nibbles:
    out = []
    for b in key:
        out.append(b >> 4)
        out.append(b & 0x0F)
    return tuple(out)


def nibbles_to_key(nibbles: Sequence[int]) -> bytes:
    return bytes((nibbles[i] << 4) | nibbles[i + 1] for i in range(0, len(nibbles), 2))


def hex_prefix_encode(nibbles: Sequence[int], is_leaf: bool) -> bytes:
    flag = 2 if is_leaf else 0
    if len(nibbles) % 2:
        nibbles = (flag + 1, *nibbles)
    else:
        nibbles = (flag, 0, *nibbles)
    return nibbles_to_key(nibbles)


def hex_prefix_decode(data: bytes) -> tuple[Nibbles, bool]:
    if not data:
        raise InvalidProof("empty hex-prefix path")
    nibbles = key_to_nibbles(data)
    flag = nibbles[0]
    if flag > 3:
        raise InvalidProof(f"bad hex-prefix flag {flag}")
    if flag & 1:
        return nibbles[1:], bool(flag & 2)
    if nibbles[1] != 0:
        raise InvalidProof("even hex-prefix path with nonzero pad nibble")
    return nibbles[2:], bool(flag & 2)


def secure_key(raw: bytes) -> bytes:
    """Hash an address (20 octets) or slot key (32 octets) for secure keying."""
    if len(raw) not in (20, 32):
        raise WrongKeyLength(f"secure keys are 20 or 32 octets, got {len(raw)}")
    return keccak256(raw)


def _common_prefix(a: Nibbles, b: Nibbles) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


# ---------------------------------------------------------------------------
# nodes


class _Node:
    __slots__ = ("_rlp", "_ref")

    def __init__(self) -> None:
        self._rlp: Optional[bytes] = None
        self._ref = None

    def structure(self) -> list:
        raise NotImplementedError

    def rlp(self) -> bytes:
        if self._rlp is None:
            self._rlp = rlp_encode(self.structure())
        return self._rlp

    def ref(self):
        """Reference used by a parent: the node inline if short, else its hash."""
        if self._ref is None:
            enc = self.rlp()
            self._ref = self.structure() if len(enc) < 32 else keccak256(enc)
        return self._ref


class Leaf(_Node):
    __slots__ = ("path", "value")

    def __init__(self, path: Nibbles, value: bytes) -> None:
        super().__init__()
        self.path = path
        self.value = value

    def structure(self) -> list:
        return [hex_prefix_encode(self.path, True), self.value]


class Extension(_Node):
    __slots__ = ("path", "child")

    def __init__(self, path: Nibbles, child: _Node) -> None:
        super().__init__()
        self.path = path
        self.child = child

    def structure(self) -> list:
        return [hex_prefix_encode(self.path, False), self.child.ref()]


class Branch(_Node):
    __slots__ = ("children", "value")

    def __init__(self, children: tuple, value: bytes = b"") -> None:
        super().__init__()
        self.children = children
        self.value = value

    def structure(self) -> list:
        refs = [b"" if c is None else c.ref() for c in self.children]
        return refs + [self.value]


_NO_CHILDREN = (None,) * 16


def _with_child(children: tuple, index: int, child) -> tuple:
    return children[:index] + (child,) + children[index + 1 :]


def _insert(node, path: Nibbles, value: bytes) -> _Node:
    if node is None:
        return Leaf(path, value)
    if isinstance(node, Branch):
        if not path:
            return Branch(node.children, value)
        child = _insert(node.children[path[0]], path[1:], value)
        return Branch(_with_child(node.children, path[0], child), node.value)
    if isinstance(node, Leaf):
        if node.path == path:
            return Leaf(path, value)
        split = _common_prefix(node.path, path)
        children, branch_value = _NO_CHILDREN, b""
        for p, v in ((node.path, node.value), (path, value)):
            rest = p[split:]
            if rest:
                children = _with_child(children, rest[0], Leaf(rest[1:], v))
            else:
                branch_value = v
        branch = Branch(children, branch_value)
        return Extension(path[:split], branch) if split else branch
    # Extension
    split = _common_prefix(node.path, path)
    if split == len(node.path):
        return Extension(node.path, _insert(node.child, path[split:], value))
    ext_rest = node.path[split + 1 :]
    moved = Extension(ext_rest, node.child) if ext_rest else node.child
    children = _with_child(_NO_CHILDREN, node.path[split], moved)
    branch = Branch(children)
    branch = _insert(branch, path[split:], value)
    return Extension(path[:split], branch) if split else branch


def _join(prefix: Nibbles, node) -> Optional[_Node]:
    """Prepend ``prefix`` to ``node``, collapsing adjacent path segments."""
    if node is None:
        return None
    if not prefix:
        return node
    if isinstance(node, Leaf):
        return Leaf(prefix + node.path, node.value)
    if isinstance(node, Extension):
        return Extension(prefix + node.path, node.child)
    return Extension(prefix, node)


def _normalize_branch(children: tuple, value: bytes) -> Optional[_Node]:
    occupied = [i for i, c in enumerate(children) if c is not None]
    if len(occupied) + (1 if value else 0) >= 2:
        return Branch(children, value)
    if value:
        return Leaf((), value)
    if occupied:
        i = occupied[0]
        return _join((i,), children[i])
    return None


def _delete(node, path: Nibbles):
    if node is None:
        return None
    if isinstance(node, Leaf):
        return None if node.path == path else node
    if isinstance(node, Extension):
        n = len(node.path)
        if path[:n] != node.path:
            return node
        child = _delete(node.child, path[n:])
        if child is node.child:
            return node
        return _join(node.path, child)
    if not path:
        if not node.value:
            return node
        return _normalize_branch(node.children, b"")
    old = node.children[path[0]]
    child = _delete(old, path[1:])
    if child is old:
        return node
    return _normalize_branch(_with_child(node.children, path[0], child), node.value)


def _lookup(node, path: Nibbles) -> Optional[bytes]:
    while node is not None:
        if isinstance(node, Leaf):
            return node.value if node.path == path else None
        if isinstance(node, Extension):
            n = len(node.path)
            if path[:n] != node.path:
                return None
            node, path = node.child, path[n:]
        else:
            if not path:
                return node.value or None
            node, path = node.children[path[0]], path[1:]
    return None


def _walk(node, prefix: Nibbles) -> Iterator[tuple[Nibbles, bytes]]:
    if node is None:
        return
    if isinstance(node, Leaf):
        yield prefix + node.path, node.value
    elif isinstance(node, Extension):
        yield from _walk(node.child, prefix + node.path)
    else:
        if node.value:
            yield prefix, node.value
        for i, child in enumerate(node.children):
            yield from _walk(child, prefix + (i,))


class Trie:
    """Immutable trie value. Writers rebind: ``t = t.insert(k, v)``."""

    __slots__ = ("_root",)

    def __init__(self, root: Optional[_Node] = None) -> None:
        self._root = root

    def insert(self, key: bytes, value: bytes) -> "Trie":
        """Return a trie with ``key`` bound to ``value``; an empty value deletes."""
        if not value:
            return self.delete(key)
        return Trie(_insert(self._root, key_to_nibbles(key), bytes(value)))

    def delete(self, key: bytes) -> "Trie":
        new_root = _delete(self._root, key_to_nibbles(key))
        return self if new_root is self._root else Trie(new_root)

    def get(self, key: bytes) -> Optional[bytes]:
        return _lookup(self._root, key_to_nibbles(key))

    def items(self) -> Iterator[tuple[bytes, bytes]]:
        for path, value in _walk(self._root, ()):
            yield nibbles_to_key(path), value

    def __len__(self) -> int:
        return sum(1 for _ in _walk(self._root, ()))

    def __bool__(self) -> bool:
        return self._root is not None

    def root_hash(self) -> bytes:
        if self._root is None:
            return EMPTY_ROOT
        return keccak256(self._root.rlp())

    def prove(self, key: bytes) -> list[bytes]:
        """Hash-referenced nodes on the path to ``key``, root first.

        Inline (short) nodes travel inside their parent and are not listed.
        For an absent key the path ends where the key provably diverges.
        """
        proof: list[bytes] = []
        node, path = self._root, key_to_nibbles(key)
        hashed = True
        while node is not None:
            if hashed:
                proof.append(node.rlp())
            if isinstance(node, Leaf):
                break
            if isinstance(node, Extension):
                n = len(node.path)
                if path[:n] != node.path:
                    break
                node, path = node.child, path[n:]
            else:
                if not path:
                    break
                node, path = node.children[path[0]], path[1:]
            hashed = node is not None and len(node.rlp()) >= 32
        return proof

    def node_store(self) -> dict[bytes, bytes]:
        """Map of hash -> node RLP for every hash-referenced node (root included)."""
        store: dict[bytes, bytes] = {}

        def visit(node, is_root: bool) -> None:
            if node is None:
                return
            enc = node.rlp()
            if is_root or len(enc) >= 32:
                store[keccak256(enc)] = enc
            if isinstance(node, Extension):
                visit(node.child, False)
            elif isinstance(node, Branch):
                for child in node.children:
                    visit(child, False)

        visit(self._root, True)
        return store


def trie_from_items(items) -> Trie:
    trie = Trie()
    for key, value in items:
        trie = trie.insert(key, value)
    return trie


# ---------------------------------------------------------------------------
# verification


def _check_ref(ref) -> None:
    if isinstance(ref, list):
        if len(rlp_encode(ref)) >= 32:
            raise InvalidProof("inline node of 32 octets or more")
    elif ref != b"" and len(ref) != 32:
        raise InvalidProof(f"child reference of {len(ref)} octets")


def _decode_node(blob: bytes) -> list:
    try:
        node = rlp_decode(blob)
    except MalformedRlp as exc:
        raise InvalidProof(f"malformed node: {exc}") from None
    if not isinstance(node, list):
        raise InvalidProof("node is not an RLP list")
    return node


def verify_proof(root: bytes, key: bytes, proof: Sequence[bytes]) -> Optional[bytes]:
    """Check ``proof`` for ``key`` against ``root``.

    Returns the stored value when the key is included and ``None`` when the
    proof shows it is absent. Any inconsistency (hash mismatch, malformed or
    misplaced node, unused trailing nodes) raises :class:`InvalidProof`.
    """
    if not proof:
        if root == EMPTY_ROOT:
            return None
        raise InvalidProof("empty proof for non-empty root")
    path = key_to_nibbles(key)
    if keccak256(proof[0]) != root:
        raise InvalidProof("first node does not hash to the root")
    node = _decode_node(proof[0])
    used = 1
    result: Optional[bytes]
    while True:
        if len(node) == 17:
            for ref in node[:16]:
                _check_ref(ref)
            value = node[16]
            if not isinstance(value, bytes):
                raise InvalidProof("branch value is a list")
            if not path:
                result = value or None
                break
            ref, path = node[path[0]], path[1:]
        elif len(node) == 2:
            if not isinstance(node[0], bytes):
                raise InvalidProof("node path is a list")
            node_path, is_leaf = hex_prefix_decode(node[0])
            if is_leaf:
                if not isinstance(node[1], bytes) or not node[1]:
                    raise InvalidProof("leaf without a byte-string value")
                result = node[1] if node_path == path else None
                break
            if not node_path:
                raise InvalidProof("extension with empty path")
            _check_ref(node[1])
            if node[1] == b"":
                raise InvalidProof("extension without child")
            if path[: len(node_path)] != node_path:
                result = None
                break
            ref, path = node[1], path[len(node_path) :]
        else:
            raise InvalidProof(f"node with {len(node)} items")

        if ref == b"":
            result = None
            break
        if isinstance(ref, list):
            node = ref
            continue
        if used >= len(proof):
            raise InvalidProof("proof ends before the key path does")
        blob = proof[used]
        used += 1
        if keccak256(blob) != ref:
            raise InvalidProof(f"node {used - 1} does not match its parent reference")
        if len(blob) < 32:
            raise InvalidProof("short node referenced by hash")
        node = _decode_node(blob)

    if used != len(proof):
        raise InvalidProof(f"{len(proof) - used} unused proof nodes")
    return result
