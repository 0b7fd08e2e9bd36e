"""Hierarchical names, prefix-free namespaces and packages.

A name is a tuple of nonempty strings, written with dots (``a.b.c``).  A
namespace is a finite prefix-free set of names and a package attaches a value
to every name of a namespace.  Packages of packages flatten by grafting, which
is how hierarchical models get their port and box names.
"""
from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Generic, TypeVar, Union

A = TypeVar("A")

# '.' separates segments; the rest is punctuation used by the model format.
RESERVED_CHARS = frozenset(".,;:=#{}[]()<>\"'`+-*/^")


class InvalidName(ValueError):
    """Raised for malformed names."""


class PrefixConflict(ValueError):
    """Two names of a would-be namespace where one strictly prefixes the other."""

    def __init__(self, prefix: "Name", name: "Name"):
        self.prefix = prefix
        self.name = name
        super().__init__(f"{prefix} is a strict prefix of {name}")


class DuplicateName(ValueError):
    pass


def _check_segment(seg: str) -> str:
    if not isinstance(seg, str):
        raise InvalidName(f"name segment must be a string, got {seg!r}")
    if not seg:
        raise InvalidName("name segments must be nonempty")
    for ch in seg:
        if ch in RESERVED_CHARS or ch.isspace() or not ch.isprintable() or ord(ch) > 126:
            raise InvalidName(f"invalid character {ch!r} in name segment {seg!r}")
    return seg


class Name(tuple):
    """An immutable list of nonempty strings.

    Ordering is the tuple ordering, i.e. segment-wise lexicographic, so a
    strict prefix always sorts before the names it prefixes.
    """

    __slots__ = ()

    def __new__(cls, segments: Iterable[str] = ()):
        if isinstance(segments, str):
            raise TypeError("use Name.parse() to build a name from dotted text")
        return super().__new__(cls, tuple(_check_segment(s) for s in segments))

    @classmethod
    def parse(cls, text: str) -> "Name":
        text = text.strip()
        if text in ("", "[]"):
            return cls(())
        return cls(text.split("."))

    def __add__(self, other) -> "Name":  # type: ignore[override]
        return concat(self, as_name(other))

    def __str__(self) -> str:
        return ".".join(self) if self else "[]"

    def __repr__(self) -> str:
        return f"Name({str(self)!r})"

    @property
    def head(self) -> str:
        return self[0]

    @property
    def tail(self) -> "Name":
        return Name(self[1:])

    @property
    def last(self) -> str:
        return self[-1]

    @property
    def parent(self) -> "Name":
        return Name(self[:-1])


NameLike = Union[Name, str, tuple]


def as_name(value: NameLike) -> Name:
    if isinstance(value, Name):
        return value
    if isinstance(value, str):
        return Name.parse(value)
    return Name(value)


def concat(a: Name, b: Name) -> Name:
    return tuple.__new__(Name, tuple(a) + tuple(b))


def is_prefix(p: NameLike, n: NameLike, strict: bool = False) -> bool:
    p, n = as_name(p), as_name(n)
    if len(p) > len(n) or (strict and len(p) == len(n)):
        return False
    return tuple(n[: len(p)]) == tuple(p)


def validate_namespace(names: Iterable[NameLike]) -> "Namespace":
    """Return the namespace for ``names`` or raise :class:`PrefixConflict`."""
    return Namespace(names)


class Namespace:
    """A finite, prefix-free set of names, iterated in sorted order."""

    __slots__ = ("_names", "_set")

    def __init__(self, names: Iterable[NameLike] = ()):
        ordered = sorted({as_name(n) for n in names})
        # In sorted order a strict prefix directly precedes some name it
        # prefixes, so checking neighbours is enough.
        for prev, cur in zip(ordered, ordered[1:]):
            if is_prefix(prev, cur, strict=True):
                raise PrefixConflict(prev, cur)
        self._names = tuple(ordered)
        self._set = frozenset(ordered)

    def __iter__(self) -> Iterator[Name]:
        return iter(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, item) -> bool:
        try:
            return as_name(item) in self._set
        except (TypeError, InvalidName):
            return False

    def __eq__(self, other) -> bool:
        if isinstance(other, Namespace):
            return self._set == other._set
        if isinstance(other, (set, frozenset)):
            return self._set == {as_name(n) for n in other}
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._set)

    def __repr__(self) -> str:
        return "Namespace({" + ", ".join(str(n) for n in self._names) + "})"

    def to_trie(self) -> "TrieNode":
        root = TrieNode()
        for n in self._names:
            root.insert(n)
        return root

    @classmethod
    def from_trie(cls, trie: "TrieNode") -> "Namespace":
        return cls(trie.names())


@dataclass
class TrieNode:
    children: dict = field(default_factory=dict)
    terminal: bool = False

    def insert(self, name: Name) -> None:
        node = self
        for seg in name:
            node = node.children.setdefault(seg, TrieNode())
        node.terminal = True

    def names(self, prefix: Name = Name()) -> Iterator[Name]:
        if self.terminal:
            yield prefix
        for seg in sorted(self.children):
            yield from self.children[seg].names(prefix + (seg,))

    def is_leaf(self) -> bool:
        return not self.children

    def leaves_are_names(self) -> bool:
        """True iff terminal nodes are exactly the leaves (prefix-free)."""
        if self.is_leaf():
            return self.terminal
        return not self.terminal and all(c.leaves_are_names() for c in self.children.values())


class Package(Mapping, Generic[A]):
    """A namespace together with a value for each of its names.

    Construct from a mapping or from ``(name, value)`` pairs; keys may be
    given as dotted strings.  Iteration follows namespace order.
    """

    __slots__ = ("_items", "_namespace")

    def __init__(self, items: Union[Mapping, Iterable] = ()):
        pairs = items.items() if isinstance(items, Mapping) else items
        d: dict = {}
        for key, value in pairs:
            n = as_name(key)
            if n in d:
                raise DuplicateName(f"duplicate name {n}")
            d[n] = value
        self._namespace = Namespace(d)
        self._items = {n: d[n] for n in self._namespace}

    @property
    def namespace(self) -> Namespace:
        return self._namespace

    def __getitem__(self, key):
        return self._items[as_name(key)]

    def __contains__(self, key) -> bool:
        try:
            return as_name(key) in self._items
        except (TypeError, InvalidName):
            return False

    def __iter__(self) -> Iterator[Name]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other) -> bool:
        if isinstance(other, Package):
            return type(self) is type(other) and self._items == other._items
        return NotImplemented

    def __hash__(self) -> int:
        return hash(tuple(self._items.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}: {v!r}" for n, v in self._items.items())
        return f"{type(self).__name__}({{{inner}}})"

    def map(self, fn) -> "Package":
        return Package((n, fn(v)) for n, v in self._items.items())

    def without(self, key: NameLike) -> "Package":
        key = as_name(key)
        return type(self)((n, v) for n, v in self._items.items() if n != key)


def named_sum(outer: Mapping) -> Package:
    """Graft each inner package onto its leaf of ``outer``.

    ``outer`` maps names to packages (or plain namespaces, whose names then
    carry ``None``).  The result is prefix-free whenever ``outer`` is.
    """
    pairs = []
    for n, inner in outer.items():
        n = as_name(n)
        if isinstance(inner, Mapping):
            pairs.extend((concat(n, a), v) for a, v in inner.items())
        else:
            pairs.extend((concat(n, as_name(a)), None) for a in inner)
    result = Package(pairs)
    assert len(result) == len(pairs)
    return result
