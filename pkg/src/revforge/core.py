"""Words, gates and circuits over a finite alphabet.

A gate is a bijection of A^n stored as a permutation table of word indices.
Words are encoded in base |A| with the leftmost symbol most significant, so
lexicographic order on words equals numeric order on indices.  ``compose(f, g)``
maps ``x`` to ``f(g(x))``; circuits list their gates in application order
(first listed is applied first), which is the reverse of function-composition
notation.

All values are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Alphabet",
    "Circuit",
    "Gate",
    "PlacedGate",
    "ResourceCapError",
    "RevforgeError",
    "WirePermutation",
    "circuit_denotation",
    "circuit_dumps",
    "circuit_from_json",
    "circuit_loads",
    "circuit_to_json",
    "compose",
    "controlled",
    "decode_word",
    "encode_word",
    "extend",
    "fredkin_gate",
    "identity_gate",
    "inverse",
    "parallel",
    "parity",
    "rewire",
    "symbol_swap",
    "toffoli_gate",
    "wire_perm",
    "wire_rotation",
    "wire_swap",
    "word_cycle",
    "word_swap",
]

_WORD_CHARS = "0123456789abcdefghijklmnopqrstuvwxyz"


class RevforgeError(Exception):
    """Base class for errors raised by this package."""


class ResourceCapError(RevforgeError):
    """A configured resource cap (degree, depth, memory) was exceeded."""


@dataclass(frozen=True)
class Alphabet:
    """Finite symbol set {0, ..., size-1}."""

    size: int

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size < 1:
            raise ValueError(f"alphabet size must be a positive integer, got {self.size!r}")

    def check_symbol(self, s) -> int:
        s = int(s)
        if not 0 <= s < self.size:
            raise ValueError(f"symbol {s} out of range for alphabet of size {self.size}")
        return s

    def word_str(self, symbols: Sequence[int]) -> str:
        if self.size > len(_WORD_CHARS):
            raise ValueError(f"cannot render words over alphabets larger than {len(_WORD_CHARS)}")
        return "".join(_WORD_CHARS[self.check_symbol(s)] for s in symbols)

    def parse_word(self, text: str) -> tuple[int, ...]:
        out = []
        for ch in text:
            v = _WORD_CHARS.find(ch.lower())
            if v < 0 or v >= self.size:
                raise ValueError(f"bad symbol {ch!r} for alphabet of size {self.size}")
            out.append(v)
        return tuple(out)


def as_alphabet(a) -> Alphabet:
    return a if isinstance(a, Alphabet) else Alphabet(int(a))


def encode_word(symbols: Sequence[int], alphabet) -> int:
    """Base-|A| value of a word, leftmost symbol most significant."""
    alphabet = as_alphabet(alphabet)
    value = 0
    for s in symbols:
        value = value * alphabet.size + alphabet.check_symbol(s)
    return value


def decode_word(index: int, arity: int, alphabet) -> tuple[int, ...]:
    """Inverse of encode_word for words of the given length."""
    alphabet = as_alphabet(alphabet)
    q = alphabet.size
    if not 0 <= index < q**arity:
        raise ValueError(f"index {index} out of range for {arity} symbols over {q}")
    out = [0] * arity
    for i in range(arity - 1, -1, -1):
        index, out[i] = divmod(index, q)
    return tuple(out)


@lru_cache(maxsize=64)
def _digit_matrix(q: int, n: int) -> np.ndarray:
    """(q^n, n) matrix of word digits, row index = word index.  Read-only."""
    N = q**n
    out = np.empty((N, n), dtype=np.int64)
    idx = np.arange(N, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        out[:, i] = idx % q
        idx //= q
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def _place_values(q: int, n: int) -> np.ndarray:
    out = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    out.setflags(write=False)
    return out


class Gate:
    """A bijection of A^n, immutable.

    The table maps each word index to its image; it is validated to be a
    permutation at construction time.
    """

    __slots__ = ("alphabet", "arity", "table")

    def __init__(self, alphabet, arity: int, table):
        alphabet = as_alphabet(alphabet)
        arity = int(arity)
        if arity < 0:
            raise ValueError("arity must be non-negative")
        table = np.array(table, dtype=np.int64)
        N = alphabet.size**arity
        if table.shape != (N,):
            raise ValueError(f"table length {table.shape} does not match |A|^n = {N}")
        if N and (np.bincount(table, minlength=N) != 1).any():
            raise ValueError("table is not a bijection")
        table.setflags(write=False)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "arity", arity)
        object.__setattr__(self, "table", table)

    def __setattr__(self, name, value):
        raise AttributeError("Gate is immutable")

    @property
    def degree(self) -> int:
        return int(self.table.shape[0])

    def __call__(self, word_index: int) -> int:
        return int(self.table[word_index])

    def apply_word(self, symbols: Sequence[int]) -> tuple[int, ...]:
        return decode_word(self(encode_word(symbols, self.alphabet)), self.arity, self.alphabet)

    def is_identity(self) -> bool:
        return bool((self.table == np.arange(self.degree)).all())

    def moved_words(self) -> list[int]:
        return np.nonzero(self.table != np.arange(self.degree))[0].tolist()

    def cycles(self) -> list[tuple[int, ...]]:
        """Disjoint cycles of moved word indices, each starting at its minimum."""
        t = self.table.tolist()
        seen = [False] * len(t)
        out = []
        for i in range(len(t)):
            if seen[i] or t[i] == i:
                continue
            cyc = [i]
            j = t[i]
            while j != i:
                seen[j] = True
                cyc.append(j)
                j = t[j]
            out.append(tuple(cyc))
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Gate)
            and self.alphabet == other.alphabet
            and self.arity == other.arity
            and bool((self.table == other.table).all())
        )

    def __hash__(self) -> int:
        return hash((self.alphabet, self.arity, self.table.tobytes()))

    def __repr__(self) -> str:
        if self.degree <= 64:
            cyc = self.cycles()
            if not cyc:
                body = "id"
            else:
                words = [
                    "(" + " ".join(self.alphabet.word_str(decode_word(w, self.arity, self.alphabet)) for w in c) + ")"
                    for c in cyc
                ]
                body = "".join(words)
            return f"Gate(q={self.alphabet.size}, n={self.arity}, {body})"
        return f"Gate(q={self.alphabet.size}, n={self.arity}, degree={self.degree})"


def identity_gate(alphabet, arity: int) -> Gate:
    alphabet = as_alphabet(alphabet)
    return Gate(alphabet, arity, np.arange(alphabet.size**arity))


def compose(f: Gate, g: Gate) -> Gate:
    """f after g: the gate mapping x to f(g(x))."""
    if f.alphabet != g.alphabet:
        raise ValueError("alphabet mismatch")
    if f.arity != g.arity:
        raise ValueError(f"arity mismatch: {f.arity} vs {g.arity}")
    return Gate(f.alphabet, f.arity, f.table[g.table])


def inverse(f: Gate) -> Gate:
    inv = np.empty_like(f.table)
    inv[f.table] = np.arange(f.degree)
    return Gate(f.alphabet, f.arity, inv)


def parallel(f: Gate, g: Gate) -> Gate:
    """f on the first wires, g on the remaining wires, side by side."""
    if f.alphabet != g.alphabet:
        raise ValueError("alphabet mismatch")
    Qm = g.degree
    table = (f.table[:, None] * Qm + g.table[None, :]).ravel()
    return Gate(f.alphabet, f.arity + g.arity, table)


def parity(f: Gate) -> int:
    """Sign of the word permutation: 0 = even, 1 = odd."""
    t = f.table.tolist()
    seen = [False] * len(t)
    bit = 0
    for i in range(len(t)):
        if seen[i] or t[i] == i:
            continue
        length = 1
        j = t[i]
        while j != i:
            seen[j] = True
            length += 1
            j = t[j]
        bit ^= (length - 1) & 1
    return bit


@dataclass(frozen=True)
class WirePermutation:
    """A permutation of wire positions; mapping[i] is the destination of wire i."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(v) for v in self.mapping)
        object.__setattr__(self, "mapping", m)
        if sorted(m) != list(range(len(m))):
            raise ValueError(f"not a permutation of wire positions: {m}")

    @property
    def arity(self) -> int:
        return len(self.mapping)

    @classmethod
    def identity(cls, n: int) -> "WirePermutation":
        return cls(tuple(range(n)))

    @classmethod
    def swap(cls, n: int, i: int, j: int) -> "WirePermutation":
        m = list(range(n))
        m[i], m[j] = m[j], m[i]
        return cls(tuple(m))

    @classmethod
    def from_cycle(cls, n: int, cycle: Sequence[int]) -> "WirePermutation":
        m = list(range(n))
        cycle = list(cycle)
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            m[a] = b
        return cls(tuple(m))

    def inverse(self) -> "WirePermutation":
        inv = [0] * self.arity
        for i, d in enumerate(self.mapping):
            inv[d] = i
        return WirePermutation(tuple(inv))

    def after(self, other: "WirePermutation") -> "WirePermutation":
        """Functional composition self∘other: wire i goes to self(other(i))."""
        if self.arity != other.arity:
            raise ValueError("arity mismatch")
        return WirePermutation(tuple(self.mapping[other.mapping[i]] for i in range(self.arity)))


def wire_perm(alpha, alphabet) -> Gate:
    """The gate that routes the symbol on wire i to wire alpha(i)."""
    if not isinstance(alpha, WirePermutation):
        alpha = WirePermutation(tuple(alpha))
    alphabet = as_alphabet(alphabet)
    q, n = alphabet.size, alpha.arity
    D = _digit_matrix(q, n)
    inv = alpha.inverse().mapping
    table = D[:, inv] @ _place_values(q, n)
    return Gate(alphabet, n, table)


def rewire(f: Gate, alpha) -> Gate:
    """Conjugate f by a wire permutation: apply f on reordered wires.

    The result g satisfies g(x)[alpha(i)] = f(x[alpha(0)], ..., x[alpha(n-1)])[i],
    i.e. f reads its i-th input from wire alpha(i).
    """
    if not isinstance(alpha, WirePermutation):
        alpha = WirePermutation(tuple(alpha))
    if alpha.arity != f.arity:
        raise ValueError("wire permutation arity does not match gate arity")
    p = wire_perm(alpha, f.alphabet)
    pinv = wire_perm(alpha.inverse(), f.alphabet)
    return Gate(f.alphabet, f.arity, p.table[f.table[pinv.table]])


def extend(f: Gate, width: int, layout: Sequence[int]) -> Gate:
    """Apply f on the wires listed in layout, identity elsewhere.

    layout[i] is the circuit wire carrying f's i-th input.  Equals
    rewire(parallel(f, id), alpha) for any alpha sending wire i to layout[i]
    for i < f.arity.
    """
    layout = tuple(int(w) for w in layout)
    if len(layout) != f.arity:
        raise ValueError("layout length does not match gate arity")
    if len(set(layout)) != len(layout) or any(not 0 <= w < width for w in layout):
        raise ValueError(f"layout {layout} is not injective into {width} wires")
    q = f.alphabet.size
    n, ell = width, f.arity
    D = _digit_matrix(q, n)
    if ell == 0:
        return identity_gate(f.alphabet, n)
    sub = D[:, list(layout)] @ _place_values(q, ell)
    image = f.table[sub]
    Y = D.copy()
    pv = _place_values(q, ell)
    for i in range(ell):
        Y[:, layout[i]] = (image // pv[i]) % q
    return Gate(f.alphabet, n, Y @ _place_values(q, n))


def controlled(word: Sequence[int], p: Gate) -> Gate:
    """The controlled permutation: apply p on the last wires iff the first
    wires read the control word, fix everything otherwise."""
    word = tuple(p.alphabet.check_symbol(s) for s in word)
    k, ell = len(word), p.arity
    q = p.alphabet.size
    table = np.arange(q ** (k + ell), dtype=np.int64)
    block = encode_word(word, p.alphabet) * p.degree
    table[block : block + p.degree] = block + p.table
    return Gate(p.alphabet, k + ell, table)


def word_swap(alphabet, arity: int, u, v) -> Gate:
    """The transposition of two words of A^n."""
    return word_cycle(alphabet, arity, (u, v))


def word_cycle(alphabet, arity: int, words: Iterable) -> Gate:
    """The cyclic permutation sending each listed word to the next."""
    alphabet = as_alphabet(alphabet)
    idxs = []
    for w in words:
        if isinstance(w, str):
            w = alphabet.parse_word(w)
        if isinstance(w, int):
            idx = w
            if not 0 <= idx < alphabet.size**arity:
                raise ValueError(f"word index {idx} out of range")
        else:
            if len(w) != arity:
                raise ValueError(f"word {w} does not have length {arity}")
            idx = encode_word(w, alphabet)
        idxs.append(idx)
    if len(set(idxs)) != len(idxs) or len(idxs) < 2:
        raise ValueError("cycle needs at least two distinct words")
    table = np.arange(alphabet.size**arity, dtype=np.int64)
    for a, b in zip(idxs, idxs[1:] + idxs[:1]):
        table[a] = b
    return Gate(alphabet, arity, table)


def symbol_swap(alphabet, a: int, b: int) -> Gate:
    """The arity-1 gate exchanging two symbols."""
    return word_swap(alphabet, 1, (a,), (b,))


def wire_swap(alphabet) -> Gate:
    """The arity-2 gate (a, b) -> (b, a)."""
    return wire_perm(WirePermutation.swap(2, 0, 1), alphabet)


def wire_rotation(alphabet) -> Gate:
    """The arity-3 gate routing wire 0 -> 1 -> 2 -> 0."""
    return wire_perm(WirePermutation.from_cycle(3, (0, 1, 2)), alphabet)


def fredkin_gate() -> Gate:
    """Binary controlled wire swap: swaps the last two wires when the first reads 1."""
    return controlled((1,), wire_swap(2))


def toffoli_gate() -> Gate:
    """Binary doubly controlled negation."""
    return controlled((1, 1), symbol_swap(2, 0, 1))


@dataclass(frozen=True)
class PlacedGate:
    """A controlled permutation placed on circuit wires.

    layout[i] is the circuit wire of the gate's i-th input; control wires come
    first, then the wires acted on by perm.  control_word may be empty, in
    which case the placement is just perm on layout.
    """

    control_word: tuple[int, ...]
    perm: Gate
    layout: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "control_word", tuple(int(s) for s in self.control_word))
        object.__setattr__(self, "layout", tuple(int(w) for w in self.layout))
        for s in self.control_word:
            self.perm.alphabet.check_symbol(s)
        if len(self.layout) != len(self.control_word) + self.perm.arity:
            raise ValueError("layout must cover control wires and target wires")
        if len(set(self.layout)) != len(self.layout):
            raise ValueError(f"layout {self.layout} has repeated wires")

    @property
    def arity(self) -> int:
        return len(self.layout)

    def base(self) -> Gate:
        return controlled(self.control_word, self.perm)

    def placed_table(self, width: int) -> np.ndarray:
        return extend(self.base(), width, self.layout).table


@dataclass(frozen=True)
class Circuit:
    """An ordered list of placed gates on a fixed number of wires.

    Gates are applied first-listed-first; the denotation is the composition of
    their extensions in that order.
    """

    alphabet: Alphabet
    width: int
    gates: tuple[PlacedGate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alphabet", as_alphabet(self.alphabet))
        object.__setattr__(self, "gates", tuple(self.gates))
        for pg in self.gates:
            if pg.perm.alphabet != self.alphabet:
                raise ValueError("placed gate alphabet differs from circuit alphabet")
            if any(w >= self.width for w in pg.layout):
                raise ValueError(f"layout {pg.layout} does not fit width {self.width}")

    def __len__(self) -> int:
        return len(self.gates)

    def appended(self, *gates: PlacedGate) -> "Circuit":
        return Circuit(self.alphabet, self.width, self.gates + tuple(gates))


def circuit_denotation(c: Circuit) -> Gate:
    """The gate computed by the circuit (first listed gate applied first)."""
    cur = np.arange(c.alphabet.size**c.width, dtype=np.int64)
    for pg in c.gates:
        cur = pg.placed_table(c.width)[cur]
    return Gate(c.alphabet, c.width, cur)


def _canonical_cycles(gate: Gate) -> list[list[str]]:
    alphabet, n = gate.alphabet, gate.arity
    out = []
    for cyc in gate.cycles():
        words = [alphabet.word_str(decode_word(w, n, alphabet)) for w in cyc]
        out.append(words)
    out.sort()
    return out


def _perm_to_json(gate: Gate) -> dict:
    return {"arity": gate.arity, "cycles": _canonical_cycles(gate)}


def _perm_from_json(obj: dict, alphabet: Alphabet) -> Gate:
    arity = int(obj["arity"])
    table = np.arange(alphabet.size**arity, dtype=np.int64)
    touched = set()
    for cyc in obj.get("cycles", []):
        idxs = [encode_word(alphabet.parse_word(w), alphabet) for w in cyc]
        if len(idxs) < 2 or len(set(idxs)) != len(idxs):
            raise ValueError(f"bad cycle {cyc}")
        for w in idxs:
            if w in touched:
                raise ValueError(f"cycles are not disjoint at word {w}")
            touched.add(w)
        for a, b in zip(idxs, idxs[1:] + idxs[:1]):
            table[a] = b
    return Gate(alphabet, arity, table)


def circuit_to_json(c: Circuit) -> dict:
    return {
        "alphabet": c.alphabet.size,
        "width": c.width,
        "gates": [
            {
                "control_word": list(pg.control_word),
                "perm": _perm_to_json(pg.perm),
                "layout": list(pg.layout),
            }
            for pg in c.gates
        ],
    }


def circuit_from_json(obj: dict) -> Circuit:
    alphabet = as_alphabet(obj["alphabet"])
    width = int(obj["width"])
    gates = []
    for g in obj.get("gates", []):
        perm = _perm_from_json(g["perm"], alphabet)
        gates.append(PlacedGate(tuple(g.get("control_word", ())), perm, tuple(g["layout"])))
    return Circuit(alphabet, width, tuple(gates))


def circuit_dumps(c: Circuit, indent: int | None = None) -> str:
    """Canonical JSON text; byte-stable under parse/serialize round trips."""
    return json.dumps(circuit_to_json(c), sort_keys=True, indent=indent, separators=(",", ": ") if indent else (",", ":"))


def circuit_loads(text: str) -> Circuit:
    return circuit_from_json(json.loads(text))
