"""Conservation laws: weight homomorphisms, weight classes, per-class parities.

A weight homomorphism assigns each symbol a vector in Z^d x Z_{k1} x ... x Z_{ke};
a word's weight is the componentwise (modular where applicable) sum of its
letters' weights.  Word length is always an implicit extra coordinate, so weight
classes never mix lengths.  A gate is conservative for a homomorphism when it
maps every weight class into itself; its parity sequence records the sign of
the restriction to each class.
"""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import (
    Alphabet,
    Gate,
    as_alphabet,
    decode_word,
    parallel,
    identity_gate,
    word_swap,
    _digit_matrix,
)

__all__ = [
    "ParitySequence",
    "WeightHom",
    "WeightPartition",
    "applied_parity",
    "builtin_hom",
    "find_nonmember_witness",
    "hom_from_json",
    "hom_to_json",
    "is_conservative",
    "parity_sequence",
    "parity_span",
    "partition_csv",
    "weight_partition",
]


@dataclass(frozen=True)
class WeightHom:
    """Letter-weight assignment into Z^free_dim x Z_{moduli[0]} x ...

    letter_weights[s] is the weight vector of symbol s; modular coordinates are
    stored reduced.
    """

    alphabet: Alphabet
    free_dim: int
    moduli: tuple[int, ...]
    letter_weights: tuple[tuple[int, ...], ...]
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "alphabet", as_alphabet(self.alphabet))
        object.__setattr__(self, "moduli", tuple(int(k) for k in self.moduli))
        if self.free_dim < 0:
            raise ValueError("free_dim must be >= 0")
        if any(k < 2 for k in self.moduli):
            raise ValueError("moduli must all be >= 2")
        dim = self.free_dim + len(self.moduli)
        if len(self.letter_weights) != self.alphabet.size:
            raise ValueError("need one weight vector per symbol")
        rows = []
        for vec in self.letter_weights:
            vec = [int(v) for v in vec]
            if len(vec) != dim:
                raise ValueError(f"weight vector {vec} does not have dimension {dim}")
            for j, k in enumerate(self.moduli):
                vec[self.free_dim + j] %= k
            rows.append(tuple(vec))
        object.__setattr__(self, "letter_weights", tuple(rows))

    @property
    def dim(self) -> int:
        return self.free_dim + len(self.moduli)

    def _reduce(self, vec: Sequence[int]) -> tuple[int, ...]:
        out = [int(v) for v in vec]
        for j, k in enumerate(self.moduli):
            out[self.free_dim + j] %= k
        return tuple(out)

    def add(self, a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
        return self._reduce([x + y for x, y in zip(a, b)])

    def weight_of(self, symbols: Sequence[int]) -> tuple[int, ...]:
        total = [0] * self.dim
        for s in symbols:
            w = self.letter_weights[self.alphabet.check_symbol(s)]
            total = [x + y for x, y in zip(total, w)]
        return self._reduce(total)


def builtin_hom(kind: str, alphabet, *, free_dim: int | None = None, moduli: Sequence[int] = (), letter_weights=None) -> WeightHom:
    """Construct one of the named weight homomorphisms, or a custom one.

    letter_count assigns symbol s the s-th unit vector (the weight of a word is
    its vector of symbol counts); length assigns every symbol weight 1; custom
    takes explicit dimensions and per-symbol vectors.
    """
    alphabet = as_alphabet(alphabet)
    q = alphabet.size
    if kind == "letter_count":
        rows = tuple(tuple(1 if j == s else 0 for j in range(q)) for s in range(q))
        return WeightHom(alphabet, q, (), rows, name="letter_count")
    if kind == "length":
        return WeightHom(alphabet, 1, (), tuple((1,) for _ in range(q)), name="length")
    if kind == "custom":
        if letter_weights is None:
            raise ValueError("custom homomorphism needs letter_weights")
        if free_dim is None:
            free_dim = (len(letter_weights[0]) if letter_weights else 0) - len(moduli)
        return WeightHom(alphabet, int(free_dim), tuple(moduli), tuple(tuple(v) for v in letter_weights))
    raise ValueError(f"unknown homomorphism kind {kind!r}")


def hom_to_json(hom: WeightHom) -> dict:
    return {
        "free_dim": hom.free_dim,
        "moduli": list(hom.moduli),
        "letters": [list(v) for v in hom.letter_weights],
    }


def hom_from_json(obj, alphabet) -> WeightHom:
    """Parse a homomorphism from JSON; the builtin names are accepted as shorthand."""
    if isinstance(obj, str):
        return builtin_hom(obj, alphabet)
    return builtin_hom(
        "custom",
        alphabet,
        free_dim=int(obj["free_dim"]),
        moduli=tuple(obj.get("moduli", ())),
        letter_weights=obj["letters"],
    )


@dataclass(frozen=True)
class WeightPartition:
    """Partition of A^n into weight classes.

    Class ids are assigned by smallest member word index, so the labelling is
    deterministic across runs.  class_of maps word index -> class id.
    """

    hom: WeightHom
    arity: int
    class_of: np.ndarray
    sizes: tuple[int, ...]
    representatives: tuple[int, ...]
    weights: tuple[tuple[int, ...], ...]

    @property
    def n_classes(self) -> int:
        return len(self.sizes)

    def members(self, class_id: int) -> np.ndarray:
        return np.nonzero(self.class_of == class_id)[0]

    def class_of_weight(self, weight: tuple[int, ...]) -> Optional[int]:
        return _weight_lookup(self)[tuple(weight)]

    def nontrivial_classes(self) -> list[int]:
        return [c for c, s in enumerate(self.sizes) if s >= 2]

    def __eq__(self, other):
        return (
            isinstance(other, WeightPartition)
            and self.hom == other.hom
            and self.arity == other.arity
            and bool((self.class_of == other.class_of).all())
        )

    def __hash__(self):
        return hash((self.hom, self.arity, self.class_of.tobytes()))


@lru_cache(maxsize=256)
def _weight_lookup(partition: WeightPartition) -> dict:
    table = {w: c for c, w in enumerate(partition.weights)}
    return _DefaultNone(table)


class _DefaultNone(dict):
    def __missing__(self, key):
        return None


@lru_cache(maxsize=256)
def weight_partition(hom: WeightHom, n: int) -> WeightPartition:
    """Weight classes of A^n under the homomorphism (plus implicit length)."""
    if n < 0:
        raise ValueError("arity must be >= 0")
    q = hom.alphabet.size
    N = q**n
    D = _digit_matrix(q, n)
    L = np.asarray(hom.letter_weights, dtype=np.int64)
    if n == 0:
        W = np.zeros((1, hom.dim), dtype=np.int64)
    else:
        W = L[D].sum(axis=1)
    for j, k in enumerate(hom.moduli):
        W[:, hom.free_dim + j] %= k
    _, first, inverse = np.unique(W, axis=0, return_index=True, return_inverse=True)
    # relabel so class ids follow the smallest member word index
    order = np.argsort(first, kind="stable")
    relabel = np.empty_like(order)
    relabel[order] = np.arange(len(order))
    class_of = relabel[inverse].astype(np.int32)
    class_of.setflags(write=False)
    reps = tuple(int(first[i]) for i in order)
    sizes = tuple(int(s) for s in np.bincount(class_of, minlength=len(reps)))
    weights = tuple(tuple(int(v) for v in W[r]) for r in reps)
    return WeightPartition(hom, n, class_of, sizes, reps, weights)


def is_conservative(f: Gate, hom: WeightHom) -> bool:
    """True iff the gate maps every weight class into itself."""
    if f.alphabet != hom.alphabet:
        raise ValueError("alphabet mismatch")
    part = weight_partition(hom, f.arity)
    return bool((part.class_of[f.table] == part.class_of).all())


@dataclass(frozen=True)
class ParitySequence:
    """Vector over Z_2 indexed by weight-class id."""

    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) & 1 for b in self.bits))

    def __xor__(self, other: "ParitySequence") -> "ParitySequence":
        if len(self.bits) != len(other.bits):
            raise ValueError("length mismatch")
        return ParitySequence(tuple(a ^ b for a, b in zip(self.bits, other.bits)))

    def is_zero(self) -> bool:
        return not any(self.bits)

    def mask(self) -> int:
        m = 0
        for i, b in enumerate(self.bits):
            m |= b << i
        return m

    @classmethod
    def from_mask(cls, mask: int, length: int) -> "ParitySequence":
        return cls(tuple((mask >> i) & 1 for i in range(length)))

    def __len__(self) -> int:
        return len(self.bits)


def _class_parities(table: np.ndarray, class_of: np.ndarray, n_classes: int) -> list[int]:
    t = table.tolist()
    cls = class_of.tolist()
    seen = [False] * len(t)
    bits = [0] * n_classes
    for i in range(len(t)):
        if seen[i] or t[i] == i:
            continue
        length = 1
        j = t[i]
        while j != i:
            seen[j] = True
            length += 1
            j = t[j]
        if (length - 1) & 1:
            bits[cls[i]] ^= 1
    return bits


def parity_sequence(f: Gate, hom: WeightHom) -> ParitySequence:
    """Per-class sign of a conservative gate; raises on non-conservative input."""
    if not is_conservative(f, hom):
        raise ValueError("gate is not conservative for this homomorphism")
    part = weight_partition(hom, f.arity)
    return ParitySequence(tuple(_class_parities(f.table, part.class_of, part.n_classes)))


def applied_parity(f: Gate, hom: WeightHom, n: int) -> ParitySequence:
    """Parity sequence of the width-n application of f (f beside identity wires).

    Computed combinatorially from the parity sequence of f: on the class of
    weight W, the application acts as one copy of f's restriction for every
    identity-wire suffix whose weight completes W, so only suffix classes of
    odd size contribute.  The result does not depend on which wires f is
    applied to, since routing wires permutes each weight class.
    """
    if n < f.arity:
        raise ValueError("target arity smaller than gate arity")
    psi = parity_sequence(f, hom)
    part_f = weight_partition(hom, f.arity)
    part_n = weight_partition(hom, n)
    if n == f.arity:
        return psi
    part_s = weight_partition(hom, n - f.arity)
    bits = [0] * part_n.n_classes
    for z, z_size in enumerate(part_s.sizes):
        if z_size % 2 == 0:
            continue
        wz = part_s.weights[z]
        for y, bit in enumerate(psi.bits):
            if not bit:
                continue
            target = part_n.class_of_weight(hom.add(part_f.weights[y], wz))
            if target is None:
                raise AssertionError("weight bookkeeping out of sync")
            bits[target] ^= 1
    return ParitySequence(tuple(bits))


def _gf2_reduce(vec: int, basis: list[int]) -> int:
    for b in basis:
        vec = min(vec, vec ^ b)
    return vec


def _gf2_basis(masks: Iterable[int]) -> list[int]:
    basis: list[int] = []
    for m in masks:
        m = _gf2_reduce(m, basis)
        if m:
            basis.append(m)
            basis.sort(reverse=True)
    return basis


def parity_span(generators: Sequence[Gate], hom: WeightHom, n: int, *, max_rank: int = 20) -> set[ParitySequence]:
    """Z_2-span of the width-n applied parity sequences of the generators.

    The span of m generators has at most 2^m elements; every element of the
    group they generate at width n realises one of these sequences.
    """
    part_n = weight_partition(hom, n)
    masks = [applied_parity(g, hom, n).mask() for g in generators]
    basis = _gf2_basis(masks)
    if len(basis) > max_rank:
        raise ValueError(f"span rank {len(basis)} exceeds materialisation cap {max_rank}")
    out = {0}
    for b in basis:
        out |= {v ^ b for v in out}
    return {ParitySequence.from_mask(m, part_n.n_classes) for m in out}


def find_nonmember_witness(generators: Sequence[Gate], hom: WeightHom, n: int) -> Optional[Gate]:
    """A conservative width-n gate whose parity sequence escapes the generators' span.

    Searches the single-transposition gates that swap two members of one
    nontrivial weight class: the one for class X has the indicator sequence of
    X, so it is provably outside the group generated by width-n applications of
    the generators whenever that indicator is not in their span.  Returns None
    when every class indicator lies in the span (which does not prove
    generation).
    """
    part = weight_partition(hom, n)
    basis = _gf2_basis(applied_parity(g, hom, n).mask() for g in generators)
    for c in part.nontrivial_classes():
        if _gf2_reduce(1 << c, basis):
            members = part.members(c)
            u, v = int(members[0]), int(members[1])
            return word_swap(hom.alphabet, n, u, v)
    return None


def applied_parity_bruteforce(f: Gate, hom: WeightHom, n: int) -> ParitySequence:
    """Oracle for applied_parity: materialise f beside identity wires."""
    return parity_sequence(parallel(f, identity_gate(f.alphabet, n - f.arity)), hom)


def partition_csv(part: WeightPartition, parities: ParitySequence | None = None) -> str:
    """CSV census of a partition: class id, size, representative word, parity bit."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class_id", "size", "representative", "parity_bit"])
    for c in range(part.n_classes):
        word = part.hom.alphabet.word_str(decode_word(part.representatives[c], part.arity, part.hom.alphabet))
        bit = parities.bits[c] if parities is not None else ""
        writer.writerow([c, part.sizes[c], word, bit])
    return buf.getvalue()
