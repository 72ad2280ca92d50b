"""Reduced words, balls and grounded chains in the free group F_r.

A word is a tuple of nonzero integers read left to right.  The letter
``i + 1`` is the ``i``-th free generator and ``-(i + 1)`` its inverse, so
``(1, 2, -1)`` is a.b.a^-1.  Geometry is that of the *left* Cayley graph,
in which g is adjacent to s.g for every letter s.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

Word = tuple[int, ...]
E: Word = ()

DEFAULT_CAP = 20_000

# 'e' is reserved for the identity, so it is skipped as a generator name.
_GEN_CHARS = "abcdfghijklmnopqrstuvwxyz"


class CapExceeded(ValueError):
    """Raised when an enumeration would exceed the configured size cap."""


class ChainError(ValueError):
    """Raised on an invalid enlargement of a grounded chain."""


@dataclass(frozen=True)
class Alphabet:
    """The 2r letters of F_r together with a strict total order.

    Parameters
    ----------
    rank : int
        Number of free generators.
    order : sequence of int, optional
        All 2r letters, smallest first.  Defaults to ``a < A < b < B < ...``.
    """

    rank: int
    order: tuple[int, ...] = ()
    _pos: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.rank < 1 or self.rank > len(_GEN_CHARS):
            raise ValueError(f"rank must lie in 1..{len(_GEN_CHARS)}")
        order = tuple(self.order) or tuple(
            x for i in range(1, self.rank + 1) for x in (i, -i)
        )
        expected = {x for i in range(1, self.rank + 1) for x in (i, -i)}
        if len(order) != 2 * self.rank or set(order) != expected:
            raise ValueError("order must list each of the 2r letters exactly once")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "_pos", {x: j for j, x in enumerate(order)})

    @classmethod
    def from_string(cls, rank: int, text: str) -> "Alphabet":
        """Build an alphabet from an order string such as ``"aAbB"``."""
        letters = [letter_from_char(c) for c in text]
        return cls(rank, tuple(letters))

    @property
    def letters(self) -> tuple[int, ...]:
        return self.order

    @property
    def generators(self) -> tuple[int, ...]:
        return tuple(range(1, self.rank + 1))

    def order_string(self) -> str:
        return "".join(letter_to_char(x) for x in self.order)

    def key(self, w: Word) -> tuple:
        """Sort key of the length-lexicographic order."""
        pos = self._pos
        return (len(w), tuple(pos[x] for x in w))

    def less(self, x: int, y: int) -> bool:
        return self._pos[x] < self._pos[y]


def letter_to_char(x: int) -> str:
    c = _GEN_CHARS[abs(x) - 1]
    return c if x > 0 else c.upper()


def letter_from_char(c: str) -> int:
    i = _GEN_CHARS.find(c.lower())
    if i < 0:
        raise ValueError(f"unknown letter {c!r}")
    return i + 1 if c.islower() else -(i + 1)


def to_str(w: Word) -> str:
    """Serialize a word, e.g. ``(1, 2, -1) -> "abA"``; the identity is ``"e"``."""
    return "".join(letter_to_char(x) for x in w) if w else "e"


def from_str(s: str) -> Word:
    """Parse a word string; the result is reduced."""
    s = s.strip()
    if s in ("e", ""):
        return E
    return reduce(letter_from_char(c) for c in s)


def reduce(letters: Iterable[int]) -> Word:
    """Cancel adjacent letter/inverse pairs."""
    out: list[int] = []
    for x in letters:
        if x == 0:
            raise ValueError("0 is not a letter")
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def mul(g: Word, h: Word) -> Word:
    # only the junction can cancel since g and h are reduced
    i = 0
    n = min(len(g), len(h))
    while i < n and g[len(g) - 1 - i] == -h[i]:
        i += 1
    return g[: len(g) - i] + h[i:]


def inv(g: Word) -> Word:
    return tuple(-x for x in reversed(g))


def length(g: Word) -> int:
    return len(g)


def is_reduced(w: Sequence[int]) -> bool:
    return all(w[i + 1] != -w[i] for i in range(len(w) - 1))


def sphere_size(n: int, r: int) -> int:
    if n == 0:
        return 1
    return 2 * r * (2 * r - 1) ** (n - 1)


def ball_size(n: int, r: int) -> int:
    if r == 1:
        return 2 * n + 1
    return 1 + 2 * r * ((2 * r - 1) ** n - 1) // (2 * r - 2)


def _check_cap(size: int, cap: int | None, what: str):
    if cap is not None and size > cap:
        raise CapExceeded(f"{what} has {size} words, above the cap {cap}")


def sphere(n: int, alphabet: Alphabet, cap: int | None = DEFAULT_CAP) -> list[Word]:
    """Words of length exactly ``n`` in length-lexicographic order."""
    _check_cap(sphere_size(n, alphabet.rank), cap, f"S_{n}")
    layer: list[Word] = [E]
    for _ in range(n):
        # appending on the right in letter order keeps lexicographic order
        layer = [w + (x,) for w in layer for x in alphabet.order if not (w and w[-1] == -x)]
    return layer


def ball(n: int, alphabet: Alphabet, cap: int | None = DEFAULT_CAP) -> list[Word]:
    """The ball B_n in length-lexicographic order."""
    _check_cap(ball_size(n, alphabet.rank), cap, f"B_{n}")
    out: list[Word] = [E]
    layer: list[Word] = [E]
    for _ in range(n):
        layer = [w + (x,) for w in layer for x in alphabet.order if not (w and w[-1] == -x)]
        out.extend(layer)
    return out


def index_words(words: Iterable[Word]) -> dict[Word, int]:
    """Intern a word list as ``{word: position}``."""
    return {w: i for i, w in enumerate(words)}


def translate(s: Word | int, F: Iterable[Word]) -> set[Word]:
    """Left translate ``sF``."""
    s = (s,) if isinstance(s, int) else s
    return {mul(s, h) for h in F}


def shifted_intersection(F: Iterable[Word], s: int) -> set[Word]:
    """``F ∩ sF = {h in F : s^-1 h in F}``."""
    F = set(F)
    si = (-s,)
    return {h for h in F if mul(si, h) in F}


def is_grounded(F: Iterable[Word]) -> bool:
    """True if F contains e and is connected in the left Cayley graph."""
    F = set(F)
    if E not in F:
        return False
    # in a tree, F is connected with e iff it is closed under dropping the leftmost letter
    return all(g[1:] in F for g in F if g)


def direction(F: set[Word], g: Word, alphabet: Alphabet) -> int:
    """The unique letter s with g in sF, for g outside F and adjacent to it."""
    if g in F:
        raise ChainError(f"{to_str(g)} is already present")
    found = [s for s in alphabet.order if mul((-s,), g) in F]
    if not found:
        raise ChainError(f"{to_str(g)} is not adjacent to the set")
    if len(found) > 1:  # impossible for a connected F in a tree
        raise ChainError(f"{to_str(g)} is adjacent along several letters")
    return found[0]


@dataclass(frozen=True)
class GroundedChain:
    """An enumeration ``e = g_0, g_1, ...`` whose prefixes are grounded.

    ``directions[i]`` is the letter s with ``g_{i+1} in s F_i``.
    """

    alphabet: Alphabet
    words: tuple[Word, ...] = (E,)
    directions: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.words or self.words[0] != E:
            raise ChainError("a grounded chain starts at e")
        if len(self.directions) != len(self.words) - 1:
            raise ChainError("need one direction per enlargement")

    def __len__(self) -> int:
        return len(self.words)

    def prefix(self, i: int) -> list[Word]:
        """``F_i = {g_0, ..., g_i}``."""
        return list(self.words[: i + 1])

    @property
    def steps(self) -> int:
        return len(self.directions)


def shift_enlargement_holds(F: set[Word], g: Word, s: int, alphabet: Alphabet) -> bool:
    """Check the three cases of the shift-enlargement identities for F' = F + g."""
    Fp = F | {g}
    for t in alphabet.order:
        before = shifted_intersection(F, t)
        after = shifted_intersection(Fp, t)
        if t == s:
            expected = before | {g}
        elif t == -s:
            expected = before | {mul((-s,), g)}
        else:
            expected = before
        if after != expected:
            return False
    return True


def enlarge(chain: GroundedChain, g: Word | str, check: bool = True) -> GroundedChain:
    """Append ``g`` to the chain and record its direction."""
    g = from_str(g) if isinstance(g, str) else g
    F = set(chain.words)
    s = direction(F, g, chain.alphabet)
    if check and not shift_enlargement_holds(F, g, s, chain.alphabet):
        raise ChainError(f"shift-enlargement identities fail at {to_str(g)}")
    return GroundedChain(chain.alphabet, chain.words + (g,), chain.directions + (s,))


def chain_from_words(words: Sequence[Word], alphabet: Alphabet) -> GroundedChain:
    """Build a chain from an explicit enumeration, validating every step."""
    if not words or words[0] != E:
        raise ChainError("a grounded chain starts at e")
    F = {E}
    dirs = []
    for g in words[1:]:
        dirs.append(direction(F, g, alphabet))
        F.add(g)
    return GroundedChain(alphabet, tuple(words), tuple(dirs))


def length_lex_chain(n: int, alphabet: Alphabet, cap: int | None = DEFAULT_CAP) -> GroundedChain:
    """The length-lexicographic enumeration of B_n as a grounded chain."""
    words = ball(n, alphabet, cap)
    # the leftmost letter is always the direction: dropping it gives an earlier word
    return GroundedChain(alphabet, tuple(words), tuple(g[0] for g in words[1:]))


def parent(g: Word) -> Word:
    """Drop the leftmost letter."""
    if not g:
        raise ValueError("e has no parent")
    return g[1:]


def predecessors(g: Word, alphabet: Alphabet) -> list[Word]:
    """P(g): all words strictly before g in the length-lexicographic order."""
    key = alphabet.key(g)
    return [w for w in ball(len(g), alphabet, cap=None) if alphabet.key(w) < key]


def _q_set(g: Word, alphabet: Alphabet) -> set[Word]:
    gi = inv(g)
    return {mul(gi, h) for h in predecessors(g, alphabet)}


def crescent_bruteforce(g: Word, alphabet: Alphabet) -> set[Word]:
    """C(g) = Q(g) minus Q(parent(g)) with Q(g) = g^-1 P(g), by enumeration."""
    if not g:
        raise ValueError("crescent of e is undefined")
    return _q_set(g, alphabet) - _q_set(parent(g), alphabet)


def words_with_prefix(p: Word, total: int, alphabet: Alphabet) -> list[Word]:
    """All reduced words of length ``total`` whose leftmost part is ``p``."""
    if total < len(p):
        return []
    layer = [p]
    for _ in range(total - len(p)):
        layer = [w + (x,) for w in layer for x in alphabet.order if not (w and w[-1] == -x)]
    return layer


def crescent(g: Word | str, alphabet: Alphabet) -> set[Word]:
    """C(g) from the explicit prefix conditions.

    Writing g = s_n ... s_1 (s_n leftmost), every member has g^-1 as its
    leftmost part and length 2n-2, 2n-1 or 2n:

    * length 2n-1: all such words;
    * length 2n: those whose next letter t_n satisfies t_n < s_n;
    * length 2n-2: all such words, but only when n >= 2 and s_{n-1} < s_n^-1.
    """
    g = from_str(g) if isinstance(g, str) else g
    if not g:
        raise ValueError("crescent of e is undefined")
    n = len(g)
    p = inv(g)
    s_n = g[0]
    out = set(words_with_prefix(p, 2 * n - 1, alphabet))
    out.update(w for w in words_with_prefix(p, 2 * n, alphabet) if alphabet.less(w[n], s_n))
    if n >= 2 and alphabet.less(g[1], -s_n):
        out.update(words_with_prefix(p, 2 * n - 2, alphabet))
    return out
