"""Matrix-valued positive definite functions on F_r and their Verblunsky codec.

A :class:`PdFunction` maps reduced words of length at most ``radius`` to
k x k complex matrices.  Block Gram matrices ``phi[F] = [phi(g^-1 h)]`` are
assembled over word lists, and the function is encoded along a grounded
chain by one contraction per enlargement step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import blockmat as bm
from .free_group import (
    DEFAULT_CAP,
    E,
    Alphabet,
    GroundedChain,
    Word,
    ball,
    from_str,
    inv,
    mul,
    to_str,
)

KINDS = ("table", "haagerup", "regular", "mollified")


class RadiusError(ValueError):
    """A word longer than the stored radius was requested."""


class SingularStepError(bm.SingularError):
    """An intermediate Gram matrix along a chain is singular."""

    def __init__(self, step: int, msg: str):
        super().__init__(f"step {step}: {msg}")
        self.step = step


@dataclass
class PdFunction:
    """An M_k-valued function on the ball of radius ``radius`` in F_r.

    ``kind`` selects how values are produced:

    * ``"table"``: ``params["table"]`` maps words to k x k arrays; words
      absent from the table are 0;
    * ``"haagerup"``: ``params["values"]`` holds one complex number per
      generator, extended multiplicatively along reduced words;
    * ``"regular"``: identity at e and 0 elsewhere;
    * ``"mollified"``: ``(1 - s) tau + s * params["base"]``.
    """

    rank: int
    k: int
    radius: int | float
    kind: str = "table"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")

    def value(self, g: Word) -> np.ndarray:
        if len(g) > self.radius:
            raise RadiusError(f"word {to_str(g)} is longer than radius {self.radius}")
        kind = self.kind
        if kind == "table":
            v = self.params["table"].get(g)
            return np.zeros((self.k, self.k), dtype=complex) if v is None else v
        if kind == "haagerup":
            vals = self.params["values"]
            z = 1.0 + 0j
            for x in g:
                z *= vals[x - 1] if x > 0 else np.conj(vals[-x - 1])
            return np.array([[z]])
        if kind == "regular":
            return np.eye(self.k, dtype=complex) if not g else np.zeros((self.k, self.k), dtype=complex)
        base: PdFunction = self.params["base"]
        v = base.value(g)
        return v if not g else self.params["s"] * v

    def __call__(self, g: Word | str) -> np.ndarray:
        return self.value(from_str(g) if isinstance(g, str) else g)

    @property
    def unital(self) -> bool:
        return bool(np.allclose(self.value(E), np.eye(self.k), atol=1e-12))

    def alphabet(self) -> Alphabet:
        return Alphabet(self.rank)

    def to_table(self, radius: int | None = None, cap: int | None = DEFAULT_CAP) -> "PdFunction":
        """Materialize the values on a ball as an explicit table."""
        radius = int(self.radius if radius is None else radius)
        words = ball(radius, Alphabet(self.rank), cap)
        return PdFunction(self.rank, self.k, radius, "table", {"table": {w: self.value(w) for w in words}})


def regular_character(r: int, k: int = 1, radius: int | float = float("inf")) -> PdFunction:
    """The regular character tensored with I_k."""
    return PdFunction(r, k, radius, "regular")


def haagerup(values, r: int | None = None, radius: int | float = float("inf")) -> PdFunction:
    """Haagerup function with ``phi(s) = values[s]`` and ``phi(s^-1) = conj(values[s])``.

    A scalar ``values`` with ``r`` given uses the same value on every generator.
    """
    if np.isscalar(values):
        if r is None:
            raise ValueError("rank required for a scalar parameter")
        values = [values] * r
    values = [complex(v) for v in values]
    r = len(values) if r is None else r
    if len(values) != r:
        raise ValueError("need one value per generator")
    if any(abs(v) > 1 + 1e-15 for v in values):
        raise ValueError("Haagerup parameters must lie in the closed unit disk")
    return PdFunction(r, 1, radius, "haagerup", {"values": values})


def mollify(phi: PdFunction, s: float) -> PdFunction:
    """``psi_s = (1 - s) tau + s phi`` for unital phi."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if not phi.unital:
        raise ValueError("mollification needs a unital function")
    return PdFunction(phi.rank, phi.k, phi.radius, "mollified", {"s": float(s), "base": phi})


def diag_join(phi: PdFunction, psi: PdFunction, radius: int | None = None) -> PdFunction:
    """Block-diagonal joining, materialized as a table."""
    if phi.rank != psi.rank:
        raise ValueError("rank mismatch")
    radius = int(min(phi.radius, psi.radius) if radius is None else radius)
    table = {}
    k = phi.k + psi.k
    for w in ball(radius, Alphabet(phi.rank)):
        v = np.zeros((k, k), dtype=complex)
        v[: phi.k, : phi.k] = phi.value(w)
        v[phi.k :, phi.k :] = psi.value(w)
        table[w] = v
    return PdFunction(phi.rank, k, radius, "table", {"table": table})


def congruence(phi: PdFunction, T, radius: int | None = None) -> PdFunction:
    """``g -> T* phi(g) T`` as a table; positive definite whenever phi is."""
    T = np.atleast_2d(np.asarray(T, dtype=complex))
    radius = int(phi.radius if radius is None else radius)
    table = {w: T.conj().T @ phi.value(w) @ T for w in ball(radius, Alphabet(phi.rank))}
    return PdFunction(phi.rank, T.shape[1], radius, "table", {"table": table})


def from_vectors(X: dict[Word, np.ndarray], r: int, radius: int) -> PdFunction:
    """Table function ``phi(g) = V* pi(g) V`` given the orbit ``X[g] = pi(g) V`` on a ball.

    ``X`` must contain every word of length at most ``radius``; the value at
    ``g`` is ``X[e]* X[g]``.
    """
    V = X[E]
    table = {w: V.conj().T @ x for w, x in X.items() if len(w) <= radius}
    k = V.shape[1]
    return PdFunction(r, k, radius, "table", {"table": table})


@dataclass
class BlockGram:
    """The block matrix ``[phi(g^-1 h) : g, h in words]``."""

    words: list[Word]
    k: int
    matrix: np.ndarray

    def indices(self, subset: Sequence[Word]) -> np.ndarray:
        pos = {w: i for i, w in enumerate(self.words)}
        k = self.k
        return np.array([pos[w] * k + j for w in subset for j in range(k)], dtype=int)

    def restrict(self, subset: Sequence[Word]) -> np.ndarray:
        return bm.sub(self.matrix, self.indices(subset))

    def block(self, g: Word, h: Word) -> np.ndarray:
        pos = {w: i for i, w in enumerate(self.words)}
        k = self.k
        i, j = pos[g] * k, pos[h] * k
        return self.matrix[i : i + k, j : j + k]

    def to_json(self) -> dict:
        out = bm.matrix_to_json(self.matrix)
        out["words"] = [to_str(w) for w in self.words]
        out["k"] = self.k
        return out


def required_radius(F: Sequence[Word]) -> int:
    """Largest length of ``g^-1 h`` over pairs from F."""
    F = list(F)
    return max((len(mul(inv(g), h)) for g in F for h in F), default=0)


def block_gram(phi: PdFunction, F: Sequence[Word]) -> BlockGram:
    """Assemble ``phi[F]``; raises :class:`RadiusError` naming the required radius."""
    F = list(F)
    n, k = len(F), phi.k
    need = required_radius(F)
    if need > phi.radius:
        raise RadiusError(f"phi[F] needs radius {need}, stored radius is {phi.radius}")
    M = np.empty((n * k, n * k), dtype=complex)
    cache: dict[Word, np.ndarray] = {}
    invs = [inv(g) for g in F]
    for i in range(n):
        gi = invs[i]
        for j in range(i, n):
            w = mul(gi, F[j])
            v = cache.get(w)
            if v is None:
                v = cache[w] = phi.value(w)
            M[i * k : (i + 1) * k, j * k : (j + 1) * k] = v
            if j != i:
                M[j * k : (j + 1) * k, i * k : (i + 1) * k] = v.conj().T
    return BlockGram(F, k, M)


def is_toeplitz(G: BlockGram, atol: float = 1e-12) -> bool:
    """Blocks agree whenever ``g1^-1 h1 = g2^-1 h2``."""
    seen: dict[Word, np.ndarray] = {}
    k = G.k
    for i, g in enumerate(G.words):
        gi = inv(g)
        for j, h in enumerate(G.words):
            blk = G.matrix[i * k : (i + 1) * k, j * k : (j + 1) * k]
            w = mul(gi, h)
            if w in seen:
                if np.max(np.abs(seen[w] - blk)) > atol:
                    return False
            else:
                seen[w] = blk
    return True


def check_positive(phi: PdFunction, n: int, psd_tol: float = bm.PSD_TOL) -> bool:
    """True iff ``phi[B_n]`` is PSD within tolerance."""
    if 2 * n > phi.radius:
        raise RadiusError(f"check at n={n} needs radius {2 * n}")
    G = block_gram(phi, ball(n, Alphabet(phi.rank)))
    try:
        bm.check_psd(G.matrix, psd_tol)
    except bm.NotPsdError:
        return False
    return True


@dataclass
class VerblunskySeq:
    """Verblunsky coefficients of a function along a grounded chain.

    ``coeffs[i]`` belongs to the enlargement ``F_i -> F_{i+1}`` and has shape
    ``(k * |F_i minus s F_i|, k)``.
    """

    chain: GroundedChain
    coeffs: list[np.ndarray]
    strict: list[bool]

    def __len__(self) -> int:
        return len(self.coeffs)

    def to_json(self) -> dict:
        return {
            "alphabet": self.chain.alphabet.order_string(),
            "words": [to_str(w) for w in self.chain.words[: len(self.coeffs) + 1]],
            "coeffs": [bm.matrix_to_json(C) for C in self.coeffs],
            "strict": list(self.strict),
        }


def step_split(words: Sequence[Word], s: int) -> tuple[list[int], list[int]]:
    """Positions of ``F minus sF`` and ``F ∩ sF`` inside the word list F."""
    pos = {w: i for i, w in enumerate(words)}
    si = (-s,)
    outer, inner = [], []
    for i, h in enumerate(words):
        (inner if mul(si, h) in pos else outer).append(i)
    return outer, inner


def _expand(pos: Sequence[int], k: int) -> np.ndarray:
    return np.array([p * k + j for p in pos for j in range(k)], dtype=int)


def verblunsky_extract(phi: PdFunction, chain: GroundedChain, steps: int | None = None) -> VerblunskySeq:
    """Coefficients of phi along the first ``steps`` enlargements of the chain."""
    steps = chain.steps if steps is None else steps
    words = list(chain.words[: steps + 1])
    G = block_gram(phi, words).matrix
    return _extract_from_gram(G, phi.k, chain, steps)


def _extract_from_gram(G: np.ndarray, k: int, chain: GroundedChain, steps: int) -> VerblunskySeq:
    coeffs, strict = [], []
    words = chain.words
    for i in range(steps):
        outer, inner = step_split(words[: i + 1], chain.directions[i])
        idx = np.concatenate([_expand(outer, k), _expand(inner, k), _expand([i + 1], k)])
        sizes = (k * len(outer), k * len(inner), k)
        try:
            _, C = bm.three_block_extract(bm.sub(G, idx), sizes)
        except bm.SingularError as exc:
            raise SingularStepError(i, f"singular intermediate Gram matrix ({exc})") from exc
        coeffs.append(C)
        strict.append(bm.is_strict(C))
    return VerblunskySeq(chain, coeffs, strict)


def extract_from_gram(G: np.ndarray, k: int, chain: GroundedChain, steps: int | None = None) -> VerblunskySeq:
    """Coefficients from a precomputed Gram matrix indexed by ``chain.words``."""
    steps = chain.steps if steps is None else steps
    return _extract_from_gram(np.asarray(G, dtype=complex), k, chain, steps)


def reconstruct_gram(seq: VerblunskySeq, k: int, strict: bool = True) -> BlockGram:
    """Rebuild the unital block Gram matrix over the chain's final set."""
    chain = seq.chain
    words = list(chain.words[: len(seq.coeffs) + 1])
    n = len(words)
    G = np.zeros((n * k, n * k), dtype=complex)
    G[:k, :k] = np.eye(k)
    pos = {w: i for i, w in enumerate(words)}
    for i, C in enumerate(seq.coeffs):
        C = np.asarray(C, dtype=complex)
        if strict and not bm.is_strict(C):
            raise SingularStepError(i, "coefficient is not a strict contraction")
        s = chain.directions[i]
        g = words[i + 1]
        outer, inner = step_split(words[: i + 1], s)
        io, ii = _expand(outer, k), _expand(inner, k)
        # Toeplitz symmetry fixes the (F ∩ sF, g) blocks from translates inside F
        sg = pos[mul((-s,), g)]
        Q23 = np.zeros((len(ii), k), dtype=complex)
        for a, h in enumerate(inner):
            sh = pos[mul((-s,), words[h])]
            Q23[a * k : (a + 1) * k] = G[sh * k : (sh + 1) * k, sg * k : (sg + 1) * k]
        P = bm.PartialPsd3(bm.sub(G, io), bm.sub(G, io, ii), bm.sub(G, ii), Q23, np.eye(k))
        full = bm.three_block_complete(P, C)
        no, ni = len(io), len(ii)
        R = full[:no, no + ni :]
        gi = _expand([i + 1], k)
        G[np.ix_(io, gi)] = R
        G[np.ix_(gi, io)] = R.conj().T
        G[np.ix_(ii, gi)] = Q23
        G[np.ix_(gi, ii)] = Q23.conj().T
        G[np.ix_(gi, gi)] = np.eye(k)
    return BlockGram(words, k, G)


def gram_values(G: BlockGram) -> dict[Word, np.ndarray]:
    """The function values ``phi(g^-1 h)`` read off a block Gram matrix."""
    k = G.k
    out: dict[Word, np.ndarray] = {}
    for i, g in enumerate(G.words):
        gi = inv(g)
        for j, h in enumerate(G.words):
            w = mul(gi, h)
            if w not in out:
                out[w] = G.matrix[i * k : (i + 1) * k, j * k : (j + 1) * k].copy()
    return out


def covered_radius(words: set[Word], r: int) -> int:
    """Largest m with B_m inside ``words``."""
    alphabet = Alphabet(r)
    m = 0
    while all(w in words for w in ball(m + 1, alphabet, cap=None)):
        m += 1
        if m > max((len(w) for w in words), default=0):
            break
    return m


def verblunsky_reconstruct(seq: VerblunskySeq, k: int, strict: bool = True) -> PdFunction:
    """Rebuild the values of phi on ``{g^-1 h : g, h in F_N}`` as a table."""
    G = reconstruct_gram(seq, k, strict)
    values = gram_values(G)
    r = seq.chain.alphabet.rank
    return PdFunction(r, k, covered_radius(set(values), r), "table", {"table": values})


def to_json(phi: PdFunction) -> dict:
    """Serialize a function; lazy kinds keep their parameters."""
    radius = phi.radius if np.isfinite(phi.radius) else None
    out = {"rank": phi.rank, "k": phi.k, "radius": radius, "kind": phi.kind}
    if phi.kind == "table":
        out["payload"] = {"values": {to_str(w): bm.matrix_to_json(v) for w, v in phi.params["table"].items()}}
    elif phi.kind == "haagerup":
        out["payload"] = {"values": [[v.real, v.imag] for v in phi.params["values"]]}
    elif phi.kind == "regular":
        out["payload"] = {}
    else:
        out["payload"] = {"s": phi.params["s"], "base": to_json(phi.params["base"])}
    return out


def from_json(obj: dict) -> PdFunction:
    rank, k, kind = int(obj["rank"]), int(obj.get("k", 1)), obj["kind"]
    radius = obj.get("radius")
    radius = float("inf") if radius is None else int(radius)
    payload = obj.get("payload", {})
    if kind == "table":
        table = {from_str(w): bm.matrix_from_json(v) for w, v in payload["values"].items()}
        return PdFunction(rank, k, radius, "table", {"table": table})
    if kind == "haagerup":
        vals = [complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in payload["values"]]
        return haagerup(vals, rank, radius)
    if kind == "regular":
        return regular_character(rank, k, radius)
    if kind == "mollified":
        return mollify(from_json(payload["base"]), float(payload["s"]))
    raise ValueError(f"unknown kind {kind!r}")
