"""Annealed entropy of positive definite functions on F_r.

All values are in log-det units: ``seq1(n) = h_{B_{n+1}}(phi[B_{n+1}])``
and ``seq2(n) = sum_s log det phi[B_n ∪ s B_n] - (2r - 1) log det phi[B_n]``.
Both need the function to radius ``2(n + 1)``; they interleave as
``seq2(n + 1) <= seq1(n) <= seq2(n)`` and decrease to the annealed entropy.
The Seward partial value ``H(B_{N+1}) - (2r - 1) H(B_N)`` (with
``H = log det / 2``) equals their average and is reported without rescaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import lapack

from . import blockmat as bm
from .free_group import (
    DEFAULT_CAP,
    Alphabet,
    GroundedChain,
    Word,
    ball,
    ball_size,
    is_grounded,
    length_lex_chain,
    mul,
    parent,
    shifted_intersection,
    sphere,
)
from .pdf import BlockGram, PdFunction, RadiusError, block_gram, extract_from_gram

NEG_INF = float("-inf")
RATE_TOL = 0.02


def _sum_logdets(plus: Iterable[float], minus: Iterable[float]) -> float:
    """``sum(plus) - sum(minus)`` with any ``-inf`` making the result ``-inf``."""
    plus, minus = list(plus), list(minus)
    if any(v == NEG_INF for v in plus + minus):
        return NEG_INF
    return float(sum(plus) - sum(minus))


def h_F(q: BlockGram, r: int, sing_tol: float = bm.SING_TOL) -> float:
    """``log det q - sum_s log det q[F ∩ sF]`` over the r generators, or ``-inf``."""
    F = list(q.words)
    if not is_grounded(F):
        raise ValueError("h_F needs a grounded set")
    total = bm.chol_logdet(q.matrix, sing_tol=sing_tol)
    if total == NEG_INF:
        return NEG_INF
    subs = []
    for s in range(1, r + 1):
        inter = set(shifted_intersection(F, s))
        subs.append(bm.chol_logdet(q.restrict([w for w in F if w in inter]), sing_tol=sing_tol))
    return _sum_logdets([total], subs)


def _require(phi: PdFunction, radius: int):
    if radius > phi.radius:
        raise RadiusError(f"needs radius {radius}, stored radius is {phi.radius}")


class _BallGram:
    """Log-determinants of word subsets of one Gram matrix over ``B_m``."""

    def __init__(self, phi: PdFunction, m: int, alphabet: Alphabet, cap: int | None, sing_tol: float):
        _require(phi, 2 * m)
        self.words = ball(m, alphabet, cap)
        self.pos = {w: i for i, w in enumerate(self.words)}
        self.G = block_gram(phi, self.words)
        self.k = phi.k
        self.sing_tol = sing_tol
        self._cache: dict[frozenset, float] = {}

    def logdet(self, subset: Iterable[Word]) -> float:
        key = frozenset(subset)
        if key not in self._cache:
            order = sorted(key, key=self.pos.__getitem__)
            self._cache[key] = bm.chol_logdet(self.G.restrict(order), sing_tol=self.sing_tol)
        return self._cache[key]


def _seq_values(bg: _BallGram, n: int, r: int, alphabet: Alphabet) -> tuple[float, float]:
    Bn = ball(n, alphabet, None)
    Bn1 = ball(n + 1, alphabet, None)
    gens = range(1, r + 1)
    s1 = _sum_logdets([bg.logdet(Bn1)], [bg.logdet(shifted_intersection(Bn1, s)) for s in gens])
    unions = [bg.logdet(set(Bn) | {mul((s,), h) for h in Bn}) for s in gens]
    s2 = _sum_logdets(unions, [bg.logdet(Bn)] * (2 * r - 1))
    return s1, s2


def h_ball(phi: PdFunction, n: int, alphabet: Alphabet | None = None, cap: int | None = DEFAULT_CAP) -> float:
    """``h_{B_n}(phi[B_n])``; needs radius ``2n``."""
    alphabet = alphabet or Alphabet(phi.rank)
    _require(phi, 2 * n)
    return h_F(block_gram(phi, ball(n, alphabet, cap)), phi.rank)


def seq1(phi: PdFunction, n: int, alphabet: Alphabet | None = None, cap: int | None = DEFAULT_CAP) -> float:
    """First-formula term at index n, i.e. ``h_{B_{n+1}}(phi[B_{n+1}])``."""
    alphabet = alphabet or Alphabet(phi.rank)
    bg = _BallGram(phi, n + 1, alphabet, cap, bm.SING_TOL)
    return _seq_values(bg, n, phi.rank, alphabet)[0]


def seq2(phi: PdFunction, n: int, alphabet: Alphabet | None = None, cap: int | None = DEFAULT_CAP) -> float:
    """Second-formula term at index n."""
    alphabet = alphabet or Alphabet(phi.rank)
    bg = _BallGram(phi, n + 1, alphabet, cap, bm.SING_TOL)
    return _seq_values(bg, n, phi.rank, alphabet)[1]


def _conditional_entropies(G: np.ndarray, k: int, sing_tol: float) -> np.ndarray:
    """``H(g | P(g))`` for each block of G in order, from one Cholesky factor."""
    d = G.shape[0]
    ref = float(np.real(np.trace(G))) / d
    c, info = lapack.zpotrf(G, lower=1, clean=1)
    ok = d if info == 0 else info - 1
    diag = np.real(np.diag(c))[:ok]
    good = np.flatnonzero(diag**2 < sing_tol * ref)
    if good.size:
        ok = int(good[0])
    logs = np.full(d, NEG_INF)
    logs[:ok] = np.log(diag[:ok])
    # one singular pivot makes every later conditional entropy undefined
    return np.array([logs[i * k : (i + 1) * k].sum() if (i + 1) * k <= ok else NEG_INF for i in range(d // k)])


@dataclass
class SewardResult:
    partials: list[float]
    terms: list[float]
    h0: float


def seward_sum(
    phi: PdFunction,
    N: int,
    chain: GroundedChain | None = None,
    alphabet: Alphabet | None = None,
    cap: int | None = DEFAULT_CAP,
) -> SewardResult:
    """Seward expansion up to index N.

    ``partials[n] = 2 H(B_0) + terms[0] + ... + terms[n]`` with
    ``terms[n] = sum over g in S_{n+1} of H(g | P(g)) - H(parent(g) | P(parent(g)))``.
    Conditional entropies come from one Cholesky factor of ``phi[B_{N+1}]`` in
    length-lexicographic order.
    """
    alphabet = alphabet or (chain.alphabet if chain is not None else Alphabet(phi.rank))
    expected = length_lex_chain(N + 1, alphabet, cap)
    if chain is not None and tuple(chain.words[: len(expected)]) != expected.words:
        raise ValueError("the Seward expansion needs the length-lexicographic chain")
    words = list(expected.words)
    _require(phi, 2 * (N + 1))
    G = block_gram(phi, words).matrix
    H = _conditional_entropies(G, phi.k, bm.SING_TOL)
    pos = {w: i for i, w in enumerate(words)}
    h0 = float(H[0])
    terms, partials = [], []
    acc = 2.0 * h0
    for n in range(N + 1):
        diffs = [(H[pos[g]], H[pos[parent(g)]]) for g in sphere(n + 1, alphabet, None)]
        if any(a == NEG_INF or b == NEG_INF for a, b in diffs):
            t = NEG_INF
        else:
            t = float(sum(a - b for a, b in diffs))
        terms.append(t)
        acc = NEG_INF if (acc == NEG_INF or t == NEG_INF) else acc + t
        partials.append(acc)
    return SewardResult(partials, terms, h0)


@dataclass
class VerblunskySeries:
    partial: float
    terms: list[float]
    offset: float


def _series_from_coeffs(coeffs: Sequence[np.ndarray], k: int, offset: float) -> VerblunskySeries:
    terms = []
    for C in coeffs:
        M = np.eye(k) - C.conj().T @ C
        terms.append(bm.chol_logdet(M, ref=1.0))
    partial = _sum_logdets([offset] + terms, [])
    return VerblunskySeries(partial, terms, offset)


def verblunsky_series(phi: PdFunction, chain: GroundedChain, N: int | None = None) -> VerblunskySeries:
    """``log det phi(e) + sum_{i<N} log det(I - C_i* C_i)`` along the chain.

    For unital phi the offset vanishes and the partial value equals
    ``h_{F_N}(phi[F_N])``.
    """
    N = chain.steps if N is None else N
    words = list(chain.words[: N + 1])
    G = block_gram(phi, words).matrix
    offset = bm.chol_logdet(G[: phi.k, : phi.k])
    seq = extract_from_gram(G, phi.k, chain, N)
    return _series_from_coeffs(seq.coeffs, phi.k, offset)


@dataclass
class EntropyReport:
    """Per-n values of the four formulas and the resulting estimate."""

    n: list[int]
    seq1: list[float]
    seq2: list[float]
    avg: list[float]
    seward_partial: list[float]
    verblunsky_partial: list[float | None]
    radius: int
    tol: float
    value: float
    gap: float
    converged: bool
    bracket: tuple[float, float]
    upper_bound: float
    first_singular_n: int | None = None
    notes: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [
            {
                "n": self.n[i],
                "seq1": self.seq1[i],
                "seq2": self.seq2[i],
                "avg": self.avg[i],
                "seward_partial": self.seward_partial[i],
                "verblunsky_partial": self.verblunsky_partial[i],
            }
            for i in range(len(self.n))
        ]

    @property
    def negative(self) -> bool:
        """Sound witness that the annealed entropy is negative."""
        return any(v < 0 for v in self.seq1)


def feasible_n(phi: PdFunction, max_words: int, alphabet: Alphabet) -> int:
    """Largest n with radius ``2(n+1)`` available and ``|B_{n+1}| <= max_words``."""
    n = -1
    while 2 * (n + 2) <= phi.radius and ball_size(n + 2, alphabet.rank) <= max_words:
        n += 1
    if n < 0:
        raise RadiusError("radius too small for any term (need at least 2)")
    return n


def _avg(a: float, b: float) -> float:
    return NEG_INF if NEG_INF in (a, b) else 0.5 * (a + b)


def h_ann(
    phi: PdFunction,
    n_max: int | None = None,
    alphabet: Alphabet | None = None,
    tol: float = 1e-8,
    max_words: int = 500,
    verblunsky_words: int = 200,
    cap: int | None = DEFAULT_CAP,
) -> EntropyReport:
    """Evaluate all four formulas for ``n = 0..n_max``.

    The value is ``seq1(n_max)``, an upper bound for the limit; the report is
    marked converged when ``|seq1 - seq2| < tol`` at ``n_max``.
    """
    alphabet = alphabet or Alphabet(phi.rank)
    r = phi.rank
    if n_max is None:
        n_max = feasible_n(phi, max_words, alphabet)
    bg = _BallGram(phi, n_max + 1, alphabet, cap, bm.SING_TOL)
    s1, s2 = [], []
    for n in range(n_max + 1):
        a, b = _seq_values(bg, n, r, alphabet)
        s1.append(a)
        s2.append(b)
    sew = seward_sum(phi, n_max, alphabet=alphabet, cap=cap)

    notes = []
    verb: list[float | None] = [None] * (n_max + 1)
    n_verb = max((n for n in range(n_max + 1) if ball_size(n + 1, r) <= verblunsky_words), default=-1)
    if n_verb >= 0:
        chain = length_lex_chain(n_verb + 1, alphabet, cap)
        k = phi.k
        Gfull = bg.G.matrix[: len(chain.words) * k, : len(chain.words) * k]
        try:
            coeffs = extract_from_gram(Gfull, k, chain).coeffs
            offset = bm.chol_logdet(Gfull[:k, :k])
            for n in range(n_verb + 1):
                steps = ball_size(n + 1, r) - 1
                verb[n] = _series_from_coeffs(coeffs[:steps], k, offset).partial
        except bm.SingularError as exc:
            notes.append(f"verblunsky series stopped: {exc}")
            for n in range(n_verb + 1):
                verb[n] = NEG_INF

    avg = [_avg(a, b) for a, b in zip(s1, s2)]
    first_sing = next((n for n in range(n_max + 1) if NEG_INF in (s1[n], s2[n])), None)
    a, b = s1[-1], s2[-1]
    gap = abs(a - b) if NEG_INF not in (a, b) else (0.0 if a == b else math.inf)
    finite = [v for v in s1 + s2 if v != NEG_INF]
    upper = min(finite) if len(finite) == len(s1 + s2) else NEG_INF
    return EntropyReport(
        n=list(range(n_max + 1)),
        seq1=s1,
        seq2=s2,
        avg=avg,
        seward_partial=sew.partials,
        verblunsky_partial=verb,
        radius=2 * (n_max + 1),
        tol=tol,
        value=a,
        gap=gap,
        converged=gap < tol,
        bracket=(min(a, b), max(a, b)),
        upper_bound=upper,
        first_singular_n=first_sing,
        notes=notes,
    )


@dataclass
class MollifiedTrace:
    s: list[float]
    values: list[float]
    increasing: bool
    classification: str


def h_zero_mollified(phi: PdFunction, schedule: Sequence[float], n_max: int | None = None, **kw) -> MollifiedTrace:
    """Annealed entropy of ``(1 - s) tau + s phi`` along a decreasing schedule.

    The trend is classified ``"->0"`` when the values increase towards 0 and
    the finest one is within ``zero_tol`` (default 0.02) of 0, and
    ``"bounded below 0"`` otherwise.
    """
    from .pdf import mollify

    zero_tol = kw.pop("zero_tol", 0.02)
    schedule = list(schedule)
    if any(b >= a for a, b in zip(schedule, schedule[1:])) or schedule[-1] <= 0:
        raise ValueError("schedule must be positive and strictly decreasing")
    values = [h_ann(mollify(phi, s), n_max=n_max, **kw).value for s in schedule]
    increasing = all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    cls = "->0" if increasing and values[-1] > -zero_tol else "bounded below 0"
    return MollifiedTrace(schedule, values, increasing, cls)


def sphere_norm(phi: PdFunction, n: int, alphabet: Alphabet | None = None) -> float:
    """``||phi 1_{S_n}||_2`` (Hilbert-Schmidt norm of each value)."""
    if n == 0:
        return float(np.linalg.norm(phi.value(())))
    kind = phi.kind
    if kind == "regular":
        return 0.0
    if kind == "mollified":
        return phi.params["s"] * sphere_norm(phi.params["base"], n, alphabet)
    if kind == "haagerup":
        # transfer recursion over the leftmost letter of reduced words
        vals = phi.params["values"]
        r = phi.rank
        letters = [x for i in range(1, r + 1) for x in (i, -i)]
        a = {x: abs(vals[abs(x) - 1]) ** 2 for x in letters}
        v = dict(a)
        for _ in range(n - 1):
            tot = sum(v.values())
            v = {y: a[y] * (tot - v[-y]) for y in letters}
        return math.sqrt(sum(v.values()))
    _require(phi, n)
    alphabet = alphabet or Alphabet(phi.rank)
    return math.sqrt(sum(float(np.sum(np.abs(phi.value(g)) ** 2)) for g in sphere(n, alphabet, None)))


@dataclass
class SphereNorms:
    w: list[float]
    W: list[float]
    c: float | None = None


def big_w(w: Sequence[float]) -> list[float]:
    """``W(n) = 1 + 4 sum_{l <= n} (n + 1 - l)^2 w(l)`` for n = 1..len(w)."""
    return [1.0 + 4.0 * sum((n + 1 - l) ** 2 * w[l - 1] for l in range(1, n + 1)) for n in range(1, len(w) + 1)]


def sphere_norms(phi: PdFunction, N: int, c: float | None = None) -> SphereNorms:
    """``w(n) = ||phi 1_{S_{2n-1}}||_2 + ||phi 1_{S_{2n}}||_2`` and W(n) for n = 1..N."""
    if phi.kind == "table":
        _require(phi, 2 * N)
    w = [sphere_norm(phi, 2 * n - 1) + sphere_norm(phi, 2 * n) for n in range(1, N + 1)]
    return SphereNorms(w, big_w(w), c)


@dataclass
class TemperedResult:
    classification: str
    slope: float
    norms: list[float]


def tempered_test(phi: PdFunction, N: int, rate_tol: float = RATE_TOL) -> TemperedResult:
    """Classify by the least-squares growth rate of ``log ||phi 1_{S_n}||_2`` on ``[N/2, N]``."""
    if phi.kind == "table":
        _require(phi, N)
    ns = np.arange(max(1, N // 2), N + 1)
    norms = [sphere_norm(phi, int(n)) for n in ns]
    if any(v == 0.0 for v in norms):
        slope = NEG_INF
    else:
        slope = float(np.polyfit(ns, np.log(norms), 1)[0])
    if slope <= rate_tol:
        cls = "tempered"
    elif slope >= 3 * rate_tol:
        cls = "nontempered"
    else:
        cls = "inconclusive"
    return TemperedResult(cls, slope, norms)


def haagerup_transition(r: int, ts: Sequence[float], N: int = 24, rate_tol: float = RATE_TOL) -> tuple[float, list[str]]:
    """Scan Haagerup parameters and locate where the tempered class ends.

    Returns the midpoint between the largest t classified tempered and the
    next scanned t, together with all classes.
    """
    from .pdf import haagerup

    ts = sorted(ts)
    classes = [tempered_test(haagerup(t, r), N, rate_tol).classification for t in ts]
    last = max((i for i, c in enumerate(classes) if c == "tempered"), default=None)
    if last is None or last == len(ts) - 1:
        raise ValueError("scan does not bracket the transition")
    return 0.5 * (ts[last] + ts[last + 1]), classes


def hann_aux_bound(phi: PdFunction, c: float, N: int) -> float:
    """``max_{n <= N} c w(n)^2 / (8 n W(n)^2)``, a lower bound on ``-h^ann``."""
    if not 0 < c <= 1:
        raise ValueError("c must lie in (0, 1]")
    sn = sphere_norms(phi, N, c)
    return max(c * w**2 / (8 * n * W**2) for n, (w, W) in enumerate(zip(sn.w, sn.W), start=1))


def gronwall_delta(eps: float) -> float:
    q = math.exp(-eps)
    return 1.0 / (1.0 + 4.0 * math.exp(2 * eps) * (1 + q) / (1 - q) ** 3)


@dataclass
class GronwallResult:
    hypothesis: bool
    conclusion: bool | None
    failures: list[int]


def gronwall_check(v: Sequence[float], eps: float, A: float, delta: float | None = None) -> GronwallResult:
    """Check the either/or hypothesis on every n and, if it holds, the bound ``v(n) <= A e^{eps n}``.

    ``V(n) = 1 + 4 sum_{l=1}^{n-1} (n + 1 - l)^2 v(l)`` (the sum stops at n - 1).
    """
    if A < 1 or any(x < 0 for x in v):
        raise ValueError("need A >= 1 and v >= 0")
    delta = gronwall_delta(eps) if delta is None else delta
    bad_hyp, bad_conc = [], []
    for n in range(1, len(v) + 1):
        V = 1.0 + 4.0 * sum((n + 1 - l) ** 2 * v[l - 1] for l in range(1, n))
        bound = A * math.exp(eps * n)
        x = v[n - 1]
        if not (x <= bound or x <= delta * V):
            bad_hyp.append(n)
        if x > bound:
            bad_conc.append(n)
    if bad_hyp:
        return GronwallResult(False, None, bad_hyp)
    return GronwallResult(True, not bad_conc, bad_conc)
