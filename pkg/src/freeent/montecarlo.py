"""Seeded Monte Carlo over Haar-random unitary representations of F_r.

Every experiment draws its randomness from per-worker streams derived from
``(seed, tag, worker)``.  Workers process contiguous sample ranges and
results are concatenated in worker order, so a fixed seed and worker count
reproduce the output bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats

from . import blockmat as bm
from .free_group import E, Alphabet, GroundedChain, Word, from_str, inv, length_lex_chain, mul, to_str
from .pdf import BlockGram, SingularStepError, extract_from_gram, step_split

CHUNK = 1000


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(stream))))


def _ginibre(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _phase_fixed_qr(Z: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    ph = d / np.where(np.abs(d) == 0, 1.0, np.abs(d))
    return Q * ph[..., None, :]


def haar_unitary(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar unitary (or a batch of ``size``) from QR of a complex Ginibre matrix.

    The phases of R's diagonal are absorbed into Q, which makes the law
    exactly Haar rather than QR-implementation dependent.
    """
    shape = (n, n) if size is None else (size, n, n)
    return _phase_fixed_qr(_ginibre(rng, shape))


def haar_frame(n: int, k: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random orthonormal k-frame in C^n, as an n x k matrix."""
    if k > n:
        raise ValueError("need k <= n")
    shape = (n, k) if size is None else (size, n, k)
    return _phase_fixed_qr(_ginibre(rng, shape))


def sigma_sample(n: int, l: int, k: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """First ``l`` rows of a Haar k-frame in C^n (law sigma_{n,l,k})."""
    if not (1 <= k <= n and 0 <= l <= n):
        raise ValueError("need 1 <= k <= n and 0 <= l <= n")
    return haar_frame(n, k, rng, size)[..., :l, :]


def sigma_k1_density(y2: np.ndarray, n: int, l: int) -> np.ndarray:
    """Density of sigma_{n,l,1} at points with squared norm ``y2`` (needs l < n)."""
    c = math.lgamma(n) - l * math.log(math.pi) - math.lgamma(n - l)
    return np.exp(c + (n - l - 1) * np.log1p(-np.asarray(y2)))


@dataclass
class RandomRep:
    """A unitary representation of F_r given by generator images."""

    n: int
    gens: np.ndarray  # (r, n, n), or (B, r, n, n) for a batch
    seed: int | None = None
    stream: tuple = ()

    @property
    def rank(self) -> int:
        return self.gens.shape[-3]

    def letter(self, x: int) -> np.ndarray:
        U = self.gens[..., abs(x) - 1, :, :]
        return U if x > 0 else np.conj(np.swapaxes(U, -1, -2))

    def orbit(self, V: np.ndarray, words: Sequence[Word]) -> dict[Word, np.ndarray]:
        """``pi(g) V`` for every word, memoized along the parent tree."""
        batch = self.gens.shape[:-3]
        cache: dict[Word, np.ndarray] = {E: np.broadcast_to(V, batch + V.shape)}

        def get(g: Word) -> np.ndarray:
            if g not in cache:
                cache[g] = self.letter(g[0]) @ get(g[1:])
            return cache[g]

        for w in sorted(words, key=len):
            get(w)
        return cache


def random_rep(r: int, n: int, seed: int, *stream: int, size: int | None = None) -> RandomRep:
    rng = make_rng(seed, *stream)
    if size is None:
        gens = haar_unitary(n, rng, r)
    else:
        gens = haar_unitary(n, rng, size * r).reshape(size, r, n, n)
    return RandomRep(n, gens, seed, tuple(stream))


def standard_frame(n: int, k: int) -> np.ndarray:
    return np.eye(n, k, dtype=complex)


def orbit_matrix(rep: RandomRep, V: np.ndarray, F: Sequence[Word]) -> np.ndarray:
    """The columns ``[pi(g) V : g in F]`` side by side."""
    orb = rep.orbit(V, F)
    return np.concatenate([orb[g] for g in F], axis=-1)


def orbit_gram(rep: RandomRep, V: np.ndarray, F: Sequence[Word]) -> BlockGram | np.ndarray:
    """``[V* pi(g^-1 h) V]`` over F; batched reps give an array of Gram matrices."""
    X = orbit_matrix(rep, V, F)
    G = np.conj(np.swapaxes(X, -1, -2)) @ X
    if G.ndim == 2:
        return BlockGram(list(F), V.shape[1], G)
    return G


def empirical_verblunsky(rep: RandomRep, V: np.ndarray, chain: GroundedChain) -> list[np.ndarray]:
    """Verblunsky coefficients of the orbit Gram matrix along the chain."""
    G = orbit_gram(rep, V, list(chain.words))
    return extract_from_gram(G.matrix, V.shape[1], chain).coeffs


@dataclass
class McReport:
    """Rows of per-statistic results plus named verdicts."""

    experiment: str
    params: dict
    rows: list[dict] = field(default_factory=list)
    verdicts: dict[str, bool] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        cols = list(self.rows[0])
        for row in self.rows[1:]:
            cols += [c for c in row if c not in cols]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows:
            w.writerow([fmt(row.get(c, "")) for c in cols])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "summary": {k: fmt(v) if isinstance(v, float) else v for k, v in self.summary.items()},
            "verdicts": self.verdicts,
            "passed": self.passed,
        }


def fmt(x):
    """Round-trip float formatting; ``-inf`` and ``inf`` become strings."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "-inf" if x < 0 else "inf"
        return repr(x)
    return x


def split_samples(total: int, workers: int) -> list[int]:
    base, extra = divmod(total, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def run_workers(fn: Callable[[int, int], object], total: int, workers: int) -> list:
    """Call ``fn(worker, count)`` for each worker; results in worker order."""
    workers = max(1, int(workers))
    counts = split_samples(total, workers)
    if workers == 1:
        return [fn(0, counts[0])]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(workers), counts))


def _chunks(count: int, size: int = CHUNK):
    done = 0
    while done < count:
        m = min(size, count - done)
        yield m
        done += m


def _pearson_max(features: np.ndarray, groups: np.ndarray) -> tuple[float, tuple[int, int]]:
    """Largest |correlation| between columns from different groups."""
    std = features.std(axis=0)
    keep = std > 0
    Z = (features[:, keep] - features[:, keep].mean(axis=0)) / std[keep]
    g = groups[keep]
    R = Z.T @ Z / Z.shape[0]
    mask = g[:, None] != g[None, :]
    if not mask.any():
        return 0.0, (-1, -1)
    A = np.where(mask, np.abs(R), -1.0)
    i, j = np.unravel_index(np.argmax(A), A.shape)
    return float(A[i, j]), (int(i), int(j))


def kn_independence(
    r: int = 2,
    k: int = 1,
    n: int = 64,
    steps: int = 4,
    samples: int = 20_000,
    seed: int = 0,
    workers: int = 1,
    alphabet: Alphabet | None = None,
    alpha: float = 0.01,
    corr_tol: float = 0.05,
) -> McReport:
    """Verblunsky coefficients of random orbit Gram matrices along a length-lex chain.

    Checks the marginal law of each step against sigma with parameters read
    from the chain, the pairwise correlations across steps, and counts
    singular intermediate Gram matrices.
    """
    alphabet = alphabet or Alphabet(r)
    depth = 0
    while len(length_lex_chain(depth, alphabet, None)) <= steps:
        depth += 1
    full = length_lex_chain(depth, alphabet, None)
    chain = GroundedChain(alphabet, full.words[: steps + 1], full.directions[:steps])
    words = list(chain.words)
    if n < k * len(words):
        raise ValueError("need n >= k |F_N| for almost sure nonsingularity")
    V = standard_frame(n, k)

    def work(worker: int, count: int):
        coeffs, singular = [], 0
        for j, m in enumerate(_chunks(count)):
            rep = random_rep(r, n, seed, 1, worker, j, size=m)
            G = orbit_gram(rep, V, words)
            for b in range(m):
                try:
                    cs = extract_from_gram(G[b], k, chain).coeffs
                except SingularStepError:
                    singular += 1
                    continue
                coeffs.append(np.concatenate([c.ravel() for c in cs]))
        return coeffs, singular

    parts = run_workers(work, samples, workers)
    coeffs = np.array([c for p in parts for c in p[0]])
    singular = sum(p[1] for p in parts)

    shapes, params = [], []
    for i in range(steps):
        outer, inner = step_split(words[: i + 1], chain.directions[i])
        shapes.append((k * len(outer), k))
        params.append((n - k * len(inner), k * len(outer)))
    offsets = np.cumsum([0] + [a * b for a, b in shapes])

    rows, feats, groups = [], [], []
    ks_ok = True
    moments_ok = True
    for i, ((rows_i, cols_i), (n_i, l_i)) in enumerate(zip(shapes, params)):
        block = coeffs[:, offsets[i] : offsets[i + 1]]
        hs2 = np.sum(np.abs(block) ** 2, axis=1)
        expected = k * l_i / n_i
        se = hs2.std(ddof=1) / math.sqrt(len(hs2))
        row = {
            "step": i,
            "word": to_str(words[i + 1]),
            "direction": to_str((chain.directions[i],)),
            "n_eff": n_i,
            "ell": l_i,
            "mean_hs2": float(hs2.mean()),
            "expected_hs2": expected,
            "se": float(se),
        }
        moments_ok &= abs(hs2.mean() - expected) <= 4 * se
        if k == 1:
            ks = stats.kstest(hs2, stats.beta(l_i, n_i - l_i).cdf)
            row["ks_stat"] = float(ks.statistic)
            row["ks_p"] = float(ks.pvalue)
            if i == 0:
                ks_ok = ks.pvalue > alpha
        rows.append(row)
        for col in block.T:
            feats += [col.real, col.imag]
            groups += [i, i]
        feats.append(hs2)
        groups.append(i)
    max_corr, _ = _pearson_max(np.array(feats).T, np.array(groups))
    summary = {"samples": samples, "singular": singular, "max_abs_corr": max_corr}
    verdicts = {
        "step0_ks": bool(ks_ok),
        "moments": bool(moments_ok),
        "correlations": bool(max_corr < corr_tol),
        "no_singular": singular == 0,
    }
    rows.append({"step": "summary", "word": "", "max_abs_corr": max_corr, "singular": singular})
    return McReport("kn-independence", dict(r=r, k=k, n=n, steps=steps, samples=samples, seed=seed, workers=workers), rows, verdicts, summary)


def _needs_full_unitaries(F: Sequence[Word]) -> bool:
    letters = [g[0] for g in F if g]
    return any(len(g) > 1 for g in F) or any(-x in letters for x in letters)


def _orbit_batch(r: int, n: int, k: int, F: Sequence[Word], rng: np.random.Generator, m: int) -> np.ndarray:
    """Orbit columns ``[pi(g) V]`` for a batch of m random representations.

    When F only holds e and single letters without inverse pairs, each
    ``pi(s) V`` is the first k columns of an independent Haar unitary, which
    is drawn directly as a Haar frame.
    """
    V = standard_frame(n, k)
    if _needs_full_unitaries(F):
        gens = haar_unitary(n, rng, m * r).reshape(m, r, n, n)
        return orbit_matrix(RandomRep(n, gens), V, F)
    cols = []
    frames = {}
    for g in F:
        if not g:
            cols.append(np.broadcast_to(V, (m, n, k)))
            continue
        x = g[0]
        if x not in frames:
            frames[x] = haar_frame(n, k, rng, m)
        cols.append(frames[x])
    return np.concatenate(cols, axis=-1)


def _wls_slope(x: np.ndarray, y: np.ndarray, var: np.ndarray) -> tuple[float, float]:
    w = 1.0 / var
    X = np.column_stack([np.ones_like(x), x])
    A = X.T @ (X * w[:, None])
    cov = np.linalg.inv(A)
    beta = cov @ (X.T @ (w * y))
    return float(beta[1]), float(math.sqrt(cov[1, 1]))


def disc_probability(n: int, center: complex, eps: float) -> float:
    """P(|C - center| < eps) for C ~ sigma_{n,1,1}, by quadrature in polar form."""
    c = abs(center)
    lo, hi = max(0.0, c - eps), min(1.0, c + eps)

    def arc(rho: float) -> float:
        if c == 0.0 or rho == 0.0:
            return 2 * math.pi if rho < eps - c else 0.0
        x = (rho * rho + c * c - eps * eps) / (2 * rho * c)
        return 2 * math.acos(min(1.0, max(-1.0, x)))

    def f(rho: float) -> float:
        return (n - 1) / math.pi * (1 - rho * rho) ** (n - 2) * arc(rho) * rho

    val, _ = integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=200)
    return val


def _hf_bracket(F: Sequence[Word], q: np.ndarray, eps: float, k: int, r: int, rng: np.random.Generator, trials: int = 2000):
    """Range of h_F over random Toeplitz-consistent points of the closed window."""
    from .entropy import h_F

    F = list(F)
    pairs = {}
    for i, g in enumerate(F):
        for j, h in enumerate(F):
            w = mul(inv(g), h)
            if w and w not in pairs and inv(w) not in pairs:
                pairs[w] = (i, j)
    lo, hi = math.inf, -math.inf
    for t in range(trials + 1):
        Q = q.copy()
        if t:
            for w, (i, j) in pairs.items():
                z = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
                z *= eps * rng.uniform() ** 0.5 / max(np.max(np.abs(z)), 1e-300)
                blk = q[i * k : (i + 1) * k, j * k : (j + 1) * k] + z
                for a, g in enumerate(F):
                    for b, h in enumerate(F):
                        u = mul(inv(g), h)
                        if u == w:
                            Q[a * k : (a + 1) * k, b * k : (b + 1) * k] = blk
                        elif u == inv(w):
                            Q[a * k : (a + 1) * k, b * k : (b + 1) * k] = blk.conj().T
        try:
            v = h_F(BlockGram(F, k, Q), r)
        except bm.NotPsdError:
            continue
        lo, hi = min(lo, v), max(hi, v)
    return lo, hi


def ldp_slope(
    F: Sequence[Word | str] = ("e", "a"),
    q=None,
    eps: float = 0.1,
    n_grid: Sequence[int] = tuple(range(10, 51, 5)),
    samples: int = 1_000_000,
    seed: int = 0,
    workers: int = 1,
    r: int = 2,
    k: int = 1,
    offdiag: complex = 0.3,
    chunk: int = 50_000,
) -> McReport:
    """Regression slope of ``log P(||Q^pi[F] - q||_max < eps)`` against n.

    For ``F = {e, s}`` with k = 1 the probability is also computed by
    quadrature of the sigma_{n,1,1} density, and the bracket of the rate is
    exact: ``[log(1 - (|c| + eps)^2), log(1 - (|c| - eps)^2)]``.
    """
    F = [from_str(g) if isinstance(g, str) else g for g in F]
    if q is None:
        if len(F) != 2:
            raise ValueError("give the target Gram matrix q for |F| != 2")
        q = np.eye(2 * k, dtype=complex)
        q[:k, k:] = offdiag * np.eye(k)
        q[k:, :k] = np.conj(offdiag) * np.eye(k)
    q = np.asarray(q, dtype=complex)
    two_point = len(F) == 2 and k == 1 and F[0] == E and len(F[1]) == 1

    rows, logp, var, exact = [], [], [], []
    for ni, n in enumerate(n_grid):

        def work(worker: int, count: int, n=n, ni=ni):
            hits = 0
            for j, m in enumerate(_chunks(count, chunk)):
                rng = make_rng(seed, 2, ni, worker, j)
                X = _orbit_batch(r, n, k, F, rng, m)
                G = np.conj(np.swapaxes(X, -1, -2)) @ X
                hits += int(np.count_nonzero(np.max(np.abs(G - q), axis=(-1, -2)) < eps))
            return hits

        hits = sum(run_workers(work, samples, workers))
        if hits == 0:
            raise ValueError(f"no hits at n={n}; the target is out of reach with {samples} samples")
        p = hits / samples
        row = {"n": n, "hits": hits, "samples": samples, "p_hat": p, "log_p_hat": math.log(p), "se_log_p": math.sqrt((1 - p) / hits)}
        if two_point:
            pe = disc_probability(n, q[0, 1], eps)
            exact.append(math.log(pe))
            row["p_exact"] = pe
            row["log_p_exact"] = math.log(pe)
        rows.append(row)
        logp.append(math.log(p))
        var.append((1 - p) / hits)

    x = np.asarray(n_grid, dtype=float)
    slope, se = _wls_slope(x, np.array(logp), np.array(var))
    summary = {"slope": slope, "slope_se": se}
    verdicts = {}
    if two_point:
        c = abs(q[0, 1])
        lo = math.log(1 - min(1.0, c + eps) ** 2)
        hi = math.log(1 - max(0.0, c - eps) ** 2)
        oracle, _ = _wls_slope(x, np.array(exact), np.array(var))
        summary.update(bracket_lo=lo, bracket_hi=hi, oracle_slope=oracle)
        verdicts["oracle_3se"] = abs(slope - oracle) <= 3 * se
    else:
        lo, hi = _hf_bracket(F, q, eps, k, r, make_rng(seed, 3))
        summary.update(bracket_lo=lo, bracket_hi=hi)
    verdicts["in_bracket"] = bool(lo <= slope <= hi)
    rows.append({"n": "slope", "log_p_hat": slope, "se_log_p": se})
    params = dict(F=[to_str(g) for g in F], eps=eps, n_grid=list(n_grid), samples=samples, seed=seed, workers=workers, r=r, k=k)
    return McReport("ldp-slope", params, rows, verdicts, summary)


def sigma_check(
    n: int = 16, l: int = 3, k: int = 1, samples: int = 20_000, seed: int = 0, workers: int = 1, alpha: float = 0.01
) -> McReport:
    """Moment, strictness and (for k = 1) Beta-law checks of sigma_{n,l,k}."""

    def work(worker: int, count: int):
        out = []
        for j, m in enumerate(_chunks(count)):
            out.append(sigma_sample(n, l, k, make_rng(seed, 4, worker, j), m))
        return np.concatenate(out) if out else np.zeros((0, l, k), dtype=complex)

    Y = np.concatenate(run_workers(work, samples, workers))
    hs2 = np.sum(np.abs(Y) ** 2, axis=(1, 2))
    expected = k * l / n
    se = hs2.std(ddof=1) / math.sqrt(samples)
    opn = np.linalg.norm(Y, 2, axis=(1, 2)) if l and k else np.zeros(samples)
    strict_frac = float(np.mean(opn < 1 - 1e-10))
    row = {"n": n, "ell": l, "k": k, "mean_hs2": float(hs2.mean()), "expected_hs2": expected, "se": float(se), "strict_fraction": strict_frac}
    verdicts = {"moment": bool(abs(hs2.mean() - expected) <= 4 * se)}
    if n >= k + l:
        verdicts["strict"] = strict_frac == 1.0
    if k == 1 and 0 < l < n:
        ks = stats.kstest(hs2, stats.beta(l, n - l).cdf)
        row.update(ks_stat=float(ks.statistic), ks_p=float(ks.pvalue))
        verdicts["beta_ks"] = bool(ks.pvalue > alpha)
    params = dict(n=n, l=l, k=k, samples=samples, seed=seed, workers=workers)
    return McReport("sigma-check", params, [row], verdicts, {"mean_hs2": float(hs2.mean())})


def trace_check(
    r: int = 2,
    ns: Sequence[int] = (32, 64, 128),
    words: Sequence[Word | str] = ("a",),
    samples: int = 2_000,
    seed: int = 0,
    workers: int = 1,
) -> McReport:
    """Normalized traces of ``pi_n(g)`` for random representations.

    Verdicts: ``|mean| < 4 |g| / n`` for each g != e, ``tr = 1`` exactly at
    g = e, and the variance falls by more than half when n doubles.
    """
    words = [from_str(g) if isinstance(g, str) else g for g in words]
    rows, verdicts = [], {}
    variances: dict[Word, list[tuple[int, float]]] = {g: [] for g in words}
    for ni, n in enumerate(ns):

        def work(worker: int, count: int, n=n, ni=ni):
            vals = []
            for j, m in enumerate(_chunks(count, 200)):
                rep = random_rep(r, n, seed, 5, ni, worker, j, size=m)
                for g in words:
                    P = np.broadcast_to(np.eye(n, dtype=complex), (m, n, n))
                    for x in reversed(g):
                        P = rep.letter(x) @ P
                    vals.append(np.trace(P, axis1=-2, axis2=-1) / n)
            return np.array(vals).reshape(-1, len(words), m) if vals else np.zeros((0, len(words), 0))

        parts = run_workers(work, samples, workers)
        tr = np.concatenate([np.moveaxis(p, 1, 0).reshape(len(words), -1) for p in parts if p.size], axis=1)
        for gi, g in enumerate(words):
            t = tr[gi]
            mean = complex(t.mean())
            v = float(np.mean(np.abs(t - mean) ** 2))
            variances[g].append((n, v))
            se = math.sqrt(v / len(t))
            row = {"n": n, "word": to_str(g), "mean_re": mean.real, "mean_im": mean.imag, "abs_mean": abs(mean), "variance": v, "se": se}
            rows.append(row)
            if g:
                verdicts[f"mean_{to_str(g)}_n{n}"] = bool(abs(mean) < 4 * len(g) / n)
            else:
                verdicts[f"identity_n{n}"] = bool(np.allclose(t, 1.0, atol=1e-12))
    for g, vs in variances.items():
        if not g:
            continue
        vs.sort()
        for (n1, v1), (n2, v2) in zip(vs, vs[1:]):
            if n2 == 2 * n1:
                verdicts[f"variance_{to_str(g)}_{n1}_{n2}"] = bool(v2 < v1 / 2)
    params = dict(r=r, ns=list(ns), words=[to_str(g) for g in words], samples=samples, seed=seed, workers=workers)
    return McReport("trace-check", params, rows, verdicts)


def log_unit_ball_volume(n: int) -> float:
    """log of the volume of the unit ball of C^n, ``pi^n / n!``."""
    return n * math.log(math.pi) - math.lgamma(n + 1)


def types_volume(
    Q=0.64,
    width: float = 0.05,
    n_grid: Sequence[int] = tuple(range(20, 81, 5)),
    samples: int = 20_000,
    seed: int = 0,
    workers: int = 1,
    slope_tol: float = 0.05,
) -> McReport:
    """Normalized volume of ``T(n, O) = {X in C^{n x k} : X* X in O}``.

    O is the max-norm window of total width ``width`` centred at Q.  The
    volume is estimated by importance sampling from the Gaussian with
    covariance ``Q / n`` per row, divided by ``v(n)^k`` with ``v(n)`` the
    unit-ball volume of C^n, and its growth rate in n is compared with
    ``log det Q``.  For k = 1 the exact value ``b^n - a^n`` is reported too.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=complex))
    k = Q.shape[0]
    half = width / 2
    target = float(np.real(bm.chol_logdet(Q)))
    if target == -math.inf:
        raise ValueError("Q must be nonsingular")
    rows, est, var = [], [], []
    for ni, n in enumerate(n_grid):
        Sig = Q / n
        L = np.linalg.cholesky(Sig)
        Sinv = np.linalg.inv(Sig)
        logdet_sig = float(np.real(bm.chol_logdet(Sig)))

        def work(worker: int, count: int, n=n, ni=ni):
            out = []
            for j, m in enumerate(_chunks(count, 5000)):
                rng = make_rng(seed, 6, ni, worker, j)
                Z = _ginibre(rng, (m, n, k))
                X = Z @ L.conj().T
                G = np.conj(np.swapaxes(X, -1, -2)) @ X
                inside = np.max(np.abs(G - Q), axis=(-1, -2)) < half
                quad = np.real(np.trace(Sinv @ G, axis1=-2, axis2=-1))
                logw = n * k * math.log(math.pi) + n * logdet_sig + quad
                out.append(np.where(inside, logw, -np.inf))
            return np.concatenate(out)

        logw = np.concatenate(run_workers(work, samples, workers))
        hits = int(np.isfinite(logw).sum())
        if hits == 0:
            raise ValueError(f"no samples landed in the window at n={n}")
        mx = logw[np.isfinite(logw)].max()
        w = np.exp(logw - mx)
        mean = w.mean()
        log_vol = mx + math.log(mean)
        se_log = float(w.std(ddof=1) / math.sqrt(samples) / mean)
        norm_log = log_vol - k * log_unit_ball_volume(n)
        row = {"n": n, "hits": hits, "log_volume_fraction": norm_log, "se": se_log, "per_n": norm_log / n}
        if k == 1:
            a, b = float(Q[0, 0].real) - half, float(Q[0, 0].real) + half
            row["exact"] = n * math.log(b) + math.log1p(-((max(a, 0.0) / b) ** n))
        rows.append(row)
        est.append(norm_log)
        var.append(max(se_log, 1e-12) ** 2)
    x = np.asarray(n_grid, dtype=float)
    slope, se = _wls_slope(x, np.array(est), np.array(var))
    summary = {"slope": slope, "slope_se": se, "log_det_Q": target}
    if k == 1:
        summary["exact_slope"] = float(np.polyfit(x, [r["exact"] for r in rows], 1)[0])
    rows.append({"n": "slope", "log_volume_fraction": slope, "se": se})
    verdicts = {"slope_near_logdet": bool(abs(slope - target) <= slope_tol)}
    params = dict(Q=bm.matrix_to_json(Q), width=width, n_grid=list(n_grid), samples=samples, seed=seed, workers=workers)
    return McReport("types-volume", params, rows, verdicts, summary)


EXPERIMENTS = {
    "kn-independence": kn_independence,
    "ldp-slope": ldp_slope,
    "sigma-check": sigma_check,
    "trace-check": trace_check,
    "types-volume": types_volume,
}
