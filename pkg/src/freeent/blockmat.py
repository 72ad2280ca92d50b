"""Log-determinant entropy calculus and block PSD completion.

Entropies here are in the units of a tuple of vectors: a tuple with Gram
matrix Q has entropy ``H = 0.5 * log det Q``.  Singular Gram matrices get
entropy ``-inf``, and ``-inf`` absorbs finite terms in every identity.

Index sets are sequences of integer positions into the Gram matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lapack

SING_TOL = 1e-12
PSD_TOL = 1e-10

NEG_INF = float("-inf")
POS_INF = float("inf")


class NotPsdError(ValueError):
    """Input matrix is not Hermitian positive semidefinite within tolerance."""


class SingularError(ValueError):
    """A block that must be nonsingular is singular within tolerance."""


def _as_complex(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=complex)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {Q.shape}")
    return Q


def check_psd(Q, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Validate Hermitian PSD within tolerance and return the matrix as complex."""
    Q = _as_complex(Q)
    if Q.size == 0:
        return Q
    norm = np.linalg.norm(Q, 2)
    if np.max(np.abs(Q - Q.conj().T)) > psd_tol * (1.0 + norm):
        raise NotPsdError("matrix is not Hermitian")
    lo = np.linalg.eigvalsh(Q)[0]
    if lo < -psd_tol * (1.0 + norm):
        raise NotPsdError(f"smallest eigenvalue {lo:.3e} is negative")
    return Q


def chol_logdet(Q, sing_tol: float = SING_TOL, psd_tol: float = PSD_TOL, ref: float | None = None) -> float:
    """log det Q by pivoted Cholesky, or ``-inf`` if Q is singular.

    Parameters
    ----------
    Q : (d, d) array_like
        Hermitian positive semidefinite matrix.
    sing_tol : float
        A pivot below ``sing_tol * ref`` declares Q singular.
    psd_tol : float
        Tolerance of the PSD check, relative to ``1 + ||Q||``.
    ref : float, optional
        Reference scale for the singularity test.  Defaults to ``trace(Q)/d``.

    Returns
    -------
    float
        ``log det Q`` in natural log, possibly ``-inf``.
    """
    Q = _as_complex(Q)
    d = Q.shape[0]
    if d == 0:
        return 0.0
    if ref is None:
        ref = float(np.real(np.trace(Q))) / d
    if not ref > 0:
        check_psd(Q, psd_tol)
        return NEG_INF
    c, piv, rank, info = lapack.zpstrf(Q, tol=sing_tol * ref, lower=1)
    if info < 0:
        raise ValueError("zpstrf rejected its input")
    # pstrf compares its first pivot (the largest diagonal entry) only against 0
    if rank < d or np.max(np.real(np.diag(Q))) <= sing_tol * ref:
        # the trailing block is not inspected by pstrf; confirm PSD before declaring -inf
        check_psd(Q, psd_tol)
        return NEG_INF
    diag = np.real(np.diag(c))
    if np.any(diag <= 0):
        return NEG_INF
    return float(2.0 * np.sum(np.log(diag)))


def h_gram(Q, **kw) -> float:
    """Entropy ``0.5 * log det Q`` of any tuple with Gram matrix Q."""
    return 0.5 * chol_logdet(Q, **kw)


def sub(Q: np.ndarray, a: Sequence[int], b: Sequence[int] | None = None) -> np.ndarray:
    """The block ``Q[a, b]`` (``Q[a, a]`` if ``b`` is omitted)."""
    a = np.asarray(a, dtype=int)
    b = a if b is None else np.asarray(b, dtype=int)
    return Q[np.ix_(a, b)]


def psd_sqrt(Q) -> np.ndarray:
    """Hermitian square root via eigendecomposition, eigenvalues clamped at 0."""
    Q = _as_complex(Q)
    if Q.size == 0:
        return Q.copy()
    w, V = np.linalg.eigh(0.5 * (Q + Q.conj().T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def psd_inv_sqrt(Q, sing_tol: float = SING_TOL) -> np.ndarray:
    """Inverse Hermitian square root of a nonsingular PSD matrix."""
    Q = _as_complex(Q)
    if Q.size == 0:
        return Q.copy()
    w, V = np.linalg.eigh(0.5 * (Q + Q.conj().T))
    if w[0] <= sing_tol * max(w[-1], 0.0) or w[-1] <= 0:
        raise SingularError("matrix is singular; no inverse square root")
    return (V / np.sqrt(w)) @ V.conj().T


def _solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A^-1 B for Hermitian positive definite A (handles empty blocks)."""
    if A.shape[0] == 0:
        return np.zeros((0, B.shape[1]), dtype=complex)
    try:
        return cho_solve(cho_factor(A, lower=True), B)
    except np.linalg.LinAlgError as exc:
        raise SingularError("block is not positive definite") from exc


def _require_nonsingular(Q: np.ndarray, what: str, sing_tol: float = SING_TOL):
    if Q.shape[0] and chol_logdet(Q, sing_tol=sing_tol) == NEG_INF:
        raise SingularError(f"{what} is singular")


def schur(Q, a: Sequence[int], b: Sequence[int], sing_tol: float = SING_TOL) -> np.ndarray:
    """Schur complement ``Q[a] - Q[a,b] Q[b]^-1 Q[b,a]``."""
    Q = _as_complex(Q)
    if set(a) & set(b):
        raise ValueError("index sets must be disjoint")
    Qa = sub(Q, a)
    if len(b) == 0:
        return Qa
    Qb = sub(Q, b)
    _require_nonsingular(Qb, "conditioning block", sing_tol)
    X = sub(Q, b, a)
    S = Qa - X.conj().T @ _solve(Qb, X)
    return 0.5 * (S + S.conj().T)


def trim(Q, idx: Sequence[int], sing_tol: float = SING_TOL, ref: np.ndarray | None = None) -> list[int]:
    """Keep a maximal subset of ``idx`` whose Gram block is nonsingular.

    Pivoted Cholesky runs on the block rescaled by ``ref`` (default: the
    diagonal of Q) and stops at pivots below ``sing_tol``.  The rank
    decision does not depend on the order of ``idx``; the kept indices are
    returned in their original order and span the same space as ``idx``.
    """
    Q = _as_complex(Q)
    idx = [int(i) for i in idx]
    if not idx:
        return []
    diag_ref = np.real(np.diag(Q)) if ref is None else np.asarray(ref, dtype=float)
    scale = diag_ref[np.asarray(idx)]
    live = [j for j, v in enumerate(scale) if v > 0]
    if not live:
        return []
    sel = np.asarray([idx[j] for j in live])
    w = 1.0 / np.sqrt(scale[live])
    M = sub(Q, sel) * np.outer(w, w)
    if np.max(np.real(np.diag(M))) <= sing_tol:
        return []
    _, piv, rank, info = lapack.zpstrf(M, tol=sing_tol, lower=1)
    if info < 0:
        raise ValueError("zpstrf rejected its input")
    keep = set(int(sel[p - 1]) for p in piv[:rank])
    return [i for i in idx if i in keep]


def cond_h(Q, a: Sequence[int], b: Sequence[int], sing_tol: float = SING_TOL) -> float:
    """Conditional entropy ``H(a | b) = 0.5 * log det schur(Q, a, b)``.

    Dependent indices of ``b`` are trimmed first, which leaves the span
    (and hence the conditional entropy) unchanged.
    """
    Q = _as_complex(Q)
    if len(a) == 0:
        return 0.0
    bt = trim(Q, b, sing_tol)
    S = schur(Q, a, bt, sing_tol)
    ref = float(np.real(np.trace(sub(Q, a)))) / len(a)
    return 0.5 * chol_logdet(S, sing_tol=sing_tol, ref=ref)


def _mi_core(Q: np.ndarray, a: Sequence[int], b: Sequence[int], diag_ref: np.ndarray, sing_tol: float) -> float:
    at = trim(Q, a, sing_tol, diag_ref)
    bt = trim(Q, b, sing_tol, diag_ref)
    if not at or not bt:
        return 0.0
    if len(trim(Q, list(at) + list(bt), sing_tol, diag_ref)) < len(at) + len(bt):
        return POS_INF  # the two spans meet
    C = psd_inv_sqrt(sub(Q, at)) @ sub(Q, at, bt) @ psd_inv_sqrt(sub(Q, bt))
    M = np.eye(len(bt)) - C.conj().T @ C
    val = -0.5 * chol_logdet(M, sing_tol=sing_tol, ref=1.0)
    return max(val, 0.0)


def mutual_info(Q, a: Sequence[int], b: Sequence[int], sing_tol: float = SING_TOL) -> float:
    """Mutual information ``I(a; b) = -0.5 log det(I - C*C)``.

    C is the contraction of the two-block compression onto ``a`` and ``b``
    (after trimming dependent columns, which preserves both spans).  The
    value is ``+inf`` when the spans intersect nontrivially.
    """
    Q = _as_complex(Q)
    return _mi_core(Q, a, b, np.real(np.diag(Q)), sing_tol)


def cond_mutual_info(Q, a: Sequence[int], b: Sequence[int], c: Sequence[int], sing_tol: float = SING_TOL) -> float:
    """``I(a; b | c)``: mutual information after projecting away the span of ``c``."""
    Q = _as_complex(Q)
    ab = list(a) + list(b)
    P = schur(Q, ab, trim(Q, c, sing_tol), sing_tol)
    ref = np.real(np.diag(Q))[np.asarray(ab, dtype=int)]
    na = len(a)
    return _mi_core(P, range(na), range(na, len(ab)), ref, sing_tol)


def is_contraction(C, tol: float = 1e-10) -> bool:
    C = np.asarray(C)
    return C.size == 0 or np.linalg.norm(C, 2) <= 1.0 + tol


def is_strict(C, tol: float = 1e-10) -> bool:
    C = np.asarray(C)
    return C.size == 0 or np.linalg.norm(C, 2) < 1.0 - tol


def two_block_contraction(Q, p: int) -> np.ndarray:
    """The contraction C with ``R = Q11^{1/2} C Q22^{1/2}``, first block of size ``p``."""
    Q = _as_complex(Q)
    Q11, R, Q22 = Q[:p, :p], Q[:p, p:], Q[p:, p:]
    return psd_inv_sqrt(Q11) @ R @ psd_inv_sqrt(Q22)


@dataclass
class PartialPsd3:
    """A 3x3 block matrix with the (1,3) corner erased.

    Blocks have sizes k, l, m along the diagonal.
    """

    Q11: np.ndarray
    Q12: np.ndarray
    Q22: np.ndarray
    Q23: np.ndarray
    Q33: np.ndarray

    def __post_init__(self):
        for name in ("Q11", "Q12", "Q22", "Q23", "Q33"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=complex))
        k, l, m = self.sizes
        if self.Q12.shape != (k, l) or self.Q22.shape != (l, l) or self.Q23.shape != (l, m):
            raise ValueError("inconsistent block shapes")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.Q11.shape[0], self.Q22.shape[0], self.Q33.shape[0]

    def corner12(self) -> np.ndarray:
        return np.block([[self.Q11, self.Q12], [self.Q12.conj().T, self.Q22]])

    def corner23(self) -> np.ndarray:
        return np.block([[self.Q22, self.Q23], [self.Q23.conj().T, self.Q33]])

    def partially_nonsingular(self) -> bool:
        return chol_logdet(self.corner12()) > NEG_INF and chol_logdet(self.corner23()) > NEG_INF

    def schurs(self) -> tuple[np.ndarray, np.ndarray]:
        """``(S11, S33)``: complements of the middle block in each corner."""
        S11 = self.Q11 - self.Q12 @ _solve(self.Q22, self.Q12.conj().T)
        S33 = self.Q33 - self.Q23.conj().T @ _solve(self.Q22, self.Q23)
        return 0.5 * (S11 + S11.conj().T), 0.5 * (S33 + S33.conj().T)

    def central(self) -> np.ndarray:
        """The block ``Q12 Q22^-1 Q23`` of the central completion."""
        return self.Q12 @ _solve(self.Q22, self.Q23)


def _assemble3(P: PartialPsd3, R: np.ndarray) -> np.ndarray:
    return np.block(
        [
            [P.Q11, P.Q12, R],
            [P.Q12.conj().T, P.Q22, P.Q23],
            [R.conj().T, P.Q23.conj().T, P.Q33],
        ]
    )


def three_block_complete(P: PartialPsd3, C) -> np.ndarray:
    """Complete P with ``R = Q12 Q22^-1 Q23 + S11^{1/2} C S33^{1/2}``.

    ``C`` is k x m: rows index the first block and columns the third.
    """
    k, l, m = P.sizes
    C = np.asarray(C, dtype=complex)
    if C.shape != (k, m):
        raise ValueError(f"contraction must have shape {(k, m)}, got {C.shape}")
    if not P.partially_nonsingular():
        raise SingularError("partial matrix is not partially nonsingular")
    S11, S33 = P.schurs()
    R = P.central() + psd_sqrt(S11) @ C @ psd_sqrt(S33)
    return _assemble3(P, R)


def three_block_extract(Q, sizes: tuple[int, int, int]) -> tuple[PartialPsd3, np.ndarray]:
    """Erase the corner block of Q and solve for its contraction."""
    Q = _as_complex(Q)
    k, l, m = sizes
    if k + l + m != Q.shape[0]:
        raise ValueError("sizes do not add up to the matrix dimension")
    i1, i2, i3 = slice(0, k), slice(k, k + l), slice(k + l, k + l + m)
    P = PartialPsd3(Q[i1, i1], Q[i1, i2], Q[i2, i2], Q[i2, i3], Q[i3, i3])
    if not P.partially_nonsingular():
        raise SingularError("corner blocks are singular")
    S11, S33 = P.schurs()
    C = psd_inv_sqrt(S11) @ (Q[i1, i3] - P.central()) @ psd_inv_sqrt(S33)
    return P, C


def random_psd(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """A random complex PSD matrix ``X* X`` with X of shape (rank, d)."""
    rank = d if rank is None else rank
    X = (rng.standard_normal((rank, d)) + 1j * rng.standard_normal((rank, d))) / np.sqrt(2)
    Q = X.conj().T @ X
    return 0.5 * (Q + Q.conj().T)


def matrix_to_json(A) -> dict:
    """Row-major ``[re, im]`` pairs with explicit dimensions."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    return {
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "data": [[[float(z.real), float(z.imag)] for z in row] for row in A],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    data = np.asarray(obj["data"], dtype=float).reshape(obj["rows"], obj["cols"], 2)
    return data[..., 0] + 1j * data[..., 1]
