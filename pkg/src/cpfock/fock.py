"""Truncated full Fock space over n generators.

Words over {1..n} up to a fixed length index the basis (length-major,
lexicographic within a length, empty word first), left creation operators
act by prepending a letter and kill the top level, and level projections /
the symmetric-subspace projector come out as sparse 0-1 (or rational)
matrices.  All identities among these matrices are exact below the top
truncation level; that exactness is what the rest of the toolkit leans on.

Matrices are scipy.sparse CSR: the default dimension cap (20 000) is far
beyond what dense storage supports.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from .errors import DimensionCapError, MalformedInputError
from .linalg import as_matrix

__all__ = [
    "Word",
    "TruncatedFock",
    "CreationFamily",
    "build_fock",
    "level_projection",
    "word_operator",
    "symmetric_projector",
    "analytic_poly_norm",
    "word_pair_operator",
    "NormEstimate",
]

Word = tuple[int, ...]  # letters in 1..n; () is the empty word

DEFAULT_DIM_CAP = 20000


def fock_dimension(n: int, level: int) -> int:
    """1 + n + ... + n^level."""
    return level + 1 if n == 1 else (n ** (level + 1) - 1) // (n - 1)


@dataclass(frozen=True)
class TruncatedFock:
    """Word-indexed model of the Fock space up to word length `level`."""

    n: int
    level: int
    words: tuple[Word, ...]
    index: dict[Word, int] = field(repr=False)
    level_offsets: tuple[int, ...]  # level_offsets[j] = first index of length-j words

    @property
    def dim(self) -> int:
        return len(self.words)

    def word_index(self, word: Word) -> int:
        try:
            return self.index[tuple(word)]
        except KeyError:
            raise MalformedInputError(f"word {word!r} is not in the truncation") from None

    def dim_upto(self, k: int) -> int:
        """Number of words of length <= k."""
        if k >= self.level:
            return self.dim
        return self.level_offsets[k + 1]

    def lengths(self) -> np.ndarray:
        out = np.empty(self.dim, dtype=np.int64)
        for j in range(self.level + 1):
            out[self.level_offsets[j] : self.dim_upto(j)] = j
        return out


@dataclass(frozen=True)
class CreationFamily:
    """Left creation operators S_1..S_n on a truncation.

    S_i e_a = e_(i a) for |a| < level and 0 on the top level, so
    S_i^* S_j = delta_ij P_(<=level-1) holds exactly in integer arithmetic.
    """

    fock: TruncatedFock
    ops: tuple[sp.csr_matrix, ...]

    def __getitem__(self, i: int) -> sp.csr_matrix:
        """1-based access matching word letters."""
        if not 1 <= i <= len(self.ops):
            raise MalformedInputError(f"creation index {i} out of range 1..{len(self.ops)}")
        return self.ops[i - 1]


def build_fock(
    n: int, level: int, max_dim: int = DEFAULT_DIM_CAP
) -> tuple[TruncatedFock, CreationFamily]:
    """Enumerate words and assemble the creation matrices.

    Word order is length-major, lexicographic within a length; the empty
    word has index 0.
    """
    if n < 1 or level < 0:
        raise MalformedInputError("need n >= 1 generators and level >= 0")
    dim = fock_dimension(n, level)
    if dim > max_dim:
        raise DimensionCapError(
            f"fock dimension {dim} exceeds the cap {max_dim} (n={n}, level={level})"
        )
    words: list[Word] = []
    offsets = []
    for j in range(level + 1):
        offsets.append(len(words))
        words.extend(itertools.product(range(1, n + 1), repeat=j))
    fock = TruncatedFock(
        n=n,
        level=level,
        words=tuple(words),
        index={w: i for i, w in enumerate(words)},
        level_offsets=tuple(offsets),
    )
    ops = []
    below = fock.dim_upto(level - 1) if level > 0 else 0
    for i in range(1, n + 1):
        rows = np.empty(below, dtype=np.int64)
        cols = np.arange(below, dtype=np.int64)
        for c in range(below):
            rows[c] = fock.index[(i,) + words[c]]
        data = np.ones(below)
        ops.append(sp.csr_matrix((data, (rows, cols)), shape=(dim, dim)))
    return fock, CreationFamily(fock=fock, ops=tuple(ops))


def level_projection(fock: TruncatedFock, k: int) -> sp.csr_matrix:
    """Orthogonal projection onto span{e_a : |a| <= k} (sparse diagonal)."""
    if not 0 <= k <= fock.level:
        raise MalformedInputError(f"level {k} out of range 0..{fock.level}")
    diag = np.zeros(fock.dim)
    diag[: fock.dim_upto(k)] = 1.0
    return sp.diags(diag, format="csr")


def word_operator(mats, word: Word) -> np.ndarray:
    """Ordered product A_(i1) A_(i2) ... A_(ik); the empty word gives I."""
    mats = [as_matrix(m, square=True) for m in mats]
    d = mats[0].shape[0]
    out = np.eye(d, dtype=np.complex128)
    for letter in word:
        if not 1 <= letter <= len(mats):
            raise MalformedInputError(f"letter {letter} out of range 1..{len(mats)}")
        out = out @ mats[letter - 1]
    return out


def symmetric_projector(fock: TruncatedFock) -> sp.csr_matrix:
    """Projection onto the symmetric subspace (span of letter-multiset sums).

    Words sharing a letter multiset span one symmetrized direction; the
    projector is block diagonal across multiset classes.
    """
    rows, cols, data = [], [], []
    for j in range(fock.level + 1):
        classes: dict[tuple, list[int]] = {}
        for idx in range(fock.level_offsets[j], fock.dim_upto(j)):
            key = tuple(sorted(fock.words[idx]))
            classes.setdefault(key, []).append(idx)
        for members in classes.values():
            w = 1.0 / len(members)
            for a in members:
                for b in members:
                    rows.append(a)
                    cols.append(b)
                    data.append(w)
    return sp.csr_matrix((data, (rows, cols)), shape=(fock.dim, fock.dim))


def symmetric_rank(n: int, level: int) -> int:
    """Number of letter multisets of size <= level over n letters."""
    return sum(math.comb(n + j - 1, j) for j in range(level + 1))


def word_pair_operator(creation: CreationFamily, pairs) -> sp.csr_matrix:
    """sum c_(a,b) S_a S_b^* for a mapping (word_a, word_b) -> coefficient."""
    dim = creation.fock.dim
    out = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for (alpha, beta), c in pairs.items():
        sa = _word_creation(creation, tuple(alpha))
        sb = _word_creation(creation, tuple(beta))
        out = out + c * (sa @ sb.conj().T)
    return out.tocsr()


def _word_creation(creation: CreationFamily, word: Word) -> sp.csr_matrix:
    # S_a = S_(i1) @ S_(i2) @ ... @ S_(ik): accumulate by right-multiplication
    out = sp.identity(creation.fock.dim, format="csr", dtype=np.complex128)
    for letter in word:
        out = out @ creation[letter]
    return out


@dataclass(frozen=True)
class NormEstimate:
    value: float
    converged: bool
    values: tuple[float, ...]  # one entry per compression level tried


def _column_block_norm(m: sp.spmatrix, ncols: int) -> float:
    """Spectral norm of the first ncols columns of a sparse matrix."""
    block = m.tocsc()[:, :ncols]
    if ncols == 0 or block.nnz == 0:
        return 0.0
    if ncols <= 800:
        # small Gram matrix: ||B||^2 = lambda_max(B^* B)
        g = (block.conj().T @ block).toarray()
        w = np.linalg.eigvalsh(0.5 * (g + g.conj().T))
        return float(np.sqrt(max(float(w[-1]), 0.0)))
    return float(svds(block.astype(np.complex128), k=1, return_singular_vectors=False)[0])


def analytic_poly_norm(
    coeffs,
    n: int,
    level_max: int,
    tol: float = 1e-8,
    max_dim: int = DEFAULT_DIM_CAP,
) -> NormEstimate:
    """Monotone lower bounds ||p(S) P_(<=k)|| for an analytic polynomial
    p(S) = sum c_a S_a with finite word support.

    p(S) raises level by at most deg(p), so each compression is computed
    exactly on the truncation; values are nondecreasing in k and converge to
    ||p(S)|| from below.  `converged` reports whether the last two values
    differ by less than tol (a heuristic: no rate is guaranteed).
    """
    coeffs = {tuple(w): complex(c) for w, c in coeffs.items()}
    deg = max((len(w) for w in coeffs), default=0)
    if deg > level_max:
        raise MalformedInputError(
            f"polynomial degree {deg} exceeds the level budget {level_max}"
        )
    fock, creation = build_fock(n, level_max, max_dim=max_dim)
    m = sp.csr_matrix((fock.dim, fock.dim), dtype=np.complex128)
    for w, c in coeffs.items():
        m = m + c * _word_creation(creation, w)
    values = []
    converged = False
    for k in range(0, level_max - deg + 1):
        values.append(_column_block_norm(m, fock.dim_upto(k)))
        if len(values) >= 2 and abs(values[-1] - values[-2]) < tol:
            converged = True
            break
    return NormEstimate(value=values[-1], converged=converged, values=tuple(values))
