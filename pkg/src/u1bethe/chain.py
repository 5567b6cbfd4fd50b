"""Finite-chain objects: Lax operators, monodromy blocks, transfer matrix.

The quantum space is (C^N)^(x L) with site 1 slowest in the basis index,
so index = sum_i d_i N^(L-i) with local digit d = (state - 1).  Monodromy
products are ordered right-to-left with site 1 rightmost, i.e. the site-1
Lax factor acts first.  The total-spin digit sum n labels the sectors:
S^z eigenvalue = L s - n with s = (N - 1)/2.
"""

import numpy as np

from .errors import DimensionTooLarge, EmptySector
from .weights import eval_r

__all__ = [
    "DENSE_LIMIT", "ChainContext", "ChainOperator", "StateVector",
    "lax", "monodromy_element", "transfer_matrix", "reference_state",
    "vacuum_weight", "spin_z_total", "sector_of_index", "sector_indices",
]

DENSE_LIMIT = 4096  # largest N^L held as dense complex matrices


class ChainContext:
    """Model + chain length + inhomogeneities; immutable once built."""

    def __init__(self, model, L, inhomogeneities=None):
        if L < 1:
            raise ValueError(f"chain length must be >= 1, got {L}")
        self.model = model
        self.L = int(L)
        if inhomogeneities is None:
            inhomogeneities = (model.regular_point,) * L
        inhomogeneities = tuple(complex(m) for m in inhomogeneities)
        if len(inhomogeneities) != L:
            raise ValueError(
                f"need {L} inhomogeneities, got {len(inhomogeneities)}")
        self.inhomogeneities = inhomogeneities
        self.N = model.N
        self.dim = model.N ** L
        self._mono_cache = {}

    def __repr__(self):
        return (f"ChainContext({self.model.name}, N={self.N}, L={self.L}, "
                f"mu={self.inhomogeneities})")


class ChainOperator:
    """Linear operator on the chain space, dense or matrix-free."""

    def __init__(self, N, L, sector_shift, matrix=None, apply_fn=None):
        self.N = N
        self.L = L
        self.dim = N ** L
        self.sector_shift = sector_shift
        self.matrix = matrix
        self._apply_fn = apply_fn

    def apply(self, vec):
        vec = np.asarray(vec, dtype=complex)
        if self.matrix is not None:
            return self.matrix @ vec
        return self._apply_fn(vec)

    def to_matrix(self):
        if self.matrix is not None:
            return self.matrix
        if self.dim > DENSE_LIMIT:
            raise DimensionTooLarge(
                f"dense form of a dim-{self.dim} operator was requested")
        cols = [self.apply(col) for col in np.eye(self.dim, dtype=complex).T]
        return np.array(cols).T


class StateVector:
    """Vector on the chain space with lazy S^z-sector bookkeeping."""

    def __init__(self, N, L, amplitudes):
        self.N = N
        self.L = L
        self.amplitudes = np.asarray(amplitudes, dtype=complex)
        if self.amplitudes.shape != (N ** L,):
            raise ValueError("amplitude array has the wrong length")

    @property
    def sector(self):
        """Particle number n if supported in one sector, else None."""
        support = np.nonzero(self.amplitudes)[0]
        if len(support) == 0:
            return None
        sectors = {sector_of_index(int(i), self.N, self.L) for i in support}
        if len(sectors) == 1:
            return sectors.pop()
        return None

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def __add__(self, other):
        return StateVector(self.N, self.L, self.amplitudes + other.amplitudes)

    def __sub__(self, other):
        return StateVector(self.N, self.L, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar):
        return StateVector(self.N, self.L, self.amplitudes * scalar)

    __rmul__ = __mul__


def sector_of_index(idx, N, L):
    """Digit sum of `idx` in base N: the particle number of a basis state."""
    n = 0
    for _ in range(L):
        n += idx % N
        idx //= N
    return n


def sector_indices(N, L, n):
    """Basis indices spanning the n-particle sector."""
    sums = np.zeros(N ** L, dtype=int)
    stride = 1
    for _ in range(L):
        digits = (np.arange(N ** L) // stride) % N
        sums += digits
        stride *= N
    return np.nonzero(sums == n)[0]


def lax(model, lam, mu_i):
    """Dense Lax operator on C^N (x) C^N; auxiliary space first."""
    return eval_r(model, lam, mu_i).dense()


def _site_blocks(model, lam, mu_i):
    """R(lam, mu_i) arranged as site operators: blocks[c, e][i, j] = R_{c+1,i+1}^{e+1,j+1}."""
    N = model.N
    return eval_r(model, lam, mu_i).dense().reshape(N, N, N, N).transpose(0, 2, 1, 3)


def _apply_site_left(op, k, L, N, mat):
    """(I x op_k x I) @ mat for a dense mat on the chain space."""
    pre = N ** (k - 1)
    rest = mat.size // (pre * N)
    m3 = mat.reshape(pre, N, rest)
    return np.einsum("ij,pjr->pir", op, m3).reshape(mat.shape)


def _monodromy_column(ctx, lam, b):
    """Dense column strip [T_{1,b}, ..., T_{N,b}] of the monodromy matrix."""
    key = (lam, b)
    got = ctx._mono_cache.get(key)
    if got is not None:
        return got
    N, L, dim = ctx.N, ctx.L, ctx.dim
    if dim > DENSE_LIMIT:
        raise DimensionTooLarge(
            f"dim {dim} exceeds the dense limit {DENSE_LIMIT}")
    blocks = _site_blocks(ctx.model, lam, ctx.inhomogeneities[0])
    strip = [None] * N
    post_eye = np.eye(N ** (L - 1), dtype=complex)
    for c in range(N):
        blk = blocks[c, b - 1]
        # site 1 is the slowest axis, i.e. the leftmost kron factor
        strip[c] = np.kron(blk, post_eye) if L > 1 else blk.astype(complex)
    for k in range(2, L + 1):
        blocks = _site_blocks(ctx.model, lam, ctx.inhomogeneities[k - 1])
        new = [None] * N
        for c in range(N):
            acc = np.zeros((dim, dim), dtype=complex)
            for e in range(N):
                acc += _apply_site_left(blocks[c, e], k, L, N, strip[e])
            new[c] = acc
        strip = new
    strip = np.array(strip)
    if len(ctx._mono_cache) >= 1024:
        ctx._mono_cache.clear()  # pure rebuilds; bound the dense footprint
    ctx._mono_cache[key] = strip
    return strip


def monodromy_element(ctx, lam, a, b):
    """The (a, b) auxiliary block of the monodromy matrix at `lam`.

    Below the dense limit the element is materialized (and cached per
    column strip); above it a matrix-free applier contracts the Lax chain
    site by site.
    """
    N = ctx.N
    if not (1 <= a <= N and 1 <= b <= N):
        raise IndexError(f"auxiliary indices ({a},{b}) outside 1..{N}")
    if ctx.dim <= DENSE_LIMIT:
        strip = _monodromy_column(ctx, lam, b)
        return ChainOperator(N, ctx.L, b - a, matrix=strip[a - 1])

    def _apply(vec):
        return _apply_monodromy_free(ctx, lam, a, b, vec)

    return ChainOperator(N, ctx.L, b - a, apply_fn=_apply)


def _apply_monodromy_free(ctx, lam, a, b, vec):
    N, L = ctx.N, ctx.L
    cur = np.zeros((N,) + (N,) * L, dtype=complex)
    cur[b - 1] = np.asarray(vec, dtype=complex).reshape((N,) * L)
    for k in range(1, L + 1):
        blocks = _site_blocks(ctx.model, lam, ctx.inhomogeneities[k - 1])
        moved = np.moveaxis(cur, k, 1)
        new = np.einsum("baij,aj...->bi...", blocks, moved)
        cur = np.moveaxis(new, 1, k)
    return cur[a - 1].reshape(-1)


def transfer_matrix(ctx, lam):
    """T(lam) = sum_a T_{a,a}(lam); commutes with itself at other lam."""
    N = ctx.N
    if ctx.dim <= DENSE_LIMIT:
        total = np.zeros((ctx.dim, ctx.dim), dtype=complex)
        for a in range(1, N + 1):
            total += _monodromy_column(ctx, lam, a)[a - 1]
        return ChainOperator(N, ctx.L, 0, matrix=total)

    def _apply(vec):
        out = np.zeros(ctx.dim, dtype=complex)
        for a in range(1, N + 1):
            out += _apply_monodromy_free(ctx, lam, a, a, vec)
        return out

    return ChainOperator(N, ctx.L, 0, apply_fn=_apply)


def reference_state(N, L):
    """Ferromagnetic product state: every site in local state 1."""
    amps = np.zeros(N ** L, dtype=complex)
    amps[0] = 1.0
    return StateVector(N, L, amps)


def vacuum_weight(ctx, lam, a):
    """w_a(lam): the diagonal monodromy eigenvalue on the reference state."""
    if not 1 <= a <= ctx.N:
        raise IndexError(f"index {a} outside 1..{ctx.N}")
    out = 1.0 + 0.0j
    for mu in ctx.inhomogeneities:
        out *= eval_r(ctx.model, lam, mu).entry(a, 1, a, 1)
    return out


def spin_z_total(N, L):
    """Sum of local S^z = diag(s, s-1, ..., -s) over all sites."""
    s = (N - 1) / 2.0
    dim = N ** L
    diag = np.array([L * s - sector_of_index(i, N, L) for i in range(dim)],
                    dtype=complex)
    if dim <= DENSE_LIMIT:
        return ChainOperator(N, L, 0, matrix=np.diag(diag))
    return ChainOperator(N, L, 0, apply_fn=lambda v: diag * v)


def sector_dimension(N, L, n):
    return len(sector_indices(N, L, n))


def require_nonempty_sector(N, L, n):
    if n < 0 or sector_dimension(N, L, n) == 0:
        raise EmptySector(f"sector n={n} is empty for N={N}, L={L}")
