"""Bethe vectors, Bethe equations and the off-shell transfer-matrix action.

The n-particle vector is assembled by the master recurrence: the leading
creation field T_{1,1+e}(lambda_1) multiplies the previously built
(n-e)-particle vector, with e-1 trailing diagonal fields T_{1,1} and a
scalar coefficient built from the two-root exchange data.  The same
bookkeeping produces, term by term, the predicted decomposition of
T_{a,a}(lambda) acting on the state, which is what the dense oracles in
`verify` check.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import amplitudes as amp
from .chain import (StateVector, monodromy_element, reference_state,
                    require_nonempty_sector, transfer_matrix, vacuum_weight)
from .errors import (InvalidOption, NoConvergence, ParameterDomain,
                     Singularity, SingularJacobian, UnknownGridPoint)
from .weights import eval_r

_EVAL_ERRORS = (Singularity, ParameterDomain, UnknownGridPoint)

__all__ = [
    "RootSet", "BetheState", "OffshellTerm", "build_bethe_vector",
    "bae_residual", "bae_residual_vector", "solve_bae", "eigenvalue",
    "offshell_expansion", "expansion_for_diagonal",
]


@dataclass(frozen=True)
class RootSet:
    """An ordered set of pairwise-distinct rapidities."""
    roots: tuple

    def __post_init__(self):
        object.__setattr__(self, "roots",
                           tuple(complex(r) for r in self.roots))
        amp.require_distinct(self.roots)

    @property
    def n(self):
        return len(self.roots)

    def sorted(self):
        return RootSet(tuple(sorted(self.roots, key=lambda z: (z.real, z.imag))))


@dataclass
class BetheState:
    roots: RootSet
    vector: StateVector

    @property
    def sector(self):
        return self.roots.n


def _ratio(model, x, y):
    return amp.ratio_11_21(model, x, y)


def build_bethe_vector(ctx, roots, cache=None, t11_mode="scalar"):
    """Construct the unnormalized n-particle vector on the chain of `ctx`.

    `t11_mode` selects how the trailing diagonal fields of the recurrence
    act on the reference state: "scalar" uses the vacuum weights w_1,
    "operator" applies the actual chain operators; both must agree.
    """
    if isinstance(roots, RootSet):
        roots = roots.roots
    roots = amp.require_distinct(roots)
    if t11_mode not in ("scalar", "operator"):
        raise ValueError(f"unknown t11_mode {t11_mode!r}")
    require_nonempty_sector(ctx.N, ctx.L, len(roots))
    if cache is None:
        cache = amp.AmplitudeCache()
    memo = {}
    vec = _phi(ctx, roots, cache, t11_mode, memo)
    return BetheState(RootSet(roots), StateVector(ctx.N, ctx.L, vec))


def _phi(ctx, roots, cache, t11_mode, memo):
    n = len(roots)
    if n == 0:
        return reference_state(ctx.N, ctx.L).amplitudes
    got = memo.get(roots)
    if got is not None:
        return got
    model = ctx.model
    total = np.zeros(ctx.dim, dtype=complex)
    labels = tuple(range(2, n + 1))
    for ebar in range(1, min(n, ctx.N - 1) + 1):
        top = monodromy_element(ctx, roots[0], 1, 1 + ebar)
        for jgrp in combinations(labels, ebar - 1):
            comp = tuple(k for k in labels if k not in jgrp)
            sub = _phi(ctx, tuple(roots[k - 1] for k in comp),
                       cache, t11_mode, memo)
            if ebar == 1:
                coef = 1.0 + 0.0j
            else:
                coef = amp.F_offshell(model, ebar - 1, ebar - 1, 2, roots[0],
                                      tuple(roots[j - 1] for j in jgrp), cache)
            for j in jgrp:
                for k in comp:
                    coef *= _ratio(model, roots[k - 1], roots[j - 1])
                    coef *= amp.theta_less(model, roots[k - 1], roots[j - 1],
                                           k, j)
            if t11_mode == "scalar":
                for j in jgrp:
                    coef *= vacuum_weight(ctx, roots[j - 1], 1)
                vec = sub
            else:
                # trailing T_{1,1} factors act on |0> first; scale the
                # reference amplitude they produce into the recursion
                ref = reference_state(ctx.N, ctx.L).amplitudes
                for j in jgrp:
                    ref = monodromy_element(ctx, roots[j - 1], 1, 1).apply(ref)
                vec = sub * ref[0]
            total += coef * top.apply(vec)
    memo[roots] = total
    return total


# ----------------------------------------------------------------------
# Bethe equations and eigenvalues
# ----------------------------------------------------------------------

def bae_residual(ctx, roots, j):
    """Residual of the j-th Bethe equation (1-based); zero on shell."""
    if isinstance(roots, RootSet):
        roots = roots.roots
    n = len(roots)
    if not 1 <= j <= n:
        raise IndexError(f"equation index {j} outside 1..{n}")
    model = ctx.model
    lj = roots[j - 1]
    w1 = vacuum_weight(ctx, lj, 1)
    w2 = vacuum_weight(ctx, lj, 2)
    if w2 == 0:
        raise Singularity(f"w_2 vanishes at root {lj}")
    val = w1 / w2
    for i in range(1, n + 1):
        if i == j:
            continue
        li = roots[i - 1]
        wji = eval_r(model, lj, li)
        wij = eval_r(model, li, lj)
        num = wji.entry(2, 1, 2, 1) * wij.entry(1, 1, 1, 1)
        den = wji.entry(1, 1, 1, 1) * wij.entry(2, 1, 2, 1)
        if den == 0:
            raise Singularity(f"scattering factor singular at ({lj}, {li})")
        val *= num / den / amp.theta(model, lj, li)
    return val - 1.0


def bae_residual_vector(ctx, roots):
    return np.array([bae_residual(ctx, roots, j)
                     for j in range(1, len(roots) + 1)])


def _newton(ctx, x0, tol, max_iter):
    """Damped complex Newton on the Bethe residual vector."""
    n = len(x0)
    x = np.array(x0, dtype=complex)
    best = np.inf
    for _ in range(max_iter):
        try:
            r = bae_residual_vector(ctx, tuple(x))
        except _EVAL_ERRORS:
            raise NoConvergence("residual singular along the path",
                                best) from None
        rn = float(np.max(np.abs(r)))
        best = min(best, rn)
        if rn < tol:
            return tuple(x)
        jac = np.zeros((n, n), dtype=complex)
        for k in range(n):
            h = 1e-7 * (1.0 + abs(x[k]))
            xp = x.copy()
            xp[k] += h
            try:
                rp = bae_residual_vector(ctx, tuple(xp))
            except _EVAL_ERRORS:
                raise NoConvergence("Jacobian sample singular", best) from None
            jac[:, k] = (rp - r) / h
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            raise SingularJacobian("Newton Jacobian is singular") from None
        smax = float(np.max(np.abs(step)))
        if not np.isfinite(smax):
            raise SingularJacobian("Newton step is not finite")
        if smax > 1.0:
            step *= 1.0 / smax
        x = x + step
        if np.max(np.abs(x)) > 8.0:
            raise NoConvergence("iterate left the search region", best)
    raise NoConvergence(f"no convergence in {max_iter} iterations", best)


def _fold_period(roots, period):
    """Translate each root into the fundamental strip of the period."""
    if period is None:
        return tuple(roots)
    out = []
    for z in roots:
        k = np.floor((z / period).real + 0.5)
        out.append(z - k * period)
    return tuple(out)


def _periodic_distance(a, b, period):
    if period is None:
        return abs(a - b)
    return min(abs(a - b - k * period) for k in (-1, 0, 1))


def _same_root_set(r1, r2, period, tol=1e-6):
    return all(_periodic_distance(a, b, period) < tol
               for a, b in zip(r1.roots, r2.roots))


_FILTER_OFFSETS = (0.377 + 0.211j, -0.523 + 0.149j, 0.181 - 0.433j)


def _is_physical(ctx, rs, vec_tol):
    """Accept a converged root set only if it produces an eigenvector.

    Spurious Bethe-equation solutions (typically runaways standing in for
    roots at infinity) build a vanishing vector; genuine ones reproduce
    T(lam) v = Lambda v to solver precision.
    """
    try:
        state = build_bethe_vector(ctx, rs)
    except _EVAL_ERRORS:
        return False
    v = state.vector.amplitudes
    vmax = float(np.max(np.abs(v)))
    if vmax < 1e-10:
        return False
    for off in _FILTER_OFFSETS:
        lam = ctx.model.regular_point + off
        try:
            lam_pred = eigenvalue(ctx, lam, rs)
            tv = transfer_matrix(ctx, lam).apply(v)
        except _EVAL_ERRORS:
            continue
        return bool(np.max(np.abs(tv - lam_pred * v)) <= vec_tol * vmax)
    return False


def _default_seeds(ctx, n, count, seed):
    """Grid points in the model root window with deterministic jitter."""
    rng = np.random.default_rng(seed)
    (re0, re1), (im0, im1) = ctx.model.root_window
    g = max(2, int(np.ceil(np.sqrt(count))))
    res = np.linspace(re0, re1, g)
    ims = np.linspace(im0, im1, g)
    seeds = []
    for _ in range(count):
        pt = []
        for _k in range(n):
            z = complex(rng.choice(res), rng.choice(ims))
            z += complex(rng.normal(0, 0.07), rng.normal(0, 0.07))
            pt.append(z)
        seeds.append(tuple(pt))
    return seeds


def solve_bae(ctx, n, seeds=None, tol=1e-12, max_iter=60, n_seeds=50, seed=42,
              vec_tol=1e-8):
    """Newton-solve the Bethe equations in the n-particle sector.

    Returns deduplicated converged root sets, each canonically sorted,
    the list itself ordered lexicographically.  Roots are folded into the
    fundamental strip of the model's rapidity period, and solutions that
    fail to build an eigenvector (vanishing-vector runaways standing in
    for roots at infinity) are dropped.  Completeness is not attempted:
    only roots reachable from the seeds are reported.
    """
    if n == 0:
        return [RootSet(())]
    if not ctx.model.solver_ok:
        raise InvalidOption(
            "table models store fixed grid points; the solver needs "
            "arbitrary-argument weight evaluation")
    require_nonempty_sector(ctx.N, ctx.L, n)
    explicit = seeds is not None
    if seeds is None:
        seeds = _default_seeds(ctx, n, n_seeds, seed)
    found = []
    best = np.inf
    jac_failures = 0
    for s in seeds:
        try:
            x = _newton(ctx, s, tol, max_iter)
        except NoConvergence as err:
            if err.best_residual is not None:
                best = min(best, err.best_residual)
            continue
        except SingularJacobian:
            jac_failures += 1
            continue
        try:
            folded = _fold_period(x, ctx.model.rapidity_period)
            rs = RootSet(folded).sorted()
        except Singularity:
            continue  # coincident roots: not an admissible Bethe state
        period = ctx.model.rapidity_period
        if any(_same_root_set(rs, other, period)
               for other in found if other.n == rs.n):
            continue
        if not _is_physical(ctx, rs, vec_tol):
            continue
        found.append(rs)
    if not found:
        if explicit and jac_failures == len(seeds):
            raise SingularJacobian("every provided seed hit a singular Jacobian")
        raise NoConvergence(
            f"no Bethe roots found in sector n={n}", best)
    found.sort(key=lambda rs: tuple((z.real, z.imag) for z in rs.roots))
    return found


def eigenvalue(ctx, lam, roots):
    """Transfer-matrix eigenvalue predicted for the given root set."""
    if isinstance(roots, RootSet):
        roots = roots.roots
    total = 0.0 + 0.0j
    for a in range(1, ctx.N + 1):
        term = vacuum_weight(ctx, lam, a)
        for li in roots:
            term *= amp.P_a(ctx.model, a, lam, li)
        total += term
    return total


# ----------------------------------------------------------------------
# off-shell expansion of the diagonal action
# ----------------------------------------------------------------------

@dataclass
class OffshellTerm:
    """One unwanted contribution to T_{a,a}(lambda) |Phi_n>."""
    a: int
    t: int
    p: int
    w1_labels: tuple
    w2_labels: tuple
    op_indices: tuple       # (a - p, a + t - p)
    coefficient: complex    # includes the overall minus sign
    vector: StateVector     # T_{a-p,a+t-p}(lambda) phi_{n-t}(rest) |0>

    @property
    def contribution(self):
        return self.coefficient * self.vector


def expansion_for_diagonal(ctx, lam, roots, a, cache=None, _memo=None):
    """Predicted decomposition of T_{a,a}(lambda) |Phi_n>.

    Returns (wanted, terms): `wanted` is the part proportional to the
    state, `terms` the enumerated unwanted contributions (t ascending,
    p ascending, index tuples lexicographic).
    """
    if isinstance(roots, RootSet):
        roots = roots.roots
    roots = amp.require_distinct(roots)
    if cache is None:
        cache = amp.AmplitudeCache()
    model = ctx.model
    N = ctx.N
    n = len(roots)
    memo = _memo if _memo is not None else {}
    phi_full = _phi(ctx, roots, cache, "scalar", memo)
    coef = vacuum_weight(ctx, lam, a)
    for li in roots:
        coef *= amp.P_a(model, a, lam, li)
    wanted = StateVector(ctx.N, ctx.L, coef * phi_full)
    terms = []
    labels = tuple(range(1, n + 1))
    for t in range(1, n + 1):
        for p in range(max(0, a + t - N), min(a - 1, t) + 1):
            for w1grp in combinations(labels, t - p):
                rest = tuple(k for k in labels if k not in w1grp)
                for w2grp in combinations(rest, p):
                    spect = tuple(k for k in labels
                                  if k not in w1grp and k not in w2grp)
                    fargs = tuple(roots[k - 1] for k in w1grp) \
                        + tuple(roots[k - 1] for k in w2grp)
                    coef = amp.F_offshell(model, t - p, t, a - p, lam,
                                          fargs, cache)
                    for jk in w1grp:
                        coef *= vacuum_weight(ctx, roots[jk - 1], 1)
                        for i in spect:
                            coef *= _ratio(model, roots[i - 1], roots[jk - 1])
                            coef *= amp.theta_less(model, roots[i - 1],
                                                   roots[jk - 1], i, jk)
                    for jl in w2grp:
                        coef *= vacuum_weight(ctx, roots[jl - 1], 2)
                        for i in spect:
                            coef *= _ratio(model, roots[jl - 1], roots[i - 1])
                            coef *= amp.theta_less(model, roots[jl - 1],
                                                   roots[i - 1], jl, i)
                    for jk in w1grp:
                        for jl in w2grp:
                            coef *= amp.theta_less(model, roots[jl - 1],
                                                   roots[jk - 1], jl, jk)
                    sub = _phi(ctx, tuple(roots[k - 1] for k in spect),
                               cache, "scalar", memo)
                    op = monodromy_element(ctx, lam, a - p, a + t - p)
                    vec = StateVector(ctx.N, ctx.L, op.apply(sub))
                    terms.append(OffshellTerm(
                        a=a, t=t, p=p, w1_labels=w1grp, w2_labels=w2grp,
                        op_indices=(a - p, a + t - p),
                        coefficient=-coef, vector=vec))
    return wanted, terms


def offshell_expansion(ctx, lam, roots, cache=None):
    """Predicted decomposition of the full T(lambda) |Phi_n>.

    Returns (wanted, terms): wanted = Lambda_n(lambda) |Phi_n> and the
    concatenated per-diagonal unwanted terms (a ascending).
    """
    if isinstance(roots, RootSet):
        roots = roots.roots
    if cache is None:
        cache = amp.AmplitudeCache()
    memo = {}
    wanted_total = None
    terms = []
    for a in range(1, ctx.N + 1):
        wanted, tpart = expansion_for_diagonal(ctx, lam, roots, a,
                                               cache, _memo=memo)
        wanted_total = wanted if wanted_total is None else wanted_total + wanted
        terms.extend(tpart)
    return wanted_total, terms
