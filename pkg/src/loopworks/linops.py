"""Laplacians, Green's functions, determinants and Poisson kernels.

All Green's functions are obtained by LU factorization of ``I - P_D`` for the
relevant domain ``D``; the Neumann series only appears in test oracles.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, SingularInterior, UnknownState


def _interior_dense(chain):
    P_A = chain.cache.get("P_A")
    if P_A is None:
        idx = chain.interior_idx
        P_A = chain.P[idx][:, idx].toarray()
        chain.cache["P_A"] = P_A
    return P_A


def _positions(chain, states):
    """Positions (within the interior ordering) of the interior members of ``states``."""
    pos = chain.cache.get("interior_pos")
    if pos is None:
        pos = {s: k for k, s in enumerate(chain.interior)}
        chain.cache["interior_pos"] = pos
    out = []
    for s in states:
        if s not in chain.index:
            raise UnknownState(f"unknown state {s!r}")
        if s in pos:
            out.append(pos[s])
    return out


def _lu(M):
    lu, piv = sla.lu_factor(M, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.size and d.min() <= 1e-13 * max(1.0, d.max()):
        raise SingularInterior("I - P_D is numerically singular")
    return lu, piv


def laplacian_matrix(chain):
    """``L_A = I - P_A`` in the interior ordering."""
    P_A = _interior_dense(chain)
    return np.eye(len(P_A)) - P_A


@dataclass(frozen=True)
class GreensBundle:
    interior_order: tuple
    L_A: np.ndarray
    G_A: np.ndarray
    det_G: float
    det_L: float
    log_det_G: float

    def entry(self, x, y):
        k = self.interior_order.index
        return float(self.G_A[k(x), k(y)])


def greens_bundle(chain):
    """Green's function of the interior plus its determinants (cached per chain)."""
    bundle = chain.cache.get("greens")
    if bundle is not None:
        return bundle
    L = laplacian_matrix(chain)
    n = len(L)
    if n == 0:
        G = np.zeros((0, 0))
        log_det_L = 0.0
    else:
        lu, piv = _lu(L)
        G = sla.lu_solve((lu, piv), np.eye(n))
        # L_A is an M-matrix, so its determinant is positive
        log_det_L = float(np.sum(np.log(np.abs(np.diag(lu)))))
    bundle = GreensBundle(
        interior_order=chain.interior,
        L_A=L,
        G_A=G,
        det_G=float(np.exp(-log_det_L)),
        det_L=float(np.exp(log_det_L)),
        log_det_G=-log_det_L,
    )
    chain.cache["greens"] = bundle
    return bundle


def green_column(chain, y):
    """Column ``G_A(., y)`` as a mapping over interior states, via sparse LU.

    Suitable for large truncated chains where the dense bundle is too big.
    """
    if not chain.is_interior(y):
        raise DomainError(f"{y!r} is not interior")
    k = _positions(chain, [y])[0]
    rhs = np.zeros(len(chain.interior))
    rhs[k] = 1.0
    col = chain.interior_factor.solve(rhs)
    return dict(zip(chain.interior, col.tolist()))


def green_on(chain, domain):
    """Dense Green's function ``(I - P_D)^{-1}`` of a sub-domain ``D`` of ``A``.

    Rows and columns follow the interior ordering restricted to ``D``.
    """
    pos = sorted(set(_positions(chain, domain)))
    P_A = _interior_dense(chain)
    M = np.eye(len(pos)) - P_A[np.ix_(pos, pos)]
    if not pos:
        return M
    return sla.lu_solve(_lu(M), np.eye(len(pos)))


def green_diagonal(chain, domain, x):
    """``G_D(x, x)`` for a sub-domain ``D`` of ``A`` containing ``x``."""
    pos = sorted(set(_positions(chain, domain)))
    kx = _positions(chain, [x])
    if not kx or kx[0] not in pos:
        raise DomainError(f"{x!r} is not in the domain")
    memo = chain.cache.setdefault("green_diag", {})
    key = (tuple(pos), kx[0])
    if key in memo:
        return memo[key]
    P_A = _interior_dense(chain)
    M = np.eye(len(pos)) - P_A[np.ix_(pos, pos)]
    rhs = np.zeros(len(pos))
    j = pos.index(kx[0])
    rhs[j] = 1.0
    memo[key] = value = float(sla.lu_solve(_lu(M), rhs)[j])
    return value


def f_v(chain, V, order=None):
    """Product of Green diagonals over shrinking domains.

    ``V`` may contain non-interior states; they are dropped.  The product is
    taken in the chain's interior order unless ``order`` (a permutation of the
    interior members of ``V``) is given.
    """
    members = [chain.interior[k] for k in sorted(set(_positions(chain, V)))]
    if order is not None:
        order = [s for s in order if chain.is_interior(s)]
        if sorted(_positions(chain, order)) != sorted(_positions(chain, members)):
            raise DomainError("order must be a permutation of the interior part of V")
        members = order
    domain = list(chain.interior)
    removed = set()
    value = 1.0
    for x in members:
        live = [s for s in domain if s not in removed]
        value *= green_diagonal(chain, live, x)
        removed.add(x)
    return value


def log_det_green(chain, domain=None):
    """``log det G_D`` (``D = A`` by default)."""
    if domain is None:
        return greens_bundle(chain).log_det_G
    pos = sorted(set(_positions(chain, domain)))
    if not pos:
        return 0.0
    P_A = _interior_dense(chain)
    lu, _ = _lu(np.eye(len(pos)) - P_A[np.ix_(pos, pos)])
    return -float(np.sum(np.log(np.abs(np.diag(lu)))))


def f_v_det_ratio(chain, V):
    """``det G_A / det G_{A \\ V}``: the determinant form of :func:`f_v`."""
    drop = set(V)
    rest = [s for s in chain.interior if s not in drop]
    return float(np.exp(log_det_green(chain) - log_det_green(chain, rest)))


@dataclass(frozen=True)
class InducedChain:
    V: tuple
    P_tilde: np.ndarray
    G_tilde: np.ndarray


def induced_chain(chain, V):
    """The chain watched only while it sits in ``V``.

    ``P~ = P_VV + P_VW (I - P_WW)^{-1} P_WV`` with ``W = A \\ V``.
    """
    vpos = sorted(set(_positions(chain, V)))
    if not vpos or len(vpos) != len(set(V)):
        raise DomainError("V must be a nonempty subset of the interior")
    wpos = [k for k in range(len(chain.interior)) if k not in set(vpos)]
    P_A = _interior_dense(chain)
    P_tilde = P_A[np.ix_(vpos, vpos)].copy()
    if wpos:
        M = np.eye(len(wpos)) - P_A[np.ix_(wpos, wpos)]
        P_tilde += P_A[np.ix_(vpos, wpos)] @ sla.lu_solve(_lu(M), P_A[np.ix_(wpos, vpos)])
    G_tilde = sla.lu_solve(_lu(np.eye(len(vpos)) - P_tilde), np.eye(len(vpos)))
    return InducedChain(tuple(chain.interior[k] for k in vpos), P_tilde, G_tilde)


@dataclass(frozen=True)
class Kernel:
    """A kernel indexed by ``rows x cols`` plus the mass sent to the cemetery."""

    rows: tuple
    cols: tuple
    values: np.ndarray
    cemetery: np.ndarray

    def __call__(self, x, z):
        return float(self.values[self.rows.index(x), self.cols.index(z)])

    def row(self, x):
        r = self.values[self.rows.index(x)]
        return dict(zip(self.cols, r.tolist()))


PoissonKernel = Kernel


def _exit_matrix(chain, domain_pos, targets_idx):
    """``G_D P_{D, targets}`` for interior positions ``domain_pos``."""
    idx = chain.interior_idx[domain_pos]
    P_DT = chain.P[idx][:, targets_idx].toarray()
    if not len(domain_pos):
        return P_DT
    P_A = _interior_dense(chain)
    M = np.eye(len(domain_pos)) - P_A[np.ix_(domain_pos, domain_pos)]
    return sla.lu_solve(_lu(M), P_DT)


def poisson_kernel(chain):
    """Exit distribution ``H_A(x, z)`` for every state ``x`` and boundary state ``z``."""
    cols = chain.boundary_order
    n_int = len(chain.interior)
    H_int = _exit_matrix(chain, list(range(n_int)), chain.boundary_idx)
    H = np.zeros((chain.n_states, len(cols)))
    H[chain.interior_idx] = H_int
    for k, b in enumerate(chain.boundary_idx):
        H[b, k] = 1.0
    cemetery = 1.0 - H.sum(axis=1)
    cemetery[np.abs(cemetery) < 1e-13] = 0.0
    return Kernel(chain.states, cols, H, cemetery)


def boundary_poisson_kernel(chain, mark=None):
    """Boundary Poisson kernel.

    With ``mark=None`` this is ``H_{dA}(z, w)`` over pairs of boundary states:
    the mass of paths from ``z`` to ``w`` whose intermediate states lie in
    ``A`` (and 1 on the diagonal).  With ``mark=x`` for an interior ``x``, the
    point ``x`` is promoted to the boundary and the single row
    ``H_{dA_x}(x, z) = sum_y p(x, y) H_{A_x}(y, z)`` over boundary ``z`` is
    returned.
    """
    cols = chain.boundary_order
    if mark is None:
        H_int = _exit_matrix(chain, list(range(len(chain.interior))), chain.boundary_idx)
        bidx = chain.boundary_idx
        direct = chain.P[bidx][:, bidx].toarray()
        via = chain.P[bidx][:, chain.interior_idx].toarray() @ H_int
        values = direct + via
        np.fill_diagonal(values, 1.0)
        return Kernel(cols, cols, values, np.full(len(cols), np.nan))
    if not chain.is_interior(mark):
        raise DomainError(f"{mark!r} is not interior")
    kx = _positions(chain, [mark])[0]
    rest = [k for k in range(len(chain.interior)) if k != kx]
    H_rest = _exit_matrix(chain, rest, chain.boundary_idx)
    i = chain.index[mark]
    p_to_rest = chain.P[i][:, chain.interior_idx[rest]].toarray().ravel()
    p_to_bdry = chain.P[i][:, chain.boundary_idx].toarray().ravel()
    row = p_to_bdry + p_to_rest @ H_rest
    return Kernel((mark,), cols, row[None, :], np.array([np.nan]))


def _boundary_vector(chain, values):
    if isinstance(values, dict):
        missing = [b for b in chain.boundary_order if b not in values]
        if missing:
            raise DomainError(f"boundary values missing for {missing!r}")
        return np.array([float(values[b]) for b in chain.boundary_order])
    vec = np.asarray(values, dtype=float)
    if vec.shape != (len(chain.boundary_order),):
        raise DomainError("boundary values must cover every boundary state")
    return vec


def solve_dirichlet(chain, boundary_values, cemetery_value=0.0):
    """Harmonic extension of ``boundary_values`` into ``A``.

    Returns an array aligned with ``chain.states``.  Killed walkers collect
    ``cemetery_value``.
    """
    f = _boundary_vector(chain, boundary_values)
    H = poisson_kernel(chain)
    h = H.values @ f + H.cemetery * cemetery_value
    h[chain.boundary_idx] = f
    return h


def _state_vector(chain, f):
    if isinstance(f, dict):
        return np.array([float(f[s]) for s in chain.states])
    if callable(f):
        return np.array([float(f(s)) for s in chain.states])
    vec = np.asarray(f, dtype=float)
    if vec.shape != (chain.n_states,):
        raise DomainError("f must be defined on every state")
    return vec


def harmonic_residual(chain, f, subset=None, cemetery_value=0.0):
    """``max |L f(x)|`` over ``subset`` (the interior by default)."""
    vec = _state_vector(chain, f)
    subset = chain.interior if subset is None else list(subset)
    if not subset:
        return 0.0
    idx = np.array([chain.index[s] for s in subset])
    rows = chain.P[idx]
    deficit = 1.0 - np.asarray(rows.sum(axis=1)).ravel()
    Lf = vec[idx] - rows @ vec - deficit * cemetery_value
    return float(np.max(np.abs(Lf)))


def mean_value_laplacian_estimate(f, x, epsilon, n_samples, rng):
    """Monte Carlo estimate of ``2d (MV(f; x, eps) - f(x)) / eps**2``.

    ``f`` takes points along the last axis: it is called once with shape
    ``(d,)`` and once with a batch of shape ``(m, d)``.  Directions are drawn
    in antipodal pairs (``n_samples`` rounded up to even), which removes the
    first-order term of the sphere average exactly.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.shape[-1]
    if x.ndim != 1 or d < 1:
        raise DomainError("x must be a point of dimension >= 1")
    if not epsilon > 0 or n_samples <= 0:
        raise DomainError("epsilon and n_samples must be positive")
    u = rng.standard_normal(((n_samples + 1) // 2, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    u = np.concatenate([u, -u])
    mv = float(np.mean(f(x + epsilon * u)))
    return 2 * d * (mv - float(f(x))) / epsilon**2

