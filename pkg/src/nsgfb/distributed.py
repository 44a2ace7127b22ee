"""Agent-based simulation of the iterative distributed reconstruction.

Every vertex ``k`` is an agent holding local slices of the analysis filters
around its ball ``B(k, 2r + 2 sigma)``.  One round of the iteration is

1. ``u_k = F_k^{-1} (H_{0,k}^T z0 + H_{1,k}^T z1)`` on ``B(k, 2r)``,
   where ``F_k`` is the principal submatrix of ``H`` on ``B(k, 2r)``;
2. agent ``k`` sends ``u_k(i)`` to every ``i`` in ``B(k, r)``;
3. ``v(k) = (1 / m_k) sum_{i in B(k, r)} u_i(k)`` with ``m_k = |B(k, r)|``;
4. agent ``k`` broadcasts ``v(k)`` to ``B(k, 2r + 2 sigma)``;
5. ``z_l <- z_l - H_l v`` and ``x <- x + v``;
6. stop once ``||v||_inf <= eps``.

``mode="centralized"`` runs the same arithmetic on global arrays and
``mode="agents"`` routes every value through :class:`Router`.  Both modes use
the same reduction order, so they produce bit-identical iterates.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import BoundViolated, Diverged, DimensionMismatch, LocalSingular
from .filterbank import AnalysisBank
from .graph import Graph

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-10
DEFAULT_MAX_ITER = 200
DEFAULT_BLOWUP = 1e6


@dataclass(eq=False)
class AgentState:
    """Local storage of agent ``k``.

    Index arrays are global vertex ids in ascending order.  ``gain0`` and
    ``gain1`` are the rows of ``F_k^{-1} H_{l,k}^T`` belonging to
    ``ball_r`` (the only slice another agent ever reads).
    """

    vertex: int
    ball_r: np.ndarray
    ball_2r: np.ndarray
    ball_wide: np.ndarray       # B(k, 2r + sigma): rows of H_{l,k}
    ball_outer: np.ndarray      # B(k, 2r + 2 sigma): broadcast range
    gain0: np.ndarray
    gain1: np.ndarray
    h_wide: tuple = ()          # H~_{l,k} as CSR (rows ball_wide, cols ball_outer)
    z0: np.ndarray | None = None
    z1: np.ndarray | None = None
    v_outer: np.ndarray | None = None
    inbox: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.ball_r)


class Router:
    """Delivers messages between agents and refuses non-local traffic."""

    def __init__(self, reach: dict[int, np.ndarray]):
        self._reach = {k: set(v.tolist()) for k, v in reach.items()}
        self.count = 0
        self.broadcasts = np.zeros(len(reach), dtype=np.int64)

    def broadcast(self, src: int, targets, payloads, agents, tag) -> None:
        allowed = self._reach[src]
        self.broadcasts[src] += 1
        for dst, val in zip(targets, payloads):
            dst = int(dst)
            if dst not in allowed:
                raise RuntimeError(f"agent {src} tried to reach {dst} outside its neighborhood")
            agents[dst].inbox.setdefault(tag, []).append((src, val))
            if dst != src:
                self.count += 1


@dataclass
class IterationTrace:
    """Per-iteration diagnostics.

    ``err_inf`` and ``err_2`` hold relative errors against the oracle with
    one column per signal (empty without an oracle).  Mean values over the
    columns are written by :meth:`to_csv`.
    """

    update_inf: list = field(default_factory=list)
    err_inf: list = field(default_factory=list)
    err_2: list = field(default_factory=list)
    msgs: list = field(default_factory=list)
    oracle_norm_inf: np.ndarray | None = None
    oracle_norm_2: np.ndarray | None = None
    converged: bool = False
    diverged: bool = False
    radius: int = 0
    sigma: int = 1

    @property
    def n_iter(self) -> int:
        return len(self.update_inf)

    def mean_errors(self, p="inf") -> np.ndarray:
        errs = self.err_inf if p in ("inf", np.inf) else self.err_2
        return np.array([float(np.mean(e)) for e in errs])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "rel_err_inf", "rel_err_2", "update_inf", "msgs"])
            for m in range(self.n_iter):
                e_inf = repr(float(np.mean(self.err_inf[m]))) if self.err_inf else ""
                e_2 = repr(float(np.mean(self.err_2[m]))) if self.err_2 else ""
                w.writerow([m + 1, e_inf, e_2, repr(float(self.update_inf[m])), self.msgs[m]])


# --- local pieces --------------------------------------------------------

def _balls(g: Graph, k: int, radii) -> list[np.ndarray]:
    members, dist = g.distances(k, max(radii))
    return [members[dist <= rad] for rad in radii]


def _factor(f: np.ndarray, k: int):
    try:
        return cho_factor(f, lower=False, check_finite=False)
    except LinAlgError as exc:
        raise LocalSingular(f"local Gram matrix of agent {k} is not positive definite") from exc


def _dense_block(m, rows, cols) -> np.ndarray:
    block = m[rows][:, cols]
    return block.toarray() if sp.issparse(block) else np.asarray(block)


def local_solve(h: AnalysisBank, g: Graph, k: int, r: int, z0, z1) -> np.ndarray:
    """Local least-squares solution around ``k``, zero outside ``B(k, 2r)``."""
    sigma = h.bandwidth or 1
    ball, wide = _balls(g, k, (2 * r, 2 * r + sigma))
    h0 = _dense_block(h.h0.matrix, wide, ball)
    h1 = _dense_block(h.h1.matrix, wide, ball)
    factor = _factor(h0.T @ h0 + h1.T @ h1, k)
    rhs = h0.T @ np.asarray(z0)[wide] + h1.T @ np.asarray(z1)[wide]
    out = np.zeros(g.n_vertices)
    out[ball] = cho_solve(factor, rhs)
    return out


def patch(g: Graph, r: int, locals_: dict) -> np.ndarray:
    """Average overlapping local solutions.

    ``v(i)`` is the mean of ``locals_[k][i]`` over the centers ``k`` whose
    ``r``-ball contains ``i``, summed in ascending order of ``k``.
    """
    n = g.n_vertices
    out = np.zeros(n)
    for i in range(n):
        (ball,) = _balls(g, i, (r,))
        acc = 0.0
        for k in ball:
            acc += locals_[int(k)][i]
        out[i] = acc / len(ball)
    return out


# --- setup ---------------------------------------------------------------

@dataclass(eq=False)
class _Setup:
    agents: list
    h0: sp.csr_matrix
    h1: sp.csr_matrix
    scatter: sp.csr_matrix      # sums u_k(i) over k in ascending order
    offsets: np.ndarray         # start of each agent's block in the stacked u
    m: np.ndarray
    sigma: int
    r: int


_SETUPS: dict = {}


def _csr(m) -> sp.csr_matrix:
    out = sp.csr_matrix(m, dtype=float)
    out.sort_indices()
    return out


def build_agents(h: AnalysisBank, r: int, with_wide: bool = False) -> _Setup:
    """Precompute balls and local gains of every agent (cached per bank and r)."""
    key = (id(h), r, with_wide)
    cached = _SETUPS.get(key)
    if cached is not None and cached[0] is h:
        return cached[1]
    g = h.graph
    n = g.n_vertices
    sigma = h.bandwidth
    if sigma is None:
        raise ValueError("distributed reconstruction needs banded analysis filters")
    h0, h1 = _csr(h.h0.matrix), _csr(h.h1.matrix)
    agents = []
    for k in range(n):
        b_r, b_2r, b_wide, b_outer = _balls(g, k, (r, 2 * r, 2 * r + sigma, 2 * r + 2 * sigma))
        a0 = h0[b_wide][:, b_2r].toarray()
        a1 = h1[b_wide][:, b_2r].toarray()
        factor = _factor(a0.T @ a0 + a1.T @ a1, k)
        rows = np.searchsorted(b_2r, b_r)
        g0 = cho_solve(factor, a0.T, check_finite=False)[rows]
        g1 = cho_solve(factor, a1.T, check_finite=False)[rows]
        agent = AgentState(k, b_r, b_2r, b_wide, b_outer, np.ascontiguousarray(g0),
                           np.ascontiguousarray(g1))
        if with_wide:
            agent.h_wide = (_csr(h0[b_wide][:, b_outer]), _csr(h1[b_wide][:, b_outer]))
        agents.append(agent)
    sizes = np.array([a.m for a in agents])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    # row i of scatter picks u_k(i) for every k with i in B(k, r); column
    # index grows with k, so CSR accumulates in ascending k
    cols = np.arange(offsets[-1])
    rows = np.concatenate([a.ball_r for a in agents])
    scatter = _csr(sp.coo_matrix((np.ones(len(cols)), (rows, cols)), shape=(n, offsets[-1])))
    setup = _Setup(agents, h0, h1, scatter, offsets, np.bincount(rows, minlength=n), sigma, r)
    _SETUPS.clear()
    _SETUPS[key] = (h, setup)
    return setup


# --- iteration -----------------------------------------------------------

def _as_block(z, n) -> tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=float)
    if z.shape[0] != n:
        raise DimensionMismatch(f"subband has {z.shape[0]} entries, graph has {n} vertices")
    return (z[:, None], True) if z.ndim == 1 else (z, False)


def _local_updates(agent: AgentState, z0w: np.ndarray, z1w: np.ndarray) -> np.ndarray:
    return agent.gain0 @ z0w + agent.gain1 @ z1w


def _step_centralized(s: _Setup, z0, z1):
    u = np.empty((s.offsets[-1], z0.shape[1]))
    for a in s.agents:
        u[s.offsets[a.vertex]:s.offsets[a.vertex + 1]] = _local_updates(
            a, z0[a.ball_wide], z1[a.ball_wide])
    v = (s.scatter @ u) / s.m[:, None]
    return v, z0 - s.h0 @ v, z1 - s.h1 @ v, None


def _step_agents(s: _Setup, router: Router):
    agents = s.agents
    for a in agents:
        u = _local_updates(a, a.z0, a.z1)
        router.broadcast(a.vertex, a.ball_r, list(u), agents, "u")
    t = agents[0].z0.shape[1]
    v = np.empty((len(agents), t))
    for a in agents:
        # same accumulation as the CSR scatter: 0 + 1.0*u, in ascending sender id
        acc = np.zeros(t)
        for _, val in sorted(a.inbox.pop("u"), key=lambda item: item[0]):
            acc += 1.0 * val
        v[a.vertex] = acc / a.m
    for a in agents:
        router.broadcast(a.vertex, a.ball_outer, [v[a.vertex]] * len(a.ball_outer), agents, "v")
    for a in agents:
        got = dict(a.inbox.pop("v"))
        v_loc = np.array([got[int(j)] for j in a.ball_outer])
        a.z0 = a.z0 - a.h_wide[0] @ v_loc
        a.z1 = a.z1 - a.h_wide[1] @ v_loc
    return v


def run_distributed(h: AnalysisBank, g: Graph | None, r: int, z0, z1, stop_eps: float = DEFAULT_EPS,
                    max_iter: int = DEFAULT_MAX_ITER, oracle=None, mode: str = "centralized",
                    blowup: float | None = DEFAULT_BLOWUP):
    """Iterative distributed reconstruction from subbands ``z0`` and ``z1``.

    Parameters
    ----------
    h : AnalysisBank
        Banded analysis bank.
    g : Graph or None
        Must be the graph of ``h`` when given.
    r : int
        Radius of the local least-squares problems (``r = 0`` is Jacobi).
    z0, z1 : ndarray
        Subband signals, shape ``(N,)`` or ``(N, T)`` for ``T`` signals.
    stop_eps : float
        Stop once ``||v||_inf <= stop_eps`` for every column.
    oracle : ndarray, optional
        Reference solution used for the relative error columns of the trace.
    mode : {"centralized", "agents"}
    blowup : float or None
        Raise :class:`Diverged` when ``||v||_inf`` exceeds ``blowup`` times
        the first update.  ``None`` disables the check.

    Returns
    -------
    x : ndarray
    trace : IterationTrace
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if g is not None and g is not h.graph:
        raise ValueError("bank was built on a different graph")
    g = h.graph
    n = g.n_vertices
    z0, squeeze = _as_block(z0, n)
    z1, _ = _as_block(z1, n)
    s = build_agents(h, r, with_wide=(mode == "agents"))
    trace = IterationTrace(radius=r, sigma=s.sigma)
    ref = None
    if oracle is not None:
        ref, _ = _as_block(oracle, n)
        trace.oracle_norm_inf = np.abs(ref).max(axis=0)
        trace.oracle_norm_2 = np.linalg.norm(ref, axis=0)
    router = None
    if mode == "agents":
        router = Router({a.vertex: a.ball_outer for a in s.agents})
        for a in s.agents:
            a.z0, a.z1 = z0[a.ball_wide].copy(), z1[a.ball_wide].copy()
    elif mode != "centralized":
        raise ValueError(f"unknown mode {mode!r}")
    x = np.zeros_like(z0)
    first = None
    for m in range(1, max_iter + 1):
        if router is None:
            v, z0, z1, _ = _step_centralized(s, z0, z1)
            msgs = int(s.offsets[-1] - n + sum(len(a.ball_outer) - 1 for a in s.agents))
        else:
            before = router.count
            v = _step_agents(s, router)
            msgs = router.count - before
        x = x + v
        upd = float(np.abs(v).max()) if v.size else 0.0
        trace.update_inf.append(upd)
        trace.msgs.append(msgs)
        if ref is not None:
            trace.err_inf.append(_rel(np.abs(x - ref).max(axis=0), trace.oracle_norm_inf))
            trace.err_2.append(_rel(np.linalg.norm(x - ref, axis=0), trace.oracle_norm_2))
        if first is None:
            first = upd
        if blowup is not None and first > 0 and upd > blowup * first:
            trace.diverged = True
            raise Diverged(f"update {upd:.3e} exceeds {blowup:g} x first update at iteration {m}",
                           trace=trace)
        if upd <= stop_eps:
            trace.converged = True
            break
    logger.debug("distributed run: r=%d, %d iterations, converged=%s", r, trace.n_iter,
                 trace.converged)
    return (x[:, 0] if squeeze else x), trace


def _rel(err: np.ndarray, ref: np.ndarray) -> np.ndarray:
    out = err.copy()
    nz = ref > 0
    out[nz] = err[nz] / ref[nz]
    return out


def residual_check(h: AnalysisBank, r: int, z0, z1, x_ref, iters: int = 5) -> float:
    """Largest deviation from ``z_l^(m) - (z_l - H_l x) = -H_l (x^(m) - x)``."""
    z0, _ = _as_block(z0, h.graph.n_vertices)
    z1, _ = _as_block(z1, h.graph.n_vertices)
    x_ref, _ = _as_block(x_ref, h.graph.n_vertices)
    s = build_agents(h, r)
    x = np.zeros_like(z0)
    zc0, zc1 = z0, z1
    worst = 0.0
    for _ in range(iters):
        v, zc0, zc1, _ = _step_centralized(s, zc0, zc1)
        x = x + v
        for zc, z, hl in ((zc0, z0, s.h0), (zc1, z1, s.h1)):
            lhs = zc - (z - hl @ x_ref)
            worst = max(worst, float(np.abs(lhs + hl @ (x - x_ref)).max()))
    return worst


def jacobi_reference(gram, b, iters: int) -> list[np.ndarray]:
    """Plain Jacobi sweeps ``x <- x + D^{-1}(b - H x)`` from ``x = 0``."""
    a = gram.toarray() if sp.issparse(gram) else np.asarray(gram, dtype=float)
    n = a.shape[0]
    x = np.zeros(n)
    out = []
    for _ in range(iters):
        new = np.empty(n)
        for i in range(n):
            acc = b[i]
            for j in range(n):
                if j != i:
                    acc -= a[i, j] * x[j]
            new[i] = acc / a[i, i]
        x = new
        out.append(x.copy())
    return out


@dataclass
class ContractionReport:
    checked: bool
    delta: float
    violations: int
    worst_ratio: float
    message: str


def verify_contraction(trace: IterationTrace, delta: float, slack: float = 1e-12) -> ContractionReport:
    """Check ``||x^(m) - x||_p <= delta^m ||x||_p`` for ``p`` in {2, inf}.

    Raises
    ------
    BoundViolated
        if any recorded iterate breaks the bound.
    """
    if delta >= 1.0:
        return ContractionReport(False, delta, 0, float("nan"), "bound vacuous, not checked")
    if not trace.err_inf:
        raise ValueError("trace has no oracle errors")
    bad, worst = 0, 0.0
    for m in range(trace.n_iter):
        bound = delta ** (m + 1)
        for errs, norms in ((trace.err_inf[m], trace.oracle_norm_inf),
                            (trace.err_2[m], trace.oracle_norm_2)):
            # relative errors fall back to absolute ones when the reference is zero
            absolute = np.where(norms > 0, errs * norms, errs)
            limit = bound * norms + slack
            bad += int((absolute > limit).sum())
            ratio = np.where(limit > 0, absolute / limit, 0.0)
            worst = max(worst, float(ratio.max()))
    report = ContractionReport(True, delta, bad, worst,
                               "ok" if bad == 0 else f"{bad} iterates exceed the bound")
    if bad:
        raise BoundViolated(report.message)
    return report
