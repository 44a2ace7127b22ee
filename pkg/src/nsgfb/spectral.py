"""Normalized Laplacian, polynomial graph filters and the dense spectral oracle."""

from __future__ import annotations

import logging
import warnings
import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import Polynomial

from .exceptions import BudgetExceeded, ConvergenceFailure, DimensionMismatch
from .graph import Graph

logger = logging.getLogger(__name__)

DENSE_CEILING = 5000
MATERIALIZE_NNZ_BUDGET = 50_000_000
FULL = None  # bandwidth marker for filters without a finite band


@dataclass(frozen=True, eq=False)
class GraphFilter:
    """A filter stored as an explicit sparse (or dense) matrix.

    ``bandwidth`` is a certified upper bound on the hop distance between
    coupled vertices; ``None`` means no band is claimed.
    """

    graph: Graph
    matrix: sp.csr_matrix | np.ndarray
    bandwidth: int | None = FULL

    def __post_init__(self):
        n = self.graph.n_vertices
        if self.matrix.shape != (n, n):
            raise DimensionMismatch(f"filter shape {self.matrix.shape} != ({n}, {n})")
        if sp.issparse(self.matrix):
            m = sp.csr_matrix(self.matrix)
            m.sort_indices()
            object.__setattr__(self, "matrix", m)

    def __matmul__(self, x):
        return self.matrix @ x

    @property
    def T(self):
        return self.matrix.T

    def toarray(self) -> np.ndarray:
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.asarray(m)

    def entry_bound(self) -> float:
        """Largest absolute entry."""
        m = self.matrix
        if sp.issparse(m):
            return float(np.abs(m.data).max()) if m.nnz else 0.0
        return float(np.abs(m).max())

    def measured_bandwidth(self, tol: float = 0.0) -> int:
        """Largest hop distance between vertices joined by an entry above ``tol``."""
        dist = self.graph.all_pairs_distances()
        a = np.abs(self.toarray()) > tol
        return int(dist[a].max()) if a.any() else 0


@dataclass(frozen=True)
class Spectrum:
    """Eigenpairs of the normalized Laplacian.

    ``eigenvectors[:, m]`` is the unit eigenvector for ``eigenvalues[m]``,
    so ``L = V diag(lambda) V^T`` with ``V = eigenvectors``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def apply(self, response, x):
        """Apply ``V diag(response(lambda)) V^T`` to ``x``."""
        v = self.eigenvectors
        h = response(self.eigenvalues)
        coef = v.T @ x
        return v @ (h[:, None] * coef if coef.ndim == 2 else h * coef)


def as_polynomial(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return p.trim()
    return Polynomial(np.atleast_1d(np.asarray(p, dtype=float))).trim()


def laplacian_sym(g: Graph) -> GraphFilter:
    """``I - D^{-1/2} A D^{-1/2}`` as a sparse filter of bandwidth one."""
    inv_sqrt = 1.0 / g.sqrt_degrees()
    scale = sp.diags(inv_sqrt)
    lap = sp.identity(g.n_vertices, format="csr") - scale @ g.adjacency @ scale
    return GraphFilter(g, sp.csr_matrix(lap), bandwidth=1)


_LAPLACIANS: "weakref.WeakKeyDictionary[Graph, sp.csr_matrix]" = weakref.WeakKeyDictionary()


def _laplacian(g: Graph) -> sp.csr_matrix:
    lap = _LAPLACIANS.get(g)
    if lap is None:
        lap = _LAPLACIANS[g] = laplacian_sym(g).matrix
    return lap


def apply_polynomial(g: Graph, p, x):
    """Evaluate ``P(L_sym) x`` by Horner's rule with sparse products only.

    ``x`` may be a vector, an ``(N, k)`` block of signals, or a sparse matrix.
    """
    p = as_polynomial(p)
    n = g.n_vertices
    if x.shape[0] != n:
        raise DimensionMismatch(f"signal has {x.shape[0]} rows, graph has {n} vertices")
    lap = _laplacian(g)
    coef = p.coef
    y = coef[-1] * x
    for c in coef[-2::-1]:
        y = lap @ y + c * x
    return y


def materialize_polynomial(g: Graph, p, budget: int = MATERIALIZE_NNZ_BUDGET) -> GraphFilter:
    """Explicit sparse matrix ``P(L_sym)``, banded by ``deg P``."""
    p = as_polynomial(p)
    deg = p.degree()
    n = g.n_vertices
    # every column lives on a ball of radius deg
    est = n * min(n, (int(g.degrees.max()) + 1) ** max(deg, 0))
    if est > budget:
        raise BudgetExceeded(f"P(L) may hold up to {est} nonzeros, budget {budget}")
    eye = sp.identity(g.n_vertices, format="csr")
    mat = sp.csr_matrix(apply_polynomial(g, p, eye))
    return GraphFilter(g, mat, bandwidth=max(deg, 0))


def eigendecompose(g: Graph, ceiling: int = DENSE_CEILING) -> Spectrum:
    """Dense eigendecomposition of ``L_sym`` (diagnostic and oracle use)."""
    n = g.n_vertices
    if n > ceiling:
        raise BudgetExceeded(f"N={n} exceeds dense ceiling {ceiling}")
    lap = laplacian_sym(g).toarray()
    try:
        lam, vec = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    off = np.maximum(-lam, lam - 2.0).max()
    if off > 1e-8:
        warnings.warn(f"eigenvalues leave [0, 2] by {off:.2e}; clamping", RuntimeWarning)
    lam = np.clip(lam, 0.0, 2.0)
    # orient the kernel vector along D^{1/2} 1
    if vec[:, 0] @ g.sqrt_degrees() < 0:
        vec[:, 0] = -vec[:, 0]
    return Spectrum(lam, vec)


def schur_norm(f) -> float:
    """max(largest absolute row sum, largest absolute column sum)."""
    m = f.matrix if isinstance(f, GraphFilter) else f
    a = abs(m)
    rows = np.asarray(a.sum(axis=1)).ravel()
    cols = np.asarray(a.sum(axis=0)).ravel()
    return float(max(rows.max(), cols.max()))


def row_sum_norm(f) -> float:
    """Operator norm on l-infinity."""
    m = f.matrix if isinstance(f, GraphFilter) else f
    return float(np.asarray(abs(m).sum(axis=1)).max())


def col_sum_norm(f) -> float:
    """Operator norm on l-1."""
    m = f.matrix if isinstance(f, GraphFilter) else f
    return float(np.asarray(abs(m).sum(axis=0)).max())


def l2_bound(spectrum: Spectrum, p) -> float:
    """Operator 2-norm of ``P(L_sym)``: max of ``|P|`` over the spectrum."""
    return float(np.abs(as_polynomial(p)(spectrum.eigenvalues)).max())


def frequency_responses(spectrum: Spectrum, polys: dict) -> dict:
    """Evaluate each named polynomial on the eigenvalues."""
    lam = spectrum.eigenvalues
    out = {"lambda": lam}
    for name, p in polys.items():
        out[name] = as_polynomial(p)(lam)
    return out
