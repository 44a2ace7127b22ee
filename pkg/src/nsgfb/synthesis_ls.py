"""Least-squares synthesis ``G_l = H^{-1} H_l^T`` and its locality diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.sparse.linalg import splu
from scipy.special import gamma

from .exceptions import BudgetExceeded, KappaOne, NotPositiveDefinite
from .filterbank import (AnalysisBank, StabilityReport, SynthesisBank, check_assumptions,
                         spline_analysis, theta_from_kappa)
from .graph import Graph, GrowthProfile
from .spectral import DENSE_CEILING, GraphFilter

CERT_SLACK = 1e-12


@dataclass(eq=False)
class LsSynthesis:
    """Least-squares synthesis for an analysis bank.

    In ``"dense"`` mode ``g0`` and ``g1`` hold the explicit matrices.  In
    ``"implicit"`` mode only a sparse LU factorization of ``H`` is kept and
    :meth:`synthesize` solves ``H x = H0^T z0 + H1^T z1``.
    """

    bank: AnalysisBank
    gram: sp.csr_matrix
    mode: str
    kappa: float
    theta: float
    h_inv_norm: float
    kappa_source: str
    g0: np.ndarray | None = None
    g1: np.ndarray | None = None
    _lu: object = field(default=None, repr=False)

    @property
    def graph(self) -> Graph:
        return self.bank.graph

    def rhs(self, z0, z1):
        return self.bank.h0.T @ z0 + self.bank.h1.T @ z1

    def synthesize(self, z0, z1):
        if self.mode == "dense":
            return self.g0 @ z0 + self.g1 @ z1
        if self._lu is None:
            self._lu = splu(sp.csc_matrix(self.gram))
        return self._lu.solve(np.asarray(self.rhs(z0, z1), dtype=float))

    def as_synthesis_bank(self) -> SynthesisBank:
        if self.mode != "dense":
            raise ValueError("explicit filters need dense mode")
        g = self.graph
        return SynthesisBank(GraphFilter(g, self.g0), GraphFilter(g, self.g1),
                             provenance="least-squares")


def _build(h: AnalysisBank, mode: str, report: StabilityReport | None,
           ceiling: int) -> LsSynthesis:
    if report is None:
        report = check_assumptions(h, ceiling=max(ceiling, DENSE_CEILING))
    gram = sp.csr_matrix(h.gram())
    ls = LsSynthesis(h, gram, mode, report.kappa, report.theta, report.h_inv_norm,
                     report.kappa_source)
    if mode == "dense":
        n = h.graph.n_vertices
        if n > ceiling:
            raise BudgetExceeded(f"dense least-squares synthesis needs N <= {ceiling}")
        try:
            factor = cho_factor(gram.toarray())
        except LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from exc
        ls.g0 = cho_solve(factor, h.h0.T.toarray() if sp.issparse(h.h0.matrix) else h.h0.T)
        ls.g1 = cho_solve(factor, h.h1.T.toarray() if sp.issparse(h.h1.matrix) else h.h1.T)
    elif mode != "implicit":
        raise ValueError(f"unknown mode {mode!r}")
    return ls


def ls_synthesis_dense(h: AnalysisBank, report: StabilityReport | None = None,
                       ceiling: int = DENSE_CEILING) -> LsSynthesis:
    """Explicit least-squares synthesis bank; the ground-truth oracle."""
    return _build(h, "dense", report, ceiling)


def ls_synthesis_implicit(h: AnalysisBank, report: StabilityReport | None = None) -> LsSynthesis:
    return _build(h, "implicit", report, DENSE_CEILING)


def spline_ls_synthesis(g: Graph, n: int, mode: str = "dense") -> LsSynthesis:
    """Least-squares synthesis for the order-``n`` spline bank.

    Spline filters are symmetric, so ``H = H0^2 + H1^2``.
    """
    return _build(spline_analysis(g, n), mode, None, DENSE_CEILING)


# --- decay ---------------------------------------------------------------

def decay_bound(ls: LsSynthesis, growth: GrowthProfile, l: int, rho):
    """Right-hand side of the exponential off-diagonal decay estimate."""
    if ls.kappa <= 1.0:
        raise KappaOne("decay bound needs kappa > 1")
    sigma = ls.bank.bandwidth
    h_l = ls.bank.h0 if l == 0 else ls.bank.h1
    const = (growth.density * (sigma + 1) ** growth.dimension
             * (1.0 - 1.0 / ls.kappa) ** -0.5 * ls.h_inv_norm * h_l.entry_bound())
    return const * np.exp(-ls.theta / (2.0 * sigma) * np.asarray(rho, dtype=float))


@dataclass
class DecayCertificate:
    """Samples ``(l, i, j, rho, |g_l(i, j)|, bound)`` and violations found."""

    filt: np.ndarray
    i: np.ndarray
    j: np.ndarray
    rho: np.ndarray
    abs_g: np.ndarray
    bound: np.ndarray
    kappa_source: str

    @property
    def margin(self) -> np.ndarray:
        return self.bound - self.abs_g

    @property
    def violations(self) -> int:
        return int((self.abs_g > self.bound + CERT_SLACK).sum())

    def worst_margin(self) -> float:
        return float(self.margin.min())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["filter", "i", "j", "rho", "abs_g", "bound"])
            for row in zip(self.filt, self.i, self.j, self.rho, self.abs_g, self.bound):
                w.writerow([int(row[0]), int(row[1]), int(row[2]), int(row[3]),
                            repr(float(row[4])), repr(float(row[5]))])


def decay_certificate(ls: LsSynthesis, growth: GrowthProfile, max_pairs: int | None = None,
                      seed: int = 0) -> DecayCertificate:
    """Check every entry of ``G0`` and ``G1`` against the decay bound.

    For graphs with more than 1000 vertices (or when ``max_pairs`` is set) a
    uniform random subsample of pairs is checked instead.
    """
    if ls.mode != "dense":
        raise ValueError("decay certificate needs dense mode")
    if ls.kappa <= 1.0:
        raise KappaOne("kappa == 1: the synthesis is banded and the certificate is vacuous")
    g = ls.graph
    n = g.n_vertices
    dist = g.all_pairs_distances()
    if max_pairs is None and n > 1000:
        max_pairs = 200_000
    if max_pairs is None or max_pairs >= n * n:
        ii, jj = np.divmod(np.arange(n * n), n)
    else:
        rng = np.random.default_rng(seed)
        ii, jj = rng.integers(0, n, max_pairs), rng.integers(0, n, max_pairs)
    rho = dist[ii, jj]
    parts = []
    for l, gl in enumerate((ls.g0, ls.g1)):
        parts.append((np.full(len(ii), l), ii, jj, rho, np.abs(gl[ii, jj]),
                      decay_bound(ls, growth, l, rho)))
    cols = [np.concatenate(c) for c in zip(*parts)]
    return DecayCertificate(*cols, kappa_source=ls.kappa_source)


def lp_bound(ls: LsSynthesis, growth: GrowthProfile, l: int) -> float:
    """Size-independent bound on ``||G_l||_{B_p}`` for every ``p``."""
    d, d1, k = growth.dimension, growth.density, ls.kappa
    sigma = ls.bank.bandwidth
    h_l = ls.bank.h0 if l == 0 else ls.bank.h1
    return (gamma(d + 1) * 2 ** d * d1 ** 2 * (sigma + 1) ** (2 * d) * k ** (d + 1)
            * (1 - 1 / k) ** -0.5 * ls.h_inv_norm * h_l.entry_bound())


def ls_error_bound(ls: LsSynthesis, growth: GrowthProfile, eps: float) -> float:
    """Output error bound for subband perturbations of size ``eps``."""
    d, d1, k = growth.dimension, growth.density, ls.kappa
    sigma = ls.bank.bandwidth
    return (gamma(d + 1) * 2 ** d * d1 ** 2 * (sigma + 1) ** (2 * d) * k ** (d + 1)
            * ls.h_inv_norm * (1 - 1 / k) ** -0.5
            * (ls.bank.h0.entry_bound() + ls.bank.h1.entry_bound()) * eps)


# --- contraction ---------------------------------------------------------

def contraction_factor(growth: GrowthProfile, sigma: int, kappa: float, r: int) -> float:
    """Per-iteration contraction factor of the distributed reconstruction.

    Returns 0 for ``kappa == 1`` (exact one-step recovery).
    """
    if sigma < 1:
        raise ValueError("sigma must be at least 1")
    if kappa <= 1.0:
        return 0.0
    d, d1 = growth.dimension, growth.density
    theta = theta_from_kappa(kappa)
    return (d1 ** 2 * (2 * sigma + 1) ** d * kappa ** 2 / (kappa - 1)
            * math.exp(-theta * r / (2 * sigma)) * (3 * r + 2 * sigma + 1) ** d)


def smallest_radius(growth: GrowthProfile, sigma: int, kappa: float, target: float = 1.0,
                    r_max: int = 10_000) -> int:
    """Smallest ``r >= 0`` whose contraction factor is below ``target``."""
    for r in range(r_max + 1):
        if contraction_factor(growth, sigma, kappa, r) < target:
            return r
    raise ValueError(f"no radius up to {r_max} reaches contraction {target}")
