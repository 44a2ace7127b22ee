"""Analysis banks, Bezout synthesis banks, lifting and stability checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import Polynomial
from scipy.special import comb, gamma

from .exceptions import CommonRoot, Degenerate, NotPositiveDefinite
from .graph import Graph, GrowthProfile
from .spectral import (DENSE_CEILING, GraphFilter, as_polynomial, eigendecompose,
                       materialize_polynomial, schur_norm)

RESULTANT_TOL = 1e-12
PR_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class AnalysisBank:
    """Low-pass/high-pass analysis pair ``(H0, H1)``."""

    h0: GraphFilter
    h1: GraphFilter
    polynomials: tuple[Polynomial, Polynomial] | None = None
    name: str = "custom"

    @property
    def graph(self) -> Graph:
        return self.h0.graph

    @property
    def bandwidth(self) -> int | None:
        b0, b1 = self.h0.bandwidth, self.h1.bandwidth
        if b0 is None or b1 is None:
            return None
        return max(b0, b1)

    def gram(self) -> sp.csr_matrix:
        """``H = H0^T H0 + H1^T H1`` (sparse, bandwidth ``2 sigma``)."""
        h0, h1 = self.h0.matrix, self.h1.matrix
        gram = h0.T @ h0 + h1.T @ h1
        if sp.issparse(gram):
            gram = sp.csr_matrix(gram)
            gram.sort_indices()
        return gram

    def analyze(self, x):
        return self.h0 @ x, self.h1 @ x


@dataclass(frozen=True, eq=False)
class SynthesisBank:
    """Synthesis pair ``(G0, G1)`` with its design provenance.

    ``provenance`` is one of ``"bezout"``, ``"lifted-bezout"`` or
    ``"least-squares"``.
    """

    g0: GraphFilter
    g1: GraphFilter
    provenance: str
    polynomials: tuple[Polynomial, Polynomial] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def bandwidth(self) -> int | None:
        b0, b1 = self.g0.bandwidth, self.g1.bandwidth
        if b0 is None or b1 is None:
            return None
        return max(b0, b1)

    def synthesize(self, z0, z1):
        return self.g0 @ z0 + self.g1 @ z1


def reconstruction_residual(h: AnalysisBank, s: SynthesisBank) -> float:
    """``max |G0 H0 + G1 H1 - I|`` on the materialized matrices."""
    prod = s.g0.matrix @ h.h0.matrix + s.g1.matrix @ h.h1.matrix
    prod = prod.toarray() if sp.issparse(prod) else np.asarray(prod)
    return float(np.abs(prod - np.eye(prod.shape[0])).max())


# --- analysis banks ------------------------------------------------------

def spline_polynomials(n: int) -> tuple[Polynomial, Polynomial]:
    """``((1 - t/2)^n, (t/2)^n)``."""
    if n < 1:
        raise ValueError("spline order must be at least 1")
    return Polynomial([1.0, -0.5]) ** n, Polynomial([0.0, 0.5]) ** n


def polynomial_analysis(g: Graph, p0, p1, name: str = "polynomial") -> AnalysisBank:
    p0, p1 = as_polynomial(p0), as_polynomial(p1)
    return AnalysisBank(materialize_polynomial(g, p0), materialize_polynomial(g, p1),
                        polynomials=(p0, p1), name=name)


def spline_analysis(g: Graph, n: int) -> AnalysisBank:
    """Spline analysis bank of order ``n`` (bandwidth ``n``)."""
    p0, p1 = spline_polynomials(n)
    return polynomial_analysis(g, p0, p1, name=f"spline-{n}")


# --- Bezout synthesis ----------------------------------------------------

def spline_bezout_polynomials(n: int) -> tuple[Polynomial, Polynomial]:
    """Closed-form Bezout pair for the order-``n`` spline bank."""
    if n < 1:
        raise ValueError("spline order must be at least 1")
    u = Polynomial([0.0, 0.5])
    w = Polynomial([1.0, -0.5])
    top = comb(2 * n - 1, n - 1, exact=True)
    q0 = sum(comb(2 * n - 1, l, exact=True) * w ** (n - 1 - l) * u ** l for l in range(n))
    q1 = sum(comb(2 * n - 1, l, exact=True) * u ** (n - 1 - l) * w ** l for l in range(n))
    return (q0 + top * u ** n).trim(), (q1 - top * w ** n).trim()


def _sylvester(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Matrix ``S`` with ``S @ [a; b]`` = coefficients of ``p0 a + p1 b``.

    ``a`` has ``deg p1`` coefficients and ``b`` has ``deg p0``; all vectors
    are in ascending degree.
    """
    n0, n1 = len(p0) - 1, len(p1) - 1
    size = n0 + n1
    s = np.zeros((size, size))
    for k in range(n1):
        s[k:k + n0 + 1, k] = p0
    for k in range(n0):
        s[k:k + n1 + 1, n1 + k] = p1
    return s


def bezout_polynomials(p0, p1, residual=None) -> tuple[Polynomial, Polynomial]:
    """Solve ``P0 Q0 + P1 Q1 = 1`` for polynomials.

    The returned pair is the one with ``Q1(0) = 0``, ``deg Q0 <= deg P1``
    and ``deg Q1 <= deg P0``; it also has ``Q0(0) = 1`` whenever
    ``P0(0) = 1`` and ``P1(0) = 0``.  A ``residual`` polynomial ``R`` moves
    along the solution family ``(Q0 + R P1, Q1 - R P0)``.

    Raises
    ------
    Degenerate
        if either polynomial is identically zero.
    CommonRoot
        if the normalized resultant vanishes.
    """
    p0, p1 = as_polynomial(p0), as_polynomial(p1)
    if not np.any(p0.coef) or not np.any(p1.coef):
        raise Degenerate("analysis polynomials must be nonzero")
    c0 = p0.coef / np.abs(p0.coef).max()
    c1 = p1.coef / np.abs(p1.coef).max()
    n0, n1 = len(c0) - 1, len(c1) - 1
    if n0 + n1 == 0:
        q0, q1 = Polynomial([1.0 / p0.coef[0]]), Polynomial([0.0])
    else:
        syl = _sylvester(c0, c1)
        res = np.linalg.det(syl)
        if abs(res) < RESULTANT_TOL:
            raise CommonRoot(f"resultant {res:.3e} below {RESULTANT_TOL:g}")
        rhs = np.zeros(n0 + n1)
        rhs[0] = 1.0
        sol = np.linalg.solve(syl, rhs)
        # undo the coefficient scaling
        q0 = Polynomial(sol[:n1] / np.abs(p0.coef).max()) if n1 else Polynomial([0.0])
        q1 = Polynomial(sol[n1:] / np.abs(p1.coef).max()) if n0 else Polynomial([0.0])
        if p0(0.0) != 0.0:
            shift = q1(0.0) / p0(0.0)
            q0, q1 = q0 + shift * p1, q1 - shift * p0
            q1 = Polynomial(np.concatenate([[0.0], q1.coef[1:]]))
    if residual is not None:
        r = as_polynomial(residual)
        q0, q1 = q0 + r * p1, q1 - r * p0
    return q0.trim(), q1.trim()


def _bezout_bank(g: Graph, q0, q1, provenance="bezout", **meta) -> SynthesisBank:
    return SynthesisBank(materialize_polynomial(g, q0), materialize_polynomial(g, q1),
                         provenance=provenance, polynomials=(q0, q1), meta=meta)


def bezout_synthesis_spline(g: Graph, n: int) -> SynthesisBank:
    q0, q1 = spline_bezout_polynomials(n)
    return _bezout_bank(g, q0, q1, order=n)


def bezout_synthesis_general(p0, p1, g: Graph, residual=None) -> SynthesisBank:
    q0, q1 = bezout_polynomials(p0, p1, residual=residual)
    return _bezout_bank(g, q0, q1)


def lift(bank: SynthesisBank, h: AnalysisBank) -> SynthesisBank:
    """Lift so that ``G1`` blocks the normalized constant signal.

    ``G0 + Q1(0) H1`` and ``G1 - Q1(0) H0``; perfect reconstruction is kept.
    """
    if bank.polynomials is None:
        raise ValueError("lifting needs a polynomial synthesis bank")
    q0, q1 = bank.polynomials
    c = float(q1(0.0))
    if c == 0.0:
        return replace(bank, provenance="lifted-bezout")
    g = h.graph
    g0 = GraphFilter(g, bank.g0.matrix + c * h.h1.matrix,
                     _max_band(bank.g0.bandwidth, h.h1.bandwidth))
    g1 = GraphFilter(g, bank.g1.matrix - c * h.h0.matrix,
                     _max_band(bank.g1.bandwidth, h.h0.bandwidth))
    polys = None
    if h.polynomials is not None:
        polys = ((q0 + c * h.polynomials[1]).trim(), (q1 - c * h.polynomials[0]).trim())
    return SynthesisBank(g0, g1, "lifted-bezout", polynomials=polys,
                         meta={**bank.meta, "lift": c})


def _max_band(a, b):
    return None if a is None or b is None else max(a, b)


# --- stability -----------------------------------------------------------

@dataclass(frozen=True)
class StabilityReport:
    """Frame bounds of an analysis bank.

    ``c2`` and ``d2`` are the optimal l2 stability bounds.  ``lp_lower`` and
    ``lp_upper`` are certified bounds valid for every ``1 <= p <= inf``;
    they are not claimed to be optimal.
    """

    c2: float
    d2: float
    kappa: float
    theta: float
    lambda_min: float
    lambda_max: float
    h_inv_norm: float
    bandwidth: int | None
    schur_bounds: dict
    entry_bounds: dict
    passes_constant: bool
    blocks_constant: bool
    kappa_source: str
    lp_lower: float | None = None
    lp_upper: float | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def theta_from_kappa(kappa: float) -> float:
    """``ln(kappa / (kappa - 1))``; infinite when ``kappa == 1``."""
    if kappa <= 1.0:
        return math.inf
    return math.log(kappa / (kappa - 1.0))


def gram_extremes(h: AnalysisBank, ceiling: int = DENSE_CEILING,
                  rtol: float = 1e-6) -> tuple[float, float, str]:
    """Smallest and largest eigenvalue of ``H = H0^T H0 + H1^T H1``."""
    g = h.graph
    n = g.n_vertices
    if n <= ceiling:
        if h.polynomials is not None:
            lam = eigendecompose(g, ceiling).eigenvalues
            p0, p1 = h.polynomials
            vals = p0(lam) ** 2 + p1(lam) ** 2
            return float(vals.min()), float(vals.max()), "spectrum"
        gram = h.gram()
        gram = gram.toarray() if sp.issparse(gram) else np.asarray(gram)
        vals = np.linalg.eigvalsh(gram)
        return float(vals[0]), float(vals[-1]), "dense"
    from scipy.sparse.linalg import eigsh
    gram = sp.csr_matrix(h.gram())
    maxiter = 10 * n
    top = float(eigsh(gram, k=1, which="LA", tol=rtol, maxiter=maxiter,
                      return_eigenvectors=False)[0])
    shifted = top * sp.identity(n, format="csr") - gram
    low = top - float(eigsh(shifted, k=1, which="LA", tol=rtol, maxiter=maxiter,
                            return_eigenvectors=False)[0])
    return low, top, "lanczos"


def check_assumptions(h: AnalysisBank, growth: GrowthProfile | None = None,
                      ceiling: int = DENSE_CEILING, tol: float = 1e-9) -> StabilityReport:
    """Verify the analysis-bank assumptions and report stability constants.

    Raises
    ------
    NotPositiveDefinite
        if ``H0^T H0 + H1^T H1`` is singular.
    """
    g = h.graph
    lo, hi, source = gram_extremes(h, ceiling)
    if lo <= tol * max(hi, 1.0):
        raise NotPositiveDefinite(f"smallest eigenvalue of H is {lo:.3e}")
    kappa = hi / lo
    if abs(kappa - 1.0) < 1e-12:
        kappa = 1.0
    theta = theta_from_kappa(kappa)
    s = g.sqrt_degrees()
    scale = np.abs(s).max()
    passes = bool(np.abs(h.h0 @ s - s).max() <= 1e-9 * scale)
    blocks = bool(np.abs(h.h1 @ s).max() <= 1e-9 * scale)
    lp_lower = lp_upper = None
    sigma = h.bandwidth
    if growth is not None and sigma is not None:
        d, d1 = growth.dimension, growth.density
        lp_upper = 2.0 * d1 * (sigma + 1) ** d * math.sqrt(hi)
        lp_lower = math.sqrt(hi) / (gamma(d + 1) * 2 ** (d + 1) * d1 ** 2
                                    * (sigma + 1) ** (2 * d) * kappa ** (d + 2))
    return StabilityReport(
        c2=math.sqrt(lo), d2=math.sqrt(hi), kappa=kappa, theta=theta,
        lambda_min=lo, lambda_max=hi, h_inv_norm=1.0 / lo, bandwidth=sigma,
        schur_bounds={"h0": schur_norm(h.h0), "h1": schur_norm(h.h1)},
        entry_bounds={"h0": h.h0.entry_bound(), "h1": h.h1.entry_bound()},
        passes_constant=passes, blocks_constant=blocks, kappa_source=source,
        lp_lower=lp_lower, lp_upper=lp_upper,
    )


def subband_error_bound(s: SynthesisBank, growth: GrowthProfile, eps: float) -> float:
    """Worst-case output error for subband perturbations of size ``eps``."""
    band = s.bandwidth
    if band is None:
        raise ValueError("bound needs a finite synthesis bandwidth")
    return (growth.density * (band + 1) ** growth.dimension
            * (s.g0.entry_bound() + s.g1.entry_bound()) * eps)
