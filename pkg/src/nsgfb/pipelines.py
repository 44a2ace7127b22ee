"""Denoising, test signals and the table reproduction harness."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .distributed import run_distributed
from .exceptions import Diverged, MissingCoordinates, MissingLabels, ZeroReference
from .filterbank import (AnalysisBank, bezout_polynomials, spline_analysis, spline_polynomials,
                         subband_error_bound, bezout_synthesis_spline, lift)
from .graph import Graph, GrowthProfile, generate_rgg, load_graph
from .spectral import apply_polynomial

logger = logging.getLogger(__name__)

ORACLE_BELOW = 2000


# --- elementary operators ------------------------------------------------

def hard_threshold(z, tau: float):
    """``sgn(t) (|t| - tau)_+`` componentwise; exactly zero where ``|t| <= tau``."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def _norm(x, p, axis=0):
    if p in ("inf", math.inf):
        return np.abs(x).max(axis=axis)
    return np.linalg.norm(x, ord=p, axis=axis)


def snr(x_o, x_hat, p=2):
    """``20 log10(||x_o||_p / ||x_hat - x_o||_p)`` in dB.

    Works column-wise on ``(N, T)`` arrays.  An exact reconstruction gives
    ``+inf``.

    Raises
    ------
    ZeroReference
        if ``x_o`` is zero (in any column).
    """
    x_o = np.asarray(x_o, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    ref = np.atleast_1d(_norm(x_o, p))
    if np.any(ref == 0):
        raise ZeroReference("reference signal is zero")
    err = np.atleast_1d(_norm(x_hat - x_o, p))
    with np.errstate(divide="ignore"):
        out = 20.0 * np.log10(ref / err)
    return float(out[0]) if x_o.ndim == 1 else out


def trial_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for one trial, derived from the master seed and counters."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


@dataclass(frozen=True)
class NoiseModel:
    """Uniform noise on ``[-eta, eta]``."""

    eta: float
    seed: int = 0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")

    def sample(self, n: int, trials: int | None = None, key: int = 0) -> np.ndarray:
        """Noise of shape ``(n,)`` or ``(n, trials)``; column ``t`` uses its own stream."""
        cols = [trial_rng(self.seed, key, t).uniform(-self.eta, self.eta, n)
                for t in range(1 if trials is None else trials)]
        return cols[0] if trials is None else np.column_stack(cols)


# --- signals -------------------------------------------------------------

@dataclass(frozen=True)
class SignalSpec:
    """Recipe for a test signal.

    kind
        ``"blockwise-constant"`` (``labels`` maps vertices to blocks, or
        ``None`` for the synthetic three-block split),
        ``"blockwise-polynomial"`` (needs coordinates),
        ``"random-uniform"`` (``U[low, high]``, needs ``seed``) or
        ``"file"`` (``path`` to a signal CSV).
    strips
        ``"diagonal"`` bands of ``c_x + c_y`` or ``"vertical"`` bands of ``c_x``.
    """

    kind: str = "blockwise-polynomial"
    labels: tuple | None = None
    path: str | None = None
    strips: str = "diagonal"
    low: float = -1.0
    high: float = 1.0
    seed: int = 0


def _linear(cx, cy):
    return 0.5 - 2.0 * cx


def _quadratic(cx, cy):
    return 0.5 + cx ** 2 + cy ** 2


def blockwise_polynomial(coords: np.ndarray, strips: str = "diagonal") -> np.ndarray:
    """Four strips alternating ``0.5 - 2 c_x`` and ``0.5 + c_x^2 + c_y^2``.

    ``"vertical"`` cuts ``[0, 1]^2`` at ``c_x = 1/4, 1/2, 3/4`` starting with
    the linear piece.  ``"diagonal"`` cuts at ``c_x + c_y = 1/2, 1, 3/2``
    starting with the quadratic piece.
    """
    cx, cy = coords[:, 0], coords[:, 1]
    if strips == "vertical":
        band = np.clip(np.floor(4.0 * cx), 0, 3).astype(int)
        linear = band % 2 == 0
    elif strips == "diagonal":
        band = np.clip(np.floor(2.0 * (cx + cy)), 0, 3).astype(int)
        linear = band % 2 == 1
    else:
        raise ValueError(f"unknown strip geometry {strips!r}")
    return np.where(linear, _linear(cx, cy), _quadratic(cx, cy))


def three_blocks(g: Graph) -> np.ndarray:
    """Synthetic labels: two halves in breadth-first order plus one singleton.

    The search starts at the vertex farthest from vertex 0.  The first half
    gets label 0, the rest label 1, and the vertex three quarters of the way
    along the order gets label 2.
    """
    members, dist = g.distances(0)
    start = int(members[np.argmax(dist)])
    members, dist = g.distances(start)
    order = members[np.lexsort((members, dist))]
    labels = np.ones(g.n_vertices, dtype=int)
    labels[order[: g.n_vertices // 2]] = 0
    labels[order[(3 * g.n_vertices) // 4]] = 2
    return labels


def blockwise_constant(labels) -> np.ndarray:
    """``+1`` on even-ranked blocks and ``-1`` on odd-ranked ones."""
    labels = np.asarray(labels)
    rank = np.searchsorted(np.unique(labels), labels)
    return np.where(rank % 2 == 0, 1.0, -1.0)


def make_signal(g: Graph, spec: SignalSpec) -> np.ndarray:
    n = g.n_vertices
    if spec.kind == "blockwise-polynomial":
        if g.coords is None:
            raise MissingCoordinates("blockwise polynomial signal needs vertex coordinates")
        return blockwise_polynomial(g.coords, spec.strips)
    if spec.kind == "blockwise-constant":
        labels = spec.labels
        if labels is None:
            labels = g.meta.get("blocks")
        if labels is None:
            raise MissingLabels("blockwise constant signal needs block labels")
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise MissingLabels(f"expected {n} labels, got {labels.shape}")
        return blockwise_constant(labels)
    if spec.kind == "synthetic-blocks":
        return blockwise_constant(three_blocks(g))
    if spec.kind == "random-uniform":
        return trial_rng(spec.seed).uniform(spec.low, spec.high, n)
    if spec.kind == "file":
        from .io import read_signal
        x = read_signal(spec.path)
        if x.shape != (n,):
            raise ValueError(f"signal file has {x.shape[0]} entries, graph has {n}")
        return x
    raise ValueError(f"unknown signal kind {spec.kind!r}")


# --- denoising -----------------------------------------------------------

@dataclass(frozen=True)
class DenoiseConfig:
    """Denoiser settings.

    ``bank`` is ``"B"`` (Bezout synthesis) or ``"L"`` (least squares).  The
    least-squares output is computed with the distributed solver at radius
    ``radius`` (``solver="distributed"``), with a sparse direct solve
    (``"oracle"``), or by size (``"auto"``: oracle below 2000 vertices).
    """

    bank: str = "B"
    order: int = 1
    tau: float = 0.0
    radius: int = 2
    solver: str = "auto"
    stop_eps: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.bank not in ("B", "L"):
            raise ValueError(f"bank must be 'B' or 'L', got {self.bank!r}")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.order < 1:
            raise ValueError("order must be at least 1")

    @property
    def label(self) -> str:
        return f"NSGFB-{self.bank}{self.order}"


class Denoiser:
    """Threshold the high-pass subband and synthesize, reusing the bank."""

    def __init__(self, g: Graph, cfg: DenoiseConfig):
        self.graph = g
        self.cfg = cfg
        self.p0, self.p1 = spline_polynomials(cfg.order)
        self._bank: AnalysisBank | None = None
        self._lu = None
        if cfg.bank == "B":
            q0, q1 = bezout_polynomials(self.p0, self.p1)
            c = float(q1(0.0))
            # lifted pair; the lift is the identity for spline banks
            self.q0, self.q1 = (q0 + c * self.p1).trim(), (q1 - c * self.p0).trim()

    @property
    def bank(self) -> AnalysisBank:
        if self._bank is None:
            self._bank = spline_analysis(self.graph, self.cfg.order)
        return self._bank

    def analyze(self, x):
        g = self.graph
        return apply_polynomial(g, self.p0, x), apply_polynomial(g, self.p1, x)

    def synthesize(self, z0, z1):
        g, cfg = self.graph, self.cfg
        if cfg.bank == "B":
            return apply_polynomial(g, self.q0, z0) + apply_polynomial(g, self.q1, z1)
        solver = cfg.solver
        if solver == "auto":
            solver = "oracle" if g.n_vertices < ORACLE_BELOW else "distributed"
        if solver == "oracle":
            if self._lu is None:
                self._lu = splu(sp.csc_matrix(self.bank.gram()))
            rhs = self.bank.h0.T @ z0 + self.bank.h1.T @ z1
            return self._lu.solve(np.asarray(rhs, dtype=float))
        if solver != "distributed":
            raise ValueError(f"unknown solver {solver!r}")
        x, trace = run_distributed(self.bank, g, cfg.radius, z0, z1, stop_eps=cfg.stop_eps,
                                   max_iter=cfg.max_iter)
        if not trace.converged:
            logger.warning("distributed synthesis stopped after %d iterations", trace.n_iter)
        return x

    def __call__(self, x_noisy):
        z0, z1 = self.analyze(np.asarray(x_noisy, dtype=float))
        return self.synthesize(z0, hard_threshold(z1, self.cfg.tau))


def denoise(g: Graph, cfg: DenoiseConfig, x_noisy) -> np.ndarray:
    """Keep the low-pass subband, threshold the high-pass one, resynthesize."""
    return Denoiser(g, cfg)(x_noisy)


def bezout_denoise_bound(g: Graph, order: int, growth: GrowthProfile, eta: float,
                         tau: float) -> float:
    """Bound on ``||x_tilde - x_o||_inf`` for the Bezout denoiser.

    The output equals the noisy input plus ``G1`` applied to the threshold
    residual, which is at most ``tau`` per vertex.
    """
    s = lift(bezout_synthesis_spline(g, order), spline_analysis(g, order))
    return eta + subband_error_bound(s, growth, tau)


# --- experiments ---------------------------------------------------------

DEFAULT_ETAS = [1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0]

_TABLE_DEFAULTS = {
    2: dict(orders=[1, 2], radii=[0, 1, 2, 3, 4, 6],
            iterations={"1": [1, 2, 3, 4, 5, 10], "2": [1, 2, 3, 4, 5, 7, 10, 14]},
            graph={"kind": "edges", "path": None}),
    3: dict(orders=[1, 2], radii=[0, 1, 2, 3, 4, 5],
            iterations={"1": [1, 2, 3, 4, 10, 19], "2": [1, 2, 3, 4, 5, 8]}),
    4: dict(metric="2", signal={"kind": "synthetic-blocks"},
            graph={"kind": "edges", "path": None}),
    5: dict(metric="2"),
    6: dict(metric="inf"),
}


@dataclass
class ExperimentConfig:
    """Everything that determines a table run.  Serialized as JSON."""

    which: int = 3
    graph: dict = field(default_factory=lambda: {"kind": "rgg", "n_vertices": 4096, "seed": 0,
                                                  "connect": "resample"})
    orders: list = field(default_factory=lambda: [1, 2])
    radii: list = field(default_factory=lambda: [0, 1, 2])
    iterations: dict = field(default_factory=dict)
    etas: list = field(default_factory=lambda: list(DEFAULT_ETAS))
    tau_factor: float = 3.0
    banks: list = field(default_factory=lambda: ["B1", "B2", "L1", "L2"])
    radius: int = 2
    solver: str = "auto"
    metric: str = "2"
    signal: dict = field(default_factory=lambda: {"kind": "blockwise-polynomial",
                                                  "strips": "diagonal"})
    trials: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.which not in (2, 3, 4, 5, 6):
            raise ValueError(f"table must be one of 2..6, got {self.which}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    @classmethod
    def default(cls, which: int, **overrides) -> "ExperimentConfig":
        base = {"which": which, **_TABLE_DEFAULTS[which]}
        if "graph" in base and "graph" in overrides:
            base["graph"] = {**base["graph"], **overrides.pop("graph")}
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        which = data.pop("which")
        return cls.default(which, **data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def build_graph(spec: dict) -> Graph:
    kind = spec.get("kind", "rgg")
    if kind == "rgg":
        return generate_rgg(int(spec.get("n_vertices", 4096)), int(spec.get("seed", 0)),
                            connect=spec.get("connect", "resample"))
    if kind == "edges":
        if not spec.get("path"):
            raise ValueError("graph spec of kind 'edges' needs a 'path'")
        return load_graph(spec["path"], spec.get("coords"))
    raise ValueError(f"unknown graph kind {kind!r}")


def _signal_spec(cfg: ExperimentConfig) -> SignalSpec:
    sig = dict(cfg.signal)
    labels = sig.pop("labels_path", None)
    spec = SignalSpec(**sig)
    if labels:
        from .io import read_labels
        spec = SignalSpec(**{**sig, "kind": "blockwise-constant",
                             "labels": tuple(read_labels(labels))})
    return spec


def _eta_label(eta: float) -> str:
    return str(Fraction(eta).limit_denominator(1024))


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6g}"


@dataclass
class TableResult:
    """Rows of a reproduced table plus a text rendering."""

    which: int
    header: list
    rows: list
    meta: dict = field(default_factory=dict)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def render(self) -> str:
        cells = [self.header] + [[_fmt(v) if isinstance(v, float) else str(v) for v in row]
                                 for row in self.rows]
        widths = [max(len(str(r[c])) for r in cells) for c in range(len(self.header))]
        lines = ["  ".join(str(v).rjust(w) for v, w in zip(r, widths)) for r in cells]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def _reconstruction_table(cfg: ExperimentConfig, g: Graph) -> TableResult:
    n = g.n_vertices
    x = np.column_stack([trial_rng(cfg.seed, t).uniform(-1.0, 1.0, n)
                         for t in range(cfg.trials)])
    rows = []
    for order in cfg.orders:
        iters = [int(m) for m in cfg.iterations.get(str(order), [1, 2, 3, 4, 5])]
        bank = spline_analysis(g, order)
        z0, z1 = bank.analyze(x)
        for r in cfg.radii:
            try:
                _, trace = run_distributed(bank, g, r, z0, z1, stop_eps=0.0,
                                           max_iter=max(iters), oracle=x, blowup=None)
            except Diverged as exc:
                trace = exc.trace
            errs = trace.mean_errors("inf")
            for m in iters:
                # an exact hit ends the run early; later errors stay at that value
                e = float(errs[min(m, len(errs)) - 1])
                rows.append([order, m, r, e])
    return TableResult(cfg.which, ["n", "m", "r", "E"], rows,
                       meta={"vertices": n, "graph_seed": g.seed})


def _denoise_table(cfg: ExperimentConfig, g: Graph) -> TableResult:
    n = g.n_vertices
    x_o = make_signal(g, _signal_spec(cfg))
    p = math.inf if cfg.metric in ("inf", "Inf") else int(cfg.metric)
    denoisers = {}
    for name in cfg.banks:
        kind, order = name[0], int(name[1:])
        denoisers[name] = (kind, order)
    header = ["eta", "input"] + [f"NSGFB-{b}" for b in cfg.banks]
    rows = []
    cache: dict = {}
    for e_idx, eta in enumerate(cfg.etas):
        noise = NoiseModel(eta, cfg.seed).sample(n, cfg.trials, key=e_idx)
        x = x_o[:, None] + noise
        ref = np.repeat(x_o[:, None], cfg.trials, axis=1)
        row = [_eta_label(eta), float(np.mean(snr(ref, x, p)))]
        for name in cfg.banks:
            kind, order = denoisers[name]
            key = (kind, order)
            if key not in cache:
                cache[key] = Denoiser(g, DenoiseConfig(kind, order, 0.0, cfg.radius, cfg.solver))
            d = cache[key]
            d.cfg = DenoiseConfig(kind, order, cfg.tau_factor * eta, cfg.radius, cfg.solver)
            row.append(float(np.mean(snr(ref, d(x), p))))
        rows.append(row)
    return TableResult(cfg.which, header, rows,
                       meta={"vertices": n, "graph_seed": g.seed, "metric": cfg.metric,
                             "strips": cfg.signal.get("strips")})


def run_table_experiment(cfg: ExperimentConfig, g: Graph | None = None) -> TableResult:
    """Reproduce one of the reconstruction (2, 3) or denoising (4, 5, 6) tables."""
    if g is None:
        g = build_graph(cfg.graph)
    if cfg.which in (2, 3):
        return _reconstruction_table(cfg, g)
    return _denoise_table(cfg, g)
