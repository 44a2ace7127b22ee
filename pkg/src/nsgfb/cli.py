"""Command line interface (``nsgfb``)."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click

from . import io as nio
from .distributed import run_distributed
from .exceptions import NSGFBError
from .filterbank import check_assumptions, reconstruction_residual
from .graph import (coordinates_path, estimate_growth, generate_rgg, load_graph,
                    write_coordinates, write_edge_list, GrowthProfile)
from .pipelines import DenoiseConfig, ExperimentConfig, denoise, run_table_experiment
from .spectral import eigendecompose, frequency_responses
from .synthesis_ls import contraction_factor, decay_certificate, ls_synthesis_dense

logger = logging.getLogger("nsgfb")


def _fail(exc: Exception):
    raise click.ClickException(f"{type(exc).__name__}: {exc}")


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def main(verbose: int):
    """Nonsubsampled graph filter banks and distributed reconstruction."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


# --- graph ---------------------------------------------------------------

@main.group()
def graph():
    """Generate and inspect graphs."""


@graph.command("gen")
@click.option("--n", "n_vertices", type=int, required=True, help="Number of vertices.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--connect", type=click.Choice(["retry", "resample"]), default="retry",
              show_default=True, help="How to handle disconnected draws.")
@click.option("--max-retries", type=int, default=1000, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def graph_gen(n_vertices, seed, connect, max_retries, out):
    """Random geometric graph in the unit square (edges plus a coordinate sidecar)."""
    try:
        g = generate_rgg(n_vertices, seed, connect=connect, max_retries=max_retries)
    except (NSGFBError, ValueError) as exc:
        _fail(exc)
    write_edge_list(g, out)
    write_coordinates(g, coordinates_path(out))
    click.echo(f"N={g.n_vertices} E={g.n_edges} seed={g.seed}")


@graph.command("stats")
@click.argument("edges", type=click.Path(exists=True, dir_okay=False))
@click.option("--max-radius", type=int, default=10, show_default=True)
@click.option("--dim", type=float, default=2.0, show_default=True)
def graph_stats(edges, max_radius, dim):
    """Size, degrees and growth density of a graph."""
    try:
        g = load_graph(edges)
    except NSGFBError as exc:
        _fail(exc)
    prof = estimate_growth(g, max_radius, dimension=dim)
    deg = g.degrees
    click.echo(f"vertices {g.n_vertices}")
    click.echo(f"edges {g.n_edges}")
    click.echo(f"degree min {deg.min()} mean {deg.mean():.4f} max {deg.max()}")
    click.echo(f"dimension {prof.dimension:g}")
    click.echo(f"density {prof.density:.6f} (radius <= {prof.max_radius})")


# --- spectral ------------------------------------------------------------

@main.group()
def spectral():
    """Dense spectral diagnostics."""


@spectral.command("eig")
@click.argument("edges", type=click.Path(exists=True, dir_okay=False))
@click.option("--bank", "bank_path", type=click.Path(exists=True, dir_okay=False),
              help="Bank JSON; defaults to the order-1 spline bank.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def spectral_eig(edges, bank_path, out):
    """Frequency responses ``lambda,P0,P1,Q0,Q1`` on the Laplacian spectrum."""
    try:
        g = load_graph(edges)
        spec = nio.read_bank(bank_path) if bank_path else nio.BankSpec.spline(1)
        s = eigendecompose(g)
    except NSGFBError as exc:
        _fail(exc)
    polys = {"P0": spec.p0, "P1": spec.p1}
    if spec.q0 is not None:
        polys.update(Q0=spec.q0, Q1=spec.q1)
    nio.write_frequency_response(out, frequency_responses(s, polys))
    click.echo(f"wrote {g.n_vertices} eigenvalues to {out}")


# --- bank ----------------------------------------------------------------

@main.group()
def bank():
    """Design and check filter banks."""


_SYNTH = click.Choice(["lifted-bezout", "bezout", "least-squares"])


@bank.command("spline")
@click.argument("edges", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--n", "order", type=int, required=True, help="Spline order.")
@click.option("--synthesis", type=_SYNTH, default="lifted-bezout", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def bank_spline(edges, order, synthesis, out):
    """Spline bank of order n.  With EDGES the design is also checked on that graph."""
    if order < 1:
        _fail(ValueError("order must be at least 1"))
    spec = nio.BankSpec.spline(order, synthesis)
    if edges:
        try:
            check_assumptions(spec.analysis(load_graph(edges)))
        except NSGFBError as exc:
            _fail(exc)
    nio.write_bank(spec, out)
    click.echo(f"wrote {spec.name} ({synthesis}) to {out}")


def _coef_list(text: str) -> list[float]:
    return [float(c) for c in text.split(",") if c.strip()]


@bank.command("poly")
@click.option("--p0", required=True, help="Ascending coefficients, comma separated.")
@click.option("--p1", required=True, help="Ascending coefficients, comma separated.")
@click.option("--residual", default=None, help="Optional residual polynomial R.")
@click.option("--synthesis", type=_SYNTH, default="lifted-bezout", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def bank_poly(p0, p1, residual, synthesis, out):
    """General polynomial bank with Bezout or least-squares synthesis."""
    try:
        spec = nio.BankSpec.polynomial(_coef_list(p0), _coef_list(p1), synthesis,
                                       residual=_coef_list(residual) if residual else None)
    except (NSGFBError, ValueError) as exc:
        _fail(exc)
    nio.write_bank(spec, out)
    click.echo(f"wrote polynomial bank ({synthesis}) to {out}")


@bank.command("check")
@click.argument("bank_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("edges", type=click.Path(exists=True, dir_okay=False))
@click.option("--max-radius", type=int, default=None, help="Radius for the density estimate.")
def bank_check(bank_path, edges, max_radius):
    """Stability constants and perfect-reconstruction residual."""
    try:
        g = load_graph(edges)
        spec = nio.read_bank(bank_path)
        h = spec.analysis(g)
        growth = estimate_growth(g, max_radius)
        rep = check_assumptions(h, growth)
    except NSGFBError as exc:
        _fail(exc)
    for key in ("c2", "d2", "kappa", "theta", "lambda_min", "lambda_max", "bandwidth",
                "passes_constant", "blocks_constant", "kappa_source", "lp_lower", "lp_upper"):
        click.echo(f"{key} {getattr(rep, key)}")
    if spec.provenance == "least-squares":
        s = ls_synthesis_dense(h, rep).as_synthesis_bank()
    else:
        s = spec.synthesis(g, h)
    click.echo(f"pr_residual {reconstruction_residual(h, s):.3e}")


@bank.command("analyze")
@click.argument("bank_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("edges", type=click.Path(exists=True, dir_okay=False))
@click.option("--x", "x_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--z0", "z0_out", type=click.Path(dir_okay=False), required=True)
@click.option("--z1", "z1_out", type=click.Path(dir_okay=False), required=True)
def bank_analyze(bank_path, edges, x_path, z0_out, z1_out):
    """Write the two subbands of a signal."""
    try:
        g = load_graph(edges)
        h = nio.read_bank(bank_path).analysis(g)
        z0, z1 = h.analyze(nio.read_signal(x_path))
    except NSGFBError as exc:
        _fail(exc)
    nio.write_signal(z0, z0_out, "z0")
    nio.write_signal(z1, z1_out, "z1")


# --- least squares -------------------------------------------------------

@main.group()
def ls():
    """Least-squares synthesis diagnostics."""


@ls.command("certify")
@click.argument("bank_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("edges", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--max-pairs", type=int, default=None, help="Random subsample size.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dim", type=float, default=2.0, show_default=True)
def ls_certify(bank_path, edges, out, max_pairs, seed, dim):
    """Check every entry of the least-squares synthesis against its decay bound."""
    try:
        g = load_graph(edges)
        h = nio.read_bank(bank_path).analysis(g)
        cert = decay_certificate(ls_synthesis_dense(h), estimate_growth(g, dimension=dim),
                                 max_pairs=max_pairs, seed=seed)
    except NSGFBError as exc:
        _fail(exc)
    cert.to_csv(out)
    click.echo(f"pairs {len(cert.i)} violations {cert.violations} "
               f"worst_margin {cert.worst_margin():.3e} kappa_source {cert.kappa_source}")
    if cert.violations:
        raise SystemExit(1)


@ls.command("delta")
@click.option("--r", "radius", type=int, required=True)
@click.option("--sigma", type=int, required=True)
@click.option("--kappa", type=float, required=True)
@click.option("--d1", type=float, required=True, help="Growth density.")
@click.option("--dim", type=float, default=2.0, show_default=True)
def ls_delta(radius, sigma, kappa, d1, dim):
    """Contraction factor of the distributed iteration."""
    try:
        val = contraction_factor(GrowthProfile(dim, d1), sigma, kappa, radius)
    except ValueError as exc:
        _fail(exc)
    click.echo(repr(val))


# --- reconstruction and denoising ----------------------------------------

@main.command()
@click.argument("edges", type=click.Path(exists=True, dir_okay=False))
@click.argument("bank_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--r", "radius", type=int, required=True)
@click.option("--z0", "z0_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--z1", "z1_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--oracle", "oracle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--eps", type=float, default=1e-10, show_default=True)
@click.option("--max-iter", type=int, default=200, show_default=True)
@click.option("--mode", type=click.Choice(["centralized", "agents"]), default="centralized",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Trace CSV.")
@click.option("--x-out", type=click.Path(dir_okay=False), help="Write the reconstruction.")
def reconstruct(edges, bank_path, radius, z0_path, z1_path, oracle_path, eps, max_iter, mode,
                out, x_out):
    """Distributed least-squares reconstruction from two subbands."""
    try:
        g = load_graph(edges)
        h = nio.read_bank(bank_path).analysis(g)
        oracle = nio.read_signal(oracle_path) if oracle_path else None
        x, trace = run_distributed(h, g, radius, nio.read_signal(z0_path),
                                   nio.read_signal(z1_path), stop_eps=eps, max_iter=max_iter,
                                   oracle=oracle, mode=mode)
    except NSGFBError as exc:
        trace = getattr(exc, "trace", None)
        if trace is not None:
            trace.to_csv(out)
        _fail(exc)
    trace.to_csv(out)
    if x_out:
        nio.write_signal(x, x_out, "x")
    click.echo(f"iterations {trace.n_iter} converged {trace.converged}")


@main.command("denoise")
@click.argument("edges", type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "x_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--bank", "kind", type=click.Choice(["B", "L"]), default="B", show_default=True)
@click.option("--order", type=int, default=1, show_default=True)
@click.option("--tau", type=float, default=None, help="Threshold (default 3 * eta).")
@click.option("--eta", type=float, default=None, help="Noise level.")
@click.option("--r", "radius", type=int, default=2, show_default=True)
@click.option("--solver", type=click.Choice(["auto", "distributed", "oracle"]), default="auto",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def denoise_cmd(edges, x_path, kind, order, tau, eta, radius, solver, out):
    """Threshold the high-pass subband of a noisy signal and resynthesize."""
    if tau is None:
        if eta is None:
            raise click.UsageError("give --tau or --eta")
        tau = 3.0 * eta
    try:
        g = load_graph(edges)
        y = denoise(g, DenoiseConfig(kind, order, tau, radius, solver), nio.read_signal(x_path))
    except (NSGFBError, ValueError) as exc:
        _fail(exc)
    nio.write_signal(y, out, "x")


@main.command()
@click.option("--which", type=click.Choice(["2", "3", "4", "5", "6"]), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON experiment config; CLI options override it.")
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False),
              help="Edge list to use instead of a random geometric graph.")
@click.option("--labels", type=click.Path(exists=True, dir_okay=False),
              help="Block labels for the blockwise constant signal.")
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="CSV output.")
@click.option("--text", "text_out", type=click.Path(dir_okay=False),
              help="Aligned-text rendering (default: stdout).")
def table(which, config_path, graph_path, labels, trials, seed, out, text_out):
    """Reproduce a reconstruction (2, 3) or denoising (4, 5, 6) table."""
    which = int(which)
    overrides = {}
    if config_path:
        data = json.loads(Path(config_path).read_text())
        data.pop("which", None)
        overrides.update(data)
    if graph_path:
        overrides["graph"] = {"kind": "edges", "path": graph_path}
    if labels:
        overrides["signal"] = {"kind": "blockwise-constant", "labels_path": labels}
    if trials is not None:
        overrides["trials"] = trials
    if seed is not None:
        overrides["seed"] = seed
    try:
        cfg = ExperimentConfig.default(which, **overrides)
        res = run_table_experiment(cfg)
    except (NSGFBError, ValueError, TypeError) as exc:
        _fail(exc)
    res.to_csv(out)
    text = res.render()
    if text_out:
        Path(text_out).write_text(text)
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
