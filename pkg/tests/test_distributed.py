import numpy as np
import pytest

from nsgfb.distributed import (IterationTrace, Router, build_agents, jacobi_reference,
                               local_solve, patch, residual_check, run_distributed,
                               verify_contraction)
from nsgfb.exceptions import BoundViolated, DimensionMismatch, Diverged
from nsgfb.filterbank import spline_analysis
from nsgfb.graph import geodesic_ball


@pytest.fixture
def bank64(rgg64):
    return spline_analysis(rgg64, 1)


def subbands(h, rng, t=None):
    x = rng.standard_normal(h.graph.n_vertices if t is None else (h.graph.n_vertices, t))
    z0, z1 = h.analyze(x)
    return x, z0, z1


def test_first_update_is_patched_local_solutions(bank64, rgg64, rng):
    _, z0, z1 = subbands(bank64, rng)
    r = 1
    locs = {k: local_solve(bank64, rgg64, k, r, z0, z1) for k in range(64)}
    expect = patch(rgg64, r, locs)
    x, trace = run_distributed(bank64, rgg64, r, z0, z1, max_iter=1)
    assert np.abs(x - expect).max() < 1e-12


def test_local_solve_support(bank64, rgg64, rng):
    _, z0, z1 = subbands(bank64, rng)
    u = local_solve(bank64, rgg64, 5, 1, z0, z1)
    outside = np.setdiff1d(np.arange(64), geodesic_ball(rgg64, 5, 2).members)
    assert (u[outside] == 0).all()


def test_converges_to_signal(bank64, rng):
    x, z0, z1 = subbands(bank64, rng)
    xr, trace = run_distributed(bank64, None, 2, z0, z1, oracle=x, max_iter=500)
    assert trace.converged
    assert np.abs(xr - x).max() < 1e-8
    errs = trace.mean_errors("inf")
    assert errs[-1] < errs[0]


def test_whole_graph_radius_is_one_step(bank64, rgg64, rng):
    x, z0, z1 = subbands(bank64, rng)
    xr, trace = run_distributed(bank64, rgg64, rgg64.diameter(), z0, z1, oracle=x)
    assert trace.n_iter <= 2
    assert np.abs(xr - x).max() < 1e-10


def test_agents_bit_identical_to_centralized(bank64, rgg64, rng):
    x, z0, z1 = subbands(bank64, rng, t=3)
    a, ta = run_distributed(bank64, rgg64, 1, z0, z1, oracle=x, max_iter=15, mode="centralized")
    b, tb = run_distributed(bank64, rgg64, 1, z0, z1, oracle=x, max_iter=15, mode="agents")
    assert np.array_equal(a, b)
    assert ta.update_inf == tb.update_inf
    assert ta.msgs == tb.msgs


def test_block_columns_match_single_runs(bank64, rng):
    x, z0, z1 = subbands(bank64, rng, t=2)
    block, _ = run_distributed(bank64, None, 1, z0, z1, max_iter=10, stop_eps=0)
    for j in range(2):
        single, _ = run_distributed(bank64, None, 1, z0[:, j], z1[:, j], max_iter=10,
                                    stop_eps=0)
        assert np.allclose(block[:, j], single, atol=1e-14)


def test_residual_identity(bank64, rng):
    x, z0, z1 = subbands(bank64, rng)
    assert residual_check(bank64, 1, z0, z1, x) < 1e-12


def test_jacobi_at_radius_zero(bank64, rng):
    _, z0, z1 = subbands(bank64, rng)
    b = bank64.h0.T @ z0 + bank64.h1.T @ z1
    ref = jacobi_reference(bank64.gram(), b, 8)
    _, trace = run_distributed(bank64, None, 0, z0, z1, max_iter=8, stop_eps=0, blowup=None)
    for m in range(1, 9):
        xm, _ = run_distributed(bank64, None, 0, z0, z1, max_iter=m, stop_eps=0, blowup=None)
        assert np.abs(xm - ref[m - 1]).max() <= 1e-12 * max(1.0, np.abs(ref[m - 1]).max())
    assert trace.n_iter == 8


def test_divergence_raises_with_trace(rgg64, rng):
    h = spline_analysis(rgg64, 3)
    x, z0, z1 = subbands(h, rng)
    with pytest.raises(Diverged) as info:
        run_distributed(h, None, 0, z0, z1, oracle=x, max_iter=300, blowup=10.0)
    assert info.value.trace.diverged
    assert info.value.trace.n_iter > 1


def test_argument_checks(bank64, rgg256, rng):
    _, z0, z1 = subbands(bank64, rng)
    with pytest.raises(ValueError):
        run_distributed(bank64, rgg256, 1, z0, z1)
    with pytest.raises(ValueError):
        run_distributed(bank64, None, -1, z0, z1)
    with pytest.raises(DimensionMismatch):
        run_distributed(bank64, None, 1, z0[:10], z1)
    with pytest.raises(ValueError):
        run_distributed(bank64, None, 1, z0, z1, mode="gossip")


def test_router_refuses_far_messages(bank64):
    s = build_agents(bank64, 1, with_wide=True)
    router = Router({a.vertex: a.ball_outer for a in s.agents})
    far = np.setdiff1d(np.arange(64), s.agents[0].ball_outer)
    assert len(far)
    with pytest.raises(RuntimeError):
        router.broadcast(0, far[:1], [1.0], s.agents, "x")


def test_agent_gain_rows_cover_r_ball(bank64):
    s = build_agents(bank64, 2)
    for a in s.agents[:5]:
        assert a.gain0.shape == (len(a.ball_r), len(a.ball_wide))
        assert set(a.ball_r) <= set(a.ball_2r) <= set(a.ball_wide) <= set(a.ball_outer)


def test_trace_csv(tmp_path, bank64, rng):
    x, z0, z1 = subbands(bank64, rng)
    _, trace = run_distributed(bank64, None, 1, z0, z1, oracle=x, max_iter=3, stop_eps=0)
    f = tmp_path / "trace.csv"
    trace.to_csv(f)
    lines = f.read_text().splitlines()
    assert lines[0] == "iter,rel_err_inf,rel_err_2,update_inf,msgs"
    assert len(lines) == 4
    assert lines[1].startswith("1,")


def test_verify_contraction_paths():
    t = IterationTrace(update_inf=[0.5], err_inf=[np.array([0.4])], err_2=[np.array([0.4])],
                       msgs=[1], oracle_norm_inf=np.array([1.0]), oracle_norm_2=np.array([1.0]))
    assert verify_contraction(t, 0.5).checked
    assert not verify_contraction(t, 1.2).checked
    with pytest.raises(BoundViolated):
        verify_contraction(t, 0.3)
