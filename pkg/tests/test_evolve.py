import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgl_dg.assembly import IPVariant, assemble_frozen_reaction
from cgl_dg.evolve import (
    ConfigError,
    Operators,
    RunConfig,
    energy_bound_holds,
    energy_monitor,
    run,
    step,
    time_levels,
)
from cgl_dg.mms import initial_fields


def test_defaults_and_derived():
    cfg = RunConfig()
    assert cfg.variant is IPVariant.NIPG
    assert cfg.h == pytest.approx(math.sqrt(2) / 6)
    assert cfg.dt == pytest.approx(2 * cfg.h**2)
    assert time_levels(cfg.T, cfg.dt).size == 10


@pytest.mark.parametrize("n,steps", [(6, 9), (12, 36), (24, 144)])
def test_step_counts(n, steps):
    cfg = RunConfig(n=n)
    t = time_levels(cfg.T, cfg.dt)
    assert t.size == steps + 1 and t[-1] == 1.0


def test_time_levels_short_tail():
    t = time_levels(1.0, 0.3)
    np.testing.assert_allclose(t, [0, 0.3, 0.6, 0.9, 1.0])
    assert time_levels(0.0, 0.1).tolist() == [0.0]


@pytest.mark.parametrize("key,value", [("sigma", 0.0), ("sigma", -1.0), ("a", -1.0), ("n", 0),
                                       ("dt_factor", 0.0), ("picard_tol", 0.0), ("solver", "qr"),
                                       ("sigma", float("nan"))])
def test_invalid_values_name_the_key(key, value):
    with pytest.raises(ConfigError) as info:
        RunConfig(**{key: value})
    assert info.value.key == key
    assert key in str(info.value)


def test_from_mapping():
    cfg = RunConfig.from_mapping({"a": "1e-5", "variant": "sipg", "n": "12", "sigma": "1000"})
    assert (cfg.a, cfg.variant, cfg.n, cfg.sigma) == (1e-5, IPVariant.SIPG, 12, 1000.0)
    with pytest.raises(ConfigError) as info:
        RunConfig.from_mapping({"sigma": "abc"})
    assert info.value.key == "sigma"
    with pytest.raises(ConfigError) as info:
        RunConfig.from_mapping({"penalty": "1"})
    assert info.value.key == "penalty"
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"n": "6.5"})
    assert RunConfig.from_mapping(cfg.as_dict()) == cfg


def test_dt_larger_than_T_rejected():
    with pytest.raises(ConfigError) as info:
        RunConfig(n=1, T=0.5)
    assert info.value.key == "dt_factor"


def test_linear_limit_step():
    # tiny data and no forcing: the cubic term is negligible and one step is a linear solve
    cfg = RunConfig(a=0.3, b=0.7, sigma=10.0, n=3, T=0.1, dt_factor=0.2)
    ops = Operators.build(cfg, forcing=False)
    rng = np.random.default_rng(0)
    scale = 1e-7
    u1, u2 = scale * rng.standard_normal((2, ops.space.total_dofs))
    res = step(u1, u2, cfg.dt, cfg.dt, cfg, ops)
    M, A = ops.M.toarray(), ops.A.toarray()
    Z = M / cfg.dt + A - M + 1j * cfg.a * A
    ref = np.linalg.solve(Z, M @ (u1 + 1j * u2) / cfg.dt)
    np.testing.assert_allclose(res.u1 + 1j * res.u2, ref, atol=1e-9 * np.abs(ref).max())
    assert res.converged and res.picard_iters <= 3


def test_picard_fixed_point():
    cfg = RunConfig(a=0.5, b=0.5, sigma=1e3, n=4, T=0.2, dt_factor=0.4, picard_tol=1e-12)
    ops = Operators.build(cfg)
    u1, u2 = initial_fields(ops.space)
    res = step(u1, u2, cfg.dt, cfg.dt, cfg, ops)
    assert res.converged
    N = assemble_frozen_reaction(ops.space, res.u1, res.u2)
    M, A = ops.M, ops.A
    D = M / cfg.dt + A - M + N
    C = cfg.a * A + cfg.b * N
    L1, L2 = ops.loads(cfg, cfg.dt)
    r1 = M @ u1 / cfg.dt + L1
    r2 = M @ u2 / cfg.dt + L2
    res1 = D @ res.u1 - C @ res.u2 - r1
    res2 = C @ res.u1 + D @ res.u2 - r2
    scale = np.abs(np.concatenate([r1, r2])).max()
    assert np.abs(np.concatenate([res1, res2])).max() < 1e-8 * scale


def test_zero_state_stays_zero():
    cfg = RunConfig(n=2, T=0.5, sigma=10.0, dt_factor=0.2)
    z = np.zeros(2 * cfg.n**2 * 3)
    traj = run(cfg, initial=(z, z), forcing=False)
    assert all(r.norm_u1 == 0 and r.norm_u2 == 0 for r in traj.records)


def test_deterministic():
    cfg = RunConfig(n=4, a=0.2, b=0.3, sigma=1e3, T=0.3)
    a = run(cfg)
    b = run(cfg)
    np.testing.assert_array_equal(a.final[0], b.final[0])
    np.testing.assert_array_equal(a.final[1], b.final[1])
    assert [r.picard_iters for r in a.records] == [r.picard_iters for r in b.records]


def test_first_order_in_time():
    base = dict(n=4, sigma=1e3, a=0.1, b=0.1, T=0.25)
    finals = []
    for dt in (1 / 64, 1 / 128, 1 / 256):
        h2 = (math.sqrt(2) / 4) ** 2
        traj = run(RunConfig(dt_factor=dt / h2, **base))
        finals.append(np.concatenate(traj.final))
    d1 = np.linalg.norm(finals[0] - finals[1])
    d2 = np.linalg.norm(finals[1] - finals[2])
    assert 1.5 <= d1 / d2 <= 2.5


def test_trajectory_records_and_csv(tmp_path):
    cfg = RunConfig(n=3, sigma=1e3, T=0.5)
    traj = run(cfg, keep_snapshots=True)
    assert len(traj.records) == len(traj.snapshots) == time_levels(cfg.T, cfg.dt).size
    assert traj.picard_warnings == 0 and not traj.blown_up
    e, ratios = energy_monitor(traj)
    np.testing.assert_allclose(e, 0.5 * (traj.norms_u1**2 + traj.norms_u2**2))
    assert ratios.shape == (e.size - 1,)
    assert energy_bound_holds(traj).all()
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,t,norm_u1,norm_u2,energy,picard_iters"
    assert len(lines) == len(traj.records) + 1


def test_blowup_is_reported():
    cfg = RunConfig(n=2, sigma=10.0, T=0.5, dt_factor=0.2, blowup_norm=1e-3)
    traj = run(cfg)
    assert traj.blown_up


def test_energy_monitor_needs_two_records():
    traj = run(RunConfig(n=2, T=0.0))
    with pytest.raises(ValueError):
        energy_monitor(traj)


def test_iterative_matches_direct():
    cfg = RunConfig(n=4, sigma=1e3, T=0.2, dt_factor=0.4)
    a = run(cfg)
    b = run(RunConfig(n=4, sigma=1e3, T=0.2, dt_factor=0.4, solver="iterative"))
    np.testing.assert_allclose(a.norms_u2, b.norms_u2, rtol=1e-7)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.sampled_from(list(IPVariant)))
def test_small_runs_stay_bounded(a, b, variant):
    traj = run(RunConfig(n=2, a=a, b=b, sigma=1e3, variant=variant, T=0.5, dt_factor=0.2))
    assert not traj.blown_up
    assert np.all(np.isfinite(traj.energies))
