"""Stochastic integrator: contract functions, kernel, ensemble driver."""

import numpy as np
import pytest

from liebpp.integrator import (
    BRANCH_ALPHA,
    BRANCH_BETA,
    ConfigError,
    DivergenceError,
    IntegrationConfig,
    PhaseSpaceState,
    RecordDumpWriter,
    _trajectory_rng,
    collect_records,
    drift,
    noise_amplitudes,
    read_record_dump,
    run_ensemble,
    step,
)
from liebpp.lattice import build_chain, build_quasi1d_lieb, lattice_hash
from liebpp.model import DriveScheme, ModelParams, drive_single


def _chain3(hopping=2.775):
    return build_chain(3, hopping=hopping)


def _fixed_point(lattice, model, drive):
    """Steady state of the drift with U=0: (i D - 1/2 + i J) alpha = i F."""
    from liebpp.model import site_detunings

    deltas = site_detunings(model, lattice)
    mat = np.diag(1j * deltas - 0.5) + 1j * lattice.adjacency().toarray()
    return np.linalg.solve(mat, 1j * drive.array)


# -- configuration ---------------------------------------------------------


def test_config_defaults_sampling_grid():
    cfg = IntegrationConfig()
    assert cfg.n_samples == 2001
    times = cfg.sample_times()
    assert times[0] == pytest.approx(20.0)
    assert times[-1] == pytest.approx(120.0)
    assert np.allclose(np.diff(times), 0.05)


def test_config_validation():
    with pytest.raises(ConfigError):
        IntegrationConfig(dt=0.1, sample_interval=0.05)
    with pytest.raises(ConfigError):
        IntegrationConfig(dt=0.0)
    with pytest.raises(ConfigError):
        IntegrationConfig(t_burn=5.0, t_end=5.0)
    with pytest.raises(ConfigError):
        IntegrationConfig(n_trajectories=0)
    with pytest.raises(ConfigError):
        IntegrationConfig(scheme="heun")
    with pytest.raises(ConfigError):
        IntegrationConfig(dt=0.003, sample_interval=0.05)
    with pytest.raises(ConfigError):
        IntegrationConfig(fixed_point_iters=0)


# -- drift and noise contracts ----------------------------------------------


def test_drift_vanishes_at_linear_fixed_point():
    lat = _chain3()
    model = ModelParams(u=0.0, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    alpha = _fixed_point(lat, model, drive)
    beta = np.conj(alpha)
    da, db = drift(PhaseSpaceState(alpha, beta), lat, model, drive)
    assert np.max(np.abs(da)) < 1e-13
    assert np.max(np.abs(db)) < 1e-13


def test_drift_conjugation_symmetry():
    """For beta = conj(alpha) the two drift components are conjugates, so
    classical (conjugate-paired) states stay conjugate-paired."""
    rng = np.random.default_rng(7)
    lat = _chain3()
    model = ModelParams(u=0.3, detuning=-0.2)
    drive = drive_single(lat, "1C", 0.8)
    alpha = rng.normal(size=3) + 1j * rng.normal(size=3)
    da, db = drift(PhaseSpaceState(alpha, np.conj(alpha)), lat, model, drive)
    assert np.allclose(db, np.conj(da), rtol=1e-13)


def test_vacuum_drift_equals_minus_i_drive():
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 2.0)
    zero = np.zeros(3, dtype=complex)
    da, db = drift(PhaseSpaceState(zero, zero), lat, model, drive)
    assert np.allclose(da, -1j * drive.array, rtol=1e-15)
    assert np.allclose(db, 1j * np.conj(drive.array), rtol=1e-15)


def test_noise_amplitudes_branch():
    state = PhaseSpaceState(
        np.array([1.0 + 0j, 2.0j]), np.array([0.5 + 0j, -1.0j])
    )
    model = ModelParams(u=0.1)
    ba, bb = noise_amplitudes(state, model)
    # squaring removes the branch ambiguity: ba^2 = -i U alpha^2
    assert np.allclose(ba**2, -1j * 0.1 * state.alpha**2, rtol=1e-14)
    assert np.allclose(bb**2, 1j * 0.1 * state.beta**2, rtol=1e-14)
    assert abs(ba[0]) == pytest.approx(np.sqrt(0.1), rel=1e-14)


def test_noise_amplitudes_zero_interaction():
    state = PhaseSpaceState(np.ones(3, dtype=complex), np.ones(3, dtype=complex))
    ba, bb = noise_amplitudes(state, ModelParams(u=0.0))
    assert np.all(ba == 0)
    assert np.all(bb == 0)


def test_noise_increment_covariance():
    """Sample covariance of the (Re, Im) parts of b_alpha xi sqrt(dt)
    matches the analytic outer product from the branch phase."""
    state = PhaseSpaceState(
        np.array([1.0 + 0.0j]), np.array([1.0 + 0.0j])
    )
    model = ModelParams(u=0.1)
    (ba,), _ = noise_amplitudes(state, model)
    dt = 0.01
    rng = np.random.default_rng(42)
    xi = rng.standard_normal(200_000)
    inc = ba * xi * np.sqrt(dt)
    samples = np.column_stack([inc.real, inc.imag])
    cov = samples.T @ samples / len(xi) / dt
    expected = np.outer(
        [ba.real, ba.imag], [ba.real, ba.imag]
    )
    assert np.allclose(cov, expected, atol=5e-4)
    # the branch makes Re and Im fully anti-correlated with equal weight
    assert expected[0, 0] == pytest.approx(0.05, rel=1e-12)
    assert expected[0, 1] == pytest.approx(-0.05, rel=1e-12)


def test_step_consumes_two_n_normals_alpha_first():
    """Reproduce one Euler step by hand from an identically seeded rng."""
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    state = PhaseSpaceState(
        np.array([0.1 + 0.2j, -0.3j, 0.4 + 0j]),
        np.array([0.2 - 0.1j, 0.15j, -0.2 + 0j]),
    )
    dt = 1e-3
    out = step(
        state, dt, np.random.default_rng(11), lat, model, drive,
        scheme="euler",
    )
    rng = np.random.default_rng(11)
    xi = rng.standard_normal((2, 3))
    da, db = drift(state, lat, model, drive)
    ba, bb = noise_amplitudes(state, model)
    assert np.allclose(
        out.alpha, state.alpha + dt * da + ba * xi[0] * np.sqrt(dt),
        rtol=0, atol=1e-15,
    )
    assert np.allclose(
        out.beta, state.beta + dt * db + bb * xi[1] * np.sqrt(dt),
        rtol=0, atol=1e-15,
    )
    assert out.t == pytest.approx(state.t + dt)


def test_vacuum_absorbing_without_drive():
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 0.0)
    state = PhaseSpaceState(np.zeros(3, dtype=complex), np.zeros(3, dtype=complex))
    rng = np.random.default_rng(3)
    for _ in range(50):
        state = step(state, 1e-3, rng, lat, model, drive)
    assert np.all(state.alpha == 0)
    assert np.all(state.beta == 0)


# -- deterministic accuracy ---------------------------------------------


def test_linear_fixed_point_reached():
    """U=0 removes the noise; by t=20 the fields sit on the analytic
    steady state to within the discretization error."""
    lat = _chain3()
    model = ModelParams(u=0.0, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    cfg = IntegrationConfig(
        n_trajectories=1, t_burn=40.0, t_end=40.1, seed=5
    )
    rec = collect_records(lat, model, drive, cfg)
    expected = _fixed_point(lat, model, drive)
    assert np.allclose(rec.alpha[0, -1], expected, atol=1e-6)
    assert np.allclose(rec.beta[0, -1], np.conj(expected), atol=1e-6)


def test_single_mode_occupation_formula():
    """Decoupled driven mode (zero hopping): n = F^2 / (D^2 + 1/4)."""
    lat = build_chain(2, hopping=0.0)
    model = ModelParams(u=0.0, detuning=-0.2)
    drive = drive_single(lat, "1C", 3.0)
    cfg = IntegrationConfig(n_trajectories=1, t_burn=40.0, t_end=40.1)
    rec = collect_records(lat, model, drive, cfg)
    n = (rec.alpha[0, -1, 0] * rec.beta[0, -1, 0]).real
    assert n == pytest.approx(9.0 / (0.04 + 0.25), rel=1e-6)
    assert rec.alpha[0, -1, 1] == 0  # undriven, uncoupled mode stays empty


def test_midpoint_is_second_order():
    """Deterministic convergence order on the linear problem: halving dt
    divides the endpoint error by about four."""
    lat = _chain3(hopping=1.0)
    model = ModelParams(u=0.0, detuning=-0.3)
    drive = drive_single(lat, "1C", 1.0)
    from scipy.linalg import expm

    deltas = np.full(3, -0.3)
    mat = np.diag(1j * deltas - 0.5) + 1j * lat.adjacency().toarray()
    t_end = 2.0
    # exact solution of x' = M x + b from vacuum: x(t) = (e^{Mt} - 1) M^-1 b
    b = -1j * drive.array
    alpha_exact = (expm(mat * t_end) - np.eye(3)) @ np.linalg.solve(mat, b)

    errs = []
    for dt in (0.02, 0.01, 0.005):
        cfg = IntegrationConfig(
            dt=dt, t_burn=0.0, t_end=t_end, sample_interval=t_end,
            n_trajectories=1,
        )
        rec = collect_records(lat, model, drive, cfg)
        errs.append(np.max(np.abs(rec.alpha[0, -1] - alpha_exact)))
    assert 3.0 < errs[0] / errs[1] < 5.0
    assert 3.0 < errs[1] / errs[2] < 5.0


def test_euler_scheme_converges_first_order():
    lat = _chain3(hopping=1.0)
    model = ModelParams(u=0.0, detuning=-0.3)
    drive = drive_single(lat, "1C", 1.0)
    from scipy.linalg import expm

    mat = np.diag(np.full(3, 1j * -0.3 - 0.5)) + 1j * lat.adjacency().toarray()
    b = -1j * drive.array
    t_end = 2.0
    alpha_exact = (expm(mat * t_end) - np.eye(3)) @ np.linalg.solve(mat, b)
    errs = []
    for dt in (0.02, 0.01):
        cfg = IntegrationConfig(
            dt=dt, t_burn=0.0, t_end=t_end, sample_interval=t_end,
            n_trajectories=1, scheme="euler",
        )
        rec = collect_records(lat, model, drive, cfg)
        errs.append(np.max(np.abs(rec.alpha[0, -1] - alpha_exact)))
    assert 1.6 < errs[0] / errs[1] < 2.6


# -- ensemble driver ------------------------------------------------------


def _small_cfg(**kw):
    base = dict(
        dt=0.01, t_burn=1.0, t_end=3.0, sample_interval=0.05,
        n_trajectories=6, seed=123,
    )
    base.update(kw)
    return IntegrationConfig(**base)


def test_ensemble_shapes_and_indices():
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    cfg = _small_cfg(n_trajectories=7, chunk_size=3)
    batches = list(run_ensemble(lat, model, drive, cfg))
    assert [len(b.indices) for b in batches] == [3, 3, 1]
    assert np.concatenate([b.indices for b in batches]).tolist() == list(range(7))
    for b in batches:
        assert b.alpha.shape == (len(b.indices), cfg.n_samples, 3)
        assert b.beta.shape == b.alpha.shape
        assert not b.diverged.any()


def test_bitwise_determinism_and_chunk_independence():
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    rec1 = collect_records(lat, model, drive, _small_cfg(chunk_size=50))
    rec2 = collect_records(lat, model, drive, _small_cfg(chunk_size=50))
    rec3 = collect_records(lat, model, drive, _small_cfg(chunk_size=2))
    rec4 = collect_records(
        lat, model, drive, _small_cfg(chunk_size=3, block_steps=17)
    )
    assert np.array_equal(rec1.alpha, rec2.alpha)
    assert np.array_equal(rec1.beta, rec2.beta)
    assert np.array_equal(rec1.alpha, rec3.alpha)
    assert np.array_equal(rec1.alpha, rec4.alpha)
    assert np.array_equal(rec1.beta, rec4.beta)


def test_seed_changes_records():
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    rec1 = collect_records(lat, model, drive, _small_cfg(seed=1))
    rec2 = collect_records(lat, model, drive, _small_cfg(seed=2))
    assert not np.array_equal(rec1.alpha, rec2.alpha)


def test_trajectory_streams_independent_of_ensemble_size():
    """Records of trajectory k depend only on (seed, k), so growing the
    ensemble never perturbs existing trajectories."""
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    rec_small = collect_records(lat, model, drive, _small_cfg(n_trajectories=3))
    rec_big = collect_records(lat, model, drive, _small_cfg(n_trajectories=6))
    assert np.array_equal(rec_small.alpha, rec_big.alpha[:3])
    assert np.array_equal(rec_small.beta, rec_big.beta[:3])


def test_kernel_matches_reference_step():
    """The block kernel reproduces the pure-python step contract exactly
    (same noise stream, same operation structure)."""
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    for scheme in ("midpoint", "euler"):
        cfg = IntegrationConfig(
            dt=0.01, t_burn=0.0, t_end=0.1, sample_interval=0.05,
            n_trajectories=1, seed=99, scheme=scheme,
        )
        rec = collect_records(lat, model, drive, cfg)
        rng = _trajectory_rng(cfg.seed, 0)
        noise = rng.standard_normal((cfg.n_steps, 2, lat.n_sites))
        state = PhaseSpaceState(
            np.zeros(3, dtype=complex), np.zeros(3, dtype=complex)
        )

        class _Replay:
            def __init__(self, rows):
                self._rows = iter(rows)

            def standard_normal(self, shape):
                return next(self._rows)

        replay = _Replay(noise)
        manual = [state.alpha.copy()]  # t=0 vacuum sample
        for s in range(cfg.n_steps):
            state = step(
                state, cfg.dt, replay, lat, model, drive, scheme=scheme,
            )
            if (s + 1) % cfg.stride == 0:
                manual.append(state.alpha.copy())
        manual = np.array(manual)
        assert rec.alpha.shape == (1, len(manual), 3)
        assert np.allclose(rec.alpha[0], manual, rtol=0, atol=1e-13)


def test_zero_burn_in_first_sample_is_vacuum():
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    cfg = IntegrationConfig(
        dt=0.01, t_burn=0.0, t_end=1.0, sample_interval=0.25,
        n_trajectories=2,
    )
    rec = collect_records(lat, model, drive, cfg)
    assert rec.times[0] == 0.0
    assert np.all(rec.alpha[:, 0, :] == 0)
    assert np.any(rec.alpha[:, 1, :] != 0)


def test_zero_drive_records_all_zero():
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 0.0)
    rec = collect_records(lat, model, drive, _small_cfg(n_trajectories=2))
    assert np.all(rec.alpha == 0)
    assert np.all(rec.beta == 0)


def test_zero_interaction_trajectories_identical():
    lat = _chain3()
    model = ModelParams(u=0.0, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    rec = collect_records(lat, model, drive, _small_cfg(n_trajectories=4))
    for k in (1, 2, 3):
        assert np.array_equal(rec.alpha[0], rec.alpha[k])
        assert np.array_equal(rec.beta[0], rec.beta[k])


def test_divergence_abort_policy():
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    with pytest.raises(DivergenceError, match="diverged"):
        collect_records(
            lat, model, drive,
            _small_cfg(divergence_threshold=1e-3),
        )


def test_divergence_flags_when_tolerated():
    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    rec = collect_records(
        lat, model, drive,
        _small_cfg(divergence_threshold=1e-3, max_divergence_fraction=1.0),
    )
    assert rec.diverged.all()


# -- raw record dump -------------------------------------------------------


def test_record_dump_roundtrip(tmp_path):
    lat = build_quasi1d_lieb(2)
    model = ModelParams(u=0.1, detuning=-0.2)
    drive = drive_single(lat, "1C", 1.5)
    cfg = _small_cfg(n_trajectories=3, chunk_size=2)
    path = tmp_path / "records.bin"
    with RecordDumpWriter(path, lat, cfg) as writer:
        batches = []
        for batch in run_ensemble(lat, model, drive, cfg):
            writer.append(batch)
            batches.append(batch)
    header, alpha, beta, diverged = read_record_dump(path)
    assert header["lattice_hash"] == lattice_hash(lat)
    assert header["n_sites"] == lat.n_sites
    assert header["seed"] == cfg.seed
    assert header["site_names"] == lat.names
    ref_alpha = np.concatenate([b.alpha for b in batches])
    ref_beta = np.concatenate([b.beta for b in batches])
    assert np.array_equal(alpha, ref_alpha)
    assert np.array_equal(beta, ref_beta)
    assert not diverged.any()


def test_record_dump_rejects_other_files(tmp_path):
    path = tmp_path / "bogus.bin"
    path.write_bytes(b"NOTADUMP" + b"\x00" * 64)
    with pytest.raises(ValueError, match="record dump"):
        read_record_dump(path)


# -- step-size stability ----------------------------------------------------


@pytest.mark.slow
def test_dt_halving_within_statistical_error():
    """Halving dt moves the steady-state occupations by less than the
    statistical resolution of a 300-trajectory ensemble."""
    from liebpp.observables import occupation

    lat = _chain3()
    model = ModelParams(u=0.1, detuning=-0.28)
    drive = drive_single(lat, "1C", 1.0)
    results = []
    for dt in (1e-3, 5e-4):
        cfg = IntegrationConfig(
            dt=dt, t_burn=20.0, t_end=70.0, n_trajectories=300, seed=17
        )
        rec = collect_records(lat, model, drive, cfg)
        results.append(occupation(rec, lat))
    a, b = results
    for sid in range(3):
        combined = np.hypot(a.stderr[sid], b.stderr[sid])
        assert abs(a.n[sid] - b.n[sid]) < 3.0 * combined
