import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpfft import material as M
from vpfft import microstructure as MS
from vpfft import spectral as S
from vpfft import tensors as T
from vpfft.driver import preset_catalog, pure_shear_direction

from conftest import FERRITE

SIGMA_M = 1180e6


@pytest.mark.parametrize("ny,nx", [(8, 8), (9, 7), (6, 11), (1, 5), (1, 1)])
def test_idempotent(ny, nx, rng):
    P = S.build_projection(nx, ny)
    f = rng.normal(size=(ny, nx, 3))
    Pf = P(f)
    np.testing.assert_allclose(P(Pf), Pf, atol=1e-10 * np.abs(f).max())


@pytest.mark.parametrize("ny,nx", [(8, 8), (9, 7)])
def test_self_adjoint(ny, nx, rng):
    P = S.Projection(ny, nx)
    a, b = rng.normal(size=(2, ny, nx, 3))
    assert np.sum(P(a) * b) == pytest.approx(np.sum(a * P(b)), rel=1e-12)


def test_constant_field_annihilated():
    P = S.Projection(6, 5)
    np.testing.assert_allclose(P(np.ones((6, 5, 3)) * [1.0, 2.0, 3.0]), 0.0, atol=1e-14)


@pytest.mark.parametrize("n", [16, 15])
def test_reproduces_symmetric_gradient(n):
    # u = (sin(2 pi y) cos(4 pi x), cos(2 pi x + 2 pi y)) on the unit cell
    P = S.Projection(n, n)
    y, x = np.mgrid[0:n, 0:n] / n
    tp = 2 * np.pi
    du1_dx = -2 * tp * np.sin(tp * y) * np.sin(2 * tp * x)
    du1_dy = tp * np.cos(tp * y) * np.cos(2 * tp * x)
    du2_dx = -tp * np.sin(tp * x + tp * y)
    du2_dy = -tp * np.sin(tp * x + tp * y)
    eps = np.stack([du1_dx, du2_dy, (du1_dy + du2_dx) / np.sqrt(2.0)], axis=-1)
    np.testing.assert_allclose(P(eps), eps, atol=1e-10 * np.abs(eps).max())


def test_residual_norm_properties(rng):
    P = S.Projection(7, 7)
    assert S.residual_norm(P, np.tile([1.0, 2, 3, 0, 0, 4], (49, 1)), SIGMA_M) < 1e-15
    s = rng.normal(size=(49, 6))
    assert S.residual_norm(P, -3 * s, SIGMA_M) == pytest.approx(3 * S.residual_norm(P, s, SIGMA_M))
    with pytest.raises(ValueError):
        S.residual_norm(P, s, 0.0)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        S.SolverConfig(ig_mode="fancy")
    with pytest.raises(ValueError):
        S.SolverConfig(newton_tol=0.0)
    with pytest.raises(ValueError):
        S.SolverConfig(newton_max=0)


def _setup(n, preset="hardening", vf=0.17):
    grid = MS.synth_inclusion(n, n, vf)
    params = preset_catalog(preset).per_pixel(grid)
    return grid, params, S.Projection(n, n)


def test_homogeneous_matches_point(rng):
    grid = MS.PhaseGrid(np.zeros((6, 6), dtype=int))
    params = MS.PhaseCatalog({0: FERRITE}).per_pixel(grid)
    proj = S.Projection(6, 6)
    f = S.FieldGrid.initial(grid.shape, params)
    E = 0.004 * pure_shear_direction()
    f, log = S.newton_increment(f, proj, params, E, 0.4, S.SolverConfig(), normalizer=SIGMA_M)
    np.testing.assert_allclose(f.eps, np.tile(E, (36, 1)), atol=1e-15)
    point = M.be_return_map(FERRITE, M.PointState.virgin(), E, 0.4)
    np.testing.assert_allclose(f.sigma, np.tile(point.sigma, (36, 1)), rtol=1e-12)
    assert log.residuals[0] < 1e-12


def test_elastic_two_phase_one_iteration():
    grid, params, proj = _setup(9)
    f = S.FieldGrid.initial(grid.shape, params)
    f, log = S.newton_increment(f, proj, params, 1e-5 * pure_shear_direction(), 1e-3,
                                S.SolverConfig(), normalizer=SIGMA_M)
    assert log.nr_iters == 1


def _run(n, steps, mode, eps_final=0.05, theta=1.0, backend=None):
    grid, params, proj = _setup(n)
    f = S.FieldGrid.initial(grid.shape, params)
    cfg = S.SolverConfig(ig_mode=mode)
    dt = eps_final / (0.01 * steps)
    logs = []
    for k in range(1, steps + 1):
        E = eps_final * k / steps * pure_shear_direction()
        f, log = S.newton_increment(f, proj, params, E, dt, cfg, theta=theta,
                                    normalizer=SIGMA_M, backend=backend)
        np.testing.assert_allclose(f.mean_strain(), E, atol=1e-12)
        logs.append(log)
    return f, logs


@pytest.fixture(scope="module")
def plastic_runs():
    return {mode: _run(15, 20, mode, eps_final=0.01) for mode in ("classical", "improved")}


def test_improved_i0_residual_drop(plastic_runs):
    rc = plastic_runs["classical"][1][-1].residuals[0]
    ri = plastic_runs["improved"][1][-1].residuals[0]
    assert ri <= 1e-3 * rc


def test_same_solution(plastic_runs):
    a = plastic_runs["classical"][0].sigma
    b = plastic_runs["improved"][0].sigma
    assert np.abs(a - b).max() <= 10 * 1e-8 * SIGMA_M


def test_converged_residual_and_logs(plastic_runs):
    f, logs = plastic_runs["classical"]
    proj = S.Projection(15, 15)
    assert S.residual_norm(proj, f.sigma, SIGMA_M) <= 1e-8
    for log in logs:
        assert log.nr_iters == len(log.cg_iters) and log.wall_time > 0
        r = log.residuals
        assert all(b < a for a, b in zip(r, r[1:]))


def test_quadratic_decay(plastic_runs):
    for log in plastic_runs["classical"][1][5:]:
        r = log.residuals
        # above the linear-solve noise floor
        for a, b in zip(r[1:], r[2:]):
            if a > 1e-6:
                assert b / a**2 < 50.0


def test_projected_operator_self_adjoint(plastic_runs, rng):
    f = plastic_runs["classical"][0]
    proj = S.Projection(15, 15)
    system = S._LinearSystem(proj, S._in_plane_block(f.tangent, f.shape), S.SolverConfig())
    a = proj.apply_components(rng.normal(size=(3, 15, 15))).ravel()
    b = proj.apply_components(rng.normal(size=(3, 15, 15))).ravel()
    lhs, rhs = a @ system.apply(b), b @ system.apply(a)
    assert lhs == pytest.approx(rhs, rel=1e-9)
    assert a @ system.apply(a) > 0


def test_rejects_out_of_plane_strain():
    grid, params, proj = _setup(5)
    f = S.FieldGrid.initial(grid.shape, params)
    E = np.zeros(6)
    E[2] = 1e-3
    with pytest.raises(ValueError):
        S.newton_increment(f, proj, params, E, 0.1, S.SolverConfig())


def test_newton_budget_exhausted():
    grid, params, proj = _setup(9)
    f = S.FieldGrid.initial(grid.shape, params)
    with pytest.raises(S.NewtonDivergenceError):
        S.newton_increment(f, proj, params, 0.005 * pure_shear_direction(), 0.5,
                           S.SolverConfig(newton_max=1), normalizer=SIGMA_M)


def test_constitutive_failure_reports_pixels():
    grid, _, proj = _setup(5)
    soft = MS.PhaseCatalog({0: M.MaterialParams(206.824e9, 0.3, 1e-3, 0.05, 425e6, -940e6),
                            1: M.MaterialParams(206.824e9, 0.3, 1e-3, 0.05, 1180e6, -1740e6)})
    params = soft.per_pixel(grid)
    f = S.FieldGrid.initial(grid.shape, params)
    state = M.PointState(f.state.eps_p, np.full(25, 0.5), f.state.gamma_dot, f.state.N, f.state.kappa)
    f.state = state
    with pytest.raises(S.PixelConstitutiveError) as info:
        S.newton_increment(f, proj, params, 1e-3 * pure_shear_direction(), 0.1, S.SolverConfig(),
                           normalizer=SIGMA_M)
    assert (0, 0) in info.value.pixels
    assert isinstance(info.value.cause, M.NonPositiveYieldError)


def test_trapezoidal_grid_run():
    fc, lc = _run(9, 10, "classical", eps_final=0.01, theta=0.5)
    fi, li = _run(9, 10, "improved", eps_final=0.01, theta=0.5)
    assert sum(l.nr_iters for l in li) < sum(l.nr_iters for l in lc)
    assert np.abs(fc.sigma - fi.sigma).max() <= 10 * 1e-8 * SIGMA_M


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_idempotent_property(ny, nx, seed):
    P = S.Projection(ny, nx)
    f = np.random.default_rng(seed).normal(size=(ny, nx, 3))
    Pf = P(f)
    np.testing.assert_allclose(P(Pf), Pf, atol=1e-10)
    np.testing.assert_allclose(Pf.mean(axis=(0, 1)), 0.0, atol=1e-12)
