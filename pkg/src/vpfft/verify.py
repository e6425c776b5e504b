"""Independent oracles for the material model.

Finite-difference tangent checks, a single material point driven along a
fixed strain direction, steady-state plateaus of Norton's rule, and the
``theta = 1`` degeneration of the trapezoidal scheme.
"""
import csv
from dataclasses import dataclass

import numpy as np

from . import material as M
from . import tensors as T

FD_STEP = 1e-7
SEED = 20240611


def isochoric_direction():
    """``diag(1, -1/2, -1/2)``: unit equivalent strain."""
    return np.array([1.0, -0.5, -0.5, 0.0, 0.0, 0.0])


@dataclass
class PointDriver:
    """A material point under ``eps(t) = eps_eq(t) * direction``.

    ``direction`` is rescaled to unit equivalent strain so ``rate`` is the
    equivalent strain rate.
    """

    params: M.MaterialParams
    direction: np.ndarray
    rate: float
    duration: float
    steps: int
    theta: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        self.direction = d / T.equivalent_strain(d)

    def run(self):
        """Return ``(eps_eq, sigma_eq, sigma_s, gamma_dot)`` histories including t = 0."""
        dt = self.duration / self.steps
        state = M.PointState.virgin()
        out = np.zeros((self.steps + 1, 4))
        out[0, 2] = self.params.sigma0
        for k in range(1, self.steps + 1):
            eps_eq = self.rate * k * dt
            res = M.return_map(self.params, state, eps_eq * self.direction, dt, self.theta)
            state = res.new_state
            out[k] = (eps_eq, T.equivalent_stress(res.sigma), res.ref.sigma_s, state.gamma_dot)
        return out


def random_states(n, seed=SEED, h_range=(-1740e6, 1740e6), theta=1.0):
    """Random plastic probe points.

    Returns ``(params, state_t, eps, dt)`` with one entry per point: trial
    overstress ratios in [0.2, 1.5], ``gamma_t`` in [0, 0.1] and
    ``dt gamma0_dot`` log-uniform in [1e-6, 1e-3]. For ``theta < 1`` the prior
    rate follows from an overstress in [0.2, 1] along a direction close to the
    trial one.
    """
    rng = np.random.default_rng(seed)
    params = M.MaterialParams(
        E=np.full(n, 206.824e9),
        nu=np.full(n, 0.3),
        gamma0_dot=np.full(n, 1e-3),
        m=rng.choice([0.05, 0.1, 0.3], n),
        sigma0=rng.choice([425e6, 1180e6], n),
        h=rng.uniform(*h_range, n),
    )
    gamma_t = rng.uniform(0.0, 0.1, n)
    dt = 10.0 ** rng.uniform(-6, -3, n) / params.gamma0_dot
    sigma_s = params.sigma0 + params.h * gamma_t

    def unit_deviators():
        a = T.deviator(rng.normal(size=(n, 6)))
        return a / T.equivalent_strain(a)[:, None]

    eps_p = 1e-3 * unit_deviators()
    d = unit_deviators()
    ratio = rng.uniform(0.2, 1.5, n)
    # equivalent stress of 2G eps_eq d is 3G eps_eq
    eps = eps_p + (ratio * sigma_s / (3.0 * params.G))[:, None] * d
    eps += rng.uniform(-1e-3, 1e-3, n)[:, None] * T.identity2()
    if theta < 1.0:
        nt = d + 0.3 * unit_deviators()
        nt = 1.5 * nt / np.sqrt(1.5 * T.ddot(nt, nt))[:, None]
        gdot = params.gamma0_dot * rng.uniform(0.2, 1.0, n) ** (1.0 / params.m)
        kappa = np.ones(n)
    else:
        nt = np.zeros((n, 6))
        gdot = np.zeros(n)
        kappa = np.ones(n)
    state = M.PointState(eps_p, gamma_t, gdot, nt, kappa)
    return params, state, eps, dt


def _point(params, i):
    return M.MaterialParams(*(np.asarray(getattr(params, f))[i] for f in
                              ("E", "nu", "gamma0_dot", "m", "sigma0", "h")))


def fd_tangent_check(params, state, eps, dt, theta=1.0, step=FD_STEP):
    """Max over entries of ``|C_fd - C| / ||C||`` for one material point.

    Strains are perturbed by ``step`` times the yield strain ``sigma0 / E``.
    """
    eps = np.asarray(eps, dtype=float)
    res = M.return_map(params, state, eps, dt, theta)
    C = M.tangent(params, res.ref, dt, theta)
    h = step * float(params.sigma0) / float(params.E)
    C_fd = np.empty((6, 6))
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        sp = M.return_map(params, state, eps + e, dt, theta).sigma
        sm = M.return_map(params, state, eps - e, dt, theta).sigma
        C_fd[:, j] = (sp - sm) / (2.0 * h)
    return float(np.max(np.abs(C_fd - C)) / np.linalg.norm(C))


def fd_tangent_suite(n=100, theta=1.0, seed=SEED):
    params, state, eps, dt = random_states(n, seed, theta=theta)
    errs = [fd_tangent_check(_point(params, i), state.take(i), eps[i], dt[i], theta)
            for i in range(n)]
    return float(np.max(errs))


def footnote_identity_check(n=1000, seed=SEED):
    """Max relative mismatch of ``G beta / alpha = kappa (2G - 3G beta)``."""
    params, state, eps, dt = random_states(n, seed)
    res = M.be_return_map(params, state, eps, dt)
    a = M.alpha_scalar(params, res.ref, dt)
    b = M.beta_scalar(params, res.ref, dt)
    k = M.kappa_scalar(params, res.ref, dt)
    G = params.G
    lhs = G * b / a
    rhs = k * (2.0 * G - 3.0 * G * b)
    return float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))


def steady_state_check(params, rate_ratio, strain=None, steps=2000, theta=1.0):
    """Drive a perfectly plastic point at ``rate_ratio * gamma0_dot``.

    Returns ``(simulated plateau, analytic plateau, rate mismatch,
    monotone)`` with plateaus as ``sigma_eq / sigma_s``.
    """
    if np.any(np.asarray(params.h) != 0):
        raise ValueError("steady_state_check needs perfect plasticity (h = 0)")
    rate = rate_ratio * params.gamma0_dot
    if strain is None:
        # transients decay over a strain of about m sigma_s / 3G
        strain = 300.0 * params.m * params.sigma0 * max(rate_ratio ** params.m, 1.0) / (3.0 * params.G)
    drv = PointDriver(params, isochoric_direction(), rate, strain / rate, steps, theta)
    hist = drv.run()
    sim = hist[-1, 1] / hist[-1, 2]
    mismatch = abs(hist[-1, 3] - rate) / rate
    monotone = bool(np.all(np.diff(hist[:, 1]) >= -1e-9 * hist[-1, 1]))
    return sim, rate_ratio ** params.m, mismatch, monotone


def hardening_slope_check(params, rate_ratio=10.0, strain=0.05, steps=1000):
    """Secant slope of ``sigma_eq(eps_eq)`` over the second half of the path
    against the steady-state value ``h R^m / (1 + h R^m / 3G)``.

    Returns ``(simulated slope, analytic slope)``.
    """
    rate = rate_ratio * params.gamma0_dot
    hist = PointDriver(params, isochoric_direction(), rate, strain / rate, steps).run()
    mid = steps // 2
    slope = (hist[-1, 1] - hist[mid, 1]) / (hist[-1, 0] - hist[mid, 0])
    hr = params.h * rate_ratio ** params.m
    return slope, hr / (1.0 + hr / (3.0 * params.G))


def theta_degeneration_check(n=200, seed=SEED, h_range=(-1740e6, 1740e6)):
    """Max relative deviation of trapezoidal(theta=1) from Backward Euler
    over stress, updated state and tangent."""
    params, state, eps, dt = random_states(n, seed, h_range)
    be = M.be_return_map(params, state, eps, dt)
    tz = M.trapz_return_map(params, state, eps, dt, 1.0)
    C_be = M.be_tangent(params, be.ref, dt)
    C_tz = M.trapz_tangent(params, tz.ref, dt, 1.0)

    def rel(a, b):
        a = np.asarray(a).reshape(n, -1)
        b = np.asarray(b).reshape(n, -1)
        scale = np.maximum(np.linalg.norm(b, axis=1), 1e-300)
        return float(np.max(np.linalg.norm(a - b, axis=1) / scale))

    pairs = [
        (tz.sigma, be.sigma),
        (tz.new_state.eps_p - state.eps_p, be.new_state.eps_p - state.eps_p),
        (tz.new_state.gamma, be.new_state.gamma),
        (tz.new_state.gamma_dot, be.new_state.gamma_dot),
        (tz.new_state.N, be.new_state.N),
        (tz.new_state.kappa, be.new_state.kappa),
        (C_tz, C_be),
    ]
    return max(rel(a, b) for a, b in pairs)


@dataclass
class CheckResult:
    name: str
    value: float
    limit: float
    passed: bool


def run_suite(fd_points=100):
    """Run every oracle; returns a list of :class:`CheckResult`."""
    out = []

    def add(name, value, limit, passed=None):
        out.append(CheckResult(name, float(value), limit,
                               bool(value <= limit) if passed is None else bool(passed)))

    add("fd_tangent_be", fd_tangent_suite(fd_points, 1.0), 1e-5)
    add("fd_tangent_trapz_0.5", fd_tangent_suite(fd_points, 0.5), 1e-5)
    add("footnote_identity", footnote_identity_check(), 1e-12)
    for m in (0.05, 0.1, 0.3):
        p = M.MaterialParams(206.824e9, 0.3, 1e-3, m, 425e6, 0.0)
        sim, ana, mismatch, mono = steady_state_check(p, 10.0)
        err = abs(sim / ana - 1.0)
        add(f"steady_state_m{m}", err, 5e-3, err <= 5e-3 and mismatch <= 1e-6 and mono)
    p = M.MaterialParams(206.824e9, 0.3, 1e-3, 0.05, 425e6, 940e6)
    sim, ana = hardening_slope_check(p)
    add("hardening_slope", abs(sim / ana - 1.0), 0.05)
    add("theta_degeneration_hardening", theta_degeneration_check(h_range=(0.0, 1740e6)), 1e-9)
    add("theta_degeneration_softening", theta_degeneration_check(h_range=(-1740e6, 0.0)), 1e-9)
    return out


def write_results(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "value", "limit", "passed"])
        for r in results:
            w.writerow([r.name, f"{r.value:.6e}", f"{r.limit:g}", int(r.passed)])
