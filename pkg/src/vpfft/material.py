"""Small-strain visco-plastic model with Norton flow and linear hardening.

All functions broadcast over leading axes, so the same code updates one
material point or a whole pixel grid at once. Second-order tensors are Mandel
6-vectors and fourth-order tensors are 6x6 matrices (see :mod:`vpfft.tensors`).
"""
from dataclasses import dataclass

import numpy as np

from . import tensors as T

RATE_CAP = 1e30
RTOL = 1e-12
MAX_ITER = 50


class ConstitutiveError(RuntimeError):
    """Base class for material point failures.

    ``index`` holds the flat indices of the offending points (empty for a
    single point).
    """

    def __init__(self, message, index=()):
        super().__init__(message)
        self.index = np.atleast_1d(np.asarray(index, dtype=int))


class RateOverflowError(ConstitutiveError):
    pass


class NonPositiveYieldError(ConstitutiveError):
    pass


class ReturnMapError(ConstitutiveError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    """Elastic constants and Norton/hardening parameters of one phase.

    Fields may be scalars or arrays (one entry per material point).
    """

    E: float
    nu: float
    gamma0_dot: float
    m: float
    sigma0: float
    h: float = 0.0

    @property
    def K(self):
        return self.E / (3.0 * (1.0 - 2.0 * self.nu))

    @property
    def G(self):
        return self.E / (2.0 * (1.0 + self.nu))

    def validate(self):
        checks = {
            "E > 0": np.all(np.asarray(self.E) > 0),
            "-1 < nu < 0.5": np.all((np.asarray(self.nu) > -1) & (np.asarray(self.nu) < 0.5)),
            "gamma0_dot > 0": np.all(np.asarray(self.gamma0_dot) > 0),
            "0 < m <= 1": np.all((np.asarray(self.m) > 0) & (np.asarray(self.m) <= 1)),
            "sigma0 > 0": np.all(np.asarray(self.sigma0) > 0),
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ValueError("invalid material parameters: " + ", ".join(bad))
        return self

    @classmethod
    def per_point(cls, phases, ids):
        """Gather per-point parameter arrays from a list of phase parameters."""
        ids = np.asarray(ids)
        fields = {}
        for name in ("E", "nu", "gamma0_dot", "m", "sigma0", "h"):
            table = np.array([getattr(p, name) for p in phases], dtype=float)
            fields[name] = table[ids]
        return cls(**fields)


@dataclass(frozen=True)
class PointState:
    """History of a material point at the last converged time.

    ``gamma_dot``, ``N`` and ``kappa`` are cached when a step is accepted so
    the next step's initial guess can use them directly.
    """

    eps_p: np.ndarray
    gamma: np.ndarray
    gamma_dot: np.ndarray
    N: np.ndarray
    kappa: np.ndarray

    @classmethod
    def virgin(cls, shape=()):
        shape = tuple(np.atleast_1d(shape)) if shape != () else ()
        return cls(
            eps_p=np.zeros(shape + (6,)),
            gamma=np.zeros(shape),
            gamma_dot=np.zeros(shape),
            N=np.zeros(shape + (6,)),
            kappa=np.ones(shape),
        )

    def take(self, index):
        return PointState(
            self.eps_p[index], self.gamma[index], self.gamma_dot[index],
            self.N[index], self.kappa[index],
        )


@dataclass(frozen=True)
class RefState:
    """Quantities of a reference state that the tangent is evaluated at."""

    sigma_eq: np.ndarray
    sigma_eq_tr: np.ndarray
    sigma_s: np.ndarray
    delta_gamma: np.ndarray
    N: np.ndarray
    N_theta: np.ndarray


@dataclass(frozen=True)
class TrialState:
    sigma_tr: np.ndarray
    sigma_eq_tr: np.ndarray
    N_tr: np.ndarray


@dataclass(frozen=True)
class UpdateResult:
    sigma: np.ndarray
    new_state: PointState
    delta_gamma: np.ndarray
    scalar_newton_iters: np.ndarray
    ref: RefState


@dataclass(frozen=True)
class TangentOperator:
    """Consistent tangent plus the strain correction of the improved guess
    (zero in classical mode)."""

    C_vp: np.ndarray
    ig_correction: np.ndarray


def hooke(params, eps_e):
    eps_e = np.asarray(eps_e, dtype=float)
    K = np.asarray(params.K)[..., None]
    G = np.asarray(params.G)[..., None]
    return K * T.trace(eps_e)[..., None] * T.identity2() + 2.0 * G * T.deviator(eps_e)


def elastic_stiffness(params):
    K = np.asarray(params.K)[..., None, None]
    G = np.asarray(params.G)[..., None, None]
    return K * T.StandardTensors.II + 2.0 * G * T.StandardTensors.Id


def norton_rate(params, sigma_eq, sigma_s, cap=RATE_CAP):
    """Plastic rate ``gamma0_dot (sigma_eq / sigma_s)^(1/m)``."""
    sigma_eq = np.asarray(sigma_eq, dtype=float)
    sigma_s = np.asarray(sigma_s, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        power = (sigma_eq / sigma_s) ** (1.0 / np.asarray(params.m))
    bad = ~np.isfinite(power) | (power > cap)
    if np.any(bad):
        idx = np.flatnonzero(bad)
        ratio = np.broadcast_to(sigma_eq / sigma_s, bad.shape).ravel()[idx[0]]
        raise RateOverflowError(
            f"Norton rate overflow at overstress ratio {ratio:.4g} (cap {cap:.1e})", idx
        )
    return params.gamma0_dot * power


def yield_stress(params, gamma):
    s = params.sigma0 + params.h * np.asarray(gamma, dtype=float)
    bad = s <= 0
    if np.any(bad):
        raise NonPositiveYieldError(
            "yield stress exhausted by softening", np.flatnonzero(bad)
        )
    return s


def trial_state(params, state_t, eps_total):
    sigma_tr = hooke(params, np.asarray(eps_total) - state_t.eps_p)
    s = T.deviator(sigma_tr)
    q = np.sqrt(1.5 * T.ddot(s, s))
    with np.errstate(invalid="ignore", divide="ignore"):
        N = np.where(q[..., None] > 0, 1.5 * s / q[..., None], 0.0)
    return TrialState(sigma_tr, q, N)


def alpha_scalar(params, ref, dt):
    """``gamma0_dot G dt / (m sigma_s) (sigma_eq/sigma_s)^(1/m - 1)``."""
    ratio = np.asarray(ref.sigma_eq) / ref.sigma_s
    m = np.asarray(params.m)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = params.gamma0_dot * params.G * dt / (m * ref.sigma_s) * ratio ** (1.0 / m - 1.0)
    return np.where(ratio > 0, a, 0.0)


def _hardening_ratio(params, ref):
    return np.asarray(ref.sigma_eq) * params.h / (ref.sigma_s * params.G)


def beta_scalar(params, ref, dt):
    a = alpha_scalar(params, ref, dt)
    return 2.0 * a / (1.0 + 3.0 * a + _hardening_ratio(params, ref) * a)


def kappa_scalar(params, ref, dt, theta=1.0):
    """Yield-stress compensation of the predicted plastic increment."""
    a = alpha_scalar(params, ref, dt)
    return 1.0 / (1.0 + _hardening_ratio(params, ref) * theta * a)


def _safeguarded_log_newton(phi, lo, hi, u0, tol_u=1e-13, max_iter=MAX_ITER):
    """Solve ``phi(u) = 0`` for ``y = exp(u)`` in ``(lo, hi)`` elementwise.

    ``phi`` returns ``(value, d value / du)`` and must be increasing in u.
    Newton steps leaving the bracket are replaced by bisection in y.
    """
    u = u0.copy()
    lo = lo.copy()
    hi = hi.copy()
    iters = np.zeros(u.shape, dtype=int)
    active = np.ones(u.shape, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        f, df = phi(u[idx], idx)
        iters[idx] += 1
        y = np.exp(u[idx])
        left = f < 0
        lo[idx] = np.where(left, y, lo[idx])
        hi[idx] = np.where(left, hi[idx], y)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            du = -f / df
            y_new = np.exp(u[idx] + du)
        small = np.abs(du) <= tol_u * np.maximum(1.0, np.abs(u[idx]))
        bad = ~small & (~np.isfinite(y_new) | (y_new <= lo[idx]) | (y_new >= hi[idx]))
        y_bis = 0.5 * (lo[idx] + hi[idx])
        u[idx] = np.where(bad, np.log(y_bis), u[idx] + du)
        done = small | (f == 0)
        active[idx[done]] = False
    return u, iters, active


def _rounding_floor(x, q, seq, h, ss, m):
    # attainable accuracy of x - c (seq/ss)^(1/m): the power amplifies the
    # cancellation in seq = q - 3G x and in ss by 1/m
    eps = np.finfo(float).eps
    return 4.0 * eps * x * (1.0 + (q / seq + np.abs(h) * x / ss + 1.0) / m)


def _exhaustible(sigma_s_t, h, dgam_max):
    # with softening the scalar equation loses monotonicity once sigma_s can
    # reach zero inside the admissible range of dgam
    return (h < 0) & (sigma_s_t + h * dgam_max <= 0)


def be_return_map(params, state_t, eps_total, dt, rtol=RTOL, max_iter=MAX_ITER):
    """Backward Euler radial return.

    Solves ``dgam = dt gamma0_dot ((q - 3G dgam)/sigma_s(gamma_t + dgam))^(1/m)``
    for ``dgam`` in ``[0, q/3G)`` with a Newton iteration in ``log(dgam)``
    safeguarded by bisection, ``q`` being the trial equivalent stress.
    """
    if np.any(np.asarray(dt) <= 0):
        raise ValueError("dt must be positive")
    trial = trial_state(params, state_t, eps_total)
    q = trial.sigma_eq_tr
    shape = q.shape
    G = np.broadcast_to(params.G, shape).astype(float)
    m = np.broadcast_to(params.m, shape).astype(float)
    s0 = np.broadcast_to(params.sigma0, shape).astype(float)
    h = np.broadcast_to(params.h, shape).astype(float)
    g0 = np.broadcast_to(params.gamma0_dot, shape).astype(float)
    gamma_t = np.broadcast_to(state_t.gamma, shape).astype(float)
    yield_stress(params, gamma_t)

    c = np.broadcast_to(dt * g0, shape)
    dgam = np.zeros(shape)
    iters = np.zeros(shape, dtype=int)
    flowing = q > 0
    if np.any(flowing):
        f = np.flatnonzero(flowing.ravel())
        qf, Gf, mf, cf = q.ravel()[f], G.ravel()[f], m.ravel()[f], c.ravel()[f]
        s0f = s0.ravel()[f] + h.ravel()[f] * gamma_t.ravel()[f]
        hf = h.ravel()[f]

        def phi(u, k):
            y = np.exp(u)
            seq = qf[k] - 3.0 * Gf[k] * y
            ss = s0f[k] + hf[k] * y
            with np.errstate(invalid="ignore", divide="ignore"):
                val = mf[k] * (u - np.log(cf[k])) - np.log(seq / ss)
                dval = mf[k] + 3.0 * Gf[k] * y / seq + hf[k] * y / ss
            return val, dval

        hi = qf / (3.0 * Gf)
        lo = np.zeros_like(hi)
        u0 = np.log(cf) + np.log(qf / s0f) / mf
        u0 = np.where(u0 < np.log(hi), u0, np.log(0.5 * hi))
        u, it, failed = _safeguarded_log_newton(phi, lo, hi, u0, max_iter=max_iter)
        x = np.exp(u)
        ss = s0f + hf * x
        if np.any(ss <= 0):
            raise NonPositiveYieldError("yield stress exhausted by softening", f[ss <= 0])
        seq = qf - 3.0 * Gf * x
        r = x - cf * (seq / ss) ** (1.0 / mf)
        tol = np.maximum(rtol * np.maximum(x, cf), _rounding_floor(x, qf, seq, hf, ss, mf))
        bad = failed | ~(np.abs(r) <= tol)
        exhaust = bad & _exhaustible(s0f, hf, hi)
        if np.any(exhaust):
            raise NonPositiveYieldError("softening can exhaust the yield stress within the step", f[exhaust])
        if np.any(bad):
            raise ReturnMapError(
                f"return map did not converge in {max_iter} iterations "
                f"(|r| = {np.max(np.abs(r[bad])):.3e})",
                f[bad],
            )
        dgam.ravel()[f] = x
        iters.ravel()[f] = it

    N = trial.N_tr
    G6 = G[..., None]
    sigma = trial.sigma_tr - 2.0 * G6 * dgam[..., None] * N
    gamma = gamma_t + dgam
    sigma_s = yield_stress(params, gamma)
    ref = RefState(
        sigma_eq=q - 3.0 * G * dgam, sigma_eq_tr=q, sigma_s=sigma_s,
        delta_gamma=dgam, N=N, N_theta=N,
    )
    new_state = PointState(
        eps_p=state_t.eps_p + dgam[..., None] * N,
        gamma=gamma,
        gamma_dot=dgam / dt,
        N=N,
        kappa=kappa_scalar(params, ref, dt, 1.0),
    )
    return UpdateResult(sigma, new_state, dgam, iters, ref)


def be_tangent(params, ref, dt):
    """Consistent tangent of the Backward Euler update at ``ref``.

    Points with zero trial stress get the elastic stiffness.
    """
    Ce = elastic_stiffness(params)
    G = np.asarray(params.G)[..., None, None]
    beta = beta_scalar(params, ref, dt)[..., None, None]
    NN = T.dyad(ref.N, ref.N)
    q = np.asarray(ref.sigma_eq_tr)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(q > 0, np.asarray(ref.delta_gamma) / q, 0.0)[..., None, None]
    return Ce - 2.0 * G * beta * NN - 4.0 * G**2 * c * (1.5 * T.StandardTensors.Id - NN)


def trapz_return_map(params, state_t, eps_total, dt, theta, rtol=RTOL, max_iter=MAX_ITER):
    """Generalised trapezoidal return map.

    The coupled system for the elastic strain and ``dgam`` is reduced exactly
    to one scalar equation: the updated deviatoric stress is colinear with the
    shifted trial ``s_tr - 2G (1-theta) dgam N_t`` and its equivalent value is
    ``q(dgam) - 3G theta dgam``.
    """
    if np.any(np.asarray(dt) <= 0):
        raise ValueError("dt must be positive")
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    eps_total = np.asarray(eps_total, dtype=float)
    eps_e_tr = eps_total - state_t.eps_p
    shape = eps_e_tr.shape[:-1]
    G = np.broadcast_to(params.G, shape).astype(float)
    K = np.broadcast_to(params.K, shape).astype(float)
    m = np.broadcast_to(params.m, shape).astype(float)
    s0 = np.broadcast_to(params.sigma0, shape).astype(float)
    h = np.broadcast_to(params.h, shape).astype(float)
    g0 = np.broadcast_to(params.gamma0_dot, shape).astype(float)
    gamma_t = np.broadcast_to(state_t.gamma, shape).astype(float)
    gdot_t = np.broadcast_to(state_t.gamma_dot, shape).astype(float)
    dt = np.broadcast_to(dt, shape).astype(float)
    n = np.broadcast_to(state_t.N, shape + (6,)).astype(float)
    yield_stress(params, gamma_t)

    s_tr = 2.0 * G[..., None] * T.deviator(eps_e_tr)
    a = 2.0 * G * (1.0 - theta)
    x_lo = dt * (1.0 - theta) * gdot_t

    def shifted(x):
        sp = s_tr - (a * x)[..., None] * n
        return sp, np.sqrt(1.5 * T.ddot(sp, sp))

    x = np.array(x_lo, dtype=float)
    iters = np.zeros(shape, dtype=int)
    _, q_lo = shifted(x_lo)
    flowing = (q_lo - 3.0 * G * theta * x_lo > 0) if theta > 0 else np.zeros(shape, bool)
    if theta > 0 and np.any(~flowing & (x_lo > 0)):
        raise ReturnMapError(
            "prior flow exhausts the trial stress; no admissible trapezoidal update",
            np.flatnonzero((~flowing & (x_lo > 0)).ravel()),
        )
    if theta > 0 and np.any(flowing):
        f = np.flatnonzero(flowing.ravel())
        s_trf = s_tr.reshape(-1, 6)[f]
        nf = n.reshape(-1, 6)[f]
        af = a.ravel()[f]
        Gf, mf = G.ravel()[f], m.ravel()[f]
        cf = theta * dt.ravel()[f] * g0.ravel()[f]
        xlf = x_lo.ravel()[f]
        s0f = s0.ravel()[f] + h.ravel()[f] * gamma_t.ravel()[f]
        hf = h.ravel()[f]

        def seq_of(xx, k):
            sp = s_trf[k] - (af[k] * xx)[:, None] * nf[k]
            qq = np.sqrt(1.5 * T.ddot(sp, sp))
            with np.errstate(invalid="ignore", divide="ignore"):
                dq = -1.5 * af[k] * T.ddot(sp, nf[k]) / qq
            return qq - 3.0 * Gf[k] * theta * xx, dq - 3.0 * Gf[k] * theta

        def phi(u, k):
            y = np.exp(u)
            xx = xlf[k] + y
            seq, dseq = seq_of(xx, k)
            ss = s0f[k] + hf[k] * xx
            with np.errstate(invalid="ignore", divide="ignore"):
                val = mf[k] * (u - np.log(cf[k])) - np.log(seq / ss)
                dval = mf[k] + y * (-dseq / seq + hf[k] / ss)
            return val, dval

        # upper bracket: first doubling where the equation changes sign or the
        # equivalent stress is exhausted
        k_all = np.arange(f.size)
        seq0, _ = seq_of(xlf, k_all)
        d = np.maximum(seq0 / (3.0 * Gf), cf)
        for _ in range(200):
            seq_hi, _ = seq_of(xlf + d, k_all)
            ss_hi = s0f + hf * (xlf + d)
            with np.errstate(invalid="ignore", divide="ignore"):
                g = d - cf * (seq_hi / ss_hi) ** (1.0 / mf)
            past = (seq_hi <= 0) | (g > 0)
            if np.all(past):
                break
            d = np.where(past, d, 2.0 * d)
        else:
            raise ReturnMapError("could not bracket the trapezoidal return map", f)
        hi = d
        lo = np.zeros_like(hi)
        with np.errstate(divide="ignore"):
            u0 = np.log(cf) + np.log(seq0 / s0f) / mf
        u0 = np.where(np.isfinite(u0) & (u0 < np.log(hi)), u0, np.log(0.5 * hi))
        u, it, failed = _safeguarded_log_newton(phi, lo, hi, u0, max_iter=max_iter)
        y = np.exp(u)
        xf = xlf + y
        seq, _ = seq_of(xf, k_all)
        ss = s0f + hf * xf
        if np.any(ss <= 0):
            raise NonPositiveYieldError("yield stress exhausted by softening", f[ss <= 0])
        r = y - cf * (seq / ss) ** (1.0 / mf)
        tol = np.maximum(rtol * np.maximum(xf, dt.ravel()[f] * g0.ravel()[f]),
                         _rounding_floor(xf, seq + 3.0 * Gf * theta * xf, seq, hf, ss, mf))
        bad = failed | ~(np.abs(r) <= tol)
        exhaust = bad & _exhaustible(s0f, hf, hi)
        if np.any(exhaust):
            raise NonPositiveYieldError("softening can exhaust the yield stress within the step", f[exhaust])
        if np.any(bad):
            raise ReturnMapError(
                f"trapezoidal return map did not converge in {max_iter} iterations", f[bad]
            )
        x.ravel()[f] = xf
        iters.ravel()[f] = it

    sp, q = shifted(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        N = np.where(q[..., None] > 0, 1.5 * sp / q[..., None], 0.0)
    sigma_eq = np.where(q > 0, q - 3.0 * G * theta * x, 0.0)
    gamma = gamma_t + x
    sigma_s = yield_stress(params, gamma)
    N_theta = (1.0 - theta) * n + theta * N
    eps_p = state_t.eps_p + x[..., None] * N_theta
    sigma = (2.0 / 3.0) * sigma_eq[..., None] * N + (K * T.trace(eps_total))[..., None] * T.identity2()
    ref = RefState(
        sigma_eq=sigma_eq,
        sigma_eq_tr=np.sqrt(1.5 * T.ddot(s_tr, s_tr)),
        sigma_s=sigma_s,
        delta_gamma=x,
        N=N,
        N_theta=N_theta,
    )
    new_state = PointState(
        eps_p=eps_p,
        gamma=gamma,
        gamma_dot=norton_rate(params, sigma_eq, sigma_s),
        N=N,
        kappa=kappa_scalar(params, ref, dt, theta),
    )
    return UpdateResult(sigma, new_state, x, iters, ref)


def trapz_tangent(params, ref, dt, theta):
    """Consistent tangent of the generalised trapezoidal update at ``ref``."""
    Ce = elastic_stiffness(params)
    if theta == 0:
        return Ce
    G = np.asarray(params.G)
    seq = np.asarray(ref.sigma_eq)
    plastic = seq > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(plastic, G * theta * np.asarray(ref.delta_gamma) / seq, 0.0)
    NN = T.dyad(ref.N, ref.N)
    Id = T.StandardTensors.Id
    c4 = c[..., None, None]
    # volumetric block II/3 keeps P invertible; P only ever acts on deviators
    P = T.StandardTensors.II / 3.0 + (1.0 + 3.0 * c4) * Id - 2.0 * c4 * NN
    Pinv = T.invert4(P)
    a = alpha_scalar(params, ref, dt)
    denom = 1.0 + 2.0 * a * theta * T.ddot(ref.N_theta, ref.N) + _hardening_ratio(params, ref) * theta * a
    beta = np.where(plastic, 2.0 * a / denom, 0.0)[..., None, None]
    G4 = np.asarray(G)[..., None, None]
    return (
        Ce
        - 2.0 * G4 * theta * beta * (Pinv @ T.dyad(ref.N_theta, ref.N))
        - 4.0 * G4 * c4 * (Pinv @ (1.5 * Id - NN))
    )


def return_map(params, state_t, eps_total, dt, theta=1.0):
    """Dispatch to the Backward Euler (``theta == 1``) or trapezoidal update."""
    if theta == 1.0:
        return be_return_map(params, state_t, eps_total, dt)
    return trapz_return_map(params, state_t, eps_total, dt, theta)


def tangent(params, ref, dt, theta=1.0):
    if theta == 1.0:
        return be_tangent(params, ref, dt)
    return trapz_tangent(params, ref, dt, theta)


def improved_guess_correction(state_t, dt):
    """Plastic strain predicted to flow during the coming step,
    ``dt * gamma_dot_t * kappa_t * N_t``."""
    return (dt * state_t.gamma_dot * state_t.kappa)[..., None] * state_t.N


def reference_driver(gamma_star, gamma_t, gamma_dot_star, dt):
    """Bracketed scalar ``dt gamma_dot* - gamma* + gamma_t`` of the linearised
    update; zero when the reference is a converged iterate of the step."""
    return dt * np.asarray(gamma_dot_star) - np.asarray(gamma_star) + np.asarray(gamma_t)


def linearised_stress_increment(C_vp, d_eps, driver, kappa, N):
    """First-order stress change ``C_vp : (d_eps - driver kappa N)``."""
    shift = (np.asarray(driver) * np.asarray(kappa))[..., None] * N
    return T.ddot42(C_vp, np.asarray(d_eps) - shift)
