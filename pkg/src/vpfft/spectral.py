"""Galerkin FFT solver on periodic pixel grids (plane strain).

Unknowns are the in-plane Mandel strain components ``(xx, yy, sqrt2*xy)`` at
every pixel; the out-of-plane strains stay zero while ``sigma_zz`` is free.
Equilibrium is expressed as ``G sigma = 0`` with ``G`` the orthogonal
projection onto compatible, zero-mean strain fields, and each Newton
correction solves ``G C d_eps = -G sigma`` with conjugate gradients.
"""
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft
from scipy.sparse.linalg import LinearOperator, cg

from . import kernels
from . import material as M
from . import tensors as T

IP = T.IN_PLANE
# absolute CG floor as a fraction of the Newton tolerance (residual units);
# keeps CG from chasing rounding noise when the right-hand side is tiny
CG_FLOOR = 1e-2


class SolverError(RuntimeError):
    pass


class NewtonDivergenceError(SolverError):
    pass


class CGStagnationError(SolverError):
    pass


class PixelConstitutiveError(SolverError):
    """A material point failed; ``pixels`` lists ``(iy, ix)`` coordinates."""

    def __init__(self, message, pixels, cause):
        super().__init__(f"{message} at pixels {pixels[:5]}{'...' if len(pixels) > 5 else ''}")
        self.pixels = pixels
        self.cause = cause


@dataclass
class SolverConfig:
    newton_tol: float = 1e-8
    newton_max: int = 25
    cg_tol: float = 1e-10
    cg_max: int | None = None
    ig_mode: str = "classical"
    line_search: int = 8

    def __post_init__(self):
        if self.ig_mode not in ("classical", "improved"):
            raise ValueError(f"ig_mode must be 'classical' or 'improved', got {self.ig_mode!r}")
        if self.newton_tol <= 0 or self.cg_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.line_search < 0:
            raise ValueError("line_search must be non-negative")
        if self.newton_max < 1:
            raise ValueError("newton_max must be at least 1")


def _wavenumbers(n, real=False):
    k = np.fft.rfftfreq(n, 1.0 / n) if real else np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        # the Nyquist mode has zero derivative at the nodes
        k[n // 2] = 0.0
    return k


class Projection:
    """Orthogonal projection onto compatible zero-mean symmetric strain fields.

    At each frequency ``xi`` the in-plane Mandel space is projected onto the
    span of ``sym(xi (x) a)``; the zero frequency maps to zero.
    """

    def __init__(self, ny, nx):
        if nx < 1 or ny < 1:
            raise ValueError("grid dimensions must be positive")
        self.shape = (ny, nx)
        ky = _wavenumbers(ny)[:, None]
        kx = _wavenumbers(nx, real=True)[None, :]
        ky, kx = np.broadcast_arrays(ky, kx)
        r2 = 1.0 / np.sqrt(2.0)
        B = np.zeros(ky.shape + (3, 2))
        B[..., 0, 0] = kx
        B[..., 1, 1] = ky
        B[..., 2, 0] = r2 * ky
        B[..., 2, 1] = r2 * kx
        BtB = np.swapaxes(B, -1, -2) @ B
        nonzero = (kx != 0) | (ky != 0)
        BtB[~nonzero] = np.eye(2)
        Ghat = B @ np.linalg.solve(BtB, np.swapaxes(B, -1, -2))
        Ghat[~nonzero] = 0.0
        self.Ghat = Ghat
        # component-first copy: FFTs then run over the contiguous last axes
        self._Gc = np.ascontiguousarray(np.moveaxis(Ghat, (-2, -1), (0, 1)))

    def apply_components(self, f):
        """Project a real field stored component-first, shape ``(3, ny, nx)``."""
        F = fft.rfft2(f)
        F = (self._Gc * F[None]).sum(axis=1)
        return fft.irfft2(F, s=self.shape)

    def __call__(self, f):
        """Project a real field of shape ``(ny, nx, 3)``."""
        fc = np.ascontiguousarray(np.moveaxis(f, -1, 0))
        return np.moveaxis(self.apply_components(fc), 0, -1)


def build_projection(nx, ny):
    return Projection(ny, nx)


def residual_norm(projection, stress_field, normalizer):
    """RMS norm of the projected in-plane stress divided by ``normalizer``."""
    if normalizer <= 0:
        raise ValueError("normalizer must be positive")
    ny, nx = projection.shape
    s = np.asarray(stress_field).reshape(ny, nx, -1)
    if s.shape[-1] == 6:
        s = s[..., IP]
    r = projection(s)
    return float(np.linalg.norm(r) / (normalizer * np.sqrt(nx * ny)))


@dataclass
class FieldGrid:
    """Strain, stress, history and tangent at every pixel (flat arrays)."""

    shape: tuple
    eps: np.ndarray
    sigma: np.ndarray
    state: M.PointState
    ref: M.RefState
    tangent: np.ndarray
    E: np.ndarray

    @classmethod
    def initial(cls, shape, params):
        n = shape[0] * shape[1]
        zeros = np.zeros(n)
        return cls(
            shape=tuple(shape),
            eps=np.zeros((n, 6)),
            sigma=np.zeros((n, 6)),
            state=M.PointState.virgin(n),
            ref=M.RefState(zeros, zeros, np.broadcast_to(params.sigma0, (n,)).astype(float),
                           zeros, np.zeros((n, 6)), np.zeros((n, 6))),
            tangent=np.broadcast_to(M.elastic_stiffness(params), (n, 6, 6)).copy(),
            E=np.zeros(6),
        )

    def mean_strain(self):
        return self.eps.mean(axis=0)

    def mean_stress(self):
        return self.sigma.mean(axis=0)


@dataclass
class IterationLog:
    residuals: list = field(default_factory=list)
    cg_iters: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def nr_iters(self):
        return len(self.residuals)


def _in_plane_block(C, shape):
    return C[:, IP][:, :, IP].reshape(shape + (3, 3))


class _LinearSystem:
    """``G K`` on component-first vectors of length ``3 nx ny``."""

    def __init__(self, projection, K3, config, atol=0.0):
        self.projection = projection
        self.atol = atol
        # (ny, nx, 3, 3) -> (3, 3, ny, nx)
        self.K3 = np.ascontiguousarray(np.moveaxis(K3, (-2, -1), (0, 1)))
        ny, nx = projection.shape
        self.n = 3 * nx * ny
        self.config = config
        self.cg_max = config.cg_max or 10 * nx * ny

    def apply(self, x):
        x = x.reshape((3,) + self.projection.shape)
        y = (self.K3 * x[None]).sum(axis=1)
        return self.projection.apply_components(y).ravel()

    def solve(self, b):
        b = b.ravel()
        if not np.any(b):
            return np.zeros_like(b), 0
        count = [0]

        def tick(_):
            count[0] += 1

        op = LinearOperator((self.n, self.n), matvec=self.apply, dtype=float)
        x, info = cg(op, b, rtol=self.config.cg_tol, atol=self.atol, maxiter=self.cg_max, callback=tick)
        if info != 0:
            raise CGStagnationError(f"CG did not reach rtol {self.config.cg_tol:g} in {count[0]} iterations")
        return x, count[0]


def _components(a, shape):
    # flat (n, 3) pixel array -> (3, ny, nx)
    return np.ascontiguousarray(a.T).reshape((3,) + tuple(shape))


def _points(x):
    return x.reshape(3, -1).T


def _update(fields, params, eps, dt, theta, backend):
    try:
        return kernels.constitutive_update(params, fields.state, eps, dt, theta, backend)
    except M.ConstitutiveError as exc:
        ny, nx = fields.shape
        pixels = [tuple(int(v) for v in np.unravel_index(i, (ny, nx))) for i in exc.index]
        raise PixelConstitutiveError(str(exc), pixels, exc) from exc


def newton_increment(fields, projection, params, E_new, dt, config, theta=1.0,
                     normalizer=1.0, backend=None):
    """Advance ``fields`` (converged at time t) to the macroscopic strain
    ``E_new`` at ``t + dt``.

    Iteration 0 solves with the tangent of the converged state; in
    ``improved`` mode the predicted plastic flow ``dt gamma_dot kappa N`` of
    every pixel is subtracted from the applied increment. Every later
    iteration is a Newton correction with the tangent at the current
    iterate, halved up to ``config.line_search`` times while it fails to
    reduce the residual. Returns the new :class:`FieldGrid` and an :class:`IterationLog`.
    """
    E_new = np.asarray(E_new, dtype=float)
    if np.any(E_new[[2, 3, 4]] != 0):
        raise ValueError("plane strain: out-of-plane macroscopic strain must be zero")
    t0 = time.perf_counter()
    shape = fields.shape
    log = IterationLog()
    dE = E_new - fields.E
    atol = CG_FLOOR * config.newton_tol * normalizer * np.sqrt(shape[0] * shape[1])

    drive = np.broadcast_to(dE, fields.eps.shape)
    if config.ig_mode == "improved":
        drive = drive - M.improved_guess_correction(fields.state, dt)
    dsig = np.einsum("nij,nj->ni", fields.tangent[:, IP, :], drive)
    system = _LinearSystem(projection, _in_plane_block(fields.tangent, shape), config, atol)
    d_eps, n_cg = system.solve(-projection.apply_components(_components(dsig, shape)))

    eps = fields.eps.copy()
    eps[:, IP] += dE[IP] + _points(d_eps)
    result, C = _update(fields, params, eps, dt, theta, backend)
    res = residual_norm(projection, result.sigma, normalizer)
    log.residuals.append(res)
    log.cg_iters.append(n_cg)

    while res > config.newton_tol:
        if log.nr_iters >= config.newton_max:
            raise NewtonDivergenceError(
                f"Newton did not converge in {config.newton_max} iterations (residual {res:.3e})"
            )
        system = _LinearSystem(projection, _in_plane_block(C, shape), config, atol)
        rhs = -projection.apply_components(_components(result.sigma[:, IP], shape))
        d_eps, n_cg = system.solve(rhs)
        step = _points(d_eps)
        trial = eps.copy()
        trial[:, IP] += step
        t_result, t_C = _update(fields, params, trial, dt, theta, backend)
        t_res = residual_norm(projection, t_result.sigma, normalizer)
        # backtrack only when the full step increases the residual
        for _ in range(config.line_search):
            if t_res < res:
                break
            step = 0.5 * step
            trial[:, IP] = eps[:, IP] + step
            t_result, t_C = _update(fields, params, trial, dt, theta, backend)
            t_res = residual_norm(projection, t_result.sigma, normalizer)
        eps, result, C, res = trial, t_result, t_C, t_res
        log.residuals.append(res)
        log.cg_iters.append(n_cg)

    log.wall_time = time.perf_counter() - t0
    new = replace(
        fields, eps=eps, sigma=result.sigma, state=result.new_state,
        ref=result.ref, tangent=C, E=E_new.copy(),
    )
    return new, log
