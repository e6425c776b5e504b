"""Grid-level constitutive update with a compiled fast path.

The Backward Euler update and tangent run in the Cython extension when it is
built; otherwise (or with ``VPFFT_PURE_PYTHON=1``) the vectorised numpy code
of :mod:`vpfft.material` is used. The trapezoidal scheme always runs in numpy.
"""
import os

import numpy as np

from . import material as M

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKEND = "compiled" if _ckernels is not None and os.environ.get("VPFFT_PURE_PYTHON") != "1" else "python"


def available_backends():
    return ("compiled", "python") if _ckernels is not None else ("python",)


def _flat(a, n):
    return np.ascontiguousarray(np.broadcast_to(np.asarray(a, dtype=float), (n,)))


def _compiled_be(params, state, eps, dt):
    n = eps.shape[0]
    out = _ckernels.be_update(
        np.ascontiguousarray(eps, dtype=float),
        np.ascontiguousarray(state.eps_p, dtype=float),
        _flat(state.gamma, n),
        _flat(params.K, n), _flat(params.G, n), _flat(params.gamma0_dot, n),
        _flat(params.m, n), _flat(params.sigma0, n), _flat(params.h, n),
        float(dt), M.RTOL, M.MAX_ITER,
    )
    sigma, eps_p, gamma, gdot, N, kappa, dgam, seq, seqtr, ss, C, iters, status = out
    if np.any(status == 1):
        h = _flat(params.h, n)
        exhaust = (status == 1) & M._exhaustible(
            _flat(params.sigma0, n) + h * gamma - h * dgam, h, seqtr / (3.0 * _flat(params.G, n))
        )
        status = np.where(exhaust, 2, status)
    if np.any(status == 2):
        raise M.NonPositiveYieldError("yield stress exhausted by softening", np.flatnonzero(status == 2))
    if np.any(status == 1):
        raise M.ReturnMapError(
            f"return map did not converge in {M.MAX_ITER} iterations", np.flatnonzero(status == 1)
        )
    ref = M.RefState(seq, seqtr, ss, dgam, N, N)
    new_state = M.PointState(eps_p, gamma, gdot, N, kappa)
    return M.UpdateResult(sigma, new_state, dgam, iters, ref), C


def constitutive_update(params, state, eps, dt, theta=1.0, backend=None):
    """Return map and consistent tangent for an ``(n, 6)`` strain array.

    Returns ``(UpdateResult, C)`` with ``C`` of shape ``(n, 6, 6)``.
    """
    backend = backend or BACKEND
    if backend == "compiled" and theta == 1.0:
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled_be(params, state, eps, dt)
    result = M.return_map(params, state, eps, dt, theta)
    return result, M.tangent(params, result.ref, dt, theta)
