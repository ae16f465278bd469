"""Independent numerical oracles used to cross-check closed-form results.

The exposure oracle integrates the concentration dynamics directly with a
vectorized fixed-step RK4 scheme (presence: V dN/dt = n - N r; afterwards:
V dN/dt = -N r) and accumulates the inhaled dose q * integral of N over the
neighbor's presence, split into the co-present and post-departure parts.
Nothing here shares code with the closed forms under test.
"""
import numpy as np

_STEPS = 2048


def _rk4(N, D, t0, t1, emitting, r, V, n, q, steps):
    """Advance (concentration N, dose D) from t0 to t1 (arrays, per tuple).

    D' = q*N throughout; N' has the emission term only where `emitting`.
    Zero-length segments (t1 == t0) are no-ops.
    """
    h = (t1 - t0) / steps
    k = r / V
    src = np.where(emitting, n / V, 0.0)

    def f(state):
        Nv, _ = state
        return np.stack([src - k * Nv, q * Nv])

    state = np.stack([N, D])
    for _ in range(steps):
        k1 = f(state)
        k2 = f(state + 0.5 * h * k1)
        k3 = f(state + 0.5 * h * k2)
        k4 = f(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return state[0], state[1]


def _exposure_once(t_a, t_c, t_d, r, V, n, q, steps):
    t_a, t_c, t_d, r = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (t_a, t_c, t_d, r)))
    end = t_c + t_d
    zeros = np.zeros_like(t_a)

    # ---- direct dose over [t_c, min(end, t_a)] clipped to the emission phase
    d_lo = np.minimum(t_c, t_a)
    d_hi = np.minimum(end, t_a)
    N, _ = _rk4(zeros, zeros, zeros, d_lo, True, r, V, n, q, steps)
    _, direct = _rk4(N, zeros, d_lo, d_hi, True, r, V, n, q, steps)

    # ---- indirect dose over [max(t_c, t_a), end] in the decay phase
    N_dep, _ = _rk4(zeros, zeros, zeros, t_a, True, r, V, n, q, steps)
    i_lo = np.maximum(t_c, t_a)
    i_hi = np.maximum(end, i_lo)
    N, _ = _rk4(N_dep, zeros, t_a, i_lo, False, r, V, n, q, steps)
    _, indirect = _rk4(N, zeros, i_lo, i_hi, False, r, V, n, q, steps)
    return direct, indirect


def ode_exposure(t_a, t_c, t_d, r, V, n, q, steps=_STEPS, richardson_tol=1e-8):
    """(direct, indirect) dose by numerical integration, Richardson-checked.

    Runs the integrator at the given step count and at half the step size
    and requires the two to agree to richardson_tol relatively, so the
    reported values are trustworthy references.
    """
    d1, i1 = _exposure_once(t_a, t_c, t_d, r, V, n, q, steps)
    d2, i2 = _exposure_once(t_a, t_c, t_d, r, V, n, q, 2 * steps)
    for coarse, fine in ((d1, d2), (i1, i2)):
        scale = np.maximum(np.abs(fine), 1e-300)
        if not np.all(np.abs(coarse - fine) / scale < richardson_tol):
            raise AssertionError("exposure oracle has not converged")
    return d2, i2


def ode_concentration(t, t_a, r, V, n, steps=_STEPS):
    """Concentration at time t (emission stops at t_a), for monotonicity checks."""
    t, t_a, r = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (t, t_a, r)))
    zeros = np.zeros_like(t)
    lo = np.minimum(t, t_a)
    N, _ = _rk4(zeros, zeros, zeros, lo, True, r, V, n, 0.0, steps)
    N, _ = _rk4(N, zeros, lo, t, False, r, V, n, 0.0, steps)
    return N
