"""Compiled inner loop for one Monte-Carlo trial.

Mirrors :func:`sparse_lmsf.estimators.step` operation for operation; the
reference path in ``montecarlo.run_trial(engine="reference")`` exists to
check the two against each other.
"""

import numba
import numpy as np

KIND_CODES = {"lmsf": 0, "za": 1, "rza": 2, "rl1": 3}


@numba.njit(nogil=True, cache=True)
def simulate(w, symbols, noise, kinds, mus, phis, rhos, epsilons, deltas):
    n_taps = w.size
    n_iter = symbols.size
    n_algo = kinds.size

    est = np.zeros((n_algo, n_taps))
    prev = np.zeros((n_algo, n_taps))
    x = np.zeros(n_taps)
    sq_err = np.empty((n_algo, n_iter))
    diverged_at = np.full(n_algo, -1)

    for k in range(n_iter):
        for i in range(n_taps - 1, 0, -1):
            x[i] = x[i - 1]
        x[0] = symbols[k]
        clean = 0.0
        for i in range(n_taps):
            clean += w[i] * x[i]
        d = clean + noise[k]

        for a in range(n_algo):
            if diverged_at[a] >= 0:
                sq_err[a, k] = np.nan
                continue
            y = 0.0
            for i in range(n_taps):
                y += est[a, i] * x[i]
            e = d - y
            gain = mus[a] * (e * e * e) / (e * e + phis[a])
            rho = rhos[a]
            kind = kinds[a]
            err = 0.0
            finite = True
            for i in range(n_taps):
                c = est[a, i]
                nxt = c + gain * x[i]
                if rho != 0.0:
                    s = 0.0
                    if c > 0.0:
                        s = 1.0
                    elif c < 0.0:
                        s = -1.0
                    if kind == 1:
                        zeta = s
                    elif kind == 2:
                        zeta = s / (1.0 + epsilons[a] * abs(c))
                    else:
                        zeta = s / (deltas[a] + abs(prev[a, i]))
                    nxt = nxt - rho * zeta
                if not np.isfinite(nxt):
                    finite = False
                prev[a, i] = c
                est[a, i] = nxt
                diff = w[i] - nxt
                err += diff * diff
            if finite:
                sq_err[a, k] = err
            else:
                diverged_at[a] = k
                sq_err[a, k] = np.nan
    return sq_err, diverged_at, est
