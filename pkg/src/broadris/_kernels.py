"""Jitted inner loops for the coordinate-refinement optimizer.

Two objective families share the same refinement pass: the summed-ACF
sidepeak objective (cached lag table, incremental updates) and grid power
objectives (cached per-direction inner products).  Every kernel is exact:
trial evaluations equal a from-scratch recomputation of the objective, and
rejected trials leave all state bitwise untouched.  Scan order only affects
when an early bail-out fires, never the accept/reject outcome.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def acf_fill(v, n1, n2, out):
    """Direct-summation ACF of one column-major flattened n1 x n2 array.

    out is the dense lag table, flat index (x1+n1-1)*(2*n2-1) + (x2+n2-1).
    """
    t2 = 2 * n2 - 1
    for t in range(out.size):
        out[t] = 0.0 + 0.0j
    for k in range(n1 * n2):
        k1 = k % n1
        k2 = k // n1
        for j in range(n1 * n2):
            j1 = j % n1
            j2 = j // n1
            out[(j1 - k1 + n1 - 1) * t2 + (j2 - k2 + n2 - 1)] += v[k] * np.conj(v[j])
    return out


@njit(cache=True, nogil=True)
def table_max(rsum, n1, n2):
    """(max, argmax) of |rsum| over all lags except the center."""
    t2 = 2 * n2 - 1
    c = (n1 - 1) * t2 + (n2 - 1)
    m = -1.0
    am = 0
    for t in range(rsum.size):
        if t == c:
            continue
        a = abs(rsum[t])
        if a > m:
            m = a
            am = t
    return m, am


@njit(cache=True, nogil=True)
def _frozen_max(rsum, n1, n2, k1, k2):
    """Max |rsum| over lags NOT affected by coordinate (k1, k2), excl center."""
    t2 = 2 * n2 - 1
    m = -1.0
    for x1 in range(-(n1 - 1), n1):
        in1 = -k1 <= x1 <= n1 - 1 - k1
        in2 = k1 - n1 + 1 <= x1 <= k1
        for x2 in range(-(n2 - 1), n2):
            if x1 == 0 and x2 == 0:
                continue
            if (in1 and -k2 <= x2 <= n2 - 1 - k2) or (in2 and k2 - n2 + 1 <= x2 <= k2):
                continue
            a = abs(rsum[(x1 + n1 - 1) * t2 + (x2 + n2 - 1)])
            if a > m:
                m = a
    return m


@njit(cache=True, nogil=True, inline="always")
def _lag_with_delta(rsum, vpol, n1, n2, k1, k2, d, x1, x2):
    t2 = 2 * n2 - 1
    r = rsum[(x1 + n1 - 1) * t2 + (x2 + n2 - 1)]
    j1 = k1 + x1
    j2 = k2 + x2
    if 0 <= j1 < n1 and 0 <= j2 < n2:
        r += d * np.conj(vpol[j2 * n1 + j1])
    i1 = k1 - x1
    i2 = k2 - x2
    if 0 <= i1 < n1 and 0 <= i2 < n2:
        r += np.conj(d) * vpol[i2 * n1 + i1]
    return abs(r)


@njit(cache=True, nogil=True)
def _affected_trial_max(rsum, vpol, n1, n2, k1, k2, d, mu, hot_x1, hot_x2, hot_affected):
    """Max of |rsum + delta| over lags affected by coordinate (k1, k2).

    Bails out (returns early with bailed=True) once any value strictly
    exceeds mu; the current binding lag is probed first since it is the
    most likely violator.
    """
    if hot_affected:
        a = _lag_with_delta(rsum, vpol, n1, n2, k1, k2, d, hot_x1, hot_x2)
        if a > mu:
            return a, hot_x1, hot_x2, True
        m = a
        am1 = hot_x1
        am2 = hot_x2
    else:
        m = -1.0
        am1 = 0
        am2 = 0
    # rectangle where the (k+xi) term exists
    for x1 in range(-k1, n1 - k1):
        for x2 in range(-k2, n2 - k2):
            if x1 == 0 and x2 == 0:
                continue
            if hot_affected and x1 == hot_x1 and x2 == hot_x2:
                continue
            a = _lag_with_delta(rsum, vpol, n1, n2, k1, k2, d, x1, x2)
            if a > mu:
                return a, x1, x2, True
            if a > m:
                m = a
                am1 = x1
                am2 = x2
    # rectangle where the (k-xi) term exists, minus the first rectangle
    for x1 in range(k1 - n1 + 1, k1 + 1):
        f1 = -k1 <= x1 <= n1 - 1 - k1
        for x2 in range(k2 - n2 + 1, k2 + 1):
            if x1 == 0 and x2 == 0:
                continue
            if f1 and -k2 <= x2 <= n2 - 1 - k2:
                continue
            if hot_affected and x1 == hot_x1 and x2 == hot_x2:
                continue
            a = _lag_with_delta(rsum, vpol, n1, n2, k1, k2, d, x1, x2)
            if a > mu:
                return a, x1, x2, True
            if a > m:
                m = a
                am1 = x1
                am2 = x2
    return m, am1, am2, False


@njit(cache=True, nogil=True)
def acf_commit(rsum, vpol, n1, n2, k1, k2, d, vnew):
    """Apply a value change d at coordinate (k1, k2) to the cached lag table.

    Lags where both shifted copies overlap the support receive both the
    d * conj(v) and conj(d) * v terms.
    """
    t2 = 2 * n2 - 1
    for x1 in range(-k1, n1 - k1):
        r2 = k1 - n1 + 1 <= x1 <= k1
        for x2 in range(-k2, n2 - k2):
            if x1 == 0 and x2 == 0:
                continue
            t = (x1 + n1 - 1) * t2 + (x2 + n2 - 1)
            rsum[t] += d * np.conj(vpol[(k2 + x2) * n1 + (k1 + x1)])
            if r2 and k2 - n2 + 1 <= x2 <= k2:
                rsum[t] += np.conj(d) * vpol[(k2 - x2) * n1 + (k1 - x1)]
    for x1 in range(k1 - n1 + 1, k1 + 1):
        f1 = -k1 <= x1 <= n1 - 1 - k1
        for x2 in range(k2 - n2 + 1, k2 + 1):
            if x1 == 0 and x2 == 0:
                continue
            if f1 and -k2 <= x2 <= n2 - 1 - k2:
                continue
            rsum[(x1 + n1 - 1) * t2 + (x2 + n2 - 1)] += np.conj(d) * vpol[(k2 - x2) * n1 + (k1 - x1)]
    # the (0, 0) lag is invariant under phase-only updates and never read
    # by the sidepeak objective, so it is deliberately left untouched
    vpol[k2 * n1 + k1] = vnew


@njit(cache=True, nogil=True)
def acf_refine_pass(v, omega, h, domega, rsum, n1, n2, l2_max, alpha, mcur, hot):
    """One full coordinate sweep of the sidepeak objective (utility -mcur).

    Implements the printed trial rule per coordinate: try +delta, on strict
    worsening try -delta from the entry value, restore and shrink the
    coordinate's increment when both worsen; non-worsening trials are kept.
    Utility-neutral accepted moves settle into an exactly periodic phase
    walk (the increment never shrinks while moves keep being kept); once
    the walk's phase values repeat bitwise the remaining trials are fast-
    forwarded by parity instead of stepped, which changes nothing but the
    floating-point accumulation order of the cached table.
    Returns the updated (max sidepeak, argmax lag index).
    """
    npp = n1 * n2
    t2 = 2 * n2 - 1
    for n in range(omega.size):
        p = 0 if n < npp else 1
        k = n - p * npp
        k1 = k % n1
        k2 = k // n1
        vpol = v[p * npp:(p + 1) * npp]
        mu = mcur
        qx1 = hot // t2 - (n1 - 1)
        qx2 = hot % t2 - (n2 - 1)
        q_aff = (0 <= k1 + qx1 < n1 and 0 <= k2 + qx2 < n2) or (
            0 <= k1 - qx1 < n1 and 0 <= k2 - qx2 < n2)
        mfro = _frozen_max(rsum, n1, n2, k1, k2)
        l2 = 0
        # bitwise history of the last four equal-utility accepts
        o0 = np.nan
        o1 = np.nan
        o2 = np.nan
        o3 = np.nan
        nacc = 0
        while mcur >= mu and l2 < l2_max:
            l2 += 1
            base = omega[n]
            om1 = base + domega[n]
            d1 = h[n] * np.exp(1j * om1) - vpol[k2 * n1 + k1]
            m1, a11, a12, bail1 = _affected_trial_max(
                rsum, vpol, n1, n2, k1, k2, d1, mu, qx1, qx2, q_aff)
            if bail1:
                qx1, qx2, q_aff = a11, a12, True
            elif mfro > m1:
                m1 = mfro
                a11 = -n1
            if bail1 or m1 > mu:
                om2 = base - domega[n]
                d2 = h[n] * np.exp(1j * om2) - vpol[k2 * n1 + k1]
                m2, a21, a22, bail2 = _affected_trial_max(
                    rsum, vpol, n1, n2, k1, k2, d2, mu, qx1, qx2, q_aff)
                if bail2:
                    qx1, qx2, q_aff = a21, a22, True
                elif mfro > m2:
                    m2 = mfro
                    a21 = -n1
                if bail2 or m2 > mu:
                    omega[n] = base
                    domega[n] *= alpha
                    nacc = 0
                else:
                    omega[n] = om2
                    acf_commit(rsum, vpol, n1, n2, k1, k2, d2, h[n] * np.exp(1j * om2))
                    mcur = m2
                    if a21 != -n1:
                        qx1, qx2, q_aff = a21, a22, True
                    o0, o1, o2, o3 = o1, o2, o3, om2
                    nacc += 1
            else:
                omega[n] = om1
                acf_commit(rsum, vpol, n1, n2, k1, k2, d1, h[n] * np.exp(1j * om1))
                mcur = m1
                if a11 != -n1:
                    qx1, qx2, q_aff = a11, a12, True
                o0, o1, o2, o3 = o1, o2, o3, om1
                nacc += 1
            if mcur == mu and nacc >= 4 and o3 == o1 and o2 == o0:
                # neutral two-cycle: remaining iterations alternate o2/o3
                remaining = l2_max - l2
                final = o3 if remaining % 2 == 0 else o2
                if final != omega[n]:
                    vnew = h[n] * np.exp(1j * final)
                    acf_commit(rsum, vpol, n1, n2, k1, k2,
                               vnew - vpol[k2 * n1 + k1], vnew)
                    omega[n] = final
                break
    return mcur, hot


@njit(cache=True, nogil=True)
def grid_objective(s, weights, mode):
    """Objective from cached inner products s (n_pol, n_dir).

    mode 0: weighted sum of per-direction powers; mode 1: minimum power.
    """
    npol, g = s.shape
    if mode == 0:
        tot = 0.0
        for i in range(g):
            pw = 0.0
            for p in range(npol):
                pw += abs(s[p, i]) ** 2
            tot += weights[i] * pw
        return tot
    m = np.inf
    for i in range(g):
        pw = 0.0
        for p in range(npol):
            pw += abs(s[p, i]) ** 2
        if pw < m:
            m = pw
    return m


@njit(cache=True, nogil=True, inline="always")
def _grid_power_at(s, steer_k, p, d, i):
    npol = s.shape[0]
    pw = 0.0
    for q in range(npol):
        if q == p:
            pw += abs(s[q, i] + d * steer_k[i]) ** 2
        else:
            pw += abs(s[q, i]) ** 2
    return pw


@njit(cache=True, nogil=True)
def _grid_trial(s, steer_k, p, d, weights, mode, mu, probe):
    """Objective after adding d * steer_k to polarization p's inner products.

    For the min objective the scan bails (fail, returning the violating
    direction) once any direction drops strictly below mu; the caller's
    probe direction is tested first.
    """
    npol, g = s.shape
    if mode == 0:
        tot = 0.0
        for i in range(g):
            tot += weights[i] * _grid_power_at(s, steer_k, p, d, i)
        return tot, tot < mu, 0
    pw = _grid_power_at(s, steer_k, p, d, probe)
    if pw < mu:
        return pw, True, probe
    m = pw
    am = probe
    for i in range(g):
        if i == probe:
            continue
        pw = _grid_power_at(s, steer_k, p, d, i)
        if pw < mu:
            return pw, True, i
        if pw < m:
            m = pw
            am = i
    return m, False, am


@njit(cache=True, nogil=True)
def grid_refine_pass(v, omega, h, domega, s, steer, weights, mode, l2_max, alpha, fcur):
    """One coordinate sweep of a grid power objective (maximized).

    steer has shape (n_pol, n_per_pol, n_dir); coordinate n lives on
    polarization n // n_per_pol.
    """
    npol, npp, g = steer.shape
    probe = 0
    for n in range(omega.size):
        p = n // npp
        k = n - p * npp
        mu = fcur
        l2 = 0
        while fcur <= mu and l2 < l2_max:
            l2 += 1
            base = omega[n]
            om1 = base + domega[n]
            d1 = h[n] * np.exp(1j * om1) - v[n]
            f1, fail1, probe = _grid_trial(s, steer[p, k], p, d1, weights, mode, mu, probe)
            if fail1:
                om2 = base - domega[n]
                d2 = h[n] * np.exp(1j * om2) - v[n]
                f2, fail2, probe = _grid_trial(s, steer[p, k], p, d2, weights, mode, mu, probe)
                if fail2:
                    omega[n] = base
                    domega[n] *= alpha
                else:
                    omega[n] = om2
                    for i in range(g):
                        s[p, i] += d2 * steer[p, k, i]
                    v[n] = h[n] * np.exp(1j * om2)
                    fcur = f2
            else:
                omega[n] = om1
                for i in range(g):
                    s[p, i] += d1 * steer[p, k, i]
                v[n] = h[n] * np.exp(1j * om1)
                fcur = f1
    return fcur
