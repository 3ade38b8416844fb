"""Jitted event loops for the three models.

All loops share one calling convention:

``clock``    float64[2] = (current micro time, time of the pending event)
``t_end``    advance while the pending event time is <= t_end
``gen``      numpy Generator owned by the calling state
``trk_*``    martingale trackers, one row per test function (may be empty):
             ``trk_lap``   Laplacian Delta_N G(x/N)
             ``trk_grad2`` (nabla^+_N G(x/N))**2
             ``trk_cur``   (m, 2) current drift (1/N) sum lap*eta and
                           carre du champ (1/N**2) sum grad2 * phi
             ``trk_int``   (m, 2) their time integrals in macroscopic time
``last``     float64[3] = (site, direction, payload) of the last event

Holding times come from inversion of the uniform draw, -log(1-U)/rate.
If the pending event lies beyond ``t_end`` the trackers are integrated up to
``t_end`` and the clock is parked there; the pending event is kept, so the
trajectory does not depend on where it is observed.
"""

from __future__ import annotations

import math

from numba import njit

from .fenwick import fen_add, fen_build, fen_find, fen_prefix

GKMP, DKMP, HARM = 0, 1, 2
STATUS_OK, STATUS_GROW = 0, 1
REBUILD_EVERY = 1 << 16


@njit(cache=True, nogil=True, inline="always")
def _phi(code, two_s, mix, a, b):
    """D (a-b)**2 - L_{x,x+1}(eta_x eta_{x+1}), closed forms."""
    if code == GKMP:
        return 0.5 * (a - b) ** 2 - ((a + b) ** 2 * mix - a * b)
    if code == DKMP:
        return 0.5 * (a - b) ** 2 - (a * a / 6.0 + b * b / 6.0 - 2.0 * a * b / 3.0 - a / 6.0 - b / 6.0)
    return (a * a + b * b + two_s * a + two_s * b) / (two_s * (two_s + 1.0))


@njit(cache=True, nogil=True, inline="always")
def _bonds_touch(eta, i, sign, code, two_s, mix, trk_grad2, trk_cur):
    """Add ``sign`` times the carre du champ terms of bonds i-1, i, i+1."""
    m = trk_grad2.shape[0]
    n = eta.shape[0]
    inv = 1.0 / (n * n)
    b0 = (i - 1) % n
    b1 = i % n
    b2 = (i + 1) % n
    for bb in range(3):
        if bb == 0:
            b = b0
        elif bb == 1:
            b = b1
            if b == b0:
                continue
        else:
            b = b2
            if b == b0 or b == b1:
                continue
        val = _phi(code, two_s, mix, float(eta[b]), float(eta[(b + 1) % n]))
        for j in range(m):
            trk_cur[j, 1] += sign * trk_grad2[j, b] * val * inv


@njit(cache=True, nogil=True, inline="always")
def _drift_touch(x, delta, n, trk_lap, trk_cur):
    for j in range(trk_lap.shape[0]):
        trk_cur[j, 0] += trk_lap[j, x] * delta / n


@njit(cache=True, nogil=True, inline="always")
def _integrate(dt_micro, n, trk_cur, trk_int):
    scale = dt_micro / (n * n)
    for j in range(trk_cur.shape[0]):
        trk_int[j, 0] += trk_cur[j, 0] * scale
        trk_int[j, 1] += trk_cur[j, 1] * scale


@njit(cache=True, nogil=True, inline="always")
def _uniform_index(gen, n):
    i = int(gen.random() * n)
    return n - 1 if i >= n else i


@njit(cache=True, nogil=True)
def advance_gkmp(eta, clock, t_end, gen, two_s, max_events, trk_lap, trk_grad2, trk_cur, trk_int, last):
    n = eta.shape[0]
    track = trk_lap.shape[0] > 0
    mix = two_s / 2.0 / (2.0 * two_s + 1.0)
    uniform = two_s == 1.0
    t = clock[0]
    tn = clock[1]
    rate = float(n)
    count = 0
    while count < max_events and tn <= t_end:
        if track:
            _integrate(tn - t, n, trk_cur, trk_int)
        t = tn
        i = _uniform_index(gen, n)
        j = (i + 1) % n
        # Beta(1, 1) is the uniform law
        u = gen.random() if uniform else gen.beta(two_s, two_s)
        old_i = eta[i]
        old_j = eta[j]
        total = old_i + old_j
        new_i = u * total
        if track:
            _bonds_touch(eta, i, -1.0, GKMP, two_s, mix, trk_grad2, trk_cur)
        eta[i] = new_i
        eta[j] = total - new_i
        if track:
            _drift_touch(i, new_i - old_i, n, trk_lap, trk_cur)
            _drift_touch(j, eta[j] - old_j, n, trk_lap, trk_cur)
            _bonds_touch(eta, i, 1.0, GKMP, two_s, mix, trk_grad2, trk_cur)
        last[0] = i
        last[1] = 1.0
        last[2] = u
        count += 1
        tn = t - math.log1p(-gen.random()) / rate
    if tn > t_end:
        if track:
            _integrate(t_end - t, n, trk_cur, trk_int)
        t = t_end
    clock[0] = t
    clock[1] = tn
    return count


@njit(cache=True, nogil=True)
def advance_dkmp(eta, clock, t_end, gen, max_events, trk_lap, trk_grad2, trk_cur, trk_int, last):
    n = eta.shape[0]
    track = trk_lap.shape[0] > 0
    t = clock[0]
    tn = clock[1]
    rate = float(n)
    count = 0
    while count < max_events and tn <= t_end:
        if track:
            _integrate(tn - t, n, trk_cur, trk_int)
        t = tn
        i = _uniform_index(gen, n)
        j = (i + 1) % n
        old_i = eta[i]
        old_j = eta[j]
        total = old_i + old_j
        r = _uniform_index(gen, total + 1)
        if track:
            _bonds_touch(eta, i, -1.0, DKMP, 1.0, 0.0, trk_grad2, trk_cur)
        eta[i] = r
        eta[j] = total - r
        if track:
            _drift_touch(i, float(r - old_i), n, trk_lap, trk_cur)
            _drift_touch(j, float(total - r - old_j), n, trk_lap, trk_cur)
            _bonds_touch(eta, i, 1.0, DKMP, 1.0, 0.0, trk_grad2, trk_cur)
        last[0] = i
        last[1] = 1.0
        last[2] = r
        count += 1
        tn = t - math.log1p(-gen.random()) / rate
    if tn > t_end:
        if track:
            _integrate(t_end - t, n, trk_cur, trk_int)
        t = t_end
    clock[0] = t
    clock[1] = tn
    return count


@njit(cache=True, nogil=True, inline="always")
def _pick_k(cum, off, n, target):
    """Smallest k in 1..n with cumulative rate C_k > target."""
    lo = 0
    hi = n - 1
    base = off[n]
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[base + mid] > target:
            hi = mid
        else:
            lo = mid + 1
    return lo + 1


@njit(cache=True, nogil=True)
def advance_harm(
    eta, clock, t_end, gen, two_s, max_events, cum, off, totals, cap, rates, tree, counter,
    trk_lap, trk_grad2, trk_cur, trk_int, last,
):
    """Harm loop; returns (events, status).

    ``cap`` is the largest occupation covered by the rate tables.  The caller
    guarantees 2 * max occupation <= cap (or passes a cap above the total
    mass), so the next jump can always be rated; an event that breaks this is
    fully applied and the loop stops with STATUS_GROW.  ``counter[0]`` counts
    events since the last tree rebuild.
    """
    n = eta.shape[0]
    track = trk_lap.shape[0] > 0
    size = 2 * n
    t = clock[0]
    tn = clock[1]
    count = 0
    status = STATUS_OK
    while count < max_events and tn <= t_end:
        if track:
            _integrate(tn - t, n, trk_cur, trk_int)
        t = tn
        total_rate = fen_prefix(tree, size)
        idx = fen_find(tree, gen.random() * total_rate)
        # rounding may land past the last positive entry
        while idx >= size or rates[idx] <= 0.0:
            idx -= 1
        x = idx >> 1
        direction = 1 if (idx & 1) == 0 else -1
        y = (x + direction) % n
        occ = eta[x]
        k = _pick_k(cum, off, occ, gen.random() * totals[occ])
        if k > occ:
            k = occ
        i = x if direction == 1 else y
        if track:
            _bonds_touch(eta, i, -1.0, HARM, two_s, 0.0, trk_grad2, trk_cur)
        eta[x] = occ - k
        eta[y] = eta[y] + k
        if track:
            _drift_touch(x, -float(k), n, trk_lap, trk_cur)
            _drift_touch(y, float(k), n, trk_lap, trk_cur)
            _bonds_touch(eta, i, 1.0, HARM, two_s, 0.0, trk_grad2, trk_cur)
        rx = totals[eta[x]]
        ry = totals[eta[y]]
        fen_add(tree, 2 * x, rx - rates[2 * x])
        fen_add(tree, 2 * x + 1, rx - rates[2 * x + 1])
        fen_add(tree, 2 * y, ry - rates[2 * y])
        fen_add(tree, 2 * y + 1, ry - rates[2 * y + 1])
        rates[2 * x] = rx
        rates[2 * x + 1] = rx
        rates[2 * y] = ry
        rates[2 * y + 1] = ry
        counter[0] += 1
        if counter[0] >= REBUILD_EVERY:
            fen_build(rates, tree)
            counter[0] = 0
        last[0] = x
        last[1] = direction
        last[2] = k
        count += 1
        total_rate = fen_prefix(tree, size)
        if total_rate > 0.0:
            tn = t - math.log1p(-gen.random()) / total_rate
        else:
            tn = math.inf
        if 2 * eta[y] > cap:
            status = STATUS_GROW
            break
    if status == STATUS_OK and tn > t_end:
        if track:
            _integrate(t_end - t, n, trk_cur, trk_int)
        t = t_end
    clock[0] = t
    clock[1] = tn
    return count, status


@njit(cache=True, nogil=True)
def coupled_gkmp(eta, xi, clock, t_end, gen, two_s, tol_ulps, violations):
    """Basic coupling: shared clocks and Beta fractions for two gKMP copies.

    Uses the same update arithmetic as :func:`advance_gkmp`.  After every
    event the two touched sites are checked for eta <= xi: ``violations[0]``
    counts exact (bitwise) violations, ``violations[1]`` those larger than
    ``tol_ulps`` units in the last place of xi.  Returns the event count.
    """
    n = eta.shape[0]
    uniform = two_s == 1.0
    t = clock[0]
    tn = clock[1]
    count = 0
    rate = float(n)
    while tn <= t_end:
        t = tn
        i = _uniform_index(gen, n)
        j = (i + 1) % n
        u = gen.random() if uniform else gen.beta(two_s, two_s)
        s_eta = eta[i] + eta[j]
        s_xi = xi[i] + xi[j]
        eta[i] = u * s_eta
        eta[j] = s_eta - eta[i]
        xi[i] = u * s_xi
        xi[j] = s_xi - xi[i]
        for site in (i, j):
            if eta[site] > xi[site]:
                violations[0] += 1
                ulp = math.ldexp(1.0, math.frexp(max(xi[site], 1e-300))[1] - 53)
                if eta[site] - xi[site] > tol_ulps * ulp:
                    violations[1] += 1
        count += 1
        tn = t - math.log1p(-gen.random()) / rate
    clock[0] = t_end
    clock[1] = tn
    return count
