"""Compiled inner loops.

Everything here works on plain arrays so the public modules can stay readable.
Random numbers come from ``numpy.random.Generator`` objects passed in by the
caller; inside a kernel only ``rng.random()`` is used for schedule sampling, so
the pure-numpy reference path in :mod:`netsde.sampling` reproduces the exact
same schedules from the same generator.

Process ids follow the jump-vector layout: ``p < n`` is the recovery process of
node ``p``; ``p >= n`` is the activation process of edge ``p - n``.
"""
import math

import numpy as np
from numba import njit

EULER = 0
TAYLOR2 = 1
EXACT = 2

_EPS = 2.220446049250313e-16


@njit(cache=True, nogil=True)
def poisson_icdf(lam, u):
    """Smallest k with P(Poisson(lam) <= k) >= u, Neumaier-compensated CDF sum."""
    if lam <= 0.0 or u <= 0.0:
        return 0
    p = math.exp(-lam)
    s = p
    c = 0.0
    k = 0
    while s + c < u:
        k += 1
        p = p * lam / k
        t = s + p
        if abs(s) >= abs(p):
            c += (s - t) + p
        else:
            c += (p - t) + s
        s = t
        # remaining tail is below rounding of the CDF itself
        if k > lam and p < _EPS * (s + c):
            break
    return k


@njit(cache=True, nogil=True)
def open_uniform(rng):
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return u


@njit(cache=True, nogil=True)
def draw_pair_counts(rng, lam, antithetic, za, zb):
    """Counts for both members of a trajectory pair (one uniform per process)."""
    P = lam.shape[0]
    for p in range(P):
        u = open_uniform(rng)
        za[p] = poisson_icdf(lam[p], 1.0 - u)
        if antithetic:
            zb[p] = poisson_icdf(lam[p], u)
    if not antithetic:
        for p in range(P):
            zb[p] = poisson_icdf(lam[p], 1.0 - open_uniform(rng))


@njit(cache=True, nogil=True)
def scatter(rng, z, T, times, pids):
    """Uniform event times for counts ``z``; returns number of events, sorted in place.

    Events are generated in process order and stably sorted by time, so exact
    ties resolve recoveries first, then edges by index.
    """
    k = 0
    for p in range(z.shape[0]):
        for _ in range(z[p]):
            times[k] = T * rng.random()
            pids[k] = p
            k += 1
    if k > 1:
        order = np.argsort(times[:k], kind="mergesort")
        tt = times[:k][order]
        pp = pids[:k][order]
        times[:k] = tt
        pids[:k] = pp
    return k


@njit(cache=True, nogil=True)
def bin_index(t, h, K):
    b = int(t / h)
    if b > K - 1:
        b = K - 1
    return b


@njit(cache=True, nogil=True)
def _record(node, delta, g, node_diff, mu_diff):
    node_diff[g, node] += delta
    mu_diff[g] += delta


@njit(cache=True, nogil=True)
def run_events(times, pids, ne, n, src, dst, X, stepper, h, K, record,
               node_diff, mu_diff, cnt, touched_p, raw, corr, newv, touched_n, mark_n):
    """Advance binary state ``X`` (in place) through a sorted event list.

    EXACT applies events one at a time; EULER and TAYLOR2 apply all events of a
    bin [kh, (k+1)h) using the state at the bin start.  Changes are recorded at
    grid index ``bin + 1`` when ``record`` is set.
    """
    e = 0
    while e < ne:
        b = bin_index(times[e], h, K)
        e2 = e + 1
        while e2 < ne and bin_index(times[e2], h, K) == b:
            e2 += 1
        g = b + 1
        if stepper == EXACT:
            for q in range(e, e2):
                p = pids[q]
                if p < n:
                    if X[p] == 1:
                        X[p] = 0
                        if record:
                            _record(p, -1, g, node_diff, mu_diff)
                else:
                    ed = p - n
                    j = dst[ed]
                    if X[src[ed]] == 1 and X[j] == 0:
                        X[j] = 1
                        if record:
                            _record(j, 1, g, node_diff, mu_diff)
            e = e2
            continue

        nt = 0
        for q in range(e, e2):
            p = pids[q]
            if cnt[p] == 0:
                touched_p[nt] = p
                nt += 1
            cnt[p] += 1
        nn = 0
        for a in range(nt):
            p = touched_p[a]
            if p < n:
                node = p
                coef = -np.int64(X[p])
            else:
                ed = p - n
                node = dst[ed]
                coef = np.int64(1 - X[node]) * X[src[ed]]
            if mark_n[node] == 0:
                mark_n[node] = 1
                touched_n[nn] = node
                nn += 1
                raw[node] = 0
                corr[node] = 0
            raw[node] += coef * cnt[p]

        if stepper == TAYLOR2:
            # clamped Euler predictor; untouched nodes keep X
            for a in range(nn):
                node = touched_n[a]
                v = X[node] + raw[node]
                newv[node] = 1 if v > 0 else 0
            for a in range(nt):
                p = touched_p[a]
                d = cnt[p]
                if d < 2:
                    continue
                w = d * (d - 1) // 2
                if p < n:
                    diff = -(np.int64(newv[p]) - X[p])
                    corr[p] += w * diff
                else:
                    ed = p - n
                    i = src[ed]
                    j = dst[ed]
                    xi_half = newv[i] if mark_n[i] == 1 else X[i]
                    xj_half = newv[j]
                    diff = np.int64(1 - xj_half) * xi_half - np.int64(1 - X[j]) * X[i]
                    corr[j] += w * diff

        for a in range(nn):
            node = touched_n[a]
            v = X[node] + raw[node] + corr[node]
            newv[node] = 1 if v >= 1 else 0
        for a in range(nn):
            node = touched_n[a]
            if newv[node] != X[node]:
                if record:
                    _record(node, np.int64(newv[node]) - X[node], g, node_diff, mu_diff)
                X[node] = newv[node]
            mark_n[node] = 0
        for a in range(nt):
            cnt[touched_p[a]] = 0
        e = e2


@njit(cache=True, nogil=True)
def _workspace(n, P):
    return (np.zeros(P, np.int64), np.zeros(P, np.int64), np.zeros(n, np.int64),
            np.zeros(n, np.int64), np.zeros(n, np.int8), np.zeros(n, np.int64),
            np.zeros(n, np.int8))


@njit(cache=True, nogil=True)
def _capacity(lam):
    # generous initial buffer; grown on demand
    tot = 0.0
    for p in range(lam.shape[0]):
        tot += lam[p]
    return int(tot + 10.0 * math.sqrt(tot + 1.0)) + 16


@njit(cache=True, nogil=True)
def _ensure(times, pids, need):
    if need <= times.shape[0]:
        return times, pids
    size = max(need, 2 * times.shape[0])
    return np.empty(size, np.float64), np.empty(size, np.int64)


@njit(cache=True, nogil=True)
def estimator_block(rng, n_pairs, lam, n, src, dst, x0, T, h, K, stepper, antithetic,
                    node_diff, pair_sum, pair_sumsq, terminal):
    """Algorithm-1 estimator over ``n_pairs`` trajectory pairs.

    Accumulates per-node activity changes into ``node_diff`` (cumulative sum
    gives active counts per grid point), the sums of pair-averaged total
    influence and its squares, and the terminal total influence per trajectory.
    """
    P = lam.shape[0]
    za = np.zeros(P, np.int64)
    zb = np.zeros(P, np.int64)
    cap = _capacity(lam)
    times = np.empty(cap, np.float64)
    pids = np.empty(cap, np.int64)
    cnt, touched_p, raw, corr, newv, touched_n, mark_n = _workspace(n, P)
    mu_a = np.zeros(K + 2, np.int64)
    mu_b = np.zeros(K + 2, np.int64)
    X = np.empty(n, np.int8)
    mu0 = 0
    for i in range(n):
        mu0 += x0[i]
    for pair in range(n_pairs):
        draw_pair_counts(rng, lam, antithetic, za, zb)
        for member in range(2):
            z = za if member == 0 else zb
            mu = mu_a if member == 0 else mu_b
            need = 0
            for p in range(P):
                need += z[p]
            times, pids = _ensure(times, pids, need)
            ne = scatter(rng, z, T, times, pids)
            mu[:] = 0
            X[:] = x0
            run_events(times, pids, ne, n, src, dst, X, stepper, h, K, True,
                       node_diff, mu, cnt, touched_p, raw, corr, newv, touched_n, mark_n)
            s = 0
            for i in range(n):
                s += X[i]
            terminal[2 * pair + member] = s
        acc_a = mu0
        acc_b = mu0
        for k in range(K + 1):
            if k > 0:
                acc_a += mu_a[k]
                acc_b += mu_b[k]
            v = 0.5 * (acc_a + acc_b)
            pair_sum[k] += v
            pair_sumsq[k] += v * v


@njit(cache=True, nogil=True)
def bias_block(rng, n_pairs, lam, n, src, dst, x0, T, hs, steppers, antithetic, node,
               diff_sum, diff_sumsq, exact_sum, exact_sumsq):
    """Paired terminal-value differences g(X^h(T)) - g(X(T)) on shared schedules.

    ``node < 0`` selects total influence, otherwise the marginal of ``node``.
    Difference sums are over pair averages; exact sums are per trajectory.
    """
    P = lam.shape[0]
    C = hs.shape[0]
    za = np.zeros(P, np.int64)
    zb = np.zeros(P, np.int64)
    cap = _capacity(lam)
    times = np.empty(cap, np.float64)
    pids = np.empty(cap, np.int64)
    cnt, touched_p, raw, corr, newv, touched_n, mark_n = _workspace(n, P)
    dummy2 = np.zeros((1, 1), np.int64)
    dummy1 = np.zeros(1, np.int64)
    X = np.empty(n, np.int8)
    d_pair = np.zeros(C)
    for pair in range(n_pairs):
        draw_pair_counts(rng, lam, antithetic, za, zb)
        d_pair[:] = 0.0
        for member in range(2):
            z = za if member == 0 else zb
            need = 0
            for p in range(P):
                need += z[p]
            times, pids = _ensure(times, pids, need)
            ne = scatter(rng, z, T, times, pids)
            X[:] = x0
            run_events(times, pids, ne, n, src, dst, X, EXACT, 1.0, 1, False,
                       dummy2, dummy1, cnt, touched_p, raw, corr, newv, touched_n, mark_n)
            g_exact = _g(X, node)
            exact_sum[0] += g_exact
            exact_sumsq[0] += g_exact * g_exact
            for c in range(C):
                K = int(round(T / hs[c]))
                X[:] = x0
                run_events(times, pids, ne, n, src, dst, X, steppers[c], hs[c], K, False,
                           dummy2, dummy1, cnt, touched_p, raw, corr, newv, touched_n, mark_n)
                d_pair[c] += 0.5 * (_g(X, node) - g_exact)
        for c in range(C):
            diff_sum[c] += d_pair[c]
            diff_sumsq[c] += d_pair[c] * d_pair[c]


@njit(cache=True, nogil=True)
def _g(X, node):
    if node >= 0:
        return float(X[node])
    s = 0
    for i in range(X.shape[0]):
        s += X[i]
    return float(s)


# ---------------------------------------------------------------------------
# exact continuous-time simulation (Gillespie direct method)


@njit(cache=True, nogil=True)
def _inflow(j, X, parent_ptr, src, alpha):
    s = 0.0
    for e in range(parent_ptr[j], parent_ptr[j + 1]):
        if X[src[e]] == 1:
            s += alpha[e]
    return s


@njit(cache=True, nogil=True)
def gillespie_run(rng, n, parent_ptr, src, alpha, child_ptr, child_dst, gamma, x0, T,
                  ev_t, ev_node, ev_type):
    """One exact SIS/SI cascade; returns (count, ev_t, ev_node, ev_type).

    ``ev_type`` is +1 for activation, -1 for recovery.  Buffers grow as needed.
    """
    X = x0.copy()
    act = np.zeros(n)
    rec = np.zeros(n)
    for j in range(n):
        if X[j] == 1:
            rec[j] = gamma[j]
        else:
            act[j] = _inflow(j, X, parent_ptr, src, alpha)
    t = 0.0
    k = 0
    while True:
        total = 0.0
        for j in range(n):
            total += act[j] + rec[j]
        if total <= 0.0:
            break
        t += rng.exponential() / total
        if t > T:
            break
        r = rng.random() * total
        chosen = -1
        kind = 0
        last = -1
        last_kind = 0
        for j in range(n):
            if act[j] > 0.0:
                last = j
                last_kind = 1
                r -= act[j]
                if r < 0.0:
                    chosen = j
                    kind = 1
                    break
            if rec[j] > 0.0:
                last = j
                last_kind = -1
                r -= rec[j]
                if r < 0.0:
                    chosen = j
                    kind = -1
                    break
        if chosen < 0:
            chosen = last
            kind = last_kind
        j = chosen
        if kind == 1:
            X[j] = 1
            act[j] = 0.0
            rec[j] = gamma[j]
        else:
            X[j] = 0
            rec[j] = 0.0
            act[j] = _inflow(j, X, parent_ptr, src, alpha)
        for q in range(child_ptr[j], child_ptr[j + 1]):
            c = child_dst[q]
            if X[c] == 0:
                act[c] = _inflow(c, X, parent_ptr, src, alpha)
        if k == ev_t.shape[0]:
            nt = np.empty(2 * k + 16)
            nn = np.empty(2 * k + 16, np.int64)
            ny = np.empty(2 * k + 16, np.int8)
            nt[:k] = ev_t[:k]
            nn[:k] = ev_node[:k]
            ny[:k] = ev_type[:k]
            ev_t, ev_node, ev_type = nt, nn, ny
        ev_t[k] = t
        ev_node[k] = j
        ev_type[k] = kind
        k += 1
    return k, ev_t, ev_node, ev_type


@njit(cache=True, nogil=True)
def accumulate_events(k, ev_t, ev_node, ev_type, grid, node_diff, mu_diff):
    """Right-continuous grid accumulation: an event at t shows from the first grid point >= t."""
    K1 = grid.shape[0]
    for q in range(k):
        g = np.searchsorted(grid, ev_t[q])
        if g < K1:
            node_diff[g, ev_node[q]] += ev_type[q]
            mu_diff[g] += ev_type[q]


@njit(cache=True, nogil=True)
def _mu_moments(mu0, mu_diff, K1, mu_sum, mu_sumsq):
    acc = mu0
    for g in range(K1):
        acc += mu_diff[g]
        mu_sum[g] += acc
        mu_sumsq[g] += acc * acc


@njit(cache=True, nogil=True)
def gillespie_block(rng, n_runs, n, parent_ptr, src, alpha, child_ptr, child_dst, gamma, x0, T,
                    grid, node_diff, mu_sum, mu_sumsq):
    ev_t = np.empty(64)
    ev_node = np.empty(64, np.int64)
    ev_type = np.empty(64, np.int8)
    K1 = grid.shape[0]
    mu_diff = np.zeros(K1 + 1, np.int64)
    mu0 = 0
    for i in range(n):
        mu0 += x0[i]
    for _ in range(n_runs):
        k, ev_t, ev_node, ev_type = gillespie_run(rng, n, parent_ptr, src, alpha, child_ptr,
                                                  child_dst, gamma, x0, T, ev_t, ev_node, ev_type)
        mu_diff[:] = 0
        accumulate_events(k, ev_t, ev_node, ev_type, grid, node_diff, mu_diff)
        _mu_moments(mu0, mu_diff, K1, mu_sum, mu_sumsq)


# ---------------------------------------------------------------------------
# time-varying and state-dependent intensities


@njit(cache=True, nogil=True)
def hazard(alpha, shape, u):
    if shape == 1.0:
        return alpha
    return shape * alpha ** shape * u ** (shape - 1.0)


@njit(cache=True, nogil=True)
def _node_intensity(j, X, clock, parent_ptr, src, alpha, shape, cap, shift):
    """Activation intensity of inactive ``j`` with parent clocks advanced by ``shift``."""
    s = 0.0
    for e in range(parent_ptr[j], parent_ptr[j + 1]):
        i = src[e]
        if X[i] == 1:
            s += hazard(alpha[e], shape[e], clock[i] + shift)
    if s > cap[j]:
        s = cap[j]
    return s


@njit(cache=True, nogil=True)
def thinning_run(rng, n, parent_ptr, src, alpha, shape, cap, gamma, x0, T, window,
                 ev_t, ev_node, ev_type):
    """Exact simulation with nondecreasing hazards by windowed thinning.

    Parent clocks (time since last activation) only grow between events, so the
    intensity at the end of the current window bounds it over the window.
    """
    X = x0.copy()
    clock = np.zeros(n)
    bound = np.zeros(n)
    t = 0.0
    k = 0
    while t < T:
        t_end = min(t + window, T)
        dt_w = t_end - t
        total = 0.0
        for j in range(n):
            if X[j] == 1:
                bound[j] = gamma[j]
            else:
                bound[j] = _node_intensity(j, X, clock, parent_ptr, src, alpha, shape, cap, dt_w)
            total += bound[j]
        if total <= 0.0:
            # nothing can fire inside the window; stop if nothing can ever fire
            live = False
            for j in range(n):
                if X[j] == 0 and parent_ptr[j + 1] > parent_ptr[j]:
                    for e in range(parent_ptr[j], parent_ptr[j + 1]):
                        if X[src[e]] == 1:
                            live = True
            if not live:
                break
            for j in range(n):
                if X[j] == 1:
                    clock[j] += dt_w
            t = t_end
            continue
        dt = rng.exponential() / total
        if t + dt >= t_end:
            for j in range(n):
                if X[j] == 1:
                    clock[j] += dt_w
            t = t_end
            continue
        t += dt
        for j in range(n):
            if X[j] == 1:
                clock[j] += dt
        r = rng.random() * total
        j = -1
        for q in range(n):
            if bound[q] > 0.0:
                j = q
                r -= bound[q]
                if r < 0.0:
                    break
        if X[j] == 1:
            true_rate = gamma[j]
        else:
            true_rate = _node_intensity(j, X, clock, parent_ptr, src, alpha, shape, cap, 0.0)
        if rng.random() * bound[j] >= true_rate:
            continue
        if X[j] == 1:
            X[j] = 0
            clock[j] = 0.0
            kind = -1
        else:
            X[j] = 1
            clock[j] = 0.0
            kind = 1
        if k == ev_t.shape[0]:
            nt = np.empty(2 * k + 16)
            nn = np.empty(2 * k + 16, np.int64)
            ny = np.empty(2 * k + 16, np.int8)
            nt[:k] = ev_t[:k]
            nn[:k] = ev_node[:k]
            ny[:k] = ev_type[:k]
            ev_t, ev_node, ev_type = nt, nn, ny
        ev_t[k] = t
        ev_node[k] = j
        ev_type[k] = kind
        k += 1
    return k, ev_t, ev_node, ev_type


@njit(cache=True, nogil=True)
def thinning_block(rng, n_runs, n, parent_ptr, src, alpha, shape, cap, gamma, x0, T, window,
                   grid, node_diff, mu_sum, mu_sumsq):
    ev_t = np.empty(64)
    ev_node = np.empty(64, np.int64)
    ev_type = np.empty(64, np.int8)
    K1 = grid.shape[0]
    mu_diff = np.zeros(K1 + 1, np.int64)
    mu0 = 0
    for i in range(n):
        mu0 += x0[i]
    for _ in range(n_runs):
        k, ev_t, ev_node, ev_type = thinning_run(rng, n, parent_ptr, src, alpha, shape, cap, gamma,
                                                 x0, T, window, ev_t, ev_node, ev_type)
        mu_diff[:] = 0
        accumulate_events(k, ev_t, ev_node, ev_type, grid, node_diff, mu_diff)
        _mu_moments(mu0, mu_diff, K1, mu_sum, mu_sumsq)


@njit(cache=True, nogil=True)
def tv_euler_run(rng, n, parent_ptr, src, alpha, shape, cap, gamma, x0, h, K,
                 node_diff, mu_diff, record, X, clock):
    """Euler path of the augmented (state, clock) system on the uniform grid.

    Per bin, a node's activation increment is Poisson with mean equal to its
    intensity at the bin's left endpoint times h; recoveries likewise.
    """
    X[:] = x0
    clock[:] = 0.0
    new = np.empty(n, np.int8)
    for k in range(K):
        for j in range(n):
            new[j] = X[j]
            if X[j] == 1:
                if gamma[j] > 0.0 and rng.poisson(gamma[j] * h) > 0:
                    new[j] = 0
            else:
                lam = _node_intensity(j, X, clock, parent_ptr, src, alpha, shape, cap, 0.0)
                if lam > 0.0 and rng.poisson(lam * h) > 0:
                    new[j] = 1
        for j in range(n):
            if new[j] == 1 and X[j] == 1:
                clock[j] += h
            else:
                clock[j] = 0.0
            if new[j] != X[j]:
                if record:
                    _record(j, np.int64(new[j]) - X[j], k + 1, node_diff, mu_diff)
                X[j] = new[j]


@njit(cache=True, nogil=True)
def tv_euler_block(rng, n_runs, n, parent_ptr, src, alpha, shape, cap, gamma, x0, h, K,
                   node_diff, mu_sum, mu_sumsq):
    mu_diff = np.zeros(K + 2, np.int64)
    X = np.empty(n, np.int8)
    clock = np.empty(n)
    mu0 = 0
    for i in range(n):
        mu0 += x0[i]
    for _ in range(n_runs):
        mu_diff[:] = 0
        tv_euler_run(rng, n, parent_ptr, src, alpha, shape, cap, gamma, x0, h, K,
                     node_diff, mu_diff, True, X, clock)
        _mu_moments(mu0, mu_diff, K + 1, mu_sum, mu_sumsq)
