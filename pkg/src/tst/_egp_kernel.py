"""Compiled event loop for the continuous-time processes.

Same semantics as the pure-python engine in egp.py, expressed over numpy
arrays so numba can compile it.  The caller owns all buffers and resumes
the kernel whenever it returns for more random numbers or event capacity;
the random stream is consumed one (uniform, exponential) pair per event,
identically to the reference loop.

Status codes: 0 need random numbers, 1 target reached, 2 event budget
exhausted, 3 event arrays full, 4 absorbing state, 5 self-check failed.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True, fastmath=False)
def _dyad_rate(adj, deg, i_of, j_of, match1, match2, tmask1, tmask2, th, code, nu, k):
    i = i_of[k]
    j = j_of[k]
    n = deg.shape[0]
    present = adj[i, j]
    dd1 = 0
    dd2 = 0
    for m in range(n):
        c = adj[i, m] & adj[j, m]
        dd1 += c & tmask1[k, m]
        dd2 += c & tmask2[k, m]
    d2s = deg[i] + deg[j] - (2 if present else 0)
    mag = th[0] + th[1] * d2s + th[2] * match1[k] + th[3] * match2[k] + th[4] * dd1 + th[5] * dd2
    dq = -mag if present else mag
    adding = present == 0
    if code == 0:
        if dq >= 0.0:
            return 1.0 / (1.0 + math.exp(-dq))
        e = math.exp(dq)
        return e / (1.0 + e)
    if code == 1:
        return 1.0 if dq >= 0.0 else math.exp(dq)
    if code == 2:
        return nu * math.exp(dq) if adding else nu
    return nu if adding else nu * math.exp(dq)


@numba.njit(cache=True, fastmath=False)
def _recount_ok(adj, deg, i_of, j_of, match1, match2, tmask1, tmask2, cur):
    n = deg.shape[0]
    nd = i_of.shape[0]
    t_e = 0
    t_m1 = 0
    t_m2 = 0
    t_d1 = 0
    t_d2 = 0
    for k in range(nd):
        i = i_of[k]
        j = j_of[k]
        if adj[i, j]:
            t_e += 1
            t_m1 += match1[k]
            t_m2 += match2[k]
            for m in range(n):
                c = adj[i, m] & adj[j, m]
                t_d1 += c & tmask1[k, m]
                t_d2 += c & tmask2[k, m]
    t_2s = 0
    for v in range(n):
        t_2s += deg[v] * (deg[v] - 1) // 2
    return (
        t_e == cur[0] and t_2s == cur[1] and t_m1 == cur[2]
        and t_m2 == cur[3] and t_d1 // 3 == cur[4] and t_d2 // 3 == cur[5]
    )


@numba.njit(cache=True, fastmath=False)
def until_target_kernel(
    adj, deg, cur, i_of, j_of, match1, match2, tmask1, tmask2,
    pair_index, th, code, nu, truncate, source, has_target, target,
    rates, fstate, istate, times, dyads, ev_stats,
    start_adj, start_deg, us, es, max_events, check_every,
):
    n = deg.shape[0]
    nd = i_of.shape[0]
    for k in range(nd):
        rates[k] = _dyad_rate(adj, deg, i_of, j_of, match1, match2, tmask1, tmask2, th, code, nu, k)
    t = fstate[0]
    t0 = fstate[1]
    done = istate[0]
    wp = istate[1]
    bp = istate[2]
    cap = times.shape[0]
    nbuf = us.shape[0]
    status = np.int64(0)
    while True:
        if done >= max_events:
            status = 2
            break
        if bp >= nbuf:
            status = 0
            break
        if wp >= cap:
            status = 3
            break
        total = 0.0
        for k in range(nd):
            total += rates[k]
        if total <= 0.0:
            status = 4
            break
        thr = us[bp] * total
        e = es[bp]
        bp += 1
        acc = 0.0
        pick = -1
        last_pos = -1
        for k in range(nd):
            r = rates[k]
            if r > 0.0:
                last_pos = k
            acc += r
            if thr < acc:
                pick = k
                break
        if pick < 0:
            pick = last_pos
        dt = e / total
        t_new = t + dt
        if t_new == t:
            t_new = np.nextafter(t, np.inf)
        t = t_new

        i = i_of[pick]
        j = j_of[pick]
        present = adj[i, j]
        sign = -1 if present else 1
        d2s = deg[i] + deg[j] - (2 if present else 0)
        dd1 = 0
        dd2 = 0
        for m in range(n):
            c = adj[i, m] & adj[j, m]
            dd1 += c & tmask1[pick, m]
            dd2 += c & tmask2[pick, m]
        flip = np.uint8(0) if present else np.uint8(1)
        adj[i, j] = flip
        adj[j, i] = flip
        deg[i] += sign
        deg[j] += sign
        cur[0] += sign
        cur[1] += sign * d2s
        cur[2] += sign * match1[pick]
        cur[3] += sign * match2[pick]
        cur[4] += sign * dd1
        cur[5] += sign * dd2
        for w in range(n):
            if w != i:
                kk = pair_index[i, w]
                rates[kk] = _dyad_rate(adj, deg, i_of, j_of, match1, match2, tmask1, tmask2, th, code, nu, kk)
            if w != j:
                kk = pair_index[j, w]
                rates[kk] = _dyad_rate(adj, deg, i_of, j_of, match1, match2, tmask1, tmask2, th, code, nu, kk)
        done += 1
        if done % check_every == 0:
            if not _recount_ok(adj, deg, i_of, j_of, match1, match2, tmask1, tmask2, cur):
                status = 5
                break

        if truncate == 1:
            at_source = True
            for c6 in range(6):
                if cur[c6] != source[c6]:
                    at_source = False
                    break
            if at_source:
                wp = 0
                t0 = t
                for a in range(n):
                    start_deg[a] = deg[a]
                    for b in range(n):
                        start_adj[a, b] = adj[a, b]
                continue
        times[wp] = t
        dyads[wp, 0] = i
        dyads[wp, 1] = j
        for c6 in range(6):
            ev_stats[wp, c6] = cur[c6]
        wp += 1
        if has_target == 1:
            at_target = True
            for c6 in range(6):
                if cur[c6] != target[c6]:
                    at_target = False
                    break
            if at_target:
                status = 1
                break
    fstate[0] = t
    fstate[1] = t0
    istate[0] = done
    istate[1] = wp
    istate[2] = bp
    return status
