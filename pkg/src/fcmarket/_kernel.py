"""Compiled simulation loop.

This is a line-by-line mirror of ``engine._run_python``, which composes the
public operations of ``market``, ``strategy`` and ``selforg``. Both consume
the same PCG64 stream in the same order and evaluate every floating point
expression in the same order, so their outputs are bit-identical; the test
suite checks this on small configurations.
"""

from __future__ import annotations

import math

import numba
import numpy as np

EXP_CAP = 50.0

STATUS_OK = 0
STATUS_OVERFLOW = 1


@numba.njit(cache=True)
def _window_mean(prices, end, M):
    # mean of prices[end - M : end], summed oldest first
    s = 0.0
    for k in range(end - M, end):
        s += prices[k]
    return s / M


@numba.njit(cache=True)
def _window_variance(prices, end, T):
    # two-pass sample variance of prices[end - T : end]
    s = 0.0
    for k in range(end - T, end):
        s += prices[k]
    mean = s / T
    acc = 0.0
    for k in range(end - T, end):
        d = prices[k] - mean
        acc += d * d
    return acc / (T - 1)


@numba.njit(cache=True)
def _sample_horizon(u, cumw):
    for j in range(cumw.shape[0]):
        if u < cumw[j]:
            return j
    return cumw.shape[0] - 1


@numba.njit(cache=True)
def simulate(
    rng,
    prices,
    start,
    steps,
    strat,
    hidx,
    n0,
    horizons,
    cumw,
    b,
    gamma,
    sigma,
    p_f,
    B,
    r,
    delta,
    exp_coupling,
    floor,
    var_window,
    selforg,
    theta_in,
    theta_out,
    flow_rate,
    n_min,
    n_max,
    entrant_proportional,
    burn_in,
    record_every,
    rec_step,
    rec_price,
    rec_ret,
    rec_nc,
    rec_nf,
    rec_n,
    rec_var,
):
    """Advance the market ``steps`` times starting from ``prices[start - 1]``.

    ``strat`` holds 1 for chartists and 0 for fundamentalists, ``hidx`` the
    index of each agent's horizon; both are mutated in place and must have
    capacity ``n_max`` when ``selforg`` is set. Returns
    ``(n_records, final_n, status)``.
    """
    n_h = horizons.shape[0]
    N = n0
    cnt_c = np.zeros(n_h, dtype=np.int64)
    for i in range(N):
        if strat[i] == 1:
            cnt_c[hidx[i]] += 1
    n_c = 0
    for j in range(n_h):
        n_c += cnt_c[j]

    pm = np.empty(n_h)
    p_fc = np.empty(n_h)
    n_rec = 0
    status = STATUS_OK
    use_floor = not math.isnan(floor)

    for t in range(1, steps + 1):
        i = start + t - 1  # index of p(t) to be written
        p = prices[i - 1]

        # (1) price update from pre-step composition
        xi = rng.standard_normal()
        chart = 0.0
        for j in range(n_h):
            M = horizons[j]
            pm[j] = _window_mean(prices, i - 1, M)
            chart += b * (p - pm[j]) / (M - 1) * (cnt_c[j] / N)
        n_f = N - n_c
        p_new = p + sigma * xi + chart + gamma * (p_f - p) * (n_f / N)
        if use_floor and p_new < floor:
            p_new = floor
        if not math.isfinite(p_new):
            status = STATUS_OVERFLOW
            break
        prices[i] = p_new

        # (2) synchronous strategy switching, draws in agent index order
        K = r / N
        e_f = 1.0
        if exp_coupling:
            e_f = math.exp(min(gamma * abs(p_f - p_new), EXP_CAP))
        p_cf = min(1.0, B * (1.0 + delta) * (K + n_f / N) * e_f)
        for j in range(n_h):
            M = horizons[j]
            e_c = 1.0
            if exp_coupling:
                pm[j] = _window_mean(prices, i, M)
                e_c = math.exp(min(b * abs(pm[j] - p_new) / (M - 1), EXP_CAP))
            p_fc[j] = min(1.0, B * (1.0 - delta) * (K + n_c / N) * e_c)
        for a in range(N):
            u = rng.random()
            if strat[a] == 1:
                if u < p_cf:
                    strat[a] = 0
                    cnt_c[hidx[a]] -= 1
            else:
                if u < p_fc[hidx[a]]:
                    strat[a] = 1
                    cnt_c[hidx[a]] += 1
        n_c = 0
        for j in range(n_h):
            n_c += cnt_c[j]

        # (3) rolling variance and threshold-driven entry/exit
        var = math.nan
        if var_window > 0:
            var = _window_variance(prices, i + 1, var_window)
        if selforg:
            if var > theta_in:
                n_add = min(flow_rate, n_max - N)
                frac_c = n_c / N
                for _ in range(n_add):
                    s = 0
                    if entrant_proportional:
                        if rng.random() < frac_c:
                            s = 1
                    h = 0
                    if n_h > 1:
                        h = _sample_horizon(rng.random(), cumw)
                    strat[N] = s
                    hidx[N] = h
                    if s == 1:
                        cnt_c[h] += 1
                        n_c += 1
                    N += 1
            elif var < theta_out:
                n_rem = min(flow_rate, N - n_min)
                for _ in range(n_rem):
                    k = int(rng.random() * N)
                    if strat[k] == 1:
                        cnt_c[hidx[k]] -= 1
                        n_c -= 1
                    N -= 1
                    strat[k] = strat[N]
                    hidx[k] = hidx[N]

        if t > burn_in and (t - burn_in) % record_every == 0:
            rec_step[n_rec] = t
            rec_price[n_rec] = p_new
            rec_ret[n_rec] = p_new - p
            rec_nc[n_rec] = n_c
            rec_nf[n_rec] = N - n_c
            rec_n[n_rec] = N
            rec_var[n_rec] = var
            n_rec += 1

    return n_rec, N, status
