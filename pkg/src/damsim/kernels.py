"""Hot numeric inner loops.

Every kernel here is a plain Python function compiled with ``@njit`` unless
``DAMSIM_BACKEND=numpy`` is set (see :mod:`damsim._accel`).  The uncompiled
bodies are the fallback path; they produce bit-identical results.  Kernels
are deliberately free of Python objects: flat arrays in, flat arrays out.
"""

import numpy as np

from ._accel import jit_kernel, jit_parallel, prange


def _soft(z, g):
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


# callees must already be dispatchers when the callers compile
_soft = jit_kernel(_soft)


def _cd_gram_sweeps(gram, m, xty, beta, s, lam, yty, tol, max_sweeps, obj_trace):
    """Coordinate descent on the Gram formulation of ||y - Xb||^2 + lam*||b||_1.

    gram[:m, :m] holds X'X for the working columns, xty[:m] holds X'y and
    s[:m] is maintained as gram @ beta.  beta and s are updated in place.
    obj_trace[k] receives the objective after sweep k; returns the number of
    sweeps run.
    """
    half = 0.5 * lam
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(m):
            gjj = gram[j, j]
            if gjj <= 0.0:
                continue
            bj = beta[j]
            cj = xty[j] - (s[j] - gjj * bj)
            nb = _soft(cj, half) / gjj
            if nb != bj:
                d = nb - bj
                for k in range(m):
                    s[k] += gram[k, j] * d
                beta[j] = nb
                ad = abs(d)
                if ad > max_delta:
                    max_delta = ad
        f = yty
        l1 = 0.0
        for j in range(m):
            f += beta[j] * (s[j] - 2.0 * xty[j])
            l1 += abs(beta[j])
        obj_trace[sweep] = f + lam * l1
        if max_delta < tol:
            return sweep + 1
    return max_sweeps


def _cd_residual_sweeps(x, col_sq, beta, resid, lam, tol, max_sweeps, obj_trace):
    """Naive residual-update coordinate descent for ||y - Xb||^2 + lam*||b||_1.

    resid must enter as y - X @ beta and is updated in place along with beta.
    Used directly for small dense problems and as the reference for the Gram
    variant.
    """
    n, p = x.shape
    half = 0.5 * lam
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            cj = col_sq[j]
            if cj <= 0.0:
                continue
            bj = beta[j]
            rho = cj * bj
            for i in range(n):
                rho += x[i, j] * resid[i]
            nb = _soft(rho, half) / cj
            if nb != bj:
                d = nb - bj
                for i in range(n):
                    resid[i] -= d * x[i, j]
                beta[j] = nb
                ad = abs(d)
                if ad > max_delta:
                    max_delta = ad
        rss = 0.0
        for i in range(n):
            rss += resid[i] * resid[i]
        l1 = 0.0
        for j in range(p):
            l1 += abs(beta[j])
        obj_trace[sweep] = rss + lam * l1
        if max_delta < tol:
            return sweep + 1
    return max_sweeps


def _grouped_side_at(vols, prof, q):
    """Cumulative curve value at tick q from group volumes and stored profiles.

    Accumulation order over groups is fixed; reconstruction uses the same
    order so grouped clearing and full-curve clearing agree exactly.
    """
    acc = 0.0
    for g in range(vols.shape[0]):
        acc += vols[g] * prof[g, q]
    return acc


_grouped_side_at = jit_kernel(_grouped_side_at)


def _clear_grouped(svol, dvol, sprof, dprof):
    """Lowest grid tick where grouped supply meets grouped demand.

    Bisection is exact here because both sides are built as fixed-order sums
    of monotone per-group terms, which keeps the float comparison pattern
    monotone along the grid.
    """
    n_q = sprof.shape[1]
    if _grouped_side_at(svol, sprof, 0) >= _grouped_side_at(dvol, dprof, 0):
        return 0
    hi = n_q - 1
    if _grouped_side_at(svol, sprof, hi) < _grouped_side_at(dvol, dprof, hi):
        return hi
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _grouped_side_at(svol, sprof, mid) >= _grouped_side_at(dvol, dprof, mid):
            hi = mid
        else:
            lo = mid
    return hi


_clear_grouped = jit_kernel(_clear_grouped)


def _simulate_path(
    # physical block
    phys_det, phys_ptr, phys_proc, phys_lag, phys_coef, phys_nonneg, phys_hist, phys_arch,
    # truth panels consumed by the expectation equations
    ypan_src, ypan_hist, ypan_capfac,
    # planned-process equations
    z_wd_det, z_ptr, z_kind, z_src, z_hour, z_lag, z_coef, z_hist, z_arch,
    # bid-group equations
    b_wd_det, b_ptr, b_kind, b_src, b_hour, b_lag, b_coef, b_hist, b_arch,
    # market clearing
    sup_idx, dem_idx, sup_prof, dem_prof,
    # controls and outputs
    draw_idx, weekdays, shock_scale, price_out,
    retain, phys_out, z_out, b_out,
):
    """Step one bootstrap path over the whole horizon.

    Returns (failed_day, clamp_count) where failed_day is -1 for an intact
    path and otherwise the day index at which a non-finite value appeared.
    price_out (horizon, 24) receives clearing-price grid ticks.  With
    retain != 0 the simulated physical, expectation and bid panels are
    copied into phys_out/z_out/b_out, each shaped (series, horizon, 24).
    """
    n_proc = phys_det.shape[0]
    hist_h = phys_hist.shape[1]
    horizon = draw_idx.shape[0]
    n_y = ypan_src.shape[0]
    n_z = z_wd_det.shape[0]
    n_b = b_wd_det.shape[0]
    lag_days = ypan_hist.shape[1]

    buf = np.empty((n_proc, hist_h + horizon * 24))
    buf[:, :hist_h] = phys_hist
    ypan = np.empty((n_y, lag_days + horizon, 24))
    ypan[:, :lag_days, :] = ypan_hist
    zpan = np.empty((n_z, lag_days + horizon, 24))
    zpan[:, :lag_days, :] = z_hist
    bpan = np.empty((n_b, lag_days + horizon, 24))
    bpan[:, :lag_days, :] = b_hist
    svol = np.empty(sup_idx.shape[0])
    dvol = np.empty(dem_idx.shape[0])

    clamped = 0
    for d in range(horizon):
        ai = draw_idx[d]
        wd = weekdays[d]

        # physical system, hour-major so lag-0 edges see this hour's values
        for h in range(24):
            t = hist_h + d * 24 + h
            for i in range(n_proc):
                acc = phys_det[i, d * 24 + h]
                for m in range(phys_ptr[i], phys_ptr[i + 1]):
                    acc += phys_coef[m] * buf[phys_proc[m], t - phys_lag[m]]
                acc += shock_scale * phys_arch[ai, i, h]
                if phys_nonneg[i] and acc < 0.0:
                    acc = 0.0
                if not np.isfinite(acc):
                    return d, clamped
                buf[i, t] = acc

        # absolute truth panels (capacity back-transformation folded in)
        for s in range(n_y):
            for h in range(24):
                ypan[s, lag_days + d, h] = (
                    buf[ypan_src[s], hist_h + d * 24 + h] * ypan_capfac[s, d, h]
                )

        # day-ahead expectations for day d, conditioning on the simulated truth
        for i in range(n_z):
            for h in range(24):
                e = i * 24 + h
                acc = z_wd_det[i, h, wd]
                for m in range(z_ptr[e], z_ptr[e + 1]):
                    dd = lag_days + d - z_lag[m]
                    if z_kind[m] == 0:
                        acc += z_coef[m] * ypan[z_src[m], dd, z_hour[m]]
                    else:
                        acc += z_coef[m] * zpan[z_src[m], dd, z_hour[m]]
                acc += shock_scale * z_arch[ai, i, h]
                if not np.isfinite(acc):
                    return d, clamped
                zpan[i, lag_days + d, h] = acc

        # bid-group volumes for day d
        for g in range(n_b):
            for h in range(24):
                e = g * 24 + h
                acc = b_wd_det[g, h, wd]
                for m in range(b_ptr[e], b_ptr[e + 1]):
                    dd = lag_days + d - b_lag[m]
                    if b_kind[m] == 0:
                        acc += b_coef[m] * zpan[b_src[m], dd, b_hour[m]]
                    else:
                        acc += b_coef[m] * bpan[b_src[m], dd, b_hour[m]]
                acc += shock_scale * b_arch[ai, g, h]
                if not np.isfinite(acc):
                    return d, clamped
                if acc < 0.0:
                    acc = 0.0
                    clamped += 1
                bpan[g, lag_days + d, h] = acc

        # clear all 24 hourly auctions of the simulated day
        for h in range(24):
            for g in range(sup_idx.shape[0]):
                svol[g] = bpan[sup_idx[g], lag_days + d, h]
            for g in range(dem_idx.shape[0]):
                dvol[g] = bpan[dem_idx[g], lag_days + d, h]
            price_out[d, h] = _clear_grouped(svol, dvol, sup_prof, dem_prof)

        if retain != 0:
            for i in range(n_proc):
                for h in range(24):
                    phys_out[i, d, h] = buf[i, hist_h + d * 24 + h]
            for i in range(n_z):
                for h in range(24):
                    z_out[i, d, h] = zpan[i, lag_days + d, h]
            for g in range(n_b):
                for h in range(24):
                    b_out[g, d, h] = bpan[g, lag_days + d, h]

    return -1, clamped


def _run_indicator_1d(neg, init_run, c):
    """Run-length event indicators for one sequence of negativity flags."""
    n = neg.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    run = init_run
    for t in range(n):
        if neg[t]:
            run += 1
        else:
            run = 0
        if run >= c:
            out[t] = 1
    return out


# compiled entry points (or the same Python functions on the numpy backend)
_simulate_path = jit_kernel(_simulate_path)
soft_threshold_scalar = _soft
cd_gram_sweeps = jit_kernel(_cd_gram_sweeps)
cd_residual_sweeps = jit_kernel(_cd_residual_sweeps)
clear_grouped = _clear_grouped
run_indicator_1d = jit_kernel(_run_indicator_1d)
simulate_path = _simulate_path


def _simulate_many(
    phys_det, phys_ptr, phys_proc, phys_lag, phys_coef, phys_nonneg, phys_hist, phys_arch,
    ypan_src, ypan_hist, ypan_capfac,
    z_wd_det, z_ptr, z_kind, z_src, z_hour, z_lag, z_coef, z_hist, z_arch,
    b_wd_det, b_ptr, b_kind, b_src, b_hour, b_lag, b_coef, b_hist, b_arch,
    sup_idx, dem_idx, sup_prof, dem_prof,
    draw_idx_all, weekdays, shock_scale, price_out_all, status_out, clamp_out,
    retain, phys_out_all, z_out_all, b_out_all,
):
    n_paths = draw_idx_all.shape[0]
    for p in prange(n_paths):
        po = p if retain != 0 else 0
        status, clamped = _simulate_path(
            phys_det, phys_ptr, phys_proc, phys_lag, phys_coef, phys_nonneg,
            phys_hist, phys_arch,
            ypan_src, ypan_hist, ypan_capfac,
            z_wd_det, z_ptr, z_kind, z_src, z_hour, z_lag, z_coef, z_hist, z_arch,
            b_wd_det, b_ptr, b_kind, b_src, b_hour, b_lag, b_coef, b_hist, b_arch,
            sup_idx, dem_idx, sup_prof, dem_prof,
            draw_idx_all[p], weekdays, shock_scale, price_out_all[p],
            retain, phys_out_all[po], z_out_all[po], b_out_all[po],
        )
        status_out[p] = status
        clamp_out[p] = clamped


simulate_many_serial = jit_kernel(_simulate_many)
simulate_many_parallel = jit_parallel(_simulate_many)
