# cython: language_level=3
# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled grid-indexed DBSCAN label kernel.

Mirrors _kernel_py exactly: same cell geometry, same closed-ball
predicate, same input-order expansion, so compiled and pure kernels
produce identical label vectors.
"""

import numpy as np

from libc.math cimport floor, sin

cdef double EARTH_RADIUS_M = 6_371_000.0
cdef double PI = 3.141592653589793
cdef long long UNDEFINED = -2
cdef long long NOISE = -1


cdef inline Py_ssize_t _find_cell(long long key, long long[::1] ukeys) noexcept:
    cdef Py_ssize_t lo = 0, hi = ukeys.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if ukeys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < ukeys.shape[0] and ukeys[lo] == key:
        return lo
    return -1


cdef Py_ssize_t _query(
    Py_ssize_t q,
    double[::1] lons, double[::1] lats,
    double[::1] phi, double[::1] lam, double[::1] cos_phi,
    long long[::1] cols, long long[::1] rows,
    long long ncols, long long nrows,
    long long[::1] ukeys, long long[::1] ustarts, long long[::1] order,
    int metric_code, double eps2, double hav_thresh,
    long long[::1] out,
) noexcept:
    cdef Py_ssize_t count = 0, cell, t
    cdef long long r, c, key
    cdef Py_ssize_t j
    cdef int dr, dc
    cdef double dx, dy, sdphi, sdlam, h
    cdef double qlon = lons[q], qlat = lats[q]
    cdef double qphi = 0.0, qlam = 0.0, qcos = 0.0
    if metric_code == 1:
        qphi = phi[q]
        qlam = lam[q]
        qcos = cos_phi[q]
    for dr in range(-1, 2):
        r = rows[q] + dr
        if r < 0 or r >= nrows:
            continue
        for dc in range(-1, 2):
            c = cols[q] + dc
            if c < 0 or c >= ncols:
                continue
            key = r * ncols + c
            cell = _find_cell(key, ukeys)
            if cell < 0:
                continue
            for t in range(ustarts[cell], ustarts[cell + 1]):
                j = <Py_ssize_t> order[t]
                if metric_code == 0:
                    dx = lons[j] - qlon
                    dy = lats[j] - qlat
                    if dx * dx + dy * dy <= eps2:
                        out[count] = j
                        count += 1
                else:
                    sdphi = sin((phi[j] - qphi) * 0.5)
                    sdlam = sin((lam[j] - qlam) * 0.5)
                    h = sdphi * sdphi + qcos * cos_phi[j] * sdlam * sdlam
                    if h <= hav_thresh:
                        out[count] = j
                        count += 1
    return count


def dbscan_labels(object lons_obj, object lats_obj, double eps, long long min_samples,
                  int metric_code, double cell_w, double cell_h):
    """Label points with DBSCAN cluster ids (noise = -1).

    metric_code 0 = euclidean in raw degrees, 1 = haversine meters.
    cell_w/cell_h are the grid cell edges in degrees, precomputed by
    the shared geometry helper so both kernels agree.
    """
    lons = np.ascontiguousarray(lons_obj, dtype=np.float64)
    lats = np.ascontiguousarray(lats_obj, dtype=np.float64)
    cdef Py_ssize_t n = lons.shape[0]
    labels_arr = np.full(n, UNDEFINED, dtype=np.int64)
    if n == 0:
        return labels_arr

    cdef double[::1] lons_v = lons
    cdef double[::1] lats_v = lats
    cdef double x0 = lons_v[0], y0 = lats_v[0]
    cdef Py_ssize_t i
    for i in range(1, n):
        if lons_v[i] < x0:
            x0 = lons_v[i]
        if lats_v[i] < y0:
            y0 = lats_v[i]

    cols_arr = np.empty(n, dtype=np.int64)
    rows_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] cols = cols_arr
    cdef long long[::1] rows = rows_arr
    cdef long long ncols = 0, nrows = 0
    for i in range(n):
        cols[i] = <long long> floor((lons_v[i] - x0) / cell_w)
        rows[i] = <long long> floor((lats_v[i] - y0) / cell_h)
        if cols[i] >= ncols:
            ncols = cols[i] + 1
        if rows[i] >= nrows:
            nrows = rows[i] + 1
    if ncols > 2**31 or nrows > 2**31:
        raise ValueError("eps is too small relative to the coordinate span")

    keys_arr = rows_arr * ncols + cols_arr
    order_arr = np.argsort(keys_arr, kind="stable").astype(np.int64)
    skeys_arr = keys_arr[order_arr]
    boundary = np.empty(n, dtype=bool)
    boundary[0] = True
    boundary[1:] = skeys_arr[1:] != skeys_arr[:-1]
    starts_arr = np.nonzero(boundary)[0].astype(np.int64)
    ukeys_arr = skeys_arr[starts_arr]
    ustarts_arr = np.append(starts_arr, n).astype(np.int64)

    cdef long long[::1] order = order_arr
    cdef long long[::1] ukeys = ukeys_arr
    cdef long long[::1] ustarts = ustarts_arr

    # haversine precomputation (cheap no-ops for the degree metric)
    cdef double eps2 = eps * eps
    cdef double half, s, hav_thresh = 0.0
    phi_arr = lam_arr = cosphi_arr = np.empty(0, dtype=np.float64)
    if metric_code == 1:
        phi_arr = np.radians(lats)
        lam_arr = np.radians(lons)
        cosphi_arr = np.cos(phi_arr)
        half = eps / (2.0 * EARTH_RADIUS_M)
        if half > PI / 2.0:
            half = PI / 2.0
        s = sin(half)
        hav_thresh = s * s
    cdef double[::1] phi = phi_arr
    cdef double[::1] lam = lam_arr
    cdef double[::1] cos_phi = cosphi_arr

    queue_arr = np.empty(n, dtype=np.int64)
    neigh_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] queue = queue_arr
    cdef long long[::1] neigh = neigh_arr
    cdef long long[::1] labels = labels_arr

    cdef long long cid = -1
    cdef Py_ssize_t count, qhead, qtail, t, j, k
    for i in range(n):
        if labels[i] != UNDEFINED:
            continue
        count = _query(i, lons_v, lats_v, phi, lam, cos_phi, cols, rows,
                       ncols, nrows, ukeys, ustarts, order,
                       metric_code, eps2, hav_thresh, neigh)
        if count < min_samples:
            labels[i] = NOISE
            continue
        cid += 1
        labels[i] = cid
        qhead = 0
        qtail = 0
        for t in range(count):
            j = <Py_ssize_t> neigh[t]
            if j == i:
                continue
            if labels[j] == NOISE:
                labels[j] = cid
            elif labels[j] == UNDEFINED:
                labels[j] = cid
                queue[qtail] = j
                qtail += 1
        while qhead < qtail:
            j = <Py_ssize_t> queue[qhead]
            qhead += 1
            count = _query(j, lons_v, lats_v, phi, lam, cos_phi, cols, rows,
                           ncols, nrows, ukeys, ustarts, order,
                           metric_code, eps2, hav_thresh, neigh)
            if count < min_samples:
                continue
            for t in range(count):
                k = <Py_ssize_t> neigh[t]
                if labels[k] == NOISE:
                    labels[k] = cid
                elif labels[k] == UNDEFINED:
                    labels[k] = cid
                    queue[qtail] = k
                    qtail += 1
    return labels_arr
