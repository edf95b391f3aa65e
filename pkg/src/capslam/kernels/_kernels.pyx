# cython: language_level=3
"""Compiled per-pixel kernels.

Must match capslam.kernels._kernels_py exactly: same association rules,
same tie-breaking (lower surfel index wins z-ties, first row-major pixel
wins per-surfel fusion).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, sqrt

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


def render_surfels(cnp.ndarray[f64, ndim=2] pos,
                   cnp.ndarray[f64, ndim=2] nrm,
                   cnp.ndarray[f64, ndim=2] col,
                   cnp.ndarray[f64, ndim=1] rad,
                   cnp.ndarray[f64, ndim=2] r_cw,
                   cnp.ndarray[f64, ndim=1] t_cw,
                   double fx, double fy, double cx, double cy,
                   int width, int height, int max_splat=2):
    cdef int n = pos.shape[0]
    cdef cnp.ndarray[f64, ndim=2] depth = np.zeros((height, width))
    cdef cnp.ndarray[f64, ndim=3] color = np.zeros((height, width, 3))
    cdef cnp.ndarray[f64, ndim=3] normal = np.zeros((height, width, 3))
    cdef cnp.ndarray[i64, ndim=2] index = np.full((height, width), -1, dtype=np.int64)
    if n == 0:
        return depth, color, normal, index

    cdef double r00 = r_cw[0, 0], r01 = r_cw[0, 1], r02 = r_cw[0, 2]
    cdef double r10 = r_cw[1, 0], r11 = r_cw[1, 1], r12 = r_cw[1, 2]
    cdef double r20 = r_cw[2, 0], r21 = r_cw[2, 1], r22 = r_cw[2, 2]
    cdef double t0 = t_cw[0], t1 = t_cw[1], t2 = t_cw[2]
    cdef double f_mean = 0.5 * (fx + fy)

    cdef int i, ix, iy, half, dx, dy, xx, yy
    cdef double x, y, z, px, py, pr, zb
    for i in range(n):
        x = r00 * pos[i, 0] + r01 * pos[i, 1] + r02 * pos[i, 2] + t0
        y = r10 * pos[i, 0] + r11 * pos[i, 1] + r12 * pos[i, 2] + t1
        z = r20 * pos[i, 0] + r21 * pos[i, 1] + r22 * pos[i, 2] + t2
        if z <= 1e-6:
            continue
        px = fx * x / z + cx
        py = fy * y / z + cy
        ix = <int>floor(px + 0.5)
        iy = <int>floor(py + 0.5)
        pr = rad[i] * f_mean / z
        half = <int>floor(0.5 * pr + 0.5)
        if half < 0:
            half = 0
        if half > max_splat:
            half = max_splat
        for dy in range(-half, half + 1):
            yy = iy + dy
            if yy < 0 or yy >= height:
                continue
            for dx in range(-half, half + 1):
                xx = ix + dx
                if xx < 0 or xx >= width:
                    continue
                zb = depth[yy, xx]
                if index[yy, xx] < 0 or z < zb:
                    depth[yy, xx] = z
                    index[yy, xx] = i

    cdef i64 si
    for yy in range(height):
        for xx in range(width):
            si = index[yy, xx]
            if si < 0:
                continue
            color[yy, xx, 0] = col[si, 0]
            color[yy, xx, 1] = col[si, 1]
            color[yy, xx, 2] = col[si, 2]
            normal[yy, xx, 0] = r00 * nrm[si, 0] + r01 * nrm[si, 1] + r02 * nrm[si, 2]
            normal[yy, xx, 1] = r10 * nrm[si, 0] + r11 * nrm[si, 1] + r12 * nrm[si, 2]
            normal[yy, xx, 2] = r20 * nrm[si, 0] + r21 * nrm[si, 1] + r22 * nrm[si, 2]
    return depth, color, normal, index


def icp_system(cnp.ndarray[f64, ndim=2] cur_pts,
               cnp.ndarray[f64, ndim=2] cur_nrm,
               cnp.ndarray[f64, ndim=2] pred_depth,
               cnp.ndarray[f64, ndim=3] pred_normal,
               pred_valid,
               cnp.ndarray[f64, ndim=2] r,
               cnp.ndarray[f64, ndim=1] t,
               double fx, double fy, double cx, double cy,
               double dist_gate, double cos_gate, double huber_delta):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] validm = np.ascontiguousarray(
        pred_valid, dtype=np.uint8)
    cdef int h = pred_depth.shape[0]
    cdef int w = pred_depth.shape[1]
    cdef int m = cur_pts.shape[0]

    cdef cnp.ndarray[f64, ndim=2] a = np.zeros((6, 6))
    cdef cnp.ndarray[f64, ndim=1] b = np.zeros(6)
    cdef double energy = 0.0
    cdef int n_assoc = 0, n_cand = 0

    cdef double r00 = r[0, 0], r01 = r[0, 1], r02 = r[0, 2]
    cdef double r10 = r[1, 0], r11 = r[1, 1], r12 = r[1, 2]
    cdef double r20 = r[2, 0], r21 = r[2, 1], r22 = r[2, 2]
    cdef double t0 = t[0], t1 = t[1], t2 = t[2]

    cdef int i, j, k2, xi, yi
    cdef double px, py, pz, u, v, d, vx, vy, vz, nx, ny, nz
    cdef double ncx, ncy, ncz, dist2, res, wgt, aw
    cdef double jac[6]
    for i in range(m):
        px = r00 * cur_pts[i, 0] + r01 * cur_pts[i, 1] + r02 * cur_pts[i, 2] + t0
        py = r10 * cur_pts[i, 0] + r11 * cur_pts[i, 1] + r12 * cur_pts[i, 2] + t1
        pz = r20 * cur_pts[i, 0] + r21 * cur_pts[i, 1] + r22 * cur_pts[i, 2] + t2
        if pz <= 1e-9:
            continue
        u = fx * px / pz + cx
        v = fy * py / pz + cy
        xi = <int>floor(u + 0.5)
        yi = <int>floor(v + 0.5)
        if xi < 0 or xi >= w or yi < 0 or yi >= h:
            continue
        if validm[yi, xi] == 0:
            continue
        n_cand += 1
        d = pred_depth[yi, xi]
        vx = (xi - cx) / fx * d
        vy = (yi - cy) / fy * d
        vz = d
        dist2 = (vx - px) ** 2 + (vy - py) ** 2 + (vz - pz) ** 2
        if dist2 >= dist_gate * dist_gate:
            continue
        nx = pred_normal[yi, xi, 0]
        ny = pred_normal[yi, xi, 1]
        nz = pred_normal[yi, xi, 2]
        ncx = r00 * cur_nrm[i, 0] + r01 * cur_nrm[i, 1] + r02 * cur_nrm[i, 2]
        ncy = r10 * cur_nrm[i, 0] + r11 * cur_nrm[i, 1] + r12 * cur_nrm[i, 2]
        ncz = r20 * cur_nrm[i, 0] + r21 * cur_nrm[i, 1] + r22 * cur_nrm[i, 2]
        if nx * ncx + ny * ncy + nz * ncz <= cos_gate:
            continue
        n_assoc += 1
        res = nx * (vx - px) + ny * (vy - py) + nz * (vz - pz)
        if fabs(res) <= huber_delta:
            wgt = 1.0
            energy += res * res
        else:
            wgt = huber_delta / fabs(res)
            energy += huber_delta * (2.0 * fabs(res) - huber_delta)
        jac[0] = -nx
        jac[1] = -ny
        jac[2] = -nz
        jac[3] = ny * pz - nz * py
        jac[4] = nz * px - nx * pz
        jac[5] = nx * py - ny * px
        for j in range(6):
            aw = wgt * jac[j]
            b[j] += aw * res
            for k2 in range(6):
                a[j, k2] += aw * jac[k2]
    return a, b, energy, n_assoc, n_cand


def rgb_system(cnp.ndarray[f64, ndim=2] cur_pts,
               cnp.ndarray[f64, ndim=1] cur_intensity,
               cnp.ndarray[f64, ndim=2] pred_gray,
               pred_valid,
               cnp.ndarray[f64, ndim=2] r,
               cnp.ndarray[f64, ndim=1] t,
               double fx, double fy, double cx, double cy,
               double huber_delta):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] validm = np.ascontiguousarray(
        pred_valid, dtype=np.uint8)
    cdef int h = pred_gray.shape[0]
    cdef int w = pred_gray.shape[1]
    cdef int m = cur_pts.shape[0]

    cdef cnp.ndarray[f64, ndim=2] a = np.zeros((6, 6))
    cdef cnp.ndarray[f64, ndim=1] b = np.zeros(6)
    cdef double energy = 0.0
    cdef int n_used = 0

    cdef double r00 = r[0, 0], r01 = r[0, 1], r02 = r[0, 2]
    cdef double r10 = r[1, 0], r11 = r[1, 1], r12 = r[1, 2]
    cdef double r20 = r[2, 0], r21 = r[2, 1], r22 = r[2, 2]
    cdef double t0 = t[0], t1 = t[1], t2 = t[2]

    cdef int i, j, k2, x0, y0
    cdef double px, py, pz, u, v, ax, ay
    cdef double i00, i10, i01, i11, sampled, gx, gy
    cdef double res, wgt, aw, gpx, gpy, gpz
    cdef double jac[6]
    for i in range(m):
        px = r00 * cur_pts[i, 0] + r01 * cur_pts[i, 1] + r02 * cur_pts[i, 2] + t0
        py = r10 * cur_pts[i, 0] + r11 * cur_pts[i, 1] + r12 * cur_pts[i, 2] + t1
        pz = r20 * cur_pts[i, 0] + r21 * cur_pts[i, 1] + r22 * cur_pts[i, 2] + t2
        if pz <= 1e-9:
            continue
        u = fx * px / pz + cx
        v = fy * py / pz + cy
        x0 = <int>floor(u)
        y0 = <int>floor(v)
        if x0 < 0 or x0 + 1 > w - 1 or y0 < 0 or y0 + 1 > h - 1:
            continue
        if (validm[y0, x0] == 0 or validm[y0, x0 + 1] == 0
                or validm[y0 + 1, x0] == 0 or validm[y0 + 1, x0 + 1] == 0):
            continue
        n_used += 1
        ax = u - x0
        ay = v - y0
        i00 = pred_gray[y0, x0]
        i10 = pred_gray[y0, x0 + 1]
        i01 = pred_gray[y0 + 1, x0]
        i11 = pred_gray[y0 + 1, x0 + 1]
        sampled = (1 - ay) * ((1 - ax) * i00 + ax * i10) + ay * ((1 - ax) * i01 + ax * i11)
        gx = (1 - ay) * (i10 - i00) + ay * (i11 - i01)
        gy = (1 - ax) * (i01 - i00) + ax * (i11 - i10)
        res = cur_intensity[i] - sampled
        if fabs(res) <= huber_delta:
            wgt = 1.0
            energy += res * res
        else:
            wgt = huber_delta / fabs(res)
            energy += huber_delta * (2.0 * fabs(res) - huber_delta)
        gpx = gx * fx / pz
        gpy = gy * fy / pz
        gpz = -(gx * fx * px + gy * fy * py) / (pz * pz)
        jac[0] = -gpx
        jac[1] = -gpy
        jac[2] = -gpz
        jac[3] = gpy * pz - gpz * py
        jac[4] = gpz * px - gpx * pz
        jac[5] = gpx * py - gpy * px
        for j in range(6):
            aw = wgt * jac[j]
            b[j] += aw * res
            for k2 in range(6):
                a[j, k2] += aw * jac[k2]
    return a, b, energy, n_used


def fuse_pixels(cnp.ndarray[f64, ndim=2] pos,
                cnp.ndarray[f64, ndim=2] nrm,
                cnp.ndarray[f64, ndim=2] col,
                cnp.ndarray[f64, ndim=1] weight,
                cnp.ndarray[f64, ndim=1] t_last,
                cnp.ndarray[i64, ndim=2] index_map,
                cnp.ndarray[f64, ndim=3] frame_pts,
                cnp.ndarray[f64, ndim=3] frame_nrm,
                cnp.ndarray[f64, ndim=3] frame_col,
                frame_valid,
                double dist_gate, double cos_gate, double t_now):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] validm = np.ascontiguousarray(
        frame_valid, dtype=np.uint8)
    cdef int h = index_map.shape[0]
    cdef int w = index_map.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] new_mask = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] stamped = np.zeros(pos.shape[0], dtype=np.uint8)

    cdef int x, y, k2, n_updated = 0
    cdef i64 si
    cdef double dx, dy, dz, dot, wgt, denom, nn
    for y in range(h):
        for x in range(w):
            if validm[y, x] == 0:
                continue
            si = index_map[y, x]
            if si < 0:
                new_mask[y, x] = 1
                continue
            dx = pos[si, 0] - frame_pts[y, x, 0]
            dy = pos[si, 1] - frame_pts[y, x, 1]
            dz = pos[si, 2] - frame_pts[y, x, 2]
            if dx * dx + dy * dy + dz * dz >= dist_gate * dist_gate:
                new_mask[y, x] = 1
                continue
            dot = (nrm[si, 0] * frame_nrm[y, x, 0]
                   + nrm[si, 1] * frame_nrm[y, x, 1]
                   + nrm[si, 2] * frame_nrm[y, x, 2])
            if dot <= cos_gate:
                new_mask[y, x] = 1
                continue
            if stamped[si]:
                continue
            stamped[si] = 1
            n_updated += 1
            wgt = weight[si]
            denom = wgt + 1.0
            for k2 in range(3):
                pos[si, k2] = (wgt * pos[si, k2] + frame_pts[y, x, k2]) / denom
                nrm[si, k2] = (wgt * nrm[si, k2] + frame_nrm[y, x, k2]) / denom
                col[si, k2] = (wgt * col[si, k2] + frame_col[y, x, k2]) / denom
            nn = sqrt(nrm[si, 0] ** 2 + nrm[si, 1] ** 2 + nrm[si, 2] ** 2)
            if nn < 1e-12:
                nn = 1e-12
            for k2 in range(3):
                nrm[si, k2] /= nn
            weight[si] = wgt + 1.0
            t_last[si] = t_now
    return np.asarray(new_mask, dtype=bool), n_updated
