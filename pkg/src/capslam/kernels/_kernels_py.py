"""Pure-numpy implementations of the per-pixel hot kernels.

Semantics here are the reference: the compiled backend must agree with
these functions (same association rules, same tie-breaking) so either
backend can run the full pipeline.

Shared conventions:
* camera-frame points are (N, 3) float64, image maps are (H, W[, 3]);
* index maps use -1 for "no surfel";
* z-buffer ties are broken toward the lower surfel index;
* at most one pixel updates a given surfel per fused frame, the first
  one in row-major order.
"""

import numpy as np


def _huber_weights(r: np.ndarray, delta: float):
    """IRLS weights and loss for rho(r) = r^2 (core), delta*(2|r|-delta) (tails)."""
    a = np.abs(r)
    w = np.where(a <= delta, 1.0, delta / np.maximum(a, 1e-300))
    loss = np.where(a <= delta, r * r, delta * (2.0 * a - delta))
    return w, loss


def render_surfels(pos, nrm, col, rad, r_cw, t_cw, fx, fy, cx, cy, width, height,
                   max_splat=2):
    """Z-buffer splat of surfels into depth/color/normal/index maps.

    ``r_cw, t_cw`` map world points into the camera frame.  Each surfel
    covers a square block whose half-width follows its projected radius,
    clamped to ``max_splat``.  Normals are returned in the camera frame.
    """
    n = pos.shape[0]
    depth = np.zeros((height, width))
    color = np.zeros((height, width, 3))
    normal = np.zeros((height, width, 3))
    index = np.full((height, width), -1, dtype=np.int64)
    if n == 0:
        return depth, color, normal, index

    cam = pos @ r_cw.T + t_cw
    z = cam[:, 2]
    ok = z > 1e-6
    px = np.full(n, -1.0)
    py = np.full(n, -1.0)
    px[ok] = fx * cam[ok, 0] / z[ok] + cx
    py[ok] = fy * cam[ok, 1] / z[ok] + cy
    ix = np.floor(px + 0.5).astype(np.int64)
    iy = np.floor(py + 0.5).astype(np.int64)
    proj_rad = np.zeros(n)
    proj_rad[ok] = rad[ok] * (0.5 * (fx + fy)) / z[ok]
    half = np.minimum(np.floor(0.5 * proj_rad + 0.5), float(max_splat)).astype(np.int64)
    half[half < 0] = 0

    cand_pix = []
    cand_z = []
    cand_idx = []
    ids = np.arange(n, dtype=np.int64)
    for dy in range(-max_splat, max_splat + 1):
        for dx in range(-max_splat, max_splat + 1):
            m = ok & (np.abs(dx) <= half) & (np.abs(dy) <= half)
            xx = ix + dx
            yy = iy + dy
            m &= (xx >= 0) & (xx < width) & (yy >= 0) & (yy < height)
            if not m.any():
                continue
            cand_pix.append(yy[m] * width + xx[m])
            cand_z.append(z[m])
            cand_idx.append(ids[m])
    if not cand_pix:
        return depth, color, normal, index
    pix = np.concatenate(cand_pix)
    zz = np.concatenate(cand_z)
    ii = np.concatenate(cand_idx)
    order = np.lexsort((ii, zz, pix))
    pix, zz, ii = pix[order], zz[order], ii[order]
    first = np.ones(pix.shape[0], dtype=bool)
    first[1:] = pix[1:] != pix[:-1]
    pix, zz, ii = pix[first], zz[first], ii[first]

    yy, xx = pix // width, pix % width
    depth[yy, xx] = zz
    color[yy, xx] = col[ii]
    normal[yy, xx] = nrm[ii] @ r_cw.T
    index[yy, xx] = ii
    return depth, color, normal, index


def icp_system(cur_pts, cur_nrm, pred_depth, pred_normal, pred_valid,
               r, t, fx, fy, cx, cy, dist_gate, cos_gate, huber_delta):
    """Point-to-plane normal equations with projective association.

    Residual per pair: n . (v - p) where p = r @ q + t transforms the
    current-frame point into the prediction frame and (v, n) come from
    the prediction pixel p projects into.  Twist layout is [v, omega].

    Returns (a, b, energy, n_assoc, n_candidates).
    """
    h, w = pred_depth.shape
    p = cur_pts @ r.T + t
    nc = cur_nrm @ r.T
    z = p[:, 2]
    ok = z > 1e-9
    u = np.zeros((p.shape[0], 2))
    u[ok, 0] = fx * p[ok, 0] / z[ok] + cx
    u[ok, 1] = fy * p[ok, 1] / z[ok] + cy
    xi = np.floor(u[:, 0] + 0.5).astype(np.int64)
    yi = np.floor(u[:, 1] + 0.5).astype(np.int64)
    ok &= (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    xi, yi = np.clip(xi, 0, w - 1), np.clip(yi, 0, h - 1)
    ok &= pred_valid[yi, xi]
    n_candidates = int(ok.sum())

    d = pred_depth[yi, xi]
    v = np.empty_like(p)
    v[:, 0] = (xi - cx) / fx * d
    v[:, 1] = (yi - cy) / fy * d
    v[:, 2] = d
    nv = pred_normal[yi, xi]
    ok &= np.linalg.norm(v - p, axis=1) < dist_gate
    ok &= np.einsum("ij,ij->i", nv, nc) > cos_gate

    pm, vm, nm = p[ok], v[ok], nv[ok]
    res = np.einsum("ij,ij->i", nm, vm - pm)
    wgt, loss = _huber_weights(res, huber_delta)
    jac = np.concatenate([-nm, np.cross(nm, pm)], axis=1)
    jw = jac * wgt[:, None]
    a = jw.T @ jac
    b = jac.T @ (wgt * res)
    return a, b, float(loss.sum()), int(ok.sum()), n_candidates


def rgb_system(cur_pts, cur_intensity, pred_gray, pred_valid,
               r, t, fx, fy, cx, cy, huber_delta):
    """Photometric normal equations with in-cell bilinear gradients.

    Residual per pixel: i_cur - bilerp(pred_gray, project(r @ q + t)).
    The image gradient is the exact slope of the bilinear patch so the
    analytic Jacobian differentiates the sampled energy.

    Returns (a, b, energy, n_used).
    """
    h, w = pred_gray.shape
    p = cur_pts @ r.T + t
    z = p[:, 2]
    ok = z > 1e-9
    u = np.zeros(p.shape[0])
    v = np.zeros(p.shape[0])
    u[ok] = fx * p[ok, 0] / z[ok] + cx
    v[ok] = fy * p[ok, 1] / z[ok] + cy
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    ok &= (x0 >= 0) & (x0 + 1 <= w - 1) & (y0 >= 0) & (y0 + 1 <= h - 1)
    x0c, y0c = np.clip(x0, 0, w - 2), np.clip(y0, 0, h - 2)
    ok &= (pred_valid[y0c, x0c] & pred_valid[y0c, x0c + 1]
           & pred_valid[y0c + 1, x0c] & pred_valid[y0c + 1, x0c + 1])

    pm = p[ok]
    um, vm = u[ok], v[ok]
    x0m, y0m = x0[ok], y0[ok]
    ax = um - x0m
    ay = vm - y0m
    i00 = pred_gray[y0m, x0m]
    i10 = pred_gray[y0m, x0m + 1]
    i01 = pred_gray[y0m + 1, x0m]
    i11 = pred_gray[y0m + 1, x0m + 1]
    sampled = (1 - ay) * ((1 - ax) * i00 + ax * i10) + ay * ((1 - ax) * i01 + ax * i11)
    gx = (1 - ay) * (i10 - i00) + ay * (i11 - i01)
    gy = (1 - ax) * (i01 - i00) + ax * (i11 - i10)

    res = cur_intensity[ok] - sampled
    wgt, loss = _huber_weights(res, huber_delta)

    zm = pm[:, 2]
    gpx = gx * fx / zm
    gpy = gy * fy / zm
    gpz = -(gx * fx * pm[:, 0] + gy * fy * pm[:, 1]) / (zm * zm)
    gp = np.stack([gpx, gpy, gpz], axis=1)
    jac = np.concatenate([-gp, np.cross(gp, pm)], axis=1)
    jw = jac * wgt[:, None]
    a = jw.T @ jac
    b = jac.T @ (wgt * res)
    return a, b, float(loss.sum()), int(ok.sum())


def fuse_pixels(pos, nrm, col, weight, t_last, index_map,
                frame_pts, frame_nrm, frame_col, frame_valid,
                dist_gate, cos_gate, t_now):
    """Confidence-weighted update of associated surfels, in place.

    ``frame_*`` maps are world-frame per-pixel quantities.  A pixel whose
    index-map surfel passes the distance and normal gates updates that
    surfel; only the first such pixel (row-major) touches a surfel per
    call.  Returns (new_mask, n_updated): new_mask marks pixels that had
    no acceptable association and should spawn surfels.
    """
    h, w = index_map.shape
    flat_idx = index_map.reshape(-1)
    valid = frame_valid.reshape(-1)
    pts = frame_pts.reshape(-1, 3)
    nms = frame_nrm.reshape(-1, 3)
    cls = frame_col.reshape(-1, 3)

    cand = valid & (flat_idx >= 0)
    ci = np.flatnonzero(cand)
    sid = flat_idx[ci]
    dist_ok = np.linalg.norm(pos[sid] - pts[ci], axis=1) < dist_gate
    ang_ok = np.einsum("ij,ij->i", nrm[sid], nms[ci]) > cos_gate
    good = dist_ok & ang_ok
    ci, sid = ci[good], sid[good]

    uniq, first = np.unique(sid, return_index=True)
    ci_sel = ci[first]
    sid_sel = sid[first]

    wgt = weight[sid_sel][:, None]
    denom = wgt + 1.0
    pos[sid_sel] = (wgt * pos[sid_sel] + pts[ci_sel]) / denom
    merged = (wgt * nrm[sid_sel] + nms[ci_sel]) / denom
    norms = np.linalg.norm(merged, axis=1, keepdims=True)
    nrm[sid_sel] = merged / np.maximum(norms, 1e-12)
    col[sid_sel] = (wgt * col[sid_sel] + cls[ci_sel]) / denom
    weight[sid_sel] += 1.0
    t_last[sid_sel] = t_now

    matched = np.zeros(h * w, dtype=bool)
    matched[ci] = True
    new_mask = valid & ~matched
    return new_mask.reshape(h, w), int(sid_sel.shape[0])
