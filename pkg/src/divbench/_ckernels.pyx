# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Must stay in lock-step with ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, M_PI

cnp.import_array()

cdef double HIT_TOL = 1e-9

cdef int[8][2] KNIGHT_MOVES = [[2, 1], [1, 2], [-1, 2], [-2, 1],
                               [-2, -1], [-1, -2], [1, -2], [2, -1]]


def simulate_open_loop(genes, segments, double start_x, double start_y,
                       double step_length, double goal_x, double goal_y,
                       double goal_radius, double contact_eps):
    cdef double[::1] g = np.ascontiguousarray(genes, dtype=np.float64)
    cdef double[:, ::1] segs = np.ascontiguousarray(segments, dtype=np.float64)
    cdef Py_ssize_t n_steps = g.shape[0]
    cdef Py_ssize_t n_segs = segs.shape[0]
    out_arr = np.empty((n_steps + 1, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double px = start_x, py = start_y
    cdef double ang, dx, dy, tmin, sx, sy, denom, qx, qy, t, u, travel, frac, ex, ey
    cdef double ax, ay, bx, by
    cdef bint hit
    cdef bint reached = False
    cdef Py_ssize_t i, s, used = 1
    out[0, 0] = px
    out[0, 1] = py
    for i in range(n_steps):
        ang = M_PI * g[i]
        dx = cos(ang) * step_length
        dy = sin(ang) * step_length
        tmin = 1.0
        hit = False
        for s in range(n_segs):
            ax = segs[s, 0]
            ay = segs[s, 1]
            bx = segs[s, 2]
            by = segs[s, 3]
            sx = bx - ax
            sy = by - ay
            denom = dx * sy - dy * sx
            if denom == 0.0:
                continue
            qx = ax - px
            qy = ay - py
            t = (qx * sy - qy * sx) / denom
            u = (qx * dy - qy * dx) / denom
            if t >= -HIT_TOL and t <= tmin and u >= -HIT_TOL and u <= 1.0 + HIT_TOL:
                tmin = t
                hit = True
        if hit:
            travel = tmin * step_length - contact_eps
            if travel < 0.0:
                travel = 0.0
            frac = travel / step_length
        else:
            frac = 1.0
        px = px + dx * frac
        py = py + dy * frac
        out[used, 0] = px
        out[used, 1] = py
        used += 1
        ex = px - goal_x
        ey = py - goal_y
        if sqrt(ex * ex + ey * ey) <= goal_radius:
            reached = True
            break
    return out_arr[:used].copy(), bool(reached)


def resample_arclength(points, Py_ssize_t k, double max_length):
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0]
    out_arr = np.empty((k, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double spacing = max_length / (k - 1)
    cdef Py_ssize_t seg = 0, j
    cdef double walked = 0.0, target, x0, y0, x1, y1, ddx, ddy, seglen, a
    cdef bint placed
    for j in range(k):
        target = j * spacing
        placed = False
        while seg < n - 1:
            x0 = pts[seg, 0]
            y0 = pts[seg, 1]
            x1 = pts[seg + 1, 0]
            y1 = pts[seg + 1, 1]
            ddx = x1 - x0
            ddy = y1 - y0
            seglen = sqrt(ddx * ddx + ddy * ddy)
            if target <= walked + seglen and seglen > 0.0:
                a = (target - walked) / seglen
                if a < 0.0:
                    a = 0.0
                out[j, 0] = x0 + ddx * a
                out[j, 1] = y0 + ddy * a
                placed = True
                break
            walked = walked + seglen
            seg += 1
        if not placed:
            out[j, 0] = pts[n - 1, 0]
            out[j, 1] = pts[n - 1, 1]
    return out_arr


def knights_walk(genes, int n):
    cdef cnp.int64_t[::1] g = np.ascontiguousarray(genes, dtype=np.int64)
    visited_arr = np.zeros((n, n), dtype=np.uint8)
    cdef unsigned char[:, ::1] visited = visited_arr
    cdef int r = 0, c = 0, nr, nc, count = 1, mv
    cdef Py_ssize_t i
    visited[0, 0] = 1
    for i in range(g.shape[0]):
        mv = <int>g[i]
        nr = r + KNIGHT_MOVES[mv][0]
        nc = c + KNIGHT_MOVES[mv][1]
        if nr < 0 or nr >= n or nc < 0 or nc >= n or visited[nr, nc]:
            break
        visited[nr, nc] = 1
        r = nr
        c = nc
        count += 1
    return visited_arr, count
