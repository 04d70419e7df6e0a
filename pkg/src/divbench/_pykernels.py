"""Pure-Python versions of the inner loops.

Every routine here mirrors ``_ckernels.pyx`` operation for operation so that
both backends produce bit-identical floats.
"""
import math

import numpy as np

# knight move table shared with the compiled backend
KNIGHT_MOVES = ((2, 1), (1, 2), (-1, 2), (-2, 1), (-2, -1), (-1, -2), (1, -2), (2, -1))

HIT_TOL = 1e-9


def simulate_open_loop(genes, segments, start_x, start_y, step_length,
                       goal_x, goal_y, goal_radius, contact_eps):
    """Step an agent through absolute headings ``pi * gene``.

    Returns ``(points, terminated_early)`` where ``points`` has shape (n, 2).
    """
    segs = [tuple(float(v) for v in row) for row in np.asarray(segments, dtype=np.float64)]
    genes = np.asarray(genes, dtype=np.float64)
    px = float(start_x)
    py = float(start_y)
    pts = [(px, py)]
    reached = False
    for i in range(genes.shape[0]):
        ang = math.pi * float(genes[i])
        dx = math.cos(ang) * step_length
        dy = math.sin(ang) * step_length
        tmin = 1.0
        hit = False
        for ax, ay, bx, by in segs:
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
        pts.append((px, py))
        ex = px - goal_x
        ey = py - goal_y
        if math.sqrt(ex * ex + ey * ey) <= goal_radius:
            reached = True
            break
    return np.array(pts, dtype=np.float64), reached


def resample_arclength(points, k, max_length):
    """Sample ``k`` points spaced ``max_length / (k - 1)`` apart along the path.

    Samples past the end of the path repeat the final point.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    out = np.empty((k, 2), dtype=np.float64)
    spacing = max_length / (k - 1)
    seg = 0
    walked = 0.0  # arc length at the start of segment ``seg``
    for j in range(k):
        target = j * spacing
        placed = False
        while seg < n - 1:
            x0 = float(pts[seg, 0])
            y0 = float(pts[seg, 1])
            x1 = float(pts[seg + 1, 0])
            y1 = float(pts[seg + 1, 1])
            ddx = x1 - x0
            ddy = y1 - y0
            seglen = math.sqrt(ddx * ddx + ddy * ddy)
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
    return out


def knights_walk(genes, n):
    """Follow knight moves from (0, 0) until the first off-board move or revisit.

    Returns ``(visited, fitness)`` with ``visited`` an (n, n) uint8 matrix.
    """
    visited = np.zeros((n, n), dtype=np.uint8)
    r = 0
    c = 0
    visited[0, 0] = 1
    count = 1
    for gene in genes:
        dr, dc = KNIGHT_MOVES[int(gene)]
        nr = r + dr
        nc = c + dc
        if nr < 0 or nr >= n or nc < 0 or nc >= n or visited[nr, nc]:
            break
        visited[nr, nc] = 1
        r = nr
        c = nc
        count += 1
    return visited, count
