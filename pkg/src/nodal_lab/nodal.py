"""Zero sets of sampled fields: sign changes in 1-D, marching squares in 2-D.

Nodes of the contour graph are grid edges whose end values have opposite
signs; each crossing is placed by linear interpolation along its edge.
Inside a cell the crossings are joined by segments (two per saddle cell,
split by the bilinear center value).  Connected components of this graph
are the nodal components.  A value of exactly zero counts as positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

__all__ = ["Contour", "NodalSummary", "contour_2d", "sign_change_zeros",
           "summarize"]


@dataclass
class Contour:
    """Contour graph of a 2-D grid field.

    Attributes
    ----------
    points : (m, 2) array
        Crossing locations (unwrapped; periodic grids may place a point up to
        one cell past the period).
    labels : (m,) int array
        Component label of each crossing.
    n_components : int
    closed : (n_components,) bool array
        True when every crossing of the component has two neighbours.
    n_saddles : int
        Number of ambiguous cells resolved by the center-value rule.
    """

    points: np.ndarray
    labels: np.ndarray
    n_components: int
    closed: np.ndarray
    n_saddles: int
    edges: np.ndarray = field(repr=False)
    period: tuple = None

    def component_points(self, c: int) -> np.ndarray:
        return self.points[self.labels == c]

    def polyline(self, c: int) -> np.ndarray:
        """Crossings of component ``c`` in traversal order.

        Closed components are returned with the first point repeated at the
        end.  Across a periodic seam the coordinates are unwrapped so the
        polyline is continuous.
        """
        idx = np.flatnonzero(self.labels == c)
        if len(idx) == 0:
            return np.zeros((0, 2))
        local = {g: k for k, g in enumerate(idx)}
        nbrs = [[] for _ in idx]
        mask = np.isin(self.edges[:, 0], idx)
        for a, b in self.edges[mask]:
            nbrs[local[a]].append(local[b])
            nbrs[local[b]].append(local[a])
        start = next((k for k, nb in enumerate(nbrs) if len(nb) == 1), 0)
        order = [start]
        prev, cur = -1, start
        while True:
            nxt = [v for v in nbrs[cur] if v != prev]
            if not nxt or nxt[0] == start:
                break
            prev, cur = cur, nxt[0]
            order.append(cur)
        pts = self.points[idx[order]].copy()
        if self.period is not None:
            for k in range(1, len(pts)):
                d = pts[k] - pts[k - 1]
                pts[k] -= np.asarray(self.period) * np.round(d / np.asarray(self.period))
        if self.closed[c]:
            closing = self.points[idx[order[0]]].copy()
            if self.period is not None:
                d = closing - pts[-1]
                closing -= np.asarray(self.period) * np.round(d / np.asarray(self.period))
            pts = np.vstack([pts, closing])
        return pts


def contour_2d(values: np.ndarray, axes, periodic: bool = False) -> Contour:
    """Marching-squares contour graph of ``values`` on the grid ``axes``.

    Parameters
    ----------
    values : (N0, N1) array
    axes : pair of 1-D arrays
        Uniformly spaced node coordinates.  For periodic grids the period is
        ``N * spacing``.
    periodic : bool
        Wrap both axes (torus).
    """
    v = np.asarray(values, dtype=float)
    N0, N1 = v.shape
    x0 = np.asarray(axes[0], dtype=float)
    x1 = np.asarray(axes[1], dtype=float)
    h0 = x0[1] - x0[0]
    h1 = x1[1] - x1[0]
    pos = v >= 0

    if periodic:
        vA_next = np.roll(v, -1, axis=0)
        vB_next = np.roll(v, -1, axis=1)
        nA0, nB1 = N0, N1
    else:
        vA_next = v[1:, :]
        vB_next = v[:, 1:]
        nA0, nB1 = N0 - 1, N1
    # A-edges join (i, j)-(i+1, j); B-edges join (i, j)-(i, j+1)
    vA = v[:nA0, :]
    vB = v[:, :nB1 - (0 if periodic else 1)]
    crossA = (vA >= 0) != (vA_next >= 0)
    crossB = (vB >= 0) != (vB_next >= 0)
    shapeA = crossA.shape
    shapeB = crossB.shape
    idA = np.full(shapeA, -1, dtype=np.int64)
    idB = np.full(shapeB, -1, dtype=np.int64)
    nA = int(crossA.sum())
    idA[crossA] = np.arange(nA)
    idB[crossB] = nA + np.arange(int(crossB.sum()))

    iA, jA = np.nonzero(crossA)
    tA = vA[crossA] / (vA[crossA] - vA_next[crossA])
    ptsA = np.stack([x0[iA] + tA * h0, x1[jA]], axis=1)
    iB, jB = np.nonzero(crossB)
    tB = vB[crossB] / (vB[crossB] - vB_next[crossB])
    ptsB = np.stack([x0[iB], x1[jB] + tB * h1], axis=1)
    points = np.vstack([ptsA, ptsB])

    # cells (i, j) with corners v00=(i,j), v10=(i+1,j), v01=(i,j+1), v11=(i+1,j+1)
    if periodic:
        c0, c1 = N0, N1
        left = idA                          # A(i, j): v00-v10
        right = np.roll(idA, -1, axis=1)    # A(i, j+1): v01-v11
        bottom = idB                        # B(i, j): v00-v01
        top = np.roll(idB, -1, axis=0)      # B(i+1, j): v10-v11
        v00 = v
        v10 = np.roll(v, -1, axis=0)
        v01 = np.roll(v, -1, axis=1)
        v11 = np.roll(v10, -1, axis=1)
    else:
        c0, c1 = N0 - 1, N1 - 1
        left = idA[:, :c1]
        right = idA[:, 1:]
        bottom = idB[:c0, :]
        top = idB[1:, :]
        v00 = v[:-1, :-1]
        v10 = v[1:, :-1]
        v01 = v[:-1, 1:]
        v11 = v[1:, 1:]
    E = np.stack([left, right, bottom, top], axis=-1).reshape(-1, 4)
    ncross = (E >= 0).sum(axis=1)
    segs = []
    two = ncross == 2
    if two.any():
        e2 = E[two]
        srt = np.sort(e2, axis=1)[:, 2:]
        segs.append(srt)
    four = ncross == 4
    n_saddles = int(four.sum())
    if n_saddles:
        e4 = E[four]
        a00 = v00.reshape(-1)[four]
        a10 = v10.reshape(-1)[four]
        a01 = v01.reshape(-1)[four]
        a11 = v11.reshape(-1)[four]
        # value of the bilinear interpolant at its saddle (asymptotic decider)
        m = (a00 * a11 - a10 * a01) / (a00 + a11 - a10 - a01)
        same = np.sign(m) == np.sign(a00)
        # same: v00 and v11 joined through the center; cut off v10 and v01
        s1 = np.where(same[:, None], e4[:, [0, 3]], e4[:, [0, 2]])
        s2 = np.where(same[:, None], e4[:, [2, 1]], e4[:, [1, 3]])
        segs.extend([s1, s2])
    edges = np.vstack(segs) if segs else np.zeros((0, 2), dtype=np.int64)
    m_nodes = len(points)
    if m_nodes == 0:
        return Contour(points, np.zeros(0, dtype=int), 0, np.zeros(0, dtype=bool),
                       n_saddles, edges, (N0 * h0, N1 * h1) if periodic else None)
    g = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])),
                   shape=(m_nodes, m_nodes))
    ncomp, labels = connected_components(g, directed=False)
    deg = np.bincount(edges.reshape(-1), minlength=m_nodes)
    closed = np.ones(ncomp, dtype=bool)
    closed[np.unique(labels[deg != 2])] = False
    return Contour(points, labels, int(ncomp), closed, n_saddles, edges,
                   (N0 * h0, N1 * h1) if periodic else None)


def sign_change_zeros(values: np.ndarray, x: np.ndarray, func=None,
                      periodic: bool = True, period: float = 2 * np.pi,
                      xtol: float = 1e-10) -> np.ndarray:
    """Zeros of a 1-D field from sign changes between consecutive samples.

    Each bracket is refined by bisection on ``func`` to ``xtol`` when
    ``func`` is given, else by linear interpolation.
    """
    v = np.asarray(values, dtype=float)
    x = np.asarray(x, dtype=float)
    h = x[1] - x[0]
    if periodic:
        vn = np.roll(v, -1)
    else:
        v, vn = v[:-1], v[1:]
    idx = np.flatnonzero((v >= 0) != (vn >= 0))
    zeros = []
    for k in idx:
        a, b = x[k], x[k] + h
        fa, fb = v[k], vn[k]
        if func is None:
            zeros.append(a + h * fa / (fa - fb))
            continue
        sa = fa >= 0
        while b - a > xtol:
            mid = 0.5 * (a + b)
            fm = float(func(mid))
            if (fm >= 0) == sa:
                a = mid
            else:
                b = mid
        zeros.append(0.5 * (a + b))
    z = np.asarray(zeros)
    if periodic:
        z = np.mod(z, period)
    return np.sort(z)


@dataclass
class NodalSummary:
    """Components of a nodal set and per-ball containment records.

    ``loops`` holds polylines (n = 2) or zero locations (n = 1);
    ``ball_hits`` holds ``(center, radius, n_closed_inside)`` records.
    """

    n: int
    b0: int
    loops: list
    ball_hits: list
    n_saddles: int = 0
    n_closed: int = 0

    def to_json(self) -> dict:
        return {
            "n": self.n, "b0": self.b0, "n_saddles": self.n_saddles,
            "n_closed": self.n_closed,
            "loops": [np.asarray(p).tolist() for p in self.loops],
            "ball_hits": [{"center": list(map(float, c)), "radius": float(r),
                           "n_loops_inside": int(k)} for c, r, k in self.ball_hits],
        }


def components_in_ball(ct: Contour, center, radius: float, period=None) -> int:
    """Number of closed components lying strictly inside ``B(center, radius)``.

    Distances use the minimum-image convention when ``period`` is given.
    """
    if ct.n_components == 0:
        return 0
    d = ct.points - np.asarray(center, dtype=float)
    if period is not None:
        P = np.asarray(period, dtype=float)
        d -= P * np.round(d / P)
    dist = np.sqrt(np.sum(d * d, axis=1))
    far = np.zeros(ct.n_components, dtype=bool)
    np.logical_or.at(far, ct.labels, dist >= radius)
    return int(np.sum(ct.closed & ~far))


def summarize(ct: Contour, balls=(), with_loops: bool = False) -> NodalSummary:
    hits = [(tuple(c), r, components_in_ball(ct, c, r, ct.period)) for c, r in balls]
    loops = [ct.polyline(c) for c in range(ct.n_components)] if with_loops else []
    return NodalSummary(2, ct.n_components, loops, hits, ct.n_saddles,
                        int(ct.closed.sum()))
