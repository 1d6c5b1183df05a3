"""Sphere averages of radial profiles on hyperbolic space (numba kernels).

The average of ``u(d(o, y))`` over the geodesic sphere of radius ``s`` around
a point at distance ``D`` from o is integrated in the distance variable
``d in [|D-s|, D+s]`` through ``d = d_min + (d_max - d_min)(1 - cos t)/2``.
This keeps the integrand smooth in every dimension; integrating in the polar
angle instead develops a boundary layer of width ~exp(-min(D, s)).
"""

from __future__ import annotations

import math

import numba
import numpy as np

# the bundled TBB is too old for numba and only produces a warning
numba.config.THREADING_LAYER = "omp"

from .quadrature import RadialGrid, _reference_rule, gauss_legendre

N_SPHERE = 32


def _sphere_norm(n: int) -> float:
    return math.sqrt(math.pi) * math.gamma((n - 1) / 2.0) / math.gamma(n / 2.0)


@numba.njit(cache=True)
def _sphere_nodes(D, s, n, tx, tw, norm, out_d, out_w):
    dmin = abs(D - s)
    dmax = D + s
    delta = dmax - dmin
    shs = math.sinh(s) * math.sinh(D)
    K = tx.shape[0]
    if delta < 1e-13 or shs < 1e-300:
        tot = 0.0
        for k in range(K):
            tot += tw[k]
        for k in range(K):
            out_d[k] = dmax
            out_w[k] = tw[k] / tot
        return
    for k in range(K):
        t = tx[k]
        st = math.sin(0.5 * t)
        ct = math.cos(0.5 * t)
        lo = delta * st * st
        hi = delta * ct * ct
        d = dmin + lo
        # sin^2(theta/2) and cos^2(theta/2) via sinh^2 a - sinh^2 b = sinh(a-b) sinh(a+b)
        s2 = math.sinh(0.5 * lo) * math.sinh(0.5 * (d + dmin)) / shs
        c2 = math.sinh(0.5 * hi) * math.sinh(0.5 * (dmax + d)) / shs
        sin_theta = 2.0 * math.sqrt(max(s2 * c2, 0.0))
        jac = 0.5 * delta * math.sin(t) * math.sinh(d) / shs
        if n == 3:
            ang = 1.0
        else:
            ang = sin_theta ** (n - 3)
        out_d[k] = d
        out_w[k] = tw[k] * jac * ang / norm


@numba.njit(cache=True)
def _locate(d, r_max, panels, order, xref, bw, cols, coef):
    """Barycentric weights of ``d`` on a uniform-panel GL grid; returns False outside."""
    if d > r_max * (1.0 + 1e-14) or d < 0.0:
        return False
    width = r_max / panels
    p = int(d / width)
    if p >= panels:
        p = panels - 1
    a = p * width
    t = (2.0 * (d - a) - width) / width
    den = 0.0
    hit = -1
    for q in range(order):
        diff = t - xref[q]
        if diff == 0.0:
            hit = q
            break
        c = bw[q] / diff
        coef[q] = c
        den += c
    for q in range(order):
        cols[q] = p * order + q
        if hit >= 0:
            coef[q] = 1.0 if q == hit else 0.0
        else:
            coef[q] = coef[q] / den
    return True


@numba.njit(cache=True, parallel=True)
def _apply(D_arr, s_arr, c_arr, n, tx, tw, norm, r_max, panels, order, xref, bw, vals):
    nD = D_arr.shape[0]
    out = np.zeros(nD, dtype=np.complex128)
    K = tx.shape[0]
    for i in numba.prange(nD):
        dd = np.empty(K)
        ww = np.empty(K)
        cols = np.empty(order, dtype=np.int64)
        coef = np.empty(order)
        acc = 0.0 + 0.0j
        for j in range(s_arr.shape[0]):
            _sphere_nodes(D_arr[i], s_arr[j], n, tx, tw, norm, dd, ww)
            part = 0.0 + 0.0j
            for k in range(K):
                if _locate(dd[k], r_max, panels, order, xref, bw, cols, coef):
                    v = 0.0 + 0.0j
                    for q in range(order):
                        v += coef[q] * vals[cols[q]]
                    part += ww[k] * v
            acc += c_arr[j] * part
        out[i] = acc
    return out


@numba.njit(cache=True, parallel=True)
def _matrix(D_arr, s_arr, c_arr, n, tx, tw, norm, r_max, panels, order, xref, bw, n_src):
    nD = D_arr.shape[0]
    M = np.zeros((nD, n_src), dtype=np.complex128)
    K = tx.shape[0]
    for i in numba.prange(nD):
        dd = np.empty(K)
        ww = np.empty(K)
        cols = np.empty(order, dtype=np.int64)
        coef = np.empty(order)
        for j in range(s_arr.shape[0]):
            _sphere_nodes(D_arr[i], s_arr[j], n, tx, tw, norm, dd, ww)
            for k in range(K):
                if _locate(dd[k], r_max, panels, order, xref, bw, cols, coef):
                    f = c_arr[j] * ww[k]
                    for q in range(order):
                        M[i, cols[q]] += f * coef[q]
    return M


def _prep(n, n_sphere):
    tx, tw = gauss_legendre(0.0, math.pi, n_sphere)
    return np.ascontiguousarray(tx), np.ascontiguousarray(tw), _sphere_norm(n)


def sphere_average_apply(src: RadialGrid, values, D, s, coef, n: int, n_sphere: int = N_SPHERE):
    """``sum_j coef_j * mean_{|y - x_D| = s_j} u(|y|)`` for each ``D``.

    ``u`` is given by ``values`` on ``src`` and treated as zero beyond
    ``src.r_max``.
    """
    tx, tw, norm = _prep(n, n_sphere)
    xref, _, bw = _reference_rule(src.order)
    return _apply(
        np.ascontiguousarray(np.asarray(D, float)),
        np.ascontiguousarray(np.asarray(s, float)),
        np.ascontiguousarray(np.asarray(coef, np.complex128)),
        n, tx, tw, norm, float(src.r_max), src.panels, src.order,
        np.ascontiguousarray(xref), np.ascontiguousarray(bw),
        np.ascontiguousarray(np.asarray(values, np.complex128)),
    )


def sphere_average_matrix(src: RadialGrid, D, s, coef, n: int, n_sphere: int = N_SPHERE):
    """Matrix form of :func:`sphere_average_apply` acting on node values of ``src``."""
    tx, tw, norm = _prep(n, n_sphere)
    xref, _, bw = _reference_rule(src.order)
    return _matrix(
        np.ascontiguousarray(np.asarray(D, float)),
        np.ascontiguousarray(np.asarray(s, float)),
        np.ascontiguousarray(np.asarray(coef, np.complex128)),
        n, tx, tw, norm, float(src.r_max), src.panels, src.order,
        np.ascontiguousarray(xref), np.ascontiguousarray(bw), len(src),
    )
