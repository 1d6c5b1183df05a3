"""Composite Gauss-Legendre rules and panel-wise polynomial interpolation."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import BarycentricInterpolator


@lru_cache(maxsize=None)
def _reference_rule(order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    # barycentric weights of the Legendre nodes, normalised for stability
    bw = BarycentricInterpolator(x).wi
    bw = bw / np.max(np.abs(bw))
    for a in (x, w, bw):
        a.setflags(write=False)
    return x, w, bw


@dataclass(frozen=True)
class RadialGrid:
    """Composite Gauss-Legendre nodes on ``[0, r_max]``.

    ``panels`` equal-width panels carry ``order`` Legendre nodes each, so the
    total node count is ``panels * order``.
    """

    r_max: float
    panels: int
    order: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x, w, _ = _reference_rule(self.order)
        edges = np.linspace(0.0, self.r_max, self.panels + 1)
        half = 0.5 * np.diff(edges)[:, None]
        mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
        nodes = (mid + half * x).ravel()
        weights = (half * w).ravel()
        for a in (nodes, weights, edges):
            a.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def with_size(cls, r_max: float, size: int) -> "RadialGrid":
        """Grid with about ``size`` nodes (rounded up to whole panels).

        Sizes of 512 and above use 16-node panels, which keeps at least 32
        panels; smaller sizes trade panel order for panel count.
        """
        if size >= 512:
            order = 16
        else:
            order = max(2, min(16, size // 32))
        panels = -(-size // order)
        return cls(float(r_max), panels, order)

    def __len__(self) -> int:
        return self.panels * self.order

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Quadrature along the last axis."""
        return values @ self.weights

    def interpolation_matrix(self, r: np.ndarray, outside: float = 0.0):
        """Sparse description of interpolation at the radii ``r``.

        Returns ``(cols, vals)`` of shape ``r.shape + (order,)`` such that
        ``(values[cols] * vals).sum(-1)`` interpolates ``values`` given on the
        nodes. Radii beyond ``r_max`` get zero weights (``outside=0``) so
        the profile is treated as truncated there.
        """
        r = np.asarray(r, dtype=float)
        x, _, bw = _reference_rule(self.order)
        beyond = r > self.r_max * (1.0 + 1e-14)
        rc = np.clip(r, 0.0, self.r_max)
        idx = np.clip(np.searchsorted(self.edges, rc, side="right") - 1, 0, self.panels - 1)
        a = self.edges[idx]
        b = self.edges[idx + 1]
        t = (2.0 * rc - a - b) / (b - a)
        diff = t[..., None] - x
        hit = diff == 0.0
        diff = np.where(hit, 1.0, diff)
        q = bw / diff
        on_node = hit.any(axis=-1)
        q = np.where(on_node[..., None], hit.astype(float), q)
        vals = q / q.sum(axis=-1, keepdims=True)
        if np.any(beyond):
            vals = np.where(beyond[..., None], outside, vals)
        cols = idx[..., None] * self.order + np.arange(self.order)
        return cols, vals

    def interpolate(self, values: np.ndarray, r) -> np.ndarray:
        """Interpolate node values (last axis) at radii ``r``; zero beyond ``r_max``."""
        cols, vals = self.interpolation_matrix(np.asarray(r, dtype=float))
        values = np.asarray(values)
        return np.sum(values[..., cols] * vals, axis=-1)

    def differentiate(self, values: np.ndarray) -> np.ndarray:
        """Panel-wise spectral derivative of node values (last axis)."""
        D = _diff_matrix(self.order) * (2.0 / (self.r_max / self.panels))
        v = np.asarray(values).reshape(values.shape[:-1] + (self.panels, self.order))
        return np.einsum("ij,...pj->...pi", D, v).reshape(values.shape)


@lru_cache(maxsize=None)
def _diff_matrix(order: int) -> np.ndarray:
    x, _, bw = _reference_rule(order)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (bw[None, :] / bw[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    D.setflags(write=False)
    return D


def gauss_legendre(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Plain ``n``-point Gauss-Legendre rule on ``[a, b]``."""
    x, w, _ = _reference_rule(n)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def composite_gauss_legendre(a: float, b: float, panels: int, order: int = 16):
    """Composite rule with ``panels`` equal panels on ``[a, b]``."""
    x, w, _ = _reference_rule(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    """Trapezoid weights on a uniform grid starting at zero.

    Integrands on the spectral side are even in lambda, so the half-line
    trapezoid inherits the spectral accuracy of the full-line rule.
    """
    h = nodes[1] - nodes[0]
    w = np.full(nodes.shape, h)
    w[0] = w[-1] = 0.5 * h
    return w
