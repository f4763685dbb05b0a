"""The dynamic geometric spectral sparsifier.

Pipeline: project the points to k dimensions, build a compressed quad tree
and a 2-WSPD over the projections, view every well-separated pair as a
biclique in the original d-dimensional space, and keep a uniform edge
sample per biclique, scaled by |X||Y|/s (small bicliques are materialized
whole, unscaled).  A point move re-runs only the affected WSPD generators
and converts each touched pair's old sample into a fresh uniform one with
binomial-count resampling, so the sparsifier changes by few edges.

Edges are stored with raw kernel weights per pair; the graph H maps an
unordered id pair to raw * scale.  Every H mutation is logged into a diff
buffer as exact remove/add entries, so replaying the buffer onto an older
Laplacian reconstructs the current one exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import wspd
from .config import RunConfig, adversarial_k
from .errors import (
    DimensionMismatch,
    EmptyInput,
    IndexOutOfRange,
    OutOfRegion,
)
from .kernels import (
    KernelFunction,
    PointSet,
    check_spectral_sparsifier,
    dense_laplacian,
    laplacian_from_edges,
)
from .projection import make_ultra_jl
from .quadtree import CompressedQuadTree
from .sampling import binomial_draw

_SHIFT = 32
_MASK = (1 << _SHIFT) - 1


class PairSample:
    """Edge sample of one biclique, indexed for O(churn) edits."""

    __slots__ = ("edges", "pos", "raw", "by_point", "s_target",
                 "nx", "ny", "scale", "materialized")

    def __init__(self, s_target, nx, ny, scale, materialized):
        self.edges = []       # (a-side id, b-side id)
        self.pos = {}         # edge -> index in edges
        self.raw = {}         # edge -> raw kernel weight
        self.by_point = {}    # id -> set of edges
        self.s_target = s_target
        self.nx = nx
        self.ny = ny
        self.scale = scale
        self.materialized = materialized

    def __len__(self):
        return len(self.edges)

    def __contains__(self, edge):
        return edge in self.pos

    def add(self, edge, raw_w):
        self.pos[edge] = len(self.edges)
        self.edges.append(edge)
        self.raw[edge] = raw_w
        for endpoint in edge:
            self.by_point.setdefault(endpoint, set()).add(edge)

    def discard(self, edge):
        idx = self.pos.pop(edge)
        last = self.edges.pop()
        if last != edge:
            self.edges[idx] = last
            self.pos[last] = idx
        del self.raw[edge]
        for endpoint in edge:
            bucket = self.by_point.get(endpoint)
            bucket.discard(edge)
            if not bucket:
                del self.by_point[endpoint]

    def pop_random(self, rng):
        idx = int(rng.integers(0, len(self.edges)))
        edge = self.edges[idx]
        self.discard(edge)
        return edge

    def point_edges(self, pid):
        return list(self.by_point.get(pid, ()))


@dataclass
class UpdateReport:
    """Per-update accounting, used by replay reports and churn tests."""

    pairs_touched: int = 0
    pairs_removed: int = 0
    pairs_added: int = 0
    pairs_resampled: int = 0
    pairs_rematerialized: int = 0
    pairs_reweighted: int = 0
    edges_changed: int = 0   # diff entries appended (remove/add log length)
    churn: int = 0           # distinct edges whose weight changed
    rebuilt: bool = False


class DynamicGeoSpar:
    """Spectral sparsifier of a kernel graph under single-point moves."""

    def __init__(self):
        raise TypeError("use DynamicGeoSpar.initialize(...)")

    @classmethod
    def initialize(cls, pset: PointSet, kernel: KernelFunction, eps: float,
                   delta: float, k: int, seed: int, *, c_s: float = 0.25,
                   c_jl: float = 1.0, allow_large_eps: bool = False,
                   separation: float = wspd.SEPARATION) -> "DynamicGeoSpar":
        if pset.n < 2:
            raise EmptyInput("need at least 2 points")
        hi = 1.0 if allow_large_eps else 0.1
        if not 0.0 < eps <= hi:
            raise ValueError(f"eps must lie in (0, {hi}]")
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        self = object.__new__(cls)
        self.pset = pset
        self.kernel = kernel
        self.eps = eps
        self.delta = delta
        self.k = k
        self.n = pset.n
        self.seed = seed
        self.c_s = c_s
        self.c_jl = c_jl
        self.gamma = c_jl * kernel.lipschitz_L / k
        ss_jl, ss_samp = np.random.SeedSequence(seed).spawn(2)
        self.jl = make_ultra_jl(pset.dim, k, int(ss_jl.generate_state(1)[0]))
        self.rng = np.random.Generator(np.random.PCG64(ss_samp))
        # affine map taking any projection of [0,1]^d strictly inside [0,1)^k
        bound = float(np.abs(self.jl.matrix).sum(axis=1).max())
        self._proj_off = bound
        self._proj_scale = 1.0 / (2.0 * bound * (1.0 + 1e-9))
        self._h = {}
        self._diff = []
        self._store = {}
        self._touched = set()
        proj = {i: self._project_unit(pset.points[i]) for i in range(self.n)}
        self.tree = CompressedQuadTree.build(proj, k)
        self.pairs = wspd.compute_wspd(self.tree, separation)
        for key in sorted(self.pairs.pairs):
            a = self.tree.by_tok[key >> _SHIFT]
            b = self.tree.by_tok[key & _MASK]
            self._store[key] = self._build_pair(key, a, b, at_init=True)
        self.sparsity_budget = sum(
            min(e.s_target, e.nx * e.ny) for e in self._store.values())
        self._diff.clear()
        self.update_count = 0
        return self

    # -- projection ---------------------------------------------------------

    def _project_unit(self, x) -> np.ndarray:
        return (self.jl.project(x) + self._proj_off) * self._proj_scale

    # -- sizing policy ------------------------------------------------------

    def sample_size(self, nx: int, ny: int) -> int:
        """ceil(c_s * eps^-2 * n^gamma * (nx+ny) * ln(nx+ny+1))."""
        return math.ceil(self.c_s * self.eps ** -2 * self.n ** self.gamma
                         * (nx + ny) * math.log(nx + ny + 1))

    # -- H / diff primitives --------------------------------------------------

    def _set_edge(self, i: int, j: int, w: float):
        if i > j:
            i, j = j, i
        key = (i, j)
        old = self._h.get(key, 0.0)
        if old == w:
            return
        if old != 0.0:
            self._diff.append((i, j, -old))
        if w != 0.0:
            self._diff.append((i, j, w))
            self._h[key] = w
        else:
            del self._h[key]
        self._touched.add(key)

    # -- pair construction ----------------------------------------------------

    def _weights(self, ids_a, ids_b) -> np.ndarray:
        pts = self.pset.points
        d2 = np.sum((pts[ids_a] - pts[ids_b]) ** 2, axis=1)
        return self.kernel.eval_sqdist(d2)

    def _build_pair(self, key, a_node, b_node, at_init: bool) -> PairSample:
        nx, ny = a_node.count, b_node.count
        s = self.sample_size(nx, ny)
        total = nx * ny
        materialize = (total <= s) if at_init else (total <= 4 * s)
        if materialize:
            a_ids = self.tree.subtree_ids(a_node)
            b_ids = self.tree.subtree_ids(b_node)
            entry = PairSample(s, nx, ny, 1.0, True)
            ii = np.repeat(a_ids, ny)
            jj = np.tile(b_ids, nx)
            ws = self._weights(ii, jj)
            for i, j, w in zip(ii.tolist(), jj.tolist(), ws.tolist()):
                entry.add((i, j), w)
                self._set_edge(i, j, w)
            return entry
        scale = total / s
        entry = PairSample(s, nx, ny, scale, False)
        rng = self.rng
        kth = self.tree.kth_leaf
        if s <= total // 2:
            picked = set()
            while len(picked) < s:
                idx = int(rng.integers(0, total))
                if idx not in picked:
                    picked.add(idx)
        else:  # near-full sample: rejection on the complement instead
            excluded = set()
            while len(excluded) < total - s:
                idx = int(rng.integers(0, total))
                if idx not in excluded:
                    excluded.add(idx)
            picked = set(range(total)) - excluded
        pairs = [(kth(a_node, idx // ny).pid, kth(b_node, idx % ny).pid)
                 for idx in sorted(picked)]
        ws = self._weights([p[0] for p in pairs], [p[1] for p in pairs])
        for (i, j), w in zip(pairs, ws.tolist()):
            entry.add((i, j), w)
            self._set_edge(i, j, w * scale)
        return entry

    def _drop_pair(self, key):
        entry = self._store.pop(key)
        for edge in entry.edges:
            self._set_edge(edge[0], edge[1], 0.0)

    # -- update ---------------------------------------------------------------

    def update(self, i: int, z) -> UpdateReport:
        """Move point i to z (coordinates in the unit frame [0,1)^d)."""
        if not 0 <= i < self.n:
            raise IndexOutOfRange(f"index {i} outside [0, {self.n})")
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.pset.dim,):
            raise DimensionMismatch(
                f"expected dimension {self.pset.dim}, got {z.shape}")
        if not np.all((z >= 0.0) & (z < 1.0)):
            raise OutOfRegion("target outside the unit bounding region")
        q_new = self._project_unit(z)
        self._touched = set()
        diff_mark = len(self._diff)
        deltas = wspd.find_modified_pairs(self.tree, self.pairs, i, q_new)
        self.pset.set_point(i, z)
        report = UpdateReport(pairs_touched=len(deltas))
        # Phase one: release every edge changing owner (dropped pairs, and
        # the moved point's edges inside surviving pairs).  Only then may
        # other pairs claim the same edge keys: the final WSPD covers each
        # id pair exactly once, so claims never collide with each other.
        later = []
        for delta in deltas:
            if delta.new is None:
                self._drop_pair(delta.key)
                report.pairs_removed += 1
                continue
            if delta.old is not None and not delta.unchanged_ids:
                entry = self._store[delta.key]
                for edge in entry.point_edges(i):
                    entry.discard(edge)
                    self._set_edge(edge[0], edge[1], 0.0)
            later.append(delta)
        for delta in later:
            self._apply_delta(delta, i, report)
        report.edges_changed = len(self._diff) - diff_mark
        report.churn = len(self._touched)
        self.update_count += 1
        return report

    def _apply_delta(self, delta: wspd.PairDelta, pid: int,
                     report: UpdateReport):
        key = delta.key
        a_node = self.tree.by_tok[key >> _SHIFT]
        b_node = self.tree.by_tok[key & _MASK]
        if delta.old is None:
            self._store[key] = self._build_pair(key, a_node, b_node,
                                                at_init=False)
            report.pairs_added += 1
            return
        entry = self._store[key]
        if delta.unchanged_ids:
            # same id universe, the moved point changed position: reweight
            for edge in entry.point_edges(pid):
                w = self.kernel.eval(self.pset.points[edge[0]],
                                     self.pset.points[edge[1]])
                entry.raw[edge] = w
                self._set_edge(edge[0], edge[1], w * entry.scale)
            report.pairs_reweighted += 1
            return
        self._resample_pair(key, entry, delta, a_node, b_node, pid, report)

    def _resample_pair(self, key, entry: PairSample, delta, a_node, b_node,
                       pid: int, report: UpdateReport):
        new_a, new_b = delta.new
        nx, ny = new_a.count, new_b.count
        total = nx * ny
        s_new = self.sample_size(nx, ny)
        # symmetric difference of the old and new bicliques (id sets change
        # only by the moved point, so the intersection is a size formula)
        ia = nx - (1 if new_a.has_moved_point else 0)
        ib = ny - (1 if new_b.has_moved_point else 0)
        inter = ia * ib
        sym = entry.nx * entry.ny + total - 2 * inter
        fast_ok = (total > 4 * s_new
                   and sym * (nx + ny) <= 4 * total)
        if not fast_ok:
            self._rematerialize(key, entry, a_node, b_node,
                                new_a, new_b, pid, s_new)
            report.pairs_rematerialized += 1
            return
        self._fast_resample(entry, a_node, b_node, new_a, new_b, pid, s_new)
        report.pairs_resampled += 1

    def _rematerialize(self, key, entry, a_node, b_node, new_a, new_b,
                       pid, s_new):
        nx, ny = new_a.count, new_b.count
        if entry.materialized:
            # incremental: the departed point's edges are already evicted;
            # only the arriving point's slab is new
            if new_a.has_moved_point or new_b.has_moved_point:
                if new_a.has_moved_point:
                    others = self.tree.subtree_ids(b_node)
                    edges = [(pid, j) for j in others]
                else:
                    others = self.tree.subtree_ids(a_node)
                    edges = [(i, pid) for i in others]
                ws = self._weights([e[0] for e in edges],
                                   [e[1] for e in edges])
                for edge, w in zip(edges, ws.tolist()):
                    entry.add(edge, w)
                    self._set_edge(edge[0], edge[1], w)
            entry.nx, entry.ny, entry.s_target = nx, ny, s_new
            return
        self._drop_pair(key)
        self._store[key] = self._build_pair(key, a_node, b_node,
                                            at_init=False)

    def _draw_leaf(self, node, exclude_pid=None) -> int:
        rng = self.rng
        while True:
            leaf = self.tree.kth_leaf(node, int(rng.integers(0, node.count)))
            if leaf.pid != exclude_pid:
                return leaf.pid

    def _fast_resample(self, entry, a_node, b_node, new_a, new_b, pid, s_new):
        nx, ny = new_a.count, new_b.count
        total = nx * ny
        s_out = min(s_new, total)
        scale_new = total / s_out
        # the departed point's edges were evicted in the release phase
        if new_a.has_moved_point:
            fresh_count = ny
        elif new_b.has_moved_point:
            fresh_count = nx
        else:
            fresh_count = 0
        inter = total - fresh_count
        x = binomial_draw(s_out, fresh_count / total, self.rng)
        x = min(x, fresh_count)
        x = max(x, s_out - inter)
        fresh = []
        seen = set()
        while len(fresh) < x:
            if new_a.has_moved_point:
                edge = (pid, self._draw_leaf(b_node))
            else:
                edge = (self._draw_leaf(a_node), pid)
            if edge not in seen:
                seen.add(edge)
                fresh.append(edge)
        keep = s_out - x
        while len(entry) > keep:
            edge = entry.pop_random(self.rng)
            self._set_edge(edge[0], edge[1], 0.0)
        ex_a = pid if new_a.has_moved_point else None
        ex_b = pid if new_b.has_moved_point else None
        while len(entry) < keep:  # old sample short: extend in the intersection
            edge = (self._draw_leaf(a_node, ex_a), self._draw_leaf(b_node, ex_b))
            if edge not in entry and edge not in seen:
                w = self.kernel.eval(self.pset.points[edge[0]],
                                     self.pset.points[edge[1]])
                entry.add(edge, w)
                self._set_edge(edge[0], edge[1], w * scale_new)
        for edge, w in zip(fresh, self._weights(
                [e[0] for e in fresh], [e[1] for e in fresh]).tolist() if fresh else []):
            entry.add(edge, w)
            self._set_edge(edge[0], edge[1], w * scale_new)
        if scale_new != entry.scale:
            for edge in entry.edges:
                self._set_edge(edge[0], edge[1], entry.raw[edge] * scale_new)
        entry.scale = scale_new
        entry.s_target = s_new
        entry.nx, entry.ny = nx, ny
        entry.materialized = False

    # -- read-out interfaces ----------------------------------------------------

    def get_diff(self) -> list:
        """Return and clear the pending signed edge updates."""
        out = self._diff
        self._diff = []
        return out

    def get_laplacian(self) -> np.ndarray:
        return laplacian_from_edges(
            self.n, [(i, j, w) for (i, j), w in self._h.items()])

    def edge_map(self) -> dict:
        return dict(self._h)

    @property
    def edge_count(self) -> int:
        return len(self._h)

    def fold_store(self) -> dict:
        """Recompute H from the per-pair samples (consistency oracle)."""
        out = {}
        for entry in self._store.values():
            scale = entry.scale
            for edge in entry.edges:
                i, j = edge
                ekey = (i, j) if i < j else (j, i)
                if ekey in out:
                    raise AssertionError(f"edge {ekey} owned by two pairs")
                out[ekey] = entry.raw[edge] * scale
        return out

    def spectral_check(self, eps: Optional[float] = None):
        lap_g = dense_laplacian(self.pset.points, self.kernel)
        return check_spectral_sparsifier(lap_g, self.get_laplacian(),
                                         self.eps if eps is None else eps)


class FullyDynamicSparsifier:
    """Unbounded-update wrapper: rebuild with a fresh projection every
    `budget` moves (default n // 2)."""

    def __init__(self, pset: PointSet, kernel: KernelFunction, eps: float,
                 delta: float, k: int, seed: int, rebuild_budget: int = 0,
                 **kwargs):
        self._kernel = kernel
        self._eps = eps
        self._delta = delta
        self._k = k
        self._kwargs = kwargs
        self.base_seed = seed
        self.budget = rebuild_budget if rebuild_budget > 0 else max(1, pset.n // 2)
        self.rebuild_count = 0
        self.updates_since_rebuild = 0
        self.inner = DynamicGeoSpar.initialize(
            pset, kernel, eps, delta, k, self.seed_for(0), **kwargs)

    def seed_for(self, rebuild_index: int) -> int:
        ss = np.random.SeedSequence([self.base_seed, rebuild_index])
        return int(ss.generate_state(1)[0])

    def update(self, i: int, z) -> UpdateReport:
        rebuilt = False
        if self.updates_since_rebuild >= self.budget:
            self.rebuild()
            rebuilt = True
        report = self.inner.update(i, z)
        self.updates_since_rebuild += 1
        report.rebuilt = rebuilt
        return report

    def rebuild(self):
        self.rebuild_count += 1
        self.updates_since_rebuild = 0
        self.inner = DynamicGeoSpar.initialize(
            self.inner.pset, self._kernel, self._eps, self._delta, self._k,
            self.seed_for(self.rebuild_count), **self._kwargs)

    def get_laplacian(self):
        return self.inner.get_laplacian()

    def spectral_check(self, eps=None):
        return self.inner.spectral_check(eps)


def adversarial_mode(cfg: RunConfig, n: int, d: int, alpha: float,
                     budget_c: float = 4.0) -> RunConfig:
    """Preset for adversarially robust operation: k = ceil(sqrt(log2 n)).

    Warns (never raises) when d * log2(alpha) exceeds budget_c * log2(n),
    the regime where the robustness guarantee degrades.
    """
    if d * math.log2(max(alpha, 1.0)) > budget_c * math.log2(max(n, 2)):
        warnings.warn(
            "aspect-ratio/dimension budget exceeded: "
            f"d*log2(alpha) = {d * math.log2(alpha):.1f} > "
            f"{budget_c} * log2(n) = {budget_c * math.log2(n):.1f}",
            RuntimeWarning, stacklevel=2)
    return replace(cfg, k=adversarial_k(n))
