"""2-WSPD over the compressed quad tree, with exact local maintenance.

The greedy recursion from (root, root) — emit a pair when well separated,
otherwise split the node with larger cell side — decomposes exactly into
independent runs over unordered pairs of sibling children, one set of runs
per internal node: a run's output depends only on the two subtrees below
its sibling pair.  The pair list is therefore stored grouped by generating
sibling pair, and a point move only re-runs generators whose sides gained,
lost, or moved a point (plus sibling pairs created or dissolved by the
tree mutation).  The maintained list stays *set-equal* to a from-scratch
recomputation on the mutated tree; that equality is the master oracle in
the test suite.

Hot-path keys are packed ints built from per-tree node tokens; canonical
(level, origin) identities are used for split tie-breaking and for
comparing pair lists across different tree instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import DuplicatePoint, EmptyInput, UnknownPoint
from .quadtree import CompressedQuadTree, Node, grid_key

SEPARATION = 2.0

_SHIFT = 32
_MASK = (1 << _SHIFT) - 1


def _pk(ta: int, tb: int) -> int:
    return (ta << _SHIFT) | tb if ta < tb else (tb << _SHIFT) | ta


def unpack(key: int):
    return key >> _SHIFT, key & _MASK


def well_separated(u: Node, v: Node, s: float = SEPARATION) -> bool:
    """True iff the nodes' enclosing balls are at distance >= s * max radius.

    Internal nodes use the circumscribed ball of their dyadic cell
    (radius = side * sqrt(k) / 2); leaves are zero-radius balls at the point.
    """
    if u is v:
        return False
    gap = math.dist(u.center, v.center) - u.radius - v.radius
    return gap >= s * max(u.radius, v.radius)


def _run_generator(a: Node, b: Node, s: float) -> set:
    """All pairs the greedy recursion emits below the sibling call (a, b).

    The emitted set is a pure function of the two subtrees; visitation
    order does not matter.
    """
    out = set()
    visited = set()  # guards recursing calls; emissions dedupe through `out`
    stack = [(a, b)]
    dist = math.dist
    while stack:
        u, v = stack.pop()
        tu = u.tok
        tv = v.tok
        key = (tu << _SHIFT) | tv if tu < tv else (tv << _SHIFT) | tu
        ru = u.radius
        rv = v.radius
        if ru == 0.0 and rv == 0.0:
            out.add(key)  # two distinct points are always well separated
            continue
        mx = ru if ru >= rv else rv
        if dist(u.center, v.center) - ru - rv >= s * mx:
            out.add(key)
            continue
        if key in visited:
            continue
        visited.add(key)
        # split the node with larger cell side; tie -> canonically first
        lu = u.lmax
        lv = v.lmax
        if lu > lv or (lu == lv and u.ckey <= v.ckey):
            spl, keep = u, v
        else:
            spl, keep = v, u
        if spl.children is None:  # leaf-leaf calls are always separated
            continue
        for child in spl.children.values():
            stack.append((child, keep))
    return out


@dataclass(frozen=True)
class SideInfo:
    tok: int
    count: int
    has_moved_point: bool  # p on the old side / p_new on the new side


@dataclass(frozen=True)
class PairDelta:
    """One WSPD pair affected by a point move: its state before and after."""

    key: int
    old: Optional[tuple]  # (SideInfo, SideInfo) in key token order, or None
    new: Optional[tuple]

    @property
    def unchanged_ids(self) -> bool:
        """True when the pair survived with identical point-id sets."""
        if self.old is None or self.new is None:
            return False
        return all(o.has_moved_point == n.has_moved_point
                   for o, n in zip(self.old, self.new))


class WspdPairList:
    """The pair set plus the inverted indexes the maintenance needs."""

    __slots__ = ("s", "pairs", "by_gen", "gens_by_node", "node_index")

    def __init__(self, s: float = SEPARATION):
        self.s = s
        self.pairs: set = set()       # packed pair keys
        self.by_gen: dict = {}        # packed genkey -> set of pair keys
        self.gens_by_node: dict = {}  # side token -> set of genkeys
        self.node_index: dict = {}    # node token -> set of pair keys

    def __len__(self):
        return len(self.pairs)

    def set_gen(self, gen: int, keys: set):
        if gen in self.by_gen:
            raise AssertionError(f"generator {gen} already present")
        self.by_gen[gen] = keys
        index = self.node_index
        for side in unpack(gen):
            self.gens_by_node.setdefault(side, set()).add(gen)
        pairs = self.pairs
        for key in keys:
            pairs.add(key)
            a = key >> _SHIFT
            b = key & _MASK
            index.setdefault(a, set()).add(key)
            index.setdefault(b, set()).add(key)

    def pop_gen(self, gen: int) -> set:
        keys = self.by_gen.pop(gen)
        for side in unpack(gen):
            bucket = self.gens_by_node.get(side)
            bucket.discard(gen)
            if not bucket:
                del self.gens_by_node[side]
        pairs = self.pairs
        index = self.node_index
        for key in keys:
            pairs.discard(key)
            for side in (key >> _SHIFT, key & _MASK):
                bucket = index.get(side)
                if bucket is not None:
                    bucket.discard(key)
                    if not bucket:
                        del index[side]
        return keys

    def stage_gen(self, gen: int, new_keys: set):
        """Install a generator's new output and apply its *drops* only.

        Returns (dropped, gained); the caller must feed every gained key to
        commit_gains after all drops across generators are staged — a pair
        can migrate between two re-run generators, and its drop from the
        old owner must never undo the new owner's gain.
        """
        old_keys = self.by_gen.get(gen)
        if old_keys is None:
            for side in unpack(gen):
                self.gens_by_node.setdefault(side, set()).add(gen)
            self.by_gen[gen] = new_keys
            return set(), set(new_keys)
        dropped = old_keys - new_keys
        gained = new_keys - old_keys
        self.by_gen[gen] = new_keys
        pairs = self.pairs
        index = self.node_index
        for key in dropped:
            pairs.discard(key)
            for side in (key >> _SHIFT, key & _MASK):
                bucket = index.get(side)
                if bucket is not None:
                    bucket.discard(key)
                    if not bucket:
                        del index[side]
        return dropped, gained

    def commit_gains(self, keys):
        pairs = self.pairs
        index = self.node_index
        for key in keys:
            pairs.add(key)
            index.setdefault(key >> _SHIFT, set()).add(key)
            index.setdefault(key & _MASK, set()).add(key)

    def pairs_of_node(self, tok: int) -> set:
        return set(self.node_index.get(tok, ()))

    def canonical_pairs(self, tree: CompressedQuadTree) -> set:
        """Pairs as unordered (level, origin)/(-1, pid) identity pairs,
        comparable across tree instances."""
        out = set()
        by_tok = tree.by_tok
        for key in self.pairs:
            wa = by_tok[key >> _SHIFT].wsid
            wb = by_tok[key & _MASK].wsid
            out.add((wa, wb) if wa <= wb else (wb, wa))
        return out

    def debug_dump(self, tree: CompressedQuadTree) -> str:
        lines = sorted(f"{a} -- {b}" for a, b in
                       ((str(p[0]), str(p[1])) for p in self.canonical_pairs(tree)))
        return "\n".join(lines)


def compute_wspd(tree: CompressedQuadTree, s: float = SEPARATION) -> WspdPairList:
    """Fresh WSPD of the whole tree (greedy recursion, canonical result)."""
    if tree.root is None:
        raise EmptyInput("tree is empty")
    pl = WspdPairList(s)
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            continue
        kids = node.child_list()
        for i in range(len(kids)):
            stack.append(kids[i])
            for j in range(i + 1, len(kids)):
                gen = _pk(kids[i].tok, kids[j].tok)
                pl.set_gen(gen, _run_generator(kids[i], kids[j], s))
    return pl


def find_modified_pairs(tree: CompressedQuadTree, pl: WspdPairList,
                        pid: int, new_vec) -> list:
    """Move point `pid` to `new_vec`; update tree and pair list in place.

    Returns PairDelta descriptors sorted by pair key: every pair removed,
    added, or surviving with changed point content.  Pairs re-emitted
    verbatim with untouched content are not reported.
    """
    leaf = tree.point_index.get(pid)
    if leaf is None:
        raise UnknownPoint(f"point id {pid} not present")
    new_ikey = grid_key(new_vec)
    old_ikey = leaf.ikey
    loc_new = tree.locate_key(new_ikey)
    if loc_new.is_leaf and loc_new.node is not leaf:
        raise DuplicatePoint(
            f"target location collides with point {loc_new.node.pid}")

    # chains of nodes whose subtree content will change (old tree view)
    chain_p = tree.path_to_root(leaf)
    chain_q = tree.path_to_root(loc_new.node) if loc_new.node is not None else []
    old_nodes = {n.tok: n for n in chain_p}
    old_nodes.update((n.tok, n) for n in chain_q)
    chain_p_toks = {n.tok for n in chain_p}
    old_counts = {t: nd.count for t, nd in old_nodes.items()}
    old_children = {nd.wsid: [c.tok for c in nd.children.values()]
                    for nd in old_nodes.values() if not nd.is_leaf}

    old_affected = set()
    gens_by_node = pl.gens_by_node
    for t in old_nodes:
        old_affected |= gens_by_node.get(t, set())

    rep_d = tree.delete(pid)
    rep_i = tree.insert(pid, new_vec)
    reparented = rep_d.reparented + rep_i.reparented

    # sibling relations dissolved by re-parenting
    for c_id, old_par in reparented:
        if old_par is None:
            continue
        c_tok = tree.nodes[c_id].tok
        for sib in old_children.get(old_par, ()):
            if sib != c_tok:
                gen = _pk(c_tok, sib)
                if gen in pl.by_gen:
                    old_affected.add(gen)

    # chains in the new tree
    new_leaf = tree.point_index[pid]
    chain_pn = tree.path_to_root(new_leaf)
    loc_old = tree.locate_key(old_ikey)
    chain_qn = tree.path_to_root(loc_old.node) if loc_old.node is not None else []
    dirty_new = {n.tok for n in chain_pn} | {n.tok for n in chain_qn}
    for wsid in rep_i.created + rep_d.created:
        node = tree.nodes.get(wsid)
        if node is not None:
            dirty_new.add(node.tok)
    chain_pn_toks = {n.tok for n in chain_pn}

    new_needed = set()
    by_tok = tree.by_tok
    for t in dirty_new:
        node = by_tok.get(t)
        if node is None or node.parent is None:
            continue
        for sib in node.parent.children.values():
            if sib.tok != t:
                new_needed.add(_pk(t, sib.tok))
    for c_id, _old_par in reparented:
        node = tree.nodes.get(c_id)
        if node is None or node.parent is None:
            continue
        for sib in node.parent.children.values():
            if sib.tok != node.tok:
                new_needed.add(_pk(node.tok, sib.tok))

    removed_keys = set()
    added_keys = set()
    s = pl.s
    for gen in old_affected - new_needed:  # dissolved sibling pairs
        removed_keys |= pl.pop_gen(gen)
    # stage all drops before committing any gains: pairs may migrate
    # between two re-run generators under the same key
    for gen in new_needed:
        keys = _run_generator(by_tok[gen >> _SHIFT], by_tok[gen & _MASK], s)
        dropped, gained = pl.stage_gen(gen, keys)
        removed_keys |= dropped
        added_keys |= gained
    pl.commit_gains(added_keys)

    def old_side(tok) -> SideInfo:
        count = old_counts.get(tok)
        if count is None:
            count = by_tok[tok].count  # clean side: count unchanged
        return SideInfo(tok, count, tok in chain_p_toks)

    def new_side(tok) -> SideInfo:
        return SideInfo(tok, by_tok[tok].count, tok in chain_pn_toks)

    # survivors whose point content changed (pair kept, p left or p_new joined)
    moved = chain_p_toks | chain_pn_toks
    touched = set()
    node_index = pl.node_index
    for t in moved:
        touched |= node_index.get(t, set())
    touched -= removed_keys
    touched -= added_keys

    deltas = []
    for key in removed_keys:
        in_added = key in added_keys
        old = (old_side(key >> _SHIFT), old_side(key & _MASK))
        new = (new_side(key >> _SHIFT), new_side(key & _MASK)) if in_added else None
        deltas.append(PairDelta(key, old, new))
    for key in added_keys:
        if key not in removed_keys:
            deltas.append(PairDelta(
                key, None, (new_side(key >> _SHIFT), new_side(key & _MASK))))
    for key in touched:
        a = key >> _SHIFT
        b = key & _MASK
        deltas.append(PairDelta(key, (old_side(a), old_side(b)),
                                (new_side(a), new_side(b))))
    deltas.sort(key=lambda d: d.key)
    return deltas
