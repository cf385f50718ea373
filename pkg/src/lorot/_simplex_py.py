"""Primal network simplex for the transportation problem (pure Python).

Minimizes sum(flow * cost) over the bipartite graph of m sources and n
sinks, supplies equal to demands, all arcs with lower bound 0 and no
upper bound.  An artificial root node (index m + n) with Big-M arcs
source->root and root->sink supplies the initial spanning-tree basis and
absorbs infeasibility: positive artificial flow at optimality means no
admissible coupling exists.

Determinism contract (shared bit-for-bit with the compiled twin in
_simplex.pyx):

  * arc ids are stable: the m+n artificial arcs first, then real arcs in
    insertion order;
  * entering arc: cyclic block search, most negative reduced cost in the
    block, ties toward the lowest arc id; switches to Bland's rule
    (lowest violating id) after a long degenerate stall, back after the
    next nondegenerate pivot;
  * leaving arc: minimum ratio, ties toward the lowest arc id;
  * reduced costs are evaluated as (cost + pot[tail]) - pot[head] in
    both backends, so float rounding is identical and the two backends
    pivot through the same bases.
"""

from __future__ import annotations

import math

import numpy as np


class SimplexStallError(RuntimeError):
    """Pivot budget exhausted; indicates a solver defect, not bad data."""


_SCAN_CHUNK = 8192


class NetworkSimplex:
    def __init__(self, supplies, demands, big_m: float):
        supplies = np.asarray(supplies, dtype=np.float64)
        demands = np.asarray(demands, dtype=np.float64)
        if supplies.ndim != 1 or demands.ndim != 1:
            raise ValueError("supplies and demands must be 1-d")
        if np.any(supplies < 0.0) or np.any(demands < 0.0):
            raise ValueError("negative supply or demand")
        m = len(supplies)
        n = len(demands)
        n_nodes = m + n + 1
        root = m + n
        self.m = m
        self.n = n
        self.root = root
        self.big_m = float(big_m)
        self.n_pivots = 0

        cap = 2 * (m + n) + 16
        self._tail = np.empty(cap, dtype=np.int32)
        self._head = np.empty(cap, dtype=np.int32)
        self._cost = np.empty(cap, dtype=np.float64)
        self._flow = np.empty(cap, dtype=np.float64)
        self._in_tree = np.zeros(cap, dtype=np.uint8)
        self._n_arcs = 0

        self._parent = np.empty(n_nodes, dtype=np.int32)
        self._pred_arc = np.empty(n_nodes, dtype=np.int32)
        self._depth = np.empty(n_nodes, dtype=np.int32)
        self._pot = np.empty(n_nodes, dtype=np.float64)
        self._child_head = np.full(n_nodes, -1, dtype=np.int32)
        self._next_sib = np.full(n_nodes, -1, dtype=np.int32)
        self._prev_sib = np.full(n_nodes, -1, dtype=np.int32)
        self._stack = np.empty(n_nodes, dtype=np.int32)

        # artificial star basis: arc i is source i -> root carrying the
        # supply, arc m+j is root -> sink j carrying the demand
        for i in range(m):
            self._append_arc(i, root, self.big_m, supplies[i], 1)
        for j in range(n):
            self._append_arc(root, m + j, self.big_m, demands[j], 1)

        self._parent[root] = -1
        self._pred_arc[root] = -1
        self._depth[root] = 0
        self._pot[root] = 0.0
        for v in range(m + n):
            self._parent[v] = root
            self._pred_arc[v] = v
            self._depth[v] = 1
            self._pot[v] = -self.big_m if v < m else self.big_m
            self._attach(v, root)

        self._cursor = 0
        self._bland = False
        self._stall = 0
        self._stall_limit = 2 * (m + n) + 64

    # -- arc storage -------------------------------------------------

    def _ensure_capacity(self, extra: int) -> None:
        need = self._n_arcs + extra
        cap = len(self._tail)
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        for name in ("_tail", "_head", "_cost", "_flow", "_in_tree"):
            old = getattr(self, name)
            grown = np.empty(cap, dtype=old.dtype)
            grown[: self._n_arcs] = old[: self._n_arcs]
            if name == "_in_tree":
                grown[self._n_arcs :] = 0
            setattr(self, name, grown)

    def _append_arc(self, tail, head, cost, flow, in_tree) -> int:
        self._ensure_capacity(1)
        a = self._n_arcs
        self._tail[a] = tail
        self._head[a] = head
        self._cost[a] = cost
        self._flow[a] = flow
        self._in_tree[a] = in_tree
        self._n_arcs = a + 1
        return a

    def add_arcs(self, srcs, dsts, costs) -> int:
        """Append real arcs source src -> sink dst; returns the first id."""
        srcs = np.asarray(srcs, dtype=np.int32)
        dsts = np.asarray(dsts, dtype=np.int32)
        costs = np.asarray(costs, dtype=np.float64)
        k = len(srcs)
        if len(dsts) != k or len(costs) != k:
            raise ValueError("src, dst, cost arrays must have equal length")
        self._ensure_capacity(k)
        a0 = self._n_arcs
        self._tail[a0 : a0 + k] = srcs
        self._head[a0 : a0 + k] = dsts + self.m
        self._cost[a0 : a0 + k] = costs
        self._flow[a0 : a0 + k] = 0.0
        self._in_tree[a0 : a0 + k] = 0
        self._n_arcs = a0 + k
        return a0

    # -- tree bookkeeping --------------------------------------------

    def _attach(self, x: int, p: int) -> None:
        h = self._child_head[p]
        self._next_sib[x] = h
        self._prev_sib[x] = -1
        if h != -1:
            self._prev_sib[h] = x
        self._child_head[p] = x

    def _detach(self, x: int) -> None:
        p = self._parent[x]
        pr = self._prev_sib[x]
        nx = self._next_sib[x]
        if pr == -1:
            self._child_head[p] = nx
        else:
            self._next_sib[pr] = nx
        if nx != -1:
            self._prev_sib[nx] = pr

    def _refresh_subtree(self, q: int) -> None:
        """Recompute depth and potential below q from q's parent link."""
        stack = self._stack
        stack[0] = q
        top = 1
        while top > 0:
            top -= 1
            x = int(stack[top])
            p = self._parent[x]
            a = self._pred_arc[x]
            self._depth[x] = self._depth[p] + 1
            if self._head[a] == x:
                self._pot[x] = self._pot[p] + self._cost[a]
            else:
                self._pot[x] = self._pot[p] - self._cost[a]
            c = self._child_head[x]
            while c != -1:
                stack[top] = c
                top += 1
                c = self._next_sib[c]

    # -- pivoting ----------------------------------------------------

    def _find_entering(self, tol: float) -> int:
        n_arcs = self._n_arcs
        tail = self._tail
        head = self._head
        cost = self._cost
        pot = self._pot
        in_tree = self._in_tree
        if self._bland:
            for lo in range(0, n_arcs, _SCAN_CHUNK):
                hi = min(lo + _SCAN_CHUNK, n_arcs)
                rc = (cost[lo:hi] + pot[tail[lo:hi]]) - pot[head[lo:hi]]
                rc[in_tree[lo:hi] == 1] = np.inf
                hits = np.flatnonzero(rc < -tol)
                if len(hits):
                    return lo + int(hits[0])
            return -1
        block = max(64, int(math.isqrt(n_arcs)) + 1)
        start = self._cursor % n_arcs
        scanned = 0
        while scanned < n_arcs:
            lo = start
            hi = min(lo + block, n_arcs)
            rc = (cost[lo:hi] + pot[tail[lo:hi]]) - pot[head[lo:hi]]
            rc[in_tree[lo:hi] == 1] = np.inf
            k = int(np.argmin(rc))
            if rc[k] < -tol:
                self._cursor = (lo + k + 1) % n_arcs
                return lo + k
            scanned += hi - lo
            start = hi % n_arcs
        return -1

    def _pivot(self, enter: int) -> float:
        parent = self._parent
        pred_arc = self._pred_arc
        depth = self._depth
        tail = self._tail
        head = self._head
        flow = self._flow

        u = int(tail[enter])
        v = int(head[enter])

        # cycle = enter (u -> v) plus tree path v -> apex -> u; flow
        # travels v -> u along the path, so a path arc is "along" the
        # push iff it points in the travel direction
        up_u = []   # (arc, node) pairs climbing from u, traversed parent->node
        up_v = []   # (arc, node) pairs climbing from v, traversed node->parent
        x = u
        y = v
        while depth[x] > depth[y]:
            up_u.append((int(pred_arc[x]), x))
            x = int(parent[x])
        while depth[y] > depth[x]:
            up_v.append((int(pred_arc[y]), y))
            y = int(parent[y])
        while x != y:
            up_u.append((int(pred_arc[x]), x))
            x = int(parent[x])
            up_v.append((int(pred_arc[y]), y))
            y = int(parent[y])

        theta = math.inf
        leave = -1
        leave_node = -1
        leave_on_u = False
        for a, node in up_u:
            against = head[a] != node  # traversed parent->node
            if against and (
                flow[a] < theta or (flow[a] == theta and (leave == -1 or a < leave))
            ):
                theta = float(flow[a])
                leave = a
                leave_node = node
                leave_on_u = True
        for a, node in up_v:
            against = tail[a] != node  # traversed node->parent
            if against and (
                flow[a] < theta or (flow[a] == theta and (leave == -1 or a < leave))
            ):
                theta = float(flow[a])
                leave = a
                leave_node = node
                leave_on_u = False
        if leave == -1:
            raise SimplexStallError("cycle without a leaving arc")

        if theta != 0.0:
            flow[enter] += theta
            for a, node in up_u:
                if head[a] == node:
                    flow[a] += theta
                else:
                    flow[a] -= theta
            for a, node in up_v:
                if tail[a] == node:
                    flow[a] += theta
                else:
                    flow[a] -= theta
        flow[leave] = 0.0

        self._in_tree[enter] = 1
        self._in_tree[leave] = 0

        # the subtree cut off by the leaving arc contains exactly one
        # endpoint of the entering arc; re-root it there and hang it on
        # the other endpoint
        if leave_on_u:
            q, attach_to = u, v
        else:
            q, attach_to = v, u
        prev_node = attach_to
        prev_arc = enter
        x = q
        while True:
            p = int(parent[x])
            a = int(pred_arc[x])
            self._detach(x)
            parent[x] = prev_node
            pred_arc[x] = prev_arc
            self._attach(x, prev_node)
            if x == leave_node:
                break
            prev_node = x
            prev_arc = a
            x = p
        self._refresh_subtree(q)
        return theta

    def solve(self, tol: float = 1e-11, max_pivots: int = 0) -> int:
        if max_pivots <= 0:
            max_pivots = 200 * (self._n_arcs + self.m + self.n) + 100000
        done = 0
        while True:
            enter = self._find_entering(tol)
            if enter < 0:
                break
            if done >= max_pivots:
                raise SimplexStallError(f"exceeded {max_pivots} pivots")
            theta = self._pivot(enter)
            done += 1
            self.n_pivots += 1
            if theta == 0.0:
                self._stall += 1
                if self._stall > self._stall_limit:
                    self._bland = True
            else:
                self._stall = 0
                self._bland = False
        return done

    # -- solution access ----------------------------------------------

    def potentials(self) -> np.ndarray:
        return self._pot.copy()

    def artificial_mass(self) -> float:
        k = self.m + self.n
        return float(np.sum(self._flow[:k]))

    def real_objective(self) -> float:
        k = self.m + self.n
        sl = slice(k, self._n_arcs)
        return float(np.dot(self._flow[sl], self._cost[sl]))

    def nonzero_real_arcs(self):
        """(src, dst, flow) arrays over real arcs with positive flow."""
        k = self.m + self.n
        ids = k + np.flatnonzero(self._flow[k : self._n_arcs] > 0.0)
        return (
            self._tail[ids].astype(np.int64),
            self._head[ids].astype(np.int64) - self.m,
            self._flow[ids].copy(),
        )

    @property
    def n_arcs(self) -> int:
        return self._n_arcs
