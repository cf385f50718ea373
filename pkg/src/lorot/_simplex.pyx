# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Primal network simplex for the transportation problem (compiled twin).

Same algorithm, pivot rules, and float-op ordering as the pure-Python
backend in _simplex_py.py; reduced costs are evaluated with the exact
expression (cost + pot[tail]) - pot[head] in both, so the two backends
pivot through identical bases and return identical vertices.  See the
companion module for the determinism contract.
"""

import math

import numpy as np

cimport numpy as cnp

cnp.import_array()


class SimplexStallError(RuntimeError):
    """Pivot budget exhausted; indicates a solver defect, not bad data."""


cdef class NetworkSimplex:
    cdef public int m, n, root, n_pivots
    cdef public double big_m
    cdef cnp.ndarray tail_a, head_a, cost_a, flow_a, in_tree_a
    cdef cnp.ndarray parent_a, pred_arc_a, depth_a, pot_a
    cdef cnp.ndarray child_head_a, next_sib_a, prev_sib_a, stack_a
    cdef cnp.ndarray arc_u_a, node_u_a, arc_v_a, node_v_a
    cdef int _n_arcs, _cursor, _stall, _stall_limit
    cdef bint _bland

    def __init__(self, supplies, demands, double big_m):
        supplies = np.asarray(supplies, dtype=np.float64)
        demands = np.asarray(demands, dtype=np.float64)
        if supplies.ndim != 1 or demands.ndim != 1:
            raise ValueError("supplies and demands must be 1-d")
        if np.any(supplies < 0.0) or np.any(demands < 0.0):
            raise ValueError("negative supply or demand")
        cdef int m = len(supplies)
        cdef int n = len(demands)
        cdef int n_nodes = m + n + 1
        cdef int root = m + n
        self.m = m
        self.n = n
        self.root = root
        self.big_m = big_m
        self.n_pivots = 0

        cdef int cap = 2 * (m + n) + 16
        self.tail_a = np.empty(cap, dtype=np.int32)
        self.head_a = np.empty(cap, dtype=np.int32)
        self.cost_a = np.empty(cap, dtype=np.float64)
        self.flow_a = np.empty(cap, dtype=np.float64)
        self.in_tree_a = np.zeros(cap, dtype=np.uint8)
        self._n_arcs = 0

        self.parent_a = np.empty(n_nodes, dtype=np.int32)
        self.pred_arc_a = np.empty(n_nodes, dtype=np.int32)
        self.depth_a = np.empty(n_nodes, dtype=np.int32)
        self.pot_a = np.empty(n_nodes, dtype=np.float64)
        self.child_head_a = np.full(n_nodes, -1, dtype=np.int32)
        self.next_sib_a = np.full(n_nodes, -1, dtype=np.int32)
        self.prev_sib_a = np.full(n_nodes, -1, dtype=np.int32)
        self.stack_a = np.empty(n_nodes, dtype=np.int32)
        self.arc_u_a = np.empty(n_nodes + 1, dtype=np.int32)
        self.node_u_a = np.empty(n_nodes + 1, dtype=np.int32)
        self.arc_v_a = np.empty(n_nodes + 1, dtype=np.int32)
        self.node_v_a = np.empty(n_nodes + 1, dtype=np.int32)

        cdef int i, j, v
        for i in range(m):
            self._append_arc(i, root, big_m, supplies[i], 1)
        for j in range(n):
            self._append_arc(root, m + j, big_m, demands[j], 1)

        cdef cnp.int32_t[:] parent = self.parent_a
        cdef cnp.int32_t[:] pred_arc = self.pred_arc_a
        cdef cnp.int32_t[:] depth = self.depth_a
        cdef double[:] pot = self.pot_a
        parent[root] = -1
        pred_arc[root] = -1
        depth[root] = 0
        pot[root] = 0.0
        for v in range(m + n):
            parent[v] = root
            pred_arc[v] = v
            depth[v] = 1
            pot[v] = -big_m if v < m else big_m
            self._attach(v, root)

        self._cursor = 0
        self._bland = False
        self._stall = 0
        self._stall_limit = 2 * (m + n) + 64

    # -- arc storage -------------------------------------------------

    cdef void _ensure_capacity(self, int extra):
        cdef int need = self._n_arcs + extra
        cdef int cap = len(self.tail_a)
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        cdef int used = self._n_arcs
        grown = np.empty(cap, dtype=np.int32)
        grown[:used] = self.tail_a[:used]
        self.tail_a = grown
        grown = np.empty(cap, dtype=np.int32)
        grown[:used] = self.head_a[:used]
        self.head_a = grown
        grown = np.empty(cap, dtype=np.float64)
        grown[:used] = self.cost_a[:used]
        self.cost_a = grown
        grown = np.empty(cap, dtype=np.float64)
        grown[:used] = self.flow_a[:used]
        self.flow_a = grown
        grown = np.zeros(cap, dtype=np.uint8)
        grown[:used] = self.in_tree_a[:used]
        self.in_tree_a = grown

    cdef int _append_arc(self, int tail, int head, double cost, double flow,
                         int in_tree):
        self._ensure_capacity(1)
        cdef int a = self._n_arcs
        self.tail_a[a] = tail
        self.head_a[a] = head
        self.cost_a[a] = cost
        self.flow_a[a] = flow
        self.in_tree_a[a] = in_tree
        self._n_arcs = a + 1
        return a

    def add_arcs(self, srcs, dsts, costs):
        srcs = np.asarray(srcs, dtype=np.int32)
        dsts = np.asarray(dsts, dtype=np.int32)
        costs = np.asarray(costs, dtype=np.float64)
        cdef int k = len(srcs)
        if len(dsts) != k or len(costs) != k:
            raise ValueError("src, dst, cost arrays must have equal length")
        self._ensure_capacity(k)
        cdef int a0 = self._n_arcs
        self.tail_a[a0 : a0 + k] = srcs
        self.head_a[a0 : a0 + k] = dsts + self.m
        self.cost_a[a0 : a0 + k] = costs
        self.flow_a[a0 : a0 + k] = 0.0
        self.in_tree_a[a0 : a0 + k] = 0
        self._n_arcs = a0 + k
        return a0

    # -- tree bookkeeping --------------------------------------------

    cdef void _attach(self, int x, int p):
        cdef cnp.int32_t[:] child_head = self.child_head_a
        cdef cnp.int32_t[:] next_sib = self.next_sib_a
        cdef cnp.int32_t[:] prev_sib = self.prev_sib_a
        cdef int h = child_head[p]
        next_sib[x] = h
        prev_sib[x] = -1
        if h != -1:
            prev_sib[h] = x
        child_head[p] = x

    cdef void _detach(self, int x):
        cdef cnp.int32_t[:] child_head = self.child_head_a
        cdef cnp.int32_t[:] next_sib = self.next_sib_a
        cdef cnp.int32_t[:] prev_sib = self.prev_sib_a
        cdef int p = self.parent_a[x]
        cdef int pr = prev_sib[x]
        cdef int nx = next_sib[x]
        if pr == -1:
            child_head[p] = nx
        else:
            next_sib[pr] = nx
        if nx != -1:
            prev_sib[nx] = pr

    cdef void _refresh_subtree(self, int q):
        cdef cnp.int32_t[:] stack = self.stack_a
        cdef cnp.int32_t[:] parent = self.parent_a
        cdef cnp.int32_t[:] pred_arc = self.pred_arc_a
        cdef cnp.int32_t[:] depth = self.depth_a
        cdef cnp.int32_t[:] child_head = self.child_head_a
        cdef cnp.int32_t[:] next_sib = self.next_sib_a
        cdef cnp.int32_t[:] head = self.head_a
        cdef double[:] pot = self.pot_a
        cdef double[:] cost = self.cost_a
        cdef int top = 1
        cdef int x, p, a, c
        stack[0] = q
        while top > 0:
            top -= 1
            x = stack[top]
            p = parent[x]
            a = pred_arc[x]
            depth[x] = depth[p] + 1
            if head[a] == x:
                pot[x] = pot[p] + cost[a]
            else:
                pot[x] = pot[p] - cost[a]
            c = child_head[x]
            while c != -1:
                stack[top] = c
                top += 1
                c = next_sib[c]

    # -- pivoting ----------------------------------------------------

    cdef int _find_entering(self, double tol):
        cdef int n_arcs = self._n_arcs
        cdef cnp.int32_t[:] tail = self.tail_a
        cdef cnp.int32_t[:] head = self.head_a
        cdef double[:] cost = self.cost_a
        cdef double[:] pot = self.pot_a
        cdef cnp.uint8_t[:] in_tree = self.in_tree_a
        cdef int a, lo, hi, best_arc
        cdef double rc, best
        if self._bland:
            for a in range(n_arcs):
                if in_tree[a]:
                    continue
                rc = (cost[a] + pot[tail[a]]) - pot[head[a]]
                if rc < -tol:
                    return a
            return -1
        cdef int block = max(64, int(math.isqrt(n_arcs)) + 1)
        cdef int start = self._cursor % n_arcs
        cdef int scanned = 0
        while scanned < n_arcs:
            lo = start
            hi = lo + block
            if hi > n_arcs:
                hi = n_arcs
            best = math.inf
            best_arc = -1
            for a in range(lo, hi):
                if in_tree[a]:
                    continue
                rc = (cost[a] + pot[tail[a]]) - pot[head[a]]
                if rc < best:
                    best = rc
                    best_arc = a
            if best < -tol:
                self._cursor = (best_arc + 1) % n_arcs
                return best_arc
            scanned += hi - lo
            start = hi % n_arcs
        return -1

    cdef double _pivot(self, int enter) except -1.0:
        cdef cnp.int32_t[:] parent = self.parent_a
        cdef cnp.int32_t[:] pred_arc = self.pred_arc_a
        cdef cnp.int32_t[:] depth = self.depth_a
        cdef cnp.int32_t[:] tail = self.tail_a
        cdef cnp.int32_t[:] head = self.head_a
        cdef double[:] flow = self.flow_a
        cdef cnp.uint8_t[:] in_tree = self.in_tree_a
        cdef cnp.int32_t[:] arc_u = self.arc_u_a
        cdef cnp.int32_t[:] node_u = self.node_u_a
        cdef cnp.int32_t[:] arc_v = self.arc_v_a
        cdef cnp.int32_t[:] node_v = self.node_v_a

        cdef int u = tail[enter]
        cdef int v = head[enter]

        # cycle = enter (u -> v) plus tree path v -> apex -> u; flow
        # travels v -> u along the path.  u-side arcs are traversed
        # parent->node, v-side arcs node->parent.
        cdef int x = u
        cdef int y = v
        cdef int n_u = 0
        cdef int n_v = 0
        cdef int k
        while depth[x] > depth[y]:
            arc_u[n_u] = pred_arc[x]
            node_u[n_u] = x
            n_u += 1
            x = parent[x]
        while depth[y] > depth[x]:
            arc_v[n_v] = pred_arc[y]
            node_v[n_v] = y
            n_v += 1
            y = parent[y]
        while x != y:
            arc_u[n_u] = pred_arc[x]
            node_u[n_u] = x
            n_u += 1
            x = parent[x]
            arc_v[n_v] = pred_arc[y]
            node_v[n_v] = y
            n_v += 1
            y = parent[y]

        cdef double theta = math.inf
        cdef int leave = -1
        cdef int leave_node = -1
        cdef bint leave_on_u = False
        cdef int a, node
        cdef bint against
        for k in range(n_u):
            a = arc_u[k]
            node = node_u[k]
            against = head[a] != node
            if against and (
                flow[a] < theta or (flow[a] == theta and (leave == -1 or a < leave))
            ):
                theta = flow[a]
                leave = a
                leave_node = node
                leave_on_u = True
        for k in range(n_v):
            a = arc_v[k]
            node = node_v[k]
            against = tail[a] != node
            if against and (
                flow[a] < theta or (flow[a] == theta and (leave == -1 or a < leave))
            ):
                theta = flow[a]
                leave = a
                leave_node = node
                leave_on_u = False
        if leave == -1:
            raise SimplexStallError("cycle without a leaving arc")

        if theta != 0.0:
            flow[enter] += theta
            for k in range(n_u):
                a = arc_u[k]
                node = node_u[k]
                if head[a] == node:
                    flow[a] += theta
                else:
                    flow[a] -= theta
            for k in range(n_v):
                a = arc_v[k]
                node = node_v[k]
                if tail[a] == node:
                    flow[a] += theta
                else:
                    flow[a] -= theta
        flow[leave] = 0.0

        in_tree[enter] = 1
        in_tree[leave] = 0

        cdef int q, attach_to
        if leave_on_u:
            q = u
            attach_to = v
        else:
            q = v
            attach_to = u
        cdef int prev_node = attach_to
        cdef int prev_arc = enter
        cdef int p
        x = q
        while True:
            p = parent[x]
            a = pred_arc[x]
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

    def solve(self, double tol = 1e-11, long max_pivots = 0):
        if max_pivots <= 0:
            max_pivots = 200 * (self._n_arcs + self.m + self.n) + 100000
        cdef long done = 0
        cdef int enter
        cdef double theta
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

    def potentials(self):
        return self.pot_a.copy()

    def artificial_mass(self):
        cdef int k = self.m + self.n
        return float(np.sum(self.flow_a[:k]))

    def real_objective(self):
        cdef int k = self.m + self.n
        sl = slice(k, self._n_arcs)
        return float(np.dot(self.flow_a[sl], self.cost_a[sl]))

    def nonzero_real_arcs(self):
        cdef int k = self.m + self.n
        ids = k + np.flatnonzero(self.flow_a[k : self._n_arcs] > 0.0)
        return (
            self.tail_a[ids].astype(np.int64),
            self.head_a[ids].astype(np.int64) - self.m,
            self.flow_a[ids].copy(),
        )

    @property
    def n_arcs(self):
        return self._n_arcs
