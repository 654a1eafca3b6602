"""Network simplex kernel for the bipartite transportation problem.

Nodes ``0..n-1`` are sources, ``n..n+m-1`` are sinks and ``n+m`` is an
artificial root.  Arc ``i*m + j`` is the real arc ``i -> n+j``; arcs
``n*m + i`` (source ``i`` -> root) and ``n*m + n + j`` (root -> sink ``j``)
are artificial, carry a big-M cost and form the initial spanning tree.

The basis is kept strongly feasible (Cunningham's rule for choosing the
leaving arc), which rules out cycling on the heavily degenerate uniform
instances produced by the sensitivity estimator.  Pricing is block search.
"""

import numba as nb
import numpy as np

OPTIMAL = 0
MAX_ITER_REACHED = 1
UNBOUNDED = 2


@nb.njit(cache=True, inline="always")
def _arc_source(e, n, m):
    nm = n * m
    if e < nm:
        return e // m
    if e < nm + n:
        return e - nm
    return n + m


@nb.njit(cache=True, inline="always")
def _arc_target(e, n, m):
    nm = n * m
    if e < nm:
        return n + e % m
    if e < nm + n:
        return n + m
    return n + (e - nm - n)


@nb.njit(cache=True, inline="always")
def _arc_cost(e, C, n, m, art):
    if e < n * m:
        return C[e // m, e % m]
    return art


@nb.njit(cache=True, inline="always")
def _remove_child(p, c, first_child, next_sib, prev_sib):
    if prev_sib[c] != -1:
        next_sib[prev_sib[c]] = next_sib[c]
    else:
        first_child[p] = next_sib[c]
    if next_sib[c] != -1:
        prev_sib[next_sib[c]] = prev_sib[c]
    prev_sib[c] = -1
    next_sib[c] = -1


@nb.njit(cache=True, inline="always")
def _add_child(p, c, first_child, next_sib, prev_sib):
    head = first_child[p]
    next_sib[c] = head
    prev_sib[c] = -1
    if head != -1:
        prev_sib[head] = c
    first_child[p] = c


@nb.njit(cache=True)
def _shift_subtree(u, sigma, pi, first_child, next_sib, stack):
    top = 0
    stack[0] = u
    while top >= 0:
        v = stack[top]
        top -= 1
        pi[v] += sigma
        c = first_child[v]
        while c != -1:
            top += 1
            stack[top] = c
            c = next_sib[c]


@nb.njit(cache=True)
def _recompute_potentials(root, pi, pred, C, n, m, art, first_child, next_sib, stack):
    pi[root] = 0.0
    top = 0
    stack[0] = root
    while top >= 0:
        v = stack[top]
        top -= 1
        c = first_child[v]
        while c != -1:
            e = pred[c]
            cost = _arc_cost(e, C, n, m, art)
            if _arc_source(e, n, m) == v:
                pi[c] = pi[v] + cost
            else:
                pi[c] = pi[v] - cost
            top += 1
            stack[top] = c
            c = next_sib[c]


@nb.njit(cache=True)
def network_simplex(C, a, b, max_iter):
    """Solve ``min <C, P>`` s.t. ``P 1 = a``, ``P^T 1 = b``, ``P >= 0``.

    ``a`` and ``b`` must be strictly positive with equal sums.  Returns the
    flow matrix, the dual potentials ``(u, v)``, a status code and the
    number of pivots.
    """
    n, m = C.shape
    n_nodes = n + m + 1
    root = n + m
    nm = n * m
    n_arcs = nm + n + m

    maxc = 0.0
    for i in range(n):
        for j in range(m):
            if abs(C[i, j]) > maxc:
                maxc = abs(C[i, j])
    art = (maxc + 1.0) * n_nodes
    eps = 1e-13 * art

    flow = np.zeros(n_arcs)
    in_tree = np.zeros(n_arcs, dtype=np.bool_)
    parent = np.full(n_nodes, -1, dtype=np.int64)
    pred = np.full(n_nodes, -1, dtype=np.int64)
    first_child = np.full(n_nodes, -1, dtype=np.int64)
    next_sib = np.full(n_nodes, -1, dtype=np.int64)
    prev_sib = np.full(n_nodes, -1, dtype=np.int64)
    pi = np.zeros(n_nodes)
    mark = np.zeros(n_nodes, dtype=np.int64)
    stack = np.empty(n_nodes, dtype=np.int64)

    for i in range(n):
        e = nm + i
        flow[e] = a[i]
        in_tree[e] = True
        parent[i] = root
        pred[i] = e
        pi[i] = -art
        _add_child(root, i, first_child, next_sib, prev_sib)
    for j in range(m):
        v = n + j
        e = nm + n + j
        flow[e] = b[j]
        in_tree[e] = True
        parent[v] = root
        pred[v] = e
        pi[v] = art
        _add_child(root, v, first_child, next_sib, prev_sib)

    block = max(int(np.sqrt(n_arcs)), 10)
    next_arc = 0
    status = OPTIMAL
    it = 0
    while True:
        # block-search pricing
        best = -1
        min_rc = -eps
        cnt = block
        e = next_arc
        for _ in range(n_arcs):
            if not in_tree[e]:
                rc = _arc_cost(e, C, n, m, art) + pi[_arc_source(e, n, m)] - pi[_arc_target(e, n, m)]
                if rc < min_rc:
                    min_rc = rc
                    best = e
            e += 1
            if e == n_arcs:
                e = 0
            cnt -= 1
            if cnt == 0:
                if best >= 0:
                    break
                cnt = block
        if best < 0:
            # re-derive potentials from the tree and confirm optimality
            _recompute_potentials(root, pi, pred, C, n, m, art, first_child, next_sib, stack)
            found = False
            for e2 in range(n_arcs):
                if not in_tree[e2]:
                    rc = _arc_cost(e2, C, n, m, art) + pi[_arc_source(e2, n, m)] - pi[_arc_target(e2, n, m)]
                    if rc < -eps:
                        found = True
                        break
            if not found:
                break
            continue
        next_arc = e
        if it >= max_iter:
            status = MAX_ITER_REACHED
            break
        it += 1

        e_in = best
        first = _arc_source(e_in, n, m)
        second = _arc_target(e_in, n, m)

        # join node: lowest common ancestor of both endpoints
        u = first
        while u != -1:
            mark[u] = it
            u = parent[u]
        join = second
        while mark[join] != it:
            join = parent[join]

        # leaving arc: last blocking arc along the cycle orientation
        delta = np.inf
        u_out = -1
        result = 0
        u = first
        while u != join:
            e = pred[u]
            if _arc_source(e, n, m) == u:
                d = flow[e]
                if d < delta:
                    delta = d
                    u_out = u
                    result = 1
            u = parent[u]
        u = second
        while u != join:
            e = pred[u]
            if _arc_target(e, n, m) == u:
                d = flow[e]
                if d <= delta:
                    delta = d
                    u_out = u
                    result = 2
            u = parent[u]
        if result == 0:
            status = UNBOUNDED
            break

        if delta > 0.0:
            flow[e_in] += delta
            u = first
            while u != join:
                e = pred[u]
                if _arc_source(e, n, m) == u:
                    flow[e] -= delta
                else:
                    flow[e] += delta
                u = parent[u]
            u = second
            while u != join:
                e = pred[u]
                if _arc_source(e, n, m) == u:
                    flow[e] += delta
                else:
                    flow[e] -= delta
                u = parent[u]
        e_out = pred[u_out]
        flow[e_out] = 0.0
        in_tree[e_out] = False
        in_tree[e_in] = True

        if result == 1:
            u_in = first
            v_in = second
        else:
            u_in = second
            v_in = first

        c_in = _arc_cost(e_in, C, n, m, art)
        if u_in == first:
            sigma = pi[second] - c_in - pi[first]
        else:
            sigma = pi[first] + c_in - pi[second]

        # re-hang the subtree below the leaving arc from v_in, rooted at u_in
        _remove_child(parent[u_out], u_out, first_child, next_sib, prev_sib)
        prev_node = v_in
        prev_arc = e_in
        x = u_in
        while True:
            nxt = parent[x]
            nxt_arc = pred[x]
            if x != u_out:
                _remove_child(nxt, x, first_child, next_sib, prev_sib)
            parent[x] = prev_node
            pred[x] = prev_arc
            _add_child(prev_node, x, first_child, next_sib, prev_sib)
            if x == u_out:
                break
            prev_node = x
            prev_arc = nxt_arc
            x = nxt

        if sigma != 0.0:
            _shift_subtree(u_in, sigma, pi, first_child, next_sib, stack)
        if it % 2048 == 0:
            _recompute_potentials(root, pi, pred, C, n, m, art, first_child, next_sib, stack)

    P = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            P[i, j] = flow[i * m + j]
    return P, pi[:n].copy(), pi[n:n + m].copy(), status, it
