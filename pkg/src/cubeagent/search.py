"""Compiled search kernels: piece-table IDA* and the two-phase solver.

Kernels report a status instead of raising: a move count (>= 0), NOT_FOUND
when the depth limit is exhausted, or NODE_LIMIT when the node budget ran out.
"""

from __future__ import annotations

import numba
import numpy as np

NOT_FOUND = -1
NODE_LIMIT = -2
MAX_DEPTH = 40


@numba.njit(cache=True, inline="always")
def _blocked(m, prev):
    if prev < 0:
        return False
    face, pf = m // 3, prev // 3
    return face == pf or face + 3 == pf


@numba.njit(cache=True, inline="always")
def _rank_edges6_row(states, row, first):
    used = 0
    idx = 0
    ori = 0
    for i in range(6):
        d = states[row, first + i]
        slot = d >> 1
        below = 0
        for j in range(slot):
            if not (used >> j) & 1:
                below += 1
        idx = idx * (12 - i) + below
        used |= 1 << slot
        ori = ori * 2 + (d & 1)
    return idx * 64 + ori


@numba.njit(cache=True)
def _bound(states, row, tw, fl, sl, cp, limit, flat, offs, groups, gsize, sel, goal, coord_flags,
           twist_t, flip_t, cperm_t, twist_slice_t, flip_slice_t, corner_t, edges_a, edges_b):
    """Max over the selected tables, or early once it exceeds ``limit``.

    Returns (h, at_goal); at_goal is only meaningful when h <= limit.
    """
    h = 0
    if coord_flags & 4:
        h = corner_t[cp * 2187 + tw]
        if h > limit:
            return h, False
    if coord_flags & 8:
        v = edges_a[_rank_edges6_row(states, row, 8)]
        if v > h:
            h = v
            if h > limit:
                return h, False
        v = edges_b[_rank_edges6_row(states, row, 14)]
        if v > h:
            h = v
            if h > limit:
                return h, False
    if coord_flags & 1:
        v = max(twist_slice_t[tw * 495 + sl], flip_slice_t[fl * 495 + sl])
        if v > h:
            h = v
            if h > limit:
                return h, False
    if coord_flags & 2:
        v = max(twist_t[tw], flip_t[fl], cperm_t[cp])
        if v > h:
            h = v
            if h > limit:
                return h, False
    at_goal = True
    for s in range(sel.shape[0]):
        t = sel[s]
        idx = 0
        mult = 1
        for q in range(gsize[t]):
            idx += states[row, groups[t, q]] * mult
            mult *= 24
        v = flat[offs[t] + idx]
        if v > h:
            h = v
            if h > limit:
                return h, False
        if goal[s] and v != 0:
            at_goal = False
    return h, at_goal


@numba.njit(cache=True)
def piece_ida(start, tw0, fl0, sl0, cp0, prev, max_depth, max_nodes, cmove, emove, flat, offs, groups,
              gsize, sel, goal, coord_flags, twist_m, flip_m, slice_m, cperm_m,
              twist_t, flip_t, cperm_t, twist_slice_t, flip_slice_t, corner_t, edges_a, edges_b):
    """Shortest face-turn sequence driving every goal table to zero.

    Coordinates (twist, flip, slice, cperm) are tracked alongside the piece
    vector so the coordinate tables selected by ``coord_flags`` cost one
    lookup each: 1 = twist/flip x slice, 2 = twist, flip, cperm, 4 = corners,
    8 = the two six-edge tables. ``prev`` (a move index or -1) is the move
    played just before, so the first move never merges with it.
    """
    path = np.zeros(MAX_DEPTH, np.int64)
    states = np.zeros((MAX_DEPTH + 1, 20), np.int64)
    states[0] = start
    h0, done = _bound(states, 0, tw0, fl0, sl0, cp0, 1000, flat, offs, groups, gsize, sel, goal,
                      coord_flags, twist_t, flip_t, cperm_t, twist_slice_t, flip_slice_t,
                      corner_t, edges_a, edges_b)
    if done and h0 == 0:
        return 0, path[:0], 0
    cs = np.zeros((MAX_DEPTH + 1, 4), np.int64)
    next_move = np.zeros(MAX_DEPTH + 1, np.int64)
    nodes = 0
    bound = max(h0, 1)
    while bound <= max_depth:
        states[0] = start
        cs[0, 0], cs[0, 1], cs[0, 2], cs[0, 3] = tw0, fl0, sl0, cp0
        next_move[0] = 0
        depth = 0
        while depth >= 0:
            m = next_move[depth]
            if m == 18:
                depth -= 1
                continue
            next_move[depth] = m + 1
            if _blocked(m, path[depth - 1] if depth > 0 else prev):
                continue
            nodes += 1
            if nodes > max_nodes:
                return NODE_LIMIT, path[:0], nodes
            g = depth + 1
            tw = twist_m[cs[depth, 0], m]
            fl = flip_m[cs[depth, 1], m]
            sl = slice_m[cs[depth, 2], m]
            cp = cperm_m[cs[depth, 3], m]
            for p in range(8):
                states[g, p] = cmove[m, states[depth, p]]
            for p in range(8, 20):
                states[g, p] = emove[m, states[depth, p]]
            # same bound as _bound, written out here: calling a helper with
            # this many arrays costs more than the lookups themselves
            limit = bound - g
            h = 0
            if coord_flags & 4:
                h = max(h, corner_t[cp * 2187 + tw])
            if h <= limit and coord_flags & 8:
                h = max(h, edges_a[_rank_edges6_row(states, g, 8)])
                if h <= limit:
                    h = max(h, edges_b[_rank_edges6_row(states, g, 14)])
            if h <= limit and coord_flags & 1:
                h = max(h, twist_slice_t[tw * 495 + sl], flip_slice_t[fl * 495 + sl])
            if h <= limit and coord_flags & 2:
                h = max(h, twist_t[tw], flip_t[fl], cperm_t[cp])
            done = True
            s = 0
            while h <= limit and s < sel.shape[0]:
                t = sel[s]
                idx = 0
                mult = 1
                for q in range(gsize[t]):
                    idx += states[g, groups[t, q]] * mult
                    mult *= 24
                v = flat[offs[t] + idx]
                h = max(h, v)
                if goal[s] and v != 0:
                    done = False
                s += 1
            if h > limit:
                continue
            path[depth] = m
            if done and h == 0:
                return g, path[:g].copy(), nodes
            if g < bound:
                cs[g, 0], cs[g, 1], cs[g, 2], cs[g, 3] = tw, fl, sl, cp
                depth = g
                next_move[depth] = 0
        bound += 1
    return NOT_FOUND, path[:0], nodes


@numba.njit(cache=True)
def _phase2(cp0, ud0, sp0, bound, prev, cperm_m, udperm_m, sperm_m, cperm_sperm, udperm_sperm,
            moves2, out, offset, max_nodes, nodes):
    if bound == 0:
        return (0 if cp0 == 0 and ud0 == 0 and sp0 == 0 else NOT_FOUND), nodes
    n2 = moves2.shape[0]
    cps = np.zeros(bound + 1, np.int64)
    uds = np.zeros(bound + 1, np.int64)
    sps = np.zeros(bound + 1, np.int64)
    nxt = np.zeros(bound + 1, np.int64)
    path = np.zeros(bound + 1, np.int64)
    cps[0], uds[0], sps[0] = cp0, ud0, sp0
    depth = 0
    while depth >= 0:
        k = nxt[depth]
        if k == n2:
            depth -= 1
            continue
        nxt[depth] = k + 1
        m = moves2[k]
        last = path[depth - 1] if depth > 0 else prev
        if _blocked(m, last):
            continue
        c = cperm_m[cps[depth], m]
        u = udperm_m[uds[depth], m]
        s = sperm_m[sps[depth], m]
        nodes += 1
        if nodes > max_nodes:
            return NODE_LIMIT, nodes
        g = depth + 1
        h = max(cperm_sperm[c * 24 + s], udperm_sperm[u * 24 + s])
        if g + h > bound:
            continue
        path[depth] = m
        if g == bound:
            if c == 0 and u == 0 and s == 0:
                for i in range(g):
                    out[offset + i] = path[i]
                return g, nodes
            continue
        cps[g], uds[g], sps[g] = c, u, s
        depth = g
        nxt[depth] = 0
    return NOT_FOUND, nodes


@numba.njit(cache=True)
def two_phase(tw0, fl0, sl0, cp0, ep0, prev, p1_len, max_total, max_nodes,
              twist_m, flip_m, slice_m, cperm_m, udperm_m, sperm_m, mep,
              twist_slice, flip_slice, cperm_sperm, udperm_sperm, moves2, is_phase2):
    """Search phase-1 solutions of exactly ``p1_len`` moves, then phase 2.

    Returns (status, moves, nodes); status is the total length when found.
    """
    out = np.zeros(MAX_DEPTH + 1, np.int64)
    nodes = 0
    tw = np.zeros(p1_len + 1, np.int64)
    fl = np.zeros(p1_len + 1, np.int64)
    sl = np.zeros(p1_len + 1, np.int64)
    cp = np.zeros(p1_len + 1, np.int64)
    ep = np.zeros((p1_len + 1, 12), np.int64)
    nxt = np.zeros(p1_len + 1, np.int64)
    tw[0], fl[0], sl[0], cp[0] = tw0, fl0, sl0, cp0
    ep[0] = ep0
    depth = 0
    # p1_len == 0: start already in the subgroup
    if p1_len == 0:
        if max(twist_slice[tw0 * 495 + sl0], flip_slice[fl0 * 495 + sl0]) != 0:
            return NOT_FOUND, out[:0], nodes
        depth = -1
    while depth >= 0:
        m = nxt[depth]
        if m == 18:
            depth -= 1
            continue
        nxt[depth] = m + 1
        if _blocked(m, out[depth - 1] if depth > 0 else prev):
            continue
        g = depth + 1
        t = twist_m[tw[depth], m]
        f = flip_m[fl[depth], m]
        s = slice_m[sl[depth], m]
        nodes += 1
        if nodes > max_nodes:
            return NODE_LIMIT, out[:0], nodes
        h = max(twist_slice[t * 495 + s], flip_slice[f * 495 + s])
        if g + h > p1_len:
            continue
        out[depth] = m
        tw[g], fl[g], sl[g] = t, f, s
        cp[g] = cperm_m[cp[depth], m]
        for i in range(12):
            ep[g, i] = ep[depth, mep[m, i]]
        if g < p1_len:
            if h == 0:
                # reached the subgroup early; longer phase-1 paths through it are redundant
                continue
            depth = g
            nxt[depth] = 0
            continue
        if h != 0 or is_phase2[m]:
            continue
        status, nodes = _finish_phase2(cp[g], ep[g], g, max_total, m, cperm_m, udperm_m, sperm_m,
                                       cperm_sperm, udperm_sperm, moves2, out, max_nodes, nodes)
        if status >= 0:
            return g + status, out[:g + status].copy(), nodes
        if status == NODE_LIMIT:
            return NODE_LIMIT, out[:0], nodes
    if p1_len == 0:
        status, nodes = _finish_phase2(cp0, ep0, 0, max_total, prev, cperm_m, udperm_m, sperm_m,
                                       cperm_sperm, udperm_sperm, moves2, out, max_nodes, nodes)
        if status >= 0:
            return status, out[:status].copy(), nodes
        return status, out[:0], nodes
    return NOT_FOUND, out[:0], nodes


@numba.njit(cache=True)
def _rank8(perm):
    rank = 0
    f = 5040
    for i in range(8):
        smaller = 0
        for j in range(i + 1, 8):
            if perm[j] < perm[i]:
                smaller += 1
        rank += smaller * f
        if i < 7:
            f //= 7 - i
    return rank


@numba.njit(cache=True)
def _finish_phase2(cpc, ep, g, max_total, prev, cperm_m, udperm_m, sperm_m, cperm_sperm,
                   udperm_sperm, moves2, out, max_nodes, nodes):
    ud = _rank8(ep[:8])
    sp = 0
    f = 6
    for i in range(4):
        smaller = 0
        for j in range(i + 1, 4):
            if ep[8 + j] < ep[8 + i]:
                smaller += 1
        sp += smaller * f
        if i < 3:
            f //= 3 - i
    h2 = max(cperm_sperm[cpc * 24 + sp], udperm_sperm[ud * 24 + sp])
    for bound in range(h2, max_total - g + 1):
        status, nodes = _phase2(cpc, ud, sp, bound, prev, cperm_m, udperm_m, sperm_m,
                                cperm_sperm, udperm_sperm, moves2, out, g, max_nodes, nodes)
        if status != NOT_FOUND:
            return status, nodes
    return NOT_FOUND, nodes
