"""POMCPOW tree search compiled with numba.

The search is generic over the POMDP: the model is passed in as four jitted
functions with these signatures (``p`` is a flat float64 parameter array)::

    generate(state, action, p)            -> (next_state, observation)
    reward(state, action, next_state, p)  -> float
    likelihood(obs, state, action, next_state, p) -> float   # Z(o | s, a, s')
    rollout(state, action, depth, gamma, p) -> float         # leaf value estimate

Actions come from a finite set (UCB over all of them), observations are
progressively widened, and every observation node keeps a weighted
collection of the states that were generated into it.

Observations are compared for exact equality. When a freshly generated
observation coincides with an existing child (possible only for discrete
observation spaces) the simulation continues with the generated state: it is
already a draw from that node's posterior, and reweighting it by the
likelihood before resampling would count the likelihood twice.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _ucb_select(h, n_actions, b_n, a_n, a_q, ucb_c):
    base = h * n_actions
    for a in range(n_actions):
        if a_n[base + a] == 0:
            return a
    log_n = math.log(b_n[h])
    best = 0
    best_val = -math.inf
    for a in range(n_actions):
        val = a_q[base + a] + ucb_c * math.sqrt(log_n / a_n[base + a])
        if val > best_val:
            best_val = val
            best = a
    return best


@njit(cache=True)
def search(root_states, root_cum, p, actions, n_queries, max_depth, ucb_c,
           k_obs, alpha_obs, gamma, seed, generate, reward, likelihood, rollout):
    """Run ``n_queries`` simulations from the root belief.

    ``root_states`` holds the belief particles row-wise and ``root_cum`` their
    cumulative normalized weights. Returns ``(q, n, n_obs_nodes, pw_ratio)``:
    root action values and visit counts, the number of observation nodes and
    the largest ratio of children to the widening limit ``k_obs * N**alpha_obs``
    over all action nodes (at most 1 by construction).
    """
    np.random.seed(seed)
    n_actions = actions.shape[0]
    dim = root_states.shape[1]

    max_nodes = n_queries + 1
    b_n = np.zeros(max_nodes, np.int64)
    a_n = np.zeros(max_nodes * n_actions, np.int64)
    a_q = np.zeros(max_nodes * n_actions)
    a_first = np.full(max_nodes * n_actions, -1, np.int64)
    a_nchild = np.zeros(max_nodes * n_actions, np.int64)
    o_sibling = np.full(max_nodes, -1, np.int64)
    o_count = np.zeros(max_nodes, np.int64)
    o_head = np.full(max_nodes, -1, np.int64)
    o_wsum = np.zeros(max_nodes)
    o_obs = np.empty((max_nodes, 0))
    n_nodes = 1

    cap = n_queries * max_depth + 1
    st = np.empty((cap, dim))
    st_w = np.empty(cap)
    st_next = np.empty(cap, np.int64)
    n_st = 0

    path_an = np.empty(max_depth, np.int64)
    path_h = np.empty(max_depth, np.int64)
    path_r = np.empty(max_depth)

    for _ in range(n_queries):
        u = np.random.random()
        idx = np.searchsorted(root_cum, u, side="right")
        if idx >= root_states.shape[0]:
            idx = root_states.shape[0] - 1
        s = root_states[idx]
        h = 0
        depth = max_depth
        n_path = 0
        leaf = 0.0
        while depth > 0:
            ai = _ucb_select(h, n_actions, b_n, a_n, a_q, ucb_c)
            an = h * n_actions + ai
            act = actions[ai]
            is_new = False
            matched = False
            # widen only if the new child still fits under the limit for N + 1 visits
            if a_nchild[an] + 1 <= k_obs * (a_n[an] + 1) ** alpha_obs:
                s2, o = generate(s, act, p)
                if o_obs.shape[1] != o.shape[0]:
                    o_obs = np.empty((max_nodes, o.shape[0]))
                child = a_first[an]
                while child >= 0:
                    if np.all(o_obs[child] == o):
                        matched = True
                        break
                    child = o_sibling[child]
                if child < 0:
                    child = n_nodes
                    n_nodes += 1
                    o_obs[child] = o
                    o_sibling[child] = a_first[an]
                    a_first[an] = child
                    a_nchild[an] += 1
                    is_new = True
                o_count[child] += 1
            else:
                s2, o = generate(s, act, p)
                total = 0
                c = a_first[an]
                while c >= 0:
                    total += o_count[c]
                    c = o_sibling[c]
                pick = np.random.random() * total
                child = a_first[an]
                acc = o_count[child]
                while acc <= pick and o_sibling[child] >= 0:
                    child = o_sibling[child]
                    acc += o_count[child]
                o = o_obs[child]

            w = likelihood(o, s, act, s2, p)
            st[n_st] = s2
            st_w[n_st] = w
            st_next[n_st] = o_head[child]
            o_head[child] = n_st
            o_wsum[child] += w
            n_st += 1

            if not is_new and not matched:
                # resample the successor from the node's weighted collection
                if o_wsum[child] > 0.0:
                    pick = np.random.random() * o_wsum[child]
                    k = o_head[child]
                    acc = st_w[k]
                    while acc <= pick and st_next[k] >= 0:
                        k = st_next[k]
                        acc += st_w[k]
                    s2 = st[k]
                else:
                    s2 = st[o_head[child]]

            path_an[n_path] = an
            path_h[n_path] = h
            path_r[n_path] = reward(s, act, s2, p)
            n_path += 1
            depth -= 1
            if is_new:
                leaf = rollout(s2, act, depth, gamma, p)
                break
            h = child
            s = s2

        total_ret = leaf
        for k in range(n_path - 1, -1, -1):
            total_ret = path_r[k] + gamma * total_ret
            an = path_an[k]
            b_n[path_h[k]] += 1
            a_n[an] += 1
            a_q[an] += (total_ret - a_q[an]) / a_n[an]

    pw_ratio = 0.0
    for an in range(n_nodes * n_actions):
        if a_n[an] > 0:
            ratio = a_nchild[an] / (k_obs * a_n[an] ** alpha_obs)
            if ratio > pw_ratio:
                pw_ratio = ratio
    return a_q[:n_actions].copy(), a_n[:n_actions].copy(), n_nodes, pw_ratio
