"""Self-contained dense linear programming via the two-phase simplex method.

Pricing is Dantzig's rule for speed, switching to Bland's rule after a
run of degenerate pivots; the epigraph programs built here are heavily
degenerate (many zero right-hand sides) and pure Bland can grind through
hundreds of thousands of stalled pivots while Dantzig alone may cycle.
Bland during a stall restores the termination guarantee. Problem sizes
are small by construction; everything is dense numpy.
"""

from __future__ import annotations

import numpy as np

PIVOT_TOL = 1e-9
STALL_LIMIT = 64
REFRESH_EVERY = 200


class LPError(RuntimeError):
    """Infeasible, unbounded, or pivot-limit failure."""


def _pivot(tableau, basis, row, col):
    tableau[row] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and abs(tableau[i, col]) > 0:
            tableau[i] -= tableau[i, col] * tableau[row]
    basis[row] = col


def _refresh(tableau, basis, orig):
    """Rebuild the tableau as B^-1 [A | b] from untouched problem data.

    Thousands of in-place eliminations accumulate rounding error in a dense
    tableau (the epigraph programs here routinely pivot 2000+ times), and a
    near-zero pivot element can amplify that drift enough to fake a negative
    objective on a loss that is provably nonnegative. Rebuilding from the
    original data resets the error to one fresh solve.
    """
    try:
        fresh = np.linalg.solve(orig[:, basis], orig)
    except np.linalg.LinAlgError:
        return
    np.copyto(tableau, fresh)


def _run_simplex(tableau, basis, cost, max_pivots, orig=None):
    """Minimize cost over the tableau in place; returns pivot count."""
    pivots = 0
    stalled = 0
    while True:
        if orig is not None and pivots and pivots % REFRESH_EVERY == 0:
            _refresh(tableau, basis, orig)
        reduced = cost[basis] @ tableau[:, :-1] - cost
        improving = np.flatnonzero(reduced > PIVOT_TOL)
        if improving.size == 0:
            return pivots
        if stalled >= STALL_LIMIT:
            entering = int(improving[0])
        else:
            entering = int(improving[np.argmax(reduced[improving])])
        col = tableau[:, entering]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            raise LPError("unbounded")
        # clamp: a slightly negative rhs is degeneracy plus rounding noise
        ratios = np.maximum(tableau[rows, -1], 0.0) / col[rows]
        best = ratios.min()
        candidates = rows[ratios <= best + PIVOT_TOL]
        if stalled >= STALL_LIMIT:
            # Bland: leave the basic variable of lowest index
            leaving = int(candidates[np.argmin([basis[i] for i in candidates])])
        else:
            # otherwise take the largest pivot element for stability
            leaving = int(candidates[np.argmax(col[candidates])])
        _pivot(tableau, basis, leaving, entering)
        pivots += 1
        stalled = stalled + 1 if best <= PIVOT_TOL else 0
        if pivots > max_pivots:
            raise LPError("pivot limit exceeded")


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_pivots=200000):
    """Minimize c @ x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0.

    Returns (x, objective, pivots). Raises LPError when infeasible or
    unbounded.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    blocks = []
    rhs = []
    n_ub = 0
    if A_ub is not None:
        A_ub = np.asarray(A_ub, dtype=float)
        b_ub = np.asarray(b_ub, dtype=float)
        n_ub = A_ub.shape[0]
        blocks.append(A_ub)
        rhs.append(b_ub)
    if A_eq is not None:
        A_eq = np.asarray(A_eq, dtype=float)
        b_eq = np.asarray(b_eq, dtype=float)
        blocks.append(A_eq)
        rhs.append(b_eq)
    if not blocks:
        raise ValueError("need at least one constraint block")
    A = np.vstack(blocks)
    b = np.concatenate(rhs)
    m = A.shape[0]

    # slacks for the <= rows
    slack = np.zeros((m, n_ub))
    slack[:n_ub] = np.eye(n_ub)
    A = np.hstack([A, slack])
    # normalize to b >= 0 (flips slack signs on affected rows)
    neg = b < 0
    A[neg] *= -1.0
    b = np.abs(b)

    # artificials wherever a clean +1 slack basis column is missing
    needs_artificial = np.ones(m, dtype=bool)
    basis = [-1] * m
    for i in range(n_ub):
        if not neg[i]:
            basis[i] = n + i
            needs_artificial[i] = False
    art_rows = np.flatnonzero(needs_artificial)
    art = np.zeros((m, art_rows.size))
    for j, i in enumerate(art_rows):
        art[i, j] = 1.0
        basis[i] = n + n_ub + j
    tableau = np.hstack([A, art, b[:, None]])
    orig = tableau.copy()
    basis = list(basis)
    total = n + n_ub + art_rows.size

    pivots = 0
    if art_rows.size:
        phase1 = np.zeros(total)
        phase1[n + n_ub :] = 1.0
        pivots += _run_simplex(tableau, basis, phase1, max_pivots, orig)
        if phase1[basis] @ tableau[:, -1] > 1e-7:
            raise LPError("infeasible")
        # drive leftover zero-level artificials out of the basis
        for i in range(m):
            if basis[i] >= n + n_ub:
                pivot_col = -1
                for j in range(n + n_ub):
                    if abs(tableau[i, j]) > PIVOT_TOL:
                        pivot_col = j
                        break
                if pivot_col >= 0:
                    _pivot(tableau, basis, i, pivot_col)
                    pivots += 1
        keep = [i for i in range(m) if basis[i] < n + n_ub]
        if len(keep) < m:
            tableau = tableau[keep]
            orig = orig[keep]
            basis = [basis[i] for i in keep]
        tableau = np.hstack([tableau[:, : n + n_ub], tableau[:, -1:]])
        orig = np.hstack([orig[:, : n + n_ub], orig[:, -1:]])

    cost = np.concatenate([c, np.zeros(n_ub)])
    pivots += _run_simplex(tableau, basis, cost, max_pivots, orig)
    # polish: recompute the vertex from original data so returned values
    # carry one solve's worth of rounding error, not the whole pivot history
    try:
        xb = np.linalg.solve(orig[:, basis], orig[:, -1])
    except np.linalg.LinAlgError as exc:
        raise LPError("singular final basis") from exc
    if np.any(xb < -1e-6):
        raise LPError("numerically infeasible final basis")
    x = np.zeros(n + n_ub)
    x[basis] = np.maximum(xb, 0.0)
    solution = x[:n]
    return solution, float(c @ solution), pivots


def linear_loss_lp(qhat, topics):
    """Exact linear-loss minimizer via the epigraph program.

    Variables are (a, a_u, z, m) with one epigraph variable m_r per replay
    row; minimize sum_r w_r * (m_r - a' q_r,c_r - z_c_r) subject to
    m_r >= a' q_r,c + z_c for every topic, z_c <= a_u, weights on the
    simplex, everything nonnegative. Accepts point (posts, K, N) or
    sample (posts, S, K, N) replay tensors.
    """
    qhat = np.asarray(qhat, dtype=float)
    topics = np.asarray(topics, dtype=np.int64)
    if qhat.ndim == 3:
        posts, k, n = qhat.shape
        rows_q = qhat
        rows_topic = topics
        weight = 1.0
    elif qhat.ndim == 4:
        posts, S, k, n = qhat.shape
        rows_q = qhat.reshape(posts * S, k, n)
        rows_topic = np.repeat(topics, S)
        weight = 1.0 / S
    else:
        raise ValueError("qhat must have 3 or 4 dimensions")
    r = rows_q.shape[0]
    n_vars = n + 1 + k + r
    za = n + 1  # z block offset
    ma = za + k  # m block offset

    c = np.zeros(n_vars)
    c[ma:] = weight
    rows_idx = np.arange(r)
    c[:n] -= weight * rows_q[rows_idx, rows_topic, :].sum(axis=0)
    c[za : za + k] -= weight * np.bincount(rows_topic, minlength=k)

    A_ub = np.zeros((r * k + k, n_vars))
    for i in range(r):
        block = A_ub[i * k : (i + 1) * k]
        block[:, :n] = rows_q[i]
        block[:, za : za + k] = np.eye(k)
        block[:, ma + i] = -1.0
    for c_idx in range(k):
        row = A_ub[r * k + c_idx]
        row[za + c_idx] = 1.0
        row[n] = -1.0
    b_ub = np.zeros(r * k + k)

    A_eq = np.zeros((1, n_vars))
    A_eq[0, : n + 1] = 1.0
    b_eq = np.ones(1)

    x, objective, pivots = solve_lp(c, A_ub, b_ub, A_eq, b_eq)
    # scrub simplex-arithmetic dust so downstream feasibility checks hold
    a = np.maximum(x[:n], 0.0)
    a_u = max(float(x[n]), 0.0)
    z = np.clip(x[za : za + k], 0.0, a_u if a_u > 0 else 0.0)
    return a, a_u, z, objective, pivots
