"""Pure-Python sequence-sum kernel (fallback for the compiled ``_ckernels``).

Both implementations walk the emission sequences depth-first and keep the
partial BSM product collapsed to two numbers: the coefficient of 1 and of the
generator of the most recent source. Older generators can no longer appear in
later factors, so they are evaluated (sigma -> 1) as soon as they close.
"""

TWO_THIRDS = 2.0 / 3.0


def bsm_abc(m, n, eta_i, eta_j):
    """Split the BSM coefficient into ``A + B*sigma_left + C*sigma_right``."""
    if m == 1 and n == 1:
        return 0.5 * eta_i * eta_j, 0.0, 0.0
    if m == 2 and n == 0:
        return 0.0, eta_i * eta_i / 3.0, 0.0
    if m == 0 and n == 2:
        return 0.0, 0.0, eta_j * eta_j / 3.0
    if m == 2 and n == 1:
        return eta_i * eta_j * (1.0 - eta_i), eta_i * eta_i * (1.0 - eta_j) / 3.0, 0.0
    if m == 1 and n == 2:
        return eta_i * eta_j * (1.0 - eta_j), 0.0, eta_j * eta_j * (1.0 - eta_i) / 3.0
    if m == 2 and n == 2:
        qi = 1.0 - eta_i
        qj = 1.0 - eta_j
        return (
            2.0 * eta_i * eta_j * qi * qj,
            eta_i * eta_i * qj * qj / 3.0,
            eta_j * eta_j * qi * qi / 3.0,
        )
    return 0.0, 0.0, 0.0


def chain_sums(probs, eta, s):
    """Return ``(eta_bar, eta_bar_ab, eta_ab, visited)`` for one chain.

    ``probs`` is a list of ``(p0, p1, p2)`` per source, ``eta`` the 2N channel
    transmissions, ``s`` the value of ``sigma**2``.
    """
    n_src = len(probs)
    # coefficient tables per BSM, indexed [k][m][n]
    tables = []
    for k in range(n_src - 1):
        ei = eta[2 * k + 1]
        ej = eta[2 * k + 2]
        tables.append([[bsm_abc(m, n, ei, ej) for n in range(3)] for m in range(3)])

    totals = [0.0, 0.0, 0.0]
    visited = 0
    # stack entries: (depth, nu_first, nu_last, weight, c0, c1, hat, n2)
    stack = []
    for nu1 in range(3):
        w = probs[0][nu1]
        if w != 0.0:
            stack.append((1, nu1, nu1, w, 1.0, 0.0, 1.0, 1 if nu1 == 2 else 0))
    while stack:
        depth, nu1, prev, w, c0, c1, hat, n2 = stack.pop()
        visited += 1
        if depth == n_src:
            beta = c0 + c1
            totals[0] += w * beta
            if nu1 > 0 and prev > 0:
                totals[1] += w * beta
                if nu1 == 1 and prev == 1:
                    totals[2] += w * (0.25 * beta + 0.75 * TWO_THIRDS ** n2 * hat)
            continue
        row = tables[depth - 1][prev]
        p_next = probs[depth]
        for nu in range(3):
            pn = p_next[nu]
            if pn == 0.0:
                continue
            a, b, c = row[nu]
            if a == 0.0 and b == 0.0 and c == 0.0:
                continue
            t = c0 + c1
            nc0 = a * t + b * (c0 + s * c1)
            nc1 = c * t
            if nc0 == 0.0 and nc1 == 0.0:
                continue
            stack.append((depth + 1, nu1, nu, w * pn, nc0, nc1, hat * a, n2 + (nu == 2)))
    return totals[0], totals[1], totals[2], visited
