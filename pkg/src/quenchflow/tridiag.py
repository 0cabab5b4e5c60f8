"""Cyclic (periodic) tridiagonal solve via Sherman-Morrison on a banded solve."""

import numpy as np
from scipy.linalg import solve_banded

__all__ = ["LinearSolveFailure", "solve_cyclic_tridiagonal"]


class LinearSolveFailure(RuntimeError):
    pass


def solve_cyclic_tridiagonal(lower, diag, upper, rhs):
    """Solve ``lower[j] x[j-1] + diag[j] x[j] + upper[j] x[j+1] = rhs[j]`` with indices mod N.

    The corner entries ``lower[0]`` (coupling to ``x[N-1]``) and
    ``upper[N-1]`` (coupling to ``x[0]``) close the system periodically.
    """
    a = np.asarray(lower, dtype=float)
    b = np.asarray(diag, dtype=float)
    c = np.asarray(upper, dtype=float)
    d = np.asarray(rhs, dtype=float)
    N = b.size
    if N < 3:
        raise LinearSolveFailure("cyclic system needs at least 3 unknowns")

    # A = T + w v^T with w = (gamma, 0, ..., 0, c_last), v = (1, 0, ..., 0, a_first / gamma)
    gamma = -b[0]
    alpha, beta = c[-1], a[0]
    bb = b.copy()
    bb[0] -= gamma
    bb[-1] -= alpha * beta / gamma

    ab = np.zeros((3, N))
    ab[0, 1:] = c[:-1]
    ab[1] = bb
    ab[2, :-1] = a[1:]

    w = np.zeros(N)
    w[0] = gamma
    w[-1] = alpha
    try:
        sol = solve_banded((1, 1), ab, np.column_stack([d, w]), check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise LinearSolveFailure(str(err)) from err
    y, z = sol[:, 0], sol[:, 1]
    vy = y[0] + beta / gamma * y[-1]
    vz = z[0] + beta / gamma * z[-1]
    denom = 1.0 + vz
    if denom == 0.0 or not np.isfinite(denom):
        raise LinearSolveFailure("singular Sherman-Morrison correction")
    x = y - (vy / denom) * z
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailure("non-finite solution")
    return x
