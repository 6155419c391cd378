"""Cyclic Jacobi eigensolver for dense symmetric matrices.

Rotations are applied in round-robin (tournament) order: each round pairs up
all indices disjointly, so the n/2 rotations of a round commute and can be
applied to whole rows and columns at once.
"""
from __future__ import annotations

import numpy as np

from .exceptions import EigenNonConvergence

__all__ = ["jacobi_eigh"]


def _tournament(n):
    """Round-robin schedule for even n: n-1 rounds of n/2 disjoint pairs."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(A, tol=1e-13, max_sweeps=50):
    """Eigenvalues (ascending) and orthonormal eigenvectors of symmetric ``A``.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol`` times the Frobenius norm of ``A``.
    """
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix must be symmetric")
    A = 0.5 * (A + A.T)
    m = n + (n % 2)
    if m != n:
        # pad with an isolated dummy index so every round is a perfect matching
        B = np.zeros((m, m))
        B[:n, :n] = A
        A = B
    V = np.eye(m)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), np.eye(n)
    rounds = _tournament(m)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            # rotations below round-off relative to the 2x2 block are skipped
            active = np.abs(apq) > 1e-18 * (np.abs(app) + np.abs(aqq)) + 1e-300
            if not active.any():
                continue
            p, q = p[active], q[active]
            apq, app, aqq = apq[active], app[active], aqq[active]
            tau = (aqq - app) / (2.0 * apq)
            at = np.abs(tau)
            big = at > 1e150
            root = np.sqrt(1.0 + np.where(big, 0.0, at) ** 2)
            t = np.where(tau >= 0, 1.0, -1.0) / np.where(big, 2.0 * at, at + root)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            cc = c[:, None]
            ss = s[:, None]
            Ap = A[p, :]
            Aq = A[q, :]
            A[p, :] = cc * Ap - ss * Aq
            A[q, :] = ss * Ap + cc * Aq
            Ap = A[:, p]
            Aq = A[:, q]
            A[:, p] = Ap * c - Aq * s
            A[:, q] = Ap * s + Aq * c
            Vp = V[:, p]
            Vq = V[:, q]
            V[:, p] = Vp * c - Vq * s
            V[:, q] = Vp * s + Vq * c
    else:
        raise EigenNonConvergence(f"Jacobi sweeps did not converge in {max_sweeps} sweeps")
    w = np.diag(A)[:n].copy()
    V = V[:n, :n]
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]
