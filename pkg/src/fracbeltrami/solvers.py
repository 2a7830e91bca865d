"""Conjugate gradients for the symmetric positive (semi)definite systems
assembled by the extension and exterior modules.

Hand-rolled on purpose: the iteration is tiny, and owning it keeps the
energy decrease observable through the callback (CG minimizes the quadratic
J(x) = x'Sx/2 - b'x over growing Krylov spaces, so J is strictly
decreasing -- a cheap structural sanity check on the assembled forms).
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np


def conjugate_gradient(matvec: Callable[[np.ndarray], np.ndarray],
                       b: np.ndarray,
                       rtol: float = 1e-9,
                       max_iter: int = 5000,
                       callback: Callable[[np.ndarray], None] | None = None,
                       ) -> tuple[np.ndarray, int, float]:
    """Solve S x = b, returning (x, iterations, relative residual).

    Raises RuntimeError if the residual has not dropped below
    rtol * ||b|| after max_iter iterations.
    """
    b = np.asarray(b, float)
    x = np.zeros_like(b)
    b_norm = math.sqrt(float(b @ b))
    if b_norm == 0.0:
        return x, 0, 0.0
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    for k in range(1, max_iter + 1):
        Sp = matvec(p)
        alpha = rs / float(p @ Sp)
        x += alpha * p
        r -= alpha * Sp
        rs_next = float(r @ r)
        if callback is not None:
            callback(x)
        if math.sqrt(rs_next) <= rtol * b_norm:
            return x, k, math.sqrt(rs_next) / b_norm
        p = r + (rs_next / rs) * p
        rs = rs_next
    raise RuntimeError(
        f"conjugate gradients stalled: residual {math.sqrt(rs) / b_norm:.3e} "
        f"after {max_iter} iterations (target {rtol:.1e})")
