"""Log-spaced quadrature for semigroup-in-time integrals."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

__all__ = ["LogQuadrature"]


@dataclasses.dataclass(frozen=True)
class LogQuadrature:
    """Composite trapezoid rule in log-time for ``∫ f(t) dt`` on ``[t_min, t_max]``.

    Nodes are geometrically spaced and the weights carry the Jacobian ``t``
    of the substitution ``t = exp(l)``, so ``sum(weights * f(nodes))``
    approximates the integral directly.  The integrands this package feeds
    in (heat factors times powers of ``t``) are analytic in a strip around
    the real log-time axis, where the composite trapezoid rule converges
    geometrically in the node count.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be matching 1-d arrays")
        if nodes.size < 2:
            raise ValueError("quadrature needs at least two nodes")
        if nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be positive and strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def t_min(self) -> float:
        return float(self.nodes[0])

    @property
    def t_max(self) -> float:
        return float(self.nodes[-1])

    def __len__(self) -> int:
        return self.nodes.size

    @classmethod
    def log_uniform(cls, t_min: float = 1e-8, t_max: float = 1e4,
                    count: int = 400) -> "LogQuadrature":
        """Default window: 400 log-uniform nodes on [1e-8, 1e4]."""
        if not 0.0 < t_min < t_max:
            raise ValueError(f"need 0 < t_min < t_max, got [{t_min}, {t_max}]")
        if count < 2:
            raise ValueError("count must be at least 2")
        ell = np.linspace(math.log(t_min), math.log(t_max), count)
        step = ell[1] - ell[0]
        w = np.full(count, step)
        w[0] *= 0.5
        w[-1] *= 0.5
        t = np.exp(ell)
        return cls(nodes=t, weights=w * t)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract sampled integrand values (last axis = nodes) with the weights."""
        values = np.asarray(values)
        if values.shape[-1] != self.nodes.size:
            raise ValueError("integrand sampled on a different node set")
        return values @ self.weights
