"""Deterministic output heads applied after the actor network."""
from __future__ import annotations

import numpy as np


class SimplexHead:
    """Maps rows of action entries onto the unit simplex.

    ``index`` is a (G, K) matrix of positions in the action vector and
    ``valid`` a matching boolean mask.  Within each row the valid entries
    are shifted by ``floor`` and divided by their sum; invalid entries are
    set to 0.  Positions not in ``index`` pass through unchanged.
    """

    def __init__(self, dim: int, index, valid=None, floor: float = 1e-6):
        self.dim = int(dim)
        self.index = np.atleast_2d(np.asarray(index, dtype=int))
        self.valid = (np.ones(self.index.shape, dtype=bool) if valid is None
                      else np.asarray(valid, dtype=bool).reshape(self.index.shape))
        if floor <= 0:
            raise ValueError("floor must be > 0")
        self.floor = float(floor)
        flat = self.index.ravel()
        if len(set(flat.tolist())) != flat.size:
            raise ValueError("head positions must be distinct")
        if flat.size and (flat.min() < 0 or flat.max() >= self.dim):
            raise ValueError("head position out of range")
        if self.index.size and not self.valid.any(axis=1).all():
            raise ValueError("every row needs at least one valid entry")

    def _weights(self, x):
        u = (x[:, self.index] + self.floor) * self.valid
        s = u.sum(axis=-1, keepdims=True)
        return u / s, s

    def forward(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        x = np.atleast_2d(raw)
        out = x.copy()
        if self.index.size:
            out[:, self.index] = self._weights(x)[0]
        return out if raw.ndim == 2 else out[0]

    def vjp(self, raw: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. ``raw`` of sum(grad_out * forward(raw))."""
        x = np.atleast_2d(np.asarray(raw, dtype=float))
        g = np.atleast_2d(np.asarray(grad_out, dtype=float))
        gin = g.copy()
        if self.index.size:
            w, s = self._weights(x)
            gg = g[:, self.index]
            gin[:, self.index] = (gg - (gg * w).sum(axis=-1, keepdims=True)) / s * self.valid
        return gin

    def to_dict(self) -> dict:
        return {"dim": self.dim, "index": self.index.tolist(), "valid": self.valid.tolist(),
                "floor": self.floor}

    @classmethod
    def from_dict(cls, d: dict) -> "SimplexHead":
        return cls(d["dim"], d["index"], d["valid"], d["floor"])
