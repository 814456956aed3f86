"""RMSprop over flat parameter vectors."""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError


@dataclass
class RMSprop:
    """Plain RMSprop: no momentum, no weight decay, eps outside the root.

    ``v <- rms_alpha * v + (1 - rms_alpha) * g**2``
    ``p <- p - lr * g / (sqrt(v) + eps)``

    ``clip_norm`` rescales the gradient to at most that global L2 norm when
    set; it is off by default.
    """

    size: int
    lr: float = 1e-3
    rms_alpha: float = 0.99
    eps: float = 1e-8
    clip_norm: float | None = None
    v: np.ndarray = field(default=None, repr=False)
    steps: int = 0

    def __post_init__(self):
        if self.v is None:
            self.v = np.zeros(self.size)

    def step(self, params, grad):
        """Update ``params`` in place from ``grad``; both expose ``.flat``."""
        g = np.asarray(getattr(grad, "flat", grad), dtype=np.float64)
        p = getattr(params, "flat", params)
        bad = np.flatnonzero(~np.isfinite(g))
        if bad.size:
            raise NumericError(f"non-finite gradient at parameter index {int(bad[0])}")
        if self.clip_norm is not None:
            norm = float(np.linalg.norm(g))
            if norm > self.clip_norm:
                g = g * (self.clip_norm / norm)
        v = self.rms_alpha * self.v + (1.0 - self.rms_alpha) * g * g
        new = p - self.lr * g / (np.sqrt(v) + self.eps)
        bad = np.flatnonzero(~np.isfinite(new))
        if bad.size:
            raise NumericError(f"parameter {int(bad[0])} became non-finite")
        self.v = v
        p[...] = new
        self.steps += 1
        return params
