"""Adam over the real and imaginary components of complex parameters.

Each complex array is treated as interleaved (re, im) reals; first and second
moments are kept per real component, so training dynamics match a real-valued
framework operating on parameter pairs.
"""

import numpy as np

from .errors import NumericError


class Adam:
    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(self._as_real(p)) for p in params]
        self.v = [np.zeros_like(self._as_real(p)) for p in params]

    @staticmethod
    def _as_real(arr):
        """View a complex array as its interleaved real components."""
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            return arr.view(arr.real.dtype)
        return arr

    def step(self, params, grads):
        """Bias-corrected Adam update, in place on each parameter array."""
        if len(params) != len(self.m) or len(grads) != len(params):
            raise ValueError("parameter/gradient count mismatch")
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for i, (p, g) in enumerate(zip(params, grads)):
            g = self._as_real(np.asarray(g, dtype=np.asarray(p).dtype))
            if not np.all(np.isfinite(g)):
                bad = int(np.flatnonzero(~np.isfinite(g))[0])
                raise NumericError(
                    f"non-finite gradient in parameter {i} at component {bad}"
                )
            m, v = self.m[i], self.v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            pr = self._as_real(p)
            pr -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    # -- checkpointing -------------------------------------------------------

    def state_arrays(self):
        """Flat view of optimizer state for serialization."""
        return {"t": self.t, "m": self.m, "v": self.v}

    def load_state(self, t, m, v):
        if len(m) != len(self.m) or len(v) != len(self.v):
            raise ValueError("optimizer state does not match parameter count")
        self.t = int(t)
        self.m = [np.asarray(a) for a in m]
        self.v = [np.asarray(a) for a in v]
