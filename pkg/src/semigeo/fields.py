"""Scalar and operator fields on a coordinate chart, with exact derivatives.

Fields are evaluated on full chart points ``x`` of length ``dim``; ``axes``
restricts a field to a subset of coordinates (e.g. the spatial factor of a
product chart).  ``jet(x, order)`` returns ``(value, gradient, hessian)``
with entries above ``order`` set to ``None``.
"""

from __future__ import annotations

import numpy as np


def smootherstep(x):
    """Degree-5 C² step: 0 at x<=0, 1 at x>=1, with first two derivatives."""
    x = np.clip(x, 0.0, 1.0)
    s = x * x * x * (x * (6.0 * x - 15.0) + 10.0)
    ds = 30.0 * x * x * (x - 1.0) ** 2
    dds = 60.0 * x * (2.0 * x - 1.0) * (x - 1.0)
    return s, ds, dds


def cutoff(u):
    """C² cutoff of ``u >= 0``: 1 on [0, 1/2], 0 on [1, inf), quintic in between.

    Returns the value and first two derivatives in ``u``.
    """
    u = abs(float(u))
    if u <= 0.5:
        return 1.0, 0.0, 0.0
    if u >= 1.0:
        return 0.0, 0.0, 0.0
    s, ds, dds = smootherstep(2.0 * u - 1.0)
    return 1.0 - s, -2.0 * ds, -4.0 * dds


class ScalarField:
    """Base class; subclasses implement ``_jet`` on the selected coordinates."""

    kind = "scalar"

    def __init__(self, dim: int, axes=None):
        self.dim = int(dim)
        self.axes = tuple(range(self.dim)) if axes is None else tuple(int(a) for a in axes)

    def jet(self, x, order: int = 2):
        x = np.asarray(x, dtype=float)
        sub = x[list(self.axes)]
        v, g, h = self._jet(sub, order)
        grad = hess = None
        if order >= 1:
            grad = np.zeros(self.dim)
            grad[list(self.axes)] = g
        if order >= 2:
            hess = np.zeros((self.dim, self.dim))
            hess[np.ix_(self.axes, self.axes)] = h
        return float(v), grad, hess

    def value(self, x) -> float:
        return self.jet(x, 0)[0]

    def grad(self, x):
        return self.jet(x, 1)[1]

    def hess(self, x):
        return self.jet(x, 2)[2]

    def __call__(self, x) -> float:
        return self.value(x)

    def describe(self) -> dict:
        return {"kind": self.kind, "axes": list(self.axes)}

    def _jet(self, z, order):
        raise NotImplementedError


class ConstantField(ScalarField):
    kind = "constant"

    def __init__(self, dim, c, axes=None):
        super().__init__(dim, axes)
        self.c = float(c)

    def _jet(self, z, order):
        k = len(z)
        return self.c, np.zeros(k), np.zeros((k, k))

    def describe(self):
        return {**super().describe(), "c": self.c}


class QuadraticField(ScalarField):
    """c + b·(z - z0) + ½ (z - z0)ᵀ Q (z - z0)."""

    kind = "quadratic"

    def __init__(self, dim, c=0.0, b=None, Q=None, center=None, axes=None):
        super().__init__(dim, axes)
        k = len(self.axes)
        self.c = float(c)
        self.b = np.zeros(k) if b is None else np.asarray(b, dtype=float).reshape(k)
        Q = np.zeros((k, k)) if Q is None else np.asarray(Q, dtype=float).reshape(k, k)
        self.Q = 0.5 * (Q + Q.T)
        self.center = np.zeros(k) if center is None else np.asarray(center, dtype=float).reshape(k)

    def _jet(self, z, order):
        d = z - self.center
        Qd = self.Q @ d
        return self.c + self.b @ d + 0.5 * d @ Qd, self.b + Qd, self.Q.copy()

    def describe(self):
        return {**super().describe(), "c": self.c, "b": self.b.tolist(),
                "Q": self.Q.tolist(), "center": self.center.tolist()}


class CosineField(ScalarField):
    """a + b·cos(k·z + phase)."""

    kind = "cosine"

    def __init__(self, dim, a, b, k, phase=0.0, axes=None):
        super().__init__(dim, axes)
        self.a = float(a)
        self.b = float(b)
        self.k = np.asarray(k, dtype=float).reshape(len(self.axes))
        self.phase = float(phase)

    def _jet(self, z, order):
        arg = self.k @ z + self.phase
        c, s = np.cos(arg), np.sin(arg)
        return (self.a + self.b * c, -self.b * s * self.k,
                -self.b * c * np.outer(self.k, self.k))

    def describe(self):
        return {**super().describe(), "a": self.a, "b": self.b,
                "k": self.k.tolist(), "phase": self.phase}


class ExpDistSquaredField(ScalarField):
    """exp(scale·|z - z0|²)."""

    kind = "exp-dist2"

    def __init__(self, dim, center=None, scale=1.0, axes=None):
        super().__init__(dim, axes)
        k = len(self.axes)
        self.center = np.zeros(k) if center is None else np.asarray(center, dtype=float).reshape(k)
        self.scale = float(scale)

    def _jet(self, z, order):
        d = z - self.center
        e = np.exp(self.scale * (d @ d))
        g = 2.0 * self.scale * e * d
        h = 2.0 * self.scale * e * (np.eye(len(d)) + 2.0 * self.scale * np.outer(d, d))
        return e, g, h

    def describe(self):
        return {**super().describe(), "center": self.center.tolist(), "scale": self.scale}


class OnePlusDistSquaredField(ScalarField):
    """(1 + |z - z0|²)^power."""

    kind = "one-plus-dist2"

    def __init__(self, dim, center=None, power=1.0, axes=None):
        super().__init__(dim, axes)
        k = len(self.axes)
        self.center = np.zeros(k) if center is None else np.asarray(center, dtype=float).reshape(k)
        self.power = float(power)

    def _jet(self, z, order):
        d = z - self.center
        u = 1.0 + d @ d
        p = self.power
        v = u ** p
        g = 2.0 * p * u ** (p - 1.0) * d
        h = 2.0 * p * u ** (p - 1.0) * np.eye(len(d)) \
            + 4.0 * p * (p - 1.0) * u ** (p - 2.0) * np.outer(d, d)
        return v, g, h

    def describe(self):
        return {**super().describe(), "center": self.center.tolist(), "power": self.power}


class RadialBumpField(ScalarField):
    """amplitude·cutoff(|z - z0| / radius) + slope·(z - z0) inside the cutoff.

    The optional ``slope`` gives the bump a nonzero gradient at its center,
    which is what perturbation tests need; the product is still compactly
    supported in the ball of the given radius.
    """

    kind = "radial-bump"

    def __init__(self, dim, center, radius, amplitude=1.0, slope=None, curvature=None, axes=None):
        super().__init__(dim, axes)
        k = len(self.axes)
        self.center = np.asarray(center, dtype=float).reshape(k)
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        self.slope = np.zeros(k) if slope is None else np.asarray(slope, dtype=float).reshape(k)
        C = np.zeros((k, k)) if curvature is None else np.asarray(curvature, dtype=float).reshape(k, k)
        self.curvature = 0.5 * (C + C.T)

    def _jet(self, z, order):
        d = z - self.center
        k = len(d)
        r = float(np.sqrt(d @ d))
        c, dc, ddc = cutoff(r / self.radius)
        if c == 0.0 and dc == 0.0:
            return 0.0, np.zeros(k), np.zeros((k, k))
        # polynomial factor p(d) = amplitude + slope·d + ½ dᵀ C d
        Cd = self.curvature @ d
        p = self.amplitude + self.slope @ d + 0.5 * d @ Cd
        dp = self.slope + Cd
        ddp = self.curvature
        if r > 0.0:
            n = d / r
            gc = dc / self.radius * n
            hc = ddc / self.radius ** 2 * np.outer(n, n) \
                + dc / (self.radius * r) * (np.eye(k) - np.outer(n, n))
        else:
            gc = np.zeros(k)
            hc = np.zeros((k, k))
        v = c * p
        g = c * dp + p * gc
        h = c * ddp + np.outer(gc, dp) + np.outer(dp, gc) + p * hc
        return v, g, h

    def describe(self):
        return {**super().describe(), "center": self.center.tolist(), "radius": self.radius,
                "amplitude": self.amplitude, "slope": self.slope.tolist(),
                "curvature": self.curvature.tolist()}


SCALAR_KINDS = {
    "constant": ConstantField,
    "quadratic": QuadraticField,
    "cosine": CosineField,
    "exp-dist2": ExpDistSquaredField,
    "one-plus-dist2": OnePlusDistSquaredField,
    "radial-bump": RadialBumpField,
}


def scalar_field_from_spec(spec: dict, dim: int) -> ScalarField:
    """Build a scalar field from a plain mapping such as a scenario table."""
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        cls = SCALAR_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown scalar field kind {kind!r}") from None
    return cls(dim, **spec)


class OperatorField:
    """Field of linear operators on the first ``k`` chart coordinates.

    ``jet(x, order)`` returns the k×k value, its first derivatives with shape
    (dim, k, k) and second derivatives with shape (dim, dim, k, k).
    """

    kind = "operator"

    def __init__(self, dim: int, k: int):
        self.dim = int(dim)
        self.k = int(k)

    def jet(self, x, order=2):
        raise NotImplementedError

    def value(self, x):
        return self.jet(x, 0)[0]

    def describe(self) -> dict:
        return {"kind": self.kind}


class ScaledIdentityOperator(OperatorField):
    kind = "scaled-identity"

    def __init__(self, dim, k, scalar: ScalarField):
        super().__init__(dim, k)
        self.scalar = scalar

    def jet(self, x, order=2):
        v, g, h = self.scalar.jet(x, order)
        eye = np.eye(self.k)
        d = None if g is None else g[:, None, None] * eye
        dd = None if h is None else h[:, :, None, None] * eye
        return v * eye, d, dd

    def describe(self):
        return {"kind": self.kind, "scalar": self.scalar.describe()}


class ConstantOperator(OperatorField):
    kind = "constant"

    def __init__(self, dim, k, matrix):
        super().__init__(dim, k)
        self.matrix = np.asarray(matrix, dtype=float).reshape(k, k)

    def jet(self, x, order=2):
        return (self.matrix.copy(),
                np.zeros((self.dim, self.k, self.k)) if order >= 1 else None,
                np.zeros((self.dim, self.dim, self.k, self.k)) if order >= 2 else None)

    def describe(self):
        return {"kind": self.kind, "matrix": self.matrix.tolist()}


class SumOperator(OperatorField):
    """Pointwise sum of operator fields."""

    kind = "sum"

    def __init__(self, parts):
        parts = list(parts)
        super().__init__(parts[0].dim, parts[0].k)
        self.parts = parts

    def jet(self, x, order=2):
        jets = [p.jet(x, order) for p in self.parts]
        out = []
        for i in range(3):
            if jets[0][i] is None:
                out.append(None)
            else:
                out.append(sum(j[i] for j in jets))
        return tuple(out)

    def describe(self):
        return {"kind": self.kind, "parts": [p.describe() for p in self.parts]}
