"""Closed-form generators used as test data and CLI field kinds.

Every generator is vectorized: it maps an ``(N, n)`` array of points to an
``(N, k)`` array of values.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "linear",
    "constant",
    "shrinking_sphere",
    "bump",
    "abs_plus_one",
    "abs_squared",
    "random_smooth",
    "grim_reaper",
    "make_generator",
]


def _pts(X):
    return np.atleast_2d(np.asarray(X, dtype=float))


def linear(a):
    """``f(x) = A x`` for a ``(k, n)`` matrix (an n-vector means k = 1)."""
    A = np.atleast_2d(np.asarray(a, dtype=float))

    def gen(X):
        return _pts(X) @ A.T

    return gen


def constant(c):
    c = np.atleast_1d(np.asarray(c, dtype=float))

    def gen(X):
        return np.broadcast_to(c, (len(_pts(X)), len(c))).copy()

    return gen


def shrinking_sphere(n, radius=None, clamp=None):
    """Upper hemisphere graph ``sqrt(r^2 - |x|^2)``; r = sqrt(n) solves H + F_perp = 0.

    With ``clamp`` the graph is continued radially constant for ``|x| > clamp``
    so that it stays finite on cubes wider than the sphere's disk; the
    continuation is only C^0 and must stay out of every stencil that matters.
    """
    r2 = float(n) if radius is None else float(radius) ** 2

    def gen(X):
        X = _pts(X)
        rr = np.einsum("ij,ij->i", X, X)
        if clamp is not None:
            rr = np.minimum(rr, clamp**2)
        return np.sqrt(r2 - rr)[:, None]

    return gen


def bump(amplitude=1.0, width=0.5, center=None, k=1):
    """Smooth compactly supported bump ``a exp(1 - 1/(1 - |x-c|^2/w^2))`` in every component."""

    def gen(X):
        X = _pts(X)
        c = np.zeros(X.shape[1]) if center is None else np.asarray(center, dtype=float)
        s = np.einsum("ij,ij->i", X - c, X - c) / width**2
        out = np.zeros(len(X))
        inside = s < 1
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        return np.repeat(out[:, None], k, axis=1)

    return gen


def abs_plus_one(k=1):
    """``f(x) = |x| + 1``; blow-down limit is the cone ``|x|``."""

    def gen(X):
        X = _pts(X)
        return np.repeat((np.linalg.norm(X, axis=1) + 1.0)[:, None], k, axis=1)

    return gen


def abs_squared(k=1):
    def gen(X):
        X = _pts(X)
        return np.repeat(np.einsum("ij,ij->i", X, X)[:, None], k, axis=1)

    return gen


def random_smooth(n, k, seed=0, modes=4, amplitude=0.2, max_freq=2.0):
    """Seeded sum of plane waves, smooth with bounded derivatives of all orders."""
    rng = np.random.default_rng(seed)
    freqs = rng.uniform(-max_freq, max_freq, size=(k, modes, n))
    phases = rng.uniform(0, 2 * np.pi, size=(k, modes))
    amps = amplitude * rng.uniform(0.5, 1.0, size=(k, modes)) / modes

    def gen(X):
        X = _pts(X)
        arg = np.einsum("amn,Nn->Nam", freqs, X) + phases
        return np.einsum("am,Nam->Na", amps, np.sin(arg))

    return gen


def grim_reaper(t=0.0):
    """Translating curve-shortening solution ``t - log cos x`` on |x| < pi/2 (n = k = 1)."""

    def gen(X):
        X = _pts(X)
        return (t - np.log(np.cos(X[:, 0])))[:, None]

    return gen


def make_generator(kind: str, n: int, k: int, params: dict | None = None, seed: int = 42):
    """Generator from a ``{kind, params}`` description (CLI field kinds)."""
    p = dict(params or {})
    if kind == "linear":
        a = p.get("a")
        if a is None:
            a = np.zeros((k, n))
        return linear(a)
    if kind == "constant":
        return constant(p.get("c", [0.0] * k))
    if kind == "sphere":
        return shrinking_sphere(n, p.get("radius"), p.get("clamp"))
    if kind == "bump":
        base = linear(p.get("a", np.zeros((k, n))))
        b = bump(p.get("amplitude", 0.1), p.get("width", 0.5), p.get("center"), k)
        return lambda X: base(X) + b(X)
    if kind == "abs_plus_one":
        return abs_plus_one(k)
    if kind == "abs_squared":
        return abs_squared(k)
    if kind == "random":
        return random_smooth(n, k, seed=p.get("seed", seed), modes=p.get("modes", 4),
                             amplitude=p.get("amplitude", 0.2))
    raise ValueError(f"unknown field kind {kind!r}")
