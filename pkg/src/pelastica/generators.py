"""Initial curves: circles, ellipses, seeded Fourier perturbations, snapshot files.

Random curves use numpy's ``PCG64`` bit generator (``numpy.random.default_rng``)
so a seed reproduces the same curve on every platform.
"""

from __future__ import annotations

import shlex
from pathlib import Path

import numpy as np

from .curve import DiscreteClosedCurve, loads_curve
from .errors import ConfigError, CurveError

MAX_FOURIER_DRAWS = 100


def circle(N: int, radius: float = 1.0, n: int = 2, center=None) -> DiscreteClosedCurve:
    x = np.arange(N) / N
    pts = np.zeros((N, n))
    pts[:, 0] = radius * np.cos(2 * np.pi * x)
    pts[:, 1] = radius * np.sin(2 * np.pi * x)
    if center is not None:
        pts += np.asarray(center, dtype=float)
    return DiscreteClosedCurve(pts)


def ellipse(N: int, a: float = 2.0, b: float = 1.0, n: int = 2) -> DiscreteClosedCurve:
    x = np.arange(N) / N
    pts = np.zeros((N, n))
    pts[:, 0] = a * np.cos(2 * np.pi * x)
    pts[:, 1] = b * np.sin(2 * np.pi * x)
    return DiscreteClosedCurve(pts)


def _regularity_margin(pts):
    gaps = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    return gaps.min() / gaps.mean()


def fourier(N: int, seed: int, modes: int = 5, amp: float = 0.2, n: int = 2) -> DiscreteClosedCurve:
    """Unit circle plus a random perturbation in Fourier modes ``1..modes``.

    Mode ``k`` of every coordinate gets cosine and sine coefficients drawn
    from ``amp * N(0, 1) / k``.  Draws whose smallest sample spacing falls
    below a tenth of the mean spacing are rejected and redrawn from the same
    generator.
    """
    if modes < 1:
        raise ConfigError(f"fourier curve needs modes >= 1, got {modes}", key="modes")
    rng = np.random.default_rng(seed)
    x = np.arange(N) / N
    k = np.arange(1, modes + 1)
    cos_kx = np.cos(2 * np.pi * np.outer(x, k))
    sin_kx = np.sin(2 * np.pi * np.outer(x, k))
    base = np.zeros((N, n))
    base[:, 0] = np.cos(2 * np.pi * x)
    base[:, 1] = np.sin(2 * np.pi * x)
    for _ in range(MAX_FOURIER_DRAWS):
        a = amp * rng.standard_normal((modes, n)) / k[:, None]
        b = amp * rng.standard_normal((modes, n)) / k[:, None]
        pts = base + cos_kx @ a + sin_kx @ b
        if _regularity_margin(pts) >= 0.1:
            return DiscreteClosedCurve(pts)
    raise CurveError(f"no regular fourier curve after {MAX_FOURIER_DRAWS} draws (amp={amp} too large?)")


def from_file(path) -> DiscreteClosedCurve:
    return loads_curve(Path(path).read_text())


def generate_initial(spec: str, N: int = 256, n: int = 2, seed: int | None = None) -> DiscreteClosedCurve:
    """Build an initial curve from a generator spec string.

    Accepted forms::

        circle R
        ellipse A B
        fourier seed=S modes=M amp=A
        file PATH
    """
    tokens = shlex.split(spec)
    if not tokens:
        raise ConfigError("empty initial curve spec", key="initial")
    kind, args = tokens[0], tokens[1:]
    try:
        if kind == "circle":
            return circle(N, float(args[0]) if args else 1.0, n=n)
        if kind == "ellipse":
            a, b = (float(v) for v in args[:2]) if len(args) >= 2 else (2.0, 1.0)
            return ellipse(N, a, b, n=n)
        if kind == "fourier":
            opts = dict(arg.split("=", 1) for arg in args)
            unknown = set(opts) - {"seed", "modes", "amp"}
            if unknown:
                raise ConfigError(f"unknown fourier option(s) {sorted(unknown)}", key="initial")
            s = int(opts.get("seed", seed if seed is not None else 0))
            return fourier(N, s, modes=int(opts.get("modes", 5)), amp=float(opts.get("amp", 0.2)), n=n)
        if kind == "file":
            if not args:
                raise ConfigError("file spec needs a path", key="initial")
            try:
                return from_file(args[0])
            except OSError as exc:
                raise ConfigError(f"cannot read initial curve file: {exc}", key="initial") from exc
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed initial spec {spec!r}: {exc}", key="initial") from exc
    raise ConfigError(f"unknown initial curve kind {kind!r}", key="initial")


def random_smooth_field(N: int, n: int, rng, modes: int = 4, scale: float = 1.0) -> np.ndarray:
    """Random band-limited vector field with modes ``0..modes``."""
    x = np.arange(N) / N
    out = np.tile(scale * rng.standard_normal(n), (N, 1))
    for k in range(1, modes + 1):
        a = scale * rng.standard_normal(n) / k
        b = scale * rng.standard_normal(n) / k
        out += np.outer(np.cos(2 * np.pi * k * x), a) + np.outer(np.sin(2 * np.pi * k * x), b)
    return out
