"""Discrete closed curves and their arclength differential operators.

A closed curve is stored as ``N`` samples ``gamma(x_j)`` on the uniform grid
``x_j = j/N`` of the circle ``R/Z``.  Derivatives with respect to ``x`` are
taken spectrally (FFT) by default; a fourth-order central finite-difference
backend is available for cross-validation.

Normal derivatives of the curvature are built recursively,

    nabla_s phi = d_s phi - <d_s phi, tau> tau,

never by expanding the recursion symbolically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import CurveError

MIN_SAMPLES = 16
MAX_ORDER = 6

TOL_UNIT = 1e-8
TOL_ORTH = 1e-8
TOL_SPEED = 1e-8

BACKENDS = ("spectral", "fd4")


@dataclass(frozen=True)
class DiscreteClosedCurve:
    """``N`` ordered samples of a closed regular curve in ``R^n``.

    Parameters
    ----------
    points : array_like, shape (N, n)
        Sample ``j`` is the position at parameter ``x_j = j/N``.  Index
        arithmetic is periodic.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2:
            raise CurveError(f"points must be a 2-d array (N, n), got shape {pts.shape}")
        N, n = pts.shape
        if n < 2:
            raise CurveError(f"ambient dimension must be >= 2, got {n}")
        if N < MIN_SAMPLES:
            raise CurveError(f"need at least {MIN_SAMPLES} samples, got {N}")
        if not np.all(np.isfinite(pts)):
            bad = int(np.argwhere(~np.isfinite(pts))[0, 0])
            raise CurveError(f"non-finite coordinate at sample {bad}", index=bad)
        gaps = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        if gaps.min() <= 0.0:
            j = int(np.argmin(gaps))
            raise CurveError(f"curve not regular: samples {j} and {(j + 1) % N} coincide", index=j)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def samples(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.samples) / self.samples

    def __len__(self):
        return self.samples

    def scaled(self, factor: float) -> "DiscreteClosedCurve":
        return DiscreteClosedCurve(factor * self.points)

    def translated(self, offset) -> "DiscreteClosedCurve":
        return DiscreteClosedCurve(self.points + np.asarray(offset, dtype=float))


@dataclass(frozen=True)
class GeometryCache:
    """Pointwise geometric quantities of a curve on its sample grid.

    ``normal_derivs[m]`` holds ``nabla_s^m kappa`` and ``full_derivs[m-1]``
    holds ``d_s^m gamma`` for ``m = 1..6``.
    """

    curve: DiscreteClosedCurve
    speed: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray
    normal_derivs: list = field(repr=False)
    full_derivs: list = field(repr=False)
    length: float
    backend: str = "spectral"

    @property
    def max_normal_order(self) -> int:
        return len(self.normal_derivs) - 1

    @property
    def ds(self) -> np.ndarray:
        """Quadrature weights of the trapezoid rule in arclength."""
        return self.speed / self.curve.samples

    def integrate(self, values) -> float:
        """Trapezoid rule for ``int values ds`` over the closed curve."""
        return float(np.dot(np.asarray(values), self.ds))

    def d_s(self, field_values, order=1):
        """Arclength derivative ``d_s^order`` of a per-sample field."""
        out = np.asarray(field_values, dtype=float)
        inv = 1.0 / self.speed if out.ndim == 1 else (1.0 / self.speed)[:, None]
        for _ in range(order):
            out = derivative(out, 1, backend=self.backend) * inv
        return out

    def normal_part(self, field_values):
        return project_normal(field_values, self.tangent)

    def normal_deriv(self, m: int) -> np.ndarray:
        if m > self.max_normal_order:
            raise CurveError(
                f"geometry cached to normal order {self.max_normal_order}, {m} requested"
            )
        return self.normal_derivs[m]


def _wavenumbers(N):
    k = np.arange(N // 2 + 1, dtype=float)
    return k


def _spectral_derivative(values, order):
    N = values.shape[0]
    coeffs = np.fft.rfft(values, axis=0)
    symbol = (2j * np.pi * _wavenumbers(N)) ** order
    if N % 2 == 0:
        # Nyquist mode has no well-defined derivative on the grid.
        symbol[-1] = 0.0
    if values.ndim > 1:
        symbol = symbol.reshape((-1,) + (1,) * (values.ndim - 1))
    return np.fft.irfft(coeffs * symbol, n=N, axis=0)


def _fd4_first(values):
    N = values.shape[0]
    h = 1.0 / N
    return (
        -np.roll(values, -2, axis=0)
        + 8.0 * np.roll(values, -1, axis=0)
        - 8.0 * np.roll(values, 1, axis=0)
        + np.roll(values, 2, axis=0)
    ) / (12.0 * h)


def derivative(values, order, backend="spectral"):
    """Periodic ``d_x^order`` of sampled values on the uniform grid of ``R/Z``.

    Works on arrays of shape ``(N,)`` or ``(N, ...)``; the derivative acts on
    axis 0.
    """
    values = np.asarray(values, dtype=float)
    if order == 0:
        return values.copy()
    if backend == "spectral":
        return _spectral_derivative(values, order)
    if backend == "fd4":
        out = values
        for _ in range(order):
            out = _fd4_first(out)
        return out
    raise ValueError(f"unknown differentiation backend {backend!r}; expected one of {BACKENDS}")


def differentiate(curve: DiscreteClosedCurve, order: int, backend="spectral") -> np.ndarray:
    """Derivative ``d_x^order gamma`` of the sample sequence, shape (N, n).

    The spectral backend is exact on trigonometric polynomials of degree
    below ``N/2``.

    Raises
    ------
    ValueError
        If ``order`` is outside ``1..6``.
    """
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"derivative order must lie in 1..{MAX_ORDER}, got {order}")
    return derivative(curve.points, order, backend=backend)


def project_normal(field_values, tangent):
    """Remove the tangential component: ``phi - <phi, tau> tau``."""
    field_values = np.asarray(field_values, dtype=float)
    return field_values - np.einsum("ij,ij->i", field_values, tangent)[:, None] * tangent


def build_geometry(curve: DiscreteClosedCurve, max_normal_order: int = 4, backend="spectral") -> GeometryCache:
    """Compute speed, tangent, curvature, ``nabla_s^m kappa`` and ``d_s^m gamma``.

    Parameters
    ----------
    curve : DiscreteClosedCurve
    max_normal_order : int
        Highest ``m`` for which ``nabla_s^m kappa`` is cached (at least 4).
    backend : {"spectral", "fd4"}

    Raises
    ------
    CurveError
        If the discrete speed vanishes somewhere; ``index`` names the sample.
    """
    max_normal_order = max(int(max_normal_order), 4)
    N = curve.samples
    d1 = derivative(curve.points, 1, backend=backend)
    speed = np.linalg.norm(d1, axis=1)
    scale = speed.mean()
    j = int(np.argmin(speed))
    if not scale > 0 or speed[j] <= 1e-12 * scale:
        raise CurveError(f"curve not regular: speed vanishes at sample {j}", index=j)

    inv_speed = (1.0 / speed)[:, None]

    def d_s(values):
        return derivative(values, 1, backend=backend) * inv_speed

    tangent = d1 * inv_speed
    full = [tangent]
    for _ in range(2, MAX_ORDER + 1):
        full.append(d_s(full[-1]))

    curvature = project_normal(full[1], tangent)
    normal = [curvature]
    for _ in range(max_normal_order):
        normal.append(project_normal(d_s(normal[-1]), tangent))

    length = float(speed.sum() / N)
    return GeometryCache(
        curve=curve,
        speed=speed,
        tangent=tangent,
        curvature=curvature,
        normal_derivs=normal,
        full_derivs=full,
        length=length,
        backend=backend,
    )


def curve_length(curve: DiscreteClosedCurve) -> float:
    d1 = derivative(curve.points, 1)
    return float(np.linalg.norm(d1, axis=1).mean())


class TrigInterpolant:
    """Trigonometric interpolant of periodic samples, evaluable anywhere on R/Z."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        self.N = values.shape[0]
        self.squeeze = values.ndim == 1
        coeffs = np.fft.rfft(values.reshape(self.N, -1), axis=0) / self.N
        self.k = np.arange(coeffs.shape[0])
        weights = np.full(coeffs.shape[0], 2.0)
        weights[0] = 1.0
        if self.N % 2 == 0:
            weights[-1] = 1.0
        self.coeffs = coeffs * weights[:, None]

    def _basis(self, x, order):
        phase = np.exp(2j * np.pi * np.outer(np.asarray(x, dtype=float), self.k))
        if order:
            phase = phase * (2j * np.pi * self.k) ** order
        if self.N % 2 == 0:
            # Real-valued Nyquist term, cos(pi N x) and its derivatives.
            nyq = np.pi * self.N
            xs = np.asarray(x, dtype=float)
            phase[:, -1] = (nyq ** order) * np.cos(nyq * xs + order * np.pi / 2)
        return phase

    def __call__(self, x, order=0):
        out = (self._basis(x, order) @ self.coeffs).real
        return out[:, 0] if self.squeeze else out


def _arclength_fraction(speed):
    """Return callables for ``phi(x) = int_0^x |gamma'| / L`` and its derivative."""
    N = speed.shape[0]
    coeffs = np.fft.rfft(speed) / N
    L = coeffs[0].real
    k = np.arange(1, coeffs.shape[0])
    c = coeffs[1:].copy()
    w = np.full(c.shape[0], 2.0)
    if N % 2 == 0:
        w[-1] = 0.0  # the Nyquist cosine has no periodic antiderivative term here
    c = c * w

    def phi(x):
        x = np.asarray(x, dtype=float)
        e = np.exp(2j * np.pi * np.outer(x, k))
        integral = ((e - 1.0) @ (c / (2j * np.pi * k))).real
        return x + integral / L

    def dphi(x):
        x = np.asarray(x, dtype=float)
        e = np.exp(2j * np.pi * np.outer(x, k))
        return 1.0 + (e @ c).real / L

    return phi, dphi, L


def reparametrize_constant_speed(curve: DiscreteClosedCurve, max_newton=20) -> DiscreteClosedCurve:
    """Resample the curve so that ``|gamma'(x_j)| = L(gamma)`` at every sample.

    The new parameter of sample ``j`` is ``sigma_j = phi^{-1}(j/N)`` where
    ``phi`` is the normalized cumulative arclength measured from sample 0.
    A monotone cubic inverse of ``phi`` on the grid gives the starting guess,
    Newton iterations on the trigonometric interpolant of the speed refine it,
    and the curve is evaluated at ``sigma_j`` by trigonometric interpolation.
    Sample 0 is kept fixed.
    """
    N = curve.samples
    d1 = derivative(curve.points, 1)
    speed = np.linalg.norm(d1, axis=1)
    j = int(np.argmin(speed))
    if speed[j] <= 1e-12 * speed.mean():
        raise CurveError(f"curve not regular: speed vanishes at sample {j}", index=j)

    phi, dphi, _ = _arclength_fraction(speed)
    grid = np.arange(N + 1) / N
    phi_grid = phi(grid)
    phi_grid[0], phi_grid[-1] = 0.0, 1.0
    if np.any(np.diff(phi_grid) <= 0):
        raise CurveError("cumulative arclength is not monotone; curve under-resolved")
    targets = grid[:-1]
    sigma = PchipInterpolator(phi_grid, grid)(targets)
    for _ in range(max_newton):
        step = (phi(sigma) - targets) / dphi(sigma)
        step[0] = 0.0
        sigma = sigma - step
        if np.max(np.abs(step)) < 1e-15:
            break
    sigma[0] = 0.0
    new_points = TrigInterpolant(curve.points)(sigma)
    new_points[0] = curve.points[0]
    return DiscreteClosedCurve(new_points)


def speed_spread(curve: DiscreteClosedCurve) -> float:
    """``(max_j |gamma'| - min_j |gamma'|) / L``; zero for constant speed."""
    speed = np.linalg.norm(derivative(curve.points, 1), axis=1)
    return float((speed.max() - speed.min()) / speed.mean())


# -- snapshot text format ---------------------------------------------------

CURVE_HEADER = "pelastica-curve v1"
FIELD_HEADER = "pelastica-field v1"


def format_vectors(vectors, header: str) -> str:
    vectors = np.asarray(vectors, dtype=float)
    N, n = vectors.shape
    lines = [f"# {header} n={n} N={N}"]
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in vectors)
    return "\n".join(lines) + "\n"


def parse_vectors(text: str, header: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise CurveError("snapshot file lacks a header line")
    tokens = lines[0].lstrip("#").split()
    if " ".join(tokens[:2]) != header:
        raise CurveError(f"expected header '# {header}', got {lines[0]!r}")
    meta = dict(t.split("=", 1) for t in tokens[2:] if "=" in t)
    try:
        n, N = int(meta["n"]), int(meta["N"])
    except (KeyError, ValueError) as exc:
        raise CurveError(f"malformed snapshot header {lines[0]!r}") from exc
    rows = [[float(tok) for tok in ln.split()] for ln in lines[1:] if not ln.startswith("#")]
    data = np.array(rows, dtype=float)
    if data.shape != (N, n):
        raise CurveError(f"snapshot declares N={N}, n={n} but holds shape {data.shape}")
    return data


def dumps_curve(curve: DiscreteClosedCurve) -> str:
    return format_vectors(curve.points, CURVE_HEADER)


def loads_curve(text: str) -> DiscreteClosedCurve:
    return DiscreteClosedCurve(parse_vectors(text, CURVE_HEADER))
