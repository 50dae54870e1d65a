"""Mixed Fourier/trigonometric spectral basis on a wall-bounded periodic strip.

Domain: (0, L) x (0, 1), periodic in x, walls at y = 0 and y = 1.  Scalar
fields carry one of two parities in y:

    cos: f(x, y) = sum_{n, m} c[n, m] exp(i 2 pi n x / L) cos(m pi y)
    sin: f(x, y) = sum_{n, m} c[n, m] exp(i 2 pi n x / L) sin(m pi y)

This module is the single home of the transform conventions.  Coefficients
are complex arrays of shape (nx, ny + 1); the x index follows numpy fft
order (n = 0 .. nx/2 - 1, -nx/2 .. -1), the y index is the wavenumber m
itself.  Synthesis is the plain sum above, with no hidden scale factors.
Real fields satisfy c[-n, m] = conj(c[n, m]).  Sine fields keep the m = 0
and m = ny columns at zero: sin(0) vanishes identically and sin(ny pi y)
vanishes at every collocation point, so neither is representable; dropping
them is the Galerkin truncation onto the representable band.

Collocation points are x_i = i L / nx and y_j = j / ny (walls included).
A velocity field pairs a cos-parity u1 with a sin-parity u2, so the
stress-free wall conditions (u2 = 0 and du1/dy = 0 at y = 0, 1) hold
structurally, as does theta = 0 for sin-parity scalars.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.fft

__all__ = [
    "Grid",
    "SpectralField",
    "VectorField",
    "synthesize",
    "analyze",
    "derivative_x",
    "derivative_y",
    "dealias",
    "divergence",
    "leray_project",
    "inner_h",
    "norm_h",
    "norm_v",
    "norm_laplacian",
    "quadrature",
    "real_mode",
    "random_scalar",
    "random_solenoidal",
    "stokes_smallest_eigenvalue",
    "smallest_eigenvalue",
    "solenoidality_defect",
    "reality_defect",
    "hermitian_part",
]

COS = "cos"
SIN = "sin"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Discretization of (0, L) x (0, 1): nx Fourier modes by ny + 1 wall modes.

    nx and ny must be powers of two (transform efficiency contract) and at
    least 8.  dealias_fraction sets the retained band for quadratic products:
    |n| <= floor(dealias_fraction * nx / 2), m <= floor(dealias_fraction * ny).
    """

    L: float
    nx: int
    ny: int
    dealias_fraction: float = 2.0 / 3.0

    # derived arrays, filled in __post_init__
    x: np.ndarray = field(init=False, repr=False, compare=False)
    y: np.ndarray = field(init=False, repr=False, compare=False)
    kx: np.ndarray = field(init=False, repr=False, compare=False)
    ky: np.ndarray = field(init=False, repr=False, compare=False)
    lam: np.ndarray = field(init=False, repr=False, compare=False)
    weight: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_mask: np.ndarray = field(init=False, repr=False, compare=False)
    quad_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (self.L > 0):
            raise ValueError(f"domain length must be positive, got L={self.L}")
        for name, n in (("nx", self.nx), ("ny", self.ny)):
            if n < 8 or not _is_power_of_two(n):
                raise ValueError(f"{name} must be a power of two >= 8, got {n}")
        if not (0 < self.dealias_fraction <= 1):
            raise ValueError(
                f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}"
            )

        def put(name: str, arr: np.ndarray) -> None:
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

        nx, ny, L = self.nx, self.ny, self.L
        put("x", np.arange(nx) * (L / nx))
        put("y", np.arange(ny + 1) / ny)
        put("kx", 2.0 * np.pi * np.fft.fftfreq(nx, d=1.0 / nx) / L)
        put("ky", np.pi * np.arange(ny + 1).astype(float))
        lam = self.kx[:, None] ** 2 + self.ky[None, :] ** 2
        put("lam", lam)
        w = np.full(ny + 1, L / 2.0)
        w[0] = L
        put("weight", w)
        ncut = int(np.floor(self.dealias_fraction * nx / 2))
        mcut = int(np.floor(self.dealias_fraction * ny))
        nidx = np.abs(np.fft.fftfreq(nx, d=1.0 / nx)).astype(int)
        mask = (nidx[:, None] <= ncut) & (np.arange(ny + 1)[None, :] <= mcut)
        put("dealias_mask", mask)
        wy = np.full(ny + 1, 1.0 / ny)
        wy[0] *= 0.5
        wy[-1] *= 0.5
        put("quad_weights", np.full(nx, L / nx)[:, None] * wy[None, :])

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny + 1)


@dataclass(frozen=True)
class SpectralField:
    """One real scalar field, stored as parity-tagged complex coefficients.

    Construction copies the coefficients, zeroes the structurally absent
    sine columns (m = 0 and m = ny), and freezes the array.  Operations
    return new fields; instances are immutable values.
    """

    grid: Grid
    parity: str
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.parity not in (COS, SIN):
            raise ValueError(f"parity must be 'cos' or 'sin', got {self.parity!r}")
        c = np.array(self.coeffs, dtype=np.complex128, copy=True)
        if c.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {c.shape} does not match grid {self.grid.shape}"
            )
        if self.parity == SIN:
            c[:, 0] = 0.0
            c[:, -1] = 0.0
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid, parity: str) -> "SpectralField":
        return cls(grid, parity, np.zeros(grid.shape, dtype=np.complex128))


@dataclass(frozen=True)
class VectorField:
    """Velocity-like pair: cos-parity u1, sin-parity u2, on one grid."""

    u1: SpectralField
    u2: SpectralField

    def __post_init__(self) -> None:
        if self.u1.parity != COS or self.u2.parity != SIN:
            raise ValueError("vector fields require u1 cos-parity, u2 sin-parity")
        if self.u1.grid != self.u2.grid:
            raise ValueError("vector components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(SpectralField.zeros(grid, COS), SpectralField.zeros(grid, SIN))


Field = Union[SpectralField, VectorField]


# ---------------------------------------------------------------------------
# transforms


def _synth_cos(c: np.ndarray) -> np.ndarray:
    w = np.array(c, copy=True)
    w[..., 0] *= 2.0
    w[..., -1] *= 2.0
    return scipy.fft.dct(w, type=1, axis=-1) / 2.0


def _anal_cos(v: np.ndarray) -> np.ndarray:
    ny = v.shape[-1] - 1
    a = scipy.fft.dct(v, type=1, axis=-1) / ny
    a[..., 0] /= 2.0
    a[..., -1] /= 2.0
    return a


def _synth_sin(c: np.ndarray) -> np.ndarray:
    out = np.zeros_like(c)
    out[..., 1:-1] = scipy.fft.dst(c[..., 1:-1], type=1, axis=-1) / 2.0
    return out


def _anal_sin(v: np.ndarray) -> np.ndarray:
    ny = v.shape[-1] - 1
    b = np.zeros_like(v, dtype=np.complex128)
    b[..., 1:-1] = scipy.fft.dst(v[..., 1:-1], type=1, axis=-1) / ny
    return b


def synthesize(f: SpectralField) -> np.ndarray:
    """Collocation values on the (nx, ny + 1) grid, walls included."""
    if f.parity == COS:
        gy = _synth_cos(f.coeffs)
    else:
        gy = _synth_sin(f.coeffs)
    return (np.fft.ifft(gy, axis=0) * f.grid.nx).real


def analyze(grid: Grid, values: np.ndarray, parity: str) -> SpectralField:
    """Forward transform of real collocation values; exact on the full band."""
    if values.shape != grid.shape:
        raise ValueError(
            f"value shape {values.shape} does not match grid {grid.shape}"
        )
    cx = np.fft.fft(np.asarray(values, dtype=float), axis=0) / grid.nx
    if parity == COS:
        c = _anal_cos(cx)
    else:
        c = _anal_sin(cx)
    return SpectralField(grid, parity, c)


# ---------------------------------------------------------------------------
# calculus


def derivative_x(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, f.parity, f.coeffs * (1j * f.grid.kx[:, None]))


def derivative_y(f: SpectralField) -> SpectralField:
    """d/dy flips parity: sin -> cos with +m pi, cos -> sin with -m pi.

    The cos -> sin image of the m = ny column is not representable and is
    truncated (states never carry it once dealiased).
    """
    g = f.grid
    if f.parity == SIN:
        return SpectralField(g, COS, f.coeffs * g.ky[None, :])
    return SpectralField(g, SIN, f.coeffs * (-g.ky[None, :]))


def dealias(f: Field) -> Field:
    if isinstance(f, VectorField):
        return VectorField(dealias(f.u1), dealias(f.u2))
    return SpectralField(f.grid, f.parity, f.coeffs * f.grid.dealias_mask)


def divergence(u: VectorField) -> SpectralField:
    """du1/dx + du2/dy, a cos-parity scalar; zero per mode when solenoidal."""
    g = u.grid
    d = 1j * g.kx[:, None] * u.u1.coeffs + g.ky[None, :] * u.u2.coeffs
    return SpectralField(g, COS, d)


def leray_project(u: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields, mode by mode.

    Subtracts the gradient part grad(phi) with phi solving the per-mode
    Poisson problem; m = 0 columns of u1 are annihilated (pure gradients for
    n != 0, mean-flow gauge for n = 0), which keeps the Stokes operator
    positive definite on the projected space.  Expects band-limited input
    (the dealiased band never carries the m = ny sine column this would
    otherwise generate).
    """
    g = u.grid
    d = 1j * g.kx[:, None] * u.u1.coeffs + g.ky[None, :] * u.u2.coeffs
    q = np.array(g.lam, copy=True)
    q[0, 0] = 1.0
    phi = -d / q
    p1 = u.u1.coeffs - 1j * g.kx[:, None] * phi
    p2 = u.u2.coeffs + g.ky[None, :] * phi
    p1 = np.array(p1, copy=True)
    p1[0, 0] = 0.0
    return VectorField(SpectralField(g, COS, p1), SpectralField(g, SIN, p2))


# ---------------------------------------------------------------------------
# inner products and norms (Parseval; exact on coefficients)


def _inner_scalar(f: SpectralField, q: SpectralField, power: int) -> float:
    w = f.grid.weight[None, :] * f.grid.lam ** power if power else f.grid.weight[None, :]
    return float(np.sum((f.coeffs * np.conj(q.coeffs)).real * w))


def inner_h(f: Field, q: Field) -> float:
    """L2 inner product over the domain."""
    if isinstance(f, VectorField):
        return _inner_scalar(f.u1, q.u1, 0) + _inner_scalar(f.u2, q.u2, 0)
    return _inner_scalar(f, q, 0)


def norm_h(f: Field) -> float:
    """L2 norm."""
    return float(np.sqrt(max(inner_h(f, f), 0.0)))


def norm_v(f: Field) -> float:
    """H1 seminorm, sqrt(sum lam |c|^2 weight); the natural V-norm."""
    if isinstance(f, VectorField):
        s = _inner_scalar(f.u1, f.u1, 1) + _inner_scalar(f.u2, f.u2, 1)
    else:
        s = _inner_scalar(f, f, 1)
    return float(np.sqrt(max(s, 0.0)))


def norm_laplacian(f: Field) -> float:
    """L2 norm of the (negative) Laplacian image, sqrt(sum lam^2 |c|^2 weight)."""
    if isinstance(f, VectorField):
        s = _inner_scalar(f.u1, f.u1, 2) + _inner_scalar(f.u2, f.u2, 2)
    else:
        s = _inner_scalar(f, f, 2)
    return float(np.sqrt(max(s, 0.0)))


def quadrature(grid: Grid, values: np.ndarray) -> float:
    """Trapezoid-in-y, rectangle-in-x quadrature of collocation values.

    Exact for band-limited integrands (x frequencies below nx, y cosine
    frequencies below 2 ny), which covers products of dealiased fields.
    """
    return float(np.sum(values * grid.quad_weights))


# ---------------------------------------------------------------------------
# constructors for tests and initial data


def real_mode(
    grid: Grid, parity: str, n: int, m: int, amplitude: float = 1.0, phase: float = 0.0
) -> SpectralField:
    """amplitude * Re[exp(i(2 pi n x / L + phase))] * basis_m(y), as a field."""
    c = np.zeros(grid.shape, dtype=np.complex128)
    if n == 0:
        c[0, m] = amplitude * np.cos(phase)
    else:
        half = 0.5 * amplitude * np.exp(1j * phase)
        c[n % grid.nx, m] = half
        c[(-n) % grid.nx, m] = np.conj(half)
    return SpectralField(grid, parity, c)


def random_scalar(
    grid: Grid,
    rng: np.random.Generator,
    parity: str,
    norm: float = 1.0,
    decay_scale: Optional[float] = None,
) -> SpectralField:
    """Seeded smooth random field in the dealiased band, scaled to an L2 norm."""
    f = analyze(grid, rng.standard_normal(grid.shape), parity)
    if decay_scale is None:
        decay_scale = 0.25 * float(np.sqrt(grid.lam[grid.dealias_mask].max()))
    env = np.exp(-grid.lam / decay_scale**2) * grid.dealias_mask
    f = SpectralField(grid, parity, f.coeffs * env)
    cur = norm_h(f)
    if cur == 0.0:
        raise ValueError("degenerate random sample (zero norm)")
    return SpectralField(grid, parity, f.coeffs * (norm / cur))


def random_solenoidal(
    grid: Grid,
    rng: np.random.Generator,
    norm: float = 1.0,
    decay_scale: Optional[float] = None,
) -> VectorField:
    """Seeded smooth divergence-free field, scaled to an L2 norm."""
    u = VectorField(
        random_scalar(grid, rng, COS, 1.0, decay_scale),
        random_scalar(grid, rng, SIN, 1.0, decay_scale),
    )
    u = leray_project(u)
    cur = norm_h(u)
    if cur == 0.0:
        raise ValueError("degenerate random sample (zero norm after projection)")
    s = norm / cur
    return VectorField(
        SpectralField(grid, COS, u.u1.coeffs * s),
        SpectralField(grid, SIN, u.u2.coeffs * s),
    )


# ---------------------------------------------------------------------------
# spectra of the dissipative operators


def stokes_smallest_eigenvalue(grid: Grid, space: str) -> float:
    """Smallest Laplacian eigenvalue over retained admissible modes.

    space='temperature': sin-parity scalars, modes m >= 1.
    space='velocity': divergence-free pairs; all admissible modes have
    m >= 1 (m = 0 columns are pure gradients for n != 0 and the gauged mean
    flow for n = 0), paired per (n, m) with the same eigenvalue.
    """
    if space not in ("velocity", "temperature"):
        raise ValueError(f"unknown space {space!r}")
    m = np.arange(grid.ny + 1)[None, :]
    sel = grid.dealias_mask & (m >= 1) & (m <= grid.ny - 1)
    return float(grid.lam[sel].min())


def smallest_eigenvalue(grid: Grid) -> float:
    """min over the velocity and temperature spaces; the lambda_1 of reports."""
    return min(
        stokes_smallest_eigenvalue(grid, "velocity"),
        stokes_smallest_eigenvalue(grid, "temperature"),
    )


# ---------------------------------------------------------------------------
# diagnostics


def solenoidality_defect(u: VectorField) -> float:
    """max |div coefficient| relative to the largest term entering it."""
    g = u.grid
    t1 = np.abs(1j * g.kx[:, None] * u.u1.coeffs)
    t2 = np.abs(g.ky[None, :] * u.u2.coeffs)
    scale = max(float(t1.max()), float(t2.max()))
    if scale == 0.0:
        return 0.0
    d = np.abs(1j * g.kx[:, None] * u.u1.coeffs + g.ky[None, :] * u.u2.coeffs)
    return float(d.max()) / scale


def reality_defect(f: SpectralField) -> float:
    """max |c[n] - conj(c[-n])| relative to the largest coefficient."""
    c = f.coeffs
    scale = float(np.abs(c).max())
    if scale == 0.0:
        return 0.0
    flipped = np.conj(np.roll(c[::-1], 1, axis=0))
    return float(np.abs(c - flipped).max()) / scale


def hermitian_part(coeffs: np.ndarray) -> np.ndarray:
    """Projection onto real-field coefficients: c[-n, m] = conj(c[n, m]).

    Orthogonal in every mode-diagonal norm, so it never increases |.|_H
    or |.|_V and maps exactly symmetric input to itself bit for bit.
    """
    flipped = np.conj(np.roll(coeffs[::-1, :], 1, axis=0))
    return 0.5 * (coeffs + flipped)
