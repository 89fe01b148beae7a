"""Uniform symmetric 1D grid, double-well potential and interaction kernel.

Grid functions are plain ``numpy`` arrays of length ``grid.n``.  Integrals use
the trapezoid rule; orbitals obey Dirichlet conditions so their end samples
are zero and the end weights never matter for them.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels

#: Tolerance of the positive-definiteness check on sampled kernels.
FOURIER_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int
    points: np.ndarray = field(repr=False, compare=False)

    @property
    def h(self):
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def weights(self):
        """Trapezoid quadrature weights."""
        wts = np.full(self.n, self.h)
        wts[0] = wts[-1] = 0.5 * self.h
        return wts

    @property
    def center(self):
        """Index of x = 0, or of the first positive point when n is even."""
        return self.n // 2

    def integrate(self, f):
        return float(np.dot(self.weights, f))

    def inner(self, f, g):
        return float(np.dot(self.weights, f * g))

    def norm(self, f):
        return np.sqrt(self.inner(f, f))

    def reflect(self, f):
        """Return ``x -> f(-x)``; exact on the symmetric grid."""
        return np.asarray(f)[..., ::-1]


@dataclass(frozen=True)
class PotentialSpec:
    s: float = 2.0
    L: float = 0.0

    def __post_init__(self):
        if not self.s >= 2:
            raise ValueError(f"s must be >= 2, got {self.s}")
        if not self.L >= 0:
            raise ValueError(f"L must be >= 0, got {self.L}")


@dataclass(frozen=True)
class KernelSpec:
    amplitude: float = 1.0
    range: float = 1.0
    family: str = "triangle"

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError(f"kernel amplitude must be >= 0, got {self.amplitude}")
        if not self.range > 0:
            raise ValueError(f"kernel range must be > 0, got {self.range}")
        if self.family != "triangle":
            raise ValueError(f"unknown kernel family {self.family!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.maximum(0.0, 1.0 - np.abs(x) / self.range)


@dataclass(frozen=True)
class SampledKernel:
    """Kernel sampled on grid points and on the difference lattice ``k*h``.

    ``values[i] = w(x_i)``; ``stencil[k + m] = w(k h)`` for ``|k| <= m``.
    """

    spec: KernelSpec
    grid: Grid
    values: np.ndarray = field(repr=False, compare=False)
    stencil: np.ndarray = field(repr=False, compare=False)

    @property
    def half_width(self):
        return (len(self.stencil) - 1) // 2


def default_x_max(L, kernel_range=1.0):
    """Half-width of the computational interval for well separation ``L``."""
    return L / 2 + max(8.0, 3.0 * kernel_range)


def build_grid(x_min, x_max, n):
    n = int(n)
    if n < 3:
        raise ValueError("degenerate grid: need n >= 3")
    if not x_max > x_min:
        raise ValueError("degenerate grid: need x_max > x_min")
    if abs(x_min + x_max) > 1e-12 * max(abs(x_min), abs(x_max)):
        raise ValueError(f"asymmetric domain [{x_min}, {x_max}]: need x_min = -x_max")
    x_max = float(x_max)
    pts = np.linspace(-x_max, x_max, n)
    # exact antisymmetry, and x = 0 exactly at the center when n is odd
    pts = 0.5 * (pts - pts[::-1])
    pts[0], pts[-1] = -x_max, x_max
    return Grid(-x_max, x_max, n, pts)


def double_well_potential(grid, spec):
    x = grid.points
    half = spec.L / 2
    v = np.minimum(np.abs(x - half) ** spec.s, np.abs(x + half) ** spec.s)
    # enforce exact evenness against rounding in the two branches
    return 0.5 * (v + v[::-1])


def interaction_kernel(grid, spec):
    h = grid.h
    m = int(np.floor(spec.range / h + 1e-9))
    if 2 * m + 1 > grid.n:
        raise ValueError("kernel support does not fit inside the domain")
    stencil = spec(np.arange(-m, m + 1) * h)
    kernel = SampledKernel(spec, grid, spec(grid.points), stencil)
    check_positive_definite(kernel)
    return kernel


def kernel_spectrum(stencil, n_fft=None):
    """Discrete Fourier transform of a centered, even stencil (real)."""
    m = (len(stencil) - 1) // 2
    if n_fft is None:
        n_fft = 8 * (2 * m + 1)
    buf = np.zeros(n_fft)
    buf[: m + 1] = stencil[m:]
    if m:
        buf[-m:] = stencil[:m]
    return np.fft.rfft(buf).real


def check_positive_definite(kernel):
    spectrum = kernel_spectrum(kernel.stencil)
    scale = max(float(np.max(np.abs(kernel.stencil))), np.finfo(float).tiny)
    if spectrum.min() < -FOURIER_TOL * scale:
        raise ValueError("kernel violates positive-definiteness assumption")
    return float(spectrum.min())


def convolve_density(kernel, rho):
    """``(w * rho)(x_i) = sum_j wt_j w(x_i - x_j) rho(x_j)`` with trapezoid weights.

    ``rho`` may be a single grid function or a stack of them (rows).
    """
    rho = np.asarray(rho, dtype=float)
    grid = kernel.grid
    if rho.shape[-1] != grid.n:
        raise ValueError(
            f"density has {rho.shape[-1]} samples but kernel grid has {grid.n}"
        )
    weighted = rho * grid.weights
    if rho.ndim == 1:
        return kernels.convolve(weighted, kernel.stencil)
    return kernels.convolve_rows(weighted.reshape(-1, grid.n), kernel.stencil).reshape(
        rho.shape
    )
