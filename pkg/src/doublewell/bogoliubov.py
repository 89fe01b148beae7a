"""Excited-mode quadratic blocks and Bogoliubov ground energies.

For one well (side ``right`` uses u_{r,a} and u_1, ``left`` uses u_{l,a} and
u_2) the blocks at cutoff ``M`` are

    D_ab = delta_ab ((mu_{2a+1} + mu_{2a+2}) / 2 - mu_+)
    K_ab = 1/2 <u_a (x) u_1, w u_1 (x) u_b>

and the quadratic Hamiltonian has ``A = D + lambda K`` and ``B = lambda K``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .discretization import convolve_density

PSD_CLIP = 1e-12
DEFAULT_LADDER = (8, 16, 32, 64)


@dataclass(frozen=True)
class QuadraticBlocks:
    M: int
    D: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)
    lam: float
    side: str

    @property
    def d(self):
        return np.diag(self.D).copy()

    @property
    def A(self):
        return self.D + self.lam * self.K

    @property
    def B(self):
        return self.lam * self.K

    def with_lambda(self, lam):
        return QuadraticBlocks(self.M, self.D, self.K, float(lam), self.side)

    def truncate(self, M):
        if M > self.M:
            raise ValueError(f"cannot extend blocks from M={self.M} to M={M}")
        return QuadraticBlocks(M, self.D[:M, :M], self.K[:M, :M], self.lam, self.side)


@dataclass(frozen=True)
class BogoliubovResult:
    e_bog: float
    e_bog_right: float
    e_bog_left: float
    M: int
    method: str


def _side_modes(basis, side):
    if side == "right":
        return basis.right, basis.u1
    if side == "left":
        return basis.left, basis.u2
    raise ValueError(f"side must be 'right' or 'left', got {side!r}")


def excited_blocks(basis, kernel, lam, M, side="right"):
    if M < 1:
        raise ValueError("cutoff M must be >= 1")
    if basis.n_modes < 2 * M + 2:
        raise ValueError(
            f"increase n_modes: cutoff M={M} needs {2 * M + 2}, basis has {basis.n_modes}"
        )
    excited, anchor = _side_modes(basis, side)
    mu = basis.eigenvalues
    d = 0.5 * (mu[2 : 2 * M + 2 : 2] + mu[3 : 2 * M + 2 : 2]) - mu[0]
    F = excited[:M] * anchor
    K = 0.5 * (F * basis.grid.weights) @ convolve_density(kernel, F).T
    K = 0.5 * (K + K.T)
    return QuadraticBlocks(M, np.diag(d), K, float(lam), side)


def _psd_eigvalsh(X, what):
    vals = np.linalg.eigvalsh(0.5 * (X + X.T))
    scale = max(np.abs(vals).max(), np.finfo(float).tiny)
    if vals.min() < -PSD_CLIP * scale:
        raise ValueError(f"non-PSD {what}: eigenvalue {vals.min():.3e}")
    return np.clip(vals, 0.0, None)


def _root_correction(Y0, P, Z=None, max_iter=50):
    """Solve ``Y0 Z + Z Y0 + Z^2 = P`` for the correction ``Z = sqrt(Y0^2 + P) - Y0``.

    Newton's method; each step is a Sylvester solve in the eigenbasis of
    ``Y0 + Z``.  Working with ``Z`` instead of the full root keeps the small
    correction free of cancellation against ``Y0``.
    """
    if Z is None:
        Z = np.zeros_like(P)
    eps = np.finfo(float).eps
    tiny = np.finfo(float).tiny
    previous = np.inf
    for _ in range(max_iter):
        R = P - (Y0 @ Z + Z @ Y0 + Z @ Z)
        R = 0.5 * (R + R.T)
        y, Q = np.linalg.eigh(Y0 + Z)
        if y.min() <= 0:
            raise ValueError("square-root correction lost positivity")
        step = Q @ ((Q.T @ R @ Q) / (y[:, None] + y[None, :])) @ Q.T
        Z = Z + 0.5 * (step + step.T)
        size = np.abs(step).max()
        if size <= 4 * eps * max(np.abs(Z).max(), tiny):
            return Z
        # rounding floor: the step stopped shrinking
        if size >= 0.5 * previous and size <= 1e3 * eps * max(np.abs(Z).max(), tiny):
            return Z
        previous = size
    raise ValueError("square-root correction did not converge")


def bogoliubov_energy_trace(blocks):
    """``-1/2 Tr[D + lam K - sqrt(D^2 + 2 lam D^1/2 K D^1/2)]`` for one side.

    The root comes from a symmetric eigendecomposition.  ``Z = root - D``
    satisfies ``DZ + ZD + Z^2 = 2 lam D^1/2 K D^1/2``, whose diagonal turns the
    trace into ``1/2 sum_i (Z^2)_ii / d_i``; that form is evaluated after a
    Newton polish of ``Z`` so nothing of size ``Tr D`` is subtracted.
    """
    d = blocks.d
    if np.any(d <= 0):
        raise ValueError("D must have strictly positive entries")
    lam = blocks.lam
    if lam == 0 or not np.any(blocks.K):
        return 0.0
    s = np.sqrt(d)
    P = 2 * lam * s[:, None] * blocks.K * s[None, :]
    X = np.diag(d * d) + P
    vals = _psd_eigvalsh(X, "square-root argument")
    _, Q = np.linalg.eigh(0.5 * (X + X.T))
    root = (Q * np.sqrt(vals)) @ Q.T
    Z = _root_correction(np.diag(d), P, root - np.diag(d))
    Z2 = Z @ Z
    return -0.25 * math.fsum(np.diag(Z2) / d)


def quadratic_ground_energy(A, B):
    """Ground energy of ``sum A a*a + 1/2 sum B (a*a* + aa)``.

    Equals ``1/2 sum nu - 1/2 Tr A`` with symplectic eigenvalues ``nu``, the
    square roots of the spectrum of ``S = L^T (A + B) L`` where ``A - B = L L^T``.
    With ``Y = L^T L`` one has ``S = Y^2 + 2 L^T B L``; the correction
    ``Z = sqrt(S) - Y`` is found by Newton iteration from zero and the energy is
    ``-1/4 Tr(Y^-1 Z^2)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError("A and B must be square matrices of the same size")
    if not np.any(B):
        return 0.0
    try:
        c, _ = cho_factor(A - B, lower=True)
    except LinAlgError as exc:
        raise ValueError("unstable quadratic form: A - B is not positive definite") from exc
    plus = np.linalg.eigvalsh(0.5 * (A + B + (A + B).T))
    if plus.min() < -PSD_CLIP * max(np.abs(plus).max(), 1.0):
        raise ValueError("unstable quadratic form: A + B is not positive semidefinite")
    L = np.tril(c)
    Y = L.T @ L
    P = 2 * L.T @ B @ L
    Z = _root_correction(Y, 0.5 * (P + P.T))
    return -0.25 * float(np.trace(np.linalg.solve(Y, Z @ Z)))


def bogoliubov_energy(basis, kernel, lam, M, method="trace_formula"):
    parts = {}
    for side in ("right", "left"):
        blocks = excited_blocks(basis, kernel, lam, M, side)
        if method == "trace_formula":
            parts[side] = bogoliubov_energy_trace(blocks)
        elif method == "symplectic":
            parts[side] = quadratic_ground_energy(blocks.A, blocks.B)
        else:
            raise ValueError(f"unknown method {method!r}")
    return BogoliubovResult(
        e_bog=parts["right"] + parts["left"],
        e_bog_right=parts["right"],
        e_bog_left=parts["left"],
        M=M,
        method=method,
    )


def cutoff_ladder(basis, kernel, lam, ladder=DEFAULT_LADDER, method="trace_formula"):
    """E^Bog along increasing cutoffs; returns ``(results, last_increment)``.

    Blocks are built once at the largest cutoff and truncated.
    """
    ladder = sorted(set(int(m) for m in ladder))
    if not ladder:
        raise ValueError("empty cutoff ladder")
    top = {side: excited_blocks(basis, kernel, lam, ladder[-1], side) for side in ("right", "left")}
    energy = bogoliubov_energy_trace if method == "trace_formula" else (
        lambda b: quadratic_ground_energy(b.A, b.B)
    )
    results = []
    for M in ladder:
        r = energy(top["right"].truncate(M))
        l = energy(top["left"].truncate(M))
        results.append(BogoliubovResult(r + l, r, l, M, method))
    increment = abs(results[-1].e_bog - results[-2].e_bog) if len(results) > 1 else float("nan")
    return results, increment


# --------------------------------------------------------------------------
# variance coefficient


def coupling_vector(basis, kernel, M, side="right"):
    """``v_a = <u_a, K u_anchor> = 1/2 int u_a u_anchor (w * u_anchor^2)``."""
    excited, anchor = _side_modes(basis, side)
    if len(excited) < M:
        raise ValueError(f"increase n_modes: need {M} excited pairs")
    field_ = convolve_density(kernel, anchor**2)
    return 0.5 * (excited[:M] * anchor * field_) @ basis.grid.weights


def variance_coefficient_bound(right, left, v_right, v_left, U, lam):
    """``lam U - lam^2/2 [v_r.(D + 2 lam K_r)^-1 v_r + v_l.(D + 2 lam K_l)^-1 v_l]``."""
    total = 0.0
    for blocks, v in ((right, v_right), (left, v_left)):
        S = blocks.D + 2 * lam * blocks.K
        try:
            cf = cho_factor(S)
        except LinAlgError as exc:
            raise ValueError("singular solve: D + 2 lambda K is not positive definite") from exc
        total += float(np.dot(v, cho_solve(cf, v)))
    return lam * U - 0.5 * lam**2 * total


@dataclass(frozen=True)
class LambdaZeroEstimate:
    lambda0: float
    lam_max: float
    positive_up_to_max: bool
    checked: int


def empirical_lambda0(right, left, v_right, v_left, U, lam_max=0.1, lam_cap=1e4,
                      n_check=200, rtol=1e-10):
    """Largest ``lam`` with the variance-coefficient bound positive on ``(0, lam]``.

    The bound is first sampled geometrically up to ``lam_cap``; the first sign
    change is refined by bisection.  ``positive_up_to_max`` reports whether the
    bound is positive at every sample in ``(0, lam_max]``.
    """

    def f(lam):
        return variance_coefficient_bound(right, left, v_right, v_left, U, lam)

    grid = np.geomspace(lam_max * 1e-6, lam_cap, n_check)
    grid = np.union1d(grid, np.linspace(lam_max / n_check, lam_max, n_check))
    values = np.array([f(lam) for lam in grid])
    positive_up = bool(np.all(values[grid <= lam_max] > 0))
    bad = np.nonzero(values <= 0)[0]
    if bad.size == 0:
        return LambdaZeroEstimate(float("inf"), lam_max, positive_up, len(grid))
    i = bad[0]
    lo = grid[i - 1] if i > 0 else 0.0
    hi = grid[i]
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return LambdaZeroEstimate(float(lo), lam_max, positive_up, len(grid))
