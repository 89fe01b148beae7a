"""Two-mode projection: coefficients, occupation-basis matrices, ground states.

Occupation basis: ``|k>`` has ``k`` bosons in u_1 and ``N - k`` in u_2, so the
imbalance is ``d = 2k - N``.  All matrices are real symmetric pentadiagonal and
stored as lower bands (``bands[j, k] = H[k + j, k]``).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eig_banded
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .discretization import convolve_density
from .meanfield import apply_one_body

#: Largest N solved with the banded direct solver; above it Lanczos is used.
DENSE_LIMIT = 2000
LANCZOS_TOL = 1e-10


# --------------------------------------------------------------------------
# coefficients


def interaction_tensor(kernel, modes):
    """``w[m, n, p, q] = <u_m (x) u_n, w u_p (x) u_q>`` for all rows of ``modes``."""
    modes = np.atleast_2d(modes)
    K = len(modes)
    pairs = modes[:, None, :] * modes[None, :, :]
    flat = pairs.reshape(K * K, -1)
    conv = convolve_density(kernel, flat)
    wts = kernel.grid.weights
    # G[(m,p), (n,q)] = sum_x wt pair_mp (w * pair_nq)
    G = (flat * wts) @ conv.T
    G = 0.5 * (G + G.T)
    return G.reshape(K, K, K, K).transpose(0, 2, 1, 3).copy()


def interaction_coefficient(basis, kernel, m, n, p, q):
    """Single coefficient with 1-based indices over ``[u_1, u_2, u_3, ...]``."""
    top = max(m, n, p, q)
    if min(m, n, p, q) < 1 or top > basis.n_modes:
        raise IndexError(f"mode index out of range 1..{basis.n_modes}")
    u = basis.paper_modes(max(top, 2))
    wts = basis.grid.weights
    return float(np.dot(wts, u[m - 1] * u[p - 1] * convolve_density(kernel, u[n - 1] * u[q - 1])))


def one_body_matrix(grid, potential, modes):
    """Bare ``<u_m, (-Delta + V) u_n>``, symmetrized."""
    modes = np.atleast_2d(modes)
    applied = np.array([apply_one_body(grid, potential, u) for u in modes])
    h = (modes * grid.weights) @ applied.T
    return 0.5 * (h + h.T)


def two_mode_constants(N, lam, h, w, gap):
    """Return ``(E_0, E_N^w, mu, U, hop_constant)``."""
    if N < 2:
        raise ValueError("two-mode constants need N >= 2 (division by N - 1)")
    h11 = h[0][0]
    w1111, w1212, w1122 = w[0, 0, 0, 0], w[0, 1, 0, 1], w[0, 0, 1, 1]
    c = lam / (N - 1)
    e0 = N * h11 + lam * N**2 / (4 * (N - 1)) * (2 * w1122 - w1212)
    enw = N * (
        lam * N / (4 * (N - 1)) * (w1111 - 4 * w1122 + 2 * w1212)
        - c / 2 * (w1111 + w1122)
    )
    mu = h11 + lam / 2 * w1111 + lam * N / (2 * (N - 1)) * (w1212 - 2 * w1122) - c / 2 * w1122
    U = 0.25 * (w1111 - w1212)
    hop = -gap / 2 + c * w1122
    return float(e0), float(enw), float(mu), float(U), float(hop)


@dataclass(frozen=True)
class TwoModeModel:
    N: int
    lam: float
    h: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    gap: float
    E_0: float
    E_N_w: float
    mu: float
    U: float
    hop_constant: float

    @classmethod
    def build(cls, N, lam, h, w, gap):
        h = np.asarray(h, dtype=float).reshape(2, 2)
        w = np.asarray(w, dtype=float).reshape(2, 2, 2, 2)
        consts = two_mode_constants(N, lam, h, w, gap)
        return cls(int(N), float(lam), h, w, float(gap), *consts)

    def with_N(self, N):
        return TwoModeModel.build(N, self.lam, self.h, self.w, self.gap)

    def is_symmetric(self, tol=1e-8):
        swap = self.w[::-1, ::-1, ::-1, ::-1]
        scale = max(1.0, np.abs(self.w).max(), np.abs(self.h).max())
        return (
            abs(self.h[0, 0] - self.h[1, 1]) <= tol * scale
            and np.abs(self.w - swap).max() <= tol * scale
        )


def symmetric_tensor(A, B, C, D):
    """Reflection-symmetric 2-mode tensor from w_1111, w_1212, w_1122, w_1112."""
    G = np.array([[A, D, B], [D, C, D], [B, D, A]], dtype=float)
    pair = np.array([[0, 1], [1, 2]])
    idx = np.arange(2)
    m, n, p, q = np.meshgrid(idx, idx, idx, idx, indexing="ij")
    return G[pair[m, p], pair[n, q]]


def model_from_basis(basis, potential, kernel, N):
    """Two-mode model from a mean-field basis (bare one-body coefficients)."""
    u = np.vstack([basis.u1, basis.u2])
    h = one_body_matrix(basis.grid, potential, u)
    w = interaction_tensor(kernel, u)
    return TwoModeModel.build(N, basis.lam, h, w, basis.gap)


# --------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class FockMatrix:
    """Symmetric pentadiagonal matrix on ``|k>, k = 0..N`` in lower-band storage."""

    N: int
    bands: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.bands.shape != (3, self.N + 1):
            raise ValueError("bands must have shape (3, N + 1)")

    @property
    def dim(self):
        return self.N + 1

    def band(self, offset):
        """Entries ``H[k + |offset|, k]``."""
        j = abs(offset)
        return self.bands[j, : self.dim - j]

    def entry(self, i, j):
        off = abs(i - j)
        return float(self.bands[off, min(i, j)]) if off <= 2 else 0.0

    def to_sparse(self):
        b1, b2 = self.band(1), self.band(2)
        return sparse.diags(
            [b2, b1, self.bands[0], b1, b2], [-2, -1, 0, 1, 2], format="csr"
        )

    def to_dense(self):
        return self.to_sparse().toarray()

    def matvec(self, v):
        return self.to_sparse() @ v

    def expectation(self, v):
        """``<v|H|v>`` for a unit vector ``v``."""
        v = np.asarray(v, dtype=float)
        return float(v @ self.matvec(v))

    def max_abs(self):
        return float(np.abs(self.bands).max())


def _hop_amplitudes(N):
    k = np.arange(N)
    return np.sqrt((k + 1.0) * (N - k))


def _ladder(k, N, ops):
    """Apply a word of ladder operators (rightmost first) to every ``|k>``.

    ``ops`` is a sequence of ``(mode, creator)`` with mode 0 -> u_1, 1 -> u_2.
    Returns ``(amplitude, k_final)`` arrays.
    """
    n1 = k.astype(float)
    n2 = (N - k).astype(float)
    amp = np.ones_like(n1)
    for mode, creator in reversed(ops):
        occ = n1 if mode == 0 else n2
        if creator:
            amp = amp * np.sqrt(np.maximum(occ + 1, 0))
            occ += 1
        else:
            amp = amp * np.sqrt(np.maximum(occ, 0))
            occ -= 1
    return amp, n1.round().astype(int)


def _bands_from_terms(N, terms):
    """Accumulate ``sum coef * word`` into symmetric lower bands."""
    k = np.arange(N + 1)
    full = np.zeros((5, N + 1))  # row s + 2 holds H[k + s, k]
    for coef, ops in terms:
        if coef == 0.0:
            continue
        amp, kf = _ladder(k, N, ops)
        ok = (amp != 0) & (kf >= 0) & (kf <= N)
        shift = kf - k
        for s in np.unique(shift[ok]):
            sel = ok & (shift == s)
            if abs(s) > 2:
                raise AssertionError("two-mode operator left the pentadiagonal band")
            full[s + 2, k[sel]] += coef * amp[sel]
    bands = np.zeros((3, N + 1))
    bands[0] = full[2]
    for j in (1, 2):
        lower = full[2 + j, : N + 1 - j]
        upper = full[2 - j, j:]  # H[k, k + j] stored at column k + j
        bands[j, : N + 1 - j] = 0.5 * (lower + upper)
    return bands


def assemble_two_mode_hamiltonian(model):
    """Second-quantized H restricted to span{u_1, u_2}, by ladder-operator action."""
    N = model.N
    if N < 2:
        raise ValueError("need N >= 2")
    pair = model.lam / (2 * (N - 1))
    terms = []
    for m in range(2):
        for n in range(2):
            terms.append((model.h[m, n], ((m, True), (n, False))))
    for m in range(2):
        for n in range(2):
            for p in range(2):
                for q in range(2):
                    terms.append(
                        (pair * model.w[m, n, p, q],
                         ((m, True), (n, True), (p, False), (q, False)))
                    )
    return FockMatrix(N, _bands_from_terms(N, terms))


def assemble_identity_form(model):
    """Closed form in imbalance, hopping and N_- operators on the two-mode sector."""
    N = model.N
    if N < 2:
        raise ValueError("need N >= 2")
    k = np.arange(N + 1)
    d = 2 * k - N
    x = _hop_amplitudes(N)
    c = model.lam / (N - 1)
    w1122 = model.w[0, 0, 1, 1]
    g = 2 * c * w1122  # coefficient of N_-^2, with N_- = (N - X) / 2
    x_sq = np.zeros(N + 1)
    x_sq[:-1] += x**2
    x_sq[1:] += x**2
    bands = np.zeros((3, N + 1))
    bands[0] = model.E_0 + model.E_N_w + c * model.U * d**2 + g * (N**2 + x_sq) / 4
    bands[1, :N] = x * (model.hop_constant - g * N / 2)
    bands[2, : N - 1] = g * x[:-1] * x[1:] / 4
    return FockMatrix(N, bands)


def assemble_bose_hubbard(N, gap, w1111, lam):
    if N < 2:
        raise ValueError("need N >= 2")
    k = np.arange(N + 1)
    bands = np.zeros((3, N + 1))
    bands[0] = lam * w1111 / (2 * (N - 1)) * (k * (k - 1.0) + (N - k) * (N - k - 1.0))
    bands[1, :N] = -gap / 2 * _hop_amplitudes(N)
    return FockMatrix(N, bands)


# --------------------------------------------------------------------------
# ground states


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class GroundStateRecord:
    energy: float
    vector: np.ndarray = field(repr=False)
    variance: float
    mean_imbalance: float
    degenerate: bool = False
    parity: str = ""  # "even"/"odd" under k -> N - k when the model is symmetric

    @property
    def N(self):
        return len(self.vector) - 1


def _is_swap_symmetric(matrix, tol=1e-10):
    scale = max(matrix.max_abs(), np.finfo(float).tiny)
    b = matrix.bands
    N = matrix.N
    if np.abs(b[0] - b[0][::-1]).max() > tol * scale:
        return False
    for j in (1, 2):
        band = b[j, : N + 1 - j]
        if np.abs(band - band[::-1]).max() > tol * scale:
            return False
    return True


def _sector_projector(N, parity):
    """Columns are orthonormal (anti)symmetric combinations of |k> and |N-k>."""
    sign = 1.0 if parity == "even" else -1.0
    half = (N + 1) // 2  # pairs k < N - k
    rows, cols, vals = [], [], []
    r = 1 / np.sqrt(2)
    for j in range(half):
        rows += [j, N - j]
        cols += [j, j]
        vals += [r, sign * r]
    ncol = half
    if N % 2 == 0 and parity == "even":
        rows.append(N // 2)
        cols.append(half)
        vals.append(1.0)
        ncol += 1
    return sparse.csr_matrix((vals, (rows, cols)), shape=(N + 1, ncol))


def _lowest(hs):
    """Lowest eigenpair of a sparse symmetric pentadiagonal matrix."""
    n = hs.shape[0]
    if n == 1:
        return float(hs[0, 0]), np.ones(1)
    if n <= DENSE_LIMIT + 1:
        dia = hs.todia()
        lower = np.zeros((3, n))
        for j in range(3):
            diag = hs.diagonal(-j)
            lower[j, : n - j] = diag
        if dia.nnz and np.any(np.abs(dia.offsets) > 2):
            raise EigensolverError("matrix is not pentadiagonal")
        try:
            vals, vecs = eig_banded(lower, lower=True, select="i", select_range=(0, 0))
        except np.linalg.LinAlgError as exc:
            raise EigensolverError(str(exc)) from exc
        return float(vals[0]), vecs[:, 0]
    try:
        vals, vecs = eigsh(hs, k=1, which="SA", tol=LANCZOS_TOL, maxiter=20 * n)
    except ArpackNoConvergence as exc:
        raise EigensolverError("Lanczos iteration did not converge") from exc
    v = vecs[:, 0]
    res = np.linalg.norm(hs @ v - vals[0] * v)
    if res > LANCZOS_TOL * max(1.0, abs(vals[0])):
        raise EigensolverError(f"Lanczos residual {res:.2e} above tolerance")
    return float(vals[0]), v


def _record(vector, energy, degenerate=False, parity=""):
    i = np.argmax(np.abs(vector))
    if vector[i] < 0:
        vector = -vector
    vector = vector / np.linalg.norm(vector)
    N = len(vector) - 1
    d = 2 * np.arange(N + 1) - N
    p = vector**2
    return GroundStateRecord(
        energy=float(energy),
        vector=vector,
        variance=float(np.dot(d * d, p)),
        mean_imbalance=float(np.dot(d, p)),
        degenerate=degenerate,
        parity=parity,
    )


def fock_ground_state(matrix):
    """Lowest eigenpair plus imbalance statistics.

    Swap-symmetric matrices are split into the even and odd sectors of
    ``k -> N - k`` so the returned vector is exactly symmetric or antisymmetric.
    A cross-sector tie returns the even-sector vector and sets ``degenerate``.
    """
    H = matrix.to_sparse()
    N = matrix.N
    scale = max(matrix.max_abs(), 1.0)
    if not _is_swap_symmetric(matrix):
        e, v = _lowest(H)
        return _record(v, e)
    found = {}
    for parity in ("even", "odd"):
        P = _sector_projector(N, parity)
        if P.shape[1] == 0:
            continue
        hs = (P.T @ H @ P).tocsr()
        e, v = _lowest(hs)
        found[parity] = (e, P @ v)
    e_even = found["even"][0]
    e_odd = found.get("odd", (np.inf,))[0]
    tie = abs(e_even - e_odd) <= 1e-12 * scale
    parity = "even" if (e_even <= e_odd or tie) else "odd"
    e, v = found[parity]
    return _record(v, e, degenerate=tie, parity=parity)


# --------------------------------------------------------------------------
# gaussian trial states

SIGMA_RULES = ("sqrt_gap_N", "sqrt_N", "fixed", "delta_above_2", "delta_below_1")


def sigma_squared(N, gap, rule="sqrt_gap_N", delta=None, fixed=None):
    """Trial variance parameter under one of ``SIGMA_RULES``.

    ``delta_above_2``: sqrt(gap) N when delta > 2, else ``fixed``.
    ``delta_below_1``: sqrt(gap) N when delta < 1, else sqrt(N).
    """
    sg = np.sqrt(gap) * N
    if rule == "sqrt_gap_N":
        return max(1.0, sg)
    if rule == "sqrt_N":
        return float(np.sqrt(N))
    if rule == "fixed":
        if fixed is None:
            raise ValueError("sigma rule 'fixed' needs a value")
        return float(fixed)
    if rule in ("delta_above_2", "delta_below_1") and delta is None:
        raise ValueError(f"sigma rule {rule!r} needs delta")
    if rule == "delta_above_2":
        if fixed is None:
            raise ValueError("sigma rule 'delta_above_2' needs a fixed fallback value")
        return max(1.0, sg) if delta > 2 else float(fixed)
    if rule == "delta_below_1":
        return max(1.0, sg) if delta < 1 else float(np.sqrt(N))
    raise ValueError(f"unknown sigma rule {rule!r}; expected one of {SIGMA_RULES}")


@dataclass(frozen=True)
class GaussianTrial:
    N: int
    sigma_sq: float
    d: np.ndarray
    weights: np.ndarray
    Z: float

    def vector(self):
        """Coefficients over ``|k>`` with ``k = (N + d) / 2``."""
        v = np.zeros(self.N + 1)
        v[(self.N + self.d) // 2] = self.weights
        return v

    def energy(self, matrix):
        if matrix.N != self.N:
            raise ValueError("trial state and matrix have different N")
        return matrix.expectation(self.vector())

    def second_moment(self):
        return float(np.dot(self.d.astype(float) ** 2, self.weights**2))


def gaussian_trial_state(N, gap, delta=None, sigma_sq=None, rule="sqrt_gap_N", fixed=None):
    """Gaussian superposition of imbalance states with ``sum c_d^2 = 1``."""
    if N < 2:
        raise ValueError("need N >= 2")
    if sigma_sq is None:
        if not gap > 0:
            raise ValueError("need gap > 0")
        sigma_sq = sigma_squared(N, gap, rule, delta, fixed)
    if not sigma_sq >= 1:
        raise ValueError(f"empty support: sigma^2 = {sigma_sq} < 1")
    bound = min(sigma_sq, N)
    d = np.arange(-N, N + 1, 2)
    d = d[np.abs(d) <= bound + 1e-12]
    if d.size == 0:
        raise ValueError("empty support")
    raw = np.exp(-(d.astype(float) ** 2) / (4 * sigma_sq))
    Z = float(np.sqrt(np.sum(raw**2)))
    return GaussianTrial(int(N), float(sigma_sq), d, raw / Z, Z)
