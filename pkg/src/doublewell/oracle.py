"""Exact diagonalization on a truncated mode set and the excitation map U_N.

Modes are ordered ``[u_1, u_2, u_3, ...]``: the localized pair first, then
mean-field eigenmodes.  Many-body states are occupation tuples in
lexicographic order.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import LinAlgError, eigh

from . import kernels
from .twomode import interaction_tensor, one_body_matrix

MAX_DIM = 20_000
CONJUGATION_MAX_DIM = 5_000
RELATIONS = ("a1*a1", "a1*a2", "a2*a2", "a1*am", "a2*am", "am*an")


def compositions(total, parts):
    """All tuples of ``parts`` nonnegative ints summing to ``total``, lexicographic."""
    if parts == 0:
        return [()] if total == 0 else []
    out = []
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return out


@dataclass(frozen=True)
class TruncatedFockBasis:
    M_modes: int
    N: int
    states: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, M_modes, N):
        if M_modes < 1 or N < 0:
            raise ValueError("need M_modes >= 1 and N >= 0")
        states = np.array(compositions(N, M_modes), dtype=np.int64).reshape(-1, M_modes)
        return cls(int(M_modes), int(N), states)

    @property
    def dim(self):
        return len(self.states)

    def index(self):
        return {tuple(s): i for i, s in enumerate(self.states.tolist())}


def fock_dimension(M_modes, N):
    return math.comb(N + M_modes - 1, N)


def many_body_hamiltonian(h, w, lam, N, max_dim=MAX_DIM):
    """Dense ``sum h a*a + lam/(2(N-1)) sum w a*a*aa`` on all N-boson states."""
    h = np.asarray(h, dtype=float)
    M = h.shape[0]
    if N < 2:
        raise ValueError("need N >= 2")
    dim = fock_dimension(M, N)
    if dim > max_dim:
        raise ValueError(f"dimension {dim} exceeds the cap {max_dim}")
    fb = TruncatedFockBasis.build(M, N)
    H = kernels.many_body_matrix(fb.states, h, np.asarray(w, dtype=float), lam / (2 * (N - 1)))
    return 0.5 * (H + H.T), fb


def assemble_full_hamiltonian(basis, potential, kernel, lam, N, M_modes, max_dim=MAX_DIM):
    """Many-body matrix over the first ``M_modes`` of ``[u_1, u_2, u_3, ...]``."""
    dim = fock_dimension(M_modes, N)
    if dim > max_dim:
        raise ValueError(f"dimension {dim} exceeds the cap {max_dim}")
    modes = basis.paper_modes(M_modes)
    h = one_body_matrix(basis.grid, potential, modes)
    w = interaction_tensor(kernel, modes)
    return many_body_hamiltonian(h, w, lam, N, max_dim)


def one_body_operator(fock_basis, m, n):
    """Matrix of ``a*_m a_n`` (0-based mode indices)."""
    h = np.zeros((fock_basis.M_modes,) * 2)
    h[m, n] = 1.0
    w = np.zeros((fock_basis.M_modes,) * 4)
    return kernels.many_body_matrix(fock_basis.states, h, w, 0.0)


@dataclass(frozen=True)
class OracleResult:
    energy: float
    psi: np.ndarray = field(repr=False)
    n_perp: float
    n_perp_sq: float
    variance: float
    mean_imbalance: float
    n_minus: float


def oracle_ground_state(H, fock_basis):
    try:
        vals, vecs = eigh(H, subset_by_index=[0, 0])
    except LinAlgError as exc:
        raise RuntimeError(f"eigensolver failure: {exc}") from exc
    psi = vecs[:, 0]
    i = np.argmax(np.abs(psi))
    if psi[i] < 0:
        psi = -psi
    occ = fock_basis.states
    p = psi**2
    n_perp = occ[:, 2:].sum(axis=1).astype(float)
    d = (occ[:, 0] - occ[:, 1]).astype(float)
    if fock_basis.M_modes >= 2:
        g12 = psi @ one_body_operator(fock_basis, 0, 1) @ psi
        g11 = float(np.dot(p, occ[:, 0]))
        g22 = float(np.dot(p, occ[:, 1]))
        # a_- = (a_1 - a_2)/sqrt(2); gamma_21 = gamma_12 for real psi
        n_minus = 0.5 * (g11 + g22 - 2 * g12)
    else:
        n_minus = 0.0
    return OracleResult(
        energy=float(vals[0]),
        psi=psi,
        n_perp=float(np.dot(p, n_perp)),
        n_perp_sq=float(np.dot(p, n_perp**2)),
        variance=float(np.dot(p, d * d)),
        mean_imbalance=float(np.dot(p, d)),
        n_minus=float(n_minus),
    )


def product_state(fock_basis, coeffs):
    """Coefficients of ``(sum_m c_m u_m)^{(x) N}`` in the occupation basis."""
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (fock_basis.M_modes,):
        raise ValueError("one coefficient per mode required")
    N = fock_basis.N
    out = np.empty(fock_basis.dim)
    for i, occ in enumerate(fock_basis.states.tolist()):
        multinom = math.factorial(N)
        for n in occ:
            multinom //= math.factorial(n)
        out[i] = math.sqrt(multinom) * np.prod(c ** np.array(occ))
    return out


# --------------------------------------------------------------------------
# excitation map


def admissible(N, s, d):
    return 0 <= s <= N and abs(d) <= N - s and (N - s + d) % 2 == 0


@dataclass(frozen=True)
class ExcitationDecomposition:
    """Sectors ``(s, d) -> (excited occupations, amplitudes)``; only admissible ones exist."""

    N: int
    M_modes: int
    sectors: dict = field(repr=False)

    def norm_sq(self):
        return float(sum(np.dot(v, v) for _, v in self.sectors.values()))

    def sector_weight(self, s, d):
        if (s, d) not in self.sectors:
            return 0.0
        v = self.sectors[(s, d)][1]
        return float(np.dot(v, v))

    def inverse(self, fock_basis):
        """Reassemble the N-body vector (inverse of the map on its range)."""
        index = fock_basis.index()
        psi = np.zeros(fock_basis.dim)
        for (s, d), (excited, vec) in self.sectors.items():
            k1, k2 = (self.N - s + d) // 2, (self.N - s - d) // 2
            for e, a in zip(excited, vec):
                psi[index[(k1, k2) + tuple(e)]] = a
        return psi


def excitation_decomposition(psi, fock_basis):
    if fock_basis.M_modes < 2:
        raise ValueError("need at least the two localized modes")
    psi = np.asarray(psi, dtype=float)
    N = fock_basis.N
    groups = {}
    for occ, a in zip(fock_basis.states.tolist(), psi):
        k1, k2, e = occ[0], occ[1], tuple(occ[2:])
        key = (N - k1 - k2, k1 - k2)
        groups.setdefault(key, ([], []))
        groups[key][0].append(e)
        groups[key][1].append(a)
    sectors = {
        key: (np.array(es, dtype=np.int64).reshape(len(es), -1), np.array(vs))
        for key, (es, vs) in sorted(groups.items())
    }
    for s, d in sectors:
        assert admissible(N, s, d)
    return ExcitationDecomposition(N, fock_basis.M_modes, sectors)


@dataclass(frozen=True)
class ExcitationSpace:
    """Truncated ``l^2(F_perp)``: imbalance ``d`` in a window times excited Fock states."""

    N: int
    M_modes: int
    d_values: np.ndarray
    labels: list = field(repr=False)  # (d, excited occupation tuple)

    @classmethod
    def build(cls, N, M_modes, margin=2):
        d_values = np.arange(-N - margin, N + margin + 1)
        n_exc = M_modes - 2
        excited = [e for s in range(N + 1) for e in compositions(s, n_exc)]
        labels = [(int(d), e) for d in d_values for e in excited]
        return cls(N, M_modes, d_values, labels)

    @property
    def dim(self):
        return len(self.labels)

    def index(self):
        return {lab: i for i, lab in enumerate(self.labels)}

    def s(self):
        return np.array([sum(e) for _, e in self.labels], dtype=float)

    def d(self):
        return np.array([d for d, _ in self.labels], dtype=float)

    def admissible_mask(self):
        return np.array([admissible(self.N, sum(e), d) for d, e in self.labels])

    def theta(self, power=1):
        """``(Theta Phi)_d = Phi_{d-1}``: content moves from ``d`` to ``d + power``."""
        idx = self.index()
        rows, cols = [], []
        for j, (d, e) in enumerate(self.labels):
            i = idx.get((d + power, e))
            if i is not None:
                rows.append(i)
                cols.append(j)
        return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.dim,) * 2)

    def annihilator(self, m):
        """``a_m`` for an excited mode (0-based over all modes, ``m >= 2``)."""
        idx = self.index()
        k = m - 2
        rows, cols, vals = [], [], []
        for j, (d, e) in enumerate(self.labels):
            if e[k] == 0:
                continue
            f = list(e)
            f[k] -= 1
            rows.append(idx[(d, tuple(f))])
            cols.append(j)
            vals.append(math.sqrt(e[k]))
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.dim,) * 2)

    def diag(self, values):
        return sparse.diags(np.asarray(values, dtype=float))

    def embedding(self, fock_basis):
        """Matrix of U_N: column ``n`` is the image of occupation state ``n``."""
        idx = self.index()
        rows = []
        for occ in fock_basis.states.tolist():
            rows.append(idx[(occ[0] - occ[1], tuple(occ[2:]))])
        cols = np.arange(fock_basis.dim)
        return sparse.csr_matrix(
            (np.ones(fock_basis.dim), (rows, cols)), shape=(self.dim, fock_basis.dim)
        )


def _sqrt_diag(values):
    return sparse.diags(np.sqrt(np.clip(values, 0.0, None)))


def conjugation_sides(N, M_modes, relation, m=2, n=2):
    """Both sides of one conjugation identity as dense matrices on the excitation space.

    Returns ``(lhs, rhs)`` with ``lhs = U X U^*`` and ``rhs`` projected onto the
    admissible sectors.  ``m``, ``n`` are 0-based excited-mode indices (>= 2).
    """
    if relation not in RELATIONS:
        raise ValueError(f"unknown relation {relation!r}; expected one of {RELATIONS}")
    if M_modes < 3 and relation in ("a1*am", "a2*am", "am*an"):
        raise ValueError("relation needs at least one excited mode")
    fb = TruncatedFockBasis.build(M_modes, N)
    space = ExcitationSpace.build(N, M_modes)
    if max(fb.dim, space.dim) > CONJUGATION_MAX_DIM:
        raise ValueError("instance too large for explicit conjugation check")
    U = space.embedding(fb)
    s, d = space.s(), space.d()
    Theta = space.theta(1)
    Theta_inv = space.theta(-1)
    plus = (N - s + d + 1) / 2
    minus = (N - s - d + 1) / 2

    if relation == "a1*a1":
        X = one_body_operator(fb, 0, 0)
        rhs = space.diag((N - s + d) / 2)
    elif relation == "a2*a2":
        X = one_body_operator(fb, 1, 1)
        rhs = space.diag((N - s - d) / 2)
    elif relation == "a1*a2":
        X = one_body_operator(fb, 0, 1)
        rhs = Theta @ _sqrt_diag(plus) @ _sqrt_diag(minus) @ Theta
    elif relation == "a1*am":
        X = one_body_operator(fb, 0, m)
        rhs = Theta @ _sqrt_diag(plus) @ space.annihilator(m)
    elif relation == "a2*am":
        X = one_body_operator(fb, 1, m)
        rhs = Theta_inv @ _sqrt_diag(minus) @ space.annihilator(m)
    else:
        X = one_body_operator(fb, m, n)
        rhs = space.annihilator(m).T @ space.annihilator(n)

    P = space.diag(space.admissible_mask().astype(float))
    lhs = (U @ sparse.csr_matrix(X) @ U.T).toarray()
    rhs = (P @ rhs @ P).toarray()
    return lhs, rhs


def verify_conjugation(N, M_modes, relation):
    """Max-abs deviation of one identity, maximized over excited indices where relevant."""
    if relation in ("a1*am", "a2*am"):
        pairs = [(m, 2) for m in range(2, M_modes)]
    elif relation == "am*an":
        pairs = list(itertools.product(range(2, M_modes), repeat=2))
    else:
        pairs = [(2, 2)]
    worst = 0.0
    for m, n in pairs:
        lhs, rhs = conjugation_sides(N, M_modes, relation, m, n)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def partial_isometry_defects(N, M_modes):
    """``(||U^*U - 1||_max, ||U U^* - P_adm||_max)``."""
    fb = TruncatedFockBasis.build(M_modes, N)
    space = ExcitationSpace.build(N, M_modes)
    U = space.embedding(fb).toarray()
    P = np.diag(space.admissible_mask().astype(float))
    return (
        float(np.abs(U.T @ U - np.eye(fb.dim)).max()),
        float(np.abs(U @ U.T - P).max()),
    )


# --------------------------------------------------------------------------
# quadratic Hamiltonians by brute force


def quadratic_fock_ground_energy(A, B, n_max=24):
    """Lowest eigenvalue of ``sum A a*a + 1/2 sum B (a*a* + aa)`` with at most
    ``n_max`` quanta per mode (truncated Fock space, dense)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    M = A.shape[0]
    if (n_max + 1) ** M > 6000:
        raise ValueError("truncated Fock space too large")
    a1 = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1)
    eye = np.eye(n_max + 1)
    ops = []
    for k in range(M):
        mats = [eye] * M
        mats[k] = a1
        op = mats[0]
        for mat in mats[1:]:
            op = np.kron(op, mat)
        ops.append(op)
    H = np.zeros_like(ops[0])
    for i in range(M):
        for j in range(M):
            H += A[i, j] * ops[i].T @ ops[j]
            H += 0.5 * B[i, j] * (ops[i].T @ ops[j].T + ops[i] @ ops[j])
    return float(np.linalg.eigvalsh(0.5 * (H + H.T))[0])
