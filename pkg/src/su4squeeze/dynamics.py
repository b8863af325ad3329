"""State preparation, unitary propagation and collective rotations."""
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .fock_basis import enumerate_basis
from .su4_algebra import ModelParams, OperatorMatrix, TOL_ALG, collective_operator, hamiltonian

__all__ = [
    "TOL_NORM", "DENSE_MAX_BLOCK", "NonHermitianError", "KrylovConvergenceError",
    "StateVector", "BlockSpectrum", "Propagator", "initial_state", "evolve",
    "apply_rotation", "apply_commuting_rotations", "krylov_expm_multiply",
    "cached_operator", "cached_hamiltonian",
]

TOL_NORM = 1e-10
TOL_PROP = 1e-10
DENSE_MAX_BLOCK = 4096
KRYLOV_DT = 0.01
KRYLOV_DIM = 30


class NonHermitianError(ValueError):
    pass


class KrylovConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class StateVector:
    basis_n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes if dtype is None else self.amplitudes.astype(dtype)

    def __len__(self):
        return len(self.amplitudes)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other):
        return complex(np.vdot(self.amplitudes, _amps(other)))

    def fidelity(self, other):
        """``|<self|other>|^2``; insensitive to global phase."""
        return abs(self.overlap(other)) ** 2

    def with_amplitudes(self, amps):
        return StateVector(self.basis_n, amps)


def _amps(state):
    return state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)


def initial_state(basis):
    """``|+>^N (x) |+1>^N``: binomial weights on ``(alpha, 0, 0, N - alpha)``."""
    basis = basis if hasattr(basis, "index_map") else enumerate_basis(basis)
    n = basis.n_atoms
    amps = np.zeros(basis.dim, dtype=complex)
    for alpha in range(n + 1):
        amps[basis.index_map[(alpha, 0, 0, n - alpha)]] = np.sqrt(comb(n, alpha)) / 2.0 ** (n / 2)
    return StateVector(n, amps)


class BlockSpectrum:
    """Eigendecomposition of a sparse Hermitian matrix, one block per connected component.

    Blocks of equal size are stacked so that applying ``f(A)`` to a vector
    is a handful of batched matrix products.
    """

    def __init__(self, dim, groups):
        self.dim = dim
        # each group: (idx[nb, s], evals[nb, s], evecs[nb, s, s])
        self.groups = groups

    @classmethod
    def from_matrix(cls, m, max_block=None):
        m = sp.csr_matrix(m)
        dim = m.shape[0]
        pattern = abs(m) + abs(m.T)
        _, labels = connected_components(pattern, directed=False)
        order = np.argsort(labels, kind="stable")
        bounds = np.flatnonzero(np.diff(labels[order])) + 1
        blocks = np.split(order, bounds)
        by_size = {}
        for blk in blocks:
            by_size.setdefault(len(blk), []).append(blk)
        if max_block is not None and max(by_size) > max_block:
            raise ValueError(f"largest block {max(by_size)} exceeds {max_block}")
        groups = []
        for size in sorted(by_size):
            idx = np.array(by_size[size])
            if size == 1:
                evals = m.diagonal()[idx].real.reshape(-1, 1)
                evecs = np.ones((len(idx), 1, 1), dtype=complex)
            else:
                sub = np.stack([m[b][:, b].toarray() for b in idx])
                evals, evecs = np.linalg.eigh(sub)
            groups.append((idx, evals, evecs))
        return cls(dim, groups)

    @classmethod
    def from_operator(cls, op):
        if not op.is_hermitian(TOL_ALG * max(1.0, abs(op.matrix).max() if op.matrix.nnz else 1.0)):
            raise NonHermitianError(f"operator {op.label} is not Hermitian")
        return cls.from_matrix(op.matrix)

    @property
    def max_block(self):
        return max(g[0].shape[1] for g in self.groups)

    def eigenvalues(self):
        return np.concatenate([g[1].ravel() for g in self.groups])

    def apply(self, vec, fn):
        """Return ``f(A) @ vec`` where ``fn`` maps eigenvalues to ``f(lambda)``.

        ``vec`` may be 1-D or ``(dim, k)``; ``fn`` may return an array with a
        trailing axis of length ``k`` to apply a different function per column.
        """
        vec = np.asarray(vec, dtype=complex)
        out = np.empty_like(vec)
        for idx, evals, evecs in self.groups:
            x = vec[idx]
            if vec.ndim == 1:
                c = np.einsum("bji,bj->bi", evecs.conj(), x)
                out[idx] = np.einsum("bij,bj->bi", evecs, fn(evals) * c)
            else:
                c = np.matmul(evecs.conj().transpose(0, 2, 1), x)
                f = fn(evals)
                f = f if f.ndim == 3 else f[..., None]
                out[idx] = np.matmul(evecs, f * c)
        return out

    def expm(self, vec, t):
        """``exp(-i t A) @ vec``."""
        return self.apply(vec, lambda ev: np.exp(-1j * t * ev))

    def expm_many(self, vec, ts):
        """Columns ``exp(-i t_k A) @ vec`` for every ``t_k`` in ``ts``."""
        ts = np.asarray(ts, dtype=float)
        vec = np.asarray(vec, dtype=complex)
        tiled = np.repeat(vec[:, None], len(ts), axis=1)
        return self.apply(tiled, lambda ev: np.exp(-1j * ev[..., None] * ts))

    def coefficients(self, vec):
        """Eigenbasis amplitudes of ``vec`` and the matching eigenvalues.

        Also returns, for each eigenvector, the basis index of its block's
        first element so callers can read block-constant diagonal labels.
        """
        vec = np.asarray(vec, dtype=complex)
        coefs, evs, first = [], [], []
        for idx, evals, evecs in self.groups:
            x = vec[idx]
            if vec.ndim == 1:
                c = np.einsum("bji,bj->bi", evecs.conj(), x).ravel()
            else:
                c = np.matmul(evecs.conj().transpose(0, 2, 1), x).reshape(-1, vec.shape[1])
            coefs.append(c)
            evs.append(evals.ravel())
            first.append(np.repeat(idx[:, 0], idx.shape[1]))
        return np.concatenate(coefs), np.concatenate(evs), np.concatenate(first)


def _lanczos_step(matvec, v, dt, m, tol):
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return v.copy(), 0.0
    n = len(v)
    V = np.zeros((m + 1, n), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[0] = v / beta0
    k_used = m
    for j in range(m):
        w = matvec(V[j])
        alpha[j] = np.vdot(V[j], w).real
        w = w - alpha[j] * V[j] - (beta[j - 1] * V[j - 1] if j > 0 else 0)
        # full reorthogonalization keeps the basis orthonormal at m=30
        w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-14 * max(1.0, abs(alpha[j])):
            k_used = j + 1
            break
        V[j + 1] = w / beta[j]
    k = k_used
    T = np.diag(alpha[:k]) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
    ev, U = sla.eigh(T)
    small = U @ (np.exp(-1j * dt * ev) * U[0].conj())
    out = beta0 * (V[:k].T @ small)
    err = 0.0 if k < m else beta0 * beta[k - 1] * abs(small[k - 1])
    return out, err


def krylov_expm_multiply(matrix, vec, t, dt=KRYLOV_DT, m=KRYLOV_DIM, tol=TOL_PROP, max_halvings=6):
    """``exp(-i t H) vec`` by Lanczos short-time stepping.

    Each step of size ``dt`` (halved if needed) must reach an a posteriori
    residual below ``tol``.
    """
    matvec = matrix.dot if hasattr(matrix, "dot") else matrix
    v = np.asarray(vec, dtype=complex).copy()
    if t == 0:
        return v
    sign = 1.0 if t > 0 else -1.0
    remaining = abs(t)
    h = dt
    while remaining > 1e-15:
        step = min(h, remaining)
        for _ in range(max_halvings + 1):
            new, err = _lanczos_step(matvec, v, sign * step, m, tol)
            if err <= tol:
                break
            step /= 2
        else:
            raise KrylovConvergenceError(f"Lanczos residual {err:.3g} > {tol:.1g} at step {step:.3g}")
        v = new
        remaining -= step
    return v


class Propagator:
    """``exp(-i H t)`` for a fixed Hermitian ``H``.

    ``method='auto'`` uses the block eigendecomposition whenever the largest
    connected block of ``H`` has at most ``DENSE_MAX_BLOCK`` states, and the
    Lanczos stepper otherwise.
    """

    def __init__(self, hamiltonian, method="auto"):
        if not hamiltonian.is_hermitian(TOL_ALG * max(1.0, abs(hamiltonian.matrix).max())):
            raise NonHermitianError(f"{hamiltonian.label} is not Hermitian")
        self.hamiltonian = hamiltonian
        if method == "auto":
            pattern = abs(hamiltonian.matrix)
            _, labels = connected_components(pattern, directed=False)
            biggest = np.bincount(labels).max()
            method = "dense" if biggest <= DENSE_MAX_BLOCK else "krylov"
        if method not in ("dense", "krylov"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method

    @property
    def spectrum(self):
        return self.hamiltonian.spectral

    def __call__(self, state, t):
        amps = _amps(state)
        if self.method == "dense":
            out = self.spectrum.expm(amps, t)
        else:
            out = krylov_expm_multiply(self.hamiltonian.matrix, amps, t)
        return StateVector(self.hamiltonian.basis_n, out)

    def trajectory(self, state, times):
        """Matrix whose column ``k`` is the state at ``times[k]``."""
        amps = _amps(state)
        if self.method == "dense":
            return self.spectrum.expm_many(amps, times)
        cols, t_prev, cur = [], 0.0, amps
        for t in times:
            cur = krylov_expm_multiply(self.hamiltonian.matrix, cur, t - t_prev)
            t_prev = t
            cols.append(cur)
        return np.stack(cols, axis=1)


@lru_cache(maxsize=256)
def cached_operator(n_atoms, label):
    return collective_operator(enumerate_basis(n_atoms), label)


@lru_cache(maxsize=64)
def cached_hamiltonian(n_atoms, picture="lab", chi=1.0):
    return hamiltonian(enumerate_basis(n_atoms), ModelParams(chi, n_atoms), picture)


@lru_cache(maxsize=64)
def _cached_propagator(key, method):
    return Propagator(cached_hamiltonian(*key), method)


def propagator(hamiltonian, method="auto"):
    label = hamiltonian.label
    if label in ("H_lab", "H_int") and hamiltonian is cached_hamiltonian(
            hamiltonian.basis_n, "lab" if label == "H_lab" else "interaction"):
        picture = "lab" if label == "H_lab" else "interaction"
        return _cached_propagator((hamiltonian.basis_n, picture, 1.0), method)
    return Propagator(hamiltonian, method)


def evolve(state, H, t, method="auto"):
    """``exp(-i H t) |state>`` with ``t`` in units of ``1/chi``."""
    amps = _amps(state)
    if len(amps) != H.dim:
        raise ValueError(f"state dimension {len(amps)} does not match operator {H.dim}")
    if t == 0:
        return StateVector(H.basis_n, amps.copy())
    return propagator(H, method)(amps, t)


def apply_rotation(state, generator, angle):
    """``exp(-i angle G) |state>`` for Hermitian ``G``."""
    amps = _amps(state)
    if len(amps) != generator.dim:
        raise ValueError("dimension mismatch")
    spec = generator.spectral
    if angle == 0:
        return StateVector(generator.basis_n, amps.copy())
    return StateVector(generator.basis_n, spec.expm(amps, angle))


def apply_commuting_rotations(state, terms):
    """``exp(-i sum_k angle_k G_k) |state>`` for pairwise commuting ``G_k``.

    ``terms`` is a sequence of ``(generator, angle)``. Commutation is checked,
    which makes the sequential product equal to the single exponential.
    """
    ops = [g for g, _ in terms]
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            c = ops[i].matrix @ ops[j].matrix - ops[j].matrix @ ops[i].matrix
            if c.nnz and abs(c).max() > TOL_ALG:
                raise ValueError(f"{ops[i].label} and {ops[j].label} do not commute")
    for g, a in terms:
        state = apply_rotation(state, g, a)
    return state
