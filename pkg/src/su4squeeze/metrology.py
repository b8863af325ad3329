"""Expectation values, QFIM, entanglement witnesses and measurement statistics."""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dynamics import StateVector, cached_operator, _amps
from .fock_basis import enumerate_basis

__all__ = [
    "GENERATOR_LABELS", "H_FD", "P_MIN", "TOL_PROB", "QfimResult", "WitnessReport",
    "OutcomeDistribution", "CfiResult", "expectation", "qfim", "qfim_trajectory",
    "entanglement_witness", "joint_outcome_distribution", "outcome_index", "classical_fisher",
    "cfi_marginal", "cfi_matrix", "k_top_probability", "fidelity_bound_cfi", "axis_vector",
]

GENERATOR_LABELS = ("Jx", "Jy", "Jz", "Kx", "Ky", "Kz")
H_FD = 1e-5
P_MIN = 1e-14
TOL_PROB = 1e-9


def expectation(state, op):
    """``<psi|A|psi>``; real for Hermitian ``A`` (imaginary part must be < 1e-10)."""
    psi = _amps(state)
    if len(psi) != op.dim:
        raise ValueError(f"state dimension {len(psi)} != operator dimension {op.dim}")
    val = np.vdot(psi, op.matrix @ psi)
    if op.is_hermitian():
        if abs(val.imag) > 1e-10:
            raise ValueError(f"<{op.label}> has imaginary part {val.imag:.3g}")
        return float(val.real)
    return complex(val)


@dataclass(frozen=True)
class QfimResult:
    """6x6 pure-state QFIM; index ``k`` (0-based) is ``GENERATOR_LABELS[k]``."""

    n_atoms: int
    chi_t: float
    matrix: np.ndarray

    def F(self, i, j):
        """Entry with the 1-based (Jx=1, ..., Kz=6) convention."""
        return float(self.matrix[i - 1, j - 1])

    def normalized(self):
        return self.matrix / self.n_atoms ** 2

    def upper_entries(self):
        """The 21 independent entries keyed ``F11, F22, ..., F16, ...``."""
        out = {f"F{i}{i}": self.F(i, i) for i in range(1, 7)}
        for i in range(1, 7):
            for j in range(i + 1, 7):
                out[f"F{i}{j}"] = self.F(i, j)
        return out


def _gen_ops(n, ops):
    if ops is None:
        return [cached_operator(n, lab) for lab in GENERATOR_LABELS]
    return list(ops)


def qfim(state, ops=None, chi_t=float("nan")):
    """``F^ij = 4(<{Gi, Gj}>/2 - <Gi><Gj>)`` for a pure state."""
    psi = _amps(state)
    n = state.basis_n if isinstance(state, StateVector) else _infer_n(len(psi))
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > 1e-8:
        raise ValueError(f"state is not normalized (norm={norm})")
    ops = _gen_ops(n, ops)
    for op in ops:
        if not op.is_hermitian():
            raise ValueError(f"generator {op.label} is not Hermitian")
    mat = qfim_trajectory(psi[:, None], ops)[0]
    return QfimResult(n, float(chi_t), mat)


def qfim_trajectory(states, ops):
    """QFIM for each column of ``states``; returns an array ``(T, k, k)``."""
    states = np.asarray(states, dtype=complex)
    g = [op.matrix @ states for op in ops]
    means = np.array([np.einsum("it,it->t", states.conj(), x).real for x in g])
    k = len(ops)
    out = np.empty((states.shape[1], k, k))
    for i in range(k):
        for j in range(i, k):
            sym = np.einsum("it,it->t", g[i].conj(), g[j]).real
            out[:, i, j] = out[:, j, i] = 4 * (sym - means[i] * means[j])
    return out


def _infer_n(dim):
    n = 1
    while (n + 1) * (n + 2) * (n + 3) // 6 < dim:
        n += 1
    if (n + 1) * (n + 2) * (n + 3) // 6 != dim:
        raise ValueError(f"{dim} is not a four-mode basis dimension")
    return n


@dataclass(frozen=True)
class WitnessReport:
    n_atoms: int
    diagonal: dict
    off_diagonal: dict
    diagonal_values: dict
    off_diagonal_values: dict
    tol_witness: float

    @property
    def any_entangled(self):
        return any(self.off_diagonal.values())


def entanglement_witness(q, tol_witness=None):
    """Squeezing witness ``F^ii/N^2 > 1/N`` and J-K covariance witness ``|F^ij| > tol``."""
    n = q.n_atoms
    tol = 1e-6 * n ** 2 if tol_witness is None else tol_witness
    diag_vals = {lab: q.matrix[k, k] / n ** 2 for k, lab in enumerate(GENERATOR_LABELS)}
    # the coherent state sits exactly on the boundary, so demand a clear excess
    diag = {lab: bool(v > (1 + 1e-9) / n) for lab, v in diag_vals.items()}
    off_vals, off = {}, {}
    for i in range(3):
        for j in range(3, 6):
            key = (GENERATOR_LABELS[i], GENERATOR_LABELS[j])
            off_vals[key] = float(q.matrix[i, j])
            off[key] = bool(abs(q.matrix[i, j]) > tol)
    return WitnessReport(n, diag, off, diag_vals, off_vals, tol)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Joint distribution of a (J-axis, K-axis) measurement.

    ``probs[i, j]`` is the probability of ``m_j[i]`` and ``m_k[j]``, both
    running from ``-N/2`` to ``N/2``. The canonical flat order is row-major.
    """

    labels: tuple
    m_j: np.ndarray
    m_k: np.ndarray
    probs: np.ndarray

    @property
    def flat(self):
        return self.probs.ravel()

    def outcomes(self):
        return [(float(a), float(b)) for a in self.m_j for b in self.m_k]

    def marginal(self, which):
        if which in ("J", 0):
            return self.probs.sum(axis=1)
        if which in ("K", 1):
            return self.probs.sum(axis=0)
        raise ValueError(f"unknown marginal {which!r}")

    def total(self):
        return float(self.probs.sum())


_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def axis_vector(spec):
    """Unit vector for ``'x' | 'y' | 'z'`` or any 3-vector."""
    if isinstance(spec, str):
        v = np.array(_AXES[spec.lower()])
    else:
        v = np.asarray(spec, dtype=float)
    norm = np.linalg.norm(v)
    if v.shape != (3,) or norm == 0:
        raise ValueError(f"bad axis {spec!r}")
    return v / norm


def _parse_obs(item):
    if isinstance(item, str):
        fam, ax = item[0], item[1:]
        return fam, axis_vector(ax)
    fam, ax = item
    return fam, axis_vector(ax)


def _rotate_to_z(psi, n, fam, axis):
    """Apply ``R^+`` with ``R = exp(-i phi Fz) exp(-i theta Fy)`` so that ``n.F -> Fz``."""
    theta = np.arccos(np.clip(axis[2], -1, 1))
    phi = np.arctan2(axis[1], axis[0])
    if phi != 0:
        psi = cached_operator(n, fam + "z").spectral.expm(psi, -phi)
    if theta != 0:
        psi = cached_operator(n, fam + "y").spectral.expm(psi, -theta)
    return psi


def outcome_index(n):
    """Per-basis-state ``(2 m_J + N, 2 m_K + N) // 2`` index pairs of Jz and Kz."""
    occ = enumerate_basis(n).occupations
    two_jz = occ[:, 0] + occ[:, 2] - occ[:, 1] - occ[:, 3]
    two_kz = occ[:, 0] + occ[:, 3] - occ[:, 1] - occ[:, 2]
    return (two_jz + n) // 2, (two_kz + n) // 2


def joint_outcome_distribution(state, pair=("Jx", "Kz")):
    """Probabilities of simultaneous eigenvalues of a J observable and a K observable.

    ``pair`` holds one J and one K item, each a label like ``'Jx'`` or a
    ``(family, axis_vector)`` tuple. The state is rotated so both observables
    become ``Jz`` and ``Kz``, which are diagonal in the Fock basis.
    """
    psi = _amps(state)
    n = state.basis_n if isinstance(state, StateVector) else _infer_n(len(psi))
    (fa, va), (fb, vb) = (_parse_obs(p) for p in pair)
    if {fa, fb} != {"J", "K"}:
        raise ValueError(f"observables {pair!r} do not commute: need one J and one K")
    if fa == "K":
        (fa, va), (fb, vb) = (fb, vb), (fa, va)
    psi = _rotate_to_z(psi, n, "J", va)
    psi = _rotate_to_z(psi, n, "K", vb)
    ij, ik = outcome_index(n)
    probs = np.zeros((n + 1, n + 1))
    np.add.at(probs, (ij, ik), np.abs(psi) ** 2)
    m = np.arange(n + 1) - n / 2
    return OutcomeDistribution(tuple(str(p) if isinstance(p, str) else p[0] for p in pair), m, m.copy(), probs)


@dataclass(frozen=True)
class CfiResult:
    value: float
    excluded_mass: float
    n_outcomes: int


def classical_fisher(p_plus, p_minus, p0, h, p_min=P_MIN):
    """Central-difference ``sum_j (dP_j)^2 / P_j``, skipping ``P_j < p_min``."""
    p_plus, p_minus, p0 = (np.asarray(x, dtype=float).ravel() for x in (p_plus, p_minus, p0))
    if min(p_plus.min(), p_minus.min()) < -1e-12:
        raise ValueError("finite-difference step produced negative probabilities")
    keep = p0 >= p_min
    dp = (p_plus - p_minus) / (2 * h)
    val = float(np.sum(dp[keep] ** 2 / p0[keep]))
    return CfiResult(val, float(p0[~keep].sum()), int(keep.sum()))


def _as_probs(x, which):
    if isinstance(x, OutcomeDistribution):
        return x.flat if which is None else x.marginal(which)
    return np.asarray(x, dtype=float)


def cfi_marginal(prob_model, phi, which=None, h=H_FD, p_min=P_MIN):
    """Classical Fisher information of ``prob_model`` with respect to one phase.

    ``prob_model(phi)`` returns a probability vector or an
    ``OutcomeDistribution``; in the latter case ``which`` (``'J'``/``'K'``)
    selects the marginal, and ``None`` keeps the joint outcomes.
    """
    p0 = _as_probs(prob_model(phi), which)
    pp = _as_probs(prob_model(phi + h), which)
    pm = _as_probs(prob_model(phi - h), which)
    return classical_fisher(pp, pm, p0, h, p_min)


def cfi_matrix(prob_model, phis, h=H_FD, p_min=P_MIN):
    """Classical Fisher information matrix of a joint model ``prob_model(*phis)``."""
    phis = np.asarray(phis, dtype=float)
    p0 = _as_probs(prob_model(*phis), None)
    derivs = []
    for k in range(len(phis)):
        e = np.zeros_like(phis)
        e[k] = h
        pp = _as_probs(prob_model(*(phis + e)), None)
        pm = _as_probs(prob_model(*(phis - e)), None)
        derivs.append((pp - pm) / (2 * h))
    keep = p0 >= p_min
    k = len(phis)
    out = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            out[i, j] = np.sum(derivs[i][keep] * derivs[j][keep] / p0[keep])
    return out


def k_top_probability(state):
    """Probability of ``Kz = +N/2``: weight on Fock states with no atom in ``|-1>``."""
    psi = _amps(state)
    n = state.basis_n if isinstance(state, StateVector) else _infer_n(len(psi))
    occ = enumerate_basis(n).occupations
    mask = (occ[:, 1] == 0) & (occ[:, 2] == 0)
    return float(np.sum(np.abs(psi[mask]) ** 2))


@dataclass(frozen=True)
class FidelityBound:
    value: float
    phi: float
    p: float
    shifted: bool


def fidelity_bound_cfi(p_model, phi1, h=H_FD, offset=1e-3, p_min=P_MIN):
    """CFI of the binary outcome {Kz = N/2, otherwise}.

    ``p_model(phi)`` returns ``p_{N/2}``. When ``p`` is 0 or 1 at ``phi1``
    (within ``p_min``) the bound is evaluated at ``phi1 + offset`` instead.
    """
    phi = phi1
    p0 = p_model(phi)
    shifted = False
    if p0 < p_min or 1 - p0 < p_min:
        phi = phi1 + offset
        p0 = p_model(phi)
        shifted = True
    pp, pm = p_model(phi + h), p_model(phi - h)
    res = classical_fisher([pp, 1 - pp], [pm, 1 - pm], [p0, 1 - p0], h, p_min)
    return FidelityBound(res.value, phi, p0, shifted)
