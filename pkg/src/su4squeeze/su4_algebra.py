"""Collective su(4) operators over the fixed-N Schwinger-boson basis.

Three su(2) sub-algebras live inside su(4):

* internal state ``J``: ``J- = a d^+ + c b^+``
* momentum ``K``: ``K- = a c^+ + d b^+``
* emission/absorption ``E``: ``E+ = a^+ b + c^+ d``

with ``Jz = (n_e - n_g)/2`` and ``Kz = (n_+1 - n_-1)/2``. The lab-frame
Hamiltonian is ``chi E+ E-``. Raising operators are the adjoints of the
lowering ones, and with this convention ``[Kp, Km] = 2 Kz`` holds.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .fock_basis import FockBasis, enumerate_basis

__all__ = [
    "TOL_ALG", "MODES", "LABELS", "OBSERVABLE_LABELS", "ModelParams", "OperatorMatrix",
    "LadderOperator", "mode_operator", "bilinear", "collective_operator", "hamiltonian",
    "generators", "commutator", "verify_algebra", "export_operator", "load_operator",
]

TOL_ALG = 1e-12

MODES = "abcd"

LABELS = (
    "Jx", "Jy", "Jz", "Jp", "Jm", "Kx", "Ky", "Kz", "Kp", "Km",
    "Ep", "Em", "E2", "Ne", "Ng", "Np1", "Nm1", "H_lab", "H_int",
)
OBSERVABLE_LABELS = frozenset(
    ["Jx", "Jy", "Jz", "Kx", "Ky", "Kz", "E2", "Ne", "Ng", "Np1", "Nm1", "H_lab", "H_int"])

# (create, annihilate) mode pairs for each lowering/raising generator
_LADDER_TERMS = {
    "Jm": [("d", "a"), ("b", "c")],
    "Jp": [("a", "d"), ("c", "b")],
    "Km": [("c", "a"), ("b", "d")],
    "Kp": [("a", "c"), ("d", "b")],
    "Ep": [("a", "b"), ("c", "d")],
    "Em": [("b", "a"), ("d", "c")],
}


@dataclass(frozen=True)
class ModelParams:
    chi: float = 1.0
    n_atoms: int = 1

    def __post_init__(self):
        if not self.chi > 0:
            raise ValueError("chi must be positive")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Sparse complex operator on a fixed-N basis.

    ``matrix`` is CSR with sorted indices; rows and columns follow the
    basis order.
    """

    basis_n: int
    label: str
    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def dim(self):
        return self.matrix.shape[0]

    def toarray(self):
        return self.matrix.toarray()

    def dagger(self, label="custom"):
        return _op(self.basis_n, label, self.matrix.conj().T)

    def hermiticity_error(self):
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def is_hermitian(self, tol=TOL_ALG):
        return self.hermiticity_error() <= tol

    @cached_property
    def spectral(self):
        """Block eigendecomposition, built on first use and cached."""
        from .dynamics import BlockSpectrum
        return BlockSpectrum.from_operator(self)

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            _check_same(self, other)
            return _op(self.basis_n, "custom", self.matrix @ other.matrix)
        return self.matrix @ other

    def __add__(self, other):
        _check_same(self, other)
        return _op(self.basis_n, "custom", self.matrix + other.matrix)

    def __sub__(self, other):
        _check_same(self, other)
        return _op(self.basis_n, "custom", self.matrix - other.matrix)

    def __mul__(self, scalar):
        return _op(self.basis_n, "custom", self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def relabel(self, label):
        return OperatorMatrix(self.basis_n, label, self.matrix)


def _check_same(x, y):
    if x.basis_n != y.basis_n:
        raise ValueError(f"basis mismatch: N={x.basis_n} vs N={y.basis_n}")


def _op(n, label, m):
    m = sp.csr_matrix(m, dtype=complex)
    m.sum_duplicates()
    m.sort_indices()
    return OperatorMatrix(n, label, m)


def _as_basis(basis):
    return basis if isinstance(basis, FockBasis) else enumerate_basis(basis)


@dataclass(frozen=True)
class LadderOperator:
    """Single-mode creation or annihilation operator between two fixed-N bases."""

    mode: str
    kind: str
    source: FockBasis
    target: FockBasis
    matrix: sp.csr_matrix

    def __matmul__(self, other):
        if isinstance(other, LadderOperator):
            if other.target.n_atoms != self.source.n_atoms:
                raise ValueError("incompatible ladder operators")
            return self.matrix @ other.matrix
        return self.matrix @ other


def mode_operator(basis, mode, kind):
    """Creation/annihilation operator for one of the modes ``a, b, c, d``.

    The returned operator maps ``basis`` (N atoms) to the basis with one atom
    fewer (``annihilate``) or more (``create``), so products such as
    ``create(a) @ annihilate(b)`` are exact number-conserving operators.
    Annihilating on N=1 targets the vacuum, represented here as a
    one-element space.
    """
    basis = _as_basis(basis)
    if mode not in MODES or len(mode) != 1:
        raise ValueError(f"unknown mode {mode!r}")
    if kind not in ("annihilate", "create"):
        raise ValueError(f"unknown kind {kind!r}")
    m = MODES.index(mode)
    occ = basis.occupations
    step = -1 if kind == "annihilate" else 1
    n_target = basis.n_atoms + step
    if n_target == 0:
        target_states = [(0, 0, 0, 0)]
        target = FockBasis(0, ((0, 0, 0, 0),), {(0, 0, 0, 0): 0}, np.zeros((1, 4), np.int64))
    else:
        target = enumerate_basis(n_target)
        target_states = None
    rows, cols, vals = [], [], []
    for j, s in enumerate(occ):
        n = s[m]
        amp = np.sqrt(n) if kind == "annihilate" else np.sqrt(n + 1)
        if amp == 0:
            continue
        new = list(int(x) for x in s)
        new[m] += step
        new = tuple(new)
        i = target_states.index(new) if target_states else target.index_map[new]
        rows.append(i)
        cols.append(j)
        vals.append(amp)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(len(target.states), basis.dim), dtype=complex)
    return LadderOperator(mode, kind, basis, target, mat)


def bilinear(basis, create, annihilate, label="custom"):
    """Number-conserving ``create^+ annihilate`` built directly on the basis."""
    basis = _as_basis(basis)
    i, j = MODES.index(create), MODES.index(annihilate)
    occ = basis.occupations
    if i == j:
        return _op(basis.n_atoms, label, sp.diags(occ[:, i].astype(complex)))
    src = np.nonzero(occ[:, j] > 0)[0]
    new = occ[src].copy()
    amp = np.sqrt(new[:, j].astype(float))
    new[:, j] -= 1
    amp = amp * np.sqrt(new[:, i] + 1.0)
    new[:, i] += 1
    rows = np.fromiter((basis.index_map[tuple(int(x) for x in s)] for s in new), np.int64, len(new))
    dim = basis.dim
    return _op(basis.n_atoms, label, sp.csr_matrix((amp, (rows, src)), shape=(dim, dim)))


def _number(basis, modes, label):
    occ = basis.occupations
    diag = sum(occ[:, MODES.index(m)] for m in modes).astype(complex)
    return _op(basis.n_atoms, label, sp.diags(diag))


def _ladder(basis, label):
    terms = _LADDER_TERMS[label]
    m = sum(bilinear(basis, c, a).matrix for c, a in terms)
    return _op(basis.n_atoms, label, m)


def _diag_z(basis, plus, minus, label):
    occ = basis.occupations
    val = 0.5 * (sum(occ[:, MODES.index(m)] for m in plus) - sum(occ[:, MODES.index(m)] for m in minus))
    return _op(basis.n_atoms, label, sp.diags(val.astype(complex)))


def collective_operator(basis, label):
    """Collective operator named by ``label`` (see ``LABELS``).

    ``Jx = (Jp + Jm)/2`` and ``Jy = i(Jm - Jp)/2``, likewise for ``K``.
    ``E2 = Ep Em + Jz^2 - Jz`` is the Casimir of the emission algebra.
    """
    basis = _as_basis(basis)
    n = basis.n_atoms
    if label in _LADDER_TERMS:
        return _ladder(basis, label)
    if label == "Jz":
        return _diag_z(basis, "ac", "bd", label)
    if label == "Kz":
        return _diag_z(basis, "ad", "bc", label)
    if label in ("Jx", "Kx", "Jy", "Ky"):
        fam = label[0]
        p = _ladder(basis, fam + "p").matrix
        m = _ladder(basis, fam + "m").matrix
        mat = 0.5 * (p + m) if label[1] == "x" else 0.5j * (m - p)
        return _op(n, label, mat)
    if label == "Ne":
        return _number(basis, "ac", label)
    if label == "Ng":
        return _number(basis, "bd", label)
    if label == "Np1":
        return _number(basis, "ad", label)
    if label == "Nm1":
        return _number(basis, "bc", label)
    if label == "E2":
        ep, em = _ladder(basis, "Ep").matrix, _ladder(basis, "Em").matrix
        jz = _diag_z(basis, "ac", "bd", "Jz").matrix
        return _op(n, label, ep @ em + jz @ jz - jz)
    if label in ("H_lab", "H_int"):
        return hamiltonian(basis, ModelParams(1.0, n), "lab" if label == "H_lab" else "interaction")
    raise ValueError(f"unknown operator label {label!r}")


def hamiltonian(basis, params=None, picture="lab"):
    """Twisting Hamiltonian in the lab or the Jz-removed interaction picture.

    lab: ``chi Ep Em``; interaction: ``chi (E2 - Jz^2)``.
    """
    basis = _as_basis(basis)
    chi = 1.0 if params is None else params.chi
    if picture == "lab":
        ep = _ladder(basis, "Ep").matrix
        em = _ladder(basis, "Em").matrix
        return _op(basis.n_atoms, "H_lab", chi * (ep @ em))
    if picture == "interaction":
        e2 = collective_operator(basis, "E2").matrix
        jz = collective_operator(basis, "Jz").matrix
        return _op(basis.n_atoms, "H_int", chi * (e2 - jz @ jz))
    raise ValueError(f"unknown picture {picture!r}")


def generators(basis):
    """The six QFIM generators in index order Jx, Jy, Jz, Kx, Ky, Kz."""
    basis = _as_basis(basis)
    return [collective_operator(basis, lab) for lab in ("Jx", "Jy", "Jz", "Kx", "Ky", "Kz")]


def commutator(x, y):
    """``[x, y]`` as an operator on the same basis."""
    _check_same(x, y)
    return _op(x.basis_n, "custom", x.matrix @ y.matrix - y.matrix @ x.matrix)


def _maxabs(m):
    m = sp.csr_matrix(m)
    m.eliminate_zeros()
    return float(abs(m).max()) if m.nnz else 0.0


def verify_algebra(basis, operators=None, tol=TOL_ALG):
    """Check the su(2) relations, cross-commutators and Hamiltonian identities.

    ``operators`` may override any built operator by label (used to inject
    faults). Returns a dict with one residual per identity, the list of
    failures and an overall ``passed`` flag.
    """
    basis = _as_basis(basis)
    ops = {lab: collective_operator(basis, lab) for lab in
           ("Jx", "Jy", "Jz", "Jp", "Jm", "Kx", "Ky", "Kz", "Kp", "Km", "Ep", "Em", "E2")}
    ops["H_lab"] = hamiltonian(basis, picture="lab")
    ops["H_int"] = hamiltonian(basis, picture="interaction")
    if operators:
        ops.update(operators)
    M = {k: v.matrix for k, v in ops.items()}

    def comm(x, y):
        return M[x] @ M[y] - M[y] @ M[x]

    res = {}
    for fam in ("J", "K"):
        z, p, m = fam + "z", fam + "p", fam + "m"
        res[f"[{p},{m}]=2{z}"] = _maxabs(comm(p, m) - 2 * M[z])
        res[f"[{z},{p}]={p}"] = _maxabs(comm(z, p) - M[p])
        res[f"[{z},{m}]=-{m}"] = _maxabs(comm(z, m) + M[m])
        res[f"{p}=({m})^+"] = _maxabs(M[p] - M[m].conj().T)
    res["[Ep,Em]=2Jz"] = _maxabs(comm("Ep", "Em") - 2 * M["Jz"])
    res["[Jz,Ep]=Ep"] = _maxabs(comm("Jz", "Ep") - M["Ep"])
    res["[Jz,Em]=-Em"] = _maxabs(comm("Jz", "Em") + M["Em"])
    res["Ep=(Em)^+"] = _maxabs(M["Ep"] - M["Em"].conj().T)
    for a in "xyz":
        for b in "xyz":
            res[f"[J{a},K{b}]=0"] = _maxabs(comm("J" + a, "K" + b))
    jz = M["Jz"]
    res["H_lab=Ep Em"] = _maxabs(M["H_lab"] - M["Ep"] @ M["Em"])
    res["H_lab=E2-Jz^2+Jz"] = _maxabs(M["H_lab"] - (M["E2"] - jz @ jz + jz))
    res["H_int=E2-Jz^2"] = _maxabs(M["H_int"] - (M["E2"] - jz @ jz))
    for h in ("H_lab", "H_int"):
        res[f"[{h},Jz]=0"] = _maxabs(comm(h, "Jz"))
        res[f"[{h},Kx]=0"] = _maxabs(comm(h, "Kx"))
    for lab in ("Jx", "Jy", "Jz", "Kx", "Ky", "Kz", "E2", "H_lab", "H_int"):
        res[f"{lab} hermitian"] = _maxabs(M[lab] - M[lab].conj().T)
    failures = [k for k, v in res.items() if not v <= tol]
    return {"n_atoms": basis.n_atoms, "tol": tol, "residuals": res,
            "failures": failures, "passed": not failures}


def export_operator(op, path=None):
    """Serialize as sparse triplets ``row,col,re,im`` after a ``#`` header."""
    m = op.matrix.tocoo()
    lines = [
        "# basis_order=lex_desc(alpha,beta,gamma)",
        f"# N={op.basis_n}",
        f"# label={op.label}",
        f"# shape={m.shape[0]},{m.shape[1]}",
        "row,col,re,im",
    ]
    order = np.lexsort((m.col, m.row))
    for k in order:
        v = m.data[k]
        lines.append(f"{m.row[k]},{m.col[k]},{v.real:.17g},{v.imag:.17g}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_operator(path_or_text):
    """Inverse of ``export_operator``; accepts a path or the text itself."""
    text = str(path_or_text)
    if "\n" not in text:
        with open(path_or_text) as fh:
            text = fh.read()
    meta, rows, cols, vals = {}, [], [], []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
        elif line and not line.startswith("row"):
            r, c, re_, im = line.split(",")
            rows.append(int(r))
            cols.append(int(c))
            vals.append(complex(float(re_), float(im)))
    dim = [int(x) for x in meta["shape"].split(",")]
    mat = sp.csr_matrix((vals, (rows, cols)), shape=tuple(dim), dtype=complex)
    return _op(int(meta["N"]), meta["label"], mat)
