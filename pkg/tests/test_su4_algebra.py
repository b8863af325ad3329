import numpy as np
import pytest
import scipy.sparse as sp

from su4squeeze.fock_basis import enumerate_basis
from su4squeeze.su4_algebra import (LABELS, OBSERVABLE_LABELS, ModelParams, OperatorMatrix,
                                    bilinear, collective_operator, commutator, export_operator,
                                    generators, hamiltonian, load_operator, mode_operator,
                                    verify_algebra)


def truncated_modes(n):
    """Dense a, b, c, d on the (n+1)^4 product Fock space plus the fixed-N embedding."""
    d = n + 1
    low = np.diag(np.sqrt(np.arange(1, d)), 1)
    eye = np.eye(d)
    modes = []
    for k in range(4):
        factors = [eye] * 4
        factors[k] = low
        m = factors[0]
        for f in factors[1:]:
            m = np.kron(m, f)
        modes.append(m)
    b = enumerate_basis(n)
    cols = [((s.alpha * d + s.beta) * d + s.gamma) * d + s.delta for s in b.states]
    iso = np.zeros((d ** 4, b.dim))
    iso[cols, np.arange(b.dim)] = 1
    return dict(zip("abcd", modes)), iso


def oracle(n):
    m, iso = truncated_modes(n)
    a, b, c, d = (m[k] for k in "abcd")
    dag = {k: v.T for k, v in m.items()}
    jm = a @ dag["d"] + c @ dag["b"]
    km = a @ dag["c"] + d @ dag["b"]
    ep = dag["a"] @ b + dag["c"] @ d
    num = {k: dag[k] @ m[k] for k in "abcd"}
    full = {
        "Jm": jm, "Jp": jm.T, "Km": km, "Kp": km.T, "Ep": ep, "Em": ep.T,
        "Jz": (num["a"] + num["c"] - num["b"] - num["d"]) / 2,
        "Kz": (num["a"] + num["d"] - num["b"] - num["c"]) / 2,
        "Jx": (jm + jm.T) / 2, "Jy": 1j * (jm - jm.T) / 2,
        "Kx": (km + km.T) / 2, "Ky": 1j * (km - km.T) / 2,
        "Ne": num["a"] + num["c"], "Ng": num["b"] + num["d"],
        "Np1": num["a"] + num["d"], "Nm1": num["b"] + num["c"],
    }
    return {k: iso.T @ v @ iso for k, v in full.items()}


@pytest.mark.parametrize("n", [1, 2, 3])
def test_collective_operators_match_truncated_oracle(n):
    ref = oracle(n)
    basis = enumerate_basis(n)
    for label, mat in ref.items():
        got = collective_operator(basis, label).toarray()
        np.testing.assert_allclose(got, mat, atol=1e-13, err_msg=label)


def test_diagonal_examples():
    b = enumerate_basis(1)
    jz = collective_operator(b, "Jz").toarray()
    kz = collective_operator(b, "Kz").toarray()
    assert jz[0, 0] == 0.5
    assert kz[0, 0] == 0.5
    assert kz[1, 1] == -0.5


def test_bilinear_matrix_elements():
    b1 = enumerate_basis(1)
    adag_b = bilinear(b1, "a", "b").toarray()
    assert adag_b[b1.index((1, 0, 0, 0)), b1.index((0, 1, 0, 0))] == pytest.approx(1.0)
    b2 = enumerate_basis(2)
    m = bilinear(b2, "a", "b").toarray()
    assert m[b2.index((1, 1, 0, 0)), b2.index((0, 2, 0, 0))] == pytest.approx(np.sqrt(2))


def test_mode_operator_changes_particle_number():
    b = enumerate_basis(2)
    a = mode_operator(b, "a", "annihilate")
    ad = mode_operator(enumerate_basis(1), "a", "create")
    prod = (ad.matrix @ a.matrix).toarray()
    np.testing.assert_allclose(prod, bilinear(b, "a", "a").toarray(), atol=1e-14)


def test_vacuum_annihilation_gives_zero_column():
    b = enumerate_basis(2)
    a = mode_operator(b, "a", "annihilate").matrix.toarray()
    assert np.all(a[:, b.index((0, 2, 0, 0))] == 0)


@pytest.mark.parametrize("bad", [("e", "create"), ("a", "raise")])
def test_mode_operator_rejects_bad_tags(bad):
    with pytest.raises(ValueError):
        mode_operator(enumerate_basis(1), *bad)


def test_unknown_label_rejected():
    with pytest.raises(ValueError):
        collective_operator(enumerate_basis(1), "Lz")


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(chi=0.0, n_atoms=2)
    with pytest.raises(ValueError):
        ModelParams(chi=1.0, n_atoms=0)


def test_hamiltonian_single_atom():
    b = enumerate_basis(1)
    h = hamiltonian(b, ModelParams(chi=1.0, n_atoms=1)).toarray()
    e0 = np.zeros(4)
    e0[b.index((1, 0, 0, 0))] = 1
    np.testing.assert_allclose(h @ e0, e0)
    e1 = np.zeros(4)
    e1[b.index((0, 1, 0, 0))] = 1
    np.testing.assert_allclose(h @ e1, 0)


@pytest.mark.parametrize("n", range(1, 7))
def test_hamiltonian_identities(n):
    b = enumerate_basis(n)
    ep, em, e2, jz = (collective_operator(b, k).matrix for k in ("Ep", "Em", "E2", "Jz"))
    chi = 0.7
    lab = hamiltonian(b, ModelParams(chi, n), "lab").matrix
    inter = hamiltonian(b, ModelParams(chi, n), "interaction").matrix
    assert abs(lab - chi * (ep @ em)).max() < 1e-12
    assert abs(lab - chi * (e2 - jz @ jz + jz)).max() < 1e-12
    assert abs(inter - chi * (e2 - jz @ jz)).max() < 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_verify_algebra_passes(n):
    rep = verify_algebra(enumerate_basis(n))
    assert rep["passed"], rep["failures"]
    assert rep["residuals"]["[Jx,Kz]=0"] <= 1e-12
    assert rep["residuals"]["[H_lab,Jz]=0"] <= 1e-12
    assert rep["residuals"]["[H_lab,Kx]=0"] <= 1e-12


def test_verify_algebra_detects_sign_fault():
    b = enumerate_basis(3)
    bad = -1 * collective_operator(b, "Km")
    rep = verify_algebra(b, {"Km": bad})
    assert not rep["passed"]
    assert "[Kp,Km]=2Kz" in rep["failures"]


def test_k_lowering_convention():
    # K- = a c^+ + d b^+ lowers Kz and closes with K+ into 2 Kz
    b = enumerate_basis(3)
    kp, km, kz = (collective_operator(b, k) for k in ("Kp", "Km", "Kz"))
    assert abs(commutator(kp, km).matrix - 2 * kz.matrix).max() < 1e-12
    assert abs(commutator(kz, km).matrix + km.matrix).max() < 1e-12


@pytest.mark.parametrize("n", range(1, 7))
def test_casimir_shells(n):
    e2 = collective_operator(enumerate_basis(n), "E2").toarray()
    ev = np.linalg.eigvalsh(e2)
    e = (-1 + np.sqrt(1 + 4 * np.clip(ev, 0, None))) / 2
    assert np.all(ev > -1e-10)
    assert np.allclose(2 * e, np.round(2 * e), atol=1e-8)
    assert e.max() <= n / 2 + 1e-9


@pytest.mark.parametrize("n", [1, 3, 5])
def test_number_identities(n):
    b = enumerate_basis(n)
    eye = np.eye(b.dim) * n
    ne, ng, np1, nm1 = (collective_operator(b, k).toarray() for k in ("Ne", "Ng", "Np1", "Nm1"))
    np.testing.assert_allclose(ne + ng, eye)
    np.testing.assert_allclose(np1 + nm1, eye)


def test_observables_hermitian_and_ladders_adjoint():
    b = enumerate_basis(4)
    ops = {k: collective_operator(b, k) for k in LABELS if k not in ("H_lab", "H_int")}
    for k in OBSERVABLE_LABELS - {"H_lab", "H_int"}:
        assert ops[k].is_hermitian(), k
    for fam in "JKE":
        assert abs(ops[fam + "p"].matrix - ops[fam + "m"].matrix.conj().T).max() < 1e-14


def test_generators_order():
    g = generators(enumerate_basis(2))
    assert [op.label for op in g] == ["Jx", "Jy", "Jz", "Kx", "Ky", "Kz"]


def test_operator_arithmetic():
    b = enumerate_basis(2)
    jx, jy = collective_operator(b, "Jx"), collective_operator(b, "Jy")
    s = jx + jy
    assert isinstance(s, OperatorMatrix)
    np.testing.assert_allclose((2 * s - jy).toarray(), (2 * jx + jy).toarray())
    np.testing.assert_allclose((jx @ jy).toarray(), jx.toarray() @ jy.toarray(), atol=1e-14)
    np.testing.assert_allclose((-jx).toarray(), -jx.toarray())


def test_operator_basis_mismatch():
    with pytest.raises(ValueError):
        collective_operator(enumerate_basis(2), "Jx") + collective_operator(enumerate_basis(3), "Jx")


def test_export_round_trip(tmp_path):
    op = collective_operator(enumerate_basis(3), "Ky")
    path = tmp_path / "ky.txt"
    export_operator(op, path)
    text = path.read_text()
    assert text.startswith("# basis_order=")
    assert "# N=3" in text and "# label=Ky" in text
    back = load_operator(path)
    assert back.label == "Ky" and back.basis_n == 3
    assert abs(back.matrix - op.matrix).max() == 0


def test_matrices_are_sorted_csr():
    m = collective_operator(enumerate_basis(3), "Jx").matrix
    assert sp.isspmatrix_csr(m) or isinstance(m, sp.csr_array)
    assert m.has_sorted_indices
