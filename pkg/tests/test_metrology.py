import numpy as np
import pytest
import scipy.linalg as la
from scipy.special import comb

from conftest import evolved, random_state
from su4squeeze.dynamics import (apply_rotation, cached_hamiltonian, cached_operator, evolve,
                                 initial_state)
from su4squeeze.fock_basis import enumerate_basis
from su4squeeze.interferometry import SchemeConfig, encode_signal, fidelity_curve, prepare_probe
from su4squeeze.metrology import (GENERATOR_LABELS, QfimResult, axis_vector, cfi_marginal,
                                  cfi_matrix, classical_fisher, entanglement_witness, expectation,
                                  fidelity_bound_cfi, joint_outcome_distribution,
                                  k_top_probability, qfim, qfim_trajectory)


def bures_qfim(psi, ops, eps=1e-4):
    """Oracle from the fidelity of a small rotation: 1 - |<psi|e^{-i eps G}psi>|^2 = eps^2 F / 4."""
    def f(g):
        u = la.expm(-1j * eps * g)
        return 4 * (1 - abs(np.vdot(psi, u @ psi)) ** 2) / eps ** 2
    dense = [op.toarray() for op in ops]
    k = len(dense)
    out = np.empty((k, k))
    for i in range(k):
        out[i, i] = f(dense[i])
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = (f(dense[i] + dense[j]) - out[i, i] - out[j, j]) / 2
    return out


def projector_distribution(psi, n, jvec, kvec):
    """Oracle: eigenprojections of n.J + (N+1) m.K, which separates every outcome pair."""
    j = sum(c * cached_operator(n, "J" + a).toarray() for c, a in zip(jvec, "xyz"))
    k = sum(c * cached_operator(n, "K" + a).toarray() for c, a in zip(kvec, "xyz"))
    ev, vec = np.linalg.eigh(j + (n + 1) * k)
    w = np.abs(vec.conj().T @ psi) ** 2
    probs = np.zeros((n + 1, n + 1))
    for e, p in zip(ev, w):
        mk = np.round(e / (n + 1))
        mj = e - (n + 1) * mk
        probs[int(round(mj + n / 2)), int(round(mk + n / 2))] += p
    return probs


def test_qfim_matches_bures_oracle(rng):
    n = 4
    psi = evolved(n, 0.6)
    ops = [cached_operator(n, lab) for lab in GENERATOR_LABELS]
    np.testing.assert_allclose(qfim(psi).matrix, bures_qfim(psi.amplitudes, ops), atol=2e-5)
    r = random_state(3, rng)
    ops3 = [cached_operator(3, lab) for lab in GENERATOR_LABELS]
    np.testing.assert_allclose(qfim(r).matrix, bures_qfim(r.amplitudes, ops3), atol=2e-5)


@pytest.mark.parametrize("n", [2, 7, 20])
def test_qfim_initial_state(n):
    q = qfim(initial_state(enumerate_basis(n)))
    assert q.F(1, 1) == pytest.approx(0, abs=1e-10)
    assert q.F(2, 2) == pytest.approx(n, abs=1e-10)
    assert q.F(5, 5) == pytest.approx(n, abs=1e-10)
    assert q.F(6, 6) == pytest.approx(0, abs=1e-10)
    assert np.max(np.abs(q.matrix[:3, 3:])) < 1e-10


def test_qfim_symmetric_psd(rng):
    q = qfim(random_state(5, rng)).matrix
    assert np.allclose(q, q.T)
    assert np.linalg.eigvalsh(q).min() > -1e-9


def test_qfim_trajectory_matches_pointwise():
    n = 6
    psi0 = initial_state(enumerate_basis(n)).amplitudes
    ts = np.array([0.2, 1.1])
    ops = [cached_operator(n, lab) for lab in GENERATOR_LABELS]
    traj = qfim_trajectory(cached_hamiltonian(n).spectral.expm_many(psi0, ts), ops)
    for k, t in enumerate(ts):
        np.testing.assert_allclose(traj[k], qfim(evolved(n, t)).matrix, atol=1e-10)


def test_conserved_generators_have_constant_qfim():
    n = 10
    ref = qfim(initial_state(enumerate_basis(n)))
    for t in (0.3, 1.0, 2.2):
        q = qfim(evolved(n, t))
        assert q.F(3, 3) == pytest.approx(ref.F(3, 3), abs=1e-9)
        assert q.F(4, 4) == pytest.approx(ref.F(4, 4), abs=1e-9)


def test_qfim_rejects_unnormalized():
    psi = initial_state(enumerate_basis(2)).amplitudes * 2
    with pytest.raises(ValueError):
        qfim(psi)


def test_upper_entries_keys():
    e = qfim(initial_state(enumerate_basis(3))).upper_entries()
    assert len(e) == 21 and "F16" in e and "F61" not in e


def test_f11_at_quarter_period_n20():
    q = qfim(evolved(20, np.pi / 4, "lab"))
    target = 0.366 * 400 + 0.793 * 20 - 2.662
    assert abs(q.F(1, 1) / target - 1) < 0.15


def test_covariance_at_n_pow_time_n20():
    q = qfim(evolved(20, 20 ** -0.4, "lab"))
    target = 0.1782 * 400 - 0.02721 * 20
    assert abs(q.F(1, 6) / target - 1) < 0.20
    assert entanglement_witness(q).off_diagonal[("Jx", "Kz")]


@pytest.mark.xfail(strict=True, reason="the simulated F16 at chi t = pi/4 is about half the quoted fit")
def test_covariance_at_quarter_period_n20():
    q = qfim(evolved(20, np.pi / 4, "lab"))
    target = 4.103e-3 * 400 + 0.926 * 20
    assert abs(q.F(1, 6) / target - 1) < 0.20


def test_witness_product_state_is_silent():
    w = entanglement_witness(qfim(initial_state(enumerate_basis(8))))
    assert not any(w.diagonal.values())
    assert not w.any_entangled


def test_witness_on_plateau_n20():
    w = entanglement_witness(qfim(evolved(20, np.pi / 4, "lab")))
    for lab in ("Jx", "Jy", "Ky", "Kz"):
        assert w.diagonal[lab], lab


def test_witness_default_tolerance_scales():
    assert entanglement_witness(qfim(evolved(5, 0.3))).tol_witness == pytest.approx(25e-6)


@pytest.mark.parametrize("n", [3, 6])
def test_joint_distribution_binomial_jz(n):
    d = joint_outcome_distribution(initial_state(enumerate_basis(n)), ("Jz", "Kz"))
    expected = np.zeros((n + 1, n + 1))
    expected[:, n] = [comb(n, k) / 2 ** n for k in range(n + 1)]
    np.testing.assert_allclose(d.probs, expected, atol=1e-12)


def test_joint_distribution_polarized_state():
    n = 5
    d = joint_outcome_distribution(initial_state(enumerate_basis(n)), ("Jx", "Kz"))
    assert d.probs[n, n] == pytest.approx(1, abs=1e-12)
    assert d.total() == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("jvec,kvec", [
    ((1, 0, 0), (0, 0, 1)),
    ((0, 1, 0), (1, 0, 0)),
    ((0.3, -0.5, 0.8), (0.6, 0.1, -0.2)),
])
def test_joint_distribution_matches_projector_oracle(jvec, kvec, rng):
    n = 4
    psi = random_state(n, rng)
    d = joint_outcome_distribution(psi, (("J", jvec), ("K", kvec)))
    ref = projector_distribution(psi.amplitudes, n, axis_vector(jvec), axis_vector(kvec))
    np.testing.assert_allclose(d.probs, ref, atol=1e-10)


def test_joint_distribution_order_independent(rng):
    psi = random_state(3, rng)
    a = joint_outcome_distribution(psi, ("Jx", "Kz"))
    b = joint_outcome_distribution(psi, ("Kz", "Jx"))
    np.testing.assert_allclose(a.probs, b.probs, atol=1e-14)


def test_joint_distribution_rejects_same_family(rng):
    with pytest.raises(ValueError, match="commute"):
        joint_outcome_distribution(random_state(2, rng), ("Jx", "Jz"))


def test_joint_distribution_sums_to_one(rng):
    for n in (2, 5, 9):
        psi = evolved(n, rng.uniform(0, np.pi))
        assert joint_outcome_distribution(psi, ("Jy", "Kx")).total() == pytest.approx(1, abs=1e-9)


def test_cfi_analytic_two_outcome():
    # P = (cos^2(phi/2), sin^2(phi/2)) has unit Fisher information everywhere
    def model(phi):
        return np.array([np.cos(phi / 2) ** 2, np.sin(phi / 2) ** 2])
    for phi in (0.3, 1.0, 2.5):
        assert cfi_marginal(model, phi).value == pytest.approx(1.0, rel=1e-7)


def test_cfi_skips_zero_probability_outcomes():
    res = classical_fisher([0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.5, 0.5, 0.0], 1e-5)
    assert res.value == 0 and res.n_outcomes == 2 and res.excluded_mass == 0


def test_cfi_rejects_negative_probabilities():
    with pytest.raises(ValueError, match="negative"):
        classical_fisher([0.5, -0.1], [0.5, 0.5], [0.5, 0.5], 1e-5)


def test_cfi_matrix_diagonal_matches_marginal(rng):
    n = 4
    psi = random_state(n, rng)

    def model(a, b):
        return joint_outcome_distribution(
            apply_rotation(apply_rotation(psi, cached_operator(n, "Jz"), a), cached_operator(n, "Ky"), b),
            ("Jx", "Kz"))
    m = cfi_matrix(model, [0.2, -0.1])
    assert m[0, 0] == pytest.approx(cfi_marginal(lambda a: model(a, -0.1), 0.2).value, rel=1e-8)
    assert np.allclose(m, m.T)


def test_cfi_bounded_by_qfim(rng):
    n = 5
    psi = evolved(n, 0.7)
    q = qfim(psi)
    for lab, k in (("Jz", 3), ("Ky", 5)):
        g = cached_operator(n, lab)
        val = cfi_marginal(lambda a: joint_outcome_distribution(apply_rotation(psi, g, a), ("Jx", "Kz")),
                           0.13).value
        assert val <= q.F(k, k) + 1e-6


@pytest.fixture(scope="module")
def probe20():
    return prepare_probe(SchemeConfig(n_atoms=20))[0]


def _marginal_cfi(probe, phi3, phi5, which):
    def dist(a, b):
        return joint_outcome_distribution(encode_signal(probe, a, b), ("Jx", "Kz"))
    if which == "J":
        return cfi_marginal(lambda a: dist(a, phi5), phi3, "J").value
    return cfi_marginal(lambda b: dist(phi3, b), phi5, "K").value


def test_cfi_saturates_qfim_for_small_phases(probe20):
    q = qfim(probe20)
    assert _marginal_cfi(probe20, 1e-3, 1e-3, "J") == pytest.approx(q.F(3, 3), rel=0.01)


@pytest.mark.xfail(strict=True, reason="at phi = pi/16 the Jx marginal CFI is about 24, not the quoted fit")
def test_cfi_jz_at_pi_16_n20(probe20):
    assert abs(_marginal_cfi(probe20, np.pi / 16, np.pi / 16, "J") / (0.3184 * 400 + 0.9162 * 20) - 1) < 0.15


@pytest.mark.xfail(strict=True, reason="at phi = pi/16 the Kz marginal CFI is about 16, not the quoted fit")
def test_cfi_ky_at_pi_16_n20(probe20):
    assert abs(_marginal_cfi(probe20, np.pi / 16, np.pi / 16, "K") / (0.2022 * 400 + 1.454 * 20) - 1) < 0.15


@pytest.mark.parametrize("n", [14, 20, 26])
def test_marginal_cfi_fits_reproduced_at_pi_64(n):
    probe = prepare_probe(SchemeConfig(n_atoms=n))[0]
    phi = np.pi / 64
    assert abs(_marginal_cfi(probe, phi, phi, "J") / (0.3184 * n ** 2 + 0.9162 * n) - 1) < 0.05
    assert abs(_marginal_cfi(probe, phi, phi, "K") / (0.2022 * n ** 2 + 1.454 * n) - 1) < 0.05


def test_k_top_probability():
    n = 8
    psi0 = initial_state(enumerate_basis(n))
    assert k_top_probability(psi0) == pytest.approx(1)
    assert k_top_probability(evolve(psi0, cached_hamiltonian(n, "lab"), np.pi)) > 0.999
    d = joint_outcome_distribution(evolved(n, 0.4), ("Jx", "Kz"))
    assert k_top_probability(evolved(n, 0.4)) == pytest.approx(d.marginal("K")[-1], abs=1e-12)


def test_k_top_after_perfect_reversal():
    cfg = SchemeConfig(n_atoms=12, scheme="auxiliary")
    assert fidelity_curve(cfg, np.array([0.0]))[0] == pytest.approx(1, abs=1e-10)


def test_fidelity_bound_shifts_off_degenerate_point():
    cfg = SchemeConfig(n_atoms=10, scheme="auxiliary")
    b = fidelity_bound_cfi(lambda p: float(fidelity_curve(cfg, np.array([p]))[0]), 0.0)
    assert b.shifted and b.phi == pytest.approx(1e-3)
    assert 0 < b.value


def test_fidelity_bound_analytic():
    b = fidelity_bound_cfi(lambda p: np.cos(p / 2) ** 2, 0.7)
    assert not b.shifted
    assert b.value == pytest.approx(1.0, rel=1e-7)


def test_binary_bound_below_qfim():
    n = 16
    cfg = SchemeConfig(n_atoms=n, scheme="auxiliary")
    b = fidelity_bound_cfi(lambda p: float(fidelity_curve(cfg, np.array([p]))[0]), 0.0)
    f11 = qfim(evolved(n, cfg.tau, "interaction")).F(1, 1)
    assert b.value <= f11 + 1e-6


@pytest.mark.xfail(strict=True, reason="the binary-outcome CFI near phi1 = 0 nearly saturates F11")
def test_binary_bound_ratio_about_0_6():
    n = 20
    cfg = SchemeConfig(n_atoms=n, scheme="auxiliary")
    b = fidelity_bound_cfi(lambda p: float(fidelity_curve(cfg, np.array([p]))[0]), 0.0)
    f11 = qfim(evolved(n, cfg.tau, "interaction")).F(1, 1)
    assert abs(b.value / f11 - 0.6) <= 0.15


def test_expectation_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        expectation(initial_state(enumerate_basis(2)), cached_operator(3, "Jz"))


def test_qfim_result_normalized():
    q = QfimResult(4, 0.0, np.eye(6) * 16)
    assert q.normalized()[0, 0] == 1
