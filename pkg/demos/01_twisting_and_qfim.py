"""Entangling momentum and internal state with cavity-mediated twisting.

Start from |+>^N (x) |+1>^N, evolve under H = chi E+ E-, and watch the
quantum Fisher information matrix grow. Diagonal entries above N show
squeezing in one degree of freedom; the Jx-Kz covariance F16 shows
entanglement between the two.
"""
import numpy as np

from su4squeeze import (GENERATOR_LABELS, cached_hamiltonian, enumerate_basis, entanglement_witness,
                        initial_state, qfim)
from su4squeeze.analysis import find_t_max

N = 20
basis = enumerate_basis(N)
psi0 = initial_state(basis)
H = cached_hamiltonian(N, "lab")
print(f"N = {N}: the symmetric sector has {basis.dim} Fock states instead of 4^N = {4 ** N:.2e}")

print("\nchi t    " + "  ".join(f"{g:>6}" for g in GENERATOR_LABELS) + "     F16")
for t in np.linspace(0, np.pi, 9):
    psi = psi0.with_amplitudes(H.spectral.expm(psi0.amplitudes, t))
    f = qfim(psi, chi_t=t)
    diag = "  ".join(f"{f.F(k, k) / N ** 2:6.3f}" for k in range(1, 7))
    print(f"{t:5.3f}   {diag}  {f.F(1, 6):7.2f}")

psi = psi0.with_amplitudes(H.spectral.expm(psi0.amplitudes, np.pi / 4))
w = entanglement_witness(qfim(psi, chi_t=np.pi / 4))
print("\nat chi t = pi/4, generators beating the product-state bound 1/N:",
      [g for g, ok in w.diagonal.items() if ok])

tm = find_t_max(N)
print(f"the Jx-Kz covariance peaks at chi t = {tm.t_max:.4f} (N^-0.4 = {N ** -0.4:.4f})")
print(f"the state returns after chi t = pi: fidelity "
      f"{psi0.with_amplitudes(H.spectral.expm(psi0.amplitudes, np.pi)).fidelity(psi0):.12f}")
