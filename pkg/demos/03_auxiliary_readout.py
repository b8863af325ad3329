"""Reading an internal phase through the momentum.

Entangle for chi t = N^-0.4, rotate by phi1 about Jx, undo the entangler and
record the probability that every atom is back in the +1 momentum state.
The peak width of that curve sets the phase sensitivity.
"""
from su4squeeze import SchemeConfig, auxiliary_scheme

print("  N   1/sigma^2   F11 (QFIM)   ratio   binary-readout CFI")
for n in (6, 10, 14, 18, 22):
    res = auxiliary_scheme(SchemeConfig(n_atoms=n, scheme="auxiliary"))
    print(f"{n:3d}   {res.inv_sigma2:9.2f}   {res.qfim_jx:10.2f}   {res.ratio:5.3f}   "
          f"{res.bound.value:10.2f}")

res = auxiliary_scheme(SchemeConfig(n_atoms=14, scheme="auxiliary"))
print("\nN=14 scan near the peak:")
for phi, p in zip(res.phi1[::25], res.p_top[::25]):
    if abs(phi) < 0.6:
        print(f"  phi1 = {phi:+.3f}   P(Kz = N/2) = {p:.4f}  " + "#" * int(40 * p))
