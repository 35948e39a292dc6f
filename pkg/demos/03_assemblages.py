"""
From an assemblage to a state and back
======================================

Bohm's assemblage has no local hidden state model.  Any valid assemblage
has a quantum realisation; here we build it, then ask how much negativity
every realisation must carry.
"""

import numpy as np

from steerneg import hierarchy, linalg, steering

A = steering.bohm_assemblage()
print("valid:", steering.validate_assemblage(A) == [])

ok, certificate = steering.has_lhs_model(A)
print("LHS model:", ok, "| white-noise weight needed:", round(certificate.noise_weight, 6))

rho, povms, dims = steering.realize_assemblage(A)
print("realising state has negativity", round(linalg.negativity(rho, dims), 6))
back = steering.assemblage_from_state(rho, povms)
print("round-trip error", np.abs(back.sigma - A.sigma).max())

# Lower bounds on the negativity of any state producing this assemblage
for level in (1, 2):
    r = hierarchy.negativity_lower_bound(A, level)
    print(f"level {level}: N >= {r.value:.6f} ({r.status})")

###############################################################################
# Moment matrices of the realisation are feasible points of the relaxation

chi, full = hierarchy.chi_from_state(rho, povms, level=1)
print("moment matrix size", full.shape, "min eigenvalue", np.linalg.eigvalsh(full).min().round(12))
