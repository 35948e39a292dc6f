"""
LHS, quantum and PPT bounds of two Pauli steering inequalities
===============================================================

Alice measures Pauli observables on her half of a two-qubit state and Bob
sees the conditional states.  A steering functional scores those states;
here we compare its maximum over local hidden state models, over quantum
assemblages and over moment matrices of PPT states.
"""

import numpy as np

from steerneg import hierarchy, linalg, steering

for axes in ("XY", "XYZ"):
    F = steering.pauli_functional(axes)
    lhs = steering.lhs_max_eigen(F)      # max over deterministic strategies
    lhs_sdp = steering.lhs_max_sdp(F)    # the same number from the SDP
    quantum = steering.quantum_max(F)
    ppt = hierarchy.ppt_upper_bound(F, level=1)
    print(f"{axes:>3}: LHS {lhs:.6f} (SDP {lhs_sdp:.6f})  quantum {quantum:.6f}  PPT {ppt.value:.6f}")

# The PPT bound equals the LHS bound: no PPT state violates these inequalities.
print("sqrt(2), sqrt(3) =", np.sqrt(2), np.sqrt(3))

###############################################################################
# A Werner state that violates the three-setting inequality

rho = 0.6 * linalg.ket_projector(np.array([0, 1, -1, 0]) / np.sqrt(2)) + 0.1 * np.eye(4)
A = steering.assemblage_from_state(rho, steering.pauli_measurements("XYZ"))
print("Werner 0.6 value:", steering.evaluate(steering.pauli_functional("XYZ"), A))
has_lhs, _ = steering.has_lhs_model(A)
print("has an LHS model:", has_lhs)
