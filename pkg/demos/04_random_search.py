"""
Looking for PPT states that steer
=================================

Draw random steering functionals, bound them over LHS models with the
eigenvalue formula and over PPT moment matrices with the SDP.  A PPT bound
clearly above the LHS bound would flag a candidate PPT steering violation.
"""

from steerneg.cli import search_records
from steerneg.steering import Scenario

scenario = Scenario(m_a=2, n_a=2, d_b=2)
gaps = []
for rec in search_records(scenario, trials=20, level=1, seed=1, tol=1e-8):
    gaps.append(rec["gap"])
    flag = "CANDIDATE" if rec["candidate"] else ""
    print(f"trial {rec['trialIndex']:2d}  LHS {rec['lhsBound']:+.5f}  PPT {rec['pptBound']:+.5f}  {flag}")

print("largest gap:", max(gaps))
