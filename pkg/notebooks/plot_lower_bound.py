"""
How much MP overpays on a chain
===============================

A chain of m edges (the first costs 2^(1-m), the rest are free) runs in
parallel with a single free edge. MP's exponential penalty makes the
single edge win and pay for it, while the first-price benchmark nu stays
at 2^(1-m).
"""

import matplotlib.pyplot as plt
import numpy as np

from teamauction import mp_run, truthful_bids
from teamauction.frugality import lower_bound_instance, nu

ms = np.arange(1, 13)
ratios = []
for m in ms:
    system, costs = lower_bound_instance(int(m), 2.0 ** (1 - m))
    pay = mp_run(system, truthful_bids(system, costs)).total_payment()
    ratios.append(pay / float(nu(system, costs).value))

plt.semilogy(ms, ratios, "o-", label="MP payment / nu")
plt.semilogy(ms, 2.0 ** (ms - 1), "k--", label="2^(m-1)")
plt.xlabel("chain length m")
plt.legend()
plt.savefig("lower_bound.png", dpi=120)
print(dict(zip(ms.tolist(), ratios)))
