"""Where does focal loss put the confidence of a noisy edge?

If a fraction q of otherwise identical edges is labelled positive, the best
constant prediction under BCE is q. Focal loss with gamma > 0 pulls it back
towards 0.5, which matters when the pruning threshold sits near q.
"""
import numpy as np
from scipy.optimize import minimize_scalar

from glc.net import focal_loss


def best_constant(q, gamma, m=1000):
    y = np.zeros(m, dtype=np.int64)
    y[: int(round(q * m))] = 1
    res = minimize_scalar(lambda p: focal_loss(np.full(m, p), y, gamma),
                          bounds=(1e-4, 1 - 1e-4), method="bounded", options={"xatol": 1e-7})
    return res.x


print(" q     gamma=0  gamma=1  gamma=2")
for q in (0.55, 0.6, 0.64, 0.7, 0.75, 0.8, 0.9):
    row = [best_constant(q, g) for g in (0.0, 1.0, 2.0)]
    print(f"{q:.2f}   " + "   ".join(f"{p:.3f}" for p in row))
