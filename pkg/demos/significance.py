"""
Is one scorer really better than another?
=========================================

Two systems scored on the same items produce paired errors, so a paired
t-test applies. Their correlations with the reference are dependent too,
because both are measured against the same reference and against each
other; the Steiger Z1* test accounts for that.
"""
import numpy as np
from scipy.stats import norm

from multirater_gp.metrics import pcc
from multirater_gp.stats import paired_t_test, steiger_z1

rng = np.random.default_rng(7)
n = 150
reference = rng.uniform(2, 9, size=n)
shared = rng.normal(0, 0.8, size=n)  # errors both systems make
system_a = reference + shared + rng.normal(0, 0.4, size=n)
system_b = reference + shared + rng.normal(0, 0.9, size=n)

err_a = (system_a - reference) ** 2
err_b = (system_b - reference) ** 2
t = paired_t_test(err_a, err_b)
print(f"MSE {err_a.mean():.3f} vs {err_b.mean():.3f}: t={t.statistic:.2f}, p={t.p_value:.3g}")

r_a, r_b, r_ab = pcc(system_a, reference), pcc(system_b, reference), pcc(system_a, system_b)
z = steiger_z1(r_a, r_b, r_ab, n)
print(f"PCC {r_a:.3f} vs {r_b:.3f} (systems correlate {r_ab:.3f}): "
      f"Z={z.statistic:.2f}, p={z.p_value:.3g}")

# treating the two correlations as coming from independent samples
# ignores the shared errors and understates the evidence
z_indep = (np.arctanh(r_a) - np.arctanh(r_b)) / np.sqrt(2.0 / (n - 3))
print(f"same PCCs treated as independent samples: p={2 * norm.sf(abs(z_indep)):.3g}")
