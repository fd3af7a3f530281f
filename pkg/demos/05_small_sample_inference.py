"""Small-sample inference: exact permutation correlations on a five-point
learning-rate grid, Welch contrasts with effect sizes, and Holm-
Bonferroni adjustment.

With only five learning rates, asymptotic p-values are not trustworthy;
enumerating all 5! = 120 permutations gives exact two-sided p-values with
granularity 1/120.
"""

import math

from attn_drift import (
    cohens_d,
    exact_permutation_corr,
    holm_bonferroni,
    paired_t,
    welch_t,
)

# a five-point learning-rate sweep: entropy drift (%) falls as lr grows
lrs = [1e-6, 5e-6, 1e-5, 5e-5, 1e-4]
log_lrs = [math.log10(v) for v in lrs]
dentropy = [1.45, 0.33, -0.14, -4.19, -10.40]

pear = exact_permutation_corr(log_lrs, dentropy, "pearson")
spear = exact_permutation_corr(log_lrs, dentropy, "spearman")
print(f"exact permutation Pearson r  = {pear.statistic:+.3f}  p = {pear.p_value:.4f} "
      f"({round(pear.p_value * 120)}/120 permutations)")
print(f"exact permutation Spearman rho = {spear.statistic:+.3f}  p = {spear.p_value:.4f} "
      f"({round(spear.p_value * 120)}/120 permutations)")

# method contrast across seeds: Welch t with Cohen's d
full_ft = [-0.31, -0.18, -0.17]
lora = [0.79, 0.92, 0.90]
res = welch_t(full_ft, lora)
print(f"\nWelch t = {res.statistic:.3f}  df = {res.df:.2f}  p = {res.p_value:.4f}  "
      f"d = {cohens_d(full_ft, lora):.3f}")

# paired per-layer contrast (12 layers)
regularized = [5.62, 5.60, 5.62, 5.61, 5.57, 5.53, 5.66, 5.59, 5.52, 5.54, 5.61, 5.63]
baseline = [5.55, 5.46, 5.55, 5.57, 5.48, 5.48, 5.57, 5.47, 5.44, 5.42, 5.54, 5.52]
pt = paired_t(regularized, baseline)
print(f"paired per-layer t = {pt.statistic:.3f}  df = {pt.df:.0f}  p = {pt.p_value:.2e}")

# family-wise control over a regularizer family
raw = [0.0127, 0.0026, 0.0368, 0.0430]
labels = ["entropy", "erf", "gini", "head_diversity"]
adjusted = holm_bonferroni(raw, labels)
print("\nHolm-adjusted p-values:")
for label, p, ap in zip(labels, raw, adjusted):
    print(f"  {label:15s} raw {p:.4f} -> adjusted {ap:.4f}")
