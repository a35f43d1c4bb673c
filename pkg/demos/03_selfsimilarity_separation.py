"""The hand-crafted self-similarity statistic separates upsampled images.

Builds two small populations: plain power-law random fields ("real") and
zero-insertion-upsampled fields ("generated"), computes the fused-quadrant
statistic per level, and reports the AUC per pyramid level.

Run:  python demos/03_selfsimilarity_separation.py
"""

import numpy as np

from fsf import auc_score, self_similarity_features, spectrum_of, synth_real, upsample_zero

N = 100
LEVELS = 2

fake_feats, real_feats = [], []
for seed in range(N):
    base = synth_real(seed, 16)
    fake = upsample_zero(upsample_zero(base))  # 16 -> 64, twice-replicated spectrum
    real = synth_real(10_000 + seed, 64)
    fake_feats.append(self_similarity_features(spectrum_of(fake), LEVELS))
    real_feats.append(self_similarity_features(spectrum_of(real), LEVELS))

fake_feats = np.array(fake_feats)
real_feats = np.array(real_feats)

print(f"{N} generated vs {N} real fields at 64x64")
print(f"{'level':<7}{'generated mean':<17}{'real mean':<13}AUC")
for level in range(LEVELS + 1):
    auc = auc_score(fake_feats[:, level], real_feats[:, level])
    print(
        f"{level:<7}{fake_feats[:, level].mean():<17.4f}"
        f"{real_feats[:, level].mean():<13.4f}{auc:.4f}"
    )
print("\nlevels 0 and 1 carry the replication signature (generated wins).")
print("level 2 reaches the un-replicated base spectrum: the generated value")
print("falls back below the real baseline, so the signal flips sign there.")
