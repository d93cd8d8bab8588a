"""Cover a secant cloud, span H by the centers, and measure through M P_H.

Signals are 2-sparse in an 8-dimensional subspace of R^64, so the secants
are thin in the ambient space. The script estimates their box-counting
dimension, builds H from an alpha-cover, certifies the projection error on
held-out secants, and compares sampled RIP constants of a plain m x 64
Gaussian with those of M P_H (M an m x dim H Gaussian).
"""
import numpy as np

from structcs.measurements import compose, gaussian, rip_sampled, sufficient_m_general
from structcs.models import LevelsModel
from structcs.secants import FixedVectors, ModelSecants, build_subspace, certify_projection, \
    draw, estimate_boxdim, greedy_cover

n, d = 64, 8
B = np.linalg.qr(np.random.default_rng(0).standard_normal((n, d)))[0]
inner = ModelSecants(LevelsModel.sparse(d, 2))


def secants(count, rng):
    return inner(count, rng) @ B.T


est = estimate_boxdim(secants, [0.9, 0.7, 0.5, 0.35, 0.25], 4000, seed=0)
print(f"boxdim slope {est.slope:.2f} (R^2 {est.r2:.3f}, status {est.status}), alpha_S {est.alpha_S}")

cover = greedy_cover(draw(secants, 3000, seed=1), 0.5)
H = build_subspace(cover)
cert = certify_projection(H, secants, trials=3000, seed=2)
print(f"cover: {cover.size} centers, dim H = {H.dim} of {n}; held-out alpha_hat {cert.alpha_hat:.3g}")

s = max(est.slope, 1.0)
alpha_S = min(est.alpha_S, 0.25)
print(f"sufficient m (unit absolute constants, alpha_S={alpha_S}): "
      f"{sufficient_m_general(s, alpha_S, 0.1, 0.5, 1.0, 1.0)}")

test = FixedVectors(draw(secants, 3000, seed=3))
for m in (8, 16, 32):
    plain = [rip_sampled(gaussian(m, n, t), test).delta_hat for t in range(5)]
    comp = [rip_sampled(compose(gaussian(m, H.dim, t), H), test).delta_hat for t in range(5)]
    print(f"m={m:>3}: median sampled delta, Gaussian {np.median(plain):.3f}, M P_H {np.median(comp):.3f}")
