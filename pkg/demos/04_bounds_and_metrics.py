"""Tour of the divergence metrics and the structural bound diagnostics.

All absolute constants in the bound evaluators default to 1, so the numbers
are scaling diagnostics (how does the guarantee move with m, with the entry
bounds, with the penalty), not certified error bounds.
"""

import numpy as np

from plr import (BoundConstants, FeasibleSet, WeakLqSpec, completion_upper_bound,
                 gen_weak_lq, hellinger_lower_bound_factor, hellinger_poisson,
                 kl_poisson, rank_l_approx, recovery_bound_factors)


def main():
    print("Poisson divergences at (p, q) = (1, 4):")
    print(f"  KL        = {kl_poisson(1.0, 4.0):.5f}")
    print(f"  Hellinger = {hellinger_poisson(1.0, 4.0):.5f}  (always <= KL)")

    fset = FeasibleSet(alpha=200.0, beta=1.0, rank_budget=10)
    factor = hellinger_lower_bound_factor(fset)
    print(f"\nHellinger-vs-Frobenius factor on [1, 200]: {factor:.3e}")
    print("  (squared Hellinger distance >= factor * per-entry squared error)")

    print("\ncompletion bound diagnostic vs m (64x36, alpha=200, beta=1, r=10):")
    for m in (576, 1152, 2304):
        val = completion_upper_bound(fset, 64, 36, m)
        print(f"  m = {m:4d}: {val:.3e}")
    print("  halving as sqrt(2) per doubling of m in the large-m regime")

    print("\nrecovery regret bracket (64x36, I = 1e6, q = 0.5):")
    for lam in (1e-3, 1e-1, 1e1):
        out = recovery_bound_factors(64, 36, 10**6, 1e6, lam,
                                     BoundConstants(q=0.5))
        print(f"  lambda = {lam:6.3g}: ell* = {out.ell_star:8.1f}, "
              f"ell_min = {out.ell_min:6.2f}, bracket = {out.bracket:.3e}")

    print("\nweak-lq spectrum (q = 0.5, rho = 0.8, I = 1000, 12x10):")
    spec = WeakLqSpec(q=0.5, rho=0.8, total_intensity=1000.0, dims=(12, 10))
    M = gen_weak_lq(spec, seed=5)
    sigma = np.linalg.svd(M, compute_uv=False)
    print("  leading singular values:", np.array2string(sigma[:5], precision=1))
    for ell in (1, 2, 4):
        tail = np.sqrt(np.sum(sigma[ell:] ** 2))
        err = np.linalg.norm(M - rank_l_approx(M, ell))
        print(f"  rank-{ell} truncation error {err:9.3f} = tail norm {tail:9.3f}")


if __name__ == "__main__":
    main()
