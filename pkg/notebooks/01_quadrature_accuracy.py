# %% [markdown]
# # How many quadrature nodes are enough?
#
# `sqrt_apply` replaces `K^{1/2} b` by `K sum_q w_q (t_q I + K)^{-1} b`. The
# shifts and weights only depend on the interval `[lambda_min, lambda_max]`,
# so the scalar version of the rule already tells us how fast the error
# falls with `Q`. After that we look at a whole matrix, where the shifted
# solves add a second error source that is controlled by the solver
# tolerance.

# %%
import numpy as np

from ciq import DenseOperator, SolverConfig, SpectrumEstimate, build_rule, estimate_extreme_eigenvalues, sqrt_apply
from ciq.oracle import dense_sqrt_apply, make_spectrum_matrix
from ciq.quadrature import quadrature_rate, rational_sqrt_scalar

# %% [markdown]
# ## Scalar error
# Worst relative error of the rational approximation over a dense grid of
# the interval, against the predicted geometric rate.

# %%
lam = np.geomspace(1.0, 1e6, 2000)
print(" Q   max rel err   rate")
for Q in (2, 4, 6, 8, 12, 16):
    rule = build_rule(SpectrumEstimate.exact(1.0, 1e6), Q)
    err = np.max(np.abs(rational_sqrt_scalar(rule, lam) / np.sqrt(lam) - 1))
    print(f"{Q:2d}   {err:.2e}      {quadrature_rate(1e6, Q):.2e}")

# %% [markdown]
# The two columns fall at the same rate; the constant in front stays a
# small single-digit factor.
#
# ## A full matrix
# Eigenvalues `t^-2` for `t = 1..128` give `kappa = 128^2`. The interval is
# estimated with Lanczos, as it would be for an operator we cannot
# diagonalize.

# %%
K = make_spectrum_matrix(128, "inv_square", seed=0)
b = np.random.default_rng(0).standard_normal(128)
ref = dense_sqrt_apply(K, b, 0.5)
op = DenseOperator(K)
spec = estimate_extreme_eigenvalues(op, iters=50, seed=0)
print(f"estimated interval [{spec.lambda_min:.3e}, {spec.lambda_max:.3e}], true [{128.0**-2:.3e}, 1]")

# %%
for tol in (1e-3, 1e-6):
    row = []
    for Q in (2, 4, 8, 12, 16):
        out = sqrt_apply(op, b, Q, SolverConfig(tol=tol), spectrum=spec)
        row.append(np.linalg.norm(out.result - ref) / np.linalg.norm(ref))
    print(f"tol {tol:.0e}: " + "  ".join(f"{e:.1e}" for e in row))

# %% [markdown]
# With a loose tolerance the error stops improving around `tol`, whatever
# `Q` is. With a tight one the quadrature error keeps falling until `Q`
# is about 12.
#
# ## Cost per iteration does not grow with Q
# All shifts share one Krylov space, so each iteration applies the operator
# once no matter how many nodes there are. With a fixed budget of 30
# iterations the count of products is 30 for every `Q`, plus one final
# multiplication by `K`.

# %%
for Q in (1, 4, 16):
    op.reset_mvm_count()
    out = sqrt_apply(op, b, Q, SolverConfig(tol=1e-30, max_iters=30), spectrum=spec)
    print(f"Q={Q:2d}: {out.iterations} iterations, {op.mvm_count} products with K")

# %% [markdown]
# Run to a tolerance instead, and larger `Q` needs more iterations: its
# smallest shift is closer to zero, so that system is harder. The extra
# work comes from the conditioning of the hardest shift, not from the
# number of shifts.

# %%
for Q in (1, 4, 16):
    out = sqrt_apply(op, b, Q, SolverConfig(tol=1e-6), spectrum=spec)
    print(f"Q={Q:2d}: {out.iterations} iterations, smallest shift {out.rule.shifts.min():.1e}")
