# coding: utf-8

# # Exponent ladder of the Moser iteration
#
# The ladder is exact rational arithmetic: p_{n+1} = m~ + gamma_bar p_n.

# %%

from spme_lab.moser import format_ladder, iteration_constants, ladder

lad = ladder(d=1, m_tilde=1, mu="inf", alpha=2)
print(format_ladder(lad, N_free=10.0, n_max=6))

# %%

# The step constants c_n tend to 1 fast enough that their product converges.
# N_free stands in for an embedding constant that is only known to exist.

ic = iteration_constants(lad, 10.0, 40)
for n in (5, 10, 20, 40):
    print(f"n={n:2d}  prod c_k = {ic.products[ic.n == n][0]:.10g}")

# %%

# A finite mu shrinks gamma_bar and slows the convergence.

lad2 = ladder(d=2, m_tilde=1, mu=4, alpha=2)
print("gamma_bar =", lad2.gamma_bar, " theta~ =", lad2.theta_tilde, " n0 =", lad2.n0)
