"""Analytic certificates for a hopping-particle model.

Before touching any simulation, the closed-form estimates already tell us a
lot about a model (a, phi): how long the correlation-function evolution is
guaranteed to exist when we start in the weighted space with parameter
theta0, how the guaranteed window shrinks as we ask for a stronger norm, and
on which windows the fixed-point iteration of the kinetic equation is a
certified contraction.

Run:  python demos/01_horizon_certificates.py
"""

import numpy as np

from kawasaki import (KernelSpec, PotentialSpec, alpha, c_phi, mean_phi,
                      contraction_factor, existence_horizon, find_T_for_q,
                      horizon_report, t_star, theta_of_t)

# a modest model: unit top-hat jumps, soft top-hat repulsion
kernel = KernelSpec.top_hat(1.0, 1.0, dim=1)
pot = PotentialSpec.top_hat(1.0, 0.5, dim=1)

a = alpha(kernel)
c = c_phi(pot, 1.0)
m = mean_phi(pot)
print(f"model constants: alpha = {a:.6f}, c_phi = {c:.6f}, <phi> = {m:.6f}")

# 1. The guaranteed existence window T(theta) for data in the theta0-space.
theta0 = 0.0
print("\n  theta      T(theta)")
for theta in np.linspace(theta0, theta0 - 3.0, 7):
    print(f"  {theta:+.2f}    {existence_horizon(theta0, theta, a, c):.6f}")

T_max, th_max = t_star(theta0, a, c)
print(f"\nbest achievable window T_* = {T_max:.6f} at theta = {th_max:.6f}")

# 2. The inverse view: after time t, which norm still controls the solution?
print("\n  t          theta(t)")
for t in (0.0, 0.25 * T_max, 0.5 * T_max, 0.9 * T_max, 1.1 * T_max):
    th = theta_of_t(theta0, a, c, t)
    print(f"  {t:.5f}    {'-' if th is None else f'{th:+.6f}'}")

# 3. Picard certification for the kinetic equation with sup-norm-1 data:
#    q(T) < 1 guarantees geometric convergence of the integral iteration.
u0 = 1.0
print("\n  T          q(T)")
for T in (0.005, 0.01, 0.02, 0.04):
    print(f"  {T:.3f}      {contraction_factor(u0, a, m, T):.4f}")
T_half = find_T_for_q(0.5, u0, a, m)
print(f"\nlargest window with q(T) = 0.5: T = {T_half:.6f}")

# 4. Everything at once, as the CLI would emit it.
rep = horizon_report(theta0, a, c, mean_phi=m, theta=-1.0,
                     times=(0.25 * T_max,), u0=u0, windows=(T_half,))
print("\nfull report:")
for key, val in sorted(rep.to_json().items()):
    print(f"  {key}: {val}")
