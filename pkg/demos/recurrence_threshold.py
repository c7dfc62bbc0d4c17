"""Where does a_k = B^k a_{k-1}^beta stop converging?

Compares the closed-form threshold on a_1 with a bisection over actual
orbits, then shows one orbit on each side of it.
"""

from dgns.iteration import RecurrenceSpec, estimate_threshold, iterate

B, beta = 8.0, 5 / 3
est = estimate_threshold(B, beta)
print(f"closed form {est.analytic:.12e}")
print(f"bisection   {est.empirical:.12e}")

for factor in (0.9, 1.1):
    orbit = iterate(RecurrenceSpec(B, beta, factor * est.analytic, max_steps=60))
    print(f"a1 = {factor} x threshold -> {orbit.verdict} after {orbit.steps} steps")
