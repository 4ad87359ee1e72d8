"""From OCP to parametric NLP: transcription, KKT residuals, full SQP.

Builds the pendulum regulation OCP, inspects the stacked problem sizes,
and solves the NLP for a perturbed initial state with the full SQP loop,
showing the Gauss-Newton contraction of the iteration log.
"""

import numpy as np

from asrti import eval_kkt, sqp_solve, transcribe
from asrti.benchmark import build_pendulum_ocp

spec = build_pendulum_ocp()
nlp = transcribe(spec)
print(f"horizon N = {spec.N}, grid: first {spec.dt_grid[0]} s, tail {spec.dt_grid[1]:.5f} s")
print(f"stacked primal dim n_w = {nlp.n_w}, equalities n_g = {nlp.n_g}, inequalities n_h = {nlp.n_h}")

x = np.array([0.1, 0.15, 0.0, 0.3])
res = sqp_solve(nlp, x, nlp.cold_start(x), tol=1e-8)
print(f"\nSQP from cold start at x = {x}: converged={res.converged} in {res.iterations} iterations")
for rec in res.log:
    print(f"  it {rec.index:2d}: stationarity {rec.stat:10.3e}  shooting gaps {rec.eq:10.3e}  step {rec.step_norm:9.3e}")

kkt = eval_kkt(nlp, res.iterate, x)
print(f"final KKT residuals: stat {kkt.stat:.2e}, eq {kkt.eq:.2e}, ineq {kkt.ineq:.2e}, comp {kkt.comp:.2e}")
print(f"first optimal control u_0 = {nlp.first_control(res.iterate.w)}")

states, controls = nlp.unpack(res.iterate.w)
print("\nplanned control trajectory (first 10 stages):", controls[:10, 0].round(3))
