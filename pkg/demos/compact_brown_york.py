"""Brown-York lower bounds on compact domains.

Each compact scenario is run through both pipelines (mean-convex collar
and positive scalar curvature).  A verdict lists its hypothesis checks, the
bound, the Brown-York mass and the margin; ``holds`` is None when the
hypotheses fail and nothing is asserted.

The last block is a diagnostic: on a ball with a little negative scalar
curvature the conformal energy is negative and the Brown-York mass equals
four times the boundary flux, so the bound with the ``1/4`` normalization
fails there while ``4 * flux`` matches ``m_by`` to solver accuracy.
"""
from massbounds import bounds, scenarios

for sc in scenarios.compact_scenarios():
    ev = scenarios.evaluate(sc, 28)
    print(f"\n{sc.name}  (h = {ev.h:.3f})")
    for v in ev.verdicts:
        margin = "-" if v.margin is None else f"{v.margin:+.4f}"
        print(f"    {v.theorem:<42} holds={str(v.holds):<5} margin {margin}")

diag = scenarios.negative_bump_ball()
dom = diag.build(28)
res = bounds.positive_mean_curvature_pipeline(dom)
print(f"\n{diag.name}")
print(f"    m_by        {dom.m_by:+.5e}")
print(f"    energy / 4  {res.energy / 4:+.5e}")
print(f"    4 * flux    {res.corrected_bound:+.5e}")
