"""Symbolic curvature of a 3-metric, used as an independent oracle in tests."""
from functools import lru_cache

import numpy as np
import sympy as sp

X = sp.symbols("x y z", real=True)


def _curvature(g):
    ginv = g.inv()
    n = 3
    gam = [[[sum(ginv[k, l] * (sp.diff(g[l, i], X[j]) + sp.diff(g[l, j], X[i])
                              - sp.diff(g[i, j], X[l])) for l in range(n)) / 2
             for j in range(n)] for i in range(n)] for k in range(n)]
    # R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    Rup = [[[[sp.diff(gam[a][d][b], X[c]) - sp.diff(gam[a][c][b], X[d])
              + sum(gam[a][c][e] * gam[e][d][b] - gam[a][d][e] * gam[e][c][b] for e in range(n))
              for d in range(n)] for c in range(n)] for b in range(n)] for a in range(n)]
    ric = sp.Matrix(n, n, lambda b, d: sum(Rup[a][b][a][d] for a in range(n)))
    R = sum(ginv[b, d] * ric[b, d] for b in range(n) for d in range(n))
    return ginv, Rup, R


@lru_cache(maxsize=None)
def conformal_oracle(expr_text: str):
    """Return numeric callables ``(R, |Rm|^2)`` for ``g = u^4 delta``.

    ``|Rm|^2 = R_abcd R^abcd`` is contracted from the full Riemann tensor.
    """
    u = sp.sympify(expr_text, locals=dict(zip(("x", "y", "z"), X)))
    g = sp.eye(3) * u ** 4
    ginv, Rup, R = _curvature(g)
    # for a conformally flat metric g^ab = u^-4 delta, so
    # R_abcd R^abcd = sum (R^a_bcd)^2 * g_aa * g^bb g^cc g^dd = u^-8 sum (R^a_bcd)^2
    sq = sum(Rup[a][b][c][d] ** 2 for a in range(3) for b in range(3)
             for c in range(3) for d in range(3)) / u ** 8
    fR = sp.lambdify(X, R, "numpy")
    fRm = sp.lambdify(X, sq, "numpy")
    return (lambda x, y, z: np.asarray(fR(x, y, z), dtype=float),
            lambda x, y, z: np.asarray(fRm(x, y, z), dtype=float))
