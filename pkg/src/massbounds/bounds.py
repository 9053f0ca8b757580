"""Lower-bound formulas, hypothesis checks and verdicts.

Each evaluator returns a :class:`Verdict`: the hypotheses it checked, the
bound value, the measured mass when one is available and the margin between
them.  A bound is *applicable* only when every hypothesis passes.

Two families of statements are covered:

* ADM-mass bounds for asymptotically flat metrics, driven by the Sobolev
  constant and the split ``R = R+ - R-`` (:func:`sobolev_mass_bound`,
  :func:`curvature_excision_condition`, :func:`conformal_mass_identity`);
* Brown-York lower bounds for compact domains, obtained by solving
  ``Delta u - (R/8) u = 0`` with ``u = 1`` on the boundary and comparing ``u``
  with a function of the distance to the boundary
  (:func:`positive_mean_curvature_pipeline`,
  :func:`positive_scalar_curvature_pipeline`).

Multiplicative constants that are not pinned down numerically are carried as
configuration slots (default 1) and every verdict that uses one carries the
``"unresolved-constant"`` flag; such margins are reported but not asserted.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from massbounds import _stencil
from massbounds.elliptic import (EllipticProblem, first_dirichlet_eigenvalue,
                                 solve_dirichlet)
from massbounds.errors import NonCoerciveOperator
from massbounds.mesh import Grid3, ScalarField, integrate
from massbounds.metric import MetricField, sign_split_and_lp

MOSER_BASE = 27.0 ** 0.125
"""``27^(1/8)``, the constant in front of the Moser sup bound."""

UNRESOLVED = "unresolved-constant"
GAMMA_ESTIMATE = "estimated-gamma"


def margin_tolerance(bound: float, mass: float) -> float:
    """``5e-3 * max(|bound|, |mass|)`` with an absolute floor of ``1e-8``."""
    return max(5e-3 * max(abs(bound), abs(mass)), 1e-8)


# --------------------------------------------------------------------------- records


@dataclass
class Check:
    """One hypothesis: a human-readable requirement and the computed quantity."""

    name: str
    required: str
    computed: float
    passed: bool


@dataclass
class Verdict:
    """Outcome of one lower-bound statement on one scenario.

    Attributes
    ----------
    theorem : str
        Identifier of the statement, e.g. ``"sobolev-mass-bound"``.
    checks : list of Check
    bound : float or None
        Bound value (None when it could not be evaluated).
    mass : float or None
        Measured mass the bound is compared with.
    flags : list of str
        ``"unresolved-constant"``, ``"estimated-gamma"`` and diagnostics.
    details : dict
        Auxiliary numbers (intermediate constants, diagnostics).
    """

    theorem: str
    scenario: str = ""
    checks: list = field(default_factory=list)
    bound: float | None = None
    mass: float | None = None
    flags: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)

    @property
    def applicable(self) -> bool:
        return self.bound is not None and all(c.passed for c in self.checks)

    @property
    def margin(self) -> float | None:
        if self.bound is None or self.mass is None:
            return None
        return self.mass - self.bound

    @property
    def tolerance(self) -> float | None:
        if self.bound is None or self.mass is None:
            return None
        return margin_tolerance(self.bound, self.mass)

    @property
    def margin_asserted(self) -> bool:
        """Whether the margin is part of the pass/fail contract."""
        return self.applicable and self.mass is not None and UNRESOLVED not in self.flags

    @property
    def asserted(self) -> bool:
        return self.margin_asserted or bool(self.assertions)

    @property
    def holds(self) -> bool | None:
        """Asserted margin within tolerance and every assertion passed; None if nothing is asserted."""
        if not self.asserted:
            return None
        ok = all(c.passed for c in self.assertions)
        if self.margin_asserted:
            ok = ok and self.margin >= -self.tolerance
        return ok

    def check(self, name: str, required: str, computed, passed) -> Check:
        """Record a hypothesis; a failed one makes the bound inapplicable."""
        c = Check(name, required, float(computed), bool(passed))
        self.checks.append(c)
        return c

    def require(self, name: str, required: str, computed, passed) -> Check:
        """Record an accuracy or consistency requirement; a failed one fails the verdict."""
        c = Check(name, required, float(computed), bool(passed))
        self.assertions.append(c)
        return c

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(applicable=self.applicable, margin=self.margin, tolerance=self.tolerance,
                 asserted=self.asserted, margin_asserted=self.margin_asserted, holds=self.holds)
        return _plain(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=True)

    def csv_rows(self) -> list[dict]:
        """One row per hypothesis plus one row for the bound."""
        rows = [{"scenario": self.scenario, "theorem": self.theorem, "item": c.name,
                 "required": c.required, "value": _fmt(c.computed),
                 "status": "pass" if c.passed else "fail"} for c in self.checks]
        rows += [{"scenario": self.scenario, "theorem": self.theorem, "item": c.name,
                  "required": c.required, "value": _fmt(c.computed),
                  "status": "pass" if c.passed else "FAIL"} for c in self.assertions]
        status = {True: "pass", False: "FAIL", None: "n/a"}[self.holds]
        rows.append({"scenario": self.scenario, "theorem": self.theorem, "item": "margin",
                     "required": "mass - bound >= -tol", "value": _fmt(self.margin),
                     "status": status})
        return rows


CSV_FIELDS = ("scenario", "theorem", "item", "required", "value", "status")


def verdicts_csv(verdicts: Sequence[Verdict]) -> str:
    out = io.StringIO()
    w = csv.DictWriter(out, CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for v in verdicts:
        w.writerows(v.csv_rows())
    return out.getvalue()


def _fmt(x):
    return "" if x is None else repr(float(x))


def _plain(obj):
    """Convert numpy scalars/arrays inside nested containers to plain Python."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


@dataclass
class BoundInputs:
    """Scalar ingredients of the bound formulas.

    ``a``, ``b`` use ``R-/4`` and ``R+/4``; ``alpha``, ``beta``, ``gamma``,
    ``delta`` use ``q = R/8``.  Unused fields may stay at their defaults.
    """

    n: int = 3
    Lam: float = 1.0
    lam: float | None = None
    a: float = 0.0
    b: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    delta: float = 0.0
    int_R_plus: float = 0.0
    int_R_minus: float = 0.0
    A: float = 1.0
    sup_Rm: float = 0.0
    grad_Rm_l2: float = 0.0
    s0: float = 0.0
    H_min: float = 0.0
    H_plus_sup: float = 0.0
    area: float = 0.0
    R_min: float = 0.0
    C: float = 1.0

    def __post_init__(self):
        if not self.Lam > 0:
            raise ValueError("Sobolev constant must be positive")
        for name in ("a", "b", "alpha", "beta", "gamma", "delta", "int_R_plus", "int_R_minus"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("eigenvalue must be positive")


def curvature_inputs(R: ScalarField, Lam: float, metric: MetricField | None = None,
                     **extra) -> BoundInputs:
    """Fill the integral quantities of :class:`BoundInputs` from a scalar curvature field."""
    quarter = sign_split_and_lp(R.with_values(R.values / 4.0), metric=metric)
    eighth = sign_split_and_lp(R.with_values(R.values / 8.0), metric=metric)
    return BoundInputs(
        Lam=Lam, a=quarter.beta, b=quarter.delta, alpha=eighth.alpha, beta=eighth.beta,
        gamma=eighth.gamma, delta=eighth.delta,
        int_R_plus=integrate(R.positive_part(), metric),
        int_R_minus=integrate(R.negative_part(), metric), **extra)


# --------------------------------------------------------------------------- ADM bounds


def sobolev_mass_bound(inputs: BoundInputs, mass: float | None = None,
                       scenario: str = "") -> Verdict:
    """Sobolev-constant lower bound on the ADM mass and its nonnegativity test.

    With ``a = ||R-/4||_{3/2}``, ``b = ||R+/4||_{3/2}`` and ``a < Lam/2``::

        m >= C (Lam - 2a)/(Lam + b - a) * (int R+ - (Lam + 2b)/(Lam - 2a) int R-)

    The mass is claimed nonnegative exactly when
    ``int R+ >= (Lam + 2b)/(Lam - 2a) int R-``; that claim does not depend on
    ``C`` and is recorded in ``details["claims_nonnegative"]``.
    """
    p = inputs
    v = Verdict("sobolev-mass-bound", scenario, mass=mass, flags=[UNRESOLVED])
    ok = v.check("a < Lam/2", f"< {p.Lam / 2:.6g}", p.a, p.a < p.Lam / 2).passed
    if not ok:
        v.details.update(claims_nonnegative=False)
        return v
    ratio = (p.Lam + 2 * p.b) / (p.Lam - 2 * p.a)
    bracket = (p.Lam - 2 * p.a) / (p.Lam + p.b - p.a) * (p.int_R_plus - ratio * p.int_R_minus)
    claims = p.int_R_plus >= ratio * p.int_R_minus
    v.check("int R+ >= threshold * int R-", f">= {ratio * p.int_R_minus:.6g}",
            p.int_R_plus, claims)
    v.bound = p.C * bracket
    v.details.update(bracket=bracket, threshold=ratio, C=p.C, claims_nonnegative=bool(claims))
    if mass is not None and bracket > 0:
        v.details["implied_C_max"] = mass / bracket
    return v


def excision_budget(inputs: BoundInputs, c: float = 1.0) -> float:
    """Volume budget ``[c A N int R- / ((N/32)^2 Lam)]^(n/(n-2))`` with ``N = 2^floor(n/2)``."""
    N = 2 ** (inputs.n // 2)
    base = c * inputs.A * N * inputs.int_R_minus / ((N / 32.0) ** 2 * inputs.Lam)
    return base ** (inputs.n / (inputs.n - 2))


def excision_infimum(values, volumes, budget: float) -> float:
    """``min int_{M \\ D} f`` over sets ``D`` of volume at most ``budget``.

    ``D`` may contain fractions of cells, so the problem is a fractional
    knapsack: removing cells in decreasing order of ``f`` (the density, since
    ``int f`` over a cell is ``f * volume``) and cutting the last one is
    optimal.  Any other admissible ``D`` can exchange mass with the greedy set
    without increasing the remaining integral.

    Volumes and products are accumulated as exact rationals and rounded once,
    so the result does not depend on summation order.
    """
    f = np.asarray(values, dtype=float).ravel()
    w = np.asarray(volumes, dtype=float).ravel()
    order = np.argsort(-f, kind="stable")
    left = Fraction(float(budget))
    total = Fraction(0)
    for k in order:
        wk = Fraction(float(w[k]))
        if left >= wk:
            left -= wk
            continue
        take = max(left, Fraction(0))
        left = Fraction(0)
        total += Fraction(float(f[k])) * (wk - take)
    return float(total)


def excision_infimum_exhaustive(values, volumes, budget: float) -> float:
    """Reference for :func:`excision_infimum` by enumeration (small inputs only).

    The optimum of the fractional problem has at most one partially removed
    cell, so every subset of fully removed cells is enumerated together with
    each choice of the partial cell.  Arithmetic is exact, as in the greedy
    version.
    """
    f = [Fraction(float(x)) for x in np.ravel(values)]
    w = [Fraction(float(x)) for x in np.ravel(volumes)]
    budget = Fraction(float(budget))
    n = len(f)
    if n > 16:
        raise ValueError("exhaustive search limited to 16 cells")
    best = None
    for k in range(n + 1):
        for full in itertools.combinations(range(n), k):
            used = sum((w[i] for i in full), Fraction(0))
            if used > budget:
                continue
            rest = [i for i in range(n) if i not in full]
            left = budget - used
            base = sum((f[i] * w[i] for i in rest), Fraction(0))
            for j in [None] + rest:
                val = base if j is None else base - f[j] * min(left, w[j])
                if best is None or val < best:
                    best = val
    return float(best)


def curvature_excision_condition(inputs: BoundInputs, riemann_sq, volumes, c: float = 1.0,
                                 mass: float | None = None, scenario: str = "") -> Verdict:
    """Excision condition on ``|Rm|^2`` for nonnegative ADM mass.

    ``B`` is the smallest ``int_{M \\ D} |Rm|^2`` over regions ``D`` within the
    volume budget of :func:`excision_budget`.  The mass is claimed
    nonnegative when ``B >= C A^2 [sup|Rm| int R- + ||grad Rm||_2 (int R-)^(1/2)]``.
    ``details`` also carries the bound ``(A^2/4) int R-`` on the auxiliary
    spinor energies used in the argument.  ``bound`` is 0 (the claimed sign)
    when the condition holds.
    """
    p = inputs
    v = Verdict("curvature-excision-condition", scenario, mass=mass, flags=[UNRESOLVED])
    budget = excision_budget(p, c)
    volumes = np.asarray(volumes, dtype=float)
    total = float(np.sum(volumes))
    B = 0.0 if budget >= total else excision_infimum(riemann_sq, volumes, budget)
    rhs = p.C * p.A ** 2 * (p.sup_Rm * p.int_R_minus + p.grad_Rm_l2 * math.sqrt(p.int_R_minus))
    holds = B >= rhs
    v.check("B >= C A^2 [...]", f">= {rhs:.6g}", B, holds)
    v.details.update(B=B, rhs=rhs, budget=budget, total_volume=total, c=c, C=p.C,
                     spinor_energy_bound=p.A ** 2 / 4.0 * p.int_R_minus,
                     degenerate=bool(B == 0.0 and rhs == 0.0))
    if holds:
        v.bound = 0.0
    return v


def conformal_mass_identity(mass: float, int_R_over_8: float, dirichlet_v: float,
                            C: float = 2.0 * np.pi, scenario: str = "",
                            rel_tol: float = 0.02) -> Verdict:
    """``C m - int (R/8) dV_g = -int |grad_0 v|^2 dV_e`` for ``g = u^4 delta``, ``v = 1 - u``.

    ``C = 2 pi`` in Schwarzschild units (``m = -(1/2pi) int d_r u`` at
    infinity).  The identity gives ``m <= (1/C) int R/8 dV_g`` with equality
    only for the flat metric, so ``m >= 0`` forces ``int R dV_g >= 0``.

    Closure of the identity relative to ``int |grad_0 v|^2`` is a
    requirement.  The inequality is encoded with ``bound = m`` and
    ``mass = (1/C) int R/8 dV_g``, so a nonnegative margin means
    ``m <= (1/C) int R/8 dV_g``.
    """
    v = Verdict("conformal-mass-identity", scenario)
    residual = (C * mass - int_R_over_8) + dirichlet_v
    scale = max(abs(dirichlet_v), 1e-14)
    v.require("closure |res| <= tol * int|grad v|^2", f"<= {rel_tol:g}",
              abs(residual) / scale if dirichlet_v > 0 else abs(residual),
              abs(residual) <= rel_tol * dirichlet_v or abs(residual) <= 1e-12)
    # the identity as a bound: C m <= int R/8, i.e. (int R/8)/C - m >= 0
    v.bound = mass
    v.mass = int_R_over_8 / C
    v.details.update(residual=residual, C=C, C_mass=C * mass, int_R_over_8=int_R_over_8,
                     dirichlet_v=dirichlet_v, sign_corollary=bool(mass < 0 or int_R_over_8 >= 0))
    return v


# --------------------------------------------------------------------------- Moser, energy bounds


def moser_sup_bound(alpha: float, beta: float, gamma: float, Lam: float) -> float:
    """Moser-iteration bound ``1 + 27^(1/8) gamma [(alpha+1)(1+Lam-beta)/(Lam(Lam-beta)) + 1]``.

    Bounds ``sup u`` for the solution of ``Delta u - q u = 0``, ``u = 1`` on the
    boundary, where ``alpha = sup q-``, ``beta = ||q-||_{3/2}`` and
    ``gamma = sup_p ||q-||_p``.

    Raises
    ------
    ValueError
        If ``beta >= Lam`` (the bound is inapplicable).
    """
    if not beta < Lam:
        raise ValueError(f"moser bound needs beta < Lam, got beta={beta}, Lam={Lam}")
    return 1.0 + MOSER_BASE * gamma * ((alpha + 1) * (1 + Lam - beta) / (Lam * (Lam - beta)) + 1)


def pointwise_minimizer(lam: float, R):
    """Minimum over ``v`` of ``8 lam v^2 + R (1+v)^2``.

    Returns ``(closed_form, evaluated)`` where ``closed_form`` is
    ``8 lam R / (8 lam + R)`` and ``evaluated`` is the quadratic at its
    critical point ``v = -R / (8 lam + R)``.
    """
    R = np.asarray(R, dtype=float)
    den = 8 * lam + R
    vstar = -R / den
    evaluated = 8 * lam * vstar ** 2 + R * (1 + vstar) ** 2
    return 8 * lam * R / den, evaluated


@dataclass
class EnergyBounds:
    """Lower bounds for ``I = inf { int |grad w|^2 + (R/8) w^2 : w = 1 on the boundary }``.

    ``bound_i`` uses the Sobolev constant (None if ``beta >= Lam/2``);
    ``bound_ii`` the first Dirichlet eigenvalue (None if ``8 lam + R <= 0``
    somewhere, with ``violating_node`` set).
    """

    bound_i: float | None
    bound_ii: float | None
    violating_node: tuple | None = None
    identity_error: float = 0.0


def dirichlet_energy_bounds(inputs: BoundInputs, R, weights, lam: float) -> EnergyBounds:
    """Sobolev and eigenvalue lower bounds on the Dirichlet energy with ``q = R/8``.

    (i)  ``(Lam - 2 beta)/(8 (Lam + delta - beta)) (int R+ - (Lam + 2 delta)/(Lam - 2 beta) int R-)``
         when ``beta < Lam/2``;
    (ii) ``lam int R/(8 lam + R)`` when ``8 lam + R > 0`` pointwise.

    ``R`` and ``weights`` are nodal arrays (the weights define the integral
    in (ii)); ``inputs`` supplies ``Lam``, ``beta``, ``delta`` and ``int R+-``.
    """
    p = inputs
    bi = None
    if p.beta < p.Lam / 2:
        ratio = (p.Lam + 2 * p.delta) / (p.Lam - 2 * p.beta)
        bi = (p.Lam - 2 * p.beta) / (8 * (p.Lam + p.delta - p.beta)) \
            * (p.int_R_plus - ratio * p.int_R_minus)
    R = np.asarray(R, dtype=float)
    w = np.asarray(weights, dtype=float)
    sel = w > 0
    den = 8 * lam + R
    bad = sel & ~(den > 0)
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        return EnergyBounds(bi, None, node)
    closed, evaluated = pointwise_minimizer(lam, R[sel])
    err = float(np.max(np.abs(closed - evaluated) / np.maximum(np.abs(closed), 1.0))) \
        if closed.size else 0.0
    bii = lam * math.fsum((w[sel] * R[sel] / den[sel]).tolist())
    return EnergyBounds(bi, bii, None, err)


# --------------------------------------------------------------------------- comparison functions


def xi_mean_convex(s0: float, H_min: float) -> float:
    """``min(pi/(6 s0), H_min/2)``."""
    return min(np.pi / (6 * s0), 0.5 * H_min)


def phi_trig(xi: float, s):
    """``cos(xi s) + sin(xi s)``: solves ``phi'' = -xi^2 phi``, ``phi(0) = 1``, ``phi'(0) = xi``."""
    s = np.asarray(s, dtype=float)
    return np.cos(xi * s) + np.sin(xi * s)


def phi_trig_derivative(xi: float, s):
    s = np.asarray(s, dtype=float)
    return xi * (np.cos(xi * s) - np.sin(xi * s))


def xi_scalar(R_min: float) -> float:
    """``sqrt(R_min)/4`` (requires ``R_min >= 0``)."""
    if R_min < 0:
        raise ValueError("scalar curvature must be nonnegative")
    return 0.25 * math.sqrt(R_min)


def phi_hyp(xi: float, s0: float, s):
    """``cosh(xi s) - tanh(xi s0) sinh(xi s)``: ``phi'' = xi^2 phi``, ``phi'(s0) = 0``."""
    s = np.asarray(s, dtype=float)
    return np.cosh(xi * s) - np.tanh(xi * s0) * np.sinh(xi * s)


def phi_hyp_derivative(xi: float, s0: float, s):
    s = np.asarray(s, dtype=float)
    return xi * (np.sinh(xi * s) - np.tanh(xi * s0) * np.cosh(xi * s))


def moser_threshold(alpha: float, beta: float, Lam: float, xi: float, s0: float) -> float:
    """Largest ``gamma`` allowed by the third mean-convex hypothesis.

    ``27^(-1/8) [(alpha+1)(1+Lam-beta)/(Lam-beta) + 1]^(-1) * xi s0 / 10``.
    It keeps the Moser bound on ``u`` below ``1 + xi s0/10 <= phi(s0)``.
    """
    if not beta < Lam:
        return -math.inf
    return (1.0 / MOSER_BASE) / ((alpha + 1) * (1 + Lam - beta) / (Lam - beta) + 1) \
        * xi * s0 / 10.0


# --------------------------------------------------------------------------- compact pipelines


@dataclass
class CompactDomain:
    """A compact domain with the geometric data the Brown-York pipelines need.

    Attributes
    ----------
    name : str
    metric : MetricField
        Metric on a grid whose domain is the compact region.
    R : ScalarField
        Scalar curvature on the grid.
    distance : ndarray
        Metric distance from each node to the boundary.
    s0 : float
        Width of the collar where the distance is smooth.
    level_mean_curvature : callable
        ``s -> H`` on the level set at distance ``s`` (outward normal);
        vectorized over ``s``.
    area : float
        Metric area of the boundary.
    m_by : float
        Brown-York mass (``int (H0 - H)``) of the domain.
    gauss_positive : bool
        Whether the boundary has positive Gauss curvature.
    sobolev : float
        Lower bound on the Sobolev constant of the domain.
    exact_R : callable, optional
        Exact scalar curvature as a function of the nodes (used instead of
        finite differences when the scenario knows it).
    """

    name: str
    metric: MetricField
    R: ScalarField
    distance: np.ndarray
    s0: float
    level_mean_curvature: Callable
    area: float
    m_by: float
    gauss_positive: bool
    sobolev: float
    extras: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid3:
        return self.metric.grid

    def level_sets(self, n: int = 201) -> tuple[np.ndarray, np.ndarray]:
        s = np.linspace(0.0, self.s0, n)
        return s, np.asarray(self.level_mean_curvature(s), dtype=float)

    @property
    def collar(self) -> np.ndarray:
        return self.grid.inside & (self.distance <= self.s0)


@dataclass
class PipelineResult:
    """Verdicts of one pipeline run plus the solve diagnostics."""

    verdicts: list
    energy: float | None
    flux: float | None
    comparison_gap: float | None
    normal_derivative: float | None
    corrected_bound: float | None


def _solve_conformal(domain: CompactDomain):
    q = domain.R.values / 8.0
    rep = solve_dirichlet(EllipticProblem(domain.grid, domain.metric, q=q, boundary=1.0))
    return rep


def _energy_bounds(domain: CompactDomain, inputs: BoundInputs, prefix: str, base_checks,
                   lam: float) -> list[Verdict]:
    """Sobolev-form and eigenvalue-form Brown-York bounds (energy bounds times 1/4)."""
    asm = _stencil.assemble(domain.grid, domain.metric, domain.R.values / 8.0, boundary=1.0)
    R_nodes = np.zeros(domain.grid.dims)
    W = np.zeros(domain.grid.dims)
    R_nodes[asm.unknown] = domain.R.values[asm.unknown]
    W[asm.unknown] = asm.mass
    eb = dirichlet_energy_bounds(inputs, R_nodes, W, lam)
    out = []
    vi = Verdict(prefix + "/sobolev-form", domain.name, list(base_checks), mass=domain.m_by)
    vi.check("beta < Lam/2", f"< {inputs.Lam / 2:.6g}", inputs.beta, inputs.beta < inputs.Lam / 2)
    vi.bound = None if eb.bound_i is None else 0.25 * eb.bound_i
    vi.details.update(Lam=inputs.Lam, beta=inputs.beta, delta=inputs.delta)
    out.append(vi)
    vii = Verdict(prefix + "/eigenvalue-form", domain.name, list(base_checks), mass=domain.m_by)
    mn = float(np.min(8 * lam + R_nodes[W > 0])) if np.any(W > 0) else 0.0
    vii.check("8 lam + R > 0", "> 0", mn, eb.bound_ii is not None)
    vii.bound = None if eb.bound_ii is None else 0.25 * eb.bound_ii
    vii.details.update(lam=lam, identity_error=eb.identity_error)
    out.append(vii)
    return out


def _normal_derivative(rep, domain):
    """Mean ``d_nu u`` over the boundary from the discrete Green identity."""
    return rep.boundary_flux / domain.area


def positive_mean_curvature_pipeline(domain: CompactDomain, slack: float = 10.0
                                     ) -> PipelineResult:
    """Brown-York bound for mean-convex collars with a small negative scalar curvature.

    Hypotheses: the boundary has positive Gauss curvature, every level set at
    distance ``s <= s0`` is mean convex, and with ``q = R/8``, ``xi`` from
    :func:`xi_mean_convex`,

    (i)   ``beta < Lam``;
    (ii)  ``alpha <= xi^2``;
    (iii) ``gamma <= moser_threshold(alpha, beta, Lam, xi, s0)``.

    Conclusion checked: ``m_by >= (1/4) int |grad u|^2 + q u^2`` for the
    solution of ``Delta u - q u = 0``, ``u = 1`` on the boundary.  The
    comparison ``u <= phi(dist)`` on the collar (``phi`` from
    :func:`phi_trig`) is checked nodewise with ``slack * h^2``, and the mean
    normal derivative against ``-xi``.  ``corrected_bound`` is
    ``4 int d_nu u``, the value the standard conformal law
    ``H_bar = H + 4 d_nu u`` would give.
    """
    grid = domain.grid
    s, H = domain.level_sets()
    H_min = float(H[0])
    xi = xi_mean_convex(domain.s0, H_min) if H_min > 0 else 0.0
    split = sign_split_and_lp(domain.R.with_values(domain.R.values / 8.0), metric=domain.metric)
    Lam = domain.sobolev
    thresh = moser_threshold(split.alpha, split.beta, Lam, xi, domain.s0)
    v = Verdict("positive-mean-curvature", domain.name, mass=domain.m_by,
                flags=[GAMMA_ESTIMATE] if split.gamma > 0 else [])
    v.check("Gauss curvature of boundary > 0", "> 0", float(domain.gauss_positive),
            domain.gauss_positive)
    v.check("level sets mean convex", "min H > 0", float(np.min(H)), bool(np.min(H) > 0))
    v.check("(i) beta < Lam", f"< {Lam:.6g}", split.beta, split.beta < Lam)
    v.check("(ii) alpha <= xi^2", f"<= {xi * xi:.6g}", split.alpha, split.alpha <= xi * xi)
    v.check("(iii) gamma <= threshold", f"<= {thresh:.6g}", split.gamma, split.gamma <= thresh)
    v.details.update(xi=xi, s0=domain.s0, alpha=split.alpha, beta=split.beta,
                     gamma=split.gamma, gamma_p=split.gamma_p, threshold=thresh, Lam=Lam)
    base = list(v.checks)
    try:
        rep = _solve_conformal(domain)
    except NonCoerciveOperator:
        v.flags.append("non-coercive")
        return PipelineResult([v], None, None, None, None, None)
    v.bound = 0.25 * rep.energy
    collar = domain.collar
    f = phi_trig(xi, domain.distance[collar])
    gap = float(np.max(rep.u.values[collar] - f)) if np.any(collar) else -math.inf
    dnu = _normal_derivative(rep, domain)
    v.details.update(energy=rep.energy, flux=rep.boundary_flux, comparison_gap=gap,
                     comparison_ok=bool(gap <= slack * grid.h ** 2), normal_derivative=dnu,
                     normal_floor=-xi, corrected_bound=4 * rep.boundary_flux,
                     green_residual=abs(rep.boundary_flux - rep.energy))
    lam = first_dirichlet_eigenvalue(grid, domain.metric).lam
    inputs = BoundInputs(Lam=Lam, lam=lam, beta=split.beta, delta=split.delta,
                         int_R_plus=integrate(domain.R.positive_part(), domain.metric),
                         int_R_minus=integrate(domain.R.negative_part(), domain.metric))
    extra = _energy_bounds(domain, inputs, "positive-mean-curvature", base, lam)
    return PipelineResult([v] + extra, rep.energy, rep.boundary_flux, gap, dnu,
                          4 * rep.boundary_flux)


def positive_scalar_curvature_pipeline(domain: CompactDomain, slack: float = 10.0
                                       ) -> PipelineResult:
    """Brown-York bound for positive scalar curvature with possibly negative ``H``.

    With ``xi = sqrt(R_min)/4`` (``R_min`` over the collar) the hypotheses are
    ``R >= 0``, positive Gauss curvature of the boundary and

    (i)  ``xi >= H+ tanh(xi s0)`` on every level set in the collar;
    (ii) ``xi tanh(xi s0) >= -4 H_min`` on the boundary.

    Conclusion checked: ``m_by >= (1/4) |Sigma| xi tanh(xi s0)``.  The proof's
    comparison ``u <= phi(dist)`` (``phi`` from :func:`phi_hyp`, extended by
    ``phi(s0)`` past the collar) is checked nodewise, and the mean normal
    derivative against the floor ``xi tanh(xi s0)``.
    """
    grid = domain.grid
    s, H = domain.level_sets()
    inside = grid.inside
    R_all = domain.R.values[inside]
    R_collar = domain.R.values[domain.collar]
    R_min = float(R_collar.min()) if R_collar.size else 0.0
    v = Verdict("positive-scalar-curvature", domain.name, mass=domain.m_by)
    v.check("R >= 0", ">= 0", float(R_all.min()), bool(R_all.min() >= -1e-10))
    v.check("Gauss curvature of boundary > 0", "> 0", float(domain.gauss_positive),
            domain.gauss_positive)
    xi = xi_scalar(max(R_min, 0.0))
    t = math.tanh(xi * domain.s0)
    Hp = float(np.max(np.maximum(H, 0.0)))
    H_min = float(H[0])
    v.check("(i) xi >= H+ tanh(xi s0)", f">= {Hp * t:.6g}", xi, xi >= Hp * t)
    v.check("(ii) xi tanh(xi s0) >= -4 H_min", f">= {-4 * H_min:.6g}", xi * t,
            xi * t >= -4 * H_min)
    v.bound = 0.25 * domain.area * xi * t
    v.details.update(xi=xi, s0=domain.s0, R_min=R_min, H_plus=Hp, H_min=H_min,
                     floor=xi * t)
    base = list(v.checks)
    try:
        rep = _solve_conformal(domain)
    except NonCoerciveOperator:
        v.flags.append("non-coercive")
        return PipelineResult([v], None, None, None, None, None)
    d = np.minimum(domain.distance, domain.s0)
    f = phi_hyp(xi, domain.s0, d[inside])
    gap = float(np.max(rep.u.values[inside] - f))
    dnu = _normal_derivative(rep, domain)
    v.details.update(energy=rep.energy, flux=rep.boundary_flux, comparison_gap=gap,
                     comparison_ok=bool(gap <= slack * grid.h ** 2), normal_derivative=dnu,
                     corrected_bound=4 * rep.boundary_flux,
                     green_residual=abs(rep.boundary_flux - rep.energy))
    lam = first_dirichlet_eigenvalue(grid, domain.metric).lam
    split = sign_split_and_lp(domain.R.with_values(domain.R.values / 8.0), metric=domain.metric)
    inputs = BoundInputs(Lam=domain.sobolev, lam=lam, beta=split.beta, delta=split.delta,
                         int_R_plus=integrate(domain.R.positive_part(), domain.metric),
                         int_R_minus=0.0)
    extra = _energy_bounds(domain, inputs, "positive-scalar-curvature", base, lam)
    return PipelineResult([v] + extra, rep.energy, rep.boundary_flux, gap, dnu,
                          4 * rep.boundary_flux)


def mean_convex_nonnegative(domain: CompactDomain) -> Verdict:
    """``R >= 0``, ``H >= 0`` and positive Gauss curvature imply ``m_by >= 0``."""
    s, H = domain.level_sets(2)
    v = Verdict("mean-convex-nonnegative", domain.name, mass=domain.m_by, bound=0.0)
    R = domain.R.values[domain.grid.inside]
    v.check("R >= 0", ">= 0", float(R.min()), bool(R.min() >= -1e-10))
    v.check("H >= 0 on boundary", ">= 0", float(H[0]), bool(H[0] >= 0))
    v.check("Gauss curvature of boundary > 0", "> 0", float(domain.gauss_positive),
            domain.gauss_positive)
    return v


# --------------------------------------------------------------------------- flat-space inequalities


def minkowski_checks(functionals, scenario: str = "") -> Verdict:
    """Minkowski inequalities ``(int H0)^2 >= 16 pi A`` and ``4 A^4/(9 V^2) >= (int H0)^2``.

    ``details`` holds both margins and the gap ``4A^4/(9V^2) - 16 pi A``,
    which tends to zero only for round spheres.  The second inequality is
    skipped when ``V`` is None.
    """
    IH, A, V = functionals.integral_H0, functionals.area, functionals.volume
    v = Verdict("minkowski", scenario)
    v.check("convex", "true", float(functionals.convex), functionals.convex)
    m1 = IH ** 2 - 16 * np.pi * A
    v.check("(int H0)^2 >= 16 pi A", f">= {16 * np.pi * A:.10g}", IH ** 2,
            m1 >= -1e-8 * IH ** 2)
    v.details.update(area_margin=m1, area_margin_rel=m1 / IH ** 2)
    if V is not None:
        lhs = 4 * A ** 4 / (9 * V ** 2)
        m2 = lhs - IH ** 2
        v.check("4A^4/(9V^2) >= (int H0)^2", f">= {IH ** 2:.10g}", lhs, m2 >= -1e-8 * lhs)
        v.details.update(volume_margin=m2, volume_margin_rel=m2 / lhs,
                         sharpness_gap=lhs - 16 * np.pi * A)
    v.bound = 0.0
    v.mass = min(v.details["area_margin"], v.details.get("volume_margin", math.inf))
    return v


def herzlich_threshold(area: float) -> float:
    """``4 sqrt(pi / A)``; equals 2 for the unit sphere."""
    return 4.0 * math.sqrt(math.pi / area)


def herzlich_check(H, area: float, scenario: str = "", rtol: float = 1e-10) -> Verdict:
    """Whether ``sup H <= 4 sqrt(pi/A)`` on an inner boundary (inner normal)."""
    Hs = float(np.max(np.asarray(H, dtype=float)))
    thr = herzlich_threshold(area)
    v = Verdict("herzlich", scenario)
    v.check("sup H <= 4 sqrt(pi/A)", f"<= {thr:.12g}", Hs, Hs <= thr * (1 + rtol))
    v.details.update(threshold=thr, sup_H=Hs, borderline=bool(abs(Hs - thr) <= rtol * thr))
    return v


def herzlich_sharpness(functionals) -> dict:
    """Excess mean curvature usable in the sharpness construction for a convex surface.

    For constant ``H`` on ``Sigma`` with ``(int H)^2 = 16 pi A + eps``,
    ``eps`` can be as large as ``4A^4/(9V^2) - 16 pi A`` before a
    nonnegative mass would contradict the volume inequality.  Returns that
    gap and the corresponding ``H - 4 sqrt(pi/A)``.
    """
    A, V = functionals.area, functionals.volume
    gap = 4 * A ** 4 / (9 * V ** 2) - 16 * np.pi * A
    H_const = math.sqrt(16 * np.pi * A + gap) / A
    return {"gap": gap, "H": H_const, "excess": H_const - herzlich_threshold(A)}
