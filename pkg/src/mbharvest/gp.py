"""Geometric programming machinery.

Monomials and posynomials over named positive variables, the single
condensation (AM-GM monomial lower bound of a posynomial), a barrier
interior-point solver working on the log-transformed convex problem, and the
successive convex approximation loop that re-condenses around each iterate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConvergenceError, InfeasibleError, StructuralError


@dataclass(frozen=True)
class Monomial:
    coef: float
    exponents: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.coef > 0 and math.isfinite(self.coef)):
            raise StructuralError(f"monomial coefficient must be positive and finite, got {self.coef}")
        object.__setattr__(self, "exponents", {k: float(v) for k, v in self.exponents.items() if v != 0})

    @property
    def variables(self) -> set[str]:
        return set(self.exponents)

    def __call__(self, z: Mapping[str, float]) -> float:
        val = self.coef
        for name, e in self.exponents.items():
            val *= _positive(z, name) ** e
        return val

    def __mul__(self, other):
        if isinstance(other, Monomial):
            exps = dict(self.exponents)
            for k, v in other.exponents.items():
                exps[k] = exps.get(k, 0.0) + v
            return Monomial(self.coef * other.coef, exps)
        if isinstance(other, Posynomial):
            return other * self
        return Monomial(self.coef * float(other), self.exponents)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Monomial):
            return self * other ** -1
        return Monomial(self.coef / float(other), self.exponents)

    def __rtruediv__(self, other):
        return float(other) * self ** -1

    def __pow__(self, p):
        return Monomial(self.coef ** p, {k: v * p for k, v in self.exponents.items()})

    def __add__(self, other):
        return Posynomial([self]) + other

    __radd__ = __add__


class Posynomial:
    """Sum of monomials.  Zero-coefficient terms are dropped on construction."""

    def __init__(self, terms: Sequence[Monomial | float]):
        kept = []
        for t in terms:
            if not isinstance(t, Monomial):
                t = float(t)
                if t == 0:
                    continue
                if t < 0:
                    raise StructuralError(f"posynomial constant must be >= 0, got {t}")
                t = Monomial(t)
            kept.append(t)
        if not kept:
            raise StructuralError("posynomial needs at least one term")
        self.terms: tuple[Monomial, ...] = tuple(kept)

    def __repr__(self):
        return " + ".join(
            f"{t.coef:g}" + "".join(f"*{k}^{v:g}" for k, v in t.exponents.items()) for t in self.terms
        )

    def __len__(self):
        return len(self.terms)

    @property
    def variables(self) -> set[str]:
        out: set[str] = set()
        for t in self.terms:
            out |= t.variables
        return out

    def __call__(self, z: Mapping[str, float]) -> float:
        return sum(t(z) for t in self.terms)

    def __add__(self, other):
        if isinstance(other, Posynomial):
            return Posynomial(self.terms + other.terms)
        if isinstance(other, Monomial):
            return Posynomial(self.terms + (other,))
        return Posynomial(list(self.terms) + [float(other)])

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Posynomial):
            return Posynomial([a * b for a in self.terms for b in other.terms])
        return Posynomial([t * other for t in self.terms])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Posynomial):
            if len(other) != 1:
                raise StructuralError("can only divide a posynomial by a monomial")
            other = other.terms[0]
        return Posynomial([t / other for t in self.terms])


def var(name: str) -> Monomial:
    return Monomial(1.0, {name: 1.0})


def _positive(z, name):
    v = z[name]
    if not v > 0:
        raise ValueError(f"variable {name} must be positive, got {v}")
    return v


def evaluate(p: Posynomial | Monomial, z: Mapping[str, float]) -> float:
    return p(z)


def condense(g: Posynomial | Monomial, z_prev: Mapping[str, float]) -> Monomial:
    """Monomial approximation of ``g`` from the weighted AM-GM inequality.

    The result never exceeds ``g`` on the positive orthant and matches it at
    ``z_prev``.
    """
    if isinstance(g, Monomial):
        return g
    values = np.array([t(z_prev) for t in g.terms])
    total = values.sum()
    weights = values / total
    exps: dict[str, float] = {}
    log_coef = 0.0
    for t, w, v in zip(g.terms, weights, values):
        if w == 0:
            continue
        # (t(z) / w)^w = (coef / w)^w * prod z^(w * s)
        log_coef += w * (math.log(t.coef) - math.log(w))
        for k, s in t.exponents.items():
            exps[k] = exps.get(k, 0.0) + w * s
    return Monomial(math.exp(log_coef), exps)


@dataclass
class GpProblem:
    """Minimise a posynomial subject to ``f <= 1`` and ``m == 1`` constraints."""

    objective: Posynomial
    inequalities: list[Posynomial] = field(default_factory=list)
    equalities: list[Monomial] = field(default_factory=list)
    variables: tuple[str, ...] | None = None

    def __post_init__(self):
        if isinstance(self.objective, Monomial):
            self.objective = Posynomial([self.objective])
        self.inequalities = [Posynomial([c]) if isinstance(c, Monomial) else c for c in self.inequalities]
        used = set(self.objective.variables)
        for c in self.inequalities:
            used |= c.variables
        for c in self.equalities:
            used |= c.variables
        if self.variables is None:
            self.variables = tuple(sorted(used))
        else:
            missing = used - set(self.variables)
            if missing:
                raise StructuralError(f"constraints reference undeclared variables {sorted(missing)}")
            self.variables = tuple(self.variables)

    def max_violation(self, z: Mapping[str, float]) -> float:
        """Largest of ``f(z) - 1`` over inequalities and ``|m(z) - 1|`` over equalities."""
        worst = -math.inf
        for c in self.inequalities:
            worst = max(worst, c(z) - 1.0)
        for c in self.equalities:
            worst = max(worst, abs(c(z) - 1.0))
        return worst


class _LseBlock:
    """A stack of functions ``F_l(y) = log sum_k exp(a_k . y + b_k)``."""

    def __init__(self, posys: Sequence[Posynomial], index: Mapping[str, int], n: int):
        rows, logc, sizes = [], [], []
        for p in posys:
            sizes.append(len(p.terms))
            for t in p.terms:
                row = np.zeros(n)
                for k, v in t.exponents.items():
                    row[index[k]] = v
                rows.append(row)
                logc.append(math.log(t.coef))
        self.n_funcs = len(posys)
        self.A = np.array(rows).reshape(len(rows), n)
        self.b = np.array(logc)
        self.starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int) if sizes else np.zeros(0, int)
        self.owner = np.repeat(np.arange(len(sizes)), sizes)

    def values(self, y):
        if self.n_funcs == 0:
            return np.zeros(0)
        u = self.A @ y + self.b
        mx = np.maximum.reduceat(u, self.starts)
        s = np.add.reduceat(np.exp(u - mx[self.owner]), self.starts)
        return mx + np.log(s)

    def full(self, y):
        """Values, gradients (L x n) and softmax term weights."""
        u = self.A @ y + self.b
        mx = np.maximum.reduceat(u, self.starts)
        e = np.exp(u - mx[self.owner])
        s = np.add.reduceat(e, self.starts)
        p = e / s[self.owner]
        G = np.add.reduceat(p[:, None] * self.A, self.starts, axis=0)
        return mx + np.log(s), G, p

    def hessian(self, p, G, w):
        """``sum_l w_l * Hess F_l``."""
        wt = w[self.owner] * p
        return self.A.T @ (wt[:, None] * self.A) - G.T @ (w[:, None] * G)


@dataclass
class GpSolution:
    point: dict[str, float]
    value: float
    newton_steps: int
    kkt_residual: float
    max_violation: float
    duals: np.ndarray

    def __iter__(self):
        # allows ``point, value = solve_gp(...)``
        yield self.point
        yield self.value


class _Barrier:
    """Centering problems ``t * f0(y) - sum log(-F_l(y))`` subject to ``E y = d``.

    ``f0`` is either an LSE block with one function or a linear objective
    (used by phase one).
    """

    def __init__(self, cons: _LseBlock, E, d, obj: _LseBlock | None = None, lin: np.ndarray | None = None,
                 extra_lin_cons=None):
        self.cons, self.E, self.d, self.obj, self.lin = cons, E, d, obj, lin
        # extra affine constraints c . y + c0 <= 0 (phase-one slack bounds)
        self.extra = extra_lin_cons

    def constraint_values(self, y):
        v = self.cons.values(y)
        if self.extra is not None:
            C, c0 = self.extra
            v = np.concatenate([v, C @ y + c0])
        return v

    def f0(self, y):
        if self.lin is not None:
            return float(self.lin @ y)
        return float(self.obj.values(y)[0])

    def phi(self, y, t):
        F = self.constraint_values(y)
        if np.any(F >= 0):
            return math.inf
        return t * self.f0(y) - float(np.sum(np.log(-F)))

    def derivatives(self, y, t):
        n = y.size
        if self.lin is not None:
            g = t * self.lin
            H = np.zeros((n, n))
        else:
            _, G0, p0 = self.obj.full(y)
            g = t * G0[0]
            H = t * self.obj.hessian(p0, G0, np.ones(1))
        if self.cons.n_funcs:
            F, G, p = self.cons.full(y)
            inv = 1.0 / -F
            g = g + G.T @ inv
            H = H + self.cons.hessian(p, G, inv) + G.T @ ((inv ** 2)[:, None] * G)
        if self.extra is not None:
            C, c0 = self.extra
            inv = 1.0 / -(C @ y + c0)
            g = g + C.T @ inv
            H = H + C.T @ ((inv ** 2)[:, None] * C)
        return g, H

    def center(self, y, t, max_steps=60, tol=1e-12):
        steps = 0
        n = y.size
        m_eq = self.E.shape[0]
        best_dec = math.inf
        stalled = 0
        for _ in range(max_steps):
            g, H = self.derivatives(y, t)
            scale = max(1.0, np.trace(H) / n)
            H = H + 1e-13 * scale * np.eye(n)
            if m_eq:
                K = np.block([[H, self.E.T], [self.E, np.zeros((m_eq, m_eq))]])
                rhs = np.concatenate([-g, np.zeros(m_eq)])
            else:
                K, rhs = H, -g
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            dy = sol[:n]
            dec = float(-g @ dy)
            steps += 1
            if dec / 2 <= tol:
                break
            # decrement no longer shrinking: floating-point floor reached
            if dec >= best_dec:
                stalled += 1
                if stalled >= 3:
                    break
            else:
                best_dec, stalled = dec, 0
            s = 1.0
            if dec < 0.25:
                # quadratic region: full step unless it leaves the domain
                while np.any(self.constraint_values(y + s * dy) >= 0):
                    s *= 0.5
                    if s < 1e-16:
                        return y, steps
                y = y + s * dy
                continue
            phi0 = self.phi(y, t)
            while True:
                cand = y + s * dy
                val = self.phi(cand, t)
                if val <= phi0 - 0.25 * s * dec:
                    break
                s *= 0.5
                if s < 1e-16:
                    return y, steps
            y = cand
        return y, steps

    def run(self, y, m, t0=1.0, mu=50.0, gap_tol=1e-10, max_outer=200, stop_early=None):
        t = t0
        total = 0
        for _ in range(max_outer):
            y, k = self.center(y, t)
            total += k
            if stop_early is not None and stop_early(y):
                return y, t, total
            if m / t < gap_tol:
                return y, t, total
            t *= mu
        raise ConvergenceError("barrier method did not reach the duality-gap tolerance", residual=m / t)


def _compile(problem: GpProblem):
    names = problem.variables
    index = {k: i for i, k in enumerate(names)}
    n = len(names)
    obj = _LseBlock([problem.objective], index, n)
    cons = _LseBlock(problem.inequalities, index, n)
    E = np.zeros((len(problem.equalities), n))
    d = np.zeros(len(problem.equalities))
    for r, mono in enumerate(problem.equalities):
        for k, v in mono.exponents.items():
            E[r, index[k]] = v
        d[r] = -math.log(mono.coef)
    return names, obj, cons, E, d


def solve_gp(problem: GpProblem, start: Mapping[str, float] | None = None, *, gap_tol: float = 1e-9,
             feas_tol: float = 1e-8) -> GpSolution:
    """Solve a GP in standard form with a log-barrier interior-point method.

    ``start`` need not be feasible; a phase-one problem (minimise the largest
    constraint value through a slack) is solved first when it is not strictly
    feasible.  Raises :class:`InfeasibleError` when phase one cannot push all
    constraints below zero.
    """
    names, obj, cons, E, d = _compile(problem)
    n = len(names)
    if start is None:
        y = np.zeros(n)
    else:
        y = np.array([math.log(_positive(start, k)) for k in names])

    if E.shape[0]:
        resid = d - E @ y
        corr, *_ = np.linalg.lstsq(E, resid, rcond=None)
        y = y + corr
        if np.max(np.abs(E @ y - d)) > 1e-9:
            raise InfeasibleError("equality constraints are inconsistent")

    m = cons.n_funcs
    newton = 0
    F = cons.values(y)
    if m and np.max(F) >= 0:
        y, k = _phase_one(cons, E, d, y)
        newton += k

    if m == 0:
        # Unconstrained (up to equalities): a barrier with no constraints is plain Newton.
        barrier = _Barrier(cons, E, d, obj=obj)
        y, k = barrier.center(y, 1.0)
        newton += k
        t = math.inf
        duals = np.zeros(0)
    else:
        barrier = _Barrier(cons, E, d, obj=obj)
        y, t, k = barrier.run(y, m, gap_tol=gap_tol)
        newton += k
        duals = 1.0 / (t * -cons.values(y))

    # KKT stationarity in log space: grad f0 + sum lambda grad F_l + E^T nu = 0
    _, G0, _ = obj.full(y)
    r = G0[0].copy()
    if m:
        _, G, _ = cons.full(y)
        r = r + G.T @ duals
    if E.shape[0]:
        nu = np.linalg.lstsq(E.T, -r, rcond=None)[0]
        r = r + E.T @ nu
    point = {k: float(math.exp(v)) for k, v in zip(names, y)}
    viol = problem.max_violation(point) if (problem.inequalities or problem.equalities) else -math.inf
    if viol > feas_tol:
        raise ConvergenceError(f"solution violates constraints by {viol:.3g}", residual=viol)
    return GpSolution(point=point, value=problem.objective(point), newton_steps=newton,
                      kkt_residual=float(np.linalg.norm(r)), max_violation=viol, duals=duals)


def _phase_one(cons: _LseBlock, E, d, y):
    """Find ``y`` with every ``F_l(y) < 0`` via ``min s  s.t.  F_l(y) <= s``."""
    n = y.size
    s0 = float(np.max(cons.values(y))) + 1.0
    # Augment each term's exponent row with a -1 on the slack column.
    aug = _LseBlock.__new__(_LseBlock)
    aug.n_funcs = cons.n_funcs
    aug.A = np.hstack([cons.A, -np.ones((cons.A.shape[0], 1))])
    aug.b = cons.b
    aug.starts, aug.owner = cons.starts, cons.owner
    lin = np.zeros(n + 1)
    lin[-1] = 1.0
    # Slack bounded below by -1 and a log-space box around the start keep
    # phase one bounded when some F_l can decrease without limit.
    box = 50.0
    C = np.zeros((2 * n + 1, n + 1))
    C[:n, :n] = np.eye(n)
    C[n:2 * n, :n] = -np.eye(n)
    C[-1, -1] = -1.0
    c0 = np.concatenate([-y - box, y - box, [-1.0]])
    extra = (C, c0)
    Eaug = np.hstack([E, np.zeros((E.shape[0], 1))]) if E.shape[0] else np.zeros((0, n + 1))
    barrier = _Barrier(aug, Eaug, d, lin=lin, extra_lin_cons=extra)
    w0 = np.concatenate([y, [s0]])

    def feasible(w):
        return float(np.max(cons.values(w[:n]))) < 0

    try:
        w, _, k = barrier.run(w0, cons.n_funcs + 2 * n + 1, gap_tol=1e-12, stop_early=feasible)
    except ConvergenceError as exc:
        raise InfeasibleError("phase one did not converge") from exc
    if not feasible(w):
        raise InfeasibleError(
            f"no strictly feasible point (phase-one optimum {float(np.max(cons.values(w[:n]))):.3g} >= 0)"
        )
    return w[:n], k


@dataclass
class ScaSettings:
    tol: float = 1e-6
    max_iter: int = 50
    start: Mapping[str, float] | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("SCA tolerance must be > 0")


@dataclass
class ScaResult:
    point: dict[str, float]
    value: float
    iterations: int
    history: list[float]
    converged: bool


def sca_solve(builder: Callable[[Mapping[str, float]], GpProblem], settings: ScaSettings,
              trace: Callable[[int, float, Mapping[str, float]], None] | None = None) -> ScaResult:
    """Successive convex approximation.

    ``builder(z_prev)`` returns the GP obtained by condensing around
    ``z_prev``.  ``history[0]`` is the objective at the start point and each
    refinement appends the new subproblem optimum; the loop stops when two
    consecutive entries differ by at most ``settings.tol`` relative to the
    previous one (objectives here are energies of order 1e-7 J, so an
    absolute test would stop after the first refinement).
    """
    if settings.start is None:
        raise ValueError("SCA needs a positive start point")
    z = dict(settings.start)
    chi = builder(z).objective(z)
    history = [chi]
    if trace is not None:
        trace(0, chi, z)
    for r in range(1, settings.max_iter + 1):
        sol = solve_gp(builder(z), start=z)
        z = sol.point
        history.append(sol.value)
        if trace is not None:
            trace(r, sol.value, z)
        if abs(history[-1] - history[-2]) <= settings.tol * abs(history[-2]):
            return ScaResult(z, sol.value, r, history, True)
    warnings.warn(f"SCA stalled after {settings.max_iter} iterations", RuntimeWarning, stacklevel=2)
    return ScaResult(z, history[-1], settings.max_iter, history, False)
