"""Dense convex quadratic programming.

Problems have the form::

    minimize    1/2 x'Px + q'x + offset
    subject to  A_eq x  = b_eq
                A_in x <= b_in
                lower <= x <= upper

and are solved with an ADMM operator-splitting iteration (OSQP-style, dense
linear algebra) followed by an active-set polishing step that solves the KKT
system of the guessed active constraints exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

INFINITY = 1e20
INF_THRESHOLD = 1e19


class QpError(Exception):
    """Base class for QP input errors."""


class DimensionMismatch(QpError, ValueError):
    pass


class NonConvex(QpError, ValueError):
    pass


class SingularKkt(QpError, np.linalg.LinAlgError):
    pass


class QpStatus(enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    ITER_LIMIT = "iter_limit"


def _as_matrix(a, ncols: int, name: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, ncols))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.zeros((0, ncols))
    if a.shape[1] != ncols:
        raise DimensionMismatch(f"{name} has {a.shape[1]} columns, expected {ncols}")
    return a


def _as_vector(v, size: int, name: str, fill: float = 0.0) -> np.ndarray:
    if v is None:
        return np.full(size, fill)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != size:
        raise DimensionMismatch(f"{name} has length {v.shape[0]}, expected {size}")
    return v


@dataclass
class QuadraticProgram:
    """Dense QP data. Infinite bounds may be given as ``±inf`` or ``±1e20``."""

    hessian: np.ndarray
    linear_cost: np.ndarray
    eq_matrix: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None
    ineq_matrix: np.ndarray | None = None
    ineq_rhs: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    offset: float = 0.0

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        n = P.shape[0]
        if P.shape != (n, n):
            raise DimensionMismatch(f"hessian must be square, got {P.shape}")
        if n and np.max(np.abs(P - P.T)) > 1e-12 * max(1.0, np.max(np.abs(P))):
            raise DimensionMismatch("hessian is not symmetric")
        self.hessian = 0.5 * (P + P.T)
        self.linear_cost = _as_vector(self.linear_cost, n, "linear_cost")
        self.eq_matrix = _as_matrix(self.eq_matrix, n, "eq_matrix")
        self.eq_rhs = _as_vector(self.eq_rhs, self.eq_matrix.shape[0], "eq_rhs")
        self.ineq_matrix = _as_matrix(self.ineq_matrix, n, "ineq_matrix")
        self.ineq_rhs = _as_vector(self.ineq_rhs, self.ineq_matrix.shape[0], "ineq_rhs")
        lo = _as_vector(self.lower, n, "lower", -INFINITY)
        hi = _as_vector(self.upper, n, "upper", INFINITY)
        self.lower = np.maximum(lo, -INFINITY)
        self.upper = np.minimum(hi, INFINITY)
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        self.offset = float(self.offset)

    @property
    def n(self) -> int:
        return self.hessian.shape[0]

    def objective(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.hessian @ x + self.linear_cost @ x + self.offset)

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.eq_matrix.shape[0]:
            worst = max(worst, float(np.max(np.abs(self.eq_matrix @ x - self.eq_rhs))))
        if self.ineq_matrix.shape[0]:
            worst = max(worst, float(np.max(self.ineq_matrix @ x - self.ineq_rhs)))
        lo = np.where(self.lower <= -INF_THRESHOLD, -np.inf, self.lower)
        hi = np.where(self.upper >= INF_THRESHOLD, np.inf, self.upper)
        if x.size:
            worst = max(worst, float(np.max(lo - x)), float(np.max(x - hi)))
        return worst

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> QuadraticProgram:
        """Copy sharing the matrices but with new variable bounds."""
        return replace(self, lower=np.array(lower, dtype=float), upper=np.array(upper, dtype=float))


@dataclass
class QpSolution:
    status: QpStatus
    primal: np.ndarray | None
    dual_eq: np.ndarray | None = None
    dual_ineq: np.ndarray | None = None
    dual_bounds: np.ndarray | None = None
    objective: float = np.nan
    iterations: int = 0
    polished: bool = False
    certificate: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


@dataclass
class QpSettings:
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    eps_prim_inf: float = 1e-8
    eps_dual_inf: float = 1e-8
    # the certificate test must hold this many iterations in a row
    inf_patience: int = 25
    max_iter: int = 20000
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    scaling_iter: int = 10
    check_interval: int = 5
    adaptive_rho_interval: int = 25
    adaptive_rho_tolerance: float = 5.0
    polish_delta: float = 1e-9
    polish_refine_iter: int = 8
    polish_rounds: int = 25
    polish_early_rounds: int = 4
    # early polish attempts start once ADMM residuals are this many times the target
    polish_gate: float = 1e4
    polish_interval: int = 20
    # approximate certificate quality at which exact certificate recovery is tried
    cert_gate: float = 1e-2
    cert_first: int = 30
    cert_interval: int = 250
    # iteration at which a stalled ADMM run hands over to the active-set method
    fallback_iter: int = 600


DEFAULT_SETTINGS = QpSettings()

_RHO_MIN, _RHO_MAX = 1e-6, 1e6
_RHO_EQ_SCALE = 1e3
_SCALE_MIN, _SCALE_MAX = 1e-4, 1e4


@dataclass
class _Stacked:
    """Single-sided form ``l <= C x <= u`` with row bookkeeping."""

    C: np.ndarray
    l: np.ndarray
    u: np.ndarray
    n_eq: int
    n_in: int
    bound_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def _finite_bounds(qp: QuadraticProgram) -> np.ndarray:
    return np.flatnonzero((qp.lower > -INF_THRESHOLD) | (qp.upper < INF_THRESHOLD))


def _stack(qp: QuadraticProgram, C: np.ndarray | None = None) -> _Stacked:
    n = qp.n
    bound_idx = _finite_bounds(qp)
    if C is None:
        I = np.zeros((bound_idx.size, n))
        I[np.arange(bound_idx.size), bound_idx] = 1.0
        C = np.vstack([qp.eq_matrix, qp.ineq_matrix, I])
    l = np.concatenate([qp.eq_rhs, np.full(qp.ineq_matrix.shape[0], -np.inf), qp.lower[bound_idx]])
    u = np.concatenate([qp.eq_rhs, qp.ineq_rhs, qp.upper[bound_idx]])
    l[l <= -INF_THRESHOLD] = -np.inf
    u[u >= INF_THRESHOLD] = np.inf
    return _Stacked(C, l, u, qp.eq_matrix.shape[0], qp.ineq_matrix.shape[0], bound_idx)


class PreparedQp:
    """Scaled problem data shared by QPs that differ only in their bounds.

    Branch-and-bound solves many relaxations with the same matrices; passing
    one ``PreparedQp`` to :func:`solve_qp` skips the convexity check and the
    equilibration for each of them. Which variables have finite bounds must
    not change.
    """

    def __init__(self, qp: QuadraticProgram, settings: QpSettings | None = None):
        s = settings or DEFAULT_SETTINGS
        st = _stack(qp)
        _check_convex(qp.hessian)
        self.n = qp.n
        self.bound_idx = st.bound_idx
        self.C_raw = st.C
        self.scaling_iter = s.scaling_iter
        self.P, self.q, self.C, self.D, self.E, self.c = _ruiz(qp.hessian, qp.linear_cost, st.C, s.scaling_iter)

    def matches(self, qp: QuadraticProgram) -> bool:
        return qp.n == self.n and np.array_equal(_finite_bounds(qp), self.bound_idx)


def _check_convex(P: np.ndarray) -> None:
    try:
        sla.cho_factor(P + 1e-8 * np.eye(P.shape[0]), check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NonConvex("hessian has a negative eigenvalue") from exc


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _limit_scaling(v: np.ndarray) -> np.ndarray:
    v = np.where(v < _SCALE_MIN, 1.0, v)
    return np.minimum(v, _SCALE_MAX)


def _ruiz(P: np.ndarray, q: np.ndarray, C: np.ndarray, iters: int):
    """Modified Ruiz equilibration of the KKT matrix plus cost scaling."""
    n, m = P.shape[0], C.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    Ps, qs, Cs = P.copy(), q.copy(), C.copy()
    for _ in range(iters):
        col = np.max(np.abs(Ps), axis=0) if n else np.zeros(0)
        if m:
            col = np.maximum(col, np.max(np.abs(Cs), axis=0))
            row = np.max(np.abs(Cs), axis=1)
            dE = 1.0 / np.sqrt(_limit_scaling(row))
        else:
            dE = np.ones(0)
        dD = 1.0 / np.sqrt(_limit_scaling(col))
        Ps = dD[:, None] * Ps * dD[None, :]
        qs = dD * qs
        Cs = dE[:, None] * Cs * dD[None, :]
        D *= dD
        E *= dE
    mean_col = float(np.mean(np.max(np.abs(Ps), axis=0))) if n else 0.0
    c = 1.0 / _limit_scaling(np.array([max(mean_col, _inf_norm(qs))]))[0]
    return Ps * c, qs * c, Cs, D, E, c


class _Admm:
    """ADMM workspace for one problem (scaled data, factorization, iterates)."""

    def __init__(self, qp: QuadraticProgram, settings: QpSettings, prepared: PreparedQp | None = None):
        self.qp = qp
        self.s = settings
        if prepared is None:
            prepared = PreparedQp(qp, settings)
        elif not prepared.matches(qp):
            raise DimensionMismatch("prepared data does not match the problem's bound pattern")
        self.st = _stack(qp, prepared.C_raw)
        self.P, self.q, self.C = prepared.P, prepared.q, prepared.C
        self.D, self.E, self.c = prepared.D, prepared.E, prepared.c
        self.l = self.E * self.st.l
        self.u = self.E * self.st.u
        self.n, self.m = self.C.shape[1], self.C.shape[0]
        self.eq_rows = np.isfinite(self.l) & np.isfinite(self.u) & (np.abs(self.u - self.l) < 1e-12)
        self.free_rows = ~np.isfinite(self.l) & ~np.isfinite(self.u)
        self._set_rho(settings.rho)

    # -- linear system -----------------------------------------------------
    def _set_rho(self, rho: float) -> None:
        self.rho = float(np.clip(rho, _RHO_MIN, _RHO_MAX))
        rv = np.full(self.m, self.rho)
        rv[self.eq_rows] = _RHO_EQ_SCALE * self.rho
        rv[self.free_rows] = _RHO_MIN
        self.rho_vec = rv
        K = self.P + self.s.sigma * np.eye(self.n) + (self.C.T * rv) @ self.C
        try:
            self.factor = sla.cho_factor(K, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NonConvex("hessian is not positive semidefinite") from exc

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        return sla.cho_solve(self.factor, rhs, check_finite=False)

    # -- residuals (unscaled) ----------------------------------------------
    def residuals(self, x, z, y):
        Dinv, Einv = 1.0 / self.D, 1.0 / self.E
        Cx = self.C @ x
        Px = self.P @ x
        Cty = self.C.T @ y
        r_prim = _inf_norm(Einv * (Cx - z))
        r_dual = _inf_norm(Dinv * (Px + self.q + Cty)) / self.c
        prim_scale = max(_inf_norm(Einv * Cx), _inf_norm(Einv * z))
        dual_scale = max(_inf_norm(Dinv * Px), _inf_norm(Dinv * Cty), _inf_norm(Dinv * self.q)) / self.c
        eps_p = self.s.eps_abs + self.s.eps_rel * prim_scale
        eps_d = self.s.eps_abs + self.s.eps_rel * dual_scale
        return r_prim, r_dual, eps_p, eps_d, prim_scale, dual_scale

    def primal_certificate(self, dy: np.ndarray, eps: float | None = None) -> np.ndarray | None:
        """Return the unscaled Farkas vector if ``dy`` certifies infeasibility."""
        dy = dy.copy()
        lo_inf = ~np.isfinite(self.l)
        hi_inf = ~np.isfinite(self.u)
        dy[lo_inf & hi_inf] = 0.0
        dy[hi_inf & ~lo_inf] = np.minimum(dy[hi_inf & ~lo_inf], 0.0)
        dy[lo_inf & ~hi_inf] = np.maximum(dy[lo_inf & ~hi_inf], 0.0)
        norm = _inf_norm(self.E * dy)
        if norm <= 0.0:
            return None
        eps = (self.s.eps_prim_inf if eps is None else eps) * norm
        if _inf_norm((self.C.T @ dy) / self.D) > eps:
            return None
        pos, neg = np.maximum(dy, 0.0), np.minimum(dy, 0.0)
        support = float(np.dot(np.where(np.isfinite(self.u), self.u, 0.0), pos)
                        + np.dot(np.where(np.isfinite(self.l), self.l, 0.0), neg))
        if support >= -eps:
            return None
        return self.E * dy / norm

    def polish_certificate(self) -> np.ndarray | None:
        """Look for an exact Farkas vector with a small LP.

        Solves ``min u'p - l'n`` over ``C'(p - n) = 0``, ``sum(p + n) = 1``,
        ``p, n >= 0`` (zero on infinite sides) in the scaled data. A negative
        optimum is a certificate; it is verified against the unscaled data.
        """
        m = self.m
        hi_fin = np.isfinite(self.u)
        lo_fin = np.isfinite(self.l)
        if not np.any(hi_fin | lo_fin):
            return None
        cost = np.concatenate([np.where(hi_fin, self.u, 0.0), -np.where(lo_fin, self.l, 0.0)])
        A = np.vstack([np.hstack([self.C.T, -self.C.T]), np.ones((1, 2 * m))])
        rhs = np.zeros(self.n + 1)
        rhs[-1] = 1.0
        bounds = np.column_stack([np.zeros(2 * m), np.concatenate([hi_fin, lo_fin]).astype(float)])
        res = linprog(cost, A_eq=A, b_eq=rhs, bounds=bounds, method="highs")
        if res.status != 0 or res.fun >= -self.s.eps_prim_inf:
            return None
        y = self.E * (res.x[:m] - res.x[m:])
        return y if _is_farkas(self.st, y, self.s.eps_prim_inf) else None

    def dual_certificate(self, dx: np.ndarray) -> np.ndarray | None:
        norm = _inf_norm(self.D * dx)
        if norm <= 0.0:
            return None
        eps = self.s.eps_dual_inf * norm
        if _inf_norm((self.P @ dx) / self.D) > self.c * eps:
            return None
        if float(self.q @ dx) >= -self.c * eps:
            return None
        Cdx = (self.C @ dx) / self.E
        for i in range(self.m):
            if np.isfinite(self.u[i]) and np.isfinite(self.l[i]):
                if abs(Cdx[i]) > eps:
                    return None
            elif np.isfinite(self.u[i]) and Cdx[i] > eps:
                return None
            elif np.isfinite(self.l[i]) and Cdx[i] < -eps:
                return None
        return self.D * dx / norm

    # -- exact fallback ----------------------------------------------------
    def nearest_feasible(self, x_hint: np.ndarray) -> np.ndarray | None:
        """Feasible point closest to ``x_hint`` in the max-norm (scaled), by LP."""
        n = self.n
        lo_fin, hi_fin = np.isfinite(self.l), np.isfinite(self.u)
        ineq = ~self.eq_rows
        rows, rhs = [], []
        up = ineq & hi_fin
        lo = ineq & lo_fin
        rows += [np.hstack([self.C[up], np.zeros((up.sum(), 1))]),
                 np.hstack([-self.C[lo], np.zeros((lo.sum(), 1))])]
        rhs += [self.u[up], -self.l[lo]]
        eye = np.eye(n)
        rows += [np.hstack([eye, -np.ones((n, 1))]), np.hstack([-eye, -np.ones((n, 1))])]
        rhs += [x_hint, -x_hint]
        A_eq = np.hstack([self.C[self.eq_rows], np.zeros((self.eq_rows.sum(), 1))])
        cost = np.zeros(n + 1)
        cost[-1] = 1.0
        res = linprog(cost, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs),
                      A_eq=A_eq if A_eq.size else None, b_eq=self.u[self.eq_rows] if A_eq.size else None,
                      bounds=(None, None), method="highs",
                      options={"primal_feasibility_tolerance": 1e-10})
        return res.x[:n] if res.status == 0 else None

    def active_set(self, x_hint: np.ndarray, max_iter: int | None = None):
        """Primal active-set method started at the feasible point nearest ``x_hint``.

        Finite and exact, unlike ADMM on problems whose feasible set has no
        interior. Steps along zero-curvature descent directions when the
        reduced Hessian is singular; Bland's rule after degenerate steps.
        Returns scaled ``(x, y)`` or None (no feasible start, unbounded, or
        budget exhausted).
        """
        x = self.nearest_feasible(x_hint)
        if x is None:
            return None
        n, m = self.n, self.m
        C, l, u = self.C, self.l, self.u
        lo_fin, hi_fin = np.isfinite(l), np.isfinite(u)
        eq = np.flatnonzero(self.eq_rows)
        if eq.size:
            # independent subset of the equality rows
            _, R, piv = sla.qr(C[eq].T, mode="economic", pivoting=True)
            diag = np.abs(np.diag(R))
            keep = diag > 1e-10 * max(1.0, diag[0]) if diag.size else np.zeros(0, bool)
            work = sorted(eq[piv[: int(keep.sum())]].tolist())
        else:
            work = []
        side = np.zeros(m)  # +1 upper, -1 lower for working inequality rows
        degenerate = 0
        budget = max_iter or 10 * (n + m)
        for _ in range(budget):
            g = self.P @ x + self.q
            A = C[work]
            if work:
                _, S, Vt = np.linalg.svd(A, full_matrices=True)
                rank = int(np.sum(S > 1e-10 * S[0]))
                Z = Vt[rank:].T
            else:
                Z = np.eye(n)
            d = np.zeros(n)
            ray = False
            if Z.shape[1]:
                H = Z.T @ self.P @ Z
                r = Z.T @ g
                ev, V = np.linalg.eigh(H)
                flat = ev <= 1e-10 * max(1.0, float(ev[-1]))
                r0 = V[:, flat].T @ r
                if _inf_norm(r0) > 1e-12 * max(1.0, _inf_norm(g)):
                    d = -Z @ (V[:, flat] @ r0)
                    ray = True
                else:
                    Vp = V[:, ~flat]
                    d = -Z @ (Vp @ ((Vp.T @ r) / ev[~flat]))
            if not ray and _inf_norm(d) <= 1e-12 * max(1.0, _inf_norm(x)):
                yw = np.linalg.lstsq(A.T, -g, rcond=None)[0] if work else np.zeros(0)
                y = np.zeros(m)
                y[work] = yw
                tol = 1e-10 * max(1.0, _inf_norm(yw))
                wrong = [(k, i) for k, i in enumerate(work)
                         if not self.eq_rows[i] and side[i] * yw[k] < -tol]
                if not wrong:
                    return x, y
                if degenerate > 5:
                    k, i = wrong[0]
                else:
                    k, i = min(wrong, key=lambda t: side[t[1]] * yw[t[0]])
                work.remove(i)
                side[i] = 0.0
                continue
            Cx, Cd = C @ x, C @ d
            scale = 1e-12 * _inf_norm(d) * np.max(np.abs(C), axis=1)
            out = np.ones(m, dtype=bool)
            out[work] = False
            t_up = np.where(out & hi_fin & (Cd > scale), (u - Cx) / np.where(Cd > scale, Cd, 1.0), np.inf)
            t_lo = np.where(out & lo_fin & (Cd < -scale), (l - Cx) / np.where(Cd < -scale, Cd, 1.0), np.inf)
            t = np.maximum(np.minimum(t_up, t_lo), 0.0)
            alpha = np.inf if ray else 1.0
            block = None
            if t.size and np.min(t) <= alpha:
                alpha = float(np.min(t))
                block = int(np.flatnonzero(t == alpha)[0])
            if not np.isfinite(alpha):
                return None
            x = x + alpha * d
            degenerate = degenerate + 1 if alpha == 0.0 else 0
            if block is not None:
                work = sorted(work + [block])
                side[block] = 1.0 if t_up[block] <= t_lo[block] else -1.0
        return None

    # -- polishing ---------------------------------------------------------
    def polish(self, x, z, y, rounds=None):
        """Solve the KKT system of the active set guessed from ``(z, y)``.

        A wrong guess is corrected for a few rounds, active-set style: rows
        whose multiplier has the wrong sign are released and violated rows are
        added. Returns scaled ``(x, y)`` of a sign-consistent KKT point or None.
        """
        lo_fin, hi_fin = np.isfinite(self.l), np.isfinite(self.u)
        upper_act = (self.u - z < y) & ~self.eq_rows & hi_fin
        lower_act = ((z - self.l < -y) & ~upper_act & lo_fin) | self.eq_rows
        guess_x, guess_y = x, y
        seen = set()
        for _ in range(rounds or self.s.polish_rounds):
            key = (lower_act.tobytes(), upper_act.tobytes())
            if key in seen:
                return None  # cycling
            seen.add(key)
            out = self._kkt_solve(lower_act, upper_act, guess_x, guess_y)
            if out is None:
                return None
            xs, ys = out
            sign_tol = 1e-9 * max(1.0, _inf_norm(ys))
            wrong_up = upper_act & ~self.eq_rows & (ys < -sign_tol)
            wrong_lo = lower_act & ~self.eq_rows & (ys > sign_tol)
            Cx = self.C @ xs
            feas_tol = 1e-9 * max(1.0, _inf_norm(Cx))
            over = hi_fin & ~upper_act & (Cx > self.u + feas_tol)
            under = lo_fin & ~lower_act & (Cx < self.l - feas_tol)
            if not (np.any(wrong_up) or np.any(wrong_lo) or np.any(over) or np.any(under)):
                return xs, ys
            upper_act = (upper_act & ~wrong_up) | over
            lower_act = (lower_act & ~wrong_lo) | under
            guess_x, guess_y = xs, ys
        return None

    def _kkt_solve(self, lower_act, upper_act, x, y):
        act = np.flatnonzero(lower_act | upper_act)
        b = np.where(upper_act, self.u, self.l)[act]
        Ca = self.C[act]
        na = act.size
        delta = self.s.polish_delta
        K0 = np.zeros((self.n + na, self.n + na))
        K0[: self.n, : self.n] = self.P
        K0[: self.n, self.n:] = Ca.T
        K0[self.n:, : self.n] = Ca
        Kd = K0.copy()
        Kd[np.arange(self.n), np.arange(self.n)] += delta
        Kd[np.arange(self.n, self.n + na), np.arange(self.n, self.n + na)] -= delta
        rhs = np.concatenate([-self.q, b])
        try:
            lu = sla.lu_factor(Kd, check_finite=False)
        except (ValueError, np.linalg.LinAlgError):
            return None
        sol = np.concatenate([x, y[act]])
        for _ in range(self.s.polish_refine_iter):
            sol = sol + sla.lu_solve(lu, rhs - K0 @ sol, check_finite=False)
        if not np.all(np.isfinite(sol)):
            return None
        ys = np.zeros(self.m)
        ys[act] = sol[self.n:]
        return sol[: self.n], ys

    def unscale(self, x, y):
        return self.D * x, self.E * y / self.c


def _is_farkas(st: _Stacked, y: np.ndarray, eps: float) -> bool:
    norm = _inf_norm(y)
    if norm <= 0.0:
        return False
    if np.any((~np.isfinite(st.u)) & (y > 0)) or np.any((~np.isfinite(st.l)) & (y < 0)):
        return False
    if _inf_norm(st.C.T @ y) > eps * norm * max(1.0, _inf_norm(st.C)):
        return False
    pos, neg = np.maximum(y, 0.0), np.minimum(y, 0.0)
    support = float(np.dot(np.where(np.isfinite(st.u), st.u, 0.0), pos)
                    + np.dot(np.where(np.isfinite(st.l), st.l, 0.0), neg))
    return support < -eps * norm


def _kkt_ok(qp: QuadraticProgram, st: _Stacked, x: np.ndarray, y: np.ndarray, s: QpSettings) -> bool:
    Cx = st.C @ x
    viol = np.maximum(st.l - Cx, Cx - st.u)
    viol = float(np.max(viol)) if viol.size else 0.0
    Px = qp.hessian @ x
    Cty = st.C.T @ y
    zproj = np.clip(Cx, st.l, st.u)
    eps_p = s.eps_abs + s.eps_rel * max(_inf_norm(Cx), _inf_norm(zproj))
    stat = _inf_norm(Px + qp.linear_cost + Cty)
    eps_d = s.eps_abs + s.eps_rel * max(_inf_norm(Px), _inf_norm(Cty), _inf_norm(qp.linear_cost))
    return viol <= eps_p and stat <= eps_d


def _split_dual(st: _Stacked, y: np.ndarray, n: int):
    ye = y[: st.n_eq]
    yi = y[st.n_eq: st.n_eq + st.n_in]
    yb = np.zeros(n)
    yb[st.bound_idx] = y[st.n_eq + st.n_in:]
    return ye, yi, yb


def _finish(qp, st, x, y, iters, polished) -> QpSolution:
    ye, yi, yb = _split_dual(st, y, qp.n)
    return QpSolution(QpStatus.OPTIMAL, x, ye, yi, yb, qp.objective(x), iters, polished)


def solve_qp(
    qp: QuadraticProgram,
    initial_guess: np.ndarray | None = None,
    settings: QpSettings | None = None,
    initial_dual: np.ndarray | None = None,
    prepared: PreparedQp | None = None,
) -> QpSolution:
    """Solve a convex QP.

    Parameters
    ----------
    qp : QuadraticProgram
    initial_guess : array, optional
        Primal starting point for the ADMM iterates.
    settings : QpSettings, optional
    initial_dual : array, optional
        Multipliers of the stacked constraints ``[eq; ineq; finite bounds]``
        (e.g. ``QpSolution`` duals of a nearby problem re-stacked by
        :func:`stack_dual`).
    prepared : PreparedQp, optional
        Scaled data of a problem with the same matrices (bounds may differ).

    Returns
    -------
    QpSolution
        ``OPTIMAL`` solutions satisfy the KKT conditions to the configured
        tolerances. ``PRIMAL_INFEASIBLE`` carries a Farkas vector ``y`` over the
        stacked constraints with ``C'y ~ 0`` and ``u'y+ + l'y- < 0``.
    """
    s = settings or DEFAULT_SETTINGS
    n = qp.n
    if n == 0:
        return _trivial(qp)
    ws = _Admm(qp, s, prepared)
    m = ws.m
    if initial_guess is not None:
        x = _as_vector(initial_guess, n, "initial_guess") / ws.D
    else:
        x = np.zeros(n)
    z = np.clip(ws.C @ x, ws.l, ws.u)
    y = np.zeros(m) if initial_dual is None else _as_vector(initial_dual, m, "initial_dual") * ws.c / ws.E
    sigma, alpha = s.sigma, s.alpha
    prim_streak = dual_streak = 0
    last_polish = last_cert = -np.inf
    fallback_done = False
    next_cert = s.cert_first
    for it in range(1, s.max_iter + 1):
        x_prev, z_prev, y_prev = x, z, y
        rhs = sigma * x - ws.q + ws.C.T @ (ws.rho_vec * z - y)
        xt = ws._solve(rhs)
        zt = ws.C @ xt
        x = alpha * xt + (1.0 - alpha) * x_prev
        zr = alpha * zt + (1.0 - alpha) * z_prev
        z = np.clip(zr + y / ws.rho_vec, ws.l, ws.u)
        y = y + ws.rho_vec * (zr - z)

        # certificates are tested every iteration once a streak has started
        dy = y - y_prev
        if prim_streak or it % s.check_interval == 0:
            cert = ws.primal_certificate(dy)
            prim_streak = prim_streak + 1 if cert is not None else 0
            if prim_streak >= s.inf_patience:
                return QpSolution(QpStatus.PRIMAL_INFEASIBLE, None, iterations=it, certificate=cert)
            # the LP is tried when dy looks like a certificate, and now and then
            # regardless, since a poor dual start can keep dy away from one
            if cert is None and it - last_cert >= s.polish_interval and (
                    ws.primal_certificate(dy, s.cert_gate) is not None or it >= next_cert):
                last_cert = it
                next_cert = it + s.cert_interval
                cert = ws.polish_certificate()
                if cert is not None:
                    return QpSolution(QpStatus.PRIMAL_INFEASIBLE, None, iterations=it, certificate=cert)
        if dual_streak or it % s.check_interval == 0:
            cert = ws.dual_certificate(x - x_prev)
            dual_streak = dual_streak + 1 if cert is not None else 0
            if dual_streak >= s.inf_patience:
                return QpSolution(QpStatus.DUAL_INFEASIBLE, None, iterations=it, certificate=cert)

        if it % s.check_interval:
            continue
        r_p, r_d, eps_p, eps_d, p_scale, d_scale = ws.residuals(x, z, y)
        converged = r_p <= eps_p and r_d <= eps_d
        near = r_p <= s.polish_gate * eps_p and r_d <= s.polish_gate * eps_d
        if converged or (near and it - last_polish >= s.polish_interval):
            last_polish = it
            # early attempts get a short correction budget
            pol = ws.polish(x, z, y, None if converged else s.polish_early_rounds)
            if pol is not None:
                xu, yu = ws.unscale(*pol)
                if _kkt_ok(qp, ws.st, xu, yu, s):
                    return _finish(qp, ws.st, xu, yu, it, True)
            if converged:
                xu, yu = ws.unscale(x, y)
                if _kkt_ok(qp, ws.st, xu, yu, s):
                    return _finish(qp, ws.st, xu, yu, it, False)
        if it >= s.fallback_iter and not fallback_done:
            fallback_done = True
            exact = ws.active_set(x)
            if exact is not None:
                xu, yu = ws.unscale(*exact)
                if _kkt_ok(qp, ws.st, xu, yu, s):
                    return _finish(qp, ws.st, xu, yu, it, True)
            elif ws.nearest_feasible(x) is None:
                cert = ws.polish_certificate()
                if cert is not None:
                    return QpSolution(QpStatus.PRIMAL_INFEASIBLE, None, iterations=it, certificate=cert)
        if it % s.adaptive_rho_interval == 0 and r_p > 0 and r_d > 0:
            ratio = np.sqrt((r_p / max(p_scale, 1e-30)) / (r_d / max(d_scale, 1e-30)))
            if ratio > s.adaptive_rho_tolerance or ratio < 1.0 / s.adaptive_rho_tolerance:
                ws._set_rho(ws.rho * ratio)
    xu, yu = ws.unscale(x, y)
    ye, yi, yb = _split_dual(ws.st, yu, n)
    return QpSolution(QpStatus.ITER_LIMIT, xu, ye, yi, yb, qp.objective(xu), s.max_iter)


def _trivial(qp: QuadraticProgram) -> QpSolution:
    x = np.zeros(0)
    if qp.violation(x) > 0:
        return QpSolution(QpStatus.PRIMAL_INFEASIBLE, None)
    return QpSolution(QpStatus.OPTIMAL, x, np.zeros(qp.eq_matrix.shape[0]),
                      np.zeros(qp.ineq_matrix.shape[0]), x, qp.offset, 0, True)


def stack_dual(qp: QuadraticProgram, sol: QpSolution) -> np.ndarray:
    """Stack the multipliers of ``sol`` in the layout :func:`solve_qp` expects."""
    st = _stack(qp)
    return np.concatenate([sol.dual_eq, sol.dual_ineq, sol.dual_bounds[st.bound_idx]])


def solve_eq_qp(hessian, linear_cost, eq_matrix, eq_rhs) -> np.ndarray:
    """Minimize ``1/2 x'Px + q'x`` subject to ``Ax = b`` with one KKT solve."""
    P = np.atleast_2d(np.asarray(hessian, dtype=float))
    n = P.shape[0]
    q = _as_vector(linear_cost, n, "linear_cost")
    A = _as_matrix(eq_matrix, n, "eq_matrix")
    b = _as_vector(eq_rhs, A.shape[0], "eq_rhs")
    K, rhs = kkt_system(P, q, A, b)
    try:
        lu = sla.lu_factor(K, check_finite=False)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularKkt(str(exc)) from exc
    if np.any(np.abs(np.diag(lu[0])) < 1e-13 * max(1.0, np.max(np.abs(K)))):
        raise SingularKkt("KKT matrix is singular")
    sol = sla.lu_solve(lu, rhs, check_finite=False)
    return sol[:n]


def kkt_system(P, q, A, b):
    """KKT matrix and right-hand side of an equality-constrained QP."""
    n, m = P.shape[0], A.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = P
    K[:n, n:] = A.T
    K[n:, :n] = A
    return K, np.concatenate([-q, b])
