"""Dense solver for the small per-AP convex subproblems.

The problem class: maximize a complex-linear form over a beam matrix plus a
concave scalar quadratic in a floor variable, minus a slack penalty, subject
to affine inequality rows, slack nonnegativity, and Frobenius power balls.
Everything is embedded into real variables and solved with a log-barrier
interior-point method (damped Newton, dense Cholesky).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


# ---------------------------------------------------------------------------
# Generic QCQP engine: minimize 0.5 x'Px + q'x subject to
# f_r(x) = 0.5 x'Q_r x + b_r'x + c_r <= 0, with every Q_r PSD.
# Q_r may be None (affine row), a 1-D array (diagonal), or a dense matrix.
# ---------------------------------------------------------------------------

@dataclass
class QuadConstraint:
    b: np.ndarray
    c: float
    Q: object = None        # None | 1-D diag array | 2-D ndarray

    def value_grad(self, x):
        if self.Q is None:
            return float(self.b @ x + self.c), self.b
        if self.Q.ndim == 1:
            qx = self.Q * x
        else:
            qx = self.Q @ x
        return float(0.5 * x @ qx + self.b @ x + self.c), qx + self.b

    def value(self, x):
        return self.value_grad(x)[0]


@dataclass
class QcqpProblem:
    P: object               # None | 1-D diag array | 2-D ndarray
    q: np.ndarray
    constraints: list

    @property
    def dim(self):
        return self.q.size

    def objective(self, x):
        if self.P is None:
            quad = 0.0
        elif np.ndim(self.P) == 1:
            quad = 0.5 * float(x @ (self.P * x))
        else:
            quad = 0.5 * float(x @ (self.P @ x))
        return quad + float(self.q @ x)


@dataclass
class KernelParams:
    mu0: float = 1.0
    warm_mu0: float = 1e-4
    mu_factor: float = 0.1
    gap_tol: float = 1e-8        # stop once m * mu <= gap_tol (scaled objective)
    newton_tol: float = 1e-10    # half squared Newton decrement
    max_newton: int = 250
    max_inner: int = 50
    armijo: float = 1e-4
    max_backtrack: int = 60


def _strictly_feasible(cons, x, margin=0.0):
    return all(c.value(x) < -margin for c in cons)


def solve_qcqp(problem, x0, params=None):
    """Barrier interior-point solve from a strictly feasible x0.

    Returns (x, info) where info carries status ('optimal' | 'inaccurate'),
    newton step count, final barrier weight, and dual estimates.
    """
    p = params or KernelParams()
    cons = problem.constraints
    m = len(cons)
    n = problem.dim
    x = np.asarray(x0, float).copy()
    if not _strictly_feasible(cons, x):
        raise ValueError("interior-point start is not strictly feasible")

    # scale the objective so the gap tolerance is relative
    if problem.P is None:
        pmax = 0.0
    else:
        pmax = float(np.max(np.abs(problem.P)))
    s0 = max(1.0, float(np.max(np.abs(problem.q), initial=0.0)), pmax)
    q_s = problem.q / s0
    if problem.P is None:
        P_s = None
    else:
        P_s = problem.P / s0

    def f0_grad(x):
        if P_s is None:
            return float(q_s @ x), q_s.copy()
        if P_s.ndim == 1:
            px = P_s * x
        else:
            px = P_s @ x
        return 0.5 * float(x @ px) + float(q_s @ x), px + q_s

    mu = float(p.mu0)
    status = "optimal"
    steps = 0
    while True:
        for _ in range(p.max_inner):
            if steps >= p.max_newton:
                status = "inaccurate"
                break
            vals = np.empty(m)
            grads = np.empty((n, m))
            for r, con in enumerate(cons):
                vals[r], grads[:, r] = con.value_grad(x)
            w1 = mu / (-vals)
            grad = f0_grad(x)[1] + grads @ w1
            # Hessian: objective + constraint curvature + barrier rank-1 terms
            H = np.zeros((n, n))
            if P_s is not None:
                if P_s.ndim == 1:
                    H[np.diag_indices(n)] += P_s
                else:
                    H += P_s
            diag = H.ravel()[:: n + 1]
            for r, con in enumerate(cons):
                if con.Q is None:
                    continue
                if con.Q.ndim == 1:
                    diag += w1[r] * con.Q
                else:
                    H += w1[r] * con.Q
            w2 = w1 ** 2 / mu
            H += (grads * w2) @ grads.T
            diag += 1e-12

            try:
                cho = scipy.linalg.cho_factor(H, check_finite=False)
                dx = scipy.linalg.cho_solve(cho, -grad, check_finite=False)
            except scipy.linalg.LinAlgError:
                H[np.diag_indices(n)] += 1e-8 * (1.0 + np.abs(diag))
                cho = scipy.linalg.cho_factor(H, check_finite=False)
                dx = scipy.linalg.cho_solve(cho, -grad, check_finite=False)

            decrement = float(-grad @ dx)
            # intermediate barrier stages only need rough centering
            if decrement / 2.0 <= max(p.newton_tol, 1e-2 * mu):
                break
            phi = f0_grad(x)[0] - mu * np.sum(np.log(-vals))
            t = 1.0
            moved = False
            for _ in range(p.max_backtrack):
                cand = x + t * dx
                if _strictly_feasible(cons, cand):
                    vals_c = np.array([c.value(cand) for c in cons])
                    phi_c = f0_grad(cand)[0] - mu * np.sum(np.log(-vals_c))
                    if phi_c <= phi + p.armijo * t * float(grad @ dx):
                        x = cand
                        moved = True
                        break
                t *= 0.5
            steps += 1
            if not moved:
                break
        if status == "inaccurate":
            break
        if m * mu <= p.gap_tol:
            break
        mu *= p.mu_factor

    vals = np.array([c.value(x) for c in cons])
    duals = s0 * mu / (-vals)
    return x, {"status": status, "newton_steps": steps, "mu": mu, "duals": duals}


# ---------------------------------------------------------------------------
# The per-AP subproblem layer (single beam matrix + floor + slacks + one ball).
# ---------------------------------------------------------------------------

@dataclass
class AffineRow:
    """Constraint 2*Re{v^H w_col} + coef_gamma*gamma + eps_slack + const >= 0."""
    col: int
    v: np.ndarray              # complex, length M
    coef_gamma: float = 0.0
    slack: object = None       # slack index or None
    const: float = 0.0


@dataclass
class QuadRow:
    """Constraint sum over (col, v) pairs of |v^H w_col|^2 <= bound^2."""
    terms: list                # [(col, complex vector), ...]
    bound: float

    def value(self, W):
        return float(sum(abs(np.vdot(v, W[:, col])) ** 2 for col, v in self.terms))


@dataclass
class SubproblemSpec:
    w_shape: tuple             # (M, D)
    w_lin: np.ndarray          # complex (M, D); objective term Re tr(L^H W)
    p_gamma: float
    q_gamma: float             # >= 0, concavity of the floor term
    gamma_center: float
    slack_penalty: float
    rows: list = field(default_factory=list)
    n_slacks: int = 0
    ball_radius_sq: float = 1.0
    quad_rows: list = field(default_factory=list)
    # optional per-step trust region ||W - center||_F^2 <= radius_sq, used by
    # iterative callers whose affine rows are tangent models around the center
    trust_center: object = None
    trust_radius_sq: float = 0.0

    def objective(self, W, gamma, slacks):
        """True maximization objective at a candidate point."""
        val = float(np.real(np.vdot(self.w_lin, W)))
        val += self.p_gamma * gamma - 0.5 * self.q_gamma * (gamma - self.gamma_center) ** 2
        val -= self.slack_penalty * float(np.sum(slacks))
        return val

    def row_value(self, row, W, gamma, slacks):
        lhs = 2.0 * float(np.real(np.vdot(row.v, W[:, row.col])))
        lhs += row.coef_gamma * gamma + row.const
        if row.slack is not None:
            lhs += slacks[row.slack]
        return lhs


@dataclass
class SubproblemSolution:
    W: np.ndarray
    gamma: float
    slacks: np.ndarray
    objective: float
    status: str
    iterations: int


def _layout(spec):
    M, D = spec.w_shape
    nw = M * D
    return M, D, nw, 2 * nw + 1 + spec.n_slacks


def pack(spec, W, gamma, slacks):
    M, D, nw, n = _layout(spec)
    x = np.empty(n)
    x[:nw] = np.real(W).ravel(order="F")
    x[nw:2 * nw] = np.imag(W).ravel(order="F")
    x[2 * nw] = gamma
    x[2 * nw + 1:] = slacks
    return x

def unpack(spec, x):
    M, D, nw, _ = _layout(spec)
    W = (x[:nw] + 1j * x[nw:2 * nw]).reshape((M, D), order="F")
    return W, float(x[2 * nw]), x[2 * nw + 1:].copy()


def _embed_row(spec, row):
    """Real coefficient vector of an affine row (>= 0 form)."""
    M, D, nw, n = _layout(spec)
    b = np.zeros(n)
    off = row.col * M
    b[off:off + M] = 2.0 * np.real(row.v)
    b[nw + off:nw + off + M] = 2.0 * np.imag(row.v)
    b[2 * nw] = row.coef_gamma
    if row.slack is not None:
        b[2 * nw + 1 + row.slack] = 1.0
    return b


def to_qcqp(spec):
    M, D, nw, n = _layout(spec)
    q = np.zeros(n)
    q[:nw] = -np.real(spec.w_lin).ravel(order="F")
    q[nw:2 * nw] = -np.imag(spec.w_lin).ravel(order="F")
    q[2 * nw] = -(spec.p_gamma + spec.q_gamma * spec.gamma_center)
    q[2 * nw + 1:] = spec.slack_penalty
    P = np.zeros(n)
    P[2 * nw] = spec.q_gamma

    cons = []
    for row in spec.rows:
        b = _embed_row(spec, row)
        cons.append(QuadConstraint(b=-b, c=-row.const, Q=None))
    for qr in spec.quad_rows:
        B = np.zeros((2 * len(qr.terms), n))
        for k, (col, v) in enumerate(qr.terms):
            off = col * M
            B[2 * k, off:off + M] = np.real(v)
            B[2 * k, nw + off:nw + off + M] = np.imag(v)
            B[2 * k + 1, off:off + M] = -np.imag(v)
            B[2 * k + 1, nw + off:nw + off + M] = np.real(v)
        cons.append(QuadConstraint(b=np.zeros(n), c=-qr.bound ** 2,
                                   Q=2.0 * B.T @ B))
    ball = np.zeros(n)
    ball[:2 * nw] = 2.0
    cons.append(QuadConstraint(b=np.zeros(n), c=-spec.ball_radius_sq, Q=ball))
    if spec.trust_center is not None:
        center = np.zeros(n)
        center[:nw] = np.real(spec.trust_center).ravel(order="F")
        center[nw:2 * nw] = np.imag(spec.trust_center).ravel(order="F")
        cons.append(QuadConstraint(
            b=-2.0 * center,
            c=float(np.vdot(center, center).real) - spec.trust_radius_sq,
            Q=ball.copy()))
    for s in range(spec.n_slacks):
        b = np.zeros(n)
        b[2 * nw + 1 + s] = -1.0
        cons.append(QuadConstraint(b=b, c=0.0, Q=None))
    return QcqpProblem(P=P, q=q, constraints=cons)


def feasible_start(spec):
    """Strictly interior (W, gamma, slacks): zero beams, inflated slacks.

    With a trust region the beams sit just inside it at a slightly shrunk
    copy of the center instead of at zero.
    """
    M, D, nw, n = _layout(spec)
    if spec.trust_center is None:
        W = np.zeros((M, D), dtype=complex)
    else:
        # a radial shrink stays strictly inside the power ball (the center is
        # ball-feasible) and inside the trust ball when small enough
        W = np.asarray(spec.trust_center, dtype=complex).copy()
        nrm = np.linalg.norm(W, "fro")
        shrink = min(0.5, 0.3 * np.sqrt(spec.trust_radius_sq) / max(nrm, 1e-30))
        W *= 1.0 - shrink
    gamma = 0.0
    slacks = np.full(spec.n_slacks, 1e-3)
    for row in spec.rows:
        margin = 1e-3 * max(1.0, abs(row.const))
        val = 2.0 * float(np.real(np.vdot(row.v, W[:, row.col]))) + row.const
        if row.slack is not None:
            slacks[row.slack] = max(slacks[row.slack], margin - val)
        elif val < margin:
            raise ValueError("row without slack admits no interior point here")
    return W, gamma, slacks


def solve(spec, warm_start=None, params=None):
    """Solve the subproblem; returns a SubproblemSolution (never silent)."""
    if spec.q_gamma < 0:
        raise ValueError("q_gamma must be nonnegative (concavity)")
    if spec.ball_radius_sq <= 0:
        raise ValueError("ball radius must be positive")
    if any(qr.bound <= 0 for qr in spec.quad_rows):
        raise ValueError("quadratic row bounds must be positive")
    problem = to_qcqp(spec)
    params = params or KernelParams()
    x0 = None
    if warm_start is not None:
        if isinstance(warm_start, SubproblemSolution):
            cand = pack(spec, warm_start.W, warm_start.gamma, warm_start.slacks)
        else:
            cand = pack(spec, *warm_start)
        if _strictly_feasible(problem.constraints, cand):
            x0 = cand
            params = KernelParams(**{**params.__dict__, "mu0": params.warm_mu0})
    if x0 is None:
        x0 = pack(spec, *feasible_start(spec))
    x, info = solve_qcqp(problem, x0, params)
    W, gamma, slacks = unpack(spec, x)
    return SubproblemSolution(W=W, gamma=gamma, slacks=slacks,
                              objective=spec.objective(W, gamma, slacks),
                              status=info["status"],
                              iterations=info["newton_steps"])
