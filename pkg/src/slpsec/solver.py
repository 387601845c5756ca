"""Small dense convex solver for per-slot transmit design problems.

Two engines sit behind one entry point:

* inequality-constrained QPs (min 1/2 x'Qx + c'x, Gx <= h) run through a
  batched Mehrotra predictor-corrector interior-point method;
* sum-of-norms objectives (min qw/2 ||x||^2 + sum w_i ||A_i x||, Gx <= h)
  run through a smoothed log-barrier Newton method whose duals come for
  free from the barrier parameter.

Both report KKT residuals of the original problem; `optimal` is claimed
only when stationarity, primal feasibility and complementary slackness all
sit below FEAS_TOL.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Feasibility/optimality tolerance for claiming an optimal status.
FEAS_TOL = 1e-6
#: Hard iteration cap per solve.
MAX_ITER = 10_000

_STATUS = {0: "running", 1: "optimal", 2: "infeasible", 3: "max-iter"}


@dataclass
class NormTerm:
    """One w * ||A x|| contribution to the objective."""

    matrix: np.ndarray
    weight: float = 1.0


@dataclass
class SolveResult:
    """Outcome of one solve.

    x is the complex transmit vector when produced by a precoder and the raw
    real decision vector when solve_cqp is called directly.  power is always
    ||x||^2 recomputed from x.
    """

    x: np.ndarray
    objective: float
    power: float
    status: str
    primal_residual: float
    dual_residual: float
    iterations: int = 0
    lam: np.ndarray | None = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# QP engine: batched Mehrotra predictor-corrector
# ---------------------------------------------------------------------------

def _solve_spd(M, rhs):
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        n = M.shape[-1]
        jitter = 1e-12 * np.eye(n)
        return np.linalg.solve(M + jitter, rhs)


def _bmv(A, v):
    """Batched matrix-vector product (B,m,n) x (B,n) -> (B,m)."""
    return (A @ v[..., None])[..., 0]


def _bmtv(A, v):
    """Batched transposed product A' v: (B,m,n) x (B,m) -> (B,n)."""
    return (v[:, None, :] @ A)[:, 0, :]


def qp_solve_batch(Q: np.ndarray, c, G: np.ndarray, h: np.ndarray,
                   tol: float = 1e-10, max_iter: int = 200) -> dict:
    """Batched strictly-convex QP: min 1/2 x'Qx + c'x s.t. Gx <= h.

    Q (n, n) and c (n,) are shared across the batch; G (B, m, n) and
    h (B, m) vary per problem.  Returns arrays keyed x, lam, status, iters.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    B, m, n = G.shape
    Q = np.asarray(Q, dtype=float)
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)

    x_un = -_solve_spd(Q, c)
    if m == 0:
        x = np.broadcast_to(x_un, (B, n)).copy()
        return {"x": x, "lam": np.zeros((B, 0)), "status": np.ones(B, dtype=np.int8),
                "iters": np.zeros(B, dtype=np.int64)}

    x = np.broadcast_to(x_un, (B, n)).copy()
    slack0 = h - _bmv(G, x)
    s = np.maximum(slack0, 1.0)
    lam = np.ones((B, m))

    status = np.zeros(B, dtype=np.int8)
    iters = np.zeros(B, dtype=np.int64)
    scale = 1.0 + max(np.max(np.abs(h)), np.max(np.abs(c)), 1.0)
    atol = tol * scale

    active = np.arange(B)
    for it in range(max_iter):
        if active.size == 0:
            break
        Ga, ha = G[active], h[active]
        xa, sa, la = x[active], s[active], lam[active]

        gx = _bmv(Ga, xa)
        rd = xa @ Q.T + c + _bmtv(Ga, la)
        rp = gx + sa - ha
        mu = np.sum(la * sa, axis=1) / m

        done = (np.max(np.abs(rd), axis=1) <= atol) \
            & (np.max(np.abs(rp), axis=1) <= atol) & (mu <= atol)
        if np.any(done):
            idx = active[done]
            status[idx] = 1
            iters[idx] = it
            keep = ~done
            active = active[keep]
            if active.size == 0:
                break
            Ga, ha, xa, sa, la = Ga[keep], ha[keep], xa[keep], sa[keep], la[keep]
            gx, rd, rp, mu = gx[keep], rd[keep], rp[keep], mu[keep]

        # Farkas-style certificate check once duals blow up.
        big = np.max(la, axis=1) > 1e8
        if np.any(big):
            y = la / np.sum(la, axis=1, keepdims=True)
            gty = _bmtv(Ga, y)
            cert = big & (np.max(np.abs(gty), axis=1) < 1e-6 * scale) \
                & (np.sum(ha * y, axis=1) < -1e-8 * scale)
            if np.any(cert):
                idx = active[cert]
                status[idx] = 2
                iters[idx] = it
                keep = ~cert
                active = active[keep]
                if active.size == 0:
                    break
                Ga, ha, xa, sa, la = Ga[keep], ha[keep], xa[keep], sa[keep], la[keep]
                gx, rd, rp, mu = gx[keep], rd[keep], rp[keep], mu[keep]

        d = la / sa
        M = Q + np.transpose(Ga, (0, 2, 1)) @ (Ga * d[:, :, None])

        # affine-scaling (predictor) direction
        rc = la * sa
        rhs = -rd - _bmtv(Ga, (la * rp - rc) / sa)
        dx = _solve_spd(M, rhs[..., None])[..., 0]
        gdx = _bmv(Ga, dx)
        ds = -rp - gdx
        dl = (-rc + la * rp) / sa + d * gdx

        ap = np.minimum(1.0, _max_step(sa, ds))
        ad = np.minimum(1.0, _max_step(la, dl))
        mu_aff = np.sum((la + ad[:, None] * dl) * (sa + ap[:, None] * ds), axis=1) / m
        sigma = np.clip((mu_aff / np.maximum(mu, 1e-300)) ** 3, 0.0, 1.0)

        # corrector
        rc2 = la * sa + dl * ds - (sigma * mu)[:, None]
        rhs2 = -rd - _bmtv(Ga, (la * rp - rc2) / sa)
        dx = _solve_spd(M, rhs2[..., None])[..., 0]
        gdx = _bmv(Ga, dx)
        ds = -rp - gdx
        dl = (-rc2 + la * rp) / sa + d * gdx

        ap = np.minimum(1.0, 0.9995 * _max_step(sa, ds))
        ad = np.minimum(1.0, 0.9995 * _max_step(la, dl))
        x[active] = xa + ap[:, None] * dx
        s[active] = sa + ap[:, None] * ds
        lam[active] = la + ad[:, None] * dl

    if active.size:
        status[active] = 3
        iters[active] = max_iter
    return {"x": x, "lam": lam, "status": status, "iters": iters}


def _max_step(v, dv):
    """Largest step in (0, inf) keeping v + a*dv > 0, per batch row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(dv < 0, -v / dv, np.inf)
    return np.min(ratios, axis=1)


# ---------------------------------------------------------------------------
# Sum-of-norms engine: smoothed objective + log-barrier Newton
# ---------------------------------------------------------------------------

def _solve_equilibrated(H, grad):
    """Newton solve with Jacobi scaling; the barrier mixes 1e0..1e16 blocks."""
    d = 1.0 / np.sqrt(np.maximum(np.einsum("bii->bi", H), 1e-300))
    Hs = H * d[:, :, None] * d[:, None, :]
    rhs = (grad * d)[..., None]
    return d * _solve_spd(Hs, rhs)[..., 0]


def norm_solve_batch(A_list, w_list, G, h, x0, quad_weight: float = 0.0,
                     gap_target: float = 1e-7, t0: float = 1.0,
                     t_factor: float = 25.0, newton_cap: int = 120) -> dict:
    """Batched min qw/2 ||x||^2 + sum w_i ||A_i x|| s.t. Gx <= h.

    Each norm gets an epigraph variable y_i with the self-concordant cone
    barrier -log(y_i^2 - ||A_i x||^2); linear rows keep the usual log
    barrier.  The barrier parameter advances in lockstep over a geometric
    schedule, centering loosely except on the final stage where the duals
    are read off.  x0 must be strictly feasible for every batch member.

    Returns x, the linear-row duals lam, the cone subgradients u_i = A_i x /
    y_i (all strictly inside the unit ball), and the final t, whose inverse
    bounds the complementarity residual.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    B, m, n = G.shape
    k = len(A_list)
    x = np.array(x0, dtype=float, copy=True)
    A_list = [np.asarray(A, dtype=float) for A in A_list]
    is_eye = [A.shape == (n, n) and np.array_equal(A, np.eye(n)) for A in A_list]
    AtA_list = [None if ie else A.T @ A for A, ie in zip(A_list, is_eye)]
    w = np.asarray(w_list, dtype=float)
    Gt = np.transpose(G, (0, 2, 1))
    diag_idx = np.arange(n)

    if m:
        slack = h - _bmv(G, x)
        if np.any(slack <= 0):
            raise ValueError("norm_solve_batch needs a strictly feasible start")

    # y_i starts strictly inside its cone: y^2 - ||A_i x||^2 = 1.
    y = np.stack([np.sqrt(np.sum((x @ A.T) ** 2, axis=1) + 1.0) for A in A_list], axis=1)

    nu = 2 * k + m  # total barrier parameter, bounds the duality gap by nu/t
    t_final = nu / gap_target
    schedule = [t0]
    while schedule[-1] < t_final:
        schedule.append(min(schedule[-1] * t_factor, t_final))

    def barrier_state(xv, yv):
        slack_v = h - _bmv(G, xv) if m else None
        zs = [xv if ie else xv @ A.T for A, ie in zip(A_list, is_eye)]
        vs = np.stack([yv[:, i] ** 2 - np.sum(z * z, axis=1)
                       for i, z in enumerate(zs)], axis=1)
        return slack_v, zs, vs

    def merit_of_state(t, xv, yv, slack_v, vs):
        fv = 0.5 * quad_weight * np.sum(xv * xv, axis=1) + yv @ w
        bad = np.min(vs, axis=1) <= 0
        bad |= np.min(yv, axis=1) <= 0
        if m:
            bad |= np.min(slack_v, axis=1) <= 0
        with np.errstate(invalid="ignore", divide="ignore"):
            val = t * fv - np.sum(np.log(np.maximum(vs, 1e-300)), axis=1)
            if m:
                val = val - np.sum(np.log(np.maximum(slack_v, 1e-300)), axis=1)
        return np.where(bad, np.inf, val)

    total_newton = 0
    for t in schedule:
        final = t == schedule[-1]
        # Intermediate stages only need rough centering (Newton decrement
        # ~0.1); the final stage is polished for the dual read-off.
        dec_tol = 1e-13 if final else 5e-3
        for _ in range(newton_cap):
            slack, zs, vs = barrier_state(x, y)
            grad_x = t * quad_weight * x
            grad_y = np.broadcast_to(t * w, (B, k)).copy()
            H = np.zeros((B, n + k, n + k))
            Hxx = H[:, :n, :n]
            Hxx[:, diag_idx, diag_idx] = t * quad_weight
            for i, (A, AtA, ie) in enumerate(zip(A_list, AtA_list, is_eye)):
                z = zs[i]
                v = vs[:, i]
                Az = z if ie else z @ A  # A' z, shape (B, n)
                grad_x = grad_x + 2.0 * Az / v[:, None]
                grad_y[:, i] -= 2.0 * y[:, i] / v
                if ie:
                    Hxx[:, diag_idx, diag_idx] += (2.0 / v)[:, None]
                else:
                    Hxx += (2.0 / v)[:, None, None] * AtA
                scaled = Az * (2.0 / v)[:, None]
                Hxx += scaled[:, :, None] * scaled[:, None, :]
                hxy = -2.0 * y[:, i, None] / v[:, None] * scaled
                H[:, :n, n + i] = hxy
                H[:, n + i, :n] = hxy
                H[:, n + i, n + i] = -2.0 / v + 4.0 * y[:, i] ** 2 / v ** 2
            if m:
                inv_s = 1.0 / slack
                grad_x = grad_x + _bmtv(G, inv_s)
                Hxx += Gt @ (G * (inv_s ** 2)[:, :, None])

            grad = np.concatenate([grad_x, grad_y], axis=1)
            step = -_solve_equilibrated(H, grad)
            dec = np.maximum(-np.sum(grad * step, axis=1), 0.0)
            stat = np.max(np.abs(grad), axis=1) / t
            run = (dec * 0.5 > dec_tol) & ~(final & (stat < 1e-7))
            if not np.any(run):
                break
            total_newton += 1
            # Armijo backtracking for the global phase, floored by the damped
            # Newton step 1/(1+lambda_N), which self-concordance guarantees to
            # decrease F even when merit differences drown in roundoff at
            # large t.  Both cones and the polyhedron are convex, so once a
            # step length is strictly feasible every shorter one is too.
            lam_n = np.sqrt(dec)
            alpha_damped = 1.0 / (1.0 + lam_n)
            alpha = np.where(run, 1.0, 0.0)
            floored = ~run
            dx, dy = step[:, :n], step[:, n:]
            Fx = merit_of_state(t, x, y, slack, vs)
            gstep = np.sum(grad * step, axis=1)
            for _ in range(60):
                xn = x + alpha[:, None] * dx
                yn = y + alpha[:, None] * dy
                sn, _, vn = barrier_state(xn, yn)
                Fn = merit_of_state(t, xn, yn, sn, vn)
                feas = np.isfinite(Fn)
                armijo = Fn <= Fx + 0.25 * alpha * gstep
                bad = run & ~(feas & (armijo | floored))
                if not np.any(bad):
                    break
                next_alpha = alpha * 0.5
                # Only once feasible may we stop at the damped floor.
                at_floor = feas & (next_alpha <= alpha_damped)
                floored = floored | (bad & at_floor)
                alpha = np.where(bad, np.where(at_floor, np.minimum(alpha, alpha_damped),
                                               next_alpha), alpha)
            if np.max(alpha) < 1e-16:
                break
            x = x + alpha[:, None] * dx
            y = y + alpha[:, None] * dy

    t = schedule[-1]
    if m:
        slack = h - np.einsum("bmn,bn->bm", G, x)
        lam = 1.0 / (t * slack)
    else:
        lam = np.zeros((B, 0))
    subgrads = [(x @ A.T) / y[:, i, None] for i, A in enumerate(A_list)]
    return {"x": x, "y": y, "lam": lam, "t": t, "subgrads": subgrads,
            "iters": np.full(B, total_newton, dtype=np.int64)}


# ---------------------------------------------------------------------------
# Residuals and the public entry point
# ---------------------------------------------------------------------------

def kkt_residuals(x, lam, G, h, quad_weight=1.0, norm_terms=(), c=None, Q=None,
                  norm_subgrads=None):
    """(stationarity, primal, complementarity) residuals.

    For norm terms the certificate uses the cone subgradients u_i the solver
    produced (strictly inside the unit ball, exact on the central path); if
    none are supplied, the unit direction A x / max(||A x||, tiny) is used,
    which is only tight when the norm is active.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if Q is not None:
        grad = Q @ x
    else:
        grad = quad_weight * x
    if c is not None:
        grad = grad + c
    for i, term in enumerate(norm_terms):
        if norm_subgrads is not None:
            u = norm_subgrads[i]
        else:
            Ax = term.matrix @ x
            u = Ax / max(np.linalg.norm(Ax), 1e-300)
        grad = grad + term.weight * (term.matrix.T @ u)
    if G is None or G.shape[0] == 0:
        return float(np.max(np.abs(grad))) if n else 0.0, 0.0, 0.0
    slack = h - G @ x
    grad = grad + G.T @ lam
    stat = float(np.max(np.abs(grad)))
    primal = float(max(0.0, -np.min(slack)))
    comp = float(np.max(np.abs(lam * slack)))
    comp = max(comp, float(max(0.0, -np.min(lam))))
    return stat, primal, comp


def strictly_feasible_point(G, h):
    """Phase-1: a strictly interior point of {Gx <= h}, or None if there is none.

    Solves min eps/2 ||x||^2 + 1/2 z^2 + kappa z s.t. Gx - z <= h; the heavy
    linear pull on z drives it to the most-interior margin.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    m, n = G.shape
    kappa = 100.0 * (1.0 + np.max(np.abs(h)))
    Q = np.diag(np.concatenate([np.full(n, 1e-6), [1.0]]))
    c = np.concatenate([np.zeros(n), [kappa]])
    Gz = np.concatenate([G, -np.ones((m, 1))], axis=1)
    res = qp_solve_batch(Q, c, Gz[None], h[None], tol=1e-10, max_iter=300)
    xz = res["x"][0]
    x = xz[:n]
    if np.max(G @ x - h) < -1e-9:
        return x
    return None


def solve_cqp(G=None, h=None, norm_terms=(), quad_weight: float = 1.0,
              dim=None, tol: float = 1e-9, max_iter: int = MAX_ITER,
              x0=None) -> SolveResult:
    """Minimize quad_weight/2 ||x||^2 + sum_i w_i ||A_i x|| s.t. Gx <= h.

    The decision variable is real (precoders pass the interleaved real
    embedding of the complex transmit vector).  With no norm terms this is a
    strictly convex QP; with norm terms a strictly feasible start is found
    via phase-1 unless x0 is given.
    """
    norm_terms = tuple(norm_terms)
    if G is None:
        if dim is None:
            raise ValueError("need G or an explicit dim")
        G = np.zeros((0, dim))
        h = np.zeros(0)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    if G.ndim != 2 or G.shape[0] != h.shape[0]:
        raise ValueError("G and h dimensions disagree")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(h))):
        raise ValueError("constraint rows must be finite")
    n = G.shape[1]
    m = G.shape[0]

    if not norm_terms:
        if quad_weight <= 0:
            raise ValueError("objective needs a positive quadratic weight or norm terms")
        res = qp_solve_batch(quad_weight * np.eye(n), None, G[None], h[None],
                             tol=tol, max_iter=min(max_iter, 300))
        x = res["x"][0]
        lam = res["lam"][0]
        iters = int(res["iters"][0])
        if res["status"][0] == 2:
            return SolveResult(x=x, objective=np.nan, power=float(x @ x),
                               status="infeasible", primal_residual=np.inf,
                               dual_residual=np.inf, iterations=iters, lam=lam)
        stat, primal, comp = kkt_residuals(x, lam, G, h, quad_weight=quad_weight)
        ok = res["status"][0] == 1 and stat < FEAS_TOL and primal < FEAS_TOL and comp < FEAS_TOL
        return SolveResult(x=x, objective=0.5 * quad_weight * float(x @ x),
                           power=float(x @ x),
                           status="optimal" if ok else "max-iter",
                           primal_residual=primal,
                           dual_residual=max(stat, comp),
                           iterations=iters, lam=lam)

    if m == 0:
        # No constraints and no linear term: every objective piece is
        # minimized at the origin.
        return SolveResult(x=np.zeros(n), objective=0.0, power=0.0,
                           status="optimal", primal_residual=0.0,
                           dual_residual=0.0, iterations=0)
    if x0 is None:
        x0 = strictly_feasible_point(G, h)
        if x0 is None:
            return SolveResult(x=np.zeros(n), objective=np.nan, power=0.0,
                               status="infeasible", primal_residual=np.inf,
                               dual_residual=np.inf, iterations=0)
    A_list = [np.asarray(t.matrix, dtype=float) for t in norm_terms]
    w_list = [float(t.weight) for t in norm_terms]
    res = norm_solve_batch(A_list, w_list, G[None], h[None], np.asarray(x0)[None],
                           quad_weight=quad_weight)
    x = res["x"][0]
    lam = res["lam"][0]
    subgrads = [u[0] for u in res["subgrads"]]
    stat, primal, comp = kkt_residuals(x, lam, G, h, quad_weight=quad_weight,
                                       norm_terms=norm_terms,
                                       norm_subgrads=subgrads)
    obj = 0.5 * quad_weight * float(x @ x) + sum(
        w * np.linalg.norm(A @ x) for A, w in zip(A_list, w_list))
    ok = stat < FEAS_TOL and primal < FEAS_TOL and comp < FEAS_TOL
    return SolveResult(x=x, objective=obj, power=float(x @ x),
                       status="optimal" if ok else "max-iter",
                       primal_residual=primal, dual_residual=max(stat, comp),
                       iterations=int(res["iters"][0]), lam=lam)
