"""Independent reference implementations the tests compare against.

Everything here is written the slow, obvious way on purpose: dense linear
algebra, exhaustive grids, closed forms.  None of it shares assembly or
solver code with the package.
"""

import numpy as np


# ---------------------------------------------------------------------------
# minimum-jerk spline via dense endpoint-state quadratic programming

def hermite_matrix(T):
    """Rows map quintic coefficients to (pos, vel, acc) at 0 and at T."""
    A = np.zeros((6, 6))
    A[0, 0] = 1.0
    A[1, 1] = 1.0
    A[2, 2] = 2.0
    for j in range(6):
        A[3, j] = T ** j
    for j in range(1, 6):
        A[4, j] = j * T ** (j - 1)
    for j in range(2, 6):
        A[5, j] = j * (j - 1) * T ** (j - 2)
    return A


def jerk_gram(T):
    """Integral of the outer product of third-derivative monomials on [0, T]."""
    Q = np.zeros((6, 6))
    d3 = [0.0, 0.0, 0.0, 6.0, 24.0, 60.0]
    for j in range(3, 6):
        for k in range(3, 6):
            p = (j - 3) + (k - 3) + 1
            Q[j, k] = d3[j] * d3[k] * T ** p / p
    return Q


def dense_min_jerk(durations, waypoints, start, end):
    """Minimum squared-jerk quintic spline through fixed junction positions.

    Junction (pos, vel, acc) states parameterize the curve; interior
    velocities and accelerations are free variables of one dense solve per
    axis.  start/end are (pos, vel, acc) triples.  Returns (energy, coeffs)
    with coeffs of shape (M, 6, 3) in monomial order.
    """
    T = np.asarray(durations, dtype=float).reshape(-1)
    M = len(T)
    wp = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if wp.shape[0] != M - 1:
        raise ValueError("expected M-1 interior waypoints")
    n = 3 * (M + 1)
    z = np.zeros((n, 3))
    z[0], z[1], z[2] = start
    z[n - 3], z[n - 2], z[n - 1] = end
    for k in range(1, M):
        z[3 * k] = wp[k - 1]
    free = np.array([3 * k + d for k in range(1, M) for d in (1, 2)],
                    dtype=int)
    fixed = np.setdiff1d(np.arange(n), free)

    G = np.zeros((n, n))
    invs = []
    for i in range(M):
        Ainv = np.linalg.inv(hermite_matrix(T[i]))
        invs.append(Ainv)
        Gi = Ainv.T @ jerk_gram(T[i]) @ Ainv
        sl = slice(3 * i, 3 * i + 6)
        G[sl, sl] += 0.5 * (Gi + Gi.T)
    if len(free):
        H = G[np.ix_(free, free)]
        rhs = -G[np.ix_(free, fixed)] @ z[fixed]
        z[free] = np.linalg.solve(H, rhs)

    energy = 0.0
    coeffs = np.zeros((M, 6, 3))
    for i in range(M):
        c = invs[i] @ z[3 * i:3 * i + 6]
        coeffs[i] = c
        energy += float(np.sum(c * (jerk_gram(T[i]) @ c)))
    return energy, coeffs


def poly_eval(coeffs, t, order=0):
    """Evaluate one (6, 3) monomial coefficient block at local time t."""
    out = np.zeros(3)
    for j in range(order, 6):
        fac = 1.0
        for k in range(order):
            fac *= j - k
        out += fac * t ** (j - order) * coeffs[j]
    return out


# ---------------------------------------------------------------------------
# finite differences

def central_diff(fun, x, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


# ---------------------------------------------------------------------------
# reciprocal safety by exhaustive search

def closed_grid(lo, hi, step):
    if hi <= lo:
        return np.array([lo])
    n = int(np.ceil((hi - lo) / step)) + 1
    return np.linspace(lo, hi, n)


def brute_pair_margin(traj_a, traj_b, margins, resolution):
    """Worst weighted distance between the two swept time windows.

    Sweeps absolute time over both stamped domains (padded by the window
    half-width) and both window offsets independently: the definitional
    double-window form, no reduction to a relative offset.
    """
    lo = min(traj_a.t0, traj_b.t0) - margins.M_d
    hi = max(traj_a.t_end, traj_b.t_end) + margins.M_d
    t_grid = closed_grid(lo, hi, resolution)
    if margins.M_d > 0.0:
        g_grid = closed_grid(-margins.M_d, margins.M_d, resolution)
    else:
        g_grid = np.zeros(1)
    best = np.inf
    n_chunk = max(1, int(np.ceil(len(t_grid) / 64.0)))
    for chunk in np.array_split(t_grid, n_chunk):
        tt = (chunk[:, None] + g_grid[None, :]).ravel()
        pa = traj_a.eval_many(tt, 0).reshape(len(chunk), len(g_grid), 3)
        pb = traj_b.eval_many(tt, 0).reshape(len(chunk), len(g_grid), 3)
        d = pa[:, :, None, :] - pb[:, None, :, :]
        d2 = d[..., 0] ** 2 + d[..., 1] ** 2 + margins.w * d[..., 2] ** 2
        best = min(best, float(d2.min()))
    return float(np.sqrt(best)) - 2.0 * margins.M_r


# ---------------------------------------------------------------------------
# geometry

def linear_scan_deepest(polytopes, x):
    """Deepest polytope containing x by scanning every polytope."""
    best, best_depth = None, -np.inf
    for i, poly in enumerate(polytopes):
        d = poly.depth(x)
        if d >= 0.0 and d > best_depth:
            best, best_depth = i, d
    return best


def linear_scan_boxes(los, his, x):
    """Indices of all boxes containing x, boundaries included."""
    hit = np.all((los <= x) & (x <= his), axis=1)
    return np.flatnonzero(hit)


def hull_contains(vertices, pts, tol=1e-7):
    """True rows where pts lie inside the convex hull of the vertices."""
    from scipy.spatial import ConvexHull

    hull = ConvexHull(np.asarray(vertices, dtype=float))
    eq = hull.equations
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    val = pts @ eq[:, :3].T + eq[:, 3][None, :]
    return np.all(val <= tol, axis=1)


# ---------------------------------------------------------------------------
# rest-to-rest speed profile closed forms

def trapezoid_time(d, v_max, a_max):
    """Minimum time of a rest-to-rest ramp profile over distance d."""
    if d <= 0.0:
        return 0.0
    if d >= v_max * v_max / a_max:
        return d / v_max + v_max / a_max
    return 2.0 * np.sqrt(d / a_max)


# ---------------------------------------------------------------------------
# rigid-body rollout, quaternion attitude

def _quat_mul(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def _quat_from_rotvec(v):
    th = np.linalg.norm(v)
    if th < 1e-300:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = v / th
    return np.concatenate([[np.cos(th / 2.0)], np.sin(th / 2.0) * axis])


def _quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rollout_rk4(m, g, d_h, d_v, c_p, r0, v0, R0, times, thrusts, omegas):
    """Independent RK4 rollout of thrust-plus-drag point dynamics.

    Attitude integrates exactly per step from the zero-order-held body
    rates (quaternion update); translation uses classic RK4 with the
    attitude interpolated to the half step.
    """
    from scipy.spatial.transform import Rotation

    q = Rotation.from_matrix(np.asarray(R0, dtype=float)).as_quat()
    q = np.array([q[3], q[0], q[1], q[2]])
    r = np.asarray(r0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    D = np.diag([d_h, d_h, d_v])
    grav = np.array([0.0, 0.0, -g])
    out = [r.copy()]
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        om = np.asarray(omegas[k], dtype=float)
        f = float(thrusts[k])
        R_0 = _quat_to_matrix(q)
        q_h = _quat_mul(q, _quat_from_rotvec(om * (0.5 * dt)))
        q_1 = _quat_mul(q, _quat_from_rotvec(om * dt))
        R_h = _quat_to_matrix(q_h / np.linalg.norm(q_h))
        R_1 = _quat_to_matrix(q_1 / np.linalg.norm(q_1))

        def acc(vel, R):
            drag = R @ D @ R.T @ vel * (1.0 + c_p * np.linalg.norm(vel))
            return grav + (f * R[:, 2] - drag) / m

        k1v = acc(v, R_0)
        k2v = acc(v + 0.5 * dt * k1v, R_h)
        k3v = acc(v + 0.5 * dt * k2v, R_h)
        k4v = acc(v + dt * k3v, R_1)
        k1r = v
        k2r = v + 0.5 * dt * k1v
        k3r = v + 0.5 * dt * k2v
        k4r = v + dt * k3v
        r = r + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        q = q_1 / np.linalg.norm(q_1)
        out.append(r.copy())
    return np.array(out)
