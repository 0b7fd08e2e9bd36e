"""Hand-coded reference implementations, independent of the package internals."""
import math

import numpy as np

from ephs.patterns import pattern_relation, substitute

THETA0 = 298.15
UNIT_MOTOR = dict(L_s=1.0, L_r=1.0, R_s=1.0, R_r=1.0, J_r=1.0, d_r=1.0)


def motor_rhs(b_s, b, p, voltage, load, prm=UNIT_MOTOR, theta0=THETA0):
    """DC shunt motor equations written out by hand.

    Returns (b_s', b', p', s', q.f, p.e).
    """
    i_s = b_s / prm["L_s"]
    i_r = b / prm["L_r"]
    omega = p / prm["J_r"]
    db_s = voltage - prm["R_s"] * i_s
    db = voltage - b_s * omega - prm["R_r"] * i_r
    dp = b_s * i_r - prm["d_r"] * omega + load
    ds = (prm["R_s"] * i_s**2 + prm["R_r"] * i_r**2 + prm["d_r"] * omega**2) / theta0
    return db_s, db, dp, ds, i_s + i_r, omega


def motor_fixed_point(voltage, prm=UNIT_MOTOR, tol=1e-14):
    """Steady state (b_s, b, p) of the unloaded motor by bisection on omega.

    Zero derivatives give b_s = L_s*E/R_s, then b_s*i_r = d_r*omega and
    E = b_s*omega + R_r*i_r; eliminating i_r leaves one monotone equation.
    """
    b_s = prm["L_s"] * voltage / prm["R_s"]

    def residual(omega):
        i_r = (voltage - b_s * omega) / prm["R_r"]
        return b_s * i_r - prm["d_r"] * omega

    lo, hi = 0.0, abs(voltage) / max(b_s, 1e-300) + 1.0
    if residual(lo) < 0:
        lo, hi = -hi, 0.0
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0:
            lo = mid
        else:
            hi = mid
    omega = 0.5 * (lo + hi)
    i_r = (voltage - b_s * omega) / prm["R_r"]
    return b_s, i_r * prm["L_r"], omega * prm["J_r"]


def damper_equations(v, theta1, theta2, d=0.2, alpha=0.5):
    """(s', p.f, s.f) of the nonisothermal damper composite."""
    ds = (d * v**2 + alpha * (theta2 - theta1)) / theta1
    return ds, d * v, -alpha * (theta1 - theta2) / theta2


def tc_temperature(s, c=1.0, theta_ref=298.15):
    return theta_ref * math.exp(s / c)


def nonisothermal_rhs(q, p, s, k=1.0, m=1.0, d=0.2, c=1.0, theta_ref=298.15, alpha=0.5, theta0=THETA0):
    """Isolated nonisothermal oscillator: (q', p', s_capacity', s_env')."""
    v = p / m
    theta1 = tc_temperature(s, c, theta_ref)
    ds, _, sf = damper_equations(v, theta1, theta0, d, alpha)
    return v, -k * q - d * v, ds, -sf


def oscillator_energy(q, p, s, s_env, k=1.0, m=1.0, c=1.0, theta_ref=298.15, theta0=THETA0):
    return k * q**2 / 2 + p**2 / (2 * m) + c * theta_ref * (math.exp(s / c) - 1) + theta0 * s_env


def null_space(a, rcond=1e-12):
    """Orthonormal kernel basis via an SVD, for relation composition."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.eye(a.shape[1])
    _, sv, vt = np.linalg.svd(a)
    rank = int(np.sum(sv > rcond * max(1.0, sv.max(initial=0.0))))
    return vt[rank:].T


def composed_membership(host, box, guest, seed, n):
    """Compose the junction relations of host and guest by eliminating the
    shared box variables, then count the random samples on which membership
    in the composite and in the substituted pattern's relation agree.  The
    elimination is done here with a plain SVD."""
    h = pattern_relation(host)
    g = pattern_relation(guest)
    # guest outer variables become the box variables; guest inner ones are lifted
    g_vars = []
    for v in g.variables:
        head, rest = v.split(".", 1)
        g_vars.append(f"shared.{rest}" if head == "outer" else f"inner.{box}.{rest}")
    h_vars = [v.replace(f"inner.{box}.", "shared.", 1) if v.startswith(f"inner.{box}.") else v for v in h.variables]
    keep = [v for v in h_vars if not v.startswith("shared.")] + [v for v in g_vars if not v.startswith("shared.")]
    drop = sorted({v for v in h_vars + g_vars if v.startswith("shared.")})
    cols = {v: i for i, v in enumerate(keep + drop)}
    a = np.zeros((h.matrix.shape[0] + g.matrix.shape[0], len(cols)))
    for j, v in enumerate(h_vars):
        a[: h.matrix.shape[0], cols[v]] = h.matrix[:, j]
    for j, v in enumerate(g_vars):
        a[h.matrix.shape[0] :, cols[v]] = g.matrix[:, j]
    a_keep, a_drop = a[:, : len(keep)], a[:, len(keep) :]
    composed = null_space(a_drop.T).T @ a_keep

    direct = pattern_relation(substitute(host, box, guest)).reorder(keep)
    rng = np.random.default_rng(seed)
    basis_c, basis_d = null_space(composed), null_space(direct.matrix)
    agree = 0
    for _ in range(n):
        ok = True
        for basis, other in ((basis_c, direct.matrix), (basis_d, composed)):
            v = basis @ rng.standard_normal(basis.shape[1])
            ok &= bool(np.max(np.abs(other @ v)) <= 1e-9 * (1 + np.max(np.abs(v))))
        # a generic vector lies in neither
        w = rng.standard_normal(len(keep))
        in_c = np.max(np.abs(composed @ w)) <= 1e-9
        in_d = np.max(np.abs(direct.matrix @ w)) <= 1e-9
        ok &= bool(in_c == in_d)
        agree += ok
    return agree
