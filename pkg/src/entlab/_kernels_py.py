"""Pure-Python trajectory kernels (fallback when the compiled extension is
unavailable).

Same algorithms and same random-input layout as entlab._kernels, written
with scalar floats so the fallback stays usable (roughly 50-100x slower
than the compiled version). Each function returns the abort step index, or
-1 if the trajectory completed.
"""
import math

IS_COMPILED = False

_Z1 = (1.0, 1.0, -1.0, -1.0)
_Z2 = (1.0, -1.0, 1.0, -1.0)


def _kraus_step(a, c, al, g, dt, tau, gamma, u, xr, xw, xe, xl):
    # exact Born mixture: pick basis state, then Gaussian readouts
    pa, pc, pal, pg = a * a, c * c, al * al, g * g
    target = u * (pa + pc + pal + pg)
    if target < pa:
        k = 0
    elif target < pa + pc:
        k = 1
    elif target < pa + pc + pal:
        k = 2
    else:
        k = 3
    sig = math.sqrt(tau / dt)
    r = _Z1[k] + sig * xr
    w = _Z2[k] + sig * xw
    # measurement back-action, common factor removed via the max exponent
    e0 = -(dt / (4.0 * tau)) * ((r - 1.0) ** 2 + (w - 1.0) ** 2)
    e1 = -(dt / (4.0 * tau)) * ((r - 1.0) ** 2 + (w + 1.0) ** 2)
    e2 = -(dt / (4.0 * tau)) * ((r + 1.0) ** 2 + (w - 1.0) ** 2)
    e3 = -(dt / (4.0 * tau)) * ((r + 1.0) ** 2 + (w + 1.0) ** 2)
    m = max(e0, e1, e2, e3)
    a *= math.exp(e0 - m)
    c *= math.exp(e1 - m)
    al *= math.exp(e2 - m)
    g *= math.exp(e3 - m)
    n = math.sqrt(a * a + c * c + al * al + g * g)
    if n < 1e-150:
        return None
    a /= n
    c /= n
    al /= n
    g /= n
    # local Hamiltonian noise, then the exact orthogonal update
    s = math.sqrt(gamma / dt)
    eps = s * xe
    lam = s * xl
    hu = math.sqrt(lam * lam + 0.25)
    hv = math.sqrt(eps * eps + 0.25)
    su = math.sin(dt * hu) / hu
    sv = math.sin(dt * hv) / hv
    u0 = math.cos(dt * hu)
    u1 = su * lam
    u3 = -0.5 * su
    v0 = math.cos(dt * hv)
    v2 = sv * eps
    v3 = 0.5 * sv
    m0 = u0 * a - u1 * c - u3 * g
    m1 = u0 * c + u1 * a - u3 * al
    m2 = u0 * al - u1 * g + u3 * c
    m3 = u0 * g + u1 * al + u3 * a
    a = m0 * v0 - m2 * v2 - m3 * v3
    c = m1 * v0 + m2 * v3 - m3 * v2
    al = m0 * v2 - m1 * v3 + m2 * v0
    g = m0 * v3 + m1 * v2 + m3 * v0
    n = math.sqrt(a * a + c * c + al * al + g * g)
    a /= n
    c /= n
    al /= n
    g /= n
    return a, c, al, g, r, w, eps, lam


def kraus_c2(q0, dt, tau, gamma, uniforms, normals, c2_out):
    a, c, al, g = (float(q0[0]), float(q0[1]), float(q0[2]), float(q0[3]))
    d = a * g - al * c
    c2_out[0] = 4.0 * d * d
    for k in range(len(uniforms)):
        out = _kraus_step(a, c, al, g, dt, tau, gamma, uniforms[k],
                          normals[k, 0], normals[k, 1], normals[k, 2], normals[k, 3])
        if out is None:
            return k
        a, c, al, g = out[0], out[1], out[2], out[3]
        d = a * g - al * c
        c2_out[k + 1] = 4.0 * d * d
    return -1


def kraus_full(q0, dt, tau, gamma, uniforms, normals,
               states_out, readouts_out, noises_out, c2_out):
    a, c, al, g = (float(q0[0]), float(q0[1]), float(q0[2]), float(q0[3]))
    states_out[0, 0], states_out[0, 1], states_out[0, 2], states_out[0, 3] = a, c, al, g
    d = a * g - al * c
    c2_out[0] = 4.0 * d * d
    for k in range(len(uniforms)):
        out = _kraus_step(a, c, al, g, dt, tau, gamma, uniforms[k],
                          normals[k, 0], normals[k, 1], normals[k, 2], normals[k, 3])
        if out is None:
            return k
        a, c, al, g, r, w, eps, lam = out
        states_out[k + 1, 0], states_out[k + 1, 1] = a, c
        states_out[k + 1, 2], states_out[k + 1, 3] = al, g
        readouts_out[k + 1, 0], readouts_out[k + 1, 1] = r, w
        noises_out[k + 1, 0], noises_out[k + 1, 1] = eps, lam
        d = a * g - al * c
        c2_out[k + 1] = 4.0 * d * d
    return -1


def _sde_step(a, c, al, g, dt, tau, gamma, x0, x1, x2, x3):
    m1 = al * al + g * g
    m2 = c * c + g * g
    K = 0.5 * (m1 * m1 + m2 * m2)
    fa = -a * (K / tau + gamma)
    fc = al - gamma * c + (c / tau) * (m2 - 0.5 - K)
    fal = -c - gamma * al + (al / tau) * (m1 - 0.5 - K)
    fg = -gamma * g + (g / tau) * (m1 + m2 - 1.0 - K)
    sq = math.sqrt(dt)
    st = 1.0 / math.sqrt(tau)
    sg = math.sqrt(gamma)
    a2 = a + fa * dt + sq * (st * a * m1 * x0 + st * a * m2 * x1 - sg * al * x2 - sg * c * x3)
    c2_ = c + fc * dt + sq * (st * c * m1 * x0 + st * c * (m2 - 1.0) * x1 - sg * g * x2 + sg * a * x3)
    al2 = al + fal * dt + sq * (st * al * (m1 - 1.0) * x0 + st * al * m2 * x1 + sg * a * x2 - sg * g * x3)
    g2 = g + fg * dt + sq * (st * g * (m1 - 1.0) * x0 + st * g * (m2 - 1.0) * x1 + sg * c * x2 + sg * al * x3)
    n = math.sqrt(a2 * a2 + c2_ * c2_ + al2 * al2 + g2 * g2)
    if n < 1e-150:
        return None
    return a2 / n, c2_ / n, al2 / n, g2 / n


def sde_c2(q0, dt, tau, gamma, xi, c2_out):
    a, c, al, g = (float(q0[0]), float(q0[1]), float(q0[2]), float(q0[3]))
    d = a * g - al * c
    c2_out[0] = 4.0 * d * d
    for k in range(xi.shape[0]):
        out = _sde_step(a, c, al, g, dt, tau, gamma,
                        xi[k, 0], xi[k, 1], xi[k, 2], xi[k, 3])
        if out is None:
            return k
        a, c, al, g = out
        d = a * g - al * c
        c2_out[k + 1] = 4.0 * d * d
    return -1


def sde_full(q0, dt, tau, gamma, xi, states_out, readouts_out, noises_out, c2_out):
    a, c, al, g = (float(q0[0]), float(q0[1]), float(q0[2]), float(q0[3]))
    states_out[0, 0], states_out[0, 1], states_out[0, 2], states_out[0, 3] = a, c, al, g
    d = a * g - al * c
    c2_out[0] = 4.0 * d * d
    sig = math.sqrt(tau / dt)
    sn = math.sqrt(gamma / dt)
    for k in range(xi.shape[0]):
        m1 = al * al + g * g
        m2 = c * c + g * g
        readouts_out[k + 1, 0] = (1.0 - 2.0 * m1) + sig * xi[k, 0]
        readouts_out[k + 1, 1] = (1.0 - 2.0 * m2) + sig * xi[k, 1]
        noises_out[k + 1, 0] = sn * xi[k, 2]
        noises_out[k + 1, 1] = sn * xi[k, 3]
        out = _sde_step(a, c, al, g, dt, tau, gamma,
                        xi[k, 0], xi[k, 1], xi[k, 2], xi[k, 3])
        if out is None:
            return k
        a, c, al, g = out
        states_out[k + 1, 0], states_out[k + 1, 1] = a, c
        states_out[k + 1, 2], states_out[k + 1, 3] = al, g
        d = a * g - al * c
        c2_out[k + 1] = 4.0 * d * d
    return -1
