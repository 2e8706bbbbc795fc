# Compiled trajectory kernels. Algorithmically identical to _kernels_py;
# keep the two files in sync (tests compare their outputs).
from libc.math cimport sqrt, exp, sin, cos


cdef struct State:
    double a
    double c
    double al
    double g


cdef inline double _c2(State* s) nogil:
    cdef double d = s.a * s.g - s.al * s.c
    return 4.0 * d * d


cdef inline int _kraus_step(State* s, double dt, double tau, double gamma,
                            double u, double xr, double xw, double xe, double xl,
                            double* rec) nogil:
    cdef double pa = s.a * s.a
    cdef double pc = s.c * s.c
    cdef double pal = s.al * s.al
    cdef double pg = s.g * s.g
    cdef double target = u * (pa + pc + pal + pg)
    cdef double z1, z2
    if target < pa:
        z1 = 1.0; z2 = 1.0
    elif target < pa + pc:
        z1 = 1.0; z2 = -1.0
    elif target < pa + pc + pal:
        z1 = -1.0; z2 = 1.0
    else:
        z1 = -1.0; z2 = -1.0
    cdef double sig = sqrt(tau / dt)
    cdef double r = z1 + sig * xr
    cdef double w = z2 + sig * xw
    cdef double pref = -dt / (4.0 * tau)
    cdef double e0 = pref * ((r - 1.0) * (r - 1.0) + (w - 1.0) * (w - 1.0))
    cdef double e1 = pref * ((r - 1.0) * (r - 1.0) + (w + 1.0) * (w + 1.0))
    cdef double e2 = pref * ((r + 1.0) * (r + 1.0) + (w - 1.0) * (w - 1.0))
    cdef double e3 = pref * ((r + 1.0) * (r + 1.0) + (w + 1.0) * (w + 1.0))
    cdef double m = e0
    if e1 > m: m = e1
    if e2 > m: m = e2
    if e3 > m: m = e3
    s.a = s.a * exp(e0 - m)
    s.c = s.c * exp(e1 - m)
    s.al = s.al * exp(e2 - m)
    s.g = s.g * exp(e3 - m)
    cdef double n = sqrt(s.a * s.a + s.c * s.c + s.al * s.al + s.g * s.g)
    if n < 1e-150:
        return 1
    s.a /= n; s.c /= n; s.al /= n; s.g /= n
    cdef double sn = sqrt(gamma / dt)
    cdef double eps = sn * xe
    cdef double lam = sn * xl
    # exact exp(G dt): left/right quaternion rotations
    cdef double hu = sqrt(lam * lam + 0.25)
    cdef double hv = sqrt(eps * eps + 0.25)
    cdef double su = sin(dt * hu) / hu
    cdef double sv = sin(dt * hv) / hv
    cdef double u0 = cos(dt * hu)
    cdef double u1 = su * lam
    cdef double u3 = -0.5 * su
    cdef double v0 = cos(dt * hv)
    cdef double v2 = sv * eps
    cdef double v3 = 0.5 * sv
    cdef double m0 = u0 * s.a - u1 * s.c - u3 * s.g
    cdef double m1 = u0 * s.c + u1 * s.a - u3 * s.al
    cdef double m2 = u0 * s.al - u1 * s.g + u3 * s.c
    cdef double m3 = u0 * s.g + u1 * s.al + u3 * s.a
    s.a = m0 * v0 - m2 * v2 - m3 * v3
    s.c = m1 * v0 + m2 * v3 - m3 * v2
    s.al = m0 * v2 - m1 * v3 + m2 * v0
    s.g = m0 * v3 + m1 * v2 + m3 * v0
    n = sqrt(s.a * s.a + s.c * s.c + s.al * s.al + s.g * s.g)
    s.a /= n; s.c /= n; s.al /= n; s.g /= n
    rec[0] = r; rec[1] = w; rec[2] = eps; rec[3] = lam
    return 0


def kraus_c2(double[::1] q0, double dt, double tau, double gamma,
             double[::1] uniforms, double[:, ::1] normals, double[::1] c2_out):
    cdef State s
    s.a = q0[0]; s.c = q0[1]; s.al = q0[2]; s.g = q0[3]
    cdef Py_ssize_t n = uniforms.shape[0]
    cdef Py_ssize_t k
    cdef double rec[4]
    cdef int bad = 0
    cdef Py_ssize_t abort = -1
    with nogil:
        c2_out[0] = _c2(&s)
        for k in range(n):
            bad = _kraus_step(&s, dt, tau, gamma, uniforms[k],
                              normals[k, 0], normals[k, 1], normals[k, 2],
                              normals[k, 3], rec)
            if bad:
                abort = k
                break
            c2_out[k + 1] = _c2(&s)
    return abort


def kraus_full(double[::1] q0, double dt, double tau, double gamma,
               double[::1] uniforms, double[:, ::1] normals,
               double[:, ::1] states_out, double[:, ::1] readouts_out,
               double[:, ::1] noises_out, double[::1] c2_out):
    cdef State s
    s.a = q0[0]; s.c = q0[1]; s.al = q0[2]; s.g = q0[3]
    cdef Py_ssize_t n = uniforms.shape[0]
    cdef Py_ssize_t k
    cdef double rec[4]
    cdef int bad = 0
    cdef Py_ssize_t abort = -1
    with nogil:
        states_out[0, 0] = s.a; states_out[0, 1] = s.c
        states_out[0, 2] = s.al; states_out[0, 3] = s.g
        c2_out[0] = _c2(&s)
        for k in range(n):
            bad = _kraus_step(&s, dt, tau, gamma, uniforms[k],
                              normals[k, 0], normals[k, 1], normals[k, 2],
                              normals[k, 3], rec)
            if bad:
                abort = k
                break
            states_out[k + 1, 0] = s.a; states_out[k + 1, 1] = s.c
            states_out[k + 1, 2] = s.al; states_out[k + 1, 3] = s.g
            readouts_out[k + 1, 0] = rec[0]; readouts_out[k + 1, 1] = rec[1]
            noises_out[k + 1, 0] = rec[2]; noises_out[k + 1, 1] = rec[3]
            c2_out[k + 1] = _c2(&s)
    return abort


cdef inline int _sde_step(State* s, double dt, double tau, double gamma,
                          double x0, double x1, double x2, double x3) nogil:
    cdef double m1 = s.al * s.al + s.g * s.g
    cdef double m2 = s.c * s.c + s.g * s.g
    cdef double K = 0.5 * (m1 * m1 + m2 * m2)
    cdef double fa = -s.a * (K / tau + gamma)
    cdef double fc = s.al - gamma * s.c + (s.c / tau) * (m2 - 0.5 - K)
    cdef double fal = -s.c - gamma * s.al + (s.al / tau) * (m1 - 0.5 - K)
    cdef double fg = -gamma * s.g + (s.g / tau) * (m1 + m2 - 1.0 - K)
    cdef double sq = sqrt(dt)
    cdef double st = 1.0 / sqrt(tau)
    cdef double sg = sqrt(gamma)
    cdef double a2 = s.a + fa * dt + sq * (st * s.a * m1 * x0 + st * s.a * m2 * x1 - sg * s.al * x2 - sg * s.c * x3)
    cdef double c2 = s.c + fc * dt + sq * (st * s.c * m1 * x0 + st * s.c * (m2 - 1.0) * x1 - sg * s.g * x2 + sg * s.a * x3)
    cdef double al2 = s.al + fal * dt + sq * (st * s.al * (m1 - 1.0) * x0 + st * s.al * m2 * x1 + sg * s.a * x2 - sg * s.g * x3)
    cdef double g2 = s.g + fg * dt + sq * (st * s.g * (m1 - 1.0) * x0 + st * s.g * (m2 - 1.0) * x1 + sg * s.c * x2 + sg * s.al * x3)
    cdef double n = sqrt(a2 * a2 + c2 * c2 + al2 * al2 + g2 * g2)
    if n < 1e-150:
        return 1
    s.a = a2 / n; s.c = c2 / n; s.al = al2 / n; s.g = g2 / n
    return 0


def sde_c2(double[::1] q0, double dt, double tau, double gamma,
           double[:, ::1] xi, double[::1] c2_out):
    cdef State s
    s.a = q0[0]; s.c = q0[1]; s.al = q0[2]; s.g = q0[3]
    cdef Py_ssize_t n = xi.shape[0]
    cdef Py_ssize_t k
    cdef int bad = 0
    cdef Py_ssize_t abort = -1
    with nogil:
        c2_out[0] = _c2(&s)
        for k in range(n):
            bad = _sde_step(&s, dt, tau, gamma, xi[k, 0], xi[k, 1], xi[k, 2], xi[k, 3])
            if bad:
                abort = k
                break
            c2_out[k + 1] = _c2(&s)
    return abort


def sde_full(double[::1] q0, double dt, double tau, double gamma,
             double[:, ::1] xi, double[:, ::1] states_out,
             double[:, ::1] readouts_out, double[:, ::1] noises_out,
             double[::1] c2_out):
    cdef State s
    s.a = q0[0]; s.c = q0[1]; s.al = q0[2]; s.g = q0[3]
    cdef Py_ssize_t n = xi.shape[0]
    cdef Py_ssize_t k
    cdef double m1, m2
    cdef double sig = sqrt(tau / dt)
    cdef double sn = sqrt(gamma / dt)
    cdef int bad = 0
    cdef Py_ssize_t abort = -1
    with nogil:
        states_out[0, 0] = s.a; states_out[0, 1] = s.c
        states_out[0, 2] = s.al; states_out[0, 3] = s.g
        c2_out[0] = _c2(&s)
        for k in range(n):
            m1 = s.al * s.al + s.g * s.g
            m2 = s.c * s.c + s.g * s.g
            readouts_out[k + 1, 0] = (1.0 - 2.0 * m1) + sig * xi[k, 0]
            readouts_out[k + 1, 1] = (1.0 - 2.0 * m2) + sig * xi[k, 1]
            noises_out[k + 1, 0] = sn * xi[k, 2]
            noises_out[k + 1, 1] = sn * xi[k, 3]
            bad = _sde_step(&s, dt, tau, gamma, xi[k, 0], xi[k, 1], xi[k, 2], xi[k, 3])
            if bad:
                abort = k
                break
            states_out[k + 1, 0] = s.a; states_out[k + 1, 1] = s.c
            states_out[k + 1, 2] = s.al; states_out[k + 1, 3] = s.g
            c2_out[k + 1] = _c2(&s)
    return abort

IS_COMPILED = True
