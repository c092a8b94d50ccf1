"""Compiled kernels for the Brownian path simulations.

Every path owns a private random stream: an SFC64 state seeded from
Philox4x64-10 applied to the counter (path id, stream tag) under the key
(seed, constant).  Gaussian increments are drawn from that stream with the
Marsaglia-Tsang ziggurat, in step order.  Path p therefore sees the same
increments whatever else is simulated alongside it, which gives
reproducible, partition-independent results and coupled paths across
domains.
"""

import math

import numba as nb
import numpy as np

from .geometry import (
    CODE_ANNULUS,
    CODE_BALL,
    CODE_BOX,
    CODE_DISK,
    CODE_LSHAPE,
    CODE_MASK,
    CODE_RECTANGLE,
)

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_KEY1 = np.uint64(0x5A17C0DE)
_LO32 = np.uint64(0xFFFFFFFF)
_S3 = np.uint64(3)
_S11 = np.uint64(11)
_S24 = np.uint64(24)
_S32 = np.uint64(32)
_S40 = np.uint64(40)
_ONE = np.uint64(1)
_LOW7 = np.uint64(127)
_TWO_M53 = 2.0**-53

TAG_PATH = 1
TAG_FREE = 2
SFC64_WARMUP = 12

_jit = nb.njit(cache=True, nogil=True)
_inline = nb.njit(cache=True, inline="always")


# --- Philox4x64-10 --------------------------------------------------------


@_inline
def _mulhilo(a, b):
    lo = a * b
    a0 = a & _LO32
    a1 = a >> _S32
    b0 = b & _LO32
    b1 = b >> _S32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    mid = (p00 >> _S32) + (p01 & _LO32) + (p10 & _LO32)
    hi = p11 + (p01 >> _S32) + (p10 >> _S32) + (mid >> _S32)
    return hi, lo


@_jit
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64 with 10 rounds on counter (c0..c3) and key (k0, k1)."""
    c0 = np.uint64(c0)
    c1 = np.uint64(c1)
    c2 = np.uint64(c2)
    c3 = np.uint64(c3)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


# --- SFC64 ------------------------------------------------------------------
#
# The generator state travels as four scalars (a, b, c, w) through every
# helper rather than as an array: array arguments defeat inlining in the
# hot loops and cost several times the price of a draw.


@_jit
def _sfc(a, b, c, w):
    out = a + b + w
    return out, b ^ (b >> _S11), c + (c << _S3), ((c << _S24) | (c >> _S40)) + out, w + _ONE


@_jit
def sfc64_raw(st, n):
    """n raw outputs from the state array ``st`` (advanced in place)."""
    a, b, c, w = st[0], st[1], st[2], st[3]
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        out[i], a, b, c, w = _sfc(a, b, c, w)
    st[0], st[1], st[2], st[3] = a, b, c, w
    return out


@_jit
def seed_stream(seed, tag, path):
    """SFC64 state (a, b, c, w) for one path."""
    a, b, c, _ = philox4x64(path, tag, 0, 0, seed, _KEY1)
    w = _ONE
    for _ in range(SFC64_WARMUP):
        _, a, b, c, w = _sfc(a, b, c, w)
    return a, b, c, w


@_jit
def seed_streams(seed, tag, paths):
    st = np.empty((paths.shape[0], 4), dtype=np.uint64)
    for i in range(paths.shape[0]):
        st[i, 0], st[i, 1], st[i, 2], st[i, 3] = seed_stream(seed, tag, paths[i])
    return st


# --- ziggurat normals ---------------------------------------------------------


def _zig_tables():
    # Marsaglia & Tsang (2000), 128 layers
    m1 = 2147483648.0
    dn = 3.442619855899
    tn = dn
    vn = 9.91256303526217e-3
    kn = np.zeros(128, dtype=np.int64)
    wn = np.zeros(128)
    fn = np.zeros(128)
    q = vn / math.exp(-0.5 * dn * dn)
    kn[0] = int((dn / q) * m1)
    kn[1] = 0
    wn[0] = q / m1
    wn[127] = dn / m1
    fn[0] = 1.0
    fn[127] = math.exp(-0.5 * dn * dn)
    for i in range(126, 0, -1):
        dn = math.sqrt(-2.0 * math.log(vn / dn + math.exp(-0.5 * dn * dn)))
        kn[i + 1] = int((dn / tn) * m1)
        tn = dn
        fn[i] = math.exp(-0.5 * dn * dn)
        wn[i] = dn / m1
    return kn, wn, fn


_KN, _WN, _FN = _zig_tables()
_ZIG_R = 3.442619855899


@_jit
def _uniform(a, b, c, w):
    v, a, b, c, w = _sfc(a, b, c, w)
    return (np.float64(v >> _S11) + 0.5) * _TWO_M53, a, b, c, w


@_jit
def _draw(a, b, c, w):
    # signed 32-bit position from the upper half, layer from the low 7 bits
    v, a, b, c, w = _sfc(a, b, c, w)
    hz = np.int64(v >> _S32)
    if hz >= 2147483648:
        hz -= 4294967296
    return hz, np.int64(v & _LOW7), a, b, c, w


@_jit
def _normal_tail(hz, iz, a, b, c, w):
    while True:
        x = hz * _WN[iz]
        if iz == 0:
            while True:
                u1, a, b, c, w = _uniform(a, b, c, w)
                u2, a, b, c, w = _uniform(a, b, c, w)
                x = -math.log(u1) / _ZIG_R
                y = -math.log(u2)
                if y + y >= x * x:
                    break
            return (_ZIG_R + x if hz > 0 else -_ZIG_R - x), a, b, c, w
        u, a, b, c, w = _uniform(a, b, c, w)
        if _FN[iz] + u * (_FN[iz - 1] - _FN[iz]) < math.exp(-0.5 * x * x):
            return x, a, b, c, w
        hz, iz, a, b, c, w = _draw(a, b, c, w)
        if abs(hz) < _KN[iz]:
            return hz * _WN[iz], a, b, c, w


@_jit
def normal(a, b, c, w):
    """One standard normal deviate; returns (z, a, b, c, w)."""
    hz, iz, a, b, c, w = _draw(a, b, c, w)
    if abs(hz) < _KN[iz]:
        return hz * _WN[iz], a, b, c, w
    return _normal_tail(hz, iz, a, b, c, w)


@_jit
def normals(st, n):
    """n standard normals from the state array ``st`` (advanced in place)."""
    a, b, c, w = st[0], st[1], st[2], st[3]
    out = np.empty(n)
    for i in range(n):
        out[i], a, b, c, w = normal(a, b, c, w)
    st[0], st[1], st[2], st[3] = a, b, c, w
    return out


# --- geometry -----------------------------------------------------------------


@_jit
def contains_point(code, prm, mask, x):
    # single exit and non-short-circuit tests: early returns here cost ~5x
    # in the inner stepping loops
    inside = False
    if code == CODE_DISK:
        dx = x[0] - prm[0]
        dy = x[1] - prm[1]
        inside = dx * dx + dy * dy < prm[2] * prm[2]
    elif code == CODE_RECTANGLE:
        inside = (
            (prm[0] < x[0]) & (x[0] < prm[0] + prm[2]) & (prm[1] < x[1]) & (x[1] < prm[1] + prm[3])
        )
    elif code == CODE_ANNULUS:
        dx = x[0] - prm[0]
        dy = x[1] - prm[1]
        r2 = dx * dx + dy * dy
        inside = (prm[2] * prm[2] < r2) & (r2 < prm[3] * prm[3])
    elif code == CODE_LSHAPE:
        px = x[0] - prm[0]
        py = x[1] - prm[1]
        w = prm[2]
        a = w - prm[3]
        square = (0.0 < px) & (px < w) & (0.0 < py) & (py < w)
        inside = square & ~((px >= a) & (py >= a))
    elif code == CODE_BALL:
        dx = x[0] - prm[0]
        dy = x[1] - prm[1]
        dz = x[2] - prm[2]
        inside = dx * dx + dy * dy + dz * dz < prm[3] * prm[3]
    elif code == CODE_BOX:
        inside = (
            (prm[0] < x[0])
            & (x[0] < prm[0] + prm[3])
            & (prm[1] < x[1])
            & (x[1] < prm[1] + prm[4])
            & (prm[2] < x[2])
            & (x[2] < prm[2] + prm[5])
        )
    elif code == CODE_MASK:
        n = int(prm[0])
        h = prm[1]
        flat = 0
        valid = True
        for k in range(n):
            dim = int(prm[2 + n + k])
            i = int(math.floor((x[k] - prm[2 + k]) / h + 0.5))
            if i < 0 or i >= dim:
                valid = False
                break
            flat = flat * dim + i
        if valid:
            inside = mask[flat] == 1
    return inside


@_jit
def contains_many(code, prm, mask, pts):
    out = np.empty(pts.shape[0], dtype=np.bool_)
    for i in range(pts.shape[0]):
        out[i] = contains_point(code, prm, mask, pts[i])
    return out


@_jit
def _locate_exit(code, prm, mask, start, end, tol):
    """Bisection along start -> end for the crossing; returns the step fraction."""
    nb.literally(code)
    n = start.shape[0]
    probe = np.empty(n)
    seg = 0.0
    for k in range(n):
        seg += (end[k] - start[k]) ** 2
    seg = math.sqrt(seg)
    lo = 0.0
    hi = 1.0
    while (hi - lo) * seg > tol:
        mid = 0.5 * (lo + hi)
        for k in range(n):
            probe[k] = start[k] + mid * (end[k] - start[k])
        if contains_point(code, prm, mask, probe):
            lo = mid
        else:
            hi = mid
    return hi


# --- path stepping --------------------------------------------------------------


@_jit
def advance_block(pos, streams, h_steps, t0, code, prm, mask, tol, rec, wts, t_exit):
    """Advance every path through the steps ``h_steps``; exiting paths freeze.

    ``pos`` and ``streams`` are updated in place.  ``rec[i, j]`` receives the
    left endpoint of step j and ``wts[i, j]`` the time spent inside the shape
    during that step (zero after absorption).  ``t_exit[i]`` is set when path
    i crosses the boundary during the block.
    """
    nb.literally(code)
    m, n = pos.shape
    k_steps = h_steps.shape[0]
    new = np.empty(n)
    for i in range(m):
        a, b, c, w = streams[i, 0], streams[i, 1], streams[i, 2], streams[i, 3]
        p = pos[i]
        t = t0
        alive = True
        for j in range(k_steps):
            for k in range(n):
                rec[i, j, k] = p[k]
            if not alive:
                wts[i, j] = 0.0
                continue
            h = h_steps[j]
            scale = math.sqrt(2.0 * h)
            for k in range(n):
                z, a, b, c, w = normal(a, b, c, w)
                new[k] = p[k] + scale * z
            if contains_point(code, prm, mask, new):
                for k in range(n):
                    p[k] = new[k]
                wts[i, j] = h
                t += h
            else:
                f = _locate_exit(code, prm, mask, p, new, tol)
                for k in range(n):
                    p[k] = p[k] + f * (new[k] - p[k])
                wts[i, j] = f * h
                t_exit[i] = t + f * h
                alive = False
        streams[i, 0], streams[i, 1], streams[i, 2], streams[i, 3] = a, b, c, w


@_jit
def exit_times(x0, first_id, n_paths, n_steps, dt, last_dt, seed, code, prm, mask, tol):
    """Whole-path loop with the increments and crossing rule of ``advance_block``.

    Returns the exit time per path, inf when still inside at the horizon.
    """
    nb.literally(code)
    n = x0.shape[0]
    out = np.empty(n_paths)
    pos = np.empty(n)
    new = np.empty(n)
    for p in range(n_paths):
        a, b, c, w = seed_stream(seed, TAG_PATH, first_id + p)
        for k in range(n):
            pos[k] = x0[k]
        t = 0.0
        out[p] = np.inf
        for s in range(n_steps):
            h = last_dt if s == n_steps - 1 else dt
            scale = math.sqrt(2.0 * h)
            for k in range(n):
                z, a, b, c, w = normal(a, b, c, w)
                new[k] = pos[k] + scale * z
            if contains_point(code, prm, mask, new):
                for k in range(n):
                    pos[k] = new[k]
                t += h
            else:
                f = _locate_exit(code, prm, mask, pos, new, tol)
                out[p] = t + f * h
                break
    return out


@_jit
def free_jump_outside(x0, first_id, n_paths, t, seed, code, prm, mask):
    """Flags whether x0 + sqrt(2t) Z lands outside the shape, one Gaussian jump per path."""
    nb.literally(code)
    n = x0.shape[0]
    out = np.empty(n_paths, dtype=np.bool_)
    pt = np.empty(n)
    scale = math.sqrt(2.0 * t)
    for p in range(n_paths):
        a, b, c, w = seed_stream(seed, TAG_FREE, first_id + p)
        for k in range(n):
            z, a, b, c, w = normal(a, b, c, w)
            pt[k] = x0[k] + scale * z
        out[p] = not contains_point(code, prm, mask, pt)
    return out
