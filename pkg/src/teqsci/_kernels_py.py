"""Pure numpy implementations of the hot loops.

Pauli strings are ``(x, z)`` bit masks; the operator is
``i**popcount(x & z) * X**x Z**z``, so on a basis state

    P |v> = i**ny * (-1)**popcount(z & v) |v ^ x>.

Grouped Pauli sums share one ``x`` per group: ``gx[g]`` with terms
``offsets[g]:offsets[g+1]`` of ``zs`` and complex weights ``cs`` that already
include the ``i**ny`` factor.
"""

import numpy as np

_PHASE = np.array([1, 1j, -1, -1j])
_INDEX_CACHE: dict[int, np.ndarray] = {}


def _indices(n: int) -> np.ndarray:
    idx = _INDEX_CACHE.get(n)
    if idx is None:
        idx = _INDEX_CACHE[n] = np.arange(n, dtype=np.int64)
    return idx


def _signs(z, v):
    return 1 - 2 * (np.bitwise_count(np.bitwise_and(z, v)) & 1).astype(np.int8)


def rotate(psi, x, z, ny, angle):
    """In place ``psi <- exp(-i angle P) psi``."""
    c, s = np.cos(angle), np.sin(angle)
    idx = _indices(psi.shape[0])
    if x == 0:
        sg = _signs(np.int64(z), idx)
        psi *= np.where(sg > 0, c - 1j * s, c + 1j * s)
        return
    src = idx ^ np.int64(x)
    ppsi = psi[src] * (_PHASE[ny & 3] * _signs(np.int64(z), src))
    psi *= c
    psi -= (1j * s) * ppsi


def trotter(psi, xs, zs, coeffs, dt, n_step):
    """``n_step`` first-order steps, each applying the terms in the given order."""
    nys = np.bitwise_count(np.bitwise_and(xs, zs)) & 3
    angles = np.asarray(coeffs) * dt
    terms = list(zip(xs.tolist(), zs.tolist(), nys.tolist(), angles.tolist()))
    for _ in range(n_step):
        for x, z, ny, a in terms:
            rotate(psi, x, z, ny, a)


def apply_sum(psi, gx, offsets, zs, cs):
    """Return ``H psi`` for a grouped Pauli sum."""
    idx = _indices(psi.shape[0])
    out = np.zeros_like(psi)
    for g in range(gx.shape[0]):
        lo, hi = offsets[g], offsets[g + 1]
        # diagonal part of the group evaluated on source states
        d = np.zeros(psi.shape[0], dtype=complex)
        for z, c in zip(zs[lo:hi].tolist(), cs[lo:hi].tolist()):
            d += c * _signs(np.int64(z), idx)
        out[idx ^ gx[g]] += d * psi
    return out


def assemble(members, gx, offsets, zs, cs, tol=1e-12):
    """Matrix elements ``<target|H|member>`` restricted to ``members``.

    Returns ``(rows, cols, vals, n_leak)`` in COO form, where ``n_leak`` counts
    non-zero elements whose target lies outside ``members``.
    """
    members = np.asarray(members, dtype=np.int64)
    order = np.argsort(members, kind="stable")
    sorted_m = members[order]
    rows, cols, vals = [], [], []
    n_leak = 0
    all_cols = np.arange(members.shape[0])
    for g in range(gx.shape[0]):
        lo, hi = offsets[g], offsets[g + 1]
        targets = members ^ gx[g]
        pos = np.searchsorted(sorted_m, targets)
        pos_c = np.minimum(pos, sorted_m.shape[0] - 1)
        found = sorted_m[pos_c] == targets
        sg = _signs(zs[lo:hi, None], members[None, :])
        v = cs[lo:hi] @ sg
        keep = np.abs(v) > tol
        n_leak += int(np.count_nonzero(keep & ~found))
        m = keep & found
        rows.append(order[pos_c[m]])
        cols.append(all_cols[m])
        vals.append(v[m])
    if not rows:
        return (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, complex), 0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n_leak
