"""Pure-Python numeric kernels, interface-identical to the compiled extension.

Used when the Cython module is unavailable (or forced via SWINGBUS_PURE=1).
The loops mirror the compiled code operation-for-operation so both backends
produce the same factorizations up to floating-point division rounding.
"""

COMPILED = False


def lu_factor(fp, fi, fx, diag_pos, tol):
    """Numeric LU on a pre-scattered combined factor (CSR, sorted columns).

    fx holds the permuted matrix values scattered onto the factor pattern and
    is overwritten with L (strict lower, unit diagonal implied) and U (diagonal
    plus strict upper). Returns 0 on success, k+1 if the pivot at elimination
    step k has magnitude <= tol.
    """
    n = fp.shape[0] - 1
    fpl = fp.tolist()
    fil = fi.tolist()
    dpl = diag_pos.tolist()
    vals = fx.tolist()
    w = [0j] * n
    for i in range(n):
        r0 = fpl[i]
        r1 = fpl[i + 1]
        for t in range(r0, r1):
            w[fil[t]] = vals[t]
        for t in range(r0, dpl[i]):
            k = fil[t]
            dk = dpl[k]
            lik = w[k] / vals[dk]
            w[k] = lik
            for s in range(dk + 1, fpl[k + 1]):
                w[fil[s]] -= lik * vals[s]
        if abs(w[i]) <= tol:
            return i + 1
        for t in range(r0, r1):
            vals[t] = w[fil[t]]
    fx[:] = vals
    return 0


def lu_solve_permuted(fp, fi, fx, diag_pos, y):
    """In-place forward/backward substitution on a permuted right-hand side."""
    n = fp.shape[0] - 1
    fpl = fp.tolist()
    fil = fi.tolist()
    dpl = diag_pos.tolist()
    vals = fx.tolist()
    yl = y.tolist()
    for i in range(n):
        acc = yl[i]
        for t in range(fpl[i], dpl[i]):
            acc -= vals[t] * yl[fil[t]]
        yl[i] = acc
    for i in range(n - 1, -1, -1):
        acc = yl[i]
        for t in range(dpl[i] + 1, fpl[i + 1]):
            acc -= vals[t] * yl[fil[t]]
        yl[i] = acc / vals[dpl[i]]
    y[:] = yl


def csr_matvec(indptr, indices, data, x, out):
    """out = A @ x for complex CSR data; sequential accumulation per row."""
    n = indptr.shape[0] - 1
    ipl = indptr.tolist()
    idl = indices.tolist()
    dl = data.tolist()
    xl = x.tolist()
    for i in range(n):
        acc = 0j
        for t in range(ipl[i], ipl[i + 1]):
            acc += dl[t] * xl[idl[t]]
        out[i] = acc
