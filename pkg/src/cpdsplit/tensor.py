"""Dense third-order tensor primitives.

Tensors are C-ordered float arrays of shape (N1, N2, N3); the last index
varies fastest in memory.  The mode-d matricization stacks the remaining
axes in ascending order with the later axis fastest along the rows, which
is exactly the ordering for which

    matricize(T, d) == khatri_rao(F_i, F_j) @ F_d.T     (i < j, both != d)

whenever T is the CP reconstruction of factors (F_1, F_2, F_3).
"""

from dataclasses import dataclass

import numpy as np

_MODES = (1, 2, 3)


def khatri_rao(x, y):
    """Column-wise Kronecker product of two matrices.

    Parameters
    ----------
    x : ndarray, shape (m, k)
    y : ndarray, shape (n, k)

    Returns
    -------
    ndarray, shape (m * n, k)
        Column j is ``kron(x[:, j], y[:, j])``; the row index of ``y``
        varies fastest along the output rows.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.ndim != 2 or y.ndim != 2:
        raise ValueError("khatri_rao expects two 2-D arrays")
    if x.shape[1] != y.shape[1]:
        raise ValueError(
            "khatri_rao column mismatch: %d vs %d" % (x.shape[1], y.shape[1])
        )
    m, k = x.shape
    n = y.shape[0]
    return (x[:, None, :] * y[None, :, :]).reshape(m * n, k)


def matricize(t, mode):
    """Mode-d matricization of a third-order tensor.

    Parameters
    ----------
    t : ndarray, shape (N1, N2, N3)
    mode : int
        Mode index in {1, 2, 3}.

    Returns
    -------
    ndarray, shape (prod of the other two dims, N_mode)
        Row ordering: the remaining axes in ascending order, later axis
        fastest.  A view of ``t`` when the memory layout permits.
    """
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError("matricize expects a 3-D array, got ndim=%d" % t.ndim)
    if mode not in _MODES:
        raise ValueError("mode must be 1, 2 or 3, got %r" % (mode,))
    axis = mode - 1
    rest = [a for a in range(3) if a != axis]
    return t.transpose(rest + [axis]).reshape(-1, t.shape[axis])


def tensorize(m, mode, dims):
    """Inverse of :func:`matricize`: fold a matrix back into a tensor.

    Parameters
    ----------
    m : ndarray, shape (prod of the other two dims, N_mode)
    mode : int
        Mode index in {1, 2, 3}.
    dims : sequence of three ints
        Target tensor shape.

    Returns
    -------
    ndarray, shape ``dims``, C-contiguous.
    """
    m = np.asarray(m)
    dims = tuple(int(n) for n in dims)
    if len(dims) != 3 or any(n < 1 for n in dims):
        raise ValueError("dims must be three positive integers, got %r" % (dims,))
    if mode not in _MODES:
        raise ValueError("mode must be 1, 2 or 3, got %r" % (mode,))
    axis = mode - 1
    rest = [a for a in range(3) if a != axis]
    expected = (dims[rest[0]] * dims[rest[1]], dims[axis])
    if m.ndim != 2 or m.shape != expected:
        raise ValueError(
            "matrix shape %r does not match mode-%d layout %r of dims %r"
            % (m.shape, mode, expected, dims)
        )
    t = m.reshape(dims[rest[0]], dims[rest[1]], dims[axis])
    perm = rest + [axis]
    inverse = [perm.index(a) for a in range(3)]
    return np.ascontiguousarray(t.transpose(inverse))


@dataclass
class FactorSet:
    """Factor matrices (F_1, F_2, F_3) of a rank-R CP model, each N_d x R."""

    factors: tuple

    def __post_init__(self):
        factors = tuple(np.asarray(f) for f in self.factors)
        if len(factors) != 3:
            raise ValueError("FactorSet needs exactly 3 factor matrices")
        ranks = {f.shape[1] if f.ndim == 2 else -1 for f in factors}
        if len(ranks) != 1 or -1 in ranks or ranks.pop() < 1:
            raise ValueError("factors must be 2-D with one shared column count")
        self.factors = factors

    @property
    def rank(self):
        return self.factors[0].shape[1]

    @property
    def dims(self):
        return tuple(f.shape[0] for f in self.factors)

    def copy(self):
        return FactorSet(tuple(f.copy() for f in self.factors))


def cp_reconstruct(fset):
    """Dense tensor of the CP model ``sum_r f1[:, r] o f2[:, r] o f3[:, r]``.

    Parameters
    ----------
    fset : FactorSet or sequence of three (N_d, R) arrays.

    Returns
    -------
    ndarray, shape (N1, N2, N3)
    """
    factors = fset.factors if isinstance(fset, FactorSet) else tuple(fset)
    f1, f2, f3 = (np.asarray(f) for f in factors)
    out = khatri_rao(f1, f2) @ f3.T
    return out.reshape(f1.shape[0], f2.shape[0], f3.shape[0])


def apply_mask(t, mask):
    """Zero the entries of ``t`` where ``mask`` is False."""
    t = np.asarray(t)
    mask = np.asarray(mask)
    if mask.shape != t.shape:
        raise ValueError(
            "mask shape %r does not match tensor shape %r" % (mask.shape, t.shape)
        )
    if mask.dtype != np.bool_:
        raise ValueError("mask must be boolean, got dtype %s" % mask.dtype)
    return np.where(mask, t, 0.0)


def frobenius_norm_sq(a):
    """Sum of squared entries, as a Python float."""
    a = np.asarray(a)
    return float(np.vdot(a, a))
