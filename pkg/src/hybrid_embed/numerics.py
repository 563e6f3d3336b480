"""Vector primitives, cosine kernels and the finite-difference gradient oracle.

Vectors and matrices are plain float64 numpy arrays. Every loss in the package
is built on :func:`cosine_matrix` and its adjoint :func:`cosine_matrix_backward`.
"""

import numpy as np

from .errors import EmptyInput, LengthMismatch, NonFiniteEvaluation, ZeroNorm

NORM_FLOOR = 1e-12


def as_vec(x):
    return np.asarray(x, dtype=np.float64)


def _check_norms(norms):
    if np.any(norms < NORM_FLOOR):
        raise ZeroNorm("vector norm below 1e-12")


def cosine(a, b):
    """Cosine similarity of two vectors, clamped to [-1, 1]."""
    a, b = as_vec(a), as_vec(b)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths {a.shape} and {b.shape} differ")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    _check_norms(np.array([na, nb]))
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cosine_grad(a, b):
    """Gradient of ``cosine(a, b)`` with respect to ``a``."""
    a, b = as_vec(a), as_vec(b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    _check_norms(np.array([na, nb]))
    c = a @ b / (na * nb)
    return b / (na * nb) - c * a / na**2


def normalize_rows(X):
    """Row-normalise ``X``; returns ``(unit_rows, norms)``."""
    X = np.atleast_2d(as_vec(X))
    norms = np.linalg.norm(X, axis=1)
    _check_norms(norms)
    return X / norms[:, None], norms


def cosine_matrix(A, B):
    """All-pairs cosine similarities between rows of ``A`` and rows of ``B``."""
    A, B = np.atleast_2d(as_vec(A)), np.atleast_2d(as_vec(B))
    if A.shape[1] != B.shape[1]:
        raise LengthMismatch(f"dimensions {A.shape[1]} and {B.shape[1]} differ")
    An, _ = normalize_rows(A)
    Bn, _ = normalize_rows(B)
    return np.clip(An @ Bn.T, -1.0, 1.0)


def _unit_backward(X, grad_unit):
    # d(x/|x|) adjoint: (g - (g.u)u) / |x|
    U, norms = normalize_rows(X)
    radial = np.sum(grad_unit * U, axis=1, keepdims=True)
    return (grad_unit - radial * U) / norms[:, None]


def cosine_matrix_backward(A, B, G):
    """Adjoint of :func:`cosine_matrix`.

    Given ``G = dL/dS`` for ``S = cosine_matrix(A, B)``, returns
    ``(dL/dA, dL/dB)``. The clamp is treated as the identity; it only absorbs
    rounding at exactly +/-1.
    """
    A, B = np.atleast_2d(as_vec(A)), np.atleast_2d(as_vec(B))
    An, _ = normalize_rows(A)
    Bn, _ = normalize_rows(B)
    dA = _unit_backward(A, G @ Bn)
    dB = _unit_backward(B, G.T @ An)
    return dA, dB


def rowwise_cosine(A, B):
    """Cosine between matching rows, ``out[i] = cos(A[i], B[i])``."""
    A, B = np.atleast_2d(as_vec(A)), np.atleast_2d(as_vec(B))
    if A.shape != B.shape:
        raise LengthMismatch(f"shapes {A.shape} and {B.shape} differ")
    An, _ = normalize_rows(A)
    Bn, _ = normalize_rows(B)
    return np.clip(np.sum(An * Bn, axis=1), -1.0, 1.0)


def rowwise_cosine_backward(A, B, g):
    A, B = np.atleast_2d(as_vec(A)), np.atleast_2d(as_vec(B))
    An, _ = normalize_rows(A)
    Bn, _ = normalize_rows(B)
    g = as_vec(g)[:, None]
    return _unit_backward(A, g * Bn), _unit_backward(B, g * An)


def log_sum_exp(xs, axis=None):
    """Stable ``log(sum(exp(xs)))``.

    Entries equal to ``-inf`` are allowed (they act as masked-out logits) as
    long as every reduced slice keeps at least one finite value. The result
    is ``max + log1p(rest)``, which keeps full relative precision when the
    other terms are tiny next to the largest.
    """
    xs = as_vec(xs)
    if xs.size == 0:
        raise EmptyInput("log_sum_exp of an empty sequence")
    m = np.max(xs, axis=axis, keepdims=True)
    # the max contributes exactly exp(0) = 1; sum the rest separately
    top = np.exp(xs - m)
    first = np.argmax(xs, axis=axis)
    if axis is None:
        rest = float(np.sum(np.delete(top.ravel(), first)))
    else:
        np.put_along_axis(top, np.expand_dims(first, axis), 0.0, axis=axis)
        rest = np.sum(top, axis=axis)
    out = np.squeeze(m, axis=axis) + np.log1p(rest)
    if axis is None:
        return float(out)
    return out


def finite_diff_grad(f, x, h=1e-5):
    """Central-difference gradient of scalar ``f`` at ``x`` (any shape)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteEvaluation(f"f is not finite near coordinate {i}")
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(analytic, numeric):
    """``|a - n| / max(|a|, |n|)`` in the Euclidean norm, 0 when both vanish."""
    a, n = as_vec(analytic).ravel(), as_vec(numeric).ravel()
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)
