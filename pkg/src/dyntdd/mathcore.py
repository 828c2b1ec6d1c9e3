"""
Dense complex Hermitian matrix utilities.

Every correlation matrix, estimate covariance, regularized Gram inverse and
resolvent in the package is a plain ``numpy`` complex array; the helpers
here validate and factor them.
"""

import numpy as np
from scipy import linalg

from .errors import InvalidInputError, InvalidRegularizerError, NotPSDError

__all__ = [
    "PSD_TOL",
    "HERMITIAN_TOL",
    "as_hermitian",
    "is_hermitian",
    "spectral_norm",
    "min_eigenvalue",
    "psd_sqrt_factor",
    "regularized_gram_inverse",
    "rank_one_inverse_row",
    "trace_product",
]

# Single tolerance for accepting a matrix as positive semidefinite; negative
# eigenvalues above -PSD_TOL are clipped to zero.
PSD_TOL = 1e-10
HERMITIAN_TOL = 1e-12


def _check_square(a, name="a"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, "
                                f"got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return a


def is_hermitian(a, atol=HERMITIAN_TOL):
    """True if ``a`` equals its conjugate transpose within ``atol``."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= atol)


def as_hermitian(a, name="a", atol=None):
    """
    Validate ``a`` as a Hermitian matrix and return a complex copy.

    The returned matrix is exactly Hermitian (averaged with its conjugate
    transpose) so downstream eigensolvers see a symmetric input.

    Parameters
    ----------
    a : array_like
        Candidate matrix.
    name : str
        Used in error messages.
    atol : float, optional
        Symmetry tolerance. Defaults to ``HERMITIAN_TOL`` scaled by the
        largest entry magnitude (relative check for large-gain matrices).
    """
    a = _check_square(a, name).astype(complex)
    scale = max(1.0, float(np.max(np.abs(a))))
    tol = HERMITIAN_TOL * scale if atol is None else atol
    if not is_hermitian(a, tol):
        raise InvalidInputError(f"{name} is not Hermitian")
    return 0.5 * (a + a.conj().T)


def spectral_norm(a):
    """Largest absolute eigenvalue of a Hermitian matrix."""
    a = as_hermitian(a)
    w = linalg.eigvalsh(a)
    return float(max(abs(w[0]), abs(w[-1])))


def min_eigenvalue(a):
    """Smallest eigenvalue of a Hermitian matrix."""
    a = as_hermitian(a)
    return float(linalg.eigvalsh(a, subset_by_index=[0, 0])[0])


def psd_sqrt_factor(a):
    """
    Hermitian principal square root ``B`` of a PSD matrix, ``B @ B^H = a``.

    Eigenvalues in ``[-PSD_TOL, 0)`` are clipped to zero so that
    rank-deficient correlation matrices are accepted.

    Raises
    ------
    NotPSDError
        If the smallest eigenvalue is below ``-PSD_TOL``.
    """
    a = as_hermitian(a)
    w, v = linalg.eigh(a)
    if w[0] < -PSD_TOL:
        raise NotPSDError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    root = np.sqrt(np.clip(w, 0.0, None))
    b = (v * root) @ v.conj().T
    return 0.5 * (b + b.conj().T)


def regularized_gram_inverse(columns, f, phi, scale="per-M"):
    """
    Inverse of a ridge-regularized Gram matrix.

    With ``scale="per-M"`` (detector form) returns
    ``((1/M) H H^H + (1/M) f + phi I)^{-1}``; with ``scale="unit"`` (precoder
    form) returns ``(H H^H + f + M phi I)^{-1}``.

    Parameters
    ----------
    columns : array_like, shape (M, K)
        Column vectors ``h_i``; ``K`` may be zero.
    f : array_like, shape (M, M) or None
        PSD offset matrix; ``None`` means zero.
    phi : float
        Strictly positive regularizer.
    scale : {"per-M", "unit"}
    """
    if not phi > 0:
        raise InvalidRegularizerError(f"phi must be > 0, got {phi}")
    h = np.asarray(columns, dtype=complex)
    if h.ndim == 1:
        h = h[:, None]
    m = h.shape[0]
    if f is None:
        f = np.zeros((m, m), dtype=complex)
    else:
        f = as_hermitian(f, "f")
        if f.shape != (m, m):
            raise InvalidInputError("f does not match the column length")
    pre = h @ h.conj().T + f
    if scale == "per-M":
        pre = pre / m + phi * np.eye(m)
    elif scale == "unit":
        pre = pre + m * phi * np.eye(m)
    else:
        raise InvalidInputError(f"unknown scale {scale!r}")
    pre = 0.5 * (pre + pre.conj().T)
    c = linalg.cho_factor(pre, lower=True)
    inv = linalg.cho_solve(c, np.eye(m, dtype=complex))
    return 0.5 * (inv + inv.conj().T)


def rank_one_inverse_row(a_inv, x, tau):
    """
    Row vector ``x^H (A + tau x x^H)^{-1}`` from ``A^{-1}`` without refactoring.

    Matrix inversion lemma for a rank-one Hermitian update.
    """
    x = np.asarray(x, dtype=complex)
    row = x.conj() @ a_inv
    return row / (1.0 + tau * (row @ x))


def trace_product(a, b):
    """``tr(A B)`` in O(N^2) without forming the product."""
    return np.sum(a * b.T)
