"""
Small complex linear-algebra kernel shared by the precoder and the receivers.

Everything here works on dense ``numpy`` arrays. Eigen/singular vectors are
returned with a deterministic phase: the largest-magnitude entry is made real
and positive (first index wins on ties), so results are reproducible across
LAPACK builds.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "EigPair",
    "NotHermitianError",
    "RankDeficiencyError",
    "fix_phase",
    "hermitian_dominant_eig",
    "svd",
    "auto_ridge",
    "regularized_gram_factor",
    "regularized_gram_solve",
]

HERMITIAN_RTOL = 1e-10
EIGENGAP_RTOL = 1e-9


class NotHermitianError(ValueError):
    """Input that must be Hermitian is not (within relative tolerance)."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """A Gram matrix that must be inverted is singular."""


@dataclass(frozen=True)
class EigPair:
    """Dominant eigenpair of a Hermitian PSD matrix.

    ``ambiguous`` is set when the top two eigenvalues are closer than
    ``1e-9 * value``; the vector is then one arbitrary member of the
    dominant eigenspace.
    """

    value: float
    vector: np.ndarray
    ambiguous: bool = False


def fix_phase(v):
    """Rotate ``v`` so its largest-magnitude entry is real positive.

    Works column-wise on 2-D input. Returns ``(rotated, phase)`` where
    ``rotated = v * phase``.
    """
    v = np.asarray(v, dtype=complex)
    if v.ndim == 1:
        k = int(np.argmax(np.abs(v)))
        ref = v[k]
        phase = np.conj(ref) / abs(ref) if abs(ref) > 0 else 1.0 + 0j
        return v * phase, phase
    k = np.argmax(np.abs(v), axis=0)
    ref = v[k, np.arange(v.shape[1])]
    mag = np.abs(ref)
    phase = np.where(mag > 0, np.conj(ref) / np.where(mag > 0, mag, 1.0), 1.0 + 0j)
    return v * phase[None, :], phase


def _check_hermitian(A):
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.conj().T) > HERMITIAN_RTOL * max(scale, np.finfo(float).tiny):
        raise NotHermitianError("matrix is not Hermitian within 1e-10 relative tolerance")
    return A


def hermitian_dominant_eig(A, tol=1e-10):
    """Largest eigenpair of a Hermitian positive semi-definite matrix.

    Parameters
    ----------
    A : (n, n) complex array
        Hermitian PSD input.
    tol : float
        Residual bound relative to ``||A||_F``.

    Returns
    -------
    EigPair
        ``value`` is clipped at zero; ``ambiguous`` flags a degenerate
        top eigenvalue.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = _check_hermitian(A)
    Ah = 0.5 * (A + A.conj().T)
    w, V = np.linalg.eigh(Ah)
    lam = float(w[-1])
    v, _ = fix_phase(V[:, -1])
    v = v / np.linalg.norm(v)
    resid = np.linalg.norm(Ah @ v - lam * v)
    fro = np.linalg.norm(Ah)
    if resid > tol * max(fro, np.finfo(float).tiny):
        raise np.linalg.LinAlgError(
            f"eigen residual {resid:.3e} exceeds {tol:.1e} * ||A||_F"
        )
    ambiguous = A.shape[0] > 1 and (w[-1] - w[-2]) < EIGENGAP_RTOL * abs(w[-1])
    return EigPair(value=max(lam, 0.0), vector=v, ambiguous=bool(ambiguous))


def svd(A):
    """Thin SVD ``A = U @ diag(s) @ V.conj().T`` with phase-fixed right vectors.

    Singular values come out in descending order. Each column of ``V`` has its
    largest-magnitude entry real positive and the matching column of ``U`` is
    rotated by the same phase, so the factorisation is unchanged.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.size == 0:
        raise ValueError(f"svd needs a nonempty 2-D array, got shape {A.shape}")
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    V, phase = fix_phase(Vh.conj().T)
    U = U * phase[None, :]
    return U, s, V


AUTO_RIDGE_REL = 1e-8
AUTO_RIDGE_COND = 1e-10


def auto_ridge(Y):
    """Ridge for the Gram matrix ``R = Y Y^H / N`` of a view.

    Zero when ``R`` is numerically well posed (smallest/largest eigenvalue
    above ``1e-10``), otherwise ``1e-8 * trace(R) / N_r``. A fixed ridge on a
    full-rank but ill-conditioned view biases the canonical vectors, so it is
    only added where a solve would otherwise fail.
    """
    Y = np.asarray(Y, dtype=complex)
    R = Y @ Y.conj().T / Y.shape[1]
    w = np.linalg.eigvalsh(R)
    if w[-1] <= 0:
        return AUTO_RIDGE_REL
    if w[0] > AUTO_RIDGE_COND * w[-1]:
        return 0.0
    return AUTO_RIDGE_REL * float(np.real(np.trace(R))) / Y.shape[0]


def regularized_gram_factor(Y, eps, view="Y"):
    """Lower Cholesky factor of ``Y Y^H / N + eps I``.

    ``eps`` may be ``"auto"`` (see :func:`auto_ridge`). With ``eps == 0`` a
    numerically singular Gram matrix raises :class:`RankDeficiencyError`
    naming ``view``.
    """
    Y = np.asarray(Y, dtype=complex)
    n_r, n_cols = Y.shape
    if isinstance(eps, str):
        if eps != "auto":
            raise ValueError(f"unknown ridge spec {eps!r}")
        eps = auto_ridge(Y)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    R = (Y @ Y.conj().T) / n_cols + eps * np.eye(n_r)
    if eps == 0:
        w = np.linalg.eigvalsh(R)
        if w[0] <= n_r * np.finfo(float).eps * max(w[-1], np.finfo(float).tiny):
            raise RankDeficiencyError(
                f"Gram matrix of view {view!r} is rank deficient "
                f"(min/max eigenvalue {w[0]:.2e}/{w[-1]:.2e}); use eps > 0"
            )
    try:
        return np.linalg.cholesky(R)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(f"Gram matrix of view {view!r} is not positive definite") from exc


def regularized_gram_solve(Y, eps, B, view="Y"):
    """Solve ``(Y Y^H / N + eps I) X = B`` by Cholesky.

    Parameters
    ----------
    Y : (n_r, N) complex array
        Data view, one received vector per column.
    eps : float or "auto"
        Ridge. ``"auto"`` uses :func:`auto_ridge`.
    B : (n_r, k) or (n_r,) complex array
        Right-hand side.
    view : str
        Name used in the error message when the system is singular.
    """
    L = regularized_gram_factor(Y, eps, view)
    return sla.cho_solve((L, True), np.asarray(B, dtype=complex))
