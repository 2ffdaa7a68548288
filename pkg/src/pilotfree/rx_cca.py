"""
Pilot-free receiver based on two-view canonical correlation analysis.

For every layer and sub-grid the received vectors at the source REs form view
1 and those at the destination REs form view 2; column ``k`` of both views
carries the same transmitted symbol. CCA finds combiners ``q1, q2`` whose
outputs agree as closely as possible, which (noiselessly, with full-rank
signal and channel matrices) isolates the repeated block up to one complex
phase.

Conjugation convention: a combiner ``q`` acts as ``q^H y``. The image of view
``i`` is the vector ``z_i = (q_i^H Y_i)^T = Y_i^T conj(q_i)``, and ``g``
estimates the repeated block, ``g ~ gamma * x_c / ||x_c||``.

The default solver works with the ``n_r x n_r`` covariances
``R_ab = Y_a Y_b^H / N``: ``q1`` is the dominant eigenvector of
``R11^-1 R12 R22^-1 R21`` (solved in Cholesky-whitened Hermitian form) and
``q2 = R22^-1 R21 q1``. :func:`maxvar_projector_solution` solves the
equivalent ``N x N`` projector-sum problem and is kept for cross-checking.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .errors import PhaseUnresolvableError
from .grid import re_position
from .la_core import (
    RankDeficiencyError,
    hermitian_dominant_eig,
    regularized_gram_factor,
    regularized_gram_solve,
)

__all__ = [
    "ViewPair",
    "CcaSolution",
    "CcaReception",
    "build_views",
    "cca_two_view",
    "maxvar_projector_solution",
    "resolve_phase",
    "equalize",
    "cca_receive",
]

PHASE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ViewPair:
    Y1: np.ndarray
    Y2: np.ndarray

    def __post_init__(self):
        if self.Y1.shape != self.Y2.shape:
            raise ValueError(f"view shapes differ: {self.Y1.shape} vs {self.Y2.shape}")

    @property
    def length(self):
        return self.Y1.shape[1]


@dataclass(frozen=True, eq=False)
class CcaSolution:
    """Combiners, common-signal estimate and top canonical correlation.

    Combiners are scaled so that each image has unit norm.
    """

    q1: np.ndarray
    q2: np.ndarray
    g: np.ndarray
    rho: float
    ambiguous: bool = False


def build_views(Y, pattern, subgrid):
    """Gather the two views of ``pattern`` in sub-grid ``subgrid``.

    ``Y`` is the received tensor ``[subcarrier, symbol, antenna]``. Columns
    follow the copy order stored in the pattern, so destination column ``k``
    is the repeat of source column ``k`` however the indices are stored.
    """
    n_sc, n_sym = Y.shape[:2]
    ms, ns = re_position(pattern.source[subgrid], pattern.n_rb)
    md, nd = re_position(pattern.dest[subgrid], pattern.n_rb)
    if (ms.max() >= n_sc or md.max() >= n_sc or ns.max() >= n_sym or nd.max() >= n_sym):
        raise IndexError("pattern indices fall outside the received grid")
    return ViewPair(Y[ms, ns, :].T.copy(), Y[md, nd, :].T.copy())


def _images(Y1, Y2, q1, q2):
    z1 = Y1.T @ q1.conj()
    z2 = Y2.T @ q2.conj()
    return z1, z2


def cca_two_view(views, eps="auto"):
    """Top canonical pair of two views via the reduced eigenproblem.

    Parameters
    ----------
    views : ViewPair
    eps : float or "auto"
        Ridge added to both view covariances.

    Returns
    -------
    CcaSolution

    Raises
    ------
    RankDeficiencyError
        A view covariance is singular and ``eps == 0``.
    """
    Y1 = np.asarray(views.Y1, dtype=complex)
    Y2 = np.asarray(views.Y2, dtype=complex)
    N = Y1.shape[1]
    R12 = Y1 @ Y2.conj().T / N
    L1 = regularized_gram_factor(Y1, eps, view="view 1")
    C = regularized_gram_solve(Y2, eps, R12.conj().T, view="view 2")  # R22^-1 R21
    A = R12 @ C
    # whitened: L1^-1 A L1^-H
    K = sla.solve_triangular(L1, A, lower=True)
    K = sla.solve_triangular(L1, K.conj().T, lower=True).conj().T
    K = 0.5 * (K + K.conj().T)
    top = hermitian_dominant_eig(K, tol=1e-8)
    q1 = sla.solve_triangular(L1.conj().T, top.vector, lower=False)
    q2 = C @ q1
    z1, z2 = _images(Y1, Y2, q1, q2)
    n1, n2 = np.linalg.norm(z1), np.linalg.norm(z2)
    if n1 == 0 or n2 == 0:
        raise RankDeficiencyError("a CCA image vanished; views carry no common signal")
    q1, z1 = q1 / n1, z1 / n1
    q2, z2 = q2 / n2, z2 / n2
    rho = float(min(abs(np.vdot(z1, z2)), 1.0))
    s = z1 + z2
    g = s / np.linalg.norm(s)
    return CcaSolution(q1, q2, g, rho, top.ambiguous)


def _row_space_basis(Y, rtol=1e-10):
    # orthonormal basis of range(Y^T)
    U, s, _ = np.linalg.svd(Y.T, full_matrices=False)
    keep = s > rtol * s[0] if s.size and s[0] > 0 else np.zeros(0, dtype=bool)
    return U[:, keep]


def maxvar_projector_solution(views, rtol=1e-10):
    """MAXVAR solution: dominant eigenvector of ``P1 + P2``.

    ``P_i`` projects onto the span of view ``i``'s images, ``range(Y_i^T)``.
    Costs an ``N x N`` eigenproblem; used to cross-check :func:`cca_two_view`.
    Returns ``(g, eigenvalue)``; the eigenvalue equals ``1 + rho``.
    """
    B1 = _row_space_basis(np.asarray(views.Y1, dtype=complex), rtol)
    B2 = _row_space_basis(np.asarray(views.Y2, dtype=complex), rtol)
    P = B1 @ B1.conj().T + B2 @ B2.conj().T
    top = hermitian_dominant_eig(P, tol=1e-8)
    return top.vector, top.value


def resolve_phase(sol, ref_symbol, ref_position=0, genie=None):
    """Remove the CCA phase ambiguity using a known symbol.

    ``gamma_hat = g[ref_position] * conj(ref_symbol)``; ``g`` is rotated by
    ``conj(gamma_hat) / |gamma_hat|``. The combiners get the conjugate
    rotation so their images stay consistent with ``g``. With ``genie`` (the
    full transmitted block) the correlation uses every symbol instead.
    """
    if genie is not None:
        gamma = np.vdot(np.asarray(genie), sol.g)
    else:
        if not 0 <= ref_position < sol.g.size:
            raise IndexError("reference position outside the repeated block")
        gamma = sol.g[ref_position] * np.conj(ref_symbol)
    mag = abs(gamma)
    if mag < PHASE_FLOOR:
        raise PhaseUnresolvableError(f"reference correlation {mag:.2e} too small")
    c = np.conj(gamma) / mag
    return replace(sol, g=sol.g * c, q1=sol.q1 * np.conj(c), q2=sol.q2 * np.conj(c))


def equalize(Y, solutions, patterns, vmaps, layout):
    """Apply the per-sub-grid combiners to every RE.

    Parameters
    ----------
    Y : ndarray ``[subcarrier, symbol, antenna]``
    solutions : dict
        ``(layer, subgrid) -> CcaSolution`` (phase-resolved) or ``None`` for
        an erased block.
    patterns, vmaps : sequence
        Per decoded layer, aligned with each other.
    layout : SubGridLayout

    Returns
    -------
    ndarray ``(len(patterns), n_subcarriers, n_symbols)``
        Soft symbols scaled to unit-energy QPSK. A vicinity RE uses the
        combiner of its assigned view; a source RE averages the view-1 and
        view-2 outputs of its two copies and the destination RE repeats that
        value. Erased blocks are NaN.
    """
    n_sc, n_sym, n_r = Y.shape
    out = np.full((len(patterns), n_sc, n_sym), np.nan + 0j)
    for li, (p, vm) in enumerate(zip(patterns, vmaps)):
        Q = np.zeros((n_sc, n_sym, n_r), dtype=complex)
        for j in range(layout.subgrid_count):
            sol = solutions.get((p.layer, j))
            if sol is None:
                continue
            sl = layout.subcarrier_slice(j)
            scale = np.sqrt(p.view_length)
            a = vm.assignment[sl]
            Qj = Q[sl]
            Qj[a == 1] = sol.q1 * scale
            Qj[a == 2] = sol.q2 * scale
        soft = np.einsum("mnr,mnr->mn", Q.conj(), Y)
        soft[np.all(Q == 0, axis=2)] = np.nan
        for j in range(layout.subgrid_count):
            sol = solutions.get((p.layer, j))
            ms, ns = re_position(p.source[j], p.n_rb)
            md, nd = re_position(p.dest[j], p.n_rb)
            if sol is None:
                soft[ms, ns] = np.nan
                soft[md, nd] = np.nan
                continue
            scale = np.sqrt(p.view_length)
            est = 0.5 * scale * (Y[ms, ns, :] @ sol.q1.conj() + Y[md, nd, :] @ sol.q2.conj())
            soft[ms, ns] = est
            soft[md, nd] = est
        out[li] = soft
    return out


@dataclass(frozen=True, eq=False)
class CcaReception:
    """Output of :func:`cca_receive`.

    ``soft`` is ``(n_decoded, n_sc, n_sym)``; ``rho`` and ``erased`` are
    ``(n_decoded, subgrid_count)``.
    """

    soft: np.ndarray
    rho: np.ndarray
    erased: np.ndarray
    ambiguous: np.ndarray


def cca_receive(Y, patterns, vmaps, layout, ref_symbol, eps="auto", genie_blocks=None):
    """Full CCA receiver: views, CCA, phase resolution and equalization.

    ``genie_blocks`` maps ``(layer, subgrid)`` to the transmitted repeated
    block for genie phase resolution; otherwise the first symbol of each
    block is the known ``ref_symbol``. Blocks whose CCA or phase resolution
    fails are erased.
    """
    solutions = {}
    rho = np.zeros((len(patterns), layout.subgrid_count))
    erased = np.zeros_like(rho, dtype=bool)
    ambiguous = np.zeros_like(erased)
    for li, p in enumerate(patterns):
        for j in range(layout.subgrid_count):
            try:
                sol = cca_two_view(build_views(Y, p, j), eps)
                genie = None if genie_blocks is None else genie_blocks[(p.layer, j)]
                sol = resolve_phase(sol, ref_symbol, 0, genie)
            except (RankDeficiencyError, PhaseUnresolvableError, np.linalg.LinAlgError):
                solutions[(p.layer, j)] = None
                erased[li, j] = True
                continue
            solutions[(p.layer, j)] = sol
            rho[li, j] = sol.rho
            ambiguous[li, j] = sol.ambiguous
    soft = equalize(Y, solutions, patterns, vmaps, layout)
    return CcaReception(soft, rho, erased, ambiguous)
