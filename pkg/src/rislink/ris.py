"""MMSE design of the surface reflection vector with unit-modulus projection.

Given the stacked receive filters and the per-user cascaded channels, the
unconstrained reflection vector minimizing the sum of per-user filter-output
MSEs solves a normal equation assembled from filtered cascade blocks. The
physical surface only applies phases, so the solution is projected entry-wise
onto the unit circle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_COND_LIMIT = 1e12
_RIDGE = 1e-9


@dataclass
class ReflectionDesign:
    phi_unconstrained: np.ndarray  # (L_e,) normal-equation solution
    phi_projected: np.ndarray      # (L_e,) unit modulus
    b_matrix: np.ndarray           # (L_e, L_e) Hermitian PSD
    psi: np.ndarray                # (L_e,)


def phase_project(phi: np.ndarray) -> np.ndarray:
    """Entry-wise closest unit-modulus vector; zeros map to 1."""
    p = np.asarray(phi, dtype=np.complex128)
    out = np.ones_like(p)
    nz = p != 0
    out[nz] = p[nz] / np.abs(p[nz])
    return out


def mmse_reflection(filters: np.ndarray, z_per_user: np.ndarray,
                    h_direct: np.ndarray | None) -> ReflectionDesign:
    """Solve the reflection normal equations for stacked filters.

    ``filters``: (K, M), row k is w_k^H (so filters @ y yields all filter
    outputs). ``z_per_user``: (K, M, L_e) cascaded blocks. ``h_direct``:
    (M, K) direct channels, or None when there is no direct path.

    Minimizes sum_k ||e_k - filters @ (h_k + Z_k phi)||^2 over phi.
    """
    w = np.asarray(filters, dtype=np.complex128)
    z = np.asarray(z_per_user, dtype=np.complex128)
    k, m = w.shape
    if z.shape[0] != k or z.shape[1] != m:
        raise ValueError(f"z_per_user shape {z.shape} mismatches filters {w.shape}")
    le = z.shape[2]

    wz = np.einsum("um,kml->kul", w, z)            # (K, K, L_e): W @ Z_k
    b = np.einsum("kul,kuj->lj", wz.conj(), wz)    # sum_k (WZ_k)^H (WZ_k)

    resid = np.eye(k, dtype=np.complex128)         # e_k columns
    if h_direct is not None:
        h = np.asarray(h_direct, dtype=np.complex128)
        if h.shape != (m, k):
            raise ValueError(f"h_direct shape {h.shape}, expected {(m, k)}")
        resid = resid - w @ h                      # column k: e_k - W h_k
    psi = np.einsum("kul,uk->l", wz.conj(), resid)

    cond = np.linalg.cond(b)
    b_solve = b
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        ridge = _RIDGE * np.trace(b).real / le
        if ridge <= 0:
            ridge = _RIDGE
        b_solve = b + ridge * np.eye(le)
        cond_after = np.linalg.cond(b_solve)
        if not np.isfinite(cond_after) or cond_after > 1 / np.finfo(float).eps:
            raise np.linalg.LinAlgError(
                f"reflection normal matrix singular beyond regularization "
                f"(cond {cond:.3e} -> {cond_after:.3e})")
    phi = np.linalg.solve(b_solve, psi)
    return ReflectionDesign(phi_unconstrained=phi,
                            phi_projected=phase_project(phi),
                            b_matrix=b, psi=psi)


def reflection_mse(filters: np.ndarray, z_per_user: np.ndarray,
                   h_direct: np.ndarray | None, phi: np.ndarray) -> float:
    """Objective value sum_k ||e_k - W(h_k + Z_k phi)||^2 at a given phi."""
    w = np.asarray(filters, dtype=np.complex128)
    z = np.asarray(z_per_user, dtype=np.complex128)
    k = w.shape[0]
    phi = np.asarray(phi, dtype=np.complex128).reshape(-1)
    h_eff = np.einsum("kml,l->mk", z, phi)
    if h_direct is not None:
        h_eff = h_eff + h_direct
    resid = np.eye(k) - w @ h_eff
    return float(np.sum(np.abs(resid) ** 2))
