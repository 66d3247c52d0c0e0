"""Weak continuity constraint: assembly and projection.

A state (rho, m, z) satisfies the discrete continuity equation when

    II( rho d_t psi + m . grad psi + z psi ) dx dt
        = I psi(1) u_B dx - I psi(0) u_A dx          for all P1 psi,

with no-flux (or periodic) spatial boundaries built into the test
space.  The zero-order pairing (z, psi) is evaluated with the vertex
quadrature rule, i.e. the diagonal of nodal integrals ell_i = I hat_i:
the discrete weighted norm is then a plain weighted l2 norm of the
coefficients with weights (vol, vol, ell/delta), and the slicewise
source proximal maps are exact in the same geometry the projection
uses.  (With the consistent mass pairing instead, the two proximal
operators of the splitting live in different inner products and its
fixed-point residual stalls at the quadrature gap.)

Projecting a state onto the constraint set in that norm reduces to one
SPD solve

    ( 1/2 K + delta/2 diag(ell) ) phi = -defect(state)

followed by the explicit updates rho += grad_t phi / 2,
m += grad_xy phi / 2, z += delta phi / 2.  K is the space-time
stiffness matrix, exact for P1 integrands.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import NonConvergence
from .mesh import State, gradient_p1


@dataclass
class BoundaryData:
    """Endpoint densities, one value per spatial triangle, nonnegative."""

    ua: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.ua = np.asarray(self.ua, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        if self.ua.shape != self.ub.shape or self.ua.ndim != 1:
            raise ValueError("endpoint densities must be 1-d arrays of equal length")
        if np.any(self.ua < 0) or np.any(self.ub < 0):
            raise ValueError("endpoint densities must be nonnegative")


@dataclass
class SparseSystem:
    """Assembled projection operator together with its Jacobi diagonal."""

    matrix: object
    diag: np.ndarray
    delta: float
    mesh: object


def assemble_system(mesh, delta):
    """Build 1/2 K + delta/2 diag(ell) for the given mesh.

    The result is symmetric by construction (the defect max|A - A^T| is
    exactly zero) and positive definite for delta > 0.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    a = 0.5 * mesh.stiffness_matrix() + (0.5 * delta) * sp.diags(mesh.lumped_mass())
    a = a.tocsr()
    return SparseSystem(matrix=a, diag=a.diagonal(), delta=float(delta), mesh=mesh)


def boundary_vector(mesh, bdata):
    """Pairings of the hat functions with the endpoint data.

    Entry i holds I psi_i(1) u_B - I psi_i(0) u_A; only the first and
    last time slices are populated.
    """
    _check_bdata(mesh, bdata)
    v = np.zeros(mesh.n_dofs)
    v[: mesh.nsp] = -mesh.slice_load(bdata.ua)
    v[-mesh.nsp :] = mesh.slice_load(bdata.ub)
    return v


def continuity_defect(state, bdata, mesh):
    """Residual of the weak continuity equation against every hat function."""
    gt, gx, gy = mesh.gradient_matrices()
    vol = mesh.volumes
    r = gt.T @ (vol * state.rho)
    r += gx.T @ (vol * state.m[:, 0])
    r += gy.T @ (vol * state.m[:, 1])
    r += mesh.lumped_mass() * state.z
    r -= boundary_vector(mesh, bdata)
    return r


def assemble_rhs(mesh, state, bdata):
    """Right-hand side of the projection system: minus the defect."""
    return -continuity_defect(state, bdata, mesh)


def cg_solve(system, rhs, tol=1e-9, maxit=None, x0=None, callback=None):
    """Jacobi-preconditioned conjugate gradients.

    Stops when |A x - rhs| <= tol * |rhs|; raises NonConvergence past
    maxit (default 10 * sqrt(n) + 500).  x0 warm-starts the iteration,
    which the outer solver exploits because consecutive projections
    change slowly.
    """
    a = system.matrix
    d = system.diag
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.size
    if maxit is None:
        maxit = int(10.0 * np.sqrt(n)) + 500
    bnorm = float(np.sqrt(rhs @ rhs))
    if bnorm == 0.0:
        return np.zeros(n)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = rhs - a @ x
    res = float(np.sqrt(r @ r))
    if res <= tol * bnorm:
        return x
    z = r / d
    p = z.copy()
    rz = float(r @ z)
    for _ in range(maxit):
        ap = a @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        if callback is not None:
            callback(x)
        res = float(np.sqrt(r @ r))
        if res <= tol * bnorm:
            return x
        z = r / d
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NonConvergence(
        "conjugate gradients stalled; check delta and mesh resolution",
        maxit,
        res / bnorm,
    )


def project_continuity(
    state, bdata, system, tol=1e-9, maxit=None, phi0=None, return_phi=False
):
    """Orthogonal projection onto the continuity constraint set.

    Solves the SPD potential system, then applies the explicit update.
    The output tested against psi = 1 reproduces the mass balance
    identity exactly: after the linear solve, z is shifted by the
    constant that zeroes this row, a correction within solver tolerance
    that keeps the reported mass defect at rounding level on every
    projected iterate.
    """
    mesh = system.mesh
    rhs = assemble_rhs(mesh, state, bdata)
    phi = cg_solve(system, rhs, tol=tol, maxit=maxit, x0=phi0)
    g = gradient_p1(mesh, phi)
    rho = state.rho + 0.5 * g[:, 0]
    m = state.m + 0.5 * g[:, 1:]
    z = state.z + (0.5 * system.delta) * phi

    lum = mesh.lumped_mass()
    target = float(np.sum(mesh.slice_load(bdata.ub) - mesh.slice_load(bdata.ua)))
    z += (target - float(lum @ z)) / float(lum.sum())

    out = State(rho, m, z)
    if return_phi:
        return out, phi
    return out


def _check_bdata(mesh, bdata):
    want = mesh.spatial_tris.shape[0]
    if bdata.ua.shape != (want,):
        raise ValueError(
            f"boundary data has {bdata.ua.shape[0]} triangle values, mesh needs {want}"
        )
