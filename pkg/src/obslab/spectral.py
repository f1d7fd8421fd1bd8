"""Laplace-Beltrami eigenbases and spectral calculus on surface meshes.

Assembly uses linear elements on the chart: the cotangent stiffness matrix is
conformally invariant in two dimensions, so the metric enters only through
the (lumped) mass matrix, which carries the conformal weight.  Everything
downstream works in eigenmode coordinates, where states are coefficient
vectors against a mass-orthonormal basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as splinalg

from .errors import ConfigError, ConvergenceFailure, SpilloverGuard, TooManyModes
from .surface import SurfaceMesh, chart_triangle_areas, fmt_float, vertex_measures

_CLUSTER_RTOL = 1e-6
_EIGSH_SEED = 1787569


def assemble(mesh: SurfaceMesh):
    """Stiffness and mass matrices on the quotient vertices.

    Returns
    -------
    stiffness : csr_matrix
        Cotangent stiffness; symmetric positive semidefinite with the
        constants spanning its kernel.
    mass : dia_matrix
        Lumped mass (diagonal), carrying the conformal weight.  Lumping keeps
        the matrix trivially invertible and gives noticeably better eigenvalue
        dispersion on the uniform grids used here than the consistent mass.
    """
    verts = mesh.vertices
    tris = mesh.triangles
    areas = chart_triangle_areas(mesh)
    if np.any(areas <= 0):
        raise_degenerate = np.where(areas <= 0)[0]
        from .errors import DegenerateTriangle
        raise DegenerateTriangle(f"non-positive triangle(s) {raise_degenerate[:5]}")

    # edge vectors opposite each local vertex; local stiffness = E E^T / (4A)
    e = np.empty((len(tris), 3, 2))
    e[:, 0] = verts[tris[:, 2]] - verts[tris[:, 1]]
    e[:, 1] = verts[tris[:, 0]] - verts[tris[:, 2]]
    e[:, 2] = verts[tris[:, 1]] - verts[tris[:, 0]]
    local = np.einsum("tid,tjd->tij", e, e) / (4.0 * areas)[:, None, None]

    q = mesh.quotient_index[tris]                      # (nt, 3)
    rows = np.repeat(q, 3, axis=1).ravel()             # i index
    cols = np.tile(q, (1, 3)).ravel()                  # j index
    stiffness = sparse.coo_matrix(
        (local.ravel(), (rows, cols)),
        shape=(mesh.n_quotient, mesh.n_quotient)).tocsr()
    mass = sparse.diags(vertex_measures(mesh))
    return stiffness, mass


@dataclass(frozen=True)
class EigenBasis:
    """Mass-orthonormal eigenpairs of the (possibly perturbed) operator.

    ``modes[:, j]`` holds the coefficients of mode j over quotient vertices,
    ``lambdas[j]`` its eigenvalue, ordered increasingly.  For a plain
    Laplacian basis ``lambdas[0]`` is numerically zero and the first mode is
    constant.  ``change_of_basis`` is set by :func:`perturb_basis` and maps
    new-basis coefficients to old-basis coefficients.
    """

    mesh: SurfaceMesh
    lambdas: np.ndarray
    modes: np.ndarray
    mass: sparse.spmatrix
    stiffness: sparse.spmatrix
    residuals: np.ndarray
    change_of_basis: Optional[np.ndarray] = None

    def __post_init__(self):
        self.lambdas.setflags(write=False)
        self.modes.setflags(write=False)
        self.residuals.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return len(self.lambdas)

    @property
    def lambda_max(self) -> float:
        return float(self.lambdas[-1])

    def state(self, coeffs) -> "SpectralState":
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (self.n_modes,):
            raise ValueError(f"expected {self.n_modes} coefficients")
        return SpectralState(basis=self, coeffs=coeffs)

    def project(self, quotient_values) -> "SpectralState":
        """L2-orthogonal projection of a vertex field onto the basis."""
        v = np.asarray(quotient_values)
        return self.state(self.modes.T @ (self.mass @ v))

    def vertex_values(self, state: "SpectralState") -> np.ndarray:
        """Chart-vertex values of a state (identified vertices repeated)."""
        return self.mesh.to_chart(self.modes @ state.coeffs)

    def orthonormality_defect(self) -> float:
        gram = self.modes.T @ (self.mass @ self.modes)
        return float(np.abs(gram - np.eye(self.n_modes)).max())


@dataclass(frozen=True)
class SpectralState(object):
    """A function on the surface, stored as eigenbasis coefficients."""

    basis: EigenBasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    def norm(self) -> float:
        """L2 norm (Plancherel against the mass-orthonormal basis)."""
        return float(np.linalg.norm(self.coeffs))


def eigenvalue_clusters(values: np.ndarray) -> list:
    """Slices (start, stop) grouping eigenvalues closer than a relative 1e-6.

    Within such a cluster the individual eigenvectors returned by a solver
    are an arbitrary rotation of the eigenspace, so per-mode quantities are
    only meaningful after a gauge fix or a basis-free reduction per block.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    scale0 = max(abs(values[-1]), 1.0) if n else 1.0
    out = []
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and (values[stop] - values[stop - 1]) <= _CLUSTER_RTOL * max(
                abs(values[stop]), scale0 * 1e-12):
            stop += 1
        out.append((start, stop))
        start = stop
    return out


def _deterministic_gauge(block: np.ndarray) -> np.ndarray:
    """Fix sign and column order of a degenerate block reproducibly."""
    out = block.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        lead = int(np.argmax(np.abs(col) >= np.abs(col).max() * (1 - 1e-12)))
        if col[lead] < 0:
            out[:, c] = -col
    # lexicographic order of the (rounded) coefficient vectors
    keys = np.round(out, 9)
    order = np.lexsort(keys[::-1])
    return out[:, order]


def eigensolve(mesh: SurfaceMesh, n_modes: int, tol: float = 1e-8) -> EigenBasis:
    """Lowest ``n_modes`` eigenpairs of the Laplace-Beltrami operator.

    Dense LAPACK path below 2000 quotient vertices, otherwise shift-invert
    Lanczos at a small negative shift (the stiffness alone is singular).
    Eigenvalues closer than a relative 1e-6 are treated as one cluster: the
    cluster is re-orthonormalized jointly and given a deterministic gauge.

    Raises TooManyModes when ``n_modes > n_quotient / 10`` and
    ConvergenceFailure when the solver stalls or the zero mode is not
    resolved cleanly.
    """
    if n_modes < 2:
        raise ConfigError("n_modes must be at least 2")
    nq = mesh.n_quotient
    if n_modes > nq / 10:
        raise TooManyModes(
            f"n_modes={n_modes} exceeds n_quotient/10 = {nq / 10:.0f}")

    stiffness, mass = assemble(mesh)
    lump = mass.diagonal()

    if nq <= 2000:
        scale = 1.0 / np.sqrt(lump)
        dense = scale[:, None] * stiffness.toarray() * scale[None, :]
        dense = 0.5 * (dense + dense.T)
        vals, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, n_modes - 1])
        modes = scale[:, None] * vecs
    else:
        shift = -1e-2 * float(stiffness.diagonal().mean() / lump.mean())
        v0 = np.random.default_rng(_EIGSH_SEED).standard_normal(nq)
        try:
            vals, modes = splinalg.eigsh(stiffness, k=n_modes, M=mass,
                                         sigma=shift, which="LM", v0=v0)
        except splinalg.ArpackError as exc:
            raise ConvergenceFailure(f"eigensolver failed: {exc}") from exc
        order = np.argsort(vals)
        vals, modes = vals[order], modes[:, order]

    # joint re-orthonormalization of near-degenerate clusters
    for start, stop in eigenvalue_clusters(vals):
        block = modes[:, start:stop]
        gram = block.T @ (lump[:, None] * block)
        chol = scipy.linalg.cholesky(gram, lower=True)
        block = scipy.linalg.solve_triangular(chol, block.T, lower=True).T
        modes[:, start:stop] = _deterministic_gauge(block)

    resid = stiffness @ modes - (lump[:, None] * modes) * vals[None, :]
    mnorm = np.sqrt(np.sum((lump[:, None] * modes) ** 2, axis=0))
    residuals = np.linalg.norm(resid, axis=0) / ((1.0 + np.abs(vals)) * mnorm)
    if residuals.max() > max(tol, 1e-6):
        raise ConvergenceFailure(
            f"worst relative residual {residuals.max():.2e} exceeds {max(tol, 1e-6):.0e}")
    if vals[0] > 1e-8 * max(vals[1], 1e-300):
        raise ConvergenceFailure(
            f"zero mode not resolved: lambda0={vals[0]:.2e}, lambda1={vals[1]:.2e}")

    return EigenBasis(mesh=mesh, lambdas=vals, modes=modes, mass=mass,
                      stiffness=stiffness, residuals=residuals)


def weyl_ratio(basis: EigenBasis) -> float:
    """Counting-function ratio N(lambda) * 4 pi / (area * lambda) at the top
    of the computed window; tends to 1 as the window grows."""
    n = basis.n_modes
    return n * 4.0 * np.pi / (basis.mesh.area * basis.lambda_max)


# ---------------------------------------------------------------------------
# reference bump profiles and spectral filters

def _mollifier_step(t: np.ndarray) -> np.ndarray:
    """Smooth monotone step built from exp(-1/t): 0 for t<=0, 1 for t>=1."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    lo, hi = t <= 0.0, t >= 1.0
    out[lo], out[hi] = 0.0, 1.0
    mid = ~(lo | hi)
    tm = t[mid]
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / (1.0 - tm))
    out[mid] = a / (a + b)
    return out


def _dyadic_step(rho: np.ndarray) -> np.ndarray:
    """G(rho): 0 below 1/2, 1 above 1, smooth in between (the telescoping
    generator of the dyadic partition)."""
    return _mollifier_step(2.0 * np.asarray(rho, dtype=float) - 1.0)


def bump_phi(rho) -> np.ndarray:
    """phi supported in (1/2, 2) with phi0^2 + sum_k phi(2^-k r)^2 = 1."""
    rho = np.abs(np.asarray(rho, dtype=float))
    val = _dyadic_step(rho) - _dyadic_step(rho / 2.0)
    return np.sqrt(np.maximum(val, 0.0))


def bump_phi0(r) -> np.ndarray:
    """phi0 supported in (-2, 2), equal to 1 near 0."""
    r = np.abs(np.asarray(r, dtype=float))
    return np.sqrt(np.maximum(1.0 - _dyadic_step(r / 2.0), 0.0))


# the frequency cutoff chi shares the reference profile of phi
bump_chi = bump_phi


def dyadic_partition_check(lambdas, k_max: int) -> float:
    """Worst defect of 1 = phi0(l)^2 + sum_{k=1}^{k_max} phi_k(l)^2 over the
    given eigenvalues.  Exactly 0 once 2^k_max covers the spectrum."""
    lam = np.asarray(lambdas, dtype=float)
    total = bump_phi0(lam) ** 2
    for k in range(1, k_max + 1):
        total += bump_phi(lam / 2.0 ** k) ** 2
    return float(np.abs(1.0 - total).max())


@dataclass(frozen=True)
class SpectralFilter:
    """Diagonal multiplier w_j = symbol(lambda_j) with its continuum support."""

    name: str
    weights: np.ndarray
    support: tuple[float, float]        # closure of {lambda : symbol != 0}

    def __post_init__(self):
        self.weights.setflags(write=False)

    def apply(self, state: SpectralState) -> SpectralState:
        return state.basis.state(self.weights * state.coeffs)


def make_filter(basis: EigenBasis, kind: str, h: Optional[float] = None,
                k: Optional[int] = None) -> SpectralFilter:
    """Spectral window from the fixed reference bump profiles.

    Kinds
    -----
    ``chi``      : w_j = chi(h^2 lambda_j), support lambda in (1/(2h^2), 2/h^2)
    ``phi_k``    : w_j = phi(2^-k lambda_j), support (2^(k-1), 2^(k+1))
    ``phi_0``    : w_j = phi0(lambda_j), support [0, 2)
    ``wave_chi`` : w_j = chi(h sqrt(lambda_j)), support (1/(4h^2), 4/h^2)
    """
    lam = basis.lambdas
    if kind == "chi":
        if h is None or h <= 0:
            raise ConfigError("chi filter needs h > 0")
        weights = bump_chi(h * h * lam)
        support = (0.5 / h ** 2, 2.0 / h ** 2)
    elif kind == "phi_k":
        if k is None or k < 1:
            raise ConfigError("phi_k filter needs k >= 1")
        weights = bump_phi(lam / 2.0 ** k)
        support = (2.0 ** (k - 1), 2.0 ** (k + 1))
    elif kind == "phi_0":
        weights = bump_phi0(lam)
        support = (0.0, 2.0)
    elif kind == "wave_chi":
        if h is None or h <= 0:
            raise ConfigError("wave_chi filter needs h > 0")
        weights = bump_chi(h * np.sqrt(np.maximum(lam, 0.0)))
        support = (0.25 / h ** 2, 4.0 / h ** 2)
    else:
        raise ConfigError(f"unknown filter kind {kind!r}")
    name = kind if kind in ("phi_0",) else (
        f"{kind}(h={h:g})" if h is not None else f"{kind}(k={k})")
    return SpectralFilter(name=name, weights=weights, support=support)


def check_spillover(basis: EigenBasis, filt: SpectralFilter) -> None:
    """Refuse filters whose support exceeds 0.8 * lambda_N of the basis."""
    if filt.support[1] > 0.8 * basis.lambda_max:
        raise SpilloverGuard(
            f"filter {filt.name} reaches lambda={filt.support[1]:g} but the "
            f"basis only resolves 0.8*lambda_N = {0.8 * basis.lambda_max:g}")


def sobolev_norm(state: SpectralState, s: float) -> float:
    """Spectral Sobolev norm (sum (1+lambda_j)^s |u_j|^2)^(1/2)."""
    lam = state.basis.lambdas
    return float(np.sqrt(np.sum((1.0 + lam) ** s * np.abs(state.coeffs) ** 2)))


def random_state(basis: EigenBasis, rng: np.random.Generator,
                 normalize: bool = True) -> SpectralState:
    """Complex Gaussian coefficients, optionally scaled to unit L2 norm."""
    c = rng.standard_normal(basis.n_modes) + 1j * rng.standard_normal(basis.n_modes)
    if normalize:
        c /= np.linalg.norm(c)
    return basis.state(c)


# ---------------------------------------------------------------------------
# potential perturbation

def perturb_basis(basis: EigenBasis,
                  potential: Union[np.ndarray, Callable]) -> EigenBasis:
    """Eigenbasis of -Laplacian + V through a Galerkin solve on the modes.

    ``potential`` is a real vertex field (chart or quotient length) or a
    callable of the chart coordinates.  The returned basis lives in the same
    coordinate system: ``change_of_basis[:, j]`` holds the coefficients of
    new mode j against the original basis, and the stored residuals are the
    originals propagated through that matrix (the Galerkin solve itself is
    exact to LAPACK accuracy).
    """
    mesh = basis.mesh
    if callable(potential):
        pts = mesh.vertices[mesh.quotient_reps]
        v = np.asarray(potential(pts[:, 0], pts[:, 1]), dtype=float)
    else:
        v = np.asarray(potential, dtype=float)
        if v.shape == (mesh.n_vertices,):
            v = mesh.to_quotient(v)
        elif v.shape != (mesh.n_quotient,):
            raise ConfigError("potential has the wrong length")
    lump = basis.mass.diagonal()
    gal = basis.modes.T @ ((lump * v)[:, None] * basis.modes)
    gal = 0.5 * (gal + gal.T)
    gal[np.diag_indices_from(gal)] += basis.lambdas
    mu, u = scipy.linalg.eigh(gal)
    for start, stop in eigenvalue_clusters(mu):
        u[:, start:stop] = _deterministic_gauge(u[:, start:stop])
    new_modes = basis.modes @ u
    residuals = np.abs(u).T @ basis.residuals
    return EigenBasis(mesh=mesh, lambdas=mu, modes=new_modes, mass=basis.mass,
                      stiffness=basis.stiffness, residuals=residuals,
                      change_of_basis=u)


# ---------------------------------------------------------------------------
# text formats

def save_eigenbasis(path, basis: EigenBasis) -> None:
    """Header ``N nv``; per mode one ``lambda residual`` line followed by nv
    chart-vertex coefficients."""
    chart_modes = basis.mesh.to_chart(basis.modes.T)    # (N, nv)
    with open(path, "w") as fh:
        fh.write(f"{basis.n_modes} {basis.mesh.n_vertices}\n")
        for j in range(basis.n_modes):
            fh.write(f"{fmt_float(basis.lambdas[j])} {fmt_float(basis.residuals[j])}\n")
            for val in chart_modes[j]:
                fh.write(f"{fmt_float(val)}\n")


def load_eigenbasis(path, mesh: SurfaceMesh) -> EigenBasis:
    """Read a basis written by save_eigenbasis onto an existing mesh."""
    with open(path) as fh:
        tokens = fh.read().split()
    n_modes, nv = int(tokens[0]), int(tokens[1])
    if nv != mesh.n_vertices:
        raise ConfigError(f"basis file is for nv={nv}, mesh has {mesh.n_vertices}")
    expected = 2 + n_modes * (2 + nv)
    if len(tokens) != expected:
        raise ConfigError(f"basis file is truncated or padded "
                          f"({len(tokens)} tokens, expected {expected})")
    vals = np.empty(n_modes)
    residuals = np.empty(n_modes)
    modes = np.empty((mesh.n_quotient, n_modes))
    pos = 2
    for j in range(n_modes):
        vals[j] = float(tokens[pos]); residuals[j] = float(tokens[pos + 1])
        pos += 2
        chart = np.array([float(t) for t in tokens[pos:pos + nv]])
        pos += nv
        modes[:, j] = chart[mesh.quotient_reps]
    stiffness, mass = assemble(mesh)
    return EigenBasis(mesh=mesh, lambdas=vals, modes=modes, mass=mass,
                      stiffness=stiffness, residuals=residuals)


def save_filter(path, filt: SpectralFilter) -> None:
    """Write filter weights as ``j weight`` lines."""
    with open(path, "w") as fh:
        for j, w in enumerate(filt.weights):
            fh.write(f"{j} {fmt_float(w)}\n")
