"""Observability Gramians, constants, and estimate checks.

The Gramian of a region and horizon is the Hermitian form
G_{jk} = win_j win_k m_{jk} I_{jk}: a spatial overlap factor m (region
weights between eigenmodes) times an exactly-integrated phase factor I.
Everything here reduces to small dense Hermitian linear algebra in mode
coordinates; constants are reported with their full provenance (N, horizon,
region, h or k) because none of them is canonical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import ConfigError, UnresolvedScale
from .evolve import TimeGrid, evolution_frequencies
from .spectral import (EigenBasis, SpectralFilter, SpectralState, bump_phi,
                       check_spillover, eigenvalue_clusters, make_filter,
                       sobolev_norm)
from .surface import ControlRegion, fmt_float

_NOT_OBSERVABLE_REL = 1e-12


def overlap_matrix(basis: EigenBasis, region: ControlRegion) -> np.ndarray:
    """Spatial overlap m_{jk} = <w e_k, e_j> against the surface measure.

    Real symmetric, positive semidefinite, equal to the identity when the
    region weight is 1 everywhere (it is then the basis Gram matrix).
    """
    wq = region.quotient_weights()
    lump = basis.mass.diagonal()
    m = basis.modes.T @ ((lump * wq)[:, None] * basis.modes)
    return 0.5 * (m + m.T)


def _phase_integrals(freq: np.ndarray, T: float) -> np.ndarray:
    """I_{jk} = integral_0^T exp(i (freq_j - freq_k) t) dt in closed form.

    Near-degenerate pairs switch to the Taylor form
    T (1 + i T theta / 2 - T^2 theta^2 / 6) below |theta| = 1e-9 max(1, 1/T)
    to dodge the cancellation in (e^{iT theta} - 1)/(i theta).
    """
    theta = freq[:, None] - freq[None, :]
    delta = 1e-9 * max(1.0, 1.0 / T)
    small = np.abs(theta) <= delta
    theta_safe = np.where(small, 1.0, theta)
    out = (np.exp(1j * T * theta_safe) - 1.0) / (1j * theta_safe)
    taylor = T * (1.0 + 1j * T * theta / 2.0 - (T * theta) ** 2 / 6.0)
    return np.where(small, taylor, out)


@dataclass(frozen=True)
class ObservabilityGramian:
    """Hermitian Gramian with the metadata that makes its numbers citable."""

    matrix: np.ndarray
    T: float
    basis: EigenBasis
    region: ControlRegion
    kind: str                       # "schrodinger" | "halfwave"
    method: str                     # "closed-form" | "quadrature"
    window: Optional[SpectralFilter] = None

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0]

    def quadratic_form(self, state: SpectralState) -> float:
        """<G u, u>: the observed energy of u over [0, T] on the region."""
        v = state.coeffs
        return float(np.real(np.conj(v) @ (self.matrix @ v)))

    def norm(self) -> float:
        """Spectral norm via the extreme eigenvalues."""
        lo, hi = extreme_eigenvalues(self.matrix)
        return max(abs(lo), abs(hi))


def extreme_eigenvalues(matrix: np.ndarray) -> tuple[float, float]:
    # full eigvalsh: subset drivers misbehave on exactly-degenerate Gramians
    # such as T*identity, and our matrices stay small (N <= a few hundred)
    vals = scipy.linalg.eigvalsh(matrix)
    return float(vals[0]), float(vals[-1])


def gramian(basis: EigenBasis, region: ControlRegion, T: float,
            window: Optional[SpectralFilter] = None,
            kind: str = "schrodinger", method: str = "closed-form",
            grid: Optional[TimeGrid] = None) -> ObservabilityGramian:
    """Observability Gramian over [0, T] for the region, optionally windowed.

    The closed-form method integrates the phases exactly; the quadrature
    method (cross-check) sums the sampled evolution with the supplied grid's
    weights.  Windows multiply in diagonally and must respect the spillover
    guard.  The half-wave kind replaces lambda by sqrt(lambda) in the phases.
    """
    if T <= 0:
        raise ConfigError("need T > 0")
    if window is not None:
        check_spillover(basis, window)
        win = window.weights
    else:
        win = np.ones(basis.n_modes)
    freq = evolution_frequencies(basis, kind)
    m = overlap_matrix(basis, region)
    if method == "closed-form":
        phase = _phase_integrals(freq, T)
    elif method == "quadrature":
        if grid is None:
            raise ConfigError("quadrature assembly needs a time grid")
        if not (abs(grid.t_start) <= 1e-12 and abs(grid.t_end - T) <= 1e-12):
            raise ConfigError("quadrature grid must span [0, T]")
        e = np.exp(1j * np.outer(freq, grid.t))
        phase = (e * grid.weights) @ e.conj().T
    else:
        raise ConfigError(f"unknown assembly method {method!r}")
    g = (win[:, None] * win[None, :]) * m * phase
    g = 0.5 * (g + g.conj().T)
    return ObservabilityGramian(matrix=g, T=float(T), basis=basis,
                                region=region, kind=kind, method=method,
                                window=window)


@dataclass(frozen=True)
class ObservabilityReport:
    """K = 1/lambda_min with its certificate (the hardest state to observe)."""

    K: float
    lambda_min: float
    certificate: np.ndarray
    not_observable: bool
    gramian: ObservabilityGramian

    def __post_init__(self):
        self.certificate.setflags(write=False)


def observability_constant(gram: ObservabilityGramian) -> ObservabilityReport:
    """Hermitian eigensolve for lambda_min; K = 1/lambda_min.

    A lambda_min below 1e-12 ||G|| marks the truncation numerically
    unobservable; that is reported in the flag, never raised here.
    """
    vals, vecs = scipy.linalg.eigh(gram.matrix)
    lam_min = float(vals[0])
    certificate = vecs[:, 0]
    flag = lam_min <= _NOT_OBSERVABLE_REL * gram.norm()
    k = 1.0 / lam_min if lam_min > 0 else np.inf
    return ObservabilityReport(K=k, lambda_min=lam_min, certificate=certificate,
                               not_observable=flag, gramian=gram)


def restricted_constant(gram: ObservabilityGramian,
                        mode_set: np.ndarray) -> ObservabilityReport:
    """Observability constant of the Gramian restricted to a span of modes.

    The restriction is the plain submatrix: the constant certifies
    ||u||^2 <= K <G u, u> for u supported on ``mode_set``.
    """
    idx = np.asarray(mode_set)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    if len(idx) == 0:
        raise ConfigError("empty mode set")
    sub = gram.matrix[np.ix_(idx, idx)]
    vals, vecs = scipy.linalg.eigh(sub)
    lam_min = float(vals[0])
    certificate = np.zeros(gram.n_modes, dtype=complex)
    certificate[idx] = vecs[:, 0]
    flag = lam_min <= _NOT_OBSERVABLE_REL * gram.norm()
    k = 1.0 / lam_min if lam_min > 0 else np.inf
    return ObservabilityReport(K=k, lambda_min=lam_min, certificate=certificate,
                               not_observable=flag, gramian=gram)


def windowed_constants(basis: EigenBasis, region: ControlRegion, T: float,
                       k_range: Sequence[int],
                       kind: str = "schrodinger") -> list[dict]:
    """Observability constants on each dyadic band phi_k, k in k_range.

    For each k the constant is computed on the span of the modes inside the
    band's support (restriction, not reweighting): that is the truncated
    shadow of the frequency-localized inequality.  Bands containing no modes
    are reported with n_modes = 0 and K = nan.
    """
    gram = gramian(basis, region, T, kind=kind)
    records = []
    for k in k_range:
        filt = make_filter(basis, "phi_k", k=int(k))
        check_spillover(basis, filt)
        idx = np.flatnonzero(filt.weights > 0)
        if len(idx) == 0:
            records.append(dict(k=int(k), K=float("nan"),
                                lambda_min=float("nan"), n_modes=0,
                                support=filt.support, T=T))
            continue
        rep = restricted_constant(gram, idx)
        records.append(dict(k=int(k), K=rep.K, lambda_min=rep.lambda_min,
                            n_modes=len(idx), support=filt.support, T=T,
                            not_observable=rep.not_observable))
    return records


def wave_windowed_constant(basis: EigenBasis, region: ControlRegion,
                           h: float, C_horizon: float = 1.0) -> dict:
    """Half-wave observability constant on the window chi(h sqrt(-Delta)).

    The horizon is T = C_horizon log(1/h) and the constant is normalized by
    the 1/T time average, so the full-surface region scores exactly 1.
    """
    if not 0 < h < 1:
        raise ConfigError("need 0 < h < 1 (log(1/h) horizon)")
    if C_horizon <= 0:
        raise ConfigError("need C_horizon > 0")
    T = C_horizon * np.log(1.0 / h)
    filt = make_filter(basis, "wave_chi", h=h)
    check_spillover(basis, filt)
    idx = np.flatnonzero(filt.weights > 0)
    if len(idx) == 0:
        raise ConfigError(f"no modes inside the wave window at h={h:g}")
    gram = gramian(basis, region, T, kind="halfwave")
    rep = restricted_constant(gram, idx)
    k_wave = T / rep.lambda_min if rep.lambda_min > 0 else np.inf
    return dict(h=h, C_horizon=C_horizon, T=T, K_wave=k_wave,
                lambda_min=rep.lambda_min, n_modes=len(idx),
                support=filt.support, not_observable=rep.not_observable)


def eigenfunction_mass(basis: EigenBasis, region: ControlRegion):
    """Worst region mass per eigenvalue cluster and its minimum.

    Within a numerically degenerate cluster the individual diagonal entries
    of the overlap matrix depend on an arbitrary rotation of the eigenspace
    and do not converge under mesh refinement.  Every mode of a cluster is
    therefore assigned the smallest eigenvalue of the cluster's overlap
    block: the mass of the worst unit eigenfunction in that eigenspace,
    which is basis independent.  Singleton clusters reduce to plain m_{jj}.
    """
    m = overlap_matrix(basis, region)
    per_mode = np.empty(basis.n_modes)
    for start, stop in eigenvalue_clusters(basis.lambdas):
        if stop - start == 1:
            per_mode[start] = m[start, start].real
        else:
            block = 0.5 * (m[start:stop, start:stop] + m[start:stop, start:stop].conj().T)
            per_mode[start:stop] = np.linalg.eigvalsh(block)[0]
    return float(per_mode.min()), per_mode


def check_observe_with_error(basis: EigenBasis, region: ControlRegion,
                             T: float, n_random: int = 64,
                             seed: int = 0) -> dict:
    """Worst constant in the relaxed inequality with an H^{-4} error term.

    C* = max over probes of ||u||^2 / (<G u, u> + ||u||^2_{H^-4}).  The probe
    set mixes seeded random states, dyadic band packets, and the Gramian's
    own certificates (global and per-band), so the reported maximum has seen
    both generic and adversarial directions.
    """
    gram = gramian(basis, region, T)
    rng = np.random.default_rng(seed)
    probes: list[tuple[str, np.ndarray]] = []
    n = basis.n_modes
    for i in range(n_random):
        c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        probes.append((f"random[{i}]", c / np.linalg.norm(c)))
    k_max = int(np.ceil(np.log2(max(basis.lambda_max, 4.0))))
    for k in range(1, k_max + 1):
        w = bump_phi(basis.lambdas / 2.0 ** k)
        if not np.any(w > 0):
            continue
        c = w * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        nrm = np.linalg.norm(c)
        if nrm > 0:
            probes.append((f"packet[k={k}]", c / nrm))
        idx = np.flatnonzero(w > 0)
        rep = restricted_constant(gram, idx)
        probes.append((f"certificate[k={k}]", rep.certificate))
    probes.append(("certificate[global]", observability_constant(gram).certificate))

    worst = -np.inf
    worst_label = ""
    for label, c in probes:
        u = basis.state(c)
        denom = gram.quadratic_form(u) + sobolev_norm(u, -4.0) ** 2
        ratio = u.norm() ** 2 / denom
        if ratio > worst:
            worst, worst_label = ratio, label
    return dict(C_star=float(worst), argmax_probe=worst_label, T=T,
                n_probes=len(probes), seed=seed, N=basis.n_modes)


def quasimode_estimate_check(basis: EigenBasis, region: ControlRegion,
                             h: float, tau: float = 1.0,
                             n_probes: int = 1000, seed: int = 0) -> dict:
    """Worst ratio in the quasimode observability estimate at scale h.

    R(u) = ||u|| / ( ||u||_{L2(region)} + (log(1/h)/h) ||(-h^2 Lap - tau) u|| )
    over a documented probe family: seeded Gaussian coefficients under an
    on-shell envelope around h^2 lambda = tau with 10% off-shell
    contamination, plus the pure eigenfunctions nearest the shell (which
    realize the extreme case: exactly on shell the ratio is 1/sqrt(m_jj)).
    Far off-shell states score near zero because the residual term dominates.
    """
    if not 0.5 <= tau <= 2.0:
        raise ConfigError("tau must lie in [1/2, 2]")
    if not 0 < h < 1:
        raise ConfigError("need 0 < h < 1")
    if 1.0 / h ** 2 > 0.8 * basis.lambda_max:
        raise UnresolvedScale(
            f"h={h:g} probes lambda ~ {1.0 / h ** 2:.3g} beyond the resolved "
            f"0.8 lambda_N = {0.8 * basis.lambda_max:.3g}")
    m = overlap_matrix(basis, region)
    rng = np.random.default_rng(seed)
    hl = h * h * basis.lambdas
    envelope = np.exp(-((hl - tau) / 0.25) ** 2)
    factor = np.log(1.0 / h) / h

    def ratio_of(c: np.ndarray) -> float:
        c = c / np.linalg.norm(c)
        region_norm = np.sqrt(max(float(np.real(np.conj(c) @ (m @ c))), 0.0))
        residual = np.linalg.norm((hl - tau) * c)
        return 1.0 / (region_norm + factor * residual)

    worst = -np.inf
    for _ in range(n_probes):
        c = envelope * (rng.standard_normal(basis.n_modes)
                        + 1j * rng.standard_normal(basis.n_modes))
        c += 0.1 * (rng.standard_normal(basis.n_modes)
                    + 1j * rng.standard_normal(basis.n_modes))
        if np.linalg.norm(c) == 0:
            continue
        worst = max(worst, ratio_of(c))
    nearest = np.argsort(np.abs(hl - tau))[:min(25, basis.n_modes)]
    for j in nearest:
        c = np.zeros(basis.n_modes, dtype=complex)
        c[j] = 1.0
        worst = max(worst, ratio_of(c))
    return dict(worst_ratio=float(worst), h=h, tau=tau, n_probes=n_probes,
                seed=seed, N=basis.n_modes)


# ---------------------------------------------------------------------------
# result export

_RESULT_COLUMNS = ("quantity", "surface", "region", "T", "N", "h_or_k",
                   "value", "certificate_norm")


def result_row(quantity: str, basis: EigenBasis, region: ControlRegion,
               T: float, h_or_k, value: float,
               certificate_norm: float = float("nan"), **extra) -> dict:
    """Assemble one result record with its provenance columns."""
    row = dict(quantity=quantity, surface=basis.mesh.surface_kind,
               region=region.spec.label(), T=T, N=basis.n_modes,
               h_or_k=h_or_k, value=value, certificate_norm=certificate_norm)
    row.update(extra)
    return row


def save_results_csv(path, rows: Sequence[dict]) -> None:
    """Write result records in the fixed column order (extras dropped).

    Region labels contain commas, so fields are quoted where needed.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_RESULT_COLUMNS)
        for row in rows:
            cells = []
            for col in _RESULT_COLUMNS:
                val = row.get(col, "")
                if isinstance(val, float):
                    cells.append(fmt_float(val))
                else:
                    cells.append(str(val))
            writer.writerow(cells)


def jsonable(obj):
    """Recursively convert NumPy scalars/arrays so json.dump accepts them."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    return obj


def save_results_json(path, rows: Sequence[dict], metadata: dict) -> None:
    """JSON variant carrying every extra field plus run-level metadata."""
    with open(path, "w") as fh:
        json.dump(jsonable({"metadata": metadata, "results": list(rows)}), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
