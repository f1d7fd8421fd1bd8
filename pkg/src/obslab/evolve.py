"""Time evolution in eigenmode coordinates.

Free propagators are exact diagonal phases.  Inhomogeneous (Duhamel) solves
integrate the phase factor exactly and the source by piecewise cubic
interpolation, so the error is fourth order in the step regardless of how
oscillatory the retained modes are.  Pairings and norms over a TimeGrid use
the grid's own quadrature weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AliasedGrid, ConfigError
from .spectral import EigenBasis, SpectralState
from .surface import fmt_float

_MOMENT_SERIES_RADIUS = 0.8


@dataclass(frozen=True)
class TimeGrid:
    """Quadrature nodes and weights on [t_start, t_end].

    Kinds: ``trapezoid`` and ``simpson`` are uniform (simpson needs an even
    step count and is the default because the duality and energy tolerances
    downstream want fourth-order pairings); ``gauss`` is composite
    Gauss-Legendre panels for cross-checks.  Weights are positive and sum to
    the span.
    """

    t_start: float
    t_end: float
    n_steps: int
    kind: str
    t: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.t.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.t)

    @property
    def span(self) -> float:
        return self.t_end - self.t_start

    @property
    def is_uniform(self) -> bool:
        return self.kind in ("trapezoid", "simpson")

    @property
    def dt(self) -> float:
        if not self.is_uniform:
            raise ConfigError("gauss grids have no uniform step")
        return self.span / self.n_steps


def time_grid(t_start: float, t_end: float, n_steps: int,
              kind: str = "simpson", panel_order: int = 4) -> TimeGrid:
    """Build a TimeGrid; see :class:`TimeGrid` for the kinds."""
    if not t_end > t_start:
        raise ConfigError("need t_end > t_start")
    if n_steps < 2:
        raise ConfigError("need n_steps >= 2")
    if kind == "trapezoid":
        t = np.linspace(t_start, t_end, n_steps + 1)
        w = np.full(n_steps + 1, (t_end - t_start) / n_steps)
        w[0] *= 0.5
        w[-1] *= 0.5
    elif kind == "simpson":
        if n_steps % 2:
            raise ConfigError("simpson grids need an even n_steps")
        t = np.linspace(t_start, t_end, n_steps + 1)
        h = (t_end - t_start) / n_steps
        w = np.full(n_steps + 1, 2 * h / 3.0)
        w[1::2] = 4 * h / 3.0
        w[0] = w[-1] = h / 3.0
    elif kind == "gauss":
        if panel_order < 1:
            raise ConfigError("panel_order must be positive")
        x, gw = np.polynomial.legendre.leggauss(panel_order)
        edges = np.linspace(t_start, t_end, n_steps + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        w = (half[:, None] * gw[None, :]).ravel()
    else:
        raise ConfigError(f"unknown time grid kind {kind!r}")
    return TimeGrid(t_start=float(t_start), t_end=float(t_end),
                    n_steps=int(n_steps), kind=kind, t=t, weights=w)


def _check_resolved(frequencies: np.ndarray, grid: TimeGrid) -> None:
    gap = grid.dt if grid.is_uniform else float(np.diff(grid.t).max())
    worst = float(np.abs(frequencies).max()) if len(frequencies) else 0.0
    if worst * gap > np.pi:
        raise AliasedGrid(
            f"fastest retained phase advances {worst * gap:.2f} rad per step "
            f"(limit pi); refine the time grid")


# ---------------------------------------------------------------------------
# free propagators

def schrodinger_propagate(state: SpectralState, t: float) -> SpectralState:
    """Free evolution u_j(t) = u_j(0) exp(-i lambda_j t)."""
    return state.basis.state(state.coeffs * np.exp(-1j * state.basis.lambdas * t))


def halfwave_frequencies(lambdas: np.ndarray) -> np.ndarray:
    """sqrt(lambda) with the numerically-zero bottom mode clipped to exactly
    0 (the sqrt would otherwise amplify a 1e-13 eigenvalue residual into a
    1e-7 phase drift)."""
    lam = np.maximum(np.asarray(lambdas, dtype=float), 0.0)
    lam[lam <= 1e-10 * max(lam.max(), 1.0)] = 0.0
    return np.sqrt(lam)


def halfwave_propagate(state: SpectralState, t: float) -> SpectralState:
    """Half-wave evolution u_j(t) = u_j(0) exp(+i t sqrt(lambda_j))."""
    freq = halfwave_frequencies(state.basis.lambdas)
    return state.basis.state(state.coeffs * np.exp(1j * freq * t))


def evolution_frequencies(basis: EigenBasis, kind: str) -> np.ndarray:
    """Per-mode phase velocities: lambda_j (schrodinger) or sqrt(lambda_j)."""
    if kind == "schrodinger":
        return basis.lambdas
    if kind == "halfwave":
        return halfwave_frequencies(basis.lambdas)
    raise ConfigError(f"unknown evolution kind {kind!r}")


def evolution_samples(state: SpectralState, grid: TimeGrid,
                      kind: str = "schrodinger") -> np.ndarray:
    """Coefficient samples of the free evolution, shape (n_nodes, n_modes).

    Raises AliasedGrid when the fastest phase advances more than pi per node
    gap, since such samples under-resolve the trajectory they claim to carry.
    """
    freq = evolution_frequencies(state.basis, kind)
    _check_resolved(freq, grid)
    sign = -1.0 if kind == "schrodinger" else 1.0
    phases = np.exp(sign * 1j * np.outer(grid.t, freq))
    return phases * state.coeffs[None, :]


# ---------------------------------------------------------------------------
# semiclassical Fourier transform

def semiclassical_fourier(samples: np.ndarray, grid: TimeGrid, h: float,
                          adjoint: bool = False,
                          tau: Optional[np.ndarray] = None):
    """Quadrature of F_h phi(tau) = integral exp(-i t tau / h) phi(t) dt.

    ``samples`` holds phi on a uniform grid.  The default tau grid has
    spacing 2 pi h / span and extends to the Nyquist bound pi h / dt, which
    makes the discrete Parseval identity exact up to truncated tails.  A
    caller-supplied tau beyond Nyquist raises AliasedGrid.  The adjoint flag
    flips the phase sign.

    Returns
    -------
    tau : ndarray
    transform : complex ndarray on tau
    """
    if h <= 0:
        raise ConfigError("need h > 0")
    if not grid.is_uniform:
        raise ConfigError("semiclassical transform needs a uniform grid")
    samples = np.asarray(samples, dtype=complex)
    if samples.shape != (grid.n_nodes,):
        raise ValueError(f"expected {grid.n_nodes} samples")
    nyquist = np.pi * h / grid.dt
    if tau is None:
        dtau = 2.0 * np.pi * h / grid.span
        n_half = int(np.floor(nyquist / dtau + 1e-12))
        tau = dtau * np.arange(-n_half, n_half + 1)
    else:
        tau = np.asarray(tau, dtype=float)
        if np.abs(tau).max() > nyquist * (1 + 1e-12):
            raise AliasedGrid(
                f"requested tau reaches {np.abs(tau).max():.3g} beyond the "
                f"Nyquist bound {nyquist:.3g} of this grid")
    sign = 1.0 if adjoint else -1.0
    weighted = grid.weights * samples
    out = np.empty(len(tau), dtype=complex)
    block = max(1, 2 ** 22 // max(grid.n_nodes, 1))
    for lo in range(0, len(tau), block):
        chunk = tau[lo:lo + block]
        out[lo:lo + block] = np.exp(
            sign * 1j * np.outer(chunk, grid.t) / h) @ weighted
    return tau, out


# ---------------------------------------------------------------------------
# Duhamel solves with exact phase integration

def _phase_moments(z: np.ndarray, m_max: int = 3) -> np.ndarray:
    """moments[m] = integral_0^1 x^m exp(z x) dx, stable for all |z|.

    Power series inside a small disk, upward recurrence outside (safe there
    because |z| >= the recurrence's amplification scale).
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty((m_max + 1,) + z.shape, dtype=complex)
    small = np.abs(z) <= _MOMENT_SERIES_RADIUS
    zs = z[small]
    for m in range(m_max + 1):
        term = np.full(zs.shape, 1.0 / (m + 1), dtype=complex)
        acc = term.copy()
        for p in range(1, 30):
            term = term * zs * (m + p) / (p * (m + p + 1))
            acc += term
        out[m][small] = acc
    zb = z[~small]
    if zb.size:
        ez = np.exp(zb)
        mom = (ez - 1.0) / zb
        out[0][~small] = mom
        for m in range(1, m_max + 1):
            mom = (ez - m * mom) / zb
            out[m][~small] = mom
    return out


def _stencil_offsets(i: int, n_steps: int):
    """Node offsets (relative to interval i) of the cubic source stencil."""
    if i == 0:
        return (0, 1, 2, 3)
    if i == n_steps - 1:
        return (-2, -1, 0, 1)
    return (-1, 0, 1, 2)


def _lagrange_coeffs(offsets) -> np.ndarray:
    """coeffs[s, m]: x^m coefficients of the cubic through nodes at offsets."""
    coeffs = np.empty((4, 4))
    for s in range(4):
        poly = np.poly1d([1.0])
        for r in range(4):
            if r == s:
                continue
            poly *= np.poly1d([1.0, -offsets[r]]) / (offsets[s] - offsets[r])
        c = np.zeros(4)
        c[:len(poly.coeffs)] = poly.coeffs[::-1]
        coeffs[s] = c
    return coeffs


def _interval_weights(z: np.ndarray, n_steps: int):
    """alpha[kind][s] (complex, per mode): weights so that
    integral_0^dt exp(i freq sigma) F(t_i + sigma) d sigma
    = dt * sum_s alpha[kind(i)][s] * F(node i + offset_s)."""
    moments = _phase_moments(z)           # (4, N)
    table = {}
    for key, offs in (("first", (0, 1, 2, 3)), ("mid", (-1, 0, 1, 2)),
                      ("last", (-2, -1, 0, 1))):
        lag = _lagrange_coeffs(offs)      # (4 stencil, 4 power)
        table[key] = np.einsum("sm,mn->sn", lag, moments)
    return table


def _interval_kind(i: int, n_steps: int) -> str:
    if n_steps >= 2 and i == 0:
        return "first"
    if n_steps >= 2 and i == n_steps - 1:
        return "last"
    return "mid"


def _source_integrals(freq: np.ndarray, source: np.ndarray,
                      grid: TimeGrid) -> np.ndarray:
    """K[i] = integral over step i of exp(i freq sigma) * source, per mode."""
    dt = grid.dt
    n_steps = grid.n_steps
    alpha = _interval_weights(1j * freq * dt, n_steps)
    out = np.zeros((n_steps, len(freq)), dtype=complex)
    for key in ("first", "mid", "last"):
        if key == "first":
            intervals = np.array([0])
        elif key == "last":
            intervals = np.array([n_steps - 1])
        else:
            intervals = np.arange(1, n_steps - 1)
        if len(intervals) == 0:
            continue
        offs = {"first": (0, 1, 2, 3), "mid": (-1, 0, 1, 2),
                "last": (-2, -1, 0, 1)}[key]
        for s in range(4):
            nodes = intervals + offs[s]
            out[intervals] += alpha[key][s][None, :] * source[nodes]
    return out * dt


def solve_inhomogeneous(basis: EigenBasis, source: np.ndarray, grid: TimeGrid,
                        boundary_state: Optional[SpectralState] = None,
                        direction: str = "backward") -> np.ndarray:
    """Duhamel solution of (i d/dt + Laplacian) u = source on [0, T].

    ``source`` holds eigenbasis coefficients of the right-hand side at the
    grid nodes, shape (n_nodes, n_modes).  Backward solves impose the
    boundary state at t_end (zero if None) and return the whole sampled
    trajectory, forward solves impose it at t_start.  The phase factor is
    integrated exactly; the source is interpolated by piecewise cubics, so
    halving the step cuts the error by about sixteen.
    """
    if direction not in ("backward", "forward"):
        raise ConfigError(f"unknown direction {direction!r}")
    if not grid.is_uniform:
        raise ConfigError("Duhamel solves need a uniform grid")
    if grid.n_steps < 3:
        raise ConfigError("cubic source stencils need n_steps >= 3")
    freq = basis.lambdas
    _check_resolved(freq, grid)
    source = np.asarray(source, dtype=complex)
    if source.shape != (grid.n_nodes, basis.n_modes):
        raise ValueError(f"source must be (n_nodes, n_modes) = "
                         f"({grid.n_nodes}, {basis.n_modes})")
    if boundary_state is None:
        bval = np.zeros(basis.n_modes, dtype=complex)
    else:
        bval = boundary_state.coeffs
    dt = grid.dt
    traj = np.empty_like(source)
    k = _source_integrals(freq, source, grid)
    if direction == "backward":
        # u_i = e^{+i lambda dt} u_{i+1} + i K_i, u at t_end given
        step = np.exp(1j * freq * dt)
        traj[-1] = bval
        for i in range(grid.n_steps - 1, -1, -1):
            traj[i] = step * traj[i + 1] + 1j * k[i]
    else:
        # u_{i+1} = e^{-i lambda dt} (u_i - i K_i), u at t_start given
        step = np.exp(-1j * freq * dt)
        traj[0] = bval
        for i in range(grid.n_steps):
            traj[i + 1] = step * (traj[i] - 1j * k[i])
    return traj


def source_to_initial_weights(basis: EigenBasis, grid: TimeGrid) -> np.ndarray:
    """Node weights W with u(0)_j = sum_t W[j, t] * source_j(t_t) for the
    backward solve with zero terminal state.

    This is the dense linear form of the Duhamel map; apply_R-style
    reductions and least-squares cross-checks share it.
    """
    if not grid.is_uniform:
        raise ConfigError("Duhamel solves need a uniform grid")
    if grid.n_steps < 3:
        raise ConfigError("cubic source stencils need n_steps >= 3")
    freq = basis.lambdas
    _check_resolved(freq, grid)
    dt = grid.dt
    n_steps = grid.n_steps
    alpha = _interval_weights(1j * freq * dt, n_steps)
    w = np.zeros((basis.n_modes, grid.n_nodes), dtype=complex)
    # u(t_start) = i sum_i e^{i lambda (t_i - t_start)} K_i  (unrolled scan)
    phase = np.exp(1j * np.outer(freq, grid.t[:-1] - grid.t_start))
    for key in ("first", "mid", "last"):
        if key == "first":
            intervals = np.array([0])
        elif key == "last":
            intervals = np.array([n_steps - 1])
        else:
            intervals = np.arange(1, n_steps - 1)
        if len(intervals) == 0:
            continue
        offs = {"first": (0, 1, 2, 3), "mid": (-1, 0, 1, 2),
                "last": (-2, -1, 0, 1)}[key]
        for s in range(4):
            nodes = intervals + offs[s]
            contrib = 1j * dt * phase[:, intervals] * alpha[key][s][:, None]
            np.add.at(w, (slice(None), nodes), contrib)
    return w


def save_trajectory(path, grid: TimeGrid, trajectory: np.ndarray) -> None:
    """CSV export: columns t, mode_index, re, im; grid echoed in a comment."""
    trajectory = np.asarray(trajectory)
    with open(path, "w") as fh:
        fh.write(f"# t_start={fmt_float(grid.t_start)} t_end={fmt_float(grid.t_end)} "
                 f"n_steps={grid.n_steps} kind={grid.kind}\n")
        fh.write("t,mode_index,re,im\n")
        for m, t in enumerate(grid.t):
            for j in range(trajectory.shape[1]):
                fh.write(f"{fmt_float(t)},{j},{fmt_float(trajectory[m, j].real)},"
                         f"{fmt_float(trajectory[m, j].imag)}\n")
