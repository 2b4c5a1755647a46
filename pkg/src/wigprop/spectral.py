"""Explicit spectral propagator: drift-kick split steps through the
conjugate s-lattice.

One step advances the field by dt in two exact sub-maps: free streaming
along x (each constant-p row translated by p*dt/m) and a momentum kernel
applied per x-column (multiply the p-spectrum by the unimodular phase
exp(-i [V(x - s/2) - V(x + s/2)] dt / hbar)).  The phase is conjugate-
symmetric under s -> -s because the potential difference is odd in s, so
real fields stay real; the unpaired Nyquist bin is kept at the real part
of its phase for the same reason.  The s = 0 component is untouched by
the kick, which conserves the momentum marginal at every x exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .phasespace import (HBAR, PhaseSpaceGrid, WignerField, WignerFieldND,
                         interpolate, norm, truncate_real)
from .potentials import Potential

_VARIANTS = ("full", "first_order")
_DRIFT_MODES = ("spectral_shift", "interpolation")


@dataclass(frozen=True)
class SpectralStepConfig:
    dt: float
    mass: float = 1.0
    variant: str = "full"
    drift_mode: str = "spectral_shift"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}")
        if self.drift_mode not in _DRIFT_MODES:
            raise ValueError(f"drift_mode must be one of {_DRIFT_MODES}")


def _sym_nyquist(phase: np.ndarray, axis: int) -> np.ndarray:
    # the Nyquist bin has no conjugate partner; keeping only the real part
    # of its multiplier keeps real input exactly real
    idx = [slice(None)] * phase.ndim
    idx[axis] = phase.shape[axis] // 2
    phase[tuple(idx)] = phase[tuple(idx)].real
    return phase


def _spectral_shift_rows(values: np.ndarray, grid: PhaseSpaceGrid,
                         dt: float, mass: float) -> tuple[np.ndarray, float]:
    """values(x - p*dt/m, p) via an x-FFT phase, periodic wrap."""
    kx = 2.0 * np.pi * np.fft.fftfreq(grid.nx, grid.dx)
    shift = grid.p_lattice * dt / mass
    phase = _sym_nyquist(np.exp(-1j * kx[:, None] * shift[None, :]), axis=0)
    out = np.fft.ifft(np.fft.fft(values, axis=0) * phase, axis=0)
    return truncate_real(out, context="spectral drift")


def drift(field_in: WignerField, dt: float, mass: float = 1.0,
          drift_mode: str = "spectral_shift") -> WignerField:
    """Free-streaming substitution: row at momentum p shifts by p*dt/m in x.

    spectral_shift applies the exact phase in the x-conjugate domain and
    wraps periodically; interpolation resamples with out-of-bounds = 0 and
    therefore leaks norm at the edges instead of wrapping.
    """
    grid = field_in.grid
    if drift_mode == "spectral_shift":
        values, _ = _spectral_shift_rows(field_in.values, grid, dt, mass)
    elif drift_mode == "interpolation":
        xq = grid.x_lattice[:, None] - grid.p_lattice[None, :] * (dt / mass)
        pq = np.broadcast_to(grid.p_lattice[None, :], grid.shape())
        values = interpolate(field_in, xq, pq)
    else:
        raise ValueError(f"drift_mode must be one of {_DRIFT_MODES}")
    return WignerField(grid=grid, values=values, time=field_in.time)


def _kick_phase(grid: PhaseSpaceGrid, pot: Potential, t: float,
                dt: float) -> np.ndarray:
    x = grid.x_lattice[:, None]
    s = grid.s_lattice[None, :]
    delta_v = pot.value(x - s / 2.0, t) - pot.value(x + s / 2.0, t)
    return _sym_nyquist(np.exp(-1j * delta_v * dt / HBAR), axis=1)


def _apply_kick(values: np.ndarray, multiplier: np.ndarray) -> tuple[np.ndarray, float]:
    out = np.fft.ifft(np.fft.fft(values, axis=1) * multiplier, axis=1)
    return truncate_real(out, context="momentum kick")


def kick_full(field_in: WignerField, pot: Potential, t: float,
              dt: float) -> WignerField:
    """Momentum kernel for one time increment.

    Per x-column: transform p -> s, multiply exp(-i dV(x, s) dt / hbar)
    with dV(x, s) = V(x - s/2, t) - V(x + s/2, t), transform back.  This
    is the complex form of the cosine/sine transform pair; the real part
    of the product reproduces that pair term by term.
    """
    values, _ = _apply_kick(field_in.values, _kick_phase(field_in.grid, pot, t, dt))
    return WignerField(grid=field_in.grid, values=values, time=field_in.time)


def _kick_multiplier_first_order(grid: PhaseSpaceGrid, pot: Potential, t: float,
                                 dt: float) -> np.ndarray:
    # truncating the kernel phase at first order in dt is the convolution
    # of the drifted field with the odd potential-difference transform
    x = grid.x_lattice[:, None]
    s = grid.s_lattice[None, :]
    delta_v = pot.value(x - s / 2.0, t) - pot.value(x + s / 2.0, t)
    return _sym_nyquist(1.0 - 1j * delta_v * dt / HBAR + 0j, axis=1)


def step_full(field_in: WignerField, pot: Potential, t: float,
              cfg: SpectralStepConfig) -> WignerField:
    """One full explicit step: drift, then kick; time advances by cfg.dt."""
    drifted = drift(field_in, cfg.dt, cfg.mass, cfg.drift_mode)
    values, _ = _apply_kick(drifted.values, _kick_phase(field_in.grid, pot, t, cfg.dt))
    return WignerField(grid=field_in.grid, values=values,
                       time=field_in.time + cfg.dt)


def step_first_order(field_in: WignerField, pot: Potential, t: float,
                     cfg: SpectralStepConfig) -> WignerField:
    """First-order-in-dt variant: drift plus the linearized kernel.

    Valid while dt * |V| / hbar stays well below one; the full variant has
    no such restriction.
    """
    drifted = drift(field_in, cfg.dt, cfg.mass, cfg.drift_mode)
    values, _ = _apply_kick(
        drifted.values, _kick_multiplier_first_order(field_in.grid, pot, t, cfg.dt))
    return WignerField(grid=field_in.grid, values=values,
                       time=field_in.time + cfg.dt)


def _step(field_in: WignerField, pot: Potential, t: float,
          cfg: SpectralStepConfig) -> WignerField:
    if cfg.variant == "full":
        return step_full(field_in, pot, t, cfg)
    return step_first_order(field_in, pot, t, cfg)


@dataclass(frozen=True)
class StepDiagnostics:
    step: int
    time: float
    norm: float
    min: float
    max: float


@dataclass
class EvolveResult:
    field: WignerField
    diagnostics: list[StepDiagnostics] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


#: Relative norm drift above which evolve() records a warning.
NORM_DRIFT_WARN = 1e-6


def evolve(field_in: WignerField, pot: Potential, t0: float, t1: float,
           nsteps: int, cfg: SpectralStepConfig) -> EvolveResult:
    """Repeated stepping from t0 to t1 with per-step diagnostics.

    The step size is (t1 - t0) / nsteps; cfg.dt is overridden accordingly.
    Norm drift beyond NORM_DRIFT_WARN (relative) is recorded as a warning,
    not an error, because the interpolation drift mode loses norm by design
    when the field touches the boundary.
    """
    if nsteps < 1:
        raise ValueError("nsteps must be at least 1")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    dt = (t1 - t0) / nsteps
    cfg = replace(cfg, dt=dt)
    result = EvolveResult(field=field_in)
    norm0 = norm(field_in)
    current = field_in
    for k in range(nsteps):
        t = t0 + k * dt
        current = _step(current, pot, t, cfg)
        n = norm(current)
        result.diagnostics.append(StepDiagnostics(
            step=k + 1, time=current.time, norm=n,
            min=float(current.values.min()), max=float(current.values.max())))
        if norm0 != 0.0 and abs(n - norm0) > NORM_DRIFT_WARN * abs(norm0):
            result.warnings.append(
                f"step {k + 1}: relative norm drift {abs(n - norm0) / abs(norm0):.3e}")
    result.field = current
    return result


# ---------------------------------------------------------------------------
# separable multi-dimensional stepping
# ---------------------------------------------------------------------------

def step_separable(field_in: WignerFieldND, pot, t: float,
                   cfg: SpectralStepConfig) -> WignerFieldND:
    """Axis-by-axis drift and kick for 2-d/3-d lattices.

    The potential difference along each axis j uses shifts s_j e_j only,
    dropping the cross terms that couple different axes; the per-axis
    kernels commute, so sequential application realizes their product.
    Exact when V is an additive sum of one-dimensional terms.  ``pot``
    must expose value_nd(coords, t).
    """
    grid = field_in.grid
    d = grid.ndim
    if d not in (2, 3):
        raise ValueError("separable stepping supports 2 or 3 dimensions only")
    values = field_in.values.astype(complex)
    total = 2 * d

    def axis_shape(axis: int, n: int):
        shape = [1] * total
        shape[axis] = n
        return shape

    # drift each x-axis by its conjugate momentum
    for j, g in enumerate(grid.axes):
        kx = 2.0 * np.pi * np.fft.fftfreq(g.nx, g.dx).reshape(axis_shape(j, g.nx))
        pj = g.p_lattice.reshape(axis_shape(d + j, g.np))
        phase = _sym_nyquist(np.exp(-1j * kx * pj * (cfg.dt / cfg.mass)), axis=j)
        values = np.fft.ifft(np.fft.fft(values, axis=j) * phase, axis=j)

    # kick per axis with the on-axis potential difference
    coords = [g.x_lattice.reshape(axis_shape(j, g.nx))
              for j, g in enumerate(grid.axes)]
    for j, g in enumerate(grid.axes):
        s = g.s_lattice.reshape(axis_shape(d + j, g.np))
        minus = list(coords)
        plus = list(coords)
        minus[j] = coords[j] - s / 2.0
        plus[j] = coords[j] + s / 2.0
        delta_v = pot.value_nd(minus, t) - pot.value_nd(plus, t)
        phase = _sym_nyquist(np.exp(-1j * delta_v * cfg.dt / HBAR) + 0j, axis=d + j)
        values = np.fft.ifft(np.fft.fft(values, axis=d + j) * phase, axis=d + j)

    values, _ = truncate_real(values, context="separable step")
    return WignerFieldND(grid=grid, values=values, time=field_in.time + cfg.dt)
