"""Classical-trajectory (pseudoparticle) propagation of Wigner fields,
its hbar^2-corrected refinement, and the Hermite-Gaussian deposition
kernel that moves data between the fixed-lattice and particle pictures.

The lowest-order step transports each lattice value along a backward
classical trajectory and is exact (up to time discretization and
interpolation) for potentials whose third and higher spatial derivatives
vanish.  The next order adds the leading quantum correction
 -(dt * hbar^2 / 24) V'''(x) d^3 f / dp^3, with the derivative taken from
the uncorrected transported field, which keeps the correction loop from
feeding back on itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.special import eval_hermite, factorial

from .phasespace import (HBAR, PhaseSpaceGrid, WignerField, norm,
                         truncate_real)
from .potentials import Potential
from .spectral import NORM_DRIFT_WARN, EvolveResult, StepDiagnostics

_INTERP_ORDER = {"bicubic": 3, "bilinear": 1}


def step_lo(field_in: WignerField, pot: Potential, t: float, dt: float,
            mass: float = 1.0, method: str = "bicubic") -> WignerField:
    """Lowest-order step on the fixed lattice.

    Each node (x, p) takes the interpolated old value at the backtracked
    point (x - p dt/m, p + V'(x0) dt) with x0 = x - p dt/m.  The force is
    evaluated at the backtracked position, not at the output node: that
    makes the one-step map exactly area-preserving (backward symplectic
    Euler), while the output-node force inflates phase-space volumes by
    O(dt^2) per step and visibly shrinks structures over long runs.
    """
    if method not in _INTERP_ORDER:
        raise ValueError(f"unknown interpolation method {method!r}")
    grid = field_in.grid
    x = grid.x_lattice[:, None]
    p = grid.p_lattice[None, :]
    x0 = x - p * (dt / mass)
    p0 = p + pot.grad(x0, t) * dt
    values = map_coordinates(field_in.values,
                             [(x0 - grid.x_min) / grid.dx,
                              (p0 - grid.p_min) / grid.dp],
                             order=_INTERP_ORDER[method], mode="constant", cval=0.0)
    return WignerField(grid=grid, values=values, time=field_in.time + dt)


def d_p3(field_in: WignerField, mode: str = "spectral",
         s_cutoff: float | None = None) -> WignerField:
    """Third momentum derivative of the field.

    spectral: multiply the p-spectrum by (i s / hbar)^3; optionally zero
    all modes with |s| > s_cutoff (band limiting).  The unpaired Nyquist
    mode is always dropped, as for any odd-order spectral derivative.
    finite_difference: 5-point centered stencil, exact for cubics; the
    two-node bands at the p-boundaries are left at zero.
    """
    grid = field_in.grid
    if mode == "spectral":
        s = grid.s_lattice
        mult = (1j * s / HBAR) ** 3
        mult[grid.np // 2] = 0.0
        if s_cutoff is not None:
            mult = mult * (np.abs(s) <= s_cutoff)
        out = np.fft.ifft(np.fft.fft(field_in.values, axis=1) * mult[None, :], axis=1)
        values, _ = truncate_real(out, context="spectral third derivative")
    elif mode == "finite_difference":
        f = field_in.values
        values = np.zeros_like(f)
        h3 = grid.dp**3
        values[:, 2:-2] = (-f[:, :-4] + 2.0 * f[:, 1:-3]
                           - 2.0 * f[:, 3:-1] + f[:, 4:]) / (2.0 * h3)
    else:
        raise ValueError("mode must be 'spectral' or 'finite_difference'")
    return WignerField(grid=grid, values=values, time=field_in.time)


def nlo_correction(field_lo: WignerField, pot: Potential, t: float, dt: float,
                   order: int = 1, mode: str = "spectral",
                   s_cutoff: float | None = None) -> WignerField:
    """Add the leading quantum correction to a transported field.

    Only order = 1 is implemented: the term needs the third derivatives of
    the potential and of the field; going further would require fifth-order
    lattice derivatives that amplify noise faster than they add accuracy.
    """
    if order != 1:
        raise ValueError("only the order-1 correction is implemented")
    grid = field_lo.grid
    third = d_p3(field_lo, mode=mode, s_cutoff=s_cutoff).values
    v3 = pot.d3(grid.x_lattice, t)[:, None]
    values = field_lo.values - (dt * HBAR**2 / 24.0) * v3 * third
    return WignerField(grid=grid, values=values, time=field_lo.time)


def stable_p3_cutoff(grid: PhaseSpaceGrid, pot: Potential, t: float, dt: float,
                     safety: float = 0.25) -> float:
    """Largest s-band for which the correction loop cannot self-amplify.

    One corrected step multiplies the p-spectrum at wavenumber s by
    1 + i dt V''' s^3 / 24 (per x); the band where |dt V''' s^3 / 24|
    exceeds one grows without bound under iteration.  The returned cutoff
    caps that factor at ``safety``.
    """
    v3max = float(np.abs(pot.d3(grid.x_lattice, t)).max())
    s_max = float(np.abs(grid.s_lattice).max())
    if v3max == 0.0:
        return s_max
    return min(s_max, (24.0 * safety / (dt * v3max)) ** (1.0 / 3.0))


def evolve(field_in: WignerField, pot: Potential, t0: float, t1: float,
           nsteps: int, order: int = 0, mass: float = 1.0,
           method: str = "bicubic", s_cutoff: float | str | None = "auto"
           ) -> EvolveResult:
    """Repeated pseudoparticle stepping with per-step diagnostics.

    order = 0 runs the plain transported step; order = 1 corrects each
    transported field before it seeds the next step.  s_cutoff 'auto'
    band-limits the third derivative at the stability bound; None applies
    no band limit (safe only on coarse momentum lattices).
    """
    if nsteps < 1:
        raise ValueError("nsteps must be at least 1")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    dt = (t1 - t0) / nsteps
    cutoff = None
    if order == 1 and s_cutoff == "auto":
        cutoff = stable_p3_cutoff(field_in.grid, pot, t0, dt)
    elif isinstance(s_cutoff, (int, float)):
        cutoff = float(s_cutoff)
    result = EvolveResult(field=field_in)
    norm0 = norm(field_in)
    current = field_in
    for k in range(nsteps):
        t = t0 + k * dt
        current = step_lo(current, pot, t, dt, mass=mass, method=method)
        if order == 1:
            current = nlo_correction(current, pot, t, dt, s_cutoff=cutoff)
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
# Hermite-Gaussian approximate delta (deposition kernel)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DFunctionParams:
    """Width and truncation order of the Hermite-Gaussian delta approximant."""

    alpha: float
    order: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.order < 0:
            raise ValueError("order must be >= 0")


def _d_norm_const(order: int) -> float:
    total = sum((-1.0) ** m * factorial(2 * m) / (2.0 ** (2 * m) * factorial(m) ** 2)
                for m in range(order + 1))
    return 1.0 / (np.sqrt(2.0) * total)


def d_function(x, params: DFunctionParams) -> np.ndarray:
    """Truncated Hermite-Gaussian representation of a delta function.

    Even in x; the closed-form prefactor normalizes the integral to one
    for every (alpha, order).  order = 0 reduces to a pure Gaussian of
    unit integral.
    """
    u = params.alpha * np.asarray(x, dtype=float)
    series = np.zeros_like(u)
    for m in range(params.order + 1):
        series += eval_hermite(2 * m, u) * (-1.0) ** m / (2.0 ** (2 * m) * factorial(m))
    return (_d_norm_const(params.order) * params.alpha / np.sqrt(np.pi)
            * np.exp(-u**2 / 2.0) * series)


def auto_alpha(delta: float) -> float:
    """Default kernel inverse-width for cell size delta (core over ~2 cells)."""
    return 2.0 / delta


# ---------------------------------------------------------------------------
# Lagrangian picture: particle ensembles and transcription
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ensemble:
    """Pseudoparticles: position, momentum, carried Wigner value (may be
    negative) and the cell widths each particle represents."""

    r: np.ndarray
    p: np.ndarray
    f_l: np.ndarray
    dr: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        arrays = {}
        n = None
        for name in ("r", "p", "f_l", "dr", "dp"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise ValueError("all particle arrays must share one length")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} must be finite")
            arr.setflags(write=False)
            arrays[name] = arr
        if (arrays["dr"] <= 0).any() or (arrays["dp"] <= 0).any():
            raise ValueError("cell widths must be positive")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.r)

    def weighted_volume(self) -> float:
        """sum f_L dr dp; equals the norm of the originating field."""
        return float((self.f_l * self.dr * self.dp).sum())


def to_ensemble(field_in: WignerField) -> Ensemble:
    """One particle per lattice cell, carrying that node's value."""
    grid = field_in.grid
    r, p = np.meshgrid(grid.x_lattice, grid.p_lattice, indexing="ij")
    n = grid.nx * grid.np
    return Ensemble(r=r.ravel(), p=p.ravel(), f_l=field_in.values.ravel(),
                    dr=np.full(n, grid.dx), dp=np.full(n, grid.dp))


def _kernel_reach(params: DFunctionParams) -> float:
    # envelope exp(-(alpha u)^2 / 2) times a degree-2M polynomial is far
    # below double precision once |alpha u| > 9 + 2M
    return (9.0 + 2.0 * params.order) / params.alpha


def deposit(ensemble: Ensemble, grid: PhaseSpaceGrid,
            params_r: DFunctionParams, params_p: DFunctionParams,
            time: float = 0.0, chunk: int = 4096) -> WignerField:
    """Scatter particles onto a lattice through the separable kernel
    D(x - r_i) D(p - p_i) weighted by f_L dr dp.

    Particles are processed in a fixed order with a sequential accumulate,
    so the result is deterministic.  Kernel tails are truncated where they
    fall below double precision.
    """
    values = np.zeros(grid.shape())
    if len(ensemble) == 0:
        return WignerField(grid=grid, values=values, time=time)

    half_i = int(np.ceil(_kernel_reach(params_r) / grid.dx))
    half_j = int(np.ceil(_kernel_reach(params_p) / grid.dp))
    off_i = np.arange(-half_i, half_i + 1)
    off_j = np.arange(-half_j, half_j + 1)

    for start in range(0, len(ensemble), chunk):
        sl = slice(start, start + chunk)
        r, p = ensemble.r[sl], ensemble.p[sl]
        w = ensemble.f_l[sl] * ensemble.dr[sl] * ensemble.dp[sl]
        ci = np.rint((r - grid.x_min) / grid.dx).astype(int)
        cj = np.rint((p - grid.p_min) / grid.dp).astype(int)
        ii = ci[:, None] + off_i[None, :]                     # (n, wi)
        jj = cj[:, None] + off_j[None, :]                     # (n, wj)
        # kernel values are densities; the particle weight already carries
        # the dr * dp cell volume
        wi = d_function(grid.x_min + ii * grid.dx - r[:, None], params_r)
        wj = d_function(grid.p_min + jj * grid.dp - p[:, None], params_p)
        contrib = w[:, None, None] * wi[:, :, None] * wj[:, None, :]
        ii_b = np.broadcast_to(ii[:, :, None], contrib.shape)
        jj_b = np.broadcast_to(jj[:, None, :], contrib.shape)
        keep = ((ii_b >= 0) & (ii_b < grid.nx) & (jj_b >= 0) & (jj_b < grid.np))
        np.add.at(values, (ii_b[keep], jj_b[keep]), contrib[keep])
    return WignerField(grid=grid, values=values, time=time)


# ---------------------------------------------------------------------------
# ensemble serialization: '# ensemble N' header, rows 'r p f_L dr dp'
# ---------------------------------------------------------------------------

def save_ensemble(ensemble: Ensemble, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# ensemble {len(ensemble)}\n")
        for k in range(len(ensemble)):
            fh.write(f"{ensemble.r[k]:.17g} {ensemble.p[k]:.17g} "
                     f"{ensemble.f_l[k]:.17g} {ensemble.dr[k]:.17g} "
                     f"{ensemble.dp[k]:.17g}\n")


def load_ensemble(path) -> Ensemble:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "#" or header[1] != "ensemble":
            raise ValueError(f"{path}: not an ensemble file")
        count = int(header[2])
        data = np.loadtxt(fh, ndmin=2) if count else np.empty((0, 5))
    if data.shape != (count, 5):
        raise ValueError(f"{path}: expected {count} rows of 5 columns, got {data.shape}")
    return Ensemble(r=data[:, 0], p=data[:, 1], f_l=data[:, 2],
                    dr=data[:, 3], dp=data[:, 4])
