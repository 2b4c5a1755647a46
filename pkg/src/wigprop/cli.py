"""Command-line scenario runner and comparison harness.

A scenario is a flat key=value text file with section headers (grammar in
the README).  Runs are reproducible directories of field snapshots, slice
tables and a diagnostics CSV; `compare` quantifies the difference between
two runs.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import click
import numpy as np

from . import oracle, pseudoparticle, spectral
from .phasespace import (DEFAULT_GRID_SPEC, NumericalError, PhaseSpaceGrid,
                         WignerField, diff_metrics, load_field, make_grid,
                         norm, save_field)
from .potentials import GaussianWell, parse_potential

METHODS = ("spectral-full", "spectral-fo", "lo", "nlo", "oracle")

#: Reports and tables print floats with this many significant digits.
REPORT_DIGITS = 6


class ConfigError(Exception):
    """Bad scenario/config input; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def _fmt(v: float) -> str:
    return f"{v:.{REPORT_DIGITS}g}"


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------

_SECTION_KEYS = {
    "grid": {"x_min", "x_max", "nx", "p_min", "p_max", "np"},
    "potential": {"potential"},
    "initial": {"state", "amplitudes", "beta0_sq", "n_max"},
    "run": {"method", "t0", "t1", "nsteps", "checkpoints", "slices", "mass"},
}


@dataclass
class Scenario:
    grid: PhaseSpaceGrid
    potential: object
    method: str
    t0: float
    t1: float
    nsteps: int
    checkpoints: list[float]
    slices: list[float]
    mass: float = 1.0
    initial_kind: str = "oracle"          # 'oracle' or 'file'
    amplitudes: tuple[float, ...] = (1.0, 1.0)
    beta0_sq: float = 1.0
    n_max: int = 10
    field_path: str | None = None
    source_text: str = dc_field(default="", repr=False)


def _parse_float_list(raw: str) -> list[float]:
    items = raw.replace(",", " ").split()
    return [float(v) for v in items]


def parse_scenario_text(text: str) -> Scenario:
    """Parse scenario text; unknown sections/keys are reported with their
    line numbers."""
    entries: dict[tuple[str, str], tuple[str, int]] = {}
    section = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTION_KEYS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", lineno)
        if section is None:
            raise ConfigError("entry before any [section] header", lineno)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _SECTION_KEYS[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        if (section, key) in entries:
            raise ConfigError(f"duplicate key {key!r} in section [{section}]", lineno)
        entries[(section, key)] = (value, lineno)

    def need(section: str, key: str) -> tuple[str, int]:
        if (section, key) not in entries:
            raise ConfigError(f"missing required key {key!r} in section [{section}]")
        return entries[(section, key)]

    def get(section: str, key: str, default: str) -> tuple[str, int | None]:
        return entries.get((section, key), (default, None))

    def conv(pair, fn, what):
        raw, lineno = pair
        try:
            return fn(raw)
        except ValueError as exc:
            raise ConfigError(f"{what}: {exc}", lineno) from None

    try:
        grid = make_grid(
            conv(need("grid", "x_min"), float, "x_min"),
            conv(need("grid", "x_max"), float, "x_max"),
            conv(need("grid", "nx"), int, "nx"),
            conv(need("grid", "p_min"), float, "p_min"),
            conv(need("grid", "p_max"), float, "p_max"),
            conv(need("grid", "np"), int, "np"))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    pot_raw, pot_line = need("potential", "potential")
    try:
        potential = parse_potential(pot_raw)
    except ValueError as exc:
        raise ConfigError(str(exc), pot_line) from None

    method, method_line = need("run", "method")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {', '.join(METHODS)}", method_line)
    t0 = conv(need("run", "t0"), float, "t0")
    t1 = conv(need("run", "t1"), float, "t1")
    nsteps = conv(need("run", "nsteps"), int, "nsteps")
    checkpoints = conv(get("run", "checkpoints", f"{t1}"), _parse_float_list,
                       "checkpoints")
    slices = conv(get("run", "slices", "0 0.3 0.6"), _parse_float_list, "slices")
    mass = conv(get("run", "mass", "1.0"), float, "mass")

    state_raw, state_line = get("initial", "state", "oracle")
    parts = state_raw.split(None, 1)
    initial_kind = parts[0] if parts else ""
    field_path = None
    if initial_kind == "file":
        if len(parts) != 2:
            raise ConfigError("state = file needs a path", state_line)
        field_path = parts[1]
    elif initial_kind != "oracle":
        raise ConfigError(f"state must be 'oracle' or 'file <path>', got {state_raw!r}",
                          state_line)
    amplitudes = tuple(conv(get("initial", "amplitudes", "1 1"), _parse_float_list,
                            "amplitudes"))
    beta0_sq = conv(get("initial", "beta0_sq", "1.0"), float, "beta0_sq")
    n_max = conv(get("initial", "n_max", "10"), int, "n_max")

    sc = Scenario(grid=grid, potential=potential, method=method, t0=t0, t1=t1,
                  nsteps=nsteps, checkpoints=checkpoints, slices=slices,
                  mass=mass, initial_kind=initial_kind, amplitudes=amplitudes,
                  beta0_sq=beta0_sq, n_max=n_max, field_path=field_path,
                  source_text=text)
    _validate_scenario(sc)
    return sc


def _validate_scenario(sc: Scenario) -> None:
    if not sc.t1 > sc.t0:
        raise ConfigError("t1 must exceed t0")
    if sc.nsteps < 1:
        raise ConfigError("nsteps must be at least 1")
    dt = (sc.t1 - sc.t0) / sc.nsteps
    for tc in sc.checkpoints:
        if tc < sc.t0 - 1e-9 or tc > sc.t1 + 1e-9:
            raise ConfigError(f"checkpoint {tc} outside [{sc.t0}, {sc.t1}]")
        k = round((tc - sc.t0) / dt)
        if sc.method != "oracle" and abs(sc.t0 + k * dt - tc) > 1e-9:
            raise ConfigError(
                f"checkpoint {tc} does not land on a step boundary (dt={dt})")
    for pv in sc.slices:
        if pv < sc.grid.p_min or pv > sc.grid.p_max:
            raise ConfigError(f"slice momentum {pv} outside grid p-bounds")
    if sc.initial_kind == "oracle" and not isinstance(sc.potential, GaussianWell):
        raise ConfigError("oracle initial states require potential = gaussian_well")
    if sc.method == "oracle" and sc.initial_kind != "oracle":
        raise ConfigError("method = oracle requires an oracle initial state")


def parse_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from None
    return parse_scenario_text(text)


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def _initial_state(sc: Scenario):
    """Returns (field at t0, superposition state or None)."""
    if sc.initial_kind == "file":
        try:
            loaded = load_field(sc.field_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"initial field: {exc}") from None
        if loaded.grid != sc.grid:
            raise ConfigError("initial field grid does not match scenario grid")
        return WignerField(grid=sc.grid, values=loaded.values, time=sc.t0), None
    basis = oracle.GaussianBasis(beta0_sq=sc.beta0_sq, n_max=sc.n_max)
    solution = oracle.solve(basis, sc.potential.sigma)
    state = oracle.superposition(solution, *sc.amplitudes)
    return oracle.sample_field(state, sc.t0, sc.grid), state


def _snap_slice(grid: PhaseSpaceGrid, p_want: float) -> tuple[int, float]:
    j = int(np.argmin(np.abs(grid.p_lattice - p_want)))
    return j, float(grid.p_lattice[j])


def _write_slice(outdir: Path, field: WignerField, p_want: float, method: str) -> None:
    j, p_snap = _snap_slice(field.grid, p_want)
    path = outdir / f"slice_t{field.time:.6f}_p{p_snap:.6f}.txt"
    with open(path, "w") as fh:
        fh.write(f"# slice p={_fmt(p_snap)} t={_fmt(field.time)} method={method}\n")
        for xv, fv in zip(field.grid.x_lattice, field.values[:, j]):
            fh.write(f"{_fmt(xv)} {_fmt(fv)}\n")


def run_scenario(sc: Scenario, outdir) -> Path:
    """Execute a scenario and write snapshots, slice tables and diagnostics."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "scenario.txt").write_text(sc.source_text)

    field0, state = _initial_state(sc)
    dt = (sc.t1 - sc.t0) / sc.nsteps
    want = sorted(set(round((tc - sc.t0) / dt) for tc in sc.checkpoints))
    diag_rows: list[tuple] = []
    warnings: list[str] = []

    def emit(f: WignerField):
        save_field(f, outdir / f"field_t{f.time:.6f}.txt")
        for pv in sc.slices:
            _write_slice(outdir, f, pv, sc.method)

    if sc.method == "oracle":
        # no stepping: evaluate at the exact requested times
        for idx, tc in enumerate(sorted(set(sc.checkpoints))):
            f = oracle.sample_field(state, tc, sc.grid)
            emit(f)
            diag_rows.append((idx, f.time, norm(f), float(f.values.min()),
                              float(f.values.max())))
    else:
        current = field0
        if 0 in want:
            emit(current)
        diag_rows.append((0, current.time, norm(current),
                          float(current.values.min()), float(current.values.max())))
        if sc.method in ("spectral-full", "spectral-fo"):
            variant = "full" if sc.method == "spectral-full" else "first_order"
            cfg = spectral.SpectralStepConfig(dt=dt, mass=sc.mass, variant=variant)
            stepper = lambda f, t: spectral._step(f, sc.potential, t, cfg)
        else:
            order = 0 if sc.method == "lo" else 1
            cutoff = None
            if order == 1:
                cutoff = pseudoparticle.stable_p3_cutoff(
                    sc.grid, sc.potential, sc.t0, dt)

            def stepper(f, t, _order=order, _cut=cutoff):
                out = pseudoparticle.step_lo(f, sc.potential, t, dt, mass=sc.mass)
                if _order == 1:
                    out = pseudoparticle.nlo_correction(
                        out, sc.potential, t, dt, s_cutoff=_cut)
                return out

        norm0 = norm(current)
        for k in range(1, sc.nsteps + 1):
            current = stepper(current, sc.t0 + (k - 1) * dt)
            n = norm(current)
            diag_rows.append((k, current.time, n, float(current.values.min()),
                              float(current.values.max())))
            if abs(n) > 1e6 * max(1.0, abs(norm0)):
                raise NumericalError(f"norm blow-up at step {k}: {n:.3e}")
            if norm0 != 0.0 and abs(n - norm0) > spectral.NORM_DRIFT_WARN * abs(norm0):
                warnings.append(f"step {k}: relative norm drift "
                                f"{abs(n - norm0) / abs(norm0):.3e}")
            if k in want:
                emit(current)

    with open(outdir / "diagnostics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "time", "norm", "min", "max"])
        for row in diag_rows:
            writer.writerow([row[0]] + [_fmt(v) for v in row[1:]])
    if warnings:
        (outdir / "warnings.txt").write_text("\n".join(warnings) + "\n")
    return outdir


# ---------------------------------------------------------------------------
# comparing
# ---------------------------------------------------------------------------

def _load_run_fields(rundir: Path) -> dict[float, WignerField]:
    fields = {}
    for path in sorted(rundir.glob("field_t*.txt")):
        f = load_field(path)
        fields[round(f.time, 9)] = f
    if not fields:
        raise ConfigError(f"{rundir}: no field snapshots found")
    return fields


def _load_run_slices(rundir: Path) -> dict[tuple[float, float], np.ndarray]:
    slices = {}
    for path in sorted(rundir.glob("slice_t*_p*.txt")):
        with open(path) as fh:
            header = fh.readline().split()
            meta = dict(item.split("=", 1) for item in header[2:])
            data = np.loadtxt(fh, ndmin=2)
        slices[(round(float(meta["t"]), 6), round(float(meta["p"]), 6))] = data
    return slices


def compare_runs(dir_a, dir_b, linf_tol: float | None = None,
                 l2_tol: float | None = None) -> tuple[str, bool]:
    """Build a comparison report; returns (text, all verdicts passed)."""
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    fields_a = _load_run_fields(dir_a)
    fields_b = _load_run_fields(dir_b)
    times = sorted(set(fields_a) & set(fields_b))
    if not times:
        raise ConfigError("runs share no checkpoint times")
    slices_a = _load_run_slices(dir_a)
    slices_b = _load_run_slices(dir_b)

    lines = [f"# compare A={dir_a} B={dir_b}"]
    all_pass = True
    for t in times:
        fa, fb = fields_a[t], fields_b[t]
        if fa.grid != fb.grid:
            raise ConfigError(f"t={t}: grids do not match")
        m = diff_metrics(fa, fb)
        lines.append(f"t={_fmt(t)}: l2={_fmt(m.l2)} linf={_fmt(m.linf)} "
                     f"at (x={_fmt(m.linf_location[0])}, p={_fmt(m.linf_location[1])})")
        for (ts, ps), table_a in sorted(slices_a.items()):
            # slice headers carry 6 significant digits; match tolerantly
            if abs(ts - t) > 1e-5 * max(1.0, abs(t)) or (ts, ps) not in slices_b:
                continue
            table_b = slices_b[(ts, ps)]
            for tag, table in (("A", table_a), ("B", table_b)):
                imax = int(np.argmax(table[:, 1]))
                imin = int(np.argmin(table[:, 1]))
                lines.append(
                    f"  slice p={_fmt(ps)} {tag}: "
                    f"max {_fmt(table[imax, 1])} at x={_fmt(table[imax, 0])}, "
                    f"min {_fmt(table[imin, 1])} at x={_fmt(table[imin, 0])}")
            gap_max = abs(float(table_a[np.argmax(table_a[:, 1]), 1])
                          - float(table_b[np.argmax(table_b[:, 1]), 1]))
            gap_min = abs(float(table_a[np.argmin(table_a[:, 1]), 1])
                          - float(table_b[np.argmin(table_b[:, 1]), 1]))
            lines.append(f"  slice p={_fmt(ps)}: peak gap {_fmt(gap_max)}, "
                         f"trough gap {_fmt(gap_min)}")
        for name, value, tol in (("linf", m.linf, linf_tol), ("l2", m.l2, l2_tol)):
            if tol is not None:
                ok = value <= tol
                all_pass = all_pass and ok
                lines.append(f"  verdict t={_fmt(t)} {name}: "
                             f"{'PASS' if ok else 'FAIL'} ({_fmt(value)} vs {_fmt(tol)})")
    return "\n".join(lines) + "\n", all_pass


# ---------------------------------------------------------------------------
# click commands
# ---------------------------------------------------------------------------

def _guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(3)


def _parse_grid_option(raw: str) -> PhaseSpaceGrid:
    parts = raw.replace(",", " ").split()
    if len(parts) != 6:
        raise ConfigError("grid must be 'x_min x_max nx p_min p_max np'")
    try:
        return make_grid(float(parts[0]), float(parts[1]), int(parts[2]),
                         float(parts[3]), float(parts[4]), int(parts[5]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


_DEFAULT_GRID_RAW = " ".join(str(v) for v in DEFAULT_GRID_SPEC)


@click.group()
def main():
    """Phase-space propagation of Wigner functions."""


@main.command("run")
@click.argument("scenario_file", type=click.Path())
@click.option("-o", "--outdir", required=True, type=click.Path(),
              help="Directory to write the run into.")
def run_cmd(scenario_file, outdir):
    """Execute a scenario file."""
    def body():
        sc = parse_scenario(scenario_file)
        run_scenario(sc, outdir)
        click.echo(f"run written to {outdir}")
    _guarded(body)


@main.command("compare")
@click.argument("dir_a", type=click.Path())
@click.argument("dir_b", type=click.Path())
@click.option("--linf-tol", type=float, default=None,
              help="Verdict threshold on the max-abs difference.")
@click.option("--l2-tol", type=float, default=None,
              help="Verdict threshold on the l2 difference.")
@click.option("-o", "--report", type=click.Path(), default=None,
              help="Also write the report to this file.")
def compare_cmd(dir_a, dir_b, linf_tol, l2_tol, report):
    """Quantify the difference between two run directories."""
    def body():
        text, _ = compare_runs(dir_a, dir_b, linf_tol, l2_tol)
        click.echo(text, nl=False)
        if report:
            Path(report).write_text(text)
    _guarded(body)


@main.group("oracle")
def oracle_group():
    """Gaussian-well bound-state reference solutions."""


@oracle_group.command("solve")
@click.option("--sigma", type=float, default=3.0, show_default=True)
@click.option("--beta0sq", type=float, default=1.0, show_default=True)
@click.option("--nmax", type=int, default=10, show_default=True)
def oracle_solve_cmd(sigma, beta0sq, nmax):
    """Print the bound-state energies of the Gaussian well."""
    def body():
        try:
            basis = oracle.GaussianBasis(beta0_sq=beta0sq, n_max=nmax)
            solution = oracle.solve(basis, sigma)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        click.echo(f"# sigma={_fmt(sigma)} beta0_sq={_fmt(beta0sq)} n_max={nmax} "
                   f"min_pivot={solution.min_pivot:.3e}")
        for lam, (e, r) in enumerate(zip(solution.energies, solution.residuals)):
            click.echo(f"E_{lam} = {_fmt(e)}   (residual {r:.2e})")
    _guarded(body)


@oracle_group.command("field")
@click.option("--t", "time", type=float, default=0.0, show_default=True)
@click.option("--sigma", type=float, default=3.0, show_default=True)
@click.option("--beta0sq", type=float, default=1.0, show_default=True)
@click.option("--nmax", type=int, default=10, show_default=True)
@click.option("--amplitudes", default="1 1", show_default=True,
              help="Eigenstate amplitudes, normalized automatically.")
@click.option("--grid", "grid_raw", default=_DEFAULT_GRID_RAW, show_default=True,
              help="x_min x_max nx p_min p_max np")
@click.option("-o", "--out", required=True, type=click.Path())
def oracle_field_cmd(time, sigma, beta0sq, nmax, amplitudes, grid_raw, out):
    """Write the analytic Wigner field at time t."""
    def body():
        grid = _parse_grid_option(grid_raw)
        try:
            amps = [float(v) for v in amplitudes.replace(",", " ").split()]
            basis = oracle.GaussianBasis(beta0_sq=beta0sq, n_max=nmax)
            solution = oracle.solve(basis, sigma)
            state = oracle.superposition(solution, *amps)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        save_field(oracle.sample_field(state, time, grid), out)
        click.echo(f"field written to {out}")
    _guarded(body)


@main.command("evolve")
@click.option("--method", type=click.Choice([m for m in METHODS if m != "oracle"]),
              required=True)
@click.option("--potential", "potential_raw", required=True,
              help="e.g. 'gaussian_well depth=1.0 sigma=3.0'")
@click.option("-i", "--initial", "initial_path", required=True, type=click.Path(),
              help="Initial WignerField file; defines the grid.")
@click.option("--t0", type=float, default=0.0, show_default=True)
@click.option("--t1", type=float, required=True)
@click.option("--steps", "nsteps", type=int, required=True)
@click.option("--dt", type=float, default=None,
              help="Alternative to --steps: step size (must divide t1 - t0).")
@click.option("--checkpoints", default=None, help="Times to snapshot (default: t1).")
@click.option("--slices", default="0 0.3 0.6", show_default=True)
@click.option("--mass", type=float, default=1.0, show_default=True)
@click.option("-o", "--outdir", required=True, type=click.Path())
def evolve_cmd(method, potential_raw, initial_path, t0, t1, nsteps, dt,
               checkpoints, slices, mass, outdir):
    """Propagate a field file and write a run directory."""
    def body():
        nonlocal nsteps
        if dt is not None:
            steps = (t1 - t0) / dt
            if abs(steps - round(steps)) > 1e-9:
                raise ConfigError("dt must divide t1 - t0 evenly")
            nsteps = int(round(steps))
        try:
            loaded = load_field(initial_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"initial field: {exc}") from None
        try:
            pot = parse_potential(potential_raw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        sc = Scenario(grid=loaded.grid, potential=pot, method=method, t0=t0,
                      t1=t1, nsteps=nsteps,
                      checkpoints=_parse_float_list(checkpoints) if checkpoints
                      else [t1],
                      slices=_parse_float_list(slices), mass=mass,
                      initial_kind="file", field_path=initial_path,
                      source_text=f"# generated by 'wigprop evolve'\n")
        _validate_scenario(sc)
        run_scenario(sc, outdir)
        click.echo(f"run written to {outdir}")
    _guarded(body)


@main.command("transcribe")
@click.option("--to", "target", type=click.Choice(["ensemble", "field"]),
              required=True)
@click.option("-i", "--input", "in_path", required=True, type=click.Path())
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--dfunc-m", "dfunc_m", type=int, default=3, show_default=True,
              help="Hermite truncation order of the deposition kernel.")
@click.option("--dfunc-alpha", default="auto", show_default=True,
              help="Kernel inverse-width; 'auto' scales with the cell size.")
@click.option("--grid", "grid_raw", default=_DEFAULT_GRID_RAW, show_default=True,
              help="Target grid when depositing to a field.")
def transcribe_cmd(target, in_path, out, dfunc_m, dfunc_alpha, grid_raw):
    """Convert between lattice fields and particle ensembles."""
    def body():
        if target == "ensemble":
            try:
                f = load_field(in_path)
            except (OSError, ValueError) as exc:
                raise ConfigError(str(exc)) from None
            pseudoparticle.save_ensemble(pseudoparticle.to_ensemble(f), out)
        else:
            try:
                ens = pseudoparticle.load_ensemble(in_path)
            except (OSError, ValueError) as exc:
                raise ConfigError(str(exc)) from None
            grid = _parse_grid_option(grid_raw)
            if dfunc_alpha == "auto":
                alpha_r = pseudoparticle.auto_alpha(grid.dx)
                alpha_p = pseudoparticle.auto_alpha(grid.dp)
            else:
                try:
                    alpha_r = alpha_p = float(dfunc_alpha)
                except ValueError:
                    raise ConfigError("--dfunc-alpha must be 'auto' or a number") \
                        from None
            f = pseudoparticle.deposit(
                ens, grid,
                pseudoparticle.DFunctionParams(alpha=alpha_r, order=dfunc_m),
                pseudoparticle.DFunctionParams(alpha=alpha_p, order=dfunc_m))
            save_field(f, out)
        click.echo(f"written to {out}")
    _guarded(body)


if __name__ == "__main__":
    main()
