"""End-to-end scenario runs: spectrum, tensor, generator, trajectory, reports.

Every run directory gets ``trajectory.csv``, ``steady.csv``,
``classify.txt``, ``tensor.txt`` and ``manifest.txt``. The manifest lists
each file with its sha256 digest, the invariant residuals of the tensor and
wall-clock timings.
"""
from __future__ import annotations

import csv
import hashlib
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import classify
from .chain import Spectrum, gibbs_state, spectrum_for
from .collision import Variant, assemble_tensor, check_detailed_balance, check_sum_rule, save_tensor
from .config import ScenarioConfig, TimeGrid, default_config
from .dynamics import evolve, observables, poisson_generator, steady_state, trace_distance, trajectory_csv
from .errors import DegenerateSteadyState, UnknownFigure, ValidationError

MANIFEST_FORMAT_VERSION = 1
STEADY_FORMAT_VERSION = 1


@dataclass
class RunManifest:
    directory: str
    config: dict = field(default_factory=dict)
    checksums: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    status: str = "running"
    children: list = field(default_factory=list)

    def add_file(self, name: str) -> None:
        path = os.path.join(self.directory, name)
        with open(path, "rb") as fh:
            self.checksums[name] = hashlib.sha256(fh.read()).hexdigest()
        if name not in self.files:
            self.files.append(name)

    def to_text(self) -> str:
        lines = [f"format_version: {MANIFEST_FORMAT_VERSION}", f"package_version: {__version__}", f"status: {self.status}"]
        lines += [f"config.{k}: {v}" for k, v in self.config.items()]
        lines += [f"residual.{k}: {v:.17g}" for k, v in self.residuals.items()]
        lines += [f"timing.{k}: {v:.6f}" for k, v in self.timings.items()]
        lines += [f"file: {f} sha256={self.checksums.get(f, '')}" for f in self.files]
        lines += [f"note: {n}" for n in self.notes]
        lines += [f"child: {c}" for c in self.children]
        return "\n".join(lines) + "\n"

    def write(self) -> str:
        path = os.path.join(self.directory, "manifest.txt")
        with open(path, "w") as fh:
            fh.write(self.to_text())
        return path


def read_manifest(path) -> dict:
    out: dict = {"files": {}, "residual": {}, "note": [], "child": []}
    with open(path) as fh:
        for line in fh:
            key, _, val = line.rstrip("\n").partition(": ")
            if key == "file":
                name, _, digest = val.partition(" sha256=")
                out["files"][name] = digest
            elif key.startswith("residual."):
                out["residual"][key[9:]] = float(val)
            elif key in ("note", "child"):
                out[key].append(val)
            else:
                out[key] = val
    return out


def initial_state(spec_text: str, spectrum: Spectrum, beta: float) -> np.ndarray:
    """Initial density matrix in the eigenbasis.

    ``ground``, ``gibbs``, a local bit string such as ``000`` (qubit 1
    first) or the path of a ``.npy``/text file holding an eigenbasis matrix.
    """
    d = spectrum.dim
    n = int(round(np.log2(d)))
    if spec_text == "ground":
        rho = np.zeros((d, d), dtype=complex)
        rho[0, 0] = 1
        return rho
    if spec_text == "gibbs":
        return gibbs_state(spectrum, beta).data
    if len(spec_text) == n and set(spec_text) <= {"0", "1"}:
        psi = np.zeros(d, dtype=complex)
        psi[int(spec_text, 2)] = 1
        psi = spectrum.eigenvectors.conj().T @ psi
        return np.outer(psi, psi.conj())
    if os.path.exists(spec_text):
        rho = np.load(spec_text) if spec_text.endswith(".npy") else np.loadtxt(spec_text, dtype=complex)
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (d, d):
            raise ValidationError(f"initial state has shape {rho.shape}, expected {(d, d)}")
        return rho
    raise ValidationError(f"unrecognized initial state {spec_text!r}")


def steady_csv(rho: np.ndarray, spectrum: Spectrum, meta=None) -> str:
    fmt = lambda x: format(float(x), ".17g")
    buf = io.StringIO()
    buf.write(f"# format_version: {STEADY_FORMAT_VERSION}\n")
    for key, val in (meta or {}).items():
        buf.write(f"# {key}: {val}\n")
    buf.write("j,k,energy_j,n_j,re,im\n")
    d = spectrum.dim
    for j in range(d):
        for k in range(d):
            z = rho[j, k]
            buf.write(f"{j},{k},{fmt(spectrum.energies[j])},{spectrum.excitations[j]},{fmt(z.real)},{fmt(z.imag)}\n")
    return buf.getvalue()


def tensor_residuals(tensor, spectrum, beta) -> dict:
    res = {
        "tp_defect": tensor.tp_defect(),
        "choi_min_eigenvalue": tensor.choi_min_eigenvalue(),
        "hermiticity_defect": tensor.hermiticity_defect(),
        "detailed_balance": check_detailed_balance(tensor, spectrum, beta),
    }
    if tensor.variant is Variant.LOCAL:
        res["sum_rule"] = check_sum_rule(tensor, spectrum, beta)
    return res


def _write(directory, name, text):
    with open(os.path.join(directory, name), "w") as fh:
        fh.write(text)


def run_single(config: ScenarioConfig, directory: str, threads: int = 1) -> RunManifest:
    os.makedirs(directory, exist_ok=True)
    man = RunManifest(directory, config.echo())
    spec = config.chain
    try:
        t0 = time.perf_counter()
        spectrum = spectrum_for(spec)
        man.timings["spectrum"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        tensor = assemble_tensor(spec, spectrum, config.variant, config.quadrature, n_threads=threads)
        man.timings["tensor"] = time.perf_counter() - t0
        save_tensor(tensor, os.path.join(directory, "tensor.txt"))
        man.add_file("tensor.txt")
        man.config["tensor.sha256"] = tensor.checksum()
        man.residuals.update(tensor_residuals(tensor, spectrum, spec.beta))
        if spec.g == 0:
            man.notes.append("g = 0: the collision tensor is the identity map")

        t0 = time.perf_counter()
        H = np.diag(spectrum.energies)
        L = poisson_generator(H, tensor, spec.gamma)
        rho0 = initial_state(config.initial_state, spectrum, spec.beta)
        traj = evolve(L, rho0, config.time_grid.times(), config.method)
        man.timings["evolve"] = time.perf_counter() - t0
        man.residuals["trajectory_trace_defect"] = traj.trace_defect()
        meta = {"variant": config.variant.value, "epsilon": repr(spec.epsilon), "gamma": repr(spec.gamma)}
        _write(directory, "trajectory.csv", trajectory_csv(traj, spectrum, config.outputs.coherences, meta=meta))
        man.add_file("trajectory.csv")

        t0 = time.perf_counter()
        meta_ss = dict(meta)
        try:
            rho_ss = steady_state(L).data if spec.gamma > 0 else None
        except DegenerateSteadyState:
            rho_ss = None
        if rho_ss is None:
            # no unique stationary state: record the last propagated state instead
            rho_ss = traj.states[-1]
            meta_ss["source"] = "final trajectory state (stationary state not unique)"
            man.notes.append("stationary state not unique; steady.csv holds the final state")
        obs = observables(rho_ss, spectrum)
        meta_ss["rho123_over_rho00"] = format(obs["rho123_over_rho00"], ".17g")
        meta_ss["beta_eff"] = format(obs["beta_eff"], ".17g")
        man.residuals["steady_gibbs_distance"] = trace_distance(rho_ss, gibbs_state(spectrum, spec.beta).data)
        _write(directory, "steady.csv", steady_csv(rho_ss, spectrum, meta_ss))
        man.add_file("steady.csv")
        man.timings["steady"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        report = classify(tensor, spectrum, spec.beta)
        _write(directory, "classify.txt", report.to_text())
        man.add_file("classify.txt")
        man.timings["classify"] = time.perf_counter() - t0

        if config.outputs.emit_plots:
            from .plotting import line_plot

            pops = traj.populations()
            series = {f"rho_{j}{j}": pops[:, j] for j in range(spectrum.dim)}
            line_plot(os.path.join(directory, "trajectory.svg"), traj.times, series, "t", "population")
            man.add_file("trajectory.svg")
        man.status = "ok"
    except Exception as exc:
        man.status = "failed"
        man.notes.append(f"{type(exc).__name__}: {exc}")
        man.write()
        raise
    man.write()
    return man


def _point_name(parameter, value):
    return f"{parameter}={value!r}"


def run_scenario(config: ScenarioConfig, directory: str | None = None, threads: int = 1) -> RunManifest:
    """Run one scenario, or every point of its sweep in parallel."""
    directory = directory or config.outputs.directory
    if config.sweep is None:
        return run_single(config, directory, threads)

    os.makedirs(directory, exist_ok=True)
    sweep = config.sweep
    points = [(v, config.with_parameter(sweep.parameter, v)) for v in sweep.values]
    man = RunManifest(directory, config.echo())
    t0 = time.perf_counter()

    def one(item):
        value, cfg = item
        return run_single(cfg, os.path.join(directory, _point_name(sweep.parameter, value)), threads=1)

    try:
        with ThreadPoolExecutor(max(1, threads)) as pool:
            children = list(pool.map(one, points))
        man.children = [os.path.relpath(c.directory, directory) for c in children]
        _write(directory, "sweep.csv", _combined_ratio(points, children))
        man.add_file("sweep.csv")
    except Exception as exc:
        man.status = "failed"
        man.notes.append(f"{type(exc).__name__}: {exc}")
        man.write()
        raise
    man.timings["sweep"] = time.perf_counter() - t0
    man.status = "ok"
    man.write()
    return man


def read_csv(path) -> dict:
    """Columns of a CSV written by this package, skipping the '#' preamble."""
    with open(path) as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}


def _combined_ratio(points, children) -> str:
    """Wide table of rho123/rho00 against time, one column per sweep value."""
    columns = {}
    for (value, _), child in zip(points, children):
        data = read_csv(os.path.join(child.directory, "trajectory.csv"))
        columns.setdefault("t", data["t"])
        columns[f"ratio@{value!r}"] = data["rho123_over_rho00"]
    return _table(columns)


def reference_ratios(spec) -> tuple:
    """Band-one over ground population for the local and the global Gibbs states (epsilon -> 0)."""
    local = float(np.exp(-spec.beta * spec.h))
    global_ = float(spec.n_qubits * np.exp(-spec.beta * spec.h))
    return local, global_


FIGURES = ("fig2", "fig3", "fig4")


def _trajectories(spec, variants, times, quad, threads, start="ground"):
    spectrum = spectrum_for(spec)
    H = np.diag(spectrum.energies)
    out = {}
    for v in variants:
        T = assemble_tensor(spec, spectrum, v, quad, n_threads=threads)
        L = poisson_generator(H, T, spec.gamma)
        out[v] = evolve(L, initial_state(start, spectrum, spec.beta), times)
    return spectrum, out


def _table(columns: dict) -> str:
    fmt = lambda x: format(float(x), ".17g")
    names = list(columns)
    n = len(columns[names[0]])
    rows = [",".join(names)]
    for i in range(n):
        rows.append(",".join(fmt(columns[c][i]) for c in names))
    return "# format_version: 1\n" + "\n".join(rows) + "\n"


def reproduce_figure(fig: str, base: ScenarioConfig | None = None, directory: str = "figures", threads: int = 1, plots: bool | None = None) -> RunManifest:
    """Regenerate the data behind one figure panel set as CSV (and SVG when asked)."""
    if fig not in FIGURES:
        raise UnknownFigure(f"unknown figure {fig!r}; choose from {', '.join(FIGURES)}")
    base = base or default_config()
    plots = base.outputs.emit_plots if plots is None else plots
    directory = os.path.join(directory, fig)
    os.makedirs(directory, exist_ok=True)
    man = RunManifest(directory, base.echo())
    t0 = time.perf_counter()
    quad = base.quadrature
    written = []

    def emit(name, columns, ylabel, logy=False):
        _write(directory, name + ".csv", _table(columns))
        written.append(name + ".csv")
        if plots:
            from .plotting import line_plot

            series = {k: v for k, v in columns.items() if k != "t"}
            line_plot(os.path.join(directory, name + ".svg"), columns["t"], series, "t", ylabel, logy=logy)
            written.append(name + ".svg")

    if fig == "fig2":
        times = TimeGrid("log", 0.1, 1e7, 161).times()
        for eps in (0.1, 5e-5):
            spec = base.chain.replace(epsilon=eps)
            spectrum, tr = _trajectories(spec, ["Exact"], times, quad, threads)
            pops = tr["Exact"].populations()
            cols = {"t": times}
            cols.update({f"rho_{j}{j}": pops[:, j] for j in range(spectrum.dim)})
            emit(f"populations_eps={eps!r}", cols, "population")
        cols = {"t": times}
        for eps in (1e-1, 1e-2, 1e-3, 1e-4, 5e-5):
            spec = base.chain.replace(epsilon=eps)
            spectrum, tr = _trajectories(spec, ["Exact"], times, quad, threads)
            cols[f"ratio_eps={eps!r}"] = np.array([observables(s, spectrum)["rho123_over_rho00"] for s in tr["Exact"].states])
        local, global_ = reference_ratios(base.chain)
        cols["reference_local"] = np.full(len(times), local)
        cols["reference_global"] = np.full(len(times), global_)
        emit("ratio", cols, "rho123/rho00", logy=True)
        man.notes.append(f"reference lines: local {local:.5f}, global {global_:.5f}")
    elif fig == "fig3":
        times = TimeGrid("log", 0.01, 1e4, 121).times()
        for eps in (0.1, 3e-3):
            spec = base.chain.replace(epsilon=eps)
            spectrum, tr = _trajectories(spec, ["Exact", "Local", "Narrow"], times, quad, threads)
            cols = {"t": times}
            for v, traj in tr.items():
                cols[f"beta_eff_{v}"] = np.array([observables(s, spectrum)["beta_eff"] for s in traj.states])
            cols["beta_reservoir"] = np.full(len(times), spec.beta)
            emit(f"beta_eff_eps={eps!r}", cols, "beta_eff")
            cols = {"t": times}
            for v, traj in tr.items():
                cols[f"abs_rho23_{v}"] = np.abs(traj.states[:, 2, 3])
            emit(f"rho23_eps={eps!r}", cols, "|rho_23|")
    else:
        times = TimeGrid("log", 0.1, 1e6, 141).times()
        spec = base.chain.replace(epsilon=0.1)
        spectrum, tr = _trajectories(spec, ["Exact", "Local"], times, quad, threads)
        cols = {"t": times}
        for v, traj in tr.items():
            pops = traj.populations()
            cols.update({f"rho_{j}{j}_{v}": pops[:, j] for j in range(spectrum.dim)})
        emit("populations", cols, "population")

    for name in written:
        man.add_file(name)
    man.timings[fig] = time.perf_counter() - t0
    man.status = "ok"
    man.write()
    return man
