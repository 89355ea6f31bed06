import os

import numpy as np
import pytest

from collchain.chain import spectrum_for
from collchain.collision import load_tensor
from collchain.config import parse_text
from collchain.errors import UnknownFigure, ValidationError
from collchain.pipeline import (
    initial_state,
    read_csv,
    read_manifest,
    reference_ratios,
    reproduce_figure,
    run_scenario,
    tensor_residuals,
)

SHORT = """
[time]
t_min = 0.1
t_max = 1000
points = 9
"""


def _cfg(extra=""):
    return parse_text(SHORT + extra)


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    man = run_scenario(_cfg(), str(out))
    return out, man


def test_default_run_writes_every_file(default_run):
    out, man = default_run
    for name in ("tensor.txt", "trajectory.csv", "steady.csv", "classify.txt", "manifest.txt"):
        assert (out / name).exists()
    data = read_manifest(out / "manifest.txt")
    assert data["status"] == "ok"
    assert data["format_version"] == "1"
    assert data["residual"]["detailed_balance"] <= 1e-4
    assert set(data["files"]) == {"tensor.txt", "trajectory.csv", "steady.csv", "classify.txt"}


def test_manifest_checksums_match_files(default_run):
    import hashlib

    out, man = default_run
    for name, digest in read_manifest(out / "manifest.txt")["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest


def test_manifest_residuals_match_persisted_tensor(default_run):
    out, man = default_run
    recorded = read_manifest(out / "manifest.txt")["residual"]
    T = load_tensor(out / "tensor.txt")
    cfg = _cfg()
    fresh = tensor_residuals(T, spectrum_for(cfg.chain), cfg.chain.beta)
    for key, val in fresh.items():
        assert abs(recorded[key] - val) <= 1e-12


def test_run_with_zero_coupling_keeps_populations(tmp_path):
    man = run_scenario(_cfg("[chain]\ng = 0\n"), str(tmp_path))
    data = read_csv(tmp_path / "trajectory.csv")
    assert np.all(data["rho_00"] == 1.0)
    assert all(np.all(data[f"rho_{j}{j}"] == 0.0) for j in range(1, 8))
    notes = read_manifest(tmp_path / "manifest.txt")["note"]
    assert any("identity" in n for n in notes)
    assert man.status == "ok"


def test_outputs_are_byte_identical(tmp_path):
    cfg = _cfg("[sweep]\nparameter = epsilon\nvalues = 0.1, 0.01\n")
    run_scenario(cfg, str(tmp_path / "a"), threads=1)
    run_scenario(cfg, str(tmp_path / "b"), threads=2)
    names = ["sweep.csv"]
    for sub in ("epsilon=0.1", "epsilon=0.01"):
        names += [os.path.join(sub, n) for n in ("trajectory.csv", "steady.csv", "tensor.txt", "classify.txt")]
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_sweep_layout(tmp_path):
    cfg = _cfg("[sweep]\nparameter = gamma\nvalues = 1, 0.5, 0.25\n")
    man = run_scenario(cfg, str(tmp_path))
    assert man.children == ["gamma=1.0", "gamma=0.5", "gamma=0.25"]
    data = read_csv(tmp_path / "sweep.csv")
    assert list(data) == ["t", "ratio@1.0", "ratio@0.5", "ratio@0.25"]
    assert len(data["t"]) == 9
    for child in man.children:
        assert (tmp_path / child / "manifest.txt").exists()


def test_failed_run_leaves_failed_manifest(tmp_path):
    cfg = _cfg("[run]\ninitial_state = 0x1\n")
    with pytest.raises(ValidationError):
        run_scenario(cfg, str(tmp_path))
    data = read_manifest(tmp_path / "manifest.txt")
    assert data["status"] == "failed"
    assert any("ValidationError" in n for n in data["note"])


def test_initial_states(tmp_path):
    cfg = _cfg()
    sp = spectrum_for(cfg.chain)
    ground = initial_state("ground", sp, 0.1)
    assert ground[0, 0] == 1 and np.trace(ground) == 1
    # the local ground state is also the eigenbasis ground state
    assert np.allclose(initial_state("000", sp, 0.1), ground)
    flipped = initial_state("100", sp, 0.1)
    assert abs(np.trace(flipped) - 1) < 1e-14
    assert np.allclose(np.diag(flipped)[sp.band_index[1]].sum(), 1)
    np.save(tmp_path / "rho.npy", ground)
    assert np.array_equal(initial_state(str(tmp_path / "rho.npy"), sp, 0.1), ground)
    np.save(tmp_path / "bad.npy", np.eye(2))
    with pytest.raises(ValidationError):
        initial_state(str(tmp_path / "bad.npy"), sp, 0.1)


def test_reference_ratios(default_chain):
    spec, sp = default_chain
    local, global_ = reference_ratios(spec)
    assert abs(local - 0.6703) < 1e-4
    assert abs(global_ - 2.0110) < 1e-4


def test_unknown_figure(tmp_path):
    with pytest.raises(UnknownFigure):
        reproduce_figure("fig9", directory=str(tmp_path))


@pytest.mark.slow
def test_reproduce_fig4(tmp_path):
    man = reproduce_figure("fig4", directory=str(tmp_path))
    data = read_csv(tmp_path / "fig4" / "populations.csv")
    band = [1, 2, 3]
    local = [data[f"rho_{j}{j}_Local"][-1] for j in band]
    exact = [data[f"rho_{j}{j}_Exact"][-1] for j in band]
    assert max(local) - min(local) < 1e-6
    # thermal splitting: lower energy, more population
    assert exact[0] > exact[1] > exact[2]
    assert man.status == "ok"


@pytest.mark.slow
def test_reproduce_fig3_beta_eff(tmp_path):
    reproduce_figure("fig3", directory=str(tmp_path))
    data = read_csv(tmp_path / "fig3" / "beta_eff_eps=0.1.csv")
    assert abs(data["beta_eff_Exact"][-1] - 0.1) < 0.002
    assert np.all(data["beta_reservoir"] == 0.1)
    rho23 = read_csv(tmp_path / "fig3" / "rho23_eps=0.1.csv")
    assert rho23["abs_rho23_Narrow"].max() < 1e-12
    assert rho23["abs_rho23_Exact"].max() > 1e-3
