import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collchain import kernels
from collchain.chain import ChainSpec, spectrum_for
from collchain.collision import (
    CollisionTensor,
    UnitKernel,
    Variant,
    assemble_tensor,
    band_class,
    check_detailed_balance,
    check_sum_rule,
    effusion_pdf,
    flat_profile,
    identity_tensor,
    kraus_decomposition,
    load_tensor,
    save_tensor,
    unit_kernel,
)
from collchain.errors import BandOverlap, NotCompletelyPositive, QuadratureNotConverged, WrongVariant
from collchain.quadrature import QuadratureConfig
from conftest import tensor_for
from oracles import entry_by_incoming_momentum

KERN = UnitKernel(0.1, 0.1, 0.5)


def test_effusion_values():
    assert effusion_pdf(1.0, KERN) == pytest.approx(np.exp(-0.5), rel=1e-14)
    p = np.linspace(0.01, 4, 4001)
    assert p[np.argmax(effusion_pdf(p, KERN))] == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValueError):
        effusion_pdf(-1.0, KERN)
    with pytest.raises(ValueError):
        UnitKernel(0.1, 0.0, 0.5)


def test_unit_kernel_values():
    assert unit_kernel(1.2, 0.8, KERN) == pytest.approx(np.exp(-0.5) * np.exp(-0.32), rel=1e-14)
    assert unit_kernel(1.2, 0.8, KERN) == pytest.approx(0.44043, abs=1e-5)
    assert unit_kernel(1.7, 1.7, KERN) == pytest.approx(effusion_pdf(1.7, KERN))
    d = 0.5 * np.sqrt(2)
    assert unit_kernel(1.0 + d / 2, 1.0 - d / 2, KERN) == pytest.approx(effusion_pdf(1.0, KERN) * np.exp(-1))


@pytest.mark.parametrize("variant", list(Variant))
def test_no_coupling_gives_identity(variant):
    spec = ChainSpec(g=0.0)
    sp = spectrum_for(spec)
    T = assemble_tensor(spec, sp, variant)
    assert np.abs(T.entries - identity_tensor(8).entries).max() < 1e-12
    assert check_detailed_balance(T, sp, spec.beta) == 0
    if variant is Variant.LOCAL:
        assert check_sum_rule(T, sp, spec.beta) < 1e-15


@pytest.mark.parametrize("fixture", ["exact", "narrow", "local"])
def test_structure_at_default_parameters(fixture, request):
    spec, sp, T = request.getfixturevalue(fixture)
    assert T.tp_defect() <= 1e-6
    assert T.choi_min_eigenvalue() >= -1e-8
    assert T.hermiticity_defect() == 0
    assert np.all(np.isfinite(T.entries))
    assert T.quadrature["max_element_error"] <= 1e-7


def test_band_resolved_defect_is_reported(band):
    spec, sp, T = band
    # amplitudes at shifted momenta break trace preservation at order epsilon
    assert 1e-6 < T.tp_defect() < 1e-3
    assert T.trace_projected().tp_defect() < 1e-14
    assert T.hermiticity_defect() == 0


def test_detailed_balance_exact(exact):
    spec, sp, T = exact
    assert check_detailed_balance(T, sp, spec.beta) <= 1e-4
    e = sp.energies
    for jp in sp.band_index[1]:
        ratio = T.entries[jp, jp, 0, 0].real / T.entries[0, 0, jp, jp].real
        assert ratio == pytest.approx(np.exp(-spec.beta * (e[jp] - e[0])), rel=1e-8)
    # the middle one-excitation level sits exactly at h
    mid = sp.band_index[1][1]
    assert T.entries[mid, mid, 0, 0].real / T.entries[0, 0, mid, mid].real == pytest.approx(0.67032, abs=1e-5)


def test_detailed_balance_negative_control(default_chain):
    spec, sp = default_chain
    T = assemble_tensor(spec, sp, "Exact", profile=flat_profile(25.0))
    assert check_detailed_balance(T, sp, spec.beta) > 0.1


def test_narrow_zero_pattern(narrow):
    spec, sp, T = narrow
    g = sp.gaps()
    mismatch = np.abs(g[:, None, :, None] - g[None, :, None, :])
    assert np.all(T.entries[mismatch > 1e-8 * spec.h] == 0)


def test_closed_momentum_range_entries_vanish(exact):
    spec, sp, T = exact
    # j = 0 -> j' = 7 needs three flips: allowed only through multiple scattering
    assert abs(T.entries[7, 7, 0, 0]) < 1e-6


@pytest.mark.slow
def test_independent_reintegration(exact):
    spec, sp, T = exact
    rng = np.random.default_rng(11)
    d = sp.dim
    count = 0
    while count < 10:
        jp, kp, j, k = (int(x) for x in rng.integers(0, d, 4))
        if (jp, j) == (kp, k):
            continue
        count += 1
        ref = entry_by_incoming_momentum(spec, sp, jp, kp, j, k)
        partner = entry_by_incoming_momentum(spec, sp, kp, jp, k, j)
        assert abs(ref - np.conj(partner)) < 1e-7
        assert abs(T.entries[jp, kp, j, k] - ref) < 1e-7


def test_backends_agree(default_chain):
    spec, sp = default_chain
    if "compiled" not in kernels.available_backends():
        pytest.skip("compiled extension not built")
    quad = QuadratureConfig(check_convergence=False)
    a = assemble_tensor(spec, sp, "Exact", quad, backend="python").entries
    b = assemble_tensor(spec, sp, "Exact", quad, backend="compiled").entries
    assert np.abs(a - b).max() < 1e-13


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_thread_count_is_bit_identical(default_chain, backend):
    spec, sp = default_chain
    quad = QuadratureConfig(check_convergence=False)
    one = assemble_tensor(spec, sp, "Exact", quad, n_threads=1, backend=backend)
    four = assemble_tensor(spec, sp, "Exact", quad, n_threads=4, backend=backend)
    assert one.checksum() == four.checksum()


def test_band_overlap_rejected():
    spec = ChainSpec(epsilon=1.0)
    sp = spectrum_for(spec)
    for v in ("Narrow", "BandResolved", "Local"):
        with pytest.raises(BandOverlap):
            assemble_tensor(spec, sp, v)


def test_quadrature_not_converged(default_chain):
    spec, sp = default_chain
    with pytest.raises(QuadratureNotConverged) as info:
        assemble_tensor(spec, sp, "Exact", QuadratureConfig(panels=1, nodes=2, tol_quad=1e-12))
    assert info.value.max_change > 1e-12


@pytest.mark.parametrize("eps, g", [(0.5, 8.0), (0.25, 6.0), (0.1, 10.0)])
def test_narrow_resonances_converge(eps, g):
    # weak coupling gives Fano resonances far narrower than the default panels
    spec = ChainSpec(n_qubits=2, epsilon=eps, g=g)
    sp = spectrum_for(spec)
    T = assemble_tensor(spec, sp, "Exact", QuadratureConfig(tol_quad=1e-6))
    assert T.quadrature["max_element_error"] <= 1e-6
    assert T.tp_defect() < 1e-6


def test_band_class():
    d = np.array([0.0, 0.3, 4.1, -3.9, 8.0, 2.0])
    assert band_class(d, 4.0).tolist() == [0, 0, 1, 2, -1, -1]


def test_kraus_identity():
    K = kraus_decomposition(identity_tensor(4))
    assert len(K.operators) == 1
    assert np.allclose(K.operators[0], np.eye(4))


@pytest.mark.parametrize("fixture", ["exact", "narrow", "local"])
def test_kraus_reconstruction(fixture, request):
    spec, sp, T = request.getfixturevalue(fixture)
    K = kraus_decomposition(T)
    assert len(K.operators) <= sp.dim**2
    assert np.abs(K.tensor() - T.entries).max() <= 1e-8
    assert K.normalization_defect() <= 1e-6


def test_narrow_kraus_are_ladders(narrow):
    spec, sp, T = narrow
    g = sp.gaps()
    for M in kraus_decomposition(T).operators:
        support = np.abs(M) > 1e-12 * np.abs(M).max()
        omegas = g[support]
        assert np.ptp(omegas) <= 1e-8 * spec.h


def test_not_completely_positive():
    # the transpose map is positive but not completely positive
    d = 2
    S = np.zeros((d, d, d, d), dtype=complex)
    for a in range(d):
        for c in range(d):
            S[a, c, c, a] = 1
    with pytest.raises(NotCompletelyPositive):
        kraus_decomposition(CollisionTensor(S, Variant.EXACT))


def test_sum_rule(local, default_chain):
    spec, sp, T = local
    assert check_sum_rule(T, sp, spec.beta) <= 1e-6
    flat = assemble_tensor(spec, sp, "Local", profile=flat_profile(25.0))
    assert check_sum_rule(flat, sp, spec.beta) >= 1e-2
    with pytest.raises(WrongVariant):
        check_sum_rule(tensor_for("Exact")[2], sp, spec.beta)


def test_serialization_round_trip(tmp_path, exact):
    spec, sp, T = exact
    path = tmp_path / "t.txt"
    save_tensor(T, path)
    back = load_tensor(path)
    assert back.variant is T.variant
    assert np.array_equal(back.entries, T.entries)
    assert back.params == T.params
    assert back.quadrature["node_count"] == T.quadrature["node_count"]
    text = path.read_text()
    assert text.startswith("# format_version: 1")


def test_exact_approaches_narrow_as_packets_narrow():
    diffs = []
    for s in (0.5, 0.1, 0.02):
        _, _, E = tensor_for("Exact", sigma_p=s)
        _, _, N = tensor_for("Narrow", sigma_p=s)
        diffs.append(np.abs(E.entries - N.entries).max())
    assert diffs[0] > diffs[1] > diffs[2]


def test_exact_approaches_local_linearly():
    diffs = []
    for eps in (0.1, 0.01, 0.001):
        spec, sp, E = tensor_for("Exact", epsilon=eps)
        _, _, L = tensor_for("Local", epsilon=eps)
        cls = band_class(sp.gaps(), spec.h)
        allowed = (cls[:, None, :, None] == cls[None, :, None, :]) & (cls[:, None, :, None] >= 0)
        diffs.append(np.abs(E.entries - L.entries)[allowed].max())
    assert diffs[0] / diffs[1] == pytest.approx(10, rel=0.1)
    assert diffs[1] / diffs[2] == pytest.approx(10, rel=0.1)


@settings(max_examples=6, deadline=None)
@given(eps=st.floats(0.0, 0.5), g=st.floats(5, 80))
def test_exact_tensor_properties(eps, g):
    spec = ChainSpec(n_qubits=2, epsilon=eps, g=g)
    sp = spectrum_for(spec)
    T = assemble_tensor(spec, sp, "Exact", QuadratureConfig(tol_quad=1e-6))
    assert T.tp_defect() < 1e-6
    assert T.hermiticity_defect() == 0
    assert check_detailed_balance(T, sp, spec.beta) < 1e-4
