import numpy as np
import pytest

import floquetprobe as fp
from floquetprobe.errors import (BranchCut, DimensionMismatch, NotConverged,
                                 NotSteady)
from floquetprobe.model import TWO_PI, build_model, with_coupling_off
from floquetprobe.spectrum import (C_LIGHT, absorption_coefficient,
                                   count_local_maxima, dressed_markers,
                                   susceptibility, sweep,
                                   truncation_convergence, uniform_grid,
                                   write_markers, write_spectrum)
from floquetprobe.stack import HarmonicStack
from floquetprobe.weakprobe import (build_floquet_hamiltonian, dressed_states,
                                    solve_coherences_direct)

from conftest import two_level_tree


def test_susceptibility_zero_probe(table1):
    import dataclasses
    rp = np.zeros_like(table1.drive.rabi_p)
    model = dataclasses.replace(
        table1, drive=dataclasses.replace(table1.drive, rabi_p=rp))
    vec = solve_coherences_direct(model, model.drive.omega_p0, 0)
    assert not vec.values.any()
    assert susceptibility(model, vec) == 0.0


def test_susceptibility_zero_coupling_lorentzian():
    g = 1.0e-6
    tree = two_level_tree(delta_p=0.4, gamma=3.6, rabi=10.0)
    tree["drive"]["dipole_scale"] = [{"i": 1, "j": 0, "value": g}]
    model, _ = build_model(tree)
    deltas = TWO_PI * np.linspace(-4, 4, 161)
    chis = []
    for dwp in deltas:
        vec = solve_coherences_direct(model, model.drive.omega_p0 + dwp, 0)
        chi = susceptibility(model, vec)
        om, gam = TWO_PI * 10.0, TWO_PI * 3.6
        expected = -g * (om / 2) / ((TWO_PI * 0.4 + dwp) + 0.5j * gam)
        assert chi == pytest.approx(expected, rel=1e-12)
        chis.append(chi)
    im = np.array([c.imag for c in chis])
    # absorption peak sits at zero detuning of the line: dwp = -0.4 * 2 pi
    peak = deltas[np.argmax(im)] / TWO_PI
    assert peak == pytest.approx(-0.4, abs=0.05)


def test_susceptibility_from_steady_stack_and_not_steady(table1):
    comps = np.zeros((3, 5, 5), complex)
    comps[1, 1, 0] = 0.3 + 0.1j
    comps[1, 2, 0] = -0.2j
    stack = HarmonicStack(components=comps, n_min=-1, n_max=1,
                          omega_c=table1.drive.omega_c)
    with pytest.raises(NotSteady):
        susceptibility(table1, stack)
    chi = susceptibility(table1, stack.marked_steady())
    g = table1.drive.dipole_scale
    expected = g[(1, 0)] * comps[1, 1, 0] + g[(2, 0)] * comps[1, 2, 0]
    assert chi == pytest.approx(expected)


def test_absorption_zero_chi():
    assert absorption_coefficient(0.0 + 0.0j, TWO_PI * 1e5) == 0.0


@pytest.mark.parametrize("chi", [1e-4 + 5e-4j, -2e-4 + 8e-4j, 1e-6 + 1e-5j])
def test_absorption_small_chi_first_order(chi):
    omega_p = TWO_PI * 1e5
    k = absorption_coefficient(chi, omega_p)
    approx = (omega_p / C_LIGHT) * chi.imag
    assert abs(k - approx) / abs(k) < abs(chi)


def test_absorption_frozen_high_precision_value():
    # 40-digit arithmetic oracle: chi = 0.02i at omega_p = 2 pi 1e5 rad/ns
    k = absorption_coefficient(0.02j, TWO_PI * 1e5)
    assert k == pytest.approx(41914.80496069813, rel=1e-12)


def test_absorption_branch_cut():
    with pytest.raises(BranchCut):
        absorption_coefficient(-1.5 + 0.0j, TWO_PI * 1e5)


def test_absorption_gain_gives_negative_k():
    assert absorption_coefficient(-1e-4j, TWO_PI * 1e5) < 0.0


def test_markers_zero_coupling(table1):
    model = with_coupling_off(table1)
    ds = dressed_states(build_floquet_hamiltonian(model, -5, 5))
    markers = dressed_markers(ds, model, 0)
    assert len(markers) == 2
    by_pos = sorted(markers, key=lambda m: m.delta_omega_p)
    assert by_pos[1].delta_omega_p == pytest.approx(-TWO_PI * 0.4, abs=1e-12)
    assert by_pos[0].delta_omega_p == pytest.approx(-TWO_PI * 1.0, abs=1e-12)
    assert by_pos[1].half_width == pytest.approx(0.5 * table1.gamma(1), abs=1e-10)
    assert by_pos[0].half_width == pytest.approx(0.5 * table1.gamma(2), abs=1e-10)
    assert by_pos[1].state_index == 1 and by_pos[0].state_index == 2
    assert by_pos[1].n_harmonic == 0


def test_markers_zero_widths_without_decay(table1):
    import dataclasses
    states = tuple(dataclasses.replace(s, gamma_total=0.0)
                   for s in table1.states)
    model = dataclasses.replace(table1, states=states, channels=())
    ds = dressed_states(build_floquet_hamiltonian(model, -3, 3))
    markers = dressed_markers(ds, model, 0)
    assert markers
    assert all(m.half_width < 1e-12 for m in markers)


def test_markers_top_k_and_window(table1):
    ds = dressed_states(build_floquet_hamiltonian(table1, -10, 10))
    markers = dressed_markers(ds, table1, 0, top_k=15)
    assert len(markers) == 15
    assert all(markers[k].weight >= markers[k + 1].weight
               for k in range(len(markers) - 1))
    window = (-TWO_PI * 1.0, TWO_PI * 1.0)
    inside = dressed_markers(ds, table1, 0, window, top_k=50)
    for m in inside:
        assert (window[0] - 2 * m.half_width <= m.delta_omega_p
                <= window[1] + 2 * m.half_width)


def test_sweep_single_point_equals_standalone(table1):
    dwp = TWO_PI * 0.3
    result = sweep(table1, np.array([dwp]))
    assert len(result.grid) == 1
    vec = solve_coherences_direct(table1, table1.drive.omega_p0 + dwp, 0)
    chi = susceptibility(table1, vec)
    assert result.grid[0].chi == pytest.approx(chi, rel=1e-8)
    assert result.grid[0].k_abs == pytest.approx(
        absorption_coefficient(chi, table1.drive.omega_p0 + dwp), rel=1e-8)


def test_sweep_purity_under_permutation(table1):
    grid = TWO_PI * np.linspace(-1.0, 1.0, 7)
    rng = np.random.default_rng(3)
    perm = rng.permutation(len(grid))
    base = sweep(table1, grid, n_min=-10, n_max=10)
    shuf = sweep(table1, grid[perm], n_min=-10, n_max=10)
    for k, p in enumerate(perm):
        assert shuf.grid[k].chi == base.grid[p].chi


def test_sweep_direct_matches_spectral(table1):
    grid = TWO_PI * np.linspace(-2.0, 2.0, 9)
    a = sweep(table1, grid, method="spectral", n_min=-15, n_max=15)
    b = sweep(table1, grid, method="direct", n_min=-15, n_max=15)
    for ga, gb in zip(a.grid, b.grid):
        assert ga.chi == pytest.approx(gb.chi, rel=1e-8)


def test_sweep_threads_deterministic(table1):
    grid = TWO_PI * np.linspace(-2.0, 2.0, 21)
    one = sweep(table1, grid, n_min=-10, n_max=10, threads=1)
    many = sweep(table1, grid, n_min=-10, n_max=10, threads=4)
    assert [g.chi for g in one.grid] == [g.chi for g in many.grid]


def test_sweep_records_failed_points():
    # undamped probe-coupled state: its resonance is an exact pole
    tree = two_level_tree(delta_p=0.5, gamma=0.0, rabi=1.0, omega_p0=0.0)
    tree["channels"] = []
    model, _ = build_model(tree)
    grid = np.array([-TWO_PI * 0.5, 0.0])  # first point hits the pole
    result = sweep(model, grid, method="direct", n_min=0, n_max=0)
    assert result.grid[0].error is not None
    assert "SingularSystem" in result.grid[0].error
    assert result.grid[1].error is None
    assert np.isnan(result.grid[0].k_abs)


def test_chi_invariant_under_probe_scaling(table1):
    grid = TWO_PI * np.linspace(-1.5, 1.5, 11)
    base = sweep(table1, grid, n_min=-12, n_max=12)
    half = sweep(fp.scale_probe(table1, 2.0), grid, n_min=-12, n_max=12)
    for ga, gb in zip(base.grid, half.grid):
        assert gb.chi == pytest.approx(ga.chi, rel=1e-12)


def test_marker_consistency_coupling_off(table1):
    model = with_coupling_off(table1)
    grid = uniform_grid(-5.0, 5.0, 801)
    result = sweep(model, grid)
    im = np.array([g.chi.imag for g in result.grid])
    markers = result.markers
    for k in range(1, len(im) - 1):
        if im[k] > im[k - 1] and im[k] > im[k + 1]:
            pos = result.grid[k].delta_omega_p
            assert any(abs(pos - m.delta_omega_p) <= m.half_width
                       for m in markers if m.weight > 0)


def test_truncation_convergence_zero_coupling(table1):
    model = with_coupling_off(table1)
    report = truncation_convergence(model, model.drive.omega_p0,
                                    [(-1, 1), (-2, 2), (-3, 3)])
    assert report.converged
    assert report.recommended == (-1, 1)
    assert report.rel_changes[0] < 1e-15


def test_truncation_convergence_table1(table1):
    report = truncation_convergence(table1, table1.drive.omega_p0,
                                    [(-20, 20), (-30, 30), (-40, 40)])
    assert report.converged
    assert report.rel_changes[-1] < 1e-8


def test_truncation_weak_coupling_converges_at_narrower_window(table1):
    from floquetprobe.recipes import scale_coupling
    schedule = [(-k, k) for k in range(2, 39, 2)]

    def first_converged(model):
        report = truncation_convergence(model, model.drive.omega_p0, schedule)
        return report.recommended

    weak = first_converged(scale_coupling(table1, 0.1))
    strong = first_converged(table1)
    assert weak[1] < strong[1]


def test_truncation_not_converged_raises(table1):
    with pytest.raises(NotConverged):
        truncation_convergence(table1, table1.drive.omega_p0,
                               [(-1, 1), (-2, 2)])


def test_truncation_schedule_must_widen(table1):
    with pytest.raises(DimensionMismatch):
        truncation_convergence(table1, table1.drive.omega_p0,
                               [(-2, 2), (-2, 2)])


def test_count_local_maxima():
    assert count_local_maxima(np.array([0, 1, 0])) == 1
    assert count_local_maxima(np.array([0, 1, 1, 0])) == 1
    assert count_local_maxima(np.array([0, 1, 0, 2, 0])) == 2
    assert count_local_maxima(np.array([0, 1, 2, 3])) == 0
    assert count_local_maxima(np.array([3, 2, 1])) == 0


def test_spectrum_csv_export(table1, tmp_path):
    grid = TWO_PI * np.linspace(-0.5, 0.5, 5)
    result = sweep(table1, grid, n_min=-8, n_max=8)
    spath = tmp_path / "spectrum.csv"
    mpath = tmp_path / "markers.csv"
    write_spectrum(result, spath)
    write_markers(result, mpath)
    lines = spath.read_text().splitlines()
    assert lines[0] == "delta_omega_p_GHz,re_chi,im_chi,K"
    assert len(lines) == 6
    assert mpath.read_text().splitlines()[0] == \
        "q,delta_omega_p_GHz,half_width_GHz,weight"
    # deterministic bodies on re-run
    spath2 = tmp_path / "spectrum2.csv"
    write_spectrum(sweep(table1, grid, n_min=-8, n_max=8), spath2)
    assert spath.read_bytes() == spath2.read_bytes()


def test_sweep_contributions_sum_to_chi(table1):
    grid = TWO_PI * np.array([-0.7, 0.4])
    result = sweep(table1, grid, n_min=-10, n_max=10, with_contributions=True)
    for g in result.grid:
        assert g.contributions is not None
        assert g.contributions.sum() == pytest.approx(g.chi, rel=1e-10)


def test_spectrum_json_export(table1, tmp_path):
    import json
    grid = TWO_PI * np.linspace(-0.5, 0.5, 3)
    result = sweep(table1, grid, n_min=-8, n_max=8)
    path = tmp_path / "spectrum.json"
    write_spectrum(result, path, fmt="json")
    rows = json.loads(path.read_text())
    assert len(rows) == 3
    assert set(rows[0]) == {"delta_omega_p_GHz", "re_chi", "im_chi", "K"}
