"""End-to-end acceptance checks, one test per headline claim.

Each test is a single pass/fail verdict against an independent oracle or
an internal consistency requirement:

 1. mirror limit reproduces the ideal-conductor force law pi^2/240 z^-4;
 2. the trace-formula force equals the numerical z-derivative of the
    energy for both the homogenized and the lattice engine;
 3. the zero-frequency limit of the chirality force difference vanishes
    for purely chiral slabs;
 4. opposite-chirality pairings attract more strongly than same-
    chirality ones, for homogenized slabs and for the particle lattice;
 5. the transverse-alignment spread of the lattice force dominates the
    chirality splitting at sub-period gaps and becomes negligible at
    large gaps, with the spreads ordered in gap size;
 6. effective parameters retrieved from a synthetic slab reproduce the
    inputs, and mirroring flips only the chirality parameter;
 7. the force computed from retrieved effective parameters matches the
    full lattice force at the largest default gap, while overestimating
    the chirality splitting;
 8. swapping the dilute for the full Clausius-Mossotti local-field
    correction barely changes the relative chirality splitting;
 9. enlarging the multipole or reciprocal-lattice truncation beyond the
    defaults leaves the force unchanged at moderate gaps;
10. the pairwise-additive estimate reduces to the analytic two-dipole
    Casimir-Polder force and is exactly blind to handedness;
11. the command-line interface writes byte-identical CSV output
    regardless of the worker count.

Expensive lattice sweeps are shared between tests through module-scoped
fixtures; all quadratures here use fixed orders so runtimes and results
are deterministic.
"""

import json
import math
import time

import numpy as np
import pytest

from chiralcas import cli, ema, forcengine as fe, lattice as lat, \
    scatterers as sc

FIXED = dict(tolerance=math.inf, max_refinements=0)


@pytest.fixture(scope="module")
def omega_cell():
    return lat.standard_omega_cell()


@pytest.fixture(scope="module")
def sweep_small_z(omega_cell):
    """Fig-4-style sweep: one sub-period gap and one large gap."""
    quad = fe.QuadratureSpec(n_xi=16, n_bz=6, **FIXED)
    return fe.sweep_sc_oc(omega_cell, z_grid=[0.5, 3.6],
                          x_grid=fe.default_x_grid(), l_max=3, g_max=3,
                          quadrature_spec=quad)


@pytest.fixture(scope="module")
def sweep_top_z(omega_cell):
    """Sweep at the top of the default z-grid, resolved finely enough
    that the absolute force is quadrature-converged to ~1%."""
    quad = fe.QuadratureSpec(n_xi=32, n_bz=12, **FIXED)
    return fe.sweep_sc_oc(omega_cell, z_grid=[fe.default_z_grid()[-1]],
                          x_grid=fe.default_x_grid(), l_max=3, g_max=3,
                          quadrature_spec=quad)


@pytest.fixture(scope="module")
def ema_grid_forces():
    """(F_SC, F_OC) over the default z-grid for both homogenization
    modes of the standard omega composite."""
    out = {}
    for mode in ("full", "dilute"):
        slab = ema.omega_ema_slab(sc.OmegaParams(), mode=mode)
        slab_oc = slab.mirrored()
        f_sc, f_oc = [], []
        for z in fe.default_z_grid():
            f_sc.append(ema.ema_force(slab, slab, z)[0])
            f_oc.append(ema.ema_force(slab, slab_oc, z)[0])
        out[mode] = (np.array(f_sc), np.array(f_oc))
    return out


@pytest.fixture(scope="module")
def retrieved_slab(omega_cell):
    """Effective-parameter slab fitted to the lattice's specular
    reflection over the frequency range relevant at large gaps."""
    source = lat.specular_reflection_source(omega_cell, l_max=3, g_max=3)
    xi_grid = np.geomspace(1e-3, 6.0, 16)
    params = [ema.retrieve_ema(source, xi) for xi in xi_grid]
    return ema.slab_from_table({"xi": list(xi_grid),
                                "eps": [p.eps for p in params],
                                "mu": [p.mu for p in params],
                                "kappa": [p.kappa for p in params]})


def spreads_and_diff(sweep, z):
    sel_sc = sweep.sc.rows[sweep.sc.rows[:, 0] == z, 2]
    sel_oc = sweep.oc.rows[sweep.oc.rows[:, 0] == z, 2]
    spread = max(sel_sc.max() - sel_sc.min(), sel_oc.max() - sel_oc.min())
    return spread, abs(np.mean(sel_oc) - np.mean(sel_sc))


def test_01_mirror_limit_matches_ideal_lifshitz_force():
    start = time.perf_counter()
    mirror = ema.perfect_mirror()
    for z in (1.0, 2.0, 4.0):
        force, _ = ema.ema_force(mirror, mirror, z)
        assert force == pytest.approx(math.pi ** 2 / 240.0 / z ** 4,
                                      rel=1e-3)
    assert time.perf_counter() - start < 10.0


def test_02_trace_force_consistent_with_energy_derivative(omega_cell):
    start = time.perf_counter()
    h = 5e-4
    z_grid = np.linspace(1.0, 2.0, 5)

    slab = ema.omega_ema_slab(sc.OmegaParams())
    for z in z_grid:
        scale = 1.0 / z
        force, _ = ema.ema_force(slab, slab, z, scale=scale)
        e_up, _ = ema.ema_energy(slab, slab, z + h, scale=scale)
        e_dn, _ = ema.ema_energy(slab, slab, z - h, scale=scale)
        assert (e_up - e_dn) / (2.0 * h) == pytest.approx(force, rel=1e-5)

    for z in z_grid:
        quad = fe.QuadratureSpec(n_xi=8, n_bz=6, xi_scale=1.0 / z,
                                 bz_scale=z, **FIXED)

        def at(gap):
            config = fe.LatticePairConfig(
                cell_lower=omega_cell, cell_upper=omega_cell, z=gap,
                l_max=2, g_max=2, quadrature=quad)
            return fe.energy_and_force(config)[0]

        _, force = at(z)
        e_up, _ = at(z + h)
        e_dn, _ = at(z - h)
        assert (e_up - e_dn) / (2.0 * h) == pytest.approx(force, rel=1e-5)
    assert time.perf_counter() - start < 120.0


def test_03_chirality_difference_vanishes_at_zero_frequency():
    slab = ema.ChiralSlabModel(eps=2.2, kappa=cli._OnePoleKappa(0.05, 1.0))
    config = fe.LatticePairConfig(cell_lower=slab, cell_upper=slab, z=2.0)
    trace = fe.difference_integrand(config, n_xi=15)
    peak = np.abs(trace.values).max()
    assert peak > 0.0
    assert abs(trace.zero_limit) < 1e-8 * peak


def test_04_opposite_chirality_attracts_more_strongly(ema_grid_forces,
                                                      sweep_top_z):
    f_sc, f_oc = ema_grid_forces["full"]
    assert np.all(f_oc > f_sc)
    by_x_sc = sweep_top_z.sc.rows[:, 2]
    by_x_oc = sweep_top_z.oc.rows[:, 2]
    assert len(by_x_sc) == len(fe.default_x_grid())
    assert np.all(by_x_oc > by_x_sc)


def test_05_microstructure_spread_dominates_small_gaps_only(sweep_small_z):
    spread_small, diff_small = spreads_and_diff(sweep_small_z, 0.5)
    spread_large, diff_large = spreads_and_diff(sweep_small_z, 3.6)
    assert spread_small > diff_small
    assert spread_large < 0.1 * diff_large
    assert spread_small > spread_large


def test_06_parameter_retrieval_round_trip():
    kappa = cli._OnePoleKappa(0.06, 1.0)
    slab = ema.ChiralSlabModel(eps=2.5, mu=1.05, kappa=kappa)
    source = ema.reflection_source(slab)
    mirrored = ema.reflection_source(slab.mirrored())
    for xi in (0.4, 0.9, 1.7):
        got = ema.retrieve_ema(source, xi)
        assert got.eps == pytest.approx(2.5, rel=1e-3)
        assert got.mu == pytest.approx(1.05, rel=1e-3)
        assert got.kappa == pytest.approx(kappa(xi), rel=1e-3)
        flip = ema.retrieve_ema(mirrored, xi)
        assert flip.eps == pytest.approx(got.eps, rel=1e-9)
        assert flip.mu == pytest.approx(got.mu, rel=1e-9)
        assert flip.kappa == pytest.approx(-got.kappa, rel=1e-9)


def test_07_homogenized_and_lattice_forces_agree_at_large_gap(
        sweep_top_z, retrieved_slab):
    z_top = fe.default_z_grid()[-1]
    force_lattice = float(np.mean(sweep_top_z.sc.rows[:, 2]))
    diff_lattice = float(np.mean(sweep_top_z.oc.rows[:, 2])) - force_lattice
    force_ema, _ = ema.ema_force(retrieved_slab, retrieved_slab, z_top)
    diff_ema = ema.ema_force(retrieved_slab, retrieved_slab.mirrored(),
                             z_top)[0] - force_ema
    assert force_ema == pytest.approx(force_lattice, rel=0.10)
    assert diff_ema > diff_lattice > 0.0


def test_08_local_field_correction_is_a_small_effect(ema_grid_forces):
    rel = {mode: (f_oc - f_sc) / f_sc
           for mode, (f_sc, f_oc) in ema_grid_forces.items()}
    change = np.abs(rel["full"] - rel["dilute"]) / np.abs(rel["dilute"])
    assert change.max() < 0.15


def test_09_multipole_and_reciprocal_truncation_converged(omega_cell):
    quad = fe.QuadratureSpec(n_xi=8, n_bz=6, xi_scale=0.5, bz_scale=2.0,
                             **FIXED)

    def force(l_max, g_max):
        config = fe.LatticePairConfig(
            cell_lower=omega_cell, cell_upper=omega_cell, z=2.0,
            l_max=l_max, g_max=g_max, quadrature=quad)
        return fe.casimir_force(config)[0]

    base = force(3, 3)
    assert abs(force(4, 3) - base) < 0.01 * abs(base)
    assert abs(force(3, 4) - base) < 0.01 * abs(base)


def test_10_pairwise_estimator_is_casimir_polder_and_achiral(omega_cell):
    # omega0 far above every sampled frequency makes the dipoles
    # dispersionless, so r = 0.25 is deep in the retarded regime
    # (r omega0 >> 1) where the closed-form two-dipole force holds.
    params = sc.OmegaParams(a_e=0.003, a_m=1e-30, a_c=0.0, a_s=0.0,
                            omega0=1e6, t_perp=1.0)
    lower = lat.UnitCell(particles=[lat.PlacedParticle(
        source=params, position=(0.0, 0.0, 0.95))])
    upper = lat.UnitCell(particles=[lat.PlacedParticle(
        source=params, position=(0.0, 0.0, 0.05))])
    config = fe.LatticePairConfig(cell_lower=lower, cell_upper=upper,
                                  z=0.15)
    estimate = fe.pairwise_estimator(config)
    alpha = fe.static_electric_polarizability(params)
    isolated = fe.casimir_polder_force(alpha, alpha, (0.0, 0.0, 0.25))
    assert estimate == pytest.approx(isolated, rel=0.01)

    flipped = lat.standard_omega_cell(handedness=-1)
    pair_sc = fe.LatticePairConfig(cell_lower=omega_cell,
                                   cell_upper=omega_cell, z=1.1)
    pair_oc = fe.LatticePairConfig(cell_lower=flipped,
                                   cell_upper=omega_cell, z=1.1)
    assert fe.pairwise_estimator(pair_oc) - fe.pairwise_estimator(pair_sc) \
        == 0.0


def test_11_csv_output_independent_of_worker_count(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "schema": 1,
        "lower": {"kind": "omega-lattice"},
        "upper": {"kind": "omega-lattice"},
        "z_grid": [1.4],
        "l_max": 1, "g_max": 1,
        "quadrature": {"n_xi": 6, "n_bz": 4, "tolerance": 100.0,
                       "max_refinements": 0},
    }))
    outputs = []
    for workers in (1, 2):
        out_dir = tmp_path / f"w{workers}"
        code = cli.main(["force", "--config", str(config),
                         "--out", str(out_dir),
                         "--workers", str(workers)])
        assert code == 0
        outputs.append((out_dir / "force.csv").read_bytes())
    assert outputs[0] == outputs[1]
