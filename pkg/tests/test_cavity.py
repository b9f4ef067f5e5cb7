from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitycarve.cavity import (
    AtomSite,
    CavityParams,
    cooperativity,
    reflection_coefficient,
    reflection_dense_solve,
    reflectivity_spectrum,
)


def critical_params(*gs: float, kappa: float = 400.0) -> CavityParams:
    return CavityParams(
        kappa_wg=kappa / 2,
        kappa_sc=kappa / 2,
        atoms=tuple(AtomSite(g=g) for g in gs),
    )


def test_empty_register_critical_null():
    r = reflection_coefficient(critical_params(), 0.0)
    assert abs(r) < 1e-15


def test_no_scattering_is_a_perfect_mirror():
    params = CavityParams(kappa_wg=300.0, kappa_sc=0.0, atoms=())
    assert reflection_coefficient(params, 0.0) == pytest.approx(1.0, abs=1e-12)
    # lossless: unit magnitude at every detuning
    for pt in reflectivity_spectrum(params, [-80.0, -3.0, 0.0, 12.0, 250.0]):
        assert pt.R == pytest.approx(1.0, abs=1e-12)


def test_single_atom_critical_closed_form_frozen_values():
    # C = 4 g^2/(kappa gamma) = 20 -> r = -20/21
    params = critical_params(math.sqrt(20.0 * 400.0 / 4.0))
    assert cooperativity(params, 0) == pytest.approx(20.0, abs=1e-12)
    r = reflection_coefficient(params, 0.0)
    assert r.real == pytest.approx(-0.9523809523809523, abs=1e-12)
    assert abs(r.imag) < 1e-12
    assert abs(r) ** 2 == pytest.approx(0.9070294784580499, abs=1e-12)


@pytest.mark.parametrize("n_atoms", [1, 2, 3, 4])
def test_critical_resonant_r_is_minus_ctot_over_one_plus_ctot(n_atoms):
    gs = [14.0 + 2.5 * i for i in range(n_atoms)]
    params = critical_params(*gs)
    c_tot = sum(cooperativity(params, i) for i in range(n_atoms))
    r = reflection_coefficient(params, 0.0)
    assert abs(r - (-c_tot / (1.0 + c_tot))) < 1e-10


@pytest.mark.parametrize("n_atoms", [0, 1, 2, 3, 4])
@pytest.mark.parametrize("delta", [-120.0, -7.5, 0.0, 0.3, 42.0])
def test_closed_form_matches_dense_solve(n_atoms, delta):
    atoms = tuple(
        AtomSite(g=11.0 + 4.0 * i, phase_arg=0.2 * i) for i in range(n_atoms)
    )
    params = CavityParams(kappa_wg=170.0, kappa_sc=230.0, atoms=atoms)
    a = reflection_coefficient(params, delta)
    b = reflection_dense_solve(params, delta)
    assert abs(a - b) < 1e-10


@given(
    g=st.floats(0.0, 60.0),
    delta=st.floats(-500.0, 500.0),
    kwg=st.floats(1.0, 500.0),
    ksc=st.floats(0.0, 500.0),
)
@settings(max_examples=200, deadline=None)
def test_passivity_and_conjugate_symmetry(g, delta, kwg, ksc):
    params = CavityParams(kappa_wg=kwg, kappa_sc=ksc, atoms=(AtomSite(g=g),))
    r = reflection_coefficient(params, delta)
    assert abs(r) <= 1.0 + 1e-12
    r_mirror = reflection_coefficient(params, -delta)
    assert abs(r_mirror - r.conjugate()) < 1e-12


def test_contrast_saturates_with_coupling():
    # fixed cavity, growing g: resonant reflectivity is non-decreasing and
    # hits R = (C/(1+C))**2 = 0.64 at C = 4
    values = []
    for g in range(1, 41):
        params = CavityParams(
            kappa_wg=200.0, kappa_sc=200.0, atoms=(AtomSite(g=float(g)),)
        )
        values.append(abs(reflection_coefficient(params, 0.0)) ** 2)
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    assert values[19] == pytest.approx(0.64, abs=1e-9)


def test_uncoupled_atoms_do_not_contribute():
    params = critical_params(20.0, 35.0)
    alone = params.with_coupled([0])
    only_first = CavityParams(
        kappa_wg=params.kappa_wg, kappa_sc=params.kappa_sc, atoms=(AtomSite(g=20.0),)
    )
    assert reflection_coefficient(alone, 3.7) == pytest.approx(
        reflection_coefficient(only_first, 3.7)
    )
    none = params.with_coupled([])
    assert abs(reflection_coefficient(none, 0.0)) < 1e-15


def test_with_coupled_rejects_bad_indices():
    params = critical_params(20.0)
    with pytest.raises(IndexError):
        params.with_coupled([1])
    with pytest.raises(IndexError):
        cooperativity(params, 5)


def test_phase_arg_weights_the_coupling():
    tilted = AtomSite(g=10.0, phase_arg=math.pi / 3)
    assert tilted.g_eff == pytest.approx(5.0, abs=1e-12)
    dark = CavityParams(
        kappa_wg=200.0,
        kappa_sc=200.0,
        atoms=(AtomSite(g=25.0, phase_arg=math.pi / 2),),
    )
    # cos(pi/2) kills the coupling entirely up to float rounding
    assert abs(reflection_coefficient(dark, 0.0)) < 1e-12


def test_parameter_validation():
    with pytest.raises(ValueError):
        CavityParams(kappa_wg=-1.0, kappa_sc=10.0)
    with pytest.raises(ValueError):
        CavityParams(kappa_wg=0.0, kappa_sc=0.0)
    with pytest.raises(ValueError):
        CavityParams(kappa_wg=1.0, kappa_sc=1.0, gamma=0.0)
    with pytest.raises(ValueError):
        AtomSite(g=-2.0)


def test_closed_waveguide_warns_and_reflects_everything():
    with pytest.warns(UserWarning):
        params = CavityParams(kappa_wg=0.0, kappa_sc=100.0, atoms=())
    assert reflection_coefficient(params, 0.0) == pytest.approx(-1.0, abs=1e-12)


def test_spectrum_points_carry_consistent_fields():
    params = critical_params(20.0)
    deltas = [-10.0, 0.0, 10.0]
    points = reflectivity_spectrum(params, deltas)
    assert [p.delta for p in points] == deltas
    for p in points:
        assert p.R == pytest.approx(abs(p.r) ** 2, abs=1e-15)
