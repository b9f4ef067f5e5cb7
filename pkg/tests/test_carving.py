from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitycarve.carving import (
    CarveSpec,
    CavityReflection,
    HeraldImpossibleError,
    IdealReflection,
    ProbePolicy,
    TableReflection,
    UniformReflection,
    as_reflection_model,
    carve_click,
    carve_no_click,
    carve_sequential,
    pattern_coupled,
)
from cavitycarve.cavity import AtomSite, CavityParams, reflection_coefficient
from cavitycarve.qstate import PureState, apply_x_mask


def plus_plus() -> PureState:
    return PureState.uniform_plus(2)


# ---------------------------------------------------------------------------
# reflection models
# ---------------------------------------------------------------------------


def test_ideal_reflection_values():
    model = IdealReflection()
    assert model.amplitude(frozenset()) == 0.0
    assert model.amplitude(frozenset({3})) == -1.0


def test_cavity_reflection_matches_direct_evaluation():
    params = CavityParams(
        kappa_wg=200.0,
        kappa_sc=200.0,
        atoms=(AtomSite(g=18.0), AtomSite(g=22.0), AtomSite(g=25.0)),
    )
    model = CavityReflection(params, delta=1.5)
    for coupled in (frozenset(), frozenset({1}), frozenset({0, 2})):
        direct = reflection_coefficient(params.with_coupled(coupled), 1.5)
        assert model.amplitude(coupled) == direct
        # second call must hit the cache and stay identical
        assert model.amplitude(coupled) == direct


def test_as_reflection_model_dispatch():
    assert isinstance(as_reflection_model(None), IdealReflection)
    table = TableReflection({frozenset(): 0.0, frozenset({0}): -0.5})
    assert as_reflection_model(table) is table
    params = CavityParams(kappa_wg=200.0, kappa_sc=200.0, atoms=(AtomSite(20.0),))
    assert isinstance(as_reflection_model(params), CavityReflection)
    with pytest.raises(TypeError):
        as_reflection_model("nope")


def test_pattern_coupled_reads_subset_msb_first():
    assert pattern_coupled((2, 5, 7), 0b100) == frozenset({2})
    assert pattern_coupled((2, 5, 7), 0b011) == frozenset({5, 7})


def test_spec_validation():
    with pytest.raises(ValueError):
        CarveSpec(())
    with pytest.raises(ValueError):
        CarveSpec((1, 1))
    assert CarveSpec((3, 1)).subset == (1, 3)
    with pytest.raises(ValueError):
        ProbePolicy(0)
    with pytest.raises(ValueError):
        ProbePolicy(1, "optimistic")


# ---------------------------------------------------------------------------
# single click
# ---------------------------------------------------------------------------


def test_click_on_plus_plus_removes_the_dark_component():
    result = carve_click(plus_plus(), CarveSpec((0, 1)))
    assert result.p_click == pytest.approx(0.75, abs=1e-12)
    (branch,) = result.heralded.branches
    expected = np.array([0.0, 1.0, 1.0, 1.0]) / math.sqrt(3.0)
    # ideal click multiplies the surviving components by -1
    assert np.allclose(branch.state.amps, -expected)
    assert branch.record == (("click", 1),)


def test_click_probability_is_sum_of_weighted_reflectivities():
    model = TableReflection(
        {
            frozenset(): 0.1j,
            frozenset({0}): -0.7,
            frozenset({1}): 0.4 + 0.2j,
            frozenset({0, 1}): -0.9,
        }
    )
    state = plus_plus()
    result = carve_click(state, CarveSpec((0, 1), model))
    manual = sum(
        0.25 * abs(model.amplitude(pattern_coupled((0, 1), p))) ** 2 for p in range(4)
    )
    assert result.p_click == pytest.approx(manual, abs=1e-15)


def test_click_ledger_records_every_pattern():
    result = carve_click(plus_plus(), CarveSpec((0, 1)))
    assert set(result.factor_ledger) == {"00", "01", "10", "11"}
    assert result.factor_ledger["00"] == 0.0
    assert result.factor_ledger["11"] == -1.0


def test_click_impossible_on_dark_state():
    with pytest.raises(HeraldImpossibleError):
        carve_click(PureState.zero(2), CarveSpec((0, 1)))


def test_click_commutes_with_x_layer_up_to_pattern_relabeling():
    # carving a flipped state == flipping the carved state with the
    # reflection table XOR-translated
    rng = np.random.default_rng(11)
    amps = rng.normal(size=8) + 1j * rng.normal(size=8)
    state = PureState(3, amps).normalize()
    subset = (0, 2)
    table = {
        frozenset(): -0.2,
        frozenset({0}): 0.8j,
        frozenset({2}): -0.5,
        frozenset({0, 2}): 0.9,
    }
    for mask in range(4):
        qubits = pattern_coupled(subset, mask)
        xmask = sum(1 << (3 - 1 - q) for q in qubits)
        translated = TableReflection(
            {
                pattern_coupled(subset, p): table[pattern_coupled(subset, p ^ mask)]
                for p in range(4)
            }
        )
        a = carve_click(apply_x_mask(state, xmask), CarveSpec(subset, TableReflection(table)))
        b = carve_click(state, CarveSpec(subset, translated))
        (ba,) = a.heralded.branches
        (bb,) = b.heralded.branches
        assert a.p_click == pytest.approx(b.p_click, abs=1e-12)
        assert np.allclose(ba.state.amps, apply_x_mask(bb.state, xmask).amps)


# ---------------------------------------------------------------------------
# no click
# ---------------------------------------------------------------------------


def test_no_click_coherent_branch():
    r = -0.6
    mix = carve_no_click(plus_plus(), CarveSpec((0, 1), UniformReflection(r, 0.0)))
    p_click = 0.75 * r * r
    assert mix.total_weight == pytest.approx(1.0 - p_click, abs=1e-12)
    (branch,) = mix.branches
    s = math.sqrt(1 - r * r)
    expected = np.array([1.0, s, s, s]) / 2.0
    expected /= np.linalg.norm(expected)
    assert np.allclose(branch.state.amps, expected)


def test_no_click_dephased_splits_by_reflectivity_class():
    model = TableReflection(
        {
            frozenset(): 0.0,
            frozenset({0}): -0.6,
            frozenset({1}): 0.6j,  # same |r| as {0}: one class
            frozenset({0, 1}): -0.9,
        }
    )
    mix = carve_no_click(plus_plus(), CarveSpec((0, 1), model), model="dephased")
    assert len(mix) == 3
    weights = sorted(b.weight for b in mix.branches)
    assert weights == pytest.approx(
        sorted([0.25, 2 * 0.25 * (1 - 0.36), 0.25 * (1 - 0.81)]), abs=1e-12
    )
    p_click = 0.25 * (0.36 + 0.36 + 0.81)
    assert mix.total_weight == pytest.approx(1.0 - p_click, abs=1e-12)


def test_no_click_weights_sum_to_complement_of_click():
    params = CavityParams(
        kappa_wg=160.0, kappa_sc=240.0, atoms=(AtomSite(17.0), AtomSite(23.0))
    )
    state = plus_plus()
    spec = CarveSpec((0, 1), params)
    p = carve_click(state, spec).p_click
    for model in ("coherent", "dephased"):
        mix = carve_no_click(state, spec, model)
        assert mix.total_weight == pytest.approx(1.0 - p, abs=1e-12)


def test_no_click_on_perfectly_reflected_state_is_empty():
    # every component clicks with certainty -> nothing survives a no-click
    state = PureState.basis(2, 0b11)
    mix = carve_no_click(state, CarveSpec((0, 1), UniformReflection(-1.0, 0.0)))
    assert len(mix) == 0


# ---------------------------------------------------------------------------
# sequential probes
# ---------------------------------------------------------------------------


@given(
    n_photons=st.integers(1, 4),
    R=st.floats(0.05, 1.0),
    model=st.sampled_from(["coherent", "dephased"]),
)
@settings(max_examples=60, deadline=None)
def test_sequential_capture_matches_closed_form(n_photons, R, model):
    # diagonal capture: each surviving component is caught with
    # probability 1-(1-R)^n, the dark component never clicks
    spec = CarveSpec((0, 1), UniformReflection(-math.sqrt(R), 0.0))
    result = carve_sequential(plus_plus(), spec, ProbePolicy(n_photons, model))
    expected = 0.75 * (1.0 - (1.0 - R) ** n_photons)
    assert result.p_click == pytest.approx(expected, abs=1e-12)


def test_sequential_records_round_numbers():
    spec = CarveSpec((0, 1), UniformReflection(-0.5, 0.0))
    result = carve_sequential(plus_plus(), spec, ProbePolicy(3, "coherent"))
    rounds = sorted(b.record[-1] for b in result.heralded.branches)
    assert rounds == [("click", 1), ("click", 2), ("click", 3)]
    for b in result.heralded.branches:
        round_no = b.record[-1][1]
        assert len([r for r in b.record if r[0] == "no_click"]) == round_no - 1


def test_sequential_single_photon_equals_plain_click():
    state = plus_plus()
    spec = CarveSpec((0, 1))
    a = carve_click(state, spec)
    b = carve_sequential(state, spec, ProbePolicy(1))
    assert a.p_click == b.p_click
    (ba,) = a.heralded.branches
    (bb,) = b.heralded.branches
    assert np.allclose(ba.state.amps, bb.state.amps)


def test_sequential_impossible_when_nothing_reflects():
    spec = CarveSpec((0, 1), UniformReflection(0.0, 0.0))
    with pytest.raises(HeraldImpossibleError):
        carve_sequential(plus_plus(), spec, ProbePolicy(3))


def test_probability_never_decreases_with_more_probes():
    params = CavityParams(
        kappa_wg=160.0, kappa_sc=240.0, atoms=(AtomSite(20.0), AtomSite(20.0))
    )
    spec = CarveSpec((0, 1), params)
    previous = 0.0
    for n in range(1, 5):
        p = carve_sequential(plus_plus(), spec, ProbePolicy(n)).p_click
        assert p >= previous - 1e-15
        previous = p
