import math

import numpy as np
import pytest
import yaml

from evasense import (
    OfdmParams,
    ScenarioConfig,
    ScenarioFormatError,
    SPEED_OF_LIGHT,
    TargetTruth,
    five_ap_circle_scenario,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    with_subcarriers,
    with_targets,
)


def test_ofdm_validation():
    with pytest.raises(ValueError):
        OfdmParams(carrier_frequency=0.0, subcarrier_spacing=30e3,
                   subcarriers=4, symbols=2, symbol_period=40e-6)
    with pytest.raises(ValueError):
        OfdmParams(carrier_frequency=4.9e9, subcarrier_spacing=30e3,
                   subcarriers=0, symbols=2, symbol_period=40e-6)
    with pytest.raises(ValueError):
        # period shorter than the useful symbol length 1/spacing
        OfdmParams(carrier_frequency=4.9e9, subcarrier_spacing=30e3,
                   subcarriers=4, symbols=2, symbol_period=30e-6)


def test_wavelength_derived_from_carrier():
    ofdm = OfdmParams(carrier_frequency=4.9e9, subcarrier_spacing=30e3,
                      subcarriers=4, symbols=2, symbol_period=35.677e-6)
    assert ofdm.wavelength == pytest.approx(SPEED_OF_LIGHT / 4.9e9, rel=1e-15)


def test_reference_scene_layout():
    scene = five_ap_circle_scenario()
    assert scene.ap_count == 5
    assert scene.target_count == 2
    assert scene.ofdm.subcarriers == 96
    assert scene.ofdm.symbols == 7
    for ap in scene.aps:
        assert np.linalg.norm(ap.position) == pytest.approx(500.0, rel=1e-12)
        assert ap.antenna_count == 8
        assert ap.antenna_spacing == pytest.approx(scene.ofdm.wavelength / 2.0)
        # broadside direction points back at the circle center
        broadside = np.array([-math.sin(ap.kappa), math.cos(ap.kappa)])
        assert np.allclose(ap.position + 500.0 * broadside, [0.0, 0.0],
                           atol=1e-9)


def test_with_subcarriers_and_targets_replace_fields():
    scene = five_ap_circle_scenario()
    desk = with_subcarriers(scene, 24)
    assert desk.ofdm.subcarriers == 24
    assert scene.ofdm.subcarriers == 96
    single = with_targets(scene, scene.targets[:1])
    assert single.target_count == 1
    assert scene.target_count == 2


def test_target_on_ap_rejected():
    scene = five_ap_circle_scenario()
    bad = TargetTruth(position=scene.aps[0].position.copy(),
                      velocity=np.array([1.0, 0.0]), rcs=0.01)
    with pytest.raises(ValueError):
        with_targets(scene, (bad,))


def test_yaml_round_trip(tmp_path):
    scene = five_ap_circle_scenario()
    path = tmp_path / "scene.yaml"
    save_scenario(scene, path)
    back = load_scenario(path)
    assert back.name == scene.name
    assert back.ofdm == scene.ofdm
    assert back.gain_ref_range == scene.gain_ref_range
    assert back.gain_ref_rcs == scene.gain_ref_rcs
    for a, b in zip(scene.aps, back.aps):
        assert np.allclose(a.position, b.position, atol=1e-12)
        assert a.kappa == pytest.approx(b.kappa, abs=1e-12)
        assert a.antenna_count == b.antenna_count
        assert a.antenna_spacing == pytest.approx(b.antenna_spacing)
    for a, b in zip(scene.targets, back.targets):
        assert np.allclose(a.position, b.position, atol=1e-12)
        assert np.allclose(a.velocity, b.velocity, atol=1e-12)
        assert a.rcs == pytest.approx(b.rcs)


def test_yaml_angles_stored_in_degrees(tmp_path):
    scene = five_ap_circle_scenario()
    path = tmp_path / "scene.yaml"
    save_scenario(scene, path)
    raw = yaml.safe_load(path.read_text())
    for ap_entry, ap in zip(raw["aps"], scene.aps):
        assert ap_entry["orientation_deg"] == \
            pytest.approx(math.degrees(ap.kappa), abs=1e-9)


def test_dict_round_trip():
    scene = five_ap_circle_scenario(subcarriers=24)
    again = scenario_from_dict(scenario_to_dict(scene))
    assert again.ofdm == scene.ofdm
    assert again.ap_count == scene.ap_count


def test_from_dict_rejects_bad_documents():
    with pytest.raises(ScenarioFormatError):
        scenario_from_dict(["not", "a", "mapping"])
    good = scenario_to_dict(five_ap_circle_scenario())
    missing = dict(good)
    del missing["ofdm"]
    with pytest.raises(ScenarioFormatError):
        scenario_from_dict(missing)
    broken = dict(good)
    broken["aps"] = [{"position_m": [0.0, 0.0]}]  # no orientation
    with pytest.raises(ScenarioFormatError):
        scenario_from_dict(broken)


def test_load_rejects_unparseable_file(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("ofdm: [unclosed\n")
    with pytest.raises(ScenarioFormatError):
        load_scenario(path)


def test_packaged_reference_scene_matches_factory():
    from pathlib import Path
    packaged = Path(__file__).resolve().parents[1] / "scenarios" / \
        "five_ap_circle.yaml"
    scene = load_scenario(packaged)
    factory = five_ap_circle_scenario()
    assert scene.ofdm == factory.ofdm
    for a, b in zip(scene.aps, factory.aps):
        assert np.allclose(a.position, b.position, atol=1e-9)
        assert a.kappa == pytest.approx(b.kappa, abs=1e-9)
