"""Battery accounting over the beacon phase."""
import pytest

from wsnloc import EnergyParams, charge_node


def test_idle_unknown_node_for_ten_seconds():
    ledger = charge_node(0.0, 10.0, 0, EnergyParams())
    assert ledger.total_mj == pytest.approx(135.0, abs=1e-9)  # 13.5 mW x 10 s
    assert ledger.listen_time_s == 10.0


def test_three_lateration_executions_add_their_flat_cost():
    ledger = charge_node(0.0, 10.0, 3, EnergyParams())
    assert ledger.total_mj == pytest.approx(140.883, abs=1e-9)  # 135 + 3 x 1.961


def test_anchor_with_ten_beacons():
    tx = 10 * 0.02125
    ledger = charge_node(tx, 10.0, 0, EnergyParams())
    # 24.75 mW x 0.2125 s + 13.5 mW x 9.7875 s
    assert ledger.total_mj == pytest.approx(137.390625, abs=1e-9)
    assert ledger.tx_time_s + ledger.listen_time_s == pytest.approx(10.0)


def test_transmit_time_cannot_exceed_the_phase():
    with pytest.raises(ValueError):
        charge_node(11.0, 10.0, 0, EnergyParams())


def test_negative_inputs_are_rejected():
    with pytest.raises(ValueError):
        charge_node(-1.0, 10.0, 0, EnergyParams())
    with pytest.raises(ValueError):
        charge_node(0.0, 10.0, -1, EnergyParams())
    with pytest.raises(ValueError):
        EnergyParams(p_tx_mw=-1.0)


def test_ledger_matches_the_invariant_formula():
    params = EnergyParams()
    ledger = charge_node(0.5, 12.0, 2, params)
    expected = (
        params.p_tx_mw * 0.5
        + params.p_rx_idle_mw * 11.5
        + params.e_lateration_mj * 2
    )
    assert ledger.total_mj == pytest.approx(expected, abs=1e-12)


def test_procedure_cost_differs_only_by_execution_count():
    """Same node, same phase: the delta is exactly e_lateration x executions."""
    params = EnergyParams()
    bbox_only = charge_node(0.0, 10.0, 0, params)
    procedure = charge_node(0.0, 10.0, 3, params)
    delta = procedure.total_mj - bbox_only.total_mj
    assert delta == pytest.approx(params.e_lateration_mj * 3, abs=1e-12)
