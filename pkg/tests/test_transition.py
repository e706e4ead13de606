import json

import pytest

from i4sim.engine import SimConfig, simulate
from i4sim.errors import InvalidScenarioError, MissingSeriesError
from i4sim.model import serialize_model, validate_model
from i4sim.models import bundled_model_text
from i4sim.transition import (
    build_transition_model,
    compute_kpis,
    default_scenario,
    load_scenario,
    run_baseline,
    scenario_from_dict,
)


class TestScenario:
    def test_default_passes_invariants(self):
        assert default_scenario().violations() == []

    def test_replace_rejects_unknown_field(self):
        with pytest.raises(InvalidScenarioError):
            default_scenario().replace(nope=1.0)

    def test_invariants_catch_inverted_costs(self):
        s = default_scenario().replace(unit_cost_i40=200.0)
        assert any("unit_cost_i40" in v for v in s.violations())

    def test_invariants_catch_inverted_wages(self):
        s = default_scenario().replace(wage_i40=1_000.0)
        assert any("wage_i40" in v for v in s.violations())

    def test_partial_merge(self):
        s = scenario_from_dict({"price": 300})
        assert s.price == 300.0
        assert s.base_demand == default_scenario().base_demand

    def test_load_scenario_file(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps({"cash0": 2e6}))
        assert load_scenario(str(p)).cash0 == 2e6

    def test_invalid_scenario_rejected(self):
        with pytest.raises(InvalidScenarioError):
            scenario_from_dict({"machine_price": 0})


class TestBuiltModel:
    def test_structure(self, baseline_model):
        assert len(baseline_model.stocks) == 6
        assert len(baseline_model.flows) == 6
        assert validate_model(baseline_model) == []

    def test_cash_may_go_negative_others_not(self, baseline_model):
        nn = {s.name: s.non_negative for s in baseline_model.stocks}
        assert nn["Cash"] is False
        assert all(nn[name] for name in nn if name != "Cash")

    def test_bundled_document_matches_builder(self, baseline_model):
        assert serialize_model(baseline_model) == bundled_model_text()

    def test_liquidity_chokes_acquisition_at_reserve(self):
        s = default_scenario()
        m = build_transition_model(s.replace(cash0=s.reserve_cash))
        traj = simulate(m, n_steps=0)
        assert traj.series["liquidity_factor"][0] == 0.0
        assert traj.series["acquisition"][0] == 0.0


@pytest.fixture(scope="module")
def baseline():
    return run_baseline()


class TestBaselineRun:
    def test_survives_and_crosses_over(self, baseline):
        _, kpi = baseline
        assert kpi.bankruptcy_time is None
        assert kpi.crossover_time is not None
        assert 0.0 < kpi.crossover_time < 60.0

    def test_completion_within_horizon(self, baseline):
        _, kpi = baseline
        assert kpi.transition_completion is not None
        assert kpi.crossover_time < kpi.transition_completion < 60.0

    def test_unit_cost_falls(self, baseline):
        _, kpi = baseline
        assert kpi.blended_unit_cost[-1] < kpi.blended_unit_cost[0]

    def test_staff_monotonic_while_liquid(self, baseline):
        traj, _ = baseline
        lf = traj.series["liquidity_factor"]
        legacy = traj.series["LegacyStaff"]
        i40 = traj.series["I40Staff"]
        for i in range(1, len(lf)):
            assert legacy[i] <= legacy[i - 1] + 1e-12
            if lf[i - 1] > 0.0:
                assert i40[i] >= i40[i - 1] - 1e-12


class TestModelProperties:
    def test_no_transition_identity(self):
        s = default_scenario().replace(
            policy_acquisition_rate=0.0, policy_hire_rate=0.0,
            policy_dismiss_rate=0.0, value_uplift=0.0,
            i40_idle0=0.0, i40_inuse0=0.0, i40_staff0=0.0,
        )
        traj = simulate(build_transition_model(s))
        for name in ("I40Idle", "I40InUse", "I40Staff", "LegacyStaff"):
            assert set(traj.series[name]) == {traj.series[name][0]}

    def test_zero_staff_shuts_down_i40_line(self):
        s = default_scenario().replace(i40_staff0=0.0, policy_hire_rate=0.0)
        traj = simulate(build_transition_model(s))
        assert max(traj.series["i40_output"]) == 0.0

    def test_stress_goes_bankrupt(self):
        s = default_scenario()
        s = s.replace(policy_acquisition_rate=s.policy_acquisition_rate * 10,
                      cash0=s.cash0 / 10)
        traj = simulate(build_transition_model(s))
        assert traj.event_time("BANKRUPTCY") is not None


class TestKpis:
    def test_all_legacy_steady_state_cost(self):
        # no transition, no uplift: blended cost is constant and computable
        s = default_scenario().replace(
            policy_acquisition_rate=0.0, policy_hire_rate=0.0,
            policy_dismiss_rate=0.0, value_uplift=0.0,
            i40_idle0=0.0, i40_inuse0=0.0, i40_staff0=0.0,
        )
        traj = simulate(build_transition_model(s))
        kpi = compute_kpis(traj, s)
        output = min(s.legacy_machines0 * s.output_per_legacy_machine,
                     s.legacy_staff0 * s.output_per_legacy_worker)
        sales = min(output, s.base_demand)
        expected = s.unit_cost_legacy + (s.wage_legacy * s.legacy_staff0) / sales
        assert kpi.blended_unit_cost[0] == pytest.approx(expected, rel=1e-12)

    def test_blended_cost_undefined_without_sales(self):
        s = default_scenario().replace(
            legacy_machines0=0.0, legacy_staff0=0.0, i40_inuse0=0.0,
            i40_idle0=0.0, i40_staff0=0.0,
            policy_acquisition_rate=0.0, policy_hire_rate=0.0, policy_dismiss_rate=0.0,
        )
        traj = simulate(build_transition_model(s, stop=2.0))
        kpi = compute_kpis(traj, s)
        assert all(v is None for v in kpi.blended_unit_cost)
        assert kpi.mean_unit_cost() is None

    def test_missing_series_raises(self, baseline_scenario):
        from i4sim.engine import Trajectory

        traj = Trajectory(times=[0.0], series={"Cash": [1.0]}, events=[], metadata={})
        with pytest.raises(MissingSeriesError):
            compute_kpis(traj, baseline_scenario)

    def test_report_serializes(self):
        _, kpi = run_baseline()
        d = kpi.as_dict()
        assert d["terminal_cash"] == kpi.cash[-1]
        assert d["bankruptcy_time"] is None
