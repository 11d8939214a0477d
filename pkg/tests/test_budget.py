from fractions import Fraction

import pytest

import oracles
from modenet import camera
from modenet.budget import (
    BudgetConfig,
    BudgetError,
    CostEnvelope,
    DeploymentAssignment,
    DeploymentMatrix,
    ProfileEntry,
    ResourceProfile,
    burst_feasibility,
    deployment_options,
    expected_cost,
    max_frames,
    optimize_assignment,
    trace_cost,
)
from modenet.cpn import Arc, ColourSet, ColouredNet, Place, Transition


def cfg(**overrides):
    base = dict(
        buffer_capacity=4,
        card_size=1000,
        image_size=25,
        compression=Fraction(1, 5),
        shoot_period=10,
        store_period=40,
    )
    base.update(overrides)
    return BudgetConfig(**base)


# -- profile/envelope invariants ------------------------------------------------------


def test_profile_entry_ordering_enforced():
    with pytest.raises(BudgetError):
        ProfileEntry(5, 4, 6, 1, 1, 1)
    with pytest.raises(BudgetError):
        ProfileEntry(1, 1, 1, 5, 4, 6)


def test_envelope_ordering_enforced():
    with pytest.raises(BudgetError):
        CostEnvelope((3, 2, 4), (1, 1, 1))


def test_config_positivity():
    with pytest.raises(BudgetError):
        cfg(buffer_capacity=0)
    with pytest.raises(BudgetError):
        cfg(compression=Fraction(3, 2))


# -- deployment options ----------------------------------------------------------------


def test_table_rows():
    matrix, _, _ = camera.default_matrix_and_profile()
    assert deployment_options("IP", matrix) == {"DSP"}
    assert deployment_options("IB", matrix) == {"DSP"}
    assert deployment_options("IS", matrix) == {"GPP"}
    assert deployment_options("BC", matrix) == {"DSP"}
    assert deployment_options("AF", matrix) == {"GPP", "DSP"}
    assert deployment_options("AE", matrix) == {"GPP", "DSP"}
    assert deployment_options("AS", matrix) == {"GPP", "DSP"}


def test_unknown_operation_errors():
    matrix, _, _ = camera.default_matrix_and_profile()
    with pytest.raises(BudgetError):
        deployment_options("XYZ", matrix)


def test_default_profile_respects_envelope_order():
    _, profile, _ = camera.default_matrix_and_profile()
    for _, e in profile.entries:
        assert e.bcet <= e.acet <= e.wcet
        assert e.bcec <= e.acec <= e.wcec


# -- trace cost --------------------------------------------------------------------------


def test_empty_trace_is_zero():
    _, profile, _ = camera.default_matrix_and_profile()
    env = trace_cost((), profile, DeploymentAssignment.of({}))
    assert env == CostEnvelope.zero()


def test_ib_ip_worst_time_is_35():
    matrix, profile, _ = camera.default_matrix_and_profile()
    net = camera.build_hs_net()
    assignment = camera.default_assignment(net)
    env = trace_cost(["do IB", "do IP"], profile, assignment, net=net)
    assert env.time[2] == 35
    assert env.time == (16, 25, 35)


def test_trace_cost_additive_under_concatenation():
    matrix, profile, _ = camera.default_matrix_and_profile()
    net = camera.build_hs_net()
    assignment = camera.default_assignment(net)
    t1 = ["Shoot_Sync", "do AS", "Shoot"]
    t2 = ["do IB", "do IP", "no BF"]
    a = trace_cost(t1, profile, assignment, net=net)
    b = trace_cost(t2, profile, assignment, net=net)
    both = trace_cost(t1 + t2, profile, assignment, net=net)
    assert both == a.plus(b)


def test_missing_profile_entry_names_pair():
    profile = ResourceProfile.of({})
    assignment = DeploymentAssignment.of({"AF": "GPP"})
    with pytest.raises(BudgetError, match="AF.*GPP"):
        trace_cost(["AF"], profile, assignment)


# -- expected cost -------------------------------------------------------------------------


def two_branch_net(p1, p2):
    unit = ColourSet("U", ("u",))
    return ColouredNet.build(
        "branch",
        [unit],
        [Place("s", "U", "main", init=("u",)), Place("d", "U", "main")],
        [
            Transition(
                "cheap",
                "main",
                inputs=(Arc.of("s", "u"),),
                outputs=(Arc.of("d", "u"),),
                probability=p1,
                operation="CHEAP",
            ),
            Transition(
                "dear",
                "main",
                inputs=(Arc.of("s", "u"),),
                outputs=(Arc.of("d", "u"),),
                probability=p2,
                operation="DEAR",
            ),
        ],
    )


BRANCH_PROFILE = ResourceProfile.of(
    {
        ("CHEAP", "GPP"): ProfileEntry(10, 10, 10, 5, 5, 5),
        ("DEAR", "GPP"): ProfileEntry(30, 30, 30, 9, 9, 9),
    }
)
BRANCH_ASSIGN = DeploymentAssignment.of({"CHEAP": "GPP", "DEAR": "GPP"})


def test_two_point_expectation():
    net = two_branch_net(Fraction(1, 2), Fraction(1, 2))
    out = expected_cost(net, BRANCH_ASSIGN, BRANCH_PROFILE, horizon=5)
    assert out.time == pytest.approx(20.0)
    assert out.energy == pytest.approx(7.0)


def test_skewed_expectation():
    net = two_branch_net(Fraction(9, 10), Fraction(1, 10))
    out = expected_cost(net, BRANCH_ASSIGN, BRANCH_PROFILE, horizon=5)
    assert out.time == pytest.approx(0.9 * 10 + 0.1 * 30)


def test_single_path_matches_trace_cost_expected():
    matrix, profile, _ = camera.default_matrix_and_profile()
    unit = ColourSet("U", ("u",))
    net = ColouredNet.build(
        "line",
        [unit],
        [
            Place("a", "U", "main", init=("u",)),
            Place("b", "U", "main"),
            Place("c", "U", "main"),
        ],
        [
            Transition(
                "first", "main",
                inputs=(Arc.of("a", "u"),), outputs=(Arc.of("b", "u"),),
                operation="AF",
            ),
            Transition(
                "second", "main",
                inputs=(Arc.of("b", "u"),), outputs=(Arc.of("c", "u"),),
                operation="AE",
            ),
        ],
    )
    assignment = DeploymentAssignment.of({"AF": "GPP", "AE": "GPP"})
    out = expected_cost(net, assignment, profile, horizon=10)
    env = trace_cost(["AF", "AE"], profile, assignment)
    assert out.time == pytest.approx(env.time[1])
    assert out.energy == pytest.approx(env.energy[1])


def test_missing_probability_on_conflict_errors():
    net = two_branch_net(Fraction(1, 2), None)
    with pytest.raises(BudgetError, match="probabilities missing"):
        expected_cost(net, BRANCH_ASSIGN, BRANCH_PROFILE, horizon=5)


def test_exact_matches_independent_enumerator():
    matrix, profile, _ = camera.default_matrix_and_profile()
    net = camera.build_hs_net(2, 3)
    assignment = camera.default_assignment(net)
    exact = expected_cost(net, assignment, profile, horizon=40, method="exact")
    oracle_t, oracle_e = oracles.expectation_oracle(net, assignment, profile, 40)
    assert exact.time == pytest.approx(oracle_t, rel=1e-9)
    assert exact.energy == pytest.approx(oracle_e, rel=1e-9)


def test_monte_carlo_consistent_with_exact():
    matrix, profile, _ = camera.default_matrix_and_profile()
    net = camera.build_hs_net(2, 5)
    assignment = camera.default_assignment(net)
    exact = expected_cost(net, assignment, profile, horizon=300, method="exact")
    mc = expected_cost(
        net, assignment, profile, horizon=300, method="monte-carlo", seed=11, runs=4000
    )
    assert abs(mc.time - exact.time) <= 3 * mc.time_se
    assert abs(mc.energy - exact.energy) <= 3 * mc.energy_se
    assert mc.runs == 4000


# -- burst feasibility ------------------------------------------------------------------


def test_store_keeping_pace_is_unbounded():
    assert burst_feasibility(cfg(shoot_period=10, store_period=10)) is None
    assert burst_feasibility(cfg(shoot_period=10, store_period=5)) is None


def test_derived_first_delay_cases():
    assert burst_feasibility(cfg(shoot_period=10, store_period=40, buffer_capacity=4)) == 5
    assert burst_feasibility(cfg(shoot_period=1, store_period=2, buffer_capacity=1)) == 1


def test_burst_matches_tick_oracle_on_sample_grid():
    for shoot in (1, 3, 7, 12):
        for store in (1, 5, 13, 30):
            for capacity in (1, 2, 4):
                c = cfg(
                    shoot_period=shoot, store_period=store, buffer_capacity=capacity
                )
                got = burst_feasibility(c)
                expected = oracles.burst_oracle(c, max_frames=20)
                if got is not None and got >= 20:
                    got = None
                assert got == expected, (shoot, store, capacity)


# -- max frames ------------------------------------------------------------------------


def test_max_frames_cases():
    assert max_frames(cfg()) == 200
    assert max_frames(cfg(compression=1)) == 40
    assert max_frames(cfg(card_size=10, image_size=25, compression=1)) == 0


# -- assignment optimization --------------------------------------------------------------


def test_single_allowed_target_is_chosen():
    matrix = DeploymentMatrix.of({"X": ("DSP",)})
    profile = ResourceProfile.of({("X", "DSP"): ProfileEntry(1, 2, 3, 4, 5, 6)})
    assignment, env = optimize_assignment(("X",), matrix, profile, "min-worst-time")
    assert assignment.as_dict() == {"X": "DSP"}
    assert env.time == (1, 2, 3)


def test_idle_context_forces_gpp():
    matrix, profile, _ = camera.default_matrix_and_profile()
    assignment, _ = optimize_assignment(
        ("AF", "AE"), matrix, profile, "min-worst-energy", context_mode="IDLE"
    )
    assert assignment.as_dict() == {"AF": "GPP", "AE": "GPP"}


def test_idle_context_infeasible_for_dsp_only_op():
    matrix, profile, _ = camera.default_matrix_and_profile()
    with pytest.raises(BudgetError, match="IB"):
        optimize_assignment(("AF", "IB"), matrix, profile, "min-worst-time", "IDLE")


def test_objectives_split_on_camera_profile():
    matrix, profile, _ = camera.default_matrix_and_profile()
    ops = ("AF", "AE", "AS", "IB", "IP", "IS", "BC")
    time_assign, _ = optimize_assignment(ops, matrix, profile, "min-worst-time")
    energy_assign, _ = optimize_assignment(ops, matrix, profile, "min-worst-energy")
    for op in ("AF", "AE", "AS"):
        assert time_assign.target_of(op) == "DSP"
        assert energy_assign.target_of(op) == "GPP"
    for op in ("IB", "IP", "BC"):
        assert time_assign.target_of(op) == "DSP"
    assert time_assign.target_of("IS") == "GPP"


def test_gpp_preferred_on_ties():
    matrix = DeploymentMatrix.of({"X": ("GPP", "DSP")})
    profile = ResourceProfile.of(
        {
            ("X", "GPP"): ProfileEntry(1, 1, 1, 1, 1, 1),
            ("X", "DSP"): ProfileEntry(1, 1, 1, 1, 1, 1),
        }
    )
    assignment, _ = optimize_assignment(("X",), matrix, profile, "min-worst-time")
    assert assignment.target_of("X") == "GPP"


def test_optimality_against_bruteforce_oracle():
    for seed in range(25):
        ops, matrix, profile = oracles.random_ops_matrix_profile(seed)
        for objective in ("min-worst-time", "min-worst-energy"):
            _, env = optimize_assignment(ops, matrix, profile, objective)
            got = env.time[2] if objective == "min-worst-time" else env.energy[2]
            assert got == oracles.assignment_oracle(ops, matrix, profile, objective)
