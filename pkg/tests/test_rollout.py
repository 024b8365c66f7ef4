"""Autoregressive rollout: warm-up, clamps, windows, compounding."""

import numpy as np
import pytest

from throttleid.excitation import (ExcitationConfig, build_corpus,
                                   excitation_segment, step_stair_trace)
from throttleid.features import assemble, merge
from throttleid.plant import CommandTrace, PlantConfig, simulate
from throttleid.regression import BasisSpec, expand, fit_lasso
from throttleid.rollout import (RolloutDivergenceError, ValidationReport,
                                descent_profile, descent_profile_eval,
                                error_windows, rollout, teacher_forced_eval,
                                timeseries_csv)

EX = ExcitationConfig(duration=10.0)
PC = PlantConfig()


@pytest.fixture(scope="module")
def small_model():
    trajs = [simulate(t, PC) for t in build_corpus(EX)]
    ds = merge([assemble(t, 4) for t in trajs])
    basis = BasisSpec()
    return fit_lasso(expand(ds.inputs, basis), ds.targets, 3e-5, basis=basis,
                     n_history=4, penalty_scale="sqrt-rows", obj_rel_tol=1e-6,
                     max_sweeps=3000)


@pytest.fixture(scope="module")
def stair_pair(small_model):
    trace = step_stair_trace([400.0, 650.0, 500.0], 3.0, EX)
    truth = simulate(trace, PC)
    return trace, truth


class TestRollout:
    def test_warmup_rows_copied_exactly(self, small_model, stair_pair):
        trace, truth = stair_pair
        pred = rollout(small_model, trace, truth)
        n = small_model.n
        assert np.array_equal(pred.thrusts[:n], truth.thrusts[:n])
        assert np.array_equal(pred.pressures[:n], truth.pressures[:n])
        assert np.array_equal(pred.m_fuel[:n], truth.m_fuel[:n])

    def test_clamps_hold(self, small_model, stair_pair):
        trace, truth = stair_pair
        pred = rollout(small_model, trace, truth)
        assert np.all(pred.thrusts >= 0.0)
        assert np.all(np.diff(pred.m_fuel) >= 0.0)
        assert np.all(np.diff(pred.m_ox) >= 0.0)

    def test_deterministic(self, small_model, stair_pair):
        trace, truth = stair_pair
        a = rollout(small_model, trace, truth)
        b = rollout(small_model, trace, truth)
        assert np.array_equal(a.thrusts, b.thrusts)
        assert np.array_equal(a.pressures, b.pressures)

    def test_collect_raw(self, small_model, stair_pair):
        trace, truth = stair_pair
        pred, raw = rollout(small_model, trace, truth, collect_raw=True)
        assert raw.shape == (len(pred), 7)
        # clamped thrust never differs from raw except at the floor
        diff = pred.thrusts - raw[:, :4]
        assert np.all(diff[raw[:, :4] >= 0.0] == 0.0)

    def test_all_off_stays_near_zero(self, small_model):
        trace = CommandTrace(dt=PC.dt, commands=np.zeros((500, 4)),
                             status=np.zeros((500, 4)))
        truth = simulate(trace, PC)
        pred = rollout(small_model, trace, truth)
        assert np.max(np.abs(pred.thrusts)) < 2.0
        assert pred.m_fuel[-1] < 0.1

    def test_too_short_trace_rejected(self, small_model):
        trace = CommandTrace(dt=PC.dt, commands=np.full((2, 4), 400.0),
                             status=np.ones((2, 4)))
        truth = simulate(trace, PC)
        with pytest.raises(ValueError, match="too short"):
            rollout(small_model, CommandTrace(dt=PC.dt,
                                              commands=trace.commands[:1],
                                              status=trace.status[:1]), truth)

    def test_short_warmup_rejected(self, small_model, stair_pair):
        trace, truth = stair_pair
        stub = simulate(CommandTrace(dt=PC.dt, commands=trace.commands[:2],
                                     status=trace.status[:2]), PC)
        with pytest.raises(ValueError, match="warm-up"):
            rollout(small_model, trace, stub)

    def test_divergence_detected(self, small_model, stair_pair):
        trace, truth = stair_pair
        bad = fit_lasso(np.eye(3), np.zeros((3, 7)), 0.0, standardize=False)
        bad.n = small_model.n
        bad.n_inputs = small_model.n_inputs
        bad.basis = small_model.basis
        bad.K = small_model.K * 0
        bad.K[:, 0] = np.inf
        with pytest.raises(RolloutDivergenceError):
            rollout(bad, trace, truth)


class TestTeacherForced:
    def test_zero_error_on_exact_linear_system(self):
        # a noiseless linear difference system is inside the model
        # class, so the mu=0 fit reproduces it to machine precision
        from conftest import ar2_trajectory
        traj = ar2_trajectory(n_samples=3000, noise=0.0)
        ds = assemble(traj, 2)
        basis = BasisSpec("linear")
        model = fit_lasso(expand(ds.inputs, basis), ds.targets, 0.0,
                          basis=basis, n_history=2, obj_rel_tol=1e-6)
        rep = teacher_forced_eval(model, traj)
        assert rep.max_thrust_err < 1e-6

    def test_compounding_direction(self, small_model):
        # rollout error should dominate teacher-forced error on most traces
        wins = 0
        traces = [excitation_segment(520.0, EX),
                  step_stair_trace([400, 700, 400], 3.0, EX),
                  step_stair_trace([800, 240], 4.0, EX)]
        for tr in traces:
            truth = simulate(tr, PC)
            tf = teacher_forced_eval(small_model, truth)
            pred = rollout(small_model, tr, truth)
            ro = error_windows(truth, pred)
            if ro.max_thrust_err >= tf.max_thrust_err:
                wins += 1
        assert wins >= 2

    def test_report_structure(self, small_model, stair_pair):
        _, truth = stair_pair
        rep = teacher_forced_eval(small_model, truth)
        assert isinstance(rep, ValidationReport)
        assert rep.n_transient + rep.n_steady == rep.n_samples
        assert np.all(np.isfinite(rep.rmse))


class TestErrorWindows:
    def test_identical_trajectories_zero(self, stair_pair):
        _, truth = stair_pair
        rep = error_windows(truth, truth, experiment="self")
        assert np.all(rep.rmse == 0.0)
        assert rep.max_thrust_err == 0.0
        assert rep.module_mass_max_err == 0.0

    def test_constant_command_no_transient(self):
        trace = CommandTrace(dt=PC.dt, commands=np.full((300, 4), 500.0),
                             status=np.ones((300, 4)))
        truth = simulate(trace, PC)
        rep = error_windows(truth, truth)
        # only the rest-to-500 startup step marks transient samples
        settle = int(round(1.0 / PC.dt))
        assert rep.n_transient == settle
        assert rep.n_steady == len(truth) - settle

    def test_steady_leq_transient_on_stair(self, small_model, stair_pair):
        trace, truth = stair_pair
        pred = rollout(small_model, trace, truth)
        rep = error_windows(truth, pred)
        assert np.max(rep.max_err_steady[:4]) <= np.max(rep.max_err_transient[:4])

    def test_misaligned_rejected(self, stair_pair):
        _, truth = stair_pair
        short = simulate(CommandTrace(dt=PC.dt, commands=np.zeros((10, 4)),
                                      status=np.zeros((10, 4))), PC)
        with pytest.raises(ValueError):
            error_windows(truth, short)

    def test_windows_partition(self, small_model, stair_pair):
        trace, truth = stair_pair
        rep = error_windows(truth, rollout(small_model, trace, truth))
        assert rep.n_transient + rep.n_steady == rep.n_samples

    def test_json_roundtrip(self, tmp_path, stair_pair):
        _, truth = stair_pair
        rep = error_windows(truth, truth, experiment="id")
        text = rep.to_json(tmp_path / "rep.json")
        assert '"experiment": "id"' in text


class TestDescent:
    def test_profile_shape(self):
        prof = descent_profile()
        assert prof.duration == pytest.approx(1000.0)
        # braking phase uses all four engines, terminal only the 1/3 pair
        assert np.all(prof.status[2000] == 1.0)
        assert np.array_equal(prof.status[80000], [1, 0, 1, 0])

    def test_profile_within_envelope(self):
        prof = descent_profile()
        on = prof.status > 0
        assert prof.commands[on].min() >= 240.0
        assert prof.commands[on].max() <= 800.0

    def test_plant_survives_profile(self):
        prof = descent_profile()
        truth = simulate(prof, PC)
        remaining = PC.m_module0 - (truth.m_fuel[-1] + truth.m_ox[-1])
        assert remaining > 100.0

    def test_oracle_identity(self, stair_pair):
        # plant replayed against itself: zero error
        trace, truth = stair_pair
        rep = error_windows(truth, truth, experiment="oracle")
        assert rep.max_thrust_err == 0.0 and rep.module_mass_max_err == 0.0

    def test_empty_profile_rejected(self, small_model):
        empty = CommandTrace(dt=PC.dt, commands=np.zeros((0, 4)),
                             status=np.zeros((0, 4)))
        with pytest.raises(ValueError):
            descent_profile_eval(small_model, empty, PC)

    def test_timeseries_csv(self, tmp_path, small_model, stair_pair):
        trace, truth = stair_pair
        pred = rollout(small_model, trace, truth)
        path = tmp_path / "ts.csv"
        timeseries_csv(truth, pred, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[0] == "t"
        assert "To1_pred" in header and "mf_err" in header
        assert len(header) == 1 + 3 * 7
