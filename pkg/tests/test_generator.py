"""Gait synthesis tests.

The blend oracle here evaluates the mixture equations directly with plain
numpy indexing, independent of the kernel-based implementation path.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmg.clips import circular_distance, smooth_boundary
from pmg.generator import (
    CommandVector,
    GaitSession,
    MixtureWeights,
    PhaseState,
    advance_phase,
    blend_dynamic,
    channel_motion,
    generate_schedule,
    magnitude_factor,
    mixture_weights,
    posture_offset,
    read_schedule,
    write_schedule,
    write_trajectory,
)
from pmg.robot import DYNAMIC_CHANNELS


def oracle_sample(clip, phi):
    n = clip.n_frames
    x = (phi % 1.0) * n
    i = int(x) % n
    f = x - int(x)
    return (1 - f) * clip.frames_q[i] + f * clip.frames_q[(i + 1) % n]


def oracle_blend(model, clipset, u_d, phi, eps=1e-6):
    """Direct evaluation of the mixture equations, residual mass to stand."""
    mags = [abs(u) for u in u_d]
    denom = sum(mags) + eps
    w = [m / denom for m in mags]
    q = np.zeros(model.dof)
    rem = 1.0
    for ch, u, wi in zip(DYNAMIC_CHANNELS, u_d, w):
        if wi <= 0:
            continue
        a = min(abs(u) / model.nominal_scales[ch], 1.0)
        clip = clipset.resolve(ch, u)
        q += wi * (a * oracle_sample(clip, phi) + (1 - a) * model.q_stand)
        rem -= wi
    return q + rem * model.q_stand


def make_weights(model, u_d, eps=1e-6):
    w = mixture_weights(u_d, eps)
    alpha = {c: magnitude_factor(u, model.nominal_scales[c]) for c, u in zip(DYNAMIC_CHANNELS, u_d)}
    return MixtureWeights(alpha=alpha, w=dict(zip(DYNAMIC_CHANNELS, w)), beta={}, eps=eps)


class TestMagnitudeFactor:
    def test_zero(self):
        assert magnitude_factor(0.0, 0.5) == 0.0

    def test_nominal(self):
        assert magnitude_factor(0.5, 0.5) == 1.0

    def test_clipped(self):
        assert magnitude_factor(1.0, 0.5) == 1.0

    def test_negative_uses_magnitude(self):
        assert magnitude_factor(-0.25, 0.5) == 0.5

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            magnitude_factor(0.1, 0.0)


class TestMixtureWeights:
    def test_single_channel(self):
        w = mixture_weights((1.0, 0.0, 0.0), 1e-6)
        assert w[0] == pytest.approx(0.999999, abs=1e-5)
        assert w[1] == w[2] == 0.0

    def test_symmetry(self):
        w = mixture_weights((1.0, 1.0, 0.0), 1e-6)
        assert w[0] == pytest.approx(w[1])
        assert w[0] == pytest.approx(0.5, abs=1e-5)

    def test_zero_command(self):
        assert mixture_weights((0.0, 0.0, 0.0), 1e-6) == (0.0, 0.0, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(
        vx=st.floats(-2, 2), vy=st.floats(-2, 2), wz=st.floats(-3, 3),
        eps=st.floats(1e-9, 1e-3),
    )
    def test_sum_strictly_below_one(self, vx, vy, wz, eps):
        w = mixture_weights((vx, vy, wz), eps)
        assert all(x >= 0 for x in w)
        assert sum(w) < 1.0


class TestChannelMotion:
    def test_alpha_zero_is_stand(self, humanoid, clipset):
        q = channel_motion(clipset.dynamic["vx"], 0.0, 0.3, humanoid.q_stand)
        np.testing.assert_array_equal(q, humanoid.q_stand)

    def test_alpha_one_is_clip(self, humanoid, clipset):
        clip = clipset.dynamic["vx"]
        q = channel_motion(clip, 1.0, 0.3, humanoid.q_stand)
        np.testing.assert_allclose(q, oracle_sample(clip, 0.3), atol=1e-14)

    def test_midpoint(self, humanoid, clipset):
        clip = clipset.dynamic["vx"]
        q = channel_motion(clip, 0.5, 0.0, np.zeros(humanoid.dof))
        np.testing.assert_allclose(q, 0.5 * clip.frames_q[0], atol=1e-14)


class TestBlendDynamic:
    def test_one_hot_matches_template(self, humanoid, clipset):
        xbar = humanoid.nominal_scales["vx"]
        u_d = (xbar, 0.0, 0.0)
        res = blend_dynamic(humanoid, clipset, make_weights(humanoid, u_d), u_d, 0.37)
        clip_q = oracle_sample(clipset.dynamic["vx"], 0.37)
        # only the epsilon weight deficit separates the output from the template
        assert np.abs(res.q_d - clip_q).max() <= 2e-6 * max(1.0, np.abs(clip_q).max())

    def test_period_blend_arithmetic(self, humanoid, clipset):
        weights = make_weights(humanoid, (1, 1, 1))
        weights.w = {"vx": 0.5, "vy": 0.0, "wz": 0.5}
        res = blend_dynamic(humanoid, clipset, weights, (1, 0, 1), 0.2)
        expected = 0.5 * clipset.dynamic["vx"].T + 0.5 * clipset.dynamic["wz"].T
        assert res.T_u == pytest.approx(expected, abs=1e-12)

    def test_three_channel_blend_matches_oracle(self, humanoid, clipset):
        rng = np.random.default_rng(11)
        for _ in range(25):
            u_d = tuple(rng.uniform(-1.5, 1.5) * humanoid.nominal_scales[c] for c in DYNAMIC_CHANNELS)
            phi = rng.uniform(0, 1)
            res = blend_dynamic(humanoid, clipset, make_weights(humanoid, u_d), u_d, phi)
            np.testing.assert_allclose(res.q_d, oracle_blend(humanoid, clipset, u_d, phi), atol=1e-12)

    def test_contact_center_circular_mean(self, humanoid, clipset):
        # all fixture windows share centers, so the blend must preserve them
        u_d = (0.3, 0.2, 0.4)
        res = blend_dynamic(humanoid, clipset, make_weights(humanoid, u_d), u_d, 0.1)
        assert res.mu_d["L"] == pytest.approx(0.25, abs=1e-9)
        assert res.mu_d["R"] == pytest.approx(0.75, abs=1e-9)

    def test_contact_center_across_wrap(self, humanoid, clipset):
        # windows on both sides of the wrap: linear averaging would land near
        # 0.5; the circular mean stays at the wrap
        import copy

        cs = copy.deepcopy(clipset)
        cs.dynamic["vx"].contact["L"] = type(cs.dynamic["vx"].contact["L"])(0.95, 0.2)
        cs.dynamic["vy"].contact["L"] = type(cs.dynamic["vy"].contact["L"])(0.05, 0.2)
        u_d = (0.3, 0.2, 0.0)
        weights = make_weights(humanoid, u_d)
        weights.w = {"vx": 0.5, "vy": 0.5, "wz": 0.0}
        res = blend_dynamic(humanoid, cs, weights, u_d, 0.1)
        assert circular_distance(res.mu_d["L"], 0.0) < 0.01


class TestPostureOffset:
    def test_neutral_is_zero(self, humanoid, clipset):
        q_s, beta = posture_offset(clipset, (0.0, 0.0, humanoid.stand_height), humanoid)
        np.testing.assert_array_equal(q_s, np.zeros(humanoid.dof))
        assert all(b == 0.0 for b in beta.values())

    def test_full_squat_endpoint(self, humanoid, clipset):
        lo = humanoid.posture_ranges["height"][0]
        q_s, beta = posture_offset(clipset, (0.0, 0.0, lo), humanoid)
        assert beta["height"] == pytest.approx(1.0)
        expected = clipset.static["height"].sample(lo) - humanoid.q_stand
        np.testing.assert_allclose(q_s, expected, atol=1e-12)

    def test_superposition_of_half_commands(self, humanoid, clipset):
        hi_p = humanoid.posture_ranges["pitch"][1]
        h0 = humanoid.stand_height
        lo_h = humanoid.posture_ranges["height"][0]
        u_pitch = hi_p / 2
        u_height = h0 + (lo_h - h0) / 2
        q_both, _ = posture_offset(clipset, (u_pitch, 0.0, u_height), humanoid)
        q_p, _ = posture_offset(clipset, (u_pitch, 0.0, h0), humanoid)
        q_h, _ = posture_offset(clipset, (0.0, 0.0, u_height), humanoid)
        np.testing.assert_allclose(q_both, q_p + q_h, atol=1e-12)
        # oracle: beta * (template(u) - stand), computed by hand
        beta = 0.5
        expected_p = beta * (clipset.static["pitch"].sample(u_pitch) - humanoid.q_stand)
        np.testing.assert_allclose(q_p, expected_p, atol=1e-12)

    def test_commanded_channel_without_clip_errors(self, humanoid, clipset):
        import copy

        cs = copy.deepcopy(clipset)
        del cs.static["pitch"]
        with pytest.raises(KeyError, match="pitch"):
            posture_offset(cs, (0.2, 0.0, humanoid.stand_height), humanoid)


class TestAdvancePhase:
    def test_wrap(self):
        state = advance_phase(PhaseState(0.95, 1.0), 0.1, 1.0)
        assert state.phi == pytest.approx(0.05)

    def test_small_step(self):
        assert advance_phase(PhaseState(0.0, 1.0), 0.01, 1.0).phi == pytest.approx(0.01)

    def test_half_period_doubles_increment(self):
        assert advance_phase(PhaseState(0.0, 0.5), 0.01, 0.5).phi == pytest.approx(0.02)

    @settings(max_examples=100, deadline=None)
    @given(phi=st.floats(0, 0.999999), dt=st.floats(1e-3, 0.1), T=st.floats(0.1, 5.0))
    def test_stays_in_unit_interval(self, phi, dt, T):
        state = advance_phase(PhaseState(phi, T), dt, T)
        assert 0.0 <= state.phi < 1.0

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            advance_phase(PhaseState(0.0, 1.0), 0.0, 1.0)
        with pytest.raises(ValueError):
            advance_phase(PhaseState(0.0, 1.0), 0.01, 0.0)


class TestSession:
    def test_zero_command_stands_exactly(self, humanoid, clipset):
        session = GaitSession(humanoid, clipset, slew_rate=None, gco=False)
        for _ in range(5):
            frame = session.step(CommandVector())
            np.testing.assert_array_equal(frame.q_ref, humanoid.q_stand)
            assert frame.phi == 0.0  # frozen
        assert np.abs(frame.qd_ref).max() == 0.0

    def test_one_hot_reproduces_template(self, humanoid, clipset):
        xbar = humanoid.nominal_scales["vx"]
        session = GaitSession(humanoid, clipset, dt=0.005, slew_rate=None, gco=False)
        cmd = CommandVector(vx=xbar)
        clip = clipset.dynamic["vx"]
        worst = 0.0
        for _ in range(int(clip.T / 0.005) + 1):
            frame = session.step(cmd)
            expected = oracle_sample(clip, frame.phi)
            worst = max(worst, np.abs(frame.q_ref - expected).max())
        assert worst <= 1e-3

    def test_mixture_matches_composition_oracle(self, humanoid, clipset):
        session = GaitSession(humanoid, clipset, slew_rate=None, gco=False)
        cmd = CommandVector(vx=0.5 * humanoid.nominal_scales["vx"], vy=0.5 * humanoid.nominal_scales["vy"])
        for _ in range(100):
            frame = session.step(cmd)
            expected = oracle_blend(humanoid, clipset, (cmd.vx, cmd.vy, 0.0), frame.phi)
            np.testing.assert_allclose(frame.q_ref, expected, atol=1e-12)

    def test_qd_ref_first_frame_zero_then_differences(self, humanoid, clipset):
        session = GaitSession(humanoid, clipset, slew_rate=None, gco=False)
        cmd = CommandVector(vx=0.3)
        f0 = session.step(cmd)
        assert np.abs(f0.qd_ref).max() == 0.0
        f1 = session.step(cmd)
        np.testing.assert_allclose(f1.qd_ref, (f1.q_ref - f0.q_ref) / session.dt, atol=1e-12)

    def test_determinism_bit_identical(self, humanoid, clipset):
        rng = np.random.default_rng(5)
        cmds = [
            CommandVector(*rng.uniform(-0.4, 0.4, 3), pitch=rng.uniform(-0.1, 0.2))
            for _ in range(60)
        ]
        runs = []
        for _ in range(2):
            session = GaitSession(humanoid, clipset, gco=True)
            runs.append([session.step(c) for c in cmds])
        for a, b in zip(*runs):
            np.testing.assert_array_equal(a.q_ref, b.q_ref)
            np.testing.assert_array_equal(a.qd_ref, b.qd_ref)
            assert a.phi == b.phi
            assert a.u_prime.as_list() == b.u_prime.as_list()

    def test_convex_hull_property(self, humanoid, clipset):
        rng = np.random.default_rng(17)
        session = GaitSession(humanoid, clipset, slew_rate=None, gco=False)
        for _ in range(300):
            u = rng.uniform(-2, 2, 3) * [humanoid.nominal_scales[c] for c in DYNAMIC_CHANNELS]
            frame = session.step(CommandVector(vx=u[0], vy=u[1], wz=u[2]))
            corners = [humanoid.q_stand]
            for ch, val in zip(DYNAMIC_CHANNELS, u):
                if abs(val) > 0:
                    corners.append(oracle_sample(clipset.resolve(ch, val), frame.phi))
            lo = np.min(corners, axis=0) - 1e-6
            hi = np.max(corners, axis=0) + 1e-6
            assert np.all(frame.q_ref >= lo) and np.all(frame.q_ref <= hi)

    def test_continuity_across_phase_wrap(self, humanoid, clipset):
        # smoothed templates -> the reference has no jump at the wrap
        import copy

        cs = copy.deepcopy(clipset)
        for key in cs.dynamic:
            cs.dynamic[key] = smooth_boundary(cs.dynamic[key], 3.0)
        session = GaitSession(humanoid, cs, dt=0.005, slew_rate=None, gco=False)
        cmd = CommandVector(vx=0.4, vy=0.1)
        frames = [session.step(cmd) for _ in range(400)]
        steps = [
            (np.abs(b.q_ref - a.q_ref).max(), a.phi, b.phi)
            for a, b in zip(frames[1:-1], frames[2:])
        ]
        wrap_steps = [s for s, pa, pb in steps if pb < pa]
        in_cycle = [s for s, pa, pb in steps if pb >= pa]
        assert wrap_steps, "test must cover the wrap"
        assert max(wrap_steps) <= 1.5 * max(in_cycle)

    def test_lipschitz_in_command(self, humanoid, clipset):
        session = GaitSession(humanoid, clipset, slew_rate=None, gco=False)
        session.step(CommandVector(vx=0.30))
        bound = sum(
            np.abs(clipset.dynamic[c].frames_q - humanoid.q_stand).max() / humanoid.nominal_scales[c]
            for c in DYNAMIC_CHANNELS
        )
        a = GaitSession(humanoid, clipset, slew_rate=None, gco=False)
        b = GaitSession(humanoid, clipset, slew_rate=None, gco=False)
        fa = a.step(CommandVector(vx=0.30))
        fb = b.step(CommandVector(vx=0.31))
        assert np.abs(fa.q_ref - fb.q_ref).max() <= bound * 0.01 + 1e-9

    def test_slew_limits_step_commands(self, humanoid, clipset):
        session = GaitSession(humanoid, clipset, dt=0.01, slew_rate=2.0, gco=False)
        frame = session.step(CommandVector(vx=0.6))
        assert frame.u_cmd.vx == pytest.approx(0.02)  # 2.0 units/s * 0.01 s
        frame = session.step(CommandVector(vx=0.6))
        assert frame.u_cmd.vx == pytest.approx(0.04)

    def test_commands_clamped_to_model_ranges(self, humanoid, clipset):
        session = GaitSession(humanoid, clipset, slew_rate=None, gco=False)
        frame = session.step(CommandVector(vx=99.0, pitch=99.0))
        assert frame.u_cmd.vx == pytest.approx(2 * humanoid.nominal_scales["vx"])
        assert frame.u_cmd.pitch == pytest.approx(humanoid.posture_ranges["pitch"][1])

    def test_phase_frozen_only_at_zero_command(self, humanoid, clipset):
        session = GaitSession(humanoid, clipset, slew_rate=None, gco=False)
        f1 = session.step(CommandVector(vx=0.3))
        f2 = session.step(CommandVector(vx=0.3))
        assert f2.phi > f1.phi

    def test_dt_bounds(self, humanoid, clipset):
        with pytest.raises(ValueError, match="dt"):
            GaitSession(humanoid, clipset, dt=0.5)


class TestBatch:
    def test_schedule_round_trip(self, tmp_path):
        rows = np.array([[0.0, 0.1, 0, 0, 0, 0, 0.8], [1.0, 0.2, 0, 0, 0, 0, 0.8]])
        path = tmp_path / "sched.csv"
        write_schedule(rows, path)
        np.testing.assert_array_equal(read_schedule(path), rows)

    def test_zero_order_hold(self, humanoid, clipset):
        h0 = humanoid.stand_height
        schedule = np.array(
            [[0.0, 0.0, 0, 0, 0, 0, h0], [0.05, 0.3, 0, 0, 0, 0, h0], [0.1, 0.0, 0, 0, 0, 0, h0]]
        )
        session = GaitSession(humanoid, clipset, dt=0.01, slew_rate=None, gco=False)
        frames = generate_schedule(session, schedule)
        assert len(frames) == 11
        assert frames[0].u_cmd.vx == 0.0
        assert frames[4].u_cmd.vx == 0.0
        assert frames[5].u_cmd.vx == pytest.approx(0.3)
        assert frames[9].u_cmd.vx == pytest.approx(0.3)
        assert frames[10].u_cmd.vx == 0.0

    def test_trajectory_file_layout(self, tmp_path, humanoid, clipset):
        session = GaitSession(humanoid, clipset, slew_rate=None, gco=False)
        frames = [session.step(CommandVector(vx=0.3)) for _ in range(20)]
        path = tmp_path / "traj.csv"
        write_trajectory(frames, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[:2] == ["t", "phi"]
        assert header[-2:] == ["contact_l", "contact_r"]
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert data.shape == (20, 2 + 2 * humanoid.dof + 2)
        np.testing.assert_array_equal(data[:, 2 : 2 + humanoid.dof], [f.q_ref for f in frames])
