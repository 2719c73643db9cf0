import numpy as np
import pytest

import magicarp.shooting as shooting
from magicarp.propagation import PulseSchedule
from magicarp.qudit import AdjointMatrix, nearest_neighbor_control_set, target_gate
from magicarp.shooting import (
    DegenerateEnvelopeError,
    GradientProbeError,
    MagicarpConfig,
    ShootingContext,
    adjoint_from_dict,
    adjoint_to_dict,
    batch_objective,
    gradient,
    initial_coeffs,
    objective,
    optimality_certificate,
    optimize,
    pulses_from_adjoint,
    report_to_dict,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def context(d=2, target="hadamard", mode="energy_optimal", n_steps=32, **kw):
    return ShootingContext(
        controls=nearest_neighbor_control_set(d),
        target=target_gate(target, d),
        config=MagicarpConfig(mode=mode, n_steps=n_steps, **kw),
    )


def coeffs_from_matrix(m, d=2):
    return AdjointMatrix.from_matrix(m).coeffs


class TestPulsesFromAdjoint:
    def test_zero_adjoint_gives_identity(self):
        ctrl = nearest_neighbor_control_set(2)
        g = AdjointMatrix(2, np.zeros(3))
        schedule, res = pulses_from_adjoint(g, ctrl, 16, "energy_optimal")
        assert np.all(schedule.amplitudes == 0.0)
        assert np.allclose(res.final, np.eye(2), atol=1e-15)
        assert res.duration == 0.0

    def test_initial_amplitudes_from_trace_pairing(self):
        # g = sigma_x picks out u_x(0) = 1, u_y(0) = 0
        ctrl = nearest_neighbor_control_set(2)
        g = AdjointMatrix.from_matrix(SX)
        schedule, _ = pulses_from_adjoint(g, ctrl, 8, "energy_optimal")
        assert schedule.amplitudes[0, 0] == pytest.approx(1.0, abs=1e-14)
        assert schedule.amplitudes[0, 1] == pytest.approx(0.0, abs=1e-14)

    def test_uncontrolled_adjoint_gives_zero_pulse(self):
        # g along sigma_z is trace-orthogonal to both controls and stays so
        ctrl = nearest_neighbor_control_set(2)
        g = AdjointMatrix.from_matrix(1.7 * SZ)
        schedule, res = pulses_from_adjoint(g, ctrl, 64, "energy_optimal")
        assert np.max(np.abs(schedule.amplitudes)) <= 1e-14
        assert np.allclose(res.final, np.eye(2), atol=1e-13)

    def test_renormalized_mode_rejects_degenerate_envelope(self):
        ctrl = nearest_neighbor_control_set(2)
        g = AdjointMatrix.from_matrix(1.7 * SZ)
        with pytest.raises(DegenerateEnvelopeError):
            pulses_from_adjoint(g, ctrl, 16, "time_optimal_renormalized")

    def test_renormalized_mode_has_constant_envelope(self, rng):
        ctrl = nearest_neighbor_control_set(3)
        g = AdjointMatrix(3, rng.standard_normal(8))
        schedule, res = pulses_from_adjoint(g, ctrl, 64, "time_optimal_renormalized")
        env = schedule.envelope
        assert np.max(np.abs(env - env[0])) <= 1e-12 * env[0]
        # initial step keeps the raw structural amplitudes
        v0 = 0.5 * np.einsum("ij,kji->k", g.to_matrix(), ctrl.hamiltonians).real
        assert np.allclose(schedule.amplitudes[0], v0, atol=1e-15)
        assert res.duration == pytest.approx(env[0], rel=1e-12)

    def test_modes_share_initial_step(self, rng):
        ctrl = nearest_neighbor_control_set(2)
        g = AdjointMatrix(2, rng.standard_normal(3))
        s_energy, _ = pulses_from_adjoint(g, ctrl, 8, "energy_optimal")
        s_renorm, _ = pulses_from_adjoint(g, ctrl, 8, "time_optimal_renormalized")
        assert np.array_equal(s_energy.amplitudes[0], s_renorm.amplitudes[0])

    def test_initial_amplitude_scaling_covariance(self, rng):
        # energy mode: u(0) is exactly linear in g
        ctrl = nearest_neighbor_control_set(2)
        c = rng.standard_normal(3)
        s = 3.7
        a1, _ = pulses_from_adjoint(AdjointMatrix(2, c), ctrl, 8, "energy_optimal")
        a2, _ = pulses_from_adjoint(AdjointMatrix(2, s * c), ctrl, 8, "energy_optimal")
        assert np.allclose(a2.amplitudes[0], s * a1.amplitudes[0], rtol=1e-13)

    def test_dimension_mismatch(self):
        ctrl = nearest_neighbor_control_set(3)
        with pytest.raises(ValueError):
            pulses_from_adjoint(AdjointMatrix(2, np.zeros(3)), ctrl, 8)


class TestObjective:
    def test_identity_target_zero_adjoint(self):
        assert objective(np.zeros(3), context(target="identity")) == 0.0

    def test_hadamard_zero_adjoint(self):
        # U stays identity and the Hadamard is traceless: 1 - |Tr H|^2/4 = 1
        assert objective(np.zeros(3), context(target="hadamard")) == pytest.approx(1.0, abs=1e-15)

    def test_deterministic(self, rng):
        ctx = context(d=3, target="qft")
        x = rng.standard_normal(8)
        assert objective(x, ctx) == objective(x, ctx)

    def test_batch_matches_scalar(self, rng):
        ctx = context(d=2, target="qft", mode="time_optimal_renormalized")
        xs = rng.standard_normal((5, 3))
        batch = batch_objective(xs, ctx)
        for i in range(5):
            assert batch[i] == objective(xs[i], ctx)

    def test_degenerate_envelope_raises(self):
        ctx = context(mode="time_optimal_renormalized")
        with pytest.raises(DegenerateEnvelopeError):
            objective(coeffs_from_matrix(SZ), ctx)


class TestGradient:
    def test_zero_at_global_minimum(self):
        g = gradient(np.zeros(3), context(target="identity"))
        assert np.allclose(g, 0.0, atol=1e-10)

    def test_output_dimension_is_d_squared_minus_one(self):
        for d in (2, 3):
            ctx = context(d=d, target="qft", n_steps=8)
            g = gradient(np.full(d * d - 1, 0.3), ctx)
            assert g.shape == (d * d - 1,)
        assert gradient(np.full(3, 0.3), context(n_steps=8)).shape == (3,)

    def test_matches_forward_differences(self, rng):
        ctx = context(d=2, target="qft", n_steps=16)
        x = rng.standard_normal(3)
        h = 1e-5
        central = gradient(x, ctx, step=h)
        forward = np.array(
            [
                (objective(x + h * e, ctx) - objective(x, ctx)) / h
                for e in np.eye(3)
            ]
        )
        assert np.linalg.norm(central - forward) <= 10 * h * max(np.linalg.norm(central), 1.0)

    @pytest.mark.parametrize("d,h", [(2, 1e-2), (2, 1e-3), (3, 1e-2), (3, 1e-3)])
    def test_five_point_stencil_consistency(self, d, h, rng):
        ctx = context(d=d, target="qft", n_steps=16)
        m = d * d - 1
        x = rng.standard_normal(m)
        eye = np.eye(m)
        probes = np.vstack([x + h * eye, x - h * eye, x + 2 * h * eye, x - 2 * h * eye])
        v = batch_objective(probes, ctx)
        f1, f_1, f2, f_2 = v[:m], v[m : 2 * m], v[2 * m : 3 * m], v[3 * m :]
        central = (f1 - f_1) / (2 * h)
        five_point = (-f2 + 8 * f1 - 8 * f_1 + f_2) / (12 * h)
        rel = np.linalg.norm(central - five_point) / np.linalg.norm(five_point)
        assert rel <= 10 * h * h

    def test_exactly_2m_objective_evaluations(self, monkeypatch):
        calls = []
        real = shooting.batch_objective

        def spy(xs, ctx):
            calls.append(np.atleast_2d(xs).shape[0])
            return real(xs, ctx)

        monkeypatch.setattr(shooting, "batch_objective", spy)
        ctx = context(d=3, target="qft", n_steps=8)
        gradient(np.full(8, 0.2), ctx)
        assert calls == [2 * 8]

    def test_non_finite_probe_raises_with_coeffs(self, monkeypatch):
        ctx = context(d=2, n_steps=8)

        def bad(xs, _ctx):
            values = np.zeros(np.atleast_2d(xs).shape[0])
            values[3] = np.inf
            return values

        monkeypatch.setattr(shooting, "batch_objective", bad)
        with pytest.raises(GradientProbeError) as err:
            gradient(np.zeros(3), ctx)
        assert err.value.coeffs.shape == (3,)


class TestOptimize:
    def test_identity_target_converges(self):
        report = optimize(context(target="identity", n_steps=16, seed=11))
        assert report.converged
        assert report.infidelity <= 1e-7

    def test_parameter_count_contract(self):
        for d in (2, 3, 4, 5, 6):
            cfg = MagicarpConfig(seed=1)
            assert initial_coeffs(cfg, d * d - 1).shape == (d * d - 1,)
        report = optimize(context(target="identity", n_steps=8, seed=2))
        assert report.final_g.coeffs.shape == (3,)

    def test_same_seed_bitwise_identical_trace(self):
        ctx = context(d=2, target="qft", n_steps=32, seed=97, max_iters=60)
        r1, r2 = optimize(ctx), optimize(ctx)
        assert r1.cost_trace == r2.cost_trace
        assert np.array_equal(r1.final_g.coeffs, r2.final_g.coeffs)
        assert r1.infidelity == r2.infidelity

    def test_trace_monotone_and_infidelity_is_last(self):
        report = optimize(context(d=2, target="qft", n_steps=32, seed=5, max_iters=80))
        assert np.all(np.diff(report.cost_trace) <= 0)
        assert report.infidelity == report.cost_trace[-1]

    def test_explicit_init(self):
        ctx = context(
            target="identity",
            n_steps=8,
            init="explicit",
            init_coeffs=(0.1, -0.2, 0.05),
            max_iters=50,
        )
        report = optimize(ctx)
        assert report.converged

    def test_explicit_init_wrong_length(self):
        with pytest.raises(ValueError):
            optimize(context(target="identity", init="explicit", init_coeffs=(0.1, 0.2)))


class TestCertificate:
    def test_renormalized_self_consistency(self):
        # adjoint inside the control span keeps the renormalization factors
        # at one, so the fit must be essentially exact and proportional to g
        ctrl = nearest_neighbor_control_set(2)
        g = AdjointMatrix.from_matrix(1.3 * SX - 0.6 * SY)
        schedule, _ = pulses_from_adjoint(g, ctrl, 64, "time_optimal_renormalized")
        cert = optimality_certificate(schedule, ctrl)
        assert cert.residual <= 1e-6
        ratio = cert.g_fit.coeffs[:2] / g.coeffs[:2]
        assert ratio[0] == pytest.approx(ratio[1], rel=1e-8)

    def test_single_step_schedule_fits_exactly(self, rng):
        ctrl = nearest_neighbor_control_set(2)
        schedule = PulseSchedule.from_amplitudes(rng.standard_normal((1, 2)))
        cert = optimality_certificate(schedule, ctrl)
        assert cert.residual <= 1e-12

    def test_constant_pulse_certifies(self, rng):
        ctrl = nearest_neighbor_control_set(2)
        amps = np.tile(rng.standard_normal(2), (32, 1))
        cert = optimality_certificate(PulseSchedule.from_amplitudes(amps), ctrl)
        assert cert.residual <= 1e-10

    def test_random_schedule_does_not_certify(self, rng):
        ctrl = nearest_neighbor_control_set(2)
        schedule = PulseSchedule.from_amplitudes(rng.standard_normal((32, 2)) * 2.0)
        cert = optimality_certificate(schedule, ctrl)
        assert cert.residual > 1e-3

    def test_all_zero_schedule_rejected(self):
        ctrl = nearest_neighbor_control_set(2)
        with pytest.raises(ValueError):
            optimality_certificate(PulseSchedule.from_amplitudes(np.zeros((8, 2))), ctrl)

    def test_zero_envelope_steps_excluded_and_counted(self, rng):
        ctrl = nearest_neighbor_control_set(2)
        amps = np.tile(rng.standard_normal(2), (8, 1))
        amps[3] = 0.0
        cert = optimality_certificate(PulseSchedule.from_amplitudes(amps), ctrl)
        assert cert.n_excluded == 1


class TestSerialization:
    def test_adjoint_json_round_trip(self, rng):
        g = AdjointMatrix(3, rng.standard_normal(8))
        back = adjoint_from_dict(adjoint_to_dict(g))
        assert back.dim == 3
        assert np.array_equal(back.coeffs, g.coeffs)

    def test_adjoint_rejects_unknown_basis(self):
        with pytest.raises(ValueError):
            adjoint_from_dict({"dim": 2, "basis": "pauli", "coeffs": [1, 2, 3]})

    def test_report_dict_shape(self):
        report = optimize(context(target="identity", n_steps=8, seed=3, max_iters=30))
        data = report_to_dict(report)
        assert set(data) == {
            "final_g",
            "final_schedule",
            "infidelity",
            "duration",
            "cost_trace",
            "iterations",
            "converged",
            "seed",
            "wall_time",
        }
        assert data["wall_time"] is None
        assert data["final_g"]["basis"] == "gell-mann"
        assert len(data["final_schedule"]["amplitudes"]) == 8


class TestConfigValidation:
    def test_bad_mode(self):
        with pytest.raises(ValueError):
            MagicarpConfig(mode="bolza")

    def test_bad_steps(self):
        with pytest.raises(ValueError):
            MagicarpConfig(n_steps=0)

    def test_explicit_requires_coeffs(self):
        with pytest.raises(ValueError):
            MagicarpConfig(init="explicit")
