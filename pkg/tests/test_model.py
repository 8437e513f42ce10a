import json

import numpy as np
import pytest

from sparse_observer import model
from sparse_observer.model import (LtiPlant, NormWeights, PrecisionVector,
                                   StructureError, apply_weights,
                                   build_error_system, check_detectability,
                                   load_f16, load_plant, restrict_sensors)


def scalar_plant():
    return LtiPlant(
        A=[[-1.0]], B_u=np.zeros((1, 1)), B_d=[[1.0]], C_y=[[1.0]],
        C_z=[[1.0]], D_u=np.zeros((1, 1)), D_d=[[0.0]], S_d=[[1.0]])


@pytest.fixture(scope="module")
def f16_raw():
    plant, weights, meta = load_f16(normalized=False)
    return plant, weights, meta


class TestLoadF16:
    def test_appendix_literals_exact(self, f16_raw):
        plant, weights, meta = f16_raw
        assert plant.A[0, 0] == -1.8969e-02
        assert plant.A[1, 0] == -6.4397e-05
        assert plant.A[0, 2] == -32.17
        assert plant.C_y[1, 1] == -1.6176e+03
        assert plant.C_y[4, 0] == 1.7578
        assert plant.B_u[0, 1] == 6.6374e-01
        # disturbance columns are the elevator columns of B_u / D_u
        assert np.array_equal(plant.B_d[:, 0], plant.B_u[:, 1])
        assert np.array_equal(plant.D_d[:, 0], plant.D_u[:, 1])
        assert np.array_equal(plant.C_z, np.eye(4))
        assert np.array_equal(plant.S_d, np.eye(1))
        assert plant.sensor_names == ("udot", "wdot", "alpha", "q", "qbar")
        assert meta["trim_velocity_ftps"] == 1000.0

    def test_weights_match_appendix(self, f16_raw):
        _, weights, _ = f16_raw
        assert np.array_equal(np.diag(weights.W_u), [500.0, 5.0])
        assert np.array_equal(np.diag(weights.W_w),
                              [0.5, 1.0, 1.0, 1.0, 1.0, 1.0])
        wz = np.diag(weights.W_z)
        assert wz[0] == 0.01
        assert np.isclose(wz[1], 180.0 / (5 * np.pi))
        assert np.isclose(wz[3], 180.0 / (2 * np.pi))

    def test_open_loop_stable_and_detectable(self, f16_raw):
        plant, _, _ = f16_raw
        assert np.max(np.linalg.eigvals(plant.A).real) < 0
        check_detectability(plant)


class TestApplyWeights:
    def test_identity_weights_noop(self, f16_raw):
        plant, _, _ = f16_raw
        w = NormWeights(W_u=np.eye(2), W_w=np.eye(6), W_z=np.eye(4))
        out = apply_weights(plant, w)
        for name in ("A", "B_u", "B_d", "C_y", "C_z", "D_u", "D_d"):
            assert np.array_equal(getattr(out, name), getattr(plant, name))

    def test_output_scaling(self, f16_raw):
        plant, _, _ = f16_raw
        w = NormWeights(W_u=np.eye(2), W_w=np.eye(6), W_z=2.0 * np.eye(4))
        out = apply_weights(plant, w)
        assert np.allclose(out.C_z, 2.0 * plant.C_z)

    def test_f16_normalization(self, f16_raw):
        plant, weights, _ = f16_raw
        out = apply_weights(plant, weights)
        assert np.allclose(out.B_d, 0.5 * plant.B_d)
        assert np.allclose(out.D_d, 0.5 * plant.D_d)
        assert np.allclose(out.B_u, plant.B_u @ weights.W_u)
        assert np.allclose(out.D_u, plant.D_u @ weights.W_u)
        assert np.allclose(out.C_z, weights.W_z)
        # original untouched
        assert plant.C_z[0, 0] == 1.0

    def test_composition_matches_product(self, f16_raw):
        plant, _, _ = f16_raw
        w1 = NormWeights(W_u=2 * np.eye(2), W_w=np.diag([0.5, 1, 1, 1, 1, 1]),
                         W_z=3 * np.eye(4))
        w2 = NormWeights(W_u=0.5 * np.eye(2), W_w=np.diag([4, 1, 1, 1, 1, 1]),
                         W_z=np.diag([1, 2, 1, 1.0]))
        seq = apply_weights(apply_weights(plant, w1), w2)
        combined = NormWeights(W_u=w1.W_u @ w2.W_u, W_w=w1.W_w @ w2.W_w,
                               W_z=w2.W_z @ w1.W_z)
        once = apply_weights(plant, combined)
        for name in ("B_u", "B_d", "C_z", "D_u", "D_d"):
            assert np.allclose(getattr(seq, name), getattr(once, name))

    def test_sensor_block_must_be_identity(self, f16_raw):
        plant, _, _ = f16_raw
        w = NormWeights(W_u=np.eye(2), W_w=np.diag([1, 2, 1, 1, 1, 1.0]),
                        W_z=np.eye(4))
        with pytest.raises(StructureError, match="identity"):
            apply_weights(plant, w)

    def test_singular_weight_rejected(self):
        with pytest.raises(ValueError, match="singular"):
            NormWeights(W_u=np.zeros((2, 2)), W_w=np.eye(6), W_z=np.eye(4))

    def test_missized_weight_rejected(self, f16_raw):
        plant, _, _ = f16_raw
        w = NormWeights(W_u=np.eye(3), W_w=np.eye(6), W_z=np.eye(4))
        with pytest.raises(ValueError, match="W_u"):
            apply_weights(plant, w)


class TestErrorSystem:
    def test_zero_gain(self, f16_raw):
        plant, _, _ = f16_raw
        ny = plant.n_sensors
        prec = PrecisionVector(np.ones(ny), tuple(range(ny)))
        sys = build_error_system(plant, np.zeros((4, ny)), prec)
        assert np.array_equal(sys.A_cl, plant.A)
        assert np.allclose(sys.B_cl[:, :1], plant.B_d @ plant.S_d)
        assert np.allclose(sys.B_cl[:, 1:], 0.0)

    def test_scalar_substitution(self):
        plant = scalar_plant()
        prec = PrecisionVector(np.array([1.0]), (0,))
        sys = build_error_system(plant, np.array([[-1.0]]), prec)
        assert np.isclose(sys.A_cl[0, 0], -2.0)
        assert np.isclose(sys.B_cl[0, 1], -1.0)   # noise column L / kappa

    def test_large_precision_kills_noise_column(self):
        plant = scalar_plant()
        prec = PrecisionVector(np.array([1e12]), (0,))
        sys = build_error_system(plant, np.array([[-1.0]]), prec)
        assert abs(sys.B_cl[0, 1]) <= 1e-5

    def test_gain_on_removed_sensor_rejected(self, f16_raw):
        plant, _, _ = f16_raw
        prec = PrecisionVector(np.array([0.0, 1.0, 0.0, 0.0, 1.0]), (1, 4))
        L = np.zeros((4, 5))
        L[0, 0] = 0.5   # sensor 0 is removed
        with pytest.raises(StructureError, match="removed"):
            build_error_system(plant, L, prec)

    def test_noise_channels_restricted_to_support(self, f16_raw):
        plant, _, _ = f16_raw
        prec = PrecisionVector(np.array([0.0, 4.0, 0.0, 0.0, 1.0]), (1, 4))
        L = np.zeros((4, 5))
        L[:, 1] = 1.0
        L[:, 4] = 2.0
        sys = build_error_system(plant, L, prec)
        assert sys.B_cl.shape == (4, 1 + 2)
        assert np.allclose(sys.B_cl[:, 1], L[:, 1] / 2.0)
        assert np.allclose(sys.B_cl[:, 2], L[:, 4] / 1.0)


class TestDetectability:
    def test_undetectable_unstable_mode(self):
        plant = LtiPlant(
            A=np.diag([1.0, -1.0]), B_u=np.zeros((2, 1)), B_d=np.ones((2, 1)),
            C_y=np.array([[0.0, 1.0]]), C_z=np.eye(2), D_u=np.zeros((1, 1)),
            D_d=np.zeros((1, 1)), S_d=np.eye(1))
        with pytest.raises(model.NotDetectableError):
            check_detectability(plant)

    def test_stable_plant_always_passes(self):
        check_detectability(scalar_plant())


class TestRestrictSensors:
    def test_rows_subset(self, f16_raw):
        plant, _, _ = f16_raw
        red = restrict_sensors(plant, (1, 4))
        assert red.n_sensors == 2
        assert np.array_equal(red.C_y, plant.C_y[[1, 4], :])
        assert np.array_equal(red.D_d, plant.D_d[[1, 4], :])
        assert red.sensor_names == ("wdot", "qbar")

    def test_out_of_range(self, f16_raw):
        plant, _, _ = f16_raw
        with pytest.raises(ValueError):
            restrict_sensors(plant, (9,))


class TestPrecisionVector:
    def test_threshold_support(self):
        p = PrecisionVector.from_values([1e-9, 10.0, 0.0, 2.0], 1e-6)
        assert p.support == (1, 3)
        assert p.n_active == 2

    def test_all_zero(self):
        assert PrecisionVector.from_values(np.zeros(3)).support == ()

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            PrecisionVector(np.array([-1.0]), ())


class TestLoadPlant:
    def test_malformed_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ValueError, match="malformed"):
            load_plant(bad)

    def test_missing_fields(self, tmp_path):
        bad = tmp_path / "missing.json"
        bad.write_text(json.dumps({"A": [[1.0]]}))
        with pytest.raises(ValueError, match="missing"):
            load_plant(bad)

    def test_roundtrip_minimal(self, tmp_path):
        f = tmp_path / "m.json"
        f.write_text(json.dumps({
            "A": [[-1.0]], "B_u": [[0.0]], "B_d": [[1.0]], "C_y": [[1.0]],
            "C_z": [[1.0]], "D_u": [[0.0]], "D_d": [[0.0]],
        }))
        plant, weights, meta = load_plant(f)
        assert plant.n_states == 1
        assert weights is None
        assert np.array_equal(plant.S_d, np.eye(1))


def test_plant_dimension_validation():
    with pytest.raises(ValueError, match="C_y"):
        LtiPlant(A=np.eye(2) * -1, B_u=np.zeros((2, 1)), B_d=np.zeros((2, 1)),
                 C_y=np.zeros((1, 3)), C_z=np.eye(2), D_u=np.zeros((1, 1)),
                 D_d=np.zeros((1, 1)), S_d=np.eye(1))
    with pytest.raises(ValueError, match="diagonal"):
        LtiPlant(A=-np.eye(1), B_u=np.zeros((1, 2)), B_d=np.zeros((1, 2)),
                 C_y=np.ones((1, 1)), C_z=np.eye(1), D_u=np.zeros((1, 2)),
                 D_d=np.zeros((1, 2)), S_d=np.array([[1.0, 0.5], [0.0, 1.0]]))
