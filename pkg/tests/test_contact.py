import numpy as np
import pytest

from graspdiff.contact import (
    contact_labels_from_geometry,
    contact_labels_from_kappa,
    contact_segments,
    export_labels_csv,
    interaction_loss,
    interaction_loss_grad,
    interaction_weights,
    recon_loss,
    recon_loss_grad,
)


class TestLabelsFromGeometry:
    def test_far_hand_no_contact(self, rng):
        hand = rng.normal(size=(1, 10, 3)) * 0.01 + np.array([1.0, 0, 0])
        obj = rng.normal(size=(1, 50, 3)) * 0.01
        tau = contact_labels_from_geometry(hand, hand + 0.01, obj)
        assert tau.tolist() == [[0, 0]]

    def test_three_mm_contact(self):
        # closest vertex at 3 mm -> contact at the 5 mm threshold
        hand_l = np.array([[[0.003, 0, 0]]])
        hand_r = np.array([[[1.0, 0, 0]]])
        obj = np.zeros((1, 1, 3))
        tau = contact_labels_from_geometry(hand_l, hand_r, obj)
        assert tau.tolist() == [[1, 0]]

    def test_matches_exhaustive_pairwise_oracle(self, rng):
        T, vh, vo = 6, 12, 40
        hl = rng.normal(0, 0.05, (T, vh, 3))
        hr = rng.normal(0, 0.05, (T, vh, 3))
        obj = rng.normal(0, 0.05, (T, vo, 3))
        thr = 0.03
        tau = contact_labels_from_geometry(hl, hr, obj, threshold=thr)
        for t in range(T):
            for hand, hv in ((0, hl), (1, hr)):
                d = np.linalg.norm(hv[t][:, None, :] - obj[t][None], axis=-1)
                assert tau[t, hand] == int(d.min() < thr)


class TestLabelsFromKappa:
    def test_left_contact(self):
        kappa = np.array([[0.05, 0, 0, 0.5, 0, 0]])
        assert contact_labels_from_kappa(kappa, 0.12).tolist() == [[1, 0]]

    def test_boundary_is_exclusive(self):
        kappa = np.array([[0.12, 0, 0, 0.119999, 0, 0]])
        assert contact_labels_from_kappa(kappa, 0.12).tolist() == [[0, 1]]

    def test_threshold_sweep_is_step_function(self, rng):
        kappa = rng.normal(size=(1, 6))
        norm_l = np.linalg.norm(kappa[0, :3])
        for thr in np.linspace(norm_l * 0.5, norm_l * 1.5, 21):
            expect = int(norm_l < thr)
            assert contact_labels_from_kappa(kappa, thr)[0, 0] == expect


class TestSegments:
    @pytest.mark.parametrize("labels,expected", [
        ([0, 0, 0], []),
        ([1, 1, 1], [(0, 2)]),
        ([0, 1, 1, 0, 1], [(1, 2), (4, 4)]),
        ([1, 0, 1], [(0, 0), (2, 2)]),
    ])
    def test_maximal_runs(self, labels, expected):
        assert contact_segments(np.array(labels)) == expected


class TestReconLoss:
    def _zeros(self, T=4, K=3):
        j = np.zeros((T, K, 3))
        v = np.zeros((T, 3))
        return j, v

    def test_perfect_prediction_is_zero(self, rng):
        j = rng.normal(size=(4, 3, 3))
        v = rng.normal(size=(4, 3))
        tau = np.ones((4, 2))
        assert recon_loss(j, j, j, j, v, v, v, v, tau) == 0.0

    def test_no_contact_masks_all_error(self, rng):
        j = rng.normal(size=(4, 3, 3))
        v = rng.normal(size=(4, 3))
        tau = np.zeros((4, 2))
        assert recon_loss(j + 1, j - 1, j, j, v + 2, v, v, v, tau) == 0.0

    def test_toy_hand_computation(self):
        # single frame, left contact only, 3-joint hand with uniform 1 cm
        # error, wrist off by 2 cm, lambda = 1:
        # loss = sqrt(3 * 0.01^2) + 0.02 = 0.01 * sqrt(3) + 0.02
        T, K = 1, 3
        j_gt = np.zeros((T, K, 3))
        j_hat = j_gt + np.array([0.01, 0, 0])
        v_gt = np.zeros((T, 3))
        v_hat = v_gt + np.array([0, 0.02, 0])
        tau = np.array([[1, 0]])
        loss = recon_loss(j_hat, j_gt + 9.9, j_gt, j_gt, v_hat, v_gt + 9.9,
                          v_gt, v_gt, tau, lambda_wrist=1.0)
        assert np.isclose(loss, 0.01 * np.sqrt(3) + 0.02)

    def test_gradients_match_finite_differences(self, rng):
        T, K = 3, 4
        j_l, j_r = rng.normal(size=(2, T, K, 3))
        v_l, v_r = rng.normal(size=(2, T, 3))
        jh_l, jh_r = j_l + rng.normal(0, 0.1, (T, K, 3)), j_r + rng.normal(0, 0.1, (T, K, 3))
        vh_l, vh_r = v_l + rng.normal(0, 0.1, (T, 3)), v_r + rng.normal(0, 0.1, (T, 3))
        tau = rng.integers(0, 2, (T, 2))
        loss, (gjl, gjr, gvl, gvr) = recon_loss_grad(jh_l, jh_r, j_l, j_r,
                                                     vh_l, vh_r, v_l, v_r, tau)
        h = 1e-6
        for arr, grad in ((jh_l, gjl), (jh_r, gjr), (vh_l, gvl), (vh_r, gvr)):
            flat = arr.reshape(-1)
            for idx in rng.choice(flat.size, size=5, replace=False):
                old = flat[idx]
                flat[idx] = old + h
                lp = recon_loss(jh_l, jh_r, j_l, j_r, vh_l, vh_r, v_l, v_r, tau)
                flat[idx] = old - h
                lm = recon_loss(jh_l, jh_r, j_l, j_r, vh_l, vh_r, v_l, v_r, tau)
                flat[idx] = old
                fd = (lp - lm) / (2 * h)
                assert abs(grad.reshape(-1)[idx] - fd) <= 1e-3 * max(abs(fd), 1e-5)


class TestInteraction:
    def test_weight_closed_forms(self):
        joints = np.zeros((1, 1, 3))
        centroid = np.zeros((1, 3))
        assert interaction_weights(joints, centroid, np.array([1.0]))[0, 0] == 1.0
        assert interaction_weights(joints, centroid, np.array([0.0]))[0, 0] == 0.0
        joints = np.array([[[0.1, 0, 0]]])
        w = interaction_weights(joints, centroid, np.array([1.0]), alpha=10.0)
        assert np.isclose(w[0, 0], np.exp(-1.0), atol=1e-4)

    def test_weights_monotone_in_distance(self, rng):
        d = np.sort(rng.uniform(0, 0.5, 16))
        joints = np.zeros((1, 16, 3))
        joints[0, :, 0] = d
        w = interaction_weights(joints, np.zeros((1, 3)), np.array([1.0]))
        assert np.all(np.diff(w[0]) < 0)
        assert np.all((w >= 0) & (w <= 1))

    def test_loss_zero_for_exact_prediction(self, rng):
        j = rng.normal(size=(3, 5, 3))
        c = rng.normal(size=(3, 3))
        w = rng.uniform(0, 1, (3, 5))
        assert interaction_loss(j, j, c, w) == 0.0

    def test_single_joint_radial_offset(self):
        # predicted joint 1 cm farther from the centroid, weight 1 -> 0.01
        c = np.zeros((1, 3))
        j = np.array([[[0.1, 0, 0]]])
        jh = np.array([[[0.11, 0, 0]]])
        w = np.ones((1, 1))
        assert np.isclose(interaction_loss(jh, j, c, w), 0.01)

    def test_matches_naive_scalar_recomputation(self, rng):
        T, K = 4, 6
        j = rng.normal(size=(T, K, 3))
        jh = j + rng.normal(0, 0.05, (T, K, 3))
        c = rng.normal(size=(T, 3))
        w = rng.uniform(0, 1, (T, K))
        expected = 0.0
        for t in range(T):
            for k in range(K):
                dh = np.linalg.norm(jh[t, k] - c[t])
                dg = np.linalg.norm(j[t, k] - c[t])
                expected += w[t, k] * abs(dh - dg)
        expected /= T
        assert np.isclose(interaction_loss(jh, j, c, w), expected)

    def test_rotation_about_centroid_invariance(self, rng):
        from graspdiff.body import rot6d_to_matrix
        j = rng.normal(size=(2, 4, 3))
        c = rng.normal(size=(2, 3))
        w = rng.uniform(0, 1, (2, 4))
        jh = j + rng.normal(0, 0.02, (2, 4, 3))
        base = interaction_loss(jh, j, c, w)
        R = rot6d_to_matrix(rng.normal(size=6) + np.array([2, 0, 0, 0, 2, 0]))
        jh_rot = (jh - c[:, None]) @ R.T + c[:, None]
        assert np.isclose(interaction_loss(jh_rot, j, c, w), base, atol=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        T, K = 3, 4
        j = rng.normal(size=(T, K, 3))
        jh = j + rng.normal(0, 0.05, (T, K, 3))
        c = rng.normal(size=(T, 3))
        w = rng.uniform(0, 1, (T, K))
        loss, g = interaction_loss_grad(jh, j, c, w)
        h = 1e-6
        flat = jh.reshape(-1)
        for idx in rng.choice(flat.size, size=8, replace=False):
            old = flat[idx]
            flat[idx] = old + h
            lp = interaction_loss(jh, j, c, w)
            flat[idx] = old - h
            lm = interaction_loss(jh, j, c, w)
            flat[idx] = old
            fd = (lp - lm) / (2 * h)
            assert abs(g.reshape(-1)[idx] - fd) <= 1e-3 * max(abs(fd), 1e-5)


class TestCsvExport:
    def test_export_format(self, tmp_path):
        tau = np.array([[1, 0], [0, 1]])
        path = tmp_path / "labels.csv"
        export_labels_csv(tau, path)
        lines = path.read_text().strip().splitlines()
        assert lines == ["frame,left,right", "0,1,0", "1,0,1"]
