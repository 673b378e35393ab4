import json

import numpy as np
import pytest

from optidesign import model
from optidesign.errors import (
    DimensionMismatch,
    MissingObservation,
    NotPositiveDefinite,
    UnknownExperimentId,
)

from instances import medium_instance


class TestMakeExperiment:
    def test_scalar(self):
        e = model.make_experiment(0, np.array([[1.0]]), np.array([[0.5]]))
        assert e.M[0, 0] == pytest.approx(2.0)
        assert e.gamma == pytest.approx(2.0)

    def test_zero_rows(self):
        e = model.make_experiment(0, np.zeros((2, 3)), np.eye(2))
        assert np.allclose(e.M, 0.0)
        assert e.gamma == 0.0

    def test_unit_row(self):
        e = model.make_experiment(0, np.array([[1.0, 0.0]]), np.array([[1.0]]))
        assert np.allclose(e.M, np.diag([1.0, 0.0]))
        assert e.gamma == pytest.approx(1.0)

    def test_rejects_indefinite_noise(self):
        with pytest.raises(NotPositiveDefinite):
            model.make_experiment(0, np.array([[1.0]]), np.array([[-1.0]]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            model.make_experiment(0, np.ones((2, 3)), np.eye(3))

    def test_increment_definition(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(2, 3))
        r = np.array([[1.0, 0.2], [0.2, 0.8]])
        e = model.make_experiment(4, a, r)
        assert np.allclose(e.M, a.T @ np.linalg.solve(r, a), atol=1e-10)
        assert e.gamma == pytest.approx(np.trace(e.M))


class TestDesign:
    def test_counts_and_size(self):
        d = model.Design.from_counts({3: 2, 1: 1})
        assert d.size == 3
        assert d.counts == {1: 1, 3: 2}
        assert d.items == ((1, 1), (3, 2))

    def test_from_ids(self):
        d = model.Design.from_ids([2, 0, 2])
        assert d.counts == {0: 1, 2: 2}

    def test_empty(self):
        d = model.Design.empty()
        assert d.size == 0
        assert 0 not in d

    def test_zero_counts_dropped(self):
        d = model.Design.from_counts({0: 0, 1: 2})
        assert d.counts == {1: 2}

    def test_rejects_negative_count(self):
        with pytest.raises(ValueError):
            model.Design.from_counts({0: -1})


class TestInformationMatrix:
    def test_empty_design_is_prior_precision(self, p1_pool):
        y = model.information_matrix(p1_pool, model.Design.empty())
        assert np.allclose(y.mat, np.eye(1))

    def test_scalar_sums(self, p1_pool):
        y = model.information_matrix(p1_pool, model.Design.from_counts({1: 2}))
        assert y.mat[0, 0] == pytest.approx(5.0)
        y2 = model.information_matrix(p1_pool, model.Design.from_ids([1, 2]))
        assert y2.mat[0, 0] == pytest.approx(4.0)

    def test_unknown_id(self, p1_pool):
        with pytest.raises(UnknownExperimentId):
            model.information_matrix(p1_pool, model.Design.from_ids([99]))

    def test_order_independent(self):
        pool = medium_instance(21)
        ids = [e.id for e in pool.experiments]
        d1 = model.Design.from_ids(ids)
        d2 = model.Design.from_ids(list(reversed(ids)))
        y1 = model.information_matrix(pool, d1).mat
        y2 = model.information_matrix(pool, d2).mat
        assert np.allclose(y1, y2, atol=1e-10)


class TestErrorCovariance:
    def test_empty_identity(self):
        pool = model.Pool(
            experiments=[model.make_experiment(0, np.zeros((1, 2)), np.eye(1))],
            prior_mean=np.zeros(2),
            prior_cov=np.eye(2),
            target=np.eye(2),
        )
        k = model.error_covariance(pool, model.Design.empty())
        assert np.allclose(k.mat, np.eye(2))

    def test_scalar(self, p1_pool):
        k = model.error_covariance(p1_pool, model.Design.from_ids([1]))
        assert k.mat[0, 0] == pytest.approx(1.0 / 3.0)

    def test_single_row_2d(self):
        pool = model.Pool(
            experiments=[model.make_experiment(0, np.array([[1.0, 0.0]]), np.eye(1))],
            prior_mean=np.zeros(2),
            prior_cov=np.eye(2),
            target=np.eye(2),
        )
        k = model.error_covariance(pool, model.Design.from_ids([0]))
        assert np.allclose(k.mat, np.diag([0.5, 1.0]))


class TestEstimate:
    def test_scalar_single(self, p1_pool):
        res = model.estimate(
            p1_pool, model.Design.from_ids([1]), {1: np.array([[1.0, 1.0]])}
        )
        assert res.z_hat[0] == pytest.approx(2.0 / 3.0)

    def test_empty_design_returns_prior(self, p1_pool):
        res = model.estimate(p1_pool, model.Design.empty(), {})
        assert res.z_hat[0] == pytest.approx(0.0)
        assert res.K[0, 0] == pytest.approx(1.0)

    def test_two_experiments(self, p1_pool):
        res = model.estimate(
            p1_pool,
            model.Design.from_ids([1, 2]),
            {1: np.array([[1.0, 1.0]]), 2: np.array([[2.0]])},
        )
        assert res.z_hat[0] == pytest.approx(1.0)

    def test_missing_observation(self, p1_pool):
        with pytest.raises(MissingObservation):
            model.estimate(p1_pool, model.Design.from_ids([1]), {})

    def test_wrong_replication_count(self, p1_pool):
        with pytest.raises(DimensionMismatch):
            model.estimate(
                p1_pool, model.Design.from_counts({2: 2}), {2: np.array([[1.0]])}
            )

    def test_covariance_matches_error_covariance(self, p1_pool):
        d = model.Design.from_counts({1: 2})
        res = model.estimate(
            p1_pool, d, {1: np.array([[0.1, 0.2], [0.3, 0.4]])}
        )
        assert np.allclose(res.K, model.error_covariance(p1_pool, d).mat)


class TestDesignState:
    def test_tracks_information_matrix(self, p1_pool):
        st = model.DesignState.initial(p1_pool)
        st = st.add(p1_pool.experiment(1)).add(p1_pool.experiment(2))
        y = model.information_matrix(p1_pool, st.design)
        assert np.allclose(st.Y, y.mat, atol=1e-9)
        assert np.allclose(st.Y @ st.Y_inv, np.eye(1), atol=1e-8)

    def test_inverse_stays_consistent(self):
        pool = medium_instance(8)
        st = model.DesignState.initial(pool)
        for e in pool.experiments:
            st = st.add(e)
        assert np.allclose(st.Y @ st.Y_inv, np.eye(pool.p), atol=1e-8)


class TestPoolSerialization:
    def test_round_trip(self, tmp_path):
        pool = medium_instance(5)
        path = tmp_path / "pool.json"
        model.save_pool(pool, path)
        loaded = model.load_pool(path)
        assert loaded.p == pool.p
        assert loaded.ids == pool.ids
        assert np.allclose(loaded.prior_cov, pool.prior_cov)
        assert np.allclose(loaded.target, pool.target)
        for e1, e2 in zip(pool.experiments, loaded.experiments):
            assert np.allclose(e1.A, e2.A)
            assert np.allclose(e1.R, e2.R)

    def test_hash_stable_and_sensitive(self, tmp_path):
        pool = medium_instance(5)
        h1 = model.pool_hash(pool)
        path = tmp_path / "pool.json"
        model.save_pool(pool, path)
        assert model.pool_hash(model.load_pool(path)) == h1
        other = medium_instance(6)
        assert model.pool_hash(other) != h1

    def test_rejects_duplicate_ids(self):
        with pytest.raises(DimensionMismatch):
            model.Pool(
                experiments=[
                    model.make_experiment(0, np.array([[1.0]]), np.eye(1)),
                    model.make_experiment(0, np.array([[2.0]]), np.eye(1)),
                ],
                prior_mean=np.zeros(1),
                prior_cov=np.eye(1),
                target=np.eye(1),
            )

    def test_pool_dict_shape(self, p1_pool):
        d = model.pool_to_dict(p1_pool)
        assert d["p"] == 1
        assert {e["id"] for e in d["experiments"]} == {1, 2}
        json.dumps(d)
