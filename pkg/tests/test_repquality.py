import numpy as np
import pytest

from fgrkit.datasets import make_hydroxyl_dataset, write_dataset_csv
from fgrkit.errors import AllZeroRows, CoincidentCentroids, TooFewScaffolds
from fgrkit.pipeline import train
from fgrkit.repquality import (
    ClusteredEmbedding,
    alignment_report,
    davies_bouldin,
    project_2d,
    top_scaffold_clusters,
    uniformity_profile,
    uniformity_report,
)

from oracles import oracle_davies_bouldin


class TestDaviesBouldin:
    def test_two_singletons_zero(self):
        emb = ClusteredEmbedding(points=np.array([[0.0, 0.0], [5.0, 5.0]]),
                                 labels=["a", "b"])
        assert davies_bouldin(emb) == 0.0

    def test_worked_example_point_one(self):
        points = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        emb = ClusteredEmbedding(points=points, labels=["A", "A", "B", "B"])
        assert abs(davies_bouldin(emb) - 0.1) < 1e-12

    def test_isometry_invariance(self):
        rng = np.random.default_rng(0)
        points = rng.normal(0, 1, (30, 3))
        labels = [i % 3 for i in range(30)]
        base = davies_bouldin(ClusteredEmbedding(points=points, labels=labels))
        theta = 0.7
        R = np.array([[np.cos(theta), -np.sin(theta), 0],
                      [np.sin(theta), np.cos(theta), 0],
                      [0, 0, 1.0]])
        moved = points @ R.T + np.array([5.0, -2.0, 9.0])
        rotated = davies_bouldin(ClusteredEmbedding(points=moved, labels=labels))
        assert abs(base - rotated) < 1e-9

    def test_matches_direct_formula_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(6, 100))
            m = int(rng.integers(2, 5))
            k = int(rng.integers(2, 5))
            points = rng.normal(0, 1, (n, m))
            labels = [int(v) for v in rng.integers(0, k, n)]
            if len(set(labels)) < 2:
                continue
            got = davies_bouldin(ClusteredEmbedding(points=points, labels=labels))
            want = oracle_davies_bouldin(points, labels)
            assert abs(got - want) < 1e-9

    def test_relabeling_within_clusters_invariant(self):
        rng = np.random.default_rng(4)
        points = rng.normal(0, 1, (20, 2))
        labels = [i % 2 for i in range(20)]
        perm = rng.permutation(20)
        a = davies_bouldin(ClusteredEmbedding(points=points, labels=labels))
        b = davies_bouldin(ClusteredEmbedding(points=points[perm],
                                              labels=[labels[i] for i in perm]))
        assert abs(a - b) < 1e-12

    def test_coincident_centroids(self):
        points = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 0.0], [2.0, 0.0]])
        emb = ClusteredEmbedding(points=points, labels=["a", "a", "b", "b"])
        with pytest.raises(CoincidentCentroids):
            davies_bouldin(emb)


class TestProject2D:
    def test_full_rank_2d_is_isometric(self):
        rng = np.random.default_rng(5)
        points = rng.normal(0, 1, (20, 2))
        proj = project_2d(points)
        centered = points - points.mean(axis=0)
        d_in = np.linalg.norm(centered[:, None] - centered[None, :], axis=2)
        d_out = np.linalg.norm(proj[:, None] - proj[None, :], axis=2)
        assert np.max(np.abs(d_in - d_out)) < 1e-9

    def test_collinear_second_axis_zero(self):
        points = np.array([[i, 2.0 * i, 3.0 * i] for i in range(6)], dtype=float)
        with pytest.warns(UserWarning):
            proj = project_2d(points)
        assert np.allclose(proj[:, 1], 0.0)
        assert np.std(proj[:, 0]) > 0

    def test_projected_variance_equals_top_eigenvalues(self):
        rng = np.random.default_rng(7)
        X = rng.normal(0, 1, (50, 10))
        proj = project_2d(X)
        cov = np.cov(X, rowvar=False, ddof=1)
        eigvals = np.sort(np.linalg.eigvalsh(cov))[::-1]
        got = np.var(proj, axis=0, ddof=1)
        assert abs(got[0] - eigvals[0]) < 1e-9
        assert abs(got[1] - eigvals[1]) < 1e-9

    def test_deterministic_sign_convention(self):
        rng = np.random.default_rng(8)
        X = rng.normal(0, 1, (30, 4))
        a, b = project_2d(X), project_2d(X.copy())
        assert np.array_equal(a, b)

    def test_rank_two_embedded_in_high_dim_preserves_distances(self):
        rng = np.random.default_rng(11)
        plane = rng.normal(0, 1, (25, 2))
        basis, _ = np.linalg.qr(rng.normal(0, 1, (7, 2)))
        X = plane @ basis.T  # rank-2 point cloud in 7 dimensions
        proj = project_2d(X)
        centered = X - X.mean(axis=0)
        d_in = np.linalg.norm(centered[:, None] - centered[None, :], axis=2)
        d_out = np.linalg.norm(proj[:, None] - proj[None, :], axis=2)
        assert np.max(np.abs(d_in - d_out)) < 1e-9


class TestUniformityProfile:
    def test_four_even_modes_flatter_than_clump(self):
        even = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
        clump = np.array([[1, 0], [0.999, 0.01], [0.999, -0.01], [1, 0.001]])
        prof_even = uniformity_profile(even, bandwidth=0.2)
        prof_clump = uniformity_profile(clump, bandwidth=0.2)
        assert prof_even.flatness() < prof_clump.flatness()
        # four equal modes: density peaks at the four axes are equal
        peaks = [prof_even.density[np.argmin(np.abs(prof_even.grid - t))]
                 for t in (0.0, np.pi / 2, -np.pi / 2)]
        assert max(peaks) - min(peaks) < 1e-6

    def test_single_point_concentrates(self):
        prof = uniformity_profile(np.array([[0.0, 3.0]]), bandwidth=0.2)
        assert abs(prof.circular_integral() - 1.0) < 1e-3
        assert prof.grid[np.argmax(prof.density)] == pytest.approx(np.pi / 2, abs=0.02)

    def test_integral_is_one(self):
        rng = np.random.default_rng(9)
        points = rng.normal(0, 1, (40, 2))
        prof = uniformity_profile(points, bandwidth=0.2)
        assert abs(prof.circular_integral() - 1.0) < 1e-3
        assert np.all(prof.density >= 0.0)

    def test_zero_rows_dropped_and_counted(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        prof = uniformity_profile(points)
        assert prof.dropped_rows == 2
        with pytest.raises(AllZeroRows):
            uniformity_profile(np.zeros((3, 2)))

    def test_bandwidth_validated(self):
        with pytest.raises(ValueError):
            uniformity_profile(np.array([[1.0, 0.0]]), bandwidth=0.0)


class TestModelReports:
    @pytest.fixture(scope="class")
    def trained(self, tmp_path_factory):
        path = tmp_path_factory.mktemp("rep") / "toy.csv"
        write_dataset_csv(make_hydroxyl_dataset(200, seed=0), path, ("has_oh",))
        cfg = {
            "data": {"path": str(path), "task": "classification",
                     "split": "scaffold"},
            "vocab": {"representation": "fg"},
            "model": {"latent": 16},
            "training": {"epochs": 5, "seed": 0},
        }
        return train(cfg)

    def test_alignment_report_structure(self, trained):
        report = alignment_report(trained.state, trained.dataset, trained.enc,
                                  top_s=5)
        assert len(report["scaffolds"]) == 5
        sizes = [s["size"] for s in report["scaffolds"]]
        assert sizes == sorted(sizes, reverse=True)
        assert np.isfinite(report["dbi_latent"])
        assert np.isfinite(report["dbi_2d"])

    def test_too_few_scaffolds(self, trained):
        with pytest.raises(TooFewScaffolds):
            top_scaffold_clusters(trained.dataset, top_s=10 ** 6)

    def test_deterministic_reports(self, trained):
        a = alignment_report(trained.state, trained.dataset, trained.enc)
        b = alignment_report(trained.state, trained.dataset, trained.enc)
        assert a == b
        ua = uniformity_report(trained.state, trained.enc)
        ub = uniformity_report(trained.state, trained.enc)
        assert ua == ub

    def test_uniformity_report_integral(self, trained):
        rep = uniformity_report(trained.state, trained.enc)
        assert abs(rep["circular_integral"] - 1.0) < 1e-3
        assert len(rep["density"]) == 360
