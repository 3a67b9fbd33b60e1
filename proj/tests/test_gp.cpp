#include "kmdp/gp.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace kmdp;

namespace {

Vector vec1(double x) {
    return Vector::Constant(1, x);
}

} // namespace

TEST_CASE("empty posterior is the prior: predict(z) = (0, k(z,z))") {
    const Kernel k = Kernel::squared_exponential(2, 0.9);
    GpPosterior post(k, 1.0);
    Rng rng(1);
    for (int i = 0; i < 5; ++i) {
        const Vector z = rng.normal_vector(2);
        auto [mean, var] = post.predict(z);
        CHECK(mean == 0.0);
        CHECK(var == doctest::Approx(k(z, z)).epsilon(1e-15));
    }
    CHECK(post.update({}, {}).size() == 0);
}

TEST_CASE("one observation matches the 1x1 closed form") {
    const Kernel k = Kernel::squared_exponential(1, 1.0);
    const double lambda = 0.5;
    const Vector x1 = vec1(0.3);
    const double y1 = 0.7;
    GpPosterior post = GpPosterior(k, lambda).update({x1}, {y1});
    const Vector z = vec1(0.5);
    auto [mean, var] = post.predict(z);
    const double kzx = k(z, x1);
    CHECK(mean == doctest::Approx(kzx * y1 / (k(x1, x1) + lambda)).epsilon(1e-14));
    CHECK(var == doctest::Approx(k(z, z) - kzx * kzx / (k(x1, x1) + lambda)).epsilon(1e-14));
    // Frozen values (computed independently): mean 0.4574260475431524,
    // variance 0.3594737072317846.
    CHECK(mean == doctest::Approx(0.4574260475431524).epsilon(1e-14));
    CHECK(var == doctest::Approx(0.3594737072317846).epsilon(1e-14));
}

TEST_CASE("incremental update equals the dense batch solve (50 random SE points)") {
    Rng rng(42);
    const Kernel k = Kernel::squared_exponential(2, 0.8);
    const double lambda = 0.7;
    std::vector<Vector> pts;
    std::vector<double> ys;
    for (int i = 0; i < 50; ++i) {
        pts.push_back(rng.normal_vector(2));
        ys.push_back(rng.normal());
    }
    GpPosterior post(k, lambda);
    // Mixed batch sizes to exercise the append path.
    post = post.update({pts.begin(), pts.begin() + 20}, {ys.begin(), ys.begin() + 20});
    post = post.update({pts.begin() + 20, pts.end()}, {ys.begin() + 20, ys.end()});

    const oracle::DenseGp dense(k, lambda, pts, ys);
    for (int t = 0; t < 20; ++t) {
        const Vector z = rng.normal_vector(2);
        auto [m_inc, v_inc] = post.predict(z);
        auto [m_dir, v_dir] = dense.predict(z);
        CHECK(std::abs(m_inc - m_dir) <= 1e-8 * std::max(1.0, std::abs(m_dir)));
        CHECK(std::abs(v_inc - v_dir) <= 1e-8 * std::max(1.0, std::abs(v_dir)));
    }
}

TEST_CASE("non-finite target rejected") {
    GpPosterior post(Kernel::linear(1), 1.0);
    CHECK_THROWS_AS(post.update({vec1(1.0)}, {std::nan("")}), InputError);
    CHECK_THROWS_AS(post.update({vec1(1.0)}, {1.0, 2.0}), InputError);
}

TEST_CASE("interpolation in the small-lambda limit (dense oracle agrees)") {
    Rng rng(7);
    const Kernel k = Kernel::squared_exponential(1, 0.35);
    std::vector<Vector> pts;
    std::vector<double> ys;
    for (int i = 0; i < 6; ++i) {
        pts.push_back(vec1(-1.5 + 0.5 * i));
        ys.push_back(rng.normal());
    }
    GpPosterior post = GpPosterior(k, 1e-8).update(pts, ys);
    const oracle::DenseGp dense(k, 1e-8, pts, ys);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(std::abs(post.predict(pts[i]).first - ys[i]) <= 1e-4);
        CHECK(std::abs(dense.predict(pts[i]).first - ys[i]) <= 1e-4);
    }
}

TEST_CASE("variance never exceeds the prior and shrinks monotonically") {
    Rng rng(11);
    const Kernel k = Kernel::matern(1, 2.5, 0.9);
    GpPosterior post(k, 0.4);
    std::vector<Vector> test_points;
    for (int i = 0; i < 6; ++i) test_points.push_back(vec1(rng.uniform(-2, 2)));
    std::vector<double> prev;
    for (const auto& z : test_points) prev.push_back(post.predict(z).second);
    for (int step = 0; step < 25; ++step) {
        post = post.update({vec1(rng.uniform(-2, 2))}, {rng.normal()});
        for (std::size_t i = 0; i < test_points.size(); ++i) {
            const auto [mean, var] = post.predict(test_points[i]);
            CHECK(var <= k(test_points[i], test_points[i]) + 1e-12);
            CHECK(var <= prev[i] + 1e-10);
            prev[i] = var;
            (void)mean;
        }
    }
}

TEST_CASE("shrinkage ratio bound sigma^2_{s-1} <= (1 + 1/lambda) sigma^2_s") {
    // Needs a bounded-variance kernel.
    Rng rng(13);
    const Kernel k = Kernel::squared_exponential(1, 0.5);
    const double lambda = 0.8;
    GpPosterior post(k, lambda);
    const Vector z = vec1(0.1);
    for (int step = 0; step < 30; ++step) {
        const double before = post.predict(z).second;
        post = post.update({vec1(rng.uniform(-1, 1))}, {rng.normal()});
        const double after = post.predict(z).second;
        CHECK(before <= (1.0 + 1.0 / lambda) * after + 1e-10);
    }
}

TEST_CASE("branching off an older posterior snapshot keeps both valid") {
    Rng rng(17);
    const Kernel k = Kernel::squared_exponential(1);
    GpPosterior base = GpPosterior(k, 1.0).update({vec1(0.0)}, {1.0});
    GpPosterior a = base.update({vec1(0.5)}, {2.0});
    GpPosterior b = base.update({vec1(-0.5)}, {-2.0}); // forks the shared storage
    const Vector z = vec1(0.2);

    const oracle::DenseGp dense_a(k, 1.0, {vec1(0.0), vec1(0.5)}, {1.0, 2.0});
    const oracle::DenseGp dense_b(k, 1.0, {vec1(0.0), vec1(-0.5)}, {1.0, -2.0});
    CHECK(a.predict(z).first == doctest::Approx(dense_a.predict(z).first).epsilon(1e-12));
    CHECK(b.predict(z).first == doctest::Approx(dense_b.predict(z).first).epsilon(1e-12));
    CHECK(base.size() == 1);
    const oracle::DenseGp dense_base(k, 1.0, {vec1(0.0)}, {1.0});
    CHECK(base.predict(z).first == doctest::Approx(dense_base.predict(z).first).epsilon(1e-12));
}

TEST_CASE("tracked grid matches pointwise prediction after every update") {
    Rng rng(19);
    const Kernel k = Kernel::squared_exponential(1, 0.7);
    std::vector<Vector> grid;
    for (int i = 0; i < 9; ++i) grid.push_back(vec1(-1.0 + 0.25 * i));
    GpPosterior tracked(k, 0.6, grid);
    GpPosterior plain(k, 0.6);
    for (int step = 0; step < 12; ++step) {
        const Vector x = vec1(rng.uniform(-1, 1));
        const double y = rng.normal();
        tracked = tracked.update({x}, {y});
        plain = plain.update({x}, {y});
        const Vector& mu = tracked.grid_mean();
        const Vector sd = tracked.grid_sd();
        for (std::size_t g = 0; g < grid.size(); ++g) {
            auto [m, v] = plain.predict(grid[g]);
            CHECK(mu[static_cast<Eigen::Index>(g)] == doctest::Approx(m).epsilon(1e-9));
            CHECK(sd[static_cast<Eigen::Index>(g)] ==
                  doctest::Approx(std::sqrt(std::max(v, 0.0))).epsilon(1e-7));
        }
    }
}

TEST_CASE("sample_on_grid: prior single point is a scaled standard normal draw") {
    const Kernel k = Kernel::squared_exponential(1);
    GpPosterior post(k, 1.0);
    Rng rng_a(303), rng_b(303), rng_ref(303);
    const std::vector<Vector> grid = {vec1(0.0)};
    const Vector draw_a = post.sample_on_grid(grid, rng_a);
    const Vector draw_b = post.sample_on_grid(grid, rng_b);
    CHECK(draw_a[0] == draw_b[0]); // same seed, identical vector
    // Prior variance 1 (+1e-10 jitter): the draw is sqrt(1 + 1e-10) * normal.
    const double expected = std::sqrt(1.0 + 1e-10) * rng_ref.normal();
    CHECK(draw_a[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sample_on_grid: Monte Carlo mean approaches the posterior mean") {
    Rng data_rng(23);
    const Kernel k = Kernel::squared_exponential(1, 0.8);
    std::vector<Vector> pts;
    std::vector<double> ys;
    for (int i = 0; i < 12; ++i) {
        pts.push_back(vec1(data_rng.uniform(-1, 1)));
        ys.push_back(std::sin(2 * pts.back()[0]) + 0.1 * data_rng.normal());
    }
    GpPosterior post = GpPosterior(k, 0.3).update(pts, ys);
    const std::vector<Vector> grid = {vec1(0.4)};
    auto [mu, var] = post.predict(grid[0]);

    Rng rng(31);
    const int n = 10000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += post.sample_on_grid(grid, rng)[0];
    const double sample_mean = acc / n;
    CHECK(std::abs(sample_mean - mu) <= 4.0 * std::sqrt(var) / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("sample_on_grid: empirical covariance matches the tracked covariance") {
    Rng data_rng(37);
    const Kernel k = Kernel::squared_exponential(1, 0.6);
    std::vector<Vector> grid = {vec1(-0.5), vec1(0.0), vec1(0.5)};
    GpPosterior post(k, 0.5, grid);
    std::vector<Vector> pts;
    std::vector<double> ys;
    for (int i = 0; i < 10; ++i) {
        pts.push_back(vec1(data_rng.uniform(-1, 1)));
        ys.push_back(data_rng.normal());
    }
    post = post.update(pts, ys);

    const Matrix& cov = post.grid_cov();
    const Vector& mu = post.grid_mean();
    Rng rng(41);
    const int n = 20000;
    Matrix acc = Matrix::Zero(3, 3);
    Vector mean_acc = Vector::Zero(3);
    std::vector<Vector> draws;
    draws.reserve(n);
    for (int i = 0; i < n; ++i) {
        draws.push_back(post.sample_on_grid(grid, rng));
        mean_acc += draws.back();
    }
    mean_acc /= n;
    for (const auto& d : draws) acc += (d - mean_acc) * (d - mean_acc).transpose();
    acc /= (n - 1);

    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            // 5 standard errors; se(cov_ij) ~ sqrt((cov_ii cov_jj + cov_ij^2)/n).
            const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / n);
            CHECK(std::abs(acc(i, j) - cov(i, j)) <= 5.0 * se + 1e-12);
        }
    }
    CHECK((mean_acc - mu).cwiseAbs().maxCoeff() <=
          5.0 * std::sqrt(cov.diagonal().maxCoeff() / n));
}

TEST_CASE("snapshot save/load round trip (factor recomputed on load)") {
    Rng rng(43);
    const Kernel k = Kernel::sum(Kernel::linear(2), Kernel::squared_exponential(2, 1.1));
    std::vector<Vector> grid;
    for (int i = 0; i < 4; ++i) grid.push_back(rng.normal_vector(2));
    GpPosterior post(k, 0.9, grid);
    std::vector<Vector> pts;
    std::vector<double> ys;
    for (int i = 0; i < 15; ++i) {
        pts.push_back(rng.normal_vector(2));
        ys.push_back(rng.normal());
    }
    post = post.update(pts, ys);

    std::stringstream buf;
    post.save(buf);
    const GpPosterior loaded = GpPosterior::load(buf);
    REQUIRE(loaded.size() == post.size());
    for (int t = 0; t < 8; ++t) {
        const Vector z = rng.normal_vector(2);
        CHECK(loaded.predict(z).first == doctest::Approx(post.predict(z).first).epsilon(1e-10));
        CHECK(loaded.predict(z).second == doctest::Approx(post.predict(z).second).epsilon(1e-10));
    }
    CHECK(loaded.grid_mean().isApprox(post.grid_mean(), 1e-10));
}

TEST_CASE("transition posterior: empty prior has zero mean and unit sd under product kernel") {
    const int m = 3;
    const Kernel kp = Kernel::product_split(Kernel::squared_exponential(2, 1.0),
                                            Kernel::index_delta(m));
    TransitionPosterior post(kp, 1.0, m);
    Rng rng(47);
    const Vector z = rng.normal_vector(2);
    auto [mean, sd] = post.predict(z);
    REQUIRE(mean.size() == m);
    for (int i = 0; i < m; ++i) {
        CHECK(mean[i] == 0.0);
        CHECK(sd[i] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("transition posterior: m = 1 reduces to scalar predict on (z, 0)") {
    const Kernel kp = Kernel::product_split(Kernel::squared_exponential(1, 0.7),
                                            Kernel::index_delta(1));
    TransitionPosterior tpost(kp, 0.8, 1);
    GpPosterior scalar(kp, 0.8);
    Rng rng(53);
    std::vector<Vector> zs;
    std::vector<Vector> nexts;
    for (int i = 0; i < 10; ++i) {
        zs.push_back(rng.normal_vector(1));
        nexts.push_back(vec1(rng.normal()));
    }
    tpost = tpost.update(zs, nexts);
    std::vector<Vector> indexed;
    std::vector<double> targets;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        indexed.push_back(TransitionPosterior::indexed_point(zs[i], 0));
        targets.push_back(nexts[i][0]);
    }
    scalar = scalar.update(indexed, targets);
    const Vector z = rng.normal_vector(1);
    auto [mean, sd] = tpost.predict(z);
    auto [m2, v2] = scalar.predict(TransitionPosterior::indexed_point(z, 0));
    CHECK(mean[0] == doctest::Approx(m2).epsilon(1e-12));
    CHECK(sd[0] == doctest::Approx(std::sqrt(std::max(v2, 0.0))).epsilon(1e-12));
}

TEST_CASE("transition posterior: observation stacking count is m per step") {
    const int m = 2;
    const Kernel kp = Kernel::product_split(Kernel::squared_exponential(3, 1.0),
                                            Kernel::index_delta(m));
    TransitionPosterior post(kp, 2.0, m);
    Rng rng(59);
    std::vector<Vector> zs;
    std::vector<Vector> nexts;
    for (int i = 0; i < 7; ++i) {
        zs.push_back(rng.normal_vector(3));
        nexts.push_back(rng.normal_vector(m));
    }
    post = post.update(zs, nexts);
    CHECK(post.observation_count() == 7 * m);
}

TEST_CASE("LQR kernel recovers a linear system via the stacked GP (ridge oracle)") {
    // Data from s' = A s + B a with small noise; the product kernel with an
    // index factor must recover the linear map as data grows.
    Rng rng(61);
    const double a_true = 0.9, b_true = 0.1;
    const Kernel k1 = Kernel::sum_split(Kernel::linear(1), Kernel::linear(1));
    const Kernel kp = Kernel::product_split(k1, Kernel::index_delta(1));
    const double lambda = 1e-4;
    TransitionPosterior post(kp, lambda, 1);

    std::vector<Vector> zs;
    std::vector<Vector> nexts;
    for (int i = 0; i < 500; ++i) {
        Vector z(2);
        z << rng.uniform(-1, 1), rng.uniform(-1, 1);
        Vector next = vec1(a_true * z[0] + b_true * z[1] + 1e-3 * rng.normal());
        zs.push_back(z);
        nexts.push_back(next);
    }
    post = post.update(zs, nexts);

    double max_err = 0.0;
    for (int t = 0; t < 20; ++t) {
        Vector z(2);
        z << rng.uniform(-1, 1), rng.uniform(-1, 1);
        const double predicted = post.predict(z).first[0];
        max_err = std::max(max_err, std::abs(predicted - (a_true * z[0] + b_true * z[1])));
    }
    CHECK(max_err < 0.05);
}
