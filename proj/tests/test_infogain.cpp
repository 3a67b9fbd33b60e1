#include "kmdp/infogain.hpp"

#include "kmdp/gp.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace kmdp;

namespace {

std::vector<Vector> random_points(int n, int dim, Rng& rng) {
    std::vector<Vector> pts;
    for (int i = 0; i < n; ++i) pts.push_back(rng.normal_vector(dim));
    return pts;
}

} // namespace

TEST_CASE("info_gain: single unit-variance point at lambda 1 is half ln 2") {
    const Kernel k = Kernel::squared_exponential(1);
    CHECK(info_gain(k, {Vector::Zero(1)}, 1.0) ==
          doctest::Approx(0.34657359027997264).epsilon(1e-14));
}

TEST_CASE("info_gain: empty set is zero, bad lambda rejected") {
    const Kernel k = Kernel::linear(1);
    CHECK(info_gain(k, {}, 1.0) == 0.0);
    CHECK_THROWS_AS(info_gain(k, {Vector::Zero(1)}, 0.0), InputError);
    CHECK_THROWS_AS(info_gain(k, {Vector::Zero(1)}, -1.0), InputError);
}

TEST_CASE("telescoping: batch log det equals the sequential variance sum") {
    Rng rng(71);
    const Kernel k = Kernel::squared_exponential(2, 0.8);
    const double lambda = 0.6;
    const auto pts = random_points(10, 2, rng);
    const double batch = info_gain(k, pts, lambda);
    GpPosterior post(k, lambda);
    double seq = 0.0;
    for (const auto& x : pts) {
        seq += 0.5 * std::log1p(post.predict(x).second / lambda);
        post = post.update({x}, {0.0});
    }
    CHECK(std::abs(batch - seq) <= 1e-8);
}

TEST_CASE("telescoping holds for every permutation of the point set") {
    Rng rng(73);
    const Kernel k = Kernel::matern(1, 1.5, 0.7);
    const double lambda = 1.3;
    auto pts = random_points(6, 1, rng);
    const double batch = info_gain(k, pts, lambda);
    // A few random shuffles.
    for (int trial = 0; trial < 5; ++trial) {
        for (std::size_t i = pts.size(); i > 1; --i) {
            std::swap(pts[i - 1], pts[rng.uniform_int(i)]);
        }
        GpPosterior post(k, lambda);
        double seq = 0.0;
        for (const auto& x : pts) {
            seq += 0.5 * std::log1p(post.predict(x).second / lambda);
            post = post.update({x}, {0.0});
        }
        CHECK(std::abs(batch - seq) <= 1e-8);
    }
}

TEST_CASE("variance-sum bound: sum sigma^2_{s-1}(x_s) <= (2 lambda + 1) gamma") {
    Rng rng(79);
    for (int trial = 0; trial < 10; ++trial) {
        const double lambda = 0.2 + rng.uniform() * 2.0;
        const Kernel k = Kernel::squared_exponential(1, 0.3 + rng.uniform());
        const auto pts = random_points(12, 1, rng);
        GpPosterior post(k, lambda);
        double var_sum = 0.0;
        for (const auto& x : pts) {
            var_sum += post.predict(x).second;
            post = post.update({x}, {0.0});
        }
        CHECK(var_sum <= (2 * lambda + 1) * info_gain(k, pts, lambda) + 1e-8);
    }
}

TEST_CASE("greedy selects without replacement; exhausting the set gives the batch gain") {
    Rng rng(83);
    const Kernel k = Kernel::squared_exponential(1, 0.5);
    const auto cand = random_points(9, 1, rng);
    const MigEstimate est = greedy_mig(k, cand, 9, 1.0);
    CHECK(est.value == doctest::Approx(info_gain(k, cand, 1.0)).epsilon(1e-10));
    CHECK(est.selected.size() == 9);
    // All distinct indices.
    std::vector<bool> seen(9, false);
    for (int i : est.selected) {
        CHECK(!seen[static_cast<std::size_t>(i)]);
        seen[static_cast<std::size_t>(i)] = true;
    }
}

TEST_CASE("greedy first step is the max prior variance") {
    Rng rng(89);
    std::vector<Vector> cand;
    for (int i = 0; i < 6; ++i) cand.push_back(Vector::Constant(1, 0.2 * i));
    const Kernel k = Kernel::linear(1); // k(x,x) = x^2, maximized at the last point
    const double lambda = 0.7;
    const MigEstimate est = greedy_mig(k, cand, 1, lambda);
    CHECK(est.selected[0] == 5);
    CHECK(est.value == doctest::Approx(0.5 * std::log1p(1.0 * 1.0 / lambda)).epsilon(1e-12));
}

TEST_CASE("greedy ties break to the lowest candidate index") {
    // Two identical points: the first must be selected.
    std::vector<Vector> cand = {Vector::Constant(1, 1.0), Vector::Constant(1, 1.0),
                                Vector::Constant(1, 0.5)};
    const MigEstimate est = greedy_mig(Kernel::linear(1), cand, 2, 1.0);
    CHECK(est.selected[0] == 0);
}

TEST_CASE("greedy >= (1 - 1/e) exact on small instances (exhaustive oracle)") {
    Rng rng(97);
    for (int trial = 0; trial < 6; ++trial) {
        const Kernel k = trial % 2 == 0 ? Kernel::squared_exponential(2, 0.4 + rng.uniform())
                                        : Kernel::matern(2, 2.5, 0.8);
        const auto cand = random_points(10 + static_cast<int>(rng.uniform_int(3)), 2, rng);
        const double lambda = 0.5 + rng.uniform();
        for (int t = 1; t <= 4; ++t) {
            const double greedy = greedy_mig(k, cand, t, lambda).value;
            const double exact = exact_mig(k, cand, t, lambda).value;
            CHECK(greedy >= (1.0 - 1.0 / M_E) * exact - 1e-9);
            CHECK(greedy <= exact + 1e-9);
        }
    }
}

TEST_CASE("mig_schedule: prefix of greedy, nondecreasing, t exhausts to batch") {
    Rng rng(101);
    const Kernel k = Kernel::squared_exponential(1, 0.6);
    const auto cand = random_points(20, 1, rng);
    const auto schedule = mig_schedule(k, cand, 20, 0.9);
    REQUIRE(schedule.size() == 20);
    for (std::size_t i = 1; i < schedule.size(); ++i) CHECK(schedule[i] >= schedule[i - 1]);
    for (int t = 1; t <= 20; t += 6) {
        CHECK(schedule[static_cast<std::size_t>(t - 1)] ==
              doctest::Approx(greedy_mig(k, cand, t, 0.9).value).epsilon(1e-12));
    }
    CHECK(schedule.back() == doctest::Approx(info_gain(k, cand, 0.9)).epsilon(1e-10));
    CHECK_THROWS_AS(mig_schedule(k, cand, 21, 0.9), InputError);
    CHECK(mig_schedule(k, cand, 0, 0.9).empty());
}

TEST_CASE("variance-ratio bound via exact small-set MIG") {
    // sigma_A(x) / sigma_{A u B}(x) <= exp(gamma_{|B|}) over the candidate domain.
    Rng rng(103);
    const Kernel k = Kernel::squared_exponential(1, 0.5);
    const double lambda = 1.0;
    const auto domain = random_points(8, 1, rng);
    const std::vector<Vector> a_set(domain.begin(), domain.begin() + 3);
    const std::vector<Vector> b_set(domain.begin() + 3, domain.begin() + 6);

    GpPosterior post_a = GpPosterior(k, lambda).update(a_set, std::vector<double>(3, 0.0));
    GpPosterior post_ab = post_a.update(b_set, std::vector<double>(3, 0.0));
    const double gamma_b = exact_mig(k, domain, 3, lambda).value;

    for (const auto& x : domain) {
        const double sd_a = std::sqrt(std::max(post_a.predict(x).second, 1e-300));
        const double sd_ab = std::sqrt(std::max(post_ab.predict(x).second, 1e-300));
        CHECK(sd_a / sd_ab <= std::exp(gamma_b) + 1e-8);
    }
}

TEST_CASE("composite MIG bounds on exact small instances") {
    Rng rng(107);
    // Additive bound over a factored domain X1 x X2: enumerate the product
    // candidates and compare against the factor MIGs.
    const Kernel k1 = Kernel::squared_exponential(1, 0.5);
    const Kernel k2 = Kernel::matern(1, 1.5, 0.8);
    const Kernel ksum = Kernel::sum_split(k1, k2);
    const Kernel kprod = Kernel::product_split(k1, Kernel::index_delta(2));

    const auto x1 = random_points(3, 1, rng);
    const std::vector<Vector> x2 = {Vector::Constant(1, -0.4), Vector::Constant(1, 0.9)};
    std::vector<Vector> joint, joint_idx;
    for (const auto& a : x1) {
        for (const auto& b : x2) {
            Vector z(2);
            z << a[0], b[0];
            joint.push_back(z);
        }
        for (int i = 0; i < 2; ++i) {
            Vector z(2);
            z << a[0], i;
            joint_idx.push_back(z);
        }
    }

    const double lambda = 1.0;
    for (int t = 2; t <= 6; ++t) {
        // LHS is the subset max; the factor gammas allow repeated queries,
        // matching the form the composite bounds quantify over.
        const double lhs_sum = exact_mig(ksum, joint, t, lambda).value;
        const double g1 = oracle::exact_mig_multiset(k1, x1, t, lambda);
        const double g2 = oracle::exact_mig_multiset(k2, x2, t, lambda);
        CHECK(lhs_sum <= g1 + g2 + 2 * std::log(t) + 1e-9);

        const double lhs_prod = exact_mig(kprod, joint_idx, t, lambda).value;
        CHECK(lhs_prod <= 2 * g1 + 2 * std::log(t) + 1e-9); // rank(index_delta(2)) = 2
    }
}

TEST_CASE("analytic rates: shapes and composition") {
    const double lambda = 1.0;
    const Kernel lin = Kernel::linear(3);
    CHECK(analytic_mig(lin, 100, lambda) ==
          doctest::Approx(3 * std::log1p(100.0)).epsilon(1e-12));
    const Kernel se = Kernel::squared_exponential(2);
    CHECK(analytic_mig(se, 100, lambda) ==
          doctest::Approx(std::pow(std::log1p(100.0), 2)).epsilon(1e-12));
    // Product with a finite-rank index factor multiplies the base rate.
    const Kernel prod = Kernel::product_split(lin, Kernel::index_delta(2));
    CHECK(analytic_mig(prod, 100, lambda) ==
          doctest::Approx(2 * (3 * std::log1p(100.0) + std::log(100.0))).epsilon(1e-12));
    CHECK(analytic_mig(lin, 0, lambda) == 0.0);
    CHECK(analytic_mig(lin, 100, lambda, 2.0) ==
          doctest::Approx(2 * analytic_mig(lin, 100, lambda)).epsilon(1e-12));
    // Monotone in t.
    double prev = 0.0;
    for (int t = 1; t < 400; t += 40) {
        const double v = analytic_mig(Kernel::sum_split(Kernel::quadratic(1), Kernel::quadratic(1)),
                                      t, lambda);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("mesh: deterministic given seed, index slots are integers") {
    const Kernel k = Kernel::product_split(Kernel::linear(2), Kernel::index_delta(3));
    const Box box = Box::cube(3, -1, 1);
    const auto mesh1 = make_mesh(k, box, 64, 9);
    const auto mesh2 = make_mesh(k, box, 64, 9);
    REQUIRE(mesh1.size() == 64);
    for (std::size_t i = 0; i < mesh1.size(); ++i) {
        CHECK(mesh1[i] == mesh2[i]);
        const double idx = mesh1[i][2];
        CHECK(idx == std::round(idx));
        CHECK(idx >= 0);
        CHECK(idx <= 2);
    }
}

TEST_CASE("growth-rate shape: linear kernel schedule is log-linear in t") {
    const Kernel k = Kernel::linear(2);
    const Box box = Box::cube(2, -1, 1);
    const auto mesh = make_mesh(k, box, 220, 5);
    const auto schedule = mig_schedule(k, mesh, 200, 1.0);
    std::vector<double> x, y;
    for (int t = 50; t <= 200; ++t) {
        x.push_back(std::log(t));
        y.push_back(schedule[static_cast<std::size_t>(t - 1)]);
    }
    CHECK(oracle::r_squared(x, y) >= 0.95);
}

TEST_CASE("schedule cache round trip and key sensitivity") {
    namespace fs = std::filesystem;
    const std::string dir = fs::temp_directory_path() / "kmdp_mig_test";
    fs::create_directories(dir);
    const std::string path = dir + "/schedule.bin";
    const std::vector<double> sched = {0.1, 0.4, 0.9};
    save_mig_schedule(path, sched);
    CHECK(load_mig_schedule(path) == sched);
    CHECK(load_mig_schedule(dir + "/missing.bin").empty());

    const Kernel k1 = Kernel::linear(2);
    const Kernel k2 = Kernel::linear(3);
    CHECK(mig_cache_key(k1, 1, 0.5, 10, 64) != mig_cache_key(k2, 1, 0.5, 10, 64));
    CHECK(mig_cache_key(k1, 1, 0.5, 10, 64) != mig_cache_key(k1, 2, 0.5, 10, 64));
    CHECK(mig_cache_key(k1, 1, 0.5, 10, 64) == mig_cache_key(k1, 1, 0.5, 10, 64));
    fs::remove_all(dir);
}

TEST_CASE("GammaSchedule: greedy-backed and analytic lookups") {
    GammaSchedule greedy = GammaSchedule::from_values({0.2, 0.5, 0.7});
    CHECK(greedy.at(0) == 0.0);
    CHECK(greedy.at(2) == 0.5);
    CHECK_THROWS_AS(greedy.at(4), InputError);
    GammaSchedule analytic = GammaSchedule::analytic(Kernel::linear(1), 1.0, 1.0);
    CHECK(analytic.at(0) == 0.0);
    CHECK(analytic.at(50) == doctest::Approx(std::log1p(50.0)).epsilon(1e-12));
}
