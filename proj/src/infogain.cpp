#include "kmdp/infogain.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>

namespace kmdp {

double info_gain(const Kernel& kernel, const std::vector<Vector>& points, double lambda) {
    if (!(lambda > 0)) throw InputError("info_gain: lambda must be positive");
    if (points.empty()) return 0.0;
    Matrix a = kernel.gram(points) / lambda;
    a.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericError("info_gain: factorization of I + K/lambda failed");
    }
    // ln det = 2 sum ln L_ii.
    return Matrix(llt.matrixL()).diagonal().array().log().sum();
}

namespace {

// Greedy selection over a fixed candidate set, maintaining the posterior
// covariance of all candidates and applying the rank-one shrinkage
//   sigma_s^2(x) = sigma_{s-1}^2(x) - cov(x_s, x)^2 / (lambda + sigma_{s-1}^2(x_s))
// after each pick. O(t N^2) total.
struct GreedyState {
    Matrix cov;
    std::vector<bool> taken;
    double lambda;

    explicit GreedyState(const Kernel& kernel, const std::vector<Vector>& candidates, double lam)
        : cov(kernel.gram(candidates)), taken(candidates.size(), false), lambda(lam) {}

    // Returns (index, gain) of the next greedy pick and applies it.
    std::pair<int, double> step() {
        const Eigen::Index n = cov.rows();
        int best = -1;
        double best_var = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (taken[static_cast<std::size_t>(i)]) continue;
            const double v = cov(i, i);
            if (v > best_var) {
                best_var = v;
                best = static_cast<int>(i);
            }
        }
        const double var = std::max(cov(best, best), 0.0);
        const double gain = 0.5 * std::log1p(var / lambda);
        Vector c = cov.col(best);
        cov.noalias() -= c * c.transpose() / (lambda + var);
        taken[static_cast<std::size_t>(best)] = true;
        return {best, gain};
    }
};

} // namespace

MigEstimate greedy_mig(const Kernel& kernel, const std::vector<Vector>& candidates, int t,
                       double lambda) {
    if (!(lambda > 0)) throw InputError("greedy_mig: lambda must be positive");
    if (t < 0 || static_cast<std::size_t>(t) > candidates.size()) {
        throw InputError("greedy_mig: t must satisfy 0 <= t <= |candidates|");
    }
    MigEstimate est;
    est.t = t;
    est.lambda = lambda;
    est.method = "greedy";
    if (t == 0) return est;
    GreedyState state(kernel, candidates, lambda);
    for (int s = 0; s < t; ++s) {
        auto [idx, gain] = state.step();
        est.selected.push_back(idx);
        est.value += gain;
    }
    return est;
}

std::vector<double> mig_schedule(const Kernel& kernel, const std::vector<Vector>& candidates,
                                 int t_max, double lambda) {
    if (!(lambda > 0)) throw InputError("mig_schedule: lambda must be positive");
    if (t_max < 0 || static_cast<std::size_t>(t_max) > candidates.size()) {
        throw InputError("mig_schedule: t_max must satisfy 0 <= t_max <= |candidates|");
    }
    std::vector<double> schedule;
    schedule.reserve(static_cast<std::size_t>(t_max));
    if (t_max == 0) return schedule;
    GreedyState state(kernel, candidates, lambda);
    double acc = 0.0;
    for (int s = 0; s < t_max; ++s) {
        acc += state.step().second;
        schedule.push_back(acc);
    }
    return schedule;
}

MigEstimate exact_mig(const Kernel& kernel, const std::vector<Vector>& candidates, int t,
                      double lambda) {
    if (!(lambda > 0)) throw InputError("exact_mig: lambda must be positive");
    const int n = static_cast<int>(candidates.size());
    if (t < 0 || t > n) throw InputError("exact_mig: t must satisfy 0 <= t <= |candidates|");
    if (n > 24) throw InputError("exact_mig: candidate set too large for exhaustive search");

    MigEstimate est;
    est.t = t;
    est.lambda = lambda;
    est.method = "exact-small";
    if (t == 0) return est;

    const Matrix gram = kernel.gram(candidates);
    std::vector<int> subset(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) subset[static_cast<std::size_t>(i)] = i;

    auto evaluate = [&](const std::vector<int>& idx) {
        Matrix a(t, t);
        for (int i = 0; i < t; ++i) {
            for (int j = 0; j < t; ++j) {
                a(i, j) = gram(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]) / lambda;
            }
        }
        a.diagonal().array() += 1.0;
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() != Eigen::Success) {
            throw NumericError("exact_mig: subset factorization failed");
        }
        return Matrix(llt.matrixL()).diagonal().array().log().sum();
    };

    est.value = -1.0;
    while (true) {
        const double v = evaluate(subset);
        if (v > est.value) {
            est.value = v;
            est.selected = subset;
        }
        // Next t-combination of {0..n-1} in lexicographic order.
        int i = t - 1;
        while (i >= 0 && subset[static_cast<std::size_t>(i)] == n - t + i) --i;
        if (i < 0) break;
        ++subset[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < t; ++j) {
            subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    return est;
}

double analytic_mig(const Kernel& kernel, double t, double lambda, double scale) {
    if (!(lambda > 0)) throw InputError("analytic_mig: lambda must be positive");
    if (t <= 0) return 0.0;

    std::function<double(const Kernel&)> rate = [&](const Kernel& k) -> double {
        const double ltt = std::log1p(t / lambda);
        switch (k.kind()) {
        case KernelKind::Linear:
            return k.dim() * ltt;
        case KernelKind::Quadratic:
            return (static_cast<double>(k.dim()) * (k.dim() + 1) / 2.0) * ltt;
        case KernelKind::IndexDelta:
            return static_cast<double>(k.cardinality()) * ltt;
        case KernelKind::SquaredExponential:
            return std::pow(ltt, k.dim());
        case KernelKind::Matern: {
            const double d = k.dim();
            const double expo = d * (d + 1) / (2 * k.nu() + d * (d + 1));
            return std::pow(t, expo) * ltt;
        }
        case KernelKind::Sum:
            return rate(k.left()) + rate(k.right()) + 2.0 * std::max(std::log(t), 0.0);
        case KernelKind::Product: {
            const auto rank_l = k.left().finite_rank();
            const auto rank_r = k.right().finite_rank();
            const double logt = std::max(std::log(t), 0.0);
            // gamma(k1 x k2) <= d gamma(k1) + d ln t with d the finite rank
            // of one factor; pick the cheaper factorization when both exist.
            if (rank_l && rank_r) {
                const double via_r = static_cast<double>(*rank_r) * (rate(k.left()) + logt);
                const double via_l = static_cast<double>(*rank_l) * (rate(k.right()) + logt);
                return std::min(via_l, via_r);
            }
            if (rank_r) return static_cast<double>(*rank_r) * (rate(k.left()) + logt);
            if (rank_l) return static_cast<double>(*rank_l) * (rate(k.right()) + logt);
            // No finite-rank factor: fall back to the additive combination,
            // a monotone surrogate adequate for beta schedules.
            return rate(k.left()) + rate(k.right()) + 2.0 * logt;
        }
        }
        return ltt;
    };

    return scale * rate(kernel);
}

std::vector<Vector> make_mesh(const Kernel& kernel, const Box& box, int size, std::uint64_t seed) {
    if (size < 1) throw InputError("make_mesh: size must be positive");
    if (box.dim() != kernel.dim()) throw InputError("make_mesh: box/kernel dimension mismatch");
    Rng rng = derive_stream(seed, "mig-mesh");
    const auto idx_slots = kernel.index_slots();
    std::vector<Vector> mesh;
    mesh.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        Vector p = box.sample(rng);
        for (const auto& [slot, card] : idx_slots) {
            p[slot] = static_cast<double>(rng.uniform_int(static_cast<std::uint64_t>(card)));
        }
        mesh.push_back(std::move(p));
    }
    return mesh;
}

std::uint64_t mig_cache_key(const Kernel& kernel, std::uint64_t mesh_seed, double lambda,
                            int t_max, int mesh_size) {
    std::uint64_t h = kernel.hash();
    h = hash_mix(h, mesh_seed);
    std::uint64_t lam_bits;
    static_assert(sizeof(lam_bits) == sizeof(lambda));
    std::memcpy(&lam_bits, &lambda, sizeof(lambda));
    h = hash_mix(h, lam_bits);
    h = hash_mix(h, static_cast<std::uint64_t>(t_max));
    h = hash_mix(h, static_cast<std::uint64_t>(mesh_size));
    return h;
}

void save_mig_schedule(const std::string& path, const std::vector<double>& schedule) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_mig_schedule: cannot open " + path);
    const std::uint64_t n = schedule.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(schedule.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    if (!out) throw IoError("save_mig_schedule: write failure for " + path);
}

std::vector<double> load_mig_schedule(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::vector<double> schedule(n);
    in.read(reinterpret_cast<char*>(schedule.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) return {};
    return schedule;
}

GammaSchedule GammaSchedule::from_values(std::vector<double> prefix_values) {
    GammaSchedule s;
    s.values_ = std::move(prefix_values);
    s.analytic_ = false;
    return s;
}

GammaSchedule GammaSchedule::analytic(Kernel kernel, double lambda, double scale) {
    GammaSchedule s;
    s.kernel_ = std::move(kernel);
    s.lambda_ = lambda;
    s.scale_ = scale;
    s.analytic_ = true;
    return s;
}

double GammaSchedule::at(long long t) const {
    if (t <= 0) return 0.0;
    if (analytic_) return analytic_mig(kernel_, static_cast<double>(t), lambda_, scale_);
    if (values_.empty()) throw InputError("GammaSchedule: empty greedy schedule");
    const std::size_t idx = std::min(static_cast<std::size_t>(t), values_.size()) - 1;
    if (static_cast<std::size_t>(t) > values_.size()) {
        throw InputError("GammaSchedule: requested t=" + std::to_string(t) +
                         " beyond precomputed schedule length " + std::to_string(values_.size()));
    }
    return values_[idx];
}

} // namespace kmdp
