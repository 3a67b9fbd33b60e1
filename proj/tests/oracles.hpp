// Test-only reference implementations, kept independent of the library's
// computation paths: dense batch GP solves, exhaustive subset/policy
// enumeration, and small statistics helpers.

#pragma once

#include "kmdp/gp.hpp"
#include "kmdp/infogain.hpp"
#include "kmdp/kernels.hpp"
#include "kmdp/planners.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

namespace oracle {

using kmdp::Matrix;
using kmdp::Vector;

// Direct dense evaluation of the posterior equations: mean and variance via
// an explicit (K + lambda I) solve, no Cholesky reuse.
struct DenseGp {
    kmdp::Kernel kernel;
    double lambda;
    std::vector<Vector> inputs;
    Eigen::LDLT<Matrix> solver;
    Vector targets;

    DenseGp(const kmdp::Kernel& k, double lam, const std::vector<Vector>& pts,
            const std::vector<double>& ys)
        : kernel(k), lambda(lam), inputs(pts) {
        Matrix a = pts.empty() ? Matrix(0, 0) : k.gram(pts);
        a.diagonal().array() += lam;
        solver.compute(a);
        targets = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    }

    std::pair<double, double> predict(const Vector& z) const {
        const double kzz = kernel(z, z);
        if (inputs.empty()) return {0.0, kzz};
        const Vector kv = kernel.eval_vector(inputs, z);
        const double mean = kv.dot(solver.solve(targets));
        const double var = kzz - kv.dot(solver.solve(kv));
        return {mean, var};
    }
};

inline double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    return es.eigenvalues().minCoeff();
}

// Exhaustive maximum of V_1 over all |A|^(|S| H) period-indexed policies,
// evaluated on the deterministic snapped model, for every start state.
inline std::vector<double> enumerate_policies_max_values(const kmdp::GridModel& model,
                                                         const kmdp::Grid& grid, int horizon) {
    const int ns = grid.n_states();
    const int na = grid.n_actions();
    const long long decisions = static_cast<long long>(ns) * horizon;

    std::vector<int> choice(static_cast<std::size_t>(decisions), 0);
    std::vector<double> best(static_cast<std::size_t>(ns), -1e300);
    while (true) {
        for (int start = 0; start < ns; ++start) {
            double value = 0.0;
            int s = start;
            for (int h = 0; h < horizon; ++h) {
                const int a = choice[static_cast<std::size_t>(s) * horizon + h];
                value += model.reward(s, a);
                s = model.next_state(s, a);
            }
            best[static_cast<std::size_t>(start)] =
                std::max(best[static_cast<std::size_t>(start)], value);
        }
        // Advance the mixed-radix counter.
        long long i = 0;
        while (i < decisions && ++choice[static_cast<std::size_t>(i)] == na) {
            choice[static_cast<std::size_t>(i)] = 0;
            ++i;
        }
        if (i == decisions) break;
    }
    return best;
}

// Exact MIG over a finite domain allowing repeated queries (combinations
// with repetition), the form the composite-kernel bounds quantify over.
inline double exact_mig_multiset(const kmdp::Kernel& k, const std::vector<Vector>& domain, int t,
                                 double lambda) {
    const int n = static_cast<int>(domain.size());
    std::vector<int> idx(static_cast<std::size_t>(t), 0); // nondecreasing index tuples
    double best = 0.0;
    while (true) {
        std::vector<Vector> pts;
        for (int i : idx) pts.push_back(domain[static_cast<std::size_t>(i)]);
        best = std::max(best, kmdp::info_gain(k, pts, lambda));
        int i = t - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - 1) --i;
        if (i < 0) break;
        const int v = ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < t; ++j) idx[static_cast<std::size_t>(j)] = v;
    }
    return best;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

// R^2 of the least-squares line y ~ a + b x.
inline double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = mean(x), my = mean(y);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0 || syy <= 0) return 1.0;
    return (sxy * sxy) / (sxx * syy);
}

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = mean(x), my = mean(y);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

} // namespace oracle
