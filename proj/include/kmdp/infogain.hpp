#pragma once

#include "kmdp/common.hpp"
#include "kmdp/kernels.hpp"

#include <string>
#include <vector>

namespace kmdp {

struct MigEstimate {
    double value = 0.0;             // nats
    std::vector<int> selected;      // candidate indices in selection order
    int t = 0;
    double lambda = 0.0;
    std::string method;             // "greedy" or "exact-small"
};

/// Information gain of a fixed point set: 0.5 * ln det(I + lambda^{-1} K),
/// computed from the log-diagonal of a triangular factor.
double info_gain(const Kernel& kernel, const std::vector<Vector>& points, double lambda);

/// Greedy submodular surrogate for the maximum information gain: selects t
/// candidates (without replacement), each round taking the point with the
/// largest marginal gain ln(1 + lambda^{-1} sigma^2(x)); ties break to the
/// lowest candidate index.
MigEstimate greedy_mig(const Kernel& kernel, const std::vector<Vector>& candidates, int t,
                       double lambda);

/// Greedy prefix values gamma_hat_1 .. gamma_hat_t_max in one pass.
std::vector<double> mig_schedule(const Kernel& kernel, const std::vector<Vector>& candidates,
                                 int t_max, double lambda);

/// Exact maximum over all size-t subsets of the candidates (exhaustive;
/// guarded to small instances).
MigEstimate exact_mig(const Kernel& kernel, const std::vector<Vector>& candidates, int t,
                      double lambda);

/// Closed-form growth-rate surrogate per kernel class (linear: d ln t,
/// SE: (ln t)^d, Matern: t^{d(d+1)/(2 nu + d(d+1))} ln t), composed through
/// the additive / finite-rank-product rules for composite kernels. `scale`
/// is a user constant multiplying the result.
double analytic_mig(const Kernel& kernel, double t, double lambda, double scale = 1.0);

/// Uniformly random mesh over the box; slots claimed by index_delta leaves
/// of `kernel` are drawn as uniform integers.
std::vector<Vector> make_mesh(const Kernel& kernel, const Box& box, int size, std::uint64_t seed);

/// Cache key for persisted schedules: (kernel spec, mesh seed, lambda, t_max,
/// mesh size).
std::uint64_t mig_cache_key(const Kernel& kernel, std::uint64_t mesh_seed, double lambda,
                            int t_max, int mesh_size);

/// Schedule cache on disk (one small binary file per key). Load returns an
/// empty vector when the entry is absent.
void save_mig_schedule(const std::string& path, const std::vector<double>& schedule);
std::vector<double> load_mig_schedule(const std::string& path);

// ---------------------------------------------------------------------------
// GammaSchedule: what the beta formulas consume. gamma(t) for arbitrary
// observation counts t >= 0, backed either by a greedy-mesh prefix or the
// analytic rates.
// ---------------------------------------------------------------------------

class GammaSchedule {
public:
    static GammaSchedule from_values(std::vector<double> prefix_values);
    static GammaSchedule analytic(Kernel kernel, double lambda, double scale);

    double at(long long t) const;

private:
    std::vector<double> values_; // values_[i] = gamma_hat_{i+1}
    Kernel kernel_;
    double lambda_ = 1.0;
    double scale_ = 1.0;
    bool analytic_ = false;
};

} // namespace kmdp
