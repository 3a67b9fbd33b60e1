#pragma once

#include "kmdp/common.hpp"
#include "kmdp/kernels.hpp"

#include <iosfwd>
#include <memory>
#include <utility>
#include <vector>

namespace kmdp {

// ---------------------------------------------------------------------------
// GpPosterior
//
// Kernel ridge / GP regression state for one scalar function:
//
//   mean(z) = k_n(z)^T (K + lambda I)^{-1} y
//   var(z)  = k(z, z) - k_n(z)^T (K + lambda I)^{-1} k_n(z)
//
// maintained through a rank-extended Cholesky factor of (K + lambda I):
// update() appends rows to the triangular factor in O(n^2) per point and
// never refactors from scratch.
//
// A posterior is an immutable value. update() returns a new posterior; the
// factor's storage is append-only and shared between values, so the common
// sequential pattern (always updating the newest value) costs no copies,
// while branching off an older snapshot transparently clones its prefix.
//
// A posterior may additionally *track* a fixed evaluation grid: the posterior
// mean vector and full covariance matrix on that grid are kept current across
// updates (rank-one downdates), which makes per-episode planning and joint
// grid sampling independent of the training-set size.
// ---------------------------------------------------------------------------

class GpPosterior {
public:
    GpPosterior() = default;
    GpPosterior(Kernel kernel, double noise_lambda);
    GpPosterior(Kernel kernel, double noise_lambda, std::vector<Vector> tracked_grid);

    bool valid() const { return core_ != nullptr; }
    int size() const { return n_; }
    double noise_lambda() const;
    const Kernel& kernel() const;
    const std::vector<Vector>& inputs() const;
    const std::vector<double>& targets() const;

    GpPosterior update(const std::vector<Vector>& points, const std::vector<double>& targets) const;

    /// (mean, variance) at z; variance clamped to [0, k(z,z)].
    std::pair<double, double> predict(const Vector& z) const;

    bool tracks_grid() const;
    const std::vector<Vector>& tracked_grid() const;
    const Vector& grid_mean() const;
    /// Posterior covariance on the tracked grid.
    const Matrix& grid_cov() const;
    /// sqrt of the clamped covariance diagonal.
    Vector grid_sd() const;

    /// One joint draw from the posterior restricted to `grid`. Uses the
    /// tracked covariance when `grid` is the tracked grid, otherwise builds
    /// the dense covariance. Jitter 1e-10 is added before factorization,
    /// escalated x100 up to 1e-6, after which a NumericError is thrown.
    Vector sample_on_grid(const std::vector<Vector>& grid, Rng& rng) const;

    /// Binary snapshot: kernel spec, lambda, data, tracked grid. The
    /// triangular factor is recomputed on load.
    void save(std::ostream& out) const;
    static GpPosterior load(std::istream& in);

private:
    struct Core;
    std::shared_ptr<Core> core_;
    int n_ = 0;

    // Value-owned posterior state on the tracked grid.
    Vector grid_mean_;
    Matrix grid_cov_;

    void require_valid() const;
    GpPosterior fork() const;
    void append_one(const Vector& point, double target);
};

// ---------------------------------------------------------------------------
// TransitionPosterior
//
// Vector-valued mean transition function maintained as ONE scalar GP over the
// indexed domain Z x {0..m-1}: each observed next state contributes m indexed
// samples ((z, i) -> s'(i)).
// ---------------------------------------------------------------------------

class TransitionPosterior {
public:
    TransitionPosterior() = default;
    TransitionPosterior(Kernel kernel_p, double noise_lambda, int state_dim);
    /// Tracks the indexed grid {(z, i)} for z in z_grid, i in 0..m-1, ordered
    /// z-major (all indices of z_grid[0] first).
    TransitionPosterior(Kernel kernel_p, double noise_lambda, int state_dim,
                        const std::vector<Vector>& z_grid);

    bool valid() const { return inner_.valid(); }
    int state_dim() const { return m_; }
    int observation_count() const { return inner_.size(); }
    const GpPosterior& inner() const { return inner_; }

    TransitionPosterior update(const std::vector<Vector>& z_points,
                               const std::vector<Vector>& next_states) const;

    /// (mean vector, sd vector) of the m components at z.
    std::pair<Vector, Vector> predict(const Vector& z) const;

    static Vector indexed_point(const Vector& z, int index);
    static std::vector<Vector> indexed_grid(const std::vector<Vector>& z_grid, int m);

private:
    GpPosterior inner_;
    int m_ = 0;
};

} // namespace kmdp
