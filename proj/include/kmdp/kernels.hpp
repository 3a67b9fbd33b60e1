#pragma once

#include "kmdp/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace kmdp {

enum class KernelKind {
    Linear,
    SquaredExponential,
    Matern,
    Quadratic,
    IndexDelta,
    Sum,
    Product,
};

// ---------------------------------------------------------------------------
// Kernel
//
// Immutable value describing a positive-semidefinite kernel over flat real
// vectors. Composite nodes come in two flavours:
//   * shared  -- both children see the whole point (same dimension),
//   * split   -- the point factors as [left-slots | right-slots], e.g. the
//                transition domain Z x {1..m} where an index_delta child
//                consumes the trailing slot.
// A node may carry a variance cap: evaluations are divided by that constant
// so k(z, z) <= 1 over the intended box (linear/quadratic kernels are
// unbounded otherwise; SE/Matern/index kernels never need it).
// ---------------------------------------------------------------------------

class Kernel {
public:
    struct Node; // defined in kernels.cpp; the tree is immutable and shared

    Kernel() = default;

    static Kernel linear(int dim);
    static Kernel squared_exponential(int dim, double lengthscale = 1.0);
    /// Closed-form Matern; nu must be one of 1/2, 3/2, 5/2.
    static Kernel matern(int dim, double nu, double lengthscale = 1.0);
    static Kernel quadratic(int dim);
    static Kernel index_delta(int cardinality);
    /// Shared-domain composition: children must have equal dimension.
    static Kernel sum(Kernel left, Kernel right);
    static Kernel product(Kernel left, Kernel right);
    /// Factored-domain composition: the point is [left | right] slots.
    static Kernel sum_split(Kernel left, Kernel right);
    static Kernel product_split(Kernel left, Kernel right);

    /// Returns this kernel divided by the positive constant `divisor`.
    Kernel capped(double divisor) const;

    bool valid() const { return root_ != nullptr; }
    int dim() const;
    KernelKind kind() const;
    double lengthscale() const;   // SE / Matern
    double nu() const;            // Matern
    int cardinality() const;      // index_delta
    Kernel left() const;          // composites
    Kernel right() const;
    bool is_split() const;

    double eval(const Vector& z, const Vector& z2) const;
    double operator()(const Vector& z, const Vector& z2) const { return eval(z, z2); }

    Matrix gram(const std::vector<Vector>& points) const;

    /// Kernel evaluations k(points[i], z), as a column vector.
    Vector eval_vector(const std::vector<Vector>& points, const Vector& z) const;

    /// Slots consumed by index_delta leaves: (slot position, cardinality).
    std::vector<std::pair<int, int>> index_slots() const;

    /// Rank bound over any finite point set, when finite (linear: dim,
    /// quadratic: dim(dim+1)/2, index_delta: cardinality, composites when
    /// derivable). SE/Matern have no finite rank.
    std::optional<long long> finite_rank() const;

    nlohmann::json to_json() const;
    static Kernel from_json(const nlohmann::json& j);
    std::string to_string() const;

    /// Stable content hash (used for MIG schedule cache keys).
    std::uint64_t hash() const;

private:
    explicit Kernel(std::shared_ptr<const Node> root) : root_(std::move(root)) {}
    std::shared_ptr<const Node> root_;
};

// ---------------------------------------------------------------------------
// RkhsFunction: f(z) = sum_i alpha_i k(center_i, z).
// ---------------------------------------------------------------------------

class RkhsFunction {
public:
    RkhsFunction() = default;
    RkhsFunction(Kernel kernel, std::vector<Vector> centers, Vector coefficients);

    double eval(const Vector& z) const;
    double operator()(const Vector& z) const { return eval(z); }

    double rkhs_norm() const { return norm_; }
    const Kernel& kernel() const { return kernel_; }
    const std::vector<Vector>& centers() const { return centers_; }
    const Vector& coefficients() const { return coefficients_; }

private:
    Kernel kernel_;
    std::vector<Vector> centers_;
    Vector coefficients_;
    double norm_ = 0.0;
};

/// Draws a random RKHS function with rkhs_norm == norm_bound exactly.
/// Centers are uniform in `domain`; slots claimed by index_delta leaves are
/// drawn as uniform integers in their cardinality range instead.
RkhsFunction rkhs_sample(const Kernel& kernel, const Box& domain, int n_centers,
                         double norm_bound, Rng& rng);

} // namespace kmdp
