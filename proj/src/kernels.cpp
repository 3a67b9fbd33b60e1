#include "kmdp/kernels.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

namespace kmdp {

struct Kernel::Node {
    KernelKind kind;
    int dim = 0;           // slots this node consumes
    double lengthscale = 1.0;
    double nu = 0.0;       // Matern smoothness
    int cardinality = 0;   // index_delta
    bool split = false;    // composite: factored domain
    double cap = 1.0;      // eval divisor (variance cap)
    std::shared_ptr<const Node> left, right;
};

namespace {

using Node = Kernel::Node;
using Span = Eigen::Ref<const Eigen::VectorXd>;

std::shared_ptr<Node> make_node(KernelKind kind) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    return n;
}

double eval_node(const Node& n, const Span z, const Span z2);

double eval_matern(const Node& n, double r) {
    const double s = r / n.lengthscale;
    if (n.nu == 0.5) {
        return std::exp(-s);
    }
    if (n.nu == 1.5) {
        const double t = std::sqrt(3.0) * s;
        return (1.0 + t) * std::exp(-t);
    }
    // nu == 2.5, the only remaining case admitted at construction.
    const double t = std::sqrt(5.0) * s;
    return (1.0 + t + t * t / 3.0) * std::exp(-t);
}

double eval_leaf(const Node& n, const Span z, const Span z2) {
    switch (n.kind) {
    case KernelKind::Linear:
        return z.dot(z2);
    case KernelKind::Quadratic: {
        const double d = z.dot(z2);
        return d * d;
    }
    case KernelKind::SquaredExponential: {
        const double sq = (z - z2).squaredNorm();
        return std::exp(-sq / (2.0 * n.lengthscale * n.lengthscale));
    }
    case KernelKind::Matern:
        return eval_matern(n, (z - z2).norm());
    case KernelKind::IndexDelta: {
        const double a = z[0];
        const double b = z2[0];
        auto check = [&](double v) {
            const double r = std::round(v);
            if (std::abs(v - r) > 1e-9 || r < 0 || r >= n.cardinality) {
                throw InputError("index_delta: slot value " + std::to_string(v) +
                                 " is not an index in [0, " + std::to_string(n.cardinality) + ")");
            }
            return r;
        };
        return check(a) == check(b) ? 1.0 : 0.0;
    }
    default:
        throw InputError("eval_leaf: composite node");
    }
}

double eval_node(const Node& n, const Span z, const Span z2) {
    double v = 0.0;
    if (n.kind == KernelKind::Sum || n.kind == KernelKind::Product) {
        double a, b;
        if (n.split) {
            const int dl = n.left->dim;
            a = eval_node(*n.left, z.head(dl), z2.head(dl));
            b = eval_node(*n.right, z.tail(n.right->dim), z2.tail(n.right->dim));
        } else {
            a = eval_node(*n.left, z, z2);
            b = eval_node(*n.right, z, z2);
        }
        v = n.kind == KernelKind::Sum ? a + b : a * b;
    } else {
        v = eval_leaf(n, z, z2);
    }
    return v / n.cap;
}

void collect_index_slots(const Node& n, int offset, std::vector<std::pair<int, int>>& out) {
    if (n.kind == KernelKind::IndexDelta) {
        out.emplace_back(offset, n.cardinality);
        return;
    }
    if (n.kind == KernelKind::Sum || n.kind == KernelKind::Product) {
        if (n.split) {
            collect_index_slots(*n.left, offset, out);
            collect_index_slots(*n.right, offset + n.left->dim, out);
        } else {
            // Shared domain: both children describe the same slots; report
            // the left child's view (they must agree to be meaningful).
            collect_index_slots(*n.left, offset, out);
        }
    }
}

std::optional<long long> node_rank(const Node& n) {
    switch (n.kind) {
    case KernelKind::Linear:
        return n.dim;
    case KernelKind::Quadratic:
        return static_cast<long long>(n.dim) * (n.dim + 1) / 2;
    case KernelKind::IndexDelta:
        return n.cardinality;
    case KernelKind::SquaredExponential:
    case KernelKind::Matern:
        return std::nullopt;
    case KernelKind::Sum: {
        auto a = node_rank(*n.left);
        auto b = node_rank(*n.right);
        if (a && b) return *a + *b;
        return std::nullopt;
    }
    case KernelKind::Product: {
        auto a = node_rank(*n.left);
        auto b = node_rank(*n.right);
        if (a && b) return *a * *b;
        return std::nullopt;
    }
    }
    return std::nullopt;
}

const char* kind_name(KernelKind k) {
    switch (k) {
    case KernelKind::Linear: return "linear";
    case KernelKind::SquaredExponential: return "squared_exponential";
    case KernelKind::Matern: return "matern";
    case KernelKind::Quadratic: return "quadratic";
    case KernelKind::IndexDelta: return "index_delta";
    case KernelKind::Sum: return "sum";
    case KernelKind::Product: return "product";
    }
    return "?";
}

nlohmann::json node_to_json(const Node& n) {
    nlohmann::json j;
    j["type"] = kind_name(n.kind);
    switch (n.kind) {
    case KernelKind::Linear:
    case KernelKind::Quadratic:
        j["dim"] = n.dim;
        break;
    case KernelKind::SquaredExponential:
        j["dim"] = n.dim;
        j["lengthscale"] = n.lengthscale;
        break;
    case KernelKind::Matern:
        j["dim"] = n.dim;
        j["nu"] = n.nu;
        j["lengthscale"] = n.lengthscale;
        break;
    case KernelKind::IndexDelta:
        j["cardinality"] = n.cardinality;
        break;
    case KernelKind::Sum:
    case KernelKind::Product:
        j["domain"] = n.split ? "split" : "shared";
        j["left"] = node_to_json(*n.left);
        j["right"] = node_to_json(*n.right);
        break;
    }
    if (n.cap != 1.0) j["variance_cap"] = n.cap;
    return j;
}

} // namespace

Kernel Kernel::linear(int dim) {
    if (dim < 1) throw InputError("linear kernel: dim must be positive");
    auto n = make_node(KernelKind::Linear);
    n->dim = dim;
    return Kernel(n);
}

Kernel Kernel::squared_exponential(int dim, double lengthscale) {
    if (dim < 1) throw InputError("squared_exponential kernel: dim must be positive");
    if (!(lengthscale > 0)) throw InputError("squared_exponential kernel: lengthscale must be positive");
    auto n = make_node(KernelKind::SquaredExponential);
    n->dim = dim;
    n->lengthscale = lengthscale;
    return Kernel(n);
}

Kernel Kernel::matern(int dim, double nu, double lengthscale) {
    if (dim < 1) throw InputError("matern kernel: dim must be positive");
    if (!(lengthscale > 0)) throw InputError("matern kernel: lengthscale must be positive");
    if (nu != 0.5 && nu != 1.5 && nu != 2.5) {
        throw InputError("matern kernel: only nu in {1/2, 3/2, 5/2} is supported");
    }
    auto n = make_node(KernelKind::Matern);
    n->dim = dim;
    n->nu = nu;
    n->lengthscale = lengthscale;
    return Kernel(n);
}

Kernel Kernel::quadratic(int dim) {
    if (dim < 1) throw InputError("quadratic kernel: dim must be positive");
    auto n = make_node(KernelKind::Quadratic);
    n->dim = dim;
    return Kernel(n);
}

Kernel Kernel::index_delta(int cardinality) {
    if (cardinality < 1) throw InputError("index_delta kernel: cardinality must be positive");
    auto n = make_node(KernelKind::IndexDelta);
    n->dim = 1;
    n->cardinality = cardinality;
    return Kernel(n);
}

namespace {

std::shared_ptr<Node> compose_nodes(KernelKind kind, std::shared_ptr<const Node> left,
                                    std::shared_ptr<const Node> right, bool split) {
    if (!left || !right) throw InputError("composite kernel: invalid child");
    if (!split && left->dim != right->dim) {
        throw InputError("shared-domain composite: children must have equal dimension");
    }
    auto n = make_node(kind);
    n->split = split;
    n->dim = split ? left->dim + right->dim : left->dim;
    n->left = std::move(left);
    n->right = std::move(right);
    return n;
}

} // namespace

Kernel Kernel::sum(Kernel left, Kernel right) {
    return Kernel(compose_nodes(KernelKind::Sum, left.root_, right.root_, false));
}

Kernel Kernel::product(Kernel left, Kernel right) {
    return Kernel(compose_nodes(KernelKind::Product, left.root_, right.root_, false));
}

Kernel Kernel::sum_split(Kernel left, Kernel right) {
    return Kernel(compose_nodes(KernelKind::Sum, left.root_, right.root_, true));
}

Kernel Kernel::product_split(Kernel left, Kernel right) {
    return Kernel(compose_nodes(KernelKind::Product, left.root_, right.root_, true));
}

Kernel Kernel::capped(double divisor) const {
    if (!valid()) throw InputError("capped: invalid kernel");
    if (!(divisor > 0)) throw InputError("capped: divisor must be positive");
    auto n = std::make_shared<Node>(*root_);
    n->cap = root_->cap * divisor;
    return Kernel(n);
}

int Kernel::dim() const {
    if (!valid()) throw InputError("kernel dim: invalid kernel");
    return root_->dim;
}

KernelKind Kernel::kind() const {
    if (!valid()) throw InputError("kernel kind: invalid kernel");
    return root_->kind;
}

double Kernel::lengthscale() const {
    if (!valid() || (root_->kind != KernelKind::SquaredExponential && root_->kind != KernelKind::Matern)) {
        throw InputError("lengthscale: not an SE/Matern kernel");
    }
    return root_->lengthscale;
}

double Kernel::nu() const {
    if (!valid() || root_->kind != KernelKind::Matern) throw InputError("nu: not a Matern kernel");
    return root_->nu;
}

int Kernel::cardinality() const {
    if (!valid() || root_->kind != KernelKind::IndexDelta) {
        throw InputError("cardinality: not an index_delta kernel");
    }
    return root_->cardinality;
}

Kernel Kernel::left() const {
    if (!valid() || (root_->kind != KernelKind::Sum && root_->kind != KernelKind::Product)) {
        throw InputError("left: not a composite kernel");
    }
    return Kernel(root_->left);
}

Kernel Kernel::right() const {
    if (!valid() || (root_->kind != KernelKind::Sum && root_->kind != KernelKind::Product)) {
        throw InputError("right: not a composite kernel");
    }
    return Kernel(root_->right);
}

bool Kernel::is_split() const {
    if (!valid() || (root_->kind != KernelKind::Sum && root_->kind != KernelKind::Product)) {
        throw InputError("is_split: not a composite kernel");
    }
    return root_->split;
}

double Kernel::eval(const Vector& z, const Vector& z2) const {
    if (!valid()) throw InputError("kernel eval: invalid kernel");
    if (z.size() != root_->dim || z2.size() != root_->dim) {
        throw InputError("kernel eval: point dimension " + std::to_string(z.size()) + "/" +
                         std::to_string(z2.size()) + " does not match kernel dimension " +
                         std::to_string(root_->dim));
    }
    return eval_node(*root_, z, z2);
}

Matrix Kernel::gram(const std::vector<Vector>& points) const {
    if (points.empty()) throw InputError("gram: empty point list");
    const Eigen::Index n = static_cast<Eigen::Index>(points.size());
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = eval(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Vector Kernel::eval_vector(const std::vector<Vector>& points, const Vector& z) const {
    Vector v(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = eval(points[i], z);
    }
    return v;
}

std::vector<std::pair<int, int>> Kernel::index_slots() const {
    if (!valid()) return {};
    std::vector<std::pair<int, int>> out;
    collect_index_slots(*root_, 0, out);
    return out;
}

std::optional<long long> Kernel::finite_rank() const {
    if (!valid()) return std::nullopt;
    return node_rank(*root_);
}

nlohmann::json Kernel::to_json() const {
    if (!valid()) throw InputError("to_json: invalid kernel");
    return node_to_json(*root_);
}

namespace {

void check_keys(const nlohmann::json& j, const std::string& type,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = it.key() == "type" || it.key() == "variance_cap";
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError("kernel spec '" + type + "': unknown key '" + it.key() + "'");
    }
}

} // namespace

Kernel Kernel::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("kernel spec: expected object");
    if (!j.contains("type")) throw ConfigError("kernel spec: missing 'type'");
    const std::string type = j.at("type").get<std::string>();

    Kernel built;
    try {
        if (type == "linear") {
            check_keys(j, type, {"dim"});
            built = linear(j.at("dim").get<int>());
        } else if (type == "squared_exponential") {
            check_keys(j, type, {"dim", "lengthscale"});
            built = squared_exponential(j.at("dim").get<int>(), j.value("lengthscale", 1.0));
        } else if (type == "matern") {
            check_keys(j, type, {"dim", "nu", "lengthscale"});
            built = matern(j.at("dim").get<int>(), j.at("nu").get<double>(),
                           j.value("lengthscale", 1.0));
        } else if (type == "quadratic") {
            check_keys(j, type, {"dim"});
            built = quadratic(j.at("dim").get<int>());
        } else if (type == "index_delta") {
            check_keys(j, type, {"cardinality"});
            built = index_delta(j.at("cardinality").get<int>());
        } else if (type == "sum" || type == "product") {
            check_keys(j, type, {"domain", "left", "right"});
            const std::string domain = j.value("domain", "split");
            if (domain != "shared" && domain != "split") {
                throw ConfigError("kernel spec: domain must be 'shared' or 'split'");
            }
            Kernel left = from_json(j.at("left"));
            Kernel right = from_json(j.at("right"));
            const bool split = domain == "split";
            if (type == "sum") {
                built = split ? sum_split(left, right) : sum(left, right);
            } else {
                built = split ? product_split(left, right) : product(left, right);
            }
        } else {
            throw ConfigError("kernel spec: unknown type '" + type + "'");
        }
    } catch (const InputError& e) {
        throw ConfigError(std::string("kernel spec: ") + e.what());
    }

    if (j.contains("variance_cap")) {
        const double cap = j.at("variance_cap").get<double>();
        if (!(cap > 0)) throw ConfigError("kernel spec: variance_cap must be positive");
        built = built.capped(cap);
    }
    return built;
}

std::string Kernel::to_string() const {
    return to_json().dump();
}

std::uint64_t Kernel::hash() const {
    return hash64(to_string());
}

RkhsFunction::RkhsFunction(Kernel kernel, std::vector<Vector> centers, Vector coefficients)
    : kernel_(std::move(kernel)), centers_(std::move(centers)), coefficients_(std::move(coefficients)) {
    if (centers_.empty()) throw InputError("RkhsFunction: needs at least one center");
    if (static_cast<Eigen::Index>(centers_.size()) != coefficients_.size()) {
        throw InputError("RkhsFunction: centers/coefficients size mismatch");
    }
    const Matrix k = kernel_.gram(centers_);
    const double sq = coefficients_.dot(k * coefficients_);
    norm_ = std::sqrt(std::max(sq, 0.0));
}

double RkhsFunction::eval(const Vector& z) const {
    double v = 0.0;
    for (std::size_t i = 0; i < centers_.size(); ++i) {
        v += coefficients_[static_cast<Eigen::Index>(i)] * kernel_.eval(centers_[i], z);
    }
    return v;
}

RkhsFunction rkhs_sample(const Kernel& kernel, const Box& domain, int n_centers,
                         double norm_bound, Rng& rng) {
    if (n_centers < 1) throw InputError("rkhs_sample: n_centers must be >= 1");
    if (!(norm_bound > 0)) throw InputError("rkhs_sample: norm_bound must be positive");
    if (domain.dim() != kernel.dim()) throw InputError("rkhs_sample: domain/kernel dimension mismatch");

    const auto idx_slots = kernel.index_slots();
    std::vector<Vector> centers;
    centers.reserve(static_cast<std::size_t>(n_centers));
    for (int i = 0; i < n_centers; ++i) {
        Vector c = domain.sample(rng);
        for (const auto& [slot, card] : idx_slots) {
            c[slot] = static_cast<double>(rng.uniform_int(static_cast<std::uint64_t>(card)));
        }
        centers.push_back(std::move(c));
    }

    Vector alpha = rng.normal_vector(n_centers);
    Matrix k = kernel.gram(centers);
    double sq = alpha.dot(k * alpha);
    if (sq <= 0) {
        // Degenerate Gram (e.g. coincident centers): regularize, then retry.
        k.diagonal().array() += 1e-10;
        sq = alpha.dot(k * alpha);
        if (sq <= 0) throw NumericError("rkhs_sample: degenerate Gram matrix, zero norm");
    }
    alpha *= norm_bound / std::sqrt(sq);
    return RkhsFunction(kernel, std::move(centers), std::move(alpha));
}

} // namespace kmdp
