#include "kmdp/gp.hpp"

#include <Eigen/Cholesky>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace kmdp {

namespace {

// Row-packed lower-triangular factor; row i holds i+1 entries. Append-only.
struct PackedCholesky {
    std::vector<double> a;
    int n = 0;

    const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * (i + 1) / 2; }

    // Solves L[0..rows) x = b in place.
    void forward_solve(int rows, double* b) const {
        for (int i = 0; i < rows; ++i) {
            const double* ri = row(i);
            double s = b[i];
            for (int j = 0; j < i; ++j) s -= ri[j] * b[j];
            b[i] = s / ri[i];
        }
    }

    // Appends the row [b^T, d] where b solves L b = kvec and
    // d = sqrt(diag_value - b.b). Returns (b, d) via out params.
    double append_row(const Vector& kvec, double diag_value, Vector& b_out) {
        b_out = kvec;
        forward_solve(n, b_out.data());
        const double d2 = diag_value - b_out.squaredNorm();
        if (!(d2 > 0)) {
            throw NumericError("incremental Cholesky: non-positive pivot (d^2 = " +
                               std::to_string(d2) + ")");
        }
        const double d = std::sqrt(d2);
        a.insert(a.end(), b_out.data(), b_out.data() + n);
        a.push_back(d);
        ++n;
        return d;
    }
};

} // namespace

struct GpPosterior::Core {
    Kernel kernel;
    double lambda = 1.0;

    // Append-only training state; a value with n_ = k sees the first k rows.
    std::vector<Vector> inputs;
    std::vector<double> targets;
    PackedCholesky chol;
    std::vector<double> w; // entries of L^{-1} y (append-only)

    // Tracked grid (fixed at construction).
    std::vector<Vector> grid;
    Matrix grid_prior;             // prior Gram on the grid
    std::vector<Vector> v_rows;    // rows of L^{-1} K(train, grid), append-only
};

GpPosterior::GpPosterior(Kernel kernel, double noise_lambda)
    : GpPosterior(std::move(kernel), noise_lambda, std::vector<Vector>{}) {}

GpPosterior::GpPosterior(Kernel kernel, double noise_lambda, std::vector<Vector> tracked_grid) {
    if (!kernel.valid()) throw InputError("GpPosterior: invalid kernel");
    if (!(noise_lambda > 0)) throw InputError("GpPosterior: noise lambda must be positive");
    core_ = std::make_shared<Core>();
    core_->kernel = std::move(kernel);
    core_->lambda = noise_lambda;
    if (!tracked_grid.empty()) {
        core_->grid_prior = core_->kernel.gram(tracked_grid);
        core_->grid = std::move(tracked_grid);
        grid_mean_ = Vector::Zero(static_cast<Eigen::Index>(core_->grid.size()));
        grid_cov_ = core_->grid_prior;
    }
}

void GpPosterior::require_valid() const {
    if (!valid()) throw InputError("GpPosterior: default-constructed (no kernel)");
}

double GpPosterior::noise_lambda() const {
    require_valid();
    return core_->lambda;
}

const Kernel& GpPosterior::kernel() const {
    require_valid();
    return core_->kernel;
}

const std::vector<Vector>& GpPosterior::inputs() const {
    require_valid();
    return core_->inputs;
}

const std::vector<double>& GpPosterior::targets() const {
    require_valid();
    return core_->targets;
}

GpPosterior GpPosterior::fork() const {
    // Branching off a non-tip snapshot: clone the first n_ rows into a fresh
    // core so the original storage stays untouched.
    GpPosterior out;
    out.core_ = std::make_shared<Core>();
    out.core_->kernel = core_->kernel;
    out.core_->lambda = core_->lambda;
    out.core_->inputs.assign(core_->inputs.begin(), core_->inputs.begin() + n_);
    out.core_->targets.assign(core_->targets.begin(), core_->targets.begin() + n_);
    out.core_->chol.n = n_;
    out.core_->chol.a.assign(core_->chol.a.begin(),
                             core_->chol.a.begin() + static_cast<std::size_t>(n_) * (n_ + 1) / 2);
    out.core_->w.assign(core_->w.begin(), core_->w.begin() + n_);
    out.core_->grid = core_->grid;
    out.core_->grid_prior = core_->grid_prior;
    if (!core_->grid.empty()) {
        out.core_->v_rows.assign(core_->v_rows.begin(), core_->v_rows.begin() + n_);
    }
    out.n_ = n_;
    out.grid_mean_ = grid_mean_;
    out.grid_cov_ = grid_cov_;
    return out;
}

void GpPosterior::append_one(const Vector& point, double target) {
    Core& c = *core_;
    if (point.size() != c.kernel.dim()) {
        throw InputError("GpPosterior::update: point dimension mismatch");
    }
    if (!std::isfinite(target)) throw InputError("GpPosterior::update: non-finite target");

    const int n = n_;
    Vector kvec(n);
    for (int i = 0; i < n; ++i) kvec[i] = c.kernel.eval(c.inputs[static_cast<std::size_t>(i)], point);
    const double kzz = c.kernel.eval(point, point);

    Vector b;
    const double d = c.chol.append_row(kvec, kzz + c.lambda, b);

    double wb = 0.0;
    for (int i = 0; i < n; ++i) wb += b[i] * c.w[static_cast<std::size_t>(i)];
    const double w_new = (target - wb) / d;
    c.w.push_back(w_new);

    if (!c.grid.empty()) {
        const Eigen::Index g = static_cast<Eigen::Index>(c.grid.size());
        Vector v_new = c.kernel.eval_vector(c.grid, point);
        for (int i = 0; i < n; ++i) v_new.noalias() -= b[i] * c.v_rows[static_cast<std::size_t>(i)];
        v_new /= d;
        grid_mean_.noalias() += w_new * v_new;
        grid_cov_.noalias() -= v_new * v_new.transpose();
        (void)g;
        c.v_rows.push_back(std::move(v_new));
    }

    c.inputs.push_back(point);
    c.targets.push_back(target);
    ++n_;
}

GpPosterior GpPosterior::update(const std::vector<Vector>& points,
                                const std::vector<double>& targets) const {
    require_valid();
    if (points.size() != targets.size()) {
        throw InputError("GpPosterior::update: points/targets size mismatch");
    }
    // Appending in place is only legal at the storage tip; a value branched
    // off an older snapshot clones its prefix first.
    GpPosterior out = (core_->chol.n == n_) ? *this : fork();
    for (std::size_t i = 0; i < points.size(); ++i) {
        out.append_one(points[i], targets[i]);
    }
    return out;
}

std::pair<double, double> GpPosterior::predict(const Vector& z) const {
    require_valid();
    const Core& c = *core_;
    if (z.size() != c.kernel.dim()) throw InputError("GpPosterior::predict: dimension mismatch");
    const double kzz = c.kernel.eval(z, z);
    if (n_ == 0) return {0.0, kzz};

    Vector v(n_);
    for (int i = 0; i < n_; ++i) v[i] = c.kernel.eval(c.inputs[static_cast<std::size_t>(i)], z);
    c.chol.forward_solve(n_, v.data());

    double mean = 0.0;
    for (int i = 0; i < n_; ++i) mean += v[i] * c.w[static_cast<std::size_t>(i)];
    double var = kzz - v.squaredNorm();
    if (var < 0) var = 0.0;
    if (var > kzz) var = kzz;
    return {mean, var};
}

bool GpPosterior::tracks_grid() const {
    require_valid();
    return !core_->grid.empty();
}

const std::vector<Vector>& GpPosterior::tracked_grid() const {
    require_valid();
    return core_->grid;
}

const Vector& GpPosterior::grid_mean() const {
    if (!tracks_grid()) throw InputError("grid_mean: no tracked grid");
    return grid_mean_;
}

const Matrix& GpPosterior::grid_cov() const {
    if (!tracks_grid()) throw InputError("grid_cov: no tracked grid");
    return grid_cov_;
}

Vector GpPosterior::grid_sd() const {
    const Matrix& cov = grid_cov();
    return cov.diagonal().cwiseMax(0.0).cwiseSqrt();
}

namespace {

bool same_points(const std::vector<Vector>& a, const std::vector<Vector>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size() || a[i] != b[i]) return false;
    }
    return true;
}

Matrix factor_with_jitter(Matrix cov) {
    double jitter = 1e-10;
    for (int attempt = 0; attempt < 3; ++attempt, jitter *= 100.0) {
        Matrix c = cov;
        c.diagonal().array() += jitter;
        Eigen::LLT<Matrix> llt(c);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw NumericError("sample_on_grid: covariance factorization failed at jitter 1e-6");
}

} // namespace

Vector GpPosterior::sample_on_grid(const std::vector<Vector>& grid, Rng& rng) const {
    require_valid();
    if (grid.empty()) throw InputError("sample_on_grid: empty grid");

    Vector mean;
    Matrix cov;
    if (tracks_grid() && same_points(grid, core_->grid)) {
        mean = grid_mean_;
        cov = grid_cov_;
    } else {
        const Core& c = *core_;
        const Eigen::Index g = static_cast<Eigen::Index>(grid.size());
        Matrix k_cross(n_, g); // K(train, grid)
        for (Eigen::Index j = 0; j < g; ++j) {
            for (int i = 0; i < n_; ++i) {
                k_cross(i, j) = c.kernel.eval(c.inputs[static_cast<std::size_t>(i)],
                                              grid[static_cast<std::size_t>(j)]);
            }
        }
        for (Eigen::Index j = 0; j < g; ++j) {
            c.chol.forward_solve(n_, k_cross.col(j).data());
        }
        mean = Vector::Zero(g);
        for (int i = 0; i < n_; ++i) {
            mean.noalias() += c.w[static_cast<std::size_t>(i)] * k_cross.row(i).transpose();
        }
        cov = c.kernel.gram(grid) - k_cross.transpose() * k_cross;
    }

    const Matrix l = factor_with_jitter(std::move(cov));
    return mean + l * rng.normal_vector(mean.size());
}

// --- serialization ---------------------------------------------------------

namespace {

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw IoError("GpPosterior::load: truncated stream");
    return v;
}

double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw IoError("GpPosterior::load: truncated stream");
    return v;
}

constexpr char kSnapshotMagic[8] = {'K', 'M', 'D', 'P', 'G', 'P', '0', '1'};

} // namespace

void GpPosterior::save(std::ostream& out) const {
    require_valid();
    const Core& c = *core_;
    out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
    const std::string spec = c.kernel.to_string();
    write_u64(out, spec.size());
    out.write(spec.data(), static_cast<std::streamsize>(spec.size()));
    write_f64(out, c.lambda);
    write_u64(out, static_cast<std::uint64_t>(n_));
    write_u64(out, static_cast<std::uint64_t>(c.kernel.dim()));
    for (int i = 0; i < n_; ++i) {
        const Vector& p = c.inputs[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < p.size(); ++j) write_f64(out, p[j]);
        write_f64(out, c.targets[static_cast<std::size_t>(i)]);
    }
    write_u64(out, static_cast<std::uint64_t>(c.grid.size()));
    for (const Vector& p : c.grid) {
        for (Eigen::Index j = 0; j < p.size(); ++j) write_f64(out, p[j]);
    }
    if (!out) throw IoError("GpPosterior::save: write failure");
}

GpPosterior GpPosterior::load(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) {
        throw IoError("GpPosterior::load: bad magic");
    }
    const std::uint64_t spec_len = read_u64(in);
    std::string spec(spec_len, '\0');
    in.read(spec.data(), static_cast<std::streamsize>(spec_len));
    if (!in) throw IoError("GpPosterior::load: truncated kernel spec");
    Kernel kernel = Kernel::from_json(nlohmann::json::parse(spec));
    const double lambda = read_f64(in);
    const int n = static_cast<int>(read_u64(in));
    const int dim = static_cast<int>(read_u64(in));
    std::vector<Vector> inputs;
    std::vector<double> targets;
    inputs.reserve(static_cast<std::size_t>(n));
    targets.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Vector p(dim);
        for (int j = 0; j < dim; ++j) p[j] = read_f64(in);
        inputs.push_back(std::move(p));
        targets.push_back(read_f64(in));
    }
    const int g = static_cast<int>(read_u64(in));
    std::vector<Vector> grid;
    grid.reserve(static_cast<std::size_t>(g));
    for (int i = 0; i < g; ++i) {
        Vector p(dim);
        for (int j = 0; j < dim; ++j) p[j] = read_f64(in);
        grid.push_back(std::move(p));
    }
    GpPosterior out(std::move(kernel), lambda, std::move(grid));
    return out.update(inputs, targets);
}

// --- TransitionPosterior ----------------------------------------------------

TransitionPosterior::TransitionPosterior(Kernel kernel_p, double noise_lambda, int state_dim)
    : inner_(std::move(kernel_p), noise_lambda), m_(state_dim) {
    if (state_dim < 1) throw InputError("TransitionPosterior: state_dim must be positive");
}

TransitionPosterior::TransitionPosterior(Kernel kernel_p, double noise_lambda, int state_dim,
                                         const std::vector<Vector>& z_grid)
    : m_(state_dim) {
    if (state_dim < 1) throw InputError("TransitionPosterior: state_dim must be positive");
    inner_ = GpPosterior(std::move(kernel_p), noise_lambda, indexed_grid(z_grid, state_dim));
}

Vector TransitionPosterior::indexed_point(const Vector& z, int index) {
    Vector p(z.size() + 1);
    p.head(z.size()) = z;
    p[z.size()] = static_cast<double>(index);
    return p;
}

std::vector<Vector> TransitionPosterior::indexed_grid(const std::vector<Vector>& z_grid, int m) {
    std::vector<Vector> out;
    out.reserve(z_grid.size() * static_cast<std::size_t>(m));
    for (const Vector& z : z_grid) {
        for (int i = 0; i < m; ++i) out.push_back(indexed_point(z, i));
    }
    return out;
}

TransitionPosterior TransitionPosterior::update(const std::vector<Vector>& z_points,
                                                const std::vector<Vector>& next_states) const {
    if (!valid()) throw InputError("TransitionPosterior: default-constructed");
    if (z_points.size() != next_states.size()) {
        throw InputError("TransitionPosterior::update: size mismatch");
    }
    std::vector<Vector> pts;
    std::vector<double> ys;
    pts.reserve(z_points.size() * static_cast<std::size_t>(m_));
    ys.reserve(pts.capacity());
    for (std::size_t k = 0; k < z_points.size(); ++k) {
        if (next_states[k].size() != m_) {
            throw InputError("TransitionPosterior::update: next state has wrong dimension");
        }
        for (int i = 0; i < m_; ++i) {
            pts.push_back(indexed_point(z_points[k], i));
            ys.push_back(next_states[k][i]);
        }
    }
    TransitionPosterior out;
    out.inner_ = inner_.update(pts, ys);
    out.m_ = m_;
    return out;
}

std::pair<Vector, Vector> TransitionPosterior::predict(const Vector& z) const {
    if (!valid()) throw InputError("TransitionPosterior: default-constructed");
    Vector mean(m_), sd(m_);
    for (int i = 0; i < m_; ++i) {
        auto [mu, var] = inner_.predict(indexed_point(z, i));
        mean[i] = mu;
        sd[i] = std::sqrt(std::max(var, 0.0));
    }
    return {mean, sd};
}

} // namespace kmdp
