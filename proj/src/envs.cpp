#include "kmdp/envs.hpp"

#include "kmdp/gp.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <sstream>

namespace kmdp {

void EpisodicEnv::check_inputs(const Vector& s, const Vector& a) const {
    if (s.size() != state_dim()) throw InputError("env step: state dimension mismatch");
    if (a.size() != action_dim()) throw InputError("env step: action dimension mismatch");
    if (!state_box().contains(s, 1e-9)) throw InputError("env step: state outside the state box");
    if (!action_box().contains(a, 1e-9)) throw InputError("env step: action outside the action box");
}

Vector EpisodicEnv::make_z(const Vector& s, const Vector& a) const {
    Vector z(s.size() + a.size());
    z.head(s.size()) = s;
    z.tail(a.size()) = a;
    return z;
}

std::pair<double, Vector> EpisodicEnv::step(const Vector& s, const Vector& a, Rng& rng) const {
    check_inputs(s, a);
    const Vector z = make_z(s, a);
    const double r = oracle_mean_reward(z) + sigma_r() * rng.normal();
    Vector next = oracle_mean_transition(z);
    if (sigma_p() > 0) next += sigma_p() * rng.normal_vector(next.size());
    return {r, state_box().clip(next)};
}

// --- LqrEnv -----------------------------------------------------------------

LqrEnv::LqrEnv(Matrix a, Matrix b, Matrix p, Matrix q, Box state_box, Box action_box, int horizon,
               double sigma_r, double sigma_p, bool paper_literal_sign)
    : a_(std::move(a)), b_(std::move(b)), p_(std::move(p)), q_(std::move(q)),
      state_box_(std::move(state_box)), action_box_(std::move(action_box)), horizon_(horizon),
      sigma_r_(sigma_r), sigma_p_(sigma_p), paper_literal_sign_(paper_literal_sign) {
    const auto m = a_.rows();
    const auto n = b_.cols();
    if (a_.cols() != m || b_.rows() != m) throw InputError("LqrEnv: A must be m x m, B m x n");
    if (p_.rows() != m || p_.cols() != m) throw InputError("LqrEnv: P must be m x m");
    if (q_.rows() != n || q_.cols() != n) throw InputError("LqrEnv: Q must be n x n");
    if (state_box_.dim() != m || action_box_.dim() != n) {
        throw InputError("LqrEnv: box dimensions must match A/B");
    }
    if (horizon_ < 1) throw InputError("LqrEnv: horizon must be >= 1");
    if (sigma_r_ < 0 || sigma_p_ < 0) throw InputError("LqrEnv: noise scales must be >= 0");
    initial_state_ = state_box_.center();
}

void LqrEnv::set_initial_state(Vector s0) {
    if (!state_box_.contains(s0)) throw InputError("LqrEnv: initial state outside the state box");
    initial_state_ = std::move(s0);
}

double LqrEnv::oracle_mean_reward(const Vector& z) const {
    const auto m = a_.rows();
    const Vector s = z.head(m);
    const Vector a = z.tail(b_.cols());
    const double v = s.dot(p_ * s) + a.dot(q_ * a);
    return paper_literal_sign_ ? v : -v;
}

Vector LqrEnv::oracle_mean_transition(const Vector& z) const {
    const auto m = a_.rows();
    return a_ * z.head(m) + b_ * z.tail(b_.cols());
}

Matrix riccati_map(const Matrix& g, const Matrix& a, const Matrix& b, const Matrix& p,
                   const Matrix& q) {
    const Matrix btg = b.transpose() * g;
    const Matrix inner = q + btg * b;
    const Matrix gain = inner.ldlt().solve(btg * a);
    return p + a.transpose() * g * a - a.transpose() * g * b * gain;
}

Matrix riccati_solve(const Matrix& a, const Matrix& b, const Matrix& p, const Matrix& q) {
    Matrix g = p;
    for (int it = 0; it < 10000; ++it) {
        Matrix next = riccati_map(g, a, b, p, q);
        // Symmetrize against drift.
        next = 0.5 * (next + next.transpose());
        if ((next - g).cwiseAbs().maxCoeff() <= 1e-10) return next;
        g = std::move(next);
    }
    throw NumericError("riccati_solve: fixed-point iteration did not converge in 10000 steps");
}

double lqr_lipschitz_bound(const LqrEnv& env) {
    const Matrix g = riccati_solve(env.a(), env.b(), env.p(), env.q());
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    if (es.info() != Eigen::Success) throw NumericError("lqr_lipschitz_bound: eigensolver failed");
    const double lambda1 = es.eigenvalues().maxCoeff();
    return env.state_box().diameter() * lambda1;
}

LqrKernelSetup lqr_kernel_setup(const LqrEnv& env) {
    const int m = env.state_dim();
    const int n = env.action_dim();
    const double ms = env.state_box().max_sq_norm();  // max ||s||^2
    const double ma = env.action_box().max_sq_norm(); // max ||a||^2

    // Reward kernel (s^T s')^2 + (a^T a')^2 has self-similarity up to
    // ms^2 + ma^2 over the boxes; the transition base kernel s^T s' + a^T a'
    // up to ms + ma. Dividing by those constants gives k(z,z) <= 1; the true
    // functions keep their RKHS membership with norms scaled by sqrt(cap).
    const double cap_r = ms * ms + ma * ma;
    const double cap_p = ms + ma;

    LqrKernelSetup setup;
    setup.reward_kernel =
        Kernel::sum_split(Kernel::quadratic(m), Kernel::quadratic(n)).capped(cap_r);
    setup.transition_kernel =
        Kernel::product_split(Kernel::sum_split(Kernel::linear(m), Kernel::linear(n)),
                              Kernel::index_delta(m))
            .capped(cap_p);

    const double b_r_raw = std::sqrt(env.p().squaredNorm() + env.q().squaredNorm());
    const double b_p_raw = std::sqrt(env.a().squaredNorm() + env.b().squaredNorm());
    setup.b_r = std::sqrt(cap_r) * b_r_raw;
    setup.b_p = std::sqrt(cap_p) * b_p_raw;
    return setup;
}

// --- TabularEnv ---------------------------------------------------------------

TabularEnv::TabularEnv(Matrix reward, std::vector<std::vector<std::vector<double>>> transition,
                       int horizon, double sigma_r, int initial_state)
    : reward_(std::move(reward)), transition_(std::move(transition)), horizon_(horizon),
      sigma_r_(sigma_r), initial_state_(initial_state) {
    const int ns = n_states();
    const int na = n_actions();
    if (ns < 1 || na < 1) throw InputError("TabularEnv: needs at least one state and action");
    if (horizon_ < 1) throw InputError("TabularEnv: horizon must be >= 1");
    if (sigma_r_ < 0) throw InputError("TabularEnv: sigma_r must be >= 0");
    if (initial_state_ < 0 || initial_state_ >= ns) throw InputError("TabularEnv: bad initial state");
    if (static_cast<int>(transition_.size()) != ns) {
        throw InputError("TabularEnv: transition table must have |S| rows");
    }
    for (const auto& per_state : transition_) {
        if (static_cast<int>(per_state.size()) != na) {
            throw InputError("TabularEnv: transition table must have |A| columns");
        }
        for (const auto& row : per_state) {
            if (static_cast<int>(row.size()) != ns) {
                throw InputError("TabularEnv: transition rows must have |S| entries");
            }
            double sum = 0.0;
            for (double p : row) {
                if (p < 0) throw InputError("TabularEnv: negative transition probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12) {
                throw InputError("TabularEnv: transition row sums to " + std::to_string(sum));
            }
        }
    }
    state_box_ = Box(Vector::Zero(1), Vector::Constant(1, static_cast<double>(ns - 1)));
    action_box_ = Box(Vector::Zero(1), Vector::Constant(1, static_cast<double>(na - 1)));
}

Vector TabularEnv::initial_state() const {
    return Vector::Constant(1, static_cast<double>(initial_state_));
}

std::pair<int, int> TabularEnv::decode(const Vector& z) const {
    if (z.size() != 2) throw InputError("TabularEnv: z must be (state index, action index)");
    auto to_index = [](double v, int bound, const char* what) {
        const double r = std::round(v);
        if (std::abs(v - r) > 1e-9 || r < 0 || r >= bound) {
            throw InputError(std::string("TabularEnv: bad ") + what + " index");
        }
        return static_cast<int>(r);
    };
    return {to_index(z[0], n_states(), "state"), to_index(z[1], n_actions(), "action")};
}

double TabularEnv::oracle_mean_reward(const Vector& z) const {
    auto [s, a] = decode(z);
    return reward_(s, a);
}

Vector TabularEnv::oracle_mean_transition(const Vector& z) const {
    auto [s, a] = decode(z);
    const auto& row = transition_[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
    double mean = 0.0;
    for (int k = 0; k < n_states(); ++k) mean += row[static_cast<std::size_t>(k)] * k;
    return Vector::Constant(1, mean);
}

std::pair<double, Vector> TabularEnv::step(const Vector& s, const Vector& a, Rng& rng) const {
    check_inputs(s, a);
    const Vector z = make_z(s, a);
    auto [si, ai] = decode(z);
    const double r = reward_(si, ai) + sigma_r_ * rng.normal();
    const auto& row = transition_[static_cast<std::size_t>(si)][static_cast<std::size_t>(ai)];
    const double u = rng.uniform();
    double acc = 0.0;
    int next = n_states() - 1;
    for (int k = 0; k < n_states(); ++k) {
        acc += row[static_cast<std::size_t>(k)];
        if (u < acc) {
            next = k;
            break;
        }
    }
    return {r, Vector::Constant(1, static_cast<double>(next))};
}

double TabularEnv::transition_prob(int s, int a, int s_next) const {
    if (s < 0 || s >= n_states() || a < 0 || a >= n_actions() || s_next < 0 || s_next >= n_states()) {
        throw InputError("transition_prob: index out of range");
    }
    return transition_[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]
                      [static_cast<std::size_t>(s_next)];
}

TabularEnv TabularEnv::from_csv(const std::string& path, int horizon, double sigma_r,
                                int initial_state) {
    std::ifstream in(path);
    if (!in) throw IoError("TabularEnv::from_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("TabularEnv::from_csv: empty file " + path);
    // header: s,a,reward_mean,p0,p1,...
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) header.push_back(tok);
    }
    if (header.size() < 4 || header[0] != "s" || header[1] != "a" || header[2] != "reward_mean") {
        throw IoError("TabularEnv::from_csv: bad header in " + path);
    }
    const int ns = static_cast<int>(header.size()) - 3;

    struct Row {
        int s, a;
        double r;
        std::vector<double> p;
    };
    std::vector<Row> rows;
    int max_a = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (static_cast<int>(f.size()) != ns + 3) {
            throw IoError("TabularEnv::from_csv: row with wrong field count in " + path);
        }
        Row row;
        row.s = static_cast<int>(parse_double(f[0]));
        row.a = static_cast<int>(parse_double(f[1]));
        row.r = parse_double(f[2]);
        for (int k = 0; k < ns; ++k) row.p.push_back(parse_double(f[static_cast<std::size_t>(3 + k)]));
        max_a = std::max(max_a, row.a);
        rows.push_back(std::move(row));
    }
    const int na = max_a + 1;
    if (static_cast<int>(rows.size()) != ns * na) {
        throw IoError("TabularEnv::from_csv: expected one row per (s, a) cell");
    }
    Matrix reward = Matrix::Zero(ns, na);
    std::vector<std::vector<std::vector<double>>> transition(
        static_cast<std::size_t>(ns),
        std::vector<std::vector<double>>(static_cast<std::size_t>(na),
                                         std::vector<double>(static_cast<std::size_t>(ns), 0.0)));
    for (const Row& row : rows) {
        if (row.s < 0 || row.s >= ns || row.a < 0 || row.a >= na) {
            throw IoError("TabularEnv::from_csv: index out of range");
        }
        reward(row.s, row.a) = row.r;
        transition[static_cast<std::size_t>(row.s)][static_cast<std::size_t>(row.a)] = row.p;
    }
    return TabularEnv(std::move(reward), std::move(transition), horizon, sigma_r, initial_state);
}

std::pair<Kernel, Kernel> tabular_as_kernel(const TabularEnv& env) {
    Kernel cell = Kernel::product_split(Kernel::index_delta(env.n_states()),
                                        Kernel::index_delta(env.n_actions()));
    Kernel transition = Kernel::product_split(cell, Kernel::index_delta(1));
    return {cell, transition};
}

// --- RkhsEnv -----------------------------------------------------------------

RkhsEnv::RkhsEnv(RkhsFunction reward, RkhsFunction transition_indexed, Box state_box,
                 Box action_box, int horizon, double sigma_r, double sigma_p)
    : reward_(std::move(reward)), transition_(std::move(transition_indexed)),
      state_box_(std::move(state_box)), action_box_(std::move(action_box)), horizon_(horizon),
      sigma_r_(sigma_r), sigma_p_(sigma_p) {
    if (horizon_ < 1) throw InputError("RkhsEnv: horizon must be >= 1");
    if (sigma_r_ < 0 || sigma_p_ < 0) throw InputError("RkhsEnv: noise scales must be >= 0");
    const int zdim = static_cast<int>(state_box_.dim() + action_box_.dim());
    if (reward_.kernel().dim() != zdim) {
        throw InputError("RkhsEnv: reward function dimension must be m + n");
    }
    if (transition_.kernel().dim() != zdim + 1) {
        throw InputError("RkhsEnv: transition function dimension must be m + n + 1 (index slot)");
    }
}

double RkhsEnv::oracle_mean_reward(const Vector& z) const {
    return reward_(z);
}

Vector RkhsEnv::oracle_mean_transition(const Vector& z) const {
    const int m = state_dim();
    Vector out(m);
    for (int i = 0; i < m; ++i) {
        out[i] = transition_(TransitionPosterior::indexed_point(z, i));
    }
    return out;
}

} // namespace kmdp
