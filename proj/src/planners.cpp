#include "kmdp/planners.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace kmdp {

Grid Grid::uniform(const Box& state_box, int state_points_per_dim, const Box& action_box,
                   int action_points_per_dim) {
    if (state_points_per_dim < 1 || action_points_per_dim < 1) {
        throw InputError("Grid::uniform: points per dimension must be >= 1");
    }
    Grid g;
    const int sd = static_cast<int>(state_box.dim());
    const int ad = static_cast<int>(action_box.dim());

    auto linspace = [](double lo, double hi, int n, int i) {
        return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
    };
    auto product_points = [&](const Box& box, int per_dim) {
        const int d = static_cast<int>(box.dim());
        int total = 1;
        for (int k = 0; k < d; ++k) total *= per_dim;
        std::vector<Vector> pts;
        pts.reserve(static_cast<std::size_t>(total));
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        for (int c = 0; c < total; ++c) {
            Vector p(d);
            for (int k = 0; k < d; ++k) {
                p[k] = linspace(box.lo[k], box.hi[k], per_dim, idx[static_cast<std::size_t>(k)]);
            }
            pts.push_back(std::move(p));
            for (int k = d - 1; k >= 0; --k) {
                if (++idx[static_cast<std::size_t>(k)] < per_dim) break;
                idx[static_cast<std::size_t>(k)] = 0;
            }
        }
        return pts;
    };

    g.states_ = product_points(state_box, state_points_per_dim);
    g.actions_ = product_points(action_box, action_points_per_dim);
    g.state_lo_ = state_box.lo;
    g.state_step_ = Vector(sd);
    g.state_counts_.assign(static_cast<std::size_t>(sd), state_points_per_dim);
    for (int k = 0; k < sd; ++k) {
        g.state_step_[k] = state_points_per_dim == 1
                               ? 1.0
                               : (state_box.hi[k] - state_box.lo[k]) / (state_points_per_dim - 1);
    }
    (void)ad;
    return g;
}

Grid Grid::tabular(int n_states, int n_actions) {
    if (n_states < 1 || n_actions < 1) throw InputError("Grid::tabular: sizes must be >= 1");
    Grid g;
    for (int i = 0; i < n_states; ++i) g.states_.push_back(Vector::Constant(1, i));
    for (int j = 0; j < n_actions; ++j) g.actions_.push_back(Vector::Constant(1, j));
    g.state_lo_ = Vector::Zero(1);
    g.state_step_ = Vector::Constant(1, 1.0);
    g.state_counts_.assign(1, n_states);
    return g;
}

int Grid::snap_state(const Vector& s) const {
    const int d = static_cast<int>(state_lo_.size());
    if (s.size() != d) throw InputError("snap_state: dimension mismatch");
    int index = 0;
    for (int k = 0; k < d; ++k) {
        const int count = state_counts_[static_cast<std::size_t>(k)];
        int i = 0;
        if (count > 1) {
            i = static_cast<int>(std::lround((s[k] - state_lo_[k]) / state_step_[k]));
            i = std::max(0, std::min(count - 1, i));
        }
        index = index * count + i;
    }
    return index;
}

double Grid::snap_radius() const {
    // Half cell diagonal; for single-point dimensions the whole extent
    // collapses to the centre, which is still within half the (unit) step.
    double sq = 0.0;
    for (std::size_t k = 0; k < state_counts_.size(); ++k) {
        const double half = 0.5 * state_step_[static_cast<Eigen::Index>(k)];
        sq += half * half;
    }
    return std::sqrt(sq);
}

std::vector<Vector> Grid::z_points() const {
    std::vector<Vector> zs;
    zs.reserve(states_.size() * actions_.size());
    for (const Vector& s : states_) {
        for (const Vector& a : actions_) {
            Vector z(s.size() + a.size());
            z.head(s.size()) = s;
            z.tail(a.size()) = a;
            zs.push_back(std::move(z));
        }
    }
    return zs;
}

std::pair<Policy, ValueTable> plan(const GridModel& model, const Grid& grid, int horizon) {
    const int ns = grid.n_states();
    const int na = grid.n_actions();
    Policy policy;
    policy.horizon = horizon;
    policy.n_states = ns;
    policy.action.assign(static_cast<std::size_t>(ns) * horizon, 0);
    ValueTable values;
    values.horizon = horizon;
    values.n_states = ns;
    values.value.assign(static_cast<std::size_t>(ns) * (horizon + 1), 0.0);

    for (int h = horizon; h >= 1; --h) {
        for (int s = 0; s < ns; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < na; ++a) {
                const double v = model.reward(s, a) + values.at(model.next_state(s, a), h + 1);
                if (v > best) {
                    best = v;
                    best_a = a;
                }
            }
            values.at(s, h) = best;
            policy.at(s, h) = best_a;
        }
    }
    return {policy, values};
}

ValueTable evaluate_policy(const GridModel& model, const Grid& grid, const Policy& policy,
                           int horizon) {
    const int ns = grid.n_states();
    ValueTable values;
    values.horizon = horizon;
    values.n_states = ns;
    values.value.assign(static_cast<std::size_t>(ns) * (horizon + 1), 0.0);
    for (int h = horizon; h >= 1; --h) {
        for (int s = 0; s < ns; ++s) {
            const int a = policy.at(s, h);
            values.at(s, h) = model.reward(s, a) + values.at(model.next_state(s, a), h + 1);
        }
    }
    return values;
}

GridModel oracle_model(const EpisodicEnv& env, const Grid& grid) {
    const int ns = grid.n_states();
    const int na = grid.n_actions();
    GridModel model;
    model.reward.resize(ns, na);
    model.next_state.resize(ns, na);
    model.next_mean.reserve(static_cast<std::size_t>(ns) * na);
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < na; ++a) {
            Vector z(grid.state(s).size() + grid.action(a).size());
            z.head(grid.state(s).size()) = grid.state(s);
            z.tail(grid.action(a).size()) = grid.action(a);
            model.reward(s, a) = env.oracle_mean_reward(z);
            Vector next = env.oracle_mean_transition(z);
            model.next_state(s, a) = grid.snap_state(env.state_box().clip(next));
            model.next_mean.push_back(std::move(next));
        }
    }
    return model;
}

std::pair<Policy, ValueTable> oracle_plan(const EpisodicEnv& env, const Grid& grid, int horizon) {
    return plan(oracle_model(env, grid), grid, horizon);
}

GridModel optimistic_model(const GpPosterior& reward_posterior,
                           const TransitionPosterior& transition_posterior, double beta_r,
                           double beta_p, double lipschitz, const Grid& grid, double reward_guard,
                           double extra_reward_slack) {
    if (beta_r < 0 || beta_p < 0) throw InputError("optimistic_model: beta values must be >= 0");
    const int ns = grid.n_states();
    const int na = grid.n_actions();
    const int m = transition_posterior.state_dim();

    if (!reward_posterior.tracks_grid() ||
        static_cast<int>(reward_posterior.tracked_grid().size()) != ns * na) {
        throw InputError("optimistic_model: reward posterior must track the z grid");
    }
    const GpPosterior& tin = transition_posterior.inner();
    if (!tin.tracks_grid() || static_cast<int>(tin.tracked_grid().size()) != ns * na * m) {
        throw InputError("optimistic_model: transition posterior must track the indexed z grid");
    }

    const Vector& r_mean = reward_posterior.grid_mean();
    const Vector r_sd = reward_posterior.grid_sd();
    const Vector& p_mean = tin.grid_mean();
    const Vector p_sd = tin.grid_sd();

    GridModel model;
    model.reward.resize(ns, na);
    model.next_state.resize(ns, na);
    model.next_mean.reserve(static_cast<std::size_t>(ns) * na);
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < na; ++a) {
            const int zi = grid.z_index(s, a);
            Vector next(m);
            double sigma_p_norm_sq = 0.0;
            for (int i = 0; i < m; ++i) {
                next[i] = p_mean[zi * m + i];
                sigma_p_norm_sq += p_sd[zi * m + i] * p_sd[zi * m + i];
            }
            double r = r_mean[zi] + beta_r * r_sd[zi] +
                       lipschitz * beta_p * std::sqrt(sigma_p_norm_sq) + extra_reward_slack;
            r = std::min(reward_guard, std::max(-reward_guard, r));
            model.reward(s, a) = r;
            model.next_state(s, a) = grid.snap_state(next);
            model.next_mean.push_back(std::move(next));
        }
    }
    return model;
}

std::pair<Policy, ValueTable> optimistic_plan(const GpPosterior& reward_posterior,
                                              const TransitionPosterior& transition_posterior,
                                              double beta_r, double beta_p, double lipschitz,
                                              const Grid& grid, int horizon, double reward_guard,
                                              double extra_reward_slack) {
    return plan(optimistic_model(reward_posterior, transition_posterior, beta_r, beta_p, lipschitz,
                                 grid, reward_guard, extra_reward_slack),
                grid, horizon);
}

GridModel sampled_model(const Vector& reward_sample, const Vector& transition_sample_indexed,
                        int state_dim, const Grid& grid) {
    const int ns = grid.n_states();
    const int na = grid.n_actions();
    const int m = state_dim;
    if (reward_sample.size() != ns * na) {
        throw InputError("sampled_model: reward sample has wrong length");
    }
    if (transition_sample_indexed.size() != static_cast<Eigen::Index>(ns) * na * m) {
        throw InputError("sampled_model: transition sample has wrong length");
    }
    GridModel model;
    model.reward.resize(ns, na);
    model.next_state.resize(ns, na);
    model.next_mean.reserve(static_cast<std::size_t>(ns) * na);
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < na; ++a) {
            const int zi = grid.z_index(s, a);
            model.reward(s, a) = reward_sample[zi];
            Vector next(m);
            for (int i = 0; i < m; ++i) next[i] = transition_sample_indexed[zi * m + i];
            model.next_state(s, a) = grid.snap_state(next);
            model.next_mean.push_back(std::move(next));
        }
    }
    return model;
}

void write_policy_csv(std::ostream& out, const Policy& policy, const ValueTable& values) {
    out << "state_index,period,action_index,value\n";
    for (int s = 0; s < policy.n_states; ++s) {
        for (int h = 1; h <= policy.horizon; ++h) {
            out << s << ',' << h << ',' << policy.at(s, h) << ',' << format_double(values.at(s, h))
                << '\n';
        }
    }
}

} // namespace kmdp
