#pragma once

#include "kmdp/common.hpp"
#include "kmdp/envs.hpp"
#include "kmdp/gp.hpp"

#include <iosfwd>
#include <vector>

namespace kmdp {

// ---------------------------------------------------------------------------
// Grid: uniform product discretization of the state and action boxes with
// deterministic ordering and O(dim) nearest-point snapping.
// ---------------------------------------------------------------------------

class Grid {
public:
    static Grid uniform(const Box& state_box, int state_points_per_dim, const Box& action_box,
                        int action_points_per_dim);
    /// Integer grid {0..n_states-1} x {0..n_actions-1} for tabular MDPs.
    static Grid tabular(int n_states, int n_actions);

    int n_states() const { return static_cast<int>(states_.size()); }
    int n_actions() const { return static_cast<int>(actions_.size()); }
    const std::vector<Vector>& states() const { return states_; }
    const std::vector<Vector>& actions() const { return actions_; }
    const Vector& state(int i) const { return states_[static_cast<std::size_t>(i)]; }
    const Vector& action(int j) const { return actions_[static_cast<std::size_t>(j)]; }

    /// Index of the grid state nearest to s (clamped per-dimension rounding,
    /// which is exact nearest-neighbour for uniform product grids).
    int snap_state(const Vector& s) const;

    /// Largest possible distance from a point of the state box to its
    /// snapped grid state (half cell diagonal).
    double snap_radius() const;

    /// z = [s; a] for every (state, action) pair, state-major.
    std::vector<Vector> z_points() const;
    int z_index(int state_index, int action_index) const {
        return state_index * n_actions() + action_index;
    }

private:
    std::vector<Vector> states_, actions_;
    // Per-dimension linspace parameters for snapping.
    Vector state_lo_, state_step_;
    std::vector<int> state_counts_;
};

// ---------------------------------------------------------------------------
// Policy / ValueTable over the grid, period-indexed h = 1..H (values also
// store h = H+1, identically 0).
// ---------------------------------------------------------------------------

struct Policy {
    int horizon = 0;
    int n_states = 0;
    std::vector<int> action; // [state * horizon + (h-1)]

    int at(int state_index, int h) const { return action[idx(state_index, h)]; }
    int& at(int state_index, int h) { return action[idx(state_index, h)]; }

    std::size_t idx(int state_index, int h) const {
        return static_cast<std::size_t>(state_index) * horizon + (h - 1);
    }
};

struct ValueTable {
    int horizon = 0;
    int n_states = 0;
    std::vector<double> value; // [state * (horizon+1) + (h-1)], h = 1..H+1

    double at(int state_index, int h) const { return value[idx(state_index, h)]; }
    double& at(int state_index, int h) { return value[idx(state_index, h)]; }

    std::size_t idx(int state_index, int h) const {
        return static_cast<std::size_t>(state_index) * (horizon + 1) + (h - 1);
    }
};

// ---------------------------------------------------------------------------
// GridModel: a deterministic snapped surrogate MDP on the grid. reward and
// next_mean are indexed by (state, action); next_state is the snapped index
// of next_mean.
// ---------------------------------------------------------------------------

struct GridModel {
    Matrix reward;                    // n_states x n_actions
    Eigen::MatrixXi next_state;       // n_states x n_actions (snapped indices)
    std::vector<Vector> next_mean;    // per z (state-major), the raw mean next state

    const Vector& next_mean_at(const Grid& grid, int s, int a) const {
        return next_mean[static_cast<std::size_t>(grid.z_index(s, a))];
    }
};

/// Backward induction h = H..1. argmax ties break to the lowest action index.
std::pair<Policy, ValueTable> plan(const GridModel& model, const Grid& grid, int horizon);

/// DP evaluation of a fixed policy on a model (no maximization).
ValueTable evaluate_policy(const GridModel& model, const Grid& grid, const Policy& policy,
                           int horizon);

/// Snapped model of the environment's oracle means.
GridModel oracle_model(const EpisodicEnv& env, const Grid& grid);

std::pair<Policy, ValueTable> oracle_plan(const EpisodicEnv& env, const Grid& grid, int horizon);

/// Optimistic surrogate: reward r~ = mu_R + beta_r sigma_R + L beta_p ||sigma_P||_2
/// (clipped to +-guard), transitions = posterior means. Posteriors must track
/// the grid's z points (reward GP) and the indexed z grid (transition GP).
GridModel optimistic_model(const GpPosterior& reward_posterior,
                           const TransitionPosterior& transition_posterior, double beta_r,
                           double beta_p, double lipschitz, const Grid& grid, double reward_guard,
                           double extra_reward_slack = 0.0);

std::pair<Policy, ValueTable> optimistic_plan(const GpPosterior& reward_posterior,
                                              const TransitionPosterior& transition_posterior,
                                              double beta_r, double beta_p, double lipschitz,
                                              const Grid& grid, int horizon, double reward_guard,
                                              double extra_reward_slack = 0.0);

/// Model assembled from grid-sampled reward and transition values (PSRL).
GridModel sampled_model(const Vector& reward_sample, const Vector& transition_sample_indexed,
                        int state_dim, const Grid& grid);

/// Policy/value CSV: "state_index,period,action_index,value" rows.
void write_policy_csv(std::ostream& out, const Policy& policy, const ValueTable& values);

} // namespace kmdp
