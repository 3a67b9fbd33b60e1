#pragma once

#include "kmdp/common.hpp"
#include "kmdp/confidence.hpp"
#include "kmdp/envs.hpp"
#include "kmdp/infogain.hpp"
#include "kmdp/planners.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kmdp {

struct EpisodeRecord {
    int episode = 0;
    double realized_return = 0.0;  // sum of observed rewards
    double optimal_value = 0.0;    // V*_1(s_1) on the snapped oracle model
    double policy_value = 0.0;     // executed policy's value on the oracle model
    double inst_regret = 0.0;
    double cum_regret = 0.0;
    double beta_r = 0.0;
    double beta_p = 0.0;
    double reward_dev_sum = 0.0;   // sum_h |R_model(z_h) - R*(z_h)|
    double trans_dev_sum = 0.0;    // L * sum_h ||P_model(z_h) - P*(z_h)||_2
    long long wall_ms = 0;

    // Diagnostics kept out of the CSV schema.
    double planned_value = 0.0;          // V^{M_l}_1(s_1) under the planning model
    int reward_band_violations = 0;      // visited cells where the band missed the oracle mean
    int transition_ball_violations = 0;
};

struct AgentConfig {
    Kernel reward_kernel;
    Kernel transition_kernel;
    ConfidenceConfig confidence;
    double lambda_r = 0.0;  // 0 -> frequentist default H (or the true noise variance in bayes mode)
    double lambda_p = 0.0;  // 0 -> default m H
    GammaSchedule gamma_r;
    GammaSchedule gamma_p;
    bool zero_beta_debug = false;   // force beta = 0 (failure-path exercises)
    bool keep_models = false;       // retain per-episode models for the regret decomposition
};

/// Resolved lambda values for an environment per the frequentist defaults
/// lambda_R = H, lambda_P = m H; `override_value` wins when positive.
double resolve_lambda_r(const EpisodicEnv& env, double override_value);
double resolve_lambda_p(const EpisodicEnv& env, double override_value);

/// Per-episode planning artifacts retained when keep_models is set.
struct EpisodeModel {
    GridModel model;
    Policy policy;
    ValueTable values;
    std::vector<Vector> visited_z;       // realized z_{l,h}
    std::vector<int> visited_state_idx;  // snapped state indices
    std::vector<int> visited_action_idx;
};

struct RunArtifacts {
    std::vector<EpisodeModel> episodes;  // only filled when keep_models
    GridModel oracle;
    Policy oracle_policy;
    ValueTable oracle_values;
    int reward_observations = 0;      // posterior sizes after the final episode
    int transition_observations = 0;  // indexed samples (m per step)
};

std::vector<EpisodeRecord> run_gp_ucrl(const EpisodicEnv& env, const AgentConfig& cfg,
                                       const Grid& grid, int episodes, std::uint64_t seed,
                                       RunArtifacts* artifacts = nullptr);

std::vector<EpisodeRecord> run_psrl(const EpisodicEnv& env, const AgentConfig& cfg,
                                    const Grid& grid, int episodes, std::uint64_t seed,
                                    RunArtifacts* artifacts = nullptr);

enum class BaselineKind { Random, Oracle };

std::vector<EpisodeRecord> run_baseline(const EpisodicEnv& env, BaselineKind kind,
                                        const Grid& grid, int episodes, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Regret decomposition diagnostic: per episode, compares the planning-model /
// true-model value gap against the reward-deviation sum, the L-weighted
// transition-deviation sum and the realized residual.
// ---------------------------------------------------------------------------

struct DecompositionRow {
    int episode = 0;
    double value_gap = 0.0;      // V^{M_l}_1(s_1) - V^{M*}_{pi_l,1}(s_1)
    double reward_term = 0.0;
    double transition_term = 0.0;
    double residual = 0.0;
    double grid_slack = 0.0;
    bool holds = false;          // value_gap <= terms + residual + slack
};

std::vector<DecompositionRow> decompose_regret(const std::vector<EpisodeRecord>& records,
                                               const EpisodicEnv& env, const Grid& grid,
                                               const RunArtifacts& artifacts, double lipschitz);

} // namespace kmdp
