#pragma once

#include "kmdp/agents.hpp"
#include "kmdp/common.hpp"
#include "kmdp/confidence.hpp"
#include "kmdp/envs.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace kmdp {

// ---------------------------------------------------------------------------
// Experiment configuration, parsed from the structured-text `.kmdp.conf`
// format (JSON content with a versioned schema; unknown keys are errors).
// ---------------------------------------------------------------------------

enum class EnvKind { Lqr, Tabular, Rkhs };
enum class MigMethod { GreedyMesh, AnalyticRate };

struct ExperimentConfig {
    int schema_version = 1;
    EnvKind env_kind = EnvKind::Lqr;
    std::string env_json;                  // raw env block (rebuilt per use)
    Kernel reward_kernel;                  // resolved (possibly from "auto")
    Kernel transition_kernel;
    ConfidenceConfig confidence;
    int state_points_per_dim = 9;
    int action_points_per_dim = 5;
    std::vector<std::string> agents;       // gp_ucrl | psrl | random | oracle
    int episodes = 10;
    std::vector<std::uint64_t> seeds;
    MigMethod mig_method = MigMethod::GreedyMesh;
    int mig_mesh_size = 512;
    std::uint64_t mig_mesh_seed = 0;
    double mig_scale = 1.0;
    std::string mig_cache_dir;             // empty -> <output_dir>/mig_cache
    double lambda_r_override = 0.0;        // 0 -> frequentist default
    double lambda_p_override = 0.0;
    std::string output_dir = "out";

    /// Environment instance (immutable; shared across cells and threads).
    std::shared_ptr<const EpisodicEnv> env;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text);

    Grid build_grid(const EpisodicEnv& env) const;

    /// Gamma schedules for the resolved kernels (greedy mesh or analytic),
    /// consulting/filling the schedule cache for the mesh method.
    GammaSchedule gamma_for_reward(const EpisodicEnv& env) const;
    GammaSchedule gamma_for_transition(const EpisodicEnv& env) const;

    AgentConfig agent_config(const EpisodicEnv& env) const;
};

// ---------------------------------------------------------------------------
// Results.
// ---------------------------------------------------------------------------

struct RunSummaryRow {
    std::string agent;
    std::uint64_t seed = 0;
    double final_regret = 0.0;
    double growth_p = 0.0;
    double growth_ci_lo = 0.0;
    double growth_ci_hi = 0.0;
    double coverage_viol = 0.0;
    double secs = 0.0;
    bool failed = false;
    std::string error;
};

struct RunSummary {
    std::vector<RunSummaryRow> rows;
    bool partial_failure = false;
    std::string summary_csv_path;
};

/// Executes every (agent, seed) cell, one CSV per cell plus summary.csv in
/// the output directory. Existing cell CSVs are reused unless force is set.
/// Per-cell failures are recorded and the remaining cells continue.
RunSummary run_experiment(const ExperimentConfig& config, bool force);

/// Least-squares slope of ln(cum regret) vs ln(episode) over the second half
/// of the series, with a 200-resample bootstrap percentile interval.
std::pair<double, Interval> fit_growth_exponent(const std::vector<double>& cumulative_regret,
                                                std::uint64_t bootstrap_seed);

// Per-episode CSV, exact schema:
// episode,realized_return,optimal_value,policy_value,inst_regret,cum_regret,
// beta_r,beta_p,reward_dev_sum,trans_dev_sum,wall_ms
extern const char* kEpisodeCsvHeader;
void write_episode_csv(const std::string& path, const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> read_episode_csv(const std::string& path);

extern const char* kSummaryCsvHeader;
void write_summary_csv(const std::string& path, const RunSummary& summary);

// ---------------------------------------------------------------------------
// Monte-Carlo confidence coverage harness: draws RKHS ground truths at the
// configured norm bounds, feeds the posteriors noisy observations episode by
// episode, and counts (run, episode, grid point) band violations.
// ---------------------------------------------------------------------------

struct CoverageReport {
    int runs = 0;
    int episodes = 0;
    int grid_points = 0;
    double delta = 0.0;
    double reward_rate = 0.0;
    double transition_rate = 0.0;
    double reward_threshold = 0.0;     // delta + 2 SE over runs
    double transition_threshold = 0.0;
    bool reward_pass = false;
    bool transition_pass = false;
};

CoverageReport run_coverage(const ExperimentConfig& config, int runs, bool zero_beta_debug);

/// Fast invariant suite (the CLI `selftest` subcommand). Prints one
/// "selftest.<name>=ok|fail" line per check; returns the failure count.
int run_selftest();

} // namespace kmdp
