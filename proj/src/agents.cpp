#include "kmdp/agents.hpp"

#include <chrono>
#include <cmath>

namespace kmdp {

double resolve_lambda_r(const EpisodicEnv& env, double override_value) {
    if (override_value > 0) return override_value;
    return static_cast<double>(env.horizon());
}

double resolve_lambda_p(const EpisodicEnv& env, double override_value) {
    if (override_value > 0) return override_value;
    return static_cast<double>(env.state_dim()) * env.horizon();
}

namespace {

using Clock = std::chrono::steady_clock;

struct LoopContext {
    const EpisodicEnv& env;
    const AgentConfig& cfg;
    const Grid& grid;
    std::vector<Vector> zs;           // grid z points, state-major
    GridModel oracle;
    Policy oracle_policy;
    ValueTable oracle_values;
    double reward_guard = 0.0;
};

LoopContext make_context(const EpisodicEnv& env, const AgentConfig& cfg, const Grid& grid) {
    LoopContext ctx{env, cfg, grid};
    ctx.zs = grid.z_points();
    ctx.oracle = oracle_model(env, grid);
    auto [p, v] = plan(ctx.oracle, grid, env.horizon());
    ctx.oracle_policy = std::move(p);
    ctx.oracle_values = std::move(v);
    ctx.reward_guard = cfg.confidence.b_r * env.horizon() * 10.0;
    return ctx;
}

struct BetaPair {
    double r = 0.0;
    double p = 0.0;
    double extra_reward_slack = 0.0; // bayes-gp band slack folded into the bonus
};

BetaPair episode_betas(const LoopContext& ctx, int episode) {
    const AgentConfig& cfg = ctx.cfg;
    if (cfg.zero_beta_debug) return {};
    BetaPair out;
    const int h = ctx.env.horizon();
    const int m = ctx.env.state_dim();
    if (cfg.confidence.mode == ConfidenceMode::Frequentist) {
        const long long t_r = static_cast<long long>(episode - 1) * h;
        const long long t_p = static_cast<long long>(m) * (episode - 1) * h;
        out.r = beta_r(cfg.confidence, episode, cfg.gamma_r.at(t_r));
        out.p = beta_p(cfg.confidence, episode, cfg.gamma_p.at(t_p));
    } else {
        auto [s_size, a_size] = bayes_grid_sizes(cfg.confidence, episode);
        out.r = bayes_beta_r(cfg.confidence, episode, static_cast<double>(s_size),
                             static_cast<double>(a_size));
        out.p = bayes_beta_p(cfg.confidence, episode, static_cast<double>(s_size),
                             static_cast<double>(a_size));
        out.extra_reward_slack = bayes_reward_slack(episode) +
                                 cfg.confidence.lipschitz * bayes_transition_slack(cfg.confidence, episode);
    }
    return out;
}

// Shared episode execution: rolls out `policy`, fills the record's realized
// return, deviation sums and coverage diagnostics, and appends the H
// observations to the posteriors.
void execute_episode(const LoopContext& ctx, const GridModel& model, const Policy& policy,
                     const BetaPair& betas, Rng& env_rng, GpPosterior& reward_post,
                     TransitionPosterior& transition_post, EpisodeRecord& rec,
                     EpisodeModel* keep) {
    const EpisodicEnv& env = ctx.env;
    const Grid& grid = ctx.grid;
    const int horizon = env.horizon();
    const int m = env.state_dim();
    const double lipschitz = ctx.cfg.confidence.lipschitz;

    const Vector& r_mean = reward_post.grid_mean();
    const Vector r_sd = reward_post.grid_sd();
    const Vector& p_mean = transition_post.inner().grid_mean();
    const Vector p_sd = transition_post.inner().grid_sd();

    std::vector<Vector> visited_z;
    std::vector<double> rewards;
    std::vector<Vector> next_states;
    visited_z.reserve(static_cast<std::size_t>(horizon));
    rewards.reserve(static_cast<std::size_t>(horizon));
    next_states.reserve(static_cast<std::size_t>(horizon));

    Vector s = env.initial_state();
    for (int h = 1; h <= horizon; ++h) {
        const int s_idx = grid.snap_state(s);
        const int a_idx = policy.at(s_idx, h);
        const Vector& a = grid.action(a_idx);
        auto [r, s_next] = env.step(s, a, env_rng);

        const Vector z = env.make_z(s, a);
        const int zi = grid.z_index(s_idx, a_idx);
        const double oracle_r = env.oracle_mean_reward(z);
        const Vector oracle_p = env.oracle_mean_transition(z);

        rec.realized_return += r;
        rec.reward_dev_sum += std::abs(model.reward(s_idx, a_idx) - oracle_r);
        rec.trans_dev_sum +=
            lipschitz * (model.next_mean[static_cast<std::size_t>(zi)] - oracle_p).norm();

        // Confidence coverage at the visited cell (oracle evaluated at the
        // cell's z so the check matches what the planner saw).
        const Vector& z_cell = ctx.zs[static_cast<std::size_t>(zi)];
        const double cell_r = env.oracle_mean_reward(z_cell);
        const Vector cell_p = env.oracle_mean_transition(z_cell);
        double band = betas.r * r_sd[zi];
        double ball = 0.0;
        for (int i = 0; i < m; ++i) ball += p_sd[zi * m + i] * p_sd[zi * m + i];
        ball = betas.p * std::sqrt(ball);
        if (ctx.cfg.confidence.mode == ConfidenceMode::BayesGp) {
            band += bayes_reward_slack(rec.episode);
            ball += bayes_transition_slack(ctx.cfg.confidence, rec.episode);
        }
        if (std::abs(cell_r - r_mean[zi]) > band) ++rec.reward_band_violations;
        Vector p_mu(m);
        for (int i = 0; i < m; ++i) p_mu[i] = p_mean[zi * m + i];
        if ((cell_p - p_mu).norm() > ball) ++rec.transition_ball_violations;

        visited_z.push_back(z);
        rewards.push_back(r);
        next_states.push_back(s_next);
        if (keep) {
            keep->visited_z.push_back(z);
            keep->visited_state_idx.push_back(s_idx);
            keep->visited_action_idx.push_back(a_idx);
        }
        s = std::move(s_next);
    }

    reward_post = reward_post.update(visited_z, rewards);
    transition_post = transition_post.update(visited_z, next_states);
}

std::vector<EpisodeRecord> run_model_based(const EpisodicEnv& env, const AgentConfig& cfg,
                                           const Grid& grid, int episodes, std::uint64_t seed,
                                           bool posterior_sampling, RunArtifacts* artifacts) {
    if (episodes < 0) throw InputError("run: episode count must be >= 0");
    cfg.confidence.validate();
    if (!cfg.reward_kernel.valid() || !cfg.transition_kernel.valid()) {
        throw InputError("run: agent config is missing kernels");
    }

    LoopContext ctx = make_context(env, cfg, grid);
    if (artifacts) {
        artifacts->oracle = ctx.oracle;
        artifacts->oracle_policy = ctx.oracle_policy;
        artifacts->oracle_values = ctx.oracle_values;
    }

    const int m = env.state_dim();
    const double lambda_r = resolve_lambda_r(env, cfg.lambda_r);
    const double lambda_p = resolve_lambda_p(env, cfg.lambda_p);
    GpPosterior reward_post(cfg.reward_kernel, lambda_r, ctx.zs);
    TransitionPosterior transition_post(cfg.transition_kernel, lambda_p, m, ctx.zs);
    const std::vector<Vector> indexed_zs = TransitionPosterior::indexed_grid(ctx.zs, m);

    Rng env_rng = derive_stream(seed, "env");
    Rng psrl_rng = derive_stream(seed, "psrl");

    const int s1_idx = grid.snap_state(env.initial_state());
    std::vector<EpisodeRecord> records;
    records.reserve(static_cast<std::size_t>(episodes));
    double cum_regret = 0.0;

    for (int l = 1; l <= episodes; ++l) {
        const auto t0 = Clock::now();
        EpisodeRecord rec;
        rec.episode = l;

        const BetaPair betas = episode_betas(ctx, l);
        rec.beta_r = betas.r;
        rec.beta_p = betas.p;

        GridModel model;
        if (posterior_sampling) {
            const Vector r_sample = reward_post.sample_on_grid(ctx.zs, psrl_rng);
            const Vector p_sample = transition_post.inner().sample_on_grid(indexed_zs, psrl_rng);
            model = sampled_model(r_sample, p_sample, m, grid);
        } else {
            model = optimistic_model(reward_post, transition_post, betas.r, betas.p,
                                     cfg.confidence.lipschitz, grid, ctx.reward_guard,
                                     betas.extra_reward_slack);
        }
        auto [policy, values] = plan(model, grid, env.horizon());
        rec.planned_value = values.at(s1_idx, 1);
        rec.optimal_value = ctx.oracle_values.at(s1_idx, 1);

        EpisodeModel* keep = nullptr;
        if (artifacts && cfg.keep_models) {
            artifacts->episodes.push_back({});
            keep = &artifacts->episodes.back();
        }
        execute_episode(ctx, model, policy, betas, env_rng, reward_post, transition_post, rec, keep);

        rec.policy_value = evaluate_policy(ctx.oracle, grid, policy, env.horizon()).at(s1_idx, 1);
        rec.inst_regret = rec.optimal_value - rec.policy_value;
        cum_regret += rec.inst_regret;
        rec.cum_regret = cum_regret;
        rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();

        if (keep) {
            keep->model = std::move(model);
            keep->policy = std::move(policy);
            keep->values = std::move(values);
        }
        records.push_back(rec);
    }
    if (artifacts) {
        artifacts->reward_observations = reward_post.size();
        artifacts->transition_observations = transition_post.observation_count();
    }
    return records;
}

} // namespace

std::vector<EpisodeRecord> run_gp_ucrl(const EpisodicEnv& env, const AgentConfig& cfg,
                                       const Grid& grid, int episodes, std::uint64_t seed,
                                       RunArtifacts* artifacts) {
    return run_model_based(env, cfg, grid, episodes, seed, false, artifacts);
}

std::vector<EpisodeRecord> run_psrl(const EpisodicEnv& env, const AgentConfig& cfg,
                                    const Grid& grid, int episodes, std::uint64_t seed,
                                    RunArtifacts* artifacts) {
    return run_model_based(env, cfg, grid, episodes, seed, true, artifacts);
}

std::vector<EpisodeRecord> run_baseline(const EpisodicEnv& env, BaselineKind kind,
                                        const Grid& grid, int episodes, std::uint64_t seed) {
    if (episodes < 0) throw InputError("run_baseline: episode count must be >= 0");
    GridModel oracle = oracle_model(env, grid);
    auto [oracle_policy, oracle_values] = plan(oracle, grid, env.horizon());

    Rng env_rng = derive_stream(seed, "env");
    Rng action_rng = derive_stream(seed, "baseline-actions");

    const int s1_idx = grid.snap_state(env.initial_state());
    const int horizon = env.horizon();
    std::vector<EpisodeRecord> records;
    records.reserve(static_cast<std::size_t>(episodes));
    double cum_regret = 0.0;

    for (int l = 1; l <= episodes; ++l) {
        const auto t0 = Clock::now();
        EpisodeRecord rec;
        rec.episode = l;
        rec.optimal_value = oracle_values.at(s1_idx, 1);

        Policy policy;
        if (kind == BaselineKind::Oracle) {
            policy = oracle_policy;
        } else {
            policy.horizon = horizon;
            policy.n_states = grid.n_states();
            policy.action.resize(static_cast<std::size_t>(grid.n_states()) * horizon);
            for (auto& a : policy.action) {
                a = static_cast<int>(action_rng.uniform_int(static_cast<std::uint64_t>(grid.n_actions())));
            }
        }

        Vector s = env.initial_state();
        for (int h = 1; h <= horizon; ++h) {
            const int s_idx = grid.snap_state(s);
            const Vector& a = grid.action(policy.at(s_idx, h));
            auto [r, s_next] = env.step(s, a, env_rng);
            rec.realized_return += r;
            s = std::move(s_next);
        }

        rec.policy_value = evaluate_policy(oracle, grid, policy, horizon).at(s1_idx, 1);
        rec.planned_value = rec.policy_value;
        rec.inst_regret = rec.optimal_value - rec.policy_value;
        cum_regret += rec.inst_regret;
        rec.cum_regret = cum_regret;
        rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
        records.push_back(rec);
    }
    return records;
}

std::vector<DecompositionRow> decompose_regret(const std::vector<EpisodeRecord>& records,
                                               const EpisodicEnv& env, const Grid& grid,
                                               const RunArtifacts& artifacts, double lipschitz) {
    if (artifacts.episodes.size() != records.size()) {
        throw InputError("decompose_regret: artifacts must retain one model per episode "
                         "(run with keep_models)");
    }
    const int horizon = env.horizon();
    const double slack = 2.0 * horizon * (lipschitz + 1.0) * grid.snap_radius();

    std::vector<DecompositionRow> rows;
    rows.reserve(records.size());
    for (std::size_t e = 0; e < records.size(); ++e) {
        const EpisodeRecord& rec = records[e];
        const EpisodeModel& em = artifacts.episodes[e];
        DecompositionRow row;
        row.episode = rec.episode;
        row.value_gap = rec.planned_value - rec.policy_value;
        row.reward_term = rec.reward_dev_sum;
        row.transition_term = rec.trans_dev_sum;
        row.grid_slack = slack;

        // Realized residual: the per-period difference between the
        // (surrogate) expected and the realized next-state value gaps.
        const ValueTable oracle_eval = evaluate_policy(artifacts.oracle, grid, em.policy, horizon);
        double residual = 0.0;
        for (int h = 1; h <= horizon; ++h) {
            const std::size_t step = static_cast<std::size_t>(h - 1);
            if (h > static_cast<int>(em.visited_state_idx.size())) break;
            const int s_idx = em.visited_state_idx[step];
            const int a_idx = em.visited_action_idx[step];
            const Vector& z = em.visited_z[step];
            const Vector oracle_next = env.state_box().clip(env.oracle_mean_transition(z));
            const int expected_idx = grid.snap_state(oracle_next);
            const int realized_idx = (h < horizon && step + 1 < em.visited_state_idx.size())
                                         ? em.visited_state_idx[step + 1]
                                         : grid.snap_state(oracle_next);
            (void)s_idx;
            (void)a_idx;
            const double expect_gap =
                em.values.at(expected_idx, h + 1) - oracle_eval.at(expected_idx, h + 1);
            const double realized_gap =
                em.values.at(realized_idx, h + 1) - oracle_eval.at(realized_idx, h + 1);
            residual += expect_gap - realized_gap;
        }
        row.residual = residual;
        row.holds = row.value_gap <=
                    row.reward_term + row.transition_term + row.residual + row.grid_slack + 1e-9;
        rows.push_back(row);
    }
    return rows;
}

} // namespace kmdp
