#include "kmdp/agents.hpp"

#include "kmdp/infogain.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace kmdp;

namespace {

// Deterministic 2-state 2-action MDP whose optimum is easy to verify by
// enumeration: action 1 in state 0 moves to state 1 (reward 0), action 0 in
// state 1 stays (reward 1). Everything else returns to state 0.
TabularEnv deterministic_tabular() {
    Matrix reward(2, 2);
    reward << 0.0, 0.2, 1.0, 0.0;
    std::vector<std::vector<std::vector<double>>> transition = {
        {{1.0, 0.0}, {0.0, 1.0}},
        {{0.0, 1.0}, {1.0, 0.0}},
    };
    return TabularEnv(reward, transition, 3, 0.0);
}

AgentConfig tabular_agent_config(const TabularEnv& env) {
    auto [kr, kp] = tabular_as_kernel(env);
    AgentConfig cfg;
    cfg.reward_kernel = kr;
    cfg.transition_kernel = kp;
    cfg.confidence.b_r = 1.5; // sqrt(sum r^2) = sqrt(1.04) rounded up
    cfg.confidence.b_p = 2.0;
    cfg.confidence.sigma_r = 0.0;
    cfg.confidence.sigma_p = 0.0;
    cfg.confidence.delta = 0.1;
    cfg.confidence.horizon = env.horizon();
    cfg.confidence.state_dim = 1;
    cfg.confidence.action_dim = 1;
    cfg.confidence.lipschitz = 3.0;
    cfg.gamma_r = GammaSchedule::analytic(kr, env.horizon(), 1.0);
    cfg.gamma_p = GammaSchedule::analytic(kp, env.horizon(), 1.0);
    return cfg;
}

LqrEnv desk_lqr() {
    Matrix a(1, 1), b(1, 1), p(1, 1), q(1, 1);
    a << 0.8;
    b << 0.6;
    p << 1.0;
    q << 0.2;
    LqrEnv env(a, b, p, q, Box::cube(1, -1, 1), Box::cube(1, -1, 1), 5, 0.05, 0.05);
    env.set_initial_state(Vector::Constant(1, 0.75));
    return env;
}

AgentConfig lqr_agent_config(const LqrEnv& env) {
    const LqrKernelSetup setup = lqr_kernel_setup(env);
    AgentConfig cfg;
    cfg.reward_kernel = setup.reward_kernel;
    cfg.transition_kernel = setup.transition_kernel;
    cfg.confidence.b_r = setup.b_r;
    cfg.confidence.b_p = setup.b_p;
    cfg.confidence.sigma_r = env.sigma_r();
    cfg.confidence.sigma_p = env.sigma_p();
    cfg.confidence.delta = 0.1;
    cfg.confidence.horizon = env.horizon();
    cfg.confidence.state_dim = 1;
    cfg.confidence.action_dim = 1;
    cfg.confidence.lipschitz = lqr_lipschitz_bound(env);
    cfg.gamma_r = GammaSchedule::analytic(setup.reward_kernel, env.horizon(), 1.0);
    cfg.gamma_p = GammaSchedule::analytic(setup.transition_kernel, env.horizon(), 1.0);
    return cfg;
}

double final_regret(const std::vector<EpisodeRecord>& records) {
    return records.empty() ? 0.0 : records.back().cum_regret;
}

} // namespace

TEST_CASE("tau = 0 gives an empty log for every agent") {
    const TabularEnv env = deterministic_tabular();
    const Grid grid = Grid::tabular(2, 2);
    const AgentConfig cfg = tabular_agent_config(env);
    CHECK(run_gp_ucrl(env, cfg, grid, 0, 1).empty());
    CHECK(run_psrl(env, cfg, grid, 0, 1).empty());
    CHECK(run_baseline(env, BaselineKind::Random, grid, 0, 1).empty());
}

TEST_CASE("noiseless tabular: GP-UCRL reaches zero per-episode regret within 8 episodes") {
    const TabularEnv env = deterministic_tabular();
    const Grid grid = Grid::tabular(2, 2);
    const AgentConfig cfg = tabular_agent_config(env);

    // Brute-force-verified optimum for the start state.
    const GridModel oracle = oracle_model(env, grid);
    const auto best = oracle::enumerate_policies_max_values(oracle, grid, env.horizon());
    auto [opt_policy, opt_values] = plan(oracle, grid, env.horizon());
    CHECK(opt_values.at(0, 1) == doctest::Approx(best[0]).epsilon(1e-12));

    const auto records = run_gp_ucrl(env, cfg, grid, 12, 7);
    REQUIRE(records.size() == 12);
    for (const auto& rec : records) {
        CHECK(rec.optimal_value == doctest::Approx(best[0]).epsilon(1e-12));
    }
    for (std::size_t l = 8; l < records.size(); ++l) {
        CHECK(records[l].inst_regret <= 1e-9);
    }
}

TEST_CASE("posterior data counts: lH reward points and mlH indexed transition samples") {
    const TabularEnv env = deterministic_tabular();
    const Grid grid = Grid::tabular(2, 2);
    const AgentConfig cfg = tabular_agent_config(env);
    RunArtifacts artifacts;
    const int episodes = 5;
    const auto records = run_gp_ucrl(env, cfg, grid, episodes, 3, &artifacts);
    CHECK(artifacts.reward_observations == episodes * env.horizon());
    CHECK(artifacts.transition_observations == 1 * episodes * env.horizon());
    (void)records;
}

TEST_CASE("reproducibility: identical (config, seed) gives identical record streams") {
    const LqrEnv env = desk_lqr();
    const Grid grid = Grid::uniform(env.state_box(), 15, env.action_box(), 5);
    const AgentConfig cfg = lqr_agent_config(env);
    for (bool psrl : {false, true}) {
        const auto a = psrl ? run_psrl(env, cfg, grid, 10, 99) : run_gp_ucrl(env, cfg, grid, 10, 99);
        const auto b = psrl ? run_psrl(env, cfg, grid, 10, 99) : run_gp_ucrl(env, cfg, grid, 10, 99);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].realized_return == b[i].realized_return);
            CHECK(a[i].cum_regret == b[i].cum_regret);
            CHECK(a[i].beta_r == b[i].beta_r);
            CHECK(a[i].reward_dev_sum == b[i].reward_dev_sum);
        }
        // Different seed diverges.
        const auto c = psrl ? run_psrl(env, cfg, grid, 10, 100) : run_gp_ucrl(env, cfg, grid, 10, 100);
        bool any_diff = false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            any_diff = any_diff || a[i].realized_return != c[i].realized_return;
        }
        CHECK(any_diff);
    }
}

TEST_CASE("PSRL degenerate sample: collapsed posterior plans like the oracle") {
    // Huge-data limit simulated by injecting exact means with lambda = 1e-8:
    // the grid sample is then the exact mean model and the plan matches the
    // oracle plan.
    const TabularEnv env = deterministic_tabular();
    const Grid grid = Grid::tabular(2, 2);
    auto [kr, kp] = tabular_as_kernel(env);
    const auto zs = grid.z_points();

    GpPosterior rpost(kr, 1e-8, zs);
    TransitionPosterior tpost(kp, 1e-8, 1, zs);
    std::vector<Vector> obs;
    std::vector<double> rewards;
    std::vector<Vector> nexts;
    for (const Vector& z : zs) {
        obs.push_back(z);
        rewards.push_back(env.oracle_mean_reward(z));
        nexts.push_back(env.oracle_mean_transition(z));
    }
    rpost = rpost.update(obs, rewards);
    tpost = tpost.update(obs, nexts);

    Rng rng(5);
    const Vector r_sample = rpost.sample_on_grid(zs, rng);
    const Vector p_sample = tpost.inner().sample_on_grid(TransitionPosterior::indexed_grid(zs, 1), rng);
    const GridModel sampled = sampled_model(r_sample, p_sample, 1, grid);
    auto [sp, sv] = plan(sampled, grid, env.horizon());
    auto [op, ov] = oracle_plan(env, grid, env.horizon());
    for (int s = 0; s < grid.n_states(); ++s) {
        CHECK(sv.at(s, 1) == doctest::Approx(ov.at(s, 1)).epsilon(1e-3));
        for (int h = 1; h <= env.horizon(); ++h) CHECK(sp.at(s, h) == op.at(s, h));
    }
}

TEST_CASE("baselines: oracle regret is zero on the snapped model; random grows linearly") {
    const LqrEnv env = desk_lqr();
    const Grid grid = Grid::uniform(env.state_box(), 15, env.action_box(), 5);

    const auto oracle_records = run_baseline(env, BaselineKind::Oracle, grid, 30, 11);
    for (const auto& rec : oracle_records) CHECK(std::abs(rec.inst_regret) <= 1e-9);

    const auto random_records = run_baseline(env, BaselineKind::Random, grid, 120, 11);
    CHECK(final_regret(random_records) > 1.0);
    // ln cum vs ln l on the second half: slope near 1 with a tight fit.
    std::vector<double> x, y;
    for (std::size_t l = random_records.size() / 2; l < random_records.size(); ++l) {
        x.push_back(std::log(static_cast<double>(l + 1)));
        y.push_back(std::log(random_records[l].cum_regret));
    }
    CHECK(oracle::r_squared(x, y) >= 0.9);
    CHECK(oracle::slope(x, y) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("desk LQR: regret/T at tau = 200 at most half its value at tau = 20") {
    const LqrEnv env = desk_lqr();
    const Grid grid = Grid::uniform(env.state_box(), 21, env.action_box(), 7);
    const AgentConfig cfg = lqr_agent_config(env);
    const auto records = run_gp_ucrl(env, cfg, grid, 200, 1);
    REQUIRE(records.size() == 200);
    const double rate_20 = records[19].cum_regret / 20.0;
    const double rate_200 = records[199].cum_regret / 200.0;
    CHECK(rate_200 <= 0.5 * rate_20);
}

TEST_CASE("optimism frequency: planned value rarely below the oracle optimum") {
    const LqrEnv env = desk_lqr();
    const Grid grid = Grid::uniform(env.state_box(), 15, env.action_box(), 5);
    const AgentConfig cfg = lqr_agent_config(env);
    const double slack = 2.0 * env.horizon() * (cfg.confidence.lipschitz + 1.0) * grid.snap_radius();

    int total = 0, below = 0;
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const auto records = run_gp_ucrl(env, cfg, grid, 40, seed);
        for (const auto& rec : records) {
            ++total;
            if (rec.planned_value < rec.optimal_value - slack) ++below;
        }
    }
    CHECK(static_cast<double>(below) / total <= 0.1);
}

TEST_CASE("regret decomposition: exact model gives zero terms; random tabular holds") {
    // Exact-model case: lambda tiny + pre-trained posteriors behave like the
    // oracle; here we check the decomposition rows directly on a run whose
    // model converged (late episodes of the deterministic tabular run).
    const TabularEnv env = deterministic_tabular();
    const Grid grid = Grid::tabular(2, 2);
    AgentConfig cfg = tabular_agent_config(env);
    cfg.keep_models = true;
    RunArtifacts artifacts;
    const auto records = run_gp_ucrl(env, cfg, grid, 10, 13, &artifacts);
    const auto rows = decompose_regret(records, env, grid, artifacts, cfg.confidence.lipschitz);
    REQUIRE(rows.size() == records.size());
    for (const auto& row : rows) CHECK(row.holds);

    // Stochastic tabular instances: the inequality holds with the realized
    // residual.
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        const int ns = 2 + static_cast<int>(rng.uniform_int(2));
        const int na = 2;
        Matrix reward(ns, na);
        std::vector<std::vector<std::vector<double>>> transition;
        for (int s = 0; s < ns; ++s) {
            std::vector<std::vector<double>> per_state;
            for (int a = 0; a < na; ++a) {
                reward(s, a) = rng.uniform(0, 1);
                std::vector<double> row(static_cast<std::size_t>(ns));
                double sum = 0.0;
                for (auto& p : row) {
                    p = rng.uniform(0.05, 1.0);
                    sum += p;
                }
                for (auto& p : row) p /= sum;
                // Normalize exactly.
                double acc = 0.0;
                for (std::size_t i = 0; i + 1 < row.size(); ++i) acc += row[i];
                row.back() = 1.0 - acc;
                per_state.push_back(std::move(row));
            }
            transition.push_back(std::move(per_state));
        }
        const TabularEnv stoch(reward, transition, 3, 0.05);
        const Grid sgrid = Grid::tabular(ns, na);
        AgentConfig scfg = tabular_agent_config(env);
        auto [kr, kp] = tabular_as_kernel(stoch);
        scfg.reward_kernel = kr;
        scfg.transition_kernel = kp;
        scfg.confidence.sigma_r = 0.05;
        scfg.confidence.sigma_p = 1.0;
        scfg.confidence.lipschitz = 3.0 * (ns - 1);
        scfg.keep_models = true;
        scfg.gamma_r = GammaSchedule::analytic(kr, 3.0, 1.0);
        scfg.gamma_p = GammaSchedule::analytic(kp, 3.0, 1.0);
        RunArtifacts art;
        const auto recs = run_gp_ucrl(stoch, scfg, sgrid, 8, 19 + trial, &art);
        const auto drows = decompose_regret(recs, stoch, sgrid, art, scfg.confidence.lipschitz);
        for (const auto& row : drows) CHECK(row.holds);
    }
}

TEST_CASE("zero-beta debug mode logs zero betas") {
    const TabularEnv env = deterministic_tabular();
    const Grid grid = Grid::tabular(2, 2);
    AgentConfig cfg = tabular_agent_config(env);
    cfg.zero_beta_debug = true;
    const auto records = run_gp_ucrl(env, cfg, grid, 3, 23);
    for (const auto& rec : records) {
        CHECK(rec.beta_r == 0.0);
        CHECK(rec.beta_p == 0.0);
    }
}
