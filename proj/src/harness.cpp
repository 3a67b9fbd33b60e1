#include "kmdp/harness.hpp"

#include "kmdp/infogain.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace kmdp {

namespace fs = std::filesystem;
using nlohmann::json;

const char* kEpisodeCsvHeader =
    "episode,realized_return,optimal_value,policy_value,inst_regret,cum_regret,"
    "beta_r,beta_p,reward_dev_sum,trans_dev_sum,wall_ms";

const char* kSummaryCsvHeader =
    "agent,seed,final_regret,growth_p,growth_ci_lo,growth_ci_hi,coverage_viol,secs";

namespace {

void require_keys(const json& j, const std::string& context,
                  std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError(context + ": unknown key '" + it.key() + "'");
    }
}

Vector parse_vector(const json& j, const std::string& context) {
    if (!j.is_array() || j.empty()) throw ConfigError(context + ": expected non-empty array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

Matrix parse_matrix(const json& j, const std::string& context) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw ConfigError(context + ": expected array of rows");
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw ConfigError(context + ": ragged rows");
        for (std::size_t k = 0; k < cols; ++k) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
        }
    }
    return m;
}

Box parse_box(const json& j, const std::string& context) {
    require_keys(j, context, {"lo", "hi"});
    return Box(parse_vector(j.at("lo"), context + ".lo"), parse_vector(j.at("hi"), context + ".hi"));
}

std::shared_ptr<const EpisodicEnv> build_env_from_json(const json& e) {
    if (!e.is_object() || !e.contains("kind")) throw ConfigError("env: missing 'kind'");
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "lqr") {
        require_keys(e, "env(lqr)",
                     {"kind", "a", "b", "p", "q", "state_box", "action_box", "horizon", "sigma_r",
                      "sigma_p", "paper_literal_sign", "initial_state"});
        auto env = std::make_shared<LqrEnv>(
            parse_matrix(e.at("a"), "env.a"), parse_matrix(e.at("b"), "env.b"),
            parse_matrix(e.at("p"), "env.p"), parse_matrix(e.at("q"), "env.q"),
            parse_box(e.at("state_box"), "env.state_box"),
            parse_box(e.at("action_box"), "env.action_box"), e.at("horizon").get<int>(),
            e.at("sigma_r").get<double>(), e.at("sigma_p").get<double>(),
            e.value("paper_literal_sign", false));
        if (e.contains("initial_state")) {
            env->set_initial_state(parse_vector(e.at("initial_state"), "env.initial_state"));
        }
        return env;
    }
    if (kind == "tabular") {
        require_keys(e, "env(tabular)",
                     {"kind", "csv", "reward", "transition", "horizon", "sigma_r", "initial_state"});
        const int horizon = e.at("horizon").get<int>();
        const double sigma_r = e.at("sigma_r").get<double>();
        const int initial_state = e.value("initial_state", 0);
        if (e.contains("csv")) {
            return std::make_shared<TabularEnv>(TabularEnv::from_csv(
                e.at("csv").get<std::string>(), horizon, sigma_r, initial_state));
        }
        if (!e.contains("reward") || !e.contains("transition")) {
            throw ConfigError("env(tabular): needs either 'csv' or 'reward' + 'transition'");
        }
        std::vector<std::vector<std::vector<double>>> transition;
        for (const auto& per_state : e.at("transition")) {
            std::vector<std::vector<double>> rows;
            for (const auto& row : per_state) rows.push_back(row.get<std::vector<double>>());
            transition.push_back(std::move(rows));
        }
        return std::make_shared<TabularEnv>(parse_matrix(e.at("reward"), "env.reward"),
                                            std::move(transition), horizon, sigma_r, initial_state);
    }
    if (kind == "rkhs") {
        require_keys(e, "env(rkhs)",
                     {"kind", "state_box", "action_box", "horizon", "sigma_r", "sigma_p", "b_r",
                      "b_p", "n_centers", "function_seed", "reward_kernel", "transition_kernel"});
        const Box sbox = parse_box(e.at("state_box"), "env.state_box");
        const Box abox = parse_box(e.at("action_box"), "env.action_box");
        Kernel kr = Kernel::from_json(e.at("reward_kernel"));
        Kernel kp = Kernel::from_json(e.at("transition_kernel"));
        const int m = static_cast<int>(sbox.dim());
        const int n = static_cast<int>(abox.dim());
        if (kr.dim() != m + n) throw ConfigError("env(rkhs): reward_kernel dim must be m + n");
        if (kp.dim() != m + n + 1) {
            throw ConfigError("env(rkhs): transition_kernel dim must be m + n + 1");
        }
        const int n_centers = e.at("n_centers").get<int>();
        const std::uint64_t fseed = e.at("function_seed").get<std::uint64_t>();

        Vector zlo(m + n), zhi(m + n);
        zlo << sbox.lo, abox.lo;
        zhi << sbox.hi, abox.hi;
        const Box zbox(zlo, zhi);
        Vector zilo(m + n + 1), zihi(m + n + 1);
        zilo << zlo, 0.0;
        zihi << zhi, static_cast<double>(m - 1);
        const Box zibox(zilo, zihi);

        Rng truth_rng = derive_stream(fseed, "rkhs-env-truth");
        RkhsFunction reward =
            rkhs_sample(kr, zbox, n_centers, e.at("b_r").get<double>(), truth_rng);
        RkhsFunction transition =
            rkhs_sample(kp, zibox, n_centers * m, e.at("b_p").get<double>(), truth_rng);
        return std::make_shared<RkhsEnv>(std::move(reward), std::move(transition), sbox, abox,
                                         e.at("horizon").get<int>(), e.at("sigma_r").get<double>(),
                                         e.at("sigma_p").get<double>());
    }
    throw ConfigError("env: unknown kind '" + kind + "'");
}

// "auto"-valued confidence entries resolve from the environment.
struct AutoDefaults {
    Kernel reward_kernel;
    Kernel transition_kernel;
    double b_r = 0.0;
    double b_p = 0.0;
    double sigma_r = 0.0;
    double sigma_p = 0.0;
    double lipschitz = 1.0;
};

AutoDefaults auto_defaults(const EpisodicEnv& env, EnvKind kind) {
    AutoDefaults d;
    d.sigma_r = env.sigma_r();
    d.sigma_p = env.sigma_p();
    if (kind == EnvKind::Lqr) {
        const auto& lqr = dynamic_cast<const LqrEnv&>(env);
        LqrKernelSetup setup = lqr_kernel_setup(lqr);
        d.reward_kernel = setup.reward_kernel;
        d.transition_kernel = setup.transition_kernel;
        d.b_r = setup.b_r;
        d.b_p = setup.b_p;
        d.lipschitz = lqr_lipschitz_bound(lqr);
    } else if (kind == EnvKind::Tabular) {
        const auto& tab = dynamic_cast<const TabularEnv&>(env);
        auto [kr, kp] = tabular_as_kernel(tab);
        d.reward_kernel = kr;
        d.transition_kernel = kp;
        double r2 = 0.0, p2 = 0.0;
        double rmin = 0.0, rmax = 0.0;
        bool deterministic = true;
        bool first = true;
        for (int s = 0; s < tab.n_states(); ++s) {
            for (int a = 0; a < tab.n_actions(); ++a) {
                Vector z(2);
                z << s, a;
                const double r = tab.oracle_mean_reward(z);
                r2 += r * r;
                const double mean_next = tab.oracle_mean_transition(z)[0];
                p2 += mean_next * mean_next;
                if (first) {
                    rmin = rmax = r;
                    first = false;
                } else {
                    rmin = std::min(rmin, r);
                    rmax = std::max(rmax, r);
                }
                for (int s2 = 0; s2 < tab.n_states(); ++s2) {
                    const double p = tab.transition_prob(s, a, s2);
                    if (p > 0 && p < 1) deterministic = false;
                }
            }
        }
        d.b_r = std::max(std::sqrt(r2), 1e-6);
        d.b_p = std::max(std::sqrt(p2), 1e-6);
        d.sigma_p = deterministic ? 0.0 : 0.5 * (tab.n_states() - 1);
        d.lipschitz = std::max(1.0, env.horizon() * (rmax - rmin));
    } else {
        const auto& rk = dynamic_cast<const RkhsEnv&>(env);
        d.reward_kernel = rk.reward_function().kernel();
        d.transition_kernel = rk.transition_function().kernel();
        d.b_r = rk.reward_function().rkhs_norm();
        d.b_p = rk.transition_function().rkhs_norm();
        // Span-scale heuristic: |R| <= B_R under capped kernels, so one-step
        // future values vary by at most H B_R.
        d.lipschitz = std::max(1.0, env.horizon() * d.b_r);
    }
    return d;
}

double parse_auto(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_string()) {
        if (v.get<std::string>() == "auto") return fallback;
        throw ConfigError(std::string("confidence.") + key + ": expected number or \"auto\"");
    }
    return v.get<double>();
}

} // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: JSON parse failure: ") + e.what());
    }
    require_keys(j, "config",
                 {"schema_version", "env", "kernels", "confidence", "grid", "agents", "episodes",
                  "seeds", "mig", "lambda_r", "lambda_p", "output_dir"});

    ExperimentConfig cfg;
    if (!j.contains("schema_version")) throw ConfigError("config: missing schema_version");
    cfg.schema_version = j.at("schema_version").get<int>();
    if (cfg.schema_version != 1) {
        throw ConfigError("config: unsupported schema_version " + std::to_string(cfg.schema_version));
    }
    if (!j.contains("env")) throw ConfigError("config: missing env");
    cfg.env = build_env_from_json(j.at("env"));
    cfg.env_json = j.at("env").dump();
    const std::string kind = j.at("env").at("kind").get<std::string>();
    cfg.env_kind = kind == "lqr" ? EnvKind::Lqr : kind == "tabular" ? EnvKind::Tabular : EnvKind::Rkhs;

    const AutoDefaults autos = auto_defaults(*cfg.env, cfg.env_kind);

    // Kernels: "auto" or explicit specs.
    if (!j.contains("kernels") || (j.at("kernels").is_string() && j.at("kernels") == "auto")) {
        cfg.reward_kernel = autos.reward_kernel;
        cfg.transition_kernel = autos.transition_kernel;
    } else {
        const json& k = j.at("kernels");
        require_keys(k, "kernels", {"reward", "transition"});
        cfg.reward_kernel = Kernel::from_json(k.at("reward"));
        cfg.transition_kernel = Kernel::from_json(k.at("transition"));
    }
    const int zdim = cfg.env->state_dim() + cfg.env->action_dim();
    if (cfg.reward_kernel.dim() != zdim) {
        throw ConfigError("config: reward kernel dim must equal m + n");
    }
    if (cfg.transition_kernel.dim() != zdim + 1) {
        throw ConfigError("config: transition kernel dim must equal m + n + 1 (index slot)");
    }

    // Confidence.
    ConfidenceConfig& conf = cfg.confidence;
    conf.horizon = cfg.env->horizon();
    conf.state_dim = cfg.env->state_dim();
    conf.action_dim = cfg.env->action_dim();
    if (j.contains("confidence")) {
        const json& c = j.at("confidence");
        require_keys(c, "confidence",
                     {"b_r", "b_p", "sigma_r", "sigma_p", "delta", "lipschitz", "mode", "a_r",
                      "b_r_deriv", "a_p", "b_p_deriv", "c1", "c2"});
        conf.b_r = parse_auto(c, "b_r", autos.b_r);
        conf.b_p = parse_auto(c, "b_p", autos.b_p);
        conf.sigma_r = parse_auto(c, "sigma_r", autos.sigma_r);
        conf.sigma_p = parse_auto(c, "sigma_p", autos.sigma_p);
        conf.lipschitz = parse_auto(c, "lipschitz", autos.lipschitz);
        conf.delta = c.value("delta", 0.1);
        const std::string mode = c.value("mode", "frequentist");
        if (mode == "frequentist") {
            conf.mode = ConfidenceMode::Frequentist;
        } else if (mode == "bayes-gp") {
            conf.mode = ConfidenceMode::BayesGp;
        } else {
            throw ConfigError("confidence.mode: expected 'frequentist' or 'bayes-gp'");
        }
        conf.a_r = c.value("a_r", 1.0);
        conf.b_r_deriv = c.value("b_r_deriv", 1.0);
        conf.a_p = c.value("a_p", 1.0);
        conf.b_p_deriv = c.value("b_p_deriv", 1.0);
        conf.c1 = c.value("c1", 1.0);
        conf.c2 = c.value("c2", 1.0);
    } else {
        conf.b_r = autos.b_r;
        conf.b_p = autos.b_p;
        conf.sigma_r = autos.sigma_r;
        conf.sigma_p = autos.sigma_p;
        conf.lipschitz = autos.lipschitz;
    }
    conf.validate();

    if (j.contains("grid")) {
        const json& g = j.at("grid");
        require_keys(g, "grid", {"state_points_per_dim", "action_points_per_dim"});
        cfg.state_points_per_dim = g.value("state_points_per_dim", cfg.state_points_per_dim);
        cfg.action_points_per_dim = g.value("action_points_per_dim", cfg.action_points_per_dim);
    }
    if (cfg.state_points_per_dim < 1 || cfg.action_points_per_dim < 1) {
        throw ConfigError("grid: points per dimension must be >= 1");
    }

    if (!j.contains("agents")) throw ConfigError("config: missing agents");
    for (const auto& a : j.at("agents")) {
        const std::string name = a.get<std::string>();
        if (name != "gp_ucrl" && name != "psrl" && name != "random" && name != "oracle") {
            throw ConfigError("config: unknown agent '" + name + "'");
        }
        cfg.agents.push_back(name);
    }

    if (!j.contains("episodes")) throw ConfigError("config: missing episodes");
    cfg.episodes = j.at("episodes").get<int>();
    if (cfg.episodes < 0) throw ConfigError("config: episodes must be >= 0");

    if (!j.contains("seeds") || j.at("seeds").empty()) {
        throw ConfigError("config: seeds must be a non-empty array");
    }
    for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());

    if (j.contains("mig")) {
        const json& m = j.at("mig");
        require_keys(m, "mig", {"method", "mesh_size", "mesh_seed", "scale", "cache_dir"});
        const std::string method = m.value("method", "greedy-mesh");
        if (method == "greedy-mesh") {
            cfg.mig_method = MigMethod::GreedyMesh;
        } else if (method == "analytic-rate") {
            cfg.mig_method = MigMethod::AnalyticRate;
        } else {
            throw ConfigError("mig.method: expected 'greedy-mesh' or 'analytic-rate'");
        }
        cfg.mig_mesh_size = m.value("mesh_size", 512);
        cfg.mig_mesh_seed = m.value("mesh_seed", std::uint64_t{0});
        cfg.mig_scale = m.value("scale", 1.0);
        cfg.mig_cache_dir = m.value("cache_dir", std::string{});
        if (cfg.mig_mesh_size < 1) throw ConfigError("mig.mesh_size must be >= 1");
        if (!(cfg.mig_scale > 0)) throw ConfigError("mig.scale must be positive");
    }

    if (j.contains("lambda_r")) cfg.lambda_r_override = j.at("lambda_r").get<double>();
    if (j.contains("lambda_p")) cfg.lambda_p_override = j.at("lambda_p").get<double>();
    if (cfg.lambda_r_override < 0 || cfg.lambda_p_override < 0) {
        throw ConfigError("config: lambda overrides must be positive when given");
    }
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

    if (cfg.mig_method == MigMethod::GreedyMesh && cfg.episodes > 0) {
        const long long need_r = static_cast<long long>(cfg.episodes - 1) * cfg.env->horizon();
        const long long need_p = static_cast<long long>(cfg.env->state_dim()) * need_r;
        const long long need = std::max(need_r, need_p);
        if (need > cfg.mig_mesh_size) {
            throw ConfigError(
                "mig: greedy-mesh schedule needs " + std::to_string(need) +
                " points but mesh_size is " + std::to_string(cfg.mig_mesh_size) +
                "; raise mig.mesh_size or switch mig.method to 'analytic-rate'");
        }
    }
    return cfg;
}

Grid ExperimentConfig::build_grid(const EpisodicEnv& env_ref) const {
    if (env_kind == EnvKind::Tabular) {
        const auto& tab = dynamic_cast<const TabularEnv&>(env_ref);
        return Grid::tabular(tab.n_states(), tab.n_actions());
    }
    return Grid::uniform(env_ref.state_box(), state_points_per_dim, env_ref.action_box(),
                         action_points_per_dim);
}

namespace {

Box z_domain(const EpisodicEnv& env, bool indexed) {
    const int m = env.state_dim();
    const int n = env.action_dim();
    const int d = m + n + (indexed ? 1 : 0);
    Vector lo(d), hi(d);
    lo.head(m) = env.state_box().lo;
    hi.head(m) = env.state_box().hi;
    lo.segment(m, n) = env.action_box().lo;
    hi.segment(m, n) = env.action_box().hi;
    if (indexed) {
        lo[d - 1] = 0;
        hi[d - 1] = std::max(0, m - 1);
    }
    return Box(lo, hi);
}

GammaSchedule gamma_schedule_for(const ExperimentConfig& cfg, const EpisodicEnv& env,
                                 const Kernel& kernel, double lambda, bool indexed) {
    if (cfg.mig_method == MigMethod::AnalyticRate) {
        return GammaSchedule::analytic(kernel, lambda, cfg.mig_scale);
    }
    const long long per_episode = static_cast<long long>(env.horizon()) *
                                  (indexed ? env.state_dim() : 1);
    const int t_max = static_cast<int>(
        std::min<long long>(cfg.mig_mesh_size, std::max<long long>(1, (cfg.episodes - 1) * per_episode)));

    const std::string cache_dir =
        cfg.mig_cache_dir.empty() ? cfg.output_dir + "/mig_cache" : cfg.mig_cache_dir;
    const std::uint64_t key =
        mig_cache_key(kernel, cfg.mig_mesh_seed, lambda, t_max, cfg.mig_mesh_size);
    char name[64];
    std::snprintf(name, sizeof(name), "mig_%016llx.bin", static_cast<unsigned long long>(key));
    const std::string path = cache_dir + "/" + name;

    std::vector<double> schedule = load_mig_schedule(path);
    if (static_cast<int>(schedule.size()) < t_max) {
        const auto mesh = make_mesh(kernel, z_domain(env, indexed), cfg.mig_mesh_size,
                                    cfg.mig_mesh_seed);
        schedule = mig_schedule(kernel, mesh, t_max, lambda);
        std::error_code ec;
        fs::create_directories(cache_dir, ec);
        if (!ec) save_mig_schedule(path, schedule);
    }
    return GammaSchedule::from_values(std::move(schedule));
}

double resolved_lambda_r(const ExperimentConfig& cfg) {
    if (cfg.lambda_r_override > 0) return cfg.lambda_r_override;
    if (cfg.confidence.mode == ConfidenceMode::BayesGp) {
        return std::max(cfg.confidence.sigma_r * cfg.confidence.sigma_r, 1e-8);
    }
    return static_cast<double>(cfg.env->horizon());
}

double resolved_lambda_p(const ExperimentConfig& cfg) {
    if (cfg.lambda_p_override > 0) return cfg.lambda_p_override;
    if (cfg.confidence.mode == ConfidenceMode::BayesGp) {
        return std::max(cfg.confidence.sigma_p * cfg.confidence.sigma_p, 1e-8);
    }
    return static_cast<double>(cfg.env->state_dim()) * cfg.env->horizon();
}

} // namespace

GammaSchedule ExperimentConfig::gamma_for_reward(const EpisodicEnv& env_ref) const {
    return gamma_schedule_for(*this, env_ref, reward_kernel, resolved_lambda_r(*this), false);
}

GammaSchedule ExperimentConfig::gamma_for_transition(const EpisodicEnv& env_ref) const {
    return gamma_schedule_for(*this, env_ref, transition_kernel, resolved_lambda_p(*this), true);
}

AgentConfig ExperimentConfig::agent_config(const EpisodicEnv& env_ref) const {
    AgentConfig a;
    a.reward_kernel = reward_kernel;
    a.transition_kernel = transition_kernel;
    a.confidence = confidence;
    a.lambda_r = resolved_lambda_r(*this);
    a.lambda_p = resolved_lambda_p(*this);
    if (confidence.mode == ConfidenceMode::Frequentist) {
        a.gamma_r = gamma_for_reward(env_ref);
        a.gamma_p = gamma_for_transition(env_ref);
    } else {
        a.gamma_r = GammaSchedule::analytic(reward_kernel, a.lambda_r, mig_scale);
        a.gamma_p = GammaSchedule::analytic(transition_kernel, a.lambda_p, mig_scale);
    }
    return a;
}

// --- CSV --------------------------------------------------------------------

void write_episode_csv(const std::string& path, const std::vector<EpisodeRecord>& records) {
    std::ofstream out(path, std::ios::binary); // binary: no newline translation
    if (!out) throw IoError("write_episode_csv: cannot open " + path);
    out << kEpisodeCsvHeader << '\n';
    for (const EpisodeRecord& r : records) {
        out << r.episode << ',' << format_double(r.realized_return) << ','
            << format_double(r.optimal_value) << ',' << format_double(r.policy_value) << ','
            << format_double(r.inst_regret) << ',' << format_double(r.cum_regret) << ','
            << format_double(r.beta_r) << ',' << format_double(r.beta_p) << ','
            << format_double(r.reward_dev_sum) << ',' << format_double(r.trans_dev_sum) << ','
            << r.wall_ms << '\n';
    }
    if (!out) throw IoError("write_episode_csv: write failure for " + path);
}

std::vector<EpisodeRecord> read_episode_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_episode_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kEpisodeCsvHeader) {
        throw IoError("read_episode_csv: bad header in " + path);
    }
    std::vector<EpisodeRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 11) throw IoError("read_episode_csv: bad row in " + path);
        EpisodeRecord r;
        r.episode = static_cast<int>(parse_double(f[0]));
        r.realized_return = parse_double(f[1]);
        r.optimal_value = parse_double(f[2]);
        r.policy_value = parse_double(f[3]);
        r.inst_regret = parse_double(f[4]);
        r.cum_regret = parse_double(f[5]);
        r.beta_r = parse_double(f[6]);
        r.beta_p = parse_double(f[7]);
        r.reward_dev_sum = parse_double(f[8]);
        r.trans_dev_sum = parse_double(f[9]);
        r.wall_ms = static_cast<long long>(parse_double(f[10]));
        records.push_back(r);
    }
    return records;
}

void write_summary_csv(const std::string& path, const RunSummary& summary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_summary_csv: cannot open " + path);
    out << kSummaryCsvHeader << '\n';
    for (const RunSummaryRow& row : summary.rows) {
        if (row.failed) continue;
        out << row.agent << ',' << row.seed << ',' << format_double(row.final_regret) << ','
            << format_double(row.growth_p) << ',' << format_double(row.growth_ci_lo) << ','
            << format_double(row.growth_ci_hi) << ',' << format_double(row.coverage_viol) << ','
            << format_double(row.secs) << '\n';
    }
    if (!out) throw IoError("write_summary_csv: write failure for " + path);
}

// --- growth-exponent fit ------------------------------------------------------

namespace {

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx < 1e-12) return 0.0;
    return sxy / sxx;
}

} // namespace

std::pair<double, Interval> fit_growth_exponent(const std::vector<double>& cumulative_regret,
                                                std::uint64_t bootstrap_seed) {
    std::vector<double> xs, ys;
    const std::size_t n = cumulative_regret.size();
    for (std::size_t l = n / 2; l < n; ++l) {
        const double cum = cumulative_regret[l];
        if (cum > 0) {
            xs.push_back(std::log(static_cast<double>(l + 1)));
            ys.push_back(std::log(cum));
        }
    }
    if (xs.size() < 2) return {0.0, Interval{0.0, 0.0}};

    const double p = ls_slope(xs, ys);

    Rng rng = derive_stream(bootstrap_seed, "bootstrap");
    std::vector<double> slopes;
    slopes.reserve(200);
    std::vector<double> bx(xs.size()), by(xs.size());
    for (int b = 0; b < 200; ++b) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const std::size_t k = rng.uniform_int(xs.size());
            bx[i] = xs[k];
            by[i] = ys[k];
        }
        slopes.push_back(ls_slope(bx, by));
    }
    std::sort(slopes.begin(), slopes.end());
    const auto pick = [&](double q) {
        const std::size_t i = static_cast<std::size_t>(q * (slopes.size() - 1));
        return slopes[i];
    };
    return {p, Interval{pick(0.025), pick(0.975)}};
}

// --- experiment runner --------------------------------------------------------

namespace {

int worker_count(std::size_t cells) {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("KMDP_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return std::min<int>(n, static_cast<int>(cells));
}

std::vector<EpisodeRecord> run_cell(const ExperimentConfig& cfg, const AgentConfig& agent_cfg,
                                    const Grid& grid, const std::string& agent,
                                    std::uint64_t seed) {
    const EpisodicEnv& env = *cfg.env;
    if (agent == "gp_ucrl") return run_gp_ucrl(env, agent_cfg, grid, cfg.episodes, seed);
    if (agent == "psrl") return run_psrl(env, agent_cfg, grid, cfg.episodes, seed);
    if (agent == "random") return run_baseline(env, BaselineKind::Random, grid, cfg.episodes, seed);
    return run_baseline(env, BaselineKind::Oracle, grid, cfg.episodes, seed);
}

RunSummaryRow summarize_cell(const ExperimentConfig& cfg, const Grid& grid,
                             const std::string& agent, std::uint64_t seed,
                             const std::vector<EpisodeRecord>& records) {
    RunSummaryRow row;
    row.agent = agent;
    row.seed = seed;
    if (!records.empty()) row.final_regret = records.back().cum_regret;

    std::vector<double> cum;
    cum.reserve(records.size());
    long long wall = 0;
    for (const auto& r : records) {
        cum.push_back(r.cum_regret);
        wall += r.wall_ms;
    }
    auto [p, ci] = fit_growth_exponent(cum, seed);
    row.growth_p = p;
    row.growth_ci_lo = ci.lo;
    row.growth_ci_hi = ci.hi;
    row.secs = static_cast<double>(wall) / 1000.0;

    // Episode-level consistency violations, recomputable from the CSV: the
    // realized value gap exceeding the model-deviation terms plus the
    // discretization slack. Only meaningful for the confidence-set agents.
    if ((agent == "gp_ucrl" || agent == "psrl") && !records.empty()) {
        const double slack = 2.0 * cfg.env->horizon() * (cfg.confidence.lipschitz + 1.0) *
                             grid.snap_radius();
        int viol = 0;
        for (const auto& r : records) {
            if (r.inst_regret > r.reward_dev_sum + r.trans_dev_sum + slack) ++viol;
        }
        row.coverage_viol = static_cast<double>(viol) / static_cast<double>(records.size());
    }
    return row;
}

} // namespace

RunSummary run_experiment(const ExperimentConfig& cfg, bool force) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("run_experiment: cannot create output dir " + cfg.output_dir);

    const Grid grid = cfg.build_grid(*cfg.env);
    // Shared across cells; built once (gamma depends only on kernel/domain/lambda).
    const AgentConfig agent_cfg = cfg.agent_config(*cfg.env);

    struct Cell {
        std::string agent;
        std::uint64_t seed;
        std::string path;
    };
    std::vector<Cell> cells;
    for (const std::string& agent : cfg.agents) {
        for (std::uint64_t seed : cfg.seeds) {
            cells.push_back(
                {agent, seed, cfg.output_dir + "/" + agent + "_seed" + std::to_string(seed) + ".csv"});
        }
    }

    std::vector<RunSummaryRow> rows(cells.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) break;
            const Cell& cell = cells[i];
            try {
                std::vector<EpisodeRecord> records;
                if (!force && fs::exists(cell.path)) {
                    records = read_episode_csv(cell.path);
                } else {
                    records = run_cell(cfg, agent_cfg, grid, cell.agent, cell.seed);
                    write_episode_csv(cell.path, records);
                }
                rows[i] = summarize_cell(cfg, grid, cell.agent, cell.seed, records);
            } catch (const std::exception& e) {
                RunSummaryRow row;
                row.agent = cell.agent;
                row.seed = cell.seed;
                row.failed = true;
                row.error = e.what();
                rows[i] = std::move(row);
            }
        }
    };

    const int workers = worker_count(cells.size());
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    RunSummary summary;
    summary.rows = std::move(rows);
    for (const auto& row : summary.rows) summary.partial_failure |= row.failed;
    summary.summary_csv_path = cfg.output_dir + "/summary.csv";
    write_summary_csv(summary.summary_csv_path, summary);
    return summary;
}

// --- coverage harness ----------------------------------------------------------

CoverageReport run_coverage(const ExperimentConfig& cfg, int runs, bool zero_beta_debug) {
    if (runs < 1) throw InputError("run_coverage: runs must be >= 1");
    const EpisodicEnv& env = *cfg.env;
    const int horizon = env.horizon();
    const int m = env.state_dim();
    const Grid grid = cfg.build_grid(env);
    const std::vector<Vector> zs = grid.z_points();
    const std::vector<Vector> indexed_zs = TransitionPosterior::indexed_grid(zs, m);

    const double lambda_r = resolved_lambda_r(cfg);
    const double lambda_p = resolved_lambda_p(cfg);
    const GammaSchedule gamma_r = cfg.gamma_for_reward(env);
    const GammaSchedule gamma_p = cfg.gamma_for_transition(env);

    const int episodes = std::max(1, std::min(cfg.episodes, 10));
    const Box zbox = z_domain(env, false);
    const std::uint64_t master = cfg.seeds.front();

    std::vector<double> run_reward_rates, run_trans_rates;
    run_reward_rates.reserve(static_cast<std::size_t>(runs));
    run_trans_rates.reserve(static_cast<std::size_t>(runs));

    for (int run = 0; run < runs; ++run) {
        Rng truth_rng = derive_stream(master, "coverage-truth", static_cast<std::uint64_t>(run));
        Rng noise_rng = derive_stream(master, "coverage-noise", static_cast<std::uint64_t>(run));

        Vector zilo(zbox.dim() + 1), zihi(zbox.dim() + 1);
        zilo << zbox.lo, 0.0;
        zihi << zbox.hi, static_cast<double>(std::max(0, m - 1));
        const Box zibox(zilo, zihi);

        const RkhsFunction truth_r =
            rkhs_sample(cfg.reward_kernel, zbox, 30, cfg.confidence.b_r, truth_rng);
        const RkhsFunction truth_p =
            rkhs_sample(cfg.transition_kernel, zibox, 30 * m, cfg.confidence.b_p, truth_rng);

        GpPosterior post_r(cfg.reward_kernel, lambda_r, zs);
        GpPosterior post_p(cfg.transition_kernel, lambda_p, indexed_zs);

        long long viol_r = 0, viol_p = 0, events = 0;
        for (int l = 1; l <= episodes; ++l) {
            double br = 0.0, bp = 0.0, slack_r = 0.0, slack_p = 0.0;
            if (!zero_beta_debug) {
                if (cfg.confidence.mode == ConfidenceMode::Frequentist) {
                    br = beta_r(cfg.confidence, l, gamma_r.at(static_cast<long long>(l - 1) * horizon));
                    bp = beta_p(cfg.confidence, l,
                                gamma_p.at(static_cast<long long>(m) * (l - 1) * horizon));
                } else {
                    auto [ssz, asz] = bayes_grid_sizes(cfg.confidence, l);
                    br = bayes_beta_r(cfg.confidence, l, static_cast<double>(ssz),
                                      static_cast<double>(asz));
                    bp = bayes_beta_p(cfg.confidence, l, static_cast<double>(ssz),
                                      static_cast<double>(asz));
                    slack_r = bayes_reward_slack(l);
                    slack_p = bayes_transition_slack(cfg.confidence, l);
                }
            }

            const Vector& mu_r = post_r.grid_mean();
            const Vector sd_r = post_r.grid_sd();
            const Vector& mu_p = post_p.grid_mean();
            const Vector sd_p = post_p.grid_sd();
            for (std::size_t g = 0; g < zs.size(); ++g) {
                const Eigen::Index gi = static_cast<Eigen::Index>(g);
                ++events;
                if (std::abs(truth_r(zs[g]) - mu_r[gi]) > br * sd_r[gi] + slack_r) ++viol_r;
                double err = 0.0, width = 0.0;
                for (int i = 0; i < m; ++i) {
                    const Eigen::Index k = gi * m + i;
                    const double d = truth_p(indexed_zs[static_cast<std::size_t>(k)]) - mu_p[k];
                    err += d * d;
                    width += sd_p[k] * sd_p[k];
                }
                if (std::sqrt(err) > bp * std::sqrt(width) + slack_p) ++viol_p;
            }

            // Collect this episode's observations at random z's.
            std::vector<Vector> obs_z;
            std::vector<double> obs_r;
            std::vector<Vector> obs_next;
            for (int h = 0; h < horizon; ++h) {
                Vector z = zbox.sample(noise_rng);
                obs_r.push_back(truth_r(z) + cfg.confidence.sigma_r * noise_rng.normal());
                Vector next(m);
                for (int i = 0; i < m; ++i) {
                    next[i] = truth_p(TransitionPosterior::indexed_point(z, i)) +
                              cfg.confidence.sigma_p * noise_rng.normal();
                }
                obs_next.push_back(std::move(next));
                obs_z.push_back(std::move(z));
            }
            post_r = post_r.update(obs_z, obs_r);
            std::vector<Vector> indexed_obs;
            std::vector<double> next_targets;
            for (std::size_t k = 0; k < obs_z.size(); ++k) {
                for (int i = 0; i < m; ++i) {
                    indexed_obs.push_back(TransitionPosterior::indexed_point(obs_z[k], i));
                    next_targets.push_back(obs_next[k][i]);
                }
            }
            post_p = post_p.update(indexed_obs, next_targets);
        }
        run_reward_rates.push_back(static_cast<double>(viol_r) / static_cast<double>(events));
        run_trans_rates.push_back(static_cast<double>(viol_p) / static_cast<double>(events));
    }

    auto mean_se = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
        return std::make_pair(mean, std::sqrt(var / static_cast<double>(v.size())));
    };

    CoverageReport report;
    report.runs = runs;
    report.episodes = episodes;
    report.grid_points = static_cast<int>(zs.size());
    report.delta = cfg.confidence.delta;
    auto [mr, ser] = mean_se(run_reward_rates);
    auto [mp, sep] = mean_se(run_trans_rates);
    report.reward_rate = mr;
    report.transition_rate = mp;
    report.reward_threshold = report.delta + 2.0 * ser;
    report.transition_threshold = report.delta + 2.0 * sep;
    report.reward_pass = mr <= report.reward_threshold;
    report.transition_pass = mp <= report.transition_threshold;
    return report;
}

} // namespace kmdp
