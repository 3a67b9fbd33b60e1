#include "kmdp/confidence.hpp"

#include <cmath>

namespace kmdp {

void ConfidenceConfig::validate() const {
    if (!(b_r > 0) || !(b_p > 0)) throw ConfigError("confidence: B_R and B_P must be positive");
    if (sigma_r < 0 || sigma_p < 0) throw ConfigError("confidence: noise scales must be >= 0");
    if (!(delta > 0) || delta > 1) throw ConfigError("confidence: delta must be in (0, 1]");
    if (horizon < 1) throw ConfigError("confidence: horizon must be >= 1");
    if (state_dim < 1 || action_dim < 1) throw ConfigError("confidence: dims must be >= 1");
    if (lipschitz < 0) throw ConfigError("confidence: Lipschitz bound must be >= 0");
    if (mode == ConfidenceMode::BayesGp) {
        if (!(a_r > 0) || !(b_r_deriv > 0) || !(a_p > 0) || !(b_p_deriv > 0)) {
            throw ConfigError("confidence: bayes-gp derivative constants must be positive");
        }
        if (!(c1 > 0) || !(c2 > 0)) throw ConfigError("confidence: bayes-gp box sides must be positive");
    }
}

double beta_r(const ConfidenceConfig& cfg, int episode, double gamma_prev) {
    if (episode < 1) throw InputError("beta_r: episode index starts at 1");
    if (gamma_prev < 0) throw InputError("beta_r: gamma must be >= 0");
    return cfg.b_r + cfg.sigma_r / std::sqrt(static_cast<double>(cfg.horizon)) *
                         std::sqrt(2.0 * (std::log(3.0 / cfg.delta) + gamma_prev));
}

double beta_p(const ConfidenceConfig& cfg, int episode, double gamma_prev) {
    if (episode < 1) throw InputError("beta_p: episode index starts at 1");
    if (gamma_prev < 0) throw InputError("beta_p: gamma must be >= 0");
    return cfg.b_p + cfg.sigma_p / std::sqrt(static_cast<double>(cfg.state_dim) * cfg.horizon) *
                         std::sqrt(2.0 * (std::log(3.0 / cfg.delta) + gamma_prev));
}

Interval reward_band(const GpPosterior& posterior, double beta, const Vector& z) {
    if (beta < 0) throw InputError("reward_band: beta must be >= 0");
    auto [mean, var] = posterior.predict(z);
    const double sd = std::sqrt(std::max(var, 0.0));
    return Interval{mean - beta * sd, mean + beta * sd};
}

std::pair<Vector, double> transition_ball(const TransitionPosterior& posterior, double beta,
                                          const Vector& z) {
    if (beta < 0) throw InputError("transition_ball: beta must be >= 0");
    auto [mean, sd] = posterior.predict(z);
    return {mean, beta * sd.norm()};
}

namespace {

constexpr double kSizeCap = 4.611686018427388e18; // 2^62

std::int64_t pow_clamped(double base, int exponent) {
    if (base < 1.0) base = 1.0;
    double v = 1.0;
    for (int i = 0; i < exponent; ++i) {
        v *= base;
        if (v > kSizeCap) return static_cast<std::int64_t>(kSizeCap);
    }
    return static_cast<std::int64_t>(std::ceil(v));
}

} // namespace

std::pair<std::int64_t, std::int64_t> bayes_grid_sizes(const ConfidenceConfig& cfg, int episode) {
    if (cfg.mode != ConfidenceMode::BayesGp) {
        throw InputError("bayes_grid_sizes: config is not in bayes-gp mode");
    }
    if (episode < 1) throw InputError("bayes_grid_sizes: episode index starts at 1");
    if (!(cfg.delta > 0)) throw InputError("bayes_grid_sizes: delta must be positive");
    const double m = cfg.state_dim;
    const double n = cfg.action_dim;
    const double l2 = static_cast<double>(episode) * episode;
    const double log_r = std::log(6.0 * (m + n) * cfg.a_r / cfg.delta);
    const double log_p = std::log(6.0 * m * (m + n) * cfg.a_p / cfg.delta);
    if (!(log_r > 0) || !(log_p > 0)) {
        throw InputError("bayes_grid_sizes: delta too large for the log terms to be positive");
    }

    const double s_side_r = 2.0 * cfg.c1 * m * l2 * cfg.b_r_deriv * std::sqrt(log_r);
    const double s_side_p = 2.0 * cfg.c1 * m * l2 * cfg.b_p_deriv * std::sqrt(log_p);
    const double a_side_r = 2.0 * cfg.c2 * n * l2 * cfg.b_r_deriv * std::sqrt(log_r);
    const double a_side_p = 2.0 * cfg.c2 * n * l2 * cfg.b_p_deriv * std::sqrt(log_p);

    const std::int64_t s_size =
        std::max<std::int64_t>(1, std::max(pow_clamped(s_side_r, cfg.state_dim),
                                           pow_clamped(s_side_p, cfg.state_dim)));
    const std::int64_t a_size =
        std::max<std::int64_t>(1, std::max(pow_clamped(a_side_r, cfg.action_dim),
                                           pow_clamped(a_side_p, cfg.action_dim)));
    return {s_size, a_size};
}

double bayes_beta_r(const ConfidenceConfig& cfg, int episode, double s_size, double a_size) {
    if (episode < 1) throw InputError("bayes_beta_r: episode index starts at 1");
    const double l2 = static_cast<double>(episode) * episode;
    return std::sqrt(2.0 * std::log(s_size * a_size * M_PI * M_PI * l2 / cfg.delta));
}

double bayes_beta_p(const ConfidenceConfig& cfg, int episode, double s_size, double a_size) {
    if (episode < 1) throw InputError("bayes_beta_p: episode index starts at 1");
    const double l2 = static_cast<double>(episode) * episode;
    return std::sqrt(2.0 * std::log(s_size * a_size * cfg.state_dim * M_PI * M_PI * l2 / cfg.delta));
}

double bayes_reward_slack(int episode) {
    if (episode < 1) throw InputError("bayes_reward_slack: episode index starts at 1");
    return 1.0 / (static_cast<double>(episode) * episode);
}

double bayes_transition_slack(const ConfidenceConfig& cfg, int episode) {
    if (episode < 1) throw InputError("bayes_transition_slack: episode index starts at 1");
    return std::sqrt(static_cast<double>(cfg.state_dim)) / (static_cast<double>(episode) * episode);
}

} // namespace kmdp
