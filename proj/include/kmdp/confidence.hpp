#pragma once

#include "kmdp/common.hpp"
#include "kmdp/gp.hpp"

#include <cstdint>
#include <utility>

namespace kmdp {

enum class ConfidenceMode { Frequentist, BayesGp };

struct ConfidenceConfig {
    double b_r = 1.0;      // RKHS norm bound for the mean reward
    double b_p = 1.0;      // RKHS norm bound for the mean transition
    double sigma_r = 1.0;  // sub-Gaussian reward noise scale
    double sigma_p = 1.0;  // sub-Gaussian transition noise scale
    double delta = 0.1;    // failure probability
    int horizon = 1;       // H
    int state_dim = 1;     // m
    int action_dim = 1;    // n
    double lipschitz = 1.0; // L, the known bound on the future-value Lipschitz constant
    ConfidenceMode mode = ConfidenceMode::Frequentist;

    // Bayes-GP mode only: derivative-tail constants and box sides. The
    // theory assumes these exist for smooth kernels but never computes them
    // for concrete ones, so they are user configuration (default 1).
    double a_r = 1.0;
    double b_r_deriv = 1.0;
    double a_p = 1.0;
    double b_p_deriv = 1.0;
    double c1 = 1.0;
    double c2 = 1.0;

    void validate() const;
};

/// beta_{R,l} = B_R + sigma_R/sqrt(H) * sqrt(2 (ln(3/delta) + gamma_prev)),
/// where gamma_prev is the information-gain value at (l-1)H observations.
double beta_r(const ConfidenceConfig& cfg, int episode, double gamma_prev);

/// beta_{P,l} = B_P + sigma_P/sqrt(mH) * sqrt(2 (ln(3/delta) + gamma_prev)),
/// gamma_prev taken at m(l-1)H observations.
double beta_p(const ConfidenceConfig& cfg, int episode, double gamma_prev);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
    double width() const { return hi - lo; }
};

/// [mu - beta sigma, mu + beta sigma] at z.
Interval reward_band(const GpPosterior& posterior, double beta, const Vector& z);

/// (mu_P(z), beta * ||sigma_P(z)||_2).
std::pair<Vector, double> transition_ball(const TransitionPosterior& posterior, double beta,
                                          const Vector& z);

/// Discretization sizes |S_l|, |A_l| of the Bayes-GP confidence sets
/// (capped at 2^62 when the power formulas overflow).
std::pair<std::int64_t, std::int64_t> bayes_grid_sizes(const ConfidenceConfig& cfg, int episode);

/// beta_{R,l} = sqrt(2 ln(|S_l| |A_l| pi^2 l^2 / delta)).
double bayes_beta_r(const ConfidenceConfig& cfg, int episode, double s_size, double a_size);

/// beta_{P,l} = sqrt(2 ln(|S_l| |A_l| m pi^2 l^2 / delta)).
double bayes_beta_p(const ConfidenceConfig& cfg, int episode, double s_size, double a_size);

/// Band slack terms added in bayes-gp mode: 1/l^2 for rewards, sqrt(m)/l^2
/// for transitions.
double bayes_reward_slack(int episode);
double bayes_transition_slack(const ConfidenceConfig& cfg, int episode);

} // namespace kmdp
