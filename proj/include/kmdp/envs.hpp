#pragma once

#include "kmdp/common.hpp"
#include "kmdp/kernels.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace kmdp {

// ---------------------------------------------------------------------------
// EpisodicEnv
//
// Environment contract: stochastic step dynamics plus oracle access to the
// true mean reward and mean transition functions. Points z are [s; a].
// Realized next states are clipped to the state box; oracle means are
// returned raw.
// ---------------------------------------------------------------------------

class EpisodicEnv {
public:
    virtual ~EpisodicEnv() = default;

    virtual int state_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual int horizon() const = 0;
    virtual const Box& state_box() const = 0;
    virtual const Box& action_box() const = 0;
    virtual Vector initial_state() const = 0;
    virtual double sigma_r() const = 0;
    virtual double sigma_p() const = 0;

    virtual double oracle_mean_reward(const Vector& z) const = 0;
    virtual Vector oracle_mean_transition(const Vector& z) const = 0;

    /// (reward, next state). Throws InputError on out-of-box s or a.
    virtual std::pair<double, Vector> step(const Vector& s, const Vector& a, Rng& rng) const;

    Vector make_z(const Vector& s, const Vector& a) const;

protected:
    void check_inputs(const Vector& s, const Vector& a) const;
};

// ---------------------------------------------------------------------------
// Bounded LQR: s' = A s + B a + noise (clipped), r = +-(s^T P s + a^T Q a) + noise.
// The reward is negated by default so that regulation to the origin is the
// rewarding behaviour; `paper_literal_sign` restores the positive quadratic.
// ---------------------------------------------------------------------------

class LqrEnv : public EpisodicEnv {
public:
    LqrEnv(Matrix a, Matrix b, Matrix p, Matrix q, Box state_box, Box action_box, int horizon,
           double sigma_r, double sigma_p, bool paper_literal_sign = false);

    int state_dim() const override { return static_cast<int>(a_.rows()); }
    int action_dim() const override { return static_cast<int>(b_.cols()); }
    int horizon() const override { return horizon_; }
    const Box& state_box() const override { return state_box_; }
    const Box& action_box() const override { return action_box_; }
    Vector initial_state() const override { return initial_state_; }
    double sigma_r() const override { return sigma_r_; }
    double sigma_p() const override { return sigma_p_; }

    double oracle_mean_reward(const Vector& z) const override;
    Vector oracle_mean_transition(const Vector& z) const override;

    void set_initial_state(Vector s0);

    const Matrix& a() const { return a_; }
    const Matrix& b() const { return b_; }
    const Matrix& p() const { return p_; }
    const Matrix& q() const { return q_; }
    bool paper_literal_sign() const { return paper_literal_sign_; }

private:
    Matrix a_, b_, p_, q_;
    Box state_box_, action_box_;
    int horizon_;
    double sigma_r_, sigma_p_;
    bool paper_literal_sign_;
    Vector initial_state_;
};

/// Fixed-point solution G of the discrete algebraic Riccati equation
///   G = P + A^T G A - A^T G B (Q + B^T G B)^{-1} B^T G A
/// iterated from G = P to tolerance 1e-10 (at most 10000 sweeps).
Matrix riccati_solve(const Matrix& a, const Matrix& b, const Matrix& p, const Matrix& q);

/// One application of the Riccati map (for residual checks).
Matrix riccati_map(const Matrix& g, const Matrix& a, const Matrix& b, const Matrix& p,
                   const Matrix& q);

/// L = D * lambda_1 with D the state-box diameter and lambda_1 the largest
/// eigenvalue of the Riccati solution.
double lqr_lipschitz_bound(const LqrEnv& env);

struct LqrKernelSetup {
    Kernel reward_kernel;      // (quadratic(m) (+) quadratic(n)) / cap
    Kernel transition_kernel;  // ((linear(m) (+) linear(n)) x index_delta(m)) / cap
    double b_r = 0.0;          // RKHS norm bound of the true mean reward under reward_kernel
    double b_p = 0.0;          // RKHS norm bound of the true mean transition under transition_kernel
};

/// Composite kernels for an LQR instance, normalized so k(z,z) <= 1 over the
/// boxes; the RKHS norm bounds are rescaled to match the normalized kernels.
LqrKernelSetup lqr_kernel_setup(const LqrEnv& env);

// ---------------------------------------------------------------------------
// Tabular MDP over index-embedded states/actions: a state is the 1-vector
// (i), an action the 1-vector (j), z = (i, j).
// ---------------------------------------------------------------------------

class TabularEnv : public EpisodicEnv {
public:
    /// reward: |S| x |A|; transition: per (s, a) a row-stochastic
    /// distribution over next states, layout transition[s][a][s'].
    TabularEnv(Matrix reward, std::vector<std::vector<std::vector<double>>> transition,
               int horizon, double sigma_r, int initial_state = 0);

    static TabularEnv from_csv(const std::string& path, int horizon, double sigma_r,
                               int initial_state = 0);

    int n_states() const { return static_cast<int>(reward_.rows()); }
    int n_actions() const { return static_cast<int>(reward_.cols()); }

    int state_dim() const override { return 1; }
    int action_dim() const override { return 1; }
    int horizon() const override { return horizon_; }
    const Box& state_box() const override { return state_box_; }
    const Box& action_box() const override { return action_box_; }
    Vector initial_state() const override;
    double sigma_r() const override { return sigma_r_; }
    double sigma_p() const override { return 0.0; }

    double oracle_mean_reward(const Vector& z) const override;
    Vector oracle_mean_transition(const Vector& z) const override;

    std::pair<double, Vector> step(const Vector& s, const Vector& a, Rng& rng) const override;

    double transition_prob(int s, int a, int s_next) const;

private:
    Matrix reward_;
    std::vector<std::vector<std::vector<double>>> transition_;
    int horizon_;
    double sigma_r_;
    int initial_state_;
    Box state_box_, action_box_;

    std::pair<int, int> decode(const Vector& z) const;
};

/// Indicator product kernels for a tabular instance: the reward kernel over
/// (i, j) and the transition kernel over ((i, j), out-index) with m = 1.
std::pair<Kernel, Kernel> tabular_as_kernel(const TabularEnv& env);

// ---------------------------------------------------------------------------
// Synthetic RKHS MDP: ground-truth mean reward and mean transition are RKHS
// functions with declared norms.
// ---------------------------------------------------------------------------

class RkhsEnv : public EpisodicEnv {
public:
    RkhsEnv(RkhsFunction reward, RkhsFunction transition_indexed, Box state_box, Box action_box,
            int horizon, double sigma_r, double sigma_p);

    int state_dim() const override { return static_cast<int>(state_box_.dim()); }
    int action_dim() const override { return static_cast<int>(action_box_.dim()); }
    int horizon() const override { return horizon_; }
    const Box& state_box() const override { return state_box_; }
    const Box& action_box() const override { return action_box_; }
    Vector initial_state() const override { return state_box_.center(); }
    double sigma_r() const override { return sigma_r_; }
    double sigma_p() const override { return sigma_p_; }

    double oracle_mean_reward(const Vector& z) const override;
    Vector oracle_mean_transition(const Vector& z) const override;

    const RkhsFunction& reward_function() const { return reward_; }
    const RkhsFunction& transition_function() const { return transition_; }

private:
    RkhsFunction reward_;      // over Z
    RkhsFunction transition_;  // over Z x {0..m-1}
    Box state_box_, action_box_;
    int horizon_;
    double sigma_r_, sigma_p_;
};

} // namespace kmdp
