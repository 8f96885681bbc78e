#pragma once

#include "lpvjump/model.hpp"
#include "lpvjump/synthesis.hpp"

#include <cstdint>
#include <deque>
#include <vector>

namespace lpvjump {

/// SplitMix64 counter-based generator. Run streams are derived from
/// (seed, run_index) so Monte-Carlo runs are reproducible and independent of
/// scheduling.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  static SplitMix64 stream(std::uint64_t seed, std::uint64_t run_index);

  std::uint64_t next();
  /// uniform on (0, 1]
  double uniform01();
  /// uniform on [lo, hi)
  double uniform(double lo, double hi);

 private:
  std::uint64_t state_;
};

/// Ring of (time, state) samples spanning at least [t - span, t]; reads use
/// linear interpolation, and reads past the newest sample extrapolate
/// linearly (the sub-step overlap case when tau < dt).
class HistoryBuffer {
 public:
  explicit HistoryBuffer(double span);

  void push(double t, const Eigen::VectorXd& x);
  Eigen::VectorXd at(double t) const;
  double oldest() const;
  double newest() const;
  std::size_t size() const { return samples_.size(); }

 private:
  double span_;
  std::deque<std::pair<double, Eigen::VectorXd>> samples_;
};

struct SimConfig {
  double dt{1e-3};
  double horizon{10.0};
  std::uint64_t seed{0};
  int runs{1};
  Expr w_signal;  // scalar in t, applied to every disturbance channel; empty = 0

  double divergence_cutoff{1e12};
};

struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd states;       // times x n
  std::vector<double> params;   // rho(t), right-continuous
  std::vector<double> delays;   // tau(rho(t))
  Eigen::MatrixXd outputs;      // times x nz
  std::vector<int> jump_counts; // jumps since the previous grid row
  std::vector<double> jump_times;
  bool diverged{false};
  double divergence_time{0.0};
};

/// Inter-jump waiting time, exponential with rate lambda_bar(rho); +inf when
/// the rate is zero.
double sample_jump_time(double rho, const JumpKernel& kernel, SplitMix64& rng);

/// Post-jump parameter with density lambda(theta, rho) / lambda_bar(rho),
/// via rejection sampling under the lambda_max envelope.
double sample_post_jump_param(double rho, const JumpKernel& kernel, const ParamBox& box,
                              SplitMix64& rng);

/// Integrates one sample path: RK4 flow between jumps with the delayed state
/// read from the history buffer, exact event stepping at jump instants, and
/// the initial parameter drawn uniformly from the box.
Trajectory integrate(const LpvDelaySystem& sys, const Controller* ctrl, const DelayLaw& delay,
                     const InitialHistory& history, const JumpKernel& kernel,
                     const SimConfig& cfg, int run_index = 0);

struct MeanSquareSeries {
  std::vector<double> times;
  std::vector<double> msq;  // estimate of E ||x(t)||^2
  int divergent_runs{0};
  int runs{0};
  bool decay_flag{false};  // msq(end) < 1e-4 * msq(0)
  bool statistical{true};  // runs >= 30
};

MeanSquareSeries mc_mean_square(const LpvDelaySystem& sys, const Controller* ctrl,
                                const DelayLaw& delay, const InitialHistory& history,
                                const JumpKernel& kernel, const SimConfig& cfg);

struct GainEstimate {
  double ratio{0.0};
  double z_energy{0.0};
  double w_energy{0.0};
  int divergent_runs{0};
};

/// Empirical L2 ratio sqrt(sum ||z||^2 dt / sum ||w||^2 dt) over runs, with
/// zero initial history.
GainEstimate empirical_l2_gain(const LpvDelaySystem& sys, const Controller* ctrl,
                               const DelayLaw& delay, const JumpKernel& kernel,
                               const SimConfig& cfg);

void write_trajectory_csv(const Trajectory& traj, const std::string& path);
void write_mean_square_csv(const MeanSquareSeries& series, const std::string& path);

}  // namespace lpvjump
