#include "lpvjump/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace lpvjump {

namespace {

std::uint64_t fmix64(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

}  // namespace

SplitMix64 SplitMix64::stream(std::uint64_t seed, std::uint64_t run_index) {
  return SplitMix64(fmix64(seed ^ fmix64(run_index + 0x9e3779b97f4a7c15ULL)));
}

std::uint64_t SplitMix64::next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform01() {
  return 1.0 - static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double SplitMix64::uniform(double lo, double hi) {
  return lo + static_cast<double>(next() >> 11) * 0x1.0p-53 * (hi - lo);
}

HistoryBuffer::HistoryBuffer(double span) : span_(span) {
  if (span < 0.0) throw std::invalid_argument("HistoryBuffer: negative span");
}

void HistoryBuffer::push(double t, const Eigen::VectorXd& x) {
  if (!samples_.empty() && t < samples_.back().first) {
    throw std::invalid_argument("HistoryBuffer: times must be nondecreasing");
  }
  samples_.emplace_back(t, x);
  // drop samples no longer reachable by a delayed read, keeping one spare
  while (samples_.size() > 2 && samples_[1].first <= t - span_ - 1e-12 &&
         samples_[0].first < samples_[1].first) {
    samples_.pop_front();
  }
}

double HistoryBuffer::oldest() const {
  if (samples_.empty()) throw std::runtime_error("HistoryBuffer: empty");
  return samples_.front().first;
}

double HistoryBuffer::newest() const {
  if (samples_.empty()) throw std::runtime_error("HistoryBuffer: empty");
  return samples_.back().first;
}

Eigen::VectorXd HistoryBuffer::at(double t) const {
  if (samples_.empty()) throw std::runtime_error("HistoryBuffer: empty");
  if (t <= samples_.front().first + 1e-15) {
    if (t < samples_.front().first - 1e-9) {
      throw std::runtime_error("HistoryBuffer: read before recorded history");
    }
    return samples_.front().second;
  }
  if (t >= samples_.back().first) {
    // overlap read (tau < step): extrapolate from the last two samples
    if (samples_.size() == 1 || t <= samples_.back().first + 1e-15) {
      return samples_.back().second;
    }
    const auto& a = samples_[samples_.size() - 2];
    const auto& b = samples_.back();
    double w = (t - a.first) / (b.first - a.first);
    return a.second + w * (b.second - a.second);
  }
  // binary search for the bracketing pair
  std::size_t lo = 0, hi = samples_.size() - 1;
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (samples_[mid].first <= t) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const auto& a = samples_[lo];
  const auto& b = samples_[hi];
  if (b.first <= a.first) return b.second;
  double w = (t - a.first) / (b.first - a.first);
  return a.second + w * (b.second - a.second);
}

double sample_jump_time(double rho, const JumpKernel& kernel, SplitMix64& rng) {
  const double rate = kernel.lambda_bar.eval(EvalPoint::at_rho(rho))(0, 0);
  if (rate < 0.0) {
    throw std::runtime_error("sample_jump_time: negative total intensity lambda_bar(rho)");
  }
  if (rate == 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(rng.uniform01()) / rate;
}

double sample_post_jump_param(double rho, const JumpKernel& kernel, const ParamBox& box,
                              SplitMix64& rng) {
  const double rate = kernel.lambda_bar.eval(EvalPoint::at_rho(rho))(0, 0);
  if (!(rate > 0.0)) {
    throw std::invalid_argument("sample_post_jump_param: lambda_bar(rho) must be positive");
  }
  const double envelope = kernel.lambda_max * 1.05;
  for (long attempt = 0; attempt < 1000000; ++attempt) {
    double theta = rng.uniform(box.lo, box.hi);
    double v = rng.uniform(0.0, envelope);
    if (v <= kernel.lambda.eval(EvalPoint::at(theta, rho))(0, 0)) return theta;
  }
  throw std::runtime_error("sample_post_jump_param: rejection sampler exceeded 1e6 attempts "
                           "(envelope misconfigured)");
}

namespace {

struct SegmentMats {
  Eigen::MatrixXd A, Ad, B, E, C, Cd, D, F, K, Kd;
  double tau{0.0};

  void refresh(const LpvDelaySystem& sys, const Controller* ctrl, const DelayLaw& delay,
               double rho) {
    EvalPoint p = EvalPoint::at_rho(rho);
    A = sys.A.eval(p);
    Ad = sys.Ad.eval(p);
    B = sys.B.eval(p);
    E = sys.E.eval(p);
    C = sys.C.eval(p);
    Cd = sys.Cd.eval(p);
    D = sys.D.eval(p);
    F = sys.F.eval(p);
    if (ctrl) {
      K = ctrl->K.eval(p);
      Kd = ctrl->Kd.eval(p);
    }
    tau = delay.eval(rho);
    if (tau < -1e-12 || tau > sys.h + 1e-12) {
      throw std::runtime_error("integrate: tau(rho) leaves [0, h] at rho = " +
                               std::to_string(rho));
    }
    tau = std::clamp(tau, 0.0, sys.h);
  }
};

}  // namespace

Trajectory integrate(const LpvDelaySystem& sys, const Controller* ctrl, const DelayLaw& delay,
                     const InitialHistory& history, const JumpKernel& kernel,
                     const SimConfig& cfg, int run_index) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (!(cfg.horizon > 0.0)) throw std::invalid_argument("integrate: horizon must be positive");
  if (sys.h > 0.0) {
    if (cfg.dt > sys.h / 10.0 + 1e-15) {
      throw std::invalid_argument("integrate: dt must be at most h/10");
    }
  } else if (cfg.dt > cfg.horizon / 1000.0 + 1e-15) {
    throw std::invalid_argument("integrate: dt must be at most horizon/1000 when h = 0");
  }
  if (ctrl && (ctrl->K.rows() != sys.nu || ctrl->K.cols() != sys.n)) {
    throw std::invalid_argument("integrate: controller does not match the plant");
  }
  if (!history.phi) throw std::invalid_argument("integrate: missing initial history");

  const int n = sys.n;
  SplitMix64 rng = SplitMix64::stream(cfg.seed, static_cast<std::uint64_t>(run_index));

  // uniform recording grid; every grid point is an integration node
  std::vector<double> times;
  for (std::size_t k = 0; static_cast<double>(k) * cfg.dt < cfg.horizon - 1e-9 * cfg.dt; ++k) {
    times.push_back(static_cast<double>(k) * cfg.dt);
  }
  times.push_back(cfg.horizon);
  const std::size_t N = times.size();

  Trajectory traj;
  traj.times = times;
  traj.states.resize(static_cast<Eigen::Index>(N), n);
  traj.params.resize(N);
  traj.delays.resize(N);
  traj.outputs.resize(static_cast<Eigen::Index>(N), sys.nz);
  traj.jump_counts.assign(N, 0);

  HistoryBuffer hist(sys.h);
  if (sys.h > 0.0) {
    const int m = std::max(1, static_cast<int>(std::ceil(sys.h / cfg.dt)));
    for (int j = 0; j <= m; ++j) {
      double t = -sys.h + sys.h * j / m;
      hist.push(t, history.phi(t));
    }
  } else {
    hist.push(0.0, history.phi(0.0));
  }

  Eigen::VectorXd x = history.phi(0.0);
  double rho = rng.uniform(sys.box.lo, sys.box.hi);  // initial parameter draw
  SegmentMats seg;
  seg.refresh(sys, ctrl, delay, rho);
  double next_jump = sample_jump_time(rho, kernel, rng);

  const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(sys.nu);
  auto wval = [&](double t) {
    if (cfg.w_signal.empty()) return 0.0;
    return cfg.w_signal.eval_t(t);
  };
  auto deriv = [&](double t, const Eigen::VectorXd& xs) {
    Eigen::VectorXd xd = hist.at(t - seg.tau);
    Eigen::VectorXd dx = seg.A * xs + seg.Ad * xd;
    if (ctrl && sys.nu > 0) dx += seg.B * (seg.K * xs + seg.Kd * xd);
    if (sys.nw > 0) dx += seg.E * Eigen::VectorXd::Constant(sys.nw, wval(t));
    return dx;
  };
  auto output = [&](double t, const Eigen::VectorXd& xs) {
    Eigen::VectorXd xd = hist.at(t - seg.tau);
    Eigen::VectorXd z = seg.C * xs + seg.Cd * xd;
    if (ctrl && sys.nu > 0) z += seg.D * (seg.K * xs + seg.Kd * xd);
    if (sys.nw > 0) z += seg.F * Eigen::VectorXd::Constant(sys.nw, wval(t));
    return z;
  };

  double t = 0.0;
  int jumps_in_row = 0;
  std::size_t row = 0;

  // record a grid row from the current state
  auto record = [&](std::size_t k) {
    traj.states.row(static_cast<Eigen::Index>(k)) = x.transpose();
    traj.params[k] = rho;
    traj.delays[k] = seg.tau;
    traj.outputs.row(static_cast<Eigen::Index>(k)) = output(times[k], x).transpose();
    traj.jump_counts[k] = jumps_in_row;
    jumps_in_row = 0;
  };

  record(row++);
  while (row < N) {
    const double target = times[row];
    while (t < target - 1e-12) {
      double t_next = std::min(target, next_jump);
      double step = t_next - t;
      if (step > 1e-14) {
        Eigen::VectorXd k1 = deriv(t, x);
        Eigen::VectorXd k2 = deriv(t + 0.5 * step, x + 0.5 * step * k1);
        Eigen::VectorXd k3 = deriv(t + 0.5 * step, x + 0.5 * step * k2);
        Eigen::VectorXd k4 = deriv(t + step, x + step * k3);
        x += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = t_next;
        hist.push(t, x);
      } else {
        t = t_next;
      }
      if (x.norm() > cfg.divergence_cutoff || !x.allFinite()) {
        traj.diverged = true;
        traj.divergence_time = t;
        break;
      }
      if (next_jump <= target + 1e-15 && t >= next_jump - 1e-15) {
        rho = sample_post_jump_param(rho, kernel, sys.box, rng);
        seg.refresh(sys, ctrl, delay, rho);
        traj.jump_times.push_back(t);
        ++jumps_in_row;
        next_jump = t + sample_jump_time(rho, kernel, rng);
      }
    }
    if (traj.diverged) break;
    record(row++);
  }
  // divergence freezes the remaining rows at the truncation state
  while (row < N) record(row++);
  return traj;
}

MeanSquareSeries mc_mean_square(const LpvDelaySystem& sys, const Controller* ctrl,
                                const DelayLaw& delay, const InitialHistory& history,
                                const JumpKernel& kernel, const SimConfig& cfg) {
  if (cfg.runs < 1) throw std::invalid_argument("mc_mean_square: runs must be at least 1");

  std::vector<std::vector<double>> series(static_cast<std::size_t>(cfg.runs));
  std::vector<char> diverged(static_cast<std::size_t>(cfg.runs), 0);
  std::vector<double> times;

  const unsigned workers =
      std::max(1u, std::min(std::thread::hardware_concurrency(),
                            static_cast<unsigned>(cfg.runs)));
  std::vector<std::thread> pool;
  std::atomic<int> next_run{0};
  std::mutex times_mu;
  std::exception_ptr first_error;
  std::mutex err_mu;

  auto worker = [&]() {
    for (;;) {
      int run = next_run.fetch_add(1);
      if (run >= cfg.runs) return;
      try {
        Trajectory tr = integrate(sys, ctrl, delay, history, kernel, cfg, run);
        std::vector<double> sq(tr.times.size());
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
          sq[k] = tr.states.row(static_cast<Eigen::Index>(k)).squaredNorm();
        }
        series[static_cast<std::size_t>(run)] = std::move(sq);
        diverged[static_cast<std::size_t>(run)] = tr.diverged ? 1 : 0;
        if (run == 0) {
          std::lock_guard<std::mutex> lk(times_mu);
          times = tr.times;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  MeanSquareSeries out;
  out.runs = cfg.runs;
  out.statistical = cfg.runs >= 30;
  out.times = std::move(times);
  out.msq.assign(out.times.size(), 0.0);
  for (int run = 0; run < cfg.runs; ++run) {
    const auto& sq = series[static_cast<std::size_t>(run)];
    for (std::size_t k = 0; k < out.msq.size(); ++k) out.msq[k] += sq[k];
    out.divergent_runs += diverged[static_cast<std::size_t>(run)];
  }
  for (double& v : out.msq) v /= cfg.runs;
  out.decay_flag = !out.msq.empty() && out.msq.back() < 1e-4 * out.msq.front();
  return out;
}

GainEstimate empirical_l2_gain(const LpvDelaySystem& sys, const Controller* ctrl,
                               const DelayLaw& delay, const JumpKernel& kernel,
                               const SimConfig& cfg) {
  if (cfg.w_signal.empty()) {
    throw std::invalid_argument("empirical_l2_gain: a disturbance signal is required");
  }
  InitialHistory zero = InitialHistory::constant(Eigen::VectorXd::Zero(sys.n));

  GainEstimate est;
  for (int run = 0; run < cfg.runs; ++run) {
    Trajectory tr = integrate(sys, ctrl, delay, zero, kernel, cfg, run);
    est.divergent_runs += tr.diverged ? 1 : 0;
    for (std::size_t k = 0; k + 1 < tr.times.size(); ++k) {
      double dt = tr.times[k + 1] - tr.times[k];
      double z0 = tr.outputs.row(static_cast<Eigen::Index>(k)).squaredNorm();
      double z1 = tr.outputs.row(static_cast<Eigen::Index>(k + 1)).squaredNorm();
      est.z_energy += 0.5 * dt * (z0 + z1);
      double w0 = cfg.w_signal.eval_t(tr.times[k]);
      double w1 = cfg.w_signal.eval_t(tr.times[k + 1]);
      est.w_energy += 0.5 * dt * (w0 * w0 + w1 * w1) * sys.nw;
    }
  }
  if (est.w_energy <= 0.0) {
    throw std::invalid_argument("empirical_l2_gain: the disturbance has zero energy");
  }
  est.ratio = std::sqrt(est.z_energy / est.w_energy);
  return est;
}

namespace {
void write_csv_row(std::FILE* f, const std::vector<double>& vals) {
  for (std::size_t i = 0; i < vals.size(); ++i) {
    std::fprintf(f, i ? ",%.9g" : "%.9g", vals[i]);
  }
  std::fputc('\n', f);
}
}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
  std::fprintf(f, "t");
  for (Eigen::Index i = 0; i < traj.states.cols(); ++i) std::fprintf(f, ",x%ld", i + 1);
  std::fprintf(f, ",rho,tau");
  for (Eigen::Index i = 0; i < traj.outputs.cols(); ++i) std::fprintf(f, ",z%ld", i + 1);
  std::fprintf(f, ",jump_flag\n");
  std::vector<double> row;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    row.clear();
    row.push_back(traj.times[k]);
    for (Eigen::Index i = 0; i < traj.states.cols(); ++i) {
      row.push_back(traj.states(static_cast<Eigen::Index>(k), i));
    }
    row.push_back(traj.params[k]);
    row.push_back(traj.delays[k]);
    for (Eigen::Index i = 0; i < traj.outputs.cols(); ++i) {
      row.push_back(traj.outputs(static_cast<Eigen::Index>(k), i));
    }
    row.push_back(static_cast<double>(traj.jump_counts[k]));
    write_csv_row(f, row);
  }
  std::fclose(f);
}

void write_mean_square_csv(const MeanSquareSeries& series, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_mean_square_csv: cannot open " + path);
  std::fprintf(f, "t,mean_sq_norm\n");
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    std::fprintf(f, "%.9g,%.9g\n", series.times[k], series.msq[k]);
  }
  std::fclose(f);
}

}  // namespace lpvjump
