#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradmm/rng.hpp"

namespace gradmm {

// A pair of quadratic losses with exactly known smoothness/PL constants:
//   L(t)  = 1/2 (t-a)' A (t-a),   Ls(t) = 1/2 (t-b)' B (t-b)
// Gradient descent runs on Ls; every bound is evaluated along that trajectory.
struct TheoryInstance {
  Eigen::MatrixXd a_hess, b_hess;  // symmetric PD
  Eigen::VectorXd a_min, b_min;    // minimizers
  Eigen::VectorXd theta0;
  double eta = 0.0;
  int t_max = 0;

  int dim() const { return static_cast<int>(a_hess.rows()); }
  double beta() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sa(a_hess), sb(b_hess);
    return std::max(sa.eigenvalues().maxCoeff(), sb.eigenvalues().maxCoeff());
  }
  double mu() const {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a_hess).eigenvalues().minCoeff();
  }
  double alpha() const { return mu(); }

  double real_loss(const Eigen::VectorXd& t) const {
    return 0.5 * (t - a_min).dot(a_hess * (t - a_min));
  }
  Eigen::VectorXd real_grad(const Eigen::VectorXd& t) const { return a_hess * (t - a_min); }
  Eigen::VectorXd syn_grad(const Eigen::VectorXd& t) const { return b_hess * (t - b_min); }

  // theta_0 .. theta_{t_max} under GD on the synthetic loss.
  std::vector<Eigen::VectorXd> trajectory() const {
    std::vector<Eigen::VectorXd> traj{theta0};
    Eigen::VectorXd t = theta0;
    for (int s = 0; s < t_max; ++s) {
      t -= eta * syn_grad(t);
      traj.push_back(t);
    }
    return traj;
  }
};

struct CheckReport {
  bool violated = false;
  bool inconclusive = false;  // theorem precondition failed at some step
  int worst_step = -1;
  double worst_slack = std::numeric_limits<double>::infinity();  // min(bound - lhs)
};

inline constexpr double kTheorySlack = 1e-9;

// ||grad L - grad Ls|| <= eps + 2 beta ||theta_t - theta_0|| at every step.
inline CheckReport check_lemma1(const TheoryInstance& inst) {
  CheckReport rep;
  const double beta = inst.beta();
  const double eps = (inst.real_grad(inst.theta0) - inst.syn_grad(inst.theta0)).norm();
  auto traj = inst.trajectory();
  for (std::size_t t = 0; t < traj.size(); ++t) {
    double lhs = (inst.real_grad(traj[t]) - inst.syn_grad(traj[t])).norm();
    double bound = eps + 2.0 * beta * (traj[t] - inst.theta0).norm();
    double slack = bound - lhs;
    if (slack < rep.worst_slack) {
      rep.worst_slack = slack;
      rep.worst_step = static_cast<int>(t);
    }
    if (lhs > bound + kTheorySlack) rep.violated = true;
  }
  return rep;
}

struct TrajectoryStats {
  double eps = 0.0;       // gradient gap at theta0
  double xi = 0.0;        // max_t (eps + 2 beta delta_t)
  double grad_bound = 0.0;  // max_t ||grad L(theta_t)||
  bool precondition_ok = true;  // xi_t <= ||g_t|| at every step
};

inline TrajectoryStats trajectory_stats(const TheoryInstance& inst,
                                        const std::vector<Eigen::VectorXd>& traj) {
  TrajectoryStats s;
  const double beta = inst.beta();
  s.eps = (inst.real_grad(inst.theta0) - inst.syn_grad(inst.theta0)).norm();
  for (const Eigen::VectorXd& t : traj) {
    double xi_t = s.eps + 2.0 * beta * (t - inst.theta0).norm();
    double gnorm = inst.real_grad(t).norm();
    s.xi = std::max(s.xi, xi_t);
    s.grad_bound = std::max(s.grad_bound, gnorm);
    if (xi_t > gnorm) s.precondition_ok = false;
  }
  return s;
}

// L(theta_{t+1}) <= (1 - eta mu)^{t+1} L(theta_0) + (2 xi grad_bound - xi^2)/(2 mu),
// with xi <= ||g_t|| required at every step (else: inconclusive, not run).
inline CheckReport check_theorem1(const TheoryInstance& inst) {
  CheckReport rep;
  const double beta = inst.beta();
  if (inst.eta > 1.0 / beta + kTheorySlack) {
    rep.inconclusive = true;  // step-size guard: rejected, not run
    return rep;
  }
  auto traj = inst.trajectory();
  TrajectoryStats st = trajectory_stats(inst, traj);
  if (!st.precondition_ok) {
    rep.inconclusive = true;
    return rep;
  }
  const double mu = inst.mu();
  const double l0 = inst.real_loss(inst.theta0);
  const double extra = (2.0 * st.xi * st.grad_bound - st.xi * st.xi) / (2.0 * mu);
  double decay = 1.0;
  for (std::size_t t = 1; t < traj.size(); ++t) {
    decay *= 1.0 - inst.eta * mu;
    double lhs = inst.real_loss(traj[t]);
    double bound = decay * l0 + extra;
    double slack = bound - lhs;
    if (slack < rep.worst_slack) {
      rep.worst_slack = slack;
      rep.worst_step = static_cast<int>(t);
    }
    if (lhs > bound + kTheorySlack) rep.violated = true;
  }
  return rep;
}

// ||a - b|| <= sqrt(max(0, xi (2 grad_bound - xi)) / (alpha mu)), with xi and
// grad_bound measured on the realized GD trajectory.
inline CheckReport check_corollary1(const TheoryInstance& inst) {
  CheckReport rep;
  auto traj = inst.trajectory();
  TrajectoryStats st = trajectory_stats(inst, traj);
  const double alpha = inst.alpha();
  const double mu = inst.mu();
  double lhs = (inst.a_min - inst.b_min).norm();
  double bound =
      std::sqrt(std::max(0.0, st.xi * (2.0 * st.grad_bound - st.xi)) / (alpha * mu));
  rep.worst_slack = bound - lhs;
  rep.worst_step = 0;
  if (lhs > bound + kTheorySlack) rep.violated = true;
  return rep;
}

// Random instance family. The synthetic loss is a small perturbation of the
// real one, which keeps the theorem's xi <= ||g_t|| precondition satisfiable
// on short horizons.
inline TheoryInstance random_instance(Rng& rng, int max_dim = 6) {
  const int d = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_dim - 1)));
  auto rand_vec = [&](double scale) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = scale * rng.gaussian();
    return v;
  };
  // Symmetric PD with eigenvalues in [0.8, 1.5] via Q diag Q'.
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd eig(d);
  for (int i = 0; i < d; ++i) eig(i) = 0.8 + 0.7 * rng.uniform();
  TheoryInstance inst;
  inst.a_hess = q * eig.asDiagonal() * q.transpose();
  inst.a_hess = 0.5 * (inst.a_hess + inst.a_hess.transpose().eval());
  Eigen::MatrixXd pert(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) pert(i, j) = 0.01 * rng.gaussian();
  inst.b_hess = inst.a_hess + 0.5 * (pert + pert.transpose().eval());
  inst.a_min = rand_vec(0.3);
  inst.b_min = inst.a_min + rand_vec(0.003);
  Eigen::VectorXd dir = rand_vec(1.0);
  dir *= (0.5 + 0.5 * rng.uniform()) / std::max(dir.norm(), 1e-12);
  inst.theta0 = inst.a_min + dir;
  inst.t_max = 3 + static_cast<int>(rng.uniform_int(8));
  inst.eta = (0.05 + 0.15 * rng.uniform()) / (inst.beta() * inst.t_max);
  return inst;
}

struct SuiteReport {
  int instances = 0;
  int violations = 0;
  int inconclusive = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
};

template <typename CheckFn>
inline SuiteReport run_suite(int n, const Rng& root, std::string_view stream, CheckFn check) {
  SuiteReport rep;
  Rng rng = root.split(stream);
  for (int i = 0; i < n; ++i) {
    TheoryInstance inst = random_instance(rng);
    CheckReport r = check(inst);
    ++rep.instances;
    if (r.inconclusive) {
      ++rep.inconclusive;
      continue;
    }
    if (r.violated) ++rep.violations;
    rep.worst_slack = std::min(rep.worst_slack, r.worst_slack);
  }
  return rep;
}

inline void save_suite_report(const std::string& path,
                              const std::vector<std::pair<std::string, SuiteReport>>& suites) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, rep] : suites)
    j[name] = {{"instances", rep.instances},
               {"violations", rep.violations},
               {"inconclusive", rep.inconclusive},
               {"worst_slack", rep.worst_slack}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write suite report " + path);
  f << j.dump(2) << "\n";
}

}  // namespace gradmm
