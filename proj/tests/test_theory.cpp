#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gradmm/theory.hpp"

using namespace gradmm;

namespace {

TheoryInstance identity_instance() {
  TheoryInstance inst;
  inst.a_hess = Eigen::MatrixXd::Identity(2, 2);
  inst.b_hess = Eigen::MatrixXd::Identity(2, 2);
  inst.a_min = Eigen::VectorXd::Zero(2);
  inst.b_min = Eigen::VectorXd::Zero(2);
  inst.theta0 = Eigen::VectorXd::Ones(2);
  inst.eta = 0.1;
  inst.t_max = 5;
  return inst;
}

}  // namespace

TEST_CASE("identity instance has unit constants and contracting trajectory") {
  TheoryInstance inst = identity_instance();
  CHECK(inst.beta() == Catch::Approx(1.0));
  CHECK(inst.mu() == Catch::Approx(1.0));
  auto traj = inst.trajectory();
  REQUIRE(traj.size() == 6);
  // GD on 1/2||t||^2 with eta 0.1 contracts by 0.9 each step.
  for (std::size_t t = 1; t < traj.size(); ++t)
    CHECK(traj[t].norm() == Catch::Approx(std::pow(0.9, t) * std::sqrt(2.0)));
}

TEST_CASE("lemma 1 holds with zero slack when the losses coincide") {
  TheoryInstance inst = identity_instance();
  CheckReport rep = check_lemma1(inst);
  CHECK_FALSE(rep.violated);
  // lhs = 0 and eps = 0, so the slack equals 2 beta delta_t, minimized at t=0.
  CHECK(rep.worst_step == 0);
  CHECK(rep.worst_slack == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("lemma 1 with a constant gradient gap is tight at t=0") {
  TheoryInstance inst = identity_instance();
  inst.b_min = Eigen::VectorXd::Zero(2);
  inst.b_min(0) = 0.01;  // grad gap is the constant b_min - a_min
  CheckReport rep = check_lemma1(inst);
  CHECK_FALSE(rep.violated);
  CHECK(rep.worst_step == 0);
  CHECK(rep.worst_slack == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("theorem 1 holds on the identity instance over a short horizon") {
  TheoryInstance inst = identity_instance();
  // By step 4 the drift term 2 beta ||theta_t - theta_0|| overtakes the
  // shrinking gradient and the precondition fails; two steps stay conclusive.
  inst.t_max = 2;
  CheckReport rep = check_theorem1(inst);
  CHECK_FALSE(rep.violated);
  CHECK_FALSE(rep.inconclusive);
  CHECK(rep.worst_slack >= 0.0);
}

TEST_CASE("theorem 1 rejects step sizes above 1/beta as inconclusive") {
  TheoryInstance inst = identity_instance();
  inst.eta = 1.5;  // beta = 1
  CheckReport rep = check_theorem1(inst);
  CHECK(rep.inconclusive);
  CHECK_FALSE(rep.violated);
}

TEST_CASE("theorem 1 is inconclusive when the gap dwarfs the real gradient") {
  TheoryInstance inst = identity_instance();
  inst.b_min = 10.0 * Eigen::VectorXd::Ones(2);  // eps = 10 sqrt(2) >> ||g_t||
  CheckReport rep = check_theorem1(inst);
  CHECK(rep.inconclusive);
}

TEST_CASE("corollary 1 holds on identical minimizers") {
  TheoryInstance inst = identity_instance();
  CheckReport rep = check_corollary1(inst);
  CHECK_FALSE(rep.violated);
  CHECK(rep.worst_slack >= 0.0);
}

TEST_CASE("beta agrees with power iteration to 1e-6") {
  Rng rng(271828);
  for (int trial = 0; trial < 10; ++trial) {
    TheoryInstance inst = random_instance(rng);
    const int d = inst.dim();
    Eigen::VectorXd v = Eigen::VectorXd::Ones(d);
    // power iteration on the larger of the two Hessians
    double lam_a = 0.0, lam_b = 0.0;
    Eigen::VectorXd va = Eigen::VectorXd::Ones(d), vb = Eigen::VectorXd::Ones(d);
    for (int it = 0; it < 3000; ++it) {
      va = inst.a_hess * va;
      lam_a = va.norm();
      va /= lam_a;
      vb = inst.b_hess * vb;
      lam_b = vb.norm();
      vb /= lam_b;
    }
    CHECK(inst.beta() == Catch::Approx(std::max(lam_a, lam_b)).margin(1e-6));
  }
}

TEST_CASE("random instances are well posed") {
  Rng rng(31337);
  for (int i = 0; i < 50; ++i) {
    TheoryInstance inst = random_instance(rng);
    CHECK(inst.mu() > 0.0);
    CHECK(inst.beta() >= inst.mu());
    CHECK(inst.eta > 0.0);
    CHECK(inst.eta <= 1.0 / inst.beta());
    CHECK(inst.t_max >= 3);
    CHECK(inst.t_max <= 10);
    double dist = (inst.theta0 - inst.a_min).norm();
    CHECK(dist >= 0.5);
    CHECK(dist <= 1.0 + 1e-12);
    // symmetric Hessians
    CHECK((inst.a_hess - inst.a_hess.transpose()).norm() < 1e-12);
    CHECK((inst.b_hess - inst.b_hess.transpose()).norm() < 1e-12);
  }
}

TEST_CASE("lemma 1 suite: 1000 instances, zero violations") {
  SuiteReport rep = run_suite(1000, Rng(1), "lemma1", check_lemma1);
  CHECK(rep.instances == 1000);
  CHECK(rep.violations == 0);
  CHECK(rep.inconclusive == 0);
  CHECK(rep.worst_slack >= -kTheorySlack);
}

TEST_CASE("theorem 1 suite: 1000 instances, zero violations, <20% inconclusive") {
  SuiteReport rep = run_suite(1000, Rng(2), "theorem1", check_theorem1);
  CHECK(rep.instances == 1000);
  CHECK(rep.violations == 0);
  CHECK(rep.inconclusive < 200);
}

TEST_CASE("corollary 1 suite: 1000 instances, zero violations") {
  SuiteReport rep = run_suite(1000, Rng(3), "corollary1", check_corollary1);
  CHECK(rep.instances == 1000);
  CHECK(rep.violations == 0);
}

TEST_CASE("suites are deterministic per stream") {
  SuiteReport a = run_suite(50, Rng(9), "s", check_theorem1);
  SuiteReport b = run_suite(50, Rng(9), "s", check_theorem1);
  CHECK(a.inconclusive == b.inconclusive);
  CHECK(a.worst_slack == b.worst_slack);
}

TEST_CASE("suite report file round trip") {
  SuiteReport rep;
  rep.instances = 10;
  rep.violations = 0;
  rep.inconclusive = 1;
  rep.worst_slack = 0.25;
  std::string path = "/tmp/gradmm_test_suite.json";
  save_suite_report(path, {{"lemma1", rep}});
  std::ifstream f(path);
  nlohmann::json j;
  f >> j;
  CHECK(j["lemma1"]["instances"] == 10);
  CHECK(j["lemma1"]["violations"] == 0);
  CHECK(j["lemma1"]["inconclusive"] == 1);
  CHECK(j["lemma1"]["worst_slack"] == Catch::Approx(0.25));
  std::remove(path.c_str());
}
