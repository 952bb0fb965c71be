#include "doctest.h"

#include "fibril/mechanics.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

using namespace fibril;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

FibrilArray pair_array(double distance) {
  FibrilArray a;
  a.fibrils = {{0, 0, 1, 5, 0.75}, {distance, 0, 1, 5, 0.75}};
  return a;
}

FibrilArray single_array() {
  FibrilArray a;
  a.fibrils = {{0, 0, 1, 5, 0.75}};
  return a;
}

}  // namespace

TEST_CASE("assemble: pair and single fibril") {
  const double self = 16.0 / (3.0 * std::numbers::pi);
  const auto sys = assemble(pair_array(3.0), VectorXd::Constant(2, 20.0 / 3.0));
  CHECK(sys.C(0, 0) == doctest::Approx(self + 20.0 / 3.0).epsilon(1e-14));
  CHECK(sys.C(0, 0) == doctest::Approx(8.3644).epsilon(1e-4));
  CHECK(sys.C(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(sys.C(1, 0) == sys.C(0, 1));

  const auto one = assemble(single_array(), VectorXd::Constant(1, 5.0));
  CHECK(one.C(0, 0) == doctest::Approx(6.6977).epsilon(1e-4));
  CHECK(one.K(0, 0) * one.C(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("assemble: K is the inverse and the diagonal dominates") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = testing::random_array(rng, 30);
    const auto sys = assemble(a, testing::random_design(rng, a.size()));
    CHECK((sys.K * sys.C - MatrixXd::Identity(a.size(), a.size())).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((sys.C - sys.C.transpose()).norm() == 0.0);
    for (Index i = 0; i < a.size(); ++i)
      for (Index j = 0; j < a.size(); ++j)
        if (i != j) {
          CHECK(sys.C(i, j) > 0.0);
          CHECK(sys.C(i, j) < 1.0);
          CHECK(sys.C(i, i) > sys.C(i, j));
        }
  }
}

TEST_CASE("assemble: bad designs") {
  CHECK_THROWS_AS(assemble(pair_array(3.0), VectorXd::Constant(3, 1.0)), DomainError);
  VectorXd c(2);
  c << 1.0, -1.0;
  CHECK_THROWS_AS(assemble(pair_array(3.0), c), DomainError);
}

TEST_CASE("fibril loads and total force") {
  const auto one = assemble(single_array(), VectorXd::Constant(1, 5.0));
  CHECK(fibril_loads(one, single_array(), {one.C(0, 0), 0, 0})[0] == doctest::Approx(1.0).epsilon(1e-14));

  const auto arr = pair_array(3.0);
  const auto sys = assemble(arr, VectorXd::Constant(2, 20.0 / 3.0));
  const double D = sys.C(0, 0) + sys.C(0, 1);
  CHECK(D == doctest::Approx(8.6977).epsilon(1e-4));
  const VectorXd f = fibril_loads(sys, arr, {D, 0, 0});
  CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fibril_loads(sys, arr, {0, 0, 0}).cwiseAbs().maxCoeff() == 0.0);

  CHECK(total_force(VectorXd::Ones(7), 7) == 1.0);
  CHECK(total_force(VectorXd(0), 4) == 0.0);
  VectorXd two(2);
  two << 0.5, 0.3;
  CHECK(total_force(two, 4) == doctest::Approx(0.2));
}

TEST_CASE("downdate_stiffness") {
  SUBCASE("2x2 pair leaves 1/C11") {
    const auto sys = assemble(pair_array(3.0), VectorXd::Constant(2, 20.0 / 3.0));
    const MatrixXd Kp = downdate_stiffness(sys.K, 1);
    REQUIRE(Kp.rows() == 1);
    CHECK(Kp(0, 0) == doctest::Approx(1.0 / sys.C(0, 0)).epsilon(1e-14));
  }
  SUBCASE("random SPD matches re-inversion") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int rep = 0; rep < 20; ++rep) {
      const Index n = 3 + rep;
      MatrixXd A(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) A(i, j) = u(rng);
      const MatrixXd C = A * A.transpose() + MatrixXd::Identity(n, n) * 0.5;
      const MatrixXd K = C.inverse();
      const Index i = rep % n;
      const MatrixXd Kd = downdate_stiffness(K, i);
      const MatrixXd Kref = delete_index(C, i).inverse();
      CHECK((Kd - Kref).norm() / Kref.norm() < 1e-8);
    }
  }
  SUBCASE("removing the only fibril") {
    MatrixXd K(1, 1);
    K << 0.2;
    CHECK(downdate_stiffness(K, 0).size() == 0);
  }
  SUBCASE("tiny pivots are rejected") {
    MatrixXd K = MatrixXd::Identity(2, 2);
    K(1, 1) = 0.0;
    CHECK_THROWS_AS(downdate_stiffness(K, 1), DomainError);
  }
}

TEST_CASE("simulate_detachment: exact small systems") {
  const auto one = simulate_detachment(single_array(), VectorXd::Constant(1, 5.0));
  CHECK(one.strength == 1.0);
  REQUIRE(one.events.size() == 1);

  const auto arr = pair_array(3.0);
  const VectorXd c = VectorXd::Constant(2, 20.0 / 3.0);
  const auto tr = simulate_detachment(arr, c);
  CHECK(tr.strength == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(tr.events.size() == 2);
  const double C11 = kSelfCompliance + 20.0 / 3.0;
  CHECK(std::abs(tr.events[0].D_event - (C11 + 1.0 / 3.0)) < 1e-10);
  CHECK(tr.events[1].D_event == tr.events[0].D_event);
  CHECK(tr.events[0].detached_id == 0);  // tie resolved by lowest index
  CHECK(tr.events[1].detached_id == 1);
}

TEST_CASE("simulate_detachment: trace invariants") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 25; ++rep) {
    const auto a = testing::random_array(rng, 5 + rep);
    const VectorXd c = testing::random_design(rng, a.size());
    const auto tr = simulate_detachment(a, c);
    REQUIRE(tr.events.size() == static_cast<std::size_t>(a.size()));
    double peak = 0;
    for (std::size_t k = 0; k < tr.events.size(); ++k) {
      if (k > 0) CHECK(tr.events[k].D_event >= tr.events[k - 1].D_event);
      peak = std::max(peak, tr.events[k].force_before);
      CHECK(tr.events[k].force_after <= tr.events[k].force_before + 1e-12);
    }
    CHECK(tr.strength == peak);
    CHECK(tr.strength > 0.0);
    CHECK(tr.strength <= 1.0 + 1e-12);
    auto order = tr.detachment_order();
    std::sort(order.begin(), order.end());
    for (Index i = 0; i < a.size(); ++i) CHECK(order[i] == i);

    // Between events the curve rises: force_before of event k+1 exceeds
    // force_after of event k whenever D advanced.
    for (std::size_t k = 0; k + 1 < tr.events.size(); ++k) {
      if (tr.events[k + 1].D_event > tr.events[k].D_event)
        CHECK(tr.events[k + 1].force_before > tr.events[k].force_after);
    }
  }
}

TEST_CASE("simulate_detachment: permutation equivariance") {
  std::mt19937_64 rng(8);
  const auto a = testing::random_array(rng, 25);
  const VectorXd c = testing::random_design(rng, a.size());
  std::vector<Index> perm(static_cast<std::size_t>(a.size()));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  FibrilArray b = a;
  VectorXd cb(a.size());
  for (Index k = 0; k < a.size(); ++k) {
    b.fibrils[k] = a.fibrils[perm[k]];
    cb[k] = c[perm[k]];
  }
  const auto ta = simulate_detachment(a, c);
  const auto tb = simulate_detachment(b, cb);
  CHECK(tb.strength == doctest::Approx(ta.strength).epsilon(1e-12));
  for (std::size_t k = 0; k < ta.events.size(); ++k) {
    CHECK(perm[tb.events[k].detached_id] == ta.events[k].detached_id);
  }
}

TEST_CASE("simulate_detachment: symmetric fibrils detach together") {
  const auto a = build_circle(9.0, 3.0, default_template());
  const VectorXd c = VectorXd::Constant(a.size(), 20.0 / 3.0);
  const auto tr = simulate_detachment(a, c);
  std::vector<double> D_of(static_cast<std::size_t>(a.size()));
  for (const auto& e : tr.events) D_of[e.detached_id] = e.D_event;
  // Fibrils at equal radius on this small circle are related by the
  // lattice's dihedral symmetry.
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < a.size(); ++j) {
      const double ri = std::hypot(a.fibrils[i].x_hat, a.fibrils[i].y_hat);
      const double rj = std::hypot(a.fibrils[j].x_hat, a.fibrils[j].y_hat);
      if (std::abs(ri - rj) < 1e-9) CHECK(D_of[i] == doctest::Approx(D_of[j]).epsilon(1e-10));
    }
}

TEST_CASE("simulate_detachment: compliant fibrils approach equal load sharing") {
  std::mt19937_64 rng(21);
  const auto a = testing::random_array(rng, 40);
  const VectorXd c = testing::random_design(rng, a.size(), 2.0, 8.0);
  double prev = 0.0;
  for (double delta : {0.0, 10.0, 100.0, 1000.0}) {
    const double s = adhesive_strength(a, (c.array() + delta).matrix());
    CHECK(s >= prev - 1e-12);
    prev = s;
  }
  CHECK(prev > 0.99);
}

TEST_CASE("simulate_detachment: tilt loads one side first") {
  const auto a = build_square(9.0, 3.0, default_template());
  const VectorXd c = VectorXd::Constant(a.size(), 20.0 / 3.0);
  const auto tr = simulate_detachment(a, c, 0.5, 0.0);
  CHECK(tr.strength <= 1.0);
  CHECK(a.fibrils[tr.events.front().detached_id].x_hat == doctest::Approx(9.0));
  CHECK(tr.strength < simulate_detachment(a, c).strength);
  CHECK(tr.initial_force != 0.0);
}

TEST_CASE("downdate and re-inversion paths agree") {
  std::mt19937_64 rng(99);
  const auto a = testing::random_array(rng, 35);
  const VectorXd c = testing::random_design(rng, a.size());
  SimulationOptions opt;
  double worst = 0.0;
  MatrixXd C = compliance_matrix(a, c);
  opt.observer = [&](const MatrixXd& K, std::span<const Index> ids) {
    MatrixXd sub(ids.size(), ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < ids.size(); ++j) sub(i, j) = C(ids[i], ids[j]);
    const MatrixXd ref = sub.inverse();
    worst = std::max(worst, (K - ref).norm() / ref.norm());
  };
  const auto fast = simulate_detachment(a, c, 0, 0, opt);
  SimulationOptions slow_opt;
  slow_opt.update = StiffnessUpdate::reinvert;
  const auto slow = simulate_detachment(a, c, 0, 0, slow_opt);
  CHECK(worst < 1e-8);
  CHECK(fast.detachment_order() == slow.detachment_order());
  CHECK(fast.strength == doctest::Approx(slow.strength).epsilon(1e-12));
}

TEST_CASE("stepped_simulate") {
  const auto one = single_array();
  const VectorXd c1 = VectorXd::Constant(1, 5.0);
  const double C11 = kSelfCompliance + 5.0;
  for (double dD : {0.5, 0.01, 1e-3}) {
    const auto tr = stepped_simulate(one, c1, 0, 0, dD);
    CHECK(std::abs(tr.strength - 1.0) <= dD / C11 + 1e-12);
  }
  CHECK_THROWS_AS(stepped_simulate(one, c1, 0, 0, 0.0), DomainError);
  CHECK_THROWS_AS(stepped_simulate(one, c1, 0, 0, -1.0), DomainError);

  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 5; ++rep) {
    const auto a = testing::random_array(rng, 10 + 8 * rep);
    const VectorXd c = testing::random_design(rng, a.size());
    const auto exact = simulate_detachment(a, c);
    const auto stepped = stepped_simulate(a, c, 0, 0, 1e-4);
    CHECK(std::abs(exact.strength - stepped.strength) < 1e-3);
    CHECK(exact.detachment_order() == stepped.detachment_order());
  }
}

TEST_CASE("trace export") {
  const auto tr = simulate_detachment(pair_array(3.0), VectorXd::Constant(2, 20.0 / 3.0));
  std::stringstream csv;
  write_trace_csv(csv, tr);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "event_index,D_event,force_before,detached_id");
  const auto json = trace_summary_json(tr);
  CHECK(json.find("\"n_fibrils\": 2") != std::string::npos);
  const auto poly = tr.polyline();
  CHECK(poly.size() == 5);
  CHECK(poly.front().second == 0.0);
  CHECK(poly.back().second == 0.0);
}
