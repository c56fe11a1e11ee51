#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "mcal/core.hpp"
#include "mcal/rng.hpp"

using namespace mcal;

namespace {

LogitVector vec2(double a, double b) {
  LogitVector z(2);
  z << a, b;
  return z;
}

LogitVector vec3(double a, double b, double c) {
  LogitVector z(3);
  z << a, b, c;
  return z;
}

}  // namespace

TEST_CASE("softmax matches hand-computed values") {
  const ClassDistribution p = softmax(vec2(std::log(2.0), 0.0));
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  const ClassDistribution u = softmax(vec3(0.0, 0.0, 0.0));
  for (int i = 0; i < 3; ++i) {
    CHECK(u[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax is stable for extreme logits") {
  const ClassDistribution p = softmax(vec2(1000.0, 0.0));
  CHECK(p.allFinite());
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[1] >= 0.0);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));

  const ClassDistribution q = softmax(vec2(-1000.0, -1001.0));
  CHECK(q.allFinite());
  CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant") {
  Rng rng(7);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    LogitVector z(5);
    for (int i = 0; i < 5; ++i) z[i] = g(rng);
    const double c = g(rng);
    const ClassDistribution a = softmax(z);
    const ClassDistribution b = softmax(z.array() + c);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("softmax commutes with coordinate permutation") {
  const LogitVector z = vec3(0.3, -1.2, 2.0);
  const ClassDistribution p = softmax(z);
  const ClassDistribution q = softmax(vec3(2.0, 0.3, -1.2));
  CHECK(q[0] == doctest::Approx(p[2]).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(p[0]).epsilon(1e-12));
  CHECK(q[2] == doctest::Approx(p[1]).epsilon(1e-12));
}

TEST_CASE("softmax rejects bad input") {
  CHECK_THROWS_AS(softmax(LogitVector::Constant(1, 0.0)), DomainError);
  LogitVector z = vec2(0.0, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(softmax(z), DomainError);
  z[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(softmax(z), DomainError);
}

TEST_CASE("log_sum_exp agrees with naive computation in benign range") {
  Rng rng(11);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    LogitVector z(4);
    for (int i = 0; i < 4; ++i) z[i] = g(rng);
    const double naive = std::log(z.array().exp().sum());
    CHECK(log_sum_exp(z) == doctest::Approx(naive).epsilon(1e-12));
  }
  CHECK(log_sum_exp(vec2(1000.0, 1000.0)) ==
        doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross_entropy matches hand-computed values") {
  CHECK(cross_entropy(vec2(0.0, 0.0), 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Dominant correct logit: loss = log(1 + e^-50), essentially e^-50.
  CHECK(cross_entropy(vec2(50.0, 0.0), 0) ==
        doctest::Approx(std::exp(-50.0)).epsilon(1e-6));
  CHECK(cross_entropy(vec2(50.0, 0.0), 0) > 0.0);
  // Dominant wrong logit: loss approx 50 nats, not -inf/NaN.
  CHECK(cross_entropy(vec2(0.0, 50.0), 0) ==
        doctest::Approx(50.0).epsilon(1e-6));
  // Extreme case where naive -log(softmax) would round to log(0).
  CHECK(std::isfinite(cross_entropy(vec2(0.0, 1000.0), 0)));
  CHECK(cross_entropy(vec2(0.0, 1000.0), 0) ==
        doctest::Approx(1000.0).epsilon(1e-9));
}

TEST_CASE("cross_entropy equals naive -log softmax in benign range") {
  Rng rng(13);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    LogitVector z(6);
    for (int i = 0; i < 6; ++i) z[i] = g(rng);
    const int target = static_cast<int>(rng() % 6);
    const double naive = -std::log(softmax(z)[target]);
    CHECK(cross_entropy(z, target) == doctest::Approx(naive).epsilon(1e-10));
  }
}

TEST_CASE("cross_entropy validates its contract") {
  CHECK_THROWS_AS(cross_entropy(vec2(0.0, 0.0), -1), ContractError);
  CHECK_THROWS_AS(cross_entropy(vec2(0.0, 0.0), 2), ContractError);
  CHECK_THROWS_AS(cross_entropy(LogitVector::Constant(1, 0.0), 0),
                  ContractError);
  LogitVector z = vec2(0.0, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(cross_entropy(z, 0), ContractError);
}

TEST_CASE("kl_divergence matches the worked example") {
  ClassDistribution p = vec2(0.9, 0.1);
  ClassDistribution q = vec2(0.5, 0.5);
  CHECK(kl_divergence(p, q, 0.0) == doctest::Approx(0.368064).epsilon(1e-5));
  CHECK(kl_divergence(p, q, 0.0) ==
        doctest::Approx(0.9 * std::log(1.8) + 0.1 * std::log(0.2))
            .epsilon(1e-12));
}

TEST_CASE("kl_divergence handles zero mass via smoothing") {
  ClassDistribution p = vec2(1.0, 0.0);
  ClassDistribution q = vec2(0.5, 0.5);
  // Unsmoothed: the q side is positive everywhere, so the value is finite.
  CHECK(kl_divergence(p, q, 0.0) == doctest::Approx(std::log(2.0)));
  // Default smoothing barely moves it.
  CHECK(kl_divergence(p, q, 1e-9) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-6));
  // Zero in q where p has mass: infinite unsmoothed, finite smoothed.
  CHECK(std::isinf(kl_divergence(q, p, 0.0)));
  CHECK(std::isfinite(kl_divergence(q, p, 1e-9)));
  // p == q stays exactly zero under smoothing.
  CHECK(kl_divergence(q, q, 1e-9) == 0.0);
}

TEST_CASE("kl_divergence is non-negative (Gibbs)") {
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    ClassDistribution p(4), q(4);
    for (int i = 0; i < 4; ++i) {
      p[i] = u(rng);
      q[i] = u(rng);
    }
    p /= p.sum();
    q /= q.sum();
    CHECK(kl_divergence(p, q, 1e-9) >= 0.0);
  }
}

TEST_CASE("kl_divergence validates its contract") {
  ClassDistribution p = vec2(0.5, 0.5);
  CHECK_THROWS_AS(kl_divergence(p, vec3(1, 0, 0), 0.0), ContractError);
  CHECK_THROWS_AS(kl_divergence(vec2(-0.1, 1.1), p, 0.0), ContractError);
  CHECK_THROWS_AS(kl_divergence(p, p, -1e-9), ContractError);
}

TEST_CASE("predict_class breaks ties toward the lowest index") {
  CHECK(predict_class(vec3(0.0, 0.0, 0.0)) == 0);
  CHECK(predict_class(vec3(-1.0, 2.0, 2.0)) == 1);
  CHECK(predict_class(vec3(-1.0, 0.5, 2.0)) == 2);
}

TEST_CASE("one_hot produces valid distributions") {
  const ClassDistribution p = one_hot(1, 3);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 1.0);
  CHECK(p[2] == 0.0);
  CHECK_THROWS_AS(one_hot(3, 3), ContractError);
  CHECK_THROWS_AS(one_hot(-1, 3), ContractError);
}

TEST_CASE("identity calibrators leave logits unchanged") {
  const LogitVector z = vec3(0.4, -2.0, 1.5);
  for (auto kind : {Parametrization::Dense, Parametrization::Diagonal,
                    Parametrization::Temperature}) {
    const CalibratorParams id = CalibratorParams::identity(kind, 3);
    const LogitVector out = apply_calibrator(id, z);
    CHECK((out - z).cwiseAbs().maxCoeff() == 0.0);
    CHECK(id.free_parameter_count() > 0);
  }
}

TEST_CASE("apply_calibrator matches the dense embedding") {
  const LogitVector z = vec3(0.4, -2.0, 1.5);

  CalibratorParams diag = CalibratorParams::identity(Parametrization::Diagonal, 3);
  diag.scale = vec3(2.0, 0.5, -1.0);
  diag.bias = vec3(0.1, -0.2, 0.3);
  CalibratorParams temp =
      CalibratorParams::identity(Parametrization::Temperature, 3);
  temp.inv_temperature = 0.25;

  for (const auto& p : {diag, temp}) {
    const LogitVector direct = apply_calibrator(p, z);
    const LogitVector via_dense = p.dense_weight() * z + p.bias;
    CHECK((direct - via_dense).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("temperature never changes the argmax") {
  Rng rng(23);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    LogitVector z(4);
    for (int i = 0; i < 4; ++i) z[i] = g(rng);
    CalibratorParams temp =
        CalibratorParams::identity(Parametrization::Temperature, 4);
    temp.inv_temperature = std::exp(g(rng));
    CHECK(predict_class(apply_calibrator(temp, z)) == predict_class(z));
  }
}

TEST_CASE("calibrator validation rejects malformed parameters") {
  CalibratorParams p = CalibratorParams::identity(Parametrization::Dense, 3);
  p.weight = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(p.validate(), ContractError);

  CalibratorParams t =
      CalibratorParams::identity(Parametrization::Temperature, 3);
  t.inv_temperature = 0.0;
  CHECK_THROWS_AS(t.validate(), ContractError);
  t.inv_temperature = -1.0;
  CHECK_THROWS_AS(t.validate(), ContractError);
  t.inv_temperature = 1.0;
  t.bias = vec3(0.0, 0.1, 0.0);
  CHECK_THROWS_AS(t.validate(), ContractError);

  CalibratorParams d = CalibratorParams::identity(Parametrization::Diagonal, 3);
  d.scale = vec2(1.0, 1.0);
  CHECK_THROWS_AS(d.validate(), ContractError);

  CHECK_THROWS_AS(CalibratorParams::identity(Parametrization::Dense, 1),
                  ContractError);
}

TEST_CASE("apply_calibrator rejects dimension mismatches") {
  const CalibratorParams id =
      CalibratorParams::identity(Parametrization::Dense, 3);
  CHECK_THROWS_AS(apply_calibrator(id, vec2(0.0, 1.0)), ContractError);
}

TEST_CASE("parametrization names round-trip") {
  for (auto kind : {Parametrization::Dense, Parametrization::Diagonal,
                    Parametrization::Temperature}) {
    CHECK(parametrization_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(parametrization_from_string("vector"), ContractError);
}

TEST_CASE("seed derivation is deterministic and tag-sensitive") {
  CHECK(derive_seed(42, 1) == derive_seed(42, 1));
  CHECK(derive_seed(42, 1) != derive_seed(42, 2));
  CHECK(derive_seed(42, 1) != derive_seed(43, 1));
  Rng a(derive_seed(0, 0));
  Rng b(derive_seed(0, 0));
  CHECK(a() == b());
}
