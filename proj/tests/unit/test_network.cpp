#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "it2cfnn/fuzzy.hpp"
#include "it2cfnn/network.hpp"
#include "it2cfnn/train.hpp"
#include "support.hpp"

using namespace it2cfnn;

using support::fixed_net;
using support::vec;

namespace {

// Scalar re-evaluation of the forward pass, independent of the library's loops.
double brute_force(const Network &net, const Vector &x) {
  double y = 0.0;
  for (const Rule &r : net.rules()) {
    double lower = 1.0, upper = 1.0;
    for (std::size_t j = 0; j < r.dim(); ++j) {
      double z = 0.0;
      for (std::size_t l = 0; l < r.dim(); ++l)
        z += r.transform(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) *
             (x[static_cast<Eigen::Index>(l)] - r.center[static_cast<Eigen::Index>(l)]);
      const double b2 = r.beta[static_cast<Eigen::Index>(j)] * r.beta[static_cast<Eigen::Index>(j)];
      const double d2 = r.delta[static_cast<Eigen::Index>(j)] * r.delta[static_cast<Eigen::Index>(j)];
      const double hi = std::abs(z) <= 1.0 ? b2 + d2 : b2 - d2;
      const double lo = std::abs(z) <= 1.0 ? b2 - d2 : b2 + d2;
      upper *= std::exp(-0.5 * std::pow(z * z, hi));
      lower *= std::exp(-0.5 * std::pow(z * z, lo));
    }
    const double w1 = r.v1 * r.v1, w2 = r.v2 * r.v2;
    y += (w1 * lower + w2 * upper) / (w1 + w2) * r.consequent;
  }
  return y;
}

Network random_net(support::Gen &g, std::size_t rules, std::size_t n) {
  return train::random_problem(n, rules, 1, g.index(0, 1u << 30)).network;
}

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("feature transform") {
    Rule r = Rule::identity(2);
    Vector x = vec({0.7, -1.1});
    CHECK(transform_features(r, x) == x);

    r.transform = support::mat2(2, 0, 0, 3);
    r.center = vec({1, 1});
    CHECK(transform_features(r, vec({2, 3})) == vec({2, 6}));
    CHECK(transform_features(r, r.center).isZero(0.0));

    CHECK_THROWS_AS(transform_features(r, vec({1, 2, 3})), std::invalid_argument);
  }

  TEST_CASE("fuzzify and fire") {
    Rule r = Rule::identity(2);
    r.beta = vec({1.3, 0.8});
    r.delta = vec({0.4, 0.0});

    auto at_zero = fuzzify(r, vec({0.0, 0.0}));
    CHECK(at_zero[0].lower == 1.0);
    CHECK(at_zero[0].upper == 1.0);
    FiringInterval f0 = fire(r, vec({0.0, 0.0}));
    CHECK(f0.lower == 1.0);
    CHECK(f0.upper == 1.0);

    auto at_edge = fuzzify(r, vec({1.0, -1.0}));
    for (const auto &mp : at_edge) {
      CHECK(mp.lower == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
      CHECK(mp.upper == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    }

    auto mid = fuzzify(r, vec({0.4, 1.7}));
    const double type1 = fuzzy::mu_type1(1.7, {0.0, 1.0, 0.8, 0.0});
    CHECK(mid[1].lower == type1);
    CHECK(mid[1].upper == type1);

    FiringInterval prod = fire(std::vector<MembershipPair>{{0.5, 0.8}, {0.5, 0.8}});
    CHECK(prod.lower == 0.25);
    CHECK(prod.upper == doctest::Approx(0.64).epsilon(1e-15));
    FiringInterval dead = fire(std::vector<MembershipPair>{{0.0, 0.0}, {0.5, 0.8}});
    CHECK(dead.lower == 0.0);
    CHECK(dead.upper == 0.0);
  }

  TEST_CASE("type reduction") {
    CHECK(type_reduce(0.7, 0.7, {0.2, 0.6}) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(type_reduce(1.0, 0.0, {0.2, 0.6}) == 0.2);
    CHECK(type_reduce(1.0, 2.0, {0.2, 0.8}) == doctest::Approx(0.68).epsilon(1e-15));
    CHECK_THROWS_AS(type_reduce(0.0, 0.0, {0.2, 0.8}), std::domain_error);

    support::Gen g(11);
    for (int c = 0; c < 1000; ++c) {
      const double v1 = g.uniform(-2, 2), v2 = g.uniform(-2, 2), s = g.sign() * g.uniform(0.01, 50);
      const double a = g.uniform(0, 1);
      FiringInterval fi{a, a + g.uniform(0, 1 - a)};
      CHECK(type_reduce(v1, v2, fi) == doctest::Approx(type_reduce(s * v1, s * v2, fi)).epsilon(1e-13));
    }
  }

  TEST_CASE("parameter counts") {
    CHECK(param_count(2, 4) == 58);
    CHECK(param_count(1, 1) == 5);
    CHECK(param_count(3, 5) == 123);
    CHECK(trainable_count(3, 5) == 129);
  }

  TEST_CASE("forward at fixed points") {
    Rule r = Rule::identity(3, 4.25);
    r.center = vec({1, -2, 0.5});
    Network one(3, {r});
    CHECK(one.predict(r.center) == 4.25);

    Network zero = fixed_net();
    for (Rule &rr : zero.rules()) rr.consequent = 0.0;
    CHECK(zero.predict(vec({0.3, 0.9})) == 0.0);
  }

  TEST_CASE("fixed network matches the high-precision oracle") {
    Network net = fixed_net();
    ForwardResult a = net.forward(vec({0.4, 0.3}));
    CHECK(a.y_hat == doctest::Approx(1.2370125965072536).epsilon(1e-14));
    CHECK(a.rules[0].firing.lower == doctest::Approx(0.79403490609620853).epsilon(1e-14));
    CHECK(a.rules[0].firing.upper == doctest::Approx(0.8335048804323949).epsilon(1e-14));
    CHECK(a.rules[0].reduced == doctest::Approx(0.82136027294433755).epsilon(1e-14));
    CHECK(a.rules[1].firing.lower == doctest::Approx(0.68008691062279214).epsilon(1e-14));
    CHECK(a.rules[1].firing.upper == doctest::Approx(0.68180149397299106).epsilon(1e-14));
    CHECK(a.rules[1].reduced == doctest::Approx(0.68032340487799192).epsilon(1e-14));

    ForwardResult b = net.forward(vec({-1.0, 1.5}));
    CHECK(b.y_hat == doctest::Approx(0.22165517887528746).epsilon(1e-14));
    CHECK(b.rules[0].reduced == doctest::Approx(0.18205992880903282).epsilon(1e-14));
    CHECK(b.rules[1].reduced == doctest::Approx(0.1945788692894122).epsilon(1e-14));

    net.set_output_mode(OutputMode::Normalized);
    CHECK(net.predict(vec({0.4, 0.3})) == doctest::Approx(0.82375044410225629).epsilon(1e-14));
    CHECK(net.predict(vec({-1.0, 1.5})) == doctest::Approx(0.58850861885278138).epsilon(1e-14));
  }

  TEST_CASE("forward agrees with a scalar re-evaluation") {
    support::Gen g(3);
    for (int c = 0; c < 300; ++c) {
      const std::size_t n = g.index(1, 5), rules = g.index(1, 4);
      Network net = random_net(g, rules, n);
      Vector x = g.vector(n, -2.0, 2.0);
      CHECK(net.predict(x) == doctest::Approx(brute_force(net, x)).epsilon(1e-12));
    }
  }

  TEST_CASE("batch prediction matches per-row prediction") {
    support::Gen g(5);
    Network net = random_net(g, 3, 4);
    Matrix xs(20, 4);
    for (Eigen::Index i = 0; i < xs.rows(); ++i) xs.row(i) = g.vector(4, -2, 2).transpose();
    Vector ys = net.predict(xs);
    for (Eigen::Index i = 0; i < xs.rows(); ++i) CHECK(ys[i] == net.predict(Vector(xs.row(i).transpose())));
  }

  TEST_CASE("firing ordering and collapse properties") {
    support::Gen g(17);
    for (int c = 0; c < 1000; ++c) {
      const std::size_t n = g.index(1, 5), rules = g.index(1, 3);
      Network net = random_net(g, rules, n);
      Vector x = g.vector(n, -3.0, 3.0);
      ForwardResult fr = net.forward(x);
      for (const RuleTrace &t : fr.rules) {
        CHECK(0.0 <= t.firing.lower);
        CHECK(t.firing.lower <= t.reduced + 1e-15);
        CHECK(t.reduced <= t.firing.upper + 1e-15);
        CHECK(t.firing.upper <= 1.0);
      }

      Network flat = net;
      for (Rule &r : flat.rules()) r.delta.setZero();
      ForwardResult ff = flat.forward(x);
      double type1 = 0.0;
      for (std::size_t i = 0; i < flat.rule_count(); ++i) {
        CHECK(ff.rules[i].firing.lower == ff.rules[i].firing.upper);
        CHECK(ff.rules[i].reduced == doctest::Approx(ff.rules[i].firing.lower).epsilon(1e-15));
        type1 += ff.rules[i].firing.lower * flat.rule(i).consequent;
      }
      CHECK(ff.y_hat == doctest::Approx(type1).epsilon(1e-13));
    }
  }

  TEST_CASE("forward is continuous across the unit boundary") {
    support::Gen g(23);
    for (int c = 0; c < 500; ++c) {
      Network net = random_net(g, 2, 3);
      const Rule &r = net.rule(0);
      // Choose z with z[0] exactly on the boundary and map back to x.
      Vector z = g.vector(3, -2, 2);
      z[0] = g.sign();
      Vector x = r.center + r.transform.lu().solve(z);
      Vector dir = r.transform.lu().solve(Vector::Unit(3, 0));
      const double eps = 1e-10;
      CHECK(std::abs(net.predict(Vector(x + eps * dir)) - net.predict(Vector(x - eps * dir))) < 1e-7);
    }
  }

  TEST_CASE("permuting rules leaves the output unchanged") {
    support::Gen g(29);
    for (int c = 0; c < 200; ++c) {
      Network net = random_net(g, 4, 3);
      std::vector<Rule> rules = net.rules();
      std::reverse(rules.begin(), rules.end());
      Network perm(3, rules);
      Vector x = g.vector(3, -2, 2);
      ForwardResult a = net.forward(x), b = perm.forward(x);
      CHECK(a.y_hat == doctest::Approx(b.y_hat).epsilon(1e-14));
      CHECK(a.rules[0].reduced == b.rules[3].reduced);
    }
  }

  TEST_CASE("log-space products agree with direct products") {
    support::Gen g(31);
    const std::size_t n = kLogSpaceThreshold + 4;
    for (int c = 0; c < 50; ++c) {
      Network net = random_net(g, 2, n);
      Vector x = net.rule(0).center + 0.1 * g.vector(n, -1, 1);
      CHECK(net.predict(x) == doctest::Approx(brute_force(net, x)).epsilon(1e-10));
    }
  }

  TEST_CASE("normalized mode guards a vanishing firing sum") {
    Network net = fixed_net(OutputMode::Normalized);
    const double y = net.predict(vec({80.0, -90.0}));
    CHECK(std::isfinite(y));
  }

  TEST_CASE("malformed networks are rejected") {
    Rule r = Rule::identity(2);
    r.beta = vec({1.0});
    CHECK_THROWS_AS(Network(2, {r}), std::invalid_argument);
    Rule w = Rule::identity(2);
    w.v1 = 0.0;
    w.v2 = 0.0;
    CHECK_THROWS(Network(2, {w}));
    Network ok = fixed_net();
    CHECK_THROWS_AS(ok.predict(vec({1.0})), std::invalid_argument);
  }
}
