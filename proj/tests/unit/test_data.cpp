#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <doctest.h>

#include "it2cfnn/data.hpp"
#include "support.hpp"

using namespace it2cfnn;
using namespace it2cfnn::data;

namespace {

void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path);
  out << text;
}

std::string error_of(const std::string &path, const ColumnSpec &spec) {
  try {
    load_csv(path, spec);
  } catch (const DataError &e) {
    return e.what();
  }
  return {};
}

double sample_std(const std::vector<double> &v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("two-hump surface at fixed points") {
    CHECK(two_hump(-0.7, 1.3) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(two_hump(1.2, -0.6) == doctest::Approx(8.116934061120856).epsilon(1e-14));
    CHECK(two_hump(0.5, 0.5) == doctest::Approx(0.363684760019142).epsilon(1e-13));
  }

  TEST_CASE("two-hump sampling") {
    Dataset a = synthetic_two_hump(700, 3), b = synthetic_two_hump(700, 3);
    CHECK(a.size() == 700);
    CHECK(a.dim() == 2);
    CHECK(a.inputs == b.inputs);
    CHECK(a.targets == b.targets);
    CHECK(a.inputs.minCoeff() >= -2.0);
    CHECK(a.inputs.maxCoeff() <= 3.0);
    for (std::size_t k = 0; k < 20; ++k) CHECK(a.targets[static_cast<Eigen::Index>(k)] == two_hump(a.inputs(k, 0), a.inputs(k, 1)));

    Dataset grid = synthetic_two_hump_grid(6);
    CHECK(grid.size() == 36);
    CHECK(grid.inputs(0, 0) == -2.0);
    CHECK(grid.inputs(35, 1) == 3.0);
    CHECK_THROWS_AS(synthetic_two_hump_grid(1), DataError);
  }

  TEST_CASE("splits") {
    Dataset d = synthetic_two_hump(20, 5);
    Split h = split_head(d, 15);
    CHECK(h.train.size() == 15);
    CHECK(h.test.targets[0] == d.targets[15]);

    std::vector<std::size_t> order = shuffled_order(20, 9);
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> iota(20);
    std::iota(iota.begin(), iota.end(), std::size_t{0});
    CHECK(sorted == iota);
    CHECK(order == shuffled_order(20, 9));
    CHECK(order != shuffled_order(20, 10));

    Split s = split_shuffled(d, 12, 9);
    CHECK(s.train.size() == 12);
    CHECK(s.test.size() == 8);
    CHECK(s.train.targets[0] == d.targets[static_cast<Eigen::Index>(order[0])]);
    CHECK_THROWS_AS(split_head(d, 21), DataError);
  }

  TEST_CASE("Mackey-Glass series") {
    std::vector<double> x = mackey_glass();
    REQUIRE(x.size() == 1124);
    CHECK(x[0] == 1.2);
    CHECK(*std::min_element(x.begin(), x.end()) > 0.2);
    CHECK(*std::max_element(x.begin(), x.end()) < 1.4);

    // The autocorrelation envelope keeps shrinking instead of returning to one.
    std::vector<double> tail(x.begin() + 124, x.end());
    const double mean = std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(tail.size());
    auto acf = [&](std::size_t lag) {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < tail.size(); ++i) {
        den += (tail[i] - mean) * (tail[i] - mean);
        if (i + lag < tail.size()) num += (tail[i] - mean) * (tail[i + lag] - mean);
      }
      return num / den;
    };
    auto envelope = [&](std::size_t from) {
      double e = 0.0;
      for (std::size_t lag = from; lag < from + 100; ++lag) e = std::max(e, std::abs(acf(lag)));
      return e;
    };
    CHECK(envelope(100) < 0.75);
    CHECK(envelope(200) < envelope(100));
    CHECK(envelope(300) < envelope(200));

    MackeyGlassParams fine;
    fine.dt = 0.05;
    std::vector<double> y = mackey_glass(fine);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
    CHECK(worst < 1e-4);

    MackeyGlassParams window;
    window.t_start = 124;
    std::vector<double> w = mackey_glass(window);
    CHECK(w.size() == 1000);
    CHECK(w.front() == x[124]);

    MackeyGlassParams bad;
    bad.tau = 16.0;
    CHECK_THROWS_AS(mackey_glass(bad), DataError);
  }

  TEST_CASE("lag embedding") {
    std::vector<double> s(10);
    std::iota(s.begin(), s.end(), 1.0);
    Dataset d = lag_embed(s, SeriesSpec::single({1, 2}));
    REQUIRE(d.size() == 8);
    CHECK(d.inputs(0, 0) == 2.0);
    CHECK(d.inputs(0, 1) == 1.0);
    CHECK(d.targets[0] == 3.0);

    Dataset ahead = lag_embed(s, SeriesSpec::single({0, 1}, 1));
    CHECK(ahead.inputs(0, 0) == 2.0);
    CHECK(ahead.inputs(0, 1) == 1.0);
    CHECK(ahead.targets[0] == 3.0);

    SeriesSpec mg = SeriesSpec::single({6, 12, 18, 24});
    mg.first_target = 124;
    mg.count = 1000;
    MackeyGlassParams p;
    std::vector<double> series = mackey_glass(p);
    Dataset m = lag_embed(series, mg);
    CHECK(m.size() == 1000);
    CHECK(m.dim() == 4);
    CHECK(m.targets[0] == series[124]);
    CHECK(m.inputs(0, 3) == series[100]);
    CHECK(m.targets[999] == series[1123]);

    std::vector<double> u(296), y(296);
    for (std::size_t i = 0; i < 296; ++i) {
      u[i] = static_cast<double>(i);
      y[i] = 1000.0 + static_cast<double>(i);
    }
    SeriesSpec bj;
    bj.lags = {{0, 4}, {1, 1}};
    bj.target_channel = 1;
    Dataset b = lag_embed({u, y}, bj);
    CHECK(b.size() == 292);
    CHECK(b.inputs(0, 0) == 0.0);
    CHECK(b.inputs(0, 1) == 1003.0);
    CHECK(b.targets[0] == 1004.0);

    CHECK_THROWS_AS(lag_embed(s, SeriesSpec::single({0})), DataError);
    CHECK_THROWS_AS(lag_embed(s, SeriesSpec::single({10})), DataError);
    CHECK_THROWS_AS(lag_embed(s, SeriesSpec{{{1, 1}}, 0, 0, {}, {}}), DataError);
  }

  TEST_CASE("lag embedding never reads the future") {
    support::Gen g(101);
    for (int c = 0; c < 200; ++c) {
      const std::size_t len = g.index(40, 80), horizon = g.index(0, 3);
      std::vector<double> s(len);
      std::iota(s.begin(), s.end(), 0.0);
      std::vector<std::size_t> lags;
      const std::size_t terms = g.index(1, 4);
      for (std::size_t t = 0; t < terms; ++t) lags.push_back(g.index(horizon == 0 ? 1 : 0, 10));
      Dataset d = lag_embed(s, SeriesSpec::single(lags, horizon));
      for (Eigen::Index k = 0; k < d.inputs.rows(); ++k)
        for (Eigen::Index j = 0; j < d.inputs.cols(); ++j) CHECK(d.inputs(k, j) < d.targets[k]);
    }
  }

  TEST_CASE("noise injection") {
    std::vector<double> zeros(20000, 0.0);
    CHECK(add_gaussian_noise(zeros, 0.0, 1) == zeros);
    std::vector<double> noisy = add_gaussian_noise(zeros, 0.3, 1);
    CHECK(std::abs(sample_std(noisy) - 0.3) < 0.015);
    CHECK(noisy == add_gaussian_noise(zeros, 0.3, 1));
    CHECK(noisy != add_gaussian_noise(zeros, 0.3, 2));
    CHECK_THROWS_AS(add_gaussian_noise(zeros, -1.0, 1), DataError);

    Dataset d = synthetic_two_hump(100, 1);
    Dataset t = add_gaussian_noise(d, 0.1, 4, NoiseScope::Targets);
    CHECK(t.inputs == d.inputs);
    CHECK(t.targets != d.targets);
    Dataset i = add_gaussian_noise(d, 0.1, 4, NoiseScope::Inputs);
    CHECK(i.targets == d.targets);
    CHECK(i.inputs != d.inputs);
    Dataset same = add_gaussian_noise(d, 0.0, 4);
    CHECK(same.inputs == d.inputs);
  }

  TEST_CASE("normalization") {
    Dataset d = synthetic_two_hump(200, 6);
    for (auto mode : {NormalizationMode::MinMax01, NormalizationMode::ZScore}) {
      Dataset n = normalize(d, mode);
      REQUIRE(n.normalization);
      Dataset back = denormalize(n);
      CHECK((back.inputs - d.inputs).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((back.targets - d.targets).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((denormalize_targets(n.targets, *n.normalization) - d.targets).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(parse_normalization_mode(to_string(mode)) == mode);
    }

    Dataset mm = normalize(d, NormalizationMode::MinMax01);
    CHECK(mm.inputs.minCoeff() == 0.0);
    CHECK(mm.inputs.maxCoeff() == 1.0);
    Dataset again = normalize(mm, NormalizationMode::MinMax01);
    CHECK((again.inputs - mm.inputs).cwiseAbs().maxCoeff() < 1e-15);

    Dataset z = normalize(d, NormalizationMode::ZScore);
    for (Eigen::Index j = 0; j < 2; ++j) {
      const auto col = z.inputs.col(j);
      const double mean = col.mean();
      CHECK(std::abs(mean) < 1e-12);
      CHECK(std::sqrt((col.array() - mean).square().sum() / static_cast<double>(col.size() - 1)) ==
            doctest::Approx(1.0).epsilon(1e-2));
    }

    Dataset constant = d;
    constant.inputs.col(1).setConstant(4.0);
    CHECK_THROWS_AS(normalize(constant, NormalizationMode::MinMax01), DataError);
    CHECK_THROWS_AS(parse_normalization_mode("robust"), DataError);
  }

  TEST_CASE("CSV round trip and column selection") {
    support::TempDir tmp("csv");
    Dataset d = synthetic_two_hump(50, 8);
    d.targets[3] = 1.0 / 3.0;
    save_csv(d, tmp.file("d.csv"));
    CHECK(sniff_header(tmp.file("d.csv")));
    Dataset back = load_csv(tmp.file("d.csv"), {true, {}, ""});
    CHECK(back.inputs == d.inputs);
    CHECK(back.targets == d.targets);

    Dataset picked = load_csv(tmp.file("d.csv"), {true, {"x2"}, "x1"});
    CHECK(picked.dim() == 1);
    CHECK(picked.inputs.col(0) == d.inputs.col(1));
    CHECK(picked.targets == d.inputs.col(0));

    write_text(tmp.file("plain.csv"), "# comment\n1,2,3\n4,5,6\n");
    CHECK_FALSE(sniff_header(tmp.file("plain.csv")));
    Dataset plain = load_csv(tmp.file("plain.csv"), {false, {"0"}, "2"});
    CHECK(plain.size() == 2);
    CHECK(plain.inputs(1, 0) == 4.0);
    CHECK(plain.targets[1] == 6.0);

    CHECK(format_double(0.1) == "0.10000000000000001");
  }

  TEST_CASE("CSV errors name the problem") {
    support::TempDir tmp("csverr");
    write_text(tmp.file("bad.csv"), "a,b\n1,2\n3,x\n");
    const std::string bad = error_of(tmp.file("bad.csv"), {true, {}, ""});
    CHECK(bad.find("row 3") != std::string::npos);
    CHECK(bad.find("column 2") != std::string::npos);

    write_text(tmp.file("nan.csv"), "1,nan\n");
    CHECK(error_of(tmp.file("nan.csv"), {false, {}, ""}).find("non-finite") != std::string::npos);

    write_text(tmp.file("ragged.csv"), "1,2\n3\n");
    CHECK_FALSE(error_of(tmp.file("ragged.csv"), {false, {}, ""}).empty());

    write_text(tmp.file("ok.csv"), "a,b\n1,2\n");
    CHECK(error_of(tmp.file("ok.csv"), {true, {"c"}, "b"}).find("missing column 'c'") != std::string::npos);
    CHECK_FALSE(error_of(tmp.file("absent.csv"), {false, {}, ""}).empty());
  }
}
