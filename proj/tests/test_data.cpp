#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "dadapt/data.hpp"
#include "dadapt/serialize.hpp"

using namespace dadapt;

namespace {

std::string temp_path(const char* name) {
  return std::string("/tmp/dadapt_test_") + name;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("load a small csv") {
  std::string p = temp_path("toy.csv");
  write_text_file(p, "date,a,b\n2020-01-01 00:00:00,1.5,2\n"
                     "2020-01-01 01:00:00,2.5,3\n2020-01-01 02:00:00,3.5,4\n");
  SeriesFrame f = load_csv(p);
  CHECK(f.T() == 3);
  CHECK(f.d() == 2);
  CHECK(f.at(2, 0) == 3.5);
  CHECK(f.columns[1] == "b");
  CHECK(f.timestamps[1] - f.timestamps[0] == 3600);
}

TEST_CASE("shuffled timestamps are rejected with the inversion row") {
  std::string p = temp_path("shuffled.csv");
  write_text_file(p, "date,a\n100,1\n50,2\n");
  CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("row 2"), DataError);
}

TEST_CASE("unparsable cell names its row") {
  std::string p = temp_path("badcell.csv");
  write_text_file(p, "date,a\n100,1\n200,oops\n");
  CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("row 2"), DataError);
}

TEST_CASE("missing column is a named error") {
  std::string p = temp_path("cols.csv");
  write_text_file(p, "date,a\n100,1\n200,2\n");
  SeriesFrame f = load_csv(p);
  CHECK_THROWS_WITH_AS(f.column_index("nope"), doctest::Contains("nope"), DataError);
}

TEST_CASE("csv round-trip is bit-exact") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::exchangeable_gaussian;
  spec.seed = 3;
  SeriesFrame f = generate(spec, 200).frame;
  std::string p = temp_path("roundtrip.csv");
  write_csv(f, p);
  SeriesFrame g = load_csv(p);
  REQUIRE(g.T() == f.T());
  for (std::size_t t = 0; t < f.T(); ++t) {
    CHECK(g.at(t, 0) == f.at(t, 0));  // exact, not approximate
  }
}

TEST_CASE("window counts match the stride-1 formula") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::exchangeable_gaussian;
  const std::size_t L = 8, H = 4;

  SeriesFrame f1 = generate(spec, L + H).frame;
  WindowSet w1 = make_windows(f1, L, H, {"y"}, {}, false);
  CHECK(w1.windows.size() == 1);

  SeriesFrame f2 = generate(spec, L + H + 9).frame;
  WindowSet w2 = make_windows(f2, L, H, {"y"}, {}, false);
  CHECK(w2.windows.size() == 10);
}

TEST_CASE("too-short series reports the required minimum") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::exchangeable_gaussian;
  SeriesFrame f = generate(spec, 5).frame;
  CHECK_THROWS_WITH_AS(make_windows(f, 8, 4, {"y"}),
                       doctest::Contains("12"), DataError);
}

TEST_CASE("standardized train split has mean 0 and std 1") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::exchangeable_gaussian;
  spec.seed = 11;
  spec.params["mu"] = 5.0;
  spec.params["sigma"] = 2.5;
  SeriesFrame f = generate(spec, 400).frame;
  WindowSet ws = make_windows(f, 8, 2, {"y"});
  // recompute over the train rows through the scaler
  const std::size_t n_train = 240;  // 0.6 * 400
  double mu = 0.0;
  for (std::size_t t = 0; t < n_train; ++t) mu += ws.scaler.apply(f.at(t, 0), 0);
  mu /= n_train;
  double var = 0.0;
  for (std::size_t t = 0; t < n_train; ++t) {
    double z = ws.scaler.apply(f.at(t, 0), 0) - mu;
    var += z * z;
  }
  var /= n_train;
  CHECK(std::fabs(mu) < 1e-10);
  CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-10);
}

TEST_CASE("splits never share a raw row") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::exchangeable_gaussian;
  SeriesFrame f = generate(spec, 500).frame;
  const std::size_t L = 12, H = 6;
  WindowSet ws = make_windows(f, L, H, {"y"});
  auto rows_of = [&](const WindowSet::Range& r) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      spans.emplace_back(ws.windows[i].origin, ws.windows[i].origin + L + H);
    }
    return spans;
  };
  auto train = rows_of(ws.train), val = rows_of(ws.val), cal = rows_of(ws.cal),
       test = rows_of(ws.test);
  auto disjoint = [](const auto& a, const auto& b) {
    for (const auto& [s1, e1] : a) {
      for (const auto& [s2, e2] : b) {
        if (s1 < e2 && s2 < e1) return false;
      }
    }
    return true;
  };
  CHECK(disjoint(train, val));
  CHECK(disjoint(train, cal));
  CHECK(disjoint(train, test));
  CHECK(disjoint(val, cal));
  CHECK(disjoint(val, test));
  CHECK(disjoint(cal, test));
}

TEST_CASE("scaler is insensitive to test-range values") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::exchangeable_gaussian;
  spec.seed = 2;
  SeriesFrame f = generate(spec, 300).frame;
  WindowSet before = make_windows(f, 8, 4, {"y"});
  f.at(299, 0) += 1000.0;  // deep inside the test range
  WindowSet after = make_windows(f, 8, 4, {"y"});
  CHECK(before.scaler.mean[0] == after.scaler.mean[0]);
  CHECK(before.scaler.stddev[0] == after.scaler.stddev[0]);
}

TEST_CASE("bias synthetic: matched backbone residual equals the bias exactly") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::bias;
  spec.params["bias"] = 0.05;
  spec.params["period"] = 12;
  spec.params["noise"] = 0.0;
  SyntheticData data = generate(spec, 240);
  CHECK(data.truth.at("bias") == 0.05);
  // exact periodicity: x_{t+12} == x_t bit for bit
  for (std::size_t t = 0; t + 12 < 240; ++t) {
    CHECK(data.frame.at(t, 0) == data.frame.at(t + 12, 0));
  }
}

TEST_CASE("exchangeable gaussian sample std obeys the law of large numbers") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::exchangeable_gaussian;
  spec.seed = 123;
  SeriesFrame f = generate(spec, 100000).frame;
  double mu = 0.0;
  for (std::size_t t = 0; t < f.T(); ++t) mu += f.at(t, 0);
  mu /= static_cast<double>(f.T());
  double var = 0.0;
  for (std::size_t t = 0; t < f.T(); ++t) {
    double e = f.at(t, 0) - mu;
    var += e * e;
  }
  var /= static_cast<double>(f.T());
  CHECK(std::sqrt(var) > 0.99);
  CHECK(std::sqrt(var) < 1.01);
}

TEST_CASE("planted features synthetic: planted columns carry the signal") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::planted_features;
  spec.seed = 5;
  SyntheticData data = generate(spec, 3000);
  REQUIRE(data.planted_columns == std::vector<std::size_t>{2, 5});
  // one-step-ahead regression oracle: correlation of y_{t+1} with col j at t
  auto corr_with_next_y = [&](std::size_t j) {
    double num = 0.0, dx = 0.0, dy = 0.0;
    for (std::size_t t = 0; t + 1 < data.frame.T(); ++t) {
      double a = data.frame.at(t, j);
      double b = data.frame.at(t + 1, 0);
      num += a * b;
      dx += a * a;
      dy += b * b;
    }
    return std::fabs(num / std::sqrt(dx * dy));
  };
  CHECK(corr_with_next_y(2) > 0.5);
  CHECK(corr_with_next_y(5) > 0.4);
  CHECK(corr_with_next_y(7) < 0.1);
}

TEST_SUITE_END();
