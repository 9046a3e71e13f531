#include "dadapt/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dadapt/rng.hpp"
#include "dadapt/serialize.hpp"

namespace dadapt {

namespace {

// days-from-civil (proleptic Gregorian), avoids timezone-dependent timegm
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool parse_timestamp(const std::string& cell, std::int64_t& out) {
  // plain integer epoch
  {
    char* end = nullptr;
    long long v = std::strtoll(cell.c_str(), &end, 10);
    if (end && *end == '\0' && end != cell.c_str()) {
      out = v;
      return true;
    }
  }
  // ISO-8601: YYYY-MM-DD[ T]HH:MM[:SS]
  int y, mo, d, h = 0, mi = 0, s = 0;
  int n = std::sscanf(cell.c_str(), "%d-%d-%d%*1[ T]%d:%d:%d", &y, &mo, &d, &h, &mi, &s);
  if (n >= 3) {
    out = days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
    return true;
  }
  return false;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

std::size_t SeriesFrame::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] == name) return j;
  }
  throw DataError("column not found: '" + name + "'");
}

SeriesFrame load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file: " + path);

  SeriesFrame frame;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  auto header = split_line(line);
  if (header.size() < 2) throw DataError("need a date column plus at least one covariate");
  frame.columns.assign(header.begin() + 1, header.end());

  const std::size_t d = frame.columns.size();
  std::size_t row = 0;
  std::size_t rejected = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != d + 1) {
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(d + 1) + " cells, got " +
                      std::to_string(cells.size()));
    }
    std::int64_t ts;
    if (!parse_timestamp(cells[0], ts)) {
      throw DataError("row " + std::to_string(row) + ": unparsable date '" + cells[0] + "'");
    }
    std::vector<double> vals(d);
    bool has_nan = false;
    for (std::size_t j = 0; j < d; ++j) {
      const std::string& c = cells[j + 1];
      if (c.empty()) {
        has_nan = true;
        continue;
      }
      char* end = nullptr;
      double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0') {
        throw DataError("row " + std::to_string(row) + ": unparsable cell '" + c + "'");
      }
      if (!std::isfinite(v)) {
        has_nan = true;
        continue;
      }
      vals[j] = v;
    }
    if (has_nan) {
      ++rejected;
      continue;
    }
    if (!frame.timestamps.empty() && ts <= frame.timestamps.back()) {
      throw DataError("timestamps not strictly increasing at row " +
                      std::to_string(row) + " (" + std::to_string(ts) +
                      " after " + std::to_string(frame.timestamps.back()) + ")");
    }
    frame.timestamps.push_back(ts);
    frame.values.insert(frame.values.end(), vals.begin(), vals.end());
  }
  if (rejected > 0) {
    std::fprintf(stderr, "load_csv: rejected %zu row(s) containing NaN/missing values\n",
                 rejected);
  }
  if (frame.T() == 0) throw DataError("no usable rows in " + path);
  return frame;
}

void write_csv(const SeriesFrame& frame, const std::string& path) {
  std::ostringstream os;
  os << "date";
  for (const auto& c : frame.columns) os << "," << c;
  os << "\n";
  for (std::size_t t = 0; t < frame.T(); ++t) {
    os << frame.timestamps[t];
    for (std::size_t j = 0; j < frame.d(); ++j) {
      os << "," << format_double(frame.at(t, j));
    }
    os << "\n";
  }
  write_text_file(path, os.str());
}

WindowSet make_windows(const SeriesFrame& frame, std::size_t L, std::size_t H,
                       const std::vector<std::string>& targets,
                       SplitFractions splits, bool standardize) {
  const std::size_t T = frame.T();
  const std::size_t d = frame.d();
  if (T < L + H) {
    throw DataError("series too short: T=" + std::to_string(T) +
                    ", need at least L+H=" + std::to_string(L + H));
  }
  double fsum = splits.train + splits.val + splits.cal + splits.test;
  if (std::fabs(fsum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1, got " + std::to_string(fsum));
  }
  if (targets.empty()) throw ConfigError("no target columns given");

  WindowSet ws;
  ws.L = L;
  ws.H = H;
  for (const auto& name : targets) ws.target_cols.push_back(frame.column_index(name));
  const std::size_t m = ws.target_cols.size();

  // chronological row boundaries
  const auto r1 = static_cast<std::size_t>(std::llround(splits.train * T));
  const auto r2 = r1 + static_cast<std::size_t>(std::llround(splits.val * T));
  const auto r3 = r2 + static_cast<std::size_t>(std::llround(splits.cal * T));

  // scaler from train rows only
  ws.scaler.identity = !standardize;
  ws.scaler.mean.assign(d, 0.0);
  ws.scaler.stddev.assign(d, 1.0);
  if (standardize) {
    const std::size_t n_train = std::max<std::size_t>(r1, 1);
    for (std::size_t j = 0; j < d; ++j) {
      double mu = 0.0;
      for (std::size_t t = 0; t < n_train; ++t) mu += frame.at(t, j);
      mu /= static_cast<double>(n_train);
      double var = 0.0;
      for (std::size_t t = 0; t < n_train; ++t) {
        double e = frame.at(t, j) - mu;
        var += e * e;
      }
      var /= static_cast<double>(n_train);
      ws.scaler.mean[j] = mu;
      ws.scaler.stddev[j] = std::max(std::sqrt(var), 1e-12);
    }
  }

  const std::size_t n_windows = T - L - H + 1;
  ws.windows.reserve(n_windows);
  for (std::size_t i = 0; i < n_windows; ++i) {
    std::vector<double> xv(L * d);
    for (std::size_t r = 0; r < L; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        xv[r * d + j] = ws.scaler.apply(frame.at(i + r, j), j);
      }
    }
    std::vector<double> yv(H * m);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t k = 0; k < m; ++k) {
        std::size_t j = ws.target_cols[k];
        yv[r * m + k] = ws.scaler.apply(frame.at(i + L + r, j), j);
      }
    }
    Window w;
    w.X = Tensor::from_values(std::move(xv), Shape{L, d});
    w.Y = Tensor::from_values(std::move(yv), Shape{H, m});
    w.origin = i;
    ws.windows.push_back(std::move(w));
  }

  // a window with origin i spans rows [i, i+L+H); it belongs to a split only
  // if that whole span is inside the split's rows
  const std::size_t span = L + H;
  auto clamp_range = [&](std::size_t row_begin, std::size_t row_end) {
    WindowSet::Range r;
    if (row_end < row_begin + span) {
      r.begin = r.end = std::min(row_begin, n_windows);
      return r;
    }
    r.begin = std::min(row_begin, n_windows);
    r.end = std::min(row_end - span + 1, n_windows);
    if (r.end < r.begin) r.end = r.begin;
    return r;
  };
  ws.train = clamp_range(0, r1);
  ws.val = clamp_range(r1, r2);
  ws.cal = clamp_range(r2, r3);
  ws.test = clamp_range(r3, T);
  return ws;
}

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "bias") return SyntheticKind::bias;
  if (name == "ar_drift") return SyntheticKind::ar_drift;
  if (name == "regime_shift") return SyntheticKind::regime_shift;
  if (name == "planted_features") return SyntheticKind::planted_features;
  if (name == "heteroscedastic") return SyntheticKind::heteroscedastic;
  if (name == "exchangeable_gaussian") return SyntheticKind::exchangeable_gaussian;
  throw ConfigError("unknown synthetic kind: '" + name + "'");
}

std::string synthetic_kind_to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::bias: return "bias";
    case SyntheticKind::ar_drift: return "ar_drift";
    case SyntheticKind::regime_shift: return "regime_shift";
    case SyntheticKind::planted_features: return "planted_features";
    case SyntheticKind::heteroscedastic: return "heteroscedastic";
    case SyntheticKind::exchangeable_gaussian: return "exchangeable_gaussian";
  }
  throw ConfigError("unknown synthetic kind");
}

namespace {

SeriesFrame empty_frame(std::vector<std::string> cols, std::size_t T) {
  SeriesFrame f;
  f.columns = std::move(cols);
  f.frequency = "synthetic";
  f.timestamps.resize(T);
  for (std::size_t t = 0; t < T; ++t) f.timestamps[t] = static_cast<std::int64_t>(t);
  f.values.assign(T * f.columns.size(), 0.0);
  return f;
}

// one exact period of a sine wave; indexing wave[t % p] keeps the series
// periodic to the last bit
std::vector<double> sine_period(std::size_t p, double amplitude) {
  std::vector<double> w(p);
  for (std::size_t i = 0; i < p; ++i) {
    w[i] = amplitude * std::sin(2.0 * 3.141592653589793 * static_cast<double>(i) /
                                static_cast<double>(p));
  }
  return w;
}

}  // namespace

SyntheticData generate(const SyntheticSpec& spec, std::size_t T) {
  if (T < 1) throw ConfigError("generate: T must be >= 1");
  Rng rng(spec.seed);
  SyntheticData out;

  switch (spec.kind) {
    case SyntheticKind::bias: {
      const auto p = static_cast<std::size_t>(spec.get("period", 24));
      const double amp = spec.get("amplitude", 1.0);
      const double b = spec.get("bias", 0.05);
      const double sigma = spec.get("noise", 0.0);
      auto wave = sine_period(p, amp);
      out.frame = empty_frame({"y"}, T);
      for (std::size_t t = 0; t < T; ++t) {
        double v = wave[t % p];
        if (sigma > 0) v += sigma * rng.gaussian();
        out.frame.at(t, 0) = v;
      }
      out.truth = {{"bias", b}, {"period", static_cast<double>(p)},
                   {"noise", sigma}, {"amplitude", amp}};
      break;
    }
    case SyntheticKind::ar_drift: {
      const double phi = spec.get("phi", 0.8);
      const double slope = spec.get("slope", 0.002);
      const double t0 = spec.get("t0_frac", 0.5) * static_cast<double>(T);
      const double sigma = spec.get("noise", 0.1);
      out.frame = empty_frame({"y"}, T);
      double x = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        double mu = slope * std::max(0.0, static_cast<double>(t) - t0);
        x = phi * x + (1.0 - phi) * mu + sigma * rng.gaussian();
        out.frame.at(t, 0) = x;
      }
      out.truth = {{"phi", phi}, {"slope", slope}, {"t0", t0}, {"noise", sigma}};
      break;
    }
    case SyntheticKind::regime_shift: {
      // iid around a level that jumps by `shift` at t0; pairs with a
      // constant backbone carrying a known bias
      const double level = spec.get("level", 0.0);
      const double shift = spec.get("shift", 0.05);
      const double backbone_bias = spec.get("backbone_bias", 0.03);
      const double t0_frac = spec.get("t0_frac", 0.75);
      const double sigma = spec.get("noise", 0.01);
      const auto t0 = static_cast<std::size_t>(t0_frac * static_cast<double>(T));
      out.frame = empty_frame({"y"}, T);
      for (std::size_t t = 0; t < T; ++t) {
        double v = level + (t >= t0 ? shift : 0.0) + sigma * rng.gaussian();
        out.frame.at(t, 0) = v;
      }
      out.truth = {{"level", level},       {"shift", shift},
                   {"t0", static_cast<double>(t0)}, {"noise", sigma},
                   {"backbone_bias", backbone_bias}};
      break;
    }
    case SyntheticKind::planted_features: {
      // y (col 0) is driven one step ahead by feature columns 2 and 5 only;
      // every feature is iid, so no other column (y's own lags included)
      // carries signal
      const std::size_t n_feat = 9;
      const double w2 = spec.get("w2", 1.0);
      const double w5 = spec.get("w5", -0.8);
      const double sigma_y = spec.get("noise", 0.1);
      std::vector<std::string> cols{"y"};
      for (std::size_t j = 1; j <= n_feat; ++j) cols.push_back("f" + std::to_string(j));
      out.frame = empty_frame(std::move(cols), T);
      std::vector<double> prev_feat(n_feat + 1, 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 1; j <= n_feat; ++j) out.frame.at(t, j) = rng.gaussian();
        double y = 0.0;
        if (t > 0) y = w2 * prev_feat[2] + w5 * prev_feat[5] + sigma_y * rng.gaussian();
        out.frame.at(t, 0) = y;
        for (std::size_t j = 1; j <= n_feat; ++j) prev_feat[j] = out.frame.at(t, j);
      }
      out.planted_columns = {2, 5};
      out.truth = {{"w2", w2}, {"w5", w5}, {"noise", sigma_y},
                   {"planted_count", 2.0}};
      break;
    }
    case SyntheticKind::heteroscedastic: {
      // y_{t+1} = a*x_t + sigma(flag_t)*eps; flag selects the noise regime
      const double a = spec.get("coeff", 1.0);
      const double s0 = spec.get("sigma0", 1.0);
      const double s1 = spec.get("sigma1", 3.0);
      out.frame = empty_frame({"y", "x", "flag"}, T);
      double prev_x = 0.0;
      double prev_flag = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        double y = 0.0;
        if (t > 0) {
          double s = prev_flag > 0.5 ? s1 : s0;
          y = a * prev_x + s * rng.gaussian();
        }
        double x = rng.gaussian();
        double flag = rng.uniform() < 0.5 ? 0.0 : 1.0;
        out.frame.at(t, 0) = y;
        out.frame.at(t, 1) = x;
        out.frame.at(t, 2) = flag;
        prev_x = x;
        prev_flag = flag;
      }
      out.truth = {{"coeff", a}, {"sigma0", s0}, {"sigma1", s1},
                   {"sigma_ratio", s1 / s0}};
      break;
    }
    case SyntheticKind::exchangeable_gaussian: {
      const double mu = spec.get("mu", 0.0);
      const double sigma = spec.get("sigma", 1.0);
      out.frame = empty_frame({"y"}, T);
      for (std::size_t t = 0; t < T; ++t) {
        out.frame.at(t, 0) = mu + sigma * rng.gaussian();
      }
      out.truth = {{"mu", mu}, {"sigma", sigma}};
      break;
    }
  }
  return out;
}

}  // namespace dadapt
