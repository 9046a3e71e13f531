#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dadapt/tensor.hpp"

namespace dadapt {

// T x d series with strictly increasing timestamps; rows containing NaN are
// rejected at ingestion.
struct SeriesFrame {
  std::vector<std::int64_t> timestamps;  // epoch seconds
  std::vector<std::string> columns;
  std::vector<double> values;  // row-major T x d
  std::string frequency;

  std::size_t T() const { return timestamps.size(); }
  std::size_t d() const { return columns.size(); }
  double at(std::size_t t, std::size_t j) const { return values[t * d() + j]; }
  double& at(std::size_t t, std::size_t j) { return values[t * d() + j]; }
  std::size_t column_index(const std::string& name) const;
};

SeriesFrame load_csv(const std::string& path);
void write_csv(const SeriesFrame& frame, const std::string& path);

struct Scaler {
  std::vector<double> mean;
  std::vector<double> stddev;
  bool identity = false;

  double apply(double x, std::size_t col) const {
    return identity ? x : (x - mean[col]) / stddev[col];
  }
  double invert(double z, std::size_t col) const {
    return identity ? z : z * stddev[col] + mean[col];
  }
};

struct Window {
  Tensor X;  // L x d, standardized
  Tensor Y;  // H x m, standardized
  std::size_t origin = 0;  // first raw row of X
};

struct SplitFractions {
  double train = 0.6;
  double val = 0.1;
  double cal = 0.1;
  double test = 0.2;
};

struct WindowSet {
  std::vector<Window> windows;  // chronological
  std::size_t L = 0, H = 0;
  std::vector<std::size_t> target_cols;
  Scaler scaler;

  struct Range {
    std::size_t begin = 0, end = 0;  // [begin, end) into `windows`
    std::size_t size() const { return end - begin; }
  };
  Range train, val, cal, test;

  std::span<const Window> slice(const Range& r) const {
    return std::span<const Window>(windows.data() + r.begin, r.size());
  }
  std::span<const Window> train_windows() const { return slice(train); }
  std::span<const Window> val_windows() const { return slice(val); }
  std::span<const Window> cal_windows() const { return slice(cal); }
  std::span<const Window> test_windows() const { return slice(test); }
};

// Sliding stride-1 windows. Raw rows are split chronologically by the given
// fractions; a window belongs to a split only if it lies entirely inside
// that split's row range, so the splits never share a raw observation.
// The scaler is fit on train-range rows only and applied everywhere.
WindowSet make_windows(const SeriesFrame& frame, std::size_t L, std::size_t H,
                       const std::vector<std::string>& targets,
                       SplitFractions splits = {}, bool standardize = true);

// ---- synthetic generators with analytic ground truth ----

enum class SyntheticKind {
  bias,
  ar_drift,
  regime_shift,
  planted_features,
  heteroscedastic,
  exchangeable_gaussian,
};

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::bias;
  std::uint64_t seed = 0;
  // numeric knobs; unknown keys ignored by each generator (see defaults in
  // synthetic_defaults)
  std::map<std::string, double> params;

  double get(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

struct SyntheticData {
  SeriesFrame frame;
  // analytic truth the oracles test against (bias value, shift time,
  // planted columns, regime sigmas, matched-backbone description, ...)
  std::map<std::string, double> truth;
  std::vector<std::size_t> planted_columns;  // planted_features only
};

SyntheticData generate(const SyntheticSpec& spec, std::size_t T);

SyntheticKind synthetic_kind_from_string(const std::string& name);
std::string synthetic_kind_to_string(SyntheticKind kind);

}  // namespace dadapt
