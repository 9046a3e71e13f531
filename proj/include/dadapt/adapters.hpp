#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dadapt/forecaster.hpp"
#include "dadapt/mlp.hpp"
#include "dadapt/tensor.hpp"

namespace dadapt {

enum class Placement { input, output };
enum class EditForm { additive, multiplicative, exponential };

Placement placement_from_string(const std::string& s);
std::string placement_to_string(Placement p);
EditForm edit_form_from_string(const std::string& s);
std::string edit_form_to_string(EditForm f);

struct UndefinedStepError : Error {
  using Error::Error;
};

// per-covariate mean and last row of X: the 2d-dim context summary shared
// by the output adapter and the calibrator nets
Tensor pooled_context(const Tensor& X);

struct AdapterConfig {
  Placement placement = Placement::output;
  EditForm form = EditForm::additive;
  double delta = 0.1;  // trust region, (0, 1]
  std::size_t hidden_width = 128;
  std::size_t depth = 2;
  std::size_t horizon_embed_dim = 8;  // output placement; 0 disables
};

// Bounded edit network. The raw edit always passes through tanh, so every
// entry lies in [-1, 1] and delta caps the per-entry change. The final
// layer is zero-initialized: before training the adapted system IS the
// frozen system.
class AdapterNet {
 public:
  AdapterNet() = default;
  AdapterNet(const AdapterConfig& cfg, std::size_t L, std::size_t d,
             std::size_t H, std::size_t m, std::uint64_t seed);

  // tanh-bounded A(.): input placement -> L x d, output placement -> H x m
  Tensor raw_edit_input(const Tensor& X) const;
  Tensor raw_edit_output(const Tensor& Yhat, const Tensor& X) const;

  std::vector<Tensor> parameters() const;
  const AdapterConfig& config() const { return cfg_; }
  double delta() const { return cfg_.delta; }
  std::size_t L() const { return L_; }
  std::size_t d() const { return d_; }
  std::size_t H() const { return H_; }
  std::size_t m() const { return m_; }

  std::vector<std::vector<double>> export_params() const;
  void import_params(const std::vector<std::vector<double>>& arrays);

 private:
  AdapterConfig cfg_;
  std::size_t L_ = 0, d_ = 0, H_ = 0, m_ = 0;
  Mlp trunk_;
  LinearHead horizon_head_;   // output placement
  Tensor horizon_embedding_;  // H x e
};

struct EditRecord {
  Placement placement = Placement::input;
  EditForm form = EditForm::additive;
  double delta = 0.0;
  Tensor raw_edit;  // tanh-bounded A output
  Tensor pre;       // X or Yhat
  Tensor post;      // X~ or Y~
  // output placement: ||post - pre||_2 at creation.
  // input placement: the prediction drift ||F(post) - F(pre)||_2, filled by
  // measure_prediction_drift (NaN until then).
  double drift_norm = 0.0;
};

struct CompositeAdapter {
  AdapterNet input_adapter;
  AdapterNet output_adapter;
  // optional per-horizon blend of the realized input step and the output
  // edit; disabled (plain composition) by default
  std::optional<Tensor> gate_logits;  // H

  static CompositeAdapter make(const AdapterConfig& input_cfg,
                               const AdapterConfig& output_cfg, std::size_t L,
                               std::size_t d, std::size_t H, std::size_t m,
                               std::uint64_t seed, bool with_gate = false);
};

std::pair<Tensor, EditRecord> nudge_input(const AdapterNet& net, const Tensor& X);
std::pair<Tensor, EditRecord> correct_output(const AdapterNet& net, const Tensor& Yhat,
                                             const Tensor& X);

struct CompositeResult {
  Tensor prediction;
  EditRecord input_record;
  EditRecord output_record;
};

CompositeResult apply_composite(const CompositeAdapter& c, const ForecasterSpec& spec,
                                const Tensor& X);

// runs F on record.pre / record.post (off-tape) and fills drift_norm
void measure_prediction_drift(const ForecasterSpec& spec, EditRecord& record);

struct OptimalDelta {
  double delta = 0.0;
  bool no_improvement = false;  // E<r,g> <= 0: Prop-style hypothesis fails
};

// empirical delta* = mean<r_i,g_i> / mean||g_i||^2 over a dataset of
// residual/correction pairs (flattened)
OptimalDelta optimal_delta_closed_form(const std::vector<std::vector<double>>& residuals,
                                       const std::vector<std::vector<double>>& corrections);

struct DriftCheck {
  bool holds = false;
  double lhs = 0.0;      // measured prediction drift
  double rhs = 0.0;      // form-specific bound using ||A||
  double rhs_cap = 0.0;  // coarse bound using sqrt(L*d)
};

DriftCheck drift_bound_check(const EditRecord& record, double lipschitz,
                             std::size_t L, std::size_t d);

// ---- checkpoint I/O ----

std::string adapter_to_json(const AdapterNet& net);
AdapterNet adapter_from_json(const std::string& text);
void save_adapter(const AdapterNet& net, const std::string& path);
AdapterNet load_adapter(const std::string& path);

std::string composite_to_json(const CompositeAdapter& c);
CompositeAdapter composite_from_json(const std::string& text);
void save_composite(const CompositeAdapter& c, const std::string& path);
CompositeAdapter load_composite(const std::string& path);

std::string adapter_checksum(const AdapterNet& net);

}  // namespace dadapt
