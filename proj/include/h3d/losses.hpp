#pragma once

#include <array>
#include <string>

#include "h3d/geometry.hpp"

namespace h3d {

enum class SmoothL1Form {
  Quadratic,  // 0.5 d^2 inside |d| < 1
  AsPrinted,  // 0.5 |d| inside |d| < 1
};

enum class LossKind { Baseline, Harmonic };

struct LossConfig {
  double alpha = 0.25;
  double gamma = 2.0;
  double beta_dir = 2.0;
  SmoothL1Form smoothl1_form = SmoothL1Form::Quadratic;
  double prob_floor = 1e-7;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// One positive training sample as seen by the loss.
struct LossSample {
  double p = 1.0;         // classification probability
  bool p_gt = true;       // class label
  BoxDelta delta;         // predicted offsets minus target offsets
  double p_dir = 1.0;     // direction probability
  bool p_dir_gt = true;   // direction label
};

struct LossTerms {
  double l_cls = 0.0;
  double l_reg = 0.0;
  double l_dir = 0.0;
};

struct HarmonicWeights {
  double beta_r = 1.0;
  double beta_c = 1.0;
  double w_cls = 2.0;
  double w_reg = 2.0;
  double w_dir = 0.0;
};

struct GradRecord {
  double loss = 0.0;
  double d_p = 0.0;
  std::array<double, BoxDelta::kSize> d_delta{};
  double d_pdir = 0.0;
};

// Component losses. Probabilities are floored at cfg.prob_floor before any
// log; the derivatives are evaluated at the floored value.

double focal_loss(double p, const LossConfig& cfg);
double focal_loss_grad(double p, const LossConfig& cfg);

/// -(1-alpha) p^gamma log(1-p), the negative-anchor complement.
double focal_loss_negative(double p, const LossConfig& cfg);
double focal_loss_negative_grad(double p, const LossConfig& cfg);

double smooth_l1(double d, const LossConfig& cfg);
double smooth_l1_grad(double d, const LossConfig& cfg);

double reg_loss(const BoxDelta& delta, const LossConfig& cfg);
std::array<double, BoxDelta::kSize> reg_loss_grad(const BoxDelta& delta, const LossConfig& cfg);

double dir_loss(double p_dir, bool p_dir_gt, const LossConfig& cfg);
double dir_loss_grad(double p_dir, bool p_dir_gt, const LossConfig& cfg);

LossTerms loss_terms(const LossSample& s, const LossConfig& cfg);

struct BaselineResult {
  LossTerms terms;
  double total = 0.0;
};

struct HarmonicResult {
  LossTerms terms;
  HarmonicWeights weights;
  double total = 0.0;
};

/// Unit-weight sum of the three sub-task losses.
BaselineResult baseline_loss(const LossSample& s, const LossConfig& cfg);

/// beta_r = exp(-l_reg), beta_c = exp(-l_cls); weights (1+beta_r, 1+beta_c, 1-(beta_r+beta_c)/beta_dir).
HarmonicWeights harmonic_weights(const LossTerms& t, const LossConfig& cfg);
double harmonic_total(const LossTerms& t, const LossConfig& cfg);
HarmonicResult harmonic_loss(const LossSample& s, const LossConfig& cfg);

/// Partials of the sub-task losses with respect to their own inputs.
struct ComponentGrads {
  double dcls_dp = 0.0;
  std::array<double, BoxDelta::kSize> dreg_ddelta{};
  double ddir_dpdir = 0.0;
};

ComponentGrads component_grads(const LossSample& s, const LossConfig& cfg);

/// Chain rule through the harmonic weights, given the component values and
/// their own partials. Each beta is differentiated, so the result is the
/// exact gradient of harmonic_total.
GradRecord harmonic_chain(const LossTerms& t, const ComponentGrads& g, const LossConfig& cfg);

GradRecord baseline_grads(const LossSample& s, const LossConfig& cfg);
GradRecord harmonic_grads(const LossSample& s, const LossConfig& cfg);

/// Dispatch helpers used by the trainer and the gradient checker.
double sample_loss(LossKind kind, const LossSample& s, const LossConfig& cfg);
GradRecord sample_grads(LossKind kind, const LossSample& s, const LossConfig& cfg);

const char* to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& s);
const char* to_string(SmoothL1Form form);
SmoothL1Form parse_smoothl1_form(const std::string& s);

}  // namespace h3d
