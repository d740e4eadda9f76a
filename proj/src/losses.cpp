#include "h3d/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace h3d {

void LossConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("loss.alpha must lie in (0, 1)");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("loss.gamma must be >= 0");
  if (!(beta_dir > 0.0) || !std::isfinite(beta_dir)) throw std::invalid_argument("loss.beta_dir must be > 0");
  if (!(prob_floor > 0.0 && prob_floor <= 1e-3)) throw std::invalid_argument("loss.prob_floor must lie in (0, 1e-3]");
}

namespace {

void require_positive(const LossSample& s) {
  if (!s.p_gt) throw std::invalid_argument("harmonic/baseline loss is defined for positive samples only");
}

// gamma * u^(gamma-1), with the u == 0 limit taken explicitly.
double pow_derivative(double u, double gamma) {
  if (gamma == 0.0) return 0.0;
  if (u == 0.0) return gamma == 1.0 ? 1.0 : (gamma > 1.0 ? 0.0 : INFINITY);
  return gamma * std::pow(u, gamma - 1.0);
}

}  // namespace

double focal_loss(double p, const LossConfig& cfg) {
  const double pc = std::clamp(p, cfg.prob_floor, 1.0);
  return -cfg.alpha * std::pow(1.0 - pc, cfg.gamma) * std::log(pc);
}

double focal_loss_grad(double p, const LossConfig& cfg) {
  const double pc = std::clamp(p, cfg.prob_floor, 1.0);
  const double u = 1.0 - pc;
  const double log_p = std::log(pc);
  const double first = log_p == 0.0 ? 0.0 : pow_derivative(u, cfg.gamma) * log_p;
  return cfg.alpha * first - cfg.alpha * std::pow(u, cfg.gamma) / pc;
}

double focal_loss_negative(double p, const LossConfig& cfg) {
  const double q = std::max(1.0 - std::clamp(p, 0.0, 1.0), cfg.prob_floor);
  const double pc = 1.0 - q;
  return -(1.0 - cfg.alpha) * std::pow(pc, cfg.gamma) * std::log(q);
}

double focal_loss_negative_grad(double p, const LossConfig& cfg) {
  const double q = std::max(1.0 - std::clamp(p, 0.0, 1.0), cfg.prob_floor);
  const double pc = 1.0 - q;
  const double log_q = std::log(q);
  const double first = log_q == 0.0 ? 0.0 : pow_derivative(pc, cfg.gamma) * log_q;
  return -(1.0 - cfg.alpha) * (first - std::pow(pc, cfg.gamma) / q);
}

double smooth_l1(double d, const LossConfig& cfg) {
  const double a = std::abs(d);
  if (a >= 1.0) return a - 0.5;
  return cfg.smoothl1_form == SmoothL1Form::Quadratic ? 0.5 * d * d : 0.5 * a;
}

double smooth_l1_grad(double d, const LossConfig& cfg) {
  const double a = std::abs(d);
  const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  if (a >= 1.0) return sign;
  return cfg.smoothl1_form == SmoothL1Form::Quadratic ? d : 0.5 * sign;
}

double reg_loss(const BoxDelta& delta, const LossConfig& cfg) {
  double acc = 0.0;
  for (int k = 0; k < BoxDelta::kSize; ++k) acc += smooth_l1(delta[k], cfg);
  return acc;
}

std::array<double, BoxDelta::kSize> reg_loss_grad(const BoxDelta& delta, const LossConfig& cfg) {
  std::array<double, BoxDelta::kSize> g{};
  for (int k = 0; k < BoxDelta::kSize; ++k) g[k] = smooth_l1_grad(delta[k], cfg);
  return g;
}

// Only the log that carries the label is evaluated, so p' == label gives an
// exact zero instead of -log(1 - floor).
double dir_loss(double p_dir, bool p_dir_gt, const LossConfig& cfg) {
  const double pc = std::clamp(p_dir, 0.0, 1.0);
  if (p_dir_gt) return -std::log(std::max(pc, cfg.prob_floor));
  return -std::log(std::max(1.0 - pc, cfg.prob_floor));
}

double dir_loss_grad(double p_dir, bool p_dir_gt, const LossConfig& cfg) {
  const double pc = std::clamp(p_dir, 0.0, 1.0);
  if (p_dir_gt) return -1.0 / std::max(pc, cfg.prob_floor);
  return 1.0 / std::max(1.0 - pc, cfg.prob_floor);
}

LossTerms loss_terms(const LossSample& s, const LossConfig& cfg) {
  return {focal_loss(s.p, cfg), reg_loss(s.delta, cfg), dir_loss(s.p_dir, s.p_dir_gt, cfg)};
}

BaselineResult baseline_loss(const LossSample& s, const LossConfig& cfg) {
  require_positive(s);
  BaselineResult r;
  r.terms = loss_terms(s, cfg);
  r.total = r.terms.l_cls + r.terms.l_reg + r.terms.l_dir;
  return r;
}

HarmonicWeights harmonic_weights(const LossTerms& t, const LossConfig& cfg) {
  HarmonicWeights w;
  w.beta_r = std::exp(-t.l_reg);
  w.beta_c = std::exp(-t.l_cls);
  w.w_cls = 1.0 + w.beta_r;
  w.w_reg = 1.0 + w.beta_c;
  w.w_dir = 1.0 - (w.beta_r + w.beta_c) / cfg.beta_dir;
  return w;
}

double harmonic_total(const LossTerms& t, const LossConfig& cfg) {
  const HarmonicWeights w = harmonic_weights(t, cfg);
  return w.w_cls * t.l_cls + w.w_reg * t.l_reg + w.w_dir * t.l_dir;
}

HarmonicResult harmonic_loss(const LossSample& s, const LossConfig& cfg) {
  require_positive(s);
  HarmonicResult r;
  r.terms = loss_terms(s, cfg);
  r.weights = harmonic_weights(r.terms, cfg);
  r.total = r.weights.w_cls * r.terms.l_cls + r.weights.w_reg * r.terms.l_reg + r.weights.w_dir * r.terms.l_dir;
  return r;
}

ComponentGrads component_grads(const LossSample& s, const LossConfig& cfg) {
  return {focal_loss_grad(s.p, cfg), reg_loss_grad(s.delta, cfg), dir_loss_grad(s.p_dir, s.p_dir_gt, cfg)};
}

GradRecord harmonic_chain(const LossTerms& t, const ComponentGrads& g, const LossConfig& cfg) {
  const HarmonicWeights w = harmonic_weights(t, cfg);
  GradRecord r;
  r.loss = w.w_cls * t.l_cls + w.w_reg * t.l_reg + w.w_dir * t.l_dir;

  // d beta_c / dp = -beta_c * dL_cls/dp; beta_c enters through w_reg and w_dir.
  const double dbeta_c = -w.beta_c * g.dcls_dp;
  r.d_p = w.w_cls * g.dcls_dp + (t.l_reg - t.l_dir / cfg.beta_dir) * dbeta_c;

  // Likewise beta_r enters through w_cls and w_dir.
  const double cls_coupling = t.l_cls - t.l_dir / cfg.beta_dir;
  for (int k = 0; k < BoxDelta::kSize; ++k) {
    const double dbeta_r = -w.beta_r * g.dreg_ddelta[k];
    r.d_delta[k] = w.w_reg * g.dreg_ddelta[k] + cls_coupling * dbeta_r;
  }

  r.d_pdir = w.w_dir * g.ddir_dpdir;
  return r;
}

GradRecord baseline_grads(const LossSample& s, const LossConfig& cfg) {
  require_positive(s);
  const LossTerms t = loss_terms(s, cfg);
  const ComponentGrads g = component_grads(s, cfg);
  GradRecord r;
  r.loss = t.l_cls + t.l_reg + t.l_dir;
  r.d_p = g.dcls_dp;
  r.d_delta = g.dreg_ddelta;
  r.d_pdir = g.ddir_dpdir;
  return r;
}

GradRecord harmonic_grads(const LossSample& s, const LossConfig& cfg) {
  require_positive(s);
  return harmonic_chain(loss_terms(s, cfg), component_grads(s, cfg), cfg);
}

double sample_loss(LossKind kind, const LossSample& s, const LossConfig& cfg) {
  return kind == LossKind::Baseline ? baseline_loss(s, cfg).total : harmonic_loss(s, cfg).total;
}

GradRecord sample_grads(LossKind kind, const LossSample& s, const LossConfig& cfg) {
  return kind == LossKind::Baseline ? baseline_grads(s, cfg) : harmonic_grads(s, cfg);
}

const char* to_string(LossKind kind) { return kind == LossKind::Baseline ? "baseline" : "harmonic"; }

LossKind parse_loss_kind(const std::string& s) {
  if (s == "baseline") return LossKind::Baseline;
  if (s == "harmonic") return LossKind::Harmonic;
  throw std::invalid_argument("unknown loss kind '" + s + "' (expected baseline|harmonic)");
}

const char* to_string(SmoothL1Form form) { return form == SmoothL1Form::Quadratic ? "quadratic" : "as-printed"; }

SmoothL1Form parse_smoothl1_form(const std::string& s) {
  if (s == "quadratic") return SmoothL1Form::Quadratic;
  if (s == "as-printed") return SmoothL1Form::AsPrinted;
  throw std::invalid_argument("unknown smoothl1 form '" + s + "' (expected quadratic|as-printed)");
}

}  // namespace h3d
