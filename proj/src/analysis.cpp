#include "h3d/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include "json.hpp"

namespace h3d {

double get_coord(const LossSample& s, Coord c) {
  const int i = static_cast<int>(c);
  if (i == 0) return s.p;
  if (i == 8) return s.p_dir;
  return s.delta[i - 1];
}

void set_coord(LossSample& s, Coord c, double v) {
  const int i = static_cast<int>(c);
  if (i == 0) {
    s.p = v;
  } else if (i == 8) {
    s.p_dir = v;
  } else {
    s.delta[i - 1] = v;
  }
}

std::string coord_name(Coord c) {
  static constexpr std::array<const char*, kNumCoords> names{"p", "dx", "dy", "dz", "dw", "dl", "dh", "dtheta", "p_dir"};
  return names[static_cast<int>(c)];
}

Interval coord_domain(Coord c, const LossConfig& cfg) {
  if (c == Coord::P) return {cfg.prob_floor, 1.0};
  if (c == Coord::PDir) return {cfg.prob_floor, 1.0 - cfg.prob_floor};
  return {};
}

namespace {

enum class Stencil { Central, Forward, Backward };

Stencil pick_stencil(double x, double h, const Interval& domain) {
  if (x - h >= domain.lo && x + h <= domain.hi) return Stencil::Central;
  if (x + 2.0 * h <= domain.hi) return Stencil::Forward;
  if (x - 2.0 * h >= domain.lo) return Stencil::Backward;
  throw std::invalid_argument("finite_diff: domain is narrower than the stencil");
}

FdResult apply_stencil(const SampleFn& f, const LossSample& s, Coord c, double h, Stencil st) {
  const double x = get_coord(s, c);
  auto at = [&](double v) {
    LossSample t = s;
    set_coord(t, c, v);
    return f(t);
  };
  switch (st) {
    case Stencil::Central: return {(at(x + h) - at(x - h)) / (2.0 * h), false};
    case Stencil::Forward: return {(-3.0 * at(x) + 4.0 * at(x + h) - at(x + 2.0 * h)) / (2.0 * h), true};
    case Stencil::Backward: return {(3.0 * at(x) - 4.0 * at(x - h) + at(x - 2.0 * h)) / (2.0 * h), true};
  }
  return {};
}

void check_step(double h) {
  if (!(h >= 1e-8 && h <= 1e-3)) throw std::invalid_argument("finite_diff: step must lie in [1e-8, 1e-3]");
}

}  // namespace

FdResult finite_diff(const SampleFn& f, const LossSample& s, Coord c, double h, const Interval& domain) {
  check_step(h);
  return apply_stencil(f, s, c, h, pick_stencil(get_coord(s, c), h, domain));
}

FdResult finite_diff(const SampleFn& f, const LossSample& s, Coord c, double h, const LossConfig& cfg) {
  return finite_diff(f, s, c, h, coord_domain(c, cfg));
}

namespace {

constexpr double kMaxStep = 1e-3;
constexpr double kMinStep = 1e-8;

struct StepChoice {
  double h = kMaxStep;
  Interval domain;
};

// Picks a step that keeps the stencil inside one smooth piece of the loss:
// away from the log singularities of the probabilities and off the SmoothL1
// breakpoints.
StepChoice choose_step(const LossSample& s, Coord c, const LossConfig& cfg) {
  StepChoice sc;
  const double x = get_coord(s, c);
  if (c == Coord::P) {
    sc.domain = coord_domain(c, cfg);
    sc.h = std::min(kMaxStep, 0.002 * (x - cfg.prob_floor));
    if (x + sc.h > sc.domain.hi) sc.h = std::min(sc.h, 2e-4);
  } else if (c == Coord::PDir) {
    sc.domain = coord_domain(c, cfg);
    sc.h = std::min({kMaxStep, 0.002 * (x - sc.domain.lo), 0.002 * (sc.domain.hi - x)});
  } else {
    std::vector<double> breaks{-1.0, 1.0};
    if (cfg.smoothl1_form == SmoothL1Form::AsPrinted) breaks.push_back(0.0);
    std::sort(breaks.begin(), breaks.end());
    double dist = std::numeric_limits<double>::infinity();
    for (double b : breaks) {
      dist = std::min(dist, std::abs(x - b));
      if (b <= x) sc.domain.lo = b;
    }
    for (auto it = breaks.rbegin(); it != breaks.rend(); ++it) {
      if (*it > x) sc.domain.hi = *it;
    }
    sc.h = std::min(kMaxStep, 0.25 * dist);
  }
  sc.h = std::max(sc.h, kMinStep);
  return sc;
}

// Richardson extrapolation of two stencils of the same shape: cancels the
// leading h^2 term. Mixing a central and a one-sided stencil would not.
FdResult richardson(const SampleFn& f, const LossSample& s, Coord c, const StepChoice& sc) {
  const double h = std::max(sc.h, 2.0 * kMinStep);
  check_step(h);
  const Stencil st = pick_stencil(get_coord(s, c), h, sc.domain);
  const FdResult coarse = apply_stencil(f, s, c, h, st);
  const FdResult fine = apply_stencil(f, s, c, h / 2.0, st);
  return {(4.0 * fine.value - coarse.value) / 3.0, coarse.shifted};
}

double grad_component(const GradRecord& g, Coord c) {
  const int i = static_cast<int>(c);
  if (i == 0) return g.d_p;
  if (i == 8) return g.d_pdir;
  return g.d_delta[i - 1];
}

constexpr std::size_t kWorstKept = 5;

void record_offender(GradcheckReport& report, const GradcheckOffender& o) {
  if (report.worst.size() >= kWorstKept && o.ratio <= report.worst.back().ratio) return;
  report.worst.push_back(o);
  std::stable_sort(report.worst.begin(), report.worst.end(),
                   [](const auto& a, const auto& b) { return a.ratio > b.ratio; });
  if (report.worst.size() > kWorstKept) report.worst.resize(kWorstKept);
}

}  // namespace

void gradcheck_sample(const LossSample& s, LossKind kind, const LossConfig& cfg, std::uint64_t index,
                      GradcheckReport& report) {
  const GradRecord g = sample_grads(kind, s, cfg);
  const SampleFn f = [&](const LossSample& t) { return sample_loss(kind, t, cfg); };
  const double near_zero = report.tol_abs / report.tol_rel;

  for (int ci = 0; ci < kNumCoords; ++ci) {
    const Coord c = static_cast<Coord>(ci);
    const FdResult fd = richardson(f, s, c, choose_step(s, c, cfg));
    const double a = grad_component(g, c);
    const double err = std::abs(a - fd.value);
    const double scale = std::max(std::abs(a), std::abs(fd.value));

    GradcheckOffender o{index, kind, cfg.smoothl1_form, s.p_dir_gt, c, a, fd.value, err, 0.0, 0.0};
    if (scale >= near_zero) {
      o.rel_err = err / scale;
      o.ratio = o.rel_err / report.tol_rel;
      report.max_rel_err = std::max(report.max_rel_err, o.rel_err);
    } else {
      o.ratio = err / report.tol_abs;
      report.max_abs_err = std::max(report.max_abs_err, err);
    }
    const bool ok = o.ratio < 1.0;
    ++report.checks;
    if (fd.shifted) ++report.shifted;
    if (!ok) ++report.failures;
    record_offender(report, o);
  }
}

GradcheckReport gradcheck(std::uint64_t n, double tol_rel, std::uint64_t seed, double tol_abs, const LossConfig& base) {
  if (n == 0) throw std::invalid_argument("gradcheck: n must be >= 1");
  if (!(tol_rel > 0.0) || !(tol_abs > 0.0)) throw std::invalid_argument("gradcheck: tolerances must be positive");
  base.validate();

  GradcheckReport report;
  report.tol_rel = tol_rel;
  report.tol_abs = tol_abs;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> prob(base.prob_floor, 1.0 - base.prob_floor);
  std::uniform_real_distribution<double> resid(-3.0, 3.0);

  for (std::uint64_t i = 0; i < n; ++i) {
    LossSample s;
    s.p = prob(rng);
    s.p_dir = prob(rng);
    for (int k = 0; k < BoxDelta::kSize; ++k) s.delta[k] = resid(rng);
    ++report.samples;
    for (SmoothL1Form form : {SmoothL1Form::Quadratic, SmoothL1Form::AsPrinted}) {
      LossConfig cfg = base;
      cfg.smoothl1_form = form;
      for (bool dir_gt : {false, true}) {
        s.p_dir_gt = dir_gt;
        for (LossKind kind : {LossKind::Baseline, LossKind::Harmonic}) gradcheck_sample(s, kind, cfg, i, report);
      }
    }
  }
  return report;
}

std::string format_report(const GradcheckReport& r) {
  std::string out;
  out += fmt::format("samples      {}\n", r.samples);
  out += fmt::format("checks       {}\n", r.checks);
  out += fmt::format("failures     {}\n", r.failures);
  out += fmt::format("shifted      {}\n", r.shifted);
  out += fmt::format("max_rel_err  {:.6g} (tol {:.6g})\n", r.max_rel_err, r.tol_rel);
  out += fmt::format("max_abs_err  {:.6g} (tol {:.6g}, near-zero partials)\n", r.max_abs_err, r.tol_abs);
  out += "worst:\n";
  for (const auto& o : r.worst) {
    out += fmt::format("  sample={} loss={} smoothl1={} dir_gt={} coord={} analytic={:.10g} numeric={:.10g} "
                       "abs_err={:.3g} rel_err={:.3g}\n",
                       o.sample, to_string(o.kind), to_string(o.form), o.dir_gt ? 1 : 0, coord_name(o.coord),
                       o.analytic, o.numeric, o.abs_err, o.rel_err);
  }
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(Partial p) {
  switch (p) {
    case Partial::Cls: return "cls";
    case Partial::Reg: return "reg";
    case Partial::Dir: return "dir";
  }
  return "?";
}

Partial parse_partial(const std::string& s) {
  if (s == "cls") return Partial::Cls;
  if (s == "reg") return Partial::Reg;
  if (s == "dir") return Partial::Dir;
  throw std::invalid_argument("unknown partial '" + s + "' (expected cls|reg|dir)");
}

GradFieldSpec GradFieldSpec::defaults(Partial which, LossKind kind) {
  GradFieldSpec spec;
  spec.which = which;
  spec.loss_kind = kind;
  const AxisRange prob{0.01, 1.0};
  const AxisRange loss{0.0, 4.0};
  spec.axes = {which == Partial::Reg ? loss : prob, loss, loss};
  return spec;
}

void GradFieldSpec::validate() const {
  if (resolution < 2) throw std::invalid_argument("gradfield: resolution must be >= 2");
  for (const auto& a : axes) {
    if (!(a.hi > a.lo) || !std::isfinite(a.lo) || !std::isfinite(a.hi))
      throw std::invalid_argument("gradfield: axis ranges must be finite and nonempty");
  }
  if ((which == Partial::Cls || which == Partial::Dir) && (axes[0].lo < 0.0 || axes[0].hi > 1.0))
    throw std::invalid_argument("gradfield: probability axis must lie in [0, 1]");
  if (axes[1].lo < 0.0 || axes[2].lo < 0.0) throw std::invalid_argument("gradfield: loss axes must be nonnegative");
  cfg.validate();
}

std::vector<double> axis_values(const AxisRange& r, int resolution) {
  std::vector<double> v(static_cast<std::size_t>(resolution));
  const double step = (r.hi - r.lo) / (resolution - 1);
  for (int i = 0; i < resolution; ++i) v[i] = r.lo + i * step;
  v.back() = r.hi;
  return v;
}

double field_partial(const GradFieldSpec& spec, double a1, double a2, double a3) {
  const LossConfig& cfg = spec.cfg;
  const bool harmonic = spec.loss_kind == LossKind::Harmonic;
  LossTerms t;
  ComponentGrads g;
  switch (spec.which) {
    case Partial::Cls: {
      g.dcls_dp = focal_loss_grad(a1, cfg);
      if (!harmonic) return g.dcls_dp;
      t = {focal_loss(a1, cfg), a2, a3};
      return harmonic_chain(t, g, cfg).d_p;
    }
    case Partial::Reg: {
      // The residual sits on the first channel, the others are zero.
      g.dreg_ddelta[0] = smooth_l1_grad(a1, cfg);
      if (!harmonic) return g.dreg_ddelta[0];
      t = {a2, smooth_l1(a1, cfg), a3};
      return harmonic_chain(t, g, cfg).d_delta[0];
    }
    case Partial::Dir: {
      g.ddir_dpdir = dir_loss_grad(a1, spec.dir_gt, cfg);
      if (!harmonic) return g.ddir_dpdir;
      t = {a2, a3, dir_loss(a1, spec.dir_gt, cfg)};
      return harmonic_chain(t, g, cfg).d_pdir;
    }
  }
  return 0.0;
}

std::vector<GradFieldSample> sample_grad_field(const GradFieldSpec& spec) {
  spec.validate();
  const std::size_t r = static_cast<std::size_t>(spec.resolution);
  const std::size_t total = r * r * r;
  if (total > spec.max_samples) {
    throw std::length_error(
        fmt::format("gradfield: {}^3 = {} samples exceeds the cap of {}", spec.resolution, total, spec.max_samples));
  }
  const auto v1 = axis_values(spec.axes[0], spec.resolution);
  const auto v2 = axis_values(spec.axes[1], spec.resolution);
  const auto v3 = axis_values(spec.axes[2], spec.resolution);

  std::vector<GradFieldSample> out;
  out.reserve(total);
  for (double a : v1) {
    for (double b : v2) {
      for (double c : v3) out.push_back({{a, b, c}, field_partial(spec, a, b, c)});
    }
  }
  return out;
}

std::vector<std::array<double, 3>> find_stationary_points(const std::vector<GradFieldSample>& field, double tol_abs) {
  if (field.empty()) throw std::invalid_argument("find_stationary_points: empty field");
  std::vector<std::array<double, 3>> out;
  for (const auto& s : field) {
    if (std::abs(s.grad) < tol_abs) out.push_back(s.coord);
  }
  return out;
}

void write_field_csv(std::ostream& os, const std::vector<GradFieldSample>& field) {
  os << "axis1,axis2,axis3,grad\n";
  for (const auto& s : field) os << fmt::format("{},{},{},{}\n", s.coord[0], s.coord[1], s.coord[2], s.grad);
}

std::string field_spec_json(const GradFieldSpec& spec) {
  static const std::array<std::array<const char*, 3>, 3> axis_names{{
      {"p", "l_reg", "l_dir"},
      {"residual", "l_cls", "l_dir"},
      {"p_dir", "l_cls", "l_reg"},
  }};
  nlohmann::json j;
  j["partial"] = to_string(spec.which);
  j["loss"] = to_string(spec.loss_kind);
  j["resolution"] = spec.resolution;
  j["dir_gt"] = spec.dir_gt ? 1 : 0;
  j["max_samples"] = spec.max_samples;
  nlohmann::json axes = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    axes.push_back({{"name", axis_names[static_cast<int>(spec.which)][i]},
                    {"lo", spec.axes[i].lo},
                    {"hi", spec.axes[i].hi}});
  }
  j["axes"] = axes;
  j["loss_config"] = {{"alpha", spec.cfg.alpha},
                      {"gamma", spec.cfg.gamma},
                      {"beta_dir", spec.cfg.beta_dir},
                      {"smoothl1_form", to_string(spec.cfg.smoothl1_form)},
                      {"prob_floor", spec.cfg.prob_floor}};
  return j.dump(2) + "\n";
}

}  // namespace h3d
