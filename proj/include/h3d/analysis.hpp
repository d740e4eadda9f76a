#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "h3d/losses.hpp"

namespace h3d {

/// Coordinates of a LossSample that a partial can be taken against:
/// 0 = p, 1..7 = delta components (BoxDelta order), 8 = p_dir.
enum class Coord : int { P = 0, PDir = 8 };
inline constexpr int kNumCoords = 9;
inline constexpr Coord delta_coord(int k) { return static_cast<Coord>(1 + k); }

double get_coord(const LossSample& s, Coord c);
void set_coord(LossSample& s, Coord c, double v);
std::string coord_name(Coord c);

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

/// The interval a coordinate may be probed in: probabilities stay inside the
/// clamp range, residuals are unbounded.
Interval coord_domain(Coord c, const LossConfig& cfg);

struct FdResult {
  double value = 0.0;
  bool shifted = false;  // the centered stencil left the domain
};

using SampleFn = std::function<double(const LossSample&)>;

/// Central difference (f(x+h) - f(x-h)) / 2h along one coordinate. When the
/// stencil would leave `domain` a second-order one-sided stencil is used
/// instead and the result is flagged. Requires h in [1e-8, 1e-3].
FdResult finite_diff(const SampleFn& f, const LossSample& s, Coord c, double h, const Interval& domain);
FdResult finite_diff(const SampleFn& f, const LossSample& s, Coord c, double h, const LossConfig& cfg);

struct GradcheckOffender {
  std::uint64_t sample = 0;
  LossKind kind = LossKind::Baseline;
  SmoothL1Form form = SmoothL1Form::Quadratic;
  bool dir_gt = false;
  Coord coord = Coord::P;
  double analytic = 0.0;
  double numeric = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  double ratio = 0.0;  // error over the tolerance of the test that applied
};

struct GradcheckReport {
  std::uint64_t samples = 0;
  std::uint64_t checks = 0;
  std::uint64_t failures = 0;
  std::uint64_t shifted = 0;
  double max_rel_err = 0.0;  // over partials with magnitude >= tol_abs / tol_rel
  double max_abs_err = 0.0;  // over the near-zero partials
  double tol_rel = 0.0;
  double tol_abs = 0.0;
  std::vector<GradcheckOffender> worst;  // largest tolerance ratios first
};

/// Draws n samples (p, p' ~ U(eps, 1-eps), residuals ~ U(-3, 3)) and checks
/// every partial of both losses, both SmoothL1 forms and both direction
/// labels against Richardson-extrapolated central differences.
GradcheckReport gradcheck(std::uint64_t n, double tol_rel, std::uint64_t seed, double tol_abs = 1e-9,
                          const LossConfig& base = {});

/// Checks one explicit sample under `kind` and `cfg`; appended into `report`.
void gradcheck_sample(const LossSample& s, LossKind kind, const LossConfig& cfg, std::uint64_t index,
                      GradcheckReport& report);

std::string format_report(const GradcheckReport& r);

// ---------------------------------------------------------------------------
// Gradient fields

enum class Partial { Cls, Reg, Dir };

const char* to_string(Partial p);
Partial parse_partial(const std::string& s);

struct AxisRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// Axes by partial:
///   Cls: (p, l_reg, l_dir)    Reg: (residual, l_cls, l_dir)    Dir: (p', l_cls, l_reg)
/// The two loss axes are injected as component-loss values directly.
struct GradFieldSpec {
  Partial which = Partial::Cls;
  LossKind loss_kind = LossKind::Harmonic;
  std::array<AxisRange, 3> axes{};
  int resolution = 22;
  bool dir_gt = false;
  std::size_t max_samples = 1'000'000;
  LossConfig cfg{};

  /// p, p' in [0.01, 1]; losses and the residual in [0, 4].
  static GradFieldSpec defaults(Partial which, LossKind kind);
  void validate() const;
};

struct GradFieldSample {
  std::array<double, 3> coord{};
  double grad = 0.0;
};

/// Axis values of one axis; the last value is exactly hi.
std::vector<double> axis_values(const AxisRange& r, int resolution);

/// Value of the selected partial at one point of the field.
double field_partial(const GradFieldSpec& spec, double a1, double a2, double a3);

/// Row-major grid (axis 1 outermost). Throws std::length_error when the grid
/// exceeds spec.max_samples.
std::vector<GradFieldSample> sample_grad_field(const GradFieldSpec& spec);

/// Grid points with |grad| < tol_abs. Throws std::invalid_argument on an empty field.
std::vector<std::array<double, 3>> find_stationary_points(const std::vector<GradFieldSample>& field, double tol_abs);

void write_field_csv(std::ostream& os, const std::vector<GradFieldSample>& field);
std::string field_spec_json(const GradFieldSpec& spec);

}  // namespace h3d
