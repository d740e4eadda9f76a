#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "h3d/geometry.hpp"
#include "h3d/scene.hpp"

namespace h3d {

inline constexpr int kHeadDim = 9;  // cls logit, 7 offsets, dir logit

/// x -> tanh(W1 x + b1) -> W2 h + b2. Weights are row-major, output-major.
struct ToyModel {
  int input_dim = kFeatureDim;
  int hidden = 32;
  std::vector<double> w1, b1, w2, b2;

  /// All-zero parameters of the given shape.
  static ToyModel zeros(int input_dim, int hidden);
  /// Scaled Gaussian weights; the classification bias starts at a 1% prior.
  static ToyModel init(int input_dim, int hidden, std::uint64_t seed);

  std::size_t num_params() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
  /// Throws std::invalid_argument on inconsistent shapes or non-finite values.
  void validate() const;

  bool operator==(const ToyModel&) const = default;
};

struct HeadOutput {
  double cls_logit = 0.0;
  double dir_logit = 0.0;
  double p = 0.5;
  double p_dir = 0.5;
  BoxDelta delta;
};

/// Hidden activations kept for the backward pass.
struct ForwardCache {
  std::vector<double> hidden;
  double out[kHeadDim] = {};
};

double sigmoid(double z);

HeadOutput forward_one(const ToyModel& m, const double* x, ForwardCache* cache = nullptr);
std::vector<HeadOutput> forward(const ToyModel& m, const Scene& scene);

/// Accumulates dL/dparams into `grad` (same shape as m) for one input given
/// dL/d(head outputs).
void backward_one(const ToyModel& m, const double* x, const ForwardCache& cache, const double* d_out, ToyModel& grad);

std::string model_to_json(const ToyModel& m);
ToyModel model_from_json(const std::string& text);

}  // namespace h3d
