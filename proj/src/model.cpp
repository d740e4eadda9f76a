#include "h3d/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace h3d {

ToyModel ToyModel::zeros(int input_dim, int hidden) {
  if (input_dim <= 0 || hidden <= 0) throw std::invalid_argument("model: dimensions must be positive");
  ToyModel m;
  m.input_dim = input_dim;
  m.hidden = hidden;
  m.w1.assign(static_cast<std::size_t>(hidden) * input_dim, 0.0);
  m.b1.assign(static_cast<std::size_t>(hidden), 0.0);
  m.w2.assign(static_cast<std::size_t>(kHeadDim) * hidden, 0.0);
  m.b2.assign(kHeadDim, 0.0);
  return m;
}

ToyModel ToyModel::init(int input_dim, int hidden, std::uint64_t seed) {
  ToyModel m = zeros(input_dim, hidden);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g1(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  std::normal_distribution<double> g2(0.0, 1.0 / std::sqrt(static_cast<double>(hidden)));
  for (auto& v : m.w1) v = g1(rng);
  for (auto& v : m.w2) v = 0.1 * g2(rng);
  m.b2[0] = -std::log(99.0);
  return m;
}

std::vector<double> ToyModel::flatten() const {
  std::vector<double> out;
  out.reserve(num_params());
  for (const auto* v : {&w1, &b1, &w2, &b2}) out.insert(out.end(), v->begin(), v->end());
  return out;
}

void ToyModel::unflatten(const std::vector<double>& flat) {
  if (flat.size() != num_params()) throw std::invalid_argument("model: flat parameter size mismatch");
  auto it = flat.begin();
  for (auto* v : {&w1, &b1, &w2, &b2}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(v->size()), v->begin());
    it += static_cast<std::ptrdiff_t>(v->size());
  }
}

void ToyModel::validate() const {
  if (input_dim <= 0 || hidden <= 0) throw std::invalid_argument("model: dimensions must be positive");
  const auto h = static_cast<std::size_t>(hidden);
  if (w1.size() != h * static_cast<std::size_t>(input_dim) || b1.size() != h || w2.size() != kHeadDim * h ||
      b2.size() != static_cast<std::size_t>(kHeadDim)) {
    throw std::invalid_argument("model: parameter shapes do not match dimensions");
  }
  for (const auto* v : {&w1, &b1, &w2, &b2}) {
    for (double x : *v) {
      if (!std::isfinite(x)) throw std::invalid_argument("model: non-finite parameter");
    }
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

HeadOutput forward_one(const ToyModel& m, const double* x, ForwardCache* cache) {
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.hidden.resize(static_cast<std::size_t>(m.hidden));
  for (int j = 0; j < m.hidden; ++j) {
    const double* row = m.w1.data() + static_cast<std::size_t>(j) * m.input_dim;
    double s = m.b1[static_cast<std::size_t>(j)];
    for (int i = 0; i < m.input_dim; ++i) s += row[i] * x[i];
    c.hidden[static_cast<std::size_t>(j)] = std::tanh(s);
  }
  for (int o = 0; o < kHeadDim; ++o) {
    const double* row = m.w2.data() + static_cast<std::size_t>(o) * m.hidden;
    double s = m.b2[static_cast<std::size_t>(o)];
    for (int j = 0; j < m.hidden; ++j) s += row[j] * c.hidden[static_cast<std::size_t>(j)];
    c.out[o] = s;
  }
  HeadOutput h;
  h.cls_logit = c.out[0];
  h.dir_logit = c.out[8];
  h.p = sigmoid(h.cls_logit);
  h.p_dir = sigmoid(h.dir_logit);
  for (int k = 0; k < BoxDelta::kSize; ++k) h.delta[k] = c.out[1 + k];
  return h;
}

std::vector<HeadOutput> forward(const ToyModel& m, const Scene& scene) {
  if (m.input_dim != kFeatureDim) throw std::invalid_argument("model: input dimension does not match scene features");
  std::vector<HeadOutput> out;
  out.reserve(scene.num_anchors());
  ForwardCache cache;
  for (std::size_t a = 0; a < scene.num_anchors(); ++a) out.push_back(forward_one(m, scene.feature_row(a), &cache));
  return out;
}

void backward_one(const ToyModel& m, const double* x, const ForwardCache& cache, const double* d_out, ToyModel& grad) {
  std::vector<double> d_hidden(static_cast<std::size_t>(m.hidden), 0.0);
  for (int o = 0; o < kHeadDim; ++o) {
    const double g = d_out[o];
    if (g == 0.0) continue;
    grad.b2[static_cast<std::size_t>(o)] += g;
    const std::size_t base = static_cast<std::size_t>(o) * m.hidden;
    for (int j = 0; j < m.hidden; ++j) {
      grad.w2[base + j] += g * cache.hidden[static_cast<std::size_t>(j)];
      d_hidden[static_cast<std::size_t>(j)] += g * m.w2[base + j];
    }
  }
  for (int j = 0; j < m.hidden; ++j) {
    const double hj = cache.hidden[static_cast<std::size_t>(j)];
    const double dz = d_hidden[static_cast<std::size_t>(j)] * (1.0 - hj * hj);
    if (dz == 0.0) continue;
    grad.b1[static_cast<std::size_t>(j)] += dz;
    const std::size_t base = static_cast<std::size_t>(j) * m.input_dim;
    for (int i = 0; i < m.input_dim; ++i) grad.w1[base + i] += dz * x[i];
  }
}

std::string model_to_json(const ToyModel& m) {
  using nlohmann::json;
  json j;
  j["format"] = "h3d-toy-model";
  j["version"] = 1;
  j["input_dim"] = m.input_dim;
  j["hidden"] = m.hidden;
  j["params"] = json::array({
      {{"name", "w1"}, {"shape", {m.hidden, m.input_dim}}, {"data", m.w1}},
      {{"name", "b1"}, {"shape", {m.hidden}}, {"data", m.b1}},
      {{"name", "w2"}, {"shape", {kHeadDim, m.hidden}}, {"data", m.w2}},
      {{"name", "b2"}, {"shape", {kHeadDim}}, {"data", m.b2}},
  });
  return j.dump(1) + "\n";
}

ToyModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    if (j.at("format") != "h3d-toy-model") throw std::invalid_argument("checkpoint: unexpected format tag");
    ToyModel m = ToyModel::zeros(j.at("input_dim").get<int>(), j.at("hidden").get<int>());
    for (const auto& p : j.at("params")) {
      const auto name = p.at("name").get<std::string>();
      auto data = p.at("data").get<std::vector<double>>();
      std::vector<double>* dst = name == "w1" ? &m.w1 : name == "b1" ? &m.b1 : name == "w2" ? &m.w2 : name == "b2" ? &m.b2 : nullptr;
      if (!dst) throw std::invalid_argument("checkpoint: unknown parameter '" + name + "'");
      if (data.size() != dst->size()) throw std::invalid_argument("checkpoint: size mismatch for '" + name + "'");
      *dst = std::move(data);
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace h3d
