#include "h3d/kitti.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace h3d {

namespace {

struct Token {
  std::string_view text;
  std::size_t column = 0;  // 1-based character column
};

std::vector<Token> split_fields(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

const char* const kFieldNames[] = {"type", "truncated", "occluded", "alpha", "bbox_left", "bbox_top",
                                   "bbox_right", "bbox_bottom", "h", "w", "l", "x", "y", "z",
                                   "rotation_y", "score"};

class LineParser {
 public:
  LineParser(const std::string& source, int line, const std::vector<Token>& fields)
      : source_(source), line_(line), fields_(fields) {}

  [[noreturn]] void fail(std::size_t idx, const std::string& what) const {
    throw KittiParseError(fmt::format("{}:{}: field {} ({}) at column {}: {}", source_, line_, idx + 1,
                                      kFieldNames[idx], fields_[idx].column, what));
  }

  double real(std::size_t idx) const {
    const std::string_view t = fields_[idx].text;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (first != last && *first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) fail(idx, fmt::format("expected a number, got '{}'", t));
    return v;
  }

  int integer(std::size_t idx) const {
    const std::string_view t = fields_[idx].text;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) fail(idx, fmt::format("expected an integer, got '{}'", t));
    return v;
  }

 private:
  const std::string& source_;
  int line_;
  const std::vector<Token>& fields_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KittiParseError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<KittiRecord> parse_label_text(const std::string& text, const std::string& source) {
  std::vector<KittiRecord> out;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::vector<Token> f = split_fields(raw);
    if (f.empty()) continue;
    if (f.size() != 15 && f.size() != 16) {
      throw KittiParseError(fmt::format("{}:{}: expected 15 or 16 fields, found {}", source, lineno, f.size()));
    }
    const LineParser p(source, lineno, f);
    KittiRecord r;
    r.type = std::string(f[0].text);
    r.truncated = p.real(1);
    r.occluded = p.integer(2);
    r.alpha = p.real(3);
    for (std::size_t k = 0; k < 4; ++k) r.bbox[k] = p.real(4 + k);
    r.h = p.real(8);
    r.w = p.real(9);
    r.l = p.real(10);
    r.x = p.real(11);
    r.y = p.real(12);
    r.z = p.real(13);
    r.rotation_y = p.real(14);
    if (f.size() == 16) {
      r.score = p.real(15);
      if (*r.score < 0.0 || *r.score > 1.0) p.fail(15, "score must lie in [0, 1]");
    }
    if (!r.dont_care()) {
      if (!(r.h > 0.0)) p.fail(8, "dimension must be positive");
      if (!(r.w > 0.0)) p.fail(9, "dimension must be positive");
      if (!(r.l > 0.0)) p.fail(10, "dimension must be positive");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<KittiRecord> parse_label_file(const std::string& path) { return parse_label_text(read_file(path), path); }

std::string format_record(const KittiRecord& r) {
  std::string s = fmt::format("{} {:.2f} {} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f}",
                              r.type, r.truncated, r.occluded, r.alpha, r.bbox[0], r.bbox[1], r.bbox[2], r.bbox[3], r.h,
                              r.w, r.l, r.x, r.y, r.z, r.rotation_y);
  if (r.score) s += fmt::format(" {:.4f}", *r.score);
  return s;
}

std::string write_label_text(const std::vector<KittiRecord>& records) {
  std::string out;
  for (const auto& r : records) out += format_record(r) + "\n";
  return out;
}

Box3D kitti_to_box3d(const KittiRecord& r) {
  if (r.dont_care()) throw std::invalid_argument("DontCare rows have no box");
  return Box3D::make(r.x, r.z, -r.y + 0.5 * r.h, r.l, r.w, r.h, -r.rotation_y);
}

KittiRecord box3d_to_kitti(const Box3D& b, const std::string& type, std::optional<double> score) {
  KittiRecord r;
  r.type = type;
  r.h = b.h;
  r.w = b.w;
  r.l = b.l;
  r.x = b.x;
  r.y = -(b.z - 0.5 * b.h);
  r.z = b.y;
  r.rotation_y = wrap_angle(-b.yaw);
  r.alpha = -10.0;  // KITTI's "not computed" marker
  r.score = score;
  return r;
}

std::map<std::string, std::string> list_label_files(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw KittiParseError(fmt::format("not a directory: '{}'", dir));
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".txt") continue;
    out.emplace(e.path().stem().string(), e.path().string());
  }
  return out;
}

}  // namespace h3d
