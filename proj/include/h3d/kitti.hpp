#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "h3d/geometry.hpp"

namespace h3d {

/// One row of a KITTI object label file. Column order:
/// type truncated occluded alpha bbox(4) h w l x y z rotation_y [score]
struct KittiRecord {
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox{};  // left top right bottom
  double h = 0.0;
  double w = 0.0;
  double l = 0.0;
  double x = 0.0;  // camera frame, bottom-face center
  double y = 0.0;
  double z = 0.0;
  double rotation_y = 0.0;
  std::optional<double> score;

  bool dont_care() const { return type == "DontCare"; }
  bool operator==(const KittiRecord&) const = default;
};

struct KittiParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Errors name the source, the line and the offending field with its
/// character column.
std::vector<KittiRecord> parse_label_text(const std::string& text, const std::string& source = "<labels>");
std::vector<KittiRecord> parse_label_file(const std::string& path);

/// Floats with 2 decimals; the optional score is written with 4.
std::string format_record(const KittiRecord& r);
std::string write_label_text(const std::vector<KittiRecord>& records);

/// Camera frame to BEV frame: BEV x = camera x, BEV y = camera z, up = -camera y.
/// The center is lifted by h/2 from the bottom face and yaw = -rotation_y.
/// Throws std::invalid_argument for DontCare rows.
Box3D kitti_to_box3d(const KittiRecord& r);

/// Inverse of kitti_to_box3d for the geometric fields.
KittiRecord box3d_to_kitti(const Box3D& b, const std::string& type = "Car", std::optional<double> score = {});

/// Label files of a directory keyed by file stem (".txt" files only).
std::map<std::string, std::string> list_label_files(const std::string& dir);

}  // namespace h3d
