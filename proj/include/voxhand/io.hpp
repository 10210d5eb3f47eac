#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxhand/binio.hpp"
#include "voxhand/common.hpp"
#include "voxhand/depth.hpp"
#include "voxhand/skeleton.hpp"
#include "voxhand/tsdf.hpp"

namespace voxhand {

namespace detail {

// Shortest decimal form that parses back to the same double.
inline std::string format_shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(where + ": bad number '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s, const std::string& where) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(where + ": bad integer '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline void expect_no_trailing(std::istream& is, const std::string& format) {
  const long long off = static_cast<long long>(is.tellg());
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError(format + ": trailing data at offset " + std::to_string(off));
}

}  // namespace detail

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw FormatError("write failed for " + path);
}

// ---- depth container ------------------------------------------------------

inline void save_depth(std::ostream& os, const DepthImage& img) {
  binio::write_magic(os, "D3D1");
  binio::write_u32(os, static_cast<std::uint32_t>(img.width));
  binio::write_u32(os, static_cast<std::uint32_t>(img.height));
  for (double d : img.depth) {
    const long q = std::lround(std::clamp(d, 0.0, 65535.0));
    binio::write_u16(os, static_cast<std::uint16_t>(q));
  }
  for (std::uint8_t m : img.mask) os.put(m ? 1 : 0);
}

inline void save_depth(const std::string& path, const DepthImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  save_depth(out, img);
  if (!out) throw FormatError("write failed for " + path);
}

inline DepthImage load_depth(std::istream& is) {
  binio::expect_magic(is, "D3D1", "D3D1");
  const std::uint32_t w = binio::read_u32(is, "width");
  const std::uint32_t h = binio::read_u32(is, "height");
  if (w == 0 || h == 0 || static_cast<std::uint64_t>(w) * h > (1u << 26))
    throw FormatError("D3D1: implausible size " + std::to_string(w) + "x" + std::to_string(h));
  DepthImage img(static_cast<int>(w), static_cast<int>(h));
  for (double& d : img.depth) d = binio::read_u16(is, "depth sample");
  for (std::uint8_t& m : img.mask) {
    const long long off = static_cast<long long>(is.tellg());
    const int c = is.get();
    if (c == std::char_traits<char>::eof())
      throw FormatError("unexpected end of file at offset " + std::to_string(off) +
                        " reading mask byte");
    if (c != 0 && c != 1)
      throw FormatError("D3D1: mask byte at offset " + std::to_string(off) + " is " +
                        std::to_string(c) + ", want 0 or 1");
    m = static_cast<std::uint8_t>(c);
  }
  detail::expect_no_trailing(is, "D3D1");
  return img;
}

inline DepthImage load_depth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return load_depth(in);
}

// ---- TSDF container -------------------------------------------------------

inline void save_tsdf(std::ostream& os, const TsdfVolume& vol) {
  binio::write_magic(os, "T3D1");
  binio::write_u32(os, static_cast<std::uint32_t>(vol.spec.resolution));
  binio::write_f32(os, static_cast<float>(vol.spec.voxel_size));
  binio::write_f32(os, static_cast<float>(vol.spec.truncation));
  binio::write_f32(os, static_cast<float>(vol.origin.x));
  binio::write_f32(os, static_cast<float>(vol.origin.y));
  binio::write_f32(os, static_cast<float>(vol.origin.z));
  for (double v : vol.values) binio::write_f32(os, static_cast<float>(v));
}

inline void save_tsdf(const std::string& path, const TsdfVolume& vol) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  save_tsdf(out, vol);
  if (!out) throw FormatError("write failed for " + path);
}

inline TsdfVolume load_tsdf(std::istream& is) {
  binio::expect_magic(is, "T3D1", "T3D1");
  const std::uint32_t res = binio::read_u32(is, "resolution");
  if (res < 2 || res > 1024)
    throw FormatError("T3D1: implausible resolution " + std::to_string(res));
  VoxelGridSpec spec;
  spec.resolution = static_cast<int>(res);
  spec.voxel_size = binio::read_f32(is, "voxel_size");
  spec.truncation = binio::read_f32(is, "truncation");
  spec.validate();
  Vec3 origin;
  origin.x = binio::read_f32(is, "origin.x");
  origin.y = binio::read_f32(is, "origin.y");
  origin.z = binio::read_f32(is, "origin.z");
  TsdfVolume vol(spec, origin);
  for (double& v : vol.values) v = binio::read_f32(is, "voxel value");
  detail::expect_no_trailing(is, "T3D1");
  return vol;
}

inline TsdfVolume load_tsdf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return load_tsdf(in);
}

// ---- joints CSV -----------------------------------------------------------

// Header `frame,<name>_x,<name>_y,<name>_z,...`; one row per frame, mm.
inline std::string joints_to_csv(const std::vector<JointSet>& frames) {
  if (frames.empty()) throw EmptyDataset("joints_to_csv: no frames");
  std::ostringstream out;
  out << "frame";
  for (const std::string& n : frames[0].names)
    out << "," << n << "_x," << n << "_y," << n << "_z";
  out << "\n";
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].names != frames[0].names)
      throw JointMismatch("joints_to_csv: frame " + std::to_string(f) +
                          " has a different joint list");
    out << f;
    for (const Vec3& p : frames[f].positions)
      out << "," << detail::format_shortest(p.x) << "," << detail::format_shortest(p.y) << ","
          << detail::format_shortest(p.z);
    out << "\n";
  }
  return out.str();
}

inline std::vector<JointSet> joints_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("joints csv: empty input");
  const std::vector<std::string> head = detail::split_csv_line(line);
  if (head.empty() || head[0] != "frame" || (head.size() - 1) % 3 != 0 || head.size() == 1)
    throw ParseError("joints csv line 1: header must be frame,<name>_x,<name>_y,<name>_z,...");
  std::vector<std::string> names;
  for (std::size_t i = 1; i < head.size(); i += 3) {
    const std::string base = head[i].size() > 2 ? head[i].substr(0, head[i].size() - 2) : "";
    if (base.empty() || head[i] != base + "_x" || head[i + 1] != base + "_y" ||
        head[i + 2] != base + "_z")
      throw ParseError("joints csv line 1: bad column triple starting at '" + head[i] + "'");
    names.push_back(base);
  }
  std::vector<JointSet> frames;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "joints csv line " + std::to_string(line_no);
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != head.size())
      throw ParseError(where + ": " + std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(head.size()));
    detail::parse_long(cells[0], where);
    JointSet js;
    js.names = names;
    for (std::size_t i = 1; i < cells.size(); i += 3)
      js.positions.push_back({detail::parse_double(cells[i], where),
                              detail::parse_double(cells[i + 1], where),
                              detail::parse_double(cells[i + 2], where)});
    js.validate();
    frames.push_back(std::move(js));
  }
  return frames;
}

inline void save_joints_csv(const std::string& path, const std::vector<JointSet>& frames) {
  write_text_file(path, joints_to_csv(frames));
}

inline std::vector<JointSet> load_joints_csv(const std::string& path) {
  return joints_from_csv(read_text_file(path));
}

// ---- loss curve CSV -------------------------------------------------------

inline std::string loss_to_csv(const std::vector<double>& losses) {
  std::ostringstream out;
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e)
    out << (e + 1) << "," << detail::format_shortest(losses[e]) << "\n";
  return out.str();
}

// ---- dataset manifest -----------------------------------------------------

// One line per sample: `depth=<path> joints=<path> scale=<f> cam=<6 reals>`
// with an optional trailing `clean=<path>` for refinement training pairs.
// The camera reals are fx,fy,cx,cy,width,height (comma separated).
struct ManifestRecord {
  std::string depth;
  std::string joints;
  double scale = 1.0;
  std::array<double, 6> cam{};
  std::string clean;  // empty = no clean-depth companion

  CameraIntrinsics intrinsics() const { return CameraIntrinsics(cam[0], cam[1], cam[2], cam[3]); }
};

inline std::string manifest_to_text(const std::vector<ManifestRecord>& records) {
  std::ostringstream out;
  for (const ManifestRecord& r : records) {
    out << "depth=" << r.depth << " joints=" << r.joints << " scale="
        << detail::format_shortest(r.scale) << " cam=";
    for (std::size_t i = 0; i < r.cam.size(); ++i)
      out << (i ? "," : "") << detail::format_shortest(r.cam[i]);
    if (!r.clean.empty()) out << " clean=" << r.clean;
    out << "\n";
  }
  return out.str();
}

inline std::vector<ManifestRecord> parse_manifest(const std::string& text) {
  std::vector<ManifestRecord> records;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "manifest line " + std::to_string(line_no);
    std::istringstream tokens(line);
    std::string token;
    ManifestRecord r;
    bool saw_depth = false, saw_joints = false, saw_scale = false, saw_cam = false;
    bool any = false;
    while (tokens >> token) {
      if (token[0] == '#') break;
      any = true;
      const std::size_t eq = token.find('=');
      if (eq == std::string::npos) throw ParseError(where + ": token '" + token + "' is not key=value");
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (value.empty()) throw ParseError(where + ": empty value for " + key);
      if (key == "depth") {
        r.depth = value;
        saw_depth = true;
      } else if (key == "joints") {
        r.joints = value;
        saw_joints = true;
      } else if (key == "scale") {
        r.scale = detail::parse_double(value, where);
        if (!(r.scale > 0.0)) throw ParseError(where + ": scale must be > 0");
        saw_scale = true;
      } else if (key == "cam") {
        const std::vector<std::string> parts = detail::split_csv_line(value);
        if (parts.size() != r.cam.size())
          throw ParseError(where + ": cam needs 6 comma-separated reals, got " +
                           std::to_string(parts.size()));
        for (std::size_t i = 0; i < r.cam.size(); ++i)
          r.cam[i] = detail::parse_double(parts[i], where);
        saw_cam = true;
      } else if (key == "clean") {
        r.clean = value;
      } else {
        throw ParseError(where + ": unknown key '" + key + "'");
      }
    }
    if (!any) continue;  // blank or comment-only line
    if (!saw_depth || !saw_joints || !saw_scale || !saw_cam)
      throw ParseError(where + ": needs depth=, joints=, scale= and cam=");
    records.push_back(std::move(r));
  }
  return records;
}

inline void save_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  write_text_file(path, manifest_to_text(records));
}

inline std::vector<ManifestRecord> load_manifest(const std::string& path) {
  return parse_manifest(read_text_file(path));
}

}  // namespace voxhand
