#pragma once

#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "voxhand/kinematics.hpp"
#include "voxhand/skeleton.hpp"

namespace voxhand {

inline double degrees(double rad) { return rad * 180.0 / M_PI; }
inline double radians(double deg) { return deg * M_PI / 180.0; }

struct BvhJoint {
  std::string name;
  int parent = -1;
  Vec3 offset;                         // mm, parent frame
  std::vector<std::string> channels;   // declared channel names, in order
  bool has_end_site = false;
  Vec3 end_offset;
};

// A motion document: joint tree with offsets and channel declarations plus
// per-frame channel value rows.
struct BvhDocument {
  std::vector<BvhJoint> joints;
  std::vector<std::vector<double>> frames;
  double frame_time = 1.0 / 30.0;

  int channel_count() const {
    int n = 0;
    for (const BvhJoint& j : joints) n += static_cast<int>(j.channels.size());
    return n;
  }

  void validate() const {
    if (joints.empty()) throw InvalidSpec("bvh document: no joints");
    const int want = channel_count();
    for (std::size_t i = 0; i < frames.size(); ++i)
      if (static_cast<int>(frames[i].size()) != want)
        throw ChannelMismatch("bvh document: frame row " + std::to_string(i) + " has " +
                              std::to_string(frames[i].size()) + " values, expected " +
                              std::to_string(want));
    for (const BvhJoint& j : joints)
      if (!std::isfinite(j.offset.x) || !std::isfinite(j.offset.y) || !std::isfinite(j.offset.z))
        throw InvalidSpec("bvh document: non-finite offset on " + j.name);
  }
};

namespace detail {

inline std::string rotation_channel(char axis) {
  switch (axis) {
    case 'x': return "Xrotation";
    case 'y': return "Yrotation";
    default: return "Zrotation";
  }
}

inline char channel_axis(const std::string& ch) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(ch[0])));
}

inline void write_bvh_vec(std::ostream& os, const Vec3& v) {
  os << std::fixed << std::setprecision(6) << v.x << ' ' << v.y << ' ' << v.z;
}

inline void write_bvh_joint(std::ostream& os, const BvhDocument& doc, int idx, int depth) {
  const BvhJoint& j = doc.joints[idx];
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  os << pad << (j.parent < 0 ? "ROOT " : "JOINT ") << j.name << '\n' << pad << "{\n";
  os << pad << "  OFFSET ";
  write_bvh_vec(os, j.offset);
  os << '\n' << pad << "  CHANNELS " << j.channels.size();
  for (const std::string& c : j.channels) os << ' ' << c;
  os << '\n';
  for (std::size_t k = 0; k < doc.joints.size(); ++k)
    if (doc.joints[k].parent == idx) write_bvh_joint(os, doc, static_cast<int>(k), depth + 1);
  if (j.has_end_site) {
    os << pad << "  End Site\n" << pad << "  {\n" << pad << "    OFFSET ";
    write_bvh_vec(os, j.end_offset);
    os << '\n' << pad << "  }\n";
  }
  os << pad << "}\n";
}

}  // namespace detail

// Serialize to standard hierarchy/motion text, fixed-point with 6 decimals.
inline std::string bvh_to_text(const BvhDocument& doc) {
  doc.validate();
  std::ostringstream os;
  os << "HIERARCHY\n";
  detail::write_bvh_joint(os, doc, 0, 0);
  os << "MOTION\n";
  os << "Frames: " << doc.frames.size() << '\n';
  os << "Frame Time: " << std::fixed << std::setprecision(6) << doc.frame_time << '\n';
  for (const std::vector<double>& row : doc.frames) {
    for (std::size_t i = 0; i < row.size(); ++i)
      os << (i ? " " : "") << std::fixed << std::setprecision(6) << row[i];
    os << '\n';
  }
  return os.str();
}

// Encode poses over a skeleton: the root declares the six rigid channels
// (positions then Z-X-Y rotations) followed by any root articulation;
// every other joint declares one rotation channel per articulation axis in
// listed order. Childless joints carry zero-length end sites. Motion rows
// hold millimeters and degrees.
inline BvhDocument pose_to_bvh(const SkeletonModel& model, const std::vector<HandPose>& poses) {
  for (const HandPose& p : poses) p.validate(model);
  // Hierarchy text is depth-first, and motion values follow the channel
  // declaration order, so lay the joints out depth-first up front.
  std::vector<int> dfs;
  dfs.reserve(model.joints.size());
  const auto visit = [&](const auto& self, int idx) -> void {
    dfs.push_back(idx);
    for (std::size_t k = 0; k < model.joints.size(); ++k)
      if (model.joints[k].parent == idx) self(self, static_cast<int>(k));
  };
  visit(visit, 0);

  std::vector<int> new_of(model.joints.size(), -1);
  for (std::size_t n = 0; n < dfs.size(); ++n) new_of[static_cast<std::size_t>(dfs[n])] =
      static_cast<int>(n);
  std::vector<bool> has_child(model.joints.size(), false);
  for (std::size_t i = 1; i < model.joints.size(); ++i)
    has_child[static_cast<std::size_t>(model.joints[i].parent)] = true;

  BvhDocument doc;
  doc.joints.resize(model.joints.size());
  for (std::size_t n = 0; n < dfs.size(); ++n) {
    const std::size_t i = static_cast<std::size_t>(dfs[n]);
    BvhJoint& j = doc.joints[n];
    j.name = model.joints[i].name;
    j.parent = model.joints[i].parent < 0
                   ? -1
                   : new_of[static_cast<std::size_t>(model.joints[i].parent)];
    j.offset = model.joints[i].offset;
    if (j.parent < 0)
      j.channels = {"Xposition", "Yposition", "Zposition",
                    "Zrotation", "Xrotation", "Yrotation"};
    for (const JointDof& d : model.joints[i].dofs)
      j.channels.push_back(detail::rotation_channel(d.axis));
    if (!has_child[i]) j.has_end_site = true;
  }
  for (const HandPose& pose : poses) {
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(doc.channel_count()));
    double az = 0.0, ax = 0.0, ay = 0.0;
    matrix_to_euler_zxy(pose.root_orientation, az, ax, ay);
    row.push_back(pose.root_position.x);
    row.push_back(pose.root_position.y);
    row.push_back(pose.root_position.z);
    row.push_back(degrees(az));
    row.push_back(degrees(ax));
    row.push_back(degrees(ay));
    for (int idx : dfs) {
      const int off = model.angle_offset(idx);
      for (std::size_t d = 0; d < model.joints[static_cast<std::size_t>(idx)].dofs.size(); ++d)
        row.push_back(degrees(pose.angles[static_cast<std::size_t>(off) + d]));
    }
    doc.frames.push_back(std::move(row));
  }
  return doc;
}

struct BvhParseResult {
  BvhDocument document;
  SkeletonModel skeleton;         // topology + offsets + dofs, no annotations
  std::vector<HandPose> poses;    // one per motion row, radians
};

namespace detail {

struct BvhTok {
  std::string text;
  int line = 0;
};

class BvhCursor {
 public:
  explicit BvhCursor(const std::string& text) {
    int line = 1;
    std::string cur;
    const auto flush = [&] {
      if (!cur.empty()) {
        toks_.push_back({cur, line});
        cur.clear();
      }
    };
    for (char c : text) {
      if (c == '\n') {
        flush();
        ++line;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        flush();
      } else {
        cur += c;
      }
    }
    flush();
  }

  bool done() const { return pos_ >= toks_.size(); }
  int line_here() const { return done() ? last_line() : toks_[pos_].line; }
  int last_line() const { return toks_.empty() ? 1 : toks_.back().line; }

  const BvhTok& peek() const {
    if (done()) throw ParseError("bvh line " + std::to_string(last_line()) + ": unexpected end of file");
    return toks_[pos_];
  }

  BvhTok next() {
    const BvhTok t = peek();
    ++pos_;
    return t;
  }

  void expect(const std::string& word) {
    const BvhTok t = next();
    if (t.text != word)
      throw ParseError("bvh line " + std::to_string(t.line) + ": expected '" + word + "', got '" +
                       t.text + "'");
  }

  double real(const std::string& what) {
    const BvhTok t = next();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t.text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.text.size())
      throw ParseError("bvh line " + std::to_string(t.line) + ": bad " + what + " '" + t.text +
                       "'");
    return v;
  }

  long integer(const std::string& what) {
    const BvhTok t = next();
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(t.text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.text.size() || v < 0)
      throw ParseError("bvh line " + std::to_string(t.line) + ": bad " + what + " '" + t.text +
                       "'");
    return v;
  }

  // All remaining tokens sharing the current token's source line.
  std::vector<BvhTok> rest_of_line() {
    std::vector<BvhTok> out;
    const int line = peek().line;
    while (!done() && toks_[pos_].line == line) out.push_back(toks_[pos_++]);
    return out;
  }

 private:
  std::vector<BvhTok> toks_;
  std::size_t pos_ = 0;
};

inline bool is_rotation_channel(const std::string& c) {
  return c == "Xrotation" || c == "Yrotation" || c == "Zrotation";
}

inline void parse_bvh_joint(BvhCursor& cur, BvhDocument& doc, int parent) {
  const int idx = static_cast<int>(doc.joints.size());
  doc.joints.push_back({});
  doc.joints[idx].parent = parent;
  doc.joints[idx].name = cur.next().text;
  cur.expect("{");
  cur.expect("OFFSET");
  {
    const double x = cur.real("offset"), y = cur.real("offset"), z = cur.real("offset");
    doc.joints[idx].offset = {x, y, z};
  }
  cur.expect("CHANNELS");
  const long n = cur.integer("channel count");
  for (long k = 0; k < n; ++k) {
    const BvhTok t = cur.next();
    if (t.text != "Xposition" && t.text != "Yposition" && t.text != "Zposition" &&
        !is_rotation_channel(t.text))
      throw ParseError("bvh line " + std::to_string(t.line) + ": unknown channel '" + t.text +
                       "'");
    if (parent >= 0 && !is_rotation_channel(t.text))
      throw ParseError("bvh line " + std::to_string(t.line) +
                       ": position channel on non-root joint");
    doc.joints[idx].channels.push_back(t.text);
  }
  while (true) {
    const BvhTok t = cur.next();
    if (t.text == "}") break;
    if (t.text == "JOINT") {
      parse_bvh_joint(cur, doc, idx);
    } else if (t.text == "End") {
      cur.expect("Site");
      cur.expect("{");
      cur.expect("OFFSET");
      const double x = cur.real("end offset"), y = cur.real("end offset"),
                   z = cur.real("end offset");
      doc.joints[idx].has_end_site = true;
      doc.joints[idx].end_offset = {x, y, z};
      cur.expect("}");
    } else {
      throw ParseError("bvh line " + std::to_string(t.line) + ": expected JOINT, End or '}', got '" +
                       t.text + "'");
    }
  }
}

}  // namespace detail

// Turn an in-memory document into a skeleton (topology, offsets,
// articulation axes; full-turn limits) plus one pose per motion row. The
// root's first three rotation channels compose its orientation in listed
// order; later root rotations become articulation like any other joint.
inline BvhParseResult decode_bvh(BvhDocument doc) {
  doc.validate();
  BvhParseResult out;
  const std::vector<std::string>& rc = doc.joints[0].channels;
  if (rc.size() < 6 || rc[0] != "Xposition" || rc[1] != "Yposition" || rc[2] != "Zposition" ||
      !detail::is_rotation_channel(rc[3]) || !detail::is_rotation_channel(rc[4]) ||
      !detail::is_rotation_channel(rc[5]))
    throw ParseError("bvh: root must declare Xposition Yposition Zposition and three rotations");

  out.skeleton.name = doc.joints[0].name;
  for (const BvhJoint& bj : doc.joints) {
    SkeletonJoint sj;
    sj.name = bj.name;
    sj.parent = bj.parent;
    sj.offset = bj.offset;
    const std::size_t skip = bj.parent < 0 ? 6 : 0;
    for (std::size_t c = skip; c < bj.channels.size(); ++c) {
      JointDof d;
      d.axis = detail::channel_axis(bj.channels[c]);
      sj.dofs.push_back(d);
    }
    out.skeleton.joints.push_back(std::move(sj));
  }
  try {
    out.skeleton.validate();
  } catch (const InvalidSpec& e) {
    throw ParseError(std::string("bvh: ") + e.what());
  }

  for (std::size_t f = 0; f < doc.frames.size(); ++f) {
    const std::vector<double>& row = doc.frames[f];
    HandPose pose;
    pose.root_position = {row[0], row[1], row[2]};
    Mat3 orient = Mat3::identity();
    for (int k = 3; k < 6; ++k)
      orient = orient * axis_rotation(detail::channel_axis(rc[static_cast<std::size_t>(k)]),
                                      radians(row[static_cast<std::size_t>(k)]));
    pose.root_orientation = orient;
    std::size_t at = 6;
    for (const BvhJoint& bj : doc.joints) {
      const std::size_t skip = bj.parent < 0 ? 6 : 0;
      for (std::size_t c = skip; c < bj.channels.size(); ++c)
        pose.angles.push_back(radians(row[at++]));
    }
    out.poses.push_back(std::move(pose));
  }
  out.document = std::move(doc);
  return out;
}

// Parse hierarchy/motion text. Every read is bounds-guarded, so truncated
// or mangled input raises ParseError/ChannelMismatch, never worse.
inline BvhParseResult parse_bvh(const std::string& text) {
  detail::BvhCursor cur(text);
  BvhDocument doc;
  cur.expect("HIERARCHY");
  cur.expect("ROOT");
  detail::parse_bvh_joint(cur, doc, -1);
  cur.expect("MOTION");
  cur.expect("Frames:");
  const long frames = cur.integer("frame count");
  cur.expect("Frame");
  cur.expect("Time:");
  doc.frame_time = cur.real("frame time");

  const int want = doc.channel_count();
  for (long f = 0; f < frames; ++f) {
    if (cur.done())
      throw ParseError("bvh line " + std::to_string(cur.last_line()) + ": expected " +
                       std::to_string(frames) + " motion rows, file ends after " +
                       std::to_string(f));
    const std::vector<detail::BvhTok> row_toks = cur.rest_of_line();
    if (static_cast<int>(row_toks.size()) != want)
      throw ChannelMismatch("bvh motion row " + std::to_string(f) + " (line " +
                            std::to_string(row_toks.front().line) + ") has " +
                            std::to_string(row_toks.size()) + " values, expected " +
                            std::to_string(want));
    std::vector<double> row;
    row.reserve(row_toks.size());
    for (const detail::BvhTok& t : row_toks) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(t.text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != t.text.size())
        throw ParseError("bvh line " + std::to_string(t.line) + ": bad motion value '" + t.text +
                         "'");
      row.push_back(v);
    }
    doc.frames.push_back(std::move(row));
  }
  if (!cur.done())
    throw ParseError("bvh line " + std::to_string(cur.line_here()) + ": trailing content '" +
                     cur.peek().text + "'");
  return decode_bvh(std::move(doc));
}

// Multiply every bone offset (and end-site stub) by a global factor; motion
// rows — root positions and all rotations — are untouched.
inline BvhDocument rescale_bones(const BvhDocument& doc, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw InvalidScale("rescale_bones: factor must be > 0");
  BvhDocument out = doc;
  for (BvhJoint& j : out.joints) {
    j.offset = j.offset * factor;
    j.end_offset = j.end_offset * factor;
  }
  return out;
}

// Per-link variant: named joints scale by their own factor, others by 1.
inline BvhDocument rescale_bones(const BvhDocument& doc,
                                 const std::map<std::string, double>& factors) {
  for (const auto& [name, f] : factors) {
    if (!(f > 0.0) || !std::isfinite(f))
      throw InvalidScale("rescale_bones: factor for " + name + " must be > 0");
    bool found = false;
    for (const BvhJoint& j : doc.joints) found = found || j.name == name;
    if (!found) throw InvalidScale("rescale_bones: no joint named " + name);
  }
  BvhDocument out = doc;
  for (BvhJoint& j : out.joints) {
    const auto it = factors.find(j.name);
    if (it == factors.end()) continue;
    j.offset = j.offset * it->second;
    j.end_offset = j.end_offset * it->second;
  }
  return out;
}

}  // namespace voxhand
