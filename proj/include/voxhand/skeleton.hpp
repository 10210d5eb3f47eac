#pragma once

#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "voxhand/common.hpp"
#include "voxhand/vecmath.hpp"

namespace voxhand {

// Labeled 3D joint positions in mm (camera or world frame).
struct JointSet {
  std::vector<std::string> names;
  std::vector<Vec3> positions;

  void validate() const {
    if (names.size() != positions.size())
      throw InvalidSpec("JointSet: name/position count mismatch");
    for (const Vec3& p : positions)
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
        throw InvalidSpec("JointSet: non-finite position");
  }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }

  const Vec3& at(const std::string& name) const {
    const int i = find(name);
    if (i < 0) throw MissingJoint("JointSet: no joint named " + name);
    return positions[i];
  }
};

// One rotational degree of freedom: the local axis and its angle range.
struct JointDof {
  char axis = 'y';  // 'x', 'y' or 'z'
  double lo = -M_PI;
  double hi = M_PI;
};

struct SkeletonJoint {
  std::string name;
  int parent = -1;           // index into joints; -1 for the root
  Vec3 offset;               // rest translation from parent, mm, parent frame
  std::vector<JointDof> dofs;
};

struct SkeletonCapsule {
  int a = -1, b = -1;  // joint indices spanning the capsule axis
  double radius = 0.0;
};

// Kinematic tree plus everything the rest of the pipeline hangs off it:
// dataset annotation labels, the root-frame label quad, and the capsule
// geometry used for synthetic rendering.
struct SkeletonModel {
  std::string name;
  std::vector<SkeletonJoint> joints;
  std::vector<std::pair<std::string, int>> annotations;  // dataset label -> joint
  std::array<std::string, 4> frame_labels{{"C", "W1", "W2", "M1"}};
  std::vector<SkeletonCapsule> capsules;
  int palm_a = -1, palm_b = -1;  // palm ellipsoid spans these joints
  Vec3 palm_radii;

  int joint_index(const std::string& n) const {
    for (std::size_t i = 0; i < joints.size(); ++i)
      if (joints[i].name == n) return static_cast<int>(i);
    return -1;
  }

  int angle_count() const {
    int n = 0;
    for (const SkeletonJoint& j : joints) n += static_cast<int>(j.dofs.size());
    return n;
  }
  int dof_count() const { return 6 + angle_count(); }

  // First index of this joint's angles within HandPose::angles.
  int angle_offset(int joint) const {
    int off = 0;
    for (int i = 0; i < joint; ++i) off += static_cast<int>(joints[i].dofs.size());
    return off;
  }

  int annotation_joint(const std::string& label) const {
    for (const auto& [l, j] : annotations)
      if (l == label) return j;
    return -1;
  }

  std::vector<std::string> annotation_labels() const {
    std::vector<std::string> out;
    out.reserve(annotations.size());
    for (const auto& [l, j] : annotations) out.push_back(l);
    return out;
  }

  // Nearest annotated ancestor of an annotated joint, as a joint index;
  // -1 when none exists (the root itself).
  int mapped_ancestor(int joint) const {
    for (int p = joints[joint].parent; p >= 0; p = joints[p].parent)
      for (const auto& [l, j] : annotations)
        if (j == p) return p;
    return -1;
  }

  void validate() const {
    if (joints.empty()) throw InvalidSpec("SkeletonModel: no joints");
    if (joints[0].parent != -1) throw InvalidSpec("SkeletonModel: first joint must be the root");
    for (std::size_t i = 1; i < joints.size(); ++i) {
      const SkeletonJoint& j = joints[i];
      if (j.parent < 0 || j.parent >= static_cast<int>(i))
        throw InvalidSpec("SkeletonModel: joint " + j.name + " breaks topological order");
      if (!(j.offset.norm() > 0.0))
        throw InvalidSpec("SkeletonModel: joint " + j.name + " has a zero-length link");
    }
    for (const SkeletonJoint& j : joints)
      for (const JointDof& d : j.dofs) {
        if (d.axis != 'x' && d.axis != 'y' && d.axis != 'z')
          throw InvalidSpec("SkeletonModel: bad dof axis on " + j.name);
        if (!(d.lo <= d.hi))
          throw InvalidSpec("SkeletonModel: inverted angle limits on " + j.name);
      }
    for (const auto& [label, j] : annotations)
      if (j < 0 || j >= static_cast<int>(joints.size()))
        throw InvalidSpec("SkeletonModel: annotation " + label + " points at no joint");
    for (const SkeletonCapsule& c : capsules)
      if (c.a < 0 || c.b < 0 || c.a >= static_cast<int>(joints.size()) ||
          c.b >= static_cast<int>(joints.size()) || !(c.radius > 0.0))
        throw InvalidSpec("SkeletonModel: malformed capsule");
  }
};

// Root pose as an explicit rigid transform plus the articulation angles in
// joint order (NYU default: 24 angles, 30 DOF total).
struct HandPose {
  Vec3 root_position;
  Mat3 root_orientation = Mat3::identity();
  std::vector<double> angles;

  void validate(const SkeletonModel& model) const {
    if (static_cast<int>(angles.size()) != model.angle_count())
      throw DimensionMismatch("HandPose: " + std::to_string(angles.size()) + " angles, model has " +
                              std::to_string(model.angle_count()));
    if (root_orientation.orthonormality_error() > 1e-9)
      throw DimensionMismatch("HandPose: root orientation is not orthonormal");
    if (root_orientation.determinant() < 0.0)
      throw DimensionMismatch("HandPose: root orientation is a reflection");
  }
};

// Uniformly scaled copy: link offsets, capsule radii, and palm radii all
// multiply by s.
inline SkeletonModel scaled(const SkeletonModel& model, double s) {
  if (!(s > 0.0)) throw InvalidScale("scaled: factor must be > 0, got " + std::to_string(s));
  SkeletonModel out = model;
  for (SkeletonJoint& j : out.joints) j.offset = j.offset * s;
  for (SkeletonCapsule& c : out.capsules) c.radius *= s;
  out.palm_radii = out.palm_radii * s;
  return out;
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_real(const std::string& s, int line_no, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("skeleton line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
  if (used != s.size())
    throw ParseError("skeleton line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  return v;
}

inline Vec3 parse_vec3(const std::string& s, int line_no, const std::string& what) {
  const std::vector<std::string> parts = split_on(s, ',');
  if (parts.size() != 3)
    throw ParseError("skeleton line " + std::to_string(line_no) + ": " + what +
                     " needs 3 comma-separated values");
  return {parse_real(parts[0], line_no, what), parse_real(parts[1], line_no, what),
          parse_real(parts[2], line_no, what)};
}

}  // namespace detail

// Line-oriented skeleton definition:
//   name <id>
//   joint <name> parent=<name|-> offset=<x,y,z> [dofs=<rz,rx,...>] [limits=<lo..hi;...>]
//   annotate <dataset_label> <joint>
//   frame <c> <a> <b> <m>
//   capsule <joint_a> <joint_b> <radius>
//   palm <joint_a> <joint_b> <rx,ry,rz>
// Offsets and radii in mm, limits in radians; '#' starts a comment.
inline SkeletonModel parse_skeleton(const std::string& text) {
  SkeletonModel model;
  std::istringstream stream(text);
  std::string raw;
  int line_no = 0;
  bool saw_frame = false;
  while (std::getline(stream, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    const std::vector<std::string> tok = detail::split_ws(raw);
    if (tok.empty()) continue;
    const auto fail = [&](const std::string& msg) -> ParseError {
      return ParseError("skeleton line " + std::to_string(line_no) + ": " + msg);
    };

    if (tok[0] == "name") {
      if (tok.size() != 2) throw fail("name takes one value");
      model.name = tok[1];
    } else if (tok[0] == "joint") {
      if (tok.size() < 2) throw fail("joint needs a name");
      SkeletonJoint j;
      j.name = tok[1];
      if (model.joint_index(j.name) >= 0) throw fail("duplicate joint " + j.name);
      bool saw_parent = false, saw_offset = false;
      std::string dofs_text, limits_text;
      for (std::size_t i = 2; i < tok.size(); ++i) {
        const std::size_t eq = tok[i].find('=');
        if (eq == std::string::npos) throw fail("expected key=value, got '" + tok[i] + "'");
        const std::string key = tok[i].substr(0, eq);
        const std::string val = tok[i].substr(eq + 1);
        if (key == "parent") {
          saw_parent = true;
          if (val == "-") {
            j.parent = -1;
          } else {
            j.parent = model.joint_index(val);
            if (j.parent < 0) throw fail("unknown parent " + val);
          }
        } else if (key == "offset") {
          saw_offset = true;
          j.offset = detail::parse_vec3(val, line_no, "offset");
        } else if (key == "dofs") {
          dofs_text = val;
        } else if (key == "limits") {
          limits_text = val;
        } else {
          throw fail("unknown key '" + key + "'");
        }
      }
      if (!saw_parent || !saw_offset) throw fail("joint needs parent= and offset=");
      if (!dofs_text.empty() && dofs_text != "-") {
        for (const std::string& d : detail::split_on(dofs_text, ',')) {
          if (d.size() != 2 || d[0] != 'r' || (d[1] != 'x' && d[1] != 'y' && d[1] != 'z'))
            throw fail("bad dof token '" + d + "' (want rx, ry or rz)");
          JointDof dof;
          dof.axis = d[1];
          j.dofs.push_back(dof);
        }
        if (!limits_text.empty() && limits_text != "-") {
          const std::vector<std::string> ranges = detail::split_on(limits_text, ';');
          if (ranges.size() != j.dofs.size())
            throw fail("limits count " + std::to_string(ranges.size()) + " != dof count " +
                       std::to_string(j.dofs.size()));
          for (std::size_t i = 0; i < ranges.size(); ++i) {
            const std::size_t dd = ranges[i].find("..");
            if (dd == std::string::npos) throw fail("bad limit range '" + ranges[i] + "'");
            j.dofs[i].lo = detail::parse_real(ranges[i].substr(0, dd), line_no, "limit");
            j.dofs[i].hi = detail::parse_real(ranges[i].substr(dd + 2), line_no, "limit");
            if (!(j.dofs[i].lo <= j.dofs[i].hi)) throw fail("inverted limit range");
          }
        }
      }
      if (model.joints.empty() && j.parent != -1) throw fail("first joint must be the root");
      if (!model.joints.empty() && j.parent == -1) throw fail("only the first joint may be the root");
      model.joints.push_back(std::move(j));
    } else if (tok[0] == "annotate") {
      if (tok.size() != 3) throw fail("annotate takes <label> <joint>");
      const int idx = model.joint_index(tok[2]);
      if (idx < 0) throw fail("annotate references unknown joint " + tok[2]);
      for (const auto& [l, jj] : model.annotations)
        if (l == tok[1]) throw fail("duplicate annotation label " + tok[1]);
      model.annotations.emplace_back(tok[1], idx);
    } else if (tok[0] == "frame") {
      if (tok.size() != 5) throw fail("frame takes four labels");
      for (int i = 0; i < 4; ++i) model.frame_labels[i] = tok[1 + i];
      saw_frame = true;
    } else if (tok[0] == "capsule") {
      if (tok.size() != 4) throw fail("capsule takes <joint_a> <joint_b> <radius>");
      SkeletonCapsule c;
      c.a = model.joint_index(tok[1]);
      c.b = model.joint_index(tok[2]);
      if (c.a < 0 || c.b < 0) throw fail("capsule references unknown joint");
      c.radius = detail::parse_real(tok[3], line_no, "radius");
      if (!(c.radius > 0.0)) throw fail("capsule radius must be > 0");
      model.capsules.push_back(c);
    } else if (tok[0] == "palm") {
      if (tok.size() != 4) throw fail("palm takes <joint_a> <joint_b> <rx,ry,rz>");
      model.palm_a = model.joint_index(tok[1]);
      model.palm_b = model.joint_index(tok[2]);
      if (model.palm_a < 0 || model.palm_b < 0) throw fail("palm references unknown joint");
      model.palm_radii = detail::parse_vec3(tok[3], line_no, "palm radii");
    } else {
      throw fail("unknown directive '" + tok[0] + "'");
    }
  }
  model.validate();
  if (saw_frame)
    for (const std::string& label : model.frame_labels)
      if (model.annotation_joint(label) < 0)
        throw ParseError("skeleton: frame label " + label + " is not an annotated joint");
  return model;
}

// Default hand definitions. The chain geometry is shared; the two datasets
// differ in which joints carry annotations and which quad fixes the root
// frame. Offsets are a neutral adult right hand in mm; x is the palm
// normal, y runs across the palm, z along the middle finger.
inline const char* nyu_skeleton_text() {
  return R"(# voxhand hand skeleton, 14-label annotation set
name nyu
joint C parent=- offset=0,0,0
joint W1 parent=C offset=0,-20,-55
joint W2 parent=C offset=0,20,-55
joint thumb_cmc parent=C offset=0,32,-12 dofs=rx,ry limits=-0.6..0.6;-0.35..1.4
joint thumb_mcp parent=thumb_cmc offset=0,20,25 dofs=ry limits=-0.17..1.57
joint thumb_ip parent=thumb_mcp offset=0,14,18 dofs=ry limits=-0.17..1.57
joint thumb_tip parent=thumb_ip offset=0,12,15
joint index_mcp parent=C offset=0,24,42 dofs=rx,ry limits=-0.52..0.52;-0.17..1.57
joint index_pip parent=index_mcp offset=0,0,40 dofs=ry limits=-0.17..1.57
joint index_dip parent=index_pip offset=0,0,25 dofs=ry limits=-0.17..1.57
joint index_tip parent=index_dip offset=0,0,22 dofs=ry limits=-0.17..1.57
joint middle_mcp parent=C offset=0,0,45 dofs=rx,ry limits=-0.52..0.52;-0.17..1.57
joint middle_pip parent=middle_mcp offset=0,0,45 dofs=ry limits=-0.17..1.57
joint middle_dip parent=middle_pip offset=0,0,28 dofs=ry limits=-0.17..1.57
joint middle_tip parent=middle_dip offset=0,0,24 dofs=ry limits=-0.17..1.57
joint ring_mcp parent=C offset=0,-22,42 dofs=rx,ry limits=-0.52..0.52;-0.17..1.57
joint ring_pip parent=ring_mcp offset=0,0,40 dofs=ry limits=-0.17..1.57
joint ring_dip parent=ring_pip offset=0,0,26 dofs=ry limits=-0.17..1.57
joint ring_tip parent=ring_dip offset=0,0,22 dofs=ry limits=-0.17..1.57
joint pinky_mcp parent=C offset=0,-42,35 dofs=rx,ry limits=-0.52..0.52;-0.17..1.57
joint pinky_pip parent=pinky_mcp offset=0,0,32 dofs=ry limits=-0.17..1.57
joint pinky_dip parent=pinky_pip offset=0,0,20 dofs=ry limits=-0.17..1.57
joint pinky_tip parent=pinky_dip offset=0,0,18 dofs=ry limits=-0.17..1.57
annotate C C
annotate W1 W1
annotate W2 W2
annotate T1 thumb_mcp
annotate T2 thumb_ip
annotate T3 thumb_tip
annotate I1 index_mcp
annotate I2 index_tip
annotate M1 middle_mcp
annotate M2 middle_tip
annotate R1 ring_mcp
annotate R2 ring_tip
annotate P1 pinky_mcp
annotate P2 pinky_tip
frame C W1 W2 M1
capsule W1 W2 16
capsule thumb_cmc thumb_mcp 12
capsule thumb_mcp thumb_ip 10
capsule thumb_ip thumb_tip 8
capsule index_mcp index_pip 9
capsule index_pip index_dip 8
capsule index_dip index_tip 7
capsule middle_mcp middle_pip 9
capsule middle_pip middle_dip 8
capsule middle_dip middle_tip 7
capsule ring_mcp ring_pip 9
capsule ring_pip ring_dip 8
capsule ring_dip ring_tip 7
capsule pinky_mcp pinky_pip 8
capsule pinky_pip pinky_dip 7
capsule pinky_dip pinky_tip 6
palm C middle_mcp 15,44,40
)";
}

inline const char* icvl_skeleton_text() {
  return R"(# voxhand hand skeleton, 16-label annotation set
name icvl
joint C parent=- offset=0,0,0
joint W1 parent=C offset=0,-20,-55
joint W2 parent=C offset=0,20,-55
joint thumb_cmc parent=C offset=0,32,-12 dofs=rx,ry limits=-0.6..0.6;-0.35..1.4
joint thumb_mcp parent=thumb_cmc offset=0,20,25 dofs=ry limits=-0.17..1.57
joint thumb_ip parent=thumb_mcp offset=0,14,18 dofs=ry limits=-0.17..1.57
joint thumb_tip parent=thumb_ip offset=0,12,15
joint index_mcp parent=C offset=0,24,42 dofs=rx,ry limits=-0.52..0.52;-0.17..1.57
joint index_pip parent=index_mcp offset=0,0,40 dofs=ry limits=-0.17..1.57
joint index_dip parent=index_pip offset=0,0,25 dofs=ry limits=-0.17..1.57
joint index_tip parent=index_dip offset=0,0,22 dofs=ry limits=-0.17..1.57
joint middle_mcp parent=C offset=0,0,45 dofs=rx,ry limits=-0.52..0.52;-0.17..1.57
joint middle_pip parent=middle_mcp offset=0,0,45 dofs=ry limits=-0.17..1.57
joint middle_dip parent=middle_pip offset=0,0,28 dofs=ry limits=-0.17..1.57
joint middle_tip parent=middle_dip offset=0,0,24 dofs=ry limits=-0.17..1.57
joint ring_mcp parent=C offset=0,-22,42 dofs=rx,ry limits=-0.52..0.52;-0.17..1.57
joint ring_pip parent=ring_mcp offset=0,0,40 dofs=ry limits=-0.17..1.57
joint ring_dip parent=ring_pip offset=0,0,26 dofs=ry limits=-0.17..1.57
joint ring_tip parent=ring_dip offset=0,0,22 dofs=ry limits=-0.17..1.57
joint pinky_mcp parent=C offset=0,-42,35 dofs=rx,ry limits=-0.52..0.52;-0.17..1.57
joint pinky_pip parent=pinky_mcp offset=0,0,32 dofs=ry limits=-0.17..1.57
joint pinky_dip parent=pinky_pip offset=0,0,20 dofs=ry limits=-0.17..1.57
joint pinky_tip parent=pinky_dip offset=0,0,18 dofs=ry limits=-0.17..1.57
annotate C C
annotate T1 thumb_mcp
annotate T2 thumb_ip
annotate T3 thumb_tip
annotate I1 index_mcp
annotate I2 index_pip
annotate I3 index_tip
annotate M1 middle_mcp
annotate M2 middle_pip
annotate M3 middle_tip
annotate R1 ring_mcp
annotate R2 ring_pip
annotate R3 ring_tip
annotate P1 pinky_mcp
annotate P2 pinky_pip
annotate P3 pinky_tip
frame C I1 P1 M1
capsule W1 W2 16
capsule thumb_cmc thumb_mcp 12
capsule thumb_mcp thumb_ip 10
capsule thumb_ip thumb_tip 8
capsule index_mcp index_pip 9
capsule index_pip index_dip 8
capsule index_dip index_tip 7
capsule middle_mcp middle_pip 9
capsule middle_pip middle_dip 8
capsule middle_dip middle_tip 7
capsule ring_mcp ring_pip 9
capsule ring_pip ring_dip 8
capsule ring_dip ring_tip 7
capsule pinky_mcp pinky_pip 8
capsule pinky_pip pinky_dip 7
capsule pinky_dip pinky_tip 6
palm C middle_mcp 15,44,40
)";
}

inline SkeletonModel default_nyu_skeleton() { return parse_skeleton(nyu_skeleton_text()); }
inline SkeletonModel default_icvl_skeleton() { return parse_skeleton(icvl_skeleton_text()); }

}  // namespace voxhand
