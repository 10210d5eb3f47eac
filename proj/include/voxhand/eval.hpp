#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "voxhand/common.hpp"
#include "voxhand/skeleton.hpp"

namespace voxhand {

// Per-joint position errors for one evaluated frame, mm.
struct FrameErrors {
  std::vector<std::string> names;
  std::vector<double> errors;
  double max_error = 0.0;
};

// Euclidean error per joint. The sets must cover the same joint names;
// ground truth is aligned to the prediction's order.
inline FrameErrors frame_errors(const JointSet& pred, const JointSet& gt) {
  pred.validate();
  gt.validate();
  std::vector<std::string> odd;
  for (const std::string& n : pred.names)
    if (gt.find(n) < 0) odd.push_back(n);
  for (const std::string& n : gt.names)
    if (pred.find(n) < 0) odd.push_back(n);
  if (!odd.empty() || pred.names.size() != gt.names.size()) {
    std::string msg = "frame_errors: joint sets differ:";
    for (const std::string& n : odd) msg += " " + n;
    throw JointMismatch(msg);
  }
  FrameErrors out;
  out.names = pred.names;
  out.errors.reserve(pred.names.size());
  for (std::size_t i = 0; i < pred.names.size(); ++i) {
    const double e = (pred.positions[i] - gt.at(pred.names[i])).norm();
    out.errors.push_back(e);
    out.max_error = std::max(out.max_error, e);
  }
  return out;
}

// Fraction of frames whose worst joint is within each threshold (inclusive).
inline std::vector<double> fraction_good_frames(const std::vector<FrameErrors>& frames,
                                                const std::vector<double>& thresholds) {
  if (frames.empty()) throw EmptyEvaluation("fraction_good_frames: no frames");
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    std::size_t good = 0;
    for (const FrameErrors& f : frames)
      if (f.max_error <= t) ++good;
    out.push_back(static_cast<double>(good) / frames.size());
  }
  return out;
}

inline double fraction_good_frames(const std::vector<FrameErrors>& frames, double threshold) {
  return fraction_good_frames(frames, std::vector<double>{threshold})[0];
}

struct PerJointMeans {
  std::vector<std::string> names;
  std::vector<double> means;
  double overall = 0.0;  // mean over joints of the per-joint means
};

inline PerJointMeans per_joint_mean_error(const std::vector<FrameErrors>& frames) {
  if (frames.empty()) throw EmptyEvaluation("per_joint_mean_error: no frames");
  PerJointMeans out;
  out.names = frames[0].names;
  out.means.assign(out.names.size(), 0.0);
  for (const FrameErrors& f : frames) {
    if (f.names != out.names)
      throw JointMismatch("per_joint_mean_error: inconsistent joint lists across frames");
    for (std::size_t j = 0; j < f.errors.size(); ++j) out.means[j] += f.errors[j];
  }
  for (double& m : out.means) m /= frames.size();
  for (double m : out.means) out.overall += m;
  if (!out.means.empty()) out.overall /= out.means.size();
  return out;
}

// Evaluation rollup: the good-frames curve is recoverable at any threshold
// from the sorted per-frame maxima.
struct EvalSummary {
  std::vector<double> sorted_max_errors;  // ascending, one per frame
  std::vector<std::string> joint_names;
  std::vector<double> joint_means;
  double overall_mean = 0.0;

  double fraction_at(double threshold) const {
    if (sorted_max_errors.empty()) throw EmptyEvaluation("EvalSummary: no frames");
    const auto it = std::upper_bound(sorted_max_errors.begin(), sorted_max_errors.end(), threshold);
    return static_cast<double>(it - sorted_max_errors.begin()) / sorted_max_errors.size();
  }
};

inline EvalSummary summarize(const std::vector<FrameErrors>& frames) {
  if (frames.empty()) throw EmptyEvaluation("summarize: no frames");
  EvalSummary out;
  out.sorted_max_errors.reserve(frames.size());
  for (const FrameErrors& f : frames) out.sorted_max_errors.push_back(f.max_error);
  std::sort(out.sorted_max_errors.begin(), out.sorted_max_errors.end());
  const PerJointMeans means = per_joint_mean_error(frames);
  out.joint_names = means.names;
  out.joint_means = means.means;
  out.overall_mean = means.overall;
  return out;
}

struct EvalCsv {
  std::string curve;  // threshold_mm,fraction sampled over [0, 80]
  std::string table;  // rows at the 20/40/50 mm reporting thresholds
};

namespace detail {

inline std::string format_real(double v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << v;
  return ss.str();
}

}  // namespace detail

inline EvalCsv emit_csv(const EvalSummary& summary, double step = 1.0) {
  if (!(step > 0.0)) throw InvalidSpec("emit_csv: step must be > 0");
  EvalCsv out;
  std::ostringstream curve;
  curve << "threshold_mm,fraction\n";
  for (double t = 0.0; t <= 80.0 + 1e-9; t += step)
    curve << detail::format_real(t) << "," << detail::format_real(summary.fraction_at(t)) << "\n";
  out.curve = curve.str();

  std::ostringstream table;
  table << "threshold_mm,fraction\n";
  for (double t : {20.0, 40.0, 50.0})
    table << detail::format_real(t) << "," << detail::format_real(summary.fraction_at(t)) << "\n";
  out.table = table.str();
  return out;
}

}  // namespace voxhand
