#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "voxhand/eval.hpp"

using namespace voxhand;

namespace {

JointSet make_set(const std::vector<std::string>& names, const std::vector<Vec3>& pos) {
  JointSet js;
  js.names = names;
  js.positions = pos;
  return js;
}

JointSet random_set(const std::vector<std::string>& names, Rng& rng) {
  JointSet js;
  js.names = names;
  for (std::size_t i = 0; i < names.size(); ++i)
    js.positions.push_back({rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0),
                            rng.uniform(200.0, 600.0)});
  return js;
}

FrameErrors frame_with_max(const std::vector<std::string>& names, double max_error, Rng& rng) {
  FrameErrors f;
  f.names = names;
  for (std::size_t i = 0; i + 1 < names.size(); ++i)
    f.errors.push_back(rng.uniform(0.0, max_error));
  f.errors.push_back(max_error);
  f.max_error = max_error;
  return f;
}

const std::vector<std::string> kNames{"C", "W1", "W2", "T1", "I1"};

}  // namespace

TEST(FrameErrorsOp, PerfectPredictionIsAllZero) {
  Rng rng(1);
  const JointSet gt = random_set(kNames, rng);
  const FrameErrors f = frame_errors(gt, gt);
  EXPECT_EQ(f.names, kNames);
  for (double e : f.errors) EXPECT_EQ(e, 0.0);
  EXPECT_EQ(f.max_error, 0.0);
}

TEST(FrameErrorsOp, PythagoreanDisplacement) {
  const JointSet gt = make_set({"A", "B"}, {{0, 0, 0}, {10, 10, 10}});
  JointSet pred = gt;
  pred.positions[1] = {13.0, 14.0, 10.0};
  const FrameErrors f = frame_errors(pred, gt);
  EXPECT_DOUBLE_EQ(f.errors[0], 0.0);
  EXPECT_DOUBLE_EQ(f.errors[1], 5.0);
  EXPECT_DOUBLE_EQ(f.max_error, 5.0);
}

TEST(FrameErrorsOp, MatchesNormOracleOnRandomPairs) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const JointSet pred = random_set(kNames, rng);
    const JointSet gt = random_set(kNames, rng);
    const FrameErrors f = frame_errors(pred, gt);
    double want_max = 0.0;
    for (std::size_t j = 0; j < kNames.size(); ++j) {
      const double dx = pred.positions[j].x - gt.positions[j].x;
      const double dy = pred.positions[j].y - gt.positions[j].y;
      const double dz = pred.positions[j].z - gt.positions[j].z;
      const double want = std::sqrt(dx * dx + dy * dy + dz * dz);
      EXPECT_DOUBLE_EQ(f.errors[j], want);
      want_max = std::max(want_max, want);
    }
    EXPECT_DOUBLE_EQ(f.max_error, want_max);
  }
}

TEST(FrameErrorsOp, AlignsGroundTruthByName) {
  Rng rng(3);
  const JointSet pred = random_set(kNames, rng);
  JointSet gt = random_set(kNames, rng);
  JointSet shuffled;
  for (int i : {4, 2, 0, 1, 3}) {
    shuffled.names.push_back(gt.names[i]);
    shuffled.positions.push_back(gt.positions[i]);
  }
  const FrameErrors direct = frame_errors(pred, gt);
  const FrameErrors aligned = frame_errors(pred, shuffled);
  for (std::size_t j = 0; j < kNames.size(); ++j)
    EXPECT_DOUBLE_EQ(aligned.errors[j], direct.errors[j]);
}

TEST(FrameErrorsOp, MismatchListsDifferingNames) {
  Rng rng(5);
  const JointSet pred = random_set({"C", "W1", "XTRA"}, rng);
  const JointSet gt = random_set({"C", "W1", "M1"}, rng);
  try {
    frame_errors(pred, gt);
    FAIL() << "expected JointMismatch";
  } catch (const JointMismatch& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("XTRA"), std::string::npos);
    EXPECT_NE(msg.find("M1"), std::string::npos);
  }
}

TEST(GoodFrames, CountingExamples) {
  Rng rng(11);
  const std::vector<FrameErrors> frames{frame_with_max(kNames, 30.0, rng),
                                        frame_with_max(kNames, 10.0, rng)};
  EXPECT_DOUBLE_EQ(fraction_good_frames(frames, 20.0), 0.5);
  EXPECT_DOUBLE_EQ(fraction_good_frames(frames, 40.0), 1.0);
  // Inclusive comparison: a frame exactly at the threshold is good.
  EXPECT_DOUBLE_EQ(fraction_good_frames(frames, 30.0), 1.0);
  EXPECT_DOUBLE_EQ(fraction_good_frames(frames, 10.0), 0.5);
  EXPECT_DOUBLE_EQ(fraction_good_frames(frames, 9.999), 0.0);
}

TEST(GoodFrames, AllZeroErrorsAreGoodEverywhere) {
  std::vector<FrameErrors> frames(3);
  for (FrameErrors& f : frames) {
    f.names = kNames;
    f.errors.assign(kNames.size(), 0.0);
    f.max_error = 0.0;
  }
  for (double t : {0.0, 1.0, 50.0}) EXPECT_DOUBLE_EQ(fraction_good_frames(frames, t), 1.0);
}

TEST(GoodFrames, ThousandFrameCountingOracle) {
  Rng rng(2024);
  std::vector<FrameErrors> frames;
  for (int i = 0; i < 1000; ++i) frames.push_back(frame_with_max(kNames, rng.uniform(0.0, 90.0), rng));

  const std::vector<double> thresholds{0.0, 5.0, 17.5, 40.0, 62.0, 80.0, 95.0};
  const std::vector<double> got = fraction_good_frames(frames, thresholds);
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    int count = 0;
    for (const FrameErrors& f : frames)
      if (f.max_error <= thresholds[k]) ++count;
    EXPECT_DOUBLE_EQ(got[k], count / 1000.0);
  }
  // Monotone non-decreasing in the threshold.
  for (std::size_t k = 1; k < got.size(); ++k) EXPECT_GE(got[k], got[k - 1]);

  // Invariant under frame reordering.
  std::vector<FrameErrors> shuffled = frames;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(99));
  EXPECT_EQ(fraction_good_frames(shuffled, thresholds), got);

  // Inflating every error never helps at a fixed threshold.
  std::vector<FrameErrors> inflated = frames;
  for (FrameErrors& f : inflated) {
    for (double& e : f.errors) e *= 1.3;
    f.max_error *= 1.3;
  }
  const std::vector<double> worse = fraction_good_frames(inflated, thresholds);
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_LE(worse[k], got[k]);
}

TEST(GoodFrames, SingleFrameIsZeroOrOne) {
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const std::vector<FrameErrors> one{frame_with_max(kNames, rng.uniform(0.0, 60.0), rng)};
    const double f = fraction_good_frames(one, rng.uniform(0.0, 60.0));
    EXPECT_TRUE(f == 0.0 || f == 1.0);
  }
}

TEST(GoodFrames, EmptyEvaluationRejected) {
  EXPECT_THROW(fraction_good_frames({}, 10.0), EmptyEvaluation);
  EXPECT_THROW(per_joint_mean_error({}), EmptyEvaluation);
  EXPECT_THROW(summarize({}), EmptyEvaluation);
}

TEST(PerJointMean, SingleFrameReturnsItsErrors) {
  Rng rng(4);
  const FrameErrors f = frame_with_max(kNames, 25.0, rng);
  const PerJointMeans m = per_joint_mean_error({f});
  EXPECT_EQ(m.names, kNames);
  for (std::size_t j = 0; j < f.errors.size(); ++j) EXPECT_DOUBLE_EQ(m.means[j], f.errors[j]);
}

TEST(PerJointMean, TwoFrameAverage) {
  FrameErrors a, b;
  a.names = b.names = {"J"};
  a.errors = {10.0};
  a.max_error = 10.0;
  b.errors = {20.0};
  b.max_error = 20.0;
  const PerJointMeans m = per_joint_mean_error({a, b});
  EXPECT_DOUBLE_EQ(m.means[0], 15.0);
  EXPECT_DOUBLE_EQ(m.overall, 15.0);
}

TEST(PerJointMean, MatchesAccumulationOracle) {
  Rng rng(77);
  std::vector<FrameErrors> frames;
  for (int i = 0; i < 64; ++i) frames.push_back(frame_with_max(kNames, rng.uniform(1.0, 50.0), rng));
  const PerJointMeans m = per_joint_mean_error(frames);

  double overall = 0.0;
  for (std::size_t j = 0; j < kNames.size(); ++j) {
    double acc = 0.0;
    for (const FrameErrors& f : frames) acc += f.errors[j];
    EXPECT_NEAR(m.means[j], acc / frames.size(), 1e-12);
    overall += acc / frames.size();
  }
  EXPECT_NEAR(m.overall, overall / kNames.size(), 1e-12);
}

TEST(PerJointMean, InconsistentJointListsRejected) {
  Rng rng(6);
  FrameErrors a = frame_with_max(kNames, 10.0, rng);
  FrameErrors b = frame_with_max({"C", "W1", "W2", "T1", "I9"}, 10.0, rng);
  EXPECT_THROW(per_joint_mean_error({a, b}), JointMismatch);
}

TEST(EvalCsvOut, PerfectSummaryGivesConstantCurve) {
  std::vector<FrameErrors> frames(4);
  for (FrameErrors& f : frames) {
    f.names = kNames;
    f.errors.assign(kNames.size(), 0.0);
  }
  const EvalCsv csv = emit_csv(summarize(frames), 1.0);
  std::istringstream in(csv.curve);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "threshold_mm,fraction");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.substr(line.find(',') + 1), "1");
    ++rows;
  }
  EXPECT_EQ(rows, 81);
}

TEST(EvalCsvOut, TableHasReportingThresholdRows) {
  Rng rng(12);
  std::vector<FrameErrors> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(frame_with_max(kNames, rng.uniform(5.0, 70.0), rng));
  const EvalSummary s = summarize(frames);
  const EvalCsv csv = emit_csv(s, 5.0);

  std::istringstream in(csv.table);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "threshold_mm,fraction");
  std::vector<double> row_t, row_f;
  while (std::getline(in, line)) {
    const std::size_t comma = line.find(',');
    row_t.push_back(std::stod(line.substr(0, comma)));
    row_f.push_back(std::stod(line.substr(comma + 1)));
  }
  ASSERT_EQ(row_t, (std::vector<double>{20.0, 40.0, 50.0}));
  for (std::size_t k = 0; k < row_t.size(); ++k)
    EXPECT_DOUBLE_EQ(row_f[k], fraction_good_frames(frames, row_t[k]));

  // Step 5 curve covers 0..80 inclusive.
  int curve_rows = 0;
  std::istringstream cin_(csv.curve);
  std::getline(cin_, line);
  while (std::getline(cin_, line)) ++curve_rows;
  EXPECT_EQ(curve_rows, 17);
}

TEST(EvalCsvOut, RoundTripAtSixSignificantDigits) {
  Rng rng(31);
  std::vector<FrameErrors> frames;
  for (int i = 0; i < 7; ++i) frames.push_back(frame_with_max(kNames, rng.uniform(0.0, 80.0), rng));
  const EvalCsv csv = emit_csv(summarize(frames), 2.5);

  for (const std::string& text : {csv.curve, csv.table}) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::ostringstream rebuilt;
    rebuilt << line << "\n";
    while (std::getline(in, line)) {
      const std::size_t comma = line.find(',');
      const double t = std::stod(line.substr(0, comma));
      const double f = std::stod(line.substr(comma + 1));
      std::ostringstream row;
      row << std::setprecision(6) << t << "," << f;
      rebuilt << row.str() << "\n";
    }
    EXPECT_EQ(rebuilt.str(), text);
  }
}

TEST(EvalCsvOut, SummaryFractionsMatchDirectComputation) {
  Rng rng(55);
  std::vector<FrameErrors> frames;
  for (int i = 0; i < 200; ++i) frames.push_back(frame_with_max(kNames, rng.uniform(0.0, 100.0), rng));
  const EvalSummary s = summarize(frames);
  double prev = 0.0;
  for (double t = 0.0; t <= 100.0; t += 3.7) {
    const double f = s.fraction_at(t);
    EXPECT_DOUBLE_EQ(f, fraction_good_frames(frames, t));
    EXPECT_GE(f, prev);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
    prev = f;
  }
  EXPECT_DOUBLE_EQ(s.fraction_at(1e9), 1.0);
}
