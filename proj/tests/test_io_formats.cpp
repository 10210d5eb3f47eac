#include <gtest/gtest.h>

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "voxhand/io.hpp"

using namespace voxhand;

namespace {

DepthImage random_depth(int w, int h, Rng& rng) {
  DepthImage img(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (rng.uniform() < 0.6) {
        img.at(u, v) = std::floor(rng.uniform(1.0, 2000.0));  // integral mm
        img.mask[img.index(u, v)] = 1;
      }
  return img;
}

std::string serialized_depth(const DepthImage& img) {
  std::ostringstream os(std::ios::binary);
  save_depth(os, img);
  return os.str();
}

}  // namespace

TEST(DepthFile, MinimalOnePixelRoundTrip) {
  DepthImage img(1, 1);
  img.at(0, 0) = 123.0;
  img.mask[0] = 1;
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  save_depth(ss, img);
  // magic + w + h + one u16 + one mask byte
  EXPECT_EQ(ss.str().size(), 4u + 4u + 4u + 2u + 1u);
  const DepthImage back = load_depth(ss);
  EXPECT_EQ(back.width, 1);
  EXPECT_EQ(back.height, 1);
  EXPECT_EQ(back.at(0, 0), 123.0);
  EXPECT_TRUE(back.masked(0, 0));
}

TEST(DepthFile, RandomImageRoundTripsExactly) {
  Rng rng(31);
  const DepthImage img = random_depth(17, 9, rng);
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  save_depth(ss, img);
  const DepthImage back = load_depth(ss);
  ASSERT_EQ(back.width, img.width);
  ASSERT_EQ(back.height, img.height);
  EXPECT_EQ(back.depth, img.depth);
  EXPECT_EQ(back.mask, img.mask);
}

TEST(DepthFile, QuantizesToNearestMillimetre) {
  DepthImage img(3, 1);
  img.at(0, 0) = 500.4;
  img.at(1, 0) = 500.6;
  img.at(2, 0) = 70000.0;  // beyond u16 range, clamps
  for (int u = 0; u < 3; ++u) img.mask[img.index(u, 0)] = 1;
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  save_depth(ss, img);
  const DepthImage back = load_depth(ss);
  EXPECT_EQ(back.at(0, 0), 500.0);
  EXPECT_EQ(back.at(1, 0), 501.0);
  EXPECT_EQ(back.at(2, 0), 65535.0);
}

TEST(DepthFile, WrongMagicReportsOffsetZero) {
  std::string bytes = serialized_depth(DepthImage(1, 1));
  bytes[0] = 'X';
  std::istringstream in(bytes, std::ios::binary);
  try {
    load_depth(in);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos);
  }
}

TEST(DepthFile, TruncatedFileReportsByteOffset) {
  Rng rng(5);
  const std::string bytes = serialized_depth(random_depth(4, 3, rng));
  // Cut inside the depth plane (after magic+dims+2 samples = 16 bytes).
  std::istringstream in(bytes.substr(0, 16), std::ios::binary);
  try {
    load_depth(in);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 16"), std::string::npos);
  }
}

TEST(DepthFile, TrailingBytesRejected) {
  Rng rng(6);
  const std::string bytes = serialized_depth(random_depth(2, 2, rng)) + "zz";
  std::istringstream in(bytes, std::ios::binary);
  EXPECT_THROW(load_depth(in), FormatError);
}

TEST(DepthFile, NonBinaryMaskByteRejected) {
  std::string bytes = serialized_depth(DepthImage(1, 1));
  bytes.back() = 7;
  std::istringstream in(bytes, std::ios::binary);
  try {
    load_depth(in);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("mask byte"), std::string::npos);
  }
}

TEST(DepthFile, PathRoundTripAndMissingFile) {
  Rng rng(9);
  const DepthImage img = random_depth(6, 5, rng);
  const std::string path = testing::TempDir() + "voxhand_depth_test.d3d";
  save_depth(path, img);
  const DepthImage back = load_depth(path);
  EXPECT_EQ(back.depth, img.depth);
  EXPECT_THROW(load_depth(path + ".missing"), FormatError);
}

TEST(TsdfFile, RoundTripsAtFloatPrecision) {
  VoxelGridSpec spec;
  spec.resolution = 6;
  spec.voxel_size = 4.5;
  spec.truncation = 45.0;
  TsdfVolume vol(spec, {10.0, -20.0, 480.0});
  Rng rng(13);
  for (double& v : vol.values) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  save_tsdf(ss, vol);
  const TsdfVolume back = load_tsdf(ss);
  EXPECT_EQ(back.spec.resolution, 6);
  EXPECT_EQ(back.spec.voxel_size, 4.5);
  EXPECT_EQ(back.spec.truncation, 45.0);
  EXPECT_EQ(back.origin.x, 10.0);
  EXPECT_EQ(back.origin.y, -20.0);
  EXPECT_EQ(back.origin.z, 480.0);
  EXPECT_EQ(back.values, vol.values);  // values were float-representable
}

TEST(TsdfFile, HeaderValidation) {
  TsdfVolume vol(VoxelGridSpec{4, 5.0, 50.0}, {});
  std::ostringstream os(std::ios::binary);
  save_tsdf(os, vol);
  std::string bytes = os.str();

  std::string magic = bytes;
  magic[1] = '9';
  std::istringstream bad_magic(magic, std::ios::binary);
  EXPECT_THROW(load_tsdf(bad_magic), FormatError);

  std::istringstream truncated(bytes.substr(0, bytes.size() - 2), std::ios::binary);
  EXPECT_THROW(load_tsdf(truncated), FormatError);

  std::istringstream padded(bytes + "!", std::ios::binary);
  EXPECT_THROW(load_tsdf(padded), FormatError);
}

TEST(JointsCsv, HeaderAndRowShape) {
  JointSet a;
  a.names = {"C", "T1"};
  a.positions = {{1.0, 2.0, 3.0}, {-4.5, 0.25, 600.0}};
  const std::string csv = joints_to_csv({a, a});
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "frame,C_x,C_y,C_z,T1_x,T1_y,T1_z");
  std::getline(in, line);
  EXPECT_EQ(line, "0,1,2,3,-4.5,0.25,600");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "1,");
}

TEST(JointsCsv, RandomRoundTripIsExact) {
  Rng rng(21);
  std::vector<JointSet> frames;
  for (int f = 0; f < 12; ++f) {
    JointSet js;
    js.names = {"C", "W1", "W2", "M1"};
    for (std::size_t j = 0; j < js.names.size(); ++j)
      js.positions.push_back({rng.uniform(-300.0, 300.0), rng.uniform(-300.0, 300.0),
                              rng.uniform(100.0, 900.0)});
    frames.push_back(js);
  }
  const std::vector<JointSet> back = joints_from_csv(joints_to_csv(frames));
  ASSERT_EQ(back.size(), frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    EXPECT_EQ(back[f].names, frames[f].names);
    for (std::size_t j = 0; j < frames[f].positions.size(); ++j) {
      EXPECT_EQ(back[f].positions[j].x, frames[f].positions[j].x);
      EXPECT_EQ(back[f].positions[j].y, frames[f].positions[j].y);
      EXPECT_EQ(back[f].positions[j].z, frames[f].positions[j].z);
    }
  }
}

TEST(JointsCsv, MalformedInputsGiveLineNumberedErrors) {
  EXPECT_THROW(joints_from_csv(""), ParseError);
  EXPECT_THROW(joints_from_csv("frame,C_x,C_y\n"), ParseError);          // broken triple
  EXPECT_THROW(joints_from_csv("time,C_x,C_y,C_z\n"), ParseError);       // wrong leader
  EXPECT_THROW(joints_from_csv("frame,C_x,C_y,B_z\n"), ParseError);      // mixed names
  try {
    joints_from_csv("frame,C_x,C_y,C_z\n0,1,2,3\n1,4,nope,6\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  try {
    joints_from_csv("frame,C_x,C_y,C_z\n0,1,2\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(joints_to_csv({}), EmptyDataset);
}

TEST(LossCsv, EpochRowsAreOneBased) {
  EXPECT_EQ(loss_to_csv({0.5, 0.25}), "epoch,loss\n1,0.5\n2,0.25\n");
  EXPECT_EQ(loss_to_csv({}), "epoch,loss\n");
}

TEST(Manifest, RoundTripWithAndWithoutClean) {
  std::vector<ManifestRecord> records(2);
  records[0].depth = "a/depth_000.d3d";
  records[0].joints = "a/joints.csv";
  records[0].scale = 0.85;
  records[0].cam = {160.0, 160.0, 64.0, 64.0, 128.0, 128.0};
  records[1].depth = "b/depth_001.d3d";
  records[1].joints = "b/joints.csv";
  records[1].scale = 1.2;
  records[1].cam = {70.5, 70.5, 24.0, 24.0, 48.0, 48.0};
  records[1].clean = "b/clean_001.d3d";

  const std::string text = manifest_to_text(records);
  EXPECT_EQ(text.substr(0, 6), "depth=");
  EXPECT_NE(text.find("scale=0.85 cam=160,160,64,64,128,128"), std::string::npos);
  EXPECT_NE(text.find(" clean=b/clean_001.d3d"), std::string::npos);

  const std::vector<ManifestRecord> back = parse_manifest(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].depth, records[0].depth);
  EXPECT_EQ(back[0].joints, records[0].joints);
  EXPECT_EQ(back[0].scale, 0.85);
  EXPECT_EQ(back[0].cam, records[0].cam);
  EXPECT_TRUE(back[0].clean.empty());
  EXPECT_EQ(back[1].clean, "b/clean_001.d3d");
  EXPECT_EQ(back[1].cam, records[1].cam);

  const CameraIntrinsics k = back[0].intrinsics();
  EXPECT_EQ(k.fx, 160.0);
  EXPECT_EQ(k.cy, 64.0);
}

TEST(Manifest, CommentsAndBlankLinesSkipped) {
  const std::string text =
      "# dataset header comment\n"
      "\n"
      "depth=d.d3d joints=j.csv scale=1 cam=1,1,0,0,2,2\n";
  const std::vector<ManifestRecord> back = parse_manifest(text);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].depth, "d.d3d");
}

TEST(Manifest, MalformedLinesRejectedWithLineNumbers) {
  const std::string good = "depth=d joints=j scale=1 cam=1,1,0,0,2,2\n";
  EXPECT_THROW(parse_manifest(good + "depth=d joints=j scale=1\n"), ParseError);  // no cam
  EXPECT_THROW(parse_manifest("depth=d joints=j scale=0 cam=1,1,0,0,2,2\n"), ParseError);
  EXPECT_THROW(parse_manifest("depth=d joints=j scale=1 cam=1,1,0,0\n"), ParseError);
  EXPECT_THROW(parse_manifest("depth=d joints=j scale=1 cam=1,1,0,0,2,2 extra=x\n"), ParseError);
  EXPECT_THROW(parse_manifest("depth joints=j scale=1 cam=1,1,0,0,2,2\n"), ParseError);
  try {
    parse_manifest(good + good + "depth= joints=j scale=1 cam=1,1,0,0,2,2\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}
