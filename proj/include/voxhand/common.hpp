#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace voxhand {

// Error hierarchy. Every failure mode raised by the library derives from
// Error so callers can catch broadly or by exact kind.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyForeground : Error { using Error::Error; };
struct InvalidSpec : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct TapeMismatch : Error { using Error::Error; };
struct InvalidFraction : Error { using Error::Error; };
struct InvalidJointCount : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct DegenerateFrame : Error { using Error::Error; };
struct MissingJoint : Error { using Error::Error; };
struct InvalidBounds : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ChannelMismatch : Error { using Error::Error; };
struct InvalidScale : Error { using Error::Error; };
struct EmptyPoseSource : Error { using Error::Error; };
struct JointMismatch : Error { using Error::Error; };
struct EmptyEvaluation : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct StageError : Error {
  StageError(const std::string& stage, const std::string& msg)
      : Error("[" + stage + "] " + msg), stage_name(stage) {}
  std::string stage_name;
};

// Seeded RNG wrapper. The raw engine is std::mt19937_64; the mapping to
// doubles is done here rather than through std distributions so that a
// given seed yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Marsaglia polar method; one spare value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace voxhand
