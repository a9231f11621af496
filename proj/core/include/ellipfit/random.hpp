#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

namespace ellip {

// Counter-based pseudorandom stream (Philox4x64-10).
//
// A stream is fully determined by the pair (master_seed, stream_id), which is
// used as the cipher key; the block counter enumerates outputs.  Draws are
// therefore reproducible across platforms and independent of thread
// scheduling: any trial can be replayed in isolation by reconstructing its
// stream from the two integers.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_id);

  // Project-wide convention: the purpose tag lives in the high 32 bits of the
  // stream id and the trial index in the low 32 bits.
  static RandomStream for_purpose(std::uint64_t master_seed,
                                  std::uint64_t purpose_tag,
                                  std::uint64_t trial_index);

  // Sibling stream with the same master seed at stream_id + offset, starting
  // from block zero.  Used to hand each trial of an experiment its own stream.
  RandomStream fork(std::uint64_t offset) const;

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01();

  // Standard normal via the Marsaglia polar method (uses only sqrt/log, so
  // results are bit-stable across libm implementations; the spare variate is
  // cached).
  double normal();

  Eigen::VectorXd normal_vector(Eigen::Index n);

  // Uniform over {0, 1, ..., bound-1} by rejection (bound > 0).
  std::uint64_t uniform_below(std::uint64_t bound);

 private:
  void refill();

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 4> buf_{};
  int buf_pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Purpose tags for the stream-id convention above.  Values are arbitrary but
// frozen: changing them changes every experiment's output.
namespace purpose {
inline constexpr std::uint64_t kFitTrial = 1;
inline constexpr std::uint64_t kDualSearch = 2;
inline constexpr std::uint64_t kDualProbe = 3;
inline constexpr std::uint64_t kGramDeviation = 16;
inline constexpr std::uint64_t kInftyNorm = 17;
inline constexpr std::uint64_t kSEtaTail = 18;
inline constexpr std::uint64_t kWeibullSum = 19;
inline constexpr std::uint64_t kHansonWright = 20;
inline constexpr std::uint64_t kChi2 = 21;
inline constexpr std::uint64_t kQtilde = 22;
inline constexpr std::uint64_t kMoments = 23;
inline constexpr std::uint64_t kMomentGrowth = 24;
inline constexpr std::uint64_t kNetProfile = 25;
inline constexpr std::uint64_t kDirectionDiag = 26;
inline constexpr std::uint64_t kInversePerturb = 27;
}  // namespace purpose

}  // namespace ellip
