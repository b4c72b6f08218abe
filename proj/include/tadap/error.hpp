#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tadap {

enum class Errc {
  invalid_pose,
  insufficient_data,
  degenerate_configuration,
  horizon_singularity,
  insufficient_trajectory,
  degenerate_poses,
  dimension_mismatch,
  bad_magic,
  bad_version,
  truncated,
  non_finite,
  empty_sample,
  zero_norm,
  degenerate_frame,
  degenerate_training,
  invalid_argument,
  empty_roi,
  unknown_scene,
  empty_input,
  io,
  parse,
  config,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_pose: return "invalid-pose";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::degenerate_configuration: return "degenerate-configuration";
    case Errc::horizon_singularity: return "horizon-singularity";
    case Errc::insufficient_trajectory: return "insufficient-trajectory";
    case Errc::degenerate_poses: return "degenerate-poses";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::bad_magic: return "bad-magic";
    case Errc::bad_version: return "bad-version";
    case Errc::truncated: return "truncated";
    case Errc::non_finite: return "non-finite";
    case Errc::empty_sample: return "empty-sample";
    case Errc::zero_norm: return "zero-norm";
    case Errc::degenerate_frame: return "degenerate-frame";
    case Errc::degenerate_training: return "degenerate-training";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::empty_roi: return "empty-roi";
    case Errc::unknown_scene: return "unknown-scene";
    case Errc::empty_input: return "empty-input";
    case Errc::io: return "io";
    case Errc::parse: return "parse";
    case Errc::config: return "config";
  }
  return "unknown";
}

/// Every failure in the library is reported as a tadap::Error carrying a
/// machine-checkable code; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace tadap
