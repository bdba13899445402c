#ifndef LONGEXP_ERRORS_H_
#define LONGEXP_ERRORS_H_

#include <stdexcept>
#include <string>

namespace longexp {

// Bad inputs: missing files, malformed manifests, dimension mismatches.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Geometry that cannot be estimated (e.g. coincident correspondences).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FallbackReason {
  kNoSubjectTracks,
  kSolverDiverged,
  kDisparityOverflow,
  kTooFewFrames,
};

const char* to_string(FallbackReason reason);

// Raised when the long exposure cannot be produced reliably. The pipeline
// catches it and emits only the sharp conventional exposure.
class FallbackError : public std::runtime_error {
 public:
  FallbackError(FallbackReason reason, const std::string& detail)
      : std::runtime_error(std::string(to_string(reason)) + ": " + detail),
        reason_(reason) {}
  FallbackReason reason() const { return reason_; }

 private:
  FallbackReason reason_;
};

inline const char* to_string(FallbackReason reason) {
  switch (reason) {
    case FallbackReason::kNoSubjectTracks: return "no_subject_tracks";
    case FallbackReason::kSolverDiverged: return "solver_diverged";
    case FallbackReason::kDisparityOverflow: return "disparity_overflow";
    case FallbackReason::kTooFewFrames: return "too_few_frames";
  }
  return "unknown";
}

}  // namespace longexp

#endif  // LONGEXP_ERRORS_H_
