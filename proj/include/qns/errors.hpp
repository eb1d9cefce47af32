#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qns {

// Base class for all library errors. Every error carries a stable,
// machine-readable name alongside the human-readable message; the CLI keys
// its structured stderr output ("error: <name>: <message>") off name().
class QnsError : public std::runtime_error {
 public:
  QnsError(std::string name, const std::string& message)
      : std::runtime_error(message), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define QNS_DEFINE_ERROR(ClassName)                                       \
  class ClassName : public QnsError {                                     \
   public:                                                                \
    explicit ClassName(const std::string& message)                        \
        : QnsError(#ClassName, message) {}                                \
  }

// A PSD denominator vanished on the evaluation grid (pole on or numerically
// indistinguishable from a grid frequency).
QNS_DEFINE_ERROR(PoleOnGrid);
// AR polynomial has a root on or outside the unit circle; sampling and
// autocovariance evaluation are undefined.
QNS_DEFINE_ERROR(NotStationary);
// Probe-set construction parameters out of range (e.g. more sequences than
// gates).
QNS_DEFINE_ERROR(InvalidCounts);
// A spectrum handed to an overlap/χ computation carries negative power.
QNS_DEFINE_ERROR(NegativePower);
// A dataset / model / spectrum file failed strict schema validation.
QNS_DEFINE_ERROR(MalformedFile);
// A linear system (Yule-Walker) was singular to working precision.
QNS_DEFINE_ERROR(SingularSystem);
// Yule-Walker residual variance b0^2 came out negative: the autocovariance
// is inconsistent with an AR model of the requested order.
QNS_DEFINE_ERROR(NegativeResidualVariance);
// An iterative solver exhausted its iteration budget (NNLS active set).
QNS_DEFINE_ERROR(NoConvergence);
// Too much of a spectrum needed flooring before taking logs; the cepstrum
// would be dominated by the floor rather than the data.
QNS_DEFINE_ERROR(DegenerateSpectrum);
// Cubic-spline interpolation requires at least four knots.
QNS_DEFINE_ERROR(TooFewPoints);
// Every probability in a dataset sat at or below 1/2: no usable χ values.
QNS_DEFINE_ERROR(AllClipped);
// CLI configuration rejected (unknown key, missing field, bad value).
QNS_DEFINE_ERROR(ConfigError);

#undef QNS_DEFINE_ERROR

}  // namespace qns
