#pragma once

#include <stdexcept>
#include <string>

namespace amdnet {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define AMDNET_DEFINE_ERROR(Name)                                \
  struct Name : Error {                                          \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

AMDNET_DEFINE_ERROR(RollPitchTooLarge);
AMDNET_DEFINE_ERROR(ShapeMismatch);
AMDNET_DEFINE_ERROR(MissingCache);
AMDNET_DEFINE_ERROR(TooFewFrames);
AMDNET_DEFINE_ERROR(EmptyDataset);
AMDNET_DEFINE_ERROR(NanLoss);
AMDNET_DEFINE_ERROR(InvalidSpec);
AMDNET_DEFINE_ERROR(IoError);
AMDNET_DEFINE_ERROR(MissingCheckpoint);
AMDNET_DEFINE_ERROR(PointSetMismatch);
AMDNET_DEFINE_ERROR(NoPositives);
AMDNET_DEFINE_ERROR(Degenerate);
AMDNET_DEFINE_ERROR(InvalidTransform);
AMDNET_DEFINE_ERROR(ConfigError);

#undef AMDNET_DEFINE_ERROR

}  // namespace amdnet
