#pragma once

#include <stdexcept>
#include <string>

namespace decor {

// Every failure the library reports derives from Error, so callers (the CLI,
// the HTTP service) can map categories to exit codes and status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DECOR_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

DECOR_DEFINE_ERROR(FormatError);            // malformed file contents
DECOR_DEFINE_ERROR(IoError);                // open/read/write failures, truncation
DECOR_DEFINE_ERROR(DimensionError);         // incompatible grid dims
DECOR_DEFINE_ERROR(ParameterError);         // out-of-range scalar argument
DECOR_DEFINE_ERROR(KindError);              // binary vs continuous mismatch
DECOR_DEFINE_ERROR(ShapeError);             // tensor shape mismatch
DECOR_DEFINE_ERROR(ConfigError);            // invalid configuration / dataset
DECOR_DEFINE_ERROR(EmptyShapeError);        // operation needs an occupied voxel
DECOR_DEFINE_ERROR(UndefinedMetricError);   // metric has no defined value
DECOR_DEFINE_ERROR(DegenerateSampleError);  // all-zero loss normaliser
DECOR_DEFINE_ERROR(DegeneracyError);        // geometric degeneracy (collinear input)
DECOR_DEFINE_ERROR(NotFoundError);          // unknown id

#undef DECOR_DEFINE_ERROR

}  // namespace decor
