#pragma once

#include <stdexcept>
#include <string>

namespace bradcn {

/// Base class for every typed error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BRADCN_DEFINE_ERROR(NAME)        \
  class NAME : public Error {            \
   public:                               \
    using Error::Error;                  \
  };

BRADCN_DEFINE_ERROR(ShapeError)       // tensor rank / dimension contract violated
BRADCN_DEFINE_ERROR(RangeError)       // value outside the declared value range
BRADCN_DEFINE_ERROR(NonFiniteError)   // NaN or Inf encountered
BRADCN_DEFINE_ERROR(ConfigError)      // malformed config file or unknown key
BRADCN_DEFINE_ERROR(PredictorError)   // depth predictor backend failure
BRADCN_DEFINE_ERROR(ProviderError)    // perceptual-metric provider failure
BRADCN_DEFINE_ERROR(LayoutError)      // corpus directory layout violated
BRADCN_DEFINE_ERROR(DecodeError)      // image file unreadable or wrong format
BRADCN_DEFINE_ERROR(CountError)       // split counts exceed corpus size
BRADCN_DEFINE_ERROR(DataError)        // empty or unusable corpus
BRADCN_DEFINE_ERROR(CheckpointError)  // corrupt, truncated or mismatched checkpoint
BRADCN_DEFINE_ERROR(TooSmallError)    // input below the minimum size an operation supports

#undef BRADCN_DEFINE_ERROR

}  // namespace bradcn
