#pragma once

#include <stdexcept>
#include <string>

namespace lgc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LGC_DEFINE_ERROR(Name)         \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

LGC_DEFINE_ERROR(ShapeMismatch);
LGC_DEFINE_ERROR(ImpossibleSample);
LGC_DEFINE_ERROR(ConfigMismatch);
LGC_DEFINE_ERROR(ConfigError);
LGC_DEFINE_ERROR(InvalidShape);
LGC_DEFINE_ERROR(NumericalDivergence);
LGC_DEFINE_ERROR(TooManyEdges);
LGC_DEFINE_ERROR(InsufficientSamples);
LGC_DEFINE_ERROR(IoError);

#undef LGC_DEFINE_ERROR

}  // namespace lgc
