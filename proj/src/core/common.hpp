#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

// The codec core is built once per scalar precision. Float is the
// production configuration; the double build exists for the
// finite-difference gradient suites, which are unreliable in single
// precision. Each build lives in its own inline namespace so both can
// be linked into one test binary.
#if defined(MGNR_SCALAR_F64)
#define MGNR_PRECISION_NS f64
#else
#define MGNR_PRECISION_NS f32
#endif

#define MGNR_NS_BEGIN \
  namespace mgnr {    \
  inline namespace MGNR_PRECISION_NS {
#define MGNR_NS_END \
  }                 \
  }

MGNR_NS_BEGIN

#if defined(MGNR_SCALAR_F64)
using scalar = double;
#else
using scalar = float;
#endif

// Error domains, aligned with the CLI exit codes (io=1, config=2,
// numeric=3, bitstream=4). `internal` marks API misuse such as shape
// mismatches and maps to the generic io/failure code.
enum class ErrorKind { io = 1, config = 2, numeric = 3, bitstream = 4, internal = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const {
    return kind_ == ErrorKind::internal ? 1 : static_cast<int>(kind_);
  }

 private:
  ErrorKind kind_;
};

MGNR_NS_END
