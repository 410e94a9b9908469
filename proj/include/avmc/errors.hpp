#pragma once

#include <stdexcept>
#include <string>

namespace avmc {

// Error taxonomy shared by the whole library.
//   ConfigError     bad configuration or command usage
//   FormatError     malformed container (archive, checkpoint, CSV)
//   ValidationError data that parses but violates a contract
//   ShapeError      dimension mismatch in numeric code
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct FormatError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

}  // namespace avmc
