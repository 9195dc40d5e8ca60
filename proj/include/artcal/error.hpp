#pragma once

#include <stdexcept>
#include <string>

namespace artcal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input: unknown ids, schema violations, bad config.
// The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// A solver or analysis could not produce a result. CLI exit code 1.
class ComputationError : public Error {
 public:
  using Error::Error;
};

}  // namespace artcal
