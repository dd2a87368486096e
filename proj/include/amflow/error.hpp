#pragma once

#include <stdexcept>
#include <string>

namespace am {

// Root of every error thrown by the library. Each module derives its own
// named errors from this so callers can catch per stage or wholesale.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace am
