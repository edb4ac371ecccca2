#pragma once

#include <stdexcept>
#include <string>

namespace tea {

// Base for every operational failure raised by the library. Contract
// violations (bad indices, out-of-range arguments) use the std exception
// types instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tea
