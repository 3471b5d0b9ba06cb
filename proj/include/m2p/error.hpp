#pragma once

#include <stdexcept>
#include <string>

namespace m2p {

// Contract violations and malformed inputs anywhere in the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace m2p
