#pragma once

#include <stdexcept>
#include <string>

namespace dialectmt {

// Error taxonomy maps onto CLI exit codes:
//   0 success, 1 usage error, 2 data error, 3 numeric divergence.

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& msg, int epoch = -1)
      : std::runtime_error(msg), epoch_(epoch) {}
  // 1-based epoch the run diverged in, -1 when unknown at throw site.
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace dialectmt
