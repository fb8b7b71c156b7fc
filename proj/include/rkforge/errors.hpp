#pragma once

#include <stdexcept>
#include <string>

namespace rkforge {

/// Base class for all rkforge computational failures.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Family parameters violate the distinct-node requirements (e.g. c5 = c4),
/// or the construction is too ill-conditioned to meet its own tolerances.
class degenerate_family_error : public error {
 public:
  using error::error;
};

/// The 9x9 interpolant matrix is numerically singular.
class singular_family_error : public error {
 public:
  using error::error;
};

/// An internal self-check failed (affinity of the a85 residual, C1 end
/// conditions, b9 = 0, ...). Indicates inconsistent inputs, not a bug in
/// the caller.
class internal_consistency_error : public error {
 public:
  using error::error;
};

}  // namespace rkforge
