#pragma once

#include <stdexcept>
#include <string>

namespace mop {

// Raised when a (image_id, level, x, y, side) key is absent from a store.
class NotFoundError : public std::runtime_error {
 public:
  explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a model file's config fingerprint does not match the run config.
class FingerprintError : public std::runtime_error {
 public:
  explicit FingerprintError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a numeric routine fails to produce finite results.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mop
