#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace diffcert {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::string expected, const std::string& message)
      : Error(message), offset_(offset), expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

/// Expression evaluated outside its domain (ln of non-positive, division by zero, ...).
class EvalError : public Error {
 public:
  EvalError(std::string node, double x, const std::string& message)
      : Error(message), node_(std::move(node)), x_(x) {}

  const std::string& node() const noexcept { return node_; }
  double x() const noexcept { return x_; }

 private:
  std::string node_;
  double x_;
};

/// Quadrature did not reach the requested tolerance.
class QuadratureError : public Error {
 public:
  QuadratureError(double best, double error_bound, const std::string& message)
      : Error(message), best_(best), error_bound_(error_bound) {}

  double best_estimate() const noexcept { return best_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double best_;
  double error_bound_;
};

/// An integrand or accumulated integral left the finite doubles.
class OverflowError : public Error {
 public:
  using Error::Error;
};

class RootError : public Error {
 public:
  using Error::Error;
};

/// a(x) <= 0 at an interior point.
class EllipticityError : public Error {
 public:
  EllipticityError(double x, double value, const std::string& message)
      : Error(message), x_(x), value_(value) {}

  double x() const noexcept { return x_; }
  double value() const noexcept { return value_; }

 private:
  double x_;
  double value_;
};

/// c_W could not be certified finite, so no (delta, K) pair exists.
class NoCertificateError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Too few decay rows above the Monte-Carlo noise floor to fit a rate.
class FitError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : Error(pointer + ": " + message), pointer_(std::move(pointer)) {}

  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace diffcert
