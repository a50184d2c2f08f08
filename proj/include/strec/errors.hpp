// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace strec {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: bad key, out-of-range hyperparameter, weights that
// do not match the declared architecture.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Linear-algebra or optimization failure (singular system, non-finite loss).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Text contains symbols outside the vocabulary.
class EncodingError : public Error {
 public:
  using Error::Error;
};

// Dataset, manifest, image or checkpoint I/O problems.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace strec
