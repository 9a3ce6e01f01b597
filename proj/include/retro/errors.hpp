// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace retro {

class ShapeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteValue : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonScalarLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace retro
