#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <stdexcept>
#include <string>

namespace nodex {

inline constexpr const char* kVersion = "0.1.0";

// All numerics run in double; desk-scale workloads are small and the
// update-rule contracts are checked against closed-form oracles at 1e-9.
using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ArrayX = Eigen::ArrayXd;

/// Raised when an input violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a runtime contract fails (non-finite loss, IO corruption, ...).
class RuntimeFailure : public std::runtime_error {
public:
  explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

#define NODEX_CHECK(cond, msg)                                         \
  do {                                                                 \
    if (!(cond)) throw ::nodex::InvalidInput(std::string(msg));        \
  } while (0)

#define NODEX_REQUIRE(cond, msg)                                       \
  do {                                                                 \
    if (!(cond)) throw ::nodex::RuntimeFailure(std::string(msg));      \
  } while (0)

// Canonical nodule attribute order. Concatenation, CSV columns and head
// indices all follow this order.
inline constexpr std::array<const char*, 8> kAttributeNames = {
    "subtlety",  "internalStructure", "calcification", "sphericity",
    "margin",    "lobulation",        "spiculation",   "texture"};

// LIDC ordinal scales (1-based). internalStructure has 4 levels,
// calcification 6, the rest 5.
inline constexpr std::array<int, 8> kAttributeClassCounts = {5, 4, 6, 5, 5, 5, 5, 5};

inline constexpr int kNumAttributes = 8;
inline constexpr int kPatchSize = 32;

inline int attribute_index(const std::string& name) {
  for (int i = 0; i < kNumAttributes; ++i)
    if (name == kAttributeNames[i]) return i;
  throw InvalidInput("unknown attribute name: " + name);
}

inline int total_attribute_classes() {
  int s = 0;
  for (int c : kAttributeClassCounts) s += c;
  return s;  // 40
}

}  // namespace nodex
