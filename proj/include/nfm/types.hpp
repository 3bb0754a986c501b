#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nfm {

using Index = Eigen::Index;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Row-major so that per-feature embedding rows are contiguous.
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint8_t { identity = 0, relu = 1, sigmoid = 2, tanh = 3 };
enum class Pooling : std::uint8_t { bi_interaction = 0, concat = 1, average = 2 };
enum class Mode { train, eval };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline const char* to_string(Pooling p) {
  switch (p) {
    case Pooling::bi_interaction: return "bi";
    case Pooling::concat: return "concat";
    case Pooling::average: return "average";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

inline Pooling parse_pooling(const std::string& s) {
  if (s == "bi" || s == "bi_interaction") return Pooling::bi_interaction;
  if (s == "concat") return Pooling::concat;
  if (s == "average" || s == "avg") return Pooling::average;
  throw std::invalid_argument("unknown pooling strategy: " + s);
}

template <class Scalar>
Scalar apply_activation(Activation a, Scalar x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return x > Scalar(0) ? x : Scalar(0);
    case Activation::sigmoid: return Scalar(1) / (Scalar(1) + std::exp(-x));
    case Activation::tanh: return std::tanh(x);
  }
  return x;
}

// Derivative in terms of the pre-activation `x` and the activation value `y`.
// ReLU subgradient at 0 is taken as 0.
template <class Scalar>
Scalar activation_derivative(Activation a, Scalar x, Scalar y) {
  switch (a) {
    case Activation::identity: return Scalar(1);
    case Activation::relu: return x > Scalar(0) ? Scalar(1) : Scalar(0);
    case Activation::sigmoid: return y * (Scalar(1) - y);
    case Activation::tanh: return Scalar(1) - y * y;
  }
  return Scalar(1);
}

}  // namespace nfm
