#pragma once

#include <cstddef>
#include <string_view>
#include <variant>
#include <vector>

#include "hessnet/linalg.hpp"

namespace hessnet {

enum class Activation { Sigmoid, ReLU, Softplus, Identity };

/// Pre-activations with |y| below this are treated as sitting on the ReLU kink.
inline constexpr double kKinkTolerance = 1e-8;

struct ActivationValue {
  double f = 0.0;
  double df = 0.0;
  double d2f = 0.0;
  /// Set for ReLU when |y| < kKinkTolerance; f′ is then reported as 0.
  bool kink = false;
};

ActivationValue activation_eval(Activation act, double y);

std::string_view activation_name(Activation act);
Activation parse_activation(std::string_view name);

/// Entrywise f′ and f″ of a pre-activation vector.
Vector activation_first(Activation act, const Vector& y);
Vector activation_second(Activation act, const Vector& y);
Vector activation_apply(Activation act, const Vector& y);

struct FnnLayer {
  Matrix weights;  // m×n
  Vector bias;     // m
  Activation activation = Activation::Sigmoid;

  std::size_t outputs() const noexcept { return weights.rows(); }
  std::size_t inputs() const noexcept { return weights.cols(); }
  bool operator==(const FnnLayer&) const = default;
};

struct FnnModel {
  std::vector<FnnLayer> layers;

  std::size_t depth() const noexcept { return layers.size(); }
  std::size_t input_dim() const { return layers.front().inputs(); }
  std::size_t output_dim() const { return layers.back().outputs(); }

  /// Throws InvalidModel/DimensionMismatch on any structural violation.
  void validate() const;
  bool operator==(const FnnModel&) const = default;
};

struct RnnLayer {
  Matrix weights;   // m×n
  Matrix feedback;  // m×m
  Vector bias;      // m
  Activation activation = Activation::Sigmoid;

  std::size_t outputs() const noexcept { return weights.rows(); }
  std::size_t inputs() const noexcept { return weights.cols(); }
  bool operator==(const RnnLayer&) const = default;
};

struct RnnModel {
  std::vector<RnnLayer> layers;
  std::size_t horizon = 1;       // τ
  std::size_t output_start = 1;  // a, 1 ≤ a ≤ τ

  std::size_t depth() const noexcept { return layers.size(); }
  std::size_t input_dim() const { return layers.front().inputs(); }
  std::size_t output_dim() const { return layers.back().outputs(); }
  std::size_t output_steps() const noexcept { return horizon - output_start + 1; }

  void validate() const;
  bool operator==(const RnnModel&) const = default;
};

using Model = std::variant<FnnModel, RnnModel>;

struct FnnSample {
  Vector input;
  Vector target;
  bool operator==(const FnnSample&) const = default;
};

/// inputs[s-1] is x^(*,s) for s = 1..τ; targets[t-a] is z^(*,t) for t = a..τ.
struct RnnSample {
  std::vector<Vector> inputs;
  std::vector<Vector> targets;
  bool operator==(const RnnSample&) const = default;
};

using Sample = std::variant<FnnSample, RnnSample>;

void validate_sample(const FnnModel& model, const FnnSample& sample);
void validate_sample(const RnnModel& model, const RnnSample& sample);

bool all_relu(const FnnModel& model);
bool all_relu(const RnnModel& model);

}  // namespace hessnet
