#include "hessnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hessnet/error.hpp"

namespace hessnet {

namespace {

double sigmoid(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

std::string layer_label(std::size_t k) { return "layer " + std::to_string(k + 1); }

template <typename Layer>
void validate_common(const std::vector<Layer>& layers) {
  require(!layers.empty(), ErrorCode::InvalidModel, "model has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Layer& layer = layers[k];
    require(layer.weights.rows() > 0 && layer.weights.cols() > 0,
            ErrorCode::InvalidModel, layer_label(k) + ": zero-dimension weights");
    require(layer.bias.size() == layer.weights.rows(), ErrorCode::DimensionMismatch,
            layer_label(k) + ": bias length " + std::to_string(layer.bias.size()) +
                " != rows " + std::to_string(layer.weights.rows()));
    require(all_finite(layer.weights) && all_finite(layer.bias),
            ErrorCode::InvalidModel, layer_label(k) + ": non-finite parameter");
    if (k > 0) {
      require(layer.weights.cols() == layers[k - 1].weights.rows(),
              ErrorCode::DimensionMismatch,
              layer_label(k) + ": expects " + std::to_string(layer.weights.cols()) +
                  " inputs but previous layer emits " +
                  std::to_string(layers[k - 1].weights.rows()));
    }
  }
}

}  // namespace

ActivationValue activation_eval(Activation act, double y) {
  switch (act) {
    case Activation::Sigmoid: {
      const double s = sigmoid(y);
      const double ds = s * (1.0 - s);
      return {s, ds, ds * (1.0 - 2.0 * s), false};
    }
    case Activation::ReLU: {
      if (std::abs(y) < kKinkTolerance) return {std::max(0.0, y), 0.0, 0.0, true};
      return y > 0.0 ? ActivationValue{y, 1.0, 0.0, false}
                     : ActivationValue{0.0, 0.0, 0.0, false};
    }
    case Activation::Softplus: {
      const double f = y > 0.0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y));
      const double s = sigmoid(y);
      return {f, s, s * (1.0 - s), false};
    }
    case Activation::Identity:
      return {y, 1.0, 0.0, false};
  }
  return {};
}

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::ReLU: return "relu";
    case Activation::Softplus: return "softplus";
    case Activation::Identity: return "identity";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "relu") return Activation::ReLU;
  if (name == "softplus") return Activation::Softplus;
  if (name == "identity") return Activation::Identity;
  fail(ErrorCode::InvalidModel, "unknown activation '" + std::string(name) + "'");
}

Vector activation_apply(Activation act, const Vector& y) {
  Vector out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = activation_eval(act, y[i]).f;
  return out;
}

Vector activation_first(Activation act, const Vector& y) {
  Vector out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = activation_eval(act, y[i]).df;
  return out;
}

Vector activation_second(Activation act, const Vector& y) {
  Vector out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = activation_eval(act, y[i]).d2f;
  return out;
}

void FnnModel::validate() const { validate_common(layers); }

void RnnModel::validate() const {
  validate_common(layers);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const RnnLayer& layer = layers[k];
    require(layer.feedback.rows() == layer.outputs() &&
                layer.feedback.cols() == layer.outputs(),
            ErrorCode::DimensionMismatch,
            layer_label(k) + ": feedback must be " + std::to_string(layer.outputs()) +
                "x" + std::to_string(layer.outputs()));
    require(all_finite(layer.feedback), ErrorCode::InvalidModel,
            layer_label(k) + ": non-finite feedback");
  }
  require(horizon >= 1, ErrorCode::InvalidModel, "tau must be at least 1");
  require(output_start >= 1 && output_start <= horizon, ErrorCode::InvalidModel,
          "output start a must satisfy 1 <= a <= tau");
}

void validate_sample(const FnnModel& model, const FnnSample& sample) {
  require(sample.input.size() == model.input_dim(), ErrorCode::DimensionMismatch,
          "sample input has length " + std::to_string(sample.input.size()) +
              ", model expects " + std::to_string(model.input_dim()));
  require(sample.target.size() == model.output_dim(), ErrorCode::DimensionMismatch,
          "sample target has length " + std::to_string(sample.target.size()) +
              ", model emits " + std::to_string(model.output_dim()));
  require(all_finite(sample.input) && all_finite(sample.target),
          ErrorCode::InvalidArgument, "sample contains non-finite values");
}

void validate_sample(const RnnModel& model, const RnnSample& sample) {
  require(sample.inputs.size() == model.horizon, ErrorCode::DimensionMismatch,
          "sample has " + std::to_string(sample.inputs.size()) + " input steps, tau is " +
              std::to_string(model.horizon));
  require(sample.targets.size() == model.output_steps(), ErrorCode::DimensionMismatch,
          "sample has " + std::to_string(sample.targets.size()) +
              " target steps, expected tau - a + 1 = " +
              std::to_string(model.output_steps()));
  for (const Vector& x : sample.inputs) {
    require(x.size() == model.input_dim(), ErrorCode::DimensionMismatch,
            "input step length " + std::to_string(x.size()) + ", model expects " +
                std::to_string(model.input_dim()));
    require(all_finite(x), ErrorCode::InvalidArgument, "non-finite input");
  }
  for (const Vector& z : sample.targets) {
    require(z.size() == model.output_dim(), ErrorCode::DimensionMismatch,
            "target step length " + std::to_string(z.size()) + ", model emits " +
                std::to_string(model.output_dim()));
    require(all_finite(z), ErrorCode::InvalidArgument, "non-finite target");
  }
}

bool all_relu(const FnnModel& model) {
  return std::all_of(model.layers.begin(), model.layers.end(),
                     [](const FnnLayer& l) { return l.activation == Activation::ReLU; });
}

bool all_relu(const RnnModel& model) {
  return std::all_of(model.layers.begin(), model.layers.end(),
                     [](const RnnLayer& l) { return l.activation == Activation::ReLU; });
}

}  // namespace hessnet
