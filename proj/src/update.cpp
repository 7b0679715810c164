#include "hessnet/update.hpp"

#include <string>

#include "hessnet/error.hpp"

namespace hessnet {

namespace {

void check_shape(const Matrix& param, const Matrix& grad, std::size_t k, const char* what) {
  require(param.rows() == grad.rows() && param.cols() == grad.cols(),
          ErrorCode::DimensionMismatch,
          std::string("update: ") + what + " gradient of layer " + std::to_string(k + 1) +
              " has the wrong shape");
}

void check_shape(const Vector& param, const Vector& grad, std::size_t k) {
  require(param.size() == grad.size(), ErrorCode::DimensionMismatch,
          "update: bias gradient of layer " + std::to_string(k + 1) + " has the wrong length");
}

}  // namespace

FnnModel apply_update(const FnnModel& model, const GradientBundle& grads, double alpha) {
  require(grads.layers.size() == model.depth(), ErrorCode::DimensionMismatch,
          "update: gradient depth does not match model");
  FnnModel next = model;
  for (std::size_t k = 0; k < model.depth(); ++k) {
    FnnLayer& layer = next.layers[k];
    const LayerGradient& g = grads.layers[k];
    check_shape(layer.weights, g.weights, k, "weight");
    check_shape(layer.bias, g.bias, k);
    layer.weights = subtract(layer.weights, scale(g.weights, alpha));
    layer.bias = subtract(layer.bias, scale(g.bias, alpha));
  }
  return next;
}

RnnModel apply_update(const RnnModel& model, const RnnGradientBundle& grads, double alpha) {
  require(grads.layers.size() == model.depth(), ErrorCode::DimensionMismatch,
          "update: gradient depth does not match model");
  RnnModel next = model;
  for (std::size_t k = 0; k < model.depth(); ++k) {
    RnnLayer& layer = next.layers[k];
    const RnnLayerGradient& g = grads.layers[k];
    check_shape(layer.weights, g.weights, k, "weight");
    check_shape(layer.feedback, g.feedback, k, "feedback");
    check_shape(layer.bias, g.bias, k);
    layer.weights = subtract(layer.weights, scale(g.weights, alpha));
    layer.feedback = subtract(layer.feedback, scale(g.feedback, alpha));
    layer.bias = subtract(layer.bias, scale(g.bias, alpha));
  }
  return next;
}

}  // namespace hessnet
