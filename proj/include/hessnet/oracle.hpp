#pragma once

// Independent numerical ground truth: central finite differences over a flat
// parameter layout, entrywise comparison reports and a portable seeded
// generator for models and samples.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hessnet/fnn.hpp"
#include "hessnet/model.hpp"
#include "hessnet/rnn.hpp"

namespace hessnet {

// ---- parameter addressing ---------------------------------------------------

struct ParamRef {
  std::size_t layer = 0;  // 0-based
  ParamBlock block = ParamBlock::Weights;
  std::size_t row = 0;
  std::size_t col = 0;  // 0 for bias entries
};

/// Every parameter of one block in flattening order (row-major, output-neuron major).
std::vector<ParamRef> block_layout(const FnnModel& model, std::size_t layer, ParamBlock block);
std::vector<ParamRef> block_layout(const RnnModel& model, std::size_t layer, ParamBlock block);
/// All parameters: per layer W, then U (rnn), then b.
std::vector<ParamRef> parameter_layout(const FnnModel& model);
std::vector<ParamRef> parameter_layout(const RnnModel& model);

double& parameter(FnnModel& model, const ParamRef& ref);
double& parameter(RnnModel& model, const ParamRef& ref);

/// "layer 2 W[0,3]" with 1-based layers and 0-based entries.
std::string describe(const ParamRef& ref);

/// Flattened block of an analytic gradient in block_layout order.
std::vector<double> gradient_entries(const GradientBundle& g, std::size_t layer, ParamBlock block);
std::vector<double> gradient_entries(const RnnLayerGradient& g, ParamBlock block);
std::vector<double> gradient_entries(const RnnStepGradient& g, ParamBlock block);

// ---- losses -----------------------------------------------------------------

double batch_loss(const FnnModel& model, std::span<const FnnSample> batch);
double batch_loss(const RnnModel& model, std::span<const RnnSample> batch);

// ---- finite differences -----------------------------------------------------

struct FdConfig {
  enum class Target { Loss, Gradient };
  double step = 1e-5;
  Target target = Target::Gradient;  // Hessian oracle only
};

/// Per-parameter numeric derivative; an entry is skipped when the ±h
/// perturbation changes the active pattern of any ReLU unit.
struct NumericGradient {
  std::vector<ParamRef> layout;
  std::vector<double> values;
  std::vector<bool> skipped;
};

NumericGradient fd_gradient(const FnnModel& model, std::span<const FnnSample> batch,
                            const FdConfig& cfg = {});
NumericGradient fd_gradient(const RnnModel& model, std::span<const RnnSample> batch,
                            const FdConfig& cfg = {});

/// Reassembled into the analytic gradient's shape (skipped entries hold 0).
GradientBundle to_bundle(const FnnModel& model, const NumericGradient& g);
RnnGradientBundle to_bundle(const RnnModel& model, const NumericGradient& g);

/// Dense numeric Hessian of one parameter block. Target::Gradient
/// differentiates the analytic gradient; Target::Loss takes second
/// differences of the loss. Skipped columns are left zero.
struct NumericHessian {
  Matrix values;
  std::vector<bool> skipped;
};

NumericHessian fd_hessian(const FnnModel& model, const FnnSample& sample, std::size_t layer,
                          ParamBlock block, const FdConfig& cfg = {});
/// `step` selects E^(t); std::nullopt differentiates the total loss.
NumericHessian fd_hessian(const RnnModel& model, const RnnSample& sample, std::size_t layer,
                          ParamBlock block, std::optional<std::size_t> step,
                          const FdConfig& cfg = {});

// ---- comparison -------------------------------------------------------------

struct Tolerance {
  double abs = 1e-6;
  double rel = 1e-5;
};

/// An entry passes when |a − b| ≤ max(abs, rel·max(|a|, |b|)).
struct VerificationReport {
  VerificationReport() = default;
  explicit VerificationReport(std::string name) : label(std::move(name)) {}

  std::string label;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  std::string worst;  // coordinate with the largest error relative to its allowance
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool pass = true;

  void record(double analytic, double numeric, const Tolerance& tol, const std::string& where);
  void merge(const VerificationReport& other);

 private:
  double worst_ratio_ = -1.0;
};

// ---- generators -------------------------------------------------------------

/// 64-bit LCG, multiplier 6364136223846793005 and increment
/// 1442695040888963407; uniforms use the top 53 bits.
class Lcg {
 public:
  explicit Lcg(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();                     // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  std::size_t below(std::size_t n);     // [0, n)

 private:
  std::uint64_t state_;
};

struct GeneratorSpec {
  bool recurrent = false;
  std::vector<std::size_t> widths;  // N, m_1, ..., m_l
  Activation activation = Activation::Sigmoid;
  std::size_t horizon = 1;       // rnn
  std::size_t output_start = 1;  // rnn
};

/// Parameters and sample entries are uniform in [−0.9, 0.9].
FnnModel generate_fnn(const GeneratorSpec& spec, Lcg& rng);
RnnModel generate_rnn(const GeneratorSpec& spec, Lcg& rng);
FnnSample generate_sample(const FnnModel& model, Lcg& rng);
RnnSample generate_sample(const RnnModel& model, Lcg& rng);

Model generate_model(const GeneratorSpec& spec, std::uint64_t seed);

/// Model and paired sample from one seed. ReLU cases are redrawn until every
/// pre-activation satisfies |y| ≥ margin.
inline constexpr double kReluMargin = 0.1;

struct FnnCase {
  FnnModel model;
  FnnSample sample;
};
struct RnnCase {
  RnnModel model;
  RnnSample sample;
};

FnnCase generate_fnn_case(const GeneratorSpec& spec, std::uint64_t seed);
RnnCase generate_rnn_case(const GeneratorSpec& spec, std::uint64_t seed);

}  // namespace hessnet
