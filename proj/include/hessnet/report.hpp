#pragma once

// Machine-readable reports behind the CLI commands. Every JSON report carries
// "schema": 1; CSV is limited to flat spectrum and verification tables.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hessnet/model.hpp"
#include "hessnet/rnn.hpp"

namespace hessnet {

using SampleSet = std::variant<std::vector<FnnSample>, std::vector<RnnSample>>;

enum class Command { Forward, Grad, Hessian, Spectrum, Verify };
enum class Format { Json, Csv };

/// Added to one entry of the analytic gradient before verification; a
/// corruption harness for the verifier itself.
struct Perturbation {
  ParamBlock block = ParamBlock::Weights;
  std::size_t row = 0;
  std::size_t col = 0;
  double delta = 0.0;
};

struct RunOptions {
  std::optional<std::size_t> layer;  // 0-based; all layers when empty
  std::optional<std::size_t> step;   // rnn output step; all when empty
  bool dense = false;
  Format format = Format::Json;
  double tolerance = 1e-5;  // gradient relative tolerance; Hessian uses 10×
  std::optional<Perturbation> perturb;
};

/// Largest m·n for which dense blocks are written.
inline constexpr std::size_t kDenseCap = 400;

struct RunResult {
  std::string text;
  bool pass = true;  // verify only
};

RunResult run_command(Command command, const Model& model, const SampleSet& samples,
                      const RunOptions& options);

}  // namespace hessnet
