// hessnet command-line front end. Talks to the library only through the C API.
//
// Exit codes: 0 success, 1 internal error, 2 input validation, 3 mathematical
// precondition (ReLU kink), 4 verification failure.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hessnet/hessnet.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitVerification = 4;

struct Config {
  std::string model_path;
  std::string sample_path;
  std::optional<std::uint64_t> seed;
  std::size_t layer = 0;
  std::size_t time = 0;
  bool dense = false;
  std::string format = "json";
  double tol = 1e-5;
  std::string out_path;
  std::vector<std::string> perturb;
};

int exit_code(hn_status s) {
  switch (s) {
    case HN_OK: return kExitOk;
    case HN_ERR_KINK:
    case HN_ERR_NOT_RELU: return kExitPrecondition;
    case HN_ERR_VERIFICATION: return kExitVerification;
    case HN_ERR_INTERNAL: return kExitInternal;
    default: return kExitValidation;
  }
}

int report_error(hn_status s) {
  const std::string name = hn_status_name(s);
  const std::string detail = hn_last_error();
  if (detail.rfind(name, 0) == 0) std::cerr << "hessnet: " << detail << "\n";
  else std::cerr << "hessnet: " << name << ": " << detail << "\n";
  return exit_code(s);
}

struct ModelDeleter {
  void operator()(hn_model* m) const { hn_model_free(m); }
};
struct SampleDeleter {
  void operator()(hn_sample* s) const { hn_sample_free(s); }
};
struct StringDeleter {
  void operator()(char* s) const { hn_string_free(s); }
};

void add_run_options(CLI::App& cmd, Config& cfg) {
  cmd.add_option("--model", cfg.model_path, "Model JSON file")->required();
  auto* sample = cmd.add_option("--sample", cfg.sample_path, "Sample JSON file (object or batch array)");
  auto* seed = cmd.add_option("--seed", cfg.seed, "Generate the sample from this seed instead of --sample");
  sample->excludes(seed);
  cmd.add_option("--layer", cfg.layer, "Restrict to one layer (1-based)")->check(CLI::PositiveNumber);
  cmd.add_option("--time", cfg.time, "Restrict to one rnn output step (1-based)")->check(CLI::PositiveNumber);
  cmd.add_flag("--dense", cfg.dense, "Include dense Hessian blocks up to 400x400");
  cmd.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  cmd.add_option("--tol", cfg.tol, "Gradient relative tolerance for verify (Hessian uses 10x)")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--out", cfg.out_path, "Write the report here instead of stdout");
  cmd.add_option("--perturb", cfg.perturb,
                 "verify only: add DELTA to analytic gradient entry (I,J) of block w|u|b in --layer")
      ->expected(4)
      ->type_name("BLOCK I J DELTA");
}

bool parse_perturb(const std::vector<std::string>& args, hn_run_options& opts) {
  if (args.empty()) return true;
  const std::string& block = args[0];
  if (block == "w" || block == "W") opts.perturb_param = HN_PARAM_W;
  else if (block == "u" || block == "U") opts.perturb_param = HN_PARAM_U;
  else if (block == "b") opts.perturb_param = HN_PARAM_B;
  else return false;
  try {
    std::size_t used = 0;
    const long long row = std::stoll(args[1], &used);
    if (used != args[1].size() || row < 0) return false;
    const long long col = std::stoll(args[2], &used);
    if (used != args[2].size() || col < 0) return false;
    opts.perturb_delta = std::stod(args[3], &used);
    if (used != args[3].size()) return false;
    opts.perturb_row = static_cast<std::size_t>(row);
    opts.perturb_col = static_cast<std::size_t>(col);
  } catch (const std::exception&) {
    return false;
  }
  opts.perturb = 1;
  return true;
}

int run(hn_command command, const Config& cfg) {
  if (cfg.sample_path.empty() && !cfg.seed) {
    std::cerr << "hessnet: invalid argument: one of --sample or --seed is required\n";
    return kExitValidation;
  }

  hn_run_options opts;
  hn_run_options_init(&opts);
  opts.layer = cfg.layer;
  opts.time = cfg.time;
  opts.dense = cfg.dense ? 1 : 0;
  opts.format = cfg.format == "csv" ? HN_FORMAT_CSV : HN_FORMAT_JSON;
  opts.tolerance = cfg.tol;
  if (!cfg.perturb.empty() && command != HN_CMD_VERIFY) {
    std::cerr << "hessnet: invalid argument: --perturb applies to verify only\n";
    return kExitValidation;
  }
  if (!parse_perturb(cfg.perturb, opts)) {
    std::cerr << "hessnet: invalid argument: --perturb expects BLOCK(w|u|b) I J DELTA\n";
    return kExitValidation;
  }

  hn_model* raw_model = nullptr;
  if (hn_status s = hn_model_load_file(cfg.model_path.c_str(), &raw_model); s != HN_OK)
    return report_error(s);
  std::unique_ptr<hn_model, ModelDeleter> model(raw_model);

  hn_sample* raw_sample = nullptr;
  hn_status s = cfg.sample_path.empty() ? hn_sample_generate(model.get(), *cfg.seed, &raw_sample)
                                        : hn_sample_load_file(cfg.sample_path.c_str(), model.get(), &raw_sample);
  if (s != HN_OK) return report_error(s);
  std::unique_ptr<hn_sample, SampleDeleter> sample(raw_sample);

  char* raw_report = nullptr;
  int verdict = 1;
  if (s = hn_run(command, model.get(), sample.get(), &opts, &raw_report, &verdict); s != HN_OK)
    return report_error(s);
  std::unique_ptr<char, StringDeleter> report(raw_report);

  if (cfg.out_path.empty()) {
    std::cout << report.get();
    std::cout.flush();
  } else {
    std::ofstream out(cfg.out_path, std::ios::binary);
    out << report.get();
    if (!out) {
      std::cerr << "hessnet: i/o error: cannot write '" << cfg.out_path << "'\n";
      return kExitValidation;
    }
  }
  if (!verdict) {
    std::cerr << "hessnet: verification failed\n";
    return kExitVerification;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact gradients, Hessians and Hessian spectra of feedforward and recurrent networks"};
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    hn_command command;
  };
  const Entry entries[] = {
      {"forward", "Forward propagation trace", HN_CMD_FORWARD},
      {"grad", "Exact gradients with ranks and rank-1 factors", HN_CMD_GRAD},
      {"hessian", "Kronecker-structured Hessian blocks", HN_CMD_HESSIAN},
      {"spectrum", "Hessian eigenvalues and eigenvalue bounds", HN_CMD_SPECTRUM},
      {"verify", "Check gradients and Hessians against finite differences", HN_CMD_VERIFY},
  };

  Config cfg;
  std::optional<hn_command> chosen;
  for (const Entry& e : entries) {
    CLI::App* cmd = app.add_subcommand(e.name, e.help);
    add_run_options(*cmd, cfg);
    cmd->callback([&chosen, c = e.command] { chosen = c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  return run(*chosen, cfg);
}
