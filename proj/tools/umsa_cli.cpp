#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "umsa/error.hpp"
#include "umsa/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string preset = "ou_desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
};

void add_common(CLI::App& cmd, CommonFlags& flags) {
  cmd.add_option("--config", flags.config, "JSON config or run manifest")
      ->check(CLI::ExistingFile);
  cmd.add_option("--preset", flags.preset, "preset used when --config is absent")
      ->check(CLI::IsMember({"ou_desk", "ou_paper", "kangaroo_desk"}));
  cmd.add_option("--seed", flags.seed, "master seed");
  cmd.add_option("--threads", flags.threads, "worker threads (0 = all cores)");
  cmd.add_option("--out", flags.out, "output directory");
}

umsa::ExperimentConfig resolve(const CommonFlags& flags) {
  umsa::ExperimentConfig config =
      flags.config.empty() ? umsa::preset(flags.preset) : umsa::load_config(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.threads) config.threads = *flags.threads;
  if (!flags.out.empty()) config.output_dir = flags.out;
  config.validate();
  return config;
}

void print_vector(const char* label, const std::vector<double>& v) {
  std::cout << label;
  for (double x : v) std::cout << ' ' << umsa::format_double(x);
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unbiased stochastic-approximation MLE for partially observed diffusions"};
  app.require_subcommand(1);

  CommonFlags simulate_flags;
  auto* simulate = app.add_subcommand("simulate", "write synthetic observations");
  add_common(*simulate, simulate_flags);

  CommonFlags estimate_flags;
  std::string trace;
  std::optional<std::size_t> replicates;
  auto* estimate = app.add_subcommand("estimate", "one UMSA estimate");
  add_common(*estimate, estimate_flags);
  estimate->add_option("-M,--replicates", replicates, "replicate count");
  estimate->add_option("--trace", trace, "per-iteration CSV of replicate 0");

  CommonFlags mse_flags;
  auto* mse = app.add_subcommand("mse", "MSE versus replicate count study");
  add_common(*mse, mse_flags);

  CommonFlags oracle_flags;
  auto* oracle = app.add_subcommand("oracle", "Kalman MLE of the discretised OU model");
  add_common(*oracle, oracle_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      const auto config = resolve(simulate_flags);
      const auto obs = umsa::run_simulate(config);
      std::cout << "wrote " << obs.size() << " observations to "
                << (std::filesystem::path(config.output_dir) / "observations.csv").string()
                << '\n';
    } else if (estimate->parsed()) {
      auto config = resolve(estimate_flags);
      if (replicates) config.estimate_replicates = *replicates;
      std::optional<std::filesystem::path> trace_path;
      if (!trace.empty()) trace_path = trace;
      const auto outcome = umsa::run_estimate(config, trace_path);
      print_vector("estimate", outcome.estimate);
      std::cout << "aborted " << outcome.aborted << (outcome.partial ? " (partial)" : "") << '\n';
    } else if (mse->parsed()) {
      const auto config = resolve(mse_flags);
      const auto outcome = umsa::run_mse(config);
      print_vector("reference", outcome.reference);
      for (const auto& row : outcome.summary) {
        std::cout << "M=" << row.replicates << " mse=" << umsa::format_double(row.mse_total)
                  << '\n';
      }
      std::cout << "aborted " << outcome.aborted << (outcome.partial ? " (partial)" : "") << '\n';
    } else if (oracle->parsed()) {
      const auto config = resolve(oracle_flags);
      for (const auto& [level, theta] : umsa::run_oracle(config)) {
        std::cout << "level " << level << " mle " << umsa::format_double(theta) << '\n';
      }
    }
  } catch (const umsa::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
