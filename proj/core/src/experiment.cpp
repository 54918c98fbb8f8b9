#include "umsa/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "umsa/error.hpp"
#include "umsa/lattice.hpp"
#include "umsa/models.hpp"
#include "umsa/oracle.hpp"

#ifndef UMSA_VERSION
#define UMSA_VERSION "unknown"
#endif

namespace umsa {

using nlohmann::json;

namespace {

constexpr std::uint64_t kReferenceSalt = 0x7265666572656e63ULL;  // "referenc"
constexpr std::uint64_t kRepetitionSalt = 0x7265706574697469ULL;

json config_json(const ExperimentConfig& c) {
  json j;
  j["model"] = c.model;
  j["sigma"] = c.sigma;
  j["obs_sd"] = c.obs_sd;
  j["x0"] = c.x0;
  j["horizon"] = c.horizon;
  j["observations_csv"] = c.observations_csv;
  j["theta_true"] = c.theta_true;
  j["data_seed"] = c.data_seed;
  j["data_level"] = c.data_level;
  j["first_time"] = c.first_time;
  j["min_spacing"] = c.min_spacing;
  j["max_spacing"] = c.max_spacing;
  j["observation_count"] = c.observation_count;
  j["initial_state"] = c.initial_state ? json(*c.initial_state) : json(nullptr);
  j["law"] = {{"l_min", c.law.l_min},
              {"l_max", c.law.l_max},
              {"p_min", c.law.p_min},
              {"p_max", c.law.p_max},
              {"n0", c.law.n0}};
  j["schedule"] = {
      {"gamma0", c.schedule.gamma0},
      {"n0", c.schedule.n0},
      {"kappa", c.schedule.kappa},
      {"gains", c.schedule.gains}};
  j["particles"] = c.particles;
  j["theta0"] = c.theta0;
  j["heavy_tail_threshold"] = c.heavy_tail_threshold;
  j["estimate_replicates"] = c.estimate_replicates;
  j["replicates"] = c.replicates;
  j["repetitions"] = c.repetitions;
  j["reference"] = c.reference;
  j["reference_level"] = c.reference_level;
  j["reference_replicates"] = c.reference_replicates;
  j["reference_theta"] = c.reference_theta;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  return j;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ExperimentConfig config_from(const json& j) {
  static const std::vector<std::string> known = {
      "model",        "sigma",          "obs_sd",          "x0",
      "horizon",      "observations_csv", "theta_true",    "data_seed",
      "data_level",   "first_time",     "min_spacing",     "max_spacing",
      "observation_count", "initial_state", "law",         "schedule",
      "particles",    "theta0",         "heavy_tail_threshold", "estimate_replicates",
      "replicates",   "repetitions",    "reference",       "reference_level",
      "reference_replicates", "reference_theta", "seed",   "threads",
      "output_dir",   "preset"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw ConfigError("unknown config key '" + item.key() + "'");
    }
  }
  ExperimentConfig c;
  if (j.contains("preset")) c = preset(j.at("preset").get<std::string>());
  read_field(j, "model", c.model);
  read_field(j, "sigma", c.sigma);
  read_field(j, "obs_sd", c.obs_sd);
  read_field(j, "x0", c.x0);
  read_field(j, "horizon", c.horizon);
  read_field(j, "observations_csv", c.observations_csv);
  read_field(j, "theta_true", c.theta_true);
  read_field(j, "data_seed", c.data_seed);
  read_field(j, "data_level", c.data_level);
  read_field(j, "first_time", c.first_time);
  read_field(j, "min_spacing", c.min_spacing);
  read_field(j, "max_spacing", c.max_spacing);
  read_field(j, "observation_count", c.observation_count);
  if (j.contains("initial_state")) {
    const json& v = j.at("initial_state");
    c.initial_state = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  }
  if (j.contains("law")) {
    const json& law = j.at("law");
    read_field(law, "l_min", c.law.l_min);
    read_field(law, "l_max", c.law.l_max);
    read_field(law, "p_min", c.law.p_min);
    read_field(law, "p_max", c.law.p_max);
    read_field(law, "n0", c.law.n0);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    read_field(s, "gamma0", c.schedule.gamma0);
    read_field(s, "n0", c.schedule.n0);
    read_field(s, "kappa", c.schedule.kappa);
    read_field(s, "gains", c.schedule.gains);
  }
  read_field(j, "particles", c.particles);
  read_field(j, "theta0", c.theta0);
  read_field(j, "heavy_tail_threshold", c.heavy_tail_threshold);
  read_field(j, "estimate_replicates", c.estimate_replicates);
  read_field(j, "replicates", c.replicates);
  read_field(j, "repetitions", c.repetitions);
  read_field(j, "reference", c.reference);
  read_field(j, "reference_level", c.reference_level);
  read_field(j, "reference_replicates", c.reference_replicates);
  read_field(j, "reference_theta", c.reference_theta);
  read_field(j, "seed", c.seed);
  read_field(j, "threads", c.threads);
  read_field(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

std::string join_header(const std::string& prefix, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) out += "," + prefix + std::to_string(i);
  return out;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void write_record_rows(std::ostream& out, std::size_t repetition,
                       const std::vector<EstimatorRecord>& records) {
  for (const auto& r : records) {
    out << repetition << ',' << r.replicate << ',' << r.seed << ',' << r.level << ',' << r.p << ','
        << r.iterations << ',' << r.previous_iterations << ',' << r.cost.gaussian_draws << ','
        << r.cost.density_evaluations << ',' << (r.aborted ? 1 : 0) << ','
        << (r.heavy_tail ? 1 : 0);
    for (double c : r.contribution) out << ',' << format_double(c);
    out << '\n';
  }
}

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config,
                    json extra) {
  extra["config"] = config_json(config);
  extra["version"] = UMSA_VERSION;
  const auto path = dir / "manifest.json";
  auto out = open_output(path);
  out << extra.dump(2) << '\n';
  finish_output(out, path);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> reference_theta(const ExperimentConfig& config, const SdeModel& model,
                                    const ObservationRecord& obs) {
  if (config.reference == "fixed") {
    if (config.reference_theta.size() != model.param_dim()) {
      throw ConfigError("reference_theta has the wrong length");
    }
    return config.reference_theta;
  }
  if (config.reference == "kalman") {
    const auto* ou = dynamic_cast<const OuModel*>(&model);
    if (!ou) throw ConfigError("the kalman reference is only available for the OU model");
    return {kalman_mle(LinearGaussianSpec::from_model(*ou, config.reference_level), obs)};
  }
  if (config.reference == "self") {
    const RandomizationLaw law(config.law);
    const UmsaOptions options = umsa_options(config);
    const auto estimate =
        umsa_estimate(model, obs, law, initial_theta(config, model), options,
                      config.reference_replicates, mix_seed(config.seed, kReferenceSalt),
                      config.resolved_threads());
    return estimate.theta;
  }
  throw ConfigError("unknown reference '" + config.reference + "'");
}

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  if (model != "ou" && model != "kangaroo") throw ConfigError("model must be 'ou' or 'kangaroo'");
  if (law.l_min > law.l_max) throw ConfigError("need l_min <= l_max");
  if (law.p_min > law.p_max) throw ConfigError("need p_min <= p_max");
  if (particles < 2) throw ConfigError("need at least 2 particles");
  if (replicates.empty()) throw ConfigError("the replicate list is empty");
  for (std::size_t m : replicates) {
    if (m < 1) throw ConfigError("every replicate count must be >= 1");
  }
  if (estimate_replicates < 1) throw ConfigError("estimate_replicates must be >= 1");
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (model == "ou" && horizon < 1) throw ConfigError("horizon must be a positive integer");
  if (model == "kangaroo" && observations_csv.empty() &&
      !(min_spacing > 0.0 && min_spacing <= max_spacing)) {
    throw ConfigError("need 0 < min_spacing <= max_spacing");
  }
  if (data_level < 0 || data_level > 20) throw ConfigError("data_level must lie in [0, 20]");
  schedule.validate();
  RandomizationLaw check(law);
  (void)check;
}

std::size_t ExperimentConfig::resolved_threads() const {
  if (threads > 0) return threads;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "ou_desk") {
    c.law = {3, 6, 1, 8, 10};
    c.output_dir = "out/ou_desk";
    return c;
  }
  if (name == "ou_paper") {
    c.horizon = 25;
    c.law = {3, 12, 1, 12, 10};
    c.output_dir = "out/ou_paper";
    return c;
  }
  if (name == "kangaroo_desk") {
    c.model = "kangaroo";
    c.theta_true = {2.397, 4.429e-3, 0.84, 17.631};
    c.theta0 = {2.0, 5e-3, 0.8, 15.0};
    c.initial_state = std::log(400.0) / 0.84;
    c.law = {3, 5, 1, 6, 10};
    c.schedule = {5e-3, 10.0, 0.7, {1.0, 1.0, 0.01, 0.3}};
    c.estimate_replicates = 64;
    c.replicates = {8, 16, 32, 64};
    c.repetitions = 10;
    c.reference = "self";
    c.reference_replicates = 1024;
    c.output_dir = "out/kangaroo_desk";
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("version")) j = j.at("config");
  try {
    return config_from(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

std::string config_to_json(const ExperimentConfig& config, int indent) {
  return config_json(config).dump(indent);
}

std::unique_ptr<SdeModel> make_model(const ExperimentConfig& config) {
  if (config.model == "ou") return std::make_unique<OuModel>(config.sigma, config.obs_sd, config.x0);
  if (config.model == "kangaroo") return std::make_unique<KangarooModel>();
  throw ConfigError("unknown model '" + config.model + "'");
}

UmsaOptions umsa_options(const ExperimentConfig& config) {
  UmsaOptions options;
  options.schedule = config.schedule;
  options.particles = config.particles;
  options.heavy_tail_threshold = config.heavy_tail_threshold;
  return options;
}

ParameterVector initial_theta(const ExperimentConfig& config, const SdeModel& model) {
  ParameterVector theta = model.make_parameters(config.theta0);
  model.check_parameters(theta);
  return theta;
}

// ---------------------------------------------------------------- data

ObservationRecord observation_layout(const ExperimentConfig& config) {
  ObservationRecord layout;
  if (config.model == "ou") {
    layout.origin = 0.0;
    layout.obs_dim = 1;
    for (int t = 1; t <= config.horizon; ++t) layout.times.push_back(t);
  } else {
    layout.origin = config.first_time;
    layout.obs_dim = 2;
    RngStream rng(config.data_seed, 1);
    double t = config.first_time;
    for (std::size_t i = 0; i < config.observation_count; ++i) {
      layout.times.push_back(t);
      t += config.min_spacing + (config.max_spacing - config.min_spacing) * rng.uniform();
    }
  }
  layout.values.assign(layout.times.size() * layout.obs_dim, 0.0);
  return layout;
}

ObservationRecord generate_synthetic_observations(const SdeModel& model,
                                                  const ParameterVector& theta_true,
                                                  const ObservationRecord& layout, int level,
                                                  std::uint64_t seed,
                                                  std::optional<double> initial_state) {
  model.check_parameters(theta_true);
  const ObservationGrid grid = align_observations(layout, level);
  RngStream rng(seed, 0);
  const std::size_t d = model.state_dim();
  LatticePath path(level, d, grid.steps());
  if (initial_state) {
    std::fill(path.state(0).begin(), path.state(0).end(), *initial_state);
  } else {
    model.sample_initial(theta_true.values(), rng, path.state(0));
  }
  std::vector<double> scratch;
  propagate(model, theta_true.values(), level, path.state(0), grid.steps(), rng,
            path.data().subspan(d), scratch);

  ObservationRecord obs = layout;
  obs.obs_dim = model.obs_dim();
  obs.values.assign(obs.times.size() * obs.obs_dim, 0.0);
  for (std::size_t s = 0; s < grid.size(); ++s) {
    model.sample_observation(theta_true.values(), path.state(grid.index[s]), rng,
                             std::span<double>(obs.values).subspan(s * obs.obs_dim, obs.obs_dim));
  }
  return obs;
}

ObservationRecord load_observations(const ExperimentConfig& config, const SdeModel& model) {
  if (!config.observations_csv.empty()) {
    const double origin = config.model == "ou" ? 0.0 : std::nan("");
    return read_observations_csv(config.observations_csv, origin, model.obs_dim());
  }
  const ParameterVector theta_true = model.make_parameters(config.theta_true);
  return generate_synthetic_observations(model, theta_true, observation_layout(config),
                                         config.data_level, config.data_seed,
                                         config.initial_state);
}

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void write_observations_csv(const std::filesystem::path& path, const ObservationRecord& obs) {
  auto out = open_output(path);
  out << "time";
  for (std::size_t j = 0; j < obs.obs_dim; ++j) out << ",y" << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < obs.size(); ++i) {
    out << format_double(obs.times[i]);
    for (double v : obs.value(i)) out << ',' << format_double(v);
    out << '\n';
  }
  finish_output(out, path);
}

ObservationRecord read_observations_csv(const std::filesystem::path& path, double origin,
                                        std::size_t obs_dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read observations '" + path.string() + "'");
  ObservationRecord obs;
  obs.obs_dim = obs_dim;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line_number == 1 && !(std::isdigit(static_cast<unsigned char>(line[0])) ||
                              line[0] == '-' || line[0] == '.')) {
      continue;  // header
    }
    std::vector<double> fields;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        fields.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        if (cell == "NA" || cell == "nan" || cell == "NaN") {
          fields.push_back(std::nan(""));
        } else {
          throw ConfigError(path.string() + ":" + std::to_string(line_number) +
                            ": cannot parse '" + cell + "'");
        }
      }
    }
    if (fields.size() != obs_dim + 1) {
      throw ConfigError(path.string() + ":" + std::to_string(line_number) + ": expected " +
                        std::to_string(obs_dim + 1) + " columns");
    }
    obs.times.push_back(fields[0]);
    obs.values.insert(obs.values.end(), fields.begin() + 1, fields.end());
  }
  if (obs.times.empty()) throw ConfigError("no observations in '" + path.string() + "'");
  obs.origin = std::isnan(origin) ? obs.times.front() : origin;
  obs.validate();
  return obs;
}

// ---------------------------------------------------------------- runs

ExperimentOutcome run_estimate(const ExperimentConfig& config,
                               const std::optional<std::filesystem::path>& trace_path) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto model = make_model(config);
  const ObservationRecord obs = load_observations(config, *model);
  const ParameterVector theta0 = initial_theta(config, *model);
  const RandomizationLaw law(config.law);
  const UmsaOptions options = umsa_options(config);
  const std::size_t threads = config.resolved_threads();

  const UmsaEstimate estimate = umsa_estimate(*model, obs, law, theta0, options,
                                              config.estimate_replicates, config.seed, threads);

  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const std::size_t dim = theta0.size();
  {
    const auto path = dir / "replicates.csv";
    auto out = open_output(path);
    out << "repetition,replicate,seed,level,p,iterations,previous_iterations,gaussian_draws,"
           "density_evaluations,aborted,heavy_tail"
        << join_header("contribution_", dim) << '\n';
    write_record_rows(out, 0, estimate.records);
    finish_output(out, path);
  }
  {
    const auto path = dir / "estimate.csv";
    auto out = open_output(path);
    out << "coordinate,estimate,completed,aborted\n";
    for (std::size_t j = 0; j < dim; ++j) {
      out << j << ',' << format_double(estimate.theta[j]) << ','
          << estimate.records.size() - estimate.aborted << ',' << estimate.aborted << '\n';
    }
    finish_output(out, path);
  }

  if (trace_path) {
    auto out = open_output(*trace_path);
    out << "n" << join_header("theta_", dim) << ",gamma\n";
    RngStream rng(config.seed, 0);
    const auto [level, p] = law.sample(rng);
    MsaOptions msa;
    msa.level = level;
    msa.iterations = law.iterations(p);
    msa.particles = config.particles;
    msa.schedule = config.schedule;
    msa.observer = [&out](std::size_t n, const ParameterVector& theta, double gamma) {
      out << n;
      for (double v : theta.values()) out << ',' << format_double(v);
      out << ',' << format_double(gamma) << '\n';
    };
    try {
      if (level == law.settings().l_min) {
        msa_run(*model, obs, theta0, msa, rng);
      } else {
        msa_run_coupled(*model, obs, theta0, msa, rng);
      }
    } catch (const NumericError&) {
      // The aborted replicate is already reported in replicates.csv.
    }
    finish_output(out, *trace_path);
  }

  ExperimentOutcome outcome;
  outcome.estimate = estimate.theta;
  outcome.aborted = estimate.aborted;
  outcome.partial = estimate.partial;

  json manifest;
  manifest["mode"] = "estimate";
  manifest["threads"] = threads;
  manifest["wall_seconds"] = seconds_since(start);
  manifest["aborted"] = estimate.aborted;
  manifest["partial"] = estimate.partial;
  manifest["estimate"] = estimate.theta;
  manifest["replicate_seeds"] = {{"seed", config.seed},
                                 {"streams", "0.." + std::to_string(config.estimate_replicates - 1)}};
  write_manifest(dir, config, manifest);
  return outcome;
}

ExperimentOutcome run_mse(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto model = make_model(config);
  const ObservationRecord obs = load_observations(config, *model);
  const ParameterVector theta0 = initial_theta(config, *model);
  const RandomizationLaw law(config.law);
  const UmsaOptions options = umsa_options(config);
  const std::size_t threads = config.resolved_threads();
  const std::size_t dim = theta0.size();

  ExperimentOutcome outcome;
  outcome.reference = reference_theta(config, *model, obs);

  std::vector<std::size_t> counts = config.replicates;
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
  const std::size_t max_m = counts.back();

  outcome.summary.resize(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    outcome.summary[k].replicates = counts[k];
    outcome.summary[k].mse.assign(dim, 0.0);
  }

  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const auto records_path = dir / "replicates.csv";
  auto records_out = open_output(records_path);
  records_out << "repetition,replicate,seed,level,p,iterations,previous_iterations,gaussian_draws,"
                 "density_evaluations,aborted,heavy_tail"
              << join_header("contribution_", dim) << '\n';

  std::vector<std::uint64_t> repetition_seeds;
  for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
    const std::uint64_t rep_seed = mix_seed(config.seed ^ kRepetitionSalt, rep);
    repetition_seeds.push_back(rep_seed);
    const UmsaEstimate estimate =
        umsa_estimate(*model, obs, law, theta0, options, max_m, rep_seed, threads);
    write_record_rows(records_out, rep, estimate.records);
    outcome.aborted += estimate.aborted;

    // Prefix means: the estimate with M replicates averages the first M.
    std::vector<double> sum(dim, 0.0);
    std::size_t completed = 0;
    std::size_t aborted = 0;
    CostCounters cost;
    std::size_t next = 0;
    for (std::size_t i = 0; i < max_m; ++i) {
      const auto& r = estimate.records[i];
      cost += r.cost;
      if (r.aborted) {
        ++aborted;
      } else {
        ++completed;
        for (std::size_t j = 0; j < dim; ++j) sum[j] += r.contribution[j];
      }
      if (i + 1 == counts[next]) {
        auto& row = outcome.summary[next];
        row.cost += cost;
        row.aborted += aborted;
        for (std::size_t j = 0; j < dim; ++j) {
          const double mean = completed ? sum[j] / static_cast<double>(completed) : std::nan("");
          const double err = mean - outcome.reference[j];
          row.mse[j] += err * err / static_cast<double>(config.repetitions);
        }
        ++next;
      }
    }
  }
  finish_output(records_out, records_path);

  for (auto& row : outcome.summary) {
    row.mse_total = 0.0;
    for (double v : row.mse) row.mse_total += v;
  }
  outcome.partial = outcome.aborted > 0;

  {
    const auto path = dir / "summary.csv";
    auto out = open_output(path);
    out << "M" << join_header("mse_", dim)
        << ",mse_total,gaussian_draws,density_evaluations,aborted\n";
    for (const auto& row : outcome.summary) {
      out << row.replicates;
      for (double v : row.mse) out << ',' << format_double(v);
      out << ',' << format_double(row.mse_total) << ',' << row.cost.gaussian_draws << ','
          << row.cost.density_evaluations << ',' << row.aborted << '\n';
    }
    finish_output(out, path);
  }

  json manifest;
  manifest["mode"] = "mse";
  manifest["threads"] = threads;
  manifest["wall_seconds"] = seconds_since(start);
  manifest["aborted"] = outcome.aborted;
  manifest["partial"] = outcome.partial;
  manifest["reference_theta"] = outcome.reference;
  manifest["repetition_seeds"] = repetition_seeds;
  write_manifest(dir, config, manifest);
  return outcome;
}

std::vector<std::pair<int, double>> run_oracle(const ExperimentConfig& config) {
  config.validate();
  const auto model = make_model(config);
  const auto* ou = dynamic_cast<const OuModel*>(model.get());
  if (!ou) throw ConfigError("the oracle subcommand needs the OU model");
  const ObservationRecord obs = load_observations(config, *model);

  std::vector<int> levels;
  for (int l = config.law.l_min; l <= config.law.l_max; ++l) levels.push_back(l);
  if (std::find(levels.begin(), levels.end(), config.reference_level) == levels.end()) {
    levels.push_back(config.reference_level);
  }
  std::vector<std::pair<int, double>> result;
  for (int l : levels) result.emplace_back(l, kalman_mle(LinearGaussianSpec::from_model(*ou, l), obs));

  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const auto path = dir / "oracle.csv";
  auto out = open_output(path);
  out << "level,mle,loglik\n";
  for (const auto& [l, theta] : result) {
    const auto ll = kalman_loglik_grad(LinearGaussianSpec::from_model(*ou, l), obs, theta);
    out << l << ',' << format_double(theta) << ',' << format_double(ll.value) << '\n';
  }
  finish_output(out, path);
  return result;
}

ObservationRecord run_simulate(const ExperimentConfig& config) {
  config.validate();
  const auto model = make_model(config);
  const ObservationRecord obs = load_observations(config, *model);
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  write_observations_csv(dir / "observations.csv", obs);
  return obs;
}

}  // namespace umsa
