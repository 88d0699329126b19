#pragma once

// Command-line front end. Every subcommand resolves its configuration as
//   built-in defaults <- --config file (plain config or a run manifest) <- explicit flags
// runs, writes its outputs under --out-dir and finishes with
// <out-dir>/<command>.manifest.json. Passing that manifest back through
// --config reproduces the outputs byte for byte.

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sentlabel/sentlabel.hpp"

namespace sentlabel::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

/// Bad or missing arguments; reported as a usage error (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Command finished and wrote its outputs, but the result is a failure (exit code 1).
struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

inline LabelMatrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open matrix file " + path);
  return read_matrix(in);
}

template <class T>
T required(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) throw UsageError("missing required option --" + key);
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("option --" + key + " has the wrong type");
  }
}

template <class T>
T value_or(const json& cfg, const std::string& key, T fallback) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("option --" + key + " has the wrong type");
  }
}

inline GroupAssignment parse_assignment(const std::string& text) {
  if (text == "shuffle") return GroupAssignment::SeededShuffle;
  if (text == "contiguous") return GroupAssignment::Contiguous;
  throw UsageError("assignment must be shuffle or contiguous");
}

inline std::size_t budget_bytes(const json& cfg) {
  return static_cast<std::size_t>(value_or<double>(cfg, "dense_budget_mb", 4096.0) * 1024.0 * 1024.0);
}

/// "name:n:k[:train_fraction]" or "n:k", comma separated.
inline json parse_datasets(const std::string& text) {
  json out = json::array();
  std::size_t index = 0;
  for (const auto& item : split(text, ',')) {
    const auto f = split(item, ':');
    json d;
    try {
      if (f.size() == 2) {
        d = {{"name", "ds" + std::to_string(index)}, {"n_examples", std::stoul(f[0])}, {"n_classes", std::stoul(f[1])}};
      } else if (f.size() == 3 || f.size() == 4) {
        d = {{"name", f[0]}, {"n_examples", std::stoul(f[1])}, {"n_classes", std::stoul(f[2])}};
        if (f.size() == 4) d["train_fraction"] = parse_real(f[3]);
      } else {
        throw std::invalid_argument("field count");
      }
    } catch (const std::exception&) {
      throw UsageError("bad dataset entry '" + item + "', want name:n_examples:n_classes[:train_fraction]");
    }
    out.push_back(d);
    ++index;
  }
  return out;
}

inline std::vector<std::pair<std::size_t, std::size_t>> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pairs file " + path);
  std::string line;
  std::getline(in, line);
  if (line != "row_a,row_b") throw std::runtime_error("pairs file must start with header row_a,row_b");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 2) throw std::runtime_error("pairs file: bad line '" + line + "'");
    pairs.emplace_back(std::stoul(f[0]), std::stoul(f[1]));
  }
  return pairs;
}

/// Output collector; every file goes through an atomic write.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  template <class WriteFn>
  void write(const std::string& name, WriteFn&& fn) {
    write_file_atomic(dir_ / name, std::forward<WriteFn>(fn));
    names_.push_back(name);
  }
  const std::vector<std::string>& names() const { return names_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

struct RunContext {
  json config;
  std::size_t threads = 1;
  Outputs outputs;
  json seeds = json::array();
  std::vector<std::string> warnings;
  std::ostream& out;
};

// ---------------------------------------------------------------------------
// Subcommand bodies

inline void cmd_generate(RunContext& ctx) {
  const auto& cfg = ctx.config;
  const auto rows = required<std::size_t>(cfg, "rows");
  const auto cols = required<std::size_t>(cfg, "cols");
  DensityProfile profile;
  try {
    profile = profiles::parse(required<std::string>(cfg, "profile"),
                              parse_assignment(value_or<std::string>(cfg, "assignment", "shuffle")));
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("invalid profile: ") + e.what());
  }
  const RngSeed seed{required<std::uint64_t>(cfg, "seed")};
  ctx.seeds.push_back(seed.value);
  auto generated = generate(rows, cols, profile, seed);
  ctx.warnings = generated.warnings;
  ctx.outputs.write(value_or<std::string>(cfg, "output", "matrix.txt"),
                    [&](std::ostream& os) { write_matrix(os, generated.matrix); });
  ctx.out << "generated " << rows << "x" << cols << " matrix with " << generated.matrix.nnz() << " ones\n";
}

inline void cmd_validate(RunContext& ctx) {
  const auto matrix = load_matrix(required<std::string>(ctx.config, "input"));
  const auto report = validate(matrix);
  ctx.outputs.write("validation.csv", [&](std::ostream& os) {
    os << "kind,index_a,index_b\n";
    for (auto i : report.empty_rows) os << "empty_row," << i << ",\n";
    for (auto j : report.empty_cols) os << "empty_col," << j << ",\n";
    for (auto [a, b] : report.duplicate_rows) os << "duplicate_rows," << a << ',' << b << '\n';
    for (auto [a, b] : report.duplicate_cols) os << "duplicate_cols," << a << ',' << b << '\n';
  });
  ctx.out << "empty rows: " << report.empty_rows.size() << ", empty columns: " << report.empty_cols.size()
          << ", duplicate rows: " << report.duplicate_rows.size()
          << ", duplicate columns: " << report.duplicate_cols.size() << '\n';
  if (!report.valid()) throw CheckFailed("matrix is not valid (see validation.csv)");
}

inline void cmd_factor(RunContext& ctx) {
  const auto& cfg = ctx.config;
  const auto matrix = load_matrix(required<std::string>(cfg, "input"));
  const auto rank = required<Eigen::Index>(cfg, "rank");
  const auto method = parse_svd_method(value_or<std::string>(cfg, "method", "exact"));
  const RngSeed seed{required<std::uint64_t>(cfg, "seed")};
  ctx.seeds.push_back(seed.value);
  SvdOptions options;
  options.dense_budget = budget_bytes(cfg);
  options.randomized = {value_or<Eigen::Index>(cfg, "oversampling", 10), value_or<int>(cfg, "power_iterations", 2),
                        derive_seed(seed, "svd")};
  const auto f = svd_truncated(matrix, rank, method, options);
  ctx.outputs.write("u.txt", [&](std::ostream& os) { write_dense(os, f.u); });
  ctx.outputs.write("sigma.txt", [&](std::ostream& os) { write_dense(os, f.sigma); });
  ctx.outputs.write("v.txt", [&](std::ostream& os) { write_dense(os, f.v); });
  ctx.out << "rank-" << rank << " " << to_string(method) << " factorization, sigma_1 = " << format_real(f.sigma(0))
          << '\n';
}

inline void cmd_spectrum(RunContext& ctx) {
  const auto& cfg = ctx.config;
  const auto matrix = load_matrix(required<std::string>(cfg, "input"));
  const std::size_t limit = std::min(matrix.rows(), matrix.cols());
  const auto k = value_or<std::size_t>(cfg, "k", std::min<std::size_t>(2000, limit));
  const auto report = spectrum(matrix, k, budget_bytes(cfg));
  ctx.outputs.write("spectrum.csv", [&](std::ostream& os) { write_spectrum_csv(os, report); });
  ctx.out << "wrote " << k << " singular values\n";
}

inline std::string profile_file_tag(const std::string& name, std::size_t index) {
  for (const auto& builtin : profiles::builtin_names())
    if (builtin == name) return name;
  return "profile" + std::to_string(index);
}

inline void cmd_table1(RunContext& ctx) {
  const auto& cfg = ctx.config;
  DensityExperimentConfig ex;
  ex.n_rows = required<std::size_t>(cfg, "rows");
  ex.n_cols = required<std::size_t>(cfg, "cols");
  ex.rank = required<Eigen::Index>(cfg, "rank");
  ex.spectrum_k = value_or<std::size_t>(cfg, "spectrum_k", 2000);
  ex.dense_budget = budget_bytes(cfg);
  const auto assignment = parse_assignment(value_or<std::string>(cfg, "assignment", "shuffle"));
  ex.profiles.clear();
  try {
    for (const auto& name : required<std::vector<std::string>>(cfg, "profiles"))
      ex.profiles.push_back({name, profiles::parse(name, assignment)});
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("invalid profile: ") + e.what());
  }
  const RngSeed seed{required<std::uint64_t>(cfg, "seed")};
  ex.seeds = trial_seeds(seed, required<std::size_t>(cfg, "trials"));
  for (auto s : ex.seeds) ctx.seeds.push_back(s.value);
  try {
    ex.check();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const auto trials = run_density_grid(ex, ctx.threads);
  const auto summary = aggregate_density_grid(trials, ex.profiles.size());
  ctx.outputs.write("table1.csv", [&](std::ostream& os) { write_table1_summary_csv(os, summary); });
  ctx.outputs.write("table1_seeds.csv", [&](std::ostream& os) { write_table1_csv(os, trials); });
  ctx.outputs.write("table1_cross_seed.csv", [&](std::ostream& os) { write_cross_seed_csv(os, summary); });
  for (const auto& t : trials) {
    const auto seed_index = static_cast<std::size_t>(
        std::find(ex.seeds.begin(), ex.seeds.end(), t.seed) - ex.seeds.begin());
    const auto name = "spectrum_" + profile_file_tag(ex.profiles[t.profile_index].name, t.profile_index) + "_trial" +
                      std::to_string(seed_index) + ".csv";
    ctx.outputs.write(name, [&](std::ostream& os) { write_spectrum_csv(os, t.spectrum); });
    for (const auto& w : t.warnings)
      if (std::find(ctx.warnings.begin(), ctx.warnings.end(), w) == ctx.warnings.end()) ctx.warnings.push_back(w);
  }
  for (const auto& g : summary) {
    ctx.out << ex.profiles[g.profile_index].name << "  density " << format_real(g.density) << "  coverage "
            << format_real(g.coverage) << "  loss " << format_real(std::round(g.mean_loss * 10) / 10) << " +- "
            << format_real(std::round(g.row_std * 10) / 10) << '\n';
  }
}

inline void cmd_transfer(RunContext& ctx) {
  auto& cfg = ctx.config;
  const RngSeed seed{required<std::uint64_t>(cfg, "seed")};
  const auto seeds = trial_seeds(seed, required<std::size_t>(cfg, "trials"));
  for (auto s : seeds) ctx.seeds.push_back(s.value);

  LogRegConfig logreg;
  if (cfg.contains("logreg")) {
    const auto& lr = cfg.at("logreg");
    logreg.l2 = value_or<double>(lr, "l2", logreg.l2);
    logreg.step = value_or<double>(lr, "step", logreg.step);
    logreg.max_iter = value_or<std::size_t>(lr, "max_iter", logreg.max_iter);
    logreg.tol = value_or<double>(lr, "tol", logreg.tol);
  }

  std::vector<TransferResultRow> rows;
  const auto external = value_or<std::string>(cfg, "representations", "");
  if (!external.empty()) {
    std::ifstream in(external);
    if (!in) throw std::runtime_error("cannot open representation file " + external);
    auto data = read_representations(in);
    rows = run_transfer_external(data.set, fs::path(external).stem().string(),
                                 value_or<double>(cfg, "train_fraction", 0.8), logreg, seeds);
  } else {
    TransferExperimentConfig ex;
    ex.n_rows = required<std::size_t>(cfg, "rows");
    ex.n_cols = required<std::size_t>(cfg, "cols");
    ex.rep = parse_rep_kind(required<std::string>(cfg, "rep"));
    ex.dims = required<std::vector<Eigen::Index>>(cfg, "dims");
    ex.density = required<double>(cfg, "density");
    ex.seeds = seeds;
    ex.logreg = logreg;
    ex.dense_budget = budget_bytes(cfg);
    if (cfg.contains("svd")) {
      ex.oversampling = value_or<Eigen::Index>(cfg.at("svd"), "oversampling", ex.oversampling);
      ex.power_iterations = value_or<int>(cfg.at("svd"), "power_iterations", ex.power_iterations);
    }
    if (!cfg.contains("datasets") || cfg.at("datasets").is_null()) {
      json ds = json::array();
      for (const auto& d : default_transfer_datasets(ex.n_rows))
        ds.push_back({{"name", d.name}, {"n_examples", d.n_examples}, {"n_classes", d.n_classes},
                      {"train_fraction", d.train_fraction}});
      cfg["datasets"] = ds;  // recorded in the manifest
    }
    ex.datasets.clear();
    for (const auto& d : cfg.at("datasets")) {
      ex.datasets.push_back({required<std::string>(d, "name"), required<std::size_t>(d, "n_examples"),
                             required<std::size_t>(d, "n_classes"), value_or<double>(d, "train_fraction", 0.8)});
    }
    try {
      ex.check();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    rows = run_transfer(ex, ctx.threads);
  }
  ctx.outputs.write("transfer.csv", [&](std::ostream& os) { write_transfer_csv(os, rows); });
  ctx.outputs.write("transfer_baselines.csv", [&](std::ostream& os) { write_transfer_baseline_csv(os, rows); });
  for (const auto& r : rows) {
    ctx.out << r.dataset << "  " << to_string(r.rep) << "  dim " << r.dim << "  seed " << r.seed.value << "  accuracy "
            << format_real(r.accuracy) << "  (majority " << format_real(r.majority_baseline) << ")\n";
  }
}

inline void cmd_sts(RunContext& ctx) {
  const auto& cfg = ctx.config;
  const auto matrix = load_matrix(required<std::string>(cfg, "input"));
  const auto pairs_path = value_or<std::string>(cfg, "pairs", "");
  const auto pairs = pairs_path.empty() ? all_pairs(matrix.rows()) : read_pairs(pairs_path);
  const auto mode_name = value_or<std::string>(cfg, "mode", "cosine");
  if (mode_name != "cosine" && mode_name != "paper-literal") throw UsageError("mode must be cosine or paper-literal");
  const auto mode = mode_name == "cosine" ? CosineMode::Cosine : CosineMode::PaperLiteral;
  const auto scored = run_sts(matrix, pairs, mode);
  ctx.outputs.write("sts.csv", [&](std::ostream& os) { write_sts_csv(os, scored); });
  ctx.out << "scored " << scored.size() << " pairs\n";
}

// ---------------------------------------------------------------------------
// Defaults and flag bindings

struct Command {
  std::string name;
  std::string help;
  json defaults;
  std::function<void(RunContext&)> body;
};

inline std::vector<Command> commands() {
  return {
      {"generate", "Draw a random label matrix", {{"seed", 1}, {"profile", "table1-skew-sparse"}, {"assignment", "shuffle"}, {"output", "matrix.txt"}},
       cmd_generate},
      {"validate", "Check a label matrix for empty or duplicate rows/columns", json::object(), cmd_validate},
      {"factor", "Truncated SVD of a label matrix",
       {{"seed", 1}, {"method", "exact"}, {"oversampling", 10}, {"power_iterations", 2}, {"dense_budget_mb", 4096}},
       cmd_factor},
      {"spectrum", "Leading singular values and cumulative energy", {{"dense_budget_mb", 4096}}, cmd_spectrum},
      {"table1", "Row reconstruction loss by density group",
       {{"seed", 1},
        {"rows", 4000},
        {"cols", 4300},
        {"rank", 40},
        {"profiles", profiles::builtin_names()},
        {"trials", 5},
        {"spectrum_k", 2000},
        {"assignment", "shuffle"},
        {"dense_budget_mb", 4096}},
       cmd_table1},
      {"transfer", "Train/test classifiers on binary or SVD representations",
       {{"seed", 1},
        {"rows", 7000},
        {"cols", 12000},
        {"rep", "svd"},
        {"dims", {40}},
        {"density", 0.5},
        {"trials", 1},
        {"logreg", {{"l2", 1e-4}, {"step", 1.0}, {"max_iter", 2000}, {"tol", 1e-6}}},
        {"svd", {{"oversampling", 10}, {"power_iterations", 2}}},
        {"dense_budget_mb", 4096}},
       cmd_transfer},
      {"sts", "Cosine similarity between label rows", {{"mode", "cosine"}}, cmd_sts},
  };
}

template <class T>
void bind_flag(CLI::App* app, json& overrides, const std::string& flag, const std::string& pointer, const std::string& help) {
  app->add_option_function<T>(
      flag, [&overrides, pointer](const T& v) { overrides[json::json_pointer(pointer)] = v; }, help);
}

inline void bind_command_flags(CLI::App* sub, const std::string& name, json& overrides) {
  if (name == "generate") {
    bind_flag<std::size_t>(sub, overrides, "--rows", "/rows", "Number of rows (sentences)");
    bind_flag<std::size_t>(sub, overrides, "--cols", "/cols", "Number of columns (task labels)");
    bind_flag<std::string>(sub, overrides, "--profile", "/profile",
                      "Built-in profile name or density:coverage list, e.g. 0.01:0.5,0.1:0.5");
    bind_flag<std::string>(sub, overrides, "--assignment", "/assignment", "Row-to-group assignment: shuffle|contiguous");
    bind_flag<std::string>(sub, overrides, "--output", "/output", "Matrix file name inside --out-dir");
  } else if (name == "validate") {
    bind_flag<std::string>(sub, overrides, "--input", "/input", "Matrix file");
  } else if (name == "factor") {
    bind_flag<std::string>(sub, overrides, "--input", "/input", "Matrix file");
    bind_flag<Eigen::Index>(sub, overrides, "--rank", "/rank", "Number of singular triplets to keep");
    bind_flag<std::string>(sub, overrides, "--method", "/method", "exact|randomized");
    bind_flag<Eigen::Index>(sub, overrides, "--oversampling", "/oversampling", "Randomized sketch oversampling");
    bind_flag<int>(sub, overrides, "--power-iterations", "/power_iterations", "Randomized power iterations");
    bind_flag<double>(sub, overrides, "--dense-budget-mb", "/dense_budget_mb", "Largest dense allocation (MiB)");
  } else if (name == "spectrum") {
    bind_flag<std::string>(sub, overrides, "--input", "/input", "Matrix file");
    bind_flag<std::size_t>(sub, overrides, "--k", "/k", "Number of singular values (default min(2000, min dim))");
    bind_flag<double>(sub, overrides, "--dense-budget-mb", "/dense_budget_mb", "Largest dense allocation (MiB)");
  } else if (name == "table1") {
    bind_flag<std::size_t>(sub, overrides, "--rows", "/rows", "Matrix rows");
    bind_flag<std::size_t>(sub, overrides, "--cols", "/cols", "Matrix columns");
    bind_flag<Eigen::Index>(sub, overrides, "--rank", "/rank", "Approximation rank");
    sub->add_option_function<std::vector<std::string>>(
           "--profiles", [&overrides](const std::vector<std::string>& v) { overrides["profiles"] = v; },
           "Profiles to run (built-in names or density:coverage lists, separated by ';')")
        ->delimiter(';');
    bind_flag<std::size_t>(sub, overrides, "--trials", "/trials", "Matrices per profile");
    bind_flag<std::size_t>(sub, overrides, "--spectrum-k", "/spectrum_k", "Singular values kept in spectrum files");
    bind_flag<std::string>(sub, overrides, "--assignment", "/assignment", "Row-to-group assignment: shuffle|contiguous");
    bind_flag<double>(sub, overrides, "--dense-budget-mb", "/dense_budget_mb", "Largest dense allocation (MiB)");
  } else if (name == "transfer") {
    bind_flag<std::size_t>(sub, overrides, "--rows", "/rows", "Matrix rows");
    bind_flag<std::size_t>(sub, overrides, "--cols", "/cols", "Matrix columns");
    bind_flag<std::string>(sub, overrides, "--rep", "/rep", "binary|svd");
    sub->add_option_function<std::vector<Eigen::Index>>(
           "--dims,--dim", [&overrides](const std::vector<Eigen::Index>& v) { overrides["dims"] = v; },
           "Representation dimensions, comma separated")
        ->delimiter(',');
    bind_flag<double>(sub, overrides, "--density", "/density", "Cell density of the label matrix");
    sub->add_option_function<std::string>(
        "--datasets", [&overrides](const std::string& v) { overrides["datasets"] = parse_datasets(v); },
        "Datasets as name:n_examples:n_classes[:train_fraction], comma separated");
    bind_flag<std::size_t>(sub, overrides, "--trials", "/trials", "Number of seeds");
    bind_flag<double>(sub, overrides, "--l2", "/logreg/l2", "L2 penalty");
    bind_flag<double>(sub, overrides, "--step", "/logreg/step", "Initial line-search step");
    bind_flag<std::size_t>(sub, overrides, "--max-iter", "/logreg/max_iter", "Gradient descent iterations");
    bind_flag<double>(sub, overrides, "--tol", "/logreg/tol", "Gradient-norm stopping tolerance");
    bind_flag<Eigen::Index>(sub, overrides, "--oversampling", "/svd/oversampling", "Randomized sketch oversampling");
    bind_flag<int>(sub, overrides, "--power-iterations", "/svd/power_iterations", "Randomized power iterations");
    bind_flag<std::string>(sub, overrides, "--representations", "/representations",
                      "External CSV (id,label,v0,...) to evaluate instead of a synthetic matrix");
    bind_flag<double>(sub, overrides, "--train-fraction", "/train_fraction", "Train share for external data");
    bind_flag<double>(sub, overrides, "--dense-budget-mb", "/dense_budget_mb", "Largest dense allocation (MiB)");
  } else if (name == "sts") {
    bind_flag<std::string>(sub, overrides, "--input", "/input", "Matrix file");
    bind_flag<std::string>(sub, overrides, "--pairs", "/pairs", "CSV of row pairs (row_a,row_b); default all pairs");
    sub->add_flag_function(
        "--paper-literal", [&overrides](std::int64_t) { overrides["mode"] = "paper-literal"; },
        "Divide shared labels by the product of label counts instead of its square root");
  }
}

inline json resolve_config(const Command& command, const std::string& config_path, const json& overrides) {
  json cfg = command.defaults;
  if (!config_path.empty()) {
    json file = load_json(config_path);
    if (file.contains("command") && file.contains("config")) {
      if (file.at("command") != command.name)
        throw UsageError("manifest is for '" + file.at("command").get<std::string>() + "', not '" + command.name + "'");
      file = file.at("config");
    }
    if (!file.is_object()) throw UsageError("config file must hold a JSON object");
    cfg.merge_patch(file);
  }
  cfg.merge_patch(overrides);
  return cfg;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sentence-label matrix factorization experiments", "sentlabel"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);

  json overrides = json::object();
  std::string out_dir = ".";
  std::string config_path;
  std::size_t threads = default_thread_count();
  app.add_option_function<std::uint64_t>(
      "--seed", [&overrides](const std::uint64_t& v) { overrides["seed"] = v; }, "Command seed");
  app.add_option("--out-dir", out_dir, "Directory for outputs and the run manifest");
  app.add_option("--threads", threads, "Worker threads (results do not depend on this)")->check(CLI::PositiveNumber);
  app.add_option("--config", config_path, "JSON config file or a previous run manifest");

  const auto cmds = detail::commands();
  std::map<CLI::App*, const detail::Command*> by_app;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    detail::bind_command_flags(sub, c.name, overrides);
    by_app[sub] = &c;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  const detail::Command* command = nullptr;
  for (auto* sub : app.get_subcommands()) command = by_app.at(sub);

  const auto started = std::chrono::steady_clock::now();
  try {
    detail::RunContext ctx{detail::resolve_config(*command, config_path, overrides), threads,
                           detail::Outputs(out_dir), json::array(), {}, out};
    std::string failure;
    try {
      command->body(ctx);
    } catch (const CheckFailed& e) {
      failure = e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json manifest = {{"tool", "sentlabel"},
                     {"version", kToolVersion},
                     {"command", command->name},
                     {"config", ctx.config},
                     {"seeds", ctx.seeds},
                     {"outputs", ctx.outputs.names()},
                     {"threads", threads},
                     {"warnings", ctx.warnings},
                     {"duration_seconds", seconds}};
    write_file_atomic(fs::path(out_dir) / (command->name + ".manifest.json"),
                      [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
    for (const auto& w : ctx.warnings) err << "warning: " << w << '\n';
    if (!failure.empty()) {
      err << "error: " << failure << '\n';
      return 1;
    }
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace sentlabel::cli
