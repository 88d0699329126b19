#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sentlabel/analysis.hpp"
#include "sentlabel/classify.hpp"
#include "sentlabel/csv.hpp"
#include "sentlabel/factorization.hpp"
#include "sentlabel/label_matrix.hpp"
#include "sentlabel/parallel.hpp"
#include "sentlabel/random.hpp"

namespace sentlabel {

/// Seeds for `count` trials: derive_seed(command_seed, "trial", i).
inline std::vector<RngSeed> trial_seeds(RngSeed command_seed, std::size_t count) {
  std::vector<RngSeed> seeds;
  seeds.reserve(count);
  for (std::size_t i = 0; i < count; ++i) seeds.push_back(derive_seed(command_seed, "trial", i));
  return seeds;
}

// ===========================================================================
// Density / reconstruction-loss grid

struct NamedProfile {
  std::string name;
  DensityProfile profile;
};

inline std::vector<NamedProfile> table1_profiles() {
  return {{"table1-skew-sparse", profiles::table1_skew_sparse()},
          {"table1-even", profiles::table1_even()},
          {"table1-skew-dense", profiles::table1_skew_dense()}};
}

struct DensityExperimentConfig {
  std::size_t n_rows = 4000;
  std::size_t n_cols = 4300;
  Eigen::Index rank = 40;
  std::vector<NamedProfile> profiles = table1_profiles();
  std::vector<RngSeed> seeds;
  std::size_t spectrum_k = 2000;  ///< capped at min(n_rows, n_cols)
  std::size_t dense_budget = kDefaultDenseBudget;

  void check() const {
    if (n_rows == 0 || n_cols == 0) throw std::invalid_argument("density grid: dimensions must be positive");
    if (rank < 1 || static_cast<std::size_t>(rank) > std::min(n_rows, n_cols))
      throw std::invalid_argument("density grid: rank must lie in [1, min(rows, cols)]");
    if (profiles.empty()) throw std::invalid_argument("density grid: no profiles");
    if (seeds.empty()) throw std::invalid_argument("density grid: need at least one seed");
    if (spectrum_k == 0) throw std::invalid_argument("density grid: spectrum_k must be positive");
  }
};

struct DensityTrial {
  std::size_t profile_index = 0;
  RngSeed seed;
  std::vector<GroupStats> stats;
  SpectrumReport spectrum;
  std::vector<std::string> warnings;
};

/// generate -> exact SVD -> rank-r reconstruction -> row L1 loss -> group stats, for one matrix.
inline DensityTrial run_density_trial(const DensityExperimentConfig& cfg, std::size_t profile_index, RngSeed seed) {
  const auto& profile = cfg.profiles.at(profile_index).profile;
  auto generated = generate(cfg.n_rows, cfg.n_cols, profile, derive_seed(seed, "matrix"));
  SvdOptions options;
  options.dense_budget = cfg.dense_budget;
  const Factorization full = svd_full(generated.matrix, options);

  DensityTrial trial;
  trial.profile_index = profile_index;
  trial.seed = seed;
  trial.warnings = std::move(generated.warnings);
  trial.spectrum = spectrum(full, std::min<std::size_t>(cfg.spectrum_k, static_cast<std::size_t>(full.rank())));
  {
    const Eigen::MatrixXd approx = reconstruct(truncate(full, cfg.rank), cfg.dense_budget);
    const auto losses = row_l1_loss(generated.matrix, approx, std::move(generated.group_of_row));
    trial.stats = group_stats(losses, profile);
  }
  return trial;
}

/// Trials ordered by (profile, seed) as listed in the config.
inline std::vector<DensityTrial> run_density_grid(const DensityExperimentConfig& cfg, std::size_t threads = 1) {
  cfg.check();
  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<DensityTrial> trials(cfg.profiles.size() * n_seeds);
  parallel_for(trials.size(), threads, [&](std::size_t t) {
    trials[t] = run_density_trial(cfg, t / n_seeds, cfg.seeds[t % n_seeds]);
  });
  return trials;
}

/// One density group summarized over all seeds of its profile.
struct AggregatedGroup {
  std::size_t profile_index = 0;
  double density = 0.0;
  double coverage = 0.0;
  double mean_loss = 0.0;       ///< mean over seeds of the group mean
  double row_std = 0.0;         ///< mean over seeds of the within-group population std
  double cross_seed_std = 0.0;  ///< population std over seeds of the group mean
  std::size_t n_rows = 0;
  std::size_t n_seeds = 0;
};

inline std::vector<AggregatedGroup> aggregate_density_grid(const std::vector<DensityTrial>& trials,
                                                           std::size_t n_profiles) {
  std::vector<AggregatedGroup> out;
  for (std::size_t p = 0; p < n_profiles; ++p) {
    std::vector<const DensityTrial*> mine;
    for (const auto& t : trials)
      if (t.profile_index == p) mine.push_back(&t);
    if (mine.empty()) continue;
    for (std::size_t g = 0; g < mine.front()->stats.size(); ++g) {
      AggregatedGroup agg;
      agg.profile_index = p;
      agg.density = mine.front()->stats[g].density;
      agg.coverage = mine.front()->stats[g].coverage;
      agg.n_rows = mine.front()->stats[g].n_rows;
      agg.n_seeds = mine.size();
      for (const auto* t : mine) {
        agg.mean_loss += t->stats[g].mean_loss;
        agg.row_std += t->stats[g].std_loss;
      }
      agg.mean_loss /= static_cast<double>(mine.size());
      agg.row_std /= static_cast<double>(mine.size());
      double sq = 0.0;
      for (const auto* t : mine) sq += (t->stats[g].mean_loss - agg.mean_loss) * (t->stats[g].mean_loss - agg.mean_loss);
      agg.cross_seed_std = std::sqrt(sq / static_cast<double>(mine.size()));
      out.push_back(agg);
    }
  }
  return out;
}

inline constexpr const char* kTable1Header = "density,coverage,mean_loss,std_loss,n_rows,seed";

/// Per-seed rows; std_loss is the population std over the rows of the group.
inline void write_table1_csv(std::ostream& out, const std::vector<DensityTrial>& trials) {
  out << kTable1Header << '\n';
  CsvWriter csv(out);
  for (const auto& t : trials) {
    for (const auto& s : t.stats) {
      csv.field(s.density).field(s.coverage).field(s.mean_loss).field(s.std_loss).field(s.n_rows).field(t.seed.value);
      csv.end_row();
    }
  }
}

/// Aggregated rows (seed column "all"): mean over seeds of the group mean and of the row std.
inline void write_table1_summary_csv(std::ostream& out, const std::vector<AggregatedGroup>& groups) {
  out << kTable1Header << '\n';
  CsvWriter csv(out);
  for (const auto& g : groups) {
    csv.field(g.density).field(g.coverage).field(g.mean_loss).field(g.row_std).field(g.n_rows).field("all");
    csv.end_row();
  }
}

inline void write_cross_seed_csv(std::ostream& out, const std::vector<AggregatedGroup>& groups) {
  out << "density,coverage,mean_of_means,cross_seed_std,n_seeds\n";
  CsvWriter csv(out);
  for (const auto& g : groups) {
    csv.field(g.density).field(g.coverage).field(g.mean_loss).field(g.cross_seed_std).field(g.n_seeds);
    csv.end_row();
  }
}

inline void write_spectrum_csv(std::ostream& out, const SpectrumReport& report) {
  out << "index,sigma,cumulative_energy,cumulative_sigma\n";
  CsvWriter csv(out);
  for (std::size_t i = 0; i < report.singular_values.size(); ++i) {
    csv.field(i + 1).field(report.singular_values[i]).field(report.cumulative_energy[i]);
    csv.field(report.cumulative_sigma[i]);
    csv.end_row();
  }
}

// ===========================================================================
// Representation transfer

struct TransferDatasetConfig {
  std::string name;
  std::size_t n_examples = 0;
  std::size_t n_classes = 2;
  double train_fraction = 0.8;
};

/// Six synthetic tasks with the coverage and class counts of the usual
/// sentence classification suite (the all-rows binary sentiment task is left out).
inline std::vector<TransferDatasetConfig> default_transfer_datasets(std::size_t n_rows) {
  const std::vector<std::tuple<const char*, double, std::size_t>> table{
      {"cr_like", 5.7, 2},   {"mr_like", 15.7, 2},   {"mpqa_like", 15.7, 2},
      {"subj_like", 14.3, 2}, {"sst5_like", 17.1, 5}, {"trec_like", 8.6, 6}};
  std::vector<TransferDatasetConfig> out;
  for (const auto& [name, pct, k] : table)
    out.push_back({name, static_cast<std::size_t>(std::llround(pct / 100.0 * static_cast<double>(n_rows))), k, 0.8});
  return out;
}

struct TransferExperimentConfig {
  std::size_t n_rows = 7000;
  std::size_t n_cols = 12000;
  RepKind rep = RepKind::SvdScores;
  std::vector<Eigen::Index> dims{40};
  double density = 0.5;
  std::vector<TransferDatasetConfig> datasets = default_transfer_datasets(7000);
  std::vector<RngSeed> seeds;
  LogRegConfig logreg;
  Eigen::Index oversampling = 10;
  int power_iterations = 2;
  std::size_t dense_budget = kDefaultDenseBudget;

  std::size_t total_class_columns() const {
    std::size_t k = 0;
    for (const auto& d : datasets) k += d.n_classes;
    return k;
  }

  void check() const {
    if (n_rows == 0 || n_cols == 0) throw std::invalid_argument("transfer: dimensions must be positive");
    if (!(density > 0.0 && density < 1.0)) throw std::invalid_argument("transfer: density must lie in (0, 1)");
    if (datasets.empty()) throw std::invalid_argument("transfer: no datasets");
    if (dims.empty()) throw std::invalid_argument("transfer: no representation dimensions");
    if (seeds.empty()) throw std::invalid_argument("transfer: need at least one seed");
    std::size_t rows = 0;
    for (const auto& d : datasets) {
      if (d.n_classes < 2) throw std::invalid_argument("transfer: dataset '" + d.name + "' needs >= 2 classes");
      if (d.n_examples < 2 * d.n_classes)
        throw std::invalid_argument("transfer: dataset '" + d.name + "' has too few examples");
      if (!(d.train_fraction > 0.0 && d.train_fraction < 1.0))
        throw std::invalid_argument("transfer: dataset '" + d.name + "' train fraction must lie in (0, 1)");
      rows += d.n_examples;
    }
    if (rows > n_rows) throw std::invalid_argument("transfer: datasets need more rows than the matrix has");
    const std::size_t k_total = total_class_columns();
    if (k_total > n_cols) throw std::invalid_argument("transfer: datasets need more class columns than the matrix has");
    for (auto d : dims) {
      if (d < 1) throw std::invalid_argument("transfer: representation dimension must be positive");
      if (rep == RepKind::SvdScores && static_cast<std::size_t>(d) > std::min(n_rows, n_cols))
        throw std::invalid_argument("transfer: svd dimension exceeds min(rows, cols)");
      if (rep == RepKind::BinaryDirect) {
        for (const auto& ds : datasets) {
          if (static_cast<std::size_t>(d) < ds.n_classes)
            throw std::invalid_argument("transfer: binary dimension smaller than a dataset's class count");
          if (static_cast<std::size_t>(d) - ds.n_classes > n_cols - k_total)
            throw std::invalid_argument("transfer: binary dimension exceeds available noise columns");
        }
      }
    }
  }
};

struct TransferResultRow {
  std::string dataset;
  std::size_t dataset_index = 0;
  RepKind rep = RepKind::SvdScores;
  Eigen::Index dim = 0;
  double density = 0.0;
  RngSeed seed;
  std::size_t seed_index = 0;
  double accuracy = 0.0;
  double majority_baseline = 0.0;  ///< test accuracy of always predicting the train majority class
  double coverage_pct = 0.0;
  std::size_t n_classes = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

/// Dataset specs laid out contiguously: rows from 0, class columns from 0, in config order.
inline std::vector<DatasetSpec> layout_datasets(const TransferExperimentConfig& cfg, RngSeed seed) {
  std::vector<DatasetSpec> specs;
  std::size_t row = 0;
  ColumnIndex col = 0;
  for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
    const auto& ds = cfg.datasets[d];
    std::vector<ColumnIndex> cols(ds.n_classes);
    std::iota(cols.begin(), cols.end(), col);
    specs.push_back(make_dataset_spec(ds.name, row, ds.n_examples, std::move(cols), derive_seed(seed, "labels", d)));
    row += ds.n_examples;
    col += static_cast<ColumnIndex>(ds.n_classes);
  }
  return specs;
}

/// Label matrix with the configured datasets written into it.
inline LabelMatrix build_transfer_matrix(const TransferExperimentConfig& cfg, RngSeed seed,
                                         const std::vector<DatasetSpec>& specs) {
  auto generated = generate(cfg.n_rows, cfg.n_cols, profiles::uniform(cfg.density), derive_seed(seed, "matrix"));
  return embed_datasets(generated.matrix, specs);
}

/// Example rows restricted to the dataset's class columns followed by the first
/// (dim - k) columns that belong to no dataset.
inline Eigen::MatrixXd binary_representation(const LabelMatrix& m, const DatasetSpec& spec,
                                             const std::vector<char>& is_class_col, Eigen::Index dim) {
  std::vector<Eigen::Index> position(m.cols(), -1);
  Eigen::Index next = 0;
  for (auto c : spec.class_columns) position[c] = next++;
  for (std::size_t j = 0; j < m.cols() && next < dim; ++j)
    if (!is_class_col[j]) position[j] = next++;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.n_examples), dim);
  for (std::size_t e = 0; e < spec.n_examples; ++e)
    for (ColumnIndex j : m.row(spec.row_start + e))
      if (position[j] >= 0) x(static_cast<Eigen::Index>(e), position[j]) = 1.0;
  return x;
}

namespace detail {

inline TransferResultRow train_and_score(const TransferExperimentConfig& cfg, const RepresentationSet& reps,
                                         const DatasetSpec& spec, std::size_t d, std::size_t s, Eigen::Index dim,
                                         const Split& split) {
  const auto train = reps.subset(split.train);
  const auto test = reps.subset(split.test);
  LogRegConfig lr = cfg.logreg;
  lr.seed = derive_seed(cfg.seeds[s], "logreg", d);
  const auto clf = train_logreg(train, lr);
  const auto result = evaluate(clf, test);

  TransferResultRow row;
  row.dataset = spec.name;
  row.dataset_index = d;
  row.rep = cfg.rep;
  row.dim = dim;
  row.density = cfg.density;
  row.seed = cfg.seeds[s];
  row.seed_index = s;
  row.accuracy = result.accuracy;
  const auto majority = majority_class(train.labels, spec.n_classes);
  row.majority_baseline =
      static_cast<double>(std::count(test.labels.begin(), test.labels.end(), majority)) / static_cast<double>(test.size());
  row.coverage_pct = static_cast<double>(spec.n_examples) / static_cast<double>(cfg.n_rows) * 100.0;
  row.n_classes = spec.n_classes;
  row.n_train = train.size();
  row.n_test = test.size();
  return row;
}

/// Stratified split; resplits with a fresh seed (up to 10 attempts) if train holds one class.
inline Split split_dataset(const DatasetSpec& spec, double train_fraction, RngSeed seed) {
  for (std::uint64_t attempt = 0; attempt < 10; ++attempt) {
    auto split = stratified_split(spec.labels, spec.n_classes, train_fraction, derive_seed(seed, "attempt", attempt));
    std::vector<char> present(spec.n_classes, 0);
    for (auto i : split.train) present[spec.labels[i]] = 1;
    if (std::count(present.begin(), present.end(), 1) >= 2 && !split.test.empty()) return split;
  }
  throw std::runtime_error("transfer: dataset '" + spec.name + "' cannot be split into a multi-class train set");
}

}  // namespace detail

/// All (dataset, dim) rows for one seed.
inline std::vector<TransferResultRow> run_transfer_trial(const TransferExperimentConfig& cfg, std::size_t s) {
  const RngSeed seed = cfg.seeds.at(s);
  const auto specs = layout_datasets(cfg, seed);
  const LabelMatrix matrix = build_transfer_matrix(cfg, seed, specs);

  Eigen::MatrixXd all_scores;
  if (cfg.rep == RepKind::SvdScores) {
    // One factorization at the largest dimension; smaller dims take its leading columns.
    SvdOptions options;
    options.dense_budget = cfg.dense_budget;
    options.randomized = {cfg.oversampling, cfg.power_iterations, derive_seed(seed, "svd")};
    const Eigen::Index max_dim = *std::max_element(cfg.dims.begin(), cfg.dims.end());
    all_scores = scores(svd_truncated(matrix, max_dim, SvdMethod::Randomized, options));
  }
  std::vector<char> is_class_col(matrix.cols(), 0);
  for (const auto& spec : specs)
    for (auto c : spec.class_columns) is_class_col[c] = 1;

  std::vector<TransferResultRow> rows;
  for (std::size_t d = 0; d < specs.size(); ++d) {
    const auto& spec = specs[d];
    const auto split = detail::split_dataset(spec, cfg.datasets[d].train_fraction, derive_seed(seed, "split", d));
    for (auto dim : cfg.dims) {
      RepresentationSet reps;
      reps.labels = spec.labels;
      reps.n_classes = spec.n_classes;
      reps.kind = cfg.rep;
      if (cfg.rep == RepKind::SvdScores) {
        reps.vectors = all_scores.block(static_cast<Eigen::Index>(spec.row_start), 0,
                                        static_cast<Eigen::Index>(spec.n_examples), dim);
      } else {
        reps.vectors = binary_representation(matrix, spec, is_class_col, dim);
      }
      rows.push_back(detail::train_and_score(cfg, reps, spec, d, s, dim, split));
    }
  }
  return rows;
}

/// Rows sorted by (dataset, seed, dim) in config order.
inline std::vector<TransferResultRow> run_transfer(const TransferExperimentConfig& cfg, std::size_t threads = 1) {
  cfg.check();
  std::vector<std::vector<TransferResultRow>> per_seed(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), threads, [&](std::size_t s) { per_seed[s] = run_transfer_trial(cfg, s); });

  std::vector<TransferResultRow> rows;
  for (auto& chunk : per_seed) rows.insert(rows.end(), chunk.begin(), chunk.end());
  auto dim_rank = [&](Eigen::Index dim) { return std::find(cfg.dims.begin(), cfg.dims.end(), dim) - cfg.dims.begin(); };
  std::stable_sort(rows.begin(), rows.end(), [&](const TransferResultRow& a, const TransferResultRow& b) {
    if (a.dataset_index != b.dataset_index) return a.dataset_index < b.dataset_index;
    if (a.seed_index != b.seed_index) return a.seed_index < b.seed_index;
    return dim_rank(a.dim) < dim_rank(b.dim);
  });
  return rows;
}

/**
 * Train/evaluate on externally supplied labelled vectors instead of a
 * synthetic matrix: one row per seed, each with its own stratified split.
 */
inline std::vector<TransferResultRow> run_transfer_external(const RepresentationSet& reps, const std::string& name,
                                                            double train_fraction, const LogRegConfig& logreg,
                                                            const std::vector<RngSeed>& seeds) {
  reps.check();
  DatasetSpec spec;
  spec.name = name;
  spec.n_examples = reps.size();
  spec.n_classes = reps.n_classes;
  spec.labels = reps.labels;
  TransferExperimentConfig cfg;
  cfg.n_rows = reps.size();
  cfg.rep = reps.kind;
  cfg.density = 0.0;
  cfg.seeds = seeds;
  cfg.logreg = logreg;
  std::vector<TransferResultRow> rows;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto split = detail::split_dataset(spec, train_fraction, derive_seed(seeds[s], "split", 0));
    rows.push_back(detail::train_and_score(cfg, reps, spec, 0, s, reps.dim(), split));
  }
  return rows;
}

inline constexpr const char* kTransferHeader = "dataset,rep,dim,density,seed,accuracy,coverage_pct,n_classes";

inline void write_transfer_csv(std::ostream& out, const std::vector<TransferResultRow>& rows) {
  out << kTransferHeader << '\n';
  CsvWriter csv(out);
  for (const auto& r : rows) {
    csv.field(r.dataset).field(to_string(r.rep)).field(r.dim).field(r.density).field(r.seed.value);
    csv.field(r.accuracy).field(r.coverage_pct).field(r.n_classes);
    csv.end_row();
  }
}

/// Companion file making majority-class collapse visible.
inline void write_transfer_baseline_csv(std::ostream& out, const std::vector<TransferResultRow>& rows) {
  out << "dataset,rep,dim,density,seed,majority_baseline,n_train,n_test\n";
  CsvWriter csv(out);
  for (const auto& r : rows) {
    csv.field(r.dataset).field(to_string(r.rep)).field(r.dim).field(r.density).field(r.seed.value);
    csv.field(r.majority_baseline).field(r.n_train).field(r.n_test);
    csv.end_row();
  }
}

// ===========================================================================
// Similarity scoring

struct StsScore {
  std::size_t row_a = 0;
  std::size_t row_b = 0;
  double score = 0.0;
};

inline std::vector<StsScore> run_sts(const LabelMatrix& m, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                     CosineMode mode = CosineMode::Cosine) {
  std::vector<StsScore> out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (a >= m.rows() || b >= m.rows()) throw std::invalid_argument("sts: row index out of range");
    if (m.row(a).empty() || m.row(b).empty())
      throw std::invalid_argument("sts: row " + std::to_string(m.row(a).empty() ? a : b) + " is empty");
    out.push_back({a, b, cosine(m.row(a), m.row(b), mode)});
  }
  return out;
}

inline std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t n_rows) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < n_rows; ++a)
    for (std::size_t b = a + 1; b < n_rows; ++b) pairs.emplace_back(a, b);
  return pairs;
}

inline void write_sts_csv(std::ostream& out, const std::vector<StsScore>& scores) {
  out << "row_a,row_b,cosine\n";
  CsvWriter csv(out);
  for (const auto& s : scores) {
    csv.field(s.row_a).field(s.row_b).field(s.score);
    csv.end_row();
  }
}

}  // namespace sentlabel
