// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   sentlabel_acceptance --cli <path to sentlabel> --work-dir <dir> [--only <name>]...

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sentlabel/sentlabel.hpp"

namespace fs = std::filesystem;
using namespace sentlabel;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void fail(const std::string& why) {
    if (!pass) detail << "; ";
    else detail.str("");
    pass = false;
    detail << why;
  }
};

struct Env {
  std::string cli;
  fs::path work;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void run_cli(const Env& env, const std::string& args) {
  const std::string cmd = "\"" + env.cli + "\" " + args + " > /dev/null";
  const int rc = std::system(cmd.c_str());
  if (rc != 0) throw std::runtime_error("command failed (" + std::to_string(rc) + "): " + cmd);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split(line, ','));
  return rows;
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome table1_reproduction(const Env& env) {
  Outcome o;
  const auto dir = env.work / "table1";
  run_cli(env, "--seed 1 --out-dir \"" + dir.string() + "\" table1 --rows 4000 --cols 4300 --rank 40 --trials 5");
  const auto rows = read_csv(dir / "table1.csv");
  if (rows.size() != 9) {
    o.fail("expected 9 rows, got " + std::to_string(rows.size()));
    return o;
  }
  const double target[3][3] = {{14, 139, 39}, {15, 92, 750}, {16, 93, 754}};
  const char* block[3] = {"skew-sparse", "even", "skew-dense"};
  double mean[3][3];
  for (int b = 0; b < 3; ++b) {
    o.detail << block[b] << " (";
    for (int g = 0; g < 3; ++g) {
      mean[b][g] = parse_real(rows[static_cast<std::size_t>(b * 3 + g)][2]);
      o.detail << (g ? ", " : "") << fmt(mean[b][g], 1);
    }
    o.detail << ") ";
  }
  const std::string summary = o.detail.str();
  for (int b = 0; b < 3; ++b)
    for (int g = 0; g < 3; ++g)
      if (std::abs(mean[b][g] - target[b][g]) > 0.3 * target[b][g])
        o.fail(std::string(block[b]) + " group " + std::to_string(g) + " mean " + fmt(mean[b][g], 1) +
               " outside +-30% of " + fmt(target[b][g], 0));
  for (int b = 0; b < 3; ++b)
    if (!(mean[b][0] < mean[b][1] && mean[b][0] < mean[b][2])) o.fail(std::string("(a) fails in ") + block[b]);
  if (!(mean[0][1] > mean[0][2])) o.fail("(b) 1% group does not exceed 10% group in skew-sparse");
  for (int b = 1; b < 3; ++b)
    if (!(mean[b][0] < mean[b][1] && mean[b][1] < mean[b][2])) o.fail(std::string("(c) fails in ") + block[b]);
  if (o.pass) o.detail << "; orderings (a) (b) (c) hold";
  else o.detail << " | " << summary;
  return o;
}

Outcome eym_identity(const Env&) {
  Outcome o;
  double worst = 0.0;
  std::size_t checked = 0;
  std::uint64_t seed = 0;
  for (auto [rows, cols] : {std::pair{300, 300}, std::pair{300, 220}, std::pair{180, 300}, std::pair{57, 93}}) {
    for (double p : {0.01, 0.1, 0.5}) {
      // Plain Bernoulli cells: empty or repeated rows and columns are allowed here.
      Rng rng(RngSeed{++seed});
      std::vector<SparseRow> cells(static_cast<std::size_t>(rows));
      for (auto& row : cells)
        for (int j = 0; j < cols; ++j)
          if (rng.bernoulli(p)) row.push_back(static_cast<ColumnIndex>(j));
      const LabelMatrix m(static_cast<std::size_t>(cols), std::move(cells));
      const auto f = svd_full(m);
      const auto a = densify(m);
      const double scale = a.norm();
      const auto rank = static_cast<Eigen::Index>(numerical_rank(f));
      for (Eigen::Index r = 1; r <= f.rank(); ++r) {
        const double err = (a - reconstruct(truncate(f, r))).norm();
        const double bound = eym_bound(f, r);
        ++checked;
        if (r < rank) {
          const double rel = std::abs(err - bound) / bound;
          worst = std::max(worst, rel);
          if (rel > 1e-8)
            o.fail(std::to_string(rows) + "x" + std::to_string(cols) + " p=" + fmt(p, 2) + " r=" + std::to_string(r) +
                   " relative gap " + std::to_string(rel));
        } else if (err > 1e-8 * scale || bound > 1e-8 * scale) {
          // Beyond the numerical rank both sides are rounding noise.
          o.fail("r=" + std::to_string(r) + " beyond rank " + std::to_string(rank) + " but error " + std::to_string(err));
        }
      }
    }
  }
  if (o.pass) o.detail << checked << " (matrix, r) pairs, worst relative gap " << worst;
  return o;
}

Outcome table2_trends(const Env& env) {
  Outcome o;
  const auto dir = env.work / "table2";
  const std::string common = "--rows 7000 --cols 12000 --trials 3";
  run_cli(env, "--seed 1 --out-dir \"" + (dir / "binary").string() + "\" transfer " + common +
                   " --rep binary --dims 40 --density 0.5");
  run_cli(env, "--seed 1 --out-dir \"" + (dir / "svd50").string() + "\" transfer " + common +
                   " --rep svd --dims 4000,400,40 --density 0.5");
  run_cli(env, "--seed 1 --out-dir \"" + (dir / "svd1").string() + "\" transfer " + common +
                   " --rep svd --dims 4000,400,40 --density 0.01");

  // (a)
  const auto binary = read_csv(dir / "binary" / "transfer.csv");
  double worst_binary = 1.0;
  std::size_t datasets = 0;
  std::map<std::string, int> names;
  for (const auto& r : binary) {
    names[r[0]] = 1;
    if (r[7] != "2") continue;
    worst_binary = std::min(worst_binary, parse_real(r[5]));
  }
  datasets = names.size();
  if (datasets < 5) o.fail("only " + std::to_string(datasets) + " datasets");
  if (worst_binary < 0.99) o.fail("(a) binary d=40 worst 2-class accuracy " + fmt(worst_binary, 4));

  auto mean_by_dim = [](const std::vector<std::vector<std::string>>& rows) {
    std::map<long, std::pair<double, int>> acc;
    for (const auto& r : rows) {
      auto& slot = acc[std::stol(r[2])];
      slot.first += parse_real(r[5]);
      slot.second += 1;
    }
    std::map<long, double> out;
    for (auto& [d, s] : acc) out[d] = s.first / s.second;
    return out;
  };
  const auto m50 = mean_by_dim(read_csv(dir / "svd50" / "transfer.csv"));
  const auto m1 = mean_by_dim(read_csv(dir / "svd1" / "transfer.csv"));

  // (b)
  if (!(m50.at(400) <= m50.at(4000) + 0.02 && m50.at(40) <= m50.at(400) + 0.02))
    o.fail("(b) 50% svd mean accuracy not non-increasing 4000->400->40: " + fmt(m50.at(4000)) + ", " +
           fmt(m50.at(400)) + ", " + fmt(m50.at(40)));
  // (c)
  for (long d : {40L, 400L, 4000L})
    if (!(m1.at(d) > m50.at(d)))
      o.fail("(c) d=" + std::to_string(d) + ": 1% mean " + fmt(m1.at(d)) + " does not beat 50% mean " + fmt(m50.at(d)));

  o.detail << (o.pass ? "" : " | ") << "binary d=40 worst 2-class acc " << fmt(worst_binary, 4) << "; svd 50% mean (4000/400/40) "
           << fmt(m50.at(4000)) << "/" << fmt(m50.at(400)) << "/" << fmt(m50.at(40)) << "; svd 1% mean "
           << fmt(m1.at(4000)) << "/" << fmt(m1.at(400)) << "/" << fmt(m1.at(40)) << "; " << datasets << " datasets x 3 seeds";
  return o;
}

Outcome classifier_correctness(const Env&) {
  Outcome o;
  Rng rng(RngSeed{2024});
  // Gradient check.
  double worst_grad = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 5, d = 1 + static_cast<Eigen::Index>(rng.below(6)), k = 2 + static_cast<Eigen::Index>(rng.below(4));
    Eigen::MatrixXd x(n, d), w(k, d);
    Eigen::VectorXd b(k);
    std::vector<std::size_t> y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.normal();
      y[static_cast<std::size_t>(i)] = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(k)));
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      b(c) = rng.normal();
      for (Eigen::Index j = 0; j < d; ++j) w(c, j) = rng.normal();
    }
    const double l2 = rng.uniform();
    Eigen::MatrixXd gw;
    Eigen::VectorXd gb;
    softmax_objective(x, y, w, b, l2, &gw, &gb);
    const double h = 1e-6;
    auto rel = [](double a, double num) { return std::abs(a - num) / std::max(1.0, std::abs(num)); };
    for (Eigen::Index c = 0; c < k; ++c) {
      for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::MatrixXd wp = w, wm = w;
        wp(c, j) += h;
        wm(c, j) -= h;
        worst_grad = std::max(worst_grad, rel(gw(c, j), (softmax_objective(x, y, wp, b, l2) - softmax_objective(x, y, wm, b, l2)) / (2 * h)));
      }
      Eigen::VectorXd bp = b, bm = b;
      bp(c) += h;
      bm(c) -= h;
      worst_grad = std::max(worst_grad, rel(gb(c), (softmax_objective(x, y, w, bp, l2) - softmax_objective(x, y, w, bm, l2)) / (2 * h)));
    }
  }
  if (worst_grad > 1e-5) o.fail("gradient check worst relative error " + std::to_string(worst_grad));

  // Separable one-hot inputs.
  double worst_separable = 1.0;
  for (std::size_t k : {2u, 3u, 6u}) {
    RepresentationSet set;
    set.n_classes = k;
    set.vectors = Eigen::MatrixXd::Zero(120, static_cast<Eigen::Index>(k + 10));
    for (Eigen::Index i = 0; i < 120; ++i) {
      const auto label = static_cast<std::size_t>(rng.below(k));
      set.labels.push_back(label);
      set.vectors(i, static_cast<Eigen::Index>(label)) = 1.0;
      for (Eigen::Index j = static_cast<Eigen::Index>(k); j < set.vectors.cols(); ++j) set.vectors(i, j) = rng.bernoulli(0.5);
    }
    worst_separable = std::min(worst_separable, evaluate(train_logreg(set), set).accuracy);
  }
  if (worst_separable != 1.0) o.fail("separable train accuracy " + fmt(worst_separable, 4));

  // Reference trainer agreement on Gaussian blobs.
  double worst_gap = 0.0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    auto make = [&](std::size_t n, std::uint64_t seed) {
      Rng r(RngSeed{seed});
      RepresentationSet set;
      set.n_classes = 3;
      set.vectors.resize(static_cast<Eigen::Index>(n), 2);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % 3;
        const double angle = 2.0943951023931953 * static_cast<double>(label);
        set.vectors(static_cast<Eigen::Index>(i), 0) = 2.0 * std::cos(angle) + 1.2 * r.normal();
        set.vectors(static_cast<Eigen::Index>(i), 1) = 2.0 * std::sin(angle) + 1.2 * r.normal();
        set.labels.push_back(label);
      }
      return set;
    };
    const auto train = make(100, s);
    const auto test = make(1000, 1000 + s);
    std::vector<std::vector<double>> xs;
    for (Eigen::Index i = 0; i < 100; ++i) xs.push_back({train.vectors(i, 0), train.vectors(i, 1)});
    const auto ref = oracle::reference_train(xs, train.labels, 3, 1e-4, 0.5, 20000);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < test.vectors.rows(); ++i)
      correct += ref.predict({test.vectors(i, 0), test.vectors(i, 1)}) == test.labels[static_cast<std::size_t>(i)];
    const double ref_acc = static_cast<double>(correct) / 1000.0;
    const double acc = evaluate(train_logreg(train), test).accuracy;
    worst_gap = std::max(worst_gap, std::abs(acc - ref_acc));
  }
  if (worst_gap > 0.02) o.fail("blob accuracy differs from reference by " + fmt(worst_gap, 4));
  if (o.pass)
    o.detail << "gradient worst rel err " << worst_grad << ", separable acc " << fmt(worst_separable, 1)
             << ", worst blob gap vs reference " << fmt(worst_gap, 4);
  return o;
}

Outcome cosine_pair_laws(const Env&) {
  Outcome o;
  std::size_t pairs = 0;
  for (unsigned length = 1; length <= 12 && o.pass; ++length) {
    const unsigned n = 1u << length;
    std::vector<std::vector<ColumnIndex>> sets(n);
    for (unsigned m = 0; m < n; ++m)
      for (unsigned j = 0; j < length; ++j)
        if (m >> j & 1u) sets[m].push_back(j);
    Eigen::VectorXd a(length), b(length);
    for (unsigned ma = 0; ma < n && o.pass; ++ma) {
      for (unsigned j = 0; j < length; ++j) a(j) = ma >> j & 1u;
      if (ma && cosine(sets[ma], sets[ma]) != 1.0) o.fail("cosine(a,a) != 1 for mask " + std::to_string(ma));
      for (unsigned mb = 0; mb < n; ++mb) {
        ++pairs;
        if (ma && mb) {
          const double c = cosine(sets[ma], sets[mb]);
          if (c != cosine(sets[mb], sets[ma]) || c < 0.0 || c > 1.0) {
            o.fail("cosine law broken at " + std::to_string(ma) + "," + std::to_string(mb));
            break;
          }
        }
        for (unsigned j = 0; j < length; ++j) b(j) = mb >> j & 1u;
        const Eigen::VectorXd f = pair_features(a, b);
        unsigned first = 0, second = 0;
        for (unsigned j = 0; j < length; ++j) {
          first |= (f(j) != 0.0 ? 1u : 0u) << j;
          second |= (f(length + j) != 0.0 ? 1u : 0u) << j;
        }
        if ((first & second) != 0 || (first | second) != (ma | mb)) {
          o.fail("pair feature partition broken at " + std::to_string(ma) + "," + std::to_string(mb));
          break;
        }
      }
    }
  }
  if (o.pass) o.detail << pairs << " ordered pairs over lengths 1..12";
  return o;
}

Outcome determinism(const Env& env) {
  Outcome o;
  const auto root = env.work / "determinism";
  const auto gen = root / "gen";
  const std::string matrix = (gen / "matrix.txt").string();
  struct Case {
    std::string command;
    std::string args;
  };
  run_cli(env, "--seed 3 --out-dir \"" + gen.string() + "\" generate --rows 150 --cols 170 --profile table1-even");
  const std::vector<Case> cases{
      {"generate", "--seed 9 generate --rows 300 --cols 320 --profile table1-skew-sparse"},
      {"validate", "validate --input \"" + matrix + "\""},
      {"factor", "factor --input \"" + matrix + "\" --rank 12"},
      {"factor", "--seed 4 factor --input \"" + matrix + "\" --rank 12 --method randomized"},
      {"spectrum", "spectrum --input \"" + matrix + "\" --k 40"},
      {"table1", "--seed 2 table1 --rows 200 --cols 250 --rank 10 --trials 3 --spectrum-k 30 --profiles \"0.02:0.6,0.1:0.3,0.3:0.1;0.02:0.1,0.1:0.3,0.3:0.6\""},
      {"transfer", "--seed 6 transfer --rows 500 --cols 600 --dims 60,8 --datasets a:60:2,b:90:3,c:40:4 --trials 3"},
      {"transfer", "--seed 6 transfer --rows 500 --cols 600 --rep binary --dims 30 --datasets a:60:2,b:90:3 --trials 2"},
      {"sts", "sts --input \"" + matrix + "\" --paper-literal"},
  };
  std::size_t files = 0;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto first = root / ("case" + std::to_string(c) + "_a");
    const auto second = root / ("case" + std::to_string(c) + "_b");
    try {
      // validate exits 1 on an invalid matrix; the outputs are still written.
      const std::string cmd1 = "\"" + env.cli + "\" --threads 1 --out-dir \"" + first.string() + "\" " + cases[c].args + " > /dev/null 2>&1";
      std::system(cmd1.c_str());
      const auto manifest = first / (cases[c].command + ".manifest.json");
      const std::string cmd2 = "\"" + env.cli + "\" --threads 4 --config \"" + manifest.string() + "\" --out-dir \"" +
                               second.string() + "\" " + cases[c].command + " > /dev/null 2>&1";
      std::system(cmd2.c_str());
      std::size_t compared = 0;
      for (const auto& entry : fs::directory_iterator(first)) {
        const auto name = entry.path().filename().string();
        if (name.ends_with(".manifest.json")) continue;
        ++compared;
        if (!fs::exists(second / name) || slurp(entry.path()) != slurp(second / name))
          o.fail(cases[c].command + ": " + name + " differs on re-run");
      }
      if (compared == 0) o.fail(cases[c].command + ": no outputs");
      files += compared;
    } catch (const std::exception& e) {
      o.fail(cases[c].command + ": " + e.what());
    }
  }
  if (o.pass) o.detail << cases.size() << " command runs, " << files << " output files byte-identical (threads 1 vs 4)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Env env;
  std::vector<std::string> only;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") env.cli = argv[i + 1];
    else if (flag == "--work-dir") env.work = argv[i + 1];
    else if (flag == "--only") only.push_back(argv[i + 1]);
  }
  if (env.cli.empty() || env.work.empty()) {
    std::cerr << "usage: sentlabel_acceptance --cli <sentlabel> --work-dir <dir> [--only <criterion>]...\n";
    return 2;
  }
  fs::remove_all(env.work);
  fs::create_directories(env.work);

  const std::vector<std::pair<std::string, std::function<Outcome(const Env&)>>> criteria{
      {"eym_identity", eym_identity},
      {"classifier_correctness", classifier_correctness},
      {"cosine_pair_laws", cosine_pair_laws},
      {"determinism", determinism},
      {"table1_reproduction", table1_reproduction},
      {"table2_trends", table2_trends},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn(env);
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str() << " [" << fmt(secs, 1) << " s]"
              << std::endl;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
