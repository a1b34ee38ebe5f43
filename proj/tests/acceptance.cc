// Acceptance runner. `acceptance N` runs one criterion, `acceptance` or
// `acceptance all` runs every one. Each prints a single PASS/FAIL line;
// the exit status is non-zero when any criterion fails.

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "otapfl/channel.h"
#include "otapfl/cli.h"
#include "otapfl/config.h"
#include "otapfl/metrics.h"
#include "otapfl/models.h"
#include "otapfl/theory.h"
#include "otapfl/training.h"

using namespace otapfl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::vector<std::uint64_t> seed_range(std::uint64_t n) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), std::uint64_t{0});
  return s;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "otapfl_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Runs the CLI with its result lines suppressed so each criterion prints
// exactly one line.
int quiet_cli(const std::vector<std::string>& args) {
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int code = run_cli(args);
  std::cout.rdbuf(old);
  return code;
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Problem quadratic_problem(int K, int d, std::uint64_t seed) {
  QuadraticEnsembleConfig qc;
  qc.K = K;
  qc.d = d;
  Problem p;
  p.specs = make_quadratic_ensemble(qc, seed);
  const auto opt = compute_optima(p.specs, {}, 0.0);
  p.w_star = opt.w_star;
  return p;
}

BoundValidationConfig reference_validation() {
  BoundValidationConfig cfg;
  cfg.ensemble.K = 20;
  cfg.ensemble.d = 10;
  cfg.channel = ChannelModel::rayleigh(1.0, 0.01);
  cfg.eta_g_fraction = 0.5;
  cfg.T = 200;
  cfg.seeds = seed_range(200);
  return cfg;
}

const BoundValidationReport& reference_report(double* elapsed = nullptr) {
  static double secs = 0.0;
  static const BoundValidationReport rep = [] {
    const auto t0 = Clock::now();
    auto r = validate_bounds(reference_validation());
    secs = seconds_since(t0);
    return r;
  }();
  if (elapsed) *elapsed = secs;
  return rep;
}

const CheckResult* find_check(const BoundValidationReport& rep, const std::string& prefix,
                              std::vector<const CheckResult*>* all = nullptr) {
  const CheckResult* first = nullptr;
  for (const auto& c : rep.checks) {
    if (c.name.rfind(prefix, 0) == 0) {
      if (!first) first = &c;
      if (all) all->push_back(&c);
    }
  }
  return first;
}

// Global bound from a Monte-Carlo ensemble, checked at every round.
Outcome criterion_1() {
  double secs = 0.0;
  const auto& rep = reference_report(&secs);
  const auto* check = find_check(rep, "global_bound");
  double worst = -1e300;
  for (std::size_t t = 0; t < rep.mse.size(); ++t) {
    worst = std::max(worst, rep.mse[t] - rep.bound[t] - 3.0 * rep.mse_se[t]);
  }
  const bool pass = check && check->pass && worst <= 0.0 && secs < 60.0;
  return {pass, "eta_g=" + fmt(rep.eta_g) + " (max " + fmt(rep.eta_g_max) + "), c=" +
                    fmt(rep.c) + ", max(mse - bound - 3se)=" + fmt(worst) +
                    ", final mse=" + fmt(rep.mse.back()) + " bound=" + fmt(rep.bound.back()) +
                    ", " + fmt(secs, 3) + " s"};
}

// Steady-state floor of ||w - w*||^2 averaged over the second half of the
// horizon and over seeds.
double steady_floor(int K, const ChannelModel& channel, double eta_g) {
  const Problem p = quadratic_problem(K, 10, 1);
  TrainerConfig cfg;
  cfg.eta_g = eta_g;
  cfg.T = 400;
  cfg.local_steps = 1;
  cfg.initial_w = *p.w_star;  // start at the optimum: no transient
  const auto seeds = seed_range(40);
  const auto ens = run_ensemble(p, cfg, channel, seeds, 1);
  double sum = 0.0;
  int n = 0;
  for (std::size_t t = ens.w_mse.size() / 2; t < ens.w_mse.size(); ++t, ++n) sum += ens.w_mse[t];
  return sum / n;
}

Outcome criterion_2() {
  const auto t0 = Clock::now();
  const std::vector<double> Ks{10, 20, 40, 80};
  const double eta = 0.2;
  std::vector<double> noise_floor_k, fading_floor_k;
  for (double K : Ks) {
    noise_floor_k.push_back(steady_floor(static_cast<int>(K), ChannelModel::constant(1.0, 1.0), eta));
    fading_floor_k.push_back(steady_floor(static_cast<int>(K), ChannelModel::rayleigh(1.0, 0.0), eta));
  }
  const double s_noise = loglog_slope(Ks, noise_floor_k);
  const double s_fading = loglog_slope(Ks, fading_floor_k);
  const double secs = seconds_since(t0);
  const bool pass = std::abs(s_noise + 2.0) <= 0.3 && std::abs(s_fading + 1.0) <= 0.3 && secs < 120;
  return {pass, "receiver-noise slope=" + fmt(s_noise) + " (want -2 +/- 0.3), fading slope=" +
                    fmt(s_fading) + " (want -1 +/- 0.3), " + fmt(secs, 3) + " s"};
}

std::string quadratic_train_config(const fs::path& out, double relative) {
  return R"({"model": {"kind": "quadratic"},
             "data": {"K": 20, "d": 10, "problem_seed": 1},
             "channel": {"fading": "rayleigh", "mu_h": 1, "sigma2": 0.01},
             "training": {"eta_g_relative": )" +
         fmt(relative) + R"(, "T": 200, "local_steps": 1},
             "run": {"seeds": [0], "out": ")" +
         out.string() + "\"}}";
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv_body(text));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

Outcome criterion_3() {
  const auto dir = scratch("c3");
  const auto ok_cfg = write_file(dir / "converge.json", quadratic_train_config(dir / "converge", 0.9));
  const int ok_code = quiet_cli({"train", "--config", ok_cfg.string(), "--quiet"});
  const auto rows = csv_rows(slurp(dir / "converge" / "metrics.csv"));
  double first = NAN, last = NAN;
  if (rows.size() > 2) {
    first = std::stod(rows[1].back());
    last = std::stod(rows.back().back());
  }
  const auto bad_cfg = write_file(dir / "diverge.json", quadratic_train_config(dir / "diverge", 5.0));
  const int bad_code = quiet_cli({"train", "--config", bad_cfg.string(), "--quiet"});
  const auto bad_rows = csv_rows(slurp(dir / "diverge" / "metrics.csv"));
  const std::size_t reached = bad_rows.empty() ? 0 : bad_rows.size() - 2;
  const bool pass = ok_code == kExitOk && last < first && bad_code == kExitDivergence &&
                    reached < 200;
  return {pass, "0.9x: exit " + std::to_string(ok_code) + ", mse " + fmt(first) + " -> " +
                    fmt(last) + "; 5x: exit " + std::to_string(bad_code) +
                    ", guard tripped after round " + std::to_string(reached)};
}

Outcome criterion_4() {
  const std::size_t K = 10;
  const Eigen::Index d = 8;
  Rng rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ParamVector> grads(K);
  for (auto& g : grads) {
    g.resize(d);
    for (auto& x : g) x = normal(rng);
  }
  const ChannelModel ch = ChannelModel::rayleigh(1.0, 0.04).normalized();
  const int N = 10000;
  ParamVector mean_g = ParamVector::Zero(d);
  for (const auto& g : grads) mean_g += g / static_cast<double>(K);
  ParamVector want_var = ParamVector::Constant(d, ch.effective_noise_variance(K));
  for (const auto& g : grads) {
    want_var += ch.sigma_h2 * g.cwiseAbs2() / static_cast<double>(K * K);
  }

  std::vector<WaveformBasis> bases{make_basis(d, d, BasisKind::kIdentity),
                                   make_basis(d, 8, BasisKind::kHadamard),
                                   make_basis(d, 11, BasisKind::kFourier)};
  Matrix draws(N, d);
  double wave_err = 0.0;
  for (int t = 0; t < N; ++t) {
    const auto r = sample_realization(ch, K, d, t, 123);
    const ParamVector g = aggregate_ota(grads, r, AggregationMode::kVectorLevel);
    draws.row(t) = g.transpose();
    if (t < 300) {
      for (const auto& b : bases) {
        const ParamVector w = aggregate_ota(grads, r, AggregationMode::kWaveformLevel, &b);
        wave_err = std::max(wave_err, (w - g).cwiseAbs().maxCoeff());
      }
    }
  }
  double worst_mean_z = 0.0, worst_var_z = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::VectorXd col = draws.col(i);
    const double m = col.mean();
    const Eigen::VectorXd c = col.array() - m;
    const double var = c.squaredNorm() / (N - 1);
    const double m4 = c.array().pow(4).mean();
    const double se_mean = std::sqrt(want_var[i] / N);
    const double se_var = std::sqrt((m4 - var * var) / N);
    worst_mean_z = std::max(worst_mean_z, std::abs(m - ch.mu_h * mean_g[i]) / se_mean);
    worst_var_z = std::max(worst_var_z, std::abs(var - want_var[i]) / se_var);
  }
  const bool pass = worst_mean_z <= 3.0 && worst_var_z <= 3.0 && wave_err <= 1e-9;
  return {pass, "max |mean z|=" + fmt(worst_mean_z) + ", max |variance z|=" + fmt(worst_var_z) +
                    ", waveform vs vector max diff=" + fmt(wave_err, 3)};
}

Outcome criterion_5() {
  Rng rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  int cases = 0;
  for (Eigen::Index d : {1, 2, 16, 257}) {
    std::vector<std::pair<BasisKind, Eigen::Index>> kinds{{BasisKind::kIdentity, d},
                                                          {BasisKind::kFourier, d}};
    if (d != 257) {
      kinds.emplace_back(BasisKind::kHadamard,
                         static_cast<Eigen::Index>(std::bit_ceil(static_cast<std::uint64_t>(d))));
    }
    for (const auto& [kind, S] : kinds) {
      const auto basis = make_basis(d, S, kind);
      for (int rep = 0; rep < 100; ++rep) {
        ParamVector g(d);
        for (auto& x : g) x = normal(rng);
        const ParamVector back = demodulate(modulate(g, basis), basis);
        worst = std::max(worst, (back - g).cwiseAbs().maxCoeff());
        ++cases;
      }
    }
  }
  return {worst <= 1e-9,
          std::to_string(cases) + " vectors, max |demod(mod(g)) - g| = " + fmt(worst, 3)};
}

DataShard random_shard(int n, int p, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, classes - 1);
  DataShard s;
  s.class_count = classes;
  s.features.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) s.features(i, j) = normal(rng);
    s.labels.push_back(label(rng));
  }
  return s;
}

Outcome criterion_6() {
  const auto bin = random_shard(40, 6, 2, 1);
  const auto multi = random_shard(40, 6, 4, 2);
  QuadraticEnsembleConfig qc;
  qc.K = 1;
  qc.d = 6;
  struct Case {
    std::string name;
    ModelSpec spec;
    const DataShard* shard;
    double tol;
  };
  const std::vector<Case> cases{
      {"quadratic", make_quadratic_ensemble(qc, 3).front(), nullptr, 1e-6},
      {"logistic-binary", ModelSpec::logistic(6, 2, 0.01), &bin, 1e-6},
      {"logistic-softmax", ModelSpec::logistic(6, 4, 0.01), &multi, 1e-6},
      {"mlp", ModelSpec::mlp(6, {8, 5}, 4, 0.001), &multi, 1e-4}};
  Rng rng(4);
  std::normal_distribution<double> normal(0.0, 0.5);
  bool pass = true;
  std::ostringstream detail;
  for (const auto& c : cases) {
    double worst = 0.0;
    const DataBatch batch = c.shard ? DataBatch::full(*c.shard) : DataBatch{};
    for (int rep = 0; rep < 10; ++rep) {
      ParamVector x(c.spec.dimension());
      for (auto& v : x) v = normal(rng);
      const ParamVector an = grad(c.spec, x, batch);
      ParamVector fd(x.size());
      const double h = 1e-6;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        ParamVector a = x, b = x;
        a[i] += h;
        b[i] -= h;
        fd[i] = (loss(c.spec, a, batch) - loss(c.spec, b, batch)) / (2 * h);
      }
      worst = std::max(worst, (fd - an).norm() / std::max(an.norm(), 1e-12));
    }
    pass = pass && worst < c.tol;
    detail << c.name << " " << fmt(worst, 2) << " (<" << fmt(c.tol, 1) << ") ";
  }
  return {pass, detail.str()};
}

// Logistic task shared by the personalization criteria. The clustered
// generator is binary; the multi-class runs use the teacher generator.
std::string logistic_task(int classes, double noisy_ratio) {
  const std::string source = classes == 2 ? "clustered" : "teacher";
  return R"({"model": {"kind": "logistic", "rho": 0.001},
             "data": {"source": ")" +
         source + R"(", "K": 20, "d": 10, "class_count": )" +
         std::to_string(classes) + R"(, "heterogeneity": 3, "alpha": 0.5,
                      "noisy_client_ratio": )" +
         fmt(noisy_ratio) + R"(, "level_lower_bound": 0.5},
             "channel": {"fading": "rayleigh", "mu_h": 1, "sigma2": 0.01},
             "training": {"lambda": 0.1, "eta_g": 0.5, "eta_l": 0.2, "T": 100,
                          "local_steps": 5},
             "run": {"seeds": [0, 1, 2, 3, 4]}})";
}

struct AccuracyPair {
  double personal = 0.0;
  double generic = 0.0;
};

AccuracyPair mean_final_accuracy(const ExperimentConfig& cfg) {
  AccuracyPair acc;
  for (auto seed : cfg.run.seeds) {
    const Problem p = build_problem(cfg, seed);
    const auto m = run_experiment(p, trainer_for(cfg, p, seed), cfg.channel);
    acc.personal += m.rows.back().mean_personal_acc;
    acc.generic += m.rows.back().generic_acc;
  }
  const double n = static_cast<double>(cfg.run.seeds.size());
  acc.personal /= n;
  acc.generic /= n;
  return acc;
}

Outcome criterion_7() {
  const auto acc = mean_final_accuracy(parse_config_text(logistic_task(2, 0.0)));
  const double gap = 100.0 * (acc.personal - acc.generic);
  return {gap >= 2.0, "personal " + fmt(100 * acc.personal) + "% vs generic " +
                          fmt(100 * acc.generic) + "%, gap " + fmt(gap) + " points (need >= 2)"};
}

Outcome criterion_8() {
  const std::vector<double> ratios{0.0, 0.2, 0.4, 0.6};
  std::vector<double> gaps;
  for (double q : ratios) {
    const auto acc = mean_final_accuracy(parse_config_text(logistic_task(10, q)));
    gaps.push_back(100.0 * (acc.personal - acc.generic));
  }
  int inversions = 0;
  bool within = true;
  for (std::size_t i = 0; i + 1 < gaps.size(); ++i) {
    if (gaps[i + 1] < gaps[i]) {
      ++inversions;
      within = within && gaps[i] - gaps[i + 1] <= 0.5;
    }
  }
  const bool pass = inversions == 0 || (inversions == 1 && within);
  std::ostringstream d;
  d << "gap (points) at ratios 0/0.2/0.4/0.6:";
  for (double g : gaps) d << ' ' << fmt(g);
  d << "; " << inversions << " decrease(s)";
  return {pass, d.str()};
}

Outcome criterion_9() {
  // Personal models with no pull toward w: local SGD, round by round.
  const auto cfg_doc = parse_config_text(
      R"({"data": {"K": 6, "d": 5, "train_per_client": 40, "test_per_client": 10}})");
  const Problem lp = build_problem(cfg_doc, 3);
  TrainerConfig tc;
  tc.lambda = 0.0;
  tc.batch_size = 8;
  tc.local_steps = 3;
  tc.T = 30;
  tc.seed = 11;
  const auto rayleigh = ChannelModel::rayleigh(1.0, 0.05).normalized();
  const ParamVector w0 = ParamVector::Zero(lp.dimension());
  std::vector<std::vector<ParamVector>> refs;
  for (int k = 0; k < static_cast<int>(lp.K()); ++k) refs.push_back(local_sgd_reference(lp, k, w0, tc));
  auto clients = make_clients(lp, w0);
  GlobalState st{0, w0};
  bool local_exact = true;
  for (int t = 0; t < tc.T; ++t) {
    global_round(st, clients, rayleigh, tc);
    for (const auto& c : clients) {
      local_exact = local_exact && c.v == refs[static_cast<std::size_t>(c.client_id)][static_cast<std::size_t>(t + 1)];
    }
  }

  // FedProx without the proximal term is FedAvg.
  TrainerConfig avg = tc;
  avg.algorithm = Algorithm::kOtaFedAvg;
  avg.lambda = 0.1;
  TrainerConfig prox = avg;
  prox.algorithm = Algorithm::kOtaFedProx;
  prox.mu_prox = 0.0;
  const auto a = run_experiment(lp, avg, rayleigh);
  const auto b = run_experiment(lp, prox, rayleigh);
  const bool prox_exact = metrics_csv_body(a) == metrics_csv_body(b) && a.final_w == b.final_w;

  // Noiseless constant channel is plain gradient descent at rate eta_g mu_h.
  const Problem qp = quadratic_problem(10, 6, 2);
  TrainerConfig gd;
  gd.eta_g = 0.2;
  gd.T = 100;
  const auto constant = ChannelModel::constant(1.3, 0.0).normalized();
  const ParamVector q0 = ParamVector::Zero(6);
  const auto ref = centralized_gd(qp, q0, gd.eta_g * 1.3, gd.T);
  auto qc = make_clients(qp, q0);
  GlobalState qs{0, q0};
  double gd_err = 0.0;
  for (int t = 0; t < gd.T; ++t) {
    global_round(qs, qc, constant, gd);
    gd_err = std::max(gd_err, (qs.w - ref[static_cast<std::size_t>(t + 1)]).cwiseAbs().maxCoeff());
  }
  const bool pass = local_exact && prox_exact && gd_err <= 1e-12;
  return {pass, std::string("lambda=0 vs local SGD: ") + (local_exact ? "bit-exact" : "DIFFERS") +
                    "; FedProx(mu=0) vs FedAvg: " + (prox_exact ? "bit-exact" : "DIFFERS") +
                    "; constant channel vs GD max per-round diff " + fmt(gd_err, 3)};
}

Outcome criterion_10() {
  const auto& rep = reference_report();
  std::vector<const CheckResult*> rec;
  find_check(rep, "personal_recursion", &rec);
  const auto* rate = find_check(rep, "personal_rate");
  bool pass = !rec.empty() && rate != nullptr && rate->pass;
  std::ostringstream d;
  for (const auto* c : rec) {
    pass = pass && c->pass;
    d << c->name << (c->pass ? " ok; " : " FAILED (" + c->detail + "); ");
  }
  if (rate) d << "rate check: " << rate->detail;
  return {pass, d.str()};
}

Outcome criterion_11() {
  const auto dir = scratch("c11");
  std::vector<std::string> differing;
  auto compare = [&](const std::string& what, const std::string& cmd, const std::string& cfg_text,
                     const std::vector<std::string>& files) {
    const auto cfg = write_file(dir / (what + ".json"), cfg_text);
    for (const char* w : {"1", "4"}) {
      const int code = quiet_cli({cmd, "--config", cfg.string(), "--workers", w, "--out",
                                (dir / (what + "_w" + w)).string(), "--quiet"});
      if (code != kExitOk) differing.push_back(what + " exit " + std::to_string(code));
    }
    for (const auto& f : files) {
      const auto a = slurp(dir / (what + "_w1") / f);
      const auto b = slurp(dir / (what + "_w4") / f);
      if (a.empty() || csv_body(a) != csv_body(b)) differing.push_back(what + "/" + f);
    }
  };
  compare("train", "train", logistic_task(2, 0.0), {"summary.csv", "seed_0/metrics.csv", "seed_4/metrics.csv"});
  compare("bounds", "validate-bounds",
          R"({"model": {"kind": "quadratic"}, "data": {"K": 20, "d": 10, "problem_seed": 1},
              "channel": {"fading": "rayleigh", "mu_h": 1, "sigma2": 0.01},
              "training": {"eta_g_relative": 0.5, "T": 200},
              "run": {"seeds": [)" + [] {
            std::string s;
            for (int i = 0; i < 200; ++i) s += (i ? "," : "") + std::to_string(i);
            return s;
          }() + "]}}",
          {"bounds.csv"});
  std::string sweep = logistic_task(10, 0.0);
  sweep.insert(sweep.rfind('}'), R"(, "sweep": {"noisy_client_ratio": [0, 0.2, 0.4, 0.6]})");
  compare("sweep", "sweep", sweep,
          {"index.csv", "points/point_0.csv", "points/point_1.csv", "points/point_2.csv",
           "points/point_3.csv"});
  std::string detail = "train, validate-bounds and sweep CSV bodies with 1 vs 4 workers: ";
  if (differing.empty()) return {true, detail + "identical"};
  for (const auto& d : differing) detail += d + " ";
  return {false, detail};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::function<Outcome()>> criteria{
      criterion_1, criterion_2, criterion_3, criterion_4,  criterion_5, criterion_6,
      criterion_7, criterion_8, criterion_9, criterion_10, criterion_11};
  std::vector<int> which;
  if (argc < 2 || std::string(argv[1]) == "all") {
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) which.push_back(i);
  } else {
    for (int a = 1; a < argc; ++a) {
      const int n = std::atoi(argv[a]);
      if (n < 1 || n > static_cast<int>(criteria.size())) {
        std::cerr << "usage: acceptance [all | 1..11 ...]\n";
        return 2;
      }
      which.push_back(n);
    }
  }
  bool all_pass = true;
  for (int n : which) {
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && o.pass;
    std::cout << "[criterion " << n << "] " << (o.pass ? "PASS" : "FAIL") << " " << o.detail
              << std::endl;
  }
  return all_pass ? 0 : 1;
}
