#include "otapfl/cli.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "otapfl/config.h"
#include "otapfl/metrics.h"
#include "otapfl/model_io.h"
#include "otapfl/parallel.h"
#include "otapfl/theory.h"

namespace otapfl {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  bool quiet = false;
};

int resolve_workers(const Options& opt, const ExperimentConfig& cfg) {
  if (opt.workers) return *opt.workers;
  if (const char* env = std::getenv("OTA_PFL_WORKERS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) {
      throw ConfigError(std::string("OTA_PFL_WORKERS must be a positive integer, got '") +
                        env + "'");
    }
    return static_cast<int>(v);
  }
  return cfg.run.workers.value_or(1);
}

ExperimentConfig load(const Options& opt) {
  ExperimentConfig cfg = parse_config(opt.config);
  ojson patch = ojson::object();
  if (opt.seed) {
    patch["run"]["seeds"] = ojson::array({*opt.seed});
  }
  if (opt.out) patch["run"]["out"] = *opt.out;
  if (!patch.empty()) cfg = apply_overrides(cfg, patch);
  return cfg;
}

std::vector<std::string> header_for(const ExperimentConfig& cfg,
                                    const std::vector<std::string>& extra) {
  auto lines = cfg.echo_lines();
  lines.insert(lines.end(), extra.begin(), extra.end());
  return lines;
}

struct SeedRun {
  MetricsTable table;
  bool diverged = false;
  std::string error;
  double eta_g = 0.0;
};

SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed, int workers) {
  const Problem problem = build_problem(cfg, seed);
  TrainerConfig tc = trainer_for(cfg, problem, seed);
  tc.workers = workers;
  SeedRun r;
  r.eta_g = tc.eta_g;
  try {
    r.table = run_experiment(problem, tc, cfg.channel);
  } catch (const NumericalError& e) {
    r.table = e.partial();
    r.diverged = true;
    r.error = e.what();
  }
  return r;
}

void save_run(const fs::path& dir, const ExperimentConfig& cfg, std::uint64_t seed,
              SeedRun& run) {
  run.table.header = header_for(cfg, {"seed=" + std::to_string(seed),
                                      "derived.eta_g=" + format_double(run.eta_g)});
  if (run.diverged) run.table.header.push_back("status=diverged: " + run.error);
  write_text_atomic(dir / "metrics.csv", metrics_csv(run.table));
  if (run.table.final_w.size() > 0) {
    ModelCheckpoint ckpt;
    ckpt.round = static_cast<std::int64_t>(run.table.rows.size()) - 1;
    ckpt.w = run.table.final_w;
    ckpt.v = run.table.final_v;
    save_models(dir / "model.bin", ckpt);
  }
}

// Round-wise mean over runs; runs that stopped early contribute to the
// rounds they reached.
MetricsTable mean_table(const std::vector<const MetricsTable*>& runs) {
  MetricsTable out;
  std::size_t rounds = 0;
  for (const auto* r : runs) rounds = std::max(rounds, r->rows.size());
  for (std::size_t t = 0; t < rounds; ++t) {
    MetricsRow row;
    row.round = static_cast<std::int64_t>(t);
    row.global_loss = row.mean_personal_loss = row.mean_personal_acc = row.generic_acc =
        row.w_dist_sq = 0.0;
    double n = 0.0;
    for (const auto* r : runs) {
      if (t >= r->rows.size()) continue;
      const auto& x = r->rows[t];
      row.global_loss += x.global_loss;
      row.mean_personal_loss += x.mean_personal_loss;
      row.mean_personal_acc += x.mean_personal_acc;
      row.generic_acc += x.generic_acc;
      row.w_dist_sq += x.w_dist_sq;
      n += 1.0;
    }
    row.global_loss /= n;
    row.mean_personal_loss /= n;
    row.mean_personal_acc /= n;
    row.generic_acc /= n;
    row.w_dist_sq /= n;
    out.rows.push_back(row);
  }
  return out;
}

std::string seeds_text(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? " " : "") + std::to_string(seeds[i]);
  return s;
}

int cmd_train(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  const int workers = resolve_workers(opt, cfg);
  const auto& seeds = cfg.run.seeds;
  const fs::path out = cfg.run.out;
  std::vector<SeedRun> runs(seeds.size());
  const bool single = seeds.size() == 1;
  parallel_for(seeds.size(), single ? 1 : workers, [&](std::size_t i) {
    runs[i] = run_seed(cfg, seeds[i], single ? workers : 1);
    const fs::path dir = single ? out : out / ("seed_" + std::to_string(seeds[i]));
    save_run(dir, cfg, seeds[i], runs[i]);
    spdlog::info("seed {}: {} rounds{}", seeds[i], runs[i].table.rows.size() - 1,
                 runs[i].diverged ? " (diverged)" : "");
  });
  if (!single) {
    std::vector<const MetricsTable*> tables;
    for (const auto& r : runs) tables.push_back(&r.table);
    MetricsTable summary = mean_table(tables);
    summary.header = header_for(cfg, {"seeds=" + seeds_text(seeds), "aggregate=mean"});
    write_text_atomic(out / "summary.csv", metrics_csv(summary));
  }
  int code = kExitOk;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].diverged) {
      std::cerr << "seed " << seeds[i] << ": " << runs[i].error << '\n';
      code = kExitDivergence;
    }
  }
  if (!opt.quiet && code == kExitOk) {
    const auto& last = runs.front().table.rows.back();
    std::cout << "round " << last.round << ": global_loss=" << format_cell(last.global_loss)
              << " personal_acc=" << format_cell(last.mean_personal_acc)
              << " generic_acc=" << format_cell(last.generic_acc) << '\n';
  }
  return code;
}

int cmd_validate(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  if (cfg.model.kind != ModelKind::kQuadratic) {
    throw ConfigError("validate-bounds runs on the quadratic ensemble; set model.kind to quadratic");
  }
  BoundValidationConfig bv;
  bv.ensemble = cfg.model.ensemble;
  bv.problem_seed = cfg.data.problem_seed.value_or(cfg.run.seeds.front());
  bv.channel = cfg.channel;
  if (cfg.eta_g_relative) {
    bv.eta_g_fraction = *cfg.eta_g_relative;
  } else {
    bv.eta_g_fraction.reset();
    bv.eta_g = cfg.trainer.eta_g;
  }
  bv.T = cfg.trainer.T;
  bv.seeds = cfg.run.seeds;
  bv.lambdas = cfg.validation.lambdas;
  bv.eta_l_scale = cfg.validation.eta_l_scale;
  bv.radius_factor = cfg.validation.radius_factor;
  bv.rate_lambda = cfg.validation.rate_lambda;
  bv.workers = resolve_workers(opt, cfg);

  BoundValidationReport rep;
  try {
    rep = validate_bounds(bv);
  } catch (const BoundConditionError& e) {
    throw ConfigError(e.what());
  }
  MetricsTable table = rep.first_run;
  table.header = header_for(
      cfg, {"seeds=" + seeds_text(bv.seeds), "derived.eta_g=" + format_double(rep.eta_g),
            "derived.eta_g_max=" + format_double(rep.eta_g_max),
            "derived.c=" + format_double(rep.c),
            "derived.delta=" + format_double(rep.constants.delta),
            "derived.projection_radius=" + format_double(rep.projection_radius)});
  for (const auto& c : rep.checks) {
    table.header.push_back("check." + c.name + "=" + (c.pass ? "PASS" : "FAIL"));
  }
  const std::size_t n = table.rows.size();
  std::vector<ExtraColumn> extra{{"mse_mean", rep.mse},
                                 {"mse_se", rep.mse_se},
                                 {"bound_t", rep.bound},
                                 {"c_const", std::vector<double>(n, rep.c)},
                                 {"eta_g_max", std::vector<double>(n, rep.eta_g_max)}};
  write_text_atomic(fs::path(cfg.run.out) / "bounds.csv", metrics_csv(table, extra));
  for (const auto& c : rep.checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  }
  return rep.all_pass() ? kExitOk : kExitBoundViolation;
}

struct PointSummary {
  std::string status = "ok";
  double personal_acc = std::nan("");
  double generic_acc = std::nan("");
  double global_loss = std::nan("");
};

// Last data row of a point file written earlier.
std::optional<PointSummary> read_point(const fs::path& file) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  std::string line, header, last;
  std::string status = "ok";
  while (std::getline(in, line)) {
    if (line.rfind("# status=", 0) == 0) status = line.substr(9);
    if (line.empty() || line.front() == '#') continue;
    if (header.empty()) {
      header = line;
    } else {
      last = line;
    }
  }
  if (header.empty() || last.empty()) return std::nullopt;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  const auto names = split(header);
  const auto cells = split(last);
  PointSummary p;
  p.status = status;
  for (std::size_t i = 0; i < names.size() && i < cells.size(); ++i) {
    const double v = cells[i].empty() ? std::nan("") : std::stod(cells[i]);
    if (names[i] == "mean_personal_acc") p.personal_acc = v;
    if (names[i] == "generic_acc") p.generic_acc = v;
    if (names[i] == "global_loss") p.global_loss = v;
  }
  return p;
}

int cmd_sweep(const Options& opt) {
  const ExperimentConfig base = load(opt);
  const int workers = resolve_workers(opt, base);
  const auto lambdas = base.sweep.lambda.empty() ? std::vector<double>{base.trainer.lambda}
                                                 : base.sweep.lambda;
  const auto Ks = base.sweep.K.empty() ? std::vector<int>{base.data.task.K} : base.sweep.K;
  const auto ratios = base.sweep.noisy_client_ratio.empty()
                          ? std::vector<double>{base.data.noisy_client_ratio}
                          : base.sweep.noisy_client_ratio;
  struct Point {
    double lambda;
    int K;
    double ratio;
  };
  std::vector<Point> points;
  for (double l : lambdas) {
    for (int k : Ks) {
      for (double q : ratios) points.push_back({l, k, q});
    }
  }
  // Parse every point before running anything so config errors surface
  // with no partial output.
  std::vector<ExperimentConfig> cfgs;
  for (const auto& p : points) {
    ojson patch;
    patch["training"]["lambda"] = p.lambda;
    patch["data"]["K"] = p.K;
    patch["data"]["noisy_client_ratio"] = p.ratio;
    cfgs.push_back(apply_overrides(base, patch));
  }

  const fs::path out = base.run.out;
  std::vector<PointSummary> summary(points.size());
  parallel_for(points.size(), workers, [&](std::size_t i) {
    const fs::path file = out / "points" / ("point_" + std::to_string(i) + ".csv");
    if (base.run.resume) {
      if (auto done = read_point(file)) {
        summary[i] = *done;
        spdlog::info("point {}: reused {}", i, file.string());
        return;
      }
    }
    const auto& cfg = cfgs[i];
    std::vector<SeedRun> runs;
    for (auto seed : cfg.run.seeds) runs.push_back(run_seed(cfg, seed, 1));
    std::vector<const MetricsTable*> tables;
    std::string status = "ok";
    for (std::size_t s = 0; s < runs.size(); ++s) {
      tables.push_back(&runs[s].table);
      if (runs[s].diverged) status = "diverged: seed " + std::to_string(cfg.run.seeds[s]);
    }
    MetricsTable mean = mean_table(tables);
    mean.header = header_for(cfg, {"sweep.point=" + std::to_string(i),
                                   "seeds=" + seeds_text(cfg.run.seeds),
                                   "aggregate=mean", "status=" + status});
    write_text_atomic(file, metrics_csv(mean));
    if (runs.front().table.final_w.size() > 0) {
      ModelCheckpoint ckpt;
      ckpt.round = static_cast<std::int64_t>(runs.front().table.rows.size()) - 1;
      ckpt.w = runs.front().table.final_w;
      ckpt.v = runs.front().table.final_v;
      save_models(out / "points" / ("point_" + std::to_string(i) + ".bin"), ckpt);
    }
    const auto& last = mean.rows.back();
    summary[i] = {status, last.mean_personal_acc, last.generic_acc, last.global_loss};
    spdlog::info("point {} (lambda={}, K={}, ratio={}): {}", i, points[i].lambda,
                 points[i].K, points[i].ratio, status);
  });

  std::ostringstream index;
  for (const auto& h : base.echo_lines()) index << "# " << h << '\n';
  index << "point,lambda,K,noisy_client_ratio,status,mean_personal_acc,generic_acc,"
           "global_loss,file\n";
  bool diverged = false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    diverged = diverged || summary[i].status != "ok";
    index << i << ',' << format_double(points[i].lambda) << ',' << points[i].K << ','
          << format_double(points[i].ratio) << ',' << summary[i].status << ','
          << format_cell(summary[i].personal_acc) << ',' << format_cell(summary[i].generic_acc)
          << ',' << format_cell(summary[i].global_loss) << ",points/point_" << i << ".csv\n";
  }
  write_text_atomic(out / "index.csv", index.str());
  if (!opt.quiet) std::cout << "wrote " << points.size() << " points to " << out.string() << '\n';
  return diverged ? kExitDivergence : kExitOk;
}

void setup_logging(bool quiet) {
  auto logger = spdlog::get("ota_pfl");
  if (!logger) logger = spdlog::stderr_color_mt("ota_pfl");
  spdlog::set_default_logger(logger);
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Personalized federated learning over an analog over-the-air channel"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON experiment configuration")->required();
    sub->add_option("--seed", opt.seed, "Run a single seed instead of run.seeds");
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--workers", opt.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", opt.quiet, "Only warnings and results");
  };
  auto* train = app.add_subcommand("train", "Run training for every configured seed");
  auto* validate = app.add_subcommand("validate-bounds",
                                      "Compare Monte-Carlo error curves with the analytic bounds");
  auto* sweep = app.add_subcommand("sweep", "Run the configured parameter grid");
  add_common(train);
  add_common(validate);
  add_common(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  setup_logging(opt.quiet);

  try {
    if (train->parsed()) return cmd_train(opt);
    if (validate->parsed()) return cmd_validate(opt);
    return cmd_sweep(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"ota_pfl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace otapfl
