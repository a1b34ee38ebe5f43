#include "otapfl/config.h"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace otapfl {

using ojson = nlohmann::ordered_json;

namespace {

enum class Kind { kNumber, kInteger, kUnsigned, kString, kBool, kNumberList, kIntList, kUnsignedList };

struct Field {
  const char* section;
  const char* key;
  Kind kind;
  ojson fallback;  // null marks an optional key without default
};

const std::vector<Field>& schema() {
  static const std::vector<Field> fields{
      {"model", "kind", Kind::kString, "logistic"},
      {"model", "rho", Kind::kNumber, 0.01},
      {"model", "hidden", Kind::kIntList, ojson::array({16})},
      {"model", "eig_min", Kind::kNumber, 1.0},
      {"model", "eig_max", Kind::kNumber, 4.0},
      {"model", "center_norm", Kind::kNumber, 1.0},
      {"model", "spread", Kind::kNumber, 1.0},

      {"data", "source", Kind::kString, "teacher"},
      {"data", "K", Kind::kInteger, 20},
      {"data", "d", Kind::kInteger, 10},
      {"data", "class_count", Kind::kInteger, 2},
      {"data", "train_per_client", Kind::kInteger, 100},
      {"data", "test_per_client", Kind::kInteger, 100},
      {"data", "heterogeneity", Kind::kNumber, 3.0},
      {"data", "alpha", Kind::kNumber, nullptr},
      {"data", "margin", Kind::kNumber, 4.0},
      {"data", "noisy_client_ratio", Kind::kNumber, 0.0},
      {"data", "level_lower_bound", Kind::kNumber, 0.5},
      {"data", "problem_seed", Kind::kUnsigned, nullptr},
      {"data", "path", Kind::kString, ""},
      {"data", "label_column", Kind::kString, "label"},
      {"data", "scheme", Kind::kString, "dirichlet"},
      {"data", "test_fraction", Kind::kNumber, 0.2},

      {"channel", "fading", Kind::kString, "rayleigh"},
      {"channel", "mu_h", Kind::kNumber, 1.0},
      {"channel", "gauss_m", Kind::kNumber, 1.0},
      {"channel", "gauss_s2", Kind::kNumber, 0.25},
      {"channel", "sigma2", Kind::kNumber, 0.01},
      {"channel", "P", Kind::kNumber, 1.0},
      {"channel", "noise_reference", Kind::kString, "receiver"},
      {"channel", "aggregation", Kind::kString, "vector"},
      {"channel", "basis", Kind::kString, "hadamard"},
      {"channel", "samples_per_symbol", Kind::kInteger, 0},

      {"training", "algorithm", Kind::kString, "personalized"},
      {"training", "lambda", Kind::kNumber, 0.1},
      {"training", "eta_g", Kind::kNumber, 0.1},
      {"training", "eta_g_relative", Kind::kNumber, nullptr},
      {"training", "eta_l", Kind::kNumber, 0.05},
      {"training", "T", Kind::kInteger, 100},
      {"training", "local_steps", Kind::kInteger, 5},
      {"training", "batch_size", Kind::kInteger, 0},
      {"training", "mu_prox", Kind::kNumber, 0.0},
      {"training", "projection_radius", Kind::kNumber, nullptr},
      {"training", "divergence_threshold", Kind::kNumber, 1e12},

      {"run", "seed", Kind::kUnsigned, 0},
      {"run", "seed_count", Kind::kInteger, 1},
      {"run", "seeds", Kind::kUnsignedList, nullptr},
      {"run", "out", Kind::kString, "out"},
      {"run", "bound_validation", Kind::kBool, false},
      {"run", "workers", Kind::kInteger, nullptr},
      {"run", "resume", Kind::kBool, false},

      {"sweep", "lambda", Kind::kNumberList, ojson::array()},
      {"sweep", "K", Kind::kIntList, ojson::array()},
      {"sweep", "noisy_client_ratio", Kind::kNumberList, ojson::array()},

      {"validation", "lambdas", Kind::kNumberList, ojson::array({0.1, 1.0, 10.0})},
      {"validation", "eta_l_scale", Kind::kNumber, 0.5},
      {"validation", "radius_factor", Kind::kNumber, 1.25},
      {"validation", "rate_lambda", Kind::kNumber, 1.0},
  };
  return fields;
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::kNumber: return "number";
    case Kind::kInteger: return "integer";
    case Kind::kUnsigned: return "non-negative integer";
    case Kind::kString: return "string";
    case Kind::kBool: return "boolean";
    case Kind::kNumberList: return "list of numbers";
    case Kind::kIntList: return "list of integers";
    case Kind::kUnsignedList: return "list of non-negative integers";
  }
  return "?";
}

bool scalar_matches(Kind k, const ojson& v) {
  switch (k) {
    case Kind::kNumber: return v.is_number();
    case Kind::kInteger: return v.is_number_integer();
    case Kind::kUnsigned:
      return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Kind::kString: return v.is_string();
    case Kind::kBool: return v.is_boolean();
    default: return false;
  }
}

bool matches(Kind k, const ojson& v) {
  auto all = [&](Kind elem) {
    return v.is_array() &&
           std::all_of(v.begin(), v.end(), [&](const ojson& e) { return scalar_matches(elem, e); });
  };
  switch (k) {
    case Kind::kNumberList: return all(Kind::kNumber);
    case Kind::kIntList: return all(Kind::kInteger);
    case Kind::kUnsignedList: return all(Kind::kUnsigned);
    default: return scalar_matches(k, v);
  }
}

std::vector<std::string> section_order() {
  std::vector<std::string> out;
  for (const auto& f : schema()) {
    if (out.empty() || out.back() != f.section) out.emplace_back(f.section);
  }
  return out;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : schema()) {
    if (section == f.section && key == f.key) return &f;
  }
  return nullptr;
}

// Defaults merged with `doc`; rejects unknown sections/keys and type errors.
ojson merged_document(const ojson& doc, const std::string& origin) {
  if (!doc.is_object()) throw ConfigError(origin + ": top level must be an object");
  const auto sections = section_order();
  for (const auto& [name, body] : doc.items()) {
    if (std::find(sections.begin(), sections.end(), name) == sections.end()) {
      throw ConfigError(origin + ": unknown section '" + name + "'");
    }
    if (!body.is_object()) {
      throw ConfigError(origin + ": section '" + name + "' must be an object");
    }
    for (const auto& [key, value] : body.items()) {
      const Field* f = find_field(name, key);
      if (f == nullptr) throw ConfigError(origin + ": unknown key '" + name + "." + key + "'");
      if (value.is_null() && f->fallback.is_null()) continue;
      if (!matches(f->kind, value)) {
        throw ConfigError(origin + ": '" + name + "." + key + "' must be a " +
                          kind_name(f->kind) + ", got " + value.dump());
      }
    }
  }
  ojson out = ojson::object();
  for (const auto& s : sections) out[s] = ojson::object();
  for (const auto& f : schema()) {
    const auto sec = doc.find(f.section);
    if (sec != doc.end() && sec->contains(f.key)) {
      out[f.section][f.key] = (*sec)[f.key];
    } else {
      out[f.section][f.key] = f.fallback;
    }
  }
  return out;
}

void require(bool ok, const std::string& origin, const std::string& what) {
  if (!ok) throw ConfigError(origin + ": " + what);
}

template <typename T>
std::optional<T> opt(const ojson& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<T>();
}

std::string echo_value(const ojson& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

std::vector<std::string> ExperimentConfig::echo_lines() const {
  std::vector<std::string> out;
  for (const auto& [section, body] : effective.items()) {
    for (const auto& [key, value] : body.items()) {
      out.push_back(section + "." + key + "=" + echo_value(value));
    }
  }
  const ChannelModel ch = channel.normalized();
  out.push_back("derived.sigma_h2=" + format_double(ch.sigma_h2));
  out.push_back("derived.channel_mean=" + format_double(ch.mu_h));
  return out;
}

ExperimentConfig config_from_json(const ojson& doc, const std::string& origin) {
  ExperimentConfig cfg;
  cfg.effective = merged_document(doc, origin);
  const ojson& e = cfg.effective;

  try {
    const ojson& m = e["model"];
    const std::string kind = m["kind"].get<std::string>();
    if (kind == "quadratic") {
      cfg.model.kind = ModelKind::kQuadratic;
    } else if (kind == "logistic") {
      cfg.model.kind = ModelKind::kLogisticL2;
    } else if (kind == "mlp") {
      cfg.model.kind = ModelKind::kMlp;
    } else {
      throw ConfigError(origin + ": model.kind must be quadratic, logistic or mlp, got '" +
                        kind + "'");
    }
    cfg.model.rho = m["rho"].get<double>();
    cfg.model.hidden = m["hidden"].get<std::vector<int>>();
    cfg.model.ensemble.eig_min = m["eig_min"].get<double>();
    cfg.model.ensemble.eig_max = m["eig_max"].get<double>();
    cfg.model.ensemble.center_norm = m["center_norm"].get<double>();
    cfg.model.ensemble.spread = m["spread"].get<double>();

    const ojson& d = e["data"];
    const std::string source = d["source"].get<std::string>();
    if (source == "teacher") {
      cfg.data.source = DataSource::kTeacher;
    } else if (source == "clustered") {
      cfg.data.source = DataSource::kClustered;
    } else if (source == "csv") {
      cfg.data.source = DataSource::kCsv;
    } else {
      throw ConfigError(origin + ": data.source must be teacher, clustered or csv, got '" +
                        source + "'");
    }
    auto& task = cfg.data.task;
    task.K = d["K"].get<int>();
    task.d = d["d"].get<int>();
    task.class_count = d["class_count"].get<int>();
    task.train_per_client = d["train_per_client"].get<int>();
    task.test_per_client = d["test_per_client"].get<int>();
    task.heterogeneity = d["heterogeneity"].get<double>();
    task.alpha = opt<double>(d["alpha"]);
    task.margin = d["margin"].get<double>();
    cfg.model.ensemble.K = task.K;
    cfg.model.ensemble.d = task.d;
    cfg.data.noisy_client_ratio = d["noisy_client_ratio"].get<double>();
    cfg.data.level_lower_bound = d["level_lower_bound"].get<double>();
    cfg.data.problem_seed = opt<std::uint64_t>(d["problem_seed"]);
    cfg.data.path = d["path"].get<std::string>();
    cfg.data.label_column = d["label_column"].get<std::string>();
    const std::string scheme = d["scheme"].get<std::string>();
    if (scheme == "dirichlet") {
      cfg.data.scheme = PartitionScheme::kDirichlet;
    } else if (scheme == "iid") {
      cfg.data.scheme = PartitionScheme::kIid;
    } else {
      throw ConfigError(origin + ": data.scheme must be dirichlet or iid, got '" + scheme + "'");
    }
    cfg.data.test_fraction = d["test_fraction"].get<double>();

    const ojson& c = e["channel"];
    const FadingKind fading = parse_fading_kind(c["fading"].get<std::string>());
    const double sigma2 = c["sigma2"].get<double>();
    const double P = c["P"].get<double>();
    switch (fading) {
      case FadingKind::kRayleigh:
        cfg.channel = ChannelModel::rayleigh(c["mu_h"].get<double>(), sigma2, P);
        break;
      case FadingKind::kConstant:
        cfg.channel = ChannelModel::constant(c["mu_h"].get<double>(), sigma2, P);
        break;
      case FadingKind::kGaussianAbs:
        cfg.channel = ChannelModel::gaussian_abs(c["gauss_m"].get<double>(),
                                                 c["gauss_s2"].get<double>(), sigma2, P);
        break;
    }
    cfg.channel.noise_reference = parse_noise_reference(c["noise_reference"].get<std::string>());
    cfg.channel = cfg.channel.normalized();

    TrainerConfig& t = cfg.trainer;
    t.aggregation = parse_aggregation_mode(c["aggregation"].get<std::string>());
    t.basis = parse_basis_kind(c["basis"].get<std::string>());
    t.samples_per_symbol = c["samples_per_symbol"].get<int>();

    const ojson& tr = e["training"];
    t.algorithm = parse_algorithm(tr["algorithm"].get<std::string>());
    t.lambda = tr["lambda"].get<double>();
    t.eta_g = tr["eta_g"].get<double>();
    cfg.eta_g_relative = opt<double>(tr["eta_g_relative"]);
    t.eta_l = tr["eta_l"].get<double>();
    t.T = tr["T"].get<int>();
    t.local_steps = tr["local_steps"].get<int>();
    t.batch_size = tr["batch_size"].get<int>();
    t.mu_prox = tr["mu_prox"].get<double>();
    t.projection_radius = opt<double>(tr["projection_radius"]);
    t.divergence_threshold = tr["divergence_threshold"].get<double>();
    t.validate();

    const ojson& r = e["run"];
    if (!r["seeds"].is_null()) {
      cfg.run.seeds = r["seeds"].get<std::vector<std::uint64_t>>();
    } else {
      const auto base = r["seed"].get<std::uint64_t>();
      const int count = r["seed_count"].get<int>();
      require(count >= 1, origin, "run.seed_count must be >= 1");
      cfg.run.seeds.clear();
      for (int i = 0; i < count; ++i) cfg.run.seeds.push_back(base + static_cast<std::uint64_t>(i));
    }
    cfg.run.out = r["out"].get<std::string>();
    cfg.run.bound_validation = r["bound_validation"].get<bool>();
    cfg.run.workers = opt<int>(r["workers"]);
    cfg.run.resume = r["resume"].get<bool>();

    const ojson& s = e["sweep"];
    cfg.sweep.lambda = s["lambda"].get<std::vector<double>>();
    cfg.sweep.K = s["K"].get<std::vector<int>>();
    cfg.sweep.noisy_client_ratio = s["noisy_client_ratio"].get<std::vector<double>>();

    const ojson& v = e["validation"];
    cfg.validation.lambdas = v["lambdas"].get<std::vector<double>>();
    cfg.validation.eta_l_scale = v["eta_l_scale"].get<double>();
    cfg.validation.radius_factor = v["radius_factor"].get<double>();
    cfg.validation.rate_lambda = v["rate_lambda"].get<double>();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& ex) {
    throw ConfigError(origin + ": " + ex.what());
  }

  const auto& task = cfg.data.task;
  require(task.K >= 1, origin, "data.K must be >= 1");
  require(task.d >= 1, origin, "data.d must be >= 1");
  require(task.class_count >= 2, origin, "data.class_count must be >= 2");
  require(task.train_per_client >= 1, origin, "data.train_per_client must be >= 1");
  require(task.test_per_client >= 0, origin, "data.test_per_client must be >= 0");
  require(task.heterogeneity >= 0.0, origin, "data.heterogeneity must be >= 0");
  require(!task.alpha || *task.alpha > 0.0, origin, "data.alpha must be positive");
  require(cfg.data.noisy_client_ratio >= 0.0 && cfg.data.noisy_client_ratio <= 1.0, origin,
          "data.noisy_client_ratio must be in [0, 1]");
  require(cfg.data.level_lower_bound >= 0.0 && cfg.data.level_lower_bound <= 1.0, origin,
          "data.level_lower_bound must be in [0, 1]");
  require(cfg.data.test_fraction > 0.0 && cfg.data.test_fraction < 1.0, origin,
          "data.test_fraction must be in (0, 1)");
  require(cfg.data.source != DataSource::kCsv || !cfg.data.path.empty(), origin,
          "data.path is required when data.source is csv");
  require(cfg.data.source != DataSource::kClustered || task.class_count == 2, origin,
          "data.source clustered is binary; set data.class_count to 2");
  require(cfg.model.rho >= 0.0, origin, "model.rho must be >= 0");
  require(cfg.model.kind != ModelKind::kLogisticL2 || cfg.model.rho > 0.0 ||
              !cfg.run.bound_validation,
          origin, "bound validation needs model.rho > 0 for a strongly convex loss");
  require(std::all_of(cfg.model.hidden.begin(), cfg.model.hidden.end(), [](int h) { return h > 0; }),
          origin, "model.hidden entries must be positive");
  require(cfg.model.ensemble.eig_min > 0.0 && cfg.model.ensemble.eig_max >= cfg.model.ensemble.eig_min,
          origin, "model.eig_min must be positive and not above model.eig_max");
  require(!cfg.eta_g_relative || *cfg.eta_g_relative > 0.0, origin,
          "training.eta_g_relative must be positive");
  require(!cfg.eta_g_relative || cfg.model.kind != ModelKind::kMlp, origin,
          "training.eta_g_relative needs a convex model");
  require(!cfg.run.bound_validation || cfg.model.kind != ModelKind::kMlp, origin,
          "run.bound_validation needs a convex model");
  require(!cfg.run.workers || *cfg.run.workers >= 1, origin, "run.workers must be >= 1");
  require(cfg.run.seeds.size() >= 1, origin, "run.seeds must not be empty");
  require(cfg.trainer.divergence_threshold > 0.0, origin,
          "training.divergence_threshold must be positive");
  for (int k : cfg.sweep.K) require(k >= 1, origin, "sweep.K entries must be >= 1");
  for (double l : cfg.sweep.lambda) require(l >= 0.0, origin, "sweep.lambda entries must be >= 0");
  for (double q : cfg.sweep.noisy_client_ratio) {
    require(q >= 0.0 && q <= 1.0, origin, "sweep.noisy_client_ratio entries must be in [0, 1]");
  }
  require(cfg.validation.eta_l_scale > 0.0, origin, "validation.eta_l_scale must be positive");
  require(cfg.validation.radius_factor >= 1.0, origin, "validation.radius_factor must be >= 1");
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(origin + ": malformed JSON: " + ex.what());
  }
  ExperimentConfig cfg = config_from_json(doc, origin);
  check_step_size(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

ExperimentConfig apply_overrides(const ExperimentConfig& base, const ojson& patch) {
  ojson doc = base.effective;
  doc.merge_patch(patch);
  // merge_patch deletes keys set to null; those fall back to defaults.
  for (const auto& f : schema()) {
    if (!doc[f.section].contains(f.key)) doc[f.section][f.key] = f.fallback;
  }
  ExperimentConfig cfg = config_from_json(doc, "override");
  check_step_size(cfg);
  return cfg;
}

void check_step_size(const ExperimentConfig& cfg) {
  if (!cfg.run.bound_validation) return;
  const Problem problem = build_problem(cfg, cfg.run.seeds.front());
  const ProblemTheory th = problem_theory(cfg, problem);
  const double eta = cfg.eta_g_relative ? *cfg.eta_g_relative * th.eta_g_max : cfg.trainer.eta_g;
  if (!(eta < th.eta_g_max)) {
    throw ConfigError("training.eta_g = " + format_double(eta) +
                      " is not below eta_g_max = " + format_double(th.eta_g_max) +
                      " required by run.bound_validation");
  }
}

namespace {

// Per-client train/test split of pooled CSV data.
void split_shards(const std::vector<DataShard>& parts, double test_fraction,
                  std::uint64_t seed, std::vector<DataShard>& train,
                  std::vector<DataShard>& test) {
  for (const auto& part : parts) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(part.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
    Rng rng = make_stream(seed, StreamTag::kSplit, static_cast<std::uint64_t>(part.client_id));
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(idx.size()));
    if (idx.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    std::vector<Eigen::Index> te(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<Eigen::Index> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(te.begin(), te.end());
    std::sort(tr.begin(), tr.end());
    DataShard a = part.subset(tr);
    DataShard b = part.subset(te);
    a.client_id = b.client_id = part.client_id;
    train.push_back(std::move(a));
    test.push_back(std::move(b));
  }
}

}  // namespace

Problem build_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::uint64_t ps = cfg.data.problem_seed.value_or(seed);
  const auto& task = cfg.data.task;
  Problem p;
  if (cfg.model.kind == ModelKind::kQuadratic) {
    p.specs = make_quadratic_ensemble(cfg.model.ensemble, ps);
    const ClientOptima o = compute_optima(p.specs, {}, cfg.trainer.lambda);
    p.w_star = o.w_star;
    p.v_star = o.v_star;
    return p;
  }

  int features = task.d;
  int classes = task.class_count;
  switch (cfg.data.source) {
    case DataSource::kTeacher: {
      FederatedTask ft = make_federated_task(task, ps);
      p.train = std::move(ft.train);
      p.test = std::move(ft.test);
      break;
    }
    case DataSource::kClustered: {
      const auto all = synth_clustered(task.K, task.d,
                                       task.train_per_client + task.test_per_client,
                                       task.heterogeneity, ps);
      for (const auto& s : all) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
          (i < task.train_per_client ? tr : te).push_back(i);
        }
        p.train.push_back(s.subset(tr));
        p.train.back().client_id = s.client_id;
        if (!te.empty()) {
          p.test.push_back(s.subset(te));
          p.test.back().client_id = s.client_id;
        }
      }
      break;
    }
    case DataSource::kCsv: {
      const DataShard pool = load_csv(cfg.data.path, cfg.data.label_column, classes);
      features = static_cast<int>(pool.feature_count());
      PartitionPlan plan;
      if (cfg.data.scheme == PartitionScheme::kDirichlet) {
        if (!task.alpha) throw ConfigError("data.alpha is required for the dirichlet scheme");
        plan = dirichlet_partition(pool.labels, task.K, *task.alpha, ps);
      } else {
        plan = iid_partition(pool.labels, classes, task.K, ps);
      }
      split_shards(apply_partition(pool, plan), cfg.data.test_fraction, ps, p.train, p.test);
      break;
    }
  }
  if (cfg.data.noisy_client_ratio > 0.0) {
    p.train = inject_label_noise(p.train, cfg.data.noisy_client_ratio,
                                 cfg.data.level_lower_bound, ps);
  }
  for (int k = 0; k < task.K; ++k) {
    p.specs.push_back(cfg.model.kind == ModelKind::kMlp
                          ? ModelSpec::mlp(features, cfg.model.hidden, classes, cfg.model.rho)
                          : ModelSpec::logistic(features, classes, cfg.model.rho));
  }
  if (cfg.run.bound_validation && cfg.model.kind == ModelKind::kLogisticL2) {
    const ClientOptima o = compute_optima(p.specs, p.train, cfg.trainer.lambda);
    p.w_star = o.w_star;
    p.v_star = o.v_star;
  }
  return p;
}

ProblemTheory problem_theory(const ExperimentConfig& cfg, const Problem& problem) {
  if (!problem.specs.front().is_convex()) {
    throw ConfigError("step size bounds need a convex model");
  }
  ProblemTheory th;
  th.optima = compute_optima(problem.specs, problem.train, cfg.trainer.lambda);
  const ParamVector w0 = cfg.trainer.initial_w.value_or(ParamVector::Zero(problem.dimension()));
  double norm = std::max(w0.norm(), th.optima.w_star.norm());
  for (const auto& z : th.optima.z_star) norm = std::max(norm, z.norm());
  for (const auto& v : th.optima.v_star) norm = std::max(norm, v.norm());
  th.radius = cfg.trainer.projection_radius.value_or(cfg.validation.radius_factor * norm);
  th.constants = derive_constants(problem, th.optima, cfg.channel, w0, 2.0 * th.radius);
  th.eta_g_max = eta_g_max(th.constants);
  return th;
}

TrainerConfig trainer_for(const ExperimentConfig& cfg, const Problem& problem,
                          std::uint64_t seed) {
  TrainerConfig tc = cfg.trainer;
  tc.seed = seed;
  tc.channel_seed = seed;
  if (cfg.eta_g_relative || cfg.run.bound_validation) {
    const ProblemTheory th = problem_theory(cfg, problem);
    if (cfg.eta_g_relative) tc.eta_g = *cfg.eta_g_relative * th.eta_g_max;
    if (cfg.run.bound_validation && !tc.projection_radius) tc.projection_radius = th.radius;
  }
  return tc;
}

}  // namespace otapfl
