// survadapt command-line tool: synthetic data simulation, adversarial
// multi-source training, fold-based evaluation, treatment recommendation,
// and source-weight explanation.

#include "survadapt/adapt.hpp"
#include "survadapt/dataio.hpp"
#include "survadapt/evalharness.hpp"
#include "survadapt/nnet.hpp"
#include "survadapt/survcore.hpp"
#include "survadapt/textio.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace survadapt;

namespace {

constexpr const char* kVersion = "survadapt 1.0.0";

[[noreturn]] void fail(int code, const std::string& message) {
  std::cerr << "survadapt: " << message << '\n';
  std::exit(code);
}

int exit_code_for(const SurvError& error) {
  switch (error.code()) {
    case Err::ConfigInvalid:
    case Err::FractionOutOfRange:
      return 2;
    default:
      return 1;
  }
}

// ---------------------------------------------------------------------------
// Shared plumbing

std::vector<std::string> expand_sources(const std::string& pattern_list) {
  std::vector<std::string> paths;
  std::stringstream patterns(pattern_list);
  std::string pattern;
  while (std::getline(patterns, pattern, ',')) {
    if (pattern.empty()) continue;
    if (pattern.find('*') == std::string::npos) {
      paths.push_back(pattern);
      continue;
    }
    const fs::path as_path(pattern);
    const fs::path dir = as_path.has_parent_path() ? as_path.parent_path() : fs::path(".");
    const std::string stem = as_path.filename().string();
    const std::size_t star = stem.find('*');
    const std::string prefix = stem.substr(0, star);
    const std::string suffix = stem.substr(star + 1);
    if (!fs::is_directory(dir)) continue;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (name.size() < prefix.size() + suffix.size()) continue;
      if (name.compare(0, prefix.size(), prefix) != 0) continue;
      if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
      paths.push_back(entry.path().string());
    }
  }
  // Truth sidecars are never source cohorts; drop them from glob matches.
  std::erase_if(paths, [](const std::string& p) {
    return p.size() > 10 && p.compare(p.size() - 10, 10, ".truth.csv") == 0;
  });
  std::sort(paths.begin(), paths.end());
  paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
  return paths;
}

bool all_treated(const Cohort& cohort) {
  for (const auto& record : cohort.records)
    if (record.treatment == Treatment::None) return false;
  return !cohort.records.empty();
}

// Fill missing observation times from the truth sidecar.
Cohort merge_truth(Cohort target, const GroundTruth& truth) {
  if (truth.true_event_time.size() != target.size())
    throw SurvError(Err::LengthMismatch, "truth sidecar not aligned with the target cohort");
  for (Index i = 0; i < target.size(); ++i) {
    auto& record = target.records[static_cast<std::size_t>(i)];
    if (!record.time) record.time = truth.true_event_time[i];
  }
  return target;
}

// ---------------------------------------------------------------------------
// Cox baseline model files (PCA projection + linear coefficients)

struct CoxModel {
  PcaModel pca;
  Vector beta;

  Scalar score(const Eigen::Ref<const Vector>& x) const {
    return beta.dot(pca.components.transpose() * (x - pca.mean));
  }
};

void save_cox_model(const CoxModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurvError(Err::IoError, "cannot write " + path);
  const Index d = model.pca.mean.size();
  const Index k = model.beta.size();
  out << "survadapt-coxmodel v1\n";
  out << "dims " << d << ' ' << k << '\n';
  auto write_row = [&out](const char* name, const Vector& v) {
    out << "tensor " << name << " 1 " << v.size() << '\n';
    for (Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << format_double(v[i]);
    out << '\n';
  };
  write_row("pca.mean", model.pca.mean);
  out << "tensor pca.components " << d << ' ' << k << '\n';
  for (Index r = 0; r < d; ++r) {
    for (Index c = 0; c < k; ++c)
      out << (c ? " " : "") << format_double(model.pca.components(r, c));
    out << '\n';
  }
  write_row("beta", model.beta);
}

CoxModel load_cox_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SurvError(Err::IoError, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "survadapt-coxmodel v1")
    throw SurvError(Err::ParseError, "not a cox model file: " + path);
  Index d = 0, k = 0;
  std::string keyword;
  if (!std::getline(in, line)) throw SurvError(Err::ParseError, "missing dims line");
  std::istringstream dims(line);
  dims >> keyword >> d >> k;
  if (keyword != "dims" || d < 1 || k < 1)
    throw SurvError(Err::ParseError, "bad dims line in " + path);

  auto read_values = [&](Index count) {
    Vector values(count);
    Index have = 0;
    while (have < count) {
      if (!std::getline(in, line)) throw SurvError(Err::ParseError, "truncated " + path);
      std::istringstream row(line);
      std::string cell;
      while (row >> cell) {
        double v;
        if (!parse_double(cell, v) || have >= count)
          throw SurvError(Err::ParseError, "bad tensor data in " + path);
        values[have++] = v;
      }
    }
    return values;
  };
  auto expect_header = [&](const std::string& name) {
    if (!std::getline(in, line) || line.rfind("tensor " + name + ' ', 0) != 0)
      throw SurvError(Err::ParseError, "expected tensor " + name + " in " + path);
  };

  CoxModel model;
  expect_header("pca.mean");
  model.pca.mean = read_values(d);
  expect_header("pca.components");
  const Vector flat = read_values(d * k);
  model.pca.components.resize(d, k);
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < k; ++c) model.pca.components(r, c) = flat[r * k + c];
  expect_header("beta");
  model.beta = read_values(k);
  return model;
}

// ---------------------------------------------------------------------------
// Train configuration file: flat key = value lines, '#' comments, strict keys

struct RunConfig {
  TrainConfig train;
  std::string mode = "mssda";
};

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SurvError(Err::IoError, "cannot read config " + path);

  RunConfig run;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    line.erase(line.begin(), std::find_if(line.begin(), line.end(), not_space));
    line.erase(std::find_if(line.rbegin(), line.rend(), not_space).base(), line.end());
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw SurvError(Err::ConfigInvalid,
                      path + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(std::find_if(key.rbegin(), key.rend(), not_space).base(), key.end());
    value.erase(value.begin(), std::find_if(value.begin(), value.end(), not_space));

    auto as_double = [&](const char* name) {
      double v;
      if (!parse_double(value, v))
        throw SurvError(Err::ConfigInvalid, std::string("bad value for ") + name);
      return v;
    };
    auto as_int = [&](const char* name) {
      const double v = as_double(name);
      if (v != std::floor(v))
        throw SurvError(Err::ConfigInvalid, std::string(name) + " must be an integer");
      return static_cast<long long>(v);
    };

    if (key == "lambda1") run.train.lambda1 = as_double("lambda1");
    else if (key == "lambda2") run.train.lambda2 = as_double("lambda2");
    else if (key == "lr") run.train.learning_rate = as_double("lr");
    else if (key == "epochs") run.train.epochs = static_cast<int>(as_int("epochs"));
    else if (key == "batch_size") run.train.batch_size = static_cast<int>(as_int("batch_size"));
    else if (key == "margin") run.train.margin = as_double("margin");
    else if (key == "dropout") run.train.dropout = as_double("dropout");
    else if (key == "seed") run.train.seed = static_cast<std::uint64_t>(as_int("seed"));
    else if (key == "supervision_frac")
      run.train.supervision_fraction = as_double("supervision_frac");
    else if (key == "adversary_steps")
      run.train.adversary_steps = static_cast<int>(as_int("adversary_steps"));
    else if (key == "hidden") {
      run.train.hidden.clear();
      std::stringstream widths(value);
      std::string token;
      while (std::getline(widths, token, ',')) {
        double v;
        if (!parse_double(token, v) || v < 1 || v != std::floor(v))
          throw SurvError(Err::ConfigInvalid, "bad hidden width '" + token + "'");
        run.train.hidden.push_back(static_cast<Index>(v));
      }
      if (run.train.hidden.empty())
        throw SurvError(Err::ConfigInvalid, "hidden must list at least one width");
    } else if (key == "mode") {
      if (value != "mssda" && value != "deepsurv" && value != "cox")
        throw SurvError(Err::ConfigInvalid, "mode must be mssda, deepsurv, or cox");
      run.mode = value;
    } else {
      throw SurvError(Err::ConfigInvalid, "unknown config key '" + key + "'");
    }
  }
  run.train.validate();
  return run;
}

void write_weights_csv(const std::vector<std::string>& names, const Vector& weights,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurvError(Err::IoError, "cannot write " + path);
  out << "source,weight\n";
  for (Index i = 0; i < weights.size(); ++i)
    out << names[static_cast<std::size_t>(i)] << ',' << format_double(weights[i]) << '\n';
}

void write_history_csv(const TrainHistory& history, Index n_sources, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurvError(Err::IoError, "cannot write " + path);
  out << "epoch,source_pl_loss,discrepancy";
  for (Index i = 0; i < n_sources; ++i) out << ",w" << i;
  out << '\n';
  for (const auto& stats : history.epochs) {
    out << stats.epoch << ',' << format_double(stats.source_pl_loss) << ','
        << format_double(stats.discrepancy_term);
    for (Index i = 0; i < stats.weights.size(); ++i)
      out << ',' << format_double(stats.weights[i]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string out_dir;
  int domains = 0;
  int n = 0;
  int dim = 0;
  double censor_frac = 0.0;
  double shift = 0.0;
  std::uint64_t seed = 0;
  bool treatment = false;
  double treatment_hr = 0.5;
};

int cmd_simulate(const SimulateArgs& args) {
  SynthConfig config;
  config.n_domains = args.domains;
  config.n_per_domain = args.n;
  config.dim = args.dim;
  config.censor_fraction = args.censor_frac;
  config.shift_scale = args.shift;
  config.seed = args.seed;
  config.with_treatment = args.treatment;
  config.treatment_hazard_multiplier_r = args.treatment_hr;

  const SyntheticData data = generate_domains(config);
  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  for (std::size_t i = 0; i < data.sources.size(); ++i) {
    const std::string stem = "source" + std::to_string(i);
    write_cohort(data.sources[i], (dir / (stem + ".csv")).string());
    write_truth(data.truth[i], (dir / (stem + ".truth.csv")).string());
  }
  write_cohort(data.target_labeled, (dir / "target.csv").string());
  write_truth(data.truth.back(), (dir / "target.truth.csv").string());
  std::cout << "wrote " << data.sources.size() << " source cohorts and 1 target cohort to "
            << args.out_dir << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string sources;
  std::string target;
  std::string config;
  std::string out_dir;
};

int cmd_train(const TrainArgs& args) {
  const RunConfig run = parse_config_file(args.config);
  const std::vector<std::string> source_paths = expand_sources(args.sources);
  if (source_paths.empty()) fail(1, "no source files match " + args.sources);

  std::vector<Cohort> sources;
  for (const auto& path : source_paths) sources.push_back(read_cohort(path, CohortRole::Source));
  Cohort target = read_cohort(args.target, CohortRole::Target);

  // The treatment arm becomes an input covariate when every record has one.
  bool use_arm = all_treated(target);
  for (const auto& s : sources) use_arm = use_arm && all_treated(s);
  if (use_arm) {
    for (auto& s : sources) s = augment_with_treatment(s);
    target = augment_with_treatment(target);
    std::cout << "treatment arm added as an input covariate\n";
  }

  const SupervisionSplit split =
      inject_supervision(target, run.train.supervision_fraction, run.train.seed);
  for (auto& s : sources)
    s.records.insert(s.records.end(), split.labeled_subset.records.begin(),
                     split.labeled_subset.records.end());

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  std::vector<std::string> names;
  for (const auto& s : sources) names.push_back(s.name);

  if (run.mode == "mssda") {
    const TrainResult result = train_mssda(sources, split.unlabeled_target, run.train);
    save_model(result.model, (dir / "model.txt").string());
    write_weights_csv(names, result.weights, (dir / "weights.csv").string());
    write_history_csv(result.history, static_cast<Index>(sources.size()),
                      (dir / "history.csv").string());
    for (std::size_t i = 0; i < names.size(); ++i)
      std::cout << names[i] << ' ' << format_double(result.weights[static_cast<Index>(i)])
                << '\n';
    return 0;
  }

  const Index k = static_cast<Index>(sources.size());
  const Vector uniform = Vector::Constant(k, 1.0 / static_cast<Scalar>(k));

  if (run.mode == "deepsurv") {
    TrainConfig single = run.train;
    single.lambda1 = 0.0;
    single.lambda2 = 0.0;
    TrainHistory combined;
    for (Index i = 0; i < k; ++i) {
      Cohort empty_target;
      empty_target.role = CohortRole::Target;
      const TrainResult result =
          train_mssda({sources[static_cast<std::size_t>(i)]}, empty_target, single);
      save_model(result.model, (dir / ("model_" + std::to_string(i) + ".txt")).string());
      if (combined.epochs.empty()) {
        combined = result.history;
        for (auto& stats : combined.epochs) stats.weights = uniform;
      } else {
        for (std::size_t e = 0; e < combined.epochs.size(); ++e)
          combined.epochs[e].source_pl_loss += result.history.epochs[e].source_pl_loss;
      }
    }
    for (auto& stats : combined.epochs) stats.source_pl_loss /= static_cast<Scalar>(k);
    write_weights_csv(names, uniform, (dir / "weights.csv").string());
    write_history_csv(combined, k, (dir / "history.csv").string());
  } else {  // cox
    for (Index i = 0; i < k; ++i) {
      const Cohort& source = sources[static_cast<std::size_t>(i)];
      const Matrix x = source.feature_matrix();
      const Index n_components = std::min<Index>(15, source.dim());
      CoxModel model;
      model.pca = pca_fit(x, static_cast<int>(n_components), run.train.seed);
      Cohort reduced = source;
      const Matrix projected = pca_transform(model.pca, x);
      for (Index r = 0; r < source.size(); ++r)
        reduced.records[static_cast<std::size_t>(r)].features = projected.row(r);
      model.beta = fit_cox_linear(reduced, run.train.learning_rate, run.train.epochs);
      save_cox_model(model, (dir / ("cox_model_" + std::to_string(i) + ".txt")).string());
    }
    write_weights_csv(names, uniform, (dir / "weights.csv").string());
    TrainHistory empty_history;
    write_history_csv(empty_history, k, (dir / "history.csv").string());
  }

  for (std::size_t i = 0; i < names.size(); ++i)
    std::cout << names[i] << ' ' << format_double(uniform[static_cast<Index>(i)]) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// model-directory scoring shared by evaluate and recommend

struct ModelDir {
  std::string method;  // mssda | deepsurv-ao | cox-ao
  std::vector<RiskModel> nets;
  std::vector<CoxModel> cox;

  Index input_dim() const {
    return nets.empty() ? cox.front().pca.mean.size() : nets.front().input_dim();
  }

  // Risk scores; multi-model directories aggregate by mean target rank.
  Vector scores(const Cohort& cohort) const {
    if (nets.size() == 1 && cox.empty())
      return log_risk_batch(nets.front(), Head::H, cohort.feature_matrix());
    std::vector<HypothesisSet::Ranker> rankers;
    for (const auto& net : nets)
      rankers.push_back([&net](const Eigen::Ref<const Vector>& x) -> Scalar {
        return log_risk(net, Head::H, x);
      });
    for (const auto& model : cox)
      rankers.push_back(
          [&model](const Eigen::Ref<const Vector>& x) -> Scalar { return model.score(x); });
    return -average_order_rank(rankers, cohort);  // lower mean rank = higher risk
  }
};

ModelDir load_model_dir(const std::string& dir) {
  ModelDir models;
  const fs::path base(dir);
  if (fs::exists(base / "model.txt")) {
    models.method = "mssda";
    models.nets.push_back(load_model((base / "model.txt").string()));
    return models;
  }
  std::vector<std::string> net_files, cox_files;
  if (fs::is_directory(base)) {
    for (const auto& entry : fs::directory_iterator(base)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("model_", 0) == 0) net_files.push_back(entry.path().string());
      if (name.rfind("cox_model_", 0) == 0) cox_files.push_back(entry.path().string());
    }
  }
  std::sort(net_files.begin(), net_files.end());
  std::sort(cox_files.begin(), cox_files.end());
  for (const auto& path : net_files) models.nets.push_back(load_model(path));
  for (const auto& path : cox_files) models.cox.push_back(load_cox_model(path));
  if (!models.nets.empty())
    models.method = "deepsurv-ao";
  else if (!models.cox.empty())
    models.method = "cox-ao";
  else
    throw SurvError(Err::IoError, "no model files found in " + dir);
  return models;
}

// Evaluation view: fill missing times from the sidecar, then add the arm
// covariate if the model expects it.
Cohort evaluation_view(const std::string& target_path, const std::string& truth_path,
                       Index model_dim) {
  Cohort target = read_cohort(target_path, CohortRole::Target);
  if (!truth_path.empty()) target = merge_truth(std::move(target), read_truth(truth_path));
  if (target.dim() + 1 == model_dim) target = augment_with_treatment(target);
  if (target.dim() != model_dim)
    throw SurvError(Err::DimensionMismatch, "target dimension does not match the model");
  return target;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string model_dir;
  std::string target;
  std::string truth;
  double supervision_frac = 0.0;
  int folds = 5;
  std::string report;
};

int cmd_evaluate(const EvaluateArgs& args) {
  if (args.folds < 1) fail(2, "--folds must be >= 1");
  const ModelDir models = load_model_dir(args.model_dir);
  const Cohort target = evaluation_view(args.target, args.truth, models.input_dim());
  const Vector scores = models.scores(target);

  MetricsRow row;
  row.target_name = target.name;
  row.method_name = models.method;
  row.supervision = args.supervision_frac;
  for (int fold = 0; fold < args.folds; ++fold) {
    // Fold f evaluates the supervision draw seeded by f.
    const SupervisionSplit split =
        inject_supervision(target, args.supervision_frac, static_cast<std::uint64_t>(fold));
    const TargetMetrics metrics = evaluate_scores(scores, target, split.supervised_mask);
    row.fold_c_index.push_back(metrics.c_index);
    row.fold_c_index_prime.push_back(metrics.c_index_prime);
  }

  MetricsReport report;
  report.rows.push_back(row);
  write_metrics_report(report, args.report);
  std::cout << "c_index " << format_double(row.mean_c_index()) << " ("
            << format_double(row.std_error_c_index()) << ")\n";
  std::cout << "c_index_prime " << format_double(row.mean_c_index_prime()) << " ("
            << format_double(row.std_error_c_index_prime()) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// recommend

struct RecommendArgs {
  std::string model_dir;
  std::string target;
  std::string truth;
  std::string report;
};

int cmd_recommend(const RecommendArgs& args) {
  const ModelDir models = load_model_dir(args.model_dir);
  if (models.nets.size() != 1 || !models.cox.empty())
    fail(1, "treatment recommendation needs a single network model directory");
  const Cohort target = evaluation_view(args.target, args.truth, models.input_dim());

  const RecommendationReport report = recommend_treatment(models.nets.front(), target);
  write_recommendation_report(report, target.name, args.report);

  if (report.comparable) {
    std::cout << "median_recom " << format_double(*report.median_recom) << '\n';
    std::cout << "median_anti " << format_double(*report.median_anti) << '\n';
    std::cout << "success " << (report.success ? "true" : "false") << '\n';
  } else {
    std::cout << "incomparable (a group has no non-censored patients)\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainArgs {
  std::string weights_matrix;
  std::string out_dist;
  std::string out_dendro;
};

// Square CSV of per-target weight rows, with or without a leading
// header row / name column.
std::pair<std::vector<std::string>, Matrix> read_weight_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SurvError(Err::IoError, "cannot read " + path);
  std::vector<std::vector<std::string>> cells;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      row.push_back(field);
    }
    cells.push_back(std::move(row));
  }
  if (cells.empty()) throw SurvError(Err::ParseError, "empty matrix file " + path);

  double probe;
  const bool has_header = cells[0].empty() || !parse_double(cells[0].back(), probe);
  std::vector<std::string> names;
  Matrix matrix;
  const std::size_t first_row = has_header ? 1 : 0;
  const std::size_t first_col = has_header ? 1 : 0;
  const std::size_t k = cells.size() - first_row;
  if (k == 0) throw SurvError(Err::ParseError, "no data rows in " + path);
  matrix.resize(static_cast<Index>(k), static_cast<Index>(k));
  for (std::size_t r = 0; r < k; ++r) {
    const auto& row = cells[first_row + r];
    if (row.size() != k + first_col)
      throw SurvError(Err::ParseError, "matrix row " + std::to_string(r) + " is not length " +
                                           std::to_string(k));
    names.push_back(has_header ? row[0] : "d" + std::to_string(r));
    for (std::size_t c = 0; c < k; ++c) {
      double value = 0.0;
      if (!row[first_col + c].empty() && !parse_double(row[first_col + c], value))
        throw SurvError(Err::ParseError, "bad matrix value '" + row[first_col + c] + "'");
      matrix(static_cast<Index>(r), static_cast<Index>(c)) = value;
    }
  }
  return {names, matrix};
}

int cmd_explain(const ExplainArgs& args) {
  const auto [names, weights] = read_weight_matrix(args.weights_matrix);
  const Matrix distances = weight_distance_matrix(weights);
  const Dendrogram tree = hierarchical_cluster(distances);
  write_distance_matrix(names, distances, args.out_dist);
  write_dendrogram(tree, args.out_dendro);
  std::cout << "wrote " << args.out_dist << " and " << args.out_dendro << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-source survival domain adaptation toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate synthetic survival domains");
  simulate->add_option("--out", sim.out_dir, "output directory")->required();
  simulate->add_option("--domains", sim.domains, "number of source domains")->required();
  simulate->add_option("--n", sim.n, "records per domain")->required();
  simulate->add_option("--dim", sim.dim, "covariate dimension")->required();
  simulate->add_option("--censor-frac", sim.censor_frac, "target censored fraction")->required();
  simulate->add_option("--shift", sim.shift, "domain shift scale")->required();
  simulate->add_option("--seed", sim.seed, "random seed (default 0)");
  simulate->add_flag("--treatment", sim.treatment, "assign P/R treatment arms");
  simulate->add_option("--treatment-hr", sim.treatment_hr,
                       "hazard multiplier for arm R (default 0.5)");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "fit a model on source cohorts");
  train_cmd->add_option("--sources", train.sources, "source CSV glob or comma list")->required();
  train_cmd->add_option("--target", train.target, "target CSV")->required();
  train_cmd->add_option("--config", train.config, "key = value config file")->required();
  train_cmd->add_option("--out", train.out_dir, "output directory")->required();

  EvaluateArgs evaluate;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "fold-based target metrics");
  eval_cmd->add_option("--model", evaluate.model_dir, "model directory")->required();
  eval_cmd->add_option("--target", evaluate.target, "target CSV")->required();
  eval_cmd->add_option("--truth", evaluate.truth, "truth sidecar CSV")->required();
  eval_cmd->add_option("--supervision-frac", evaluate.supervision_frac,
                       "fraction treated as supervised");
  eval_cmd->add_option("--folds", evaluate.folds, "number of folds (default 5)");
  eval_cmd->add_option("--report", evaluate.report, "metrics report CSV")->required();

  RecommendArgs recommend;
  CLI::App* rec_cmd = app.add_subcommand("recommend", "counterfactual treatment comparison");
  rec_cmd->add_option("--model", recommend.model_dir, "model directory")->required();
  rec_cmd->add_option("--target", recommend.target, "target CSV")->required();
  rec_cmd->add_option("--truth", recommend.truth, "truth sidecar CSV")->required();
  rec_cmd->add_option("--report", recommend.report, "recommendation report CSV")->required();

  ExplainArgs explain;
  CLI::App* explain_cmd = app.add_subcommand("explain", "source-weight distance clustering");
  explain_cmd->add_option("--weights-matrix", explain.weights_matrix,
                          "KxK CSV of per-target weight rows")
      ->required();
  explain_cmd->add_option("--out-dist", explain.out_dist, "distance matrix CSV")->required();
  explain_cmd->add_option("--out-dendro", explain.out_dendro, "dendrogram text file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (train_cmd->parsed()) return cmd_train(train);
    if (eval_cmd->parsed()) return cmd_evaluate(evaluate);
    if (rec_cmd->parsed()) return cmd_recommend(recommend);
    if (explain_cmd->parsed()) return cmd_explain(explain);
  } catch (const SurvError& e) {
    std::cerr << "survadapt: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "survadapt: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
