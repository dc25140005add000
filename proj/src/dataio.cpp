#include "survadapt/dataio.hpp"

#include "survadapt/rng.hpp"
#include "survadapt/textio.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace survadapt {

void SynthConfig::validate() const {
  if (n_domains < 1 || n_per_domain < 1 || dim < 1)
    throw SurvError(Err::ConfigInvalid, "domain count, size, and dimension must be >= 1");
  if (shift_scale < 0.0) throw SurvError(Err::ConfigInvalid, "shift_scale must be >= 0");
  if (censor_fraction < 0.0 || censor_fraction >= 1.0)
    throw SurvError(Err::ConfigInvalid, "censor_fraction must be in [0, 1)");
  if (baseline_rate <= 0.0) throw SurvError(Err::ConfigInvalid, "baseline_rate must be > 0");
  if (treatment_hazard_multiplier_r <= 0.0)
    throw SurvError(Err::ConfigInvalid, "treatment hazard multiplier must be > 0");
}

// Domain shifts move along the first coordinate only (see draw_affine), so
// the x0 term is the non-transferable part of the risk: the source domains
// sit on its rising stretch while a far-shifted target falls past the
// peak. The remaining coordinates are identically distributed in every
// domain and carry the transferable structure.
Scalar synthetic_log_risk(const Eigen::Ref<const Vector>& x) {
  static constexpr Scalar kCoeffs[9] = {0.6, -0.5, 0.4, -0.3, 0.25, -0.2, 0.15, -0.1, 0.1};
  Scalar value = 2.2 * std::sin(0.45 * x[0]);
  for (Index j = 1; j < x.size(); ++j) value += kCoeffs[(j - 1) % 9] * x[j];
  if (x.size() >= 3) value += 0.4 * std::sin(x[1] + x[2]);
  if (x.size() >= 4) value += 0.3 * (x[3] * x[3] - 1.0);
  return value;
}

namespace {

struct AffineMap {
  std::vector<std::array<Index, 2>> planes;  // Givens rotation planes
  std::vector<Scalar> angles;
  Vector translation;

  Vector apply(Vector x) const {
    for (std::size_t g = 0; g < planes.size(); ++g) {
      const Scalar c = std::cos(angles[g]);
      const Scalar s = std::sin(angles[g]);
      const Scalar a = x[planes[g][0]];
      const Scalar b = x[planes[g][1]];
      x[planes[g][0]] = c * a - s * b;
      x[planes[g][1]] = s * a + c * b;
    }
    return x + translation;
  }
};

AffineMap draw_affine(SplitRng& rng, Index dim, Scalar shift_scale, int domain, int n_domains) {
  AffineMap map;
  map.translation = Vector::Zero(dim);
  if (domain == 0 || shift_scale == 0.0 || dim < 1) return map;
  if (dim >= 2) {
    const Index n_rotations = (dim + 1) / 2;
    for (Index g = 0; g < n_rotations; ++g) {
      Index a = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(dim)));
      Index b = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(dim - 1)));
      if (b >= a) ++b;
      map.planes.push_back({a, b});
      map.angles.push_back(shift_scale * rng.next_uniform(-0.6, 0.6));
    }
  }
  // Translations stay on the first coordinate axis. Source domains form a
  // jittered ladder over [0, 3.2] sigma per unit of shift_scale.
  const Scalar rung = n_domains > 1 ? static_cast<Scalar>(domain) /
                                          static_cast<Scalar>(n_domains - 1)
                                    : 1.0;
  map.translation[0] = 2.5 * shift_scale * (1.3 * rung + rng.next_uniform(-0.1, 0.1));
  return map;
}

// Smallest censoring rate whose realized censored fraction matches the
// request. Bisection on the log rate; the realized fraction is a
// nondecreasing step function of the rate.
Scalar calibrate_censor_rate(const Vector& event_times, const Vector& censor_uniforms,
                             Scalar target_fraction) {
  const Index n = event_times.size();
  auto realized = [&](Scalar rate) {
    Index censored = 0;
    for (Index i = 0; i < n; ++i) {
      const Scalar censor_time = -std::log(1.0 - censor_uniforms[i]) / rate;
      if (censor_time < event_times[i]) ++censored;
    }
    return static_cast<Scalar>(censored) / static_cast<Scalar>(n);
  };

  Scalar lo = -12.0, hi = 12.0;  // log10 of the rate
  Scalar best_rate = std::pow(10.0, 0.5 * (lo + hi));
  Scalar best_gap = std::abs(realized(best_rate) - target_fraction);
  for (int iter = 0; iter < 100; ++iter) {
    const Scalar mid = 0.5 * (lo + hi);
    const Scalar rate = std::pow(10.0, mid);
    const Scalar frac = realized(rate);
    const Scalar gap = std::abs(frac - target_fraction);
    if (gap < best_gap) {
      best_gap = gap;
      best_rate = rate;
    }
    if (gap <= 0.02) return rate;
    if (frac < target_fraction)
      lo = mid;
    else
      hi = mid;
  }
  if (best_gap <= 0.05) return best_rate;
  throw SurvError(Err::CalibrationFailed, "censoring rate bisection did not converge");
}

}  // namespace

SyntheticData generate_domains(const SynthConfig& config) {
  config.validate();
  const Index dim = config.dim;
  const Index n = config.n_per_domain;
  const int total_domains = config.n_domains + 1;  // sources plus target

  // Source affine maps first. The target sits further out along the
  // nuisance axis than any source, so source-trained models have to
  // extrapolate into its window.
  std::vector<AffineMap> maps;
  for (int domain = 0; domain < total_domains; ++domain) {
    SplitRng affine_rng(config.seed, 101 + static_cast<std::uint64_t>(domain));
    maps.push_back(draw_affine(affine_rng, dim, config.shift_scale, domain, config.n_domains));
  }
  {
    SplitRng reach_rng(config.seed, 99);
    Scalar reach = 0.0;
    for (int i = 0; i < config.n_domains; ++i)
      reach = std::max(reach, maps[static_cast<std::size_t>(i)].translation[0]);
    AffineMap& target_map = maps.back();
    target_map.translation = Vector::Zero(dim);
    target_map.translation[0] = reach + 2.5 * config.shift_scale * reach_rng.next_uniform(0.8, 1.2);
  }

  SyntheticData data;
  for (int domain = 0; domain < total_domains; ++domain) {
    const bool is_target = domain == config.n_domains;
    SplitRng covariate_rng(config.seed, 201 + static_cast<std::uint64_t>(domain));
    SplitRng event_rng(config.seed, 301 + static_cast<std::uint64_t>(domain));
    SplitRng censor_rng(config.seed, 401 + static_cast<std::uint64_t>(domain));
    SplitRng treatment_rng(config.seed, 501 + static_cast<std::uint64_t>(domain));

    const AffineMap& map = maps[static_cast<std::size_t>(domain)];

    Cohort cohort;
    cohort.name = is_target ? "target" : "source" + std::to_string(domain);
    cohort.role = is_target ? CohortRole::Target : CohortRole::Source;
    GroundTruth truth;
    truth.true_log_risk.resize(n);
    truth.true_event_time.resize(n);

    Vector event_times(n);
    for (Index i = 0; i < n; ++i) {
      Vector z(dim);
      for (Index j = 0; j < dim; ++j) z[j] = covariate_rng.next_normal();
      SurvivalRecord record;
      record.features = map.apply(std::move(z));
      if (config.with_treatment)
        record.treatment = treatment_rng.next_uniform() < 0.5 ? Treatment::P : Treatment::R;

      Scalar log_risk = synthetic_log_risk(record.features);
      if (record.treatment == Treatment::R)
        log_risk += std::log(config.treatment_hazard_multiplier_r);
      const Scalar rate = config.baseline_rate * std::exp(log_risk);
      const Scalar event_time = -std::log(1.0 - event_rng.next_uniform()) / rate;

      truth.true_log_risk[i] = log_risk;
      truth.true_event_time[i] = event_time;
      event_times[i] = event_time;
      cohort.records.push_back(std::move(record));
    }

    if (config.censor_fraction > 0.0) {
      Vector censor_uniforms(n);
      for (Index i = 0; i < n; ++i) censor_uniforms[i] = censor_rng.next_uniform();
      const Scalar rate_c =
          calibrate_censor_rate(event_times, censor_uniforms, config.censor_fraction);
      for (Index i = 0; i < n; ++i) {
        const Scalar censor_time = -std::log(1.0 - censor_uniforms[i]) / rate_c;
        auto& record = cohort.records[static_cast<std::size_t>(i)];
        record.event = event_times[i] <= censor_time ? 1 : 0;
        record.time = std::min(event_times[i], censor_time);
      }
    } else {
      for (Index i = 0; i < n; ++i) {
        cohort.records[static_cast<std::size_t>(i)].event = 1;
        cohort.records[static_cast<std::size_t>(i)].time = event_times[i];
      }
    }

    if (is_target) {
      data.target_labeled = cohort;
      data.target_labeled.validate();
      data.target = std::move(cohort);
      for (auto& record : data.target.records) record.time.reset();
    } else {
      cohort.validate();
      data.sources.push_back(std::move(cohort));
    }
    data.truth.push_back(std::move(truth));
  }
  return data;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

const char* treatment_code(Treatment t) {
  switch (t) {
    case Treatment::P: return "P";
    case Treatment::R: return "R";
    case Treatment::None: return "NA";
  }
  return "NA";
}

}  // namespace

Cohort read_cohort(const std::string& path, CohortRole role) {
  std::ifstream in(path);
  if (!in) throw SurvError(Err::IoError, "cannot read " + path);

  std::string line;
  if (!std::getline(in, line)) throw SurvError(Err::SchemaError, "empty file: " + path);
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "time" || header[2] != "event" ||
      header[3] != "treatment")
    throw SurvError(Err::SchemaError, "bad header in " + path);
  const std::size_t dim = header.size() - 4;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[4 + j] != "f" + std::to_string(j))
      throw SurvError(Err::SchemaError, "bad feature column name in " + path);

  Cohort cohort;
  const std::size_t stem_start = path.find_last_of("/\\") + 1;
  const std::size_t stem_end = path.rfind('.');
  cohort.name = path.substr(stem_start, stem_end == std::string::npos || stem_end < stem_start
                                            ? std::string::npos
                                            : stem_end - stem_start);
  cohort.role = role;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw SurvError(Err::ParseError,
                      path + ":" + std::to_string(line_no) + ": wrong field count");

    SurvivalRecord record;
    if (fields[1].empty()) {
      if (role == CohortRole::Source)
        throw SurvError(Err::LabelError,
                        path + ":" + std::to_string(line_no) + ": missing time in source");
    } else {
      double time;
      if (!parse_double(fields[1], time) || time < 0.0)
        throw SurvError(Err::ParseError, path + ":" + std::to_string(line_no) + ": bad time");
      record.time = time;
    }
    if (fields[2] == "0")
      record.event = 0;
    else if (fields[2] == "1")
      record.event = 1;
    else
      throw SurvError(Err::ParseError, path + ":" + std::to_string(line_no) + ": bad event flag");
    if (fields[3] == "P")
      record.treatment = Treatment::P;
    else if (fields[3] == "R")
      record.treatment = Treatment::R;
    else if (fields[3] == "NA")
      record.treatment = Treatment::None;
    else
      throw SurvError(Err::ParseError, path + ":" + std::to_string(line_no) + ": bad treatment");

    record.features.resize(static_cast<Index>(dim));
    for (std::size_t j = 0; j < dim; ++j) {
      double value;
      if (!parse_double(fields[4 + j], value))
        throw SurvError(Err::ParseError,
                        path + ":" + std::to_string(line_no) + ": bad feature f" +
                            std::to_string(j));
      record.features[static_cast<Index>(j)] = value;
    }
    cohort.records.push_back(std::move(record));
  }
  cohort.validate();
  return cohort;
}

void write_cohort(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurvError(Err::IoError, "cannot write " + path);
  const Index dim = cohort.dim();
  out << "id,time,event,treatment";
  for (Index j = 0; j < dim; ++j) out << ",f" << j;
  out << '\n';
  for (Index i = 0; i < cohort.size(); ++i) {
    const auto& record = cohort.records[static_cast<std::size_t>(i)];
    out << i << ',';
    if (record.time) out << format_double(*record.time);
    out << ',' << record.event << ',' << treatment_code(record.treatment);
    for (Index j = 0; j < dim; ++j) out << ',' << format_double(record.features[j]);
    out << '\n';
  }
  if (!out) throw SurvError(Err::IoError, "write failed for " + path);
}

GroundTruth read_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SurvError(Err::IoError, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) !=
      std::vector<std::string>{"id", "true_log_risk", "true_event_time"})
    throw SurvError(Err::SchemaError, "bad truth header in " + path);

  std::vector<Scalar> risks, times;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    double risk, time;
    if (fields.size() != 3 || !parse_double(fields[1], risk) || !parse_double(fields[2], time))
      throw SurvError(Err::ParseError, path + ":" + std::to_string(line_no) + ": bad truth row");
    risks.push_back(risk);
    times.push_back(time);
  }
  GroundTruth truth;
  truth.true_log_risk = Eigen::Map<const Vector>(risks.data(), static_cast<Index>(risks.size()));
  truth.true_event_time = Eigen::Map<const Vector>(times.data(), static_cast<Index>(times.size()));
  return truth;
}

void write_truth(const GroundTruth& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurvError(Err::IoError, "cannot write " + path);
  out << "id,true_log_risk,true_event_time\n";
  for (Index i = 0; i < truth.true_log_risk.size(); ++i)
    out << i << ',' << format_double(truth.true_log_risk[i]) << ','
        << format_double(truth.true_event_time[i]) << '\n';
  if (!out) throw SurvError(Err::IoError, "write failed for " + path);
}

Cohort augment_with_treatment(const Cohort& cohort) {
  Cohort augmented = cohort;
  for (auto& record : augmented.records) {
    if (record.treatment == Treatment::None)
      throw SurvError(Err::NoTreatmentLabels,
                      "cohort '" + cohort.name + "' has records without a treatment arm");
    Vector extended(record.features.size() + 1);
    extended.head(record.features.size()) = record.features;
    extended[record.features.size()] = record.treatment == Treatment::P ? 1.0 : 0.0;
    record.features = std::move(extended);
  }
  return augmented;
}

}  // namespace survadapt
