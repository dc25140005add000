#include "survadapt/survcore.hpp"

#include <cmath>

namespace survadapt {

const char* err_name(Err code) {
  switch (code) {
    case Err::ZeroComparablePairs: return "ZERO_COMPARABLE_PAIRS";
    case Err::NoEvents: return "NO_EVENTS";
    case Err::DimensionMismatch: return "DIMENSION_MISMATCH";
    case Err::TiedScores: return "TIED_SCORES";
    case Err::LengthMismatch: return "LENGTH_MISMATCH";
    case Err::IndexNotCensored: return "INDEX_NOT_CENSORED";
    case Err::EmptyDataset: return "EMPTY_DATASET";
    case Err::EmptyHypothesisSet: return "EMPTY_HYPOTHESIS_SET";
    case Err::WeightsNotNormalized: return "WEIGHTS_NOT_NORMALIZED";
    case Err::FractionOutOfRange: return "FRACTION_OUT_OF_RANGE";
    case Err::ConfigInvalid: return "CONFIG_INVALID";
    case Err::NoTreatmentLabels: return "NO_TREATMENT_LABELS";
    case Err::KTooSmall: return "K_TOO_SMALL";
    case Err::MatrixInvalid: return "MATRIX_INVALID";
    case Err::IncompleteTable: return "INCOMPLETE_TABLE";
    case Err::AllZeroDifferences: return "ALL_ZERO_DIFFERENCES";
    case Err::TooFewRecords: return "TOO_FEW_RECORDS";
    case Err::ParseError: return "PARSE_ERROR";
    case Err::SchemaError: return "SCHEMA_ERROR";
    case Err::LabelError: return "LABEL_ERROR";
    case Err::IoError: return "IO_ERROR";
    case Err::CalibrationFailed: return "CALIBRATION_FAILED";
  }
  return "UNKNOWN";
}

void Cohort::validate() const {
  const Index d = dim();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SurvivalRecord& rec = records[i];
    if (rec.features.size() != d)
      throw SurvError(Err::DimensionMismatch,
                      "record " + std::to_string(i) + " in cohort '" + name + "'");
    if (rec.event != 0 && rec.event != 1)
      throw SurvError(Err::SchemaError, "event flag must be 0 or 1");
    if (rec.time && (!std::isfinite(*rec.time) || *rec.time < 0.0))
      throw SurvError(Err::SchemaError, "time must be finite and nonnegative");
    if (role == CohortRole::Source && !rec.time)
      throw SurvError(Err::LabelError,
                      "missing time in source cohort '" + name + "' record " + std::to_string(i));
  }
}

Matrix Cohort::feature_matrix() const {
  Matrix x(size(), dim());
  for (Index i = 0; i < size(); ++i) x.row(i) = records[static_cast<std::size_t>(i)].features;
  return x;
}

Vector Cohort::times() const {
  Vector t(size());
  for (Index i = 0; i < size(); ++i) {
    const auto& rec = records[static_cast<std::size_t>(i)];
    if (!rec.time)
      throw SurvError(Err::LabelError, "missing time in cohort '" + name + "'");
    t[i] = *rec.time;
  }
  return t;
}

IntVector Cohort::events() const {
  IntVector e(size());
  for (Index i = 0; i < size(); ++i) e[i] = records[static_cast<std::size_t>(i)].event;
  return e;
}

bool Cohort::has_missing_times() const {
  for (const auto& rec : records)
    if (!rec.time) return true;
  return false;
}

void ScoredCohort::validate() const {
  if (scores.size() != cohort.size())
    throw SurvError(Err::LengthMismatch, "scores not aligned with cohort records");
  if (!scores.allFinite()) throw SurvError(Err::SchemaError, "scores must be finite");
}

Scalar c_index(const Eigen::Ref<const Vector>& scores, const Eigen::Ref<const Vector>& times,
               const Eigen::Ref<const IntVector>& events) {
  const Index n = scores.size();
  if (n < 1 || times.size() != n || events.size() != n)
    throw SurvError(Err::LengthMismatch, "c_index inputs must have equal nonzero length");

  long comparable = 0;
  long concordant = 0;
  for (Index i = 0; i < n; ++i) {
    if (events[i] != 1) continue;
    for (Index j = 0; j < n; ++j) {
      if (times[j] > times[i]) {
        ++comparable;
        if (scores[i] > scores[j]) ++concordant;
      }
    }
  }
  if (comparable == 0)
    throw SurvError(Err::ZeroComparablePairs, "no comparable pairs");
  return static_cast<Scalar>(concordant) / static_cast<Scalar>(comparable);
}

Scalar d_index(const Eigen::Ref<const Vector>& scores, const Eigen::Ref<const Vector>& times,
               const Eigen::Ref<const IntVector>& events) {
  return 1.0 - c_index(scores, times, events);
}

Scalar c_index_prime(const Eigen::Ref<const Vector>& scores, const Eigen::Ref<const Vector>& times,
                     const Eigen::Ref<const IntVector>& events,
                     const std::vector<bool>& supervised_mask) {
  if (static_cast<Index>(supervised_mask.size()) != scores.size())
    throw SurvError(Err::LengthMismatch, "supervised mask not aligned with records");
  return c_index(scores, times, events);
}

PairAccounting pair_accounting(Index n_events, Index n_censored, Scalar supervision_fraction) {
  const Scalar n = static_cast<Scalar>(n_events);
  const Scalar c = static_cast<Scalar>(n_censored);
  const Scalar ls = supervision_fraction;
  PairAccounting out;
  out.total_pairs = n * n + 0.5 * n * c;
  out.reused_fraction = ls * ls;
  out.missed_pairs = ls * (1.0 - ls) * (n * n + n * c);
  return out;
}

Scalar neg_log_partial_likelihood(const Eigen::Ref<const Vector>& log_scores,
                                  const Eigen::Ref<const Vector>& times,
                                  const Eigen::Ref<const IntVector>& events) {
  const Index n = log_scores.size();
  if (times.size() != n || events.size() != n)
    throw SurvError(Err::LengthMismatch, "partial likelihood inputs must have equal length");

  Scalar loss = 0.0;
  bool any_event = false;
  for (Index o = 0; o < n; ++o) {
    if (events[o] != 1) continue;
    any_event = true;
    // log-sum-exp over the risk set {l : t_l >= t_o}, max-subtracted.
    Scalar max_score = -std::numeric_limits<Scalar>::infinity();
    for (Index l = 0; l < n; ++l)
      if (times[l] >= times[o] && log_scores[l] > max_score) max_score = log_scores[l];
    Scalar sum_exp = 0.0;
    for (Index l = 0; l < n; ++l)
      if (times[l] >= times[o]) sum_exp += std::exp(log_scores[l] - max_score);
    loss -= log_scores[o] - (max_score + std::log(sum_exp));
  }
  if (!any_event) throw SurvError(Err::NoEvents, "partial likelihood needs at least one event");
  return loss;
}

Scalar cox_linear_risk(const Eigen::Ref<const Vector>& beta, const Eigen::Ref<const Vector>& x) {
  if (beta.size() != x.size())
    throw SurvError(Err::DimensionMismatch, "beta and covariates differ in length");
  return beta.dot(x);
}

}  // namespace survadapt
