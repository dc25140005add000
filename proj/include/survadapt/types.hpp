#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace survadapt {

using Scalar = double;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using IntVector = Eigen::Matrix<int, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

enum class Treatment { P, R, None };
enum class CohortRole { Source, Target };

enum class Err {
  ZeroComparablePairs,
  NoEvents,
  DimensionMismatch,
  TiedScores,
  LengthMismatch,
  IndexNotCensored,
  EmptyDataset,
  EmptyHypothesisSet,
  WeightsNotNormalized,
  FractionOutOfRange,
  ConfigInvalid,
  NoTreatmentLabels,
  KTooSmall,
  MatrixInvalid,
  IncompleteTable,
  AllZeroDifferences,
  TooFewRecords,
  ParseError,
  SchemaError,
  LabelError,
  IoError,
  CalibrationFailed,
};

const char* err_name(Err code);

class SurvError : public std::runtime_error {
 public:
  SurvError(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

  Err code() const { return code_; }

 private:
  Err code_;
};

/// One study instance: covariates, observation time (absent for unlabeled
/// target records), event indicator, and an optional treatment arm.
struct SurvivalRecord {
  Vector features;
  std::optional<Scalar> time;
  int event = 1;  // 1 = event observed, 0 = right-censored
  Treatment treatment = Treatment::None;
};

/// A named survival domain. Source cohorts must be fully labeled; target
/// cohorts may carry missing times but always carry event flags.
struct Cohort {
  std::string name;
  std::vector<SurvivalRecord> records;
  CohortRole role = CohortRole::Source;

  Index size() const { return static_cast<Index>(records.size()); }
  Index dim() const { return records.empty() ? 0 : records.front().features.size(); }

  // Throws on dimension mismatch, negative times, invalid flags, or a
  // missing time in a source cohort.
  void validate() const;

  Matrix feature_matrix() const;          // size() x dim()
  Vector times() const;                   // throws LabelError on any missing time
  IntVector events() const;
  bool has_missing_times() const;
};

struct ScoredCohort {
  Cohort cohort;
  Vector scores;

  void validate() const;  // alignment and finiteness
};

}  // namespace survadapt
