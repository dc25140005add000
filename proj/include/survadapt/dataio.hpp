#pragma once

#include "survadapt/types.hpp"

#include <cstdint>
#include <string>

namespace survadapt {

struct SynthConfig {
  int n_domains = 3;        // number of source domains; one extra target is generated
  int n_per_domain = 200;
  int dim = 10;
  Scalar shift_scale = 1.0;     // magnitude of the per-domain affine covariate shift
  Scalar censor_fraction = 0.3;
  Scalar baseline_rate = 0.1;
  std::uint64_t seed = 0;
  bool with_treatment = false;
  Scalar treatment_hazard_multiplier_r = 1.0;  // hazard factor applied to arm R

  void validate() const;
};

struct GroundTruth {
  Vector true_log_risk;
  Vector true_event_time;  // pre-censoring event draw
};

struct SyntheticData {
  std::vector<Cohort> sources;
  Cohort target;          // times withheld
  Cohort target_labeled;  // same records with observed times, for evaluation
  std::vector<GroundTruth> truth;  // per domain: sources first, target last
};

/// Multi-domain censored survival data with known ground truth. Covariates
/// are standard normal pushed through a per-domain affine map (domain 0 is
/// the identity; rotation angles and the translation norm scale with
/// shift_scale). All domains share one nonlinear log-risk; event times are
/// exponential with rate baseline_rate * exp(log_risk), and censoring times
/// are exponential with a rate calibrated by bisection so the realized
/// censored fraction lands near censor_fraction.
SyntheticData generate_domains(const SynthConfig& config);

/// The shared synthetic log-risk surface (linear + quadratic + sinusoid),
/// before any treatment effect.
Scalar synthetic_log_risk(const Eigen::Ref<const Vector>& x);

Cohort read_cohort(const std::string& path, CohortRole role);
void write_cohort(const Cohort& cohort, const std::string& path);

GroundTruth read_truth(const std::string& path);
void write_truth(const GroundTruth& truth, const std::string& path);

/// Copy of the cohort with the treatment arm appended as one extra binary
/// covariate (P = 1, R = 0). Throws NoTreatmentLabels if any record has no
/// recorded arm.
Cohort augment_with_treatment(const Cohort& cohort);

}  // namespace survadapt
