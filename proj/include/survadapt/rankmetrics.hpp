#pragma once

#include "survadapt/types.hpp"

#include <functional>

namespace survadapt {

/// Partition of record indices into observed events and censored cases.
struct CensorSplit {
  std::vector<Index> event_indices;
  std::vector<Index> censored_indices;

  static CensorSplit from_events(const Eigen::Ref<const IntVector>& events);
};

/// Normalized Kendall tau distance between the rankings induced by two score
/// vectors: 2*K_d / (n*(n-1)) with K_d the number of discordant pairs.
/// Scores within each vector must be pairwise distinct.
Scalar kendall_tau_distance(const Eigen::Ref<const Vector>& scores1,
                            const Eigen::Ref<const Vector>& scores2);

/// Event indices whose score strictly exceeds the censored instance's score,
/// i.e. the events the ranker predicts to outlive that instance.
std::vector<Index> risk_set(const Eigen::Ref<const Vector>& scores, const CensorSplit& split,
                            Index censored_index);

/// Symmetric discordance index between two rankers evaluated on the same
/// records. Convex combination, with weights alpha1 = C(|ev|, 2) and
/// alpha2 = |ev|*|ce|/2, of the discordant-pair fraction over event pairs
/// and the mean Jaccard distance between the rankers' risk sets over
/// censored instances. Degenerate terms drop out of the combination; with
/// no comparable structure at all the index is 0. Score ties are broken by
/// record index in the event-pair term.
Scalar sdi(const Eigen::Ref<const Vector>& scores1, const Eigen::Ref<const Vector>& scores2,
           const Eigen::Ref<const IntVector>& events);

/// Cross-check for sdi along the decomposition into a Kendall tau distance
/// on event ranks plus explicit per-instance Jaccard set distances. Shares
/// no computation path with sdi.
Scalar sdi_decomposed_oracle(const Eigen::Ref<const Vector>& scores1,
                             const Eigen::Ref<const Vector>& scores2,
                             const Eigen::Ref<const IntVector>& events);

/// Finite surrogate for a hypothesis space: each ranker maps a covariate
/// vector to a real score.
struct HypothesisSet {
  using Ranker = std::function<Scalar(const Eigen::Ref<const Vector>&)>;
  std::vector<Ranker> rankers;
};

/// Largest gap, over ordered ranker pairs, between the SDI measured on the
/// two cohorts. The cohorts stand in for their empirical distributions.
Scalar empirical_discrepancy(const HypothesisSet& hypotheses, const Cohort& sample_s,
                             const Cohort& sample_t);

struct BoundCheck {
  Scalar lhs;  // target SDI of the hypothesis against ground truth
  Scalar rhs;  // eta_D + weighted source SDI + weighted discrepancy
  bool satisfied;
};

struct BoundReport {
  std::vector<BoundCheck> per_hypothesis;
  Scalar eta_d;
  Vector discrepancies;  // one per source
  bool all_satisfied() const;
};

/// Numerically checks, for every hypothesis, that its target-domain SDI
/// against the ground-truth ranking is bounded by the weighted source terms
/// plus eta_D (the best joint SDI achievable within the hypothesis set).
/// Cohorts are paired with ground-truth score vectors; weights must lie on
/// the simplex.
BoundReport verify_target_bound(const HypothesisSet& hypotheses,
                                const std::vector<ScoredCohort>& sources,
                                const ScoredCohort& target,
                                const Eigen::Ref<const Vector>& weights);

}  // namespace survadapt
