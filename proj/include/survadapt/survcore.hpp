#pragma once

#include "survadapt/types.hpp"

namespace survadapt {

/// Concordance of a risk scoring against observed survival order.
///
/// Pairs (i, j) are comparable when record i had an observed event and
/// t_j > t_i. A pair counts as concordant only when score_i > score_j
/// strictly; ties contribute nothing. Throws ZeroComparablePairs when no
/// pair is comparable.
Scalar c_index(const Eigen::Ref<const Vector>& scores, const Eigen::Ref<const Vector>& times,
               const Eigen::Ref<const IntVector>& events);

/// 1 - c_index.
Scalar d_index(const Eigen::Ref<const Vector>& scores, const Eigen::Ref<const Vector>& times,
               const Eigen::Ref<const IntVector>& events);

/// Concordance over a full target cohort, including records whose labels
/// were revealed for supervision. The mask does not change the value; it is
/// kept for pair-accounting reports.
Scalar c_index_prime(const Eigen::Ref<const Vector>& scores, const Eigen::Ref<const Vector>& times,
                     const Eigen::Ref<const IntVector>& events,
                     const std::vector<bool>& supervised_mask);

struct PairAccounting {
  Scalar total_pairs;      // n^2 + n*c/2
  Scalar reused_fraction;  // lambda_s^2
  Scalar missed_pairs;     // lambda_s*(1-lambda_s)*(n^2 + n*c)
};

/// Bookkeeping for how many ranking pairs a supervision split reuses or
/// loses, for n events and c censored records with supervision fraction
/// lambda_s.
PairAccounting pair_accounting(Index n_events, Index n_censored, Scalar supervision_fraction);

/// Negative log partial likelihood of log-risk scores. The risk set of an
/// event at time t is every record with time >= t, the record itself
/// included. Tied event times are a caller error (undetected here; the
/// synthetic generator draws continuous times). Throws NoEvents when no
/// record has an observed event.
Scalar neg_log_partial_likelihood(const Eigen::Ref<const Vector>& log_scores,
                                  const Eigen::Ref<const Vector>& times,
                                  const Eigen::Ref<const IntVector>& events);

/// Linear log-risk beta . x (time-independent factor of the hazard).
Scalar cox_linear_risk(const Eigen::Ref<const Vector>& beta, const Eigen::Ref<const Vector>& x);

}  // namespace survadapt
