#include "survadapt/rankmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace survadapt {

namespace {

// Ranking order with ties broken by record index: i precedes j when its
// score is strictly higher, or equal with the lower index.
inline bool precedes(const Eigen::Ref<const Vector>& scores, Index i, Index j) {
  if (scores[i] != scores[j]) return scores[i] > scores[j];
  return i < j;
}

// Inversion count by merge sort.
long count_inversions(std::vector<int>& values, std::vector<int>& scratch, std::size_t lo,
                      std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long inv = count_inversions(values, scratch, lo, mid) + count_inversions(values, scratch, mid, hi);
  std::size_t a = lo, b = mid, out = lo;
  while (a < mid && b < hi) {
    if (values[a] <= values[b]) {
      scratch[out++] = values[a++];
    } else {
      inv += static_cast<long>(mid - a);
      scratch[out++] = values[b++];
    }
  }
  while (a < mid) scratch[out++] = values[a++];
  while (b < hi) scratch[out++] = values[b++];
  std::copy(scratch.begin() + static_cast<long>(lo), scratch.begin() + static_cast<long>(hi),
            values.begin() + static_cast<long>(lo));
  return inv;
}

// Rank positions (0-based, 0 = highest score, ties by lower index) of the
// given subset of records under one score vector.
std::vector<int> subset_ranks(const Eigen::Ref<const Vector>& scores,
                              const std::vector<Index>& subset) {
  std::vector<Index> order(subset.begin(), subset.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return precedes(scores, a, b); });
  std::vector<int> rank_of(subset.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    auto it = std::lower_bound(subset.begin(), subset.end(), order[pos]);
    rank_of[static_cast<std::size_t>(it - subset.begin())] = static_cast<int>(pos);
  }
  return rank_of;
}

struct SdiParts {
  Scalar alpha1 = 0.0;
  Scalar alpha2 = 0.0;
  Scalar kendall = 0.0;       // discordant fraction over event pairs
  Scalar jaccard_mean = 0.0;  // mean risk-set Jaccard distance over censored
};

Scalar combine(const SdiParts& p) {
  const Scalar total = p.alpha1 + p.alpha2;
  if (total <= 0.0) return 0.0;
  return (p.alpha1 * p.kendall + p.alpha2 * p.jaccard_mean) / total;
}

}  // namespace

CensorSplit CensorSplit::from_events(const Eigen::Ref<const IntVector>& events) {
  CensorSplit split;
  for (Index i = 0; i < events.size(); ++i) {
    if (events[i] == 1)
      split.event_indices.push_back(i);
    else
      split.censored_indices.push_back(i);
  }
  return split;
}

Scalar kendall_tau_distance(const Eigen::Ref<const Vector>& scores1,
                            const Eigen::Ref<const Vector>& scores2) {
  const Index n = scores1.size();
  if (scores2.size() != n)
    throw SurvError(Err::LengthMismatch, "kendall_tau_distance needs equal lengths");
  if (n < 2) throw SurvError(Err::LengthMismatch, "kendall_tau_distance needs n >= 2");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (const auto& s : {scores1, scores2}) {
    std::vector<Index> check = order;
    std::sort(check.begin(), check.end(), [&](Index a, Index b) { return s[a] < s[b]; });
    for (std::size_t k = 1; k < check.size(); ++k)
      if (s[check[k]] == s[check[k - 1]])
        throw SurvError(Err::TiedScores, "scores must be pairwise distinct");
  }

  // Order records by the first score vector; discordant pairs become
  // inversions in the second vector's ranks.
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores1[a] < scores1[b]; });
  std::vector<Index> by_second(static_cast<std::size_t>(n));
  std::iota(by_second.begin(), by_second.end(), Index{0});
  std::sort(by_second.begin(), by_second.end(),
            [&](Index a, Index b) { return scores2[a] < scores2[b]; });
  std::vector<int> rank2(static_cast<std::size_t>(n));
  for (std::size_t pos = 0; pos < by_second.size(); ++pos)
    rank2[static_cast<std::size_t>(by_second[pos])] = static_cast<int>(pos);

  std::vector<int> seq(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < seq.size(); ++k) seq[k] = rank2[static_cast<std::size_t>(order[k])];
  std::vector<int> scratch(seq.size());
  const long discordant = count_inversions(seq, scratch, 0, seq.size());
  return 2.0 * static_cast<Scalar>(discordant) /
         (static_cast<Scalar>(n) * static_cast<Scalar>(n - 1));
}

std::vector<Index> risk_set(const Eigen::Ref<const Vector>& scores, const CensorSplit& split,
                            Index censored_index) {
  if (!std::binary_search(split.censored_indices.begin(), split.censored_indices.end(),
                          censored_index))
    throw SurvError(Err::IndexNotCensored,
                    "index " + std::to_string(censored_index) + " is not censored");
  std::vector<Index> members;
  for (Index e : split.event_indices)
    if (scores[e] > scores[censored_index]) members.push_back(e);
  return members;
}

Scalar sdi(const Eigen::Ref<const Vector>& scores1, const Eigen::Ref<const Vector>& scores2,
           const Eigen::Ref<const IntVector>& events) {
  const Index n = events.size();
  if (n == 0) throw SurvError(Err::EmptyDataset, "sdi needs at least one record");
  if (scores1.size() != n || scores2.size() != n)
    throw SurvError(Err::LengthMismatch, "sdi scores not aligned with events");
  if (!scores1.allFinite() || !scores2.allFinite())
    throw SurvError(Err::SchemaError, "sdi scores must be finite");

  const CensorSplit split = CensorSplit::from_events(events);
  const auto& ev = split.event_indices;
  const auto& ce = split.censored_indices;
  const Scalar n_ev = static_cast<Scalar>(ev.size());
  const Scalar n_ce = static_cast<Scalar>(ce.size());

  SdiParts parts;
  parts.alpha1 = n_ev * (n_ev - 1.0) / 2.0;
  parts.alpha2 = n_ev * n_ce / 2.0;

  if (ev.size() >= 2) {
    long discordant = 0;
    for (std::size_t p = 0; p + 1 < ev.size(); ++p) {
      for (std::size_t q = p + 1; q < ev.size(); ++q) {
        const bool o1 = precedes(scores1, ev[p], ev[q]);
        const bool o2 = precedes(scores2, ev[p], ev[q]);
        if (o1 != o2) ++discordant;
      }
    }
    parts.kendall = static_cast<Scalar>(discordant) / parts.alpha1;
  }

  if (!ce.empty() && !ev.empty()) {
    Scalar sum = 0.0;
    for (Index x : ce) {
      long sym = 0, uni = 0;
      for (Index e : ev) {
        const bool in1 = scores1[e] > scores1[x];
        const bool in2 = scores2[e] > scores2[x];
        if (in1 || in2) ++uni;
        if (in1 != in2) ++sym;
      }
      // Two empty risk sets are identical; distance 0.
      if (uni > 0) sum += static_cast<Scalar>(sym) / static_cast<Scalar>(uni);
    }
    parts.jaccard_mean = sum / n_ce;
  }

  return combine(parts);
}

Scalar sdi_decomposed_oracle(const Eigen::Ref<const Vector>& scores1,
                             const Eigen::Ref<const Vector>& scores2,
                             const Eigen::Ref<const IntVector>& events) {
  const Index n = events.size();
  if (n == 0) throw SurvError(Err::EmptyDataset, "sdi needs at least one record");
  if (scores1.size() != n || scores2.size() != n)
    throw SurvError(Err::LengthMismatch, "sdi scores not aligned with events");

  const CensorSplit split = CensorSplit::from_events(events);
  const auto& ev = split.event_indices;
  const auto& ce = split.censored_indices;

  SdiParts parts;
  parts.alpha1 = static_cast<Scalar>(ev.size()) * (static_cast<Scalar>(ev.size()) - 1.0) / 2.0;
  parts.alpha2 = static_cast<Scalar>(ev.size()) * static_cast<Scalar>(ce.size()) / 2.0;

  if (ev.size() >= 2) {
    // Ranks are distinct by construction, so the tie precondition holds.
    const std::vector<int> r1 = subset_ranks(scores1, ev);
    const std::vector<int> r2 = subset_ranks(scores2, ev);
    Vector v1(static_cast<Index>(r1.size())), v2(static_cast<Index>(r2.size()));
    for (std::size_t k = 0; k < r1.size(); ++k) {
      v1[static_cast<Index>(k)] = static_cast<Scalar>(r1[k]);
      v2[static_cast<Index>(k)] = static_cast<Scalar>(r2[k]);
    }
    parts.kendall = kendall_tau_distance(v1, v2);
  }

  if (!ce.empty() && !ev.empty()) {
    Scalar sum = 0.0;
    for (Index x : ce) {
      const std::vector<Index> m1 = risk_set(scores1, split, x);
      const std::vector<Index> m2 = risk_set(scores2, split, x);
      const std::set<Index> a(m1.begin(), m1.end());
      const std::set<Index> b(m2.begin(), m2.end());
      std::vector<Index> sym, uni;
      std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                    std::back_inserter(sym));
      std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
      if (!uni.empty())
        sum += static_cast<Scalar>(sym.size()) / static_cast<Scalar>(uni.size());
    }
    parts.jaccard_mean = sum / static_cast<Scalar>(ce.size());
  }

  return combine(parts);
}

namespace {

// Per-cohort cache of every ranker's scores (one column per ranker).
Matrix ranker_scores(const HypothesisSet& hypotheses, const Cohort& cohort) {
  const Index n = cohort.size();
  const Index m = static_cast<Index>(hypotheses.rankers.size());
  Matrix scores(n, m);
  for (Index h = 0; h < m; ++h) {
    const auto& ranker = hypotheses.rankers[static_cast<std::size_t>(h)];
    for (Index i = 0; i < n; ++i)
      scores(i, h) = ranker(cohort.records[static_cast<std::size_t>(i)].features);
  }
  return scores;
}

Scalar discrepancy_from_scores(const Matrix& scores_s, const IntVector& events_s,
                               const Matrix& scores_t, const IntVector& events_t) {
  const Index m = scores_s.cols();
  Scalar worst = 0.0;
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) {
      const Scalar on_s = sdi(scores_s.col(a), scores_s.col(b), events_s);
      const Scalar on_t = sdi(scores_t.col(a), scores_t.col(b), events_t);
      worst = std::max(worst, std::abs(on_s - on_t));
    }
  }
  return worst;
}

}  // namespace

Scalar empirical_discrepancy(const HypothesisSet& hypotheses, const Cohort& sample_s,
                             const Cohort& sample_t) {
  if (hypotheses.rankers.empty())
    throw SurvError(Err::EmptyHypothesisSet, "discrepancy needs at least one ranker");
  if (sample_s.size() == 0 || sample_t.size() == 0)
    throw SurvError(Err::EmptyDataset, "discrepancy samples must be nonempty");
  const Matrix scores_s = ranker_scores(hypotheses, sample_s);
  const Matrix scores_t = ranker_scores(hypotheses, sample_t);
  return discrepancy_from_scores(scores_s, sample_s.events(), scores_t, sample_t.events());
}

bool BoundReport::all_satisfied() const {
  for (const auto& check : per_hypothesis)
    if (!check.satisfied) return false;
  return true;
}

BoundReport verify_target_bound(const HypothesisSet& hypotheses,
                                const std::vector<ScoredCohort>& sources,
                                const ScoredCohort& target,
                                const Eigen::Ref<const Vector>& weights) {
  if (hypotheses.rankers.empty())
    throw SurvError(Err::EmptyHypothesisSet, "bound verification needs rankers");
  const Index k = static_cast<Index>(sources.size());
  if (weights.size() != k || weights.minCoeff() < 0.0 ||
      std::abs(weights.sum() - 1.0) > 1e-9)
    throw SurvError(Err::WeightsNotNormalized, "weights must lie on the simplex");
  target.validate();
  for (const auto& s : sources) s.validate();

  const Index m = static_cast<Index>(hypotheses.rankers.size());
  const IntVector events_t = target.cohort.events();
  const Matrix scores_t = ranker_scores(hypotheses, target.cohort);

  std::vector<Matrix> scores_s(static_cast<std::size_t>(k));
  std::vector<IntVector> events_s(static_cast<std::size_t>(k));
  BoundReport report;
  report.discrepancies.resize(k);
  for (Index i = 0; i < k; ++i) {
    const auto& src = sources[static_cast<std::size_t>(i)];
    scores_s[static_cast<std::size_t>(i)] = ranker_scores(hypotheses, src.cohort);
    events_s[static_cast<std::size_t>(i)] = src.cohort.events();
    report.discrepancies[i] = discrepancy_from_scores(
        scores_s[static_cast<std::size_t>(i)], events_s[static_cast<std::size_t>(i)], scores_t,
        events_t);
  }

  // SDI of each hypothesis against the ground-truth scores, per domain.
  Vector target_loss(m);
  Matrix source_loss(m, k);
  for (Index h = 0; h < m; ++h) {
    target_loss[h] = sdi(scores_t.col(h), target.scores, events_t);
    for (Index i = 0; i < k; ++i)
      source_loss(h, i) = sdi(scores_s[static_cast<std::size_t>(i)].col(h),
                              sources[static_cast<std::size_t>(i)].scores,
                              events_s[static_cast<std::size_t>(i)]);
  }

  report.eta_d = std::numeric_limits<Scalar>::infinity();
  for (Index h = 0; h < m; ++h) {
    const Scalar joint = target_loss[h] + source_loss.row(h).dot(weights);
    report.eta_d = std::min(report.eta_d, joint);
  }

  report.per_hypothesis.reserve(static_cast<std::size_t>(m));
  for (Index h = 0; h < m; ++h) {
    BoundCheck check;
    check.lhs = target_loss[h];
    check.rhs = report.eta_d +
                weights.dot((source_loss.row(h).transpose() + report.discrepancies).eval());
    check.satisfied = check.lhs <= check.rhs + 1e-9;
    report.per_hypothesis.push_back(check);
  }
  return report;
}

}  // namespace survadapt
