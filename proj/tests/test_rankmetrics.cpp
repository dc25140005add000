#include "survadapt/rankmetrics.hpp"

#include "doctest.h"
#include "test_support.hpp"

#include <cmath>

using namespace survadapt;

namespace {

Vector vec(std::initializer_list<Scalar> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (Scalar x : values) v[i++] = x;
  return v;
}

IntVector flags(std::initializer_list<int> values) {
  IntVector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (int x : values) v[i++] = x;
  return v;
}

struct RandomInstance {
  Vector s1, s2, s3;
  IntVector events;
};

RandomInstance random_instance(SplitRng& rng, Index max_n) {
  RandomInstance inst;
  const Index n = 1 + static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(max_n)));
  inst.s1 = testsup::distinct_scores(rng, n);
  inst.s2 = testsup::distinct_scores(rng, n);
  inst.s3 = testsup::distinct_scores(rng, n);
  inst.events = testsup::random_events(rng, n, rng.next_uniform(0.0, 0.5));
  return inst;
}

}  // namespace

TEST_CASE("kendall_tau_distance on pinned rankings") {
  CHECK(kendall_tau_distance(vec({5, 1, 3}), vec({5, 1, 3})) == 0.0);
  CHECK(kendall_tau_distance(vec({1, 2}), vec({2, 1})) == 1.0);
  // Oracle: of the 6 pairs, exactly (0,1) and (2,3) flip.
  CHECK(testsup::brute_kendall(vec({1, 2, 3, 4}), vec({2, 1, 4, 3})) == doctest::Approx(1.0 / 3));
  CHECK(kendall_tau_distance(vec({1, 2, 3, 4}), vec({2, 1, 4, 3})) == 1.0 / 3);
}

TEST_CASE("kendall_tau_distance enforces preconditions") {
  CHECK_THROWS_AS(kendall_tau_distance(vec({1, 1, 2}), vec({1, 2, 3})), SurvError);
  CHECK_THROWS_AS(kendall_tau_distance(vec({1, 2}), vec({1, 2, 3})), SurvError);
  CHECK_THROWS_AS(kendall_tau_distance(vec({1}), vec({2})), SurvError);
}

TEST_CASE("kendall_tau_distance agrees with pair counting") {
  SplitRng rng(51);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.next_below(14));
    const Vector a = testsup::distinct_scores(rng, n);
    const Vector b = testsup::distinct_scores(rng, n);
    CHECK(kendall_tau_distance(a, b) == testsup::brute_kendall(a, b));
  }
}

TEST_CASE("risk_set membership") {
  const IntVector events = flags({1, 0, 1, 1, 0});
  const CensorSplit split = CensorSplit::from_events(events);
  REQUIRE(split.event_indices == std::vector<Index>{0, 2, 3});
  REQUIRE(split.censored_indices == std::vector<Index>{1, 4});

  // Event scores 0.1, 0.9, 0.5 against censored score 0.4.
  const Vector scores = vec({0.1, 0.4, 0.9, 0.5, 2.0});
  CHECK(risk_set(scores, split, 1) == std::vector<Index>{2, 3});
  CHECK(risk_set(scores, split, 4).empty());

  const Vector low = vec({2.0, 1.0, 3.0, 4.0, 9.0});
  CHECK(risk_set(low, split, 1) == std::vector<Index>{0, 2, 3});
  CHECK_THROWS_AS(risk_set(scores, split, 0), SurvError);
}

TEST_CASE("sdi pinned examples") {
  // Identical rankers.
  const Vector s = vec({0.3, 1.2, -0.5});
  CHECK(sdi(s, s, flags({1, 0, 1})) == 0.0);
  // No censoring, full reversal.
  CHECK(sdi(vec({3, 2, 1}), vec({1, 2, 3}), flags({1, 1, 1})) == 1.0);
  // One event, one censored: risk sets {event} vs empty.
  CHECK(sdi(vec({2, 1}), vec({0, 1}), flags({1, 0})) == 1.0);
  CHECK_THROWS_AS(sdi(Vector(), Vector(), IntVector()), SurvError);
}

TEST_CASE("sdi degenerate regimes") {
  // No events at all: no comparable structure.
  CHECK(sdi(vec({1, 2}), vec({2, 1}), flags({0, 0})) == 0.0);
  // Single event, no censored.
  CHECK(sdi(vec({1}), vec({5}), flags({1})) == 0.0);
  // Both risk sets empty for the censored record: distance 0.
  CHECK(sdi(vec({2, 1}), vec({3, 1}), flags({0, 1})) == 0.0);
  // Identical nonempty risk sets: distance 0.
  CHECK(sdi(vec({1, 2}), vec({1, 3}), flags({0, 1})) == 0.0);
}

TEST_CASE("sdi vanishes for order-equivalent rankers") {
  SplitRng rng(57);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.next_below(10));
    const Vector s = testsup::distinct_scores(rng, n);
    // Strictly increasing transforms keep every ordering and risk set.
    const Vector t = (s.array() * 2.5 + 7.0).matrix();
    const Vector u = s.array().exp().matrix();
    const IntVector events = testsup::random_events(rng, n, 0.4);
    CHECK(sdi(s, t, events) == 0.0);
    CHECK(sdi(s, u, events) == 0.0);
  }
}

TEST_CASE("sdi metric axioms over random instances") {
  SplitRng rng(52);
  int checked = 0;
  for (int trial = 0; trial < 1200; ++trial) {
    const RandomInstance inst = random_instance(rng, 12);
    const Scalar d12 = sdi(inst.s1, inst.s2, inst.events);
    const Scalar d21 = sdi(inst.s2, inst.s1, inst.events);
    const Scalar d13 = sdi(inst.s1, inst.s3, inst.events);
    const Scalar d23 = sdi(inst.s2, inst.s3, inst.events);
    CHECK(d12 == d21);
    CHECK(sdi(inst.s1, inst.s1, inst.events) == 0.0);
    CHECK(d12 >= 0.0);
    CHECK(d12 <= 1.0);
    CHECK(d13 <= d12 + d23 + 1e-12);
    ++checked;
  }
  CHECK(checked >= 1000);
}

TEST_CASE("sdi equals its decomposition oracle") {
  SplitRng rng(53);
  for (int trial = 0; trial < 1200; ++trial) {
    const RandomInstance inst = random_instance(rng, 12);
    CHECK(std::abs(sdi(inst.s1, inst.s2, inst.events) -
                   sdi_decomposed_oracle(inst.s1, inst.s2, inst.events)) <= 1e-12);
  }
}

TEST_CASE("sdi reduces to kendall distance without censoring") {
  for (int n = 2; n <= 5; ++n) {
    const auto perms = testsup::all_permutations(n);
    IntVector events(n);
    events.setOnes();
    for (const auto& p : perms) {
      for (const auto& q : perms) {
        Vector a(n), b(n);
        for (int i = 0; i < n; ++i) {
          a[i] = static_cast<Scalar>(p[static_cast<std::size_t>(i)]);
          b[i] = static_cast<Scalar>(q[static_cast<std::size_t>(i)]);
        }
        CHECK(sdi(a, b, events) == kendall_tau_distance(a, b));
      }
    }
  }
}

TEST_CASE("sdi all-censored input is vacuous for the oracle too") {
  const Vector a = vec({1, 2, 3});
  const Vector b = vec({3, 1, 2});
  CHECK(sdi_decomposed_oracle(a, b, flags({0, 0, 0})) == 0.0);
}

namespace {

Cohort cohort_from(const Matrix& features, const IntVector& events) {
  Cohort cohort;
  cohort.role = CohortRole::Target;
  for (Index i = 0; i < features.rows(); ++i) {
    SurvivalRecord record;
    record.features = features.row(i);
    record.event = events[i];
    cohort.records.push_back(std::move(record));
  }
  return cohort;
}

HypothesisSet linear_hypotheses(SplitRng& rng, Index dim, int count) {
  HypothesisSet set;
  for (int h = 0; h < count; ++h) {
    Vector beta(dim);
    for (Index j = 0; j < dim; ++j) beta[j] = rng.next_normal();
    set.rankers.push_back(
        [beta](const Eigen::Ref<const Vector>& x) -> Scalar { return beta.dot(x); });
  }
  return set;
}

Matrix random_features(SplitRng& rng, Index n, Index dim, Scalar shift) {
  Matrix x(n, dim);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j) x(i, j) = rng.next_normal() + shift;
  return x;
}

}  // namespace

TEST_CASE("empirical_discrepancy basic identities") {
  SplitRng rng(54);
  const Matrix x = random_features(rng, 6, 3, 0.0);
  const Cohort cohort = cohort_from(x, testsup::random_events(rng, 6, 0.4));
  HypothesisSet set = linear_hypotheses(rng, 3, 3);

  CHECK(empirical_discrepancy(set, cohort, cohort) == 0.0);

  HypothesisSet single;
  single.rankers.push_back(set.rankers.front());
  const Cohort other = cohort_from(random_features(rng, 5, 3, 1.0),
                                   testsup::random_events(rng, 5, 0.4));
  CHECK(empirical_discrepancy(single, cohort, other) == 0.0);

  HypothesisSet empty;
  CHECK_THROWS_AS(empirical_discrepancy(empty, cohort, other), SurvError);
}

TEST_CASE("empirical_discrepancy equals exhaustive pair maximum") {
  SplitRng rng(55);
  const Cohort sample_s =
      cohort_from(random_features(rng, 5, 3, 0.0), testsup::random_events(rng, 5, 0.3));
  const Cohort sample_t =
      cohort_from(random_features(rng, 5, 3, 1.5), testsup::random_events(rng, 5, 0.3));
  HypothesisSet set = linear_hypotheses(rng, 3, 2);

  // Oracle: enumerate the 4 ordered pairs directly.
  Scalar expected = 0.0;
  for (const auto& ha : set.rankers) {
    for (const auto& hb : set.rankers) {
      auto scores = [&](const Cohort& c, const HypothesisSet::Ranker& r) {
        Vector s(c.size());
        for (Index i = 0; i < c.size(); ++i) s[i] = r(c.records[static_cast<std::size_t>(i)].features);
        return s;
      };
      const Scalar on_s = sdi(scores(sample_s, ha), scores(sample_s, hb), sample_s.events());
      const Scalar on_t = sdi(scores(sample_t, ha), scores(sample_t, hb), sample_t.events());
      expected = std::max(expected, std::abs(on_s - on_t));
    }
  }
  CHECK(empirical_discrepancy(set, sample_s, sample_t) == expected);
  CHECK(empirical_discrepancy(set, sample_t, sample_s) == expected);
}

TEST_CASE("verify_target_bound degenerate and random cases") {
  SplitRng rng(56);
  const Index dim = 3;

  SUBCASE("target identical to the single source") {
    const Matrix x = random_features(rng, 8, dim, 0.0);
    const IntVector events = testsup::random_events(rng, 8, 0.3);
    Cohort cohort = cohort_from(x, events);
    Vector truth(8);
    for (Index i = 0; i < 8; ++i) truth[i] = rng.next_normal();
    HypothesisSet set = linear_hypotheses(rng, dim, 4);
    ScoredCohort scored{cohort, truth};
    const BoundReport report =
        verify_target_bound(set, {scored}, scored, vec({1.0}));
    CHECK(report.discrepancies[0] == 0.0);
    CHECK(report.all_satisfied());
  }

  SUBCASE("ground-truth ranker inside the hypothesis set gives eta_d 0") {
    const Matrix xs = random_features(rng, 8, dim, 0.0);
    const Matrix xt = random_features(rng, 8, dim, 0.7);
    Vector beta(dim);
    for (Index j = 0; j < dim; ++j) beta[j] = rng.next_normal();
    HypothesisSet set = linear_hypotheses(rng, dim, 3);
    set.rankers.push_back(
        [beta](const Eigen::Ref<const Vector>& x) -> Scalar { return beta.dot(x); });

    Cohort source = cohort_from(xs, testsup::random_events(rng, 8, 0.3));
    Cohort target = cohort_from(xt, testsup::random_events(rng, 8, 0.3));
    const ScoredCohort scored_s{source, xs * beta};
    const ScoredCohort scored_t{target, xt * beta};
    const BoundReport report =
        verify_target_bound(set, {scored_s}, scored_t, vec({1.0}));
    CHECK(report.eta_d == 0.0);
    CHECK(report.all_satisfied());
  }

  SUBCASE("random multi-source instances always satisfy the bound") {
    for (int trial = 0; trial < 5; ++trial) {
      HypothesisSet set = linear_hypotheses(rng, dim, 8);
      std::vector<ScoredCohort> sources;
      for (int s = 0; s < 2; ++s) {
        const Matrix x = random_features(rng, 10, dim, rng.next_uniform(-1.0, 1.0));
        Cohort cohort = cohort_from(x, testsup::random_events(rng, 10, 0.4));
        Vector truth(10);
        for (Index i = 0; i < 10; ++i) truth[i] = rng.next_normal();
        sources.push_back({std::move(cohort), std::move(truth)});
      }
      const Matrix xt = random_features(rng, 10, dim, 1.2);
      Cohort target = cohort_from(xt, testsup::random_events(rng, 10, 0.4));
      Vector truth_t(10);
      for (Index i = 0; i < 10; ++i) truth_t[i] = rng.next_normal();

      Vector w = vec({rng.next_uniform(0.1, 1.0), rng.next_uniform(0.1, 1.0)});
      w /= w.sum();
      const BoundReport report =
          verify_target_bound(set, sources, {std::move(target), std::move(truth_t)}, w);
      CHECK(report.all_satisfied());
      CHECK(report.per_hypothesis.size() == set.rankers.size());
    }
  }

  SUBCASE("weights off the simplex are rejected") {
    const Matrix x = random_features(rng, 6, dim, 0.0);
    Cohort cohort = cohort_from(x, testsup::random_events(rng, 6, 0.3));
    Vector truth(6);
    for (Index i = 0; i < 6; ++i) truth[i] = rng.next_normal();
    HypothesisSet set = linear_hypotheses(rng, dim, 2);
    const ScoredCohort scored{cohort, truth};
    CHECK_THROWS_AS(verify_target_bound(set, {scored}, scored, vec({0.7})), SurvError);
  }
}
