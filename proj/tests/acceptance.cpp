// Acceptance suite: every release criterion in one binary, one PASS/FAIL
// line each. Returns nonzero if any criterion fails.
//
// Build and run:   cmake --build build && ./build/tests/acceptance

#include "survadapt/adapt.hpp"
#include "survadapt/dataio.hpp"
#include "survadapt/evalharness.hpp"
#include "survadapt/nnet.hpp"
#include "survadapt/rankmetrics.hpp"
#include "survadapt/survcore.hpp"

#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

using namespace survadapt;

namespace {

int g_failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(const std::string& name, bool passed, double seconds, double budget_s,
            const std::string& detail) {
  const bool in_budget = seconds < budget_s;
  const bool ok = passed && in_budget;
  if (!ok) ++g_failures;
  std::printf("[%s] %s (%.2fs of %.0fs budget)%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
              seconds, budget_s, detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
}

struct SdiInstance {
  Vector s1, s2, s3;
  IntVector events;
};

SdiInstance random_sdi_instance(SplitRng& rng) {
  SdiInstance inst;
  const Index n = 1 + static_cast<Index>(rng.next_below(12));
  inst.s1 = testsup::distinct_scores(rng, n);
  inst.s2 = testsup::distinct_scores(rng, n);
  inst.s3 = testsup::distinct_scores(rng, n);
  inst.events = testsup::random_events(rng, n, rng.next_uniform(0.0, 0.5));
  return inst;
}

// --------------------------------------------------------------------------

void criterion_sdi_axioms() {
  Timer timer;
  SplitRng rng(1001);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 1500 && ok; ++trial) {
    const SdiInstance inst = random_sdi_instance(rng);
    const Scalar d12 = sdi(inst.s1, inst.s2, inst.events);
    const Scalar d21 = sdi(inst.s2, inst.s1, inst.events);
    const Scalar d13 = sdi(inst.s1, inst.s3, inst.events);
    const Scalar d23 = sdi(inst.s2, inst.s3, inst.events);
    if (d12 != d21) { ok = false; detail = "symmetry violated"; }
    if (sdi(inst.s1, inst.s1, inst.events) != 0.0) { ok = false; detail = "identity violated"; }
    if (d12 < 0.0 || d12 > 1.0) { ok = false; detail = "range violated"; }
    if (d13 > d12 + d23 + 1e-12) { ok = false; detail = "triangle inequality violated"; }
  }
  report("SDI metric axioms (1500 random instances)", ok, timer.seconds(), 10.0, detail);
}

void criterion_sdi_oracle() {
  Timer timer;
  SplitRng rng(1002);
  Scalar worst = 0.0;
  for (int trial = 0; trial < 1500; ++trial) {
    const SdiInstance inst = random_sdi_instance(rng);
    worst = std::max(worst, std::abs(sdi(inst.s1, inst.s2, inst.events) -
                                     sdi_decomposed_oracle(inst.s1, inst.s2, inst.events)));
  }
  char detail[48];
  std::snprintf(detail, sizeof(detail), "max gap %.2e", worst);
  report("SDI decomposition oracle agreement", worst <= 1e-12, timer.seconds(), 10.0, detail);
}

void criterion_kendall_reduction() {
  Timer timer;
  bool ok = true;
  long pairs = 0;
  for (int n = 2; n <= 6 && ok; ++n) {
    const auto perms = testsup::all_permutations(n);
    IntVector events(n);
    events.setOnes();
    Vector a(n), b(n);
    for (const auto& p : perms) {
      for (int i = 0; i < n; ++i) a[i] = static_cast<Scalar>(p[static_cast<std::size_t>(i)]);
      for (const auto& q : perms) {
        for (int i = 0; i < n; ++i) b[i] = static_cast<Scalar>(q[static_cast<std::size_t>(i)]);
        ++pairs;
        if (sdi(a, b, events) != kendall_tau_distance(a, b)) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
  }
  report("SDI equals Kendall distance on all permutation pairs n<=6", ok, timer.seconds(), 60.0,
         std::to_string(pairs) + " pairs checked");
}

void criterion_cindex_auc() {
  Timer timer;
  SplitRng rng(1004);
  bool ok = true;
  int checked = 0;
  while (checked < 100) {
    const Index n = 4 + static_cast<Index>(rng.next_below(27));
    std::vector<int> labels(static_cast<std::size_t>(n));
    int positives = 0;
    for (auto& l : labels) positives += l = rng.next_uniform() < 0.5 ? 1 : 0;
    if (positives == 0 || positives == static_cast<int>(labels.size())) continue;
    const Vector scores = testsup::distinct_scores(rng, n);
    Vector times(n);
    IntVector events(n);
    for (Index i = 0; i < n; ++i) {
      times[i] = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : 2.0;
      events[i] = 1;
    }
    if (c_index(scores, times, events) != testsup::brute_auc(scores, labels)) {
      ok = false;
      break;
    }
    ++checked;
  }
  report("C-index equals brute-force AUC on binary instances", ok, timer.seconds(), 10.0,
         std::to_string(checked) + " instances");
}

void criterion_pair_accounting() {
  Timer timer;
  const PairAccounting accounting = pair_accounting(100, 40, 0.25);
  report("pair accounting: quarter supervision reuses 6.25% exactly",
         accounting.reused_fraction == 0.0625, timer.seconds(), 5.0, "");
}

// Central finite differences over every parameter of the model.
bool gradient_check(RiskModel& model, const std::function<GradientTape(const RiskModel&)>& loss,
                    Scalar tolerance, Scalar& worst) {
  const GradientTape tape = loss(model);
  std::vector<Scalar> analytic;
  for (const auto& layer : tape.grads.extractor) {
    for (Index i = 0; i < layer.weight.size(); ++i) analytic.push_back(layer.weight.data()[i]);
    for (Index i = 0; i < layer.bias.size(); ++i) analytic.push_back(layer.bias.data()[i]);
  }
  for (const LinearHead* head : {&tape.grads.head_h, &tape.grads.head_hprime}) {
    for (Index i = 0; i < head->weight.size(); ++i) analytic.push_back(head->weight.data()[i]);
    analytic.push_back(head->bias);
  }
  std::vector<Scalar*> ptrs;
  for (auto& layer : model.extractor.layers) {
    for (Index i = 0; i < layer.weight.size(); ++i) ptrs.push_back(layer.weight.data() + i);
    for (Index i = 0; i < layer.bias.size(); ++i) ptrs.push_back(layer.bias.data() + i);
  }
  for (LinearHead* head : {&model.head_h, &model.head_hprime}) {
    for (Index i = 0; i < head->weight.size(); ++i) ptrs.push_back(head->weight.data() + i);
    ptrs.push_back(&head->bias);
  }

  const Scalar step = 1e-5;
  for (std::size_t p = 0; p < ptrs.size(); ++p) {
    const Scalar saved = *ptrs[p];
    *ptrs[p] = saved + step;
    const Scalar up = loss(model).value;
    *ptrs[p] = saved - step;
    const Scalar down = loss(model).value;
    *ptrs[p] = saved;
    const Scalar fd = (up - down) / (2.0 * step);
    const Scalar err =
        std::abs(fd - analytic[p]) / std::max(1.0, std::abs(fd) + std::abs(analytic[p]));
    worst = std::max(worst, err);
    if (err >= tolerance) return false;
  }
  return true;
}

void criterion_gradient_checks() {
  Timer timer;
  SplitRng rng(1006);
  bool ok = true;
  Scalar worst = 0.0;
  for (int trial = 0; trial < 20 && ok; ++trial) {
    RiskModel model = init_model(5, {8, 4}, rng.next_u64());
    for (auto& layer : model.extractor.layers)
      for (Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = 0.1 * rng.next_normal();
    model.head_h.bias = 0.1 * rng.next_normal();
    model.head_hprime.bias = 0.1 * rng.next_normal();

    const Index n = 8 + static_cast<Index>(rng.next_below(9));
    Cohort cohort;
    cohort.role = CohortRole::Source;
    for (Index i = 0; i < n; ++i) {
      SurvivalRecord record;
      record.features.resize(5);
      for (Index j = 0; j < 5; ++j) record.features[j] = rng.next_normal();
      record.event = rng.next_uniform() < 0.35 ? 0 : 1;
      record.time = rng.next_uniform(0.1, 8.0);
      cohort.records.push_back(std::move(record));
    }
    cohort.records.front().event = 1;

    ok = gradient_check(model, [&](const RiskModel& m) { return surrogate_sdi(m, cohort, 1.0); },
                        1e-4, worst) &&
         gradient_check(model,
                        [&](const RiskModel& m) { return surrogate_partial_likelihood(m, cohort); },
                        1e-4, worst);
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "worst relative error %.2e", worst);
  report("surrogate gradients match finite differences (20 models)", ok, timer.seconds(), 30.0,
         detail);
}

void criterion_target_bound() {
  Timer timer;
  SplitRng rng(1007);
  bool ok = true;
  int hypotheses_checked = 0;
  for (int instance = 0; instance < 20 && ok; ++instance) {
    const Index dim = 4;
    HypothesisSet set;
    for (int h = 0; h < 50; ++h) {
      Vector beta(dim);
      for (Index j = 0; j < dim; ++j) beta[j] = rng.next_normal();
      set.rankers.push_back(
          [beta](const Eigen::Ref<const Vector>& x) -> Scalar { return beta.dot(x); });
    }
    auto make_scored = [&](Scalar shift) {
      Cohort cohort;
      cohort.role = CohortRole::Target;
      Vector truth(30);
      for (Index i = 0; i < 30; ++i) {
        SurvivalRecord record;
        record.features.resize(dim);
        for (Index j = 0; j < dim; ++j) record.features[j] = rng.next_normal() + shift;
        record.event = rng.next_uniform() < 0.4 ? 0 : 1;
        truth[i] = rng.next_normal();
        cohort.records.push_back(std::move(record));
      }
      return ScoredCohort{std::move(cohort), std::move(truth)};
    };
    const std::vector<ScoredCohort> sources = {make_scored(0.0),
                                               make_scored(rng.next_uniform(-1.0, 1.0))};
    const ScoredCohort target = make_scored(rng.next_uniform(0.5, 1.5));
    Vector weights(2);
    weights << rng.next_uniform(0.05, 1.0), rng.next_uniform(0.05, 1.0);
    weights /= weights.sum();

    const BoundReport bound = verify_target_bound(set, sources, target, weights);
    hypotheses_checked += static_cast<int>(bound.per_hypothesis.size());
    ok = bound.all_satisfied();
  }
  report("target generalization bound holds for every hypothesis", ok, timer.seconds(), 120.0,
         std::to_string(hypotheses_checked) + " hypothesis checks");
}

TrainConfig benchmark_config(std::uint64_t seed, Scalar lambda1) {
  TrainConfig config;
  config.lambda1 = lambda1;
  config.lambda2 = 0.01;
  config.learning_rate = 0.01;
  config.epochs = 20;
  config.batch_size = 32;
  config.hidden = {32, 16};
  config.margin = 1.0;
  config.dropout = 0.12;
  config.seed = seed;
  return config;
}

SynthConfig benchmark_data(std::uint64_t seed, bool with_treatment) {
  SynthConfig config;
  config.n_domains = 3;
  config.n_per_domain = 400;
  config.dim = 10;
  config.censor_fraction = 0.3;
  config.shift_scale = 1.0;
  config.seed = seed;
  config.with_treatment = with_treatment;
  config.treatment_hazard_multiplier_r = with_treatment ? 0.5 : 1.0;
  return config;
}

Scalar target_c_index(const RiskModel& model, const Cohort& labeled_target) {
  const std::vector<bool> mask(static_cast<std::size_t>(labeled_target.size()), false);
  return evaluate_target(model, labeled_target, mask).c_index;
}

void criterion_adaptation_gain() {
  Timer timer;
  Scalar adapted_sum = 0.0, ablated_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticData data = generate_domains(benchmark_data(seed, false));
    const TrainResult adapted = train_mssda(data.sources, data.target,
                                            benchmark_config(seed, 12.0));
    const TrainResult ablated = train_mssda(data.sources, data.target,
                                            benchmark_config(seed, 0.0));
    adapted_sum += target_c_index(adapted.model, data.target_labeled);
    ablated_sum += target_c_index(ablated.model, data.target_labeled);
  }
  const Scalar adapted_mean = adapted_sum / 5.0;
  const Scalar ablated_mean = ablated_sum / 5.0;
  const Scalar gain = adapted_mean - ablated_mean;
  char detail[160];
  std::snprintf(detail, sizeof(detail), "adapted %.4f vs ablated %.4f, gain %.4f", adapted_mean,
                ablated_mean, gain);
  report("adaptation gain on the shifted-target benchmark",
         gain >= 0.02 && adapted_mean > 0.55 && ablated_mean > 0.55, timer.seconds(), 300.0,
         detail);
}

void criterion_duplicate_source_symmetry() {
  Timer timer;
  int close = 0;
  Scalar worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticData data = generate_domains(benchmark_data(seed, false));
    const std::vector<Cohort> sources = {data.sources[0], data.sources[0], data.sources[1]};
    const TrainResult result = train_mssda(sources, data.target, benchmark_config(seed, 12.0));
    const Scalar gap = std::abs(result.weights[0] - result.weights[1]);
    worst = std::max(worst, gap);
    if (gap <= 0.1) ++close;
  }
  report("duplicated sources earn matching weights", close >= 4, timer.seconds(), 300.0,
         std::to_string(close) + "/5 seeds within 0.1, worst gap " + std::to_string(worst));
}

void criterion_treatment_recommendation() {
  Timer timer;
  int successes = 0;
  bool arm_match = true;
  Scalar worst_match = 1.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticData data = generate_domains(benchmark_data(seed, true));
    std::vector<Cohort> sources;
    for (const auto& s : data.sources) sources.push_back(augment_with_treatment(s));
    const Cohort target = augment_with_treatment(data.target);
    const TrainResult result = train_mssda(sources, target, benchmark_config(seed, 12.0));

    const Cohort eval_target = augment_with_treatment(data.target_labeled);
    const RecommendationReport recs = recommend_treatment(result.model, eval_target);
    // Arm R halves the hazard, so R is the beneficial arm for everyone.
    Index recommended_r = 0;
    for (const auto& p : recs.per_patient)
      if (p.recommended == Treatment::R) ++recommended_r;
    const Scalar match = static_cast<Scalar>(recommended_r) /
                         static_cast<Scalar>(recs.per_patient.size());
    worst_match = std::min(worst_match, match);
    arm_match = arm_match && match > 0.8;
    if (recs.comparable && recs.success) ++successes;
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "worst beneficial-arm match %.3f, success %d/5",
                worst_match, successes);
  report("treatment recommendation finds the beneficial arm", arm_match && successes >= 4,
         timer.seconds(), 180.0, detail);
}

void criterion_weight_explanation() {
  Timer timer;
  // Six domains in two duplicated groups; weight rows are group-identical up
  // to jitter far smaller than the cross-group gap.
  SplitRng rng(1011);
  const Index k = 6;
  auto build = [&rng, k]() {
    Matrix rows(k, k);
    for (Index i = 0; i < k; ++i) {
      const bool group_a = i < 3;
      for (Index j = 0; j < k; ++j) {
        if (i == j) {
          rows(i, j) = 0.0;
          continue;
        }
        const bool peer_a = j < 3;
        const Scalar base = group_a == peer_a ? 0.3 : 0.05;
        rows(i, j) = base + 1e-4 * rng.next_uniform();
      }
    }
    return rows;
  };
  const Matrix rows = build();
  const Matrix distances = weight_distance_matrix(rows);
  const Dendrogram first = hierarchical_cluster(distances);
  const Dendrogram second = hierarchical_cluster(distances);

  auto group_of_cluster = [&](int id, const Dendrogram& tree) -> int {
    // 0 = within group A, 1 = within group B, 2 = mixed.
    std::vector<int> kind(static_cast<std::size_t>(k) + tree.merges.size());
    for (int leaf = 0; leaf < k; ++leaf) kind[static_cast<std::size_t>(leaf)] = leaf < 3 ? 0 : 1;
    for (std::size_t m = 0; m < tree.merges.size(); ++m) {
      const int left = kind[static_cast<std::size_t>(tree.merges[m].left)];
      const int right = kind[static_cast<std::size_t>(tree.merges[m].right)];
      kind[static_cast<std::size_t>(k) + m] = (left == right) ? left : 2;
    }
    return kind[static_cast<std::size_t>(id)];
  };

  bool ok = first.merges.size() == 5;
  // The first four merges stay inside one group; only the final merge mixes.
  for (std::size_t m = 0; ok && m + 1 < first.merges.size(); ++m)
    ok = group_of_cluster(static_cast<int>(k) + static_cast<int>(m), first) != 2;
  if (ok) ok = group_of_cluster(static_cast<int>(k) + 4, first) == 2;
  for (std::size_t m = 0; ok && m < first.merges.size(); ++m)
    ok = first.merges[m].left == second.merges[m].left &&
         first.merges[m].right == second.merges[m].right &&
         first.merges[m].height == second.merges[m].height;
  report("weight explanation clusters duplicated groups first", ok, timer.seconds(), 10.0, "");
}

// Full sign-assignment enumeration, the reference for the exact branch.
Scalar enumerate_wilcoxon(const std::vector<Scalar>& differences) {
  std::vector<Scalar> magnitudes;
  std::vector<bool> positive;
  for (Scalar d : differences) {
    if (d == 0.0) continue;
    magnitudes.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  const std::size_t n = magnitudes.size();
  std::vector<Scalar> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    Scalar below = 0.0, tied = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (magnitudes[j] < magnitudes[i]) below += 1.0;
      if (magnitudes[j] == magnitudes[i] && j != i) tied += 1.0;
    }
    ranks[i] = below + 1.0 + tied / 2.0;
  }
  Scalar observed = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (positive[i]) observed += ranks[i];
  long hits = 0;
  const long total = 1L << n;
  for (long mask = 0; mask < total; ++mask) {
    Scalar w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1L << i)) w += ranks[i];
    if (w >= observed) ++hits;
  }
  return static_cast<Scalar>(hits) / static_cast<Scalar>(total);
}

void criterion_wilcoxon() {
  Timer timer;
  bool ok = wilcoxon_upper({0.3, 1.2, 0.5, 2.0, 0.9}) == 0.03125;
  SplitRng rng(1012);
  for (int trial = 0; trial < 200 && ok; ++trial) {
    const std::size_t n = 1 + rng.next_below(12);
    std::vector<Scalar> diffs(n);
    bool any = false;
    for (auto& d : diffs) {
      d = rng.next_uniform(-2.0, 2.0);
      if (rng.next_uniform() < 0.25) d = std::round(d * 2.0) / 2.0;
      any |= d != 0.0;
    }
    if (!any) continue;
    ok = wilcoxon_upper(diffs) == enumerate_wilcoxon(diffs);
  }
  report("Wilcoxon exact tail equals full enumeration", ok, timer.seconds(), 30.0, "");
}

}  // namespace

int main() {
  criterion_sdi_axioms();
  criterion_sdi_oracle();
  criterion_kendall_reduction();
  criterion_cindex_auc();
  criterion_pair_accounting();
  criterion_gradient_checks();
  criterion_target_bound();
  criterion_adaptation_gain();
  criterion_duplicate_source_symmetry();
  criterion_treatment_recommendation();
  criterion_weight_explanation();
  criterion_wilcoxon();

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
