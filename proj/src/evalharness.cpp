#include "survadapt/evalharness.hpp"

#include "survadapt/rng.hpp"
#include "survadapt/survcore.hpp"
#include "survadapt/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace survadapt {

std::vector<Index> FoldPlan::fold_indices(int fold) const {
  std::vector<Index> indices;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) indices.push_back(static_cast<Index>(i));
  return indices;
}

FoldPlan kfold_split(const Cohort& cohort, int k, std::uint64_t seed) {
  const Index n = cohort.size();
  if (k < 2) throw SurvError(Err::ConfigInvalid, "fold count must be >= 2");
  if (n < k) throw SurvError(Err::TooFewRecords, "fewer records than folds");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  SplitRng rng(seed, 8200);
  rng.shuffle(order);

  FoldPlan plan;
  plan.k = k;
  plan.assignments.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    plan.assignments[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % k);
  return plan;
}

namespace {

// Twice the signed ranks keeps average ranks integral.
std::vector<long> double_ranks_of_magnitudes(const std::vector<Scalar>& magnitudes) {
  const std::size_t n = magnitudes.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return magnitudes[a] < magnitudes[b]; });
  std::vector<long> rank2(n, 0);
  std::size_t pos = 0;
  while (pos < n) {
    std::size_t end = pos;
    while (end + 1 < n && magnitudes[order[end + 1]] == magnitudes[order[pos]]) ++end;
    const long sum2 = static_cast<long>(pos + 1 + end + 1);  // lo + hi of the 1-based positions
    for (std::size_t j = pos; j <= end; ++j) rank2[order[j]] = sum2;
    pos = end + 1;
  }
  return rank2;
}

Scalar normal_upper_tail(Scalar z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

Scalar wilcoxon_upper(const std::vector<Scalar>& differences) {
  std::vector<Scalar> magnitudes;
  std::vector<bool> positive;
  for (Scalar d : differences) {
    if (d == 0.0) continue;
    magnitudes.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  const std::size_t n = magnitudes.size();
  if (n == 0) throw SurvError(Err::AllZeroDifferences, "no nonzero differences");

  const std::vector<long> rank2 = double_ranks_of_magnitudes(magnitudes);
  long w2 = 0;
  long total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (positive[i]) w2 += rank2[i];
  }

  if (n <= 20) {
    // Count sign assignments by a subset-sum table over the doubled ranks.
    std::vector<double> counts(static_cast<std::size_t>(total2) + 1, 0.0);
    counts[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = counts.size(); s-- > static_cast<std::size_t>(rank2[i]);)
        counts[s] += counts[s - static_cast<std::size_t>(rank2[i])];
    }
    double at_least = 0.0;
    for (std::size_t s = static_cast<std::size_t>(w2); s < counts.size(); ++s)
      at_least += counts[s];
    return at_least / std::pow(2.0, static_cast<double>(n));
  }

  const Scalar nn = static_cast<Scalar>(n);
  const Scalar w = static_cast<Scalar>(w2) / 2.0;
  const Scalar mean = nn * (nn + 1.0) / 4.0;
  Scalar variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  // Tie correction: subtract sum(t^3 - t)/48 over tie groups.
  std::vector<Scalar> sorted = magnitudes;
  std::sort(sorted.begin(), sorted.end());
  std::size_t pos = 0;
  while (pos < sorted.size()) {
    std::size_t end = pos;
    while (end + 1 < sorted.size() && sorted[end + 1] == sorted[pos]) ++end;
    const Scalar t = static_cast<Scalar>(end - pos + 1);
    variance -= (t * t * t - t) / 48.0;
    pos = end + 1;
  }
  const Scalar z = (w - mean - 0.5) / std::sqrt(variance);
  return normal_upper_tail(z);
}

TargetMetrics evaluate_scores(const Eigen::Ref<const Vector>& scores, const Cohort& target,
                              const std::vector<bool>& supervised_mask) {
  const Index n = target.size();
  if (scores.size() != n || static_cast<Index>(supervised_mask.size()) != n)
    throw SurvError(Err::LengthMismatch, "scores and mask must align with the target");
  const Vector times = target.times();  // rejects missing evaluation labels
  const IntVector events = target.events();

  std::vector<Index> heldout;
  for (Index i = 0; i < n; ++i)
    if (!supervised_mask[static_cast<std::size_t>(i)]) heldout.push_back(i);
  Vector ho_scores(static_cast<Index>(heldout.size()));
  Vector ho_times(static_cast<Index>(heldout.size()));
  IntVector ho_events(static_cast<Index>(heldout.size()));
  for (std::size_t j = 0; j < heldout.size(); ++j) {
    ho_scores[static_cast<Index>(j)] = scores[heldout[j]];
    ho_times[static_cast<Index>(j)] = times[heldout[j]];
    ho_events[static_cast<Index>(j)] = events[heldout[j]];
  }

  TargetMetrics metrics;
  metrics.c_index = c_index(ho_scores, ho_times, ho_events);
  metrics.c_index_prime = c_index_prime(scores, times, events, supervised_mask);
  return metrics;
}

TargetMetrics evaluate_target(const RiskModel& model, const Cohort& target,
                              const std::vector<bool>& supervised_mask) {
  const Vector scores = log_risk_batch(model, Head::H, target.feature_matrix());
  return evaluate_scores(scores, target, supervised_mask);
}

namespace {

std::optional<Scalar> median_of(std::vector<Scalar> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

RecommendationReport recommend_treatment(const RiskModel& model, const Cohort& target) {
  if (target.size() == 0) throw SurvError(Err::EmptyDataset, "recommendation needs records");
  if (target.dim() != model.input_dim())
    throw SurvError(Err::DimensionMismatch,
                    "target must carry the treatment covariate the model was trained with");
  for (const auto& record : target.records)
    if (record.treatment == Treatment::None)
      throw SurvError(Err::NoTreatmentLabels, "record without an administered treatment");

  const Index n = target.size();
  const Index arm_column = target.dim() - 1;
  Matrix as_p = target.feature_matrix();
  Matrix as_r = as_p;
  as_p.col(arm_column).setOnes();
  as_r.col(arm_column).setZero();
  const Vector risk_p = log_risk_batch(model, Head::H, as_p);
  const Vector risk_r = log_risk_batch(model, Head::H, as_r);

  RecommendationReport report;
  std::vector<Scalar> recom_times, anti_times;
  for (Index i = 0; i < n; ++i) {
    const auto& record = target.records[static_cast<std::size_t>(i)];
    PatientRecommendation patient;
    patient.rec_score = risk_p[i] - risk_r[i];
    patient.administered = record.treatment;
    if (patient.rec_score > 0.0)
      patient.recommended = Treatment::R;
    else if (patient.rec_score < 0.0)
      patient.recommended = Treatment::P;
    else
      patient.recommended = record.treatment;  // tie keeps the administered arm
    patient.group =
        patient.recommended == patient.administered ? RecGroup::Recom : RecGroup::Anti;
    if (record.event == 1 && record.time) {
      if (patient.group == RecGroup::Recom)
        recom_times.push_back(*record.time);
      else
        anti_times.push_back(*record.time);
    }
    report.per_patient.push_back(patient);
  }

  report.median_recom = median_of(std::move(recom_times));
  report.median_anti = median_of(std::move(anti_times));
  report.comparable = report.median_recom.has_value() && report.median_anti.has_value();
  report.success = report.comparable && *report.median_anti < *report.median_recom;
  return report;
}

Matrix weight_distance_matrix(const Eigen::Ref<const Matrix>& weight_rows) {
  const Index k = weight_rows.rows();
  if (weight_rows.cols() != k) throw SurvError(Err::MatrixInvalid, "weight matrix must be square");
  if (k < 3) throw SurvError(Err::KTooSmall, "need at least 3 domains");

  Matrix distances = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      Scalar sum = 0.0;
      for (Index c = 0; c < k; ++c) {
        if (c == i || c == j) continue;
        const Scalar diff = weight_rows(i, c) - weight_rows(j, c);
        sum += diff * diff;
      }
      distances(i, j) = distances(j, i) = std::sqrt(sum);
    }
  }
  return distances;
}

Dendrogram hierarchical_cluster(const Eigen::Ref<const Matrix>& distances) {
  const Index k = distances.rows();
  if (distances.cols() != k || k < 2)
    throw SurvError(Err::MatrixInvalid, "distance matrix must be square with k >= 2");
  for (Index i = 0; i < k; ++i) {
    if (distances(i, i) != 0.0)
      throw SurvError(Err::MatrixInvalid, "distance matrix diagonal must be zero");
    for (Index j = 0; j < k; ++j) {
      if (distances(i, j) < 0.0 || distances(i, j) != distances(j, i))
        throw SurvError(Err::MatrixInvalid, "distance matrix must be symmetric and nonnegative");
    }
  }

  struct Cluster {
    int id;
    Index size;
  };
  std::vector<Cluster> active;
  for (Index i = 0; i < k; ++i) active.push_back({static_cast<int>(i), 1});
  Matrix d = distances;

  Dendrogram dendrogram;
  dendrogram.leaves = static_cast<int>(k);
  int next_id = static_cast<int>(k);

  while (active.size() > 1) {
    std::size_t best_a = 0, best_b = 1;
    Scalar best = std::numeric_limits<Scalar>::infinity();
    int best_lo = 0, best_hi = 0;
    for (std::size_t a = 0; a + 1 < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const Scalar value = d(static_cast<Index>(a), static_cast<Index>(b));
        const int lo = std::min(active[a].id, active[b].id);
        const int hi = std::max(active[a].id, active[b].id);
        // Ties resolve to the smallest cluster-id pair.
        const bool better = value < best || (value == best && (lo < best_lo ||
                                             (lo == best_lo && hi < best_hi)));
        if (better) {
          best = value;
          best_a = a;
          best_b = b;
          best_lo = lo;
          best_hi = hi;
        }
      }
    }

    dendrogram.merges.push_back({best_lo, best_hi, best});
    const Scalar size_a = static_cast<Scalar>(active[best_a].size);
    const Scalar size_b = static_cast<Scalar>(active[best_b].size);

    // Average-linkage update into slot best_a, then drop slot best_b.
    for (std::size_t c = 0; c < active.size(); ++c) {
      if (c == best_a || c == best_b) continue;
      const Scalar merged =
          (size_a * d(static_cast<Index>(best_a), static_cast<Index>(c)) +
           size_b * d(static_cast<Index>(best_b), static_cast<Index>(c))) /
          (size_a + size_b);
      d(static_cast<Index>(best_a), static_cast<Index>(c)) = merged;
      d(static_cast<Index>(c), static_cast<Index>(best_a)) = merged;
    }
    active[best_a] = {next_id++, active[best_a].size + active[best_b].size};

    const Index last = static_cast<Index>(active.size()) - 1;
    if (static_cast<Index>(best_b) != last) {
      for (Index c = 0; c < static_cast<Index>(active.size()); ++c) {
        d(static_cast<Index>(best_b), c) = d(last, c);
        d(c, static_cast<Index>(best_b)) = d(c, last);
      }
      d(static_cast<Index>(best_b), static_cast<Index>(best_b)) = 0.0;
      active[best_b] = active[static_cast<std::size_t>(last)];
    }
    active.pop_back();
  }
  return dendrogram;
}

Vector rank_methods(const Eigen::Ref<const Matrix>& table) {
  const Index targets = table.rows();
  const Index methods = table.cols();
  if (targets < 1 || methods < 1)
    throw SurvError(Err::IncompleteTable, "table must be nonempty");
  if (!table.allFinite()) throw SurvError(Err::IncompleteTable, "table has missing cells");

  Vector mean_rank = Vector::Zero(methods);
  for (Index t = 0; t < targets; ++t) {
    for (Index m = 0; m < methods; ++m) {
      // Rank = 1 + count of strictly better methods + half the ties.
      Scalar better = 0.0, tied = 0.0;
      for (Index other = 0; other < methods; ++other) {
        if (other == m) continue;
        if (table(t, other) > table(t, m)) better += 1.0;
        if (table(t, other) == table(t, m)) tied += 1.0;
      }
      mean_rank[m] += 1.0 + better + 0.5 * tied;
    }
  }
  return mean_rank / static_cast<Scalar>(targets);
}

PcaModel pca_fit(const Eigen::Ref<const Matrix>& x, int n_components, std::uint64_t seed) {
  const Index n = x.rows();
  const Index d = x.cols();
  if (n < 2) throw SurvError(Err::TooFewRecords, "pca needs at least 2 rows");
  const Index k = std::min<Index>(n_components, d);
  if (k < 1) throw SurvError(Err::ConfigInvalid, "pca needs at least one component");

  PcaModel pca;
  pca.mean = x.colwise().mean();
  Matrix centered = x.rowwise() - pca.mean.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<Scalar>(n - 1);

  SplitRng rng(seed, 8400);
  pca.components.resize(d, k);
  for (Index c = 0; c < k; ++c) {
    Vector v(d);
    for (Index j = 0; j < d; ++j) v[j] = rng.next_normal();
    v.normalize();
    for (int iter = 0; iter < 500; ++iter) {
      Vector next = cov * v;
      const Scalar norm = next.norm();
      if (norm < 1e-300) break;  // remaining spectrum is numerically zero
      next /= norm;
      const Scalar drift = (next - v).norm();
      v = next;
      if (drift < 1e-13) break;
    }
    // Deterministic sign: largest-magnitude coordinate positive.
    Index arg_max = 0;
    v.cwiseAbs().maxCoeff(&arg_max);
    if (v[arg_max] < 0.0) v = -v;
    const Scalar eigenvalue = v.dot(cov * v);
    pca.components.col(c) = v;
    cov -= eigenvalue * v * v.transpose();
  }
  return pca;
}

Matrix pca_transform(const PcaModel& pca, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != pca.mean.size())
    throw SurvError(Err::DimensionMismatch, "pca input dimension mismatch");
  return (x.rowwise() - pca.mean.transpose()) * pca.components;
}

Scalar sample_std_error(const std::vector<Scalar>& values) {
  const std::size_t k = values.size();
  if (k < 2) return 0.0;
  Scalar mean = 0.0;
  for (Scalar v : values) mean += v;
  mean /= static_cast<Scalar>(k);
  Scalar ss = 0.0;
  for (Scalar v : values) ss += (v - mean) * (v - mean);
  const Scalar sd = std::sqrt(ss / static_cast<Scalar>(k - 1));
  return sd / std::sqrt(static_cast<Scalar>(k));
}

namespace {

Scalar mean_of(const std::vector<Scalar>& values) {
  Scalar sum = 0.0;
  for (Scalar v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<Scalar>(values.size());
}

}  // namespace

Scalar MetricsRow::mean_c_index() const { return mean_of(fold_c_index); }
Scalar MetricsRow::mean_c_index_prime() const { return mean_of(fold_c_index_prime); }
Scalar MetricsRow::std_error_c_index() const { return sample_std_error(fold_c_index); }
Scalar MetricsRow::std_error_c_index_prime() const {
  return sample_std_error(fold_c_index_prime);
}

void write_metrics_report(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurvError(Err::IoError, "cannot write " + path);
  out << "target,method,supervision,fold,c_index,c_index_prime\n";
  for (const auto& row : report.rows) {
    for (std::size_t fold = 0; fold < row.fold_c_index.size(); ++fold) {
      out << row.target_name << ',' << row.method_name << ',' << format_double(row.supervision)
          << ',' << fold << ',' << format_double(row.fold_c_index[fold]) << ','
          << format_double(row.fold_c_index_prime[fold]) << '\n';
    }
  }
  if (!out) throw SurvError(Err::IoError, "write failed for " + path);
}

void write_recommendation_report(const RecommendationReport& report,
                                 const std::string& target_name, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurvError(Err::IoError, "cannot write " + path);
  out << "target,patient_id,rec_score,recommended,administered,group\n";
  for (std::size_t i = 0; i < report.per_patient.size(); ++i) {
    const auto& p = report.per_patient[i];
    out << target_name << ',' << i << ',' << format_double(p.rec_score) << ','
        << (p.recommended == Treatment::P ? 'P' : 'R') << ','
        << (p.administered == Treatment::P ? 'P' : 'R') << ','
        << (p.group == RecGroup::Recom ? "RECOM" : "ANTI") << '\n';
  }
  if (!out) throw SurvError(Err::IoError, "write failed for " + path);
}

void write_distance_matrix(const std::vector<std::string>& names,
                           const Eigen::Ref<const Matrix>& distances, const std::string& path) {
  const Index k = distances.rows();
  if (static_cast<Index>(names.size()) != k)
    throw SurvError(Err::LengthMismatch, "names not aligned with the distance matrix");
  std::ofstream out(path);
  if (!out) throw SurvError(Err::IoError, "cannot write " + path);
  for (const auto& name : names) out << ',' << name;
  out << '\n';
  for (Index i = 0; i < k; ++i) {
    out << names[static_cast<std::size_t>(i)];
    for (Index j = 0; j < k; ++j) out << ',' << format_double(distances(i, j));
    out << '\n';
  }
  if (!out) throw SurvError(Err::IoError, "write failed for " + path);
}

void write_dendrogram(const Dendrogram& dendrogram, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurvError(Err::IoError, "cannot write " + path);
  for (const auto& merge : dendrogram.merges)
    out << "merge " << merge.left << ' ' << merge.right << " height "
        << format_double(merge.height) << '\n';
  if (!out) throw SurvError(Err::IoError, "write failed for " + path);
}

}  // namespace survadapt
