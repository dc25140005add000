#pragma once

#include "survadapt/nnet.hpp"
#include "survadapt/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace survadapt {

struct FoldPlan {
  int k;
  std::vector<int> assignments;  // per-record fold index

  std::vector<Index> fold_indices(int fold) const;
};

/// Deterministic shuffled partition into k near-equal folds.
FoldPlan kfold_split(const Cohort& cohort, int k, std::uint64_t seed);

/// Upper-tailed Wilcoxon signed-rank p-value for the hypothesis that the
/// differences are shifted above zero. Zero differences are dropped; ties in
/// magnitude get average ranks. Exact tail by sign-assignment counting for
/// n <= 20, normal approximation with continuity and tie corrections above.
Scalar wilcoxon_upper(const std::vector<Scalar>& differences);

struct TargetMetrics {
  Scalar c_index;        // held-out records only
  Scalar c_index_prime;  // whole target
};

/// Both concordance measures for a scored target: the plain one on records
/// outside the supervision mask, the primed one on the full cohort.
TargetMetrics evaluate_scores(const Eigen::Ref<const Vector>& scores, const Cohort& target,
                              const std::vector<bool>& supervised_mask);

/// Same, scoring with the model's H head.
TargetMetrics evaluate_target(const RiskModel& model, const Cohort& target,
                              const std::vector<bool>& supervised_mask);

enum class RecGroup { Recom, Anti };

struct PatientRecommendation {
  Scalar rec_score;        // log_risk(arm P) - log_risk(arm R)
  Treatment recommended;
  Treatment administered;
  RecGroup group;
};

struct RecommendationReport {
  std::vector<PatientRecommendation> per_patient;
  std::optional<Scalar> median_recom;  // over non-censored patients
  std::optional<Scalar> median_anti;
  bool comparable = false;  // both medians defined
  bool success = false;     // median_anti < median_recom
};

/// Counterfactual treatment scoring. The cohort must carry the treatment
/// arm as its last covariate (see augment_with_treatment) plus recorded
/// administered arms and observation times. Each patient is scored under
/// both arms; a positive rec_score means higher risk under P, so R is
/// recommended. Ties keep the administered arm.
RecommendationReport recommend_treatment(const RiskModel& model, const Cohort& target);

/// Pairwise Euclidean distances between weight rows after deleting
/// coordinates i and j from both rows of each pair (i, j).
Matrix weight_distance_matrix(const Eigen::Ref<const Matrix>& weight_rows);

struct Merge {
  int left;   // cluster ids; leaves are 0..K-1, merges K, K+1, ...
  int right;
  Scalar height;
};

struct Dendrogram {
  int leaves;
  std::vector<Merge> merges;
};

/// Agglomerative clustering with average linkage on a symmetric
/// dissimilarity matrix. Tied candidate pairs merge lowest cluster ids
/// first.
Dendrogram hierarchical_cluster(const Eigen::Ref<const Matrix>& distances);

/// Per-method mean rank over targets; rank 1 is the highest metric value,
/// tied values share the average rank. Rows are targets, columns methods.
Vector rank_methods(const Eigen::Ref<const Matrix>& table);

struct PcaModel {
  Vector mean;
  Matrix components;  // d x k, orthonormal columns
};

/// Leading principal components by power iteration with deflation on the
/// covariance matrix; deterministic given the seed.
PcaModel pca_fit(const Eigen::Ref<const Matrix>& x, int n_components, std::uint64_t seed);
Matrix pca_transform(const PcaModel& pca, const Eigen::Ref<const Matrix>& x);

// Report writers (formats shared with the command-line tool).

struct MetricsRow {
  std::string target_name;
  std::string method_name;
  Scalar supervision = 0.0;
  std::vector<Scalar> fold_c_index;
  std::vector<Scalar> fold_c_index_prime;

  Scalar mean_c_index() const;
  Scalar mean_c_index_prime() const;
  Scalar std_error_c_index() const;        // sample sd / sqrt(k)
  Scalar std_error_c_index_prime() const;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
};

void write_metrics_report(const MetricsReport& report, const std::string& path);
void write_recommendation_report(const RecommendationReport& report,
                                 const std::string& target_name, const std::string& path);
void write_distance_matrix(const std::vector<std::string>& names,
                           const Eigen::Ref<const Matrix>& distances, const std::string& path);
void write_dendrogram(const Dendrogram& dendrogram, const std::string& path);

Scalar sample_std_error(const std::vector<Scalar>& values);

}  // namespace survadapt
