#pragma once

#include "survadapt/nnet.hpp"
#include "survadapt/rankmetrics.hpp"
#include "survadapt/types.hpp"

#include <cstdint>

namespace survadapt {

/// Exp-normalized simplex vector, max-subtracted for stability.
Vector softmax_weights(const Eigen::Ref<const Vector>& logits);

/// Simplex-constrained source weights, parameterized by free logits.
struct SourceWeights {
  Vector logits;

  explicit SourceWeights(Index k) : logits(Vector::Zero(k)) {}
  explicit SourceWeights(Vector l) : logits(std::move(l)) {}
  Vector weights() const { return softmax_weights(logits); }
};

struct TrainConfig {
  Scalar lambda1 = 1.0;   // discrepancy weight
  Scalar lambda2 = 0.01;  // weight-norm regularizer
  Scalar learning_rate = 0.001;
  int epochs = 20;
  int batch_size = 64;
  Scalar margin = 1.0;
  std::vector<Index> hidden = {200, 20};
  Scalar dropout = 0.05;
  std::uint64_t seed = 0;
  Scalar supervision_fraction = 0.0;
  int adversary_steps = 1;

  void validate() const;  // throws ConfigInvalid
};

/// Deterministic supervision split of a labeled target view: the selected
/// records keep their labels and are appended to every source during
/// training; the trainer's target view has all times withheld; held-out
/// evaluation covers the unselected remainder.
struct SupervisionSplit {
  Cohort labeled_subset;    // role Source, labels revealed
  Cohort unlabeled_target;  // full target, times stripped
  Cohort heldout_eval;      // target minus labeled subset, labels kept
  std::vector<bool> supervised_mask;
};

SupervisionSplit inject_supervision(const Cohort& target, Scalar fraction, std::uint64_t seed);

/// Objective value and gradients for one batch of the min-max game:
///   sum_i w_i * (-pl_i) - lambda1 * |sdi_t - sum_i w_i * sdi_i| - lambda2 * ||w||_2
/// The main player ascends this value through the extractor, the H head,
/// and the weight logits; the adversary head descends it (maximizing the
/// discrepancy term). Gradients are of the value itself for every group.
struct MssdaTapes {
  Scalar value = 0.0;
  Scalar source_pl = 0.0;     // weighted negative log partial likelihood
  Scalar discrepancy = 0.0;   // |sdi_t - sum_i w_i * sdi_i|
  ModelGrad main;             // extractor and H head; adversary entries zero
  Vector logit_grad;
  ModelGrad adversary;        // H' head only
};

struct MssdaDropout {
  std::vector<DropoutPlan> source_plans;
  DropoutPlan target_plan;
};

MssdaTapes mssda_objective(const RiskModel& model, const std::vector<Cohort>& sources,
                           const Cohort& target, const SourceWeights& weights,
                           const TrainConfig& config, const MssdaDropout* dropout = nullptr);

struct EpochStats {
  int epoch;
  Scalar source_pl_loss;
  Scalar discrepancy_term;
  Vector weights;
  int batch_resamples = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

struct TrainResult {
  RiskModel model;
  Vector weights;
  TrainHistory history;
};

/// Adversarial trainer. Per minibatch: the adversary head takes
/// adversary_steps descent steps on the objective, then the extractor, the
/// H head, and the logits take one ascent step. Batches are drawn from
/// per-epoch shuffled orders, one per domain; a source batch without any
/// event is skipped for the next window (counted in the history).
/// Deterministic given the seed. With lambda1 = 0 (or no target) the whole
/// adaptation machinery is bypassed and training reduces to weighted
/// partial-likelihood descent.
TrainResult train_mssda(const std::vector<Cohort>& sources, const Cohort& target,
                        const TrainConfig& config);

/// Proportional-hazards network on a single labeled source; identical code
/// path to train_mssda with one source and both lambdas zero.
RiskModel train_deepsurv_single(const Cohort& source, const TrainConfig& config);

/// Full-batch gradient descent of linear log-risk coefficients on the
/// negative log partial likelihood. Starts from zero.
Vector fit_cox_linear(const Cohort& source, Scalar learning_rate, int epochs);

/// Mean rank of each target record across the models' descending-score
/// rankings (rank 1 = highest score; per-model ties broken by record
/// index). Lower mean rank means higher aggregated risk.
Vector average_order_rank(const std::vector<HypothesisSet::Ranker>& models,
                          const Cohort& target);

}  // namespace survadapt
