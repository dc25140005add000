#pragma once

#include "survadapt/rng.hpp"
#include "survadapt/types.hpp"

#include <cstdint>
#include <string>

namespace survadapt {

enum class Activation { ReLU };

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

struct MlpParams {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::ReLU;

  Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
};

struct LinearHead {
  Vector weight;
  Scalar bias = 0.0;
};

enum class Head { H, HPrime };

/// Feature extractor shared by two scalar scoring heads. log_risk(x) under a
/// head is head(extractor(x)); the risk itself is its exponential.
struct RiskModel {
  MlpParams extractor;
  LinearHead head_h;
  LinearHead head_hprime;

  // With no hidden layers the heads act on the raw covariates.
  Index input_dim() const {
    return extractor.layers.empty() ? head_h.weight.size() : extractor.input_dim();
  }
  Index feature_dim() const {
    return extractor.layers.empty() ? head_h.weight.size() : extractor.output_dim();
  }
  std::vector<Index> hidden_widths() const;
};

/// Deterministic initialization: weights uniform in +-1/sqrt(fan_in), biases
/// zero, drawn from a single seeded stream.
RiskModel init_model(Index input_dim, const std::vector<Index>& hidden, std::uint64_t seed);

Vector log_risk_batch(const RiskModel& model, Head head, const Eigen::Ref<const Matrix>& x);
Scalar log_risk(const RiskModel& model, Head head, const Eigen::Ref<const Vector>& x);

/// Margin-ranking surrogate for the indicator I[a < b]:
/// max(0, margin - exp(a - b)), with the exponential clamped at 1e6.
/// Nonincreasing in a - b; 0 once exp(a - b) reaches the margin.
Scalar surrogate_indicator_less(Scalar a, Scalar b, Scalar margin);

/// Gradients with shapes mirroring the model parameters.
struct ModelGrad {
  std::vector<DenseLayer> extractor;
  LinearHead head_h;
  LinearHead head_hprime;

  static ModelGrad zeros_like(const RiskModel& model);
  void add_scaled(const ModelGrad& other, Scalar factor);
  void scale(Scalar factor);
  Scalar max_abs() const;
};

struct GradientTape {
  Scalar value = 0.0;
  ModelGrad grads;
};

/// Inverted-dropout masks for one minibatch, one per hidden layer. An empty
/// plan disables dropout.
struct DropoutPlan {
  std::vector<Matrix> masks;  // n x width, entries 0 or 1/(1-rate)
};

DropoutPlan make_dropout_plan(SplitRng& rng, Index n, const std::vector<Index>& hidden,
                              Scalar rate);

/// Differentiable relaxation of the symmetric discordance index between the
/// two heads on one cohort: every order indicator becomes a margin-ranking
/// surrogate and risk-set cardinalities become soft membership sums (union
/// denominator floored at 1e-8).
GradientTape surrogate_sdi(const RiskModel& model, const Cohort& cohort, Scalar margin,
                           const DropoutPlan* dropout = nullptr);

/// Negative log partial likelihood of the H head's log-risks, with gradients
/// for the extractor and that head only.
GradientTape surrogate_partial_likelihood(const RiskModel& model, const Cohort& cohort,
                                          const DropoutPlan* dropout = nullptr);

/// Plain-text model persistence; exact round-trip of every parameter.
void save_model(const RiskModel& model, const std::string& path);
RiskModel load_model(const std::string& path);

}  // namespace survadapt
