#include "survadapt/adapt.hpp"

#include "survadapt/survcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace survadapt {

Vector softmax_weights(const Eigen::Ref<const Vector>& logits) {
  if (logits.size() == 0) throw SurvError(Err::ConfigInvalid, "softmax needs at least one logit");
  if (!logits.allFinite()) throw SurvError(Err::ConfigInvalid, "logits must be finite");
  const Scalar max_logit = logits.maxCoeff();
  // Floor the shifted logits so exp never underflows to an exact zero.
  Vector w = (logits.array() - max_logit).max(-700.0).exp();
  return w / w.sum();
}

void TrainConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0)
    throw SurvError(Err::ConfigInvalid, "lambda1 and lambda2 must be >= 0");
  if (learning_rate <= 0.0) throw SurvError(Err::ConfigInvalid, "learning rate must be > 0");
  if (epochs < 0) throw SurvError(Err::ConfigInvalid, "epochs must be >= 0");
  if (batch_size < 1) throw SurvError(Err::ConfigInvalid, "batch size must be >= 1");
  if (margin <= 0.0) throw SurvError(Err::ConfigInvalid, "margin must be > 0");
  if (dropout < 0.0 || dropout >= 1.0)
    throw SurvError(Err::ConfigInvalid, "dropout must be in [0, 1)");
  if (supervision_fraction < 0.0 || supervision_fraction >= 1.0)
    throw SurvError(Err::ConfigInvalid, "supervision fraction must be in [0, 1)");
  if (adversary_steps < 1) throw SurvError(Err::ConfigInvalid, "adversary steps must be >= 1");
  for (Index w : hidden)
    if (w < 1) throw SurvError(Err::ConfigInvalid, "hidden widths must be >= 1");
}

SupervisionSplit inject_supervision(const Cohort& target, Scalar fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw SurvError(Err::FractionOutOfRange, "supervision fraction must be in [0, 1)");
  const Index n = target.size();
  const Index n_labeled = static_cast<Index>(std::floor(fraction * static_cast<Scalar>(n)));

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  SplitRng rng(seed, 9100);
  rng.shuffle(order);
  std::vector<Index> selected(order.begin(), order.begin() + n_labeled);
  std::sort(selected.begin(), selected.end());

  SupervisionSplit split;
  split.supervised_mask.assign(static_cast<std::size_t>(n), false);
  split.labeled_subset.name = target.name + "_supervised";
  split.labeled_subset.role = CohortRole::Source;
  split.heldout_eval.name = target.name + "_heldout";
  split.heldout_eval.role = CohortRole::Target;
  split.unlabeled_target.name = target.name;
  split.unlabeled_target.role = CohortRole::Target;

  for (Index i : selected) split.supervised_mask[static_cast<std::size_t>(i)] = true;
  for (Index i = 0; i < n; ++i) {
    const auto& record = target.records[static_cast<std::size_t>(i)];
    if (split.supervised_mask[static_cast<std::size_t>(i)]) {
      if (!record.time)
        throw SurvError(Err::LabelError, "supervision selected a record without a time");
      split.labeled_subset.records.push_back(record);
    } else {
      split.heldout_eval.records.push_back(record);
    }
    SurvivalRecord hidden = record;
    hidden.time.reset();
    split.unlabeled_target.records.push_back(std::move(hidden));
  }
  return split;
}

namespace {

// Zeroes the gradient entries outside the given player's parameter group.
void keep_main_only(ModelGrad& g) {
  g.head_hprime.weight.setZero();
  g.head_hprime.bias = 0.0;
}

void keep_adversary_only(ModelGrad& g) {
  for (auto& layer : g.extractor) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  g.head_h.weight.setZero();
  g.head_h.bias = 0.0;
}

const DropoutPlan* plan_at(const MssdaDropout* dropout, std::size_t i) {
  if (!dropout || dropout->source_plans.size() <= i) return nullptr;
  return &dropout->source_plans[i];
}

}  // namespace

MssdaTapes mssda_objective(const RiskModel& model, const std::vector<Cohort>& sources,
                           const Cohort& target, const SourceWeights& weights,
                           const TrainConfig& config, const MssdaDropout* dropout) {
  if (sources.empty()) throw SurvError(Err::ConfigInvalid, "objective needs at least one source");
  const Index k = static_cast<Index>(sources.size());
  if (weights.logits.size() != k)
    throw SurvError(Err::ConfigInvalid, "weight logits not aligned with sources");

  const Vector w = weights.weights();
  const bool adapt = config.lambda1 > 0.0 && target.size() > 0;

  MssdaTapes tapes;
  tapes.main = ModelGrad::zeros_like(model);
  tapes.adversary = ModelGrad::zeros_like(model);
  tapes.logit_grad = Vector::Zero(k);

  Vector pl_values(k);
  Vector sdi_values = Vector::Zero(k);
  for (Index i = 0; i < k; ++i) {
    const auto& cohort = sources[static_cast<std::size_t>(i)];
    const GradientTape pl =
        surrogate_partial_likelihood(model, cohort, plan_at(dropout, static_cast<std::size_t>(i)));
    pl_values[i] = pl.value;
    tapes.main.add_scaled(pl.grads, -w[i]);
  }
  tapes.source_pl = w.dot(pl_values);
  tapes.value = -tapes.source_pl;

  Scalar sign = 0.0;
  if (adapt) {
    const GradientTape sdi_t =
        surrogate_sdi(model, target, config.margin, dropout ? &dropout->target_plan : nullptr);
    std::vector<GradientTape> sdi_s;
    sdi_s.reserve(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) {
      sdi_s.push_back(surrogate_sdi(model, sources[static_cast<std::size_t>(i)], config.margin,
                                    plan_at(dropout, static_cast<std::size_t>(i))));
      sdi_values[i] = sdi_s.back().value;
    }
    const Scalar delta = sdi_t.value - w.dot(sdi_values);
    tapes.discrepancy = std::abs(delta);
    sign = delta > 0.0 ? 1.0 : (delta < 0.0 ? -1.0 : 0.0);
    tapes.value -= config.lambda1 * tapes.discrepancy;

    // d(-lambda1 * |delta|)/d(params), for both heads and the extractor.
    ModelGrad disc = ModelGrad::zeros_like(model);
    disc.add_scaled(sdi_t.grads, -config.lambda1 * sign);
    for (Index i = 0; i < k; ++i)
      disc.add_scaled(sdi_s[static_cast<std::size_t>(i)].grads, config.lambda1 * sign * w[i]);
    ModelGrad disc_adv = disc;
    keep_main_only(disc);
    keep_adversary_only(disc_adv);
    tapes.main.add_scaled(disc, 1.0);
    tapes.adversary.add_scaled(disc_adv, 1.0);
  }

  const Scalar w_norm = w.norm();
  tapes.value -= config.lambda2 * w_norm;

  // Chain d(value)/d(w) through the softmax Jacobian.
  Vector dvalue_dw = -pl_values;
  if (adapt) dvalue_dw += config.lambda1 * sign * sdi_values;
  if (config.lambda2 > 0.0 && w_norm > 0.0) dvalue_dw -= (config.lambda2 / w_norm) * w;
  const Scalar mean_term = dvalue_dw.dot(w);
  for (Index j = 0; j < k; ++j) tapes.logit_grad[j] = w[j] * (dvalue_dw[j] - mean_term);

  keep_main_only(tapes.main);
  return tapes;
}

namespace {

struct BatchCursor {
  std::vector<Index> order;
  std::size_t cursor = 0;

  // Next window of up to `width` records, wrapping over the epoch order.
  std::vector<Index> next(std::size_t width) {
    std::vector<Index> batch;
    if (order.empty()) return batch;
    width = std::min(width, order.size());
    for (std::size_t j = 0; j < width; ++j)
      batch.push_back(order[(cursor + j) % order.size()]);
    cursor = (cursor + width) % order.size();
    return batch;
  }
};

Cohort subset(const Cohort& cohort, const std::vector<Index>& indices) {
  Cohort out;
  out.name = cohort.name;
  out.role = cohort.role;
  out.records.reserve(indices.size());
  for (Index i : indices) out.records.push_back(cohort.records[static_cast<std::size_t>(i)]);
  return out;
}

bool has_event(const Cohort& cohort) {
  for (const auto& record : cohort.records)
    if (record.event == 1) return true;
  return false;
}

std::vector<Index> shuffled_indices(Index n, SplitRng& rng) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);
  return order;
}

void apply_update(RiskModel& model, const ModelGrad& grad, Scalar step) {
  for (std::size_t l = 0; l < model.extractor.layers.size(); ++l) {
    model.extractor.layers[l].weight += step * grad.extractor[l].weight;
    model.extractor.layers[l].bias += step * grad.extractor[l].bias;
  }
  model.head_h.weight += step * grad.head_h.weight;
  model.head_h.bias += step * grad.head_h.bias;
  model.head_hprime.weight += step * grad.head_hprime.weight;
  model.head_hprime.bias += step * grad.head_hprime.bias;
}

}  // namespace

TrainResult train_mssda(const std::vector<Cohort>& sources, const Cohort& target,
                        const TrainConfig& config) {
  config.validate();
  if (sources.empty()) throw SurvError(Err::ConfigInvalid, "training needs at least one source");
  const Index d = sources.front().dim();
  for (const auto& s : sources) {
    s.validate();
    if (s.dim() != d) throw SurvError(Err::DimensionMismatch, "source dimensions differ");
    if (!has_event(s))
      throw SurvError(Err::NoEvents, "source '" + s.name + "' has no observed events");
  }
  const bool adapt = config.lambda1 > 0.0 && target.size() > 0;
  if (adapt && target.dim() != d)
    throw SurvError(Err::DimensionMismatch, "target dimension differs from sources");

  const Index k = static_cast<Index>(sources.size());
  RiskModel model = init_model(d, config.hidden, config.seed);
  SourceWeights weights(k);

  std::vector<SplitRng> source_shuffle;
  for (Index i = 0; i < k; ++i)
    source_shuffle.emplace_back(config.seed, 1000 + static_cast<std::uint64_t>(i));
  SplitRng target_shuffle(config.seed, 2000);
  SplitRng dropout_rng(config.seed, 3000);

  std::size_t max_source = 0;
  for (const auto& s : sources) max_source = std::max(max_source, s.records.size());
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, (max_source + batch - 1) / batch);

  const std::vector<Index> hidden = config.hidden;
  auto draw_plans = [&](const std::vector<Cohort>& src_batches, const Cohort& tgt_batch,
                        MssdaDropout& plans) {
    plans.source_plans.clear();
    for (const auto& b : src_batches)
      plans.source_plans.push_back(
          make_dropout_plan(dropout_rng, b.size(), hidden, config.dropout));
    if (adapt)
      plans.target_plan = make_dropout_plan(dropout_rng, tgt_batch.size(), hidden, config.dropout);
  };

  TrainResult result;
  result.history.epochs.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<BatchCursor> cursors(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i)
      cursors[static_cast<std::size_t>(i)].order =
          shuffled_indices(sources[static_cast<std::size_t>(i)].size(),
                           source_shuffle[static_cast<std::size_t>(i)]);
    BatchCursor target_cursor;
    if (adapt) target_cursor.order = shuffled_indices(target.size(), target_shuffle);

    EpochStats stats;
    stats.epoch = epoch;
    stats.source_pl_loss = 0.0;
    stats.discrepancy_term = 0.0;

    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      std::vector<Cohort> src_batches;
      src_batches.reserve(static_cast<std::size_t>(k));
      for (Index i = 0; i < k; ++i) {
        auto& cursor = cursors[static_cast<std::size_t>(i)];
        Cohort b = subset(sources[static_cast<std::size_t>(i)], cursor.next(batch));
        // A window without any event cannot feed the partial likelihood;
        // skip to the next window.
        std::size_t retries = cursor.order.size() / batch + 2;
        while (!has_event(b) && retries-- > 0) {
          ++stats.batch_resamples;
          b = subset(sources[static_cast<std::size_t>(i)], cursor.next(batch));
        }
        if (!has_event(b)) throw SurvError(Err::NoEvents, "no event in any batch window");
        src_batches.push_back(std::move(b));
      }
      Cohort tgt_batch;
      if (adapt) tgt_batch = subset(target, target_cursor.next(batch));

      if (adapt) {
        for (int a = 0; a < config.adversary_steps; ++a) {
          MssdaDropout plans;
          draw_plans(src_batches, tgt_batch, plans);
          const MssdaTapes tapes =
              mssda_objective(model, src_batches, tgt_batch, weights, config, &plans);
          apply_update(model, tapes.adversary, -config.learning_rate);
        }
      }

      MssdaDropout plans;
      draw_plans(src_batches, tgt_batch, plans);
      const MssdaTapes tapes =
          mssda_objective(model, src_batches, tgt_batch, weights, config, &plans);
      apply_update(model, tapes.main, config.learning_rate);
      weights.logits += config.learning_rate * tapes.logit_grad;

      stats.source_pl_loss += tapes.source_pl;
      stats.discrepancy_term += tapes.discrepancy;
    }

    stats.source_pl_loss /= static_cast<Scalar>(steps_per_epoch);
    stats.discrepancy_term /= static_cast<Scalar>(steps_per_epoch);
    stats.weights = weights.weights();
    result.history.epochs.push_back(std::move(stats));
  }

  result.model = std::move(model);
  result.weights = weights.weights();
  return result;
}

RiskModel train_deepsurv_single(const Cohort& source, const TrainConfig& config) {
  TrainConfig single = config;
  single.lambda1 = 0.0;
  single.lambda2 = 0.0;
  Cohort no_target;
  no_target.role = CohortRole::Target;
  return train_mssda({source}, no_target, single).model;
}

Vector fit_cox_linear(const Cohort& source, Scalar learning_rate, int epochs) {
  source.validate();
  if (learning_rate <= 0.0) throw SurvError(Err::ConfigInvalid, "learning rate must be > 0");
  if (epochs < 0) throw SurvError(Err::ConfigInvalid, "epochs must be >= 0");
  if (!has_event(source)) throw SurvError(Err::NoEvents, "cox fit needs at least one event");

  const Matrix x = source.feature_matrix();
  const Vector times = source.times();
  const IntVector events = source.events();
  const Index n = source.size();

  Vector beta = Vector::Zero(source.dim());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const Vector s = x * beta;
    Vector ds = Vector::Zero(n);
    for (Index o = 0; o < n; ++o) {
      if (events[o] != 1) continue;
      Scalar max_score = -std::numeric_limits<Scalar>::infinity();
      for (Index l = 0; l < n; ++l)
        if (times[l] >= times[o] && s[l] > max_score) max_score = s[l];
      Scalar sum_exp = 0.0;
      for (Index l = 0; l < n; ++l)
        if (times[l] >= times[o]) sum_exp += std::exp(s[l] - max_score);
      ds[o] -= 1.0;
      for (Index l = 0; l < n; ++l)
        if (times[l] >= times[o]) ds[l] += std::exp(s[l] - max_score) / sum_exp;
    }
    beta -= learning_rate * (x.transpose() * ds);
  }
  return beta;
}

Vector average_order_rank(const std::vector<HypothesisSet::Ranker>& models,
                          const Cohort& target) {
  if (models.empty()) throw SurvError(Err::ConfigInvalid, "rank aggregation needs a model");
  if (target.size() == 0) throw SurvError(Err::EmptyDataset, "rank aggregation needs records");

  const Index n = target.size();
  Vector mean_rank = Vector::Zero(n);
  for (const auto& model : models) {
    Vector scores(n);
    for (Index i = 0; i < n; ++i)
      scores[i] = model(target.records[static_cast<std::size_t>(i)].features);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    });
    for (std::size_t pos = 0; pos < order.size(); ++pos)
      mean_rank[order[pos]] += static_cast<Scalar>(pos + 1);
  }
  return mean_rank / static_cast<Scalar>(models.size());
}

}  // namespace survadapt
