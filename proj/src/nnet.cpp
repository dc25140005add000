#include "survadapt/nnet.hpp"

#include "survadapt/rankmetrics.hpp"
#include "survadapt/textio.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace survadapt {

namespace {

constexpr Scalar kExpCap = 1e6;
constexpr Scalar kUnionFloor = 1e-8;

struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // activation (with dropout mask applied)
};

const Matrix& features_of(const ForwardTrace& trace) {
  return trace.post.empty() ? trace.input : trace.post.back();
}

ForwardTrace forward_extractor(const MlpParams& extractor, const Eigen::Ref<const Matrix>& x,
                               const DropoutPlan* dropout) {
  ForwardTrace trace;
  trace.input = x;
  const Matrix* current = &trace.input;
  for (std::size_t l = 0; l < extractor.layers.size(); ++l) {
    const DenseLayer& layer = extractor.layers[l];
    Matrix pre = (*current) * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    Matrix post = pre.cwiseMax(0.0);
    if (dropout && !dropout->masks.empty())
      post = post.cwiseProduct(dropout->masks[l]);
    trace.pre.push_back(std::move(pre));
    trace.post.push_back(std::move(post));
    current = &trace.post.back();
  }
  return trace;
}

// Accumulates extractor gradients from d(loss)/d(features).
void backward_extractor(const MlpParams& extractor, const ForwardTrace& trace,
                        const Matrix& d_features, const DropoutPlan* dropout, ModelGrad& grads) {
  Matrix delta = d_features;
  for (std::size_t l = extractor.layers.size(); l-- > 0;) {
    if (dropout && !dropout->masks.empty()) delta = delta.cwiseProduct(dropout->masks[l]);
    delta = delta.cwiseProduct((trace.pre[l].array() > 0.0).cast<Scalar>().matrix());
    const Matrix& below = (l == 0) ? trace.input : trace.post[l - 1];
    grads.extractor[l].weight.noalias() += delta.transpose() * below;
    grads.extractor[l].bias += delta.colwise().sum().transpose();
    if (l > 0) delta = (delta * extractor.layers[l].weight).eval();
  }
}

Vector head_scores(const LinearHead& head, const Matrix& features) {
  return (features * head.weight).array() + head.bias;
}

struct SurrGrad {
  Scalar value;
  Scalar da;
  Scalar db;
};

// Value and partials of max(0, margin - min(exp(a-b), cap)).
SurrGrad surrogate_with_grad(Scalar a, Scalar b, Scalar margin) {
  const Scalar raw = std::exp(a - b);
  const bool capped = raw >= kExpCap;
  const Scalar e = capped ? kExpCap : raw;
  if (margin - e <= 0.0) return {0.0, 0.0, 0.0};
  const Scalar de = capped ? 0.0 : raw;
  return {margin - e, -de, de};
}

}  // namespace

std::vector<Index> RiskModel::hidden_widths() const {
  std::vector<Index> widths;
  for (const auto& layer : extractor.layers) widths.push_back(layer.weight.rows());
  return widths;
}

RiskModel init_model(Index input_dim, const std::vector<Index>& hidden, std::uint64_t seed) {
  if (input_dim < 1) throw SurvError(Err::ConfigInvalid, "input dimension must be >= 1");
  for (Index w : hidden)
    if (w < 1) throw SurvError(Err::ConfigInvalid, "hidden widths must be >= 1");

  SplitRng rng(seed);
  auto fill = [&rng](Matrix& m, Scalar bound) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = rng.next_uniform(-bound, bound);
  };

  RiskModel model;
  Index fan_in = input_dim;
  for (Index width : hidden) {
    DenseLayer layer;
    layer.weight.resize(width, fan_in);
    fill(layer.weight, 1.0 / std::sqrt(static_cast<Scalar>(fan_in)));
    layer.bias = Vector::Zero(width);
    model.extractor.layers.push_back(std::move(layer));
    fan_in = width;
  }
  const Scalar head_bound = 1.0 / std::sqrt(static_cast<Scalar>(fan_in));
  for (LinearHead* head : {&model.head_h, &model.head_hprime}) {
    head->weight.resize(fan_in);
    for (Index i = 0; i < fan_in; ++i) head->weight[i] = rng.next_uniform(-head_bound, head_bound);
    head->bias = 0.0;
  }
  return model;
}

Vector log_risk_batch(const RiskModel& model, Head head, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != model.input_dim())
    throw SurvError(Err::DimensionMismatch, "input dimension does not match model");
  const ForwardTrace trace = forward_extractor(model.extractor, x, nullptr);
  return head_scores(head == Head::H ? model.head_h : model.head_hprime, features_of(trace));
}

Scalar log_risk(const RiskModel& model, Head head, const Eigen::Ref<const Vector>& x) {
  return log_risk_batch(model, head, x.transpose())[0];
}

Scalar surrogate_indicator_less(Scalar a, Scalar b, Scalar margin) {
  if (margin <= 0.0) throw SurvError(Err::ConfigInvalid, "margin must be positive");
  return surrogate_with_grad(a, b, margin).value;
}

ModelGrad ModelGrad::zeros_like(const RiskModel& model) {
  ModelGrad g;
  for (const auto& layer : model.extractor.layers) {
    DenseLayer zero;
    zero.weight = Matrix::Zero(layer.weight.rows(), layer.weight.cols());
    zero.bias = Vector::Zero(layer.bias.size());
    g.extractor.push_back(std::move(zero));
  }
  g.head_h.weight = Vector::Zero(model.head_h.weight.size());
  g.head_h.bias = 0.0;
  g.head_hprime.weight = Vector::Zero(model.head_hprime.weight.size());
  g.head_hprime.bias = 0.0;
  return g;
}

void ModelGrad::add_scaled(const ModelGrad& other, Scalar factor) {
  for (std::size_t l = 0; l < extractor.size(); ++l) {
    extractor[l].weight += factor * other.extractor[l].weight;
    extractor[l].bias += factor * other.extractor[l].bias;
  }
  head_h.weight += factor * other.head_h.weight;
  head_h.bias += factor * other.head_h.bias;
  head_hprime.weight += factor * other.head_hprime.weight;
  head_hprime.bias += factor * other.head_hprime.bias;
}

void ModelGrad::scale(Scalar factor) {
  for (auto& layer : extractor) {
    layer.weight *= factor;
    layer.bias *= factor;
  }
  head_h.weight *= factor;
  head_h.bias *= factor;
  head_hprime.weight *= factor;
  head_hprime.bias *= factor;
}

Scalar ModelGrad::max_abs() const {
  Scalar m = std::max(std::abs(head_h.bias), std::abs(head_hprime.bias));
  if (head_h.weight.size() > 0) m = std::max(m, head_h.weight.cwiseAbs().maxCoeff());
  if (head_hprime.weight.size() > 0) m = std::max(m, head_hprime.weight.cwiseAbs().maxCoeff());
  for (const auto& layer : extractor) {
    m = std::max(m, layer.weight.cwiseAbs().maxCoeff());
    m = std::max(m, layer.bias.cwiseAbs().maxCoeff());
  }
  return m;
}

DropoutPlan make_dropout_plan(SplitRng& rng, Index n, const std::vector<Index>& hidden,
                              Scalar rate) {
  DropoutPlan plan;
  if (rate <= 0.0) return plan;
  if (rate >= 1.0) throw SurvError(Err::ConfigInvalid, "dropout rate must be < 1");
  const Scalar keep = 1.0 - rate;
  for (Index width : hidden) {
    Matrix mask(n, width);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < width; ++j)
        mask(i, j) = rng.next_uniform() < rate ? 0.0 : 1.0 / keep;
    plan.masks.push_back(std::move(mask));
  }
  return plan;
}

GradientTape surrogate_sdi(const RiskModel& model, const Cohort& cohort, Scalar margin,
                           const DropoutPlan* dropout) {
  if (cohort.size() == 0) throw SurvError(Err::EmptyDataset, "surrogate_sdi needs records");
  if (margin <= 0.0) throw SurvError(Err::ConfigInvalid, "margin must be positive");

  const Matrix x = cohort.feature_matrix();
  const ForwardTrace trace = forward_extractor(model.extractor, x, dropout);
  const Matrix& features = features_of(trace);
  const Vector u = head_scores(model.head_h, features);
  const Vector v = head_scores(model.head_hprime, features);

  const CensorSplit split = CensorSplit::from_events(cohort.events());
  const auto& ev = split.event_indices;
  const auto& ce = split.censored_indices;
  const Scalar n_ev = static_cast<Scalar>(ev.size());
  const Scalar n_ce = static_cast<Scalar>(ce.size());
  const Scalar alpha1 = n_ev * (n_ev - 1.0) / 2.0;
  const Scalar alpha2 = n_ev * n_ce / 2.0;
  const Scalar total = alpha1 + alpha2;

  GradientTape tape;
  tape.grads = ModelGrad::zeros_like(model);
  if (total <= 0.0) return tape;

  Vector du = Vector::Zero(u.size());
  Vector dv = Vector::Zero(v.size());
  Scalar value = 0.0;

  if (ev.size() >= 2) {
    const Scalar w1 = alpha1 / total / alpha1;  // term weight / pair count
    for (std::size_t p = 0; p + 1 < ev.size(); ++p) {
      for (std::size_t q = p + 1; q < ev.size(); ++q) {
        const Index i = ev[p];
        const Index j = ev[q];
        // (u_i < u_j and v_j < v_i) or (u_j < u_i and v_i < v_j)
        const SurrGrad a1 = surrogate_with_grad(u[i], u[j], margin);
        const SurrGrad b1 = surrogate_with_grad(v[j], v[i], margin);
        const SurrGrad a2 = surrogate_with_grad(u[j], u[i], margin);
        const SurrGrad b2 = surrogate_with_grad(v[i], v[j], margin);
        value += w1 * (a1.value * b1.value + a2.value * b2.value);
        du[i] += w1 * (a1.da * b1.value + a2.db * b2.value);
        du[j] += w1 * (a1.db * b1.value + a2.da * b2.value);
        dv[i] += w1 * (a1.value * b1.db + a2.value * b2.da);
        dv[j] += w1 * (a1.value * b1.da + a2.value * b2.db);
      }
    }
  }

  if (!ce.empty() && !ev.empty()) {
    const Scalar w2 = alpha2 / total / n_ce;
    const std::size_t m = ev.size();
    std::vector<SurrGrad> m1(m), m2(m);
    for (Index xi : ce) {
      // Soft set sizes: |C1 xor C2| -> sum |m1 - m2|, |C1 or C2| -> sum max.
      Scalar sym = 0.0, uni = 0.0;
      for (std::size_t e = 0; e < m; ++e) {
        m1[e] = surrogate_with_grad(u[xi], u[ev[e]], margin);
        m2[e] = surrogate_with_grad(v[xi], v[ev[e]], margin);
        sym += std::abs(m1[e].value - m2[e].value);
        uni += std::max(m1[e].value, m2[e].value);
      }
      const bool floored = uni <= kUnionFloor;
      const Scalar denom = floored ? kUnionFloor : uni;
      value += w2 * sym / denom;
      for (std::size_t e = 0; e < m; ++e) {
        const Scalar gap = m1[e].value - m2[e].value;
        const Scalar ds_dm1 = gap > 0.0 ? 1.0 : (gap < 0.0 ? -1.0 : 0.0);
        const Scalar ds_dm2 = -ds_dm1;
        Scalar dU_dm1 = 0.0, dU_dm2 = 0.0;
        if (!floored) {
          dU_dm1 = gap > 0.0 ? 1.0 : (gap == 0.0 ? 0.5 : 0.0);
          dU_dm2 = gap < 0.0 ? 1.0 : (gap == 0.0 ? 0.5 : 0.0);
        }
        const Scalar dd_dm1 = (ds_dm1 * denom - sym * dU_dm1) / (denom * denom);
        const Scalar dd_dm2 = (ds_dm2 * denom - sym * dU_dm2) / (denom * denom);
        du[xi] += w2 * dd_dm1 * m1[e].da;
        du[ev[e]] += w2 * dd_dm1 * m1[e].db;
        dv[xi] += w2 * dd_dm2 * m2[e].da;
        dv[ev[e]] += w2 * dd_dm2 * m2[e].db;
      }
    }
  }

  tape.value = value;
  tape.grads.head_h.weight = features.transpose() * du;
  tape.grads.head_h.bias = du.sum();
  tape.grads.head_hprime.weight = features.transpose() * dv;
  tape.grads.head_hprime.bias = dv.sum();
  if (!model.extractor.layers.empty()) {
    const Matrix d_features =
        du * model.head_h.weight.transpose() + dv * model.head_hprime.weight.transpose();
    backward_extractor(model.extractor, trace, d_features, dropout, tape.grads);
  }
  return tape;
}

GradientTape surrogate_partial_likelihood(const RiskModel& model, const Cohort& cohort,
                                          const DropoutPlan* dropout) {
  if (cohort.size() == 0)
    throw SurvError(Err::EmptyDataset, "partial likelihood needs records");
  const Vector times = cohort.times();
  const IntVector events = cohort.events();
  const Index n = cohort.size();

  bool any_event = false;
  for (Index i = 0; i < n; ++i) any_event |= events[i] == 1;
  if (!any_event) throw SurvError(Err::NoEvents, "partial likelihood needs at least one event");

  const Matrix x = cohort.feature_matrix();
  const ForwardTrace trace = forward_extractor(model.extractor, x, dropout);
  const Matrix& features = features_of(trace);
  const Vector u = head_scores(model.head_h, features);

  Scalar loss = 0.0;
  Vector du = Vector::Zero(n);
  for (Index o = 0; o < n; ++o) {
    if (events[o] != 1) continue;
    Scalar max_score = -std::numeric_limits<Scalar>::infinity();
    for (Index l = 0; l < n; ++l)
      if (times[l] >= times[o] && u[l] > max_score) max_score = u[l];
    Scalar sum_exp = 0.0;
    for (Index l = 0; l < n; ++l)
      if (times[l] >= times[o]) sum_exp += std::exp(u[l] - max_score);
    loss -= u[o] - (max_score + std::log(sum_exp));
    du[o] -= 1.0;
    for (Index l = 0; l < n; ++l)
      if (times[l] >= times[o]) du[l] += std::exp(u[l] - max_score) / sum_exp;
  }

  GradientTape tape;
  tape.value = loss;
  tape.grads = ModelGrad::zeros_like(model);
  tape.grads.head_h.weight = features.transpose() * du;
  tape.grads.head_h.bias = du.sum();
  if (!model.extractor.layers.empty()) {
    const Matrix d_features = du * model.head_h.weight.transpose();
    backward_extractor(model.extractor, trace, d_features, dropout, tape.grads);
  }
  return tape;
}

namespace {

void write_tensor(std::ostream& out, const std::string& name, const Matrix& tensor) {
  out << "tensor " << name << ' ' << tensor.rows() << ' ' << tensor.cols() << '\n';
  for (Index r = 0; r < tensor.rows(); ++r) {
    for (Index c = 0; c < tensor.cols(); ++c) {
      if (c > 0) out << ' ';
      out << format_double(tensor(r, c));
    }
    out << '\n';
  }
}

Matrix read_tensor(std::istream& in, const std::string& expected_name) {
  std::string line;
  if (!std::getline(in, line)) throw SurvError(Err::ParseError, "missing tensor header");
  std::istringstream header(line);
  std::string keyword, name;
  Index rows = 0, cols = 0;
  header >> keyword >> name >> rows >> cols;
  if (keyword != "tensor" || name != expected_name || rows < 1 || cols < 1)
    throw SurvError(Err::ParseError, "bad tensor header, expected " + expected_name);
  Matrix tensor(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw SurvError(Err::ParseError, "truncated tensor " + name);
    std::istringstream row(line);
    std::string cell;
    for (Index c = 0; c < cols; ++c) {
      if (!(row >> cell)) throw SurvError(Err::ParseError, "short row in tensor " + name);
      double value;
      if (!parse_double(cell, value))
        throw SurvError(Err::ParseError, "bad value in tensor " + name);
      tensor(r, c) = value;
    }
  }
  return tensor;
}

}  // namespace

void save_model(const RiskModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurvError(Err::IoError, "cannot write " + path);
  out << "survadapt-model v1\n";
  out << "dims " << model.input_dim();
  for (Index w : model.hidden_widths()) out << ' ' << w;
  out << '\n';
  for (std::size_t l = 0; l < model.extractor.layers.size(); ++l) {
    const auto& layer = model.extractor.layers[l];
    write_tensor(out, "extractor.layer" + std::to_string(l) + ".weight", layer.weight);
    write_tensor(out, "extractor.layer" + std::to_string(l) + ".bias", layer.bias);
  }
  write_tensor(out, "head_h.weight", model.head_h.weight.transpose());
  write_tensor(out, "head_h.bias", Matrix::Constant(1, 1, model.head_h.bias));
  write_tensor(out, "head_hprime.weight", model.head_hprime.weight.transpose());
  write_tensor(out, "head_hprime.bias", Matrix::Constant(1, 1, model.head_hprime.bias));
  if (!out) throw SurvError(Err::IoError, "write failed for " + path);
}

RiskModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SurvError(Err::IoError, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "survadapt-model v1")
    throw SurvError(Err::ParseError, "not a survadapt model file: " + path);
  if (!std::getline(in, line)) throw SurvError(Err::ParseError, "missing dims line");
  std::istringstream dims(line);
  std::string keyword;
  dims >> keyword;
  if (keyword != "dims") throw SurvError(Err::ParseError, "missing dims line");
  std::vector<Index> sizes;
  Index value;
  while (dims >> value) sizes.push_back(value);
  if (sizes.empty()) throw SurvError(Err::ParseError, "dims line needs the input dimension");

  RiskModel model;
  Index fan_in = sizes[0];
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    DenseLayer layer;
    layer.weight = read_tensor(in, "extractor.layer" + std::to_string(l - 1) + ".weight");
    layer.bias = read_tensor(in, "extractor.layer" + std::to_string(l - 1) + ".bias");
    if (layer.weight.rows() != sizes[l] || layer.weight.cols() != fan_in ||
        layer.bias.rows() != sizes[l] || layer.bias.cols() != 1)
      throw SurvError(Err::ParseError, "layer shape does not match dims");
    model.extractor.layers.push_back(std::move(layer));
    fan_in = sizes[l];
  }
  const Matrix wh = read_tensor(in, "head_h.weight");
  const Matrix bh = read_tensor(in, "head_h.bias");
  const Matrix wp = read_tensor(in, "head_hprime.weight");
  const Matrix bp = read_tensor(in, "head_hprime.bias");
  if (wh.rows() != 1 || wh.cols() != fan_in || wp.rows() != 1 || wp.cols() != fan_in)
    throw SurvError(Err::ParseError, "head shape does not match dims");
  model.head_h.weight = wh.transpose();
  model.head_h.bias = bh(0, 0);
  model.head_hprime.weight = wp.transpose();
  model.head_hprime.bias = bp(0, 0);
  return model;
}

}  // namespace survadapt
