#include "mkp/training/grad_check.hpp"

#include "mkp/core/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mkp {

namespace {

template <typename S>
Var<S> selected_loss(Graph<S>& g, const Model<S>& model, const GradCheckBatch& batch,
                     LossSelection terms, const std::vector<Matrix<S>>& targets) {
  Var<S> total;
  if (terms.irtm || terms.cla || terms.gen) {
    LossSelection keyphrase_terms = terms;
    keyphrase_terms.itm = false;
    total = triplet_batch_loss(g, model, batch.triplets, keyphrase_terms, {}, &targets).total;
  }
  if (terms.itm) {
    Var<S> itm = matching_batch_loss(g, model, batch.matching).total;
    if (itm.valid()) total = total.valid() ? add(total, itm) : itm;
  }
  if (!total.valid()) throw ConfigError("grad_check: the selected losses are empty for this batch");
  return total;
}

// Flat element indices over the whole store; a seeded subsample when the
// store is larger than the cap.
std::vector<std::size_t> pick_elements(std::size_t total, std::size_t cap, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (idx.size() <= cap) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

template <typename S>
S central_difference(ParameterStore<S>& params, std::size_t k, Eigen::Index i, S eps,
                     const LossBuilder<S>& loss) {
  S& x = params[k].value.data()[i];
  const S saved = x;
  x = saved + eps;
  Graph<S> gu(false);
  const S up = loss(gu).scalar();
  x = saved - eps;
  Graph<S> gd(false);
  const S down = loss(gd).scalar();
  x = saved;
  return (up - down) / (2 * eps);
}

double relative(double a, double n) {
  return std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
}

}  // namespace

std::string GradCheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["max_rel_error"] = max_rel_error;
  j["worst_parameter"] = worst_parameter;
  j["loss"] = loss;
  j["refined"] = refined;
  auto& arr = j["parameters"] = nlohmann::ordered_json::array();
  for (const auto& p : parameters) {
    arr.push_back({{"name", p.name},
                   {"max_rel_error", p.max_rel_error},
                   {"max_abs_error", p.max_abs_error},
                   {"checked", p.checked},
                   {"total", p.total}});
  }
  return j.dump(2);
}

ParameterStore<long double> widen(const ParameterStore<double>& params) {
  ParameterStore<long double> wide;
  for (std::size_t k = 0; k < params.size(); ++k) {
    wide.add(params[k].name, params[k].value.rows(), params[k].value.cols()).value =
        params[k].value.cast<long double>();
  }
  return wide;
}

GradCheckReport grad_check(const CheckedFunction& f, const GradCheckOptions& options) {
  if (!(options.eps > 0.0) || !std::isfinite(options.eps)) {
    throw ConfigError("grad_check: eps must be positive");
  }
  if (options.max_elements == 0) throw ConfigError("grad_check: max_elements must be positive");
  if (!f.params || !f.loss) throw ConfigError("grad_check: missing parameters or loss");
  ParameterStore<double>& params = *f.params;
  const bool can_refine = f.wide_params && f.wide_loss;
  if (can_refine && f.wide_params->size() != params.size()) {
    throw ShapeError("grad_check: extended-precision store has a different layout");
  }

  GradCheckReport report;
  params.zero_grad();
  {
    Graph<double> g(true);
    Var<double> loss = f.loss(g);
    report.loss = loss.scalar();
    g.backward(loss);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].grad.allFinite()) {
      throw NumericError("grad_check: non-finite gradient in " + params[k].name);
    }
  }

  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    offsets.push_back(total);
    total += static_cast<std::size_t>(params[k].value.size());
    report.parameters.push_back(
        {params[k].name, 0.0, 0.0, 0, static_cast<std::size_t>(params[k].value.size())});
  }

  std::mt19937_64 rng(options.seed);
  std::size_t k = 0;
  for (std::size_t flat : pick_elements(total, options.max_elements, rng)) {
    while (k + 1 < params.size() && flat >= offsets[k + 1]) ++k;
    const auto i = static_cast<Eigen::Index>(flat - offsets[k]);
    const double analytic = params[k].grad.data()[i];
    double numeric = central_difference(params, k, i, options.eps, f.loss);
    if (!std::isfinite(numeric)) {
      throw NumericError("grad_check: non-finite loss perturbing " + params[k].name);
    }
    if (can_refine && relative(analytic, numeric) >= options.refine_above) {
      numeric = static_cast<double>(
          central_difference(*f.wide_params, k, i, static_cast<long double>(options.eps), f.wide_loss));
      ++report.refined;
    }
    ParameterGradError& entry = report.parameters[k];
    entry.max_rel_error = std::max(entry.max_rel_error, relative(analytic, numeric));
    entry.max_abs_error = std::max(entry.max_abs_error, std::abs(analytic - numeric));
    ++entry.checked;
  }
  for (const auto& entry : report.parameters) {
    if (entry.checked > 0 && entry.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_parameter = entry.name;
    }
  }
  return report;
}

GradCheckReport grad_check(Model<double>& model, const GradCheckBatch& batch, LossSelection terms,
                           const GradCheckOptions& options) {
  const std::vector<Matrix<double>> targets = correlation_targets(model, batch.triplets);
  std::vector<Matrix<long double>> wide_targets;
  for (const auto& t : targets) wide_targets.push_back(t.cast<long double>());
  Model<long double> wide(model.config(), model.vocab(), model.labels(), widen(model.params()));

  CheckedFunction f;
  f.params = &model.params();
  f.loss = [&](Graph<double>& g) { return selected_loss(g, model, batch, terms, targets); };
  f.wide_params = &wide.params();
  f.wide_loss = [&](Graph<long double>& g) { return selected_loss(g, wide, batch, terms, wide_targets); };
  return grad_check(f, options);
}

}  // namespace mkp
