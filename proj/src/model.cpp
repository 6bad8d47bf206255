#include "grouprobe/model.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "grouprobe/parallel.hpp"

namespace grouprobe {

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::LogisticMargin: return "logistic";
    case LossKind::Softmax: return "softmax";
    case LossKind::Squared: return "squared";
  }
  throw InternalError("unknown loss kind");
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "logistic" || name == "logistic_margin") return LossKind::LogisticMargin;
  if (name == "softmax") return LossKind::Softmax;
  if (name == "squared") return LossKind::Squared;
  throw ConfigError("unknown loss_kind '" + name + "'");
}

MatrixRM augmented_features(const Dataset& data, bool intercept) {
  if (!intercept) return data.features;
  MatrixRM xa(data.n(), data.d() + 1);
  xa.leftCols(data.d()) = data.features;
  xa.col(data.d()).setOnes();
  return xa;
}

namespace {

// Everything the trainer and the point evaluators need about one
// (loss, lambda, intercept) problem instance.
struct Problem {
  const Dataset& data;
  LossKind loss;
  double lambda;
  bool intercept;
  MatrixRM xa;  // n x da
  int K;
  int da;
  int P;

  Problem(const Dataset& d, LossKind l, double lam, bool icpt)
      : data(d), loss(l), lambda(lam), intercept(icpt),
        xa(augmented_features(d, icpt)),
        K(l == LossKind::Softmax ? d.n_classes : 2),
        da(d.d() + (icpt ? 1 : 0)),
        P(l == LossKind::Softmax ? K * da : da) {}

  // Adds lambda on every class-block feature coordinate (intercepts skipped).
  void add_ridge(MatrixXd& h) const {
    const int blocks = loss == LossKind::Softmax ? K : 1;
    for (int c = 0; c < blocks; ++c)
      for (int j = 0; j < data.d(); ++j) h(c * da + j, c * da + j) += lambda;
  }

  double ridge_value(const VectorXd& theta) const {
    double sq = 0.0;
    const int blocks = loss == LossKind::Softmax ? K : 1;
    for (int c = 0; c < blocks; ++c) sq += theta.segment(c * da, data.d()).squaredNorm();
    return 0.5 * lambda * sq;
  }

  VectorXd ridge_grad(const VectorXd& theta) const {
    VectorXd g = VectorXd::Zero(P);
    const int blocks = loss == LossKind::Softmax ? K : 1;
    for (int c = 0; c < blocks; ++c)
      g.segment(c * da, data.d()) = lambda * theta.segment(c * da, data.d());
    return g;
  }

  double margin(int i, const VectorXd& theta) const {
    return data.margin_label(i) * xa.row(i).dot(theta);
  }

  double score(int i, const VectorXd& theta) const { return xa.row(i).dot(theta); }

  VectorXd class_scores(int i, const VectorXd& theta) const {
    VectorXd z(K);
    for (int c = 0; c < K; ++c) z[c] = xa.row(i).dot(theta.segment(c * da, da));
    return z;
  }

  static VectorXd softmax_probs(const VectorXd& z) {
    const double zmax = z.maxCoeff();
    VectorXd p = (z.array() - zmax).exp();
    p /= p.sum();
    return p;
  }

  double loss_value(int i, const VectorXd& theta) const {
    switch (loss) {
      case LossKind::LogisticMargin:
        return logistic::value(margin(i, theta));
      case LossKind::Squared:
        return squared::value(score(i, theta), data.margin_label(i));
      case LossKind::Softmax: {
        const VectorXd z = class_scores(i, theta);
        const double zmax = z.maxCoeff();
        const double lse = zmax + std::log((z.array() - zmax).exp().sum());
        return lse - z[data.labels[static_cast<std::size_t>(i)]];
      }
    }
    throw InternalError("unknown loss kind");
  }

  VectorXd loss_grad(int i, const VectorXd& theta) const {
    switch (loss) {
      case LossKind::LogisticMargin: {
        const double y = data.margin_label(i);
        return (y * logistic::d1(margin(i, theta))) * xa.row(i).transpose();
      }
      case LossKind::Squared:
        return (score(i, theta) - data.margin_label(i)) * xa.row(i).transpose();
      case LossKind::Softmax: {
        const VectorXd p = softmax_probs(class_scores(i, theta));
        VectorXd g = VectorXd::Zero(P);
        const int y = data.labels[static_cast<std::size_t>(i)];
        for (int c = 0; c < K; ++c) {
          const double coef = p[c] - (c == y ? 1.0 : 0.0);
          g.segment(c * da, da) = coef * xa.row(i).transpose();
        }
        return g;
      }
    }
    throw InternalError("unknown loss kind");
  }

  // Margin-loss curvature coefficient: hess_i = c * xa_i xa_i^T.
  double curvature(int i, const VectorXd& theta) const {
    switch (loss) {
      case LossKind::LogisticMargin:
        return logistic::d2(margin(i, theta));
      case LossKind::Squared:
        return 1.0;
      case LossKind::Softmax:
        throw InternalError("softmax has no scalar curvature");
    }
    throw InternalError("unknown loss kind");
  }

  MatrixXd loss_hess(int i, const VectorXd& theta) const {
    if (loss != LossKind::Softmax) {
      return curvature(i, theta) * (xa.row(i).transpose() * xa.row(i));
    }
    const VectorXd p = softmax_probs(class_scores(i, theta));
    const MatrixXd outer = xa.row(i).transpose() * xa.row(i);
    MatrixXd h = MatrixXd::Zero(P, P);
    for (int c1 = 0; c1 < K; ++c1) {
      for (int c2 = 0; c2 < K; ++c2) {
        const double coef = (c1 == c2 ? p[c1] : 0.0) - p[c1] * p[c2];
        if (coef != 0.0) h.block(c1 * da, c2 * da, da, da) += coef * outer;
      }
    }
    return h;
  }

  // --- blocked reductions -------------------------------------------------
  // Per-block partials are combined in block order, so the result is
  // bit-identical at every thread count (including inside an outer parallel
  // batch, where these fall back to one thread).

  double weighted_loss_sum(const VectorXd& s, const VectorXd& theta, int jobs) const {
    const int n = data.n();
    const int blocks = block_count(n, kReductionBlock);
    std::vector<double> partial(static_cast<std::size_t>(blocks), 0.0);
    for_blocks(n, kReductionBlock, jobs, [&](int b, int lo, int hi) {
      double acc = 0.0;
      for (int i = lo; i < hi; ++i) {
        if (s[i] != 0.0) acc += s[i] * loss_value(i, theta);
      }
      partial[static_cast<std::size_t>(b)] = acc;
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
  }

  VectorXd weighted_grad(const VectorXd& s, const VectorXd& theta, int jobs) const {
    const int n = data.n();
    const int blocks = block_count(n, kReductionBlock);
    std::vector<VectorXd> partial(static_cast<std::size_t>(blocks));
    for_blocks(n, kReductionBlock, jobs, [&](int b, int lo, int hi) {
      VectorXd acc = VectorXd::Zero(P);
      for (int i = lo; i < hi; ++i) {
        if (s[i] != 0.0) acc += s[i] * loss_grad(i, theta);
      }
      partial[static_cast<std::size_t>(b)] = std::move(acc);
    });
    VectorXd total = VectorXd::Zero(P);
    for (const VectorXd& v : partial) total += v;
    return total;
  }

  MatrixXd weighted_hess(const VectorXd& s, const VectorXd& theta, int jobs) const {
    const int n = data.n();
    const int blocks = block_count(n, kReductionBlock);
    std::vector<MatrixXd> partial(static_cast<std::size_t>(blocks));
    if (loss != LossKind::Softmax) {
      for_blocks(n, kReductionBlock, jobs, [&](int b, int lo, int hi) {
        MatrixXd acc = MatrixXd::Zero(P, P);
        for (int i = lo; i < hi; ++i) {
          if (s[i] == 0.0) continue;
          const double c = s[i] * curvature(i, theta);
          if (c != 0.0) {
            acc.selfadjointView<Eigen::Lower>().rankUpdate(xa.row(i).transpose(), c);
          }
        }
        partial[static_cast<std::size_t>(b)] = std::move(acc);
      });
    } else {
      for_blocks(n, kReductionBlock, jobs, [&](int b, int lo, int hi) {
        MatrixXd acc = MatrixXd::Zero(P, P);
        for (int i = lo; i < hi; ++i) {
          if (s[i] != 0.0) acc += s[i] * loss_hess(i, theta);
        }
        partial[static_cast<std::size_t>(b)] = std::move(acc);
      });
    }
    MatrixXd total = MatrixXd::Zero(P, P);
    for (const MatrixXd& m : partial) total += m;
    if (loss != LossKind::Softmax) {
      total.triangularView<Eigen::Upper>() = total.transpose();
    }
    return total;
  }
};

VectorXd effective_weights(const Dataset& data, const VectorXd& weights) {
  if (weights.size() != data.n()) throw DataError("weight vector length mismatch");
  return weights.array() * data.base_weights.array();
}

Problem problem_for(const TrainedModel& model, const Dataset& data) {
  return Problem(data, model.loss_kind, model.lambda, model.intercept);
}

}  // namespace

TrainedModel train(const Dataset& data, const VectorXd& keep_weights,
                   const TrainConfig& config, const VectorXd* warm_start) {
  data.validate();
  if (!(config.lambda > 0.0)) throw ConfigError("lambda must be > 0");
  if (keep_weights.size() != data.n()) throw DataError("keep_weights length mismatch");
  for (int i = 0; i < data.n(); ++i) {
    const double w = keep_weights[i];
    if (!std::isfinite(w) || w < 0.0 || w > 1.0) {
      throw DataError("keep weight out of [0,1] at index " + std::to_string(i));
    }
  }
  if (config.loss != LossKind::Softmax && data.n_classes != 2) {
    throw ConfigError("margin losses require binary data");
  }

  Problem prob(data, config.loss, config.lambda, config.intercept);
  const VectorXd s = effective_weights(data, keep_weights);
  if (!(s.maxCoeff() > 0.0)) throw DataError("no effective training mass left");

  const int jobs = hardware_jobs();
  const double tol = config.tol_scale * std::max(1.0, static_cast<double>(data.n()));

  VectorXd theta = VectorXd::Zero(prob.P);
  if (warm_start != nullptr) {
    if (warm_start->size() != prob.P) throw ConfigError("warm start dimension mismatch");
    theta = *warm_start;
  }

  double value = prob.weighted_loss_sum(s, theta, jobs) + prob.ridge_value(theta);
  double grad_norm = 0.0;
  int iter = 0;
  for (; iter <= config.max_iterations; ++iter) {
    VectorXd grad = prob.weighted_grad(s, theta, jobs) + prob.ridge_grad(theta);
    grad_norm = grad.norm();
    if (grad_norm <= tol) break;
    if (iter == config.max_iterations) {
      throw ConvergenceError("trainer did not converge in " +
                                 std::to_string(config.max_iterations) +
                                 " Newton steps (gradient norm " +
                                 format_double(grad_norm) + ")",
                             grad_norm);
    }

    MatrixXd hess = prob.weighted_hess(s, theta, jobs);
    prob.add_ridge(hess);
    // Softmax with an unregularized intercept has a flat all-classes-shift
    // direction; a vanishing jitter keeps the factorization definite without
    // moving the minimizer (the gradient has no component along the shift).
    if (config.loss == LossKind::Softmax && config.intercept) {
      const double jitter = 1e-12 * (1.0 + hess.diagonal().maxCoeff());
      for (int c = 0; c < prob.K; ++c) {
        hess(c * prob.da + data.d(), c * prob.da + data.d()) += jitter;
      }
    }
    Eigen::LLT<MatrixXd> llt(hess);
    VectorXd step;
    if (llt.info() == Eigen::Success) {
      step = llt.solve(-grad);
    } else {
      step = hess.ldlt().solve(-grad);
    }

    const double slope = grad.dot(step);
    if (!(slope < 0.0)) {
      throw ConvergenceError("Newton direction is not a descent direction", grad_norm);
    }
    constexpr double armijo = 1e-4;
    double t = 1.0;
    double candidate_value = 0.0;
    VectorXd candidate;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      candidate = theta + t * step;
      candidate_value = prob.weighted_loss_sum(s, candidate, jobs) + prob.ridge_value(candidate);
      // Near the optimum the true decrease drops below the rounding noise of
      // the objective; the allowance keeps full Newton steps flowing there.
      const double rounding = 16.0 * std::numeric_limits<double>::epsilon() *
                              (std::abs(value) + std::abs(candidate_value) + 1.0);
      if (candidate_value <= value + armijo * t * slope + rounding) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      throw ConvergenceError("line search failed to make progress", grad_norm);
    }
    theta = candidate;
    value = candidate_value;
  }

  TrainedModel model;
  model.theta = theta;
  model.loss_kind = config.loss;
  model.lambda = config.lambda;
  model.intercept = config.intercept;
  model.d = data.d();
  model.n_classes = data.n_classes;
  model.grad_norm_at_opt = grad_norm;
  model.iterations = iter;
  model.dataset_fingerprint = data.fingerprint();
  return model;
}

namespace {

// Per-point evaluators below avoid building a Problem (and its augmented
// feature copy); they only touch one row.

double row_score(const TrainedModel& model, const Dataset& data, int i,
                 const VectorXd& theta, int class_block) {
  const int da = model.class_dim();
  double s = data.features.row(i).dot(theta.segment(class_block * da, data.d()));
  if (model.intercept) s += theta[class_block * da + data.d()];
  return s;
}

VectorXd softmax_probs_at(const TrainedModel& model, const Dataset& data, int i,
                          const VectorXd& theta) {
  VectorXd z(model.n_classes);
  for (int c = 0; c < model.n_classes; ++c) z[c] = row_score(model, data, i, theta, c);
  const double zmax = z.maxCoeff();
  VectorXd p = (z.array() - zmax).exp();
  p /= p.sum();
  return p;
}

void add_scaled_row(VectorXd& out, const TrainedModel& model, const Dataset& data,
                    int i, int class_block, double coef) {
  const int da = model.class_dim();
  out.segment(class_block * da, data.d()) += coef * data.features.row(i).transpose();
  if (model.intercept) out[class_block * da + data.d()] += coef;
}

}  // namespace

double point_loss_at(const TrainedModel& model, const Dataset& data, int i,
                     const VectorXd& theta) {
  switch (model.loss_kind) {
    case LossKind::LogisticMargin:
      return logistic::value(data.margin_label(i) * row_score(model, data, i, theta, 0));
    case LossKind::Squared:
      return squared::value(row_score(model, data, i, theta, 0), data.margin_label(i));
    case LossKind::Softmax: {
      VectorXd z(model.n_classes);
      for (int c = 0; c < model.n_classes; ++c) z[c] = row_score(model, data, i, theta, c);
      const double zmax = z.maxCoeff();
      const double lse = zmax + std::log((z.array() - zmax).exp().sum());
      return lse - z[data.labels[static_cast<std::size_t>(i)]];
    }
  }
  throw InternalError("unknown loss kind");
}

VectorXd point_grad_at(const TrainedModel& model, const Dataset& data, int i,
                       const VectorXd& theta) {
  VectorXd g = VectorXd::Zero(model.param_dim());
  switch (model.loss_kind) {
    case LossKind::LogisticMargin: {
      const double y = data.margin_label(i);
      const double coef = y * logistic::d1(y * row_score(model, data, i, theta, 0));
      add_scaled_row(g, model, data, i, 0, coef);
      return g;
    }
    case LossKind::Squared: {
      const double coef = row_score(model, data, i, theta, 0) - data.margin_label(i);
      add_scaled_row(g, model, data, i, 0, coef);
      return g;
    }
    case LossKind::Softmax: {
      const VectorXd p = softmax_probs_at(model, data, i, theta);
      const int y = data.labels[static_cast<std::size_t>(i)];
      for (int c = 0; c < model.n_classes; ++c) {
        add_scaled_row(g, model, data, i, c, p[c] - (c == y ? 1.0 : 0.0));
      }
      return g;
    }
  }
  throw InternalError("unknown loss kind");
}

MatrixXd point_hess_at(const TrainedModel& model, const Dataset& data, int i,
                       const VectorXd& theta) {
  const int da = model.class_dim();
  VectorXd xa(da);
  xa.head(data.d()) = data.features.row(i).transpose();
  if (model.intercept) xa[data.d()] = 1.0;
  switch (model.loss_kind) {
    case LossKind::LogisticMargin: {
      const double c = logistic::d2(data.margin_label(i) * row_score(model, data, i, theta, 0));
      return c * (xa * xa.transpose());
    }
    case LossKind::Squared:
      return xa * xa.transpose();
    case LossKind::Softmax: {
      const VectorXd p = softmax_probs_at(model, data, i, theta);
      const MatrixXd outer = xa * xa.transpose();
      const int P = model.param_dim();
      MatrixXd h = MatrixXd::Zero(P, P);
      for (int c1 = 0; c1 < model.n_classes; ++c1) {
        for (int c2 = 0; c2 < model.n_classes; ++c2) {
          const double coef = (c1 == c2 ? p[c1] : 0.0) - p[c1] * p[c2];
          if (coef != 0.0) h.block(c1 * da, c2 * da, da, da) += coef * outer;
        }
      }
      return h;
    }
  }
  throw InternalError("unknown loss kind");
}

MatrixXd hessian(const TrainedModel& model, const Dataset& data,
                 const VectorXd& weights) {
  Problem prob = problem_for(model, data);
  MatrixXd h = prob.weighted_hess(effective_weights(data, weights), model.theta,
                                  hardware_jobs());
  prob.add_ridge(h);
  return h;
}

MatrixXd hessian_unregularized(const TrainedModel& model, const Dataset& data,
                               const VectorXd& weights) {
  Problem prob = problem_for(model, data);
  return prob.weighted_hess(effective_weights(data, weights), model.theta,
                            hardware_jobs());
}

VectorXd weighted_grad_sum(const TrainedModel& model, const Dataset& data,
                           const VectorXd& weights) {
  Problem prob = problem_for(model, data);
  return prob.weighted_grad(effective_weights(data, weights), model.theta,
                            hardware_jobs());
}

MatrixXd hessian_unregularized_serial(const TrainedModel& model, const Dataset& data,
                                      const VectorXd& weights) {
  Problem prob = problem_for(model, data);
  const VectorXd s = effective_weights(data, weights);
  MatrixXd h = MatrixXd::Zero(prob.P, prob.P);
  for (int i = 0; i < data.n(); ++i) {
    if (s[i] != 0.0) h += s[i] * prob.loss_hess(i, model.theta);
  }
  return h;
}

VectorXd weighted_grad_sum_serial(const TrainedModel& model, const Dataset& data,
                                  const VectorXd& weights) {
  Problem prob = problem_for(model, data);
  const VectorXd s = effective_weights(data, weights);
  VectorXd g = VectorXd::Zero(prob.P);
  for (int i = 0; i < data.n(); ++i) {
    if (s[i] != 0.0) g += s[i] * prob.loss_grad(i, model.theta);
  }
  return g;
}

double objective_value(const TrainedModel& model, const Dataset& data,
                       const VectorXd& keep_weights, const VectorXd& theta) {
  Problem prob = problem_for(model, data);
  const VectorXd s = effective_weights(data, keep_weights);
  return prob.weighted_loss_sum(s, theta, hardware_jobs()) + prob.ridge_value(theta);
}

VectorXd point_curvatures(const TrainedModel& model, const Dataset& data) {
  Problem prob = problem_for(model, data);
  VectorXd c(data.n());
  for (int i = 0; i < data.n(); ++i) c[i] = prob.curvature(i, model.theta);
  return c;
}

std::string TrainedModel::to_checkpoint_json() const {
  nlohmann::ordered_json j;
  j["loss_kind"] = loss_kind_name(loss_kind);
  j["lambda"] = lambda;
  j["intercept"] = intercept;
  j["d"] = d;
  j["n_classes"] = n_classes;
  j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  j["grad_norm_at_opt"] = grad_norm_at_opt;
  j["iterations"] = iterations;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(dataset_fingerprint));
  j["fingerprint"] = std::string(buf);
  return j.dump(2) + "\n";
}

TrainedModel TrainedModel::from_checkpoint_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TrainedModel m;
  m.loss_kind = loss_kind_from_name(j.at("loss_kind").get<std::string>());
  m.lambda = j.at("lambda").get<double>();
  m.intercept = j.at("intercept").get<bool>();
  m.d = j.at("d").get<int>();
  m.n_classes = j.at("n_classes").get<int>();
  const auto values = j.at("theta").get<std::vector<double>>();
  m.theta = Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  m.grad_norm_at_opt = j.value("grad_norm_at_opt", 0.0);
  m.iterations = j.value("iterations", 0);
  if (j.contains("fingerprint")) {
    m.dataset_fingerprint =
        std::stoull(j["fingerprint"].get<std::string>(), nullptr, 16);
  }
  if (m.theta.size() != m.param_dim()) {
    throw DataError("checkpoint theta length does not match dimensions");
  }
  return m;
}

}  // namespace grouprobe
