#include "grouprobe/counterexamples.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "grouprobe/stats.hpp"

namespace grouprobe {

namespace {

constexpr int kMogPerClass = 60;
constexpr int kMogDim = 60;
constexpr double kMogOffset = 0.5;
constexpr double kMogLambda = 0.001;
constexpr int kMogPairs = 120;
constexpr double kMogMaxAbsPearson = 0.2;

struct PairCandidate {
  int i, j;
  double cosine;
};

MogResult try_mog(std::uint64_t seed) {
  MogResult result;
  result.seed_used = seed;
  result.data = synth_gaussian_binary(kMogPerClass, kMogDim, kMogOffset, seed);

  TrainConfig config;
  config.loss = LossKind::LogisticMargin;
  config.lambda = kMogLambda;
  result.model = train(result.data, VectorXd::Ones(result.data.n()), config);

  const InfluenceEngine influence(result.data, result.model);
  const NewtonEngine newton(influence);
  const int n = result.data.n();

  // Angle between the influence- and Newton-predicted parameter changes for
  // every pair of training points.
  std::vector<PairCandidate> candidates;
  candidates.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      SubsetWeights w = SubsetWeights::from_indices({i, j}, result.data, "pair");
      const VectorXd d_inf = influence.param_influence_delta(w);
      const VectorXd d_nt = newton.newton_delta(w);
      const double denom = d_inf.norm() * d_nt.norm();
      const double cosine = denom > 0.0 ? d_inf.dot(d_nt) / denom : 1.0;
      candidates.push_back({i, j, cosine});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const PairCandidate& a, const PairCandidate& b) {
              if (a.cosine != b.cosine) return a.cosine < b.cosine;
              if (a.i != b.i) return a.i < b.i;
              return a.j < b.j;
            });
  if (candidates.size() < kMogPairs || candidates.front().cosine > 1.0 - 1e-12) {
    throw InternalError("degenerate construction: all pairs collinear");
  }
  candidates.resize(kMogPairs);

  const int P = result.model.param_dim();
  MatrixXd d_inf_rows(kMogPairs, P);
  MatrixXd d_nt_rows(kMogPairs, P);
  for (int p = 0; p < kMogPairs; ++p) {
    SubsetWeights w = SubsetWeights::from_indices(
        {candidates[static_cast<std::size_t>(p)].i, candidates[static_cast<std::size_t>(p)].j},
        result.data, "mog_pair", p);
    d_inf_rows.row(p) = influence.param_influence_delta(w).transpose();
    d_nt_rows.row(p) = newton.newton_delta(w).transpose();
    result.subsets.push_back(std::move(w));
  }

  // Unit test direction decorrelating the two projected series: among the
  // eigenvectors of the symmetrized centered cross-covariance, keep the one
  // whose projections have the smallest absolute correlation.
  const MatrixXd centered_inf = d_inf_rows.rowwise() - d_inf_rows.colwise().mean();
  const MatrixXd centered_nt = d_nt_rows.rowwise() - d_nt_rows.colwise().mean();
  const MatrixXd cross = centered_inf.transpose() * centered_nt;
  const MatrixXd sym = 0.5 * (cross + cross.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw InternalError("cross-covariance eigensolve failed");

  double best_abs = std::numeric_limits<double>::infinity();
  VectorXd best_x;
  double best_rho = 0.0;
  for (int c = 0; c < P; ++c) {
    const VectorXd x = eig.eigenvectors().col(c);
    const VectorXd a = d_inf_rows * x;
    const VectorXd b = d_nt_rows * x;
    const auto rho = pearson(std::vector<double>(a.data(), a.data() + a.size()),
                             std::vector<double>(b.data(), b.data() + b.size()));
    if (!rho.has_value()) continue;
    if (std::abs(*rho) < best_abs) {
      best_abs = std::abs(*rho);
      best_rho = *rho;
      best_x = x;
    }
  }
  if (best_x.size() == 0) throw InternalError("no usable test direction found");

  result.x_test = best_x;
  result.pearson = best_rho;
  result.effects.reserve(kMogPairs);
  result.sign_flip = false;
  for (int p = 0; p < kMogPairs; ++p) {
    const double i_f = best_x.dot(d_inf_rows.row(p));
    const double i_nt = best_x.dot(d_nt_rows.row(p));
    result.effects.emplace_back(i_f, i_nt);
    if (i_f * i_nt < 0.0) result.sign_flip = true;
  }
  return result;
}

}  // namespace

MogResult gen_mog(std::uint64_t seed, int max_seeds) {
  for (int attempt = 0; attempt < max_seeds; ++attempt) {
    MogResult result = try_mog(seed + static_cast<std::uint64_t>(attempt));
    result.attempts = attempt + 1;
    if (result.sign_flip && std::abs(result.pearson) <= kMogMaxAbsPearson) {
      return result;
    }
    log_warn("mog construction on seed " + std::to_string(result.seed_used) +
             " missed its targets (pearson " + format_double(result.pearson) +
             "); reseeding");
  }
  throw InternalError("mog construction failed within the reseeding budget");
}

std::array<OrthoAxisConfig, 2> default_ortho_config() {
  return {OrthoAxisConfig{2.0, 1}, OrthoAxisConfig{1e-4, 6}};
}

double default_ortho_lambda() { return 0.1; }

OrthoResult gen_ortho(const std::array<OrthoAxisConfig, 2>& axes, double lambda) {
  for (const OrthoAxisConfig& axis : axes) {
    if (!(axis.distance > 0.0)) throw ConfigError("axis distances must be positive");
    if (axis.multiplicity < 1) throw ConfigError("multiplicities must be >= 1");
  }

  OrthoResult result;
  const int n = 2 * (axes[0].multiplicity + axes[1].multiplicity);
  result.data.features = MatrixRM::Zero(n, 2);
  result.data.labels.resize(static_cast<std::size_t>(n));
  result.data.base_weights = VectorXd::Ones(n);
  result.data.n_classes = 2;

  // Row blocks: per axis, the positive-class copies then the negative-class
  // copies (the negative point sits at the antipode).
  struct Block {
    int start, count, axis, cls;
  };
  std::vector<Block> blocks;
  int row = 0;
  for (int axis = 0; axis < 2; ++axis) {
    for (int cls = 1; cls >= 0; --cls) {
      const double sign = cls == 1 ? 1.0 : -1.0;
      blocks.push_back({row, axes[static_cast<std::size_t>(axis)].multiplicity, axis, cls});
      for (int c = 0; c < axes[static_cast<std::size_t>(axis)].multiplicity; ++c) {
        result.data.features(row, axis) = sign * axes[static_cast<std::size_t>(axis)].distance;
        result.data.labels[static_cast<std::size_t>(row)] = cls;
        ++row;
      }
    }
  }

  TrainConfig config;
  config.loss = LossKind::LogisticMargin;
  config.lambda = lambda;
  result.model = train(result.data, VectorXd::Ones(n), config);

  const InfluenceEngine influence(result.data, result.model);
  const NewtonEngine newton(influence);

  result.x_test = VectorXd::Ones(2);
  const EvalFunction f = EvalFunction::test_prediction(result.x_test);

  int id = 0;
  for (const Block& block : blocks) {
    for (int copies = 1; copies <= block.count; ++copies) {
      std::vector<int> indices(static_cast<std::size_t>(copies));
      for (int c = 0; c < copies; ++c) indices[static_cast<std::size_t>(c)] = block.start + c;
      const std::string tag = "ortho_axis" + std::to_string(block.axis) +
                              (block.cls == 1 ? "_pos" : "_neg");
      SubsetWeights w = SubsetWeights::from_indices(std::move(indices), result.data, tag, id++);
      result.scale_factors.push_back(newton.single_point_scale(block.start, copies));
      result.effects.emplace_back(influence.group_influence(w, f),
                                  newton.newton_effect(w, f));
      result.subsets.push_back(std::move(w));
    }
  }
  return result;
}

}  // namespace grouprobe
