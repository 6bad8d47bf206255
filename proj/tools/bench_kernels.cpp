// Benchmark comparing the serial reference kernels against the blocked
// OpenMP kernels, and retraining batches at different worker counts.

#include <chrono>
#include <cstdio>

#include "grouprobe/parallel.hpp"
#include "grouprobe/retrain.hpp"
#include "grouprobe/rng.hpp"

using namespace grouprobe;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, seconds_since(start));
  }
  return best;
}

}  // namespace

int main() {
  std::printf("hardware threads: %d\n\n", hardware_jobs());

  std::printf("%-34s %10s %10s %8s\n", "kernel", "serial(s)", "blocked(s)", "speedup");
  for (const auto& [n, d] : {std::pair{20000, 40}, std::pair{50000, 20}}) {
    const Dataset data = synth_gaussian_binary(n / 2, d, 1.0, 7);
    TrainConfig tc;
    tc.lambda = 1e-3 * n;
    const TrainedModel model = train(data, VectorXd::Ones(n), tc);
    const VectorXd ones = VectorXd::Ones(n);

    volatile double sink = 0.0;
    const double t_serial = time_best_of(
        3, [&] { sink = hessian_unregularized_serial(model, data, ones)(0, 0); });
    const double t_blocked =
        time_best_of(3, [&] { sink = hessian_unregularized(model, data, ones)(0, 0); });
    std::printf("%-34s %10.4f %10.4f %7.2fx\n",
                ("hessian n=" + std::to_string(n) + " d=" + std::to_string(d)).c_str(),
                t_serial, t_blocked, t_serial / t_blocked);

    const double g_serial = time_best_of(
        3, [&] { sink = weighted_grad_sum_serial(model, data, ones)[0]; });
    const double g_blocked =
        time_best_of(3, [&] { sink = weighted_grad_sum(model, data, ones)[0]; });
    std::printf("%-34s %10.4f %10.4f %7.2fx\n",
                ("grad sum n=" + std::to_string(n) + " d=" + std::to_string(d)).c_str(),
                g_serial, g_blocked, g_serial / g_blocked);
    (void)sink;
  }

  {
    const int n = 2000, d = 20;
    const Dataset data = synth_gaussian_binary(n / 2, d, 1.0, 11);
    TrainConfig tc;
    tc.lambda = 1e-3 * n;
    const TrainedModel model = train(data, VectorXd::Ones(n), tc);
    const InfluenceEngine influence(data, model);
    const NewtonEngine newton(influence);

    Rng rng(3);
    std::vector<SubsetWeights> subsets;
    for (int i = 0; i < 200; ++i) {
      subsets.push_back(SubsetWeights::from_indices(
          rng.sample_indices(n, 10 + rng.index(n / 4)), data, "bench", i));
    }
    const std::vector<EvalFunction> fs = {EvalFunction::self_loss()};

    std::printf("\n%-34s %10s\n", "retraining batch (200 subsets)", "time(s)");
    for (int jobs : {1, hardware_jobs()}) {
      BatchOptions options;
      options.parallelism = jobs;
      const double t = time_best_of(1, [&] {
        const auto records = batch_effects(influence, newton, subsets, fs, options);
        if (records.empty()) std::abort();
      });
      std::printf("%-34s %10.4f\n", ("jobs=" + std::to_string(jobs)).c_str(), t);
    }
  }
  return 0;
}
