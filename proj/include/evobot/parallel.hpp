#pragma once

// Population evaluation kernels. The serial loop is the reference; the
// OpenMP kernel must produce the same vector for any worker count because
// every result is written to its own index.

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include <omp.h>

namespace evobot {

// Calls fn(i) for i in [0, n) on up to `workers` OpenMP threads. The first
// exception by index is rethrown after the loop.
template <class Fn>
void parallel_for_index(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <class Genome, class Eval>
std::vector<double> evaluate_population_serial(std::span<const Genome> genomes, const Eval& eval) {
  std::vector<double> out(genomes.size());
  for (std::size_t i = 0; i < genomes.size(); ++i) out[i] = eval(genomes[i]);
  return out;
}

template <class Genome, class Eval>
std::vector<double> evaluate_population_omp(std::span<const Genome> genomes, const Eval& eval, int workers) {
  std::vector<double> out(genomes.size());
  parallel_for_index(genomes.size(), workers, [&](std::size_t i) { out[i] = eval(genomes[i]); });
  return out;
}

template <class Genome, class Eval>
std::vector<double> evaluate_population(std::span<const Genome> genomes, const Eval& eval, int workers) {
  if (workers <= 1) return evaluate_population_serial(genomes, eval);
  return evaluate_population_omp(genomes, eval, workers);
}

}  // namespace evobot
