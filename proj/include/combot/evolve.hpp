#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "combot/objective.hpp"
#include "combot/problem.hpp"

namespace combot {

// Thin wrapper over mt19937_64 with fixed sampling algorithms, so runs
// reproduce bit-for-bit across standard libraries (the std distributions
// leave their algorithms implementation-defined).
class Rand {
 public:
  explicit Rand(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1), 53-bit resolution.
  double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / n * n;
    std::uint64_t r;
    while ((r = gen_()) >= limit) {
    }
    return r % n;
  }

  bool chance(double p) { return u01() < p; }

 private:
  std::mt19937_64 gen_;
};

enum class MutationScheme {
  per_bit,    // each bit flips independently with the mutation rate
  per_genome, // the whole genome gets one random bit flip with the mutation rate
};

struct EaParams {
  int population = 200;
  int generations = 1000;
  double crossover_rate = 0.95;
  double mutation_rate = 0.09;
  MutationScheme mutation_scheme = MutationScheme::per_bit;
  int elite_count = 2;
  // Probability that an element bit starts active in a sampled genome. High
  // densities almost always connect but start far over the desired length;
  // low densities start near it at the price of more invalid draws.
  double init_density = 0.5;
  // Offspring that decode or solve as invalid are redrawn up to this many
  // batch rounds before being admitted with the floor fitness.
  int max_retry_rounds = 20;
  double selection_shift = 1e-6;  // keeps roulette weights strictly positive
  std::uint64_t seed = 1;
  int workers = 1;
  // Genomes to place into the initial population ahead of random sampling,
  // e.g. known-good designs to refine.
  std::vector<Genome> initial;
};

struct Individual {
  Genome genome;
  Evaluation eval;
};

struct GenerationStats {
  int generation = 0;
  double best_fitness = 0.0;   // best valid fitness, floor when none valid
  double mean_fitness = 0.0;   // mean over valid individuals
  double valid_fraction = 0.0;
};

struct EaResult {
  Individual best;  // best-ever individual, valid ones always preferred
  std::vector<Individual> final_population;
  std::vector<GenerationStats> history;
  std::uint64_t evaluations = 0;
};

// Cumulative roulette weights. Invalid individuals count as one unit below
// the worst valid fitness, then everything is shifted strictly positive.
inline std::vector<double> selection_wheel(const std::vector<Individual>& pop, double shift) {
  double min_valid = std::numeric_limits<double>::infinity();
  for (const Individual& ind : pop)
    if (ind.eval.valid) min_valid = std::min(min_valid, ind.eval.fitness);
  const bool any_valid = std::isfinite(min_valid);

  std::vector<double> eff(pop.size());
  for (size_t i = 0; i < pop.size(); ++i)
    eff[i] = pop[i].eval.valid ? pop[i].eval.fitness : (any_valid ? min_valid - 1.0 : 0.0);
  const double low = *std::min_element(eff.begin(), eff.end());

  std::vector<double> wheel(pop.size());
  double total = 0.0;
  for (size_t i = 0; i < pop.size(); ++i) {
    total += eff[i] - low + shift;
    wheel[i] = total;
  }
  return wheel;
}

// Index whose wheel slot contains u * total, u in [0, 1).
inline size_t wheel_pick(std::span<const double> wheel, double u) {
  const double target = u * wheel.back();
  const auto it = std::upper_bound(wheel.begin(), wheel.end(), target);
  return std::min<size_t>(it - wheel.begin(), wheel.size() - 1);
}

// Generational GA over element/offset bitstrings: roulette selection on
// shifted fitness, one-point crossover, bit mutation, elitism. Variation is
// drawn from one sequential RNG; only evaluation fans out over threads, so a
// seed fixes the whole run regardless of worker count.
class Evolver {
 public:
  using Observer = std::function<void(const GenerationStats&, const std::vector<Individual>&)>;

  Evolver(const Evaluator& evaluator, EaParams params)
      : evaluator_(evaluator), params_(params) {
    if (params_.population < 2) throw std::invalid_argument("population must be >= 2");
    if (params_.elite_count < 0 || params_.elite_count >= params_.population)
      throw std::invalid_argument("elite count must be in [0, population)");
    if (params_.generations < 0) throw std::invalid_argument("generations must be >= 0");
    if (!(params_.init_density >= 0.0 && params_.init_density <= 1.0))
      throw std::invalid_argument("init density must be in [0, 1]");
    if (evaluator_.layout().length < 2)
      throw std::invalid_argument("genome too short for crossover");
  }

  // Random genome: element bits on with probability init_density, offset
  // fields uniform over their valid lattice (never a decode error).
  Genome sample_genome(Rand& rng) const {
    const GenomeLayout& layout = evaluator_.layout();
    Genome g(layout.length, 0);
    for (int i = 0; i < layout.element_count; ++i)
      g[i] = rng.chance(params_.init_density) ? 1 : 0;
    for (const GenomeField& f : layout.offset_fields) {
      std::uint64_t value = rng.below(2 * f.max_code + 1);
      for (int b = f.bits - 1; b >= 0; --b) {
        g[f.offset + b] = static_cast<std::uint8_t>(value & 1);
        value >>= 1;
      }
    }
    return g;
  }

  EaResult run(const Observer& observer = {}) {
    Rand rng(params_.seed);
    EaResult result;

    if (params_.initial.size() > static_cast<size_t>(params_.population))
      throw std::invalid_argument("more seeded genomes than population slots");
    for (const Genome& g : params_.initial)
      if (static_cast<int>(g.size()) != evaluator_.layout().length)
        throw std::invalid_argument("seeded genome length does not match layout");

    std::vector<Individual> pop(params_.population);
    for (size_t i = 0; i < params_.initial.size(); ++i) pop[i].genome = params_.initial[i];
    for (size_t i = params_.initial.size(); i < pop.size(); ++i)
      pop[i].genome = sample_genome(rng);
    evaluate_all(pop, result.evaluations);
    retry_invalid(pop, rng, result.evaluations,
                  [&](Rand& r) { return Individual{sample_genome(r), {}}; });

    track_best(pop, result.best);
    record(0, pop, result, observer);

    for (int gen = 1; gen <= params_.generations; ++gen) {
      std::vector<Individual> next;
      next.reserve(params_.population);

      for (int e : elite_indices(pop)) next.push_back(pop[e]);

      const std::vector<double> wheel = selection_wheel(pop, params_.selection_shift);
      std::vector<Individual> offspring;
      offspring.reserve(params_.population - next.size());
      while (next.size() + offspring.size() < static_cast<size_t>(params_.population)) {
        auto pair = breed(pop, wheel, rng);
        offspring.push_back(std::move(pair.first));
        if (next.size() + offspring.size() < static_cast<size_t>(params_.population))
          offspring.push_back(std::move(pair.second));
      }
      evaluate_all(offspring, result.evaluations);
      retry_invalid(offspring, rng, result.evaluations,
                    [&](Rand& r) { return breed(pop, wheel, r).first; });

      for (Individual& child : offspring) next.push_back(std::move(child));
      pop = std::move(next);

      track_best(pop, result.best);
      record(gen, pop, result, observer);
    }

    result.final_population = std::move(pop);
    return result;
  }

 private:
  static bool better(const Individual& a, const Individual& b) {
    if (a.eval.valid != b.eval.valid) return a.eval.valid;
    return a.eval.fitness > b.eval.fitness;
  }

  void track_best(const std::vector<Individual>& pop, Individual& best) const {
    for (const Individual& ind : pop)
      if (best.genome.empty() || better(ind, best)) best = ind;
  }

  // Indices of the elite_count best individuals, earlier index winning ties.
  std::vector<int> elite_indices(const std::vector<Individual>& pop) const {
    std::vector<int> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return better(pop[a], pop[b]); });
    order.resize(params_.elite_count);
    return order;
  }

  std::pair<Individual, Individual> breed(const std::vector<Individual>& pop,
                                          const std::vector<double>& wheel, Rand& rng) const {
    const Genome& a = pop[wheel_pick(wheel, rng.u01())].genome;
    const Genome& b = pop[wheel_pick(wheel, rng.u01())].genome;
    Genome ca = a, cb = b;
    if (rng.chance(params_.crossover_rate)) {
      const size_t cut = 1 + rng.below(a.size() - 1);
      for (size_t i = cut; i < a.size(); ++i) {
        ca[i] = b[i];
        cb[i] = a[i];
      }
    }
    mutate(ca, rng);
    mutate(cb, rng);
    return {Individual{std::move(ca), {}}, Individual{std::move(cb), {}}};
  }

  void mutate(Genome& g, Rand& rng) const {
    switch (params_.mutation_scheme) {
      case MutationScheme::per_bit:
        for (auto& bit : g)
          if (rng.chance(params_.mutation_rate)) bit ^= 1;
        break;
      case MutationScheme::per_genome:
        if (rng.chance(params_.mutation_rate)) g[rng.below(g.size())] ^= 1;
        break;
    }
  }

  void evaluate_all(std::vector<Individual>& batch, std::uint64_t& evaluations) const {
    evaluations += batch.size();
    const int workers = std::min<int>(params_.workers, static_cast<int>(batch.size()));
    if (workers <= 1) {
      for (Individual& ind : batch) ind.eval = evaluator_.evaluate(ind.genome);
      return;
    }
    std::atomic<size_t> cursor{0};
    auto consume = [&] {
      for (size_t i; (i = cursor.fetch_add(1)) < batch.size();)
        batch[i].eval = evaluator_.evaluate(batch[i].genome);
    };
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) threads.emplace_back(consume);
    consume();
    for (std::thread& t : threads) t.join();
  }

  // Redraws invalid individuals in batches, in slot order, so the RNG stream
  // does not depend on evaluation order or thread count. After the last
  // round, whatever remains is admitted at the floor fitness.
  template <typename Regenerate>
  void retry_invalid(std::vector<Individual>& batch, Rand& rng, std::uint64_t& evaluations,
                     const Regenerate& regenerate) const {
    for (int round = 0; round < params_.max_retry_rounds; ++round) {
      std::vector<size_t> bad;
      for (size_t i = 0; i < batch.size(); ++i)
        if (!batch[i].eval.valid) bad.push_back(i);
      if (bad.empty()) return;

      std::vector<Individual> fresh;
      fresh.reserve(bad.size());
      for (size_t i = 0; i < bad.size(); ++i) fresh.push_back(regenerate(rng));
      evaluate_all(fresh, evaluations);
      for (size_t i = 0; i < bad.size(); ++i) batch[bad[i]] = std::move(fresh[i]);
    }
  }

  void record(int gen, const std::vector<Individual>& pop, EaResult& result,
              const Observer& observer) const {
    GenerationStats stats;
    stats.generation = gen;
    double best = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    int valid = 0;
    for (const Individual& ind : pop) {
      if (!ind.eval.valid) continue;
      ++valid;
      sum += ind.eval.fitness;
      best = std::max(best, ind.eval.fitness);
    }
    stats.valid_fraction = static_cast<double>(valid) / pop.size();
    if (valid > 0) {
      stats.best_fitness = best;
      stats.mean_fitness = sum / valid;
    } else {
      stats.best_fitness = stats.mean_fitness = evaluator_.params().invalid_fitness;
    }
    result.history.push_back(stats);
    if (observer) observer(stats, pop);
  }

  const Evaluator& evaluator_;
  EaParams params_;
};

// Baseline for judging the GA: the same sampler the GA starts from (including
// its element density), graded by the same objective, with a fixed budget.
inline Individual random_search(const Evaluator& evaluator, std::uint64_t budget,
                                std::uint64_t seed, double init_density = 0.5) {
  EaParams sampler_params;
  sampler_params.init_density = init_density;
  Evolver sampler(evaluator, sampler_params);
  Rand rng(seed);
  Individual best;
  for (std::uint64_t i = 0; i < budget; ++i) {
    Individual ind;
    ind.genome = sampler.sample_genome(rng);
    ind.eval = evaluator.evaluate(ind.genome);
    const bool take = best.genome.empty() ||
                      (ind.eval.valid != best.eval.valid ? ind.eval.valid
                                                         : ind.eval.fitness > best.eval.fitness);
    if (take) best = ind;
  }
  return best;
}

}  // namespace combot
