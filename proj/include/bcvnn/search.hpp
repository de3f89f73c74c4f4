#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcvnn/network.hpp"

namespace bcvnn {

/// "R-B-I" notation.
std::string genome_to_string(const Genome& genome);
Genome parse_genome(std::string_view text);

/// Number of instantiated masks: one per single-part layer, two per Both.
int dropout_count(const Genome& genome);

/// Lexicographic order with R < I < B; used for deterministic tie-breaks.
bool genome_less(const Genome& a, const Genome& b);

/// Inclusive bounds on dropout_count.
struct Constraint {
  std::optional<int> max_dropout;
  std::optional<int> min_dropout;

  bool satisfied(const Genome& genome) const;
};

struct Objective {
  enum class Kind { MaxAcc, MinEce, Weighted };
  Kind kind = Kind::MaxAcc;
  double w_acc = 1.0;
  double w_ece = 0.0;

  static Objective max_acc() { return {}; }
  static Objective min_ece() { return {Kind::MinEce, 0.0, 1.0}; }
  static Objective weighted(double w_acc, double w_ece);

  double score(double accuracy, double ece) const;
};

struct Metrics {
  double accuracy = 0.0;
  double ece = 0.0;
};

using EvaluatorFn = std::function<Metrics(const Genome&)>;

struct FitnessRecord {
  Genome genome;
  double accuracy = 0.0;
  double ece = 0.0;
  int dropout_count = 0;
  bool feasible = true;
  double fitness = 0.0;
};

/// Calls the wrapped evaluator at most once per distinct genome. Safe to call
/// from several threads; the wrapped function must be too.
class MemoizedEvaluator {
 public:
  explicit MemoizedEvaluator(EvaluatorFn fn) : fn_(std::move(fn)) {}

  Metrics operator()(const Genome& genome);
  std::size_t calls() const;
  bool contains(const Genome& genome) const;

 private:
  EvaluatorFn fn_;
  mutable std::mutex mutex_;
  std::map<std::string, Metrics> memo_;
  std::size_t calls_ = 0;
};

FitnessRecord evaluate(const Genome& genome, MemoizedEvaluator& evaluator, const Objective& objective,
                       const Constraint& constraint);

/// Best-first: higher fitness, then lexicographically smaller genome.
bool ranks_before(const FitnessRecord& a, const FitnessRecord& b);

/// Top-k feasible records. Throws ErrorCode::Infeasible when none is feasible.
std::vector<FitnessRecord> select(std::span<const FitnessRecord> population, std::size_t k);

/// Each gene moves to one of the other two modes with probability prob.
Genome mutate(const Genome& genome, double prob, Rng& rng);

/// Each gene comes from b with probability prob_b, otherwise from a.
Genome crossover(const Genome& a, const Genome& b, Rng& rng, double prob_b = 0.5);

Genome random_genome(std::size_t n, Rng& rng);

struct SearchConfig {
  std::size_t genome_length = 3;
  std::size_t population_size = 8;
  double mutation_portion = 0.5;
  double mutation_prob = 0.5;
  double crossover_prob = 0.5;
  std::size_t iterations = 10;
  Objective objective;
  Constraint constraint;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

void validate(const SearchConfig& config);

struct HistoryEntry {
  std::size_t generation = 0;
  FitnessRecord record;
};

struct SearchResult {
  FitnessRecord best;
  std::vector<HistoryEntry> history;
  std::vector<FitnessRecord> pareto;
};

SearchResult run_search(const SearchConfig& config, MemoizedEvaluator& evaluator);

inline constexpr std::size_t kMaxEnumerationLength = 10;

/// All 3^n genomes, ranked best-first (infeasible after feasible).
std::vector<FitnessRecord> enumerate_all(std::size_t n, MemoizedEvaluator& evaluator,
                                         const Objective& objective = {}, const Constraint& constraint = {});

/// Records not dominated in (accuracy up, ece down), in ranked order.
std::vector<FitnessRecord> pareto_front(std::span<const FitnessRecord> records);

/// Genome,accuracy,ece CSV loaded into a lookup evaluator.
EvaluatorFn table_evaluator(std::map<std::string, Metrics> table);
std::map<std::string, Metrics> read_fitness_table(std::istream& in);

void write_history_csv(std::ostream& out, std::span<const HistoryEntry> history);
void write_records_csv(std::ostream& out, std::span<const FitnessRecord> records);

}  // namespace bcvnn
