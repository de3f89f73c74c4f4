#include "bcvnn/search.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <thread>

#include "bcvnn/csv.hpp"
#include "bcvnn/error.hpp"

namespace bcvnn {

std::string genome_to_string(const Genome& genome) {
  std::string s;
  for (std::size_t i = 0; i < genome.size(); ++i) {
    if (i) s += '-';
    s += part_mode_letter(genome[i]);
  }
  return s;
}

Genome parse_genome(std::string_view text) {
  Genome g;
  std::size_t pos = 0;
  while (true) {
    const auto dash = text.find('-', pos);
    const auto token = text.substr(pos, dash == std::string_view::npos ? std::string_view::npos : dash - pos);
    require(token.size() == 1, ErrorCode::InvalidArgument,
            "malformed genome '" + std::string(text) + "' (expected letters R|I|B joined by '-')");
    g.push_back(part_mode_from_letter(token[0]));
    if (dash == std::string_view::npos) break;
    pos = dash + 1;
  }
  return g;
}

int dropout_count(const Genome& genome) {
  int n = 0;
  for (auto m : genome) n += m == PartMode::Both ? 2 : 1;
  return n;
}

bool genome_less(const Genome& a, const Genome& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](PartMode x, PartMode y) {
    return static_cast<int>(x) < static_cast<int>(y);
  });
}

bool Constraint::satisfied(const Genome& genome) const {
  const int n = dropout_count(genome);
  if (max_dropout && n > *max_dropout) return false;
  if (min_dropout && n < *min_dropout) return false;
  return true;
}

Objective Objective::weighted(double w_acc, double w_ece) {
  require(w_acc >= 0.0 && w_ece >= 0.0 && (w_acc > 0.0 || w_ece > 0.0), ErrorCode::InvalidArgument,
          "objective weights must be >= 0 and not both zero");
  return {Kind::Weighted, w_acc, w_ece};
}

double Objective::score(double accuracy, double ece) const {
  switch (kind) {
    case Kind::MaxAcc: return accuracy;
    case Kind::MinEce: return -ece;
    case Kind::Weighted: return w_acc * accuracy - w_ece * ece;
  }
  return accuracy;
}

Metrics MemoizedEvaluator::operator()(const Genome& genome) {
  const auto key = genome_to_string(genome);
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  Metrics m;
  try {
    m = fn_(genome);
  } catch (const std::exception& e) {
    fail(ErrorCode::Evaluator, "evaluating genome " + key + ": " + e.what());
  }
  require(std::isfinite(m.accuracy) && std::isfinite(m.ece), ErrorCode::Evaluator,
          "evaluator returned non-finite metrics for genome " + key);
  std::lock_guard lock(mutex_);
  auto [it, inserted] = memo_.emplace(key, m);
  if (inserted) ++calls_;
  return it->second;
}

std::size_t MemoizedEvaluator::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

bool MemoizedEvaluator::contains(const Genome& genome) const {
  std::lock_guard lock(mutex_);
  return memo_.count(genome_to_string(genome)) != 0;
}

FitnessRecord evaluate(const Genome& genome, MemoizedEvaluator& evaluator, const Objective& objective,
                       const Constraint& constraint) {
  require(!genome.empty(), ErrorCode::InvalidArgument, "empty genome");
  const auto m = evaluator(genome);
  FitnessRecord r;
  r.genome = genome;
  r.accuracy = m.accuracy;
  r.ece = m.ece;
  r.dropout_count = dropout_count(genome);
  r.feasible = constraint.satisfied(genome);
  r.fitness = objective.score(m.accuracy, m.ece);
  return r;
}

bool ranks_before(const FitnessRecord& a, const FitnessRecord& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.fitness != b.fitness) return a.fitness > b.fitness;
  return genome_less(a.genome, b.genome);
}

std::vector<FitnessRecord> select(std::span<const FitnessRecord> population, std::size_t k) {
  require(k >= 1, ErrorCode::InvalidArgument, "select needs k >= 1");
  std::vector<FitnessRecord> feasible;
  for (const auto& r : population) {
    if (r.feasible) feasible.push_back(r);
  }
  require(!feasible.empty(), ErrorCode::Infeasible,
          "no feasible configuration among " + std::to_string(population.size()) +
              " candidates; relax the dropout-count constraint");
  std::sort(feasible.begin(), feasible.end(), ranks_before);
  if (feasible.size() > k) feasible.resize(k);
  return feasible;
}

Genome mutate(const Genome& genome, double prob, Rng& rng) {
  require(prob >= 0.0 && prob <= 1.0, ErrorCode::InvalidArgument, "mutation probability must be in [0, 1]");
  Genome out = genome;
  for (auto& gene : out) {
    if (!rng.bernoulli(prob)) continue;
    // Pick one of the two other modes.
    const int shift = 1 + static_cast<int>(rng.below(2));
    gene = static_cast<PartMode>((static_cast<int>(gene) + shift) % 3);
  }
  return out;
}

Genome crossover(const Genome& a, const Genome& b, Rng& rng, double prob_b) {
  require(a.size() == b.size(), ErrorCode::InvalidArgument, "crossover parents differ in length");
  require(prob_b >= 0.0 && prob_b <= 1.0, ErrorCode::InvalidArgument, "crossover probability must be in [0, 1]");
  Genome child(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) child[i] = rng.bernoulli(prob_b) ? b[i] : a[i];
  return child;
}

Genome random_genome(std::size_t n, Rng& rng) {
  Genome g(n);
  for (auto& gene : g) gene = static_cast<PartMode>(rng.below(3));
  return g;
}

void validate(const SearchConfig& config) {
  require(config.genome_length >= 1, ErrorCode::InvalidArgument, "genome length must be >= 1");
  require(config.population_size >= 2, ErrorCode::InvalidArgument, "population_size must be >= 2");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  require(prob(config.mutation_portion) && prob(config.mutation_prob) && prob(config.crossover_prob),
          ErrorCode::InvalidArgument, "search probabilities must be in [0, 1]");
  require(config.iterations >= 1, ErrorCode::InvalidArgument, "iterations must be >= 1");
  if (config.objective.kind == Objective::Kind::Weighted) Objective::weighted(config.objective.w_acc, config.objective.w_ece);
}

namespace {

// Evaluates the not-yet-memoized genomes of one generation on several threads.
void prefetch(const std::vector<Genome>& population, MemoizedEvaluator& evaluator, unsigned threads) {
  std::vector<Genome> todo;
  std::set<std::string> seen;
  for (const auto& g : population) {
    if (!evaluator.contains(g) && seen.insert(genome_to_string(g)).second) todo.push_back(g);
  }
  if (todo.size() < 2) return;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(todo.size()));
  std::vector<std::exception_ptr> errors(todo.size());
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < todo.size(); i += threads) {
          try {
            evaluator(todo[i]);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

SearchResult run_search(const SearchConfig& config, MemoizedEvaluator& evaluator) {
  validate(config);
  const std::size_t n = config.genome_length;
  const std::size_t parent_count = std::max<std::size_t>(1, config.population_size / 2);
  const std::size_t offspring = config.population_size - 1;  // slot 0 holds the elite
  const auto mutants = static_cast<std::size_t>(std::lround(config.mutation_portion * static_cast<double>(offspring)));

  Rng init_rng(Rng::derive(config.seed, {0}));
  std::vector<Genome> population;
  for (std::size_t i = 0; i < config.population_size; ++i) population.push_back(random_genome(n, init_rng));

  SearchResult result;
  std::optional<FitnessRecord> best;
  std::map<std::string, FitnessRecord> evaluated;

  for (std::size_t gen = 0; gen < config.iterations; ++gen) {
    if (config.threads > 1) prefetch(population, evaluator, config.threads);
    std::vector<FitnessRecord> records;
    for (const auto& g : population) {
      auto r = evaluate(g, evaluator, config.objective, config.constraint);
      result.history.push_back({gen, r});
      evaluated.emplace(genome_to_string(g), r);
      if (r.feasible && (!best || ranks_before(r, *best))) best = r;
      records.push_back(std::move(r));
    }
    if (gen + 1 == config.iterations) break;

    // Distinct candidates; the elite competes even if it left the population.
    std::vector<FitnessRecord> candidates;
    std::set<std::string> seen;
    if (best) records.push_back(*best);
    for (const auto& r : records) {
      if (seen.insert(genome_to_string(r.genome)).second) candidates.push_back(r);
    }
    const auto parents = select(candidates, parent_count);

    std::vector<Genome> next{parents.front().genome};
    for (std::size_t slot = 0; slot < offspring; ++slot) {
      Rng rng(Rng::derive(config.seed, {gen + 1, slot + 1}));
      if (slot < mutants) {
        const auto& p = parents[rng.below(parents.size())].genome;
        next.push_back(mutate(p, config.mutation_prob, rng));
      } else {
        const auto& a = parents[rng.below(parents.size())].genome;
        const auto& b = parents[rng.below(parents.size())].genome;
        next.push_back(crossover(a, b, rng, config.crossover_prob));
      }
    }
    population = std::move(next);
  }

  require(best.has_value(), ErrorCode::Infeasible,
          "search found no configuration satisfying the dropout-count constraint");
  result.best = *best;
  std::vector<FitnessRecord> feasible;
  for (const auto& [key, r] : evaluated) {
    if (r.feasible) feasible.push_back(r);
  }
  result.pareto = pareto_front(feasible);
  return result;
}

std::vector<FitnessRecord> enumerate_all(std::size_t n, MemoizedEvaluator& evaluator, const Objective& objective,
                                         const Constraint& constraint) {
  require(n >= 1 && n <= kMaxEnumerationLength, ErrorCode::InvalidArgument,
          "enumeration length must be in [1, " + std::to_string(kMaxEnumerationLength) + "], got " +
              std::to_string(n));
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= 3;
  std::vector<FitnessRecord> records;
  records.reserve(total);
  Genome g(n);
  for (std::size_t index = 0; index < total; ++index) {
    std::size_t rest = index;
    for (std::size_t i = n; i-- > 0;) {
      g[i] = static_cast<PartMode>(rest % 3);
      rest /= 3;
    }
    records.push_back(evaluate(g, evaluator, objective, constraint));
  }
  std::sort(records.begin(), records.end(), ranks_before);
  return records;
}

std::vector<FitnessRecord> pareto_front(std::span<const FitnessRecord> records) {
  std::vector<FitnessRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(), [](const FitnessRecord& a, const FitnessRecord& b) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    if (a.ece != b.ece) return a.ece < b.ece;
    return genome_less(a.genome, b.genome);
  });
  std::vector<FitnessRecord> front;
  double best_ece_above = std::numeric_limits<double>::infinity();  // over strictly higher accuracy
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].accuracy == sorted[i].accuracy) ++j;
    const double group_min = sorted[i].ece;
    if (group_min < best_ece_above) {
      for (std::size_t k = i; k < j && sorted[k].ece == group_min; ++k) front.push_back(sorted[k]);
    }
    best_ece_above = std::min(best_ece_above, group_min);
    i = j;
  }
  return front;
}

EvaluatorFn table_evaluator(std::map<std::string, Metrics> table) {
  return [table = std::move(table)](const Genome& g) {
    const auto key = genome_to_string(g);
    auto it = table.find(key);
    require(it != table.end(), ErrorCode::Evaluator, "genome " + key + " missing from fitness table");
    return it->second;
  };
}

std::map<std::string, Metrics> read_fitness_table(std::istream& in) {
  const auto rows = csv::read_all(in);
  require(!rows.empty(), ErrorCode::Format, "empty fitness table");
  const auto& header = rows.front();
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), ErrorCode::Format, "fitness table lacks a '" + name + "' column");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto cg = column("genome"), ca = column("accuracy"), ce = column("ece");
  std::map<std::string, Metrics> table;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    require(row.size() == header.size(), ErrorCode::Format, "fitness table row " + std::to_string(r) + " is ragged");
    const auto key = genome_to_string(parse_genome(row[cg]));
    table[key] = Metrics{csv::parse_double(row[ca]), csv::parse_double(row[ce])};
  }
  return table;
}

namespace {

std::vector<std::string> record_fields(const FitnessRecord& r) {
  return {genome_to_string(r.genome), csv::format_double(r.accuracy), csv::format_double(r.ece),
          std::to_string(r.dropout_count), r.feasible ? "1" : "0", csv::format_double(r.fitness)};
}

}  // namespace

void write_history_csv(std::ostream& out, std::span<const HistoryEntry> history) {
  csv::write_row(out, {"generation", "genome", "accuracy", "ece", "dropout_count", "feasible", "fitness"});
  for (const auto& h : history) {
    auto fields = record_fields(h.record);
    fields.insert(fields.begin(), std::to_string(h.generation));
    csv::write_row(out, fields);
  }
}

void write_records_csv(std::ostream& out, std::span<const FitnessRecord> records) {
  csv::write_row(out, {"rank", "genome", "accuracy", "ece", "dropout_count", "feasible", "fitness"});
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto fields = record_fields(records[i]);
    fields.insert(fields.begin(), std::to_string(i + 1));
    csv::write_row(out, fields);
  }
}

}  // namespace bcvnn
