#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "maskcheck/expr.h"

namespace maskcheck {

struct CountBudget {
  int max_bits = 32;  // applies to m * width and to the enumeration bits
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Joint distribution of an observable tuple, as sorted (index, count) pairs
// with nonzero counts. index = sum of c_i * |I|^i.
class Histogram {
 public:
  Histogram() = default;
  explicit Histogram(std::vector<std::pair<uint64_t, uint64_t>> entries);

  const std::vector<std::pair<uint64_t, uint64_t>>& entries() const { return entries_; }
  uint64_t count(uint64_t index) const;
  uint64_t total() const;
  friend bool operator==(const Histogram&, const Histogram&) = default;

 private:
  std::vector<std::pair<uint64_t, uint64_t>> entries_;
};

struct Witness {
  std::vector<std::pair<VarId, Value>> publics;
  std::vector<std::pair<VarId, Value>> private_a;  // reference valuation
  std::vector<std::pair<VarId, Value>> private_b;
  std::vector<Value> tuple;
  uint64_t count_a = 0;
  uint64_t count_b = 0;
  friend bool operator==(const Witness&, const Witness&) = default;
};

enum class CountOutcome { SecretIndependent, Leaky };

struct CountVerdict {
  CountOutcome outcome = CountOutcome::SecretIndependent;
  std::optional<Witness> witness;
  uint64_t evaluations = 0;
};

// An observable set compiled to a straight-line evaluation tape.
class CountingProblem {
 public:
  CountingProblem(const ExprContext& ctx, std::span<const Expr> exprs, const CountBudget& budget = {});

  const std::vector<VarId>& publics() const { return publics_; }
  const std::vector<VarId>& privates() const { return privates_; }
  const std::vector<VarId>& randoms() const { return randoms_; }
  size_t arity() const { return outputs_.size(); }
  int width() const { return field_.width(); }
  uint64_t domain() const { return field_.size(); }
  uint64_t random_space() const { return pow(randoms_.size()); }
  uint64_t tuple_space() const { return pow(outputs_.size()); }
  bool dense() const { return tuple_space() <= kDenseLimit; }

  // Histogram for one valuation (values ordered as publics() and privates()).
  Histogram count(std::span<const Value> pub, std::span<const Value> priv) const;
  Histogram count_parallel(std::span<const Value> pub, std::span<const Value> priv, int workers) const;

  std::vector<Value> decode(uint64_t index) const;
  uint64_t encode(std::span<const Value> tuple) const;

  // Evaluates the tuple index for a random assignment given by digits.
  uint64_t eval(std::vector<Value>& regs) const;
  std::vector<Value> make_registers(std::span<const Value> pub, std::span<const Value> priv) const;
  size_t random_slot(size_t i) const { return publics_.size() + privates_.size() + i; }

  static constexpr uint64_t kDenseLimit = uint64_t{1} << 16;

 private:
  struct Instr {
    Op op;
    uint32_t dst, a, b;
    uint64_t imm;
  };
  uint64_t pow(size_t n) const { return uint64_t{1} << (field_.width() * n); }

  Field field_;
  std::vector<VarId> publics_, privates_, randoms_;
  std::vector<Instr> tape_;
  std::vector<uint32_t> outputs_;
  std::vector<Value> constants_;  // register image for constants
  uint32_t num_regs_ = 0;
  std::vector<std::vector<Value>> tables_;
  std::vector<Value> gf_table_;  // width <= 8
};

// Serial reference enumeration.
CountVerdict bf_decide(const CountingProblem& p);
// Same verdict and witness, random space split into tiles across workers.
CountVerdict parallel_decide(const CountingProblem& p, int workers);

// Recomputes both histograms of the witness valuations on p and confirms the difference.
bool verify_witness(const CountingProblem& p, const Witness& w);

}  // namespace maskcheck
