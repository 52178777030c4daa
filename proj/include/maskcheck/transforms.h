#pragma once

#include <optional>
#include <span>
#include <vector>

#include "maskcheck/expr.h"

namespace maskcheck {

enum class TransformLevel { Plain, Dom, Col };

const char* level_name(TransformLevel level);

struct TransformStep {
  enum Kind { Alg, Dom, Col } kind = Alg;
  Expr replaced;       // Dom: every copy of replaced becomes var
  VarId var = 0;       // Dom: dominated random; Col: fresh variable
  VarId first = 0;     // Col: collapsed pair
  VarId second = 0;
};

struct TransformTrace {
  std::vector<TransformStep> steps;
  int dom_steps() const;
  int col_steps() const;
};

struct Transformed {
  std::vector<Expr> exprs;
  TransformTrace trace;
};

Expr simplify_alg(ExprContext& ctx, Expr e);
std::vector<Expr> simplify_alg(ExprContext& ctx, std::span<const Expr> exprs);

// Replaces a largest random-dominated subexpression by its random, to fixpoint.
Transformed simplify_dom(ExprContext& ctx, std::span<const Expr> exprs);
// Collapses same-kind variable pairs that only occur together in xor clusters.
Transformed simplify_col(ExprContext& ctx, std::span<const Expr> exprs);

// Alg, then Dom to fixpoint, then (Col; Alg; Dom) to fixpoint, as the level allows.
Transformed transform(ExprContext& ctx, std::span<const Expr> exprs, TransformLevel level);

// Re-applies a trace to a (typically larger) set; nullopt if a step is illegal there.
std::optional<std::vector<Expr>> replay(ExprContext& ctx, const TransformTrace& trace,
                                        std::span<const Expr> exprs);

// Number of tree occurrences of each variable across the set.
std::vector<uint64_t> occurrence_counts(const ExprContext& ctx, std::span<const Expr> exprs);

// Tree expansion cap for cluster based rewriting.
constexpr uint64_t kTermBudget = 200000;

}  // namespace maskcheck
