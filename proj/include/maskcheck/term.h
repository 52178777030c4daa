#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "maskcheck/expr.h"

namespace maskcheck {

// Tree view of an expression with n-ary xor clusters. For Op::Xor the kids
// are the non-xor, non-constant members and value holds the folded constant.
struct Term {
  Op op = Op::Const;
  uint64_t value = 0;  // constant, variable id, table id, shift amount, xor constant
  std::vector<Term> kids;

  friend bool operator==(const Term&, const Term&) = default;
};

// nullopt when the tree expansion would exceed budget nodes.
std::optional<Term> to_term(const ExprContext& ctx, Expr e, uint64_t budget);
std::optional<std::vector<Term>> to_terms(const ExprContext& ctx, std::span<const Expr> exprs,
                                          uint64_t budget);
Expr to_expr(ExprContext& ctx, const Term& t);
uint64_t term_size(const Term& t);
void term_vars(const Term& t, std::vector<VarId>& out);  // with repetition

}  // namespace maskcheck
