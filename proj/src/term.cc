#include "maskcheck/term.h"

namespace maskcheck {

namespace {

bool expand(const ExprContext& ctx, NodeId id, uint64_t& budget, Term& out);

bool collect_xor(const ExprContext& ctx, NodeId id, uint64_t& budget, Term& cluster) {
  const Node& n = ctx.node(id);
  if (n.op == Op::Xor) {
    return collect_xor(ctx, n.a, budget, cluster) && collect_xor(ctx, n.b, budget, cluster);
  }
  if (n.op == Op::Const) {
    cluster.value ^= n.value;
    return true;
  }
  Term member;
  if (!expand(ctx, id, budget, member)) return false;
  cluster.kids.push_back(std::move(member));
  return true;
}

bool expand(const ExprContext& ctx, NodeId id, uint64_t& budget, Term& out) {
  if (budget == 0) return false;
  --budget;
  const Node& n = ctx.node(id);
  out.op = n.op;
  out.value = n.value;
  out.kids.clear();
  switch (n.op) {
    case Op::Const:
    case Op::Var: return true;
    case Op::Xor:
      out.value = 0;
      return collect_xor(ctx, id, budget, out);
    case Op::Not:
    case Op::Table:
    case Op::Shl:
    case Op::Shr:
      out.kids.resize(1);
      return expand(ctx, n.a, budget, out.kids[0]);
    default:
      out.value = 0;
      out.kids.resize(2);
      return expand(ctx, n.a, budget, out.kids[0]) && expand(ctx, n.b, budget, out.kids[1]);
  }
}

}  // namespace

std::optional<Term> to_term(const ExprContext& ctx, Expr e, uint64_t budget) {
  Term t;
  if (!expand(ctx, e.id, budget, t)) return std::nullopt;
  return t;
}

std::optional<std::vector<Term>> to_terms(const ExprContext& ctx, std::span<const Expr> exprs,
                                          uint64_t budget) {
  std::vector<Term> out;
  for (Expr e : exprs) {
    Term t;
    if (!expand(ctx, e.id, budget, t)) return std::nullopt;
    out.push_back(std::move(t));
  }
  return out;
}

Expr to_expr(ExprContext& ctx, const Term& t) {
  switch (t.op) {
    case Op::Const: return ctx.constant(static_cast<Value>(t.value));
    case Op::Var: return ctx.variable(static_cast<VarId>(t.value));
    case Op::Xor: {
      if (t.kids.empty()) return ctx.constant(static_cast<Value>(t.value));
      Expr e = to_expr(ctx, t.kids[0]);
      for (size_t i = 1; i < t.kids.size(); ++i) e = ctx.binary(Op::Xor, e, to_expr(ctx, t.kids[i]));
      if (t.value != 0) e = ctx.binary(Op::Xor, e, ctx.constant(static_cast<Value>(t.value)));
      return e;
    }
    case Op::Not: return ctx.unary(Op::Not, to_expr(ctx, t.kids[0]));
    case Op::Table: return ctx.lookup(static_cast<uint32_t>(t.value), to_expr(ctx, t.kids[0]));
    case Op::Shl:
    case Op::Shr: return ctx.shift(t.op, to_expr(ctx, t.kids[0]), static_cast<uint32_t>(t.value));
    default: return ctx.binary(t.op, to_expr(ctx, t.kids[0]), to_expr(ctx, t.kids[1]));
  }
}

uint64_t term_size(const Term& t) {
  uint64_t n = 1;
  for (const auto& k : t.kids) n += term_size(k);
  return n;
}

void term_vars(const Term& t, std::vector<VarId>& out) {
  if (t.op == Op::Var) out.push_back(static_cast<VarId>(t.value));
  for (const auto& k : t.kids) term_vars(k, out);
}

}  // namespace maskcheck
