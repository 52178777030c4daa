#pragma once

#include <memory>
#include <string>
#include <vector>

#include "maskcheck/expr.h"

namespace maskcheck {

struct SourceLoc {
  std::string file;
  int line = 0;
  int col = 0;
};

struct Operand {
  bool is_const = false;
  VarId var = 0;
  Value value = 0;

  static Operand of_var(VarId v) { return {false, v, 0}; }
  static Operand of_const(Value c) { return {true, 0, c}; }
  friend bool operator==(const Operand&, const Operand&) = default;
};

// x <- op(args). Op::Var is a plain copy of args[0].
struct Assignment {
  VarId target = 0;
  Op op = Op::Var;
  std::vector<Operand> args;
  uint64_t param = 0;  // table id or shift amount
  bool preshare = false;
  SourceLoc loc;
};

// An elaborated straight-line program.
class Program {
 public:
  explicit Program(int width) : ctx(std::make_shared<ExprContext>(width)) {}

  std::shared_ptr<ExprContext> ctx;
  std::vector<Assignment> assignments;
  std::vector<VarId> publics, privates, randoms, intermediates;
  std::vector<VarId> observables;  // ascending ids
  std::vector<VarId> returns;
  std::string file;

  int width() const { return ctx->width(); }
  const std::string& name(VarId v) const { return ctx->name(v); }
  VarKind kind(VarId v) const { return ctx->kind(v); }

  // Builds E(x) for every variable; call after assignments are final.
  void finalize();
  Expr computation(VarId v) const;
  const Assignment* definition(VarId v) const;
  // Observables whose computation depends on a non-public variable.
  std::vector<VarId> check_set() const;
  VarId find(const std::string& name) const;
  std::vector<VarId> find_all(const std::vector<std::string>& names) const;
  std::vector<Expr> computations(const std::vector<VarId>& vars) const;

 private:
  std::vector<int64_t> def_;
  std::vector<Expr> comp_;
};

}  // namespace maskcheck
