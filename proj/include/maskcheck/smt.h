#pragma once

#include <span>
#include <string>
#include <vector>

#include "maskcheck/expr.h"

namespace maskcheck {

struct SmtOptions {
  int max_bits = 12;  // width * number of randoms
};

struct SmtCensus {
  std::vector<int> unprimed;  // program-logic equalities per expression
  std::vector<int> primed;
  int indicators = 0;
  int disequalities = 0;
};

struct SmtFormula {
  std::string text;
  std::string manifest;  // JSON describing how to read the answer
  SmtCensus census;
};

// sat means some outcome tuple has different counts under two private
// valuations, i.e. the set is leaky; unsat means secret independent.
SmtFormula emit_smt(const ExprContext& ctx, std::span<const Expr> exprs,
                    std::span<const std::string> labels, const SmtOptions& opts = {});

enum class SolverAnswer { Sat, Unsat, Unknown, Error };

const char* answer_name(SolverAnswer a);

// Runs "cmd path" and reads the first answer token.
SolverAnswer run_solver(const std::string& cmd, const std::string& path, std::string* output = nullptr);

}  // namespace maskcheck
