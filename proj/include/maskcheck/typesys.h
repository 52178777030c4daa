#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "maskcheck/program.h"
#include "maskcheck/transforms.h"

namespace maskcheck {

enum class DistType { Uniform, SecretIndependent, Leaky, Unknown };

const char* type_name(DistType t);

struct ProofStep {
  std::string rule;  // Rud, Sid1, Sid2, Sid3, No-Key, First-Order, Empty, Leaky-Member
  VarId var = 0;       // peeled or offending element
  VarId witness = 0;   // dominant random for Rud and Sid3
  std::vector<VarId> rest;  // remaining set for base rules
};

struct Judgement {
  std::vector<VarId> set;
  std::vector<Expr> exprs;  // expressions the proof refers to, positional with set
  DistType type = DistType::Unknown;
  TransformLevel level = TransformLevel::Plain;
  TransformTrace trace;
  std::vector<ProofStep> proof;

  bool proved() const { return type == DistType::Uniform || type == DistType::SecretIndependent; }
};

class TypeChecker {
 public:
  explicit TypeChecker(const Program& prog);

  const Program& program() const { return prog_; }
  ExprContext& ctx() const { return *prog_.ctx; }

  // Simply_Alg of the computation of x.
  Expr lambda(VarId x);
  std::vector<Expr> lambdas(std::span<const VarId> set);

  // First-order type of a single variable.
  DistType infer_var(VarId x);

  // Tries the plain set, then each transformation level up to max_level.
  Judgement infer_set(std::span<const VarId> set, TransformLevel max_level = TransformLevel::Col);

  // Derivation on given expressions of the set.
  Judgement derive(std::span<const VarId> set, std::span<const Expr> exprs, TransformLevel level,
                   TransformTrace trace = {});

  // Re-checks the premises of every logged step.
  bool verify(const Judgement& j);

  uint64_t derivations() const { return derivations_; }

 private:
  DistType operand_type(const Operand& o);
  bool peel_uniform(std::vector<size_t>& rest, std::span<const Expr> exprs,
                    std::span<const VarId> set, std::vector<ProofStep>& proof);
  bool no_key(std::span<const size_t> rest, std::span<const Expr> exprs) const;
  bool sid2_applicable(VarId x, std::span<const size_t> rest, std::span<const VarId> set) const;
  bool dominant_witness(size_t i, std::span<const size_t> rest, std::span<const Expr> exprs,
                        VarId* witness) const;

  const Program& prog_;
  std::vector<int8_t> first_order_;  // -1 unknown
  std::vector<Expr> lambda_;
  std::vector<bool> have_lambda_;
  std::map<std::vector<VarId>, Judgement> cache_;
  uint64_t derivations_ = 0;
};

}  // namespace maskcheck
