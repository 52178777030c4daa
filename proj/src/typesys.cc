#include "maskcheck/typesys.h"

#include <algorithm>
#include <stdexcept>

namespace maskcheck {

const char* type_name(DistType t) {
  switch (t) {
    case DistType::Uniform: return "uniform";
    case DistType::SecretIndependent: return "secret-independent";
    case DistType::Leaky: return "leaky";
    case DistType::Unknown: return "unknown";
  }
  return "?";
}

namespace {

bool uniform_or_si(DistType t) { return t == DistType::Uniform || t == DistType::SecretIndependent; }

}  // namespace

TypeChecker::TypeChecker(const Program& prog) : prog_(prog) {}

Expr TypeChecker::lambda(VarId x) {
  if (x >= lambda_.size()) {
    lambda_.resize(x + 1);
    have_lambda_.resize(x + 1, false);
  }
  if (!have_lambda_[x]) {
    lambda_[x] = simplify_alg(ctx(), prog_.computation(x));
    have_lambda_[x] = true;
  }
  return lambda_[x];
}

std::vector<Expr> TypeChecker::lambdas(std::span<const VarId> set) {
  std::vector<Expr> out;
  out.reserve(set.size());
  for (VarId x : set) out.push_back(lambda(x));
  return out;
}

DistType TypeChecker::operand_type(const Operand& o) {
  return o.is_const ? DistType::SecretIndependent : infer_var(o.var);
}

DistType TypeChecker::infer_var(VarId x) {
  if (x >= first_order_.size()) first_order_.resize(x + 1, -1);
  if (first_order_[x] >= 0) return static_cast<DistType>(first_order_[x]);

  auto done = [&](DistType t) {
    first_order_[x] = static_cast<int8_t>(t);
    return t;
  };
  switch (prog_.kind(x)) {
    case VarKind::Random: return done(DistType::Uniform);
    case VarKind::Public: return done(DistType::SecretIndependent);
    case VarKind::Private: return done(DistType::Leaky);
    case VarKind::Intermediate: break;
  }
  ExprContext& c = ctx();
  Expr lam = lambda(x);
  if (!c.dom(lam).empty()) return done(DistType::Uniform);
  if (c.vars_of_kind(lam, VarKind::Private).empty()) return done(DistType::SecretIndependent);

  const Assignment* a = prog_.definition(x);
  if (!a) return done(DistType::Unknown);
  switch (a->op) {
    case Op::Var:
    case Op::Not:
    case Op::Table: return done(operand_type(a->args[0]));
    case Op::Shl:
    case Op::Shr:
      return done(uniform_or_si(operand_type(a->args[0])) ? DistType::SecretIndependent
                                                          : DistType::Unknown);
    default: break;
  }

  const Operand& o1 = a->args[0];
  const Operand& o2 = a->args[1];
  DistType t1 = operand_type(o1);
  DistType t2 = operand_type(o2);
  if (o1 == o2) {
    if (a->op == Op::Xor || a->op == Op::Sub) return done(DistType::SecretIndependent);
    if (a->op == Op::And || a->op == Op::Or) return done(t1);
    return done(uniform_or_si(t1) ? DistType::SecretIndependent : DistType::Unknown);
  }
  auto dom_of = [&](const Operand& o) { return o.is_const ? VarSet{} : c.dom(lambda(o.var)); };
  auto rvars_of = [&](const Operand& o) { return o.is_const ? VarSet{} : c.rvars(lambda(o.var)); };
  VarSet d1 = dom_of(o1), d2 = dom_of(o2), r1 = rvars_of(o1), r2 = rvars_of(o2);

  bool multiplicative = a->op == Op::And || a->op == Op::Or || a->op == Op::GfMul || a->op == Op::Mul;
  if (multiplicative) {
    bool fresh1 = !set_minus(d1, r2).empty();
    bool fresh2 = !set_minus(d2, r1).empty();
    if (t1 == DistType::Uniform && t2 == DistType::Uniform && (fresh1 || fresh2)) {
      return done(DistType::SecretIndependent);
    }
    if (t1 == DistType::Leaky && t2 == DistType::Uniform && fresh2) return done(DistType::Leaky);
    if (t2 == DistType::Leaky && t1 == DistType::Uniform && fresh1) return done(DistType::Leaky);
  }
  if (uniform_or_si(t1) && uniform_or_si(t2) && set_disjoint(r1, r2)) {
    return done(DistType::SecretIndependent);
  }
  return done(DistType::Unknown);
}

bool TypeChecker::dominant_witness(size_t i, std::span<const size_t> rest,
                                   std::span<const Expr> exprs, VarId* witness) const {
  ExprContext& c = ctx();
  VarSet others;
  for (size_t j : rest) {
    if (j != i) others = set_union(others, c.rvars(exprs[j]));
  }
  VarSet free = set_minus(c.dom(exprs[i]), others);
  if (free.empty()) return false;
  *witness = free.front();
  return true;
}

bool TypeChecker::peel_uniform(std::vector<size_t>& rest, std::span<const Expr> exprs,
                               std::span<const VarId> set, std::vector<ProofStep>& proof) {
  bool progress = true;
  while (!rest.empty() && progress) {
    progress = false;
    for (size_t k = 0; k < rest.size(); ++k) {
      VarId w;
      if (dominant_witness(rest[k], rest, exprs, &w)) {
        proof.push_back(ProofStep{"Rud", set[rest[k]], w, {}});
        rest.erase(rest.begin() + static_cast<long>(k));
        progress = true;
        break;
      }
    }
  }
  return rest.empty();
}

bool TypeChecker::no_key(std::span<const size_t> rest, std::span<const Expr> exprs) const {
  for (size_t i : rest) {
    if (!ctx().vars_of_kind(exprs[i], VarKind::Private).empty()) return false;
  }
  return true;
}

bool TypeChecker::sid2_applicable(VarId x, std::span<const size_t> rest,
                                  std::span<const VarId> set) const {
  const Assignment* a = prog_.definition(x);
  if (!a) return false;
  for (const Operand& o : a->args) {
    if (o.is_const || prog_.kind(o.var) == VarKind::Public) continue;
    bool found = false;
    for (size_t j : rest) {
      if (set[j] == o.var && o.var != x) found = true;
    }
    if (!found) return false;
  }
  return true;
}

Judgement TypeChecker::derive(std::span<const VarId> set, std::span<const Expr> exprs,
                              TransformLevel level, TransformTrace trace) {
  ++derivations_;
  if (set.size() != exprs.size()) throw std::invalid_argument("set and expressions differ in size");
  Judgement j;
  j.set.assign(set.begin(), set.end());
  j.exprs.assign(exprs.begin(), exprs.end());
  j.level = level;
  j.trace = std::move(trace);

  for (VarId x : set) {
    if (infer_var(x) == DistType::Leaky) {
      j.type = DistType::Leaky;
      j.proof.push_back(ProofStep{"Leaky-Member", x, 0, {}});
      return j;
    }
  }

  std::vector<size_t> all(set.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;

  std::vector<size_t> rest = all;
  std::vector<ProofStep> proof;
  if (peel_uniform(rest, exprs, set, proof)) {
    j.type = DistType::Uniform;
    j.proof = std::move(proof);
    j.proof.push_back(ProofStep{"Empty", 0, 0, {}});
    return j;
  }

  rest = all;
  proof.clear();
  while (true) {
    bool progress = false;
    // Sid2, latest definitions first.
    bool again = true;
    while (again) {
      again = false;
      size_t pick = rest.size();
      for (size_t k = 0; k < rest.size(); ++k) {
        if (prog_.kind(set[rest[k]]) != VarKind::Intermediate) continue;
        if (!sid2_applicable(set[rest[k]], rest, set)) continue;
        if (pick == rest.size() || set[rest[k]] > set[rest[pick]]) pick = k;
      }
      if (pick < rest.size()) {
        proof.push_back(ProofStep{"Sid2", set[rest[pick]], 0, {}});
        rest.erase(rest.begin() + static_cast<long>(pick));
        again = progress = true;
      }
    }
    // Sid1.
    for (size_t k = 0; k < rest.size();) {
      const VarSet& vs = ctx().vars(exprs[rest[k]]);
      bool pub = std::all_of(vs.begin(), vs.end(),
                             [&](VarId v) { return ctx().kind(v) == VarKind::Public; });
      if (pub) {
        proof.push_back(ProofStep{"Sid1", set[rest[k]], 0, {}});
        rest.erase(rest.begin() + static_cast<long>(k));
        progress = true;
      } else {
        ++k;
      }
    }
    // Base rules.
    std::vector<VarId> rest_vars;
    for (size_t i : rest) rest_vars.push_back(set[i]);
    if (rest.empty()) {
      proof.push_back(ProofStep{"Empty", 0, 0, {}});
      break;
    }
    if (rest.size() == 1 && uniform_or_si(infer_var(set[rest[0]]))) {
      proof.push_back(ProofStep{"First-Order", set[rest[0]], 0, rest_vars});
      break;
    }
    if (no_key(rest, exprs)) {
      proof.push_back(ProofStep{"No-Key", 0, 0, rest_vars});
      break;
    }
    // Sid3, one element at a time.
    for (size_t k = 0; k < rest.size(); ++k) {
      VarId w;
      if (dominant_witness(rest[k], rest, exprs, &w)) {
        proof.push_back(ProofStep{"Sid3", set[rest[k]], w, {}});
        rest.erase(rest.begin() + static_cast<long>(k));
        progress = true;
        break;
      }
    }
    if (!progress) {
      j.type = DistType::Unknown;
      return j;
    }
  }
  j.type = DistType::SecretIndependent;
  j.proof = std::move(proof);
  return j;
}

Judgement TypeChecker::infer_set(std::span<const VarId> set, TransformLevel max_level) {
  std::vector<VarId> key(set.begin(), set.end());
  key.push_back(static_cast<VarId>(max_level) | 0x80000000u);
  auto hit = cache_.find(key);
  if (hit != cache_.end()) return hit->second;

  std::vector<Expr> lam = lambdas(set);
  Judgement j = derive(set, lam, TransformLevel::Plain);
  for (TransformLevel level : {TransformLevel::Dom, TransformLevel::Col}) {
    if (j.proved() || j.type == DistType::Leaky || level > max_level) break;
    Transformed t = transform(ctx(), lam, level);
    j = derive(set, t.exprs, level, std::move(t.trace));
  }
  cache_.emplace(std::move(key), j);
  return j;
}

bool TypeChecker::verify(const Judgement& j) {
  ExprContext& c = ctx();
  if (j.set.size() != j.exprs.size()) return false;
  std::vector<Expr> start = lambdas(j.set);
  auto replayed = replay(c, j.trace, start);
  if (!replayed || *replayed != j.exprs) return false;

  if (j.type == DistType::Leaky) {
    return j.proof.size() == 1 && j.proof[0].rule == "Leaky-Member" &&
           std::find(j.set.begin(), j.set.end(), j.proof[0].var) != j.set.end() &&
           infer_var(j.proof[0].var) == DistType::Leaky;
  }
  if (!j.proved()) return true;

  std::vector<size_t> rest(j.set.size());
  for (size_t i = 0; i < rest.size(); ++i) rest[i] = i;
  auto position = [&](VarId x) -> long {
    for (size_t k = 0; k < rest.size(); ++k) {
      if (j.set[rest[k]] == x) return static_cast<long>(k);
    }
    return -1;
  };
  for (const auto& step : j.proof) {
    if (step.rule == "Empty") return rest.empty();
    if (step.rule == "No-Key") return no_key(rest, j.exprs) && j.type == DistType::SecretIndependent;
    if (step.rule == "First-Order") {
      return rest.size() == 1 && j.set[rest[0]] == step.var && uniform_or_si(infer_var(step.var)) &&
             j.type == DistType::SecretIndependent;
    }
    long k = position(step.var);
    if (k < 0) return false;
    size_t i = rest[static_cast<size_t>(k)];
    if (step.rule == "Rud" || step.rule == "Sid3") {
      if (step.rule == "Rud" && j.type != DistType::Uniform) return false;
      if (!set_contains(c.dom(j.exprs[i]), step.witness)) return false;
      for (size_t o : rest) {
        if (o != i && set_contains(c.rvars(j.exprs[o]), step.witness)) return false;
      }
    } else if (step.rule == "Sid2") {
      if (!sid2_applicable(step.var, rest, j.set)) return false;
    } else if (step.rule == "Sid1") {
      for (VarId v : c.vars(j.exprs[i])) {
        if (c.kind(v) != VarKind::Public) return false;
      }
    } else {
      return false;
    }
    rest.erase(rest.begin() + k);
  }
  return false;
}

}  // namespace maskcheck
