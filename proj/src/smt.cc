#include "maskcheck/smt.h"

#include <array>
#include <cstdio>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

#include "maskcheck/counting.h"

namespace maskcheck {

namespace {

std::string quote(const std::string& s) { return "|" + s + "|"; }

class Emitter {
 public:
  Emitter(const ExprContext& ctx) : ctx_(ctx), w_(ctx.width()) {}

  std::string lit(uint64_t v) const {
    return "(_ bv" + std::to_string(v & ctx_.field().mask()) + " " + std::to_string(w_) + ")";
  }
  std::string sort() const { return "(_ BitVec " + std::to_string(w_) + ")"; }

  std::string gfmul_def() const {
    std::ostringstream o;
    o << "(define-fun gfmul ((a " << sort() << ") (b " << sort() << ")) " << sort() << "\n";
    if (w_ == 1) {
      o << "  (bvand a b))\n";
      return o.str();
    }
    uint32_t low = ctx_.field().poly() & ctx_.field().mask();
    std::string close;
    o << "  (let ((a0 a))\n";
    close += ")";
    for (int i = 1; i < w_; ++i) {
      std::string prev = "a" + std::to_string(i - 1);
      o << "  (let ((a" << i << " (bvxor (bvshl " << prev << " " << lit(1) << ") (ite (= ((_ extract "
        << w_ - 1 << " " << w_ - 1 << ") " << prev << ") #b1) " << lit(low) << " " << lit(0)
        << "))))\n";
      close += ")";
    }
    std::string sum = lit(0);
    for (int i = 0; i < w_; ++i) {
      sum = "(bvxor " + sum + " (ite (= ((_ extract " + std::to_string(i) + " " + std::to_string(i) +
            ") b) #b1) a" + std::to_string(i) + " " + lit(0) + "))";
    }
    o << "  " << sum << close << ")\n";
    return o.str();
  }

  std::string table_def(uint32_t t) const {
    const Table& tab = ctx_.table(t);
    std::ostringstream o;
    o << "(define-fun " << quote("tbl_" + tab.name) << " ((x " << sort() << ")) " << sort() << "\n  ";
    std::string body = lit(tab.values.back());
    for (size_t i = tab.values.size() - 1; i-- > 0;) {
      body = "(ite (= x " + lit(i) + ") " + lit(tab.values[i]) + " " + body + ")";
    }
    o << body << ")\n";
    return o.str();
  }

  // Expression with randoms fixed by assign and privates named by suffix.
  std::string encode(Expr root, const std::unordered_map<VarId, Value>& assign, const std::string& suffix) {
    std::set<NodeId> reach;
    std::vector<NodeId> stack{root.id};
    while (!stack.empty()) {
      NodeId id = stack.back();
      stack.pop_back();
      if (!reach.insert(id).second) continue;
      const Node& n = ctx_.node(id);
      if (n.op == Op::Const || n.op == Op::Var) continue;
      stack.push_back(n.a);
      if (is_binary(n.op)) stack.push_back(n.b);
    }
    std::unordered_map<NodeId, std::string> name;
    std::string lets, close;
    for (NodeId id : reach) {
      const Node& n = ctx_.node(id);
      if (n.op == Op::Const) {
        name[id] = lit(n.value);
        continue;
      }
      if (n.op == Op::Var) {
        VarId v = static_cast<VarId>(n.value);
        switch (ctx_.kind(v)) {
          case VarKind::Random: name[id] = lit(assign.at(v)); break;
          case VarKind::Private: name[id] = quote(ctx_.name(v) + suffix); break;
          default: name[id] = quote(ctx_.name(v)); break;
        }
        continue;
      }
      std::string a = name.at(n.a);
      std::string term;
      switch (n.op) {
        case Op::Not: term = "(bvnot " + a + ")"; break;
        case Op::Table: term = "(" + quote("tbl_" + ctx_.table(static_cast<uint32_t>(n.value)).name) + " " + a + ")"; break;
        case Op::Shl:
        case Op::Shr:
          term = n.value >= static_cast<uint64_t>(w_)
                     ? lit(0)
                     : "(" + std::string(n.op == Op::Shl ? "bvshl " : "bvlshr ") + a + " " + lit(n.value) + ")";
          break;
        default: {
          std::string b = name.at(n.b);
          const char* f = n.op == Op::Xor   ? "bvxor"
                          : n.op == Op::And ? "bvand"
                          : n.op == Op::Or  ? "bvor"
                          : n.op == Op::GfMul ? "gfmul"
                          : n.op == Op::Add ? "bvadd"
                          : n.op == Op::Sub ? "bvsub"
                                            : "bvmul";
          term = "(" + std::string(f) + " " + a + " " + b + ")";
        }
      }
      std::string local = "n" + std::to_string(id);
      lets += "(let ((" + local + " " + term + ")) ";
      close += ")";
      name[id] = local;
    }
    return lets + name.at(root.id) + close;
  }

 private:
  const ExprContext& ctx_;
  int w_;
};

}  // namespace

SmtFormula emit_smt(const ExprContext& ctx, std::span<const Expr> exprs,
                    std::span<const std::string> labels, const SmtOptions& opts) {
  if (exprs.size() != labels.size()) throw std::invalid_argument("labels do not match expressions");
  const int w = ctx.width();
  VarSet all, randoms, privates, publics;
  for (Expr e : exprs) all = set_union(all, ctx.vars(e));
  for (VarId v : all) {
    if (ctx.kind(v) == VarKind::Random) randoms.push_back(v);
    else if (ctx.kind(v) == VarKind::Private) privates.push_back(v);
    else publics.push_back(v);
  }
  if (static_cast<uint64_t>(w) * randoms.size() > static_cast<uint64_t>(opts.max_bits)) {
    throw BudgetExceeded("SMT encoding needs " + std::to_string(w * randoms.size()) +
                         " random bits, budget is " + std::to_string(opts.max_bits));
  }

  Emitter em(ctx);
  std::ostringstream o;
  SmtFormula f;
  f.census.unprimed.assign(exprs.size(), 0);
  f.census.primed.assign(exprs.size(), 0);

  o << "; observable set:";
  for (const auto& l : labels) o << " " << l;
  o << "\n(set-logic ALL)\n";
  bool uses_gf = false;
  std::set<uint32_t> tables;
  for (Expr root : exprs) {
    std::vector<NodeId> stack{root.id};
    std::set<NodeId> seen;
    while (!stack.empty()) {
      NodeId id = stack.back();
      stack.pop_back();
      if (!seen.insert(id).second) continue;
      const Node& n = ctx.node(id);
      if (n.op == Op::GfMul) uses_gf = true;
      if (n.op == Op::Table) tables.insert(static_cast<uint32_t>(n.value));
      if (n.op == Op::Const || n.op == Op::Var) continue;
      stack.push_back(n.a);
      if (is_binary(n.op)) stack.push_back(n.b);
    }
  }
  if (uses_gf) o << em.gfmul_def();
  for (uint32_t t : tables) o << em.table_def(t);
  for (VarId v : publics) o << "(declare-const " << quote(ctx.name(v)) << " " << em.sort() << ")\n";
  for (VarId v : privates) {
    o << "(declare-const " << quote(ctx.name(v)) << " " << em.sort() << ")\n";
    o << "(declare-const " << quote(ctx.name(v) + "~2") << " " << em.sort() << ")\n";
  }
  for (size_t i = 0; i < exprs.size(); ++i) {
    o << "(declare-const " << quote("c" + std::to_string(i)) << " " << em.sort() << ")\n";
  }

  // Each expression as a function of its own randoms: one equality per
  // assignment of RVar(e).
  std::vector<VarSet> rv(exprs.size());
  std::vector<bool> secret(exprs.size());
  auto fname = [&](size_t i, uint64_t a, bool primed) {
    return quote("f" + std::to_string(i) + "_" + std::to_string(a) + (primed ? "~2" : ""));
  };
  for (size_t i = 0; i < exprs.size(); ++i) {
    rv[i] = ctx.rvars(exprs[i]);
    secret[i] = !ctx.vars_of_kind(exprs[i], VarKind::Private).empty();
    uint64_t n = uint64_t{1} << (w * rv[i].size());
    o << "; " << labels[i] << " = " << ctx.to_string(exprs[i]) << "\n";
    for (uint64_t a = 0; a < n; ++a) {
      std::unordered_map<VarId, Value> assign;
      for (size_t j = 0; j < rv[i].size(); ++j) {
        assign[rv[i][j]] = static_cast<Value>((a >> (w * j)) & ctx.field().mask());
      }
      for (int primed = 0; primed < (secret[i] ? 2 : 1); ++primed) {
        o << "(declare-const " << fname(i, a, primed) << " " << em.sort() << ")\n";
        o << "(assert (= " << fname(i, a, primed) << " " << em.encode(exprs[i], assign, primed ? "~2" : "")
          << "))\n";
        (primed ? f.census.primed : f.census.unprimed)[i]++;
      }
    }
  }

  uint64_t total = uint64_t{1} << (w * randoms.size());
  std::vector<std::string> sums[2];
  for (uint64_t a = 0; a < total; ++a) {
    for (int primed = 0; primed < 2; ++primed) {
      std::string cond;
      for (size_t i = 0; i < exprs.size(); ++i) {
        uint64_t proj = 0;
        for (size_t j = 0; j < rv[i].size(); ++j) {
          size_t pos = static_cast<size_t>(std::find(randoms.begin(), randoms.end(), rv[i][j]) - randoms.begin());
          uint64_t digit = (a >> (w * pos)) & ctx.field().mask();
          proj |= digit << (w * j);
        }
        cond += " (= " + fname(i, proj, primed && secret[i]) + " " + quote("c" + std::to_string(i)) + ")";
      }
      std::string ind = quote("I" + std::string(primed ? "~2" : "") + "_" + std::to_string(a));
      o << "(declare-const " << ind << " Int)\n";
      o << "(assert (= " << ind << " (ite (and" << cond << " true) 1 0)))\n";
      f.census.indicators++;
      sums[primed].push_back(ind);
    }
  }
  auto sum = [](const std::vector<std::string>& xs) {
    if (xs.size() == 1) return xs[0];
    std::string s = "(+";
    for (const auto& x : xs) s += " " + x;
    return s + ")";
  };
  o << "(assert (distinct " << sum(sums[0]) << " " << sum(sums[1]) << "))\n";
  f.census.disequalities = 1;
  o << "(check-sat)\n";
  f.text = o.str();

  nlohmann::json m;
  m["set"] = std::vector<std::string>(labels.begin(), labels.end());
  m["width"] = w;
  m["sat"] = "leaky";
  m["unsat"] = "secret-independent";
  std::vector<std::string> rnames;
  for (VarId v : randoms) rnames.push_back(ctx.name(v));
  m["randoms"] = rnames;
  m["census"] = {{"unprimed", f.census.unprimed},
                 {"primed", f.census.primed},
                 {"indicators", f.census.indicators},
                 {"disequalities", f.census.disequalities}};
  f.manifest = m.dump(2);
  return f;
}

const char* answer_name(SolverAnswer a) {
  switch (a) {
    case SolverAnswer::Sat: return "sat";
    case SolverAnswer::Unsat: return "unsat";
    case SolverAnswer::Unknown: return "unknown";
    case SolverAnswer::Error: return "error";
  }
  return "?";
}

SolverAnswer run_solver(const std::string& cmd, const std::string& path, std::string* output) {
  std::string quoted = "'";
  for (char c : path) quoted += c == '\'' ? std::string("'\\''") : std::string(1, c);
  quoted += "'";
  std::string full = cmd + " " + quoted + " 2>&1";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(full.c_str(), "r"), pclose);
  if (!pipe) return SolverAnswer::Error;
  std::string out;
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe.get())) > 0) out.append(buf.data(), n);
  if (output) *output = out;
  std::istringstream in(out);
  std::string tok;
  while (in >> tok) {
    if (tok == "sat") return SolverAnswer::Sat;
    if (tok == "unsat") return SolverAnswer::Unsat;
    if (tok == "unknown") return SolverAnswer::Unknown;
  }
  return SolverAnswer::Error;
}

}  // namespace maskcheck
