#include "maskcheck/transforms.h"

#include <algorithm>
#include <functional>
#include <map>
#include <unordered_map>

#include "maskcheck/term.h"

namespace maskcheck {

const char* level_name(TransformLevel level) {
  switch (level) {
    case TransformLevel::Plain: return "plain";
    case TransformLevel::Dom: return "dom";
    case TransformLevel::Col: return "col";
  }
  return "?";
}

int TransformTrace::dom_steps() const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(),
                                        [](const TransformStep& s) { return s.kind == TransformStep::Dom; }));
}

int TransformTrace::col_steps() const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(),
                                        [](const TransformStep& s) { return s.kind == TransformStep::Col; }));
}

namespace {

uint64_t sat_add(uint64_t a, uint64_t b) {
  uint64_t s = a + b;
  return s < a ? UINT64_MAX : s;
}

class AlgSimplifier {
 public:
  explicit AlgSimplifier(ExprContext& ctx) : ctx_(ctx) {}

  Expr run(Expr e) {
    auto it = memo_.find(e.id);
    if (it != memo_.end()) return it->second;
    Expr r = simplify(e);
    memo_.emplace(e.id, r);
    return r;
  }

 private:
  Expr simplify(Expr e) {
    const Node n = ctx_.node(e);
    const Field& f = ctx_.field();
    switch (n.op) {
      case Op::Const:
      case Op::Var: return e;
      case Op::Not: {
        Expr a = run(Expr{n.a});
        if (ctx_.is_const(a)) return ctx_.constant(f.reduce(~static_cast<Value>(ctx_.node(a).value)));
        return ctx_.rebuild(n, a, a);
      }
      case Op::Table: {
        Expr a = run(Expr{n.a});
        if (ctx_.is_const(a)) {
          return ctx_.constant(ctx_.table(static_cast<uint32_t>(n.value)).values[ctx_.node(a).value]);
        }
        return ctx_.rebuild(n, a, a);
      }
      case Op::Shl:
      case Op::Shr: {
        Expr a = run(Expr{n.a});
        if (ctx_.is_const(a)) {
          auto v = static_cast<Value>(ctx_.node(a).value);
          auto s = static_cast<uint32_t>(n.value);
          return ctx_.constant(n.op == Op::Shl ? f.shl(v, s) : f.shr(v, s));
        }
        return ctx_.rebuild(n, a, a);
      }
      case Op::Xor: return xor_cluster(e);
      case Op::Add:
      case Op::Sub: return additive_cluster(e);
      default: {
        Expr a = run(Expr{n.a});
        Expr b = run(Expr{n.b});
        bool ca = ctx_.is_const(a), cb = ctx_.is_const(b);
        if (ca && cb) {
          return ctx_.constant(apply_binary(f, n.op, static_cast<Value>(ctx_.node(a).value),
                                            static_cast<Value>(ctx_.node(b).value)));
        }
        if ((n.op == Op::Mul || n.op == Op::GfMul) &&
            ((ca && ctx_.node(a).value == 0) || (cb && ctx_.node(b).value == 0))) {
          return ctx_.constant(0);
        }
        return ctx_.rebuild(n, a, b);
      }
    }
  }

  // Members of the xor cluster rooted at id, simplified.
  void collect_xor(NodeId id, std::vector<Expr>& members, Value& c, int& consts, bool& changed) {
    const Node& n = ctx_.node(id);
    if (n.op == Op::Xor) {
      collect_xor(n.a, members, c, consts, changed);
      collect_xor(n.b, members, c, consts, changed);
      return;
    }
    Expr s = run(Expr{id});
    if (s.id != id) changed = true;
    const Node& sn = ctx_.node(s);
    if (sn.op == Op::Xor && s.id != id) {
      collect_simplified_xor(s.id, members, c, consts);
    } else if (sn.op == Op::Const) {
      c ^= static_cast<Value>(sn.value);
      ++consts;
    } else {
      members.push_back(s);
    }
  }

  void collect_simplified_xor(NodeId id, std::vector<Expr>& members, Value& c, int& consts) {
    const Node& n = ctx_.node(id);
    if (n.op == Op::Xor) {
      collect_simplified_xor(n.a, members, c, consts);
      collect_simplified_xor(n.b, members, c, consts);
    } else if (n.op == Op::Const) {
      c ^= static_cast<Value>(n.value);
      ++consts;
    } else {
      members.push_back(Expr{id});
    }
  }

  Expr xor_cluster(Expr e) {
    std::vector<Expr> members;
    Value c = 0;
    int consts = 0;
    bool changed = false;
    collect_xor(e.id, members, c, consts, changed);

    std::unordered_map<NodeId, int> count;
    for (Expr m : members) ++count[m.id];
    std::vector<Expr> kept;
    std::unordered_map<NodeId, bool> emitted;
    for (Expr m : members) {
      int k = count[m.id];
      if (k > 1) changed = true;
      if (k % 2 == 1 && !emitted[m.id]) {
        kept.push_back(m);
        emitted[m.id] = true;
      }
    }
    if (consts > 1 || (consts == 1 && c == 0)) changed = true;
    if (!changed) return e;
    if (kept.empty()) return ctx_.constant(c);
    Expr r = kept[0];
    for (size_t i = 1; i < kept.size(); ++i) r = ctx_.binary(Op::Xor, r, kept[i]);
    if (c != 0) r = ctx_.binary(Op::Xor, r, ctx_.constant(c));
    return r;
  }

  void collect_add(NodeId id, int sign, std::vector<std::pair<Expr, int>>& members, uint64_t& c,
                   int& consts, bool& changed, bool simplified) {
    const Node& n = ctx_.node(id);
    if (n.op == Op::Add || n.op == Op::Sub) {
      collect_add(n.a, sign, members, c, consts, changed, simplified);
      collect_add(n.b, n.op == Op::Sub ? -sign : sign, members, c, consts, changed, simplified);
      return;
    }
    Expr s = simplified ? Expr{id} : run(Expr{id});
    if (s.id != id) changed = true;
    const Node& sn = ctx_.node(s);
    if ((sn.op == Op::Add || sn.op == Op::Sub) && s.id != id) {
      collect_add(s.id, sign, members, c, consts, changed, true);
    } else if (sn.op == Op::Const) {
      c += sign > 0 ? sn.value : static_cast<uint64_t>(-static_cast<int64_t>(sn.value));
      ++consts;
    } else {
      members.emplace_back(s, sign);
    }
  }

  Expr additive_cluster(Expr e) {
    std::vector<std::pair<Expr, int>> members;
    uint64_t c = 0;
    int consts = 0;
    bool changed = false;
    collect_add(e.id, 1, members, c, consts, changed, false);
    Value cv = ctx_.field().reduce(c);

    std::unordered_map<NodeId, int> net, pos, neg;
    for (auto [m, s] : members) {
      net[m.id] += s;
      (s > 0 ? pos : neg)[m.id]++;
    }
    for (auto& [id, p] : pos) {
      if (neg.count(id)) changed = true;
    }
    if (consts > 1 || (consts == 1 && cv == 0)) changed = true;
    if (!changed) return e;

    std::vector<Expr> plus, minus;
    std::unordered_map<NodeId, bool> emitted;
    for (auto [m, s] : members) {
      if (emitted[m.id]) continue;
      emitted[m.id] = true;
      int k = net[m.id];
      for (int i = 0; i < k; ++i) plus.push_back(m);
      for (int i = 0; i < -k; ++i) minus.push_back(m);
    }
    Expr r;
    bool have = false;
    for (Expr p : plus) {
      r = have ? ctx_.binary(Op::Add, r, p) : p;
      have = true;
    }
    if (!have) {
      r = ctx_.constant(cv);
      have = true;
      cv = 0;
    }
    for (Expr m : minus) r = ctx_.binary(Op::Sub, r, m);
    if (cv != 0) r = ctx_.binary(Op::Add, r, ctx_.constant(cv));
    return r;
  }

  ExprContext& ctx_;
  std::unordered_map<NodeId, Expr> memo_;
};

std::vector<Expr> substitute(ExprContext& ctx, std::span<const Expr> exprs, Expr from, Expr to) {
  std::unordered_map<NodeId, Expr> memo;
  std::function<Expr(Expr)> go = [&](Expr e) -> Expr {
    if (e == from) return to;
    auto it = memo.find(e.id);
    if (it != memo.end()) return it->second;
    const Node n = ctx.node(e);
    Expr r = e;
    if (n.op != Op::Const && n.op != Op::Var) {
      Expr a = go(Expr{n.a});
      Expr b = is_binary(n.op) ? go(Expr{n.b}) : a;
      if (a.id != n.a || (is_binary(n.op) && b.id != n.b)) r = ctx.rebuild(n, a, b);
    }
    memo.emplace(e.id, r);
    return r;
  };
  std::vector<Expr> out;
  for (Expr e : exprs) out.push_back(go(e));
  return out;
}

// Tree occurrence counts of every reachable node, indexed by node id.
std::map<NodeId, uint64_t> node_occurrences(const ExprContext& ctx, std::span<const Expr> exprs) {
  std::map<NodeId, uint64_t> occ;
  for (Expr e : exprs) occ[e.id] = sat_add(occ[e.id], 1);
  // Children have smaller ids than parents, so descending order is topological.
  for (auto it = occ.rbegin(); it != occ.rend(); ++it) {
    const Node& n = ctx.node(it->first);
    uint64_t k = it->second;
    if (n.op == Op::Const || n.op == Op::Var) continue;
    occ[n.a] = sat_add(occ[n.a], k);
    if (is_binary(n.op)) occ[n.b] = sat_add(occ[n.b], k);
  }
  return occ;
}

bool dom_legal(ExprContext& ctx, const std::map<NodeId, uint64_t>& occ, Expr e, VarId r) {
  if (!set_contains(ctx.dom(e), r)) return false;
  auto ie = occ.find(e.id);
  auto ir = occ.find(ctx.variable(r).id);
  if (ie == occ.end() || ir == occ.end()) return false;
  return ie->second != UINT64_MAX && ie->second == ir->second;
}

bool apply_alg(ExprContext& ctx, std::vector<Expr>& exprs, TransformTrace* trace) {
  std::vector<Expr> next = simplify_alg(ctx, exprs);
  if (next == exprs) return false;
  exprs = std::move(next);
  if (trace) trace->steps.push_back(TransformStep{TransformStep::Alg, {}, 0, 0, 0});
  return true;
}

bool dom_once(ExprContext& ctx, std::vector<Expr>& exprs, TransformTrace& trace) {
  auto occ = node_occurrences(ctx, exprs);
  bool found = false;
  Expr best;
  VarId best_r = 0;
  for (const auto& [id, count] : occ) {
    const Node& n = ctx.node(id);
    if (n.op == Op::Var || n.dom->empty()) continue;
    for (VarId r : *n.dom) {
      if (!dom_legal(ctx, occ, Expr{id}, r)) continue;
      if (!found || n.size > ctx.size(best) || (n.size == ctx.size(best) && id < best.id)) {
        found = true;
        best = Expr{id};
        best_r = r;
      }
      break;
    }
  }
  if (!found) return false;
  exprs = substitute(ctx, exprs, best, ctx.variable(best_r));
  trace.steps.push_back(TransformStep{TransformStep::Dom, best, best_r, 0, 0});
  return true;
}

bool dom_fixpoint(ExprContext& ctx, std::vector<Expr>& exprs, TransformTrace& trace) {
  bool any = false;
  while (dom_once(ctx, exprs, trace)) any = true;
  return any;
}

struct ClusterUse {
  // For each variable: total tree occurrences, and occurrences as a direct
  // member of an xor cluster, keyed by cluster.
  std::unordered_map<VarId, uint64_t> total;
  std::unordered_map<VarId, std::vector<const Term*>> clusters;
  std::vector<const Term*> all_clusters;
};

void scan_clusters(const Term& t, ClusterUse& use) {
  if (t.op == Op::Var) use.total[static_cast<VarId>(t.value)]++;
  if (t.op == Op::Xor) {
    use.all_clusters.push_back(&t);
    for (const auto& k : t.kids) {
      if (k.op == Op::Var) use.clusters[static_cast<VarId>(k.value)].push_back(&t);
    }
  }
  for (const auto& k : t.kids) scan_clusters(k, use);
}

bool collapsible(const ExprContext& ctx, const ClusterUse& use, VarId z1, VarId z2) {
  if (z1 == z2 || ctx.kind(z1) != ctx.kind(z2) || ctx.kind(z1) == VarKind::Intermediate) return false;
  auto t1 = use.total.find(z1), t2 = use.total.find(z2);
  auto c1 = use.clusters.find(z1), c2 = use.clusters.find(z2);
  if (t1 == use.total.end() || t2 == use.total.end()) return false;
  if (c1 == use.clusters.end() || c2 == use.clusters.end()) return false;
  // Every occurrence is a direct member, and the clusters coincide with one
  // copy of each.
  if (c1->second.size() != t1->second || c2->second.size() != t2->second) return false;
  if (c1->second != c2->second) return false;
  for (size_t i = 1; i < c1->second.size(); ++i) {
    if (c1->second[i] == c1->second[i - 1]) return false;
  }
  return true;
}

void collapse(Term& t, VarId z1, VarId z2, VarId fresh) {
  for (auto& k : t.kids) collapse(k, z1, z2, fresh);
  if (t.op != Op::Xor) return;
  auto is_z = [&](const Term& k) {
    return k.op == Op::Var && (k.value == z1 || k.value == z2);
  };
  auto first = std::find_if(t.kids.begin(), t.kids.end(), is_z);
  if (first == t.kids.end()) return;
  size_t pos = static_cast<size_t>(first - t.kids.begin());
  std::vector<Term> kept;
  for (size_t i = 0; i < t.kids.size(); ++i) {
    if (i == pos) kept.push_back(Term{Op::Var, fresh, {}});
    else if (!is_z(t.kids[i])) kept.push_back(std::move(t.kids[i]));
  }
  t.kids = std::move(kept);
}

bool var_in(const Term& t, VarId v) {
  if (t.op == Op::Var) return t.value == v;
  for (const auto& k : t.kids) {
    if (var_in(k, v)) return true;
  }
  return false;
}

// Applies the collapse of (z1, z2) into fresh, rebuilding only touched roots.
bool apply_collapse(ExprContext& ctx, std::vector<Expr>& exprs, std::vector<Term>& terms, VarId z1,
                    VarId z2, VarId fresh) {
  for (size_t i = 0; i < terms.size(); ++i) {
    if (!var_in(terms[i], z1)) continue;
    collapse(terms[i], z1, z2, fresh);
    exprs[i] = to_expr(ctx, terms[i]);
  }
  return true;
}

std::string fresh_base(const ExprContext& ctx, VarId v) {
  std::string name = ctx.name(v);
  auto hash = name.find('#');
  return hash == std::string::npos ? name : name.substr(0, hash);
}

bool col_once(ExprContext& ctx, std::vector<Expr>& exprs, TransformTrace& trace) {
  auto terms = to_terms(ctx, exprs, kTermBudget);
  if (!terms) return false;
  ClusterUse use;
  for (const auto& t : *terms) scan_clusters(t, use);
  VarSet candidates;
  for (const auto& [v, cl] : use.clusters) candidates.push_back(v);
  std::sort(candidates.begin(), candidates.end());
  for (size_t i = 0; i < candidates.size(); ++i) {
    for (size_t j = i + 1; j < candidates.size(); ++j) {
      VarId z1 = candidates[i], z2 = candidates[j];
      if (!collapsible(ctx, use, z1, z2)) continue;
      VarSet origin;
      for (VarId z : {z1, z2}) {
        const VarInfo& info = ctx.var(z);
        origin = set_union(origin, info.fresh ? info.origin : VarSet{z});
      }
      VarId fresh = ctx.fresh_var(ctx.kind(z1), fresh_base(ctx, z1), origin);
      apply_collapse(ctx, exprs, *terms, z1, z2, fresh);
      trace.steps.push_back(TransformStep{TransformStep::Col, {}, fresh, z1, z2});
      return true;
    }
  }
  return false;
}

}  // namespace

Expr simplify_alg(ExprContext& ctx, Expr e) { return AlgSimplifier(ctx).run(e); }

std::vector<Expr> simplify_alg(ExprContext& ctx, std::span<const Expr> exprs) {
  AlgSimplifier s(ctx);
  std::vector<Expr> out;
  out.reserve(exprs.size());
  for (Expr e : exprs) out.push_back(s.run(e));
  return out;
}

Transformed simplify_dom(ExprContext& ctx, std::span<const Expr> exprs) {
  Transformed t{{exprs.begin(), exprs.end()}, {}};
  dom_fixpoint(ctx, t.exprs, t.trace);
  return t;
}

Transformed simplify_col(ExprContext& ctx, std::span<const Expr> exprs) {
  Transformed t{{exprs.begin(), exprs.end()}, {}};
  while (col_once(ctx, t.exprs, t.trace)) {
  }
  return t;
}

Transformed transform(ExprContext& ctx, std::span<const Expr> exprs, TransformLevel level) {
  Transformed t{{exprs.begin(), exprs.end()}, {}};
  apply_alg(ctx, t.exprs, &t.trace);
  if (level == TransformLevel::Plain) return t;
  if (dom_fixpoint(ctx, t.exprs, t.trace)) apply_alg(ctx, t.exprs, &t.trace);
  if (level == TransformLevel::Dom) return t;
  while (true) {
    bool collapsed = false;
    while (col_once(ctx, t.exprs, t.trace)) collapsed = true;
    if (!collapsed) break;
    bool changed = apply_alg(ctx, t.exprs, &t.trace);
    if (dom_fixpoint(ctx, t.exprs, t.trace)) {
      apply_alg(ctx, t.exprs, &t.trace);
      changed = true;
    }
    if (!changed) break;
  }
  return t;
}

std::optional<std::vector<Expr>> replay(ExprContext& ctx, const TransformTrace& trace,
                                        std::span<const Expr> exprs) {
  std::vector<Expr> cur(exprs.begin(), exprs.end());
  for (const auto& step : trace.steps) {
    switch (step.kind) {
      case TransformStep::Alg:
        cur = simplify_alg(ctx, cur);
        break;
      case TransformStep::Dom: {
        auto occ = node_occurrences(ctx, cur);
        if (!dom_legal(ctx, occ, step.replaced, step.var)) return std::nullopt;
        cur = substitute(ctx, cur, step.replaced, ctx.variable(step.var));
        break;
      }
      case TransformStep::Col: {
        auto terms = to_terms(ctx, cur, kTermBudget);
        if (!terms) return std::nullopt;
        ClusterUse use;
        for (const auto& t : *terms) scan_clusters(t, use);
        if (!collapsible(ctx, use, step.first, step.second)) return std::nullopt;
        apply_collapse(ctx, cur, *terms, step.first, step.second, step.var);
        break;
      }
    }
  }
  return cur;
}

std::vector<uint64_t> occurrence_counts(const ExprContext& ctx, std::span<const Expr> exprs) {
  std::vector<uint64_t> out(ctx.num_vars(), 0);
  for (const auto& [id, k] : node_occurrences(ctx, exprs)) {
    const Node& n = ctx.node(id);
    if (n.op == Op::Var) out[n.value] = k;
  }
  return out;
}

}  // namespace maskcheck
