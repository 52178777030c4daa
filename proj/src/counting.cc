#include "maskcheck/counting.h"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <unordered_map>

namespace maskcheck {

Histogram::Histogram(std::vector<std::pair<uint64_t, uint64_t>> entries) : entries_(std::move(entries)) {}

uint64_t Histogram::count(uint64_t index) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), std::make_pair(index, uint64_t{0}));
  return it != entries_.end() && it->first == index ? it->second : 0;
}

uint64_t Histogram::total() const {
  uint64_t t = 0;
  for (const auto& [i, c] : entries_) t += c;
  return t;
}

CountingProblem::CountingProblem(const ExprContext& ctx, std::span<const Expr> exprs,
                                 const CountBudget& budget)
    : field_(ctx.width()) {
  if (exprs.empty()) throw std::invalid_argument("empty observable set");
  VarSet vars;
  for (Expr e : exprs) vars = set_union(vars, ctx.vars(e));
  for (VarId v : vars) {
    switch (ctx.kind(v)) {
      case VarKind::Public: publics_.push_back(v); break;
      case VarKind::Private: privates_.push_back(v); break;
      case VarKind::Random: randoms_.push_back(v); break;
      case VarKind::Intermediate: throw std::logic_error("intermediate variable in a computation");
    }
  }
  int w = field_.width();
  uint64_t out_bits = static_cast<uint64_t>(w) * exprs.size();
  uint64_t enum_bits = static_cast<uint64_t>(w) * vars.size();
  if (out_bits > static_cast<uint64_t>(budget.max_bits) || out_bits > 62) {
    throw BudgetExceeded("tuple space of " + std::to_string(out_bits) + " bits exceeds the budget");
  }
  if (enum_bits > static_cast<uint64_t>(budget.max_bits) || enum_bits > 62) {
    throw BudgetExceeded("enumeration of " + std::to_string(enum_bits) + " bits exceeds the budget");
  }

  std::set<NodeId> reach;
  std::vector<NodeId> stack;
  for (Expr e : exprs) stack.push_back(e.id);
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (!reach.insert(id).second) continue;
    const Node& n = ctx.node(id);
    if (n.op == Op::Const || n.op == Op::Var) continue;
    stack.push_back(n.a);
    if (is_binary(n.op)) stack.push_back(n.b);
  }

  std::unordered_map<VarId, uint32_t> slot;
  uint32_t next = 0;
  for (const auto* list : {&publics_, &privates_, &randoms_}) {
    for (VarId v : *list) slot[v] = next++;
  }
  constants_.assign(next, 0);
  std::unordered_map<NodeId, uint32_t> reg;
  std::unordered_map<uint32_t, uint32_t> table_index;
  for (NodeId id : reach) {
    const Node& n = ctx.node(id);
    if (n.op == Op::Var) {
      reg[id] = slot.at(static_cast<VarId>(n.value));
      continue;
    }
    uint32_t r = next++;
    reg[id] = r;
    constants_.push_back(n.op == Op::Const ? static_cast<Value>(n.value) : 0);
    if (n.op == Op::Const) continue;
    Instr in{n.op, r, reg.at(n.a), is_binary(n.op) ? reg.at(n.b) : 0, n.value};
    if (n.op == Op::Table) {
      auto t = static_cast<uint32_t>(n.value);
      if (!table_index.count(t)) {
        table_index[t] = static_cast<uint32_t>(tables_.size());
        tables_.push_back(ctx.table(t).values);
      }
      in.imm = table_index[t];
    }
    tape_.push_back(in);
  }
  num_regs_ = next;
  for (Expr e : exprs) outputs_.push_back(reg.at(e.id));
  if (w <= 8) {
    gf_table_.resize(field_.size() * field_.size());
    for (Value a = 0; a < field_.size(); ++a) {
      for (Value b = 0; b < field_.size(); ++b) gf_table_[(a << w) | b] = field_.gf_mul(a, b);
    }
  }
}

std::vector<Value> CountingProblem::make_registers(std::span<const Value> pub,
                                                   std::span<const Value> priv) const {
  if (pub.size() != publics_.size() || priv.size() != privates_.size()) {
    throw std::invalid_argument("valuation does not match the problem variables");
  }
  std::vector<Value> regs = constants_;
  for (size_t i = 0; i < pub.size(); ++i) regs[i] = field_.reduce(pub[i]);
  for (size_t i = 0; i < priv.size(); ++i) regs[publics_.size() + i] = field_.reduce(priv[i]);
  return regs;
}

uint64_t CountingProblem::eval(std::vector<Value>& regs) const {
  const Value mask = field_.mask();
  const int w = field_.width();
  Value* r = regs.data();
  for (const Instr& in : tape_) {
    Value a = r[in.a];
    Value v;
    switch (in.op) {
      case Op::Not: v = ~a & mask; break;
      case Op::Table: v = tables_[in.imm][a]; break;
      case Op::Shl: v = in.imm >= 32 ? 0 : static_cast<Value>((uint64_t{a} << in.imm) & mask); break;
      case Op::Shr: v = in.imm >= 32 ? 0 : a >> in.imm; break;
      case Op::Xor: v = a ^ r[in.b]; break;
      case Op::And: v = a & r[in.b]; break;
      case Op::Or: v = a | r[in.b]; break;
      case Op::GfMul: v = gf_table_.empty() ? field_.gf_mul(a, r[in.b]) : gf_table_[(a << w) | r[in.b]]; break;
      case Op::Add: v = (a + r[in.b]) & mask; break;
      case Op::Sub: v = (a - r[in.b]) & mask; break;
      case Op::Mul: v = static_cast<Value>((uint64_t{a} * r[in.b]) & mask); break;
      default: v = 0; break;
    }
    r[in.dst] = v;
  }
  uint64_t index = 0;
  for (size_t i = 0; i < outputs_.size(); ++i) index |= uint64_t{r[outputs_[i]]} << (w * i);
  return index;
}

std::vector<Value> CountingProblem::decode(uint64_t index) const {
  std::vector<Value> out(outputs_.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<Value>((index >> (width() * i)) & field_.mask());
  return out;
}

uint64_t CountingProblem::encode(std::span<const Value> tuple) const {
  uint64_t index = 0;
  for (size_t i = 0; i < tuple.size(); ++i) index |= uint64_t{tuple[i] & field_.mask()} << (width() * i);
  return index;
}

Histogram CountingProblem::count(std::span<const Value> pub, std::span<const Value> priv) const {
  std::vector<Value> regs = make_registers(pub, priv);
  std::map<uint64_t, uint64_t> counts;
  uint64_t total = random_space();
  size_t nr = randoms_.size();
  size_t base = publics_.size() + privates_.size();
  const Value mask = field_.mask();
  for (uint64_t t = 0; t < total; ++t) {
    for (size_t j = 0; j < nr; ++j) regs[base + j] = static_cast<Value>((t >> (width() * j)) & mask);
    ++counts[eval(regs)];
  }
  return Histogram({counts.begin(), counts.end()});
}

namespace {

struct Accumulated {
  Histogram hist;
  bool mismatch = false;
  uint64_t evaluations = 0;
};

Accumulated accumulate(const CountingProblem& p, std::span<const Value> pub,
                       std::span<const Value> priv, int workers, const Histogram* ref) {
  const int w = p.width();
  const size_t nr = p.randoms().size();
  const uint64_t total = p.random_space();
  const uint64_t tile = uint64_t{1} << std::min<uint64_t>(static_cast<uint64_t>(w) * nr, 12);
  const int64_t ntiles = static_cast<int64_t>(total / tile);
  const bool dense = p.dense();
  const uint64_t space = p.tuple_space();
  const size_t base = p.publics().size() + p.privates().size();
  const Value mask = static_cast<Value>(p.domain() - 1);
  if (workers < 1) workers = 1;

  std::vector<uint64_t> ref_dense;
  if (ref && dense) {
    ref_dense.assign(space, 0);
    for (const auto& [i, c] : ref->entries()) ref_dense[i] = c;
  }

  std::atomic<bool> cancel(false);
  std::vector<std::vector<uint64_t>> dense_parts(static_cast<size_t>(workers));
  std::vector<std::unordered_map<uint64_t, uint64_t>> sparse_parts(static_cast<size_t>(workers));
  std::vector<uint64_t> evals(static_cast<size_t>(workers), 0);

#pragma omp parallel num_threads(workers)
  {
    const size_t me = static_cast<size_t>(omp_get_thread_num());
    std::vector<Value> regs = p.make_registers(pub, priv);
    std::vector<uint64_t>& local = dense_parts[me];
    std::unordered_map<uint64_t, uint64_t>& sparse = sparse_parts[me];
    if (dense) local.assign(space, 0);
    uint64_t done = 0;

#pragma omp for schedule(dynamic, 1)
    for (int64_t ti = 0; ti < ntiles; ++ti) {
      if (cancel.load(std::memory_order_relaxed)) continue;
      uint64_t start = static_cast<uint64_t>(ti) * tile;
      for (size_t j = 0; j < nr; ++j) regs[base + j] = static_cast<Value>((start >> (w * j)) & mask);
      for (uint64_t s = 0; s < tile; ++s) {
        uint64_t idx = p.eval(regs);
        ++done;
        if (dense) {
          uint64_t c = ++local[idx];
          if (ref && c > ref_dense[idx]) {
            cancel.store(true, std::memory_order_relaxed);
            break;
          }
        } else {
          if (ref && ref->count(idx) == 0) {
            cancel.store(true, std::memory_order_relaxed);
            break;
          }
          ++sparse[idx];
        }
        for (size_t j = 0; j < nr; ++j) {
          Value& d = regs[base + j];
          if (++d <= mask) break;
          d = 0;
        }
      }
    }
    evals[me] = done;
  }

  Accumulated out;
  for (uint64_t e : evals) out.evaluations += e;
  if (cancel.load()) {
    out.mismatch = true;
    return out;
  }
  std::vector<std::pair<uint64_t, uint64_t>> entries;
  if (dense) {
    std::vector<uint64_t> sum(space, 0);
    for (const auto& part : dense_parts) {
      for (uint64_t i = 0; i < part.size(); ++i) sum[i] += part[i];
    }
    for (uint64_t i = 0; i < space; ++i) {
      if (sum[i]) entries.emplace_back(i, sum[i]);
    }
  } else {
    std::unordered_map<uint64_t, uint64_t> sum;
    for (const auto& part : sparse_parts) {
      for (const auto& [i, c] : part) sum[i] += c;
    }
    entries.assign(sum.begin(), sum.end());
    std::sort(entries.begin(), entries.end());
  }
  out.hist = Histogram(std::move(entries));
  if (ref && !(out.hist == *ref)) out.mismatch = true;
  return out;
}

std::vector<Value> digits(uint64_t index, size_t n, int width) {
  std::vector<Value> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = static_cast<Value>((index >> (width * i)) & ((1u << width) - 1));
  return out;
}

std::vector<std::pair<VarId, Value>> bind(const std::vector<VarId>& vars, const std::vector<Value>& vals) {
  std::vector<std::pair<VarId, Value>> out;
  for (size_t i = 0; i < vars.size(); ++i) out.emplace_back(vars[i], vals[i]);
  return out;
}

Witness make_witness(const CountingProblem& p, const std::vector<Value>& pub,
                     const std::vector<Value>& priv_a, const std::vector<Value>& priv_b,
                     const Histogram& a, const Histogram& b) {
  Witness w;
  w.publics = bind(p.publics(), pub);
  w.private_a = bind(p.privates(), priv_a);
  w.private_b = bind(p.privates(), priv_b);
  const auto& ea = a.entries();
  const auto& eb = b.entries();
  size_t i = 0, j = 0;
  while (i < ea.size() || j < eb.size()) {
    uint64_t ia = i < ea.size() ? ea[i].first : UINT64_MAX;
    uint64_t ib = j < eb.size() ? eb[j].first : UINT64_MAX;
    uint64_t idx = std::min(ia, ib);
    uint64_t ca = ia == idx ? ea[i].second : 0;
    uint64_t cb = ib == idx ? eb[j].second : 0;
    if (ca != cb) {
      w.tuple = p.decode(idx);
      w.count_a = ca;
      w.count_b = cb;
      return w;
    }
    if (ia == idx) ++i;
    if (ib == idx) ++j;
  }
  throw std::logic_error("histograms do not differ");
}

uint64_t key_space(const CountingProblem& p, size_t n) { return uint64_t{1} << (p.width() * n); }

}  // namespace

Histogram CountingProblem::count_parallel(std::span<const Value> pub, std::span<const Value> priv,
                                          int workers) const {
  return accumulate(*this, pub, priv, workers, nullptr).hist;
}

CountVerdict bf_decide(const CountingProblem& p) {
  CountVerdict v;
  const size_t np = p.publics().size(), nk = p.privates().size();
  for (uint64_t pi = 0; pi < key_space(p, np); ++pi) {
    std::vector<Value> pub = digits(pi, np, p.width());
    std::vector<Value> k0 = digits(0, nk, p.width());
    Histogram ref = p.count(pub, k0);
    v.evaluations += p.random_space();
    for (uint64_t ki = 1; ki < key_space(p, nk); ++ki) {
      std::vector<Value> k = digits(ki, nk, p.width());
      Histogram h = p.count(pub, k);
      v.evaluations += p.random_space();
      if (!(h == ref)) {
        v.outcome = CountOutcome::Leaky;
        v.witness = make_witness(p, pub, k0, k, ref, h);
        return v;
      }
    }
  }
  return v;
}

CountVerdict parallel_decide(const CountingProblem& p, int workers) {
  CountVerdict v;
  const size_t np = p.publics().size(), nk = p.privates().size();
  for (uint64_t pi = 0; pi < key_space(p, np); ++pi) {
    std::vector<Value> pub = digits(pi, np, p.width());
    std::vector<Value> k0 = digits(0, nk, p.width());
    Accumulated ref = accumulate(p, pub, k0, workers, nullptr);
    v.evaluations += ref.evaluations;
    for (uint64_t ki = 1; ki < key_space(p, nk); ++ki) {
      std::vector<Value> k = digits(ki, nk, p.width());
      Accumulated a = accumulate(p, pub, k, workers, &ref.hist);
      v.evaluations += a.evaluations;
      if (a.mismatch) {
        Accumulated full = accumulate(p, pub, k, workers, nullptr);
        v.evaluations += full.evaluations;
        v.outcome = CountOutcome::Leaky;
        v.witness = make_witness(p, pub, k0, k, ref.hist, full.hist);
        return v;
      }
    }
  }
  return v;
}

bool verify_witness(const CountingProblem& p, const Witness& w) {
  auto lookup = [](const std::vector<std::pair<VarId, Value>>& vals, VarId v, Value* out) {
    for (const auto& [id, x] : vals) {
      if (id == v) {
        *out = x;
        return true;
      }
    }
    return false;
  };
  std::vector<Value> pub, a, b;
  for (VarId v : p.publics()) {
    Value x;
    if (!lookup(w.publics, v, &x)) return false;
    pub.push_back(x);
  }
  for (VarId v : p.privates()) {
    Value xa, xb;
    if (!lookup(w.private_a, v, &xa) || !lookup(w.private_b, v, &xb)) return false;
    a.push_back(xa);
    b.push_back(xb);
  }
  return !(p.count(pub, a) == p.count(pub, b));
}

}  // namespace maskcheck
