#include "maskcheck/expr.h"

#include <algorithm>
#include <stdexcept>

namespace maskcheck {

namespace {

uint64_t sat_add(uint64_t a, uint64_t b) {
  uint64_t s = a + b;
  return s < a ? UINT64_MAX : s;
}

const std::shared_ptr<const VarSet>& empty_set() {
  static const auto* e = new std::shared_ptr<const VarSet>(std::make_shared<VarSet>());
  return *e;
}

}  // namespace

const char* kind_name(VarKind kind) {
  switch (kind) {
    case VarKind::Public: return "public";
    case VarKind::Private: return "private";
    case VarKind::Random: return "random";
    case VarKind::Intermediate: return "intermediate";
  }
  return "?";
}

const char* op_symbol(Op op) {
  switch (op) {
    case Op::Const: return "const";
    case Op::Var: return "var";
    case Op::Not: return "~";
    case Op::Table: return "table";
    case Op::Shl: return "<<";
    case Op::Shr: return ">>";
    case Op::Xor: return "^";
    case Op::And: return "&";
    case Op::Or: return "|";
    case Op::GfMul: return "@";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
  }
  return "?";
}

bool is_binary(Op op) { return op >= Op::Xor; }

bool is_commutative(Op op) {
  return op == Op::Xor || op == Op::And || op == Op::Or || op == Op::GfMul || op == Op::Add ||
         op == Op::Mul;
}

Value apply_binary(const Field& field, Op op, Value a, Value b) {
  switch (op) {
    case Op::Xor: return a ^ b;
    case Op::And: return a & b;
    case Op::Or: return a | b;
    case Op::GfMul: return field.gf_mul(a, b);
    case Op::Add: return field.reduce(uint64_t{a} + b);
    case Op::Sub: return field.reduce(uint64_t{a} - b);
    case Op::Mul: return field.reduce(uint64_t{a} * b);
    default: throw std::logic_error("not a binary operator");
  }
}

VarSet set_union(const VarSet& a, const VarSet& b) {
  VarSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

VarSet set_minus(const VarSet& a, const VarSet& b) {
  VarSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

VarSet set_intersect(const VarSet& a, const VarSet& b) {
  VarSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool set_contains(const VarSet& a, VarId v) { return std::binary_search(a.begin(), a.end(), v); }

bool set_disjoint(const VarSet& a, const VarSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return false;
    if (*i < *j) ++i; else ++j;
  }
  return true;
}

bool set_subset(const VarSet& a, const VarSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

size_t ExprContext::KeyHash::operator()(const Key& k) const {
  uint64_t h = static_cast<uint64_t>(k.op) * 0x9E3779B97F4A7C15ull;
  h ^= (uint64_t{k.a} + 0x7F4A7C15ull + (h << 6) + (h >> 2));
  h ^= (uint64_t{k.b} + 0x165667B1ull + (h << 6) + (h >> 2));
  h ^= (k.value + 0x27D4EB2Full + (h << 6) + (h >> 2));
  return static_cast<size_t>(h);
}

ExprContext::ExprContext(int width)
    : field_(width), chunks_(new std::atomic<Node*>[kMaxChunks]) {
  for (size_t i = 0; i < kMaxChunks; ++i) chunks_[i].store(nullptr, std::memory_order_relaxed);
}

ExprContext::~ExprContext() {
  for (size_t i = 0; i < kMaxChunks; ++i) delete[] chunks_[i].load(std::memory_order_relaxed);
}

VarId ExprContext::add_var(std::string name, VarKind kind) {
  std::lock_guard lock(mu_);
  vars_.push_back(VarInfo{std::move(name), kind, false, {}});
  return static_cast<VarId>(vars_.size() - 1);
}

VarId ExprContext::fresh_var(VarKind kind, const std::string& base, VarSet origin) {
  std::lock_guard lock(mu_);
  int n = ++fresh_counter_[base];
  vars_.push_back(VarInfo{base + "#" + std::to_string(n), kind, true, std::move(origin)});
  return static_cast<VarId>(vars_.size() - 1);
}

const VarInfo& ExprContext::var(VarId v) const {
  std::lock_guard lock(mu_);
  if (v >= vars_.size()) throw std::out_of_range("unknown variable id");
  return vars_[v];
}

size_t ExprContext::num_vars() const {
  std::lock_guard lock(mu_);
  return vars_.size();
}

uint32_t ExprContext::add_table(Table table) {
  check_bijective(table.values, field_, table.name);
  std::lock_guard lock(mu_);
  tables_.push_back(std::move(table));
  return static_cast<uint32_t>(tables_.size() - 1);
}

const Table& ExprContext::table(uint32_t id) const {
  std::lock_guard lock(mu_);
  if (id >= tables_.size()) throw std::out_of_range("unknown table id");
  return tables_[id];
}

size_t ExprContext::num_tables() const {
  std::lock_guard lock(mu_);
  return tables_.size();
}

const Node& ExprContext::node(NodeId id) const {
  Node* chunk = chunks_[id >> kChunkBits].load(std::memory_order_acquire);
  return chunk[id & ((1u << kChunkBits) - 1)];
}

Expr ExprContext::intern(Op op, NodeId a, NodeId b, uint64_t value) {
  std::lock_guard lock(mu_);
  Key key{op, a, b, value};
  auto it = interned_.find(key);
  if (it != interned_.end()) return Expr{it->second};

  Node n{op, a, b, value, 1, empty_set(), empty_set()};
  switch (op) {
    case Op::Const:
      break;
    case Op::Var: {
      auto s = std::make_shared<const VarSet>(VarSet{static_cast<VarId>(value)});
      n.vars = s;
      if (vars_[value].kind == VarKind::Random) n.dom = s;
      break;
    }
    case Op::Not:
    case Op::Table:
      n.size = sat_add(1, node(a).size);
      n.vars = node(a).vars;
      n.dom = node(a).dom;
      break;
    case Op::Shl:
    case Op::Shr:
      n.size = sat_add(1, node(a).size);
      n.vars = node(a).vars;
      break;
    default: {
      const Node& l = node(a);
      const Node& r = node(b);
      n.size = sat_add(1, sat_add(l.size, r.size));
      if (l.vars->empty()) {
        n.vars = r.vars;
      } else if (r.vars->empty() || l.vars == r.vars) {
        n.vars = l.vars;
      } else {
        n.vars = std::make_shared<const VarSet>(set_union(*l.vars, *r.vars));
      }
      if (op == Op::Xor || op == Op::Add || op == Op::Sub) {
        VarSet d = set_union(set_minus(*l.dom, *r.vars), set_minus(*r.dom, *l.vars));
        if (!d.empty()) n.dom = std::make_shared<const VarSet>(std::move(d));
      } else if (op == Op::GfMul) {
        if (l.op == Op::Const && l.value != 0) n.dom = r.dom;
        else if (r.op == Op::Const && r.value != 0) n.dom = l.dom;
      }
      break;
    }
  }

  size_t id = count_.load(std::memory_order_relaxed);
  size_t chunk = id >> kChunkBits;
  if (chunk >= kMaxChunks) throw std::length_error("expression context is full");
  Node* storage = chunks_[chunk].load(std::memory_order_relaxed);
  if (storage == nullptr) {
    storage = new Node[size_t{1} << kChunkBits];
    chunks_[chunk].store(storage, std::memory_order_release);
  }
  storage[id & ((1u << kChunkBits) - 1)] = std::move(n);
  count_.store(id + 1, std::memory_order_release);
  interned_.emplace(key, static_cast<NodeId>(id));
  return Expr{static_cast<NodeId>(id)};
}

Expr ExprContext::constant(Value v) { return intern(Op::Const, 0, 0, field_.reduce(v)); }

Expr ExprContext::variable(VarId v) {
  if (v >= num_vars()) throw std::out_of_range("unknown variable id");
  return intern(Op::Var, 0, 0, v);
}

Expr ExprContext::unary(Op op, Expr a) {
  if (op != Op::Not) throw std::invalid_argument("unary() only builds negation");
  return intern(op, a.id, 0, 0);
}

Expr ExprContext::lookup(uint32_t table, Expr a) {
  if (table >= num_tables()) throw std::out_of_range("unknown table id");
  return intern(Op::Table, a.id, 0, table);
}

Expr ExprContext::shift(Op op, Expr a, uint32_t amount) {
  if (op != Op::Shl && op != Op::Shr) throw std::invalid_argument("not a shift");
  return intern(op, a.id, 0, amount);
}

Expr ExprContext::binary(Op op, Expr a, Expr b) {
  if (!is_binary(op)) throw std::invalid_argument("not a binary operator");
  return intern(op, a.id, b.id, 0);
}

Expr ExprContext::rebuild(const Node& n, Expr a, Expr b) {
  switch (n.op) {
    case Op::Const:
    case Op::Var: return intern(n.op, 0, 0, n.value);
    case Op::Not: return unary(Op::Not, a);
    case Op::Table: return lookup(static_cast<uint32_t>(n.value), a);
    case Op::Shl:
    case Op::Shr: return shift(n.op, a, static_cast<uint32_t>(n.value));
    default: return binary(n.op, a, b);
  }
}

VarSet ExprContext::rvars(Expr e) const { return vars_of_kind(e, VarKind::Random); }

VarSet ExprContext::vars_of_kind(Expr e, VarKind kind) const {
  VarSet out;
  for (VarId v : vars(e)) {
    if (this->kind(v) == kind) out.push_back(v);
  }
  return out;
}

Value ExprContext::eval(Expr e, std::span<const Value> valuation) const {
  std::unordered_map<NodeId, Value> memo;
  std::function<Value(NodeId)> go = [&](NodeId id) -> Value {
    auto it = memo.find(id);
    if (it != memo.end()) return it->second;
    const Node& n = node(id);
    Value v = 0;
    switch (n.op) {
      case Op::Const: v = static_cast<Value>(n.value); break;
      case Op::Var:
        if (n.value >= valuation.size()) throw std::out_of_range("valuation too short");
        v = field_.reduce(valuation[n.value]);
        break;
      case Op::Not: v = field_.reduce(~go(n.a)); break;
      case Op::Table: v = table(static_cast<uint32_t>(n.value)).values[go(n.a)]; break;
      case Op::Shl: v = field_.shl(go(n.a), static_cast<uint32_t>(n.value)); break;
      case Op::Shr: v = field_.shr(go(n.a), static_cast<uint32_t>(n.value)); break;
      default: v = apply_binary(field_, n.op, go(n.a), go(n.b)); break;
    }
    memo.emplace(id, v);
    return v;
  };
  return go(e.id);
}

void ExprContext::to_string(NodeId id, std::string& out) const {
  const Node& n = node(id);
  switch (n.op) {
    case Op::Const: out += std::to_string(n.value); break;
    case Op::Var: out += name(static_cast<VarId>(n.value)); break;
    case Op::Not:
      out += "~";
      to_string(n.a, out);
      break;
    case Op::Table:
      out += table(static_cast<uint32_t>(n.value)).name;
      out += "(";
      to_string(n.a, out);
      out += ")";
      break;
    case Op::Shl:
    case Op::Shr:
      out += "(";
      to_string(n.a, out);
      out += n.op == Op::Shl ? " << " : " >> ";
      out += std::to_string(n.value);
      out += ")";
      break;
    default:
      out += "(";
      to_string(n.a, out);
      out += " ";
      out += op_symbol(n.op);
      out += " ";
      to_string(n.b, out);
      out += ")";
      break;
  }
}

std::string ExprContext::to_string(Expr e) const {
  std::string out;
  to_string(e.id, out);
  return out;
}

bool uniform_by_dominators(const ExprContext& ctx, std::span<const Expr> exprs) {
  for (size_t i = 0; i < exprs.size(); ++i) {
    VarSet others;
    for (size_t j = 0; j < exprs.size(); ++j) {
      if (j != i) others = set_union(others, ctx.rvars(exprs[j]));
    }
    if (set_minus(ctx.dom(exprs[i]), others).empty()) return false;
  }
  return true;
}

}  // namespace maskcheck
