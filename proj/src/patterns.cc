#include "maskcheck/patterns.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>

#include "maskcheck/transforms.h"

namespace maskcheck {

namespace {

uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(uint64_t v) {
  std::ostringstream o;
  o << std::hex << v;
  return o.str();
}

std::string base_name(const std::string& name) {
  auto hash = name.find('#');
  return hash == std::string::npos ? name : name.substr(0, hash);
}

// ---------------------------------------------------------------- assimilation

enum class Ctx { Xor, Add, Sub, Other };

struct ConstUse {
  Ctx ctx;
  const Term* node;
  VarId var;  // Add/Sub: the variable operand, if any
  bool has_var;
};

struct VarUse {
  Ctx ctx;
  bool with_const;  // nonzero constant in the same context
};

struct Scan {
  std::map<Value, std::vector<ConstUse>> consts;
  std::map<VarId, std::vector<VarUse>> vars;
};

void scan(const Term& t, const Term* parent, size_t slot, Scan& s) {
  if (t.op == Op::Xor && t.value != 0) s.consts[static_cast<Value>(t.value)].push_back({Ctx::Xor, &t, 0, false});
  if (t.op == Op::Const) {
    ConstUse u{Ctx::Other, parent, 0, false};
    if (parent && parent->op == Op::Add) {
      const Term& other = parent->kids[1 - slot];
      if (other.op == Op::Var) u = {Ctx::Add, parent, static_cast<VarId>(other.value), true};
    } else if (parent && parent->op == Op::Sub && slot == 1 && parent->kids[0].op == Op::Var) {
      u = {Ctx::Sub, parent, static_cast<VarId>(parent->kids[0].value), true};
    }
    s.consts[static_cast<Value>(t.value)].push_back(u);
  }
  if (t.op == Op::Var) {
    VarUse u{Ctx::Other, false};
    if (parent && parent->op == Op::Xor) {
      u = {Ctx::Xor, parent->value != 0};
    } else if (parent && parent->op == Op::Add) {
      const Term& other = parent->kids[1 - slot];
      u = {Ctx::Add, other.op == Op::Const && other.value != 0};
    } else if (parent && parent->op == Op::Sub && slot == 0) {
      const Term& other = parent->kids[1];
      u = {Ctx::Sub, other.op == Op::Const && other.value != 0};
    }
    s.vars[static_cast<VarId>(t.value)].push_back(u);
  }
  for (size_t i = 0; i < t.kids.size(); ++i) scan(t.kids[i], &t, i, s);
}

bool direct_member(const Term& cluster, VarId x) {
  for (const auto& k : cluster.kids) {
    if (k.op == Op::Var && k.value == x) return true;
  }
  return false;
}

// Anchor for constant c, if c is assimilable.
std::optional<std::pair<Op, VarId>> find_anchor(const ExprContext& ctx, const Scan& s, Value c) {
  const auto& uses = s.consts.at(c);
  Ctx kind = uses[0].ctx;
  if (kind == Ctx::Other) return std::nullopt;
  for (const auto& u : uses) {
    if (u.ctx != kind) return std::nullopt;
  }
  VarSet candidates;
  if (kind == Ctx::Xor) {
    for (const auto& k : uses[0].node->kids) {
      if (k.op == Op::Var) candidates.push_back(static_cast<VarId>(k.value));
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    for (const auto& u : uses) {
      VarSet keep;
      for (VarId x : candidates) {
        if (direct_member(*u.node, x)) keep.push_back(x);
      }
      candidates = std::move(keep);
    }
  } else {
    candidates.push_back(uses[0].var);
    for (const auto& u : uses) {
      if (!u.has_var || u.var != uses[0].var) return std::nullopt;
    }
  }
  for (VarId x : candidates) {
    if (ctx.kind(x) == VarKind::Intermediate) continue;
    const auto& vu = s.vars.at(x);
    bool ok = std::all_of(vu.begin(), vu.end(), [&](const VarUse& u) { return u.ctx == kind && u.with_const; });
    if (ok) {
      Op op = kind == Ctx::Xor ? Op::Xor : kind == Ctx::Add ? Op::Add : Op::Sub;
      return std::make_pair(op, x);
    }
  }
  return std::nullopt;
}

void assimilate(Term& t, const Field& f, Op op, Value c, VarId x, VarId fresh) {
  for (auto& k : t.kids) assimilate(k, f, op, c, x, fresh);
  if (op == Op::Xor && t.op == Op::Xor && direct_member(t, x)) {
    for (auto& k : t.kids) {
      if (k.op == Op::Var && k.value == x) k.value = fresh;
    }
    t.value ^= c;
    if (t.value == 0 && t.kids.size() == 1) t = Term(t.kids[0]);
    return;
  }
  if (op == Op::Add && t.op == Op::Add) {
    for (size_t i = 0; i < 2; ++i) {
      Term& v = t.kids[i];
      Term& k = t.kids[1 - i];
      if (v.op == Op::Var && v.value == x && k.op == Op::Const) {
        Value nc = f.reduce(k.value - c);
        v.value = fresh;
        if (nc == 0) t = Term{Op::Var, fresh, {}};
        else k.value = nc;
        return;
      }
    }
  }
  if (op == Op::Sub && t.op == Op::Sub && t.kids[0].op == Op::Var && t.kids[0].value == x &&
      t.kids[1].op == Op::Const) {
    Value nc = f.reduce(t.kids[1].value - c);
    if (nc == 0) {
      t = Term{Op::Var, fresh, {}};
    } else {
      t.kids[0].value = fresh;
      t.kids[1].value = nc;
    }
  }
}

// ---------------------------------------------------------------- shapes

char kind_letter(VarKind k) {
  switch (k) {
    case VarKind::Public: return 'p';
    case VarKind::Private: return 'k';
    case VarKind::Random: return 'r';
    case VarKind::Intermediate: return 'i';
  }
  return '?';
}

VarKind letter_kind(char c) {
  switch (c) {
    case 'p': return VarKind::Public;
    case 'k': return VarKind::Private;
    case 'r': return VarKind::Random;
    default: throw std::runtime_error(std::string("bad variable kind '") + c + "' in pattern");
  }
}

std::string shape(const Pattern& p, const Term& t) {
  switch (t.op) {
    case Op::Const: return "#" + std::to_string(t.value);
    case Op::Var: return std::string("$") + kind_letter(p.kinds[t.value]);
    case Op::Table: return "(T" + p.tables[t.value] + " " + shape(p, t.kids[0]) + ")";
    case Op::Not: return "(~ " + shape(p, t.kids[0]) + ")";
    case Op::Shl:
    case Op::Shr: return std::string("(") + op_symbol(t.op) + std::to_string(t.value) + " " + shape(p, t.kids[0]) + ")";
    case Op::Xor: {
      std::vector<std::string> ks;
      for (const auto& k : t.kids) ks.push_back(shape(p, k));
      std::sort(ks.begin(), ks.end());
      std::string s = "(^" + std::to_string(t.value);
      for (const auto& k : ks) s += " " + k;
      return s + ")";
    }
    default: {
      std::string a = shape(p, t.kids[0]), b = shape(p, t.kids[1]);
      if (is_commutative(t.op) && b < a) std::swap(a, b);
      return std::string("(") + op_symbol(t.op) + " " + a + " " + b + ")";
    }
  }
}

void localize(const ExprContext& ctx, Term& t, std::unordered_map<VarId, uint32_t>& vars,
              std::unordered_map<uint32_t, uint32_t>& tables, Pattern& p) {
  if (t.op == Op::Var) {
    auto v = static_cast<VarId>(t.value);
    auto it = vars.find(v);
    if (it == vars.end()) {
      it = vars.emplace(v, static_cast<uint32_t>(p.kinds.size())).first;
      p.kinds.push_back(ctx.kind(v));
      p.names.push_back(ctx.name(v));
    }
    t.value = it->second;
  } else if (t.op == Op::Table) {
    auto id = static_cast<uint32_t>(t.value);
    auto it = tables.find(id);
    if (it == tables.end()) {
      const Table& tab = ctx.table(id);
      it = tables.emplace(id, static_cast<uint32_t>(p.tables.size())).first;
      p.tables.push_back(tab.name + "@" + hex(fnv1a(tab.values.data(), tab.values.size() * sizeof(Value))));
    }
    t.value = it->second;
  }
  for (auto& k : t.kids) localize(ctx, k, vars, tables, p);
}

// ---------------------------------------------------------------- matching

struct MatchState {
  std::vector<int64_t> fwd, bwd;
};

class Matcher {
 public:
  using Cont = std::function<bool()>;

  Matcher(const Pattern& a, const Pattern& b, MatchState& s) : a_(a), b_(b), s_(s) {}

  bool unify(const Term& t, const Term& u, const Cont& k) {
    if (t.op != u.op || t.kids.size() != u.kids.size()) return false;
    switch (t.op) {
      case Op::Const: return t.value == u.value && k();
      case Op::Var: {
        if (a_.kinds[t.value] != b_.kinds[u.value]) return false;
        int64_t& f = s_.fwd[t.value];
        int64_t& g = s_.bwd[u.value];
        if (f < 0 && g < 0) {
          f = static_cast<int64_t>(u.value);
          g = static_cast<int64_t>(t.value);
          if (k()) return true;
          f = g = -1;
          return false;
        }
        return f == static_cast<int64_t>(u.value) && k();
      }
      case Op::Table:
        return a_.tables[t.value] == b_.tables[u.value] && unify(t.kids[0], u.kids[0], k);
      case Op::Not: return unify(t.kids[0], u.kids[0], k);
      case Op::Shl:
      case Op::Shr: return t.value == u.value && unify(t.kids[0], u.kids[0], k);
      case Op::Xor: {
        if (t.value != u.value) return false;
        std::vector<bool> used(u.kids.size(), false);
        return pair_kids(t, u, 0, used, k);
      }
      default: {
        if (unify(t.kids[0], u.kids[0], [&] { return unify(t.kids[1], u.kids[1], k); })) return true;
        if (!is_commutative(t.op)) return false;
        return unify(t.kids[0], u.kids[1], [&] { return unify(t.kids[1], u.kids[0], k); });
      }
    }
  }

  bool pair_kids(const Term& t, const Term& u, size_t i, std::vector<bool>& used, const Cont& k) {
    if (i == t.kids.size()) return k();
    const std::string& st = shape_a(t.kids[i]);
    for (size_t j = 0; j < u.kids.size(); ++j) {
      if (used[j] || shape_b(u.kids[j]) != st) continue;
      used[j] = true;
      if (unify(t.kids[i], u.kids[j], [&] { return pair_kids(t, u, i + 1, used, k); })) return true;
      used[j] = false;
    }
    return false;
  }

  bool pair_exprs(size_t i, std::vector<bool>& used) {
    if (i == a_.exprs.size()) return true;
    const std::string& st = shape_a(a_.exprs[i]);
    for (size_t j = 0; j < b_.exprs.size(); ++j) {
      if (used[j] || shape_b(b_.exprs[j]) != st) continue;
      used[j] = true;
      if (unify(a_.exprs[i], b_.exprs[j], [&] { return pair_exprs(i + 1, used); })) return true;
      used[j] = false;
    }
    return false;
  }

 private:
  const std::string& shape_a(const Term& t) { return cached(shapes_a_, a_, t); }
  const std::string& shape_b(const Term& t) { return cached(shapes_b_, b_, t); }
  static const std::string& cached(std::unordered_map<const Term*, std::string>& m, const Pattern& p,
                                   const Term& t) {
    auto it = m.find(&t);
    if (it == m.end()) it = m.emplace(&t, shape(p, t)).first;
    return it->second;
  }

  const Pattern& a_;
  const Pattern& b_;
  MatchState& s_;
  std::unordered_map<const Term*, std::string> shapes_a_, shapes_b_;
};

// ---------------------------------------------------------------- serialization

void write_term(const Term& t, std::string& out) {
  switch (t.op) {
    case Op::Const: out += "#" + std::to_string(t.value); return;
    case Op::Var: out += "$" + std::to_string(t.value); return;
    case Op::Table: out += "(T" + std::to_string(t.value); break;
    case Op::Xor: out += "(^ " + std::to_string(t.value); break;
    case Op::Shl:
    case Op::Shr: out += std::string("(") + op_symbol(t.op) + " " + std::to_string(t.value); break;
    default: out += std::string("(") + op_symbol(t.op); break;
  }
  for (const auto& k : t.kids) {
    out += " ";
    write_term(k, out);
  }
  out += ")";
}

class TermReader {
 public:
  explicit TermReader(const std::string& s) : s_(s) {}

  Term read() {
    skip();
    if (pos_ >= s_.size()) fail();
    char c = s_[pos_];
    if (c == '#') {
      ++pos_;
      return Term{Op::Const, number(), {}};
    }
    if (c == '$') {
      ++pos_;
      return Term{Op::Var, number(), {}};
    }
    if (c != '(') fail();
    ++pos_;
    std::string head;
    while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != ')') head += s_[pos_++];
    Term t;
    size_t arity = 2;
    if (head[0] == 'T') {
      t.op = Op::Table;
      t.value = std::stoull(head.substr(1));
      arity = 1;
    } else if (head == "^") {
      t.op = Op::Xor;
      skip();
      t.value = number();
      arity = SIZE_MAX;
    } else if (head == "<<" || head == ">>") {
      t.op = head == "<<" ? Op::Shl : Op::Shr;
      skip();
      t.value = number();
      arity = 1;
    } else if (head == "~") {
      t.op = Op::Not;
      arity = 1;
    } else {
      static const std::map<std::string, Op> kOps = {{"&", Op::And}, {"|", Op::Or}, {"@", Op::GfMul},
                                                     {"+", Op::Add}, {"-", Op::Sub}, {"*", Op::Mul}};
      auto it = kOps.find(head);
      if (it == kOps.end()) fail();
      t.op = it->second;
    }
    while (true) {
      skip();
      if (pos_ < s_.size() && s_[pos_] == ')') {
        ++pos_;
        break;
      }
      t.kids.push_back(read());
    }
    if (arity != SIZE_MAX && t.kids.size() != arity) fail();
    return t;
  }

  bool done() {
    skip();
    return pos_ >= s_.size();
  }

 private:
  void skip() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }
  uint64_t number() {
    size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail();
    return std::stoull(s_.substr(start, pos_ - start));
  }
  [[noreturn]] void fail() { throw std::runtime_error("malformed pattern term: " + s_); }

  const std::string& s_;
  size_t pos_ = 0;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

DistType parse_type(const std::string& s) {
  for (DistType t : {DistType::Uniform, DistType::SecretIndependent, DistType::Leaky, DistType::Unknown}) {
    if (s == type_name(t)) return t;
  }
  throw std::runtime_error("unknown verdict '" + s + "' in pattern store");
}

void render(const Pattern& p, const Term& t, std::string& out) {
  switch (t.op) {
    case Op::Const: out += std::to_string(t.value); return;
    case Op::Var: out += p.names.empty() ? "$" + std::to_string(t.value) : p.names[t.value]; return;
    case Op::Table:
      out += split(p.tables[t.value], '@')[0] + "(";
      render(p, t.kids[0], out);
      out += ")";
      return;
    case Op::Not:
      out += "~";
      render(p, t.kids[0], out);
      return;
    case Op::Xor:
      out += "(";
      for (size_t i = 0; i < t.kids.size(); ++i) {
        if (i) out += " ^ ";
        render(p, t.kids[i], out);
      }
      if (t.value) out += (t.kids.empty() ? "" : " ^ ") + std::to_string(t.value);
      out += ")";
      return;
    case Op::Shl:
    case Op::Shr:
      out += "(";
      render(p, t.kids[0], out);
      out += std::string(" ") + op_symbol(t.op) + " " + std::to_string(t.value) + ")";
      return;
    default:
      out += "(";
      render(p, t.kids[0], out);
      out += std::string(" ") + op_symbol(t.op) + " ";
      render(p, t.kids[1], out);
      out += ")";
      return;
  }
}

}  // namespace

Pattern make_pattern(const ExprContext& ctx, std::span<const Expr> exprs) {
  auto terms = to_terms(ctx, exprs, kTermBudget);
  if (!terms) throw std::length_error("observable set too large for pattern matching");
  Pattern p;
  p.width = ctx.width();
  std::unordered_map<VarId, uint32_t> vars;
  std::unordered_map<uint32_t, uint32_t> tables;
  for (auto& t : *terms) localize(ctx, t, vars, tables, p);
  p.exprs = std::move(*terms);
  return p;
}

NormalizedSet normalize(ExprContext& ctx, std::span<const Expr> exprs) {
  NormalizedSet ns;
  ns.exprs = simplify_alg(ctx, exprs);
  while (true) {
    auto terms = to_terms(ctx, ns.exprs, kTermBudget);
    if (!terms) break;
    Scan s;
    for (const auto& t : *terms) scan(t, nullptr, 0, s);
    bool changed = false;
    for (const auto& [c, uses] : s.consts) {
      if (c == 0) continue;
      auto anchor = find_anchor(ctx, s, c);
      if (!anchor) continue;
      auto [op, x] = *anchor;
      VarId fresh = ctx.fresh_var(ctx.kind(x), base_name(ctx.name(x)));
      for (size_t i = 0; i < terms->size(); ++i) {
        std::vector<VarId> vs;
        term_vars((*terms)[i], vs);
        if (std::find(vs.begin(), vs.end(), x) == vs.end()) continue;
        assimilate((*terms)[i], ctx.field(), op, c, x, fresh);
        ns.exprs[i] = simplify_alg(ctx, to_expr(ctx, (*terms)[i]));
      }
      ns.assimilated.push_back(Assimilation{c, op, x, fresh});
      changed = true;
      break;
    }
    if (!changed) break;
  }
  ns.pattern = make_pattern(ctx, ns.exprs);
  return ns;
}

std::optional<std::vector<uint32_t>> match(const Pattern& a, const Pattern& b) {
  if (a.width != b.width || a.exprs.size() != b.exprs.size() || a.kinds.size() != b.kinds.size()) {
    return std::nullopt;
  }
  MatchState s{std::vector<int64_t>(a.kinds.size(), -1), std::vector<int64_t>(b.kinds.size(), -1)};
  Matcher m(a, b, s);
  std::vector<bool> used(b.exprs.size(), false);
  if (!m.pair_exprs(0, used)) return std::nullopt;
  std::vector<uint32_t> h;
  for (int64_t v : s.fwd) {
    if (v < 0) return std::nullopt;
    h.push_back(static_cast<uint32_t>(v));
  }
  return h;
}

std::string fingerprint(const Pattern& p) {
  std::vector<std::string> shapes;
  for (const auto& t : p.exprs) shapes.push_back(shape(p, t));
  std::sort(shapes.begin(), shapes.end());
  std::string s = "w" + std::to_string(p.width);
  for (const auto& x : shapes) s += "|" + x;
  return s;
}

std::string pattern_to_string(const Pattern& p) {
  std::string out = "{";
  for (size_t i = 0; i < p.exprs.size(); ++i) {
    if (i) out += ", ";
    render(p, p.exprs[i], out);
  }
  return out + "}";
}

std::string serialize(const Pattern& p) {
  std::string kinds, names, tables, exprs;
  for (VarKind k : p.kinds) kinds += kind_letter(k);
  for (size_t i = 0; i < p.names.size(); ++i) names += (i ? "," : "") + p.names[i];
  for (size_t i = 0; i < p.tables.size(); ++i) tables += (i ? "," : "") + p.tables[i];
  for (size_t i = 0; i < p.exprs.size(); ++i) {
    if (i) exprs += " ; ";
    write_term(p.exprs[i], exprs);
  }
  auto dash = [](const std::string& s) { return s.empty() ? std::string("-") : s; };
  return std::to_string(p.width) + "\t" + dash(kinds) + "\t" + dash(names) + "\t" + dash(tables) + "\t" + exprs;
}

Pattern deserialize(const std::string& text) {
  auto f = split(text, '\t');
  if (f.size() != 5) throw std::runtime_error("malformed pattern record");
  Pattern p;
  p.width = std::stoi(f[0]);
  if (f[1] != "-") {
    for (char c : f[1]) p.kinds.push_back(letter_kind(c));
  }
  if (f[2] != "-") p.names = split(f[2], ',');
  if (f[3] != "-") p.tables = split(f[3], ',');
  for (const auto& e : split(f[4], ';')) {
    TermReader r(e);
    p.exprs.push_back(r.read());
    if (!r.done()) throw std::runtime_error("trailing text in pattern term");
  }
  return p;
}

std::optional<size_t> PatternStore::find_locked(const Pattern& p, const std::string& fp) const {
  auto it = buckets_.find(fp);
  if (it == buckets_.end()) return std::nullopt;
  for (size_t i : it->second) {
    if (match(p, entries_[i].pattern)) return i;
  }
  return std::nullopt;
}

std::optional<std::pair<size_t, DistType>> PatternStore::lookup(const Pattern& p) {
  std::string fp = fingerprint(p);
  std::optional<size_t> hit;
  {
    std::shared_lock lock(mu_);
    hit = find_locked(p, fp);
  }
  if (!hit) return std::nullopt;
  std::unique_lock lock(mu_);
  entries_[*hit].members++;
  return std::make_pair(*hit, entries_[*hit].verdict);
}

size_t PatternStore::insert(Pattern p, DistType verdict, std::string provenance) {
  if (p.width != width_) throw std::invalid_argument("pattern width differs from the store width");
  std::string fp = fingerprint(p);
  std::unique_lock lock(mu_);
  if (auto existing = find_locked(p, fp)) {
    entries_[*existing].members++;
    return *existing;
  }
  for (char& c : provenance) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  entries_.push_back(PatternEntry{std::move(p), verdict, fp, std::move(provenance), 1});
  buckets_[fp].push_back(entries_.size() - 1);
  return entries_.size() - 1;
}

size_t PatternStore::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::vector<PatternEntry> PatternStore::entries() const {
  std::shared_lock lock(mu_);
  return entries_;
}

void PatternStore::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write pattern store " + path);
  std::shared_lock lock(mu_);
  out << "maskcheck-patterns\t1\t" << width_ << "\n";
  for (const auto& e : entries_) {
    out << type_name(e.verdict) << "\t" << e.members << "\t" << (e.provenance.empty() ? "-" : e.provenance)
        << "\t" << serialize(e.pattern) << "\n";
  }
  if (!out) throw std::runtime_error("cannot write pattern store " + path);
}

void PatternStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read pattern store " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty pattern store " + path);
  auto head = split(line, '\t');
  if (head.size() != 3 || head[0] != "maskcheck-patterns" || head[1] != "1") {
    throw std::runtime_error("not a pattern store: " + path);
  }
  if (std::stoi(head[2]) != width_) {
    throw std::runtime_error("pattern store " + path + " was built for width " + head[2]);
  }
  std::unique_lock lock(mu_);
  entries_.clear();
  buckets_.clear();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line, '\t');
    if (f.size() < 8) throw std::runtime_error("malformed pattern store line: " + line);
    PatternEntry e;
    e.verdict = parse_type(f[0]);
    e.members = std::stoull(f[1]);
    e.provenance = f[2] == "-" ? "" : f[2];
    std::string rest = f[3];
    for (size_t i = 4; i < f.size(); ++i) rest += "\t" + f[i];
    e.pattern = deserialize(rest);
    e.fingerprint = fingerprint(e.pattern);
    buckets_[e.fingerprint].push_back(entries_.size());
    entries_.push_back(std::move(e));
  }
}

LookupResult lookup_or_insert(ExprContext& ctx, std::span<const Expr> exprs, PatternStore& store,
                              const std::function<DistType(const NormalizedSet&)>& decide,
                              const std::string& provenance) {
  NormalizedSet ns = normalize(ctx, exprs);
  if (auto hit = store.lookup(ns.pattern)) return LookupResult{hit->second, true, hit->first};
  DistType v = decide(ns);
  if (v == DistType::Unknown) return LookupResult{v, false, SIZE_MAX};
  size_t idx = store.insert(ns.pattern, v, provenance);
  return LookupResult{v, false, idx};
}

}  // namespace maskcheck
