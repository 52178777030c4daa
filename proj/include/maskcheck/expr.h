#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "maskcheck/field.h"

namespace maskcheck {

enum class VarKind : uint8_t { Public, Private, Random, Intermediate };

enum class Op : uint8_t {
  Const,
  Var,
  Not,
  Table,
  Shl,
  Shr,
  Xor,
  And,
  Or,
  GfMul,
  Add,
  Sub,
  Mul,
};

using VarId = uint32_t;
using NodeId = uint32_t;
using VarSet = std::vector<VarId>;  // sorted, unique

const char* kind_name(VarKind kind);
const char* op_symbol(Op op);
bool is_binary(Op op);
bool is_commutative(Op op);
Value apply_binary(const Field& field, Op op, Value a, Value b);

struct VarInfo {
  std::string name;
  VarKind kind;
  bool fresh = false;
  VarSet origin;  // collapsed variables for fresh ones
};

struct Expr {
  NodeId id = 0;
  friend bool operator==(Expr a, Expr b) { return a.id == b.id; }
  friend auto operator<=>(Expr a, Expr b) { return a.id <=> b.id; }
};

struct Node {
  Op op;
  NodeId a;
  NodeId b;
  uint64_t value;  // constant, variable id, table id or shift amount
  uint64_t size;   // tree size, saturating
  std::shared_ptr<const VarSet> vars;
  std::shared_ptr<const VarSet> dom;
};

VarSet set_union(const VarSet& a, const VarSet& b);
VarSet set_minus(const VarSet& a, const VarSet& b);
VarSet set_intersect(const VarSet& a, const VarSet& b);
bool set_contains(const VarSet& a, VarId v);
bool set_disjoint(const VarSet& a, const VarSet& b);
bool set_subset(const VarSet& a, const VarSet& b);

// Hash-consed expression DAG over one program's variables. Node reads are
// lock free; creation is serialized.
class ExprContext {
 public:
  explicit ExprContext(int width);
  ExprContext(const ExprContext&) = delete;
  ExprContext& operator=(const ExprContext&) = delete;
  ~ExprContext();

  const Field& field() const { return field_; }
  int width() const { return field_.width(); }

  VarId add_var(std::string name, VarKind kind);
  // A variable not present in the source, e.g. from collapsing.
  VarId fresh_var(VarKind kind, const std::string& base, VarSet origin = {});
  const VarInfo& var(VarId v) const;
  size_t num_vars() const;
  const std::string& name(VarId v) const { return var(v).name; }
  VarKind kind(VarId v) const { return var(v).kind; }

  uint32_t add_table(Table table);
  const Table& table(uint32_t id) const;
  size_t num_tables() const;

  Expr constant(Value v);
  Expr variable(VarId v);
  Expr unary(Op op, Expr a);  // Not
  Expr lookup(uint32_t table, Expr a);
  Expr shift(Op op, Expr a, uint32_t amount);
  Expr binary(Op op, Expr a, Expr b);
  // Same operator and payload as n, with new children.
  Expr rebuild(const Node& n, Expr a, Expr b);

  const Node& node(Expr e) const { return node(e.id); }
  const Node& node(NodeId id) const;
  size_t num_nodes() const { return count_.load(std::memory_order_acquire); }

  uint64_t size(Expr e) const { return node(e).size; }
  const VarSet& vars(Expr e) const { return *node(e).vars; }
  const VarSet& dom(Expr e) const { return *node(e).dom; }
  VarSet rvars(Expr e) const;
  VarSet vars_of_kind(Expr e, VarKind kind) const;
  bool is_const(Expr e) const { return node(e).op == Op::Const; }

  Value eval(Expr e, std::span<const Value> valuation) const;
  std::string to_string(Expr e) const;

 private:
  struct Key {
    Op op;
    NodeId a, b;
    uint64_t value;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    size_t operator()(const Key& k) const;
  };

  Expr intern(Op op, NodeId a, NodeId b, uint64_t value);
  void to_string(NodeId id, std::string& out) const;

  static constexpr int kChunkBits = 12;
  static constexpr size_t kMaxChunks = size_t{1} << 16;

  Field field_;
  std::unique_ptr<std::atomic<Node*>[]> chunks_;
  std::atomic<size_t> count_{0};
  std::unordered_map<Key, NodeId, KeyHash> interned_;
  mutable std::mutex mu_;
  std::deque<VarInfo> vars_;
  std::deque<Table> tables_;
  std::unordered_map<std::string, int> fresh_counter_;
};

// Every x in the set has a dominant random absent from the other expressions.
bool uniform_by_dominators(const ExprContext& ctx, std::span<const Expr> exprs);

}  // namespace maskcheck

template <>
struct std::hash<maskcheck::Expr> {
  size_t operator()(maskcheck::Expr e) const { return std::hash<uint32_t>()(e.id); }
};
