#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "maskcheck/term.h"
#include "maskcheck/typesys.h"

namespace maskcheck {

// A normalized set detached from any context: variables are local indices.
struct Pattern {
  int width = 0;
  std::vector<Term> exprs;      // Var value = local variable, Table value = local table
  std::vector<VarKind> kinds;   // per local variable
  std::vector<std::string> names;  // display only
  std::vector<std::string> tables;  // table identity: name@content-hash

  friend bool operator==(const Pattern& a, const Pattern& b) {
    return a.width == b.width && a.exprs == b.exprs && a.kinds == b.kinds && a.tables == b.tables;
  }
};

struct Assimilation {
  Value constant;
  Op op;          // Xor, Add or Sub
  VarId anchor;
  VarId fresh;
};

struct NormalizedSet {
  std::vector<Expr> exprs;
  std::vector<Assimilation> assimilated;
  Pattern pattern;
};

NormalizedSet normalize(ExprContext& ctx, std::span<const Expr> exprs);
Pattern make_pattern(const ExprContext& ctx, std::span<const Expr> exprs);

// Type-respecting isomorphism: h maps local variables of a to those of b.
std::optional<std::vector<uint32_t>> match(const Pattern& a, const Pattern& b);

std::string fingerprint(const Pattern& p);
std::string pattern_to_string(const Pattern& p);
std::string serialize(const Pattern& p);
Pattern deserialize(const std::string& text);

struct PatternEntry {
  Pattern pattern;
  DistType verdict = DistType::Unknown;
  std::string fingerprint;
  std::string provenance;
  uint64_t members = 1;
};

class PatternStore {
 public:
  explicit PatternStore(int width) : width_(width) {}
  PatternStore(const PatternStore&) = delete;

  int width() const { return width_; }
  // Index and verdict of a matching entry; counts the hit.
  std::optional<std::pair<size_t, DistType>> lookup(const Pattern& p);
  // Inserts unless an isomorphic entry exists; returns the entry index.
  size_t insert(Pattern p, DistType verdict, std::string provenance);
  size_t size() const;
  std::vector<PatternEntry> entries() const;

  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  std::optional<size_t> find_locked(const Pattern& p, const std::string& fp) const;

  int width_;
  mutable std::shared_mutex mu_;
  std::vector<PatternEntry> entries_;
  std::unordered_map<std::string, std::vector<size_t>> buckets_;
};

struct LookupResult {
  DistType verdict = DistType::Unknown;
  bool hit = false;
  size_t entry = 0;
};

// Normalizes, looks up, and on a miss resolves with decide and inserts.
// Unknown verdicts are not stored; entry is then SIZE_MAX.
LookupResult lookup_or_insert(ExprContext& ctx, std::span<const Expr> exprs, PatternStore& store,
                              const std::function<DistType(const NormalizedSet&)>& decide,
                              const std::string& provenance);

}  // namespace maskcheck
