#pragma once

#include <cstdint>
#include <vector>

#include "maskcheck/typesys.h"

namespace maskcheck {

struct PotentialLeak {
  std::vector<VarId> vars;
  DistType type = DistType::Unknown;  // Unknown, or Leaky when a member types as leaky
};

struct ExploreStats {
  uint64_t tuples = 0;        // observable sets of size 1..d
  uint64_t sets_checked = 0;  // chosen sets
  uint64_t checks = 0;        // all checks including extensions
  uint64_t dom_sets = 0;      // successful checks that needed Simply_Dom
  uint64_t col_sets = 0;      // successful checks that needed Simply_Col
};

struct Block {
  int budget = 0;
  std::vector<VarId> vars;
};

// A successful chosen set, its extension, and the subproblem it came from.
struct Covered {
  std::vector<Block> blocks;
  std::vector<VarId> extended;
};

struct ExploreOptions {
  bool record_covered = false;
  TransformLevel max_level = TransformLevel::Col;
};

struct ExploreResult {
  std::vector<VarId> check_set;
  std::vector<PotentialLeak> pls;  // sorted by variable ids
  ExploreStats stats;
  std::vector<Judgement> proofs;   // one per successful chosen set, after extension
  std::vector<Covered> covered;
};

ExploreResult home(const Program& prog, int order, TypeChecker& tc, const ExploreOptions& opts = {});

uint64_t count_tuples(uint64_t n, int order);

}  // namespace maskcheck
