#pragma once

#include <random>
#include <string>
#include <vector>

#include "maskcheck/patterns.h"
#include "maskcheck/program.h"

namespace corpus {

struct Source {
  std::string name;
  std::string text;
};

std::string source_dir();
std::string data_dir();

// Small programs with at most three randoms, meant for widths 1 and 2.
const std::vector<Source>& small_programs();
maskcheck::Program load(const Source& s, int width);
maskcheck::Program load_file(const std::string& relative, int width);

// All subsets of vars with 1..max_size elements, in lexicographic order.
std::vector<std::vector<maskcheck::VarId>> subsets(const std::vector<maskcheck::VarId>& vars, int max_size);

// Instances of the three faulty-Sbox families at width 8, each as an
// expression set over its own renamed variables.
struct FamilySet {
  int family = 0;
  int param = 0;
  std::vector<maskcheck::Expr> exprs;
};

std::vector<FamilySet> sbox_families(maskcheck::ExprContext& ctx, uint32_t sbox, std::mt19937_64& rng,
                                     int renamings);

}  // namespace corpus
