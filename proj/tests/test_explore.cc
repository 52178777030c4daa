#include <doctest.h>

#include <set>

#include "corpus.h"
#include "maskcheck/explore.h"
#include "maskcheck/frontend.h"
#include "oracle.h"

using namespace maskcheck;

namespace {

using Set = std::vector<VarId>;

std::set<Set> pls_sets(const ExploreResult& r) {
  std::set<Set> out;
  for (const auto& p : r.pls) out.insert(p.vars);
  return out;
}

Set sorted(Set s) {
  std::sort(s.begin(), s.end());
  return s;
}

bool covered_by(const Set& o, const Covered& c) {
  for (const auto& b : c.blocks) {
    int n = 0;
    for (VarId x : o) {
      if (std::find(b.vars.begin(), b.vars.end(), x) == b.vars.end()) continue;
      if (!std::binary_search(c.extended.begin(), c.extended.end(), x)) return false;
      ++n;
    }
    if (n != b.budget) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("first order on the motivating example") {
  Program p = corpus::load_file("corpus/goubin.mask", 8);
  TypeChecker tc(p);
  ExploreResult r = home(p, 1, tc);
  CHECK(pls_sets(r) == std::set<Set>{p.find_all({"A"})});
  CHECK(r.check_set.size() == 10);
  CHECK(r.stats.tuples == 10);
}

TEST_CASE("second order on the motivating example") {
  Program p = corpus::load_file("corpus/goubin.mask", 8);
  TypeChecker tc(p);
  ExploreResult r = home(p, 2, tc);
  auto pls = pls_sets(r);
  for (auto names : std::vector<std::vector<std::string>>{{"y0", "y3"}, {"r", "x'"}, {"y2", "y3"}, {"y2", "y4"}}) {
    CAPTURE(names[0]);
    CHECK(pls.count(sorted(p.find_all(names))));
  }
  CHECK_FALSE(pls.count(sorted(p.find_all({"x'", "y0"}))));
  CHECK_FALSE(pls.count(sorted(p.find_all({"r", "r'"}))));
  for (const auto& s : pls) CHECK(s.size() == 2);
  CHECK(r.stats.tuples == 55);
}

TEST_CASE("public-only programs have nothing to check") {
  Program p = elaborate(parse("#public a, b;\nc = a ^ b;\nd = c & a;\n"), 8);
  TypeChecker tc(p);
  ExploreResult r = home(p, 2, tc);
  CHECK(r.check_set.empty());
  CHECK(r.pls.empty());
}

TEST_CASE("check sets smaller than the order are checked whole") {
  Program p = elaborate(parse("#private k;\n#random r;\nx = k ^ r;\n"), 8);
  TypeChecker tc(p);
  ExploreResult r = home(p, 3, tc);
  CHECK(r.check_set.size() == 2);
  CHECK(pls_sets(r) == std::set<Set>{sorted(p.find_all({"r", "x"}))});
}

TEST_CASE("tuple counts") {
  CHECK(count_tuples(10, 1) == 10);
  CHECK(count_tuples(10, 2) == 55);
  CHECK(count_tuples(4, 6) == 15);
  CHECK(count_tuples(0, 2) == 0);
}

TEST_CASE("exploration is deterministic") {
  for (const auto& src : corpus::small_programs()) {
    Program p = corpus::load(src, 2);
    TypeChecker a(p), b(p);
    auto ra = home(p, 2, a), rb = home(p, 2, b);
    CHECK(pls_sets(ra) == pls_sets(rb));
    CHECK(ra.stats.sets_checked == rb.stats.sets_checked);
    REQUIRE(ra.proofs.size() == rb.proofs.size());
    for (size_t i = 0; i < ra.proofs.size(); ++i) CHECK(ra.proofs[i].set == rb.proofs[i].set);
  }
}

TEST_CASE("every set of the order is covered or potentially leaky") {
  ExploreOptions opts;
  opts.record_covered = true;
  for (const auto& src : corpus::small_programs()) {
    Program p = corpus::load(src, 2);
    std::vector<VarId> xs = p.check_set();
    for (int d = 1; d <= 3 && d <= static_cast<int>(xs.size()); ++d) {
      TypeChecker tc(p);
      ExploreResult r = home(p, d, tc, opts);
      auto pls = pls_sets(r);
      CAPTURE(src.name);
      CAPTURE(d);
      for (const auto& o : corpus::subsets(xs, d)) {
        if (static_cast<int>(o.size()) != d) continue;
        Set so = sorted(o);
        bool in_pls = pls.count(so) > 0;
        int covering = 0;
        for (const auto& c : r.covered) covering += covered_by(so, c);
        REQUIRE((in_pls || covering > 0));
        REQUIRE(covering <= 1);
        REQUIRE_FALSE((in_pls && covering > 0));
        if (covering && d <= 2) REQUIRE_FALSE(oracle::leaky(*p.ctx, p.computations(so)));
      }
    }
  }
}

TEST_CASE("proofs cover extended sets soundly") {
  for (const auto& src : corpus::small_programs()) {
    if (src.name == "table") continue;
    Program p = corpus::load(src, 1);
    TypeChecker tc(p);
    ExploreResult r = home(p, 2, tc);
    for (const auto& j : r.proofs) {
      CAPTURE(src.name);
      REQUIRE(tc.verify(j));
      REQUIRE_FALSE(oracle::leaky(*p.ctx, p.computations(j.set)));
    }
  }
}
