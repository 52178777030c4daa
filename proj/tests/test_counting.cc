#include <doctest.h>

#include "corpus.h"
#include "maskcheck/counting.h"
#include "maskcheck/frontend.h"
#include "oracle.h"

using namespace maskcheck;

namespace {

CountingProblem problem(const Program& p, std::initializer_list<const char*> names, int bits = 32) {
  std::vector<std::string> ns(names.begin(), names.end());
  return CountingProblem(*p.ctx, p.computations(p.find_all(ns)), CountBudget{bits});
}

}  // namespace

TEST_CASE("joint counts of the motivating example at width one") {
  Program p = corpus::load_file("corpus/goubin.mask", 1);
  CountingProblem c = problem(p, {"y0", "y3"});
  REQUIRE(c.privates().size() == 1);
  REQUIRE(c.randoms().size() == 2);
  std::vector<Value> none;
  std::vector<Value> k0 = {0}, k1 = {1};
  Histogram h0 = c.count(none, k0);
  CHECK(h0.entries() == std::vector<std::pair<uint64_t, uint64_t>>{{0, 2}, {3, 2}});
  Histogram h1 = c.count(none, k1);
  CHECK(h1.count(c.encode(std::vector<Value>{0, 1})) == 2);
  CHECK(h1.count(c.encode(std::vector<Value>{1, 0})) == 2);
  CHECK(h1.count(0) == 0);
  CHECK(c.decode(c.encode(std::vector<Value>{1, 0})) == std::vector<Value>{1, 0});
}

TEST_CASE("a lone random is uniform") {
  for (int w : {1, 4, 8}) {
    Program p = corpus::load_file("corpus/goubin.mask", w);
    CountingProblem c = problem(p, {"r"});
    Histogram h = c.count({}, {});
    CHECK(h.entries().size() == (size_t{1} << w));
    for (const auto& [i, n] : h.entries()) CHECK(n == 1);
    CHECK(bf_decide(c).outcome == CountOutcome::SecretIndependent);
  }
}

TEST_CASE("decisions on the motivating example") {
  for (int w : {1, 8}) {
    Program p = corpus::load_file("corpus/goubin.mask", w);
    CountingProblem c = problem(p, {"y0", "y3"});
    CountVerdict v = bf_decide(c);
    CHECK(v.outcome == CountOutcome::Leaky);
    REQUIRE(v.witness);
    CHECK(verify_witness(c, *v.witness));
  }
  Program p = corpus::load_file("corpus/goubin.mask", 8);
  CHECK(bf_decide(problem(p, {"A"})).outcome == CountOutcome::SecretIndependent);
  CHECK(parallel_decide(problem(p, {"A"}), 4).outcome == CountOutcome::SecretIndependent);
}

TEST_CASE("sets without randoms") {
  Program p = elaborate(parse("#public a;\n#private k;\nx = k ^ a;\ny = a & 3;\n"), 2);
  CountingProblem leak = problem(p, {"x"});
  CHECK(leak.random_space() == 1);
  CountVerdict v = bf_decide(leak);
  CHECK(v.outcome == CountOutcome::Leaky);
  CHECK(parallel_decide(leak, 2).witness == v.witness);
  CHECK(bf_decide(problem(p, {"y"})).outcome == CountOutcome::SecretIndependent);
}

TEST_CASE("budget limits") {
  Program p = corpus::load_file("corpus/goubin.mask", 8);
  CHECK_THROWS_AS(problem(p, {"y0", "y3"}, 16), BudgetExceeded);
  CHECK_NOTHROW(problem(p, {"y0", "y3"}, 24));
  Program q = corpus::load_file("corpus/goubin.mask", 16);
  CHECK_THROWS_AS(problem(q, {"y0", "y3"}), BudgetExceeded);
}

TEST_CASE("parallel decisions match the serial reference") {
  for (const auto& src : corpus::small_programs()) {
    for (int w : {1, 2}) {
      if (src.name == "table" && w != 2) continue;
      Program p = corpus::load(src, w);
      for (const auto& set : corpus::subsets(p.observables, 2)) {
        CountingProblem c(*p.ctx, p.computations(set));
        CountVerdict ref = bf_decide(c);
        CAPTURE(src.name);
        for (int workers : {1, 2, 8}) {
          CountVerdict par = parallel_decide(c, workers);
          REQUIRE(par.outcome == ref.outcome);
          REQUIRE(par.witness == ref.witness);
        }
        if (ref.witness) REQUIRE(verify_witness(c, *ref.witness));
        REQUIRE((ref.outcome == CountOutcome::Leaky) == oracle::leaky(*p.ctx, p.computations(set)));
      }
    }
  }
}

TEST_CASE("histograms match the oracle distribution and conserve mass") {
  std::mt19937_64 rng(3);
  for (const auto& src : corpus::small_programs()) {
    Program p = corpus::load(src, 2);
    for (const auto& set : corpus::subsets(p.observables, 2)) {
      auto exprs = p.computations(set);
      CountingProblem c(*p.ctx, exprs);
      std::vector<Value> pub(c.publics().size()), priv(c.privates().size());
      for (auto& x : pub) x = static_cast<Value>(rng() & 3);
      for (auto& x : priv) x = static_cast<Value>(rng() & 3);
      Histogram h = c.count(pub, priv);
      REQUIRE(h.total() == c.random_space());
      REQUIRE(c.count_parallel(pub, priv, 3) == h);
      std::map<VarId, Value> fixed;
      for (size_t i = 0; i < pub.size(); ++i) fixed[c.publics()[i]] = pub[i];
      for (size_t i = 0; i < priv.size(); ++i) fixed[c.privates()[i]] = priv[i];
      auto d = oracle::distribution(*p.ctx, exprs, oracle::space_of(*p.ctx, exprs), fixed);
      REQUIRE(d.size() == h.entries().size());
      for (const auto& [tuple, n] : d) REQUIRE(h.count(c.encode(tuple)) == n);
    }
  }
}

TEST_CASE("large tuple spaces use the sparse path") {
  Program p = elaborate(parse("#private k;\n#random r, s;\na = k ^ r;\nb = r & s;\nc = s + k;\n"), 8);
  CountingProblem c = problem(p, {"a", "b", "c"});
  CHECK_FALSE(c.dense());
  CountVerdict ref = bf_decide(c);
  CountVerdict par = parallel_decide(c, 4);
  CHECK(ref.outcome == par.outcome);
  CHECK(ref.witness == par.witness);
}
