#include <doctest.h>

#include "corpus.h"
#include "maskcheck/frontend.h"
#include "maskcheck/typesys.h"
#include "oracle.h"

using namespace maskcheck;

namespace {

Program goubin() { return corpus::load_file("corpus/goubin.mask", 8); }

}  // namespace

TEST_CASE("first-order types of the motivating example") {
  Program p = goubin();
  TypeChecker tc(p);
  CHECK(tc.infer_var(p.find("y3")) == DistType::Uniform);
  CHECK(tc.infer_var(p.find("x'")) == DistType::Uniform);
  CHECK(tc.infer_var(p.find("r")) == DistType::Uniform);
  for (const char* n : {"x'", "y0", "y1", "y2", "y3", "y4", "y5", "r", "r'"}) {
    CAPTURE(n);
    CHECK(tc.infer_set(p.find_all({n})).proved());
  }
  CHECK_FALSE(tc.infer_set(p.find_all({"A"})).proved());
}

TEST_CASE("identical operand rules") {
  Program p = elaborate(parse("#private k;\n#random r;\nx = k;\nt = x & x;\nu = x - x;\nv = r ^ r;\nw = k ^ r;\n"), 8);
  TypeChecker tc(p);
  CHECK(tc.infer_var(p.find("x")) == DistType::Leaky);
  CHECK(tc.infer_var(p.find("t")) == DistType::Leaky);
  CHECK(tc.infer_var(p.find("u")) == DistType::SecretIndependent);
  CHECK(tc.infer_var(p.find("v")) == DistType::SecretIndependent);
  CHECK(tc.infer_var(p.find("w")) == DistType::Uniform);
}

TEST_CASE("set judgements of the motivating example") {
  Program p = goubin();
  TypeChecker tc(p);
  Judgement a = tc.infer_set(p.find_all({"x'", "y0"}));
  CHECK(a.type == DistType::Uniform);
  CHECK(a.proof.front().rule == "Rud");
  CHECK(tc.verify(a));

  Judgement plain = tc.infer_set(p.find_all({"x'", "y1"}), TransformLevel::Plain);
  CHECK_FALSE(plain.proved());
  Judgement dom = tc.infer_set(p.find_all({"x'", "y1"}), TransformLevel::Dom);
  CHECK(dom.type == DistType::SecretIndependent);
  CHECK(dom.level == TransformLevel::Dom);
  CHECK(tc.verify(dom));

  for (TransformLevel l : {TransformLevel::Plain, TransformLevel::Dom, TransformLevel::Col}) {
    CHECK(tc.infer_set(p.find_all({"r", "x'"}), l).type == DistType::Unknown);
  }

  Judgement three = tc.infer_set(p.find_all({"r", "r'", "y3"}));
  CHECK(three.proved());
  bool sid2 = false;
  for (const auto& s : three.proof) sid2 |= s.rule == "Sid2";
  CHECK(sid2);
}

TEST_CASE("sets without private variables are secret independent") {
  Program p = elaborate(parse("#public a;\n#random r;\n#private k;\nx = a & r;\ny = x | a;\nz = k ^ r;\n"), 8);
  TypeChecker tc(p);
  Judgement j = tc.infer_set(p.find_all({"x", "y"}));
  CHECK(j.proved());
  CHECK(tc.verify(j));
  CHECK(tc.infer_set(p.find_all({"y", "r"})).proved());
}

TEST_CASE("verify rejects tampered proofs") {
  Program p = goubin();
  TypeChecker tc(p);
  Judgement j = tc.infer_set(p.find_all({"x'", "y0"}));
  REQUIRE(tc.verify(j));
  Judgement bad = j;
  bad.set = p.find_all({"r", "x'"});
  bad.exprs = tc.lambdas(bad.set);
  CHECK_FALSE(tc.verify(bad));
}

TEST_CASE("type judgements are sound on the corpus") {
  int uniform = 0, si = 0, leaky = 0;
  for (const auto& src : corpus::small_programs()) {
    for (int w : {1, 2}) {
      if (src.name == "table" && w != 2) continue;
      Program p = corpus::load(src, w);
      TypeChecker tc(p);
      for (const auto& set : corpus::subsets(p.observables, 2)) {
        Judgement j = tc.infer_set(set);
        auto exprs = p.computations(set);
        CAPTURE(src.name);
        CAPTURE(w);
        if (j.type == DistType::Uniform) {
          ++uniform;
          REQUIRE(oracle::uniform(*p.ctx, exprs));
        } else if (j.type == DistType::SecretIndependent) {
          ++si;
          REQUIRE_FALSE(oracle::leaky(*p.ctx, exprs));
        } else if (j.type == DistType::Leaky) {
          ++leaky;
          REQUIRE(oracle::leaky(*p.ctx, exprs));
        }
        if (j.proved()) REQUIRE(tc.verify(j));
      }
    }
  }
  CHECK(uniform > 50);
  CHECK(si > 20);
  CHECK(leaky > 0);
}

TEST_CASE("uniform sets have uniform subsets") {
  for (const auto& src : corpus::small_programs()) {
    Program p = corpus::load(src, 2);
    TypeChecker tc(p);
    for (const auto& set : corpus::subsets(p.check_set(), 3)) {
      if (set.size() < 2 || tc.infer_set(set).type != DistType::Uniform) continue;
      for (const auto& sub : corpus::subsets(set, static_cast<int>(set.size()) - 1)) {
        CAPTURE(src.name);
        CHECK(tc.infer_set(sub).type == DistType::Uniform);
      }
    }
  }
}
