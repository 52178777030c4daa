#include <doctest.h>

#include <random>

#include "corpus.h"
#include "maskcheck/transforms.h"
#include "oracle.h"

using namespace maskcheck;

namespace {

struct Fixture {
  ExprContext ctx{8};
  Expr k, r, r0, r1, r2, r3, rp, z;
  uint32_t sbox;
  Fixture() {
    k = ctx.variable(ctx.add_var("k", VarKind::Private));
    r = ctx.variable(ctx.add_var("r", VarKind::Random));
    rp = ctx.variable(ctx.add_var("r'", VarKind::Random));
    r0 = ctx.variable(ctx.add_var("r0", VarKind::Random));
    r1 = ctx.variable(ctx.add_var("r1", VarKind::Random));
    r2 = ctx.variable(ctx.add_var("r2", VarKind::Random));
    r3 = ctx.variable(ctx.add_var("r3", VarKind::Random));
    z = ctx.variable(ctx.add_var("Z", VarKind::Random));
    sbox = ctx.add_table(Table{"S", "aes", aes_sbox()});
  }
  Expr x(Expr a, Expr b) { return ctx.binary(Op::Xor, a, b); }
  Expr S(Expr a) { return ctx.lookup(sbox, a); }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "alg cancels xor duplicates across clusters") {
  Expr y4 = x(x(rp, r), x(k, r));
  Expr s = simplify_alg(ctx, y4);
  CHECK(ctx.vars(s) == set_union(ctx.vars(rp), ctx.vars(k)));
  CHECK(ctx.node(s).op == Op::Xor);
  CHECK(ctx.size(s) == 3);

  Expr e2 = x(S(x(x(x(r0, x(k, r0)), r1), r1)), z);
  CHECK(simplify_alg(ctx, e2) == x(S(k), z));
  CHECK(simplify_alg(ctx, x(k, k)) == ctx.constant(0));
}

TEST_CASE_FIXTURE(Fixture, "alg laws") {
  CHECK(simplify_alg(ctx, ctx.binary(Op::Sub, x(k, r), x(k, r))) == ctx.constant(0));
  CHECK(simplify_alg(ctx, ctx.binary(Op::Mul, ctx.constant(0), k)) == ctx.constant(0));
  CHECK(simplify_alg(ctx, ctx.binary(Op::GfMul, k, ctx.constant(0))) == ctx.constant(0));
  CHECK(simplify_alg(ctx, x(ctx.constant(0), k)) == k);
  CHECK(simplify_alg(ctx, x(ctx.constant(3), ctx.constant(5))) == ctx.constant(6));
  CHECK(simplify_alg(ctx, ctx.binary(Op::Sub, ctx.binary(Op::Add, k, r), r)) == k);
  Expr plain = ctx.binary(Op::And, k, r);
  CHECK(simplify_alg(ctx, plain) == plain);
}

TEST_CASE_FIXTURE(Fixture, "dom replaces largest dominated subexpressions") {
  std::vector<Expr> e = {x(k, r), ctx.binary(Op::Sub, x(x(k, r), rp), rp)};
  Transformed t = simplify_dom(ctx, e);
  REQUIRE(t.exprs.size() == 2);
  CHECK(t.exprs[0] == r);
  CHECK(t.exprs[1] == ctx.binary(Op::Sub, x(r, rp), rp));
  CHECK(t.trace.dom_steps() == 1);

  std::vector<Expr> e3 = {x(S(x(k, r0)), z), x(S(k), z)};
  Transformed t3 = simplify_dom(ctx, e3);
  CHECK(t3.exprs == std::vector<Expr>{r0, z});
  CHECK(t3.trace.dom_steps() == 2);

  std::vector<Expr> single = {r};
  CHECK(simplify_dom(ctx, single).exprs == single);
}

TEST_CASE_FIXTURE(Fixture, "col collapses random pairs in shared clusters") {
  Expr s1 = S(k), s2 = k;
  std::vector<Expr> e = {x(x(s1, r2), r3), x(x(s2, r2), r3)};
  Transformed t = simplify_col(ctx, e);
  REQUIRE(t.trace.col_steps() == 1);
  VarId fresh = t.trace.steps[0].var;
  CHECK(ctx.var(fresh).fresh);
  CHECK(ctx.kind(fresh) == VarKind::Random);
  CHECK(ctx.var(fresh).origin == set_union(ctx.vars(r2), ctx.vars(r3)));
  CHECK(t.exprs[0] == x(s1, ctx.variable(fresh)));
  CHECK(t.exprs[1] == x(s2, ctx.variable(fresh)));

  std::vector<Expr> lone = {ctx.binary(Op::Add, x(r, ctx.constant(1)), x(r, ctx.constant(2)))};
  CHECK(simplify_col(ctx, lone).exprs == lone);
  std::vector<Expr> outside = {x(r2, r3), r2};
  CHECK(simplify_col(ctx, outside).exprs == outside);
  std::vector<Expr> mixed = {x(x(s1, k), r3)};
  CHECK(simplify_col(ctx, mixed).trace.col_steps() == 0);
}

TEST_CASE_FIXTURE(Fixture, "transform levels") {
  std::vector<Expr> e = {x(S(x(k, r0)), x(r2, r3)), x(S(k), x(r2, r3))};
  CHECK(transform(ctx, e, TransformLevel::Plain).trace.dom_steps() == 0);
  Transformed d = transform(ctx, e, TransformLevel::Dom);
  CHECK(d.trace.col_steps() == 0);
  Transformed c = transform(ctx, e, TransformLevel::Col);
  CHECK(c.exprs.size() == 2);
  for (Expr x : c.exprs) CHECK(ctx.node(x).op == Op::Var);
}

TEST_CASE("replay reproduces the transformation") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    ExprContext ctx(2);
    std::vector<VarId> in = {ctx.add_var("p", VarKind::Public), ctx.add_var("k", VarKind::Private)};
    std::vector<VarId> rs = {ctx.add_var("r1", VarKind::Random), ctx.add_var("r2", VarKind::Random),
                             ctx.add_var("r3", VarKind::Random)};
    auto e = oracle::random_set(ctx, rng, in, rs, 1 + rng() % 3);
    for (TransformLevel level : {TransformLevel::Dom, TransformLevel::Col}) {
      Transformed t = transform(ctx, e, level);
      auto again = replay(ctx, t.trace, e);
      REQUIRE(again);
      REQUIRE(*again == t.exprs);
      auto t2 = transform(ctx, t.exprs, level);
      REQUIRE(t2.exprs == t.exprs);

      std::vector<Expr> bigger = e;
      bigger.push_back(oracle::random_expr(ctx, rng, in, 2, false));
      auto ext = replay(ctx, t.trace, bigger);
      if (ext) {
        REQUIRE(std::equal(t.exprs.begin(), t.exprs.end(), ext->begin()));
      }
    }
  }
}

TEST_CASE("transformations preserve distributions") {
  std::mt19937_64 rng(17);
  int fired = 0;
  for (int i = 0; i < 150; ++i) {
    ExprContext ctx(1 + static_cast<int>(i % 2));
    std::vector<VarId> in = {ctx.add_var("p", VarKind::Public), ctx.add_var("k", VarKind::Private)};
    std::vector<VarId> rs = {ctx.add_var("r1", VarKind::Random), ctx.add_var("r2", VarKind::Random),
                             ctx.add_var("r3", VarKind::Random)};
    auto e = oracle::random_set(ctx, rng, in, rs, 1 + rng() % 3);
    auto alg = simplify_alg(ctx, e);
    REQUIRE(oracle::same_distributions(ctx, e, alg));
    auto dom = simplify_dom(ctx, alg);
    REQUIRE(oracle::same_distributions(ctx, e, dom.exprs));
    auto col = simplify_col(ctx, alg);
    REQUIRE(oracle::same_distributions(ctx, e, col.exprs));
    auto full = transform(ctx, e, TransformLevel::Col);
    REQUIRE(oracle::same_distributions(ctx, e, full.exprs));
    fired += !full.trace.steps.empty();
  }
  CHECK(fired > 30);
}

TEST_CASE("occurrence counts follow the tree") {
  ExprContext ctx(8);
  VarId a = ctx.add_var("a", VarKind::Random);
  VarId b = ctx.add_var("b", VarKind::Random);
  Expr ab = ctx.binary(Op::And, ctx.variable(a), ctx.variable(b));
  std::vector<Expr> e = {ctx.binary(Op::Add, ab, ab), ctx.variable(a)};
  auto c = occurrence_counts(ctx, e);
  CHECK(c[a] == 3);
  CHECK(c[b] == 2);
}
