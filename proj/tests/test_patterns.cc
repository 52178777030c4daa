#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "corpus.h"
#include "maskcheck/counting.h"
#include "maskcheck/patterns.h"
#include "maskcheck/transforms.h"
#include "oracle.h"

using namespace maskcheck;

namespace {

struct Fixture {
  ExprContext ctx{8};
  uint32_t sbox = ctx.add_table(Table{"S", "aes", aes_sbox()});
  Expr var(const char* n, VarKind k) { return ctx.variable(ctx.add_var(n, k)); }
  Expr x(Expr a, Expr b) { return ctx.binary(Op::Xor, a, b); }
  Expr c(Value v) { return ctx.constant(v); }
  Expr S(Expr a) { return ctx.lookup(sbox, a); }
};

// Copy of e over renamed variables, operands of commutative nodes shuffled.
Expr rename(ExprContext& ctx, Expr e, const std::map<VarId, VarId>& m, std::mt19937_64& rng) {
  const Node& n = ctx.node(e);
  switch (n.op) {
    case Op::Const: return e;
    case Op::Var: return ctx.variable(m.at(static_cast<VarId>(n.value)));
    default: break;
  }
  Expr a = rename(ctx, Expr{n.a}, m, rng);
  if (!is_binary(n.op)) return ctx.rebuild(n, a, a);
  Expr b = rename(ctx, Expr{n.b}, m, rng);
  if (is_commutative(n.op) && (rng() & 1)) std::swap(a, b);
  return ctx.rebuild(n, a, b);
}

std::vector<Expr> renamed_copy(ExprContext& ctx, std::span<const Expr> exprs, std::mt19937_64& rng) {
  VarSet vars;
  for (Expr e : exprs) vars = set_union(vars, ctx.vars(e));
  std::map<VarId, VarId> m;
  for (VarId v : vars) m[v] = ctx.add_var(ctx.name(v) + "_copy" + std::to_string(ctx.num_vars()), ctx.kind(v));
  std::vector<Expr> out;
  for (Expr e : exprs) out.push_back(rename(ctx, e, m, rng));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "assimilation folds constants into anchors") {
  Expr xv = var("x", VarKind::Random), yv = var("y", VarKind::Random);
  Expr e = ctx.binary(Op::Add, ctx.binary(Op::Add, x(xv, c(1)), x(xv, c(2))), x(yv, c(1)));
  std::vector<Expr> set = {e};
  NormalizedSet ns = normalize(ctx, set);
  REQUIRE(ns.assimilated.size() == 2);
  CHECK(ns.assimilated[0].constant == 2);
  CHECK(ns.assimilated[0].anchor == ctx.node(xv).value);
  CHECK(ns.assimilated[1].constant == 1);
  CHECK(ns.assimilated[1].anchor == ctx.node(yv).value);
  CHECK(ctx.name(ns.assimilated[0].fresh).rfind("x#", 0) == 0);
  CHECK(ctx.kind(ns.assimilated[0].fresh) == VarKind::Random);

  Expr xp = var("xp", VarKind::Random), yp = var("yp", VarKind::Random);
  std::vector<Expr> want = {ctx.binary(Op::Add, ctx.binary(Op::Add, x(xp, c(3)), xp), yp)};
  CHECK(match(ns.pattern, make_pattern(ctx, want)));
  CHECK(normalize(ctx, want).assimilated.empty());
}

TEST_CASE_FIXTURE(Fixture, "faulty sbox sets normalize to a common form") {
  Expr x0 = var("x0", VarKind::Random), k = var("k", VarKind::Private), r = var("r", VarKind::Random);
  std::vector<Expr> e12 = {x0, x(S(x(x(k, c(2)), x0)), r), x(S(x(x(k, c(1)), x0)), r)};
  NormalizedSet ns = normalize(ctx, e12);
  CHECK(ns.assimilated.size() == 1);
  Expr kp = var("k'", VarKind::Private);
  std::vector<Expr> want = {x0, x(S(x(kp, x0)), r), x(S(x(x(kp, c(3)), x0)), r)};
  CHECK(match(ns.pattern, make_pattern(ctx, want)));

  std::vector<Expr> e47 = {x0, x(S(x(x(k, c(4)), x0)), r), x(S(x(x(k, c(7)), x0)), r)};
  CHECK(match(normalize(ctx, e47).pattern, ns.pattern));
  std::vector<Expr> e15 = {x0, x(S(x(x(k, c(1)), x0)), r), x(S(x(x(k, c(5)), x0)), r)};
  CHECK_FALSE(match(normalize(ctx, e15).pattern, ns.pattern));
}

TEST_CASE_FIXTURE(Fixture, "constant-free sets are unchanged") {
  Expr k = var("k", VarKind::Private), r = var("r", VarKind::Random);
  std::vector<Expr> e = {x(k, r), ctx.binary(Op::And, k, r)};
  NormalizedSet ns = normalize(ctx, e);
  CHECK(ns.exprs == e);
  CHECK(ns.assimilated.empty());
}

TEST_CASE_FIXTURE(Fixture, "matching respects kinds and operators") {
  Expr r = var("r", VarKind::Random), r2 = var("r2", VarKind::Random), k = var("k", VarKind::Private);
  std::vector<Expr> a = {r, x(k, r)}, b = {r2, x(r2, k)};
  auto h = match(make_pattern(ctx, a), make_pattern(ctx, b));
  REQUIRE(h);
  Pattern pa = make_pattern(ctx, a), pb = make_pattern(ctx, b);
  for (uint32_t i = 0; i < h->size(); ++i) CHECK(pa.kinds[i] == pb.kinds[(*h)[i]]);
  CHECK(pa.names[0] == "r");
  CHECK(pb.names[(*h)[0]] == "r2");

  std::vector<Expr> land = {ctx.binary(Op::And, r, k)}, lx = {x(r, k)};
  CHECK_FALSE(match(make_pattern(ctx, land), make_pattern(ctx, lx)));
  std::vector<Expr> rr = {x(r, r2)}, rk = {x(r, k)};
  CHECK_FALSE(match(make_pattern(ctx, rr), make_pattern(ctx, rk)));
  std::vector<Expr> sub1 = {ctx.binary(Op::Sub, r, k)}, sub2 = {ctx.binary(Op::Sub, k, r)};
  CHECK_FALSE(match(make_pattern(ctx, sub1), make_pattern(ctx, sub2)));
  std::vector<Expr> c1 = {x(r, c(1))}, c2 = {x(r, c(2))};
  CHECK_FALSE(match(make_pattern(ctx, c1), make_pattern(ctx, c2)));
}

TEST_CASE("renamed copies match with equal fingerprints") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 300; ++i) {
    ExprContext ctx(2);
    ctx.add_table(Table{"P", "gen", {2, 0, 3, 1}});
    std::vector<VarId> in = {ctx.add_var("p", VarKind::Public), ctx.add_var("k", VarKind::Private)};
    std::vector<VarId> rs = {ctx.add_var("r1", VarKind::Random), ctx.add_var("r2", VarKind::Random)};
    auto e = oracle::random_set(ctx, rng, in, rs, 1 + rng() % 3);
    auto copy = renamed_copy(ctx, e, rng);
    Pattern a = make_pattern(ctx, e), b = make_pattern(ctx, copy);
    CAPTURE(serialize(a));
    CAPTURE(serialize(b));
    REQUIRE(match(a, b));
    REQUIRE(fingerprint(a) == fingerprint(b));
    REQUIRE(deserialize(serialize(a)) == a);
    Pattern other = make_pattern(ctx, oracle::random_set(ctx, rng, in, rs, e.size()));
    if (match(a, other)) REQUIRE(fingerprint(a) == fingerprint(other));
  }
}

TEST_CASE("matching sets have equal verdicts") {
  struct Item {
    std::shared_ptr<Program> prog;
    std::vector<VarId> set;
    Pattern pattern;
  };
  std::map<std::string, std::vector<Item>> buckets;
  int pairs = 0;
  for (int w : {1, 2}) {
    buckets.clear();
    for (const auto& src : corpus::small_programs()) {
      if (src.name == "table" && w != 2) continue;
      auto prog = std::make_shared<Program>(corpus::load(src, w));
      for (const auto& set : corpus::subsets(prog->check_set(), 2)) {
        auto t = transform(*prog->ctx, prog->computations(set), TransformLevel::Col);
        NormalizedSet ns = normalize(*prog->ctx, t.exprs);
        buckets[fingerprint(ns.pattern)].push_back({prog, set, ns.pattern});
      }
    }
    for (const auto& [fp, items] : buckets) {
      for (size_t i = 0; i < items.size(); ++i) {
        for (size_t j = i + 1; j < items.size(); ++j) {
          if (!match(items[i].pattern, items[j].pattern)) continue;
          ++pairs;
          auto vi = bf_decide(CountingProblem(*items[i].prog->ctx, items[i].prog->computations(items[i].set)));
          auto vj = bf_decide(CountingProblem(*items[j].prog->ctx, items[j].prog->computations(items[j].set)));
          REQUIRE(vi.outcome == vj.outcome);
        }
      }
    }
  }
  CHECK(pairs > 100);
}

TEST_CASE("normalization preserves verdicts") {
  std::mt19937_64 rng(21);
  int assimilated = 0;
  for (int i = 0; i < 300; ++i) {
    ExprContext ctx(1 + i % 2);
    std::vector<VarId> in = {ctx.add_var("k", VarKind::Private)};
    std::vector<VarId> rs = {ctx.add_var("r1", VarKind::Random), ctx.add_var("r2", VarKind::Random)};
    std::vector<VarId> all = {in[0], rs[0], rs[1]};
    std::vector<Expr> e;
    for (size_t n = 1 + rng() % 3; n > 0; --n) {
      Expr base = ctx.variable(all[rng() % 3]);
      Expr cst = ctx.constant(static_cast<Value>(rng() % ctx.field().size()));
      Op op = std::array<Op, 3>{Op::Xor, Op::Add, Op::Sub}[rng() % 3];
      Expr t = ctx.binary(op, base, cst);
      if (rng() & 1) t = ctx.binary(Op::And, t, oracle::random_expr(ctx, rng, all, 1, false));
      e.push_back(t);
    }
    NormalizedSet ns = normalize(ctx, e);
    assimilated += !ns.assimilated.empty();
    REQUIRE(oracle::leaky(ctx, e) == oracle::leaky(ctx, ns.exprs));
  }
  CHECK(assimilated > 50);
}

TEST_CASE_FIXTURE(Fixture, "store lookups and inserts") {
  PatternStore store(8);
  std::mt19937_64 rng(1);
  Expr k = var("k", VarKind::Private), r = var("r", VarKind::Random);
  std::vector<Expr> e = {x(S(k), r), x(k, r)};
  int calls = 0;
  auto decide = [&](const NormalizedSet&) {
    ++calls;
    return DistType::Leaky;
  };
  auto first = lookup_or_insert(ctx, e, store, decide, "first");
  CHECK_FALSE(first.hit);
  auto copy = renamed_copy(ctx, e, rng);
  auto second = lookup_or_insert(ctx, copy, store, decide, "second");
  CHECK(second.hit);
  CHECK(second.verdict == DistType::Leaky);
  CHECK(second.entry == first.entry);
  CHECK(calls == 1);
  CHECK(store.size() == 1);
  CHECK(store.entries()[0].members == 2);

  auto unknown = lookup_or_insert(ctx, std::vector<Expr>{ctx.binary(Op::And, k, r)}, store,
                                  [](const NormalizedSet&) { return DistType::Unknown; }, "u");
  CHECK(unknown.entry == SIZE_MAX);
  CHECK(store.size() == 1);

  PatternStore other(4);
  CHECK_THROWS_AS(other.insert(make_pattern(ctx, e), DistType::Leaky, ""), std::invalid_argument);
}

TEST_CASE_FIXTURE(Fixture, "store round trip") {
  PatternStore store(8);
  std::mt19937_64 rng(2);
  std::vector<VarId> in = {ctx.add_var("p", VarKind::Public), ctx.add_var("k", VarKind::Private)};
  std::vector<VarId> rs = {ctx.add_var("r1", VarKind::Random), ctx.add_var("r2", VarKind::Random)};
  for (int i = 0; i < 60; ++i) {
    auto e = oracle::random_set(ctx, rng, in, rs, 1 + rng() % 3);
    store.insert(make_pattern(ctx, e), static_cast<DistType>(rng() % 4), "set\t" + std::to_string(i));
  }
  std::string path = (std::filesystem::temp_directory_path() / "maskcheck_store_test.txt").string();
  store.save(path);
  PatternStore back(8);
  back.load(path);
  auto a = store.entries(), b = back.entries();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pattern == b[i].pattern);
    CHECK(a[i].pattern.names == b[i].pattern.names);
    CHECK(a[i].verdict == b[i].verdict);
    CHECK(a[i].fingerprint == b[i].fingerprint);
    CHECK(a[i].provenance == b[i].provenance);
    CHECK(a[i].members == b[i].members);
  }
  PatternStore wrong(4);
  CHECK_THROWS(wrong.load(path));
  std::filesystem::remove(path);
}

TEST_CASE_FIXTURE(Fixture, "family instances converge per parameter") {
  PatternStore store(8);
  std::mt19937_64 rng(4);
  int calls = 0;
  auto decide = [&](const NormalizedSet&) {
    ++calls;
    return DistType::Leaky;
  };
  auto sets = corpus::sbox_families(ctx, sbox, rng, 2);
  std::map<std::pair<int, int>, std::set<size_t>> entries;
  for (const auto& s : sets) {
    if (s.param > 8) continue;
    auto res = lookup_or_insert(ctx, s.exprs, store, decide, "family");
    entries[{s.family, s.param}].insert(res.entry);
  }
  for (const auto& [key, idx] : entries) CHECK(idx.size() == 1);
  std::set<size_t> all;
  for (const auto& [key, idx] : entries) all.insert(idx.begin(), idx.end());
  CHECK(all.size() == entries.size());
  CHECK(calls == static_cast<int>(entries.size()));
}

TEST_CASE_FIXTURE(Fixture, "concurrent lookups") {
  PatternStore store(8);
  Expr k = var("k", VarKind::Private), r = var("r", VarKind::Random);
  std::vector<Expr> e = {x(S(k), r)};
  Pattern p = make_pattern(ctx, e);
  store.insert(p, DistType::SecretIndependent, "");
  int hits = 0;
#pragma omp parallel for num_threads(4) reduction(+ : hits)
  for (int i = 0; i < 200; ++i) hits += store.lookup(p).has_value();
  CHECK(hits == 200);
  CHECK(store.entries()[0].members == 201);
}
