#include <doctest.h>

#include <filesystem>
#include <nlohmann/json.hpp>
#include <set>

#include "corpus.h"
#include "maskcheck/pipeline.h"
#include "oracle.h"

using namespace maskcheck;

namespace {

const std::string kZ3 = MASKCHECK_Z3;

RunConfig goubin_config(int order, int width) {
  RunConfig c;
  c.input = corpus::source_dir() + "/corpus/goubin.mask";
  c.order = order;
  c.width = width;
  return c;
}

std::set<std::vector<std::string>> leak_names(const Report& r) {
  std::set<std::vector<std::string>> out;
  for (const auto* s : r.genuine_leaks()) {
    auto n = s->names;
    std::sort(n.begin(), n.end());
    out.insert(n);
  }
  return out;
}

}  // namespace

TEST_CASE("first order motivating example is secure") {
  Report r = run(goubin_config(1, 8));
  CHECK(r.verdict == Verdict::Secure);
  REQUIRE(r.sets.size() == 1);
  CHECK(r.sets[0].names == std::vector<std::string>{"A"});
  CHECK(r.sets[0].resolution == Resolution::Spurious);
  CHECK(r.spurious() == 1);
  CHECK(r.genuine_leaks().empty());
  CHECK(r.exit_code() == 0);
  std::string json = emit_report(r, Format::Json);
  auto j = nlohmann::json::parse(json);
  CHECK(j["schema"] == "maskcheck-report/1");
  CHECK(j["verdict"] == "secure");
  CHECK(j["genuine_leaks"].empty());
  CHECK(j["stats"]["counting_calls"] == 1);
  for (const char* key : {"tuples", "sets_checked", "simply_dom", "simply_col", "pattern_hits", "counting_calls"}) {
    CHECK(j["stats"].contains(key));
  }
  CHECK(emit_report(r, Format::Text).find("verdict: secure") != std::string::npos);
}

TEST_CASE("second order motivating example leaks") {
  RunConfig c = goubin_config(2, 8);
  c.workers = 2;
  Report r = run(c);
  CHECK(r.verdict == Verdict::Leaky);
  CHECK(r.exit_code() == 1);
  CHECK(leak_names(r).count({"y0", "y3"}));
  for (const auto* s : r.genuine_leaks()) {
    REQUIRE(s->witness);
    CHECK(s->witness->verified);
    CHECK(s->witness->count_a != s->witness->count_b);
  }
  auto j = nlohmann::json::parse(emit_report(r, Format::Json));
  for (const auto& leak : j["genuine_leaks"]) {
    CHECK(leak.contains("variables"));
    CHECK(leak.contains("witness"));
    CHECK(leak["backend"].is_string());
  }
}

TEST_CASE("types mode stops after the type phase") {
  RunConfig c = goubin_config(1, 8);
  c.mode = Mode::Types;
  Report r = run(c);
  CHECK(r.exit_code() == 2);
  REQUIRE(r.sets.size() == 1);
  CHECK(r.sets[0].resolution == Resolution::Unresolved);
  CHECK(r.stats.counting_calls == 0);
  CHECK(emit_report(r, Format::Text).find("{A}") != std::string::npos);
}

TEST_CASE("configuration validation") {
  RunConfig c = goubin_config(0, 8);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = goubin_config(1, 3);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = goubin_config(1, 8);
  c.workers = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = goubin_config(1, 8);
  c.smt_dir = "/tmp/x";
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = goubin_config(1, 8);
  c.input = "/nonexistent/file.mask";
  CHECK_THROWS(run(c));
}

TEST_CASE("reports are deterministic modulo timings") {
  auto strip = [](const Report& r) {
    auto j = nlohmann::json::parse(emit_report(r, Format::Json));
    j.erase("timings_ms");
    return j.dump();
  };
  CHECK(strip(run(goubin_config(2, 4))) == strip(run(goubin_config(2, 4))));
}

TEST_CASE("genuine leaks equal the exhaustive oracle on the corpus") {
  for (const auto& src : corpus::small_programs()) {
    for (int w : {1, 2}) {
      if (src.name == "table" && w != 2) continue;
      Program p = corpus::load(src, w);
      auto xs = p.check_set();
      if (xs.size() > 10) continue;
      for (int d : {1, 2}) {
        RunConfig c;
        c.order = d;
        c.width = w;
        Report full = run(p, c);
        c.mode = Mode::Types;
        Report types = run(p, c);
        std::set<std::vector<VarId>> got, want, pls;
        for (const auto* s : full.genuine_leaks()) got.insert(s->vars);
        for (const auto& s : types.sets) pls.insert(s.vars);
        for (const auto& o : corpus::subsets(xs, d)) {
          if (static_cast<int>(o.size()) != std::min<int>(d, static_cast<int>(xs.size()))) continue;
          if (oracle::leaky(*p.ctx, p.computations(o))) want.insert(o);
        }
        CAPTURE(src.name);
        CAPTURE(w);
        CAPTURE(d);
        CHECK(got == want);
        for (const auto& g : got) CHECK(pls.count(g));
        CHECK(full.verdict == (want.empty() ? Verdict::Secure : Verdict::Leaky));
      }
    }
  }
}

TEST_CASE("pattern store persists across runs") {
  std::string path = (std::filesystem::temp_directory_path() / "maskcheck_pipeline_patterns.txt").string();
  std::filesystem::remove(path);
  RunConfig c = goubin_config(2, 2);
  c.patterns = path;
  Report first = run(c);
  Report second = run(c);
  CHECK(first.stats.counting_calls > 0);
  CHECK(second.stats.counting_calls == 0);
  CHECK(second.stats.pattern_hits == second.sets.size());
  CHECK(leak_names(first) == leak_names(second));
  std::filesystem::remove(path);
}

TEST_CASE("budget exhaustion escalates or stays undecided") {
  RunConfig c = goubin_config(2, 1);
  c.budget_bits = 2;
  Report r = run(c);
  CHECK(r.undecided() > 0);
  for (const auto& s : r.sets) {
    if (s.resolution == Resolution::Undecided) CHECK_FALSE(s.note.empty());
  }
  if (kZ3.empty()) return;
  Report ref = run(goubin_config(2, 1));
  c.smt_dir = (std::filesystem::temp_directory_path() / "maskcheck_smt_sets").string();
  c.solver = kZ3;
  Report smt = run(c);
  CHECK(smt.stats.smt_calls > 0);
  CHECK(smt.undecided() == 0);
  CHECK(leak_names(smt) == leak_names(ref));
  std::filesystem::remove_all(c.smt_dir);
}
