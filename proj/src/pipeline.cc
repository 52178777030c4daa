#include "maskcheck/pipeline.h"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "maskcheck/frontend.h"
#include "maskcheck/patterns.h"
#include "maskcheck/smt.h"

namespace maskcheck {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

std::vector<std::string> names_of(const Program& prog, std::span<const VarId> vars) {
  std::vector<std::string> out;
  for (VarId v : vars) out.push_back(prog.name(v));
  return out;
}

std::string join(const std::vector<std::string>& xs, const std::string& sep) {
  std::string s;
  for (size_t i = 0; i < xs.size(); ++i) s += (i ? sep : "") + xs[i];
  return s;
}

std::vector<NamedValue> named(const ExprContext& ctx, const std::vector<std::pair<VarId, Value>>& vals) {
  std::vector<NamedValue> out;
  for (auto [v, x] : vals) out.push_back({ctx.name(v), x});
  return out;
}

ProofLog proof_log(const Program& prog, const Judgement& j) {
  ProofLog log{names_of(prog, j.set), j.type, j.level, {}};
  const ExprContext& ctx = *prog.ctx;
  for (const auto& s : j.proof) {
    std::string line = s.rule + " " + ctx.name(s.var);
    if (s.rule == "Rud" || s.rule == "Sid3") line += " by " + ctx.name(s.witness);
    if (!s.rest.empty()) {
      std::vector<std::string> rest;
      for (VarId v : s.rest) rest.push_back(ctx.name(v));
      line += " on {" + join(rest, ", ") + "}";
    }
    log.steps.push_back(line);
  }
  return log;
}

class Resolver {
 public:
  Resolver(const Program& prog, const RunConfig& cfg, TypeChecker& tc, PatternStore& store, RunStats& stats)
      : prog_(prog), cfg_(cfg), tc_(tc), store_(store), stats_(stats) {}

  void resolve(SetResult& r, size_t index) {
    ExprContext& ctx = *prog_.ctx;
    std::vector<Expr> lam = tc_.lambdas(r.vars);
    Transformed t = transform(ctx, lam, TransformLevel::Col);
    std::string provenance = prog_.file + " {" + join(r.names, ",") + "}";
    DistType verdict = DistType::Unknown;
    try {
      auto found = lookup_or_insert(
          ctx, t.exprs, store_, [&](const NormalizedSet& ns) { return decide(ns.exprs, r, index); }, provenance);
      if (found.hit) {
        stats_.pattern_hits++;
        r.backend = Backend::Pattern;
      }
      verdict = found.verdict;
    } catch (const std::length_error&) {
      verdict = decide(t.exprs, r, index);
    }
    if (verdict == DistType::Unknown) {
      r.resolution = Resolution::Undecided;
      return;
    }
    if (verdict != DistType::Leaky) {
      r.resolution = Resolution::Spurious;
      return;
    }
    r.resolution = Resolution::Leaky;
    attach_witness(r);
  }

 private:
  DistType decide(const std::vector<Expr>& exprs, SetResult& r, size_t index) {
    const ExprContext& ctx = *prog_.ctx;
    try {
      CountingProblem p(ctx, exprs, CountBudget{cfg_.budget_bits});
      stats_.counting_calls++;
      CountVerdict v = parallel_decide(p, cfg_.workers);
      stats_.evaluations += v.evaluations;
      r.backend = Backend::Counting;
      return v.outcome == CountOutcome::Leaky ? DistType::Leaky : DistType::SecretIndependent;
    } catch (const BudgetExceeded& e) {
      r.note = e.what();
    }
    if (cfg_.smt_dir.empty() || cfg_.solver.empty()) return DistType::Unknown;
    std::vector<std::string> labels;
    for (size_t i = 0; i < exprs.size(); ++i) labels.push_back(i < r.names.size() ? r.names[i] : "o" + std::to_string(i));
    SmtFormula f;
    try {
      f = emit_smt(ctx, exprs, labels, SmtOptions{});
    } catch (const BudgetExceeded& e) {
      r.note += std::string("; ") + e.what();
      return DistType::Unknown;
    }
    std::filesystem::create_directories(cfg_.smt_dir);
    std::string base = (std::filesystem::path(cfg_.smt_dir) / ("set_" + std::to_string(index))).string();
    std::ofstream(base + ".smt2") << f.text;
    std::ofstream(base + ".json") << f.manifest;
    stats_.smt_calls++;
    r.backend = Backend::Smt;
    SolverAnswer a = run_solver(cfg_.solver, base + ".smt2");
    if (a == SolverAnswer::Sat) return DistType::Leaky;
    if (a == SolverAnswer::Unsat) return DistType::SecretIndependent;
    r.note += std::string("; solver answered ") + answer_name(a);
    return DistType::Unknown;
  }

  void attach_witness(SetResult& r) {
    const ExprContext& ctx = *prog_.ctx;
    std::vector<Expr> orig = prog_.computations(r.vars);
    try {
      CountingProblem p(ctx, orig, CountBudget{cfg_.budget_bits});
      CountVerdict v = parallel_decide(p, cfg_.workers);
      stats_.evaluations += v.evaluations;
      if (v.outcome != CountOutcome::Leaky || !v.witness) {
        r.resolution = Resolution::Undecided;
        r.note = "leaky after transformation but not on the original set";
        return;
      }
      const Witness& w = *v.witness;
      ReportWitness rw{named(ctx, w.publics), named(ctx, w.private_a), named(ctx, w.private_b),
                       w.tuple, w.count_a, w.count_b, verify_witness(p, w)};
      r.witness = std::move(rw);
    } catch (const BudgetExceeded& e) {
      r.note = std::string("no witness: ") + e.what();
    }
  }

  const Program& prog_;
  const RunConfig& cfg_;
  TypeChecker& tc_;
  PatternStore& store_;
  RunStats& stats_;
};

}  // namespace

void RunConfig::validate() const {
  if (order < 1) throw std::invalid_argument("order must be at least 1");
  if (width != 1 && width != 2 && width != 4 && width != 8 && width != 16) {
    throw std::invalid_argument("width must be one of 1, 2, 4, 8, 16");
  }
  if (workers < 1) throw std::invalid_argument("workers must be positive");
  if (budget_bits < 1 || budget_bits > 40) throw std::invalid_argument("budget must be between 1 and 40 bits");
  if (smt_dir.empty() != solver.empty()) {
    throw std::invalid_argument("--smt-dir and --solver must be given together");
  }
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Secure: return "secure";
    case Verdict::Leaky: return "leaky";
    case Verdict::Undecided: return "undecided";
  }
  return "?";
}

const char* resolution_name(Resolution r) {
  switch (r) {
    case Resolution::Leaky: return "leaky";
    case Resolution::Spurious: return "spurious";
    case Resolution::Undecided: return "undecided";
    case Resolution::Unresolved: return "unresolved";
  }
  return "?";
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::None: return "none";
    case Backend::Pattern: return "pattern";
    case Backend::Counting: return "counting";
    case Backend::Smt: return "smt";
  }
  return "?";
}

std::vector<const SetResult*> Report::genuine_leaks() const {
  std::vector<const SetResult*> out;
  for (const auto& s : sets) {
    if (s.resolution == Resolution::Leaky) out.push_back(&s);
  }
  return out;
}

uint64_t Report::spurious() const {
  uint64_t n = 0;
  for (const auto& s : sets) n += s.resolution == Resolution::Spurious;
  return n;
}

uint64_t Report::undecided() const {
  uint64_t n = 0;
  for (const auto& s : sets) n += s.resolution == Resolution::Undecided || s.resolution == Resolution::Unresolved;
  return n;
}

int Report::exit_code() const {
  switch (verdict) {
    case Verdict::Secure: return 0;
    case Verdict::Leaky: return 1;
    case Verdict::Undecided: return 2;
  }
  return 2;
}

Report run(const RunConfig& config, const Progress& progress) {
  config.validate();
  auto start = Clock::now();
  Program prog = load_program(config.input, config.width);
  double fe = ms_since(start);
  Report r = run(prog, config, progress);
  r.timings.frontend_ms = fe;
  r.timings.total_ms = ms_since(start);
  return r;
}

Report run(const Program& prog, const RunConfig& config, const Progress& progress) {
  config.validate();
  auto start = Clock::now();
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };
  Report rep;
  rep.config = config;
  rep.program = prog.file.empty() ? config.input : prog.file;

  TypeChecker tc(prog);
  auto t0 = Clock::now();
  ExploreResult ex = home(prog, config.order, tc);
  rep.timings.types_ms = ms_since(t0);
  rep.check_set = names_of(prog, ex.check_set);
  rep.stats.tuples = ex.stats.tuples;
  rep.stats.sets_checked = ex.stats.sets_checked;
  rep.stats.simply_dom = ex.stats.dom_sets;
  rep.stats.simply_col = ex.stats.col_sets;
  for (const auto& j : ex.proofs) rep.proofs.push_back(proof_log(prog, j));
  say("type phase: " + std::to_string(ex.stats.sets_checked) + " sets checked, " + std::to_string(ex.pls.size()) +
      " potential leaky sets");

  for (const auto& pl : ex.pls) {
    SetResult s;
    s.vars = pl.vars;
    s.names = names_of(prog, pl.vars);
    s.type = pl.type;
    rep.sets.push_back(std::move(s));
  }

  if (config.mode == Mode::Full) {
    auto t1 = Clock::now();
    PatternStore store(prog.width());
    if (!config.patterns.empty() && std::filesystem::exists(config.patterns)) store.load(config.patterns);
    Resolver res(prog, config, tc, store, rep.stats);
    for (size_t i = 0; i < rep.sets.size(); ++i) {
      res.resolve(rep.sets[i], i);
      say("resolved " + std::to_string(i + 1) + "/" + std::to_string(rep.sets.size()) + " {" +
          join(rep.sets[i].names, ", ") + "}: " + resolution_name(rep.sets[i].resolution));
    }
    if (!config.patterns.empty()) store.save(config.patterns);
    for (const auto& e : store.entries()) rep.patterns.push_back({pattern_to_string(e.pattern), e.verdict, e.members});
    rep.timings.resolve_ms = ms_since(t1);
  }

  if (!rep.genuine_leaks().empty()) {
    rep.verdict = Verdict::Leaky;
  } else if (rep.undecided() > 0) {
    rep.verdict = Verdict::Undecided;
  } else {
    rep.verdict = Verdict::Secure;
  }
  rep.timings.total_ms = ms_since(start);
  return rep;
}

namespace {

nlohmann::ordered_json values_json(const std::vector<NamedValue>& vals) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& v : vals) j[v.name] = v.value;
  return j;
}

nlohmann::ordered_json set_json(const SetResult& s) {
  nlohmann::ordered_json j;
  j["variables"] = s.names;
  j["type"] = type_name(s.type);
  j["resolution"] = resolution_name(s.resolution);
  j["backend"] = backend_name(s.backend);
  if (s.witness) {
    const auto& w = *s.witness;
    nlohmann::ordered_json wj;
    wj["publics"] = values_json(w.publics);
    wj["private_a"] = values_json(w.private_a);
    wj["private_b"] = values_json(w.private_b);
    wj["tuple"] = w.tuple;
    wj["count_a"] = w.count_a;
    wj["count_b"] = w.count_b;
    wj["verified"] = w.verified;
    j["witness"] = wj;
  } else {
    j["witness"] = nullptr;
  }
  if (!s.note.empty()) j["note"] = s.note;
  return j;
}

std::string values_text(const std::vector<NamedValue>& vals) {
  std::vector<std::string> xs;
  for (const auto& v : vals) xs.push_back(v.name + "=" + std::to_string(v.value));
  return join(xs, " ");
}

}  // namespace

std::string emit_report(const Report& r, Format format) {
  if (format == Format::Json) {
    nlohmann::ordered_json j;
    j["schema"] = "maskcheck-report/1";
    j["program"] = r.program;
    j["order"] = r.config.order;
    j["width"] = r.config.width;
    j["mode"] = r.config.mode == Mode::Full ? "full" : "types";
    j["workers"] = r.config.workers;
    j["verdict"] = verdict_name(r.verdict);
    auto leaks = nlohmann::ordered_json::array();
    for (const auto* s : r.genuine_leaks()) leaks.push_back(set_json(*s));
    j["genuine_leaks"] = leaks;
    j["spurious"] = r.spurious();
    j["undecided"] = r.undecided();
    auto pls = nlohmann::ordered_json::array();
    for (const auto& s : r.sets) pls.push_back(set_json(s));
    j["potential_leaks"] = pls;
    j["check_set"] = r.check_set;
    nlohmann::ordered_json st;
    st["tuples"] = r.stats.tuples;
    st["sets_checked"] = r.stats.sets_checked;
    st["simply_dom"] = r.stats.simply_dom;
    st["simply_col"] = r.stats.simply_col;
    st["pattern_hits"] = r.stats.pattern_hits;
    st["counting_calls"] = r.stats.counting_calls;
    st["smt_calls"] = r.stats.smt_calls;
    st["evaluations"] = r.stats.evaluations;
    j["stats"] = st;
    auto pats = nlohmann::ordered_json::array();
    for (const auto& p : r.patterns) {
      pats.push_back({{"pattern", p.pattern}, {"verdict", type_name(p.verdict)}, {"members", p.members}});
    }
    j["patterns"] = pats;
    auto proofs = nlohmann::ordered_json::array();
    for (const auto& p : r.proofs) {
      proofs.push_back(
          {{"set", p.set}, {"type", type_name(p.type)}, {"level", level_name(p.level)}, {"steps", p.steps}});
    }
    j["proofs"] = proofs;
    j["timings_ms"] = {{"frontend", r.timings.frontend_ms},
                       {"types", r.timings.types_ms},
                       {"resolve", r.timings.resolve_ms},
                       {"total", r.timings.total_ms}};
    return j.dump(2) + "\n";
  }

  std::ostringstream o;
  o << "program: " << r.program << "\n";
  o << "order " << r.config.order << ", width " << r.config.width << ", mode "
    << (r.config.mode == Mode::Full ? "full" : "types") << "\n";
  o << "verdict: " << verdict_name(r.verdict) << "\n";
  o << "check set (" << r.check_set.size() << "): " << join(r.check_set, ", ") << "\n";
  o << "potential leaky sets: " << r.sets.size() << "\n";
  for (const auto& s : r.sets) {
    o << "  {" << join(s.names, ", ") << "} " << resolution_name(s.resolution);
    if (s.backend != Backend::None) o << " [" << backend_name(s.backend) << "]";
    o << "\n";
    if (s.witness) {
      const auto& w = *s.witness;
      std::vector<std::string> tuple;
      for (Value v : w.tuple) tuple.push_back(std::to_string(v));
      o << "    witness: ";
      if (!w.publics.empty()) o << values_text(w.publics) << "; ";
      o << values_text(w.private_a) << " vs " << values_text(w.private_b) << "; tuple (" << join(tuple, ", ")
        << ") occurs " << w.count_a << " vs " << w.count_b << " times"
        << (w.verified ? "" : " (unverified)") << "\n";
    }
    if (!s.note.empty()) o << "    note: " << s.note << "\n";
  }
  o << "genuine leaks: " << r.genuine_leaks().size() << ", spurious: " << r.spurious()
    << ", undecided: " << r.undecided() << "\n";
  o << "stats: tuples " << r.stats.tuples << ", sets checked " << r.stats.sets_checked << ", simply_dom "
    << r.stats.simply_dom << ", simply_col " << r.stats.simply_col << ", pattern hits " << r.stats.pattern_hits
    << ", counting calls " << r.stats.counting_calls << ", smt calls " << r.stats.smt_calls << "\n";
  if (!r.patterns.empty()) {
    o << "patterns: " << r.patterns.size() << "\n";
    for (const auto& p : r.patterns) {
      o << "  " << p.pattern << " " << type_name(p.verdict) << " x" << p.members << "\n";
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "timings: frontend %.1f ms, types %.1f ms, resolve %.1f ms, total %.1f ms\n",
                r.timings.frontend_ms, r.timings.types_ms, r.timings.resolve_ms, r.timings.total_ms);
  o << buf;
  return o.str();
}

}  // namespace maskcheck
