#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "maskcheck/counting.h"
#include "maskcheck/explore.h"

namespace maskcheck {

enum class Mode { Types, Full };
enum class Format { Text, Json };

struct RunConfig {
  std::string input;
  int order = 1;
  int width = 8;
  Mode mode = Mode::Full;
  int workers = 1;
  int budget_bits = 32;
  std::string smt_dir;  // empty: no SMT escalation
  std::string solver;
  std::string patterns;  // pattern store file, loaded if present and saved after the run
  Format format = Format::Text;

  // Throws std::invalid_argument on a bad configuration.
  void validate() const;
};

enum class Verdict { Secure, Leaky, Undecided };
enum class Resolution { Leaky, Spurious, Undecided, Unresolved };
enum class Backend { None, Pattern, Counting, Smt };

const char* verdict_name(Verdict v);
const char* resolution_name(Resolution r);
const char* backend_name(Backend b);

struct NamedValue {
  std::string name;
  Value value = 0;
};

struct ReportWitness {
  std::vector<NamedValue> publics;
  std::vector<NamedValue> private_a;
  std::vector<NamedValue> private_b;
  std::vector<Value> tuple;
  uint64_t count_a = 0;
  uint64_t count_b = 0;
  bool verified = false;
};

struct SetResult {
  std::vector<VarId> vars;
  std::vector<std::string> names;
  DistType type = DistType::Unknown;  // type phase outcome
  Resolution resolution = Resolution::Unresolved;
  Backend backend = Backend::None;
  std::optional<ReportWitness> witness;
  std::string note;
};

struct RunStats {
  uint64_t tuples = 0;
  uint64_t sets_checked = 0;
  uint64_t simply_dom = 0;
  uint64_t simply_col = 0;
  uint64_t pattern_hits = 0;
  uint64_t counting_calls = 0;
  uint64_t smt_calls = 0;
  uint64_t evaluations = 0;
};

struct Timings {
  double frontend_ms = 0;
  double types_ms = 0;
  double resolve_ms = 0;
  double total_ms = 0;
};

struct PatternSummary {
  std::string pattern;
  DistType verdict = DistType::Unknown;
  uint64_t members = 0;
};

struct ProofLog {
  std::vector<std::string> set;
  DistType type = DistType::Unknown;
  TransformLevel level = TransformLevel::Plain;
  std::vector<std::string> steps;
};

struct Report {
  RunConfig config;
  std::string program;
  Verdict verdict = Verdict::Undecided;
  std::vector<std::string> check_set;
  std::vector<SetResult> sets;  // one per potential leaky set
  RunStats stats;
  Timings timings;
  std::vector<PatternSummary> patterns;
  std::vector<ProofLog> proofs;

  std::vector<const SetResult*> genuine_leaks() const;
  uint64_t spurious() const;
  uint64_t undecided() const;
  int exit_code() const;
};

using Progress = std::function<void(const std::string&)>;

Report run(const RunConfig& config, const Progress& progress = {});
// Runs on an already elaborated program; config.input is used for display only.
Report run(const Program& prog, const RunConfig& config, const Progress& progress = {});

std::string emit_report(const Report& report, Format format);

}  // namespace maskcheck
