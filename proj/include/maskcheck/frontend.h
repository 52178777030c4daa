#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "maskcheck/program.h"

namespace maskcheck {

class FrontendError : public std::runtime_error {
 public:
  FrontendError(const SourceLoc& loc, const std::string& msg);
  const SourceLoc& loc() const { return loc_; }
  const std::string& message() const { return msg_; }

 private:
  SourceLoc loc_;
  std::string msg_;
};

struct SrcExpr {
  enum Kind { Number, Name, Unary, Binary, Call } kind = Number;
  uint64_t number = 0;
  std::string name;                     // Name, Call
  std::unique_ptr<SrcExpr> index;       // Name[index]
  Op op = Op::Const;                    // Unary, Binary
  std::vector<std::unique_ptr<SrcExpr>> args;  // operands or call arguments
  SourceLoc loc;
};

struct SrcStmt {
  enum Kind { Assign, For, Return, Preshare } kind = Assign;
  std::string target;
  std::unique_ptr<SrcExpr> target_index;
  std::unique_ptr<SrcExpr> value;            // Assign
  std::unique_ptr<SrcExpr> lo, hi;           // For
  std::vector<std::unique_ptr<SrcExpr>> results;  // Return
  std::vector<SrcStmt> body;                 // For, Preshare
  SourceLoc loc;
};

struct SrcDecl {
  std::string name;
  VarKind kind;
  bool is_range = false;
  int64_t lo = 0, hi = 0;  // inclusive range for name[lo..hi]
  SourceLoc loc;
};

struct SrcTable {
  std::string name;
  std::string source;  // "aes" or a path
  bool builtin = false;
  SourceLoc loc;
};

struct SrcProc {
  std::string name;
  std::vector<std::string> params;
  std::vector<SrcStmt> body;
  std::unique_ptr<SrcExpr> result;
  SourceLoc loc;
};

struct SourceProgram {
  std::string file;
  std::vector<SrcDecl> decls;
  std::vector<SrcTable> tables;
  std::vector<SrcProc> procs;
  std::vector<SrcStmt> body;
};

SourceProgram parse(const std::string& text, const std::string& file = "<input>");
SourceProgram parse_file(const std::string& path);

struct ElaborateOptions {
  int64_t unroll_limit = 4096;
  std::string base_dir;  // table files are resolved against this
};

Program elaborate(const SourceProgram& src, int width, const ElaborateOptions& opts = {});
Program load_program(const std::string& path, int width, const ElaborateOptions& opts = {});

// Source text that parses and elaborates back to the same program.
std::string print_program(const Program& prog);

}  // namespace maskcheck
