#include "maskcheck/frontend.h"

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace maskcheck {

FrontendError::FrontendError(const SourceLoc& loc, const std::string& msg)
    : std::runtime_error(loc.file + ":" + std::to_string(loc.line) + ":" + std::to_string(loc.col) +
                         ": error: " + msg),
      loc_(loc),
      msg_(msg) {}

namespace {

// ---------------------------------------------------------------- lexer

struct Token {
  enum Type { Ident, Number, String, Pragma, Punct, End } type = End;
  std::string text;
  uint64_t number = 0;
  SourceLoc loc;
};

struct Utf8Alias {
  const char* utf8;
  const char* ascii;
};

constexpr Utf8Alias kAliases[] = {
    {"\xE2\x8A\x95", "^"},  {"\xE2\x88\xA7", "&"},  {"\xE2\x88\xA8", "|"},
    {"\xE2\x8A\x99", "@"},  {"\xC2\xAC", "~"},      {"\xE2\x89\xAA", "<<"},
    {"\xE2\x89\xAB", ">>"}, {"\xE2\x88\x92", "-"},  {"\xC3\x97", "*"},
    {"\xE2\x86\x90", "="},
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '$';
}

std::vector<Token> lex(const std::string& text, const std::string& file) {
  std::vector<Token> out;
  size_t i = 0;
  int line = 1, col = 1;
  auto loc = [&] { return SourceLoc{file, line, col}; };
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n && i < text.size(); ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
        ++col;
      }
    }
  };

  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (text.compare(i, 2, "//") == 0) {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (text.compare(i, 2, "/*") == 0) {
      SourceLoc start = loc();
      size_t end = text.find("*/", i + 2);
      if (end == std::string::npos) throw FrontendError(start, "unterminated comment");
      advance(end + 2 - i);
      continue;
    }
    Token t;
    t.loc = loc();
    if (ident_start(c)) {
      size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      t.type = Token::Ident;
      t.text = text.substr(i, j - i);
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      int base = 10;
      if (text.compare(i, 2, "0x") == 0 || text.compare(i, 2, "0X") == 0) base = 16, j += 2;
      else if (text.compare(i, 2, "0b") == 0 || text.compare(i, 2, "0B") == 0) base = 2, j += 2;
      size_t digits = j;
      while (j < text.size() && std::isxdigit(static_cast<unsigned char>(text[j]))) ++j;
      std::string body = text.substr(digits, j - digits);
      if (body.empty()) throw FrontendError(t.loc, "malformed number");
      try {
        size_t used = 0;
        t.number = std::stoull(body, &used, base);
        if (used != body.size()) throw std::invalid_argument("digits");
      } catch (const std::exception&) {
        throw FrontendError(t.loc, "malformed number '" + text.substr(i, j - i) + "'");
      }
      if (j < text.size() && ident_start(text[j])) {
        throw FrontendError(t.loc, "malformed number");
      }
      t.type = Token::Number;
      t.text = text.substr(i, j - i);
      advance(j - i);
    } else if (c == '"') {
      size_t end = text.find('"', i + 1);
      if (end == std::string::npos || text.find('\n', i) < end) {
        throw FrontendError(t.loc, "unterminated string");
      }
      t.type = Token::String;
      t.text = text.substr(i + 1, end - i - 1);
      advance(end + 1 - i);
    } else if (c == '#') {
      size_t j = i + 1;
      while (j < text.size() && ident_char(text[j])) ++j;
      t.type = Token::Pragma;
      t.text = text.substr(i + 1, j - i - 1);
      static const std::unordered_set<std::string> kPragmas = {"public", "private", "random",
                                                               "table", "preshare"};
      if (!kPragmas.count(t.text)) throw FrontendError(t.loc, "unknown pragma '#" + t.text + "'");
      advance(j - i);
    } else {
      t.type = Token::Punct;
      bool matched = false;
      if (static_cast<unsigned char>(c) >= 0x80) {
        for (const auto& a : kAliases) {
          size_t n = std::char_traits<char>::length(a.utf8);
          if (text.compare(i, n, a.utf8) == 0) {
            t.text = a.ascii;
            advance(n);
            matched = true;
            break;
          }
        }
        if (!matched) throw FrontendError(t.loc, "unknown operator or character");
      } else {
        static const char* kBad[] = {"&&", "||", "==", "!=", "<=", ">=", "**"};
        for (const char* b : kBad) {
          if (text.compare(i, 2, b) == 0) throw FrontendError(t.loc, std::string("unknown operator '") + b + "'");
        }
        static const char* kTwo[] = {"<<", ">>", ".."};
        for (const char* p : kTwo) {
          if (text.compare(i, 2, p) == 0) {
            t.text = p;
            advance(2);
            matched = true;
            break;
          }
        }
        if (!matched) {
          static const std::string kOne = "(){}[],;=^&|@+-*~";
          if (kOne.find(c) == std::string::npos) {
            throw FrontendError(t.loc, std::string("unknown operator '") + c + "'");
          }
          t.text = std::string(1, c);
          advance(1);
        }
      }
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.type = Token::End;
  end.loc = loc();
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------- parser

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::string file) : toks_(std::move(tokens)) {
    prog_.file = std::move(file);
  }

  SourceProgram run() {
    bool returned = false;
    while (!at_end()) {
      if (returned) throw FrontendError(peek().loc, "statements after the final return");
      const Token& t = peek();
      if (t.type == Token::Pragma) {
        pragma();
      } else if (is_ident("proc")) {
        proc();
      } else {
        prog_.body.push_back(statement(true));
        if (prog_.body.back().kind == SrcStmt::Return) returned = true;
      }
    }
    return std::move(prog_);
  }

 private:
  const Token& peek(size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at_end() const { return peek().type == Token::End; }
  bool is_punct(const char* p) const { return peek().type == Token::Punct && peek().text == p; }
  bool is_ident(const char* w) const { return peek().type == Token::Ident && peek().text == w; }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const std::string& expected) const {
    const Token& t = peek();
    std::string got = t.type == Token::End ? "end of input" : "'" + t.text + "'";
    throw FrontendError(t.loc, "syntax error: expected " + expected + ", got " + got);
  }

  void expect(const char* p) {
    if (!is_punct(p)) fail(std::string("'") + p + "'");
    next();
  }

  std::string ident() {
    if (peek().type != Token::Ident || is_keyword(peek().text)) fail("identifier");
    return next().text;
  }

  static bool is_keyword(const std::string& s) {
    return s == "for" || s == "in" || s == "proc" || s == "return";
  }

  int64_t literal() {
    if (peek().type != Token::Number) fail("number");
    return static_cast<int64_t>(next().number);
  }

  void pragma() {
    Token p = next();
    if (p.text == "table") {
      SrcTable t;
      t.loc = p.loc;
      t.name = ident();
      if (peek().type == Token::String) {
        t.source = next().text;
      } else if (is_ident("aes")) {
        next();
        t.source = "aes";
        t.builtin = true;
      } else {
        fail("table source (\"file\" or aes)");
      }
      expect(";");
      prog_.tables.push_back(std::move(t));
      return;
    }
    if (p.text == "preshare") {
      SrcStmt s;
      s.kind = SrcStmt::Preshare;
      s.loc = p.loc;
      expect("{");
      while (!is_punct("}")) {
        if (at_end()) fail("'}'");
        s.body.push_back(statement(false));
      }
      expect("}");
      prog_.body.push_back(std::move(s));
      return;
    }
    VarKind kind = p.text == "public" ? VarKind::Public
                   : p.text == "private" ? VarKind::Private
                                         : VarKind::Random;
    do {
      SrcDecl d;
      d.loc = peek().loc;
      d.name = ident();
      d.kind = kind;
      if (is_punct("[")) {
        next();
        d.lo = literal();
        if (is_punct("..")) {
          next();
          d.hi = literal();
          d.is_range = true;
          if (d.hi < d.lo) throw FrontendError(d.loc, "empty declaration range");
        } else {
          d.name += "[" + std::to_string(d.lo) + "]";
        }
        expect("]");
      }
      prog_.decls.push_back(std::move(d));
      if (!is_punct(",")) break;
      next();
    } while (true);
    expect(";");
  }

  void proc() {
    SrcProc p;
    p.loc = next().loc;
    p.name = ident();
    expect("(");
    if (!is_punct(")")) {
      p.params.push_back(ident());
      while (is_punct(",")) {
        next();
        p.params.push_back(ident());
      }
    }
    expect(")");
    expect("{");
    while (!is_ident("return")) {
      if (at_end() || is_punct("}")) fail("'return'");
      p.body.push_back(statement(false));
    }
    next();
    p.result = expr();
    expect(";");
    expect("}");
    prog_.procs.push_back(std::move(p));
  }

  SrcStmt statement(bool top) {
    SrcStmt s;
    s.loc = peek().loc;
    if (is_ident("for")) {
      next();
      s.kind = SrcStmt::For;
      s.target = ident();
      if (!is_ident("in")) fail("'in'");
      next();
      s.lo = expr();
      expect("..");
      s.hi = expr();
      expect("{");
      while (!is_punct("}")) {
        if (at_end()) fail("'}'");
        s.body.push_back(statement(false));
      }
      expect("}");
      return s;
    }
    if (is_ident("return")) {
      if (!top) fail("statement");
      next();
      s.kind = SrcStmt::Return;
      s.results.push_back(expr());
      while (is_punct(",")) {
        next();
        s.results.push_back(expr());
      }
      expect(";");
      return s;
    }
    s.kind = SrcStmt::Assign;
    s.target = ident();
    if (is_punct("[")) {
      next();
      s.target_index = expr();
      expect("]");
    }
    expect("=");
    s.value = expr();
    expect(";");
    return s;
  }

  using Level = std::vector<std::pair<const char*, Op>>;

  std::unique_ptr<SrcExpr> expr() { return binary_level(0); }

  std::unique_ptr<SrcExpr> binary_level(size_t level) {
    static const std::vector<Level> kLevels = {
        {{"|", Op::Or}},
        {{"^", Op::Xor}},
        {{"&", Op::And}},
        {{"<<", Op::Shl}, {">>", Op::Shr}},
        {{"+", Op::Add}, {"-", Op::Sub}},
        {{"*", Op::Mul}, {"@", Op::GfMul}},
    };
    if (level == kLevels.size()) return unary();
    auto lhs = binary_level(level + 1);
    while (true) {
      const std::pair<const char*, Op>* hit = nullptr;
      for (const auto& cand : kLevels[level]) {
        if (is_punct(cand.first)) hit = &cand;
      }
      if (!hit) return lhs;
      auto e = std::make_unique<SrcExpr>();
      e->kind = SrcExpr::Binary;
      e->loc = next().loc;
      e->op = hit->second;
      e->args.push_back(std::move(lhs));
      e->args.push_back(binary_level(level + 1));
      lhs = std::move(e);
    }
  }

  std::unique_ptr<SrcExpr> unary() {
    if (is_punct("~")) {
      auto e = std::make_unique<SrcExpr>();
      e->kind = SrcExpr::Unary;
      e->loc = next().loc;
      e->op = Op::Not;
      e->args.push_back(unary());
      return e;
    }
    return primary();
  }

  std::unique_ptr<SrcExpr> primary() {
    auto e = std::make_unique<SrcExpr>();
    e->loc = peek().loc;
    if (peek().type == Token::Number) {
      e->kind = SrcExpr::Number;
      e->number = next().number;
      return e;
    }
    if (is_punct("(")) {
      next();
      auto inner = expr();
      expect(")");
      return inner;
    }
    if (peek().type == Token::Ident && !is_keyword(peek().text)) {
      e->name = next().text;
      if (is_punct("(")) {
        next();
        e->kind = SrcExpr::Call;
        if (!is_punct(")")) {
          e->args.push_back(expr());
          while (is_punct(",")) {
            next();
            e->args.push_back(expr());
          }
        }
        expect(")");
        return e;
      }
      e->kind = SrcExpr::Name;
      if (is_punct("[")) {
        next();
        e->index = expr();
        expect("]");
      }
      return e;
    }
    fail("expression");
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  SourceProgram prog_;
};

// Name resolution and constant-context checks over the whole file.
class Resolver {
 public:
  explicit Resolver(const SourceProgram& p) : p_(p) {
    for (const auto& d : p.decls) {
      if (d.is_range) inputs_.indexable.insert(d.name);
      else inputs_.names.insert(d.name);
      auto bracket = d.name.find('[');
      if (bracket != std::string::npos) inputs_.indexable.insert(d.name.substr(0, bracket));
    }
    for (const auto& t : p.tables) callables_.insert(t.name);
    for (const auto& pr : p.procs) callables_.insert(pr.name);
  }

  void run() {
    for (const auto& pr : p_.procs) {
      Scope s = inputs_;
      for (const auto& a : pr.params) s.names.insert(a);
      std::vector<std::string> loops;
      for (const auto& st : pr.body) stmt(st, s, loops);
      expr(*pr.result, s, loops);
    }
    Scope s = inputs_;
    std::vector<std::string> loops;
    for (const auto& st : p_.body) stmt(st, s, loops);
  }

 private:
  struct Scope {
    std::unordered_set<std::string> names;
    std::unordered_set<std::string> indexable;
  };

  static bool in(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  }

  void constant(const SrcExpr& e, const std::vector<std::string>& loops, const char* what) {
    switch (e.kind) {
      case SrcExpr::Number: return;
      case SrcExpr::Name:
        if (!e.index && in(loops, e.name)) return;
        throw FrontendError(e.loc, std::string(what) + " must be constant");
      case SrcExpr::Unary:
      case SrcExpr::Binary:
        if (e.op == Op::GfMul) throw FrontendError(e.loc, std::string(what) + " must be constant");
        for (const auto& a : e.args) constant(*a, loops, what);
        return;
      case SrcExpr::Call: throw FrontendError(e.loc, std::string(what) + " must be constant");
    }
  }

  void expr(const SrcExpr& e, const Scope& s, const std::vector<std::string>& loops) {
    switch (e.kind) {
      case SrcExpr::Number: return;
      case SrcExpr::Name:
        if (e.index) {
          constant(*e.index, loops, "array index");
          if (!s.indexable.count(e.name)) {
            throw FrontendError(e.loc, "use of undeclared variable '" + e.name + "[...]'");
          }
        } else if (!s.names.count(e.name) && !in(loops, e.name)) {
          throw FrontendError(e.loc, "use of undeclared variable '" + e.name + "'");
        }
        return;
      case SrcExpr::Call:
        if (!callables_.count(e.name)) {
          throw FrontendError(e.loc, "call of undefined procedure or table '" + e.name + "'");
        }
        for (const auto& a : e.args) expr(*a, s, loops);
        return;
      case SrcExpr::Unary: expr(*e.args[0], s, loops); return;
      case SrcExpr::Binary:
        expr(*e.args[0], s, loops);
        if (e.op == Op::Shl || e.op == Op::Shr) constant(*e.args[1], loops, "shift amount");
        else expr(*e.args[1], s, loops);
        return;
    }
  }

  void stmt(const SrcStmt& st, Scope& s, std::vector<std::string>& loops) {
    switch (st.kind) {
      case SrcStmt::Assign:
        expr(*st.value, s, loops);
        if (in(loops, st.target)) throw FrontendError(st.loc, "cannot assign to loop variable");
        if (st.target_index) {
          constant(*st.target_index, loops, "array index");
          s.indexable.insert(st.target);
        } else {
          s.names.insert(st.target);
        }
        return;
      case SrcStmt::For:
        constant(*st.lo, loops, "loop bound");
        constant(*st.hi, loops, "loop bound");
        loops.push_back(st.target);
        for (const auto& b : st.body) stmt(b, s, loops);
        loops.pop_back();
        return;
      case SrcStmt::Preshare:
        for (const auto& b : st.body) stmt(b, s, loops);
        return;
      case SrcStmt::Return:
        for (const auto& r : st.results) expr(*r, s, loops);
        return;
    }
  }

  const SourceProgram& p_;
  Scope inputs_;
  std::unordered_set<std::string> callables_;
};

// ---------------------------------------------------------------- elaboration

class Elaborator {
 public:
  Elaborator(const SourceProgram& src, int width, const ElaborateOptions& opts)
      : src_(src), opts_(opts), prog_(width) {
    prog_.file = src.file;
  }

  Program run() {
    ExprContext& ctx = *prog_.ctx;
    frames_.emplace_back();
    frames_.back().scopes.emplace_back();
    for (const auto& d : src_.decls) {
      if (d.is_range) {
        for (int64_t i = d.lo; i <= d.hi; ++i) declare(d.name + "[" + std::to_string(i) + "]", d.kind, d.loc);
      } else {
        declare(d.name, d.kind, d.loc);
      }
    }
    for (const auto& t : src_.tables) {
      if (tables_.count(t.name)) throw FrontendError(t.loc, "table '" + t.name + "' redefined");
      Table tab;
      tab.name = t.name;
      if (t.builtin) {
        if (ctx.width() != 8) throw FrontendError(t.loc, "builtin table aes requires width 8");
        tab.source = "aes";
        tab.values = aes_sbox();
      } else {
        std::filesystem::path path(t.source);
        if (path.is_relative()) {
          std::filesystem::path base = opts_.base_dir.empty()
                                           ? std::filesystem::path(src_.file).parent_path()
                                           : std::filesystem::path(opts_.base_dir);
          path = base / path;
        }
        std::error_code ec;
        auto canon = std::filesystem::weakly_canonical(path, ec);
        tab.source = (ec ? path : canon).string();
        try {
          tab.values = read_table_file(tab.source);
        } catch (const std::exception& e) {
          throw FrontendError(t.loc, e.what());
        }
      }
      try {
        tables_[t.name] = ctx.add_table(std::move(tab));
      } catch (const std::invalid_argument& e) {
        throw FrontendError(t.loc, e.what());
      }
    }
    for (const auto& p : src_.procs) {
      if (procs_.count(p.name) || tables_.count(p.name)) {
        throw FrontendError(p.loc, "'" + p.name + "' redefined");
      }
      procs_[p.name] = &p;
    }
    for (const auto& st : src_.body) stmt(st, false);

    std::unordered_set<VarId> used_outside(prog_.returns.begin(), prog_.returns.end());
    for (const auto& a : prog_.assignments) {
      if (a.preshare) continue;
      for (const auto& o : a.args) {
        if (!o.is_const) used_outside.insert(o.var);
      }
    }
    std::unordered_set<VarId> hidden;
    for (const auto& a : prog_.assignments) {
      if (a.preshare && !used_outside.count(a.target)) hidden.insert(a.target);
    }
    size_t n = ctx.num_vars();
    for (VarId v = 0; v < n; ++v) {
      VarKind k = ctx.kind(v);
      if (k == VarKind::Private || hidden.count(v)) continue;
      prog_.observables.push_back(v);
    }
    prog_.finalize();
    return std::move(prog_);
  }

 private:
  struct Binding {
    bool is_const = false;
    int64_t value = 0;
    VarId var = 0;
  };
  struct Frame {
    std::vector<std::unordered_map<std::string, Binding>> scopes;
    bool is_proc = false;
  };

  void declare(const std::string& name, VarKind kind, const SourceLoc& loc) {
    if (used_.count(name)) throw FrontendError(loc, "variable '" + name + "' declared twice");
    VarId v = prog_.ctx->add_var(name, kind);
    used_.insert(name);
    inputs_[name] = v;
    frames_[0].scopes[0][name] = Binding{false, 0, v};
    if (kind == VarKind::Public) prog_.publics.push_back(v);
    else if (kind == VarKind::Private) prog_.privates.push_back(v);
    else prog_.randoms.push_back(v);
  }

  VarId new_intermediate(const std::string& base) {
    std::string name = base;
    if (used_.count(name)) {
      int& c = ssa_counter_[base];
      auto bracket = base.find('[');
      std::string stem = base.substr(0, bracket);
      std::string index = bracket == std::string::npos ? "" : base.substr(bracket);
      do {
        name = stem + "$" + std::to_string(++c) + index;
      } while (used_.count(name));
    }
    used_.insert(name);
    VarId v = prog_.ctx->add_var(name, VarKind::Intermediate);
    prog_.intermediates.push_back(v);
    return v;
  }

  VarId new_temp() {
    std::string name;
    do {
      name = "_t" + std::to_string(++temp_counter_);
    } while (used_.count(name));
    return new_intermediate(name);
  }

  const Binding* lookup(const std::string& name) const {
    const Frame& f = frames_.back();
    for (auto it = f.scopes.rbegin(); it != f.scopes.rend(); ++it) {
      auto hit = it->find(name);
      if (hit != it->end()) return &hit->second;
    }
    if (f.is_proc) {
      static thread_local Binding b;
      auto in = inputs_.find(name);
      if (in != inputs_.end()) {
        b = Binding{false, 0, in->second};
        return &b;
      }
    }
    return nullptr;
  }

  std::string mangle(const std::string& name, const SrcExpr* index) {
    if (!index) return name;
    return name + "[" + std::to_string(eval_int(*index, "array index")) + "]";
  }

  int64_t eval_int(const SrcExpr& e, const char* what) {
    switch (e.kind) {
      case SrcExpr::Number: return static_cast<int64_t>(e.number);
      case SrcExpr::Name: {
        const Binding* b = e.index ? nullptr : lookup(e.name);
        if (!b || !b->is_const) throw FrontendError(e.loc, std::string(what) + " must be constant");
        return b->value;
      }
      case SrcExpr::Unary: return ~eval_int(*e.args[0], what);
      case SrcExpr::Binary: {
        int64_t a = eval_int(*e.args[0], what);
        int64_t b = eval_int(*e.args[1], what);
        switch (e.op) {
          case Op::Xor: return a ^ b;
          case Op::And: return a & b;
          case Op::Or: return a | b;
          case Op::Add: return a + b;
          case Op::Sub: return a - b;
          case Op::Mul: return a * b;
          case Op::Shl: return b >= 63 || b < 0 ? 0 : a << b;
          case Op::Shr: return b >= 63 || b < 0 ? 0 : a >> b;
          default: break;
        }
        throw FrontendError(e.loc, std::string(what) + " must be constant");
      }
      case SrcExpr::Call: break;
    }
    throw FrontendError(e.loc, std::string(what) + " must be constant");
  }

  // Value of a sub-expression without variables, in domain arithmetic.
  std::optional<Value> fold(const SrcExpr& e) {
    const Field& f = prog_.ctx->field();
    switch (e.kind) {
      case SrcExpr::Number: return f.reduce(e.number);
      case SrcExpr::Name: {
        if (e.index) return std::nullopt;
        const Binding* b = lookup(e.name);
        if (b && b->is_const) return f.reduce(static_cast<uint64_t>(b->value));
        return std::nullopt;
      }
      case SrcExpr::Unary: {
        auto a = fold(*e.args[0]);
        if (!a) return std::nullopt;
        return f.reduce(~*a);
      }
      case SrcExpr::Binary: {
        if (e.op == Op::Shl || e.op == Op::Shr) {
          auto a = fold(*e.args[0]);
          if (!a) return std::nullopt;
          auto n = static_cast<uint32_t>(eval_int(*e.args[1], "shift amount"));
          return e.op == Op::Shl ? f.shl(*a, n) : f.shr(*a, n);
        }
        auto a = fold(*e.args[0]);
        if (!a) return std::nullopt;
        auto b = fold(*e.args[1]);
        if (!b) return std::nullopt;
        return apply_binary(f, e.op, *a, *b);
      }
      case SrcExpr::Call: return std::nullopt;
    }
    return std::nullopt;
  }

  Operand lower(const SrcExpr& e) {
    if (auto c = fold(e)) return Operand::of_const(*c);
    switch (e.kind) {
      case SrcExpr::Name: return name_operand(e);
      case SrcExpr::Call:
        if (procs_.count(e.name)) return call(e);
        [[fallthrough]];
      default: return Operand::of_var(emit(e, new_temp_lazy()));
    }
  }

  Operand name_operand(const SrcExpr& e) {
    std::string name = mangle(e.name, e.index.get());
    const Binding* b = lookup(name);
    if (!b) throw FrontendError(e.loc, "use of undeclared variable '" + name + "'");
    if (b->is_const) return Operand::of_const(prog_.ctx->field().reduce(static_cast<uint64_t>(b->value)));
    return Operand::of_var(b->var);
  }

  // The target is created only after the operands were lowered.
  std::function<VarId()> new_temp_lazy() {
    return [this] { return new_temp(); };
  }

  VarId emit(const SrcExpr& e, const std::function<VarId()>& make_target) {
    Assignment a;
    a.loc = e.loc;
    a.preshare = preshare_;
    switch (e.kind) {
      case SrcExpr::Unary:
        a.op = Op::Not;
        a.args.push_back(lower(*e.args[0]));
        break;
      case SrcExpr::Binary:
        a.op = e.op;
        a.args.push_back(lower(*e.args[0]));
        if (e.op == Op::Shl || e.op == Op::Shr) {
          int64_t n = eval_int(*e.args[1], "shift amount");
          if (n < 0) throw FrontendError(e.args[1]->loc, "negative shift amount");
          a.param = static_cast<uint64_t>(n);
        } else {
          a.args.push_back(lower(*e.args[1]));
        }
        break;
      case SrcExpr::Call: {
        auto t = tables_.find(e.name);
        if (t == tables_.end()) throw FrontendError(e.loc, "unknown table '" + e.name + "'");
        if (e.args.size() != 1) throw FrontendError(e.loc, "table lookup takes one argument");
        a.op = Op::Table;
        a.param = t->second;
        a.args.push_back(lower(*e.args[0]));
        break;
      }
      default:
        a.op = Op::Var;
        a.args.push_back(lower(e));
        break;
    }
    a.target = make_target();
    prog_.assignments.push_back(std::move(a));
    return prog_.assignments.back().target;
  }

  Operand call(const SrcExpr& e) {
    const SrcProc& p = *procs_.at(e.name);
    if (e.args.size() != p.params.size()) {
      throw FrontendError(e.loc, "procedure '" + p.name + "' expects " +
                                     std::to_string(p.params.size()) + " arguments");
    }
    if (std::find(call_stack_.begin(), call_stack_.end(), p.name) != call_stack_.end()) {
      throw FrontendError(e.loc, "recursion detected in call of '" + p.name + "'");
    }
    std::vector<Operand> args;
    for (const auto& a : e.args) args.push_back(lower(*a));
    Frame f;
    f.is_proc = true;
    f.scopes.emplace_back();
    for (size_t i = 0; i < args.size(); ++i) {
      auto& slot = f.scopes[0][p.params[i]];
      if (args[i].is_const) slot = Binding{true, static_cast<int64_t>(args[i].value), 0};
      else slot = Binding{false, 0, args[i].var};
    }
    call_stack_.push_back(p.name);
    frames_.push_back(std::move(f));
    for (const auto& st : p.body) stmt(st, preshare_);
    Operand r = lower(*p.result);
    frames_.pop_back();
    call_stack_.pop_back();
    return r;
  }

  void assign(const SrcStmt& st) {
    std::string name = mangle(st.target, st.target_index.get());
    const SrcExpr& rhs = *st.value;
    auto make = [&] { return new_intermediate(name); };
    VarId v;
    bool direct = !fold(rhs) && (rhs.kind == SrcExpr::Unary || rhs.kind == SrcExpr::Binary ||
                                 (rhs.kind == SrcExpr::Call && !procs_.count(rhs.name)));
    if (direct) {
      v = emit(rhs, make);
    } else {
      Assignment a;
      a.loc = st.loc;
      a.op = Op::Var;
      a.args.push_back(lower(rhs));
      a.preshare = preshare_;
      a.target = make();
      v = a.target;
      prog_.assignments.push_back(std::move(a));
    }
    frames_.back().scopes.front()[name] = Binding{false, 0, v};
  }

  void stmt(const SrcStmt& st, bool preshare) {
    preshare_ = preshare;
    switch (st.kind) {
      case SrcStmt::Assign: assign(st); break;
      case SrcStmt::For: {
        int64_t lo = eval_int(*st.lo, "loop bound");
        int64_t hi = eval_int(*st.hi, "loop bound");
        if (hi - lo > opts_.unroll_limit) {
          throw FrontendError(st.loc, "loop bound exceeds the unroll limit of " +
                                          std::to_string(opts_.unroll_limit));
        }
        for (int64_t i = lo; i < hi; ++i) {
          frames_.back().scopes.emplace_back();
          frames_.back().scopes.back()[st.target] = Binding{true, i, 0};
          for (const auto& b : st.body) stmt(b, preshare);
          frames_.back().scopes.pop_back();
        }
        break;
      }
      case SrcStmt::Preshare:
        for (const auto& b : st.body) stmt(b, true);
        break;
      case SrcStmt::Return:
        for (const auto& r : st.results) {
          Operand o = lower(*r);
          if (o.is_const) throw FrontendError(r->loc, "cannot return a constant");
          prog_.returns.push_back(o.var);
        }
        break;
    }
    preshare_ = preshare;
  }

  const SourceProgram& src_;
  ElaborateOptions opts_;
  Program prog_;
  std::vector<Frame> frames_;
  std::unordered_map<std::string, VarId> inputs_;
  std::unordered_map<std::string, uint32_t> tables_;
  std::unordered_map<std::string, const SrcProc*> procs_;
  std::unordered_set<std::string> used_;
  std::unordered_map<std::string, int> ssa_counter_;
  std::vector<std::string> call_stack_;
  int temp_counter_ = 0;
  bool preshare_ = false;
};

std::string operand_text(const Program& p, const Operand& o) {
  return o.is_const ? std::to_string(o.value) : p.name(o.var);
}

}  // namespace

SourceProgram parse(const std::string& text, const std::string& file) {
  Parser parser(lex(text, file), file);
  SourceProgram prog = parser.run();
  Resolver(prog).run();
  return prog;
}

SourceProgram parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FrontendError(SourceLoc{path, 0, 0}, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

Program elaborate(const SourceProgram& src, int width, const ElaborateOptions& opts) {
  if (width < 1 || width > kMaxWidth) {
    throw std::invalid_argument("width must be in 1.." + std::to_string(kMaxWidth));
  }
  return Elaborator(src, width, opts).run();
}

Program load_program(const std::string& path, int width, const ElaborateOptions& opts) {
  return elaborate(parse_file(path), width, opts);
}

std::string print_program(const Program& p) {
  std::ostringstream out;
  auto decl = [&](const char* pragma, const std::vector<VarId>& vars) {
    if (vars.empty()) return;
    out << "#" << pragma << " ";
    for (size_t i = 0; i < vars.size(); ++i) out << (i ? ", " : "") << p.name(vars[i]);
    out << ";\n";
  };
  decl("public", p.publics);
  decl("private", p.privates);
  decl("random", p.randoms);
  for (uint32_t t = 0; t < p.ctx->num_tables(); ++t) {
    const Table& tab = p.ctx->table(t);
    out << "#table " << tab.name << " ";
    if (tab.source == "aes") out << "aes";
    else out << "\"" << tab.source << "\"";
    out << ";\n";
  }
  bool in_block = false;
  for (const auto& a : p.assignments) {
    if (a.preshare != in_block) {
      out << (a.preshare ? "#preshare {\n" : "}\n");
      in_block = a.preshare;
    }
    out << (in_block ? "  " : "") << p.name(a.target) << " = ";
    switch (a.op) {
      case Op::Var: out << operand_text(p, a.args[0]); break;
      case Op::Not: out << "~" << operand_text(p, a.args[0]); break;
      case Op::Table:
        out << p.ctx->table(static_cast<uint32_t>(a.param)).name << "(" << operand_text(p, a.args[0]) << ")";
        break;
      case Op::Shl:
      case Op::Shr:
        out << operand_text(p, a.args[0]) << (a.op == Op::Shl ? " << " : " >> ") << a.param;
        break;
      default:
        out << operand_text(p, a.args[0]) << " " << op_symbol(a.op) << " " << operand_text(p, a.args[1]);
        break;
    }
    out << ";\n";
  }
  if (in_block) out << "}\n";
  if (!p.returns.empty()) {
    out << "return ";
    for (size_t i = 0; i < p.returns.size(); ++i) out << (i ? ", " : "") << p.name(p.returns[i]);
    out << ";\n";
  }
  return out.str();
}

}  // namespace maskcheck
