#include "maskcheck/program.h"

#include <stdexcept>

namespace maskcheck {

void Program::finalize() {
  size_t n = ctx->num_vars();
  def_.assign(n, -1);
  comp_.assign(n, Expr{});
  std::vector<bool> ready(n, false);
  for (VarId v : publics) comp_[v] = ctx->variable(v), ready[v] = true;
  for (VarId v : privates) comp_[v] = ctx->variable(v), ready[v] = true;
  for (VarId v : randoms) comp_[v] = ctx->variable(v), ready[v] = true;

  auto arg = [&](const Operand& o) {
    if (o.is_const) return ctx->constant(o.value);
    if (o.var >= n || !ready[o.var]) {
      throw std::logic_error("operand " + ctx->name(o.var) + " used before definition");
    }
    return comp_[o.var];
  };

  for (size_t i = 0; i < assignments.size(); ++i) {
    const Assignment& a = assignments[i];
    Expr e;
    switch (a.op) {
      case Op::Var: e = arg(a.args.at(0)); break;
      case Op::Not: e = ctx->unary(Op::Not, arg(a.args.at(0))); break;
      case Op::Table: e = ctx->lookup(static_cast<uint32_t>(a.param), arg(a.args.at(0))); break;
      case Op::Shl:
      case Op::Shr: e = ctx->shift(a.op, arg(a.args.at(0)), static_cast<uint32_t>(a.param)); break;
      default: e = ctx->binary(a.op, arg(a.args.at(0)), arg(a.args.at(1))); break;
    }
    comp_[a.target] = e;
    def_[a.target] = static_cast<int64_t>(i);
    ready[a.target] = true;
  }
}

Expr Program::computation(VarId v) const {
  if (v >= comp_.size()) throw std::out_of_range("variable has no computation");
  return comp_[v];
}

const Assignment* Program::definition(VarId v) const {
  if (v >= def_.size() || def_[v] < 0) return nullptr;
  return &assignments[static_cast<size_t>(def_[v])];
}

std::vector<VarId> Program::check_set() const {
  std::vector<VarId> out;
  for (VarId x : observables) {
    for (VarId v : ctx->vars(computation(x))) {
      if (kind(v) != VarKind::Public) {
        out.push_back(x);
        break;
      }
    }
  }
  return out;
}

VarId Program::find(const std::string& name) const {
  size_t n = ctx->num_vars();
  for (VarId v = 0; v < n; ++v) {
    if (ctx->name(v) == name) return v;
  }
  throw std::invalid_argument("no variable named " + name);
}

std::vector<VarId> Program::find_all(const std::vector<std::string>& names) const {
  std::vector<VarId> out;
  for (const auto& s : names) out.push_back(find(s));
  return out;
}

std::vector<Expr> Program::computations(const std::vector<VarId>& vars) const {
  std::vector<Expr> out;
  for (VarId v : vars) out.push_back(computation(v));
  return out;
}

}  // namespace maskcheck
