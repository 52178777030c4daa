#include "maskcheck/explore.h"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace maskcheck {

uint64_t count_tuples(uint64_t n, int order) {
  // Sum of binomials, saturating.
  uint64_t total = 0;
  for (int k = 1; k <= order && static_cast<uint64_t>(k) <= n; ++k) {
    unsigned __int128 c = 1;
    for (int i = 0; i < k; ++i) c = c * (n - static_cast<uint64_t>(i)) / static_cast<unsigned>(i + 1);
    if (c > UINT64_MAX - total) return UINT64_MAX;
    total += static_cast<uint64_t>(c);
  }
  return total;
}

namespace {

class Explorer {
 public:
  Explorer(const Program& prog, TypeChecker& tc, const ExploreOptions& opts)
      : prog_(prog), tc_(tc), opts_(opts) {}

  ExploreResult run(int order) {
    ExploreResult& r = result_;
    r.check_set = prog_.check_set();
    r.stats.tuples = count_tuples(prog_.observables.size(), order);
    ExprContext& ctx = *prog_.ctx;
    std::vector<VarId> xs = r.check_set;
    std::stable_sort(xs.begin(), xs.end(), [&](VarId a, VarId b) {
      uint64_t sa = ctx.size(prog_.computation(a)), sb = ctx.size(prog_.computation(b));
      return sa != sb ? sa < sb : a < b;
    });
    rank_.assign(ctx.num_vars(), 0);
    for (size_t i = 0; i < xs.size(); ++i) rank_[xs[i]] = i;

    if (static_cast<int>(xs.size()) < order) {
      if (!xs.empty()) {
        ++r.stats.sets_checked;
        Judgement j = check(xs);
        if (!j.proved()) pls_.insert({sorted(xs), j.type});
        else r.proofs.push_back(std::move(j));
      }
    } else if (order > 0) {
      explore({Block{order, xs}});
    }
    for (const auto& [vars, type] : pls_) r.pls.push_back(PotentialLeak{vars, type});
    return std::move(result_);
  }

 private:
  static std::vector<VarId> sorted(std::vector<VarId> v) {
    std::sort(v.begin(), v.end());
    return v;
  }

  Judgement check(const std::vector<VarId>& set) {
    ++result_.stats.checks;
    Judgement j = tc_.infer_set(set, opts_.max_level);
    return j;
  }

  void count_level(const Judgement& j) {
    if (j.level == TransformLevel::Dom) ++result_.stats.dom_sets;
    if (j.level == TransformLevel::Col) ++result_.stats.col_sets;
  }

  // Check of base + {x}, reusing the transformation found for base.
  Judgement extend(const std::vector<VarId>& base, const Judgement& base_j, VarId x) {
    std::vector<VarId> set = base;
    set.push_back(x);
    ++result_.stats.checks;
    std::vector<Expr> lam = tc_.lambdas(set);
    Judgement j = tc_.derive(set, lam, TransformLevel::Plain);
    if (j.proved() || j.type == DistType::Leaky) return j;
    if (base_j.level != TransformLevel::Plain) {
      ExprContext& ctx = *prog_.ctx;
      if (auto replayed = replay(ctx, base_j.trace, lam)) {
        Transformed t = transform(ctx, *replayed, base_j.level);
        TransformTrace trace = base_j.trace;
        trace.steps.insert(trace.steps.end(), t.trace.steps.begin(), t.trace.steps.end());
        j = tc_.derive(set, t.exprs, base_j.level, std::move(trace));
        if (j.proved()) return j;
      }
    }
    return tc_.infer_set(set, opts_.max_level);
  }

  void explore(const std::vector<Block>& blocks) {
    std::vector<VarId> chosen;
    std::vector<VarId> pool;
    for (const auto& b : blocks) {
      if (b.budget > static_cast<int>(b.vars.size())) return;
      chosen.insert(chosen.end(), b.vars.begin(), b.vars.begin() + b.budget);
      pool.insert(pool.end(), b.vars.begin(), b.vars.end());
    }
    if (chosen.empty()) return;
    std::sort(pool.begin(), pool.end(), [&](VarId a, VarId b) { return rank_[a] < rank_[b]; });

    ++result_.stats.sets_checked;
    Judgement j = check(chosen);
    std::vector<VarId> extended = chosen;
    if (!j.proved()) {
      pls_.insert({sorted(chosen), j.type});
    } else {
      for (VarId x : pool) {
        if (std::find(extended.begin(), extended.end(), x) != extended.end()) continue;
        Judgement e = extend(extended, j, x);
        if (e.proved()) {
          extended.push_back(x);
          j = std::move(e);
        }
      }
      count_level(j);
      if (opts_.record_covered) result_.covered.push_back(Covered{blocks, sorted(extended)});
      result_.proofs.push_back(std::move(j));
    }

    // Remaining sets are those not contained in the extension; split each
    // block into its part inside and outside of it.
    std::vector<bool> inside(rank_.size(), false);
    for (VarId x : extended) inside[x] = true;
    std::vector<Block> in_part, out_part;
    for (const auto& b : blocks) {
      Block in{0, {}}, out{0, {}};
      for (VarId x : b.vars) (inside[x] ? in.vars : out.vars).push_back(x);
      in_part.push_back(std::move(in));
      out_part.push_back(std::move(out));
    }
    std::vector<int> take(blocks.size(), 0);
    split(blocks, in_part, out_part, take, 0);
  }

  void split(const std::vector<Block>& blocks, const std::vector<Block>& in_part,
             const std::vector<Block>& out_part, std::vector<int>& take, size_t i) {
    if (i == blocks.size()) {
      bool all_inside = true;
      for (size_t k = 0; k < blocks.size(); ++k) {
        if (take[k] != blocks[k].budget) all_inside = false;
      }
      if (all_inside) return;
      std::vector<Block> next;
      for (size_t k = 0; k < blocks.size(); ++k) {
        int outside = blocks[k].budget - take[k];
        if (take[k] > 0) next.push_back(Block{take[k], in_part[k].vars});
        if (outside > 0) next.push_back(Block{outside, out_part[k].vars});
      }
      explore(next);
      return;
    }
    int hi = std::min<int>(blocks[i].budget, static_cast<int>(in_part[i].vars.size()));
    int lo = std::max<int>(0, blocks[i].budget - static_cast<int>(out_part[i].vars.size()));
    for (int t = lo; t <= hi; ++t) {
      take[i] = t;
      split(blocks, in_part, out_part, take, i + 1);
    }
  }

  const Program& prog_;
  TypeChecker& tc_;
  ExploreOptions opts_;
  ExploreResult result_;
  std::vector<size_t> rank_;
  std::set<std::pair<std::vector<VarId>, DistType>> pls_;
};

}  // namespace

ExploreResult home(const Program& prog, int order, TypeChecker& tc, const ExploreOptions& opts) {
  if (order < 1) throw std::invalid_argument("order must be at least 1");
  return Explorer(prog, tc, opts).run(order);
}

}  // namespace maskcheck
