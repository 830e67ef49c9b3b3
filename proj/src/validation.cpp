#include "invar/validation.hpp"

#include "invar/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace invar {

void ValidationConfig::validate() const {
  if (subsample_cap < 50) throw Error(Errc::bad_config, "subsample_cap must be >= 50");
  if (perm_count < 19) throw Error(Errc::bad_config, "perm_count must be >= 19");
  if (block_len < 1) throw Error(Errc::bad_config, "block_len must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::bad_config, "alpha must lie in (0, 1)");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw Error(Errc::bad_config, "holdout_fraction must lie in [0, 1)");
  }
  if (smooth_w < 1) throw Error(Errc::bad_config, "smooth_w must be >= 1");
}

Sides construct_sides(const Frame& frame, const dsl::Invariant& inv, const ValidationConfig& cfg) {
  const Index n = frame.size();
  Index fit_end = n;
  if (cfg.holdout_fraction > 0.0) {
    fit_end = static_cast<Index>(std::floor(static_cast<double>(n) * (1.0 - cfg.holdout_fraction)));
  }
  if (fit_end <= 0 || fit_end > n) {
    throw Error(Errc::too_few_valid_samples, "fit segment is empty");
  }

  const auto fit_design = build_design(frame, inv, {0, fit_end}, cfg.smooth_w);
  const auto fit = ols_fit(fit_design);

  Sides s;
  s.coefficients = fit.coefficients;
  s.rank_deficient = fit.rank_deficient;
  if (fit_end == n) {
    s.lhs = fit_design.y;
    s.rhs = fit_design.X * fit.coefficients;
    s.rows = fit_design.rows;
  } else {
    if (n - fit_end < 2) throw Error(Errc::too_few_valid_samples, "holdout segment is empty");
    const auto score_design = build_design(frame, inv, {fit_end, n}, cfg.smooth_w);
    s.lhs = score_design.y;
    s.rhs = score_design.X * fit.coefficients;
    s.rows = score_design.rows;
  }
  return s;
}

VectorXd lag1_residual(const VectorXd& x) {
  const Index m = x.size() - 1;
  if (m < 2) throw Error(Errc::too_short, "lag-1 conditioning needs at least 3 samples");
  const VectorXd prev = x.head(m);
  const VectorXd curr = x.tail(m);
  const double mean = prev.mean();
  const double sd = std::sqrt((prev.array() - mean).square().mean());
  VectorXd out(m);
  if (!(sd > 0.0)) {
    out = curr.array() - curr.mean();
    return out;
  }
  const double h = 1.06 * sd * std::pow(static_cast<double>(m), -0.2);
  const double inv2h2 = 1.0 / (2.0 * h * h);
  for (Index t = 0; t < m; ++t) {
    const Eigen::ArrayXd w = (-(prev.array() - prev[t]).square() * inv2h2).exp();
    out[t] = curr[t] - (w * curr.array()).sum() / w.sum();
  }
  return out;
}

namespace {

PermutationConfig permutation_config(const ValidationConfig& cfg) {
  return {cfg.subsample_cap, cfg.perm_count, cfg.block_len, cfg.seed};
}

std::string equation_text(const dsl::Invariant& inv) {
  dsl::Invariant bare = inv;
  bare.id.clear();
  bare.provenance.clear();
  return dsl::format_invariant(bare);
}

}  // namespace

double permutation_no_link_test(const VectorXd& a, const VectorXd& b, const ValidationConfig& cfg) {
  return permutation_test<double>(a, b, permutation_config(cfg)).p_value;
}

ValidationRecord score_invariant(const Frame& frame, const dsl::Invariant& inv, const ValidationConfig& cfg) {
  cfg.validate();
  Sides sides = construct_sides(frame, inv, cfg);
  if (cfg.condition_on_lag1) {
    sides.lhs = lag1_residual(sides.lhs);
    sides.rhs = lag1_residual(sides.rhs);
  }
  const auto perm = permutation_test<double>(sides.lhs, sides.rhs, permutation_config(cfg));

  ValidationRecord rec;
  rec.invariant_id = inv.id;
  rec.equation = equation_text(inv);
  rec.provenance = inv.provenance;
  rec.fitted_coefficients = sides.coefficients;
  rec.n_used = sides.lhs.size();
  rec.rank_deficient = sides.rank_deficient;
  rec.score.statistic = perm.statistic;
  rec.score.p_value = perm.p_value;
  if (perm.p_value <= cfg.alpha) rec.score.value = perm.statistic;
  return rec;
}

std::vector<ValidationRecord> score_all(const Frame& frame, const std::vector<dsl::Invariant>& invariants,
                                        const ValidationConfig& cfg, int jobs) {
  std::vector<ValidationRecord> out(invariants.size());
  parallel_for(invariants.size(), jobs, [&](std::size_t i) { out[i] = score_invariant(frame, invariants[i], cfg); });
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool contains_term(const std::vector<dsl::Regressor>& regs, const dsl::BasisTerm& t) {
  return std::any_of(regs.begin(), regs.end(), [&](const dsl::Regressor& r) { return r.term == t; });
}

bool is_proper_child(const dsl::Invariant& child, const dsl::Invariant& parent) {
  if (!(child.regressand == parent.regressand)) return false;
  if (child.regressors.size() >= parent.regressors.size()) return false;
  return std::all_of(child.regressors.begin(), child.regressors.end(),
                     [&](const dsl::Regressor& r) { return contains_term(parent.regressors, r.term); });
}

std::set<std::string> regressor_channels(const dsl::Invariant& inv) {
  std::set<std::string> out;
  for (const auto& r : inv.regressors) {
    for (const auto& c : r.term.operands) out.insert(c.name);
  }
  return out;
}

}  // namespace

RefinementReport compare_sub_invariants(const std::vector<dsl::Invariant>& invariants,
                                        const std::vector<ValidationRecord>& records) {
  std::map<std::string, const ValidationRecord*> by_id;
  for (const auto& r : records) by_id[r.invariant_id] = &r;
  auto record_of = [&](const dsl::Invariant& inv) -> const ValidationRecord* {
    auto it = by_id.find(inv.id);
    return it == by_id.end() ? nullptr : it->second;
  };

  RefinementReport report;
  for (const auto& parent : invariants) {
    const ValidationRecord* prec = record_of(parent);
    if (!prec) continue;

    std::vector<const dsl::Invariant*> children;
    for (const auto& cand : invariants) {
      if (&cand != &parent && record_of(cand) && is_proper_child(cand, parent)) children.push_back(&cand);
    }
    if (children.empty()) continue;

    FamilyReport fam;
    fam.parent_id = parent.id;
    std::vector<std::pair<std::string, const ValidationRecord*>> members{{parent.id, prec}};
    for (const auto* c : children) {
      fam.child_ids.push_back(c->id);
      members.emplace_back(c->id, record_of(*c));
    }
    std::stable_sort(members.begin(), members.end(), [](const auto& a, const auto& b) {
      const auto& sa = a.second->score;
      const auto& sb = b.second->score;
      if (sa.no_link() != sb.no_link()) return !sa.no_link();
      if (sa.no_link()) return false;
      return *sa.value > *sb.value;
    });
    for (const auto& m : members) fam.ranking.push_back(m.first);
    fam.best_id = fam.ranking.front();
    fam.parent_retained = fam.best_id == parent.id;

    std::set<std::string> redundant;
    const auto parent_channels = regressor_channels(parent);
    const double parent_score = prec->score.no_link() ? -1.0 : *prec->score.value;
    for (const auto* c : children) {
      const auto& cs = record_of(*c)->score;
      const auto child_channels = regressor_channels(*c);
      if (!cs.no_link() && *cs.value >= parent_score - kRedundancyMargin) {
        for (const auto& ch : parent_channels) {
          if (!child_channels.count(ch)) redundant.insert(ch);
        }
      }
      if (cs.no_link() && c->regressors.size() == 1) {
        redundant.insert(child_channels.begin(), child_channels.end());
      }
    }
    fam.redundant_channels.assign(redundant.begin(), redundant.end());
    report.families.push_back(std::move(fam));
  }
  return report;
}

}  // namespace invar
