#include "invar/evaluation.hpp"

#include <algorithm>
#include <cmath>

namespace invar {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

bool overlaps(double a0, double a1, double b0, double b1) { return std::min(a1, b1) - std::max(a0, b0) > 0.0; }

std::vector<AttackCase> sorted_cases(std::vector<AttackCase> cases) {
  std::sort(cases.begin(), cases.end(), [](const AttackCase& a, const AttackCase& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < cases.size(); ++i) {
    if (cases[i].start < cases[i - 1].end) {
      throw Error(Errc::overlapping_cases, "cases '" + cases[i - 1].id + "' and '" + cases[i].id + "' overlap");
    }
  }
  return cases;
}

}  // namespace

SampleMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  SampleMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.precision_degenerate = tp + fp == 0;
  m.precision = m.precision_degenerate ? 1.0 : ratio(tp, tp + fp);
  m.recall_degenerate = tp + fn == 0;
  m.recall = m.recall_degenerate ? 0.0 : ratio(tp, tp + fn);
  m.fpr = fp + tn == 0 ? 0.0 : ratio(fp, fp + tn);
  m.f1 = f1_of(m.precision, m.recall);
  return m;
}

SampleMetrics sample_metrics(const Frame& truth, const std::vector<AlarmSegment>& segments,
                             const CorrectionConfig& corr) {
  if (corr.tail_forgiveness && !(corr.window_size_s > 0.0) &&
      std::any_of(segments.begin(), segments.end(), [](const AlarmSegment& s) { return !(s.window_size_s > 0.0); })) {
    throw Error(Errc::bad_config, "tail forgiveness needs a positive window size");
  }
  const Index n = truth.size();
  const double tol = 1e-9 * std::max(1.0, std::abs(truth.end_time()));
  for (const auto& s : segments) {
    if (!(s.start <= s.end) || s.end < truth.t0() - tol || s.start > truth.end_time() + tol) {
      throw Error(Errc::time_base_mismatch, "alarm segment lies outside the labelled time range");
    }
  }
  const auto cases = sorted_cases(truth.effective_cases());

  std::vector<std::uint8_t> label(static_cast<std::size_t>(n), 0);
  if (truth.has_label()) {
    label = truth.label();
  } else {
    for (const auto& c : cases) {
      for (Index i = truth.index_at_or_after(c.start); i < truth.index_at_or_after(c.end); ++i) label[i] = 1;
    }
  }

  auto horizon = [&](const AlarmSegment& s) { return s.window_size_s > 0.0 ? s.window_size_s : corr.window_size_s; };

  // 0 = negative, 1 = positive, 2 = positive but forgiven
  std::vector<std::uint8_t> pred(static_cast<std::size_t>(n), 0);
  for (const auto& s : segments) {
    for (Index i = truth.index_at_or_after(s.start); i < truth.index_at_or_after(s.end); ++i) pred[i] = 1;
  }
  if (corr.tail_forgiveness) {
    for (const auto& s : segments) {
      const Index lo = truth.index_at_or_after(s.start), hi = truth.index_at_or_after(s.end);
      for (const auto& c : cases) {
        if (!overlaps(s.start, s.end, c.start, c.end)) continue;
        const Index a = std::max(lo, truth.index_at_or_after(c.end));
        const Index b = std::min(hi, truth.index_at_or_after(c.end + horizon(s)));
        for (Index i = a; i < b; ++i) {
          if (!label[i]) pred[i] = 2;
        }
      }
    }
  }
  if (corr.long_attack_credit) {
    for (const auto& c : cases) {
      bool head = false, tail = false;
      for (const auto& s : segments) {
        const double w = horizon(s);
        if (!(w > 0.0)) continue;
        head = head || overlaps(s.start, s.end, c.start, std::min(c.end, c.start + w));
        tail = tail || overlaps(s.start, s.end, std::max(c.start, c.end - w), c.end);
      }
      if (head && tail) {
        for (Index i = truth.index_at_or_after(c.start); i < truth.index_at_or_after(c.end); ++i) {
          if (label[i]) pred[i] = 1;
        }
      }
    }
  }

  std::size_t tp = 0, fp = 0, fn = 0, tn = 0, forgiven = 0;
  for (Index i = 0; i < n; ++i) {
    const bool y = label[i] != 0;
    switch (pred[i]) {
      case 0: y ? ++fn : ++tn; break;
      case 1: y ? ++tp : ++fp; break;
      default: ++forgiven; break;
    }
  }
  SampleMetrics m = metrics_from_counts(tp, fp, fn, tn);
  m.forgiven = forgiven;
  m.tail_forgiveness = corr.tail_forgiveness;
  m.long_attack_credit = corr.long_attack_credit;
  return m;
}

CaseMetrics case_metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  CaseMetrics m;
  m.total_cases = tp + fn;
  m.tp_cases = tp;
  m.fn_cases = fn;
  m.fp_segments = fp;
  m.precision = tp + fp == 0 ? 1.0 : ratio(tp, tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : ratio(tp, tp + fn);
  m.f1 = f1_of(m.precision, m.recall);
  m.csi = tp + fp + fn == 0 ? 0.0 : ratio(tp, tp + fp + fn);
  return m;
}

CaseMetrics case_metrics(const std::vector<AttackCase>& cases_in, const std::vector<AlarmSegment>& segments) {
  const auto cases = sorted_cases(cases_in);
  std::vector<CaseHit> hits(cases.size());
  std::vector<bool> seg_hit(segments.size(), false);
  std::size_t tp = 0;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    hits[c].case_id = cases[c].id;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (overlaps(segments[s].start, segments[s].end, cases[c].start, cases[c].end)) {
        hits[c].segments.push_back(s);
        seg_hit[s] = true;
      }
    }
    hits[c].detected = !hits[c].segments.empty();
    tp += hits[c].detected;
  }
  const auto fp = static_cast<std::size_t>(std::count(seg_hit.begin(), seg_hit.end(), false));
  CaseMetrics m = case_metrics_from_counts(tp, fp, cases.size() - tp);
  m.hits = std::move(hits);
  m.segment_hits = std::move(seg_hit);
  return m;
}

EvaluationReport evaluate(const Frame& truth, const std::vector<AlarmSegment>& segments,
                          const CorrectionConfig& corr) {
  EvaluationReport r;
  r.raw = sample_metrics(truth, segments, CorrectionConfig::raw());
  r.corrected = sample_metrics(truth, segments, corr);
  r.cases = case_metrics(truth.effective_cases(), segments);
  return r;
}

std::vector<std::vector<double>> group_points(const std::vector<double>& timestamps, double gap_s) {
  std::vector<std::vector<double>> groups;
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    if (i > 0 && timestamps[i] < timestamps[i - 1]) throw Error(Errc::unsorted, "timestamps are not sorted");
    if (groups.empty() || timestamps[i] - timestamps[i - 1] > gap_s) groups.emplace_back();
    groups.back().push_back(timestamps[i]);
  }
  return groups;
}

std::vector<bool> match_groups_to_schedule(const std::vector<std::vector<double>>& groups,
                                           const std::vector<AttackCase>& cases) {
  std::vector<bool> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    out.push_back(std::any_of(g.begin(), g.end(), [&](double t) {
      return std::any_of(cases.begin(), cases.end(), [&](const AttackCase& c) { return t >= c.start && t < c.end; });
    }));
  }
  return out;
}

}  // namespace invar
