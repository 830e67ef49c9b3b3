#include "invar/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace invar::report {

namespace {

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

std::string shortest(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

json sample_json(const SampleMetrics& m) {
  return {
      {"tp", m.tp},
      {"fp", m.fp},
      {"fn", m.fn},
      {"tn", m.tn},
      {"forgiven", m.forgiven},
      {"precision", m.precision},
      {"recall", m.recall},
      {"fpr", m.fpr},
      {"f1", m.f1},
      {"precision_degenerate", m.precision_degenerate},
      {"recall_degenerate", m.recall_degenerate},
      {"corrections", {{"tail_forgiveness", m.tail_forgiveness}, {"long_attack_credit", m.long_attack_credit}}},
  };
}

}  // namespace

json validation_json(const std::vector<ValidationRecord>& records, const RefinementReport& refinement) {
  json recs = json::array();
  for (const auto& r : records) {
    recs.push_back({
        {"id", r.invariant_id},
        {"equation", r.equation},
        {"provenance", r.provenance},
        {"score", r.score.no_link() ? json("no_link") : number(*r.score.value)},
        {"statistic", number(r.score.statistic)},
        {"p_value", number(r.score.p_value)},
        {"coefficients", vector_json(r.fitted_coefficients)},
        {"n_used", r.n_used},
        {"rank_deficient", r.rank_deficient},
        {"accepted", r.accepted},
    });
  }
  json fams = json::array();
  for (const auto& f : refinement.families) {
    fams.push_back({
        {"parent", f.parent_id},
        {"children", f.child_ids},
        {"ranking", f.ranking},
        {"best", f.best_id},
        {"parent_retained", f.parent_retained},
        {"redundant_channels", f.redundant_channels},
    });
  }
  return {{"records", recs}, {"families", fams}};
}

json threshold_json(const ClusterResult& c, const std::vector<ValidationRecord>& records) {
  json accepted = json::array(), rejected = json::array(), no_link = json::array();
  for (const auto& r : records) {
    if (r.score.no_link()) {
      no_link.push_back(r.invariant_id);
    } else {
      (r.accepted ? accepted : rejected).push_back(r.invariant_id);
    }
  }
  return {
      {"tau", number(c.tau)},
      {"mu_hi", number(c.mu_hi)},
      {"mu_lo", number(c.mu_lo)},
      {"fraction_hi", number(c.fraction_hi)},
      {"fraction_lo", number(c.fraction_lo)},
      {"within_sse", number(c.within_sse)},
      {"iterations", c.iterations},
      {"accepted", accepted},
      {"rejected", rejected},
      {"no_link", no_link},
  };
}

json alarms_json(const std::vector<AlarmSegment>& segments) {
  json a = json::array();
  for (const auto& s : segments) {
    a.push_back({
        {"start", s.start},
        {"end", s.end},
        {"invariant", s.invariant_id},
        {"peak_z", number(s.peak_z)},
        {"windows", s.window_count},
        {"window_size_s", s.window_size_s},
    });
  }
  return {{"segments", a}};
}

std::vector<AlarmSegment> alarms_from_json(const json& doc) {
  std::vector<AlarmSegment> out;
  try {
    for (const auto& s : doc.at("segments")) {
      AlarmSegment a;
      a.start = s.at("start").get<double>();
      a.end = s.at("end").get<double>();
      a.invariant_id = s.value("invariant", std::string());
      a.peak_z = s.contains("peak_z") && s["peak_z"].is_number() ? s["peak_z"].get<double>() : 0.0;
      a.window_count = s.value("windows", std::size_t{0});
      a.window_size_s = s.value("window_size_s", 0.0);
      if (!(a.start <= a.end)) throw Error(Errc::bad_config, "alarm segment with start > end");
      out.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::bad_config, std::string("malformed alarms document: ") + e.what());
  }
  return out;
}

json windows_json(const std::map<std::string, WindowChoice>& choices, WindowMode mode) {
  json w = json::object();
  for (const auto& [id, c] : choices) {
    json e = {{"size_s", c.size_s}, {"qualified", c.qualified}, {"alarms_at_choice", c.alarms_at_choice}};
    if (!c.warning.empty()) e["warning"] = c.warning;
    w[id] = e;
  }
  return {{"mode", mode == WindowMode::zero_alarm ? "zero_alarm" : "sigma_derivative"}, {"windows", w}};
}

std::map<std::string, double> windows_from_json(const json& doc) {
  std::map<std::string, double> out;
  try {
    for (const auto& [id, e] : doc.at("windows").items()) out[id] = e.at("size_s").get<double>();
  } catch (const json::exception& e) {
    throw Error(Errc::bad_config, std::string("malformed windows document: ") + e.what());
  }
  return out;
}

json evaluation_json(const EvaluationReport& r, const std::vector<AlarmSegment>& segments) {
  json hits = json::array();
  for (const auto& h : r.cases.hits) hits.push_back({{"case", h.case_id}, {"detected", h.detected}, {"segments", h.segments}});
  json segs = json::array();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    segs.push_back({
        {"index", i},
        {"start", segments[i].start},
        {"end", segments[i].end},
        {"invariant", segments[i].invariant_id},
        {"class", i < r.cases.segment_hits.size() && r.cases.segment_hits[i] ? "tp" : "fp"},
    });
  }
  const auto& c = r.cases;
  return {
      {"sample", {{"raw", sample_json(r.raw)}, {"corrected", sample_json(r.corrected)}}},
      {"case",
       {
           {"total_cases", c.total_cases},
           {"tp_cases", c.tp_cases},
           {"fn_cases", c.fn_cases},
           {"fp_segments", c.fp_segments},
           {"precision", c.precision},
           {"recall", c.recall},
           {"f1", c.f1},
           {"csi", c.csi},
           {"hits", hits},
       }},
      {"segments", segs},
  };
}

void write_trace_csv(std::ostream& out, const SsrTrace& trace) {
  Index ncoef = 0;
  for (const auto& e : trace.entries) ncoef = std::max(ncoef, e.coefficients.size());
  out << "end_ts,ssr,z";
  for (Index j = 0; j < ncoef; ++j) out << ",coef_" << j;
  out << '\n';
  for (const auto& e : trace.entries) {
    out << shortest(e.end_ts) << ',' << shortest(e.ssr) << ',' << shortest(e.z);
    for (Index j = 0; j < ncoef; ++j) out << ',' << (j < e.coefficients.size() ? shortest(e.coefficients[j]) : "");
    out << '\n';
  }
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::io, "cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw Error(Errc::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::io, "cannot rename onto " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace invar::report
