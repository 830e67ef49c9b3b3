#include "commands.hpp"

#include "config.hpp"
#include "invar/detector.hpp"
#include "invar/dsl.hpp"
#include "invar/evaluation.hpp"
#include "invar/extraction.hpp"
#include "invar/report.hpp"
#include "invar/simulator.hpp"
#include "invar/thresholding.hpp"
#include "invar/validation.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <map>
#include <sstream>

namespace invar::cli {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string train, test, schedule, invariants, out, alarms, windows;
  int jobs = 0;
  std::uint64_t seed = 0;
  double window_size_s = 0.0;
  std::string mode;
  bool coalesce = false;
  std::string case_counts;
  std::string doc;
  bool send = false;
  std::string parse_file;
};

RunConfig resolve(const Flags& f, const CLI::App& sub) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  auto given = [&](const char* name) {
    const CLI::Option* o = sub.get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  if (given("--train")) c.train = f.train;
  if (given("--test")) c.test = f.test;
  if (given("--schedule")) c.schedule = f.schedule;
  if (given("--invariants")) c.invariants = f.invariants;
  if (given("--out")) c.out = f.out;
  if (given("--alarms")) c.alarms = f.alarms;
  if (given("--windows")) c.windows = f.windows;
  if (given("--jobs")) c.jobs = f.jobs;
  if (given("--seed")) c.seed = f.seed;
  if (given("--window-size")) c.window_size_s = f.window_size_s;
  if (given("--coalesce")) c.coalesce = f.coalesce;
  if (given("--mode")) {
    if (f.mode == "zero_alarm") {
      c.window_mode = WindowMode::zero_alarm;
    } else if (f.mode == "sigma_derivative") {
      c.window_mode = WindowMode::sigma_derivative;
    } else {
      throw Error(Errc::bad_config, "--mode must be zero_alarm or sigma_derivative");
    }
  }
  if (given("doc")) c.doc = f.doc;
  if (c.jobs < 1) throw Error(Errc::bad_config, "jobs must be >= 1");
  c.validation.seed = c.seed;
  c.simulator.plant.seed = c.seed;
  c.detector.jobs = c.jobs;
  return c;
}

const std::string& need(const std::string& value, const char* what) {
  if (value.empty()) throw Error(Errc::bad_config, std::string("no ") + what + " path given");
  return value;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(Errc::io, "cannot create output directory " + dir);
}

std::string out_path(const RunConfig& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

std::vector<dsl::Invariant> load_invariants(const std::string& path, std::ostream& err) {
  const auto parsed = dsl::parse_invariant_file(report::read_file(path));
  for (const auto& e : parsed.errors) {
    err << path << ":" << e.line_no << ": " << dsl::to_string(e.error.kind()) << ": " << e.error.what() << "\n";
  }
  if (!parsed.errors.empty()) {
    throw Error(Errc::bad_config, std::to_string(parsed.errors.size()) + " invalid invariant line(s) in " + path);
  }
  if (parsed.invariants.empty()) throw Error(Errc::bad_config, "no invariants in " + path);
  return parsed.invariants;
}

Frame load_test(const RunConfig& c) {
  Frame f = load_csv_file(need(c.test, "test"), c.ingest);
  if (!c.schedule.empty()) f.set_cases(load_schedule_file(c.schedule));
  return f;
}

std::string invariants_text(const std::vector<dsl::Invariant>& invs) {
  std::string s;
  for (const auto& inv : invs) s += dsl::format_invariant(inv) + "\n";
  return s;
}

// ---------------------------------------------------------------------------

int cmd_parse(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto parsed = dsl::parse_invariant_file(report::read_file(f.parse_file));
  for (const auto& inv : parsed.invariants) out << dsl::format_invariant(inv) << "\n";
  for (const auto& e : parsed.errors) {
    err << f.parse_file << ":" << e.line_no << ": " << dsl::to_string(e.error.kind()) << ": " << e.error.what()
        << "\n";
  }
  return parsed.errors.empty() ? kExitOk : kExitUsage;
}

int cmd_validate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Frame train = load_csv_file(need(c.train, "train"), c.ingest);
  const auto invs = load_invariants(need(c.invariants, "invariants"), err);
  ensure_dir(c.out);

  auto records = score_all(train, invs, c.validation, c.jobs);
  const ClusterResult cluster = kmeans2_records(records, c.kmeans_max_iter);
  records = apply_threshold(std::move(records), cluster);
  const auto refinement = compare_sub_invariants(invs, records);

  std::vector<dsl::Invariant> accepted;
  for (std::size_t i = 0; i < invs.size(); ++i) {
    if (records[i].accepted) accepted.push_back(invs[i]);
  }
  report::write_file_atomic(out_path(c, "validation.json"), report::dump(report::validation_json(records, refinement)));
  report::write_file_atomic(out_path(c, "threshold.json"), report::dump(report::threshold_json(cluster, records)));
  report::write_file_atomic(out_path(c, "accepted.inv"), invariants_text(accepted));

  out << "tau " << cluster.tau << "\n";
  for (const auto& r : records) {
    out << r.invariant_id << "\t"
        << (r.score.no_link() ? std::string("no_link") : std::to_string(*r.score.value)) << "\t"
        << (r.accepted ? "accepted" : "rejected") << "\n";
  }
  return kExitOk;
}

int cmd_optimize(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Frame train = load_csv_file(need(c.train, "train"), c.ingest);
  const auto invs = load_invariants(need(c.invariants, "invariants"), err);
  ensure_dir(c.out);

  std::map<std::string, WindowChoice> choices;
  for (const auto& inv : invs) {
    const auto choice = optimize_window(train, inv, c.detector, c.window_mode);
    if (!choice.warning.empty()) err << inv.id << ": " << choice.warning << "\n";
    out << inv.id << "\t" << choice.size_s << "\n";
    choices[inv.id] = choice;
  }
  report::write_file_atomic(out_path(c, "windows.json"), report::dump(report::windows_json(choices, c.window_mode)));
  return kExitOk;
}

int cmd_detect(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Frame test = load_test(c);
  const auto invs = load_invariants(need(c.invariants, "invariants"), err);
  std::optional<Frame> train;
  if (c.detector.stats_source == StatsSource::provided) train = load_csv_file(need(c.train, "train"), c.ingest);

  std::map<std::string, double> sizes;
  if (!c.windows.empty()) sizes = report::windows_from_json(report::json::parse(report::read_file(c.windows), nullptr, false));
  std::vector<DetectionJob> jobs;
  for (const auto& inv : invs) {
    double w = c.window_size_s;
    if (auto it = sizes.find(inv.id); it != sizes.end()) w = it->second;
    if (!(w > 0.0)) throw Error(Errc::bad_config, "no window size for invariant '" + inv.id + "'");
    jobs.push_back({inv, w});
  }
  ensure_dir(c.out);
  ensure_dir(out_path(c, "traces"));

  const auto result = detect_all(test, jobs, c.detector, train ? &*train : nullptr);
  report::write_file_atomic(out_path(c, "alarms.json"), report::dump(report::alarms_json(result.segments)));
  if (c.coalesce) {
    const auto merged = merge_segments(result.segments, 0.0);
    report::write_file_atomic(out_path(c, "alarms_coalesced.json"), report::dump(report::alarms_json(merged)));
  }
  for (const auto& t : result.traces) {
    std::ostringstream csv;
    report::write_trace_csv(csv, t);
    report::write_file_atomic(out_path(c, "traces/" + t.invariant_id + ".csv"), csv.str());
  }
  out << result.segments.size() << " alarm segment(s)\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& c, const Flags& f, std::ostream& out) {
  if (!f.case_counts.empty()) {
    std::vector<std::size_t> n;
    std::stringstream ss(f.case_counts);
    for (std::string tok; std::getline(ss, tok, ',');) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(tok, &used);
        if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
        n.push_back(static_cast<std::size_t>(v));
      } catch (const std::exception&) {
        throw Error(Errc::bad_config, "--case-counts expects tp,fp,fn");
      }
    }
    if (n.size() != 3) throw Error(Errc::bad_config, "--case-counts expects tp,fp,fn");
    const auto m = case_metrics_from_counts(n[0], n[1], n[2]);
    const report::json j = {{"tp_cases", m.tp_cases}, {"fp_segments", m.fp_segments}, {"fn_cases", m.fn_cases},
                            {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"csi", m.csi}};
    out << report::dump(j);
    return kExitOk;
  }

  const Frame test = load_test(c);
  const std::string alarms_path = c.alarms.empty() ? out_path(c, "alarms.json") : c.alarms;
  const auto doc = report::json::parse(report::read_file(alarms_path), nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::bad_config, "alarms file is not JSON: " + alarms_path);
  const auto segments = report::alarms_from_json(doc);
  ensure_dir(c.out);

  const CorrectionConfig corr{c.evaluation.tail_forgiveness, c.evaluation.long_attack_credit,
                              c.evaluation.window_size_s};
  const auto rep = evaluate(test, segments, corr);
  report::write_file_atomic(out_path(c, "evaluation.json"), report::dump(report::evaluation_json(rep, segments)));
  out << "case precision " << rep.cases.precision << " recall " << rep.cases.recall << " f1 " << rep.cases.f1 << "\n"
      << "sample raw precision " << rep.raw.precision << " recall " << rep.raw.recall << "\n"
      << "sample corrected precision " << rep.corrected.precision << " recall " << rep.corrected.recall << "\n";
  return kExitOk;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  const auto& s = c.simulator;
  const double period = s.plant.period_s;
  if (!(s.train_duration_s >= 10.0 * period) || !(s.test_duration_s >= 10.0 * period)) {
    throw Error(Errc::bad_config, "train and test durations must cover at least 10 periods");
  }
  const Index n_train = static_cast<Index>(std::floor(s.train_duration_s / period + 1e-9));
  const double test_origin = s.plant.t0 + static_cast<double>(n_train) * period;

  std::vector<AttackScript> scripts;
  for (const auto& text : s.attacks) {
    AttackScript a = parse_attack_script(text, test_origin);
    if (a.start < test_origin) throw Error(Errc::bad_script, "attack '" + text + "' starts before the test split");
    scripts.push_back(std::move(a));
  }
  const Frame all = simulate_scenario(s.plant, static_cast<double>(n_train) * period + s.test_duration_s, scripts);
  const Frame train = slice(all, 0, n_train);
  const Frame test = slice(all, n_train, all.size());

  ensure_dir(c.out);
  std::ostringstream a, b, d;
  write_csv(a, train);
  write_csv(b, test);
  write_schedule(d, test.cases());
  report::write_file_atomic(out_path(c, "train.csv"), a.str());
  report::write_file_atomic(out_path(c, "test.csv"), b.str());
  report::write_file_atomic(out_path(c, "schedule.csv"), d.str());
  out << "train " << train.size() << " samples, test " << test.size() << " samples, " << test.cases().size()
      << " attack case(s)\n";
  return kExitOk;
}

int cmd_prompt(const RunConfig& c, const Flags& f, std::ostream& out, std::ostream& err) {
  const std::string doc = report::read_file(need(c.doc, "documentation"));
  const std::string prompt = render_prompt(doc, c.prompt).text();
  ensure_dir(c.out);
  report::write_file_atomic(out_path(c, "prompt.txt"), prompt);
  if (!f.send) {
    out << out_path(c, "prompt.txt") << "\n";
    return kExitOk;
  }
  const std::string reply = fetch_completion(prompt, c.llm);
  report::write_file_atomic(out_path(c, "reply.txt"), reply);
  const auto ex = parse_llm_output(reply);
  for (const auto& r : ex.rejects) err << "reply:" << r.line_no << ": " << r.reason << "\n";
  report::write_file_atomic(out_path(c, "extracted.inv"), invariants_text(ex.invariants));
  out << ex.invariants.size() << " invariant(s), " << ex.rejects.size() << " rejected\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Physical-invariant validation and anomaly detection"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* s) {
    s->add_option("-c,--config", f.config, "TOML run configuration");
    s->add_option("--jobs", f.jobs, "worker threads");
    s->add_option("--out", f.out, "output directory");
  };
  auto data = [&](CLI::App* s) {
    s->add_option("--train", f.train, "training CSV");
    s->add_option("--test", f.test, "test CSV");
    s->add_option("--schedule", f.schedule, "attack schedule CSV");
    s->add_option("--invariants", f.invariants, "invariant file");
  };

  auto* parse = app.add_subcommand("parse", "parse an invariant file and print canonical forms");
  parse->add_option("file", f.parse_file)->required();

  auto* validate = app.add_subcommand("validate", "score invariants and pick the acceptance threshold");
  common(validate);
  data(validate);
  validate->add_option("--seed", f.seed, "permutation seed");

  auto* optimize = app.add_subcommand("optimize", "choose a window size per invariant");
  common(optimize);
  data(optimize);
  optimize->add_option("--mode", f.mode, "zero_alarm or sigma_derivative");

  auto* detect = app.add_subcommand("detect", "scan the test data and emit alarm segments");
  common(detect);
  data(detect);
  detect->add_option("--windows", f.windows, "windows.json from optimize");
  detect->add_option("--window-size", f.window_size_s, "window size in seconds for every invariant");
  detect->add_flag("--coalesce", f.coalesce, "also merge segments across invariants");

  auto* evaluate = app.add_subcommand("evaluate", "score alarms against the ground truth");
  common(evaluate);
  data(evaluate);
  evaluate->add_option("--alarms", f.alarms, "alarms.json");
  evaluate->add_option("--case-counts", f.case_counts, "tp,fp,fn: print case metrics for raw counts");

  auto* simulate = app.add_subcommand("simulate", "generate a labelled two-tank dataset");
  common(simulate);
  simulate->add_option("--seed", f.seed, "simulation seed");

  auto* prompt = app.add_subcommand("prompt", "render the extraction prompt");
  common(prompt);
  prompt->add_option("doc", f.doc, "documentation markdown");
  prompt->add_flag("--send", f.send, "send to the configured endpoint and parse the reply");

  std::vector<const char*> argv{"invar"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (parse->parsed()) return cmd_parse(f, out, err);
    const CLI::App* sub = app.get_subcommands().front();
    const RunConfig c = resolve(f, *sub);
    if (validate->parsed()) return cmd_validate(c, out, err);
    if (optimize->parsed()) return cmd_optimize(c, out, err);
    if (detect->parsed()) return cmd_detect(c, out, err);
    if (evaluate->parsed()) return cmd_evaluate(c, f, out);
    if (simulate->parsed()) return cmd_simulate(c, out);
    if (prompt->parsed()) return cmd_prompt(c, f, out, err);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == Errc::io ? kExitIo : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace invar::cli
