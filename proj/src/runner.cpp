#include "nrl/runner.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <set>

#include "json.hpp"
#include "nrl/error.hpp"
#include "nrl/io.hpp"

#ifndef NRL_VERSION_STRING
#define NRL_VERSION_STRING "0.0.0"
#endif

namespace nrl {

using json = nlohmann::json;

namespace {

struct Ctx {
  std::string where;

  [[noreturn]] void bad(const std::string& field, const std::string& msg) const {
    fail(ErrorCode::kConfig, where + ": field '" + field + "': " + msg);
  }

  const json& obj(const json& j, const std::string& field) const {
    if (!j.is_object()) bad(field, "expected an object");
    return j;
  }

  double number(const json& j, const std::string& field) const {
    if (!j.is_number()) bad(field, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) bad(field, "must be finite");
    return v;
  }

  std::int64_t integer(const json& j, const std::string& field) const {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) {
      const double v = j.get<double>();
      if (std::floor(v) == v && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
    }
    bad(field, "expected an integer");
  }

  std::size_t count(const json& j, const std::string& field) const {
    const auto v = integer(j, field);
    if (v < 0) bad(field, "must be >= 0");
    return static_cast<std::size_t>(v);
  }

  bool boolean(const json& j, const std::string& field) const {
    if (!j.is_boolean()) bad(field, "expected true or false");
    return j.get<bool>();
  }

  std::string string(const json& j, const std::string& field) const {
    if (!j.is_string()) bad(field, "expected a string");
    return j.get<std::string>();
  }

  Vec numbers(const json& j, const std::string& field) const {
    if (!j.is_array()) bad(field, "expected an array of numbers");
    Vec out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], field + "[" + std::to_string(k) + "]"));
    return out;
  }

  std::vector<std::size_t> counts(const json& j, const std::string& field) const {
    if (!j.is_array()) bad(field, "expected an array of integers");
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(count(j[k], field + "[" + std::to_string(k) + "]"));
    return out;
  }

  // [s0, s1, ...] or {"from": a, "to": b} (b exclusive)
  std::vector<std::uint64_t> seeds(const json& j, const std::string& field) const {
    std::vector<std::uint64_t> out;
    if (j.is_object()) {
      for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "from" && it.key() != "to") bad(field + "." + it.key(), "unknown key");
      if (!j.contains("from") || !j.contains("to")) bad(field, "seed ranges need 'from' and 'to'");
      const auto a = count(j["from"], field + ".from"), b = count(j["to"], field + ".to");
      if (b <= a) bad(field, "'to' must exceed 'from'");
      for (auto s = a; s < b; ++s) out.push_back(s);
      return out;
    }
    for (auto c : counts(j, field)) out.push_back(c);
    return out;
  }

  void only(const json& j, const std::string& prefix, std::initializer_list<const char*> keys) const {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* k : keys) ok = ok || it.key() == k;
      if (!ok) bad(prefix + it.key(), "unknown key");
    }
  }
};

ExperimentConfig parse_one(const json& j, const Ctx& c) {
  c.obj(j, "experiment");
  c.only(j, "", {"id", "kind", "model", "target", "sampling", "init", "train", "eval", "recovery_threshold",
                 "classify_tol", "ratio_grid_points", "converged_loss", "base_ratio", "widths", "output_grid_points",
                 "ratio_start", "ratio_step", "split_by_n", "save_trajectories", "paper_scale", "note"});
  ExperimentConfig e;
  if (!j.contains("id")) c.bad("id", "missing");
  e.id = c.string(j["id"], "id");
  if (!j.contains("kind")) c.bad("kind", "missing");
  try {
    e.kind = experiment_kind_from_string(c.string(j["kind"], "kind"));
  } catch (const Error& err) {
    c.bad("kind", err.what());
  }
  if (e.kind == ExperimentKind::kHighDim) e.sampling.kind = SamplingPlan::Kind::kUniformCube;

  if (j.contains("model")) {
    const auto& m = c.obj(j["model"], "model");
    c.only(m, "model.", {"m", "d", "bias", "activation"});
    if (m.contains("m")) e.model.m = c.count(m["m"], "model.m");
    if (m.contains("d")) e.model.d = c.count(m["d"], "model.d");
    if (m.contains("bias")) e.model.bias = c.boolean(m["bias"], "model.bias");
    if (m.contains("activation")) e.model.activation = c.string(m["activation"], "model.activation");
  }
  e.target_w0.assign(e.model.d_aug(), 1.0);
  e.target_activation = e.model.activation;
  if (j.contains("target")) {
    const auto& t = c.obj(j["target"], "target");
    c.only(t, "target.", {"a0", "w0", "activation"});
    if (t.contains("a0")) e.target_a0 = c.number(t["a0"], "target.a0");
    if (t.contains("w0")) e.target_w0 = c.numbers(t["w0"], "target.w0");
    if (t.contains("activation")) e.target_activation = c.string(t["activation"], "target.activation");
  }
  if (j.contains("sampling")) {
    const auto& s = c.obj(j["sampling"], "sampling");
    c.only(s, "sampling.", {"kind", "lo", "hi", "n_values", "data_seeds"});
    if (s.contains("kind")) {
      try {
        e.sampling.kind = sampling_kind_from_string(c.string(s["kind"], "sampling.kind"));
      } catch (const Error& err) {
        c.bad("sampling.kind", err.what());
      }
    }
    if (s.contains("lo")) e.sampling.lo = c.number(s["lo"], "sampling.lo");
    if (s.contains("hi")) e.sampling.hi = c.number(s["hi"], "sampling.hi");
    if (s.contains("n_values")) e.n_values = c.counts(s["n_values"], "sampling.n_values");
    if (s.contains("data_seeds")) e.data_seeds = c.seeds(s["data_seeds"], "sampling.data_seeds");
  }
  e.sampling.d = e.model.d;
  e.sampling.bias = e.model.bias;
  if (j.contains("init")) {
    const auto& i = c.obj(j["init"], "init");
    c.only(i, "init.", {"scale", "scales", "seeds", "ratio_override"});
    if (i.contains("scale")) e.scales = {c.number(i["scale"], "init.scale")};
    if (i.contains("scales")) e.scales = c.numbers(i["scales"], "init.scales");
    if (i.contains("seeds")) e.init_seeds = c.seeds(i["seeds"], "init.seeds");
    if (i.contains("ratio_override") && !i["ratio_override"].is_null())
      e.ratio_override = c.numbers(i["ratio_override"], "init.ratio_override");
  }
  if (j.contains("train")) {
    const auto& t = c.obj(j["train"], "train");
    c.only(t, "train.", {"learning_rate", "max_iters", "stop_loss", "record_stride", "record_budget"});
    if (t.contains("learning_rate")) e.train.learning_rate = c.number(t["learning_rate"], "train.learning_rate");
    if (t.contains("max_iters")) e.train.max_iters = c.integer(t["max_iters"], "train.max_iters");
    if (t.contains("stop_loss")) e.train.stop_loss = c.number(t["stop_loss"], "train.stop_loss");
    if (t.contains("record_stride")) e.train.record_stride = c.integer(t["record_stride"], "train.record_stride");
    if (t.contains("record_budget")) e.train.record_budget = c.count(t["record_budget"], "train.record_budget");
  }
  e.eval.kind = e.model.d == 1 ? EvalPlan::Kind::kGrid : EvalPlan::Kind::kUniformCube;
  if (j.contains("eval")) {
    const auto& v = c.obj(j["eval"], "eval");
    c.only(v, "eval.", {"kind", "points", "lo", "hi", "seed"});
    if (v.contains("kind")) {
      try {
        e.eval.kind = eval_kind_from_string(c.string(v["kind"], "eval.kind"));
      } catch (const Error& err) {
        c.bad("eval.kind", err.what());
      }
    }
    if (v.contains("points")) e.eval.points = c.count(v["points"], "eval.points");
    if (v.contains("lo")) e.eval.lo = c.number(v["lo"], "eval.lo");
    if (v.contains("hi")) e.eval.hi = c.number(v["hi"], "eval.hi");
    if (v.contains("seed")) e.eval.seed = c.count(v["seed"], "eval.seed");
  }
  e.eval.bias = e.model.bias;
  if (j.contains("recovery_threshold")) e.recovery_threshold = c.number(j["recovery_threshold"], "recovery_threshold");
  if (j.contains("classify_tol")) e.classify_tol = c.number(j["classify_tol"], "classify_tol");
  if (j.contains("ratio_grid_points")) e.ratio_grid_points = c.count(j["ratio_grid_points"], "ratio_grid_points");
  if (j.contains("converged_loss")) e.converged_loss = c.number(j["converged_loss"], "converged_loss");
  if (j.contains("base_ratio")) e.base_ratio = c.number(j["base_ratio"], "base_ratio");
  if (j.contains("widths")) e.widths = c.counts(j["widths"], "widths");
  if (j.contains("output_grid_points")) e.output_grid_points = c.count(j["output_grid_points"], "output_grid_points");
  if (j.contains("ratio_start")) e.ratio_start = c.number(j["ratio_start"], "ratio_start");
  if (j.contains("ratio_step")) e.ratio_step = c.number(j["ratio_step"], "ratio_step");
  if (j.contains("split_by_n")) e.split_by_n = c.boolean(j["split_by_n"], "split_by_n");
  if (j.contains("save_trajectories")) e.save_trajectories = c.boolean(j["save_trajectories"], "save_trajectories");
  e.validate();
  return e;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(ErrorCode::kConfig, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_experiment(const std::string& json_text) {
  return parse_one(parse_json(json_text), Ctx{"experiment"});
}

RunConfig parse_run_config(const std::string& json_text, bool paper_scale) {
  const json doc = parse_json(json_text);
  Ctx top{"config"};
  if (!doc.is_object()) top.bad("(root)", "expected an object with an 'experiments' array");
  top.only(doc, "", {"experiments", "note"});
  if (!doc.contains("experiments") || !doc["experiments"].is_array())
    top.bad("experiments", "expected an array");
  if (doc["experiments"].empty()) top.bad("experiments", "the experiment list is empty");
  RunConfig out;
  std::set<std::string> ids;
  for (std::size_t k = 0; k < doc["experiments"].size(); ++k) {
    json e = doc["experiments"][k];
    std::string label = "experiments[" + std::to_string(k) + "]";
    if (e.is_object() && e.contains("id") && e["id"].is_string()) label += " (" + e["id"].get<std::string>() + ")";
    Ctx c{label};
    if (paper_scale && e.is_object() && e.contains("paper_scale")) {
      if (!e["paper_scale"].is_object()) c.bad("paper_scale", "expected an object");
      const json patch = e["paper_scale"];
      e.erase("paper_scale");
      e.merge_patch(patch);
    }
    try {
      out.experiments.push_back(parse_one(e, c));
    } catch (const Error& err) {
      const std::string msg = err.what();
      fail(ErrorCode::kConfig, msg.rfind(label, 0) == 0 ? msg : label + ": " + msg);
    }
    if (!ids.insert(out.experiments.back().id).second) c.bad("id", "duplicate id '" + out.experiments.back().id + "'");
  }
  return out;
}

RunConfig load_run_config(const std::string& path, bool paper_scale) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  try {
    return parse_run_config(text, paper_scale);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, path + ": " + e.what());
  }
}

bool RunReport::any_error() const {
  if (errored_cells > 0) return true;
  for (const auto& e : experiments)
    if (e.status.rfind("error", 0) == 0) return true;
  return false;
}

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Writer {
  std::filesystem::path dir;
  ExperimentOutcome& outcome;

  void csv(const std::string& name, const CsvTable& table) {
    write_file_atomic((dir / name).string(), table.str());
    outcome.files.push_back(name);
  }
};

void count_cells(const std::vector<SweepResult>& rs, ExperimentOutcome& o) {
  for (const auto& r : rs) {
    if (!r.error.empty()) ++o.errored_cells;
    else if (r.stop_reason == StopReason::kDivergence) ++o.diverged_cells;
  }
}

void write_sweep(const ExperimentConfig& cfg, const std::vector<SweepResult>& rs, Writer& w) {
  if (!cfg.split_by_n) {
    w.csv(cfg.id + ".csv", sweep_table(rs));
    return;
  }
  for (auto n : cfg.n_values) {
    std::vector<SweepResult> part;
    for (const auto& r : rs)
      if (r.n == n) part.push_back(r);
    w.csv(cfg.id + "_n" + std::to_string(n) + ".csv", sweep_table(part));
  }
  w.csv(cfg.id + "_branch.csv", branch_table(rs));
}

std::string recovered_summary(const std::vector<SweepResult>& rs) {
  std::size_t rec = 0;
  for (const auto& r : rs) rec += r.recovered;
  return std::to_string(rs.size()) + " cells, " + std::to_string(rec) + " recovered";
}

void run_one(const ExperimentConfig& cfg, const RunOptions& opts, Writer& w, const LogFn& log) {
  auto& o = w.outcome;
  switch (cfg.kind) {
    case ExperimentKind::kScaleSweep: {
      const auto rs = run_scale_sweep(cfg, opts);
      count_cells(rs, o);
      w.csv(cfg.id + ".csv", sweep_table(rs));
      w.csv(cfg.id + "_summary.csv", scale_summary_table(rs));
      if (log) log(cfg.id + ": " + recovered_summary(rs));
      break;
    }
    case ExperimentKind::kRatioSweep:
    case ExperimentKind::kHighDim: {
      const auto rs = cfg.kind == ExperimentKind::kHighDim ? run_highdim_study(cfg, opts) : run_ratio_sweep(cfg, opts);
      count_cells(rs, o);
      write_sweep(cfg, rs, w);
      if (log) log(cfg.id + ": " + recovered_summary(rs));
      break;
    }
    case ExperimentKind::kBranchStudy: {
      const auto st = run_branch_study(cfg, opts);
      count_cells(st.runs, o);
      w.csv(cfg.id + ".csv", sweep_table(st.runs));
      w.csv(cfg.id + "_boundary.csv", boundary_table(st.fit));
      if (log)
        log(cfg.id + ": " + std::to_string(st.fit.used) + " converged runs classified, boundary " +
            (st.fit.defined ? format_double(st.fit.lower) + " / " + format_double(st.fit.upper) : "undefined"));
      break;
    }
    case ExperimentKind::kAlignment: {
      const auto st = run_alignment_study(cfg, opts);
      for (const auto& t : st.trials)
        if (t.stop_reason == StopReason::kDivergence) ++o.diverged_cells;
      w.csv(cfg.id + ".csv", alignment_table(st));
      w.csv(cfg.id + "_fit.csv", alignment_fit_table(st));
      if (cfg.save_trajectories)
        for (std::size_t k = 0; k < st.runs.size(); ++k) {
          const std::string name = cfg.id + "_traj" + std::to_string(k) + ".ndjson.gz";
          save_trajectory(st.runs[k], (w.dir / name).string());
          o.files.push_back(name);
        }
      if (log)
        log(cfg.id + ": " + std::to_string(st.trials.size()) + " trials, slope " +
            (st.fit_defined ? format_double(st.slope) : "undefined") + ", predicted exponent " +
            format_double(st.spectrum.rate_exponent));
      break;
    }
    case ExperimentKind::kWidthStudy: {
      const auto runs = run_width_study(cfg, opts);
      for (const auto& r : runs)
        if (r.stop_reason == StopReason::kDivergence) ++o.diverged_cells;
      w.csv(cfg.id + ".csv", width_summary_table(runs));
      w.csv(cfg.id + "_neurons.csv", width_neuron_table(runs));
      w.csv(cfg.id + "_output.csv", width_output_table(runs));
      if (log) log(cfg.id + ": " + std::to_string(runs.size()) + " widths");
      break;
    }
  }
}

}  // namespace

RunReport run_experiments(const RunConfig& config, const std::string& config_path, const std::string& out_dir,
                          const RunOptions& opts, const LogFn& log) {
  const std::string started = utc_now();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create output directory '" + out_dir + "': " + ec.message());
  RunReport report;
  for (const auto& cfg : config.experiments) {
    ExperimentOutcome o;
    o.id = cfg.id;
    o.kind = to_string(cfg.kind);
    Writer w{out_dir, o};
    try {
      run_one(cfg, opts, w, log);
      if (o.errored_cells > 0)
        o.status = "error: " + std::to_string(o.errored_cells) + " cells errored";
      else if (o.diverged_cells > 0)
        o.status = "diverged-cells: " + std::to_string(o.diverged_cells);
      else
        o.status = "ok";
    } catch (const std::exception& e) {
      o.status = std::string("error: ") + e.what();
      ++o.errored_cells;
    }
    if (log) log(cfg.id + ": " + o.status);
    report.errored_cells += o.errored_cells;
    report.experiments.push_back(std::move(o));
  }

  json manifest = {{"config_path", config_path},
                   {"output_dir", out_dir},
                   {"started_at", started},
                   {"finished_at", utc_now()},
                   {"artifact_version", NRL_VERSION_STRING},
                   {"seed_offset", opts.seed_offset},
                   {"experiments", json::array()}};
  for (const auto& o : report.experiments) {
    json files = json::array();
    for (const auto& f : o.files)
      if (std::filesystem::exists(std::filesystem::path(out_dir) / f)) files.push_back(f);
    manifest["experiments"].push_back({{"id", o.id},
                                       {"kind", o.kind},
                                       {"status", o.status},
                                       {"diverged_cells", o.diverged_cells},
                                       {"errored_cells", o.errored_cells},
                                       {"files", files}});
  }
  write_file_atomic((std::filesystem::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  return report;
}

}  // namespace nrl
