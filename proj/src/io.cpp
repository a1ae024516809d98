#include "nrl/io.hpp"

#include <zlib.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "nrl/error.hpp"

namespace nrl {

using json = nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + tmp + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    require(static_cast<bool>(out), ErrorCode::kIo, "write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::kIo, "cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt(double v) { return format_double(v); }
template <typename I>
std::string fmt_int(I v) {
  return std::to_string(v);
}

}  // namespace

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) out += ',';
      out += csv_field(cells[k]);
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

CsvTable sweep_table(const std::vector<SweepResult>& results) {
  CsvTable t;
  t.header = {"config_id", "n",         "data_seed",   "init_seed",   "grid_index", "scale",
              "c_tilde",   "c_ratio",   "gen_error",   "gen_rmse",    "branch",     "q1_distance",
              "q2_distance", "recovered", "stop_reason", "final_loss", "iters_used", "error"};
  for (const auto& r : results)
    t.rows.push_back({r.config_id, fmt_int(r.n), fmt_int(r.data_seed), fmt_int(r.init_seed), fmt_int(r.grid_index),
                      fmt(r.scale), fmt(r.c_tilde), fmt(r.c_ratio), fmt(r.gen_error), fmt(std::sqrt(r.gen_error)),
                      to_string(r.branch), fmt(r.q1_distance), fmt(r.q2_distance), r.recovered ? "1" : "0",
                      r.error.empty() ? to_string(r.stop_reason) : "error", fmt(r.final_loss), fmt_int(r.iters_used),
                      r.error});
  return t;
}

CsvTable scale_summary_table(const std::vector<SweepResult>& results) {
  struct Acc {
    std::size_t cells = 0, counted = 0, recovered = 0, diverged = 0, errored = 0;
    double sum = 0.0;
  };
  std::map<std::pair<std::size_t, double>, Acc> acc;
  for (const auto& r : results) {
    auto& a = acc[{r.n, r.scale}];
    ++a.cells;
    if (!r.error.empty()) {
      ++a.errored;
      continue;
    }
    if (r.stop_reason == StopReason::kDivergence) ++a.diverged;
    if (std::isfinite(r.gen_error)) {
      a.sum += r.gen_error;
      ++a.counted;
    }
    a.recovered += r.recovered;
  }
  CsvTable t;
  t.header = {"n", "scale", "cells", "mean_gen_error", "recovered", "diverged", "errored"};
  for (const auto& [key, a] : acc)
    t.rows.push_back({fmt_int(key.first), fmt(key.second), fmt_int(a.cells),
                      fmt(a.counted ? a.sum / static_cast<double>(a.counted) : NAN), fmt_int(a.recovered),
                      fmt_int(a.diverged), fmt_int(a.errored)});
  return t;
}

CsvTable branch_table(const std::vector<SweepResult>& results) {
  CsvTable t;
  t.header = {"n", "data_seed", "grid_index", "c_tilde", "branch", "q1_distance", "q2_distance", "recovered"};
  for (const auto& r : results)
    t.rows.push_back({fmt_int(r.n), fmt_int(r.data_seed), fmt_int(r.grid_index), fmt(r.c_tilde), to_string(r.branch),
                      fmt(r.q1_distance), fmt(r.q2_distance), r.recovered ? "1" : "0"});
  return t;
}

CsvTable boundary_table(const BoundaryFit& fit) {
  CsvTable t;
  t.header = {"defined", "c_tilde_boundary", "lower", "upper", "misclassified", "used"};
  t.rows.push_back({fit.defined ? "1" : "0", fmt(fit.c_tilde_boundary), fmt(fit.lower), fmt(fit.upper),
                    fmt_int(fit.misclassified), fmt_int(fit.used)});
  return t;
}

CsvTable alignment_table(const AlignmentStudy& study) {
  CsvTable t;
  t.header = {"seed",  "scale",      "alpha_eff",    "c_ratio",      "stop_reason", "final_loss",
              "shift", "shift_iters", "sup_distance", "sup_loss_gap", "overlap_len"};
  for (const auto& tr : study.trials)
    t.rows.push_back({fmt_int(tr.seed), fmt(tr.scale), fmt(tr.alpha_eff), fmt(tr.c_ratio), to_string(tr.stop_reason),
                      fmt(tr.final_loss), fmt(tr.vs_reference.shift), fmt_int(tr.vs_reference.shift_iters),
                      fmt(tr.vs_reference.sup_distance), fmt(tr.vs_reference.sup_loss_gap),
                      fmt_int(tr.vs_reference.overlap_len)});
  return t;
}

CsvTable alignment_fit_table(const AlignmentStudy& study) {
  CsvTable t;
  t.header = {"mu1", "mu2", "top_eigenspace_dim", "rate_exponent", "fit_defined", "slope", "intercept"};
  t.rows.push_back({fmt(study.spectrum.mu1), fmt(study.spectrum.mu2), fmt_int(study.spectrum.top_eigenspace_dim),
                    fmt(study.spectrum.rate_exponent), study.fit_defined ? "1" : "0", fmt(study.slope),
                    fmt(study.intercept)});
  return t;
}

CsvTable width_summary_table(const std::vector<WidthRun>& runs) {
  CsvTable t;
  t.header = {"width", "gen_error", "final_loss", "stop_reason", "iters_used", "argmax_c", "argmax_c_rank"};
  for (const auto& r : runs)
    t.rows.push_back({fmt_int(r.width), fmt(r.gen_error), fmt(r.final_loss), to_string(r.stop_reason),
                      fmt_int(r.iters_used), fmt_int(r.argmax_c), fmt_int(r.argmax_c_rank)});
  return t;
}

CsvTable width_neuron_table(const std::vector<WidthRun>& runs) {
  CsvTable t;
  t.header = {"width", "neuron", "abs_c", "terminal_norm"};
  for (const auto& r : runs)
    for (const auto& nr : r.neurons)
      t.rows.push_back({fmt_int(nr.width), fmt_int(nr.neuron), fmt(nr.abs_c), fmt(nr.terminal_norm)});
  return t;
}

CsvTable width_output_table(const std::vector<WidthRun>& runs) {
  CsvTable t;
  t.header = {"width", "x", "output", "target"};
  for (const auto& r : runs)
    for (std::size_t k = 0; k < r.grid_x.size(); ++k)
      t.rows.push_back({fmt_int(r.width), fmt(r.grid_x[k]), fmt(r.grid_output[k]), fmt(r.grid_target[k])});
  return t;
}

namespace {

bool is_gz(const std::string& path) { return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0; }

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json record(const Snapshot& s) {
  json theta = json::array();
  for (double v : s.theta.flat()) theta.push_back(num(v));
  return {{"iter", s.iter}, {"loss", num(s.loss)}, {"theta", theta}};
}

double read_num(const json& j, const std::string& where) {
  if (j.is_null()) return NAN;
  require(j.is_number(), ErrorCode::kIo, where + ": expected a number");
  return j.get<double>();
}

}  // namespace

void save_trajectory(const Trajectory& traj, const std::string& path) {
  std::string text;
  for (const auto& s : traj.snapshots) text += record(s).dump() + "\n";
  json last = record(traj.terminal);
  last["stop_reason"] = to_string(traj.stop_reason);
  last["stride"] = traj.stride;
  text += last.dump() + "\n";
  if (!is_gz(path)) {
    write_file_atomic(path, text);
    return;
  }
  const std::string tmp = path + ".tmp";
  gzFile f = gzopen(tmp.c_str(), "wb");
  require(f != nullptr, ErrorCode::kIo, "cannot open '" + tmp + "' for writing");
  const int written = gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
  const int closed = gzclose(f);
  require(written == static_cast<int>(text.size()) && closed == Z_OK, ErrorCode::kIo, "gzip write failed: " + path);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::kIo, "cannot rename '" + tmp + "': " + ec.message());
}

Trajectory load_trajectory(const std::string& path, std::size_t d_aug) {
  require(d_aug >= 1, ErrorCode::kInvalidInput, "load_trajectory needs d_aug >= 1");
  std::string text;
  if (is_gz(path)) {
    gzFile f = gzopen(path.c_str(), "rb");
    require(f != nullptr, ErrorCode::kIo, "cannot read '" + path + "'");
    char buf[1 << 15];
    int got;
    while ((got = gzread(f, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(got));
    gzclose(f);
    require(got == 0, ErrorCode::kIo, "corrupt gzip stream in '" + path + "'");
  } else {
    text = read_file(path);
  }
  Trajectory out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<Snapshot> records;
  bool have_reason = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorCode::kIo, where + ": " + e.what());
    }
    require(j.is_object() && j.contains("iter") && j.contains("loss") && j.contains("theta"), ErrorCode::kIo,
            where + ": record needs iter, loss and theta");
    require(j["iter"].is_number_integer(), ErrorCode::kIo, where + ": iter must be an integer");
    require(j["theta"].is_array(), ErrorCode::kIo, where + ": theta must be an array");
    Vec flat;
    for (const auto& v : j["theta"]) flat.push_back(read_num(v, where));
    require(!flat.empty() && flat.size() % (d_aug + 1) == 0, ErrorCode::kIo,
            where + ": theta length is not a multiple of d_aug + 1");
    records.push_back({j["iter"].get<std::int64_t>(), NetworkParams(flat.size() / (d_aug + 1), d_aug, flat),
                       read_num(j["loss"], where)});
    if (j.contains("stop_reason")) {
      require(j["stop_reason"].is_string(), ErrorCode::kIo, where + ": stop_reason must be a string");
      try {
        out.stop_reason = stop_reason_from_string(j["stop_reason"].get<std::string>());
      } catch (const Error& e) {
        fail(ErrorCode::kIo, where + ": " + e.what());
      }
      if (j.contains("stride") && j["stride"].is_number_integer()) out.stride = j["stride"].get<std::int64_t>();
      have_reason = true;
    }
  }
  require(!records.empty(), ErrorCode::kIo, "'" + path + "' holds no records");
  for (std::size_t k = 1; k < records.size(); ++k)
    require(records[k].theta.size() == records[0].theta.size(), ErrorCode::kIo, path + ": inconsistent theta length");
  out.terminal = records.back();
  if (have_reason) records.pop_back();
  for (std::size_t k = 1; k < records.size(); ++k)
    require(records[k].iter > records[k - 1].iter, ErrorCode::kIo, path + ": iterations must increase");
  out.snapshots = std::move(records);
  if (out.snapshots.empty()) out.snapshots.push_back(out.terminal);
  if (!have_reason)
    out.stop_reason = out.terminal.theta.all_finite() && std::isfinite(out.terminal.loss) ? StopReason::kMaxIters
                                                                                           : StopReason::kDivergence;
  return out;
}

}  // namespace nrl
