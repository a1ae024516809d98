#pragma once

#include <string>
#include <vector>

#include "nrl/dynamics.hpp"
#include "nrl/experiments.hpp"

namespace nrl {

// Shortest decimal string that parses back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double v);

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const;
};

CsvTable sweep_table(const std::vector<SweepResult>& results);
// Per (n, scale): cell count, mean gen error, recovered and diverged counts.
CsvTable scale_summary_table(const std::vector<SweepResult>& results);
CsvTable branch_table(const std::vector<SweepResult>& results);
CsvTable boundary_table(const BoundaryFit& fit);
CsvTable alignment_table(const AlignmentStudy& study);
CsvTable alignment_fit_table(const AlignmentStudy& study);
CsvTable width_summary_table(const std::vector<WidthRun>& runs);
CsvTable width_neuron_table(const std::vector<WidthRun>& runs);
CsvTable width_output_table(const std::vector<WidthRun>& runs);

// Newline-delimited JSON, one {"iter","loss","theta"} record per snapshot and
// the terminal state last (with "stop_reason"). Non-finite numbers are null.
// Gzip-compressed when the path ends in ".gz".
void save_trajectory(const Trajectory& traj, const std::string& path);
// d_aug fixes the neuron block size; m is inferred from the theta length.
Trajectory load_trajectory(const std::string& path, std::size_t d_aug);

}  // namespace nrl
