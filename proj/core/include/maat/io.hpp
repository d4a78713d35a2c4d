#ifndef MAAT_IO_HPP
#define MAAT_IO_HPP

#include "maat/baselines.hpp"
#include "maat/common.hpp"
#include "maat/discovery.hpp"
#include "maat/dynamics.hpp"
#include "maat/eval.hpp"
#include "maat/reconstruction.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace maat {

/// Shortest exact decimal form: 17 significant digits round-trip doubles
/// bit-exactly.
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    Matrix values;
};

std::string to_csv(const std::vector<std::string>& header, const Matrix& values);
CsvTable read_csv(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// Dataset directory layout: meta.json plus per split signals.csv,
/// snapshots.csv, truth.csv.
void save_dataset(const TimeSeriesDataset& dataset, const std::filesystem::path& dir);
TimeSeriesDataset load_dataset(const std::filesystem::path& dir);

/// Plain-text kernel model document (centers, per-dimension sigma, U),
/// bit-exact round trip.
void save_kernel_model(const KernelModel& model, const std::filesystem::path& path);
KernelModel load_kernel_model(const std::filesystem::path& path);

/// estimate_<method>.csv: t, xhat_1..D, dxhat_1..D.
void save_estimate(const std::string& method, const Vector& times, const Matrix& states,
                   const Matrix& derivs, const std::filesystem::path& path);
struct Estimate {
    std::string method;
    Vector times;
    Matrix states;
    Matrix derivs;
};
Estimate load_estimate(const std::filesystem::path& path);

/// Structured text document for a discovered model (library descriptors and
/// coefficient matrix) with the printed equations appended.
void save_sparse_model(const SparseDynamicsModel& model,
                       const std::vector<std::string>& state_names,
                       const std::filesystem::path& path);
SparseDynamicsModel load_sparse_model(const std::filesystem::path& path);

/// Result tables. rows/summary/long are deterministic per seed list;
/// wall-clock timings go to a separate, explicitly non-deterministic file.
std::string rows_to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> rows_from_csv_text(const std::string& content);
std::string summary_to_csv(const std::vector<std::string>& group_keys,
                           const std::vector<SummaryRow>& summary);
std::string rows_to_long_csv(const std::vector<ResultRow>& rows);
std::string timing_to_csv(const std::vector<ResultRow>& rows);
void write_experiment_output(const ExperimentOutput& output,
                             const std::vector<std::string>& group_keys,
                             const std::filesystem::path& dir);

/// Every CLI run records its configuration, seed and tool version.
void write_manifest(const std::filesystem::path& path, const std::string& command,
                    const std::string& config_json);

} // namespace maat

#endif
