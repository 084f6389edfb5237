#pragma once

// Plain-text file formats: CSV tables (17 significant digits), the dataset
// CSV plus its sidecar, per-epoch training logs, and parameter checkpoints.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nlse/model.hpp"
#include "nlse/optim.hpp"
#include "nlse/physics.hpp"

namespace nlse {

std::string format_real(double value);
double parse_real(const std::string& text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::string to_csv_string(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

struct DatasetMeta {
  double beta_true = 0;
  double noise_level = 0;
  std::uint64_t seed = 0;
  std::size_t count = 0;
};

// Writes `path` (header x,t,u,v) and the sidecar `path` + ".meta" (key=value lines).
void write_dataset(const std::filesystem::path& path, std::span<const FieldSample<double>> samples,
                   const DatasetMeta& meta);
std::vector<FieldSample<double>> read_dataset(const std::filesystem::path& path);
DatasetMeta read_dataset_meta(const std::filesystem::path& path);

// Streams one row per epoch: epoch,beta,data_loss,physics_loss,total_loss.
class HistoryWriter {
 public:
  explicit HistoryWriter(const std::filesystem::path& path);
  void append(long epoch, double beta, const LossBreakdown<double>& loss);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

CsvTable history_table(const RunResult& result);

struct CheckpointInfo {
  std::uint64_t seed = 0;
  double beta_true = 0;
  double noise_level = 0;
  long epoch = 0;
};

// Text checkpoint: a header recording the topology and run metadata, then
// one value per line in layer order (row-major weights, then biases), then beta.
void save_checkpoint(const std::filesystem::path& path, const MlpParams<double>& params, const CheckpointInfo& info);

struct Checkpoint {
  MlpParams<double> params;
  CheckpointInfo info;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nlse
