#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tcct/config.hpp"
#include "tcct/dataio.hpp"
#include "tcct/model.hpp"

namespace tcct {

inline constexpr char kCheckpointMagic[8] = {'T', 'C', 'C', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Raw file contents: text metadata plus named little-endian f64 tensors.
struct CheckpointFile {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<StoredTensor> tensors;

  const StoredTensor* find(const std::string& name) const;
};

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file);
// Throws DataError on a missing, truncated, or foreign file.
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

// Model parameters, batch-norm statistics and standardization statistics,
// with the run configuration as metadata.
void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     model::TcctModel& model, const std::optional<data::FeatureStats>& stats);

struct LoadedCheckpoint {
  RunConfig config;
  std::unique_ptr<model::TcctModel> model;
  std::optional<data::FeatureStats> stats;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tcct
