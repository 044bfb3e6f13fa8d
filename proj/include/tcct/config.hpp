#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tcct/augment.hpp"
#include "tcct/dataio.hpp"
#include "tcct/model.hpp"
#include "tcct/trainer.hpp"

namespace tcct {

// Everything a command needs, merged from a config file and overrides.
struct RunConfig {
  std::filesystem::path data_root = ".";
  std::filesystem::path manifest = "manifest.csv";
  std::vector<std::string> features;
  data::LoadOptions load;
  bool standardize = true;

  model::ModelConfig model;
  augment::SRConfig augment;
  model::LossConfig loss;
  train::TrainConfig train;

  std::filesystem::path checkpoint = "tcct.ckpt";
  std::filesystem::path metrics = "metrics.csv";

  // Throws ConfigError naming the offending key.
  void validate() const;
  // Propagates shared settings (feature count, length, fusion mode) into the
  // per-module configs. Called after every assignment.
  void sync();
};

// Flat `section.key = value` pairs; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin = "config");

// Applies one setting. Unknown keys and unparsable values throw ConfigError.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Every key with its current value, in a stable order; parse_key_values of
// the joined lines reproduces the same config.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);
std::string config_text(const RunConfig& config);

}  // namespace tcct
