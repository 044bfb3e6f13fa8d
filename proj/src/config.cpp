#include "tcct/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "tcct/errors.hpp"

namespace tcct {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError(key + ": expected " + want + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define TCCT_DOUBLE(KEY, MEMBER)                                                   \
  Field {                                                                          \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = to_double(KEY, v); }, \
        [](const RunConfig& c) { return fmt(c.MEMBER); }                          \
  }
#define TCCT_SIZE(KEY, MEMBER)                                                   \
  Field {                                                                        \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = to_size(KEY, v); }, \
        [](const RunConfig& c) { return fmt(c.MEMBER); }                        \
  }
#define TCCT_BOOL(KEY, MEMBER)                                                   \
  Field {                                                                        \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = to_bool(KEY, v); }, \
        [](const RunConfig& c) { return fmt(c.MEMBER); }                        \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"data.root", [](RunConfig& c, const std::string& v) { c.data_root = v; },
       [](const RunConfig& c) { return c.data_root.string(); }},
      {"data.manifest", [](RunConfig& c, const std::string& v) { c.manifest = v; },
       [](const RunConfig& c) { return c.manifest.string(); }},
      {"data.features", [](RunConfig& c, const std::string& v) { c.features = split(v, ','); },
       [](const RunConfig& c) { return join(c.features); }},
      TCCT_SIZE("data.length", load.target_length),
      TCCT_SIZE("data.min_train_length", load.min_train_length),
      TCCT_BOOL("data.standardize", standardize),

      TCCT_DOUBLE("wavelet.bandwidth", model.morlet.bandwidth),
      TCCT_DOUBLE("wavelet.center_frequency", model.morlet.center_frequency),
      TCCT_SIZE("wavelet.scales", model.tc.scales),
      TCCT_DOUBLE("wavelet.f_min", model.f_min),
      TCCT_DOUBLE("wavelet.f_max", model.f_max),
      TCCT_DOUBLE("wavelet.sampling_rate", model.sampling_rate),

      TCCT_SIZE("ct.filters", model.ct.temporal_filters),
      TCCT_SIZE("ct.kernel", model.ct.temporal_kernel),
      TCCT_SIZE("ct.pool_kernel", model.ct.pool_kernel),
      TCCT_SIZE("ct.pool_stride", model.ct.pool_stride),
      TCCT_SIZE("ct.embed_dim", model.ct.embed_dim),
      TCCT_SIZE("ct.heads", model.ct.heads),
      TCCT_SIZE("ct.layers", model.ct.attention_layers),
      TCCT_SIZE("ct.ff_hidden", model.ct.ff_hidden),
      TCCT_SIZE("ct.dense_hidden", model.ct.dense_hidden),
      TCCT_DOUBLE("ct.conv_dropout", model.ct.conv_dropout),
      TCCT_DOUBLE("ct.dropout", model.ct.dropout),

      TCCT_SIZE("tc.conv1_channels", model.tc.conv1_channels),
      TCCT_SIZE("tc.conv1_kernel", model.tc.conv1_kernel),
      TCCT_SIZE("tc.pool_kernel", model.tc.pool_kernel),
      TCCT_SIZE("tc.pool_stride", model.tc.pool_stride),
      TCCT_SIZE("tc.conv2_channels", model.tc.conv2_channels),
      TCCT_SIZE("tc.conv2_kernel", model.tc.conv2_kernel),
      TCCT_SIZE("tc.dense_hidden", model.tc.dense_hidden),
      TCCT_DOUBLE("tc.dropout", model.tc.dropout),

      TCCT_SIZE("augment.segments", augment.segments),

      TCCT_DOUBLE("loss.lambda", loss.lambda),
      {"loss.fusion",
       [](RunConfig& c, const std::string& v) {
         if (v == "logits") {
           c.model.fusion = model::FusionMode::Logits;
         } else if (v == "probabilities") {
           c.model.fusion = model::FusionMode::Probabilities;
         } else {
           bad_value("loss.fusion", v, "logits or probabilities");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.model.fusion == model::FusionMode::Logits ? "logits"
                                                                        : "probabilities");
       }},
      TCCT_DOUBLE("loss.fusion_init", model.fusion_init),

      TCCT_DOUBLE("train.learning_rate", train.learning_rate),
      TCCT_DOUBLE("train.beta1", train.beta1),
      TCCT_DOUBLE("train.beta2", train.beta2),
      TCCT_DOUBLE("train.epsilon", train.adam_epsilon),
      TCCT_SIZE("train.batch_size", train.batch_size),
      {"train.milestones",
       [](RunConfig& c, const std::string& v) {
         std::vector<train::Milestone> out;
         for (const auto& item : split(v, ',')) {
           const auto colon = item.find(':');
           if (colon == std::string::npos) bad_value("train.milestones", v, "epoch:multiplier,...");
           out.push_back({to_size("train.milestones", trim(item.substr(0, colon))),
                          to_double("train.milestones", trim(item.substr(colon + 1)))});
         }
         c.train.scheduler = std::move(out);
       },
       [](const RunConfig& c) {
         std::vector<std::string> items;
         for (const auto& m : c.train.scheduler) items.push_back(fmt(m.epoch) + ":" + fmt(m.multiplier));
         return join(items);
       }},
      TCCT_SIZE("train.patience", train.early_stop_patience),
      TCCT_SIZE("train.max_epochs", train.max_epochs),
      {"train.seed", [](RunConfig& c, const std::string& v) { c.train.seed = to_u64("train.seed", v); },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      TCCT_BOOL("train.ct_only", train.ablation.ct_only),
      TCCT_BOOL("train.tc_only", train.ablation.tc_only),
      TCCT_BOOL("train.no_attention", train.ablation.no_attention),
      TCCT_BOOL("train.no_augmentation", train.ablation.no_augmentation),

      {"output.checkpoint", [](RunConfig& c, const std::string& v) { c.checkpoint = v; },
       [](const RunConfig& c) { return c.checkpoint.string(); }},
      {"output.metrics", [](RunConfig& c, const std::string& v) { c.metrics = v; },
       [](const RunConfig& c) { return c.metrics.string(); }},
  };
  return table;
}

#undef TCCT_DOUBLE
#undef TCCT_SIZE
#undef TCCT_BOOL

}  // namespace

void RunConfig::sync() {
  model.set_input(features.empty() ? model.ct.features : features.size(), load.target_length);
  augment.signal_length = load.target_length;
  loss.mode = model.fusion;
  loss.num_classes = model.ct.num_classes;
}

void RunConfig::validate() const {
  if (features.empty()) throw ConfigError("data.features must name at least one feature");
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (!seen.insert(f).second) throw ConfigError("data.features lists '" + f + "' twice");
  }
  if (load.target_length == 0) throw ConfigError("data.length must be >= 1");
  if (model.ct.features != features.size() || model.ct.signal_length != load.target_length) {
    throw ConfigError("model input does not match data.features/data.length");
  }
  if (!(model.fusion_init > 0.0)) throw ConfigError("loss.fusion_init must be > 0");
  train.validate();
  try {
    model.validate();
    augment.validate();
    loss.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin) {
  std::map<std::string, std::string> out;
  std::stringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(number) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(config, value);
      config.sync();
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig config;
  for (const auto& [k, v] : parse_key_values(buf.str(), file.string())) apply_setting(config, k, v);
  for (const auto& [k, v] : overrides) apply_setting(config, k, v);
  // Relative data paths are taken from the config file's directory.
  const auto base = file.parent_path();
  if (config.data_root.is_relative()) config.data_root = base / config.data_root;
  if (config.manifest.is_relative()) config.manifest = config.data_root / config.manifest;
  config.validate();
  return config;
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(config));
  return out;
}

std::string config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace tcct
