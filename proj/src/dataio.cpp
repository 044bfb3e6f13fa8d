#include "tcct/dataio.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace tcct::data {

namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "Not-Engaged", "Barely-Engaged", "Engaged", "Highly-Engaged"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

Split parse_split(std::string_view text) {
  const auto t = trim(text);
  if (t == "train") return Split::Train;
  if (t == "val") return Split::Val;
  if (t == "test") return Split::Test;
  throw DataError("unknown split '" + std::string(t) + "' (expected train, val or test)");
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

int parse_label(std::string_view text) {
  const auto t = trim(text);
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (t == kLabelNames[i]) return static_cast<int>(i);
  }
  throw DataError("unknown engagement label '" + std::string(t) + "'");
}

std::string_view label_name(int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= kLabelNames.size()) {
    throw std::out_of_range("label index " + std::to_string(label) + " out of range");
  }
  return kLabelNames[static_cast<std::size_t>(label)];
}

SignalMatrix normalize_length(const SignalMatrix& raw, std::size_t target) {
  if (raw.length == 0) throw DataError("cannot normalize a signal of length 0");
  if (target == 0) throw std::invalid_argument("target length must be positive");
  SignalMatrix out(raw.features, target);
  out.feature_names = raw.feature_names;
  out.sample_id = raw.sample_id;
  for (std::size_t f = 0; f < raw.features; ++f) {
    const auto src = raw.row(f);
    auto dst = out.row(f);
    for (std::size_t t = 0; t < target; ++t) dst[t] = src[t % raw.length];
  }
  return out;
}

SignalMatrix read_sample_csv(const std::filesystem::path& file,
                             const std::vector<std::string>& features) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open sample file " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("sample file " + file.string() + " is empty");
  const auto header = split_csv(line);
  std::vector<std::size_t> columns;
  columns.reserve(features.size());
  for (const auto& name : features) {
    std::size_t found = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) {
        found = c;
        break;
      }
    }
    if (found == header.size()) {
      throw FeatureMismatchError("feature '" + name + "' not present in " + file.string());
    }
    columns.push_back(found);
  }

  std::vector<std::vector<double>> rows(features.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " columns, found " +
                      std::to_string(cells.size()));
    }
    for (std::size_t i = 0; i < columns.size(); ++i) {
      double v = 0.0;
      if (!parse_double(cells[columns[i]], v)) {
        throw DataError(file.string() + ":" + std::to_string(line_no) + ": missing or invalid value for '" +
                        features[i] + "'");
      }
      rows[i].push_back(v);
    }
  }
  const std::size_t length = rows.empty() ? 0 : rows.front().size();
  SignalMatrix m(features.size(), length);
  m.feature_names = features;
  m.sample_id = file.stem().string();
  for (std::size_t f = 0; f < features.size(); ++f) {
    std::copy(rows[f].begin(), rows[f].end(), m.row(f).begin());
  }
  return m;
}

Dataset load_dataset(const std::filesystem::path& root, const std::filesystem::path& manifest,
                     const std::vector<std::string>& features, Split split,
                     const LoadOptions& options, std::vector<std::string>* warnings) {
  if (features.empty()) throw FeatureMismatchError("feature selection is empty");
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  Dataset ds;
  ds.split = split;
  ds.features = features;

  std::string line;
  if (!std::getline(in, line)) return ds;
  const auto header = split_csv(line);
  const std::vector<std::string_view> expected{"sample_id", "path", "label", "split"};
  if (header != expected) {
    throw DataError("manifest " + manifest.string() +
                    " must start with header 'sample_id,path,label,split'");
  }
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) {
      throw DataError(manifest.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
    }
    const Split row_split = parse_split(cells[3]);
    const int label = parse_label(cells[2]);
    if (row_split != split) continue;
    const std::filesystem::path file = root / std::string(cells[1]);
    if (!std::filesystem::exists(file)) {
      warn("skipping " + std::string(cells[0]) + ": missing file " + file.string());
      continue;
    }
    SignalMatrix raw = read_sample_csv(file, features);
    raw.sample_id = std::string(cells[0]);
    if (raw.length == 0) {
      warn("skipping " + raw.sample_id + ": no frames");
      continue;
    }
    if (split == Split::Train && raw.length < options.min_train_length) {
      warn("skipping " + raw.sample_id + ": " + std::to_string(raw.length) +
           " frames is below the training minimum of " + std::to_string(options.min_train_length));
      continue;
    }
    ds.samples.push_back({normalize_length(raw, options.target_length), label});
  }
  return ds;
}

std::pair<Dataset, FeatureStats> standardize(const Dataset& dataset,
                                             const std::optional<FeatureStats>& stats) {
  const std::size_t f_count = dataset.features.size();
  FeatureStats s;
  if (stats) {
    if (stats->mean.size() != f_count || stats->stddev.size() != f_count) {
      throw FeatureMismatchError("standardization stats cover " + std::to_string(stats->mean.size()) +
                                 " features, dataset has " + std::to_string(f_count));
    }
    s = *stats;
  } else {
    s.mean.assign(f_count, 0.0);
    s.stddev.assign(f_count, 0.0);
    for (std::size_t f = 0; f < f_count; ++f) {
      double total = 0.0;
      std::size_t count = 0;
      for (const auto& smp : dataset.samples) {
        for (double v : smp.signals.row(f)) total += v;
        count += smp.signals.length;
      }
      if (count == 0) {
        s.stddev[f] = 1.0;
        continue;
      }
      const double mu = total / static_cast<double>(count);
      double ss = 0.0;
      for (const auto& smp : dataset.samples) {
        for (double v : smp.signals.row(f)) ss += (v - mu) * (v - mu);
      }
      s.mean[f] = mu;
      s.stddev[f] = std::sqrt(ss / static_cast<double>(count));
    }
  }
  Dataset out = dataset;
  for (auto& smp : out.samples) apply_standardization(smp.signals, s);
  return {std::move(out), std::move(s)};
}

void apply_standardization(SignalMatrix& matrix, const FeatureStats& stats) {
  if (stats.mean.size() != matrix.features) {
    throw FeatureMismatchError("standardization stats cover " + std::to_string(stats.mean.size()) +
                               " features, sample has " + std::to_string(matrix.features));
  }
  for (std::size_t f = 0; f < matrix.features; ++f) {
    if (stats.stddev[f] < kMinStddev) continue;
    const double inv = 1.0 / stats.stddev[f];
    for (double& v : matrix.row(f)) v = (v - stats.mean[f]) * inv;
  }
}

void write_sample_csv(const std::filesystem::path& file, const SignalMatrix& matrix) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  for (std::size_t f = 0; f < matrix.features; ++f) {
    if (f) out << ',';
    out << (f < matrix.feature_names.size() ? matrix.feature_names[f] : "f" + std::to_string(f));
  }
  out << '\n' << std::setprecision(17);
  for (std::size_t t = 0; t < matrix.length; ++t) {
    for (std::size_t f = 0; f < matrix.features; ++f) {
      if (f) out << ',';
      out << matrix(f, t);
    }
    out << '\n';
  }
}

void write_manifest(const std::filesystem::path& file, const std::vector<ManifestRow>& rows) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  out << "sample_id,path,label,split\n";
  for (const auto& r : rows) out << r.sample_id << ',' << r.path << ',' << r.label << ',' << r.split << '\n';
}

}  // namespace tcct::data
