#include <doctest.h>

#include <cmath>
#include <fstream>

#include "support/tempdir.hpp"
#include "tcct/dataio.hpp"
#include "tcct/errors.hpp"
#include "tcct/ops.hpp"

using namespace tcct;
using namespace tcct::data;
using tcct::testing::TempDir;

namespace {

SignalMatrix counting(std::size_t features, std::size_t length) {
  SignalMatrix m(features, length);
  for (std::size_t f = 0; f < features; ++f)
    for (std::size_t t = 0; t < length; ++t) m(f, t) = static_cast<double>(t) + 1000.0 * f;
  return m;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Columns deliberately out of the order the tests request them in.
void write_frames(const std::filesystem::path& p, std::size_t frames) {
  std::ofstream out(p);
  out << "frame,pose_Ry,AU01_r,pose_Rx\n";
  for (std::size_t t = 0; t < frames; ++t) out << t << "," << 2.0 * t << "," << -1.0 << "," << 0.5 * t << "\n";
}

}  // namespace

TEST_SUITE("dataio") {

TEST_CASE("labels map to ordered indices") {
  CHECK(parse_label("Not-Engaged") == 0);
  CHECK(parse_label("Barely-Engaged") == 1);
  CHECK(parse_label("Engaged") == 2);
  CHECK(parse_label("Highly-Engaged") == 3);
  CHECK_THROWS_AS(parse_label("Bored"), DataError);
  for (int k = 0; k < 4; ++k) CHECK(parse_label(label_name(k)) == k);
}

TEST_CASE("normalize_length trims, keeps and tiles") {
  const auto trimmed = normalize_length(counting(2, 300));
  CHECK(trimmed.length == 280);
  for (std::size_t t = 0; t < 280; ++t) CHECK(trimmed(1, t) == 1000.0 + t);

  const auto same = counting(2, 280);
  CHECK(normalize_length(same).data == same.data);

  const auto tiled = normalize_length(counting(1, 100));
  for (std::size_t i = 0; i < 280; ++i) CHECK(tiled(0, i) == static_cast<double>(i % 100));

  for (std::size_t len : {1, 7, 84, 279, 281, 500}) {
    const auto once = normalize_length(counting(2, len));
    CHECK(normalize_length(once).data == once.data);
  }
  CHECK_THROWS_AS(normalize_length(SignalMatrix(2, 0)), DataError);
}

TEST_CASE("load_dataset selects columns in request order and applies the length policy") {
  TempDir dir("tcct_dataio");
  write_frames(dir / "a.csv", 280);
  write_frames(dir / "b.csv", 300);
  write_frames(dir / "c.csv", 150);
  write_frames(dir / "short.csv", 50);
  write_text(dir / "manifest.csv",
             "sample_id,path,label,split\n"
             "a,a.csv,Engaged,train\n"
             "b,b.csv,Not-Engaged,train\n"
             "c,c.csv,Highly-Engaged,train\n"
             "gone,missing.csv,Engaged,train\n"
             "tiny,short.csv,Engaged,train\n"
             "v,short.csv,Barely-Engaged,val\n");
  std::vector<std::string> warnings;
  const auto ds = load_dataset(dir.path(), dir / "manifest.csv", {"pose_Rx", "pose_Ry"}, Split::Train,
                               {}, &warnings);
  REQUIRE(ds.size() == 3);
  CHECK(warnings.size() == 2);
  CHECK(ds.samples[0].label == 2);
  CHECK(ds.samples[2].label == 3);
  for (const auto& s : ds.samples) {
    CHECK(s.signals.features == 2);
    CHECK(s.signals.length == 280);
  }
  CHECK(ds.samples[0].signals(0, 10) == 5.0);
  CHECK(ds.samples[0].signals(1, 10) == 20.0);
  // c.csv is tiled: frame 160 is frame 10 again
  CHECK(ds.samples[2].signals(0, 160) == 5.0);

  const auto val = load_dataset(dir.path(), dir / "manifest.csv", {"pose_Rx"}, Split::Val);
  REQUIRE(val.size() == 1);
  CHECK(val.samples[0].signals(0, 60) == 5.0);

  CHECK_THROWS_AS(load_dataset(dir.path(), dir / "manifest.csv", {"gaze_angle_x"}, Split::Train),
                  FeatureMismatchError);
}

TEST_CASE("empty manifest and malformed input") {
  TempDir dir("tcct_dataio");
  write_text(dir / "empty.csv", "");
  CHECK(load_dataset(dir.path(), dir / "empty.csv", {"x"}, Split::Train).empty());
  write_text(dir / "header_only.csv", "sample_id,path,label,split\n");
  CHECK(load_dataset(dir.path(), dir / "header_only.csv", {"x"}, Split::Train).empty());
  write_text(dir / "bad_header.csv", "id,file,label,split\n");
  CHECK_THROWS_AS(load_dataset(dir.path(), dir / "bad_header.csv", {"x"}, Split::Train), DataError);
  write_frames(dir / "a.csv", 100);
  write_text(dir / "bad_label.csv", "sample_id,path,label,split\na,a.csv,Sleepy,train\n");
  CHECK_THROWS_AS(load_dataset(dir.path(), dir / "bad_label.csv", {"pose_Rx"}, Split::Train), DataError);
  write_text(dir / "hole.csv", "pose_Rx,pose_Ry\n1,2\n3,\n");
  CHECK_THROWS_AS(read_sample_csv(dir / "hole.csv", {"pose_Ry"}), DataError);
  CHECK_THROWS_AS(load_dataset(dir.path(), dir / "nope.csv", {"x"}, Split::Train), DataError);
}

TEST_CASE("standardize") {
  Dataset train;
  train.features = {"a", "b", "c"};
  Rng rng(3);
  std::normal_distribution<double> n(4.0, 3.0);
  for (int i = 0; i < 20; ++i) {
    LabeledSample s;
    s.signals = SignalMatrix(3, 50);
    for (std::size_t t = 0; t < 50; ++t) {
      s.signals(0, t) = n(rng);
      s.signals(1, t) = 7.25;  // constant feature
      s.signals(2, t) = -2.0 * n(rng);
    }
    train.samples.push_back(s);
  }
  const auto [std_train, stats] = standardize(train);
  CHECK(stats.stddev[1] < kMinStddev);
  for (std::size_t f : {0, 2}) {
    double s = 0.0, ss = 0.0, count = 0.0;
    for (const auto& smp : std_train.samples)
      for (double v : smp.signals.row(f)) {
        s += v;
        ss += v * v;
        count += 1.0;
      }
    CHECK(std::abs(s / count) < 1e-6);
    CHECK(std::abs(std::sqrt(ss / count - (s / count) * (s / count)) - 1.0) < 1e-6);
  }
  for (const auto& smp : std_train.samples)
    for (double v : smp.signals.row(1)) CHECK(v == 7.25);

  Dataset val = train;
  for (auto& smp : val.samples)
    for (auto& v : smp.signals.row(0)) v += 5.0;
  const auto std_val = standardize(val, stats).first;
  double m = 0.0;
  for (const auto& smp : std_val.samples)
    for (double v : smp.signals.row(0)) m += v;
  CHECK(m / (20.0 * 50.0) > 1.0);

  FeatureStats wrong{{0.0}, {1.0}};
  CHECK_THROWS_AS(standardize(train, wrong), FeatureMismatchError);
}

TEST_CASE("sample csv round trip") {
  TempDir dir("tcct_dataio");
  SignalMatrix m(2, 5);
  m.feature_names = {"pose_Rx", "gaze_angle_x"};
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = std::sin(static_cast<double>(i)) * 1e-3;
  write_sample_csv(dir / "s.csv", m);
  const auto back = read_sample_csv(dir / "s.csv", {"pose_Rx", "gaze_angle_x"});
  CHECK(back.data == m.data);
}

}  // TEST_SUITE
