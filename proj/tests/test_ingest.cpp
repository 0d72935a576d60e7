#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "agb/core/rng.hpp"
#include "agb/core/validate.hpp"
#include "agb/ingest/dataset_io.hpp"
#include "agb/ingest/formats.hpp"
#include "agb/ingest/sequence.hpp"
#include "agb/synthfield.hpp"
#include "support.hpp"

using namespace agb;
using namespace agb::io;
namespace fs = std::filesystem;
using agb::testing::TempDir;

namespace {

RgbImage tagged_image(std::size_t tag) {
  RgbImage img(2, 2);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(tag % 256);
  return img;
}

DisparityMap tagged_disparity(std::size_t tag) { return DisparityMap(2, 2, static_cast<float>(tag)); }

std::string seq_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "f_%04zu.%s", i, ext);
  return buf;
}

void write_rgb_sequence(const fs::path& dir, std::size_t n) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < n; ++i) write_ppm(dir / seq_name(i, "ppm"), tagged_image(i));
}

void write_disp_sequence(const fs::path& dir, std::size_t n) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < n; ++i)
    write_dmap(dir / seq_name(i, "dmap"), tagged_disparity(i));
}

std::size_t format_offset(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "no format error";
  return SIZE_MAX;
}

}  // namespace

TEST(Ppm, TwoByTwoHasTwelvePayloadBytes) {
  const std::string s = encode_ppm(tagged_image(9));
  const std::string header = "P6\n2 2\n255\n";
  ASSERT_EQ(s.size(), header.size() + 12);
  EXPECT_EQ(s.substr(0, header.size()), header);
}

TEST(Ppm, RoundTripIsByteExact) {
  RandomStream r(1, "ppm");
  RgbImage img(7, 5);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(r.below(256));
  const std::string s = encode_ppm(img);
  EXPECT_TRUE(decode_ppm(s) == img);
  EXPECT_EQ(encode_ppm(decode_ppm(s)), s);
}

TEST(Ppm, AcceptsCommentsInHeader) {
  const std::string s = "P6\n# made by hand\n1 1\n255\n\x01\x02\x03";
  const RgbImage img = decode_ppm(s);
  EXPECT_EQ(img.pixel(0, 0)[2], 3);
}

TEST(Ppm, ErrorsCarryOffsets) {
  const std::string good = encode_ppm(tagged_image(1));
  EXPECT_EQ(format_offset([&] { decode_ppm("P5" + good.substr(2)); }), 0u);
  EXPECT_EQ(format_offset([&] { decode_ppm(good.substr(0, good.size() - 1)); }), good.size() - 1);
  EXPECT_EQ(format_offset([&] { decode_ppm(good + "x"); }), good.size());
  EXPECT_EQ(format_offset([] { decode_ppm("P6\n2 2\n65535\n"); }), 6u);
}

TEST(Dmap, NaNSurvivesBitExactly) {
  DisparityMap d(3, 1, 1.25f);
  d.at(1, 0) = std::numeric_limits<float>::quiet_NaN();
  const auto back = decode_dmap<DisparityTag>(encode_dmap(d));
  EXPECT_TRUE(back == d);
  EXPECT_TRUE(std::isnan(back.at(1, 0)));
}

TEST(Dmap, LayoutMatchesDocumentedHeader) {
  DepthMap d(2, 3, 0.5f);
  const std::string s = encode_dmap(d);
  ASSERT_EQ(s.size(), 4u + 1 + 4 + 4 + 6 * 4);
  EXPECT_EQ(s.substr(0, 4), "DMAP");
  EXPECT_EQ(s[4], 1);
  std::uint32_t w = 0, h = 0;
  std::memcpy(&w, s.data() + 5, 4);
  std::memcpy(&h, s.data() + 9, 4);
  EXPECT_EQ(w, 2u);
  EXPECT_EQ(h, 3u);
  float v = 0;
  std::memcpy(&v, s.data() + 13, 4);
  EXPECT_EQ(v, 0.5f);
}

TEST(Dmap, RandomRastersAreFixpoints) {
  RandomStream r(2, "dmap");
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t w = 1 + r.below(17), h = 1 + r.below(9);
    HeightMap m(w, h);
    for (auto& v : m.values()) v = r.uniform() < 0.1 ? kInvalidMetric : static_cast<float>(r.normal());
    const std::string s = encode_dmap(m);
    const auto once = decode_dmap<HeightTag>(s);
    EXPECT_EQ(encode_dmap(once), s);
    EXPECT_TRUE(decode_dmap<HeightTag>(encode_dmap(once)) == once);
  }
}

TEST(Dmap, RejectsBadMagicTruncationAndOverflow) {
  const std::string good = encode_dmap(DepthMap(2, 2, 1.0f));
  EXPECT_EQ(format_offset([&] { decode_dmap<DepthTag>("DMAQ" + good.substr(4)); }), 0u);
  EXPECT_EQ(format_offset([&] { decode_dmap<DepthTag>(good.substr(0, good.size() - 3)); }), 13u);
  EXPECT_EQ(format_offset([&] { decode_dmap<DepthTag>(good + "abcd"); }), 13u);
  EXPECT_EQ(format_offset([&] { decode_dmap<DepthTag>(good.substr(0, 7)); }), 5u);
  std::string huge = good;
  const std::uint32_t big = 0xffffffffu;
  std::memcpy(huge.data() + 5, &big, 4);
  std::memcpy(huge.data() + 9, &big, 4);
  EXPECT_EQ(format_offset([&] { decode_dmap<DepthTag>(huge); }), 5u);
}

TEST(Lscn, RoundTripAndLayout) {
  std::vector<PolarScan> scans(2);
  scans[0].pose = {1, 2, 1.45, 0.1};
  scans[0].time_s = 0.5;
  scans[0].points = {{0.0f, 1.45f}, {0.1f, 1.46f}};
  scans[1].pose = {3, 4, 1.45, 0};
  const std::string s = encode_lscn(scans);
  EXPECT_EQ(s.size(), 4u + 1 + 4 + 2 * (5 * 8 + 4) + 2 * 8);
  EXPECT_EQ(decode_lscn(s), scans);
  EXPECT_EQ(encode_lscn(decode_lscn(s)), s);
  EXPECT_EQ(format_offset([&] { decode_lscn(s.substr(0, s.size() - 1)); }), 109u);
  EXPECT_THROW(decode_lscn(s + "z"), FormatError);
  EXPECT_EQ(format_offset([] { decode_lscn("LSC"); }), 0u);
}

TEST(Sniff, RecognisesContainers) {
  EXPECT_EQ(sniff("P6\n"), Container::Ppm);
  EXPECT_EQ(sniff("DMAP"), Container::Dmap);
  EXPECT_EQ(sniff("LSCN"), Container::Lscn);
  EXPECT_EQ(sniff("CFMD"), Container::Model);
  EXPECT_EQ(sniff("GIF8"), Container::Unknown);
}

TEST(EvenSelection, SeventyOfOneHundredFifty) {
  const auto sel = even_selection(150, 70);
  ASSERT_EQ(sel.size(), 70u);
  EXPECT_EQ(sel.front(), 0u);
  EXPECT_EQ(sel.back(), 149u);
  for (std::size_t i = 1; i < sel.size(); ++i) EXPECT_GT(sel[i], sel[i - 1]);
}

class Sequences : public ::testing::Test {
 protected:
  void SetUp() override {
    write_rgb_sequence(tmp.path() / "rgb", 150);
    write_disp_sequence(tmp.path() / "disp", 150);
  }
  SequenceManifestEntry rgb_entry() const {
    SequenceManifestEntry e;
    e.path = tmp.path() / "rgb";
    return e;
  }
  TempDir tmp{"seq"};
};

TEST_F(Sequences, ExtractsSeventyFramesAtTheirIndices) {
  const auto e = rgb_entry();
  const auto frames = extract_frames(e);
  ASSERT_EQ(frames.size(), 70u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(frames[i].index, e.selection[i]);
    EXPECT_EQ(std::get<RgbImage>(frames[i].data).pixel(0, 0)[0], e.selection[i] % 256);
  }
}

TEST_F(Sequences, SingleFirstFrame) {
  auto e = rgb_entry();
  e.selection = {0};
  const auto frames = extract_frames(e);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].index, 0u);
}

TEST_F(Sequences, IndexPastEndIsRangeError) {
  auto e = rgb_entry();
  e.selection = {150};
  EXPECT_THROW(extract_frames(e), RangeError);
}

TEST_F(Sequences, IdentitySelectionReturnsWholeSequence) {
  auto e = rgb_entry();
  e.selection = even_selection(150, 150);
  const auto frames = extract_frames(e);
  ASSERT_EQ(frames.size(), 150u);
  for (std::size_t i = 0; i < 150; ++i) EXPECT_EQ(frames[i].index, i);
}

TEST_F(Sequences, FrameCountMustMatchFpsTimesDuration) {
  auto e = rgb_entry();
  e.duration_s = 9;
  EXPECT_THROW(extract_frames(e), DataError);
}

TEST_F(Sequences, NonIncreasingSelectionRejected) {
  auto e = rgb_entry();
  e.selection = {3, 3};
  EXPECT_THROW(extract_frames(e), DataError);
}

TEST_F(Sequences, ClassificationChecksMagic) {
  auto e = rgb_entry();
  EXPECT_EQ(classify_sequence(e), SequenceKind::Rgb);
  e.path = tmp.path() / "disp";
  EXPECT_THROW(classify_sequence(e), ClassificationError);
  e.kind = SequenceKind::Disparity;
  EXPECT_EQ(classify_sequence(e), SequenceKind::Disparity);
  fs::create_directories(tmp.path() / "empty");
  e.path = tmp.path() / "empty";
  try {
    classify_sequence(e);
    FAIL();
  } catch (const ClassificationError& err) {
    EXPECT_NE(std::string(err.what()).find("no frames"), std::string::npos);
  }
}

TEST_F(Sequences, ManifestPairsBothModalities) {
  const nlohmann::json m = {
      {"sequences",
       {{{"path", "rgb"}, {"kind", "RGB"}, {"selection", {0, 7, 30}}},
        {{"path", "disp"}, {"kind", "DISPARITY"}, {"selection", {0, 7, 30}}}}}};
  const Dataset ds = ingest_sequences(m, tmp.path());
  ASSERT_EQ(ds.frames.size(), 3u);
  EXPECT_EQ(ds.frames[1].frame_index, 7);
  EXPECT_EQ(ds.frames[1].disparity.at(0, 0), 7.0f);
  EXPECT_EQ(ds.frames[1].rgb.pixel(1, 1)[1], 7);
}

TEST_F(Sequences, UnpairedFrameSevenIsNamed) {
  const nlohmann::json m = {
      {"sequences",
       {{{"path", "rgb"}, {"kind", "RGB"}, {"selection", {0, 7}}},
        {{"path", "disp"}, {"kind", "DISPARITY"}, {"selection", {0}}}}}};
  try {
    ingest_sequences(m, tmp.path());
    FAIL();
  } catch (const PairingError& e) {
    EXPECT_EQ(e.orphans(), std::vector<std::int64_t>{7});
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
  }
}

TEST(AssembleDataset, EmptyManifestGivesEmptyDataset) {
  const Dataset ds = assemble_dataset(".", nlohmann::json::object());
  EXPECT_TRUE(ds.frames.empty());
  EXPECT_TRUE(ds.samples.empty());
  EXPECT_TRUE(validate_dataset(ds).empty());
}

TEST(AssembleDataset, MissingDisparityIsPairingError) {
  const nlohmann::json m = {{"frames", {{{"index", 7}, {"rgb", "a.ppm"}}, {{"index", 8}, {"rgb", "b.ppm"}, {"disparity", "b.dmap"}}}}};
  try {
    assemble_dataset(".", m);
    FAIL();
  } catch (const PairingError& e) {
    EXPECT_EQ(e.orphans(), std::vector<std::int64_t>{7});
  }
}

TEST(DatasetIo, GeneratedDatasetRoundTrips) {
  TempDir tmp("dsio");
  const auto g = synth::generate_field(agb::testing::small_config());
  save_dataset(g.dataset, tmp.path());
  const Dataset back = load_dataset(tmp.path());
  ASSERT_EQ(back.samples.size(), g.dataset.samples.size());
  ASSERT_EQ(back.frames.size(), g.dataset.frames.size());
  for (std::size_t i = 0; i < back.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].dry_agb_kg_per_m2, g.dataset.samples[i].dry_agb_kg_per_m2);
    EXPECT_EQ(back.samples[i].frame_index, g.dataset.samples[i].frame_index);
    EXPECT_EQ(back.samples[i].roi_px, g.dataset.samples[i].roi_px);
  }
  for (std::size_t i = 0; i < back.frames.size(); ++i) {
    EXPECT_TRUE(back.frames[i].rgb == g.dataset.frames[i].rgb);
    EXPECT_TRUE(back.frames[i].disparity == g.dataset.frames[i].disparity);
  }
  EXPECT_EQ(back.manifest.seed, g.dataset.manifest.seed);
  EXPECT_TRUE(validate_dataset(back).empty());
  // Saving again reproduces the manifest byte for byte.
  TempDir again("dsio2");
  save_dataset(back, again.path());
  EXPECT_EQ(read_file(tmp.path() / "manifest.json"), read_file(again.path() / "manifest.json"));
}

TEST(DatasetIo, DefaultGeneratorOutputHas135Samples) {
  TempDir tmp("dsio135");
  save_dataset(synth::generate_field(synth::FieldConfig{}, 4).dataset, tmp.path());
  const Dataset ds = ingest_manifest(tmp.path() / "manifest.json");
  EXPECT_EQ(ds.samples.size(), 135u);
  EXPECT_TRUE(validate_dataset(ds).empty());
}
