#include <gtest/gtest.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "canqa/ingest.hpp"
#include "canqa/simulate.hpp"
#include "canqa/window.hpp"
#include "support/synth.hpp"

using namespace canqa;
namespace fs = std::filesystem;

namespace {

FrameStream parse(std::string_view text, FormatHint hint = FormatHint::Auto) {
  return parse_log(text, hint, AttackLabel::DoS);
}

fs::path temp_dir() {
  auto d = fs::temp_directory_path() / ("canqa_ingest_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Ingest, DecodesCarHackingCsvLine) {
  const auto s = parse("1478198376.389427,0316,8,05,21,68,09,21,21,00,6f,R\n");
  ASSERT_EQ(s.frames.size(), 1u);
  const auto& f = s.frames[0];
  EXPECT_EQ(f.id, 0x0316u);
  EXPECT_EQ(f.id_text, "0316");
  EXPECT_EQ(f.dlc, 8);
  EXPECT_EQ(f.flag, Flag::Normal);
  const std::array<std::uint8_t, 8> want{0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6f};
  EXPECT_EQ(f.data, want);
  EXPECT_EQ(f.ts_us, 0);
  EXPECT_EQ(s.epoch_us, 1478198376389427);
  EXPECT_EQ(s.source_label, AttackLabel::DoS);
}

TEST(Ingest, ShortDlcIsZeroPadded) {
  const auto s = parse("0.5,05f0,2,ab,CD,T\n");
  const auto& f = s.frames.at(0);
  EXPECT_EQ(f.dlc, 2);
  EXPECT_EQ(f.data[0], 0xab);
  EXPECT_EQ(f.data[1], 0xcd);
  for (std::size_t i = 2; i < 8; ++i) {
    EXPECT_EQ(f.data[i], 0);
    EXPECT_TRUE(f.is_padding(i));
  }
  EXPECT_FALSE(f.is_padding(1));
  EXPECT_EQ(f.flag, Flag::Attack);
}

TEST(Ingest, NonHexIdRejectedAndParsingContinues) {
  const auto s = parse("0.1,0316,1,00,R\n0.2,03G6,1,00,R\n0.3,0317,1,00,R\n");
  EXPECT_EQ(s.frames.size(), 2u);
  EXPECT_EQ(s.rejected_count, 1u);
  ASSERT_EQ(s.rejections.size(), 1u);
  EXPECT_EQ(s.rejections[0].line, 2u);
}

TEST(Ingest, MalformedFixtureAccounting) {
  const auto s = parse_log_file(CANQA_TEST_DATA "/malformed.csv", FormatHint::Auto);
  EXPECT_EQ(s.rejected_count, 7u);
  EXPECT_EQ(s.header_lines, 1u);
  EXPECT_EQ(s.frames.size() + s.rejected_count + s.header_lines, 28u);
  std::vector<std::size_t> lines;
  for (const auto& r : s.rejections) lines.push_back(r.line);
  EXPECT_EQ(lines, (std::vector<std::size_t>{7, 10, 13, 15, 17, 19, 22}));
}

TEST(Ingest, FlagLettersOtherThanRTRejected) {
  const auto s = parse("0.1,0316,1,00,R\n0.2,0316,1,00,r\n0.3,0316,1,00,X\n");
  EXPECT_EQ(s.frames.size(), 1u);
  EXPECT_EQ(s.rejected_count, 2u);
}

TEST(Ingest, HexIsCaseInsensitive) {
  const auto a = parse("0.1,0A0f,2,Ab,cD,R\n");
  const auto b = parse("0.1,0a0F,2,aB,Cd,R\n");
  EXPECT_EQ(a.frames[0].id, b.frames[0].id);
  EXPECT_EQ(a.frames[0].data, b.frames[0].data);
}

TEST(Ingest, ExtendedIdsFitIn29Bits) {
  const auto s = parse("0.1,18DAF110,1,00,R\n0.2,3FFFFFFF,1,00,R\n");
  ASSERT_EQ(s.frames.size(), 1u);
  EXPECT_EQ(s.frames[0].id, 0x18daf110u);
  EXPECT_EQ(s.rejected_count, 1u);
}

TEST(Ingest, SortsOutOfOrderTimestamps) {
  const auto s = parse("0.1,0001,0,R\n0.3,0003,0,R\n0.2,0002,0,R\n");
  ASSERT_EQ(s.frames.size(), 3u);
  EXPECT_EQ(s.frames[0].id, 1u);
  EXPECT_EQ(s.frames[1].id, 2u);
  EXPECT_EQ(s.frames[2].id, 3u);
  EXPECT_EQ(s.frames[2].ts_us, 200000);
}

TEST(Ingest, NormalizeIsStableAndIdempotent) {
  // 10 frames over 3 timestamps, shuffled; an oracle stable sort keyed on ts
  // must agree, and ties keep input order.
  Rng rng(5);
  std::vector<CanFrame> frames;
  for (std::uint32_t i = 0; i < 10; ++i) frames.push_back(synth::frame(static_cast<Micros>(rng.below(3)) * 10, i, 0));
  FrameStream s;
  s.frames = frames;
  const auto once = normalize_stream(s);

  std::vector<CanFrame> want;
  for (Micros t = 0; t <= 20; t += 10)
    for (const auto& f : frames)
      if (f.ts_us == t) want.push_back(f);
  EXPECT_EQ(once.frames, want);
  EXPECT_EQ(normalize_stream(once).frames, once.frames);
}

TEST(Ingest, ConsecutiveDuplicatesPreserved) {
  const auto s = parse("0.1,0316,1,00,R\n0.1,0316,1,00,R\n0.1,0316,1,00,R\n");
  EXPECT_EQ(s.frames.size(), 3u);
}

TEST(Ingest, TimestampRoundingAndPrecision) {
  EXPECT_EQ(parse_timestamp("1.5"), 1500000);
  EXPECT_EQ(parse_timestamp("0.0000005"), 1);
  EXPECT_EQ(parse_timestamp("0.0000004"), 0);
  EXPECT_EQ(parse_timestamp("12"), 12000000);
  EXPECT_FALSE(parse_timestamp("-1.0"));
  EXPECT_FALSE(parse_timestamp("1e3"));
  EXPECT_FALSE(parse_timestamp("inf"));
  EXPECT_FALSE(parse_timestamp("."));
}

TEST(Ingest, EmptyAndUndetectableInputs) {
  try {
    parse("\n\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyStream);
  }
  try {
    parse("\nhello world\n0.1,0316,1,00,R\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FormatDetection);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  try {
    parse("0.1,zz,1,00,R\n", FormatHint::CarHackingCsv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyStream);
  }
}

TEST(Ingest, MissingFileNamesPath) {
  try {
    parse_log_file("/nonexistent/trace.csv", FormatHint::Auto);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/trace.csv"), std::string::npos);
  }
}

TEST(Ingest, TxtLayout) {
  const auto s = parse(
      "Timestamp: 1479121434.850202        ID: 0350    000    DLC: 8    05    28    84    66    6d    00    00    a2\n"
      "Timestamp: 1479121434.850423        ID: 02c0    000    DLC: 2    14    00\n");
  ASSERT_EQ(s.frames.size(), 2u);
  EXPECT_EQ(s.frames[0].id, 0x350u);
  EXPECT_EQ(s.frames[1].dlc, 2);
  EXPECT_EQ(s.frames[1].ts_us, 221);
  EXPECT_EQ(s.frames[1].flag, Flag::Normal);
}

TEST(Ingest, RoundTripOnSampleTrace) {
  for (const char* name : {"DoS_dataset.csv", "normal_run_data.txt"}) {
    const auto a = parse_log_file(std::string(CANQA_SAMPLE_DIR "/") + name, FormatHint::Auto);
    std::ostringstream out;
    write_csv(a, out);
    const auto b = parse_log(out.str(), FormatHint::Auto, a.source_label);
    EXPECT_EQ(a.frames, b.frames) << name;
    EXPECT_EQ(a.epoch_us, b.epoch_us);
    std::ostringstream again;
    write_csv(b, again);
    EXPECT_EQ(out.str(), again.str());
  }
}

TEST(Ingest, JsonFrameRoundTrip) {
  const auto s = parse_log_file(CANQA_SAMPLE_DIR "/Fuzzy_dataset.csv", FormatHint::Auto);
  for (std::size_t i = 0; i < 200; ++i) {
    const auto& f = s.frames[i];
    const auto j = frame_to_json(f);
    EXPECT_EQ(j.at("data").size(), 8u);
    EXPECT_EQ(frame_from_json(j), f);
  }
}

TEST(Ingest, GzipMatchesPlain) {
  const fs::path plain = CANQA_SAMPLE_DIR "/gear_dataset.csv";
  const auto gz = temp_dir() / "gear_dataset.csv.gz";
  const auto text = slurp(plain);
  gzFile out = gzopen(gz.c_str(), "wb");
  ASSERT_NE(out, nullptr);
  ASSERT_EQ(gzwrite(out, text.data(), static_cast<unsigned>(text.size())), static_cast<int>(text.size()));
  gzclose(out);

  const auto a = parse_log_file(plain.string(), FormatHint::Auto);
  const auto b = parse_log_file(gz.string(), FormatHint::Auto);
  EXPECT_EQ(a.source_label, AttackLabel::Gear);
  EXPECT_EQ(b.source_label, AttackLabel::Gear);
  std::ostringstream da, db;
  write_csv(a, da);
  write_csv(b, db);
  EXPECT_EQ(sha256_hex(da.str()), sha256_hex(db.str()));
}

// ---------------------------------------------------------------- windowing

namespace {

FrameStream stream_of(std::size_t n, AttackLabel label = AttackLabel::DoS) {
  FrameStream s;
  s.source_label = label;
  for (std::size_t i = 0; i < n; ++i)
    s.frames.push_back(synth::frame(static_cast<Micros>(i) * 250, static_cast<std::uint32_t>(i % 7), 8,
                                    {static_cast<std::uint8_t>(i), 1, 2, 3, 4, 5, 6, 7}));
  return s;
}

}  // namespace

TEST(Window, FloorDivisionDropsTail) {
  const auto w = segment(stream_of(250), 100);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].window_id, "DoS:0");
  EXPECT_EQ(w[1].window_id, "DoS:1");
  EXPECT_EQ(w[1].first_frame, 100u);
  for (const auto& x : w) EXPECT_EQ(x.frames.size(), 100u);
}

TEST(Window, ExactFit) {
  const auto w = segment(stream_of(100), 100);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].window_id, "DoS:0");
  EXPECT_EQ(w[0].attack_label, AttackLabel::DoS);
  EXPECT_EQ(w[0].duration_us(), 99 * 250);
}

TEST(Window, TooSmallWindowAndShortStream) {
  try {
    segment(stream_of(100), 19);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
  EXPECT_TRUE(segment(stream_of(50), 100).empty());
  EXPECT_THROW(segment(FrameStream{}, 100), Error);
}

TEST(Window, ConcatenationReproducesPrefix) {
  const auto s = sim::simulate(AttackLabel::RPM, 1234, 3, 0);
  for (std::size_t W : {20u, 50u, 100u}) {
    const auto windows = segment(s, W);
    std::vector<CanFrame> joined;
    for (const auto& w : windows) joined.insert(joined.end(), w.frames.begin(), w.frames.end());
    ASSERT_EQ(joined.size(), (s.frames.size() / W) * W);
    EXPECT_TRUE(std::equal(joined.begin(), joined.end(), s.frames.begin()));
  }
}

TEST(Window, SegmentationIsDeterministic) {
  const auto s = sim::simulate(AttackLabel::Fuzzy, 900, 11, 0);
  auto digest = [&] {
    std::string all;
    for (const auto& w : segment(s, 50)) all += w.window_id + "\n" + render_context(w).text + "\n";
    return sha256_hex(all);
  };
  EXPECT_EQ(digest(), digest());
}

TEST(Window, RenderLineFormat) {
  FrameStream s;
  s.frames = {synth::frame(1500, 0x316, 2, {0xab, 0x01}, Flag::Attack)};
  s.frames[0].id_text = "0316";
  const auto line = render_line(s.frames[0], false);
  EXPECT_EQ(line, "t=0.001500 ID=0316 DLC=2 DATA=ab 01 00 00 00 00 00 00 FLAG=T");
}

TEST(Window, MaskHidesOnlyTheFlag) {
  auto w = segment(stream_of(20), 20).at(0);
  w.frames.resize(3);
  w.frames[1].flag = Flag::Attack;
  const auto plain = render_context(w).text;
  const auto masked = render_context(w, 1).text;
  auto lines = [](const std::string& t) {
    std::vector<std::string> out;
    std::istringstream in(t);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  };
  const auto p = lines(plain), m = lines(masked);
  ASSERT_EQ(p.size(), 3u);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(p[0], m[0]);
  EXPECT_EQ(p[2], m[2]);
  EXPECT_TRUE(p[1].ends_with("FLAG=T"));
  EXPECT_TRUE(m[1].ends_with("FLAG=?"));
  EXPECT_EQ(p[1].substr(0, p[1].size() - 1), m[1].substr(0, m[1].size() - 1));
  EXPECT_EQ(masked.find("FLAG=T"), std::string::npos);
  EXPECT_THROW(render_context(w, 3), Error);
}

TEST(Window, RenderCarriesEveryPayloadByteOnce) {
  const auto s = sim::simulate(AttackLabel::Fuzzy, 400, 2, 0);
  for (const auto& w : segment(s, 100)) {
    std::istringstream in(render_context(w).text);
    std::size_t i = 0;
    for (std::string line; std::getline(in, line); ++i) {
      const auto at = line.find("DATA=");
      const auto end = line.find(" FLAG=");
      std::istringstream bytes(line.substr(at + 5, end - at - 5));
      std::vector<std::string> toks;
      for (std::string b; bytes >> b;) toks.push_back(b);
      ASSERT_EQ(toks.size(), 8u);
      for (std::size_t b = 0; b < 8; ++b) EXPECT_EQ(toks[b], hex_byte(w.frames[i].data[b]));
    }
    EXPECT_EQ(i, w.frames.size());
  }
}

TEST(Window, JsonDumpFields) {
  const auto w = segment(stream_of(20), 20).at(0);
  const auto j = window_to_json(w);
  EXPECT_EQ(j.at("window_id"), "DoS:0");
  EXPECT_EQ(j.at("attack_label"), "DoS");
  EXPECT_EQ(j.at("frames").size(), 20u);
  EXPECT_EQ(j.at("context"), render_context(w).text);
}
