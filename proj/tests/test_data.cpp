// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "strec/errors.hpp"
#include "strec/data.hpp"
#include "strec/vocabulary.hpp"
#include "test_util.hpp"

using namespace strec;
using strec::testing::scratch_dir;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

SynthesisSpec plain_spec() {
  SynthesisSpec s;
  s.fonts = {"simplex"};
  s.color = false;
  s.noise = 0.0;
  return s;
}

}  // namespace

TEST_CASE("vocabulary is a bijection over 94 printable symbols") {
  const Vocabulary& v = Vocabulary::instance();
  CHECK(v.size() == 97);
  CHECK(v.charset().size() == 94);
  for (int i = 0; i < 94; ++i) CHECK(v.index_of(v.charset()[static_cast<std::size_t>(i)]) == i);
  CHECK(v.index_of('0') == 0);
  CHECK(v.index_of('a') == 10);
  CHECK(v.index_of('A') == 36);
  CHECK_FALSE(v.index_of(' ').has_value());
  CHECK(v.decode(v.encode("Hello,World!")) == "Hello,World!");
  CHECK_THROWS_AS(v.encode("tab\there"), EncodingError);
  CHECK(v.decode({12, Vocabulary::kEnd, 13}) == "c");
}

TEST_CASE("teacher batches shift targets and pad to the longest") {
  const TeacherBatch tb = make_teacher_batch({{1, 2}, {3}});
  CHECK(tb.batch == 2);
  CHECK(tb.length == 3);
  const int s = Vocabulary::kStart, e = Vocabulary::kEnd, p = Vocabulary::kPad;
  CHECK(tb.inputs == std::vector<int>{s, 1, 2, s, 3, p});
  CHECK(tb.labels == std::vector<int>{1, 2, e, 3, e, p});
}

TEST_CASE("manifest round trip is byte-identical") {
  const fs::path dir = scratch_dir("manifest");
  write_text(dir / "a.png", "x");
  write_text(dir / "b.png", "x");
  write_text(dir / "m.tsv", "a.png\thello\ttrain\n\nb.png\tWorld!\n");
  const Manifest m = load_manifest(dir / "m.tsv");
  REQUIRE(m.records.size() == 2);
  CHECK(m.records[0].split == "train");
  CHECK(m.records[1].transcript == "World!");
  CHECK(m.name() == "m");
  write_manifest(dir / "copy.tsv", m.records);
  const Manifest again = load_manifest(dir / "copy.tsv");
  write_manifest(dir / "copy2.tsv", again.records);
  CHECK(slurp(dir / "copy.tsv") == slurp(dir / "copy2.tsv"));
}

TEST_CASE("malformed manifests cite the line") {
  const fs::path dir = scratch_dir("manifest_bad");
  write_text(dir / "a.png", "x");
  auto error_for = [&](const std::string& text, bool check_files = true) {
    write_text(dir / "m.tsv", text);
    try {
      load_manifest(dir / "m.tsv", check_files);
    } catch (const DataError& e) {
      return std::string(e.what());
    } catch (const EncodingError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_for("a.png\tok\nno-tab-here\n").find(":2") != std::string::npos);
  CHECK_FALSE(error_for("a.png\t\n").empty());
  CHECK_FALSE(error_for("missing.png\tword\n").empty());
  CHECK(error_for("missing.png\tword\n", false).empty());
  CHECK_FALSE(error_for("a.png\tcaf\xc3\xa9\n").empty());
}

TEST_CASE("rendering is reproducible and transcript-preserving") {
  const SynthesisSpec spec = plain_spec();
  const Image a = render_word("Hello", spec, 11);
  const Image b = render_word("Hello", spec, 11);
  CHECK(a.pixels == b.pixels);
  CHECK(a.height == 48);
  CHECK(a.width > 48);
  CHECK_THROWS_AS(render_word("tab\tword", spec, 1), EncodingError);
  SynthesisSpec bad = spec;
  bad.fonts = {"/no/such/font.ttf"};
  CHECK_THROWS_AS(render_word("x", bad, 1), DataError);
}

TEST_CASE("truetype fonts render through freetype") {
  const fs::path font = "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf";
  if (!fs::exists(font)) return;
  SynthesisSpec spec = plain_spec();
  spec.fonts = {font.string()};
  const Image img = render_word("Quartz", spec, 3);
  double lo = 1.0, hi = 0.0;
  for (const double v : img.pixels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo > 0.5);
}

TEST_CASE("generated datasets reproduce byte for byte") {
  SynthesisSpec spec = plain_spec();
  spec.noise = 0.02;
  spec.color = true;
  spec.rotation = 5.0;
  const fs::path a = generate_dataset(spec, 10, scratch_dir("gen_a"));
  const fs::path b = generate_dataset(spec, 10, scratch_dir("gen_b"));
  CHECK(slurp(a) == slurp(b));
  const Manifest m = load_manifest(a);
  REQUIRE(m.records.size() == 10);
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    CHECK(slurp(m.records[i].path) == slurp(b.parent_path() / m.records[i].relative));
  }
  const auto samples = load_samples(m, 3);
  CHECK(samples.size() == 10);
  CHECK(samples[3].transcript == m.records[3].transcript);
}

TEST_CASE("curvature bends the text baseline") {
  SynthesisSpec spec = plain_spec();
  double flat = 0.0, curved = 0.0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    spec.curvature = 0.0;
    flat += straightness(render_word("MINIMUM", spec, seed)) / 8.0;
    spec.curvature = 0.3;
    curved += straightness(render_word("MINIMUM", spec, seed)) / 8.0;
  }
  CHECK(flat < 0.05);
  CHECK(curved > 2.0 * flat);
}

TEST_CASE("the line fit absorbs most of a rotation") {
  SynthesisSpec spec = plain_spec();
  spec.rotation = 10.0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    CHECK(straightness(render_word("MINIMUM", spec, seed)) < 0.1);
  }
}

TEST_CASE("lexicon frequency counts and orders characters") {
  const std::vector<std::string> words{"aa", "ab"};
  const CharHistogram h = lexicon_frequency(words);
  CHECK(h.total == 4);
  const auto rows = h.sorted();
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::pair<char, std::int64_t>{'a', 3});
  CHECK(rows[1] == std::pair<char, std::int64_t>{'b', 1});
  CHECK(h.imbalance_ratio() == 3.0);
  const std::vector<std::string> tie{"ba"};
  CHECK(lexicon_frequency(tie).sorted().front().first == 'a');
  CHECK_THROWS_WITH_AS(lexicon_frequency(std::vector<std::string>{}), "empty dataset", DataError);
}

TEST_CASE("builtin word list is encodable and lowercase") {
  const auto& words = builtin_words();
  CHECK(words.size() >= 400);
  for (const auto& w : words) {
    CHECK_NOTHROW(Vocabulary::instance().encode(w));
    for (const char c : w) CHECK((c >= 'a' && c <= 'z'));
  }
}
