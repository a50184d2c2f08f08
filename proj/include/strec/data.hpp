// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Dataset manifests, synthetic word images and lexicon statistics.
//
// Manifest format: UTF-8 text, one record per line,
//   relative/path<TAB>transcript[<TAB>split]
// with paths relative to the manifest's directory. Blank lines are ignored.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "strec/image.hpp"

namespace strec {

class Config;

struct ManifestRecord {
  std::filesystem::path path;  // resolved
  std::string relative;        // as written
  std::string transcript;
  std::string split;           // optional third column
};

struct Manifest {
  std::filesystem::path source;
  std::vector<ManifestRecord> records;

  // File stem of the source, used as the dataset id in reports.
  std::string name() const;
  std::vector<std::string> transcripts() const;
};

// Throws DataError citing the line for malformed records, empty or
// unencodable transcripts, and (with check_files) missing images.
Manifest load_manifest(const std::filesystem::path& path, bool check_files = true);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

struct Sample {
  Image image;
  std::string transcript;
};

// Decodes every image of the manifest (in parallel).
std::vector<Sample> load_samples(const Manifest& manifest, int channels = 3);

struct SynthesisSpec {
  std::vector<std::string> words;  // empty: the built-in English list
  // Hershey face names (simplex, duplex, complex, triplex, plain, script)
  // or paths to TrueType files.
  std::vector<std::string> fonts{"simplex", "duplex", "complex", "triplex"};
  int height = 48;           // canvas height in pixels before curvature margin
  double scale_min = 1.0;    // relative glyph size range
  double scale_max = 1.4;
  double rotation = 0.0;     // max |angle| in degrees
  double curvature = 0.0;    // max arc sagitta as a fraction of the height
  double perspective = 0.0;  // max corner displacement as a fraction of the size
  double noise = 0.02;       // Gaussian pixel noise standard deviation
  double blur = 0.0;         // max Gaussian blur sigma in pixels
  bool color = true;         // random colours, else black on white
  std::uint64_t seed = 7;

  void validate() const;
};

SynthesisSpec synthesis_spec_from(const Config& config);

// Renders `word` with distortions drawn from `seed`. Bit-reproducible.
// Throws EncodingError for unencodable words and DataError for a missing font.
Image render_word(const std::string& word, const SynthesisSpec& spec, std::uint64_t seed);

// Draws `count` words from the spec's list, renders them to
// out_dir/img_NNNNN.png and writes out_dir/manifest.tsv. Returns the manifest
// path.
std::filesystem::path generate_dataset(const SynthesisSpec& spec, int count,
                                       const std::filesystem::path& out_dir);

// Root-mean-square deviation of windowed ink centroids from their
// least-squares line, divided by the text-line height (95th percentile of the
// column ink extents; windows are one line height wide). Near zero for straight text;
// a rotation is mostly absorbed by the line fit.
double straightness(const Image& image);

struct CharHistogram {
  std::map<char, std::int64_t> counts;
  std::int64_t total = 0;

  // max count / min nonzero count.
  double imbalance_ratio() const;
  // Descending count, ties by code point.
  std::vector<std::pair<char, std::int64_t>> sorted() const;
};

// Throws DataError("empty dataset") when there are no transcripts.
CharHistogram lexicon_frequency(std::span<const std::string> transcripts);
CharHistogram lexicon_frequency(const Manifest& manifest);

// Bar chart of the sorted histogram as a PNG.
void save_histogram_plot(const CharHistogram& histogram, const std::filesystem::path& path);

// Common English words, lowercase.
const std::vector<std::string>& builtin_words();

}  // namespace strec
