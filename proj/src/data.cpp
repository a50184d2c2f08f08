// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/freetype.hpp>
#include <opencv2/imgproc.hpp>

#include "strec/config.hpp"
#include "strec/errors.hpp"
#include "strec/random.hpp"
#include "strec/vocabulary.hpp"

namespace strec {

namespace fs = std::filesystem;

std::string Manifest::name() const { return source.stem().string(); }

std::vector<std::string> Manifest::transcripts() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.transcript);
  return out;
}

Manifest load_manifest(const fs::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest " + path.string());
  Manifest m;
  m.source = path;
  const fs::path base = path.parent_path();
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(number) + ": ";
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where + "missing transcript column");
    ManifestRecord rec;
    rec.relative = line.substr(0, tab);
    std::string rest = line.substr(tab + 1);
    const auto tab2 = rest.find('\t');
    if (tab2 != std::string::npos) {
      rec.split = rest.substr(tab2 + 1);
      rest.resize(tab2);
    }
    rec.transcript = std::move(rest);
    if (rec.relative.empty()) throw DataError(where + "empty image path");
    if (rec.transcript.empty()) throw DataError(where + "empty transcript");
    try {
      Vocabulary::instance().encode(rec.transcript);
    } catch (const EncodingError& e) {
      throw DataError(where + e.what());
    }
    rec.path = base / rec.relative;
    if (check_files && !fs::is_regular_file(rec.path)) {
      throw DataError(where + "image file not found: " + rec.path.string());
    }
    m.records.push_back(std::move(rec));
  }
  return m;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& r : records) {
    out << r.relative << '\t' << r.transcript;
    if (!r.split.empty()) out << '\t' << r.split;
    out << '\n';
  }
  if (!out) throw DataError("write failed for manifest " + path.string());
}

std::vector<Sample> load_samples(const Manifest& manifest, int channels) {
  const auto n = static_cast<std::int64_t>(manifest.records.size());
  std::vector<Sample> out(manifest.records.size());
  std::vector<std::string> errors(manifest.records.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& rec = manifest.records[static_cast<std::size_t>(i)];
    try {
      out[static_cast<std::size_t>(i)] = {load_image(rec.path, channels), rec.transcript};
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw DataError(e);
  return out;
}

// --- synthesis -------------------------------------------------------------

void SynthesisSpec::validate() const {
  if (fonts.empty()) throw ConfigError("data.fonts must name at least one font");
  if (height < 8) throw ConfigError("data.height must be >= 8");
  if (!(scale_min > 0.0) || scale_max < scale_min) {
    throw ConfigError("data.scale_min/scale_max must satisfy 0 < min <= max");
  }
  if (rotation < 0 || curvature < 0 || perspective < 0 || noise < 0 || blur < 0) {
    throw ConfigError("data distortion ranges must be non-negative");
  }
  if (perspective >= 0.5) throw ConfigError("data.perspective must be < 0.5");
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::optional<int> hershey_face(const std::string& name) {
  if (name == "simplex") return cv::FONT_HERSHEY_SIMPLEX;
  if (name == "plain") return cv::FONT_HERSHEY_PLAIN;
  if (name == "duplex") return cv::FONT_HERSHEY_DUPLEX;
  if (name == "complex") return cv::FONT_HERSHEY_COMPLEX;
  if (name == "triplex") return cv::FONT_HERSHEY_TRIPLEX;
  if (name == "script") return cv::FONT_HERSHEY_SCRIPT_SIMPLEX;
  return std::nullopt;
}

struct Glyphs {
  std::optional<int> face;
  cv::Ptr<cv::freetype::FreeType2> ttf;
};

Glyphs open_font(const std::string& name) {
  Glyphs g;
  g.face = hershey_face(name);
  if (g.face) return g;
  if (!fs::is_regular_file(name)) throw DataError("font not found: '" + name + "'");
  try {
    g.ttf = cv::freetype::createFreeType2();
    g.ttf->loadFontData(name, 0);
  } catch (const cv::Exception& e) {
    throw DataError("cannot load font '" + name + "': " + e.what());
  }
  return g;
}

cv::Scalar to_scalar(const double rgb[3]) {
  return cv::Scalar(std::round(rgb[0] * 255), std::round(rgb[1] * 255), std::round(rgb[2] * 255));
}

}  // namespace

SynthesisSpec synthesis_spec_from(const Config& c) {
  SynthesisSpec s;
  const std::string& words = c.get("data.words");
  if (words != "builtin") {
    std::ifstream in(words);
    if (!in) throw ConfigError("data.words: cannot read word list '" + words + "'");
    std::string w;
    while (std::getline(in, w)) {
      if (!w.empty() && w.back() == '\r') w.pop_back();
      if (!w.empty()) s.words.push_back(w);
    }
    if (s.words.empty()) throw ConfigError("data.words: word list '" + words + "' is empty");
  }
  s.fonts = split_list(c.get("data.fonts"));
  s.height = c.get_int("data.height");
  s.scale_min = c.get_double("data.scale_min");
  s.scale_max = c.get_double("data.scale_max");
  s.rotation = c.get_double("data.rotation");
  s.curvature = c.get_double("data.curvature");
  s.perspective = c.get_double("data.perspective");
  s.noise = c.get_double("data.noise");
  s.blur = c.get_double("data.blur");
  s.color = c.get_bool("data.color");
  s.seed = c.get_u64("data.seed");
  s.validate();
  return s;
}

Image render_word(const std::string& word, const SynthesisSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (word.empty()) throw EncodingError("cannot render an empty word");
  Vocabulary::instance().encode(word);
  Rng rng(seed);

  const Glyphs glyphs = open_font(spec.fonts[rng.below(spec.fonts.size())]);
  const double scale = rng.uniform(spec.scale_min, spec.scale_max);
  const int margin = static_cast<int>(std::ceil(spec.curvature * spec.height));
  const int height = spec.height + 2 * margin;
  const int target = std::max(6, static_cast<int>(std::lround(spec.height * 0.4 * scale)));
  const int pad = spec.height / 4;

  double bg[3], fg[3];
  if (spec.color) {
    for (int i = 0; i < 3; ++i) bg[i] = rng.uniform(0.6, 1.0);
    for (int i = 0; i < 3; ++i) fg[i] = rng.uniform(0.0, 0.35);
    if (rng.uniform() < 0.25) std::swap(bg, fg);
  } else {
    for (int i = 0; i < 3; ++i) bg[i] = 1.0, fg[i] = 0.0;
  }

  cv::Mat canvas;
  if (glyphs.face) {
    int baseline = 0;
    const cv::Size unit = cv::getTextSize(word, *glyphs.face, 1.0, 1, &baseline);
    const double font_scale = static_cast<double>(target) / std::max(1, unit.height);
    const int thickness = std::max(1, static_cast<int>(std::lround(font_scale * (1.0 + rng.uniform()))));
    const cv::Size size = cv::getTextSize(word, *glyphs.face, font_scale, thickness, &baseline);
    canvas = cv::Mat(height, size.width + 2 * pad, CV_8UC3, to_scalar(bg));
    const cv::Point origin(pad, (height + size.height) / 2);
    cv::putText(canvas, word, origin, *glyphs.face, font_scale, to_scalar(fg), thickness,
                cv::LINE_AA);
  } else {
    int baseline = 0;
    const int font_height = static_cast<int>(std::lround(target * 1.4));
    const cv::Size size = glyphs.ttf->getTextSize(word, font_height, -1, &baseline);
    canvas = cv::Mat(height, size.width + 2 * pad, CV_8UC3, to_scalar(bg));
    const cv::Point origin(pad, (height + size.height) / 2);
    glyphs.ttf->putText(canvas, word, origin, font_height, to_scalar(fg), -1, cv::LINE_AA, true);
  }
  const int width = canvas.cols;

  if (spec.curvature > 0.0) {
    const double sagitta = rng.uniform(-1.0, 1.0) * spec.curvature * spec.height;
    cv::Mat map_x(height, width, CV_32FC1), map_y(height, width, CV_32FC1);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double arc = std::sin(std::numbers::pi * (x + 0.5) / width);
        map_x.at<float>(y, x) = static_cast<float>(x);
        map_y.at<float>(y, x) = static_cast<float>(y - sagitta * arc);
      }
    cv::Mat warped;
    cv::remap(canvas, warped, map_x, map_y, cv::INTER_LINEAR, cv::BORDER_REPLICATE);
    canvas = warped;
  }
  if (spec.rotation > 0.0) {
    const double angle = rng.uniform(-spec.rotation, spec.rotation);
    const cv::Mat m = cv::getRotationMatrix2D(cv::Point2f(width / 2.0f, height / 2.0f), angle, 1.0);
    cv::Mat warped;
    cv::warpAffine(canvas, warped, m, canvas.size(), cv::INTER_LINEAR, cv::BORDER_REPLICATE);
    canvas = warped;
  }
  if (spec.perspective > 0.0) {
    const cv::Point2f src[4] = {{0, 0}, {float(width), 0}, {float(width), float(height)}, {0, float(height)}};
    cv::Point2f dst[4];
    for (int i = 0; i < 4; ++i) {
      dst[i].x = src[i].x + static_cast<float>(rng.uniform(-1, 1) * spec.perspective * height);
      dst[i].y = src[i].y + static_cast<float>(rng.uniform(-1, 1) * spec.perspective * height);
    }
    cv::Mat warped;
    cv::warpPerspective(canvas, warped, cv::getPerspectiveTransform(src, dst), canvas.size(),
                        cv::INTER_LINEAR, cv::BORDER_REPLICATE);
    canvas = warped;
  }
  if (spec.blur > 0.0) {
    const double sigma = rng.uniform(0.0, spec.blur);
    if (sigma > 0.1) cv::GaussianBlur(canvas, canvas, cv::Size(0, 0), sigma);
  }

  Image img(height, width, 3);
  for (int y = 0; y < height; ++y) {
    const auto* row = canvas.ptr<std::uint8_t>(y);
    for (int x = 0; x < width * 3; ++x) {
      double v = row[x] / 255.0;
      if (spec.noise > 0.0) v += rng.normal(0.0, spec.noise);
      img.pixels[static_cast<std::size_t>(y) * width * 3 + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

fs::path generate_dataset(const SynthesisSpec& spec, int count, const fs::path& out_dir) {
  spec.validate();
  if (count < 1) throw ConfigError("generate-data: count must be >= 1");
  const auto& words = spec.words.empty() ? builtin_words() : spec.words;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw DataError("cannot create output directory " + out_dir.string());
  }
  Rng picker(spec.seed);
  std::vector<ManifestRecord> records(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05d.png", i);
    auto& r = records[static_cast<std::size_t>(i)];
    r.relative = name;
    r.path = out_dir / name;
    r.transcript = words[picker.below(words.size())];
  }
  std::vector<std::string> errors(records.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    auto& r = records[static_cast<std::size_t>(i)];
    try {
      save_image(r.path, render_word(r.transcript, spec, mix_seed(spec.seed, static_cast<std::uint64_t>(i))));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw DataError(e);
  const fs::path manifest = out_dir / "manifest.tsv";
  write_manifest(manifest, records);
  return manifest;
}

double straightness(const Image& image) {
  if (image.empty()) throw DataError("straightness of an empty image");
  const int h = image.height, w = image.width;
  std::vector<double> lum(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int c = 0; c < image.channels; ++c) s += image.at(y, x, c);
      lum[static_cast<std::size_t>(y) * w + x] = s / image.channels;
    }
  std::vector<double> border;
  for (int x = 0; x < w; ++x) {
    border.push_back(lum[static_cast<std::size_t>(x)]);
    border.push_back(lum[static_cast<std::size_t>(h - 1) * w + x]);
  }
  for (int y = 0; y < h; ++y) {
    border.push_back(lum[static_cast<std::size_t>(y) * w]);
    border.push_back(lum[static_cast<std::size_t>(y) * w + w - 1]);
  }
  std::nth_element(border.begin(), border.begin() + border.size() / 2, border.end());
  const double bg = border[border.size() / 2];
  double contrast = 0.0;
  for (double v : lum) contrast = std::max(contrast, std::abs(v - bg));
  if (contrast <= 0.0) throw DataError("straightness: image has no ink");
  const double threshold = 0.5 * contrast;

  std::vector<bool> ink(lum.size());
  for (std::size_t i = 0; i < lum.size(); ++i) ink[i] = std::abs(lum[i] - bg) > threshold;

  // Glyph shapes make single-column centroids noisy, so columns are pooled
  // into windows about one text-line height wide.
  std::vector<int> extents;
  for (int x = 0; x < w; ++x) {
    int top = h, bottom = -1;
    for (int y = 0; y < h; ++y) {
      if (ink[static_cast<std::size_t>(y) * w + x]) {
        top = std::min(top, y);
        bottom = std::max(bottom, y);
      }
    }
    if (bottom >= 0) extents.push_back(bottom - top + 1);
  }
  if (extents.size() < 2) throw DataError("straightness: too little ink");
  const std::size_t q = extents.size() * 19 / 20;
  std::nth_element(extents.begin(), extents.begin() + static_cast<std::ptrdiff_t>(q), extents.end());
  const int line_height = std::max(1, extents[q]);

  std::vector<double> xs, ys, ws;
  for (int x0 = 0; x0 < w; x0 += line_height) {
    double mass = 0.0, mx = 0.0, my = 0.0;
    for (int x = x0; x < std::min(w, x0 + line_height); ++x) {
      for (int y = 0; y < h; ++y) {
        if (!ink[static_cast<std::size_t>(y) * w + x]) continue;
        mass += 1.0;
        mx += x;
        my += y;
      }
    }
    if (mass > 0.0) {
      xs.push_back(mx / mass);
      ys.push_back(my / mass);
      ws.push_back(mass);
    }
  }
  if (xs.size() < 2) return 0.0;
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sw += ws[i];
    sx += ws[i] * xs[i];
    sy += ws[i] * ys[i];
    sxx += ws[i] * xs[i] * xs[i];
    sxy += ws[i] * xs[i] * ys[i];
  }
  const double denom = sw * sxx - sx * sx;
  const double slope = denom != 0.0 ? (sw * sxy - sx * sy) / denom : 0.0;
  const double icept = (sy - slope * sx) / sw;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (icept + slope * xs[i]);
    sse += ws[i] * r * r;
  }
  return std::sqrt(sse / sw) / line_height;
}

// --- lexicon ---------------------------------------------------------------

double CharHistogram::imbalance_ratio() const {
  std::int64_t hi = 0, lo = 0;
  for (const auto& [c, n] : counts) {
    if (n <= 0) continue;
    hi = std::max(hi, n);
    lo = lo == 0 ? n : std::min(lo, n);
  }
  return lo == 0 ? 0.0 : static_cast<double>(hi) / static_cast<double>(lo);
}

std::vector<std::pair<char, std::int64_t>> CharHistogram::sorted() const {
  std::vector<std::pair<char, std::int64_t>> rows(counts.begin(), counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return static_cast<unsigned char>(a.first) < static_cast<unsigned char>(b.first);
  });
  return rows;
}

CharHistogram lexicon_frequency(std::span<const std::string> transcripts) {
  if (transcripts.empty()) throw DataError("empty dataset");
  CharHistogram h;
  for (const auto& t : transcripts) {
    for (char c : t) ++h.counts[c];
    h.total += static_cast<std::int64_t>(t.size());
  }
  return h;
}

CharHistogram lexicon_frequency(const Manifest& manifest) {
  const auto t = manifest.transcripts();
  return lexicon_frequency(std::span<const std::string>(t));
}

void save_histogram_plot(const CharHistogram& histogram, const std::filesystem::path& path) {
  const auto rows = histogram.sorted();
  if (rows.empty()) throw DataError("empty dataset");
  const int bar = 12, gap = 2, top = 20, plot_h = 240, bottom = 24, left = 10;
  const int width = left * 2 + static_cast<int>(rows.size()) * (bar + gap);
  cv::Mat canvas(top + plot_h + bottom, std::max(width, 120), CV_8UC3, cv::Scalar(255, 255, 255));
  const double peak = static_cast<double>(rows.front().second);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int x = left + static_cast<int>(i) * (bar + gap);
    const int h = static_cast<int>(std::lround(plot_h * static_cast<double>(rows[i].second) / peak));
    cv::rectangle(canvas, cv::Point(x, top + plot_h - h), cv::Point(x + bar - 1, top + plot_h),
                  cv::Scalar(160, 90, 40), cv::FILLED);
    cv::putText(canvas, std::string(1, rows[i].first), cv::Point(x + 1, top + plot_h + 16),
                cv::FONT_HERSHEY_PLAIN, 0.9, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  cv::putText(canvas, "max/min = " + std::to_string(histogram.imbalance_ratio()),
              cv::Point(left, 14), cv::FONT_HERSHEY_PLAIN, 0.9, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  Image img(canvas.rows, canvas.cols, 3);
  for (int y = 0; y < canvas.rows; ++y) {
    for (int x = 0; x < canvas.cols; ++x) {
      const cv::Vec3b px = canvas.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = px[2 - c] / 255.0;
    }
  }
  save_image(path, img);
}

}  // namespace strec
