// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/vocabulary.hpp"

#include <algorithm>

#include "strec/errors.hpp"

namespace strec {

Vocabulary::Vocabulary() {
  for (char c = '0'; c <= '9'; ++c) charset_ += c;
  for (char c = 'a'; c <= 'z'; ++c) charset_ += c;
  for (char c = 'A'; c <= 'Z'; ++c) charset_ += c;
  for (const auto& [lo, hi] : {std::pair{0x21, 0x2F}, {0x3A, 0x40}, {0x5B, 0x60}, {0x7B, 0x7E}}) {
    for (int c = lo; c <= hi; ++c) charset_ += static_cast<char>(c);
  }
  lookup_.fill(-1);
  for (std::size_t i = 0; i < charset_.size(); ++i) {
    lookup_[static_cast<unsigned char>(charset_[i])] = static_cast<int>(i);
  }
}

const Vocabulary& Vocabulary::instance() {
  static const Vocabulary vocab;
  return vocab;
}

std::optional<int> Vocabulary::index_of(char c) const {
  const int i = lookup_[static_cast<unsigned char>(c)];
  if (i < 0) return std::nullopt;
  return i;
}

std::string Vocabulary::symbol(int index) const {
  if (index >= 0 && index < kPrintable) return std::string(1, charset_[static_cast<std::size_t>(index)]);
  switch (index) {
    case kStart:
      return "<start>";
    case kEnd:
      return "<end>";
    case kPad:
      return "<pad>";
    default:
      throw EncodingError("token index " + std::to_string(index) + " outside vocabulary");
  }
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> out;
  out.reserve(text.size());
  std::string offenders;
  for (char c : text) {
    const int i = lookup_[static_cast<unsigned char>(c)];
    if (i < 0) {
      if (offenders.find(c) == std::string::npos) offenders += c;
      continue;
    }
    out.push_back(i);
  }
  if (!offenders.empty()) {
    std::string listed;
    for (char c : offenders) {
      if (!listed.empty()) listed += ", ";
      const auto u = static_cast<unsigned char>(c);
      if (u >= 0x20 && u < 0x7F) {
        listed += '\'';
        listed += c;
        listed += '\'';
      } else {
        listed += "0x" + std::string(1, "0123456789ABCDEF"[u >> 4]) +
                  std::string(1, "0123456789ABCDEF"[u & 15]);
      }
    }
    throw EncodingError("characters outside the vocabulary: " + listed);
  }
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& tokens) const {
  std::string out;
  for (int t : tokens) {
    if (t == kEnd) break;
    if (t == kStart || t == kPad) continue;
    if (t < 0 || t >= kPrintable) {
      throw EncodingError("token index " + std::to_string(t) + " outside vocabulary");
    }
    out += charset_[static_cast<std::size_t>(t)];
  }
  return out;
}

TeacherBatch make_teacher_batch(const std::vector<std::vector<int>>& encoded) {
  TeacherBatch tb;
  tb.batch = static_cast<int>(encoded.size());
  for (const auto& e : encoded) tb.length = std::max(tb.length, static_cast<int>(e.size()) + 1);
  tb.inputs.assign(static_cast<std::size_t>(tb.batch) * tb.length, Vocabulary::kPad);
  tb.labels.assign(static_cast<std::size_t>(tb.batch) * tb.length, Vocabulary::kPad);
  for (int b = 0; b < tb.batch; ++b) {
    const auto& e = encoded[static_cast<std::size_t>(b)];
    auto* in = tb.inputs.data() + static_cast<std::size_t>(b) * tb.length;
    auto* lab = tb.labels.data() + static_cast<std::size_t>(b) * tb.length;
    in[0] = Vocabulary::kStart;
    for (std::size_t t = 0; t < e.size(); ++t) {
      in[t + 1] = e[t];
      lab[t] = e[t];
    }
    lab[e.size()] = Vocabulary::kEnd;
  }
  return tb;
}

}  // namespace strec
