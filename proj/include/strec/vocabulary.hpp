// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace strec {

// 94 printable ASCII symbols followed by three specials:
//   0-9    digits
//   10-35  a-z
//   36-61  A-Z
//   62-93  punctuation 0x21-0x2F, 0x3A-0x40, 0x5B-0x60, 0x7B-0x7E
//   94 <start>, 95 <end>, 96 <pad>
// Space is not a symbol.
class Vocabulary {
 public:
  static constexpr int kPrintable = 94;
  static constexpr int kStart = 94;
  static constexpr int kEnd = 95;
  static constexpr int kPad = 96;
  static constexpr int kSize = 97;

  Vocabulary();

  int size() const { return kSize; }
  std::optional<int> index_of(char c) const;
  // Printable symbol for an index < 94; specials render as <start> etc.
  std::string symbol(int index) const;
  bool is_special(int index) const { return index >= kPrintable; }

  // Throws EncodingError listing every unknown character.
  std::vector<int> encode(std::string_view text) const;
  // Printable tokens are emitted; <start> and <pad> are skipped and decoding
  // stops at the first <end>.
  std::string decode(const std::vector<int>& tokens) const;

  // The 94 printable symbols in index order (stored with checkpoints).
  const std::string& charset() const { return charset_; }

  static const Vocabulary& instance();

 private:
  std::string charset_;
  std::array<int, 256> lookup_{};
};

// Teacher-forcing pairs for a batch of transcripts, padded to the longest:
//   inputs: <start> c1 .. cn <pad>..
//   labels: c1 .. cn <end> <pad>..
struct TeacherBatch {
  int batch = 0;
  int length = 0;
  std::vector<int> inputs;  // batch * length
  std::vector<int> labels;  // batch * length
};

TeacherBatch make_teacher_batch(const std::vector<std::vector<int>>& encoded);

}  // namespace strec
