/*
 * Copyright 2026 The tedpc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tedpc/error.hpp"

namespace tedpc::csv {

// One parsed record. `line` is the 1-based physical line the record starts on.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

// RFC-4180 reader over an in-memory buffer. Lines that start with '#' outside
// a quoted field are collected as comments; blank lines are skipped.
class Reader {
 public:
  Reader(std::string text, std::string name) : text_(std::move(text)), name_(std::move(name)) {
    if (text_.size() >= 3 && text_.compare(0, 3, "\xEF\xBB\xBF") == 0) pos_ = 3;
  }

  static Reader open(const std::string& path) { return Reader(read_file(path), path); }

  const std::string& name() const { return name_; }
  const std::vector<std::string>& comments() const { return comments_; }

  bool next(Row& row) {
    row.fields.clear();
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '\n') {
        ++pos_;
        ++line_;
        continue;
      }
      if (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') {
        pos_ += 2;
        ++line_;
        continue;
      }
      if (c == '#') {
        const auto end = text_.find('\n', pos_);
        std::string_view comment(text_.data() + pos_,
                                 (end == std::string::npos ? text_.size() : end) - pos_);
        if (!comment.empty() && comment.back() == '\r') comment.remove_suffix(1);
        comments_.emplace_back(comment);
        pos_ = end == std::string::npos ? text_.size() : end + 1;
        ++line_;
        continue;
      }
      break;
    }
    if (pos_ >= text_.size()) return false;
    row.line = line_;
    parse_record(row.fields);
    return true;
  }

  // Reads the first record and checks it equals `expected` exactly.
  void expect_header(std::initializer_list<std::string_view> expected) {
    expect_header(std::span<const std::string_view>(expected.begin(), expected.size()));
  }

  void expect_header(std::span<const std::string_view> expected) {
    Row row;
    if (!next(row)) throw InputError(name_ + ": missing header");
    bool ok = row.fields.size() == expected.size();
    std::size_t i = 0;
    for (auto it = expected.begin(); ok && it != expected.end(); ++it, ++i) {
      ok = row.fields[i] == *it;
    }
    if (!ok) {
      std::string want;
      for (auto h : expected) want += (want.empty() ? "" : ",") + std::string(h);
      throw InputError(row_message(name_, row.line, "header mismatch, expected `" + want + "`"));
    }
  }

 private:
  void parse_record(std::vector<std::string>& fields) {
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    const std::size_t start_line = line_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (quoted) {
        if (c == '"') {
          if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') {
            field.push_back('"');
            pos_ += 2;
            continue;
          }
          quoted = false;
          ++pos_;
          continue;
        }
        if (c == '\n') ++line_;
        field.push_back(c);
        ++pos_;
        continue;
      }
      if (c == '"' && field.empty() && !was_quoted) {
        quoted = true;
        was_quoted = true;
        ++pos_;
        continue;
      }
      if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
        ++pos_;
        continue;
      }
      if (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') {
        pos_ += 2;
        ++line_;
        fields.push_back(std::move(field));
        return;
      }
      if (c == '\n') {
        ++pos_;
        ++line_;
        fields.push_back(std::move(field));
        return;
      }
      field.push_back(c);
      ++pos_;
    }
    if (quoted) throw InputError(row_message(name_, start_line, "unterminated quoted field"));
    fields.push_back(std::move(field));
  }

  std::string text_;
  std::string name_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::vector<std::string> comments_;
};

inline bool needs_quoting(std::string_view field) {
  return field.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline void append_field(std::string& out, std::string_view field) {
  if (!needs_quoting(field)) {
    out.append(field);
    return;
  }
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

// Accumulates records in memory; `save` writes them in one shot.
class Writer {
 public:
  void row(std::initializer_list<std::string_view> fields) {
    row(std::span<const std::string_view>(fields.begin(), fields.size()));
  }

  void row(std::span<const std::string_view> fields) {
    bool first = true;
    for (auto f : fields) {
      if (!first) buffer_.push_back(',');
      append_field(buffer_, f);
      first = false;
    }
    buffer_.push_back('\n');
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) buffer_.push_back(',');
      append_field(buffer_, fields[i]);
    }
    buffer_.push_back('\n');
  }

  void comment(std::string_view text) {
    buffer_.append(text);
    buffer_.push_back('\n');
  }

  const std::string& str() const { return buffer_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file: " + path);
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (!out) throw InputError("write failed: " + path);
  }

 private:
  std::string buffer_;
};

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  Int value{};
  if (text.empty()) return std::nullopt;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

inline std::optional<bool> parse_bool(std::string_view text) {
  if (text == "true" || text == "TRUE" || text == "True" || text == "1") return true;
  if (text == "false" || text == "FALSE" || text == "False" || text == "0") return false;
  return std::nullopt;
}

}  // namespace tedpc::csv
