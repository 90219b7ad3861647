/*
 * Copyright 2026 The CCFV Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Binary feature-bundle format (XFB1) and the model performance table.
//
// One bundle holds every sampled feature of one target case across all
// decoder scales. Layout, all integers u32 little-endian, floats IEEE binary32:
//
//   "XFERFVB1" | version=1 | case_id_len | case_id bytes | num_classes | D
//   D x scale block:
//     channels | n_class_entries
//     n_class_entries x { class_id | n_rows | f32[n_rows*channels] }
//     global_rows | f32[global_rows*channels]
//     has_posteriors (0|1) [ source_classes | p_rows | f32[p_rows*source_classes] ]
//
// Scale 1 is the decoder stage nearest the output, scale D the one nearest
// the bottleneck.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ccfv/error.hpp"
#include "ccfv/feature_matrix.hpp"

namespace ccfv {

inline constexpr std::string_view kBundleMagic = "XFERFVB1";
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr double kPosteriorSumTolerance = 1e-5;

struct ScaleSamples {
  std::uint32_t channels = 0;
  // Foreground classes only (class_id >= 1); absent classes are omitted.
  std::map<std::uint32_t, FeatureMatrix> class_samples;
  FeatureMatrix global_samples;
  // Rows align with the class_samples matrices concatenated in class_id order.
  std::optional<FeatureMatrix> source_posteriors;

  std::size_t class_rows() const {
    std::size_t n = 0;
    for (const auto& [id, m] : class_samples) n += m.rows;
    return n;
  }

  friend bool operator==(const ScaleSamples&, const ScaleSamples&) = default;
};

struct CaseBundle {
  std::string case_id;
  std::uint32_t num_classes = 0;  // including background class 0
  std::vector<ScaleSamples> scales;

  const ScaleSamples& scale(std::size_t scale_index) const {
    if (scale_index < 1 || scale_index > scales.size()) {
      throw std::out_of_range("scale index " + std::to_string(scale_index) + " outside 1.." +
                              std::to_string(scales.size()));
    }
    return scales[scale_index - 1];
  }

  friend bool operator==(const CaseBundle&, const CaseBundle&) = default;
};

struct PerformanceRecord {
  std::string model_id;
  double dice = 0.0;

  friend bool operator==(const PerformanceRecord&, const PerformanceRecord&) = default;
};

// ---------------------------------------------------------------------------
// Validation

namespace diag {
inline constexpr const char* kEmptyScales = "EMPTY_SCALES";
inline constexpr const char* kTooFewClasses = "TOO_FEW_CLASSES";
inline constexpr const char* kZeroChannels = "ZERO_CHANNELS";
inline constexpr const char* kMatrixSizeMismatch = "MATRIX_SIZE_MISMATCH";
inline constexpr const char* kChannelMismatch = "CHANNEL_MISMATCH";
inline constexpr const char* kNonFiniteValue = "NON_FINITE_VALUE";
inline constexpr const char* kBackgroundClassEntry = "BACKGROUND_CLASS_ENTRY";
inline constexpr const char* kClassIdOutOfRange = "CLASS_ID_OUT_OF_RANGE";
inline constexpr const char* kEmptyClassEntry = "EMPTY_CLASS_ENTRY";
inline constexpr const char* kPosteriorRowMismatch = "POSTERIOR_ROW_MISMATCH";
inline constexpr const char* kNegativePosterior = "NEGATIVE_POSTERIOR";
inline constexpr const char* kPosteriorNotNormalized = "POSTERIOR_NOT_NORMALIZED";
inline constexpr const char* kInconsistentScaleCount = "INCONSISTENT_SCALE_COUNT";
inline constexpr const char* kInconsistentChannels = "INCONSISTENT_CHANNELS";
inline constexpr const char* kMixedPosteriors = "MIXED_POSTERIORS";
}  // namespace diag

struct Diagnostic {
  std::string code;
  std::string message;
  std::optional<std::size_t> scale_index;  // 1-based, when the issue is scale-local

  std::string to_string() const {
    std::string s = code;
    if (scale_index) s += " [scale " + std::to_string(*scale_index) + "]";
    return s + ": " + message;
  }
};

namespace detail {

inline void check_matrix(const FeatureMatrix& m, std::uint32_t channels, const std::string& what,
                         std::size_t scale_index, std::vector<Diagnostic>& out) {
  if (m.values.size() != m.rows * m.cols) {
    out.push_back({diag::kMatrixSizeMismatch,
                   what + " holds " + std::to_string(m.values.size()) + " values for " +
                       std::to_string(m.rows) + "x" + std::to_string(m.cols),
                   scale_index});
    return;
  }
  if (m.cols != channels) {
    out.push_back({diag::kChannelMismatch,
                   what + " has " + std::to_string(m.cols) + " columns, scale declares " +
                       std::to_string(channels),
                   scale_index});
  }
  if (!m.all_finite()) {
    out.push_back({diag::kNonFiniteValue, what + " contains NaN or Inf", scale_index});
  }
}

}  // namespace detail

// Returns one diagnostic per violated invariant; empty iff the bundle is valid.
inline std::vector<Diagnostic> validate_bundle(const CaseBundle& bundle) {
  std::vector<Diagnostic> out;
  if (bundle.num_classes < 2) {
    out.push_back({diag::kTooFewClasses,
                   "num_classes is " + std::to_string(bundle.num_classes) + ", need >= 2",
                   std::nullopt});
  }
  if (bundle.scales.empty()) {
    out.push_back({diag::kEmptyScales, "bundle has no scales", std::nullopt});
  }
  for (std::size_t s = 0; s < bundle.scales.size(); ++s) {
    const ScaleSamples& sc = bundle.scales[s];
    const std::size_t si = s + 1;
    if (sc.channels == 0) out.push_back({diag::kZeroChannels, "channels is 0", si});
    for (const auto& [class_id, m] : sc.class_samples) {
      const std::string what = "class " + std::to_string(class_id);
      if (class_id == 0) {
        out.push_back({diag::kBackgroundClassEntry, "background class 0 stored as class entry", si});
      } else if (class_id >= bundle.num_classes) {
        out.push_back({diag::kClassIdOutOfRange,
                       what + " >= num_classes " + std::to_string(bundle.num_classes), si});
      }
      if (m.rows == 0) out.push_back({diag::kEmptyClassEntry, what + " has zero rows", si});
      detail::check_matrix(m, sc.channels, what, si, out);
    }
    detail::check_matrix(sc.global_samples, sc.channels, "global samples", si, out);

    if (!sc.source_posteriors) continue;
    const FeatureMatrix& p = *sc.source_posteriors;
    if (p.values.size() != p.rows * p.cols) {
      out.push_back({diag::kMatrixSizeMismatch, "posterior matrix size mismatch", si});
      continue;
    }
    if (p.rows != sc.class_rows()) {
      out.push_back({diag::kPosteriorRowMismatch,
                     "posteriors have " + std::to_string(p.rows) + " rows, class samples " +
                         std::to_string(sc.class_rows()),
                     si});
    }
    if (!p.all_finite()) {
      out.push_back({diag::kNonFiniteValue, "posteriors contain NaN or Inf", si});
      continue;
    }
    bool negative = false;
    std::optional<std::size_t> bad_row;
    for (std::size_t i = 0; i < p.rows; ++i) {
      double sum = 0.0;
      for (float v : p.row(i)) {
        if (v < 0.0f) negative = true;
        sum += v;
      }
      if (!bad_row && std::abs(sum - 1.0) > kPosteriorSumTolerance) bad_row = i;
    }
    if (negative) out.push_back({diag::kNegativePosterior, "posterior entry below 0", si});
    if (bad_row) {
      out.push_back({diag::kPosteriorNotNormalized,
                     "posterior row " + std::to_string(*bad_row) + " does not sum to 1", si});
    }
  }
  return out;
}

// Cross-case checks: every case of one dataset shares D and per-scale channels.
inline std::vector<Diagnostic> validate_dataset(std::span<const CaseBundle> bundles) {
  std::vector<Diagnostic> out;
  if (bundles.empty()) return out;
  const CaseBundle& ref = bundles.front();
  for (const CaseBundle& b : bundles.subspan(1)) {
    if (b.scales.size() != ref.scales.size()) {
      out.push_back({diag::kInconsistentScaleCount,
                     "case '" + b.case_id + "' has " + std::to_string(b.scales.size()) +
                         " scales, case '" + ref.case_id + "' has " +
                         std::to_string(ref.scales.size()),
                     std::nullopt});
      continue;
    }
    for (std::size_t s = 0; s < b.scales.size(); ++s) {
      if (b.scales[s].channels != ref.scales[s].channels) {
        out.push_back({diag::kInconsistentChannels,
                       "case '" + b.case_id + "' channel count differs from case '" +
                           ref.case_id + "'",
                       s + 1});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoding

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { buf_.append(s); }
  void matrix_values(const FeatureMatrix& m) {
    for (float v : m.values) f32(v);
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void require(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw DecodeError(pos_, std::string("truncated ") + what + ": expected " +
                                  std::to_string(n) + " bytes, " +
                                  std::to_string(remaining()) + " available");
    }
  }

  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string_view bytes(std::size_t n, const char* what) {
    require(n, what);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  FeatureMatrix matrix(std::uint32_t rows, std::uint32_t cols, const char* what) {
    const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
    if (count * 4 > remaining()) {
      throw DecodeError(pos_, std::string("truncated ") + what + ": expected " +
                                  std::to_string(count * 4) + " bytes, " +
                                  std::to_string(remaining()) + " available");
    }
    FeatureMatrix m(rows, cols);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      const std::size_t at = pos_;
      const float v = std::bit_cast<float>(u32(what));
      if (!std::isfinite(v)) throw DecodeError(at, std::string("non-finite value in ") + what);
      m.values[i] = v;
    }
    return m;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Serializes a valid bundle. Throws FormatError, producing nothing, when the
// bundle violates an invariant.
inline std::string encode_case_bundle(const CaseBundle& bundle) {
  if (auto d = validate_bundle(bundle); !d.empty()) {
    throw FormatError("refusing to write invalid bundle '" + bundle.case_id +
                      "': " + d.front().to_string());
  }
  detail::ByteWriter w;
  w.bytes(kBundleMagic);
  w.u32(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(bundle.case_id.size()));
  w.bytes(bundle.case_id);
  w.u32(bundle.num_classes);
  w.u32(static_cast<std::uint32_t>(bundle.scales.size()));
  for (const ScaleSamples& sc : bundle.scales) {
    w.u32(sc.channels);
    w.u32(static_cast<std::uint32_t>(sc.class_samples.size()));
    for (const auto& [class_id, m] : sc.class_samples) {
      w.u32(class_id);
      w.u32(static_cast<std::uint32_t>(m.rows));
      w.matrix_values(m);
    }
    w.u32(static_cast<std::uint32_t>(sc.global_samples.rows));
    w.matrix_values(sc.global_samples);
    w.u32(sc.source_posteriors ? 1u : 0u);
    if (sc.source_posteriors) {
      w.u32(static_cast<std::uint32_t>(sc.source_posteriors->cols));
      w.u32(static_cast<std::uint32_t>(sc.source_posteriors->rows));
      w.matrix_values(*sc.source_posteriors);
    }
  }
  return w.take();
}

inline void write_case_bundle(const CaseBundle& bundle, std::ostream& out) {
  const std::string bytes = encode_case_bundle(bundle);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for bundle '" + bundle.case_id + "'");
}

inline CaseBundle decode_case_bundle(std::string_view data) {
  detail::ByteReader r(data);
  if (data.size() < kBundleMagic.size() || data.substr(0, kBundleMagic.size()) != kBundleMagic) {
    throw DecodeError(0, "bad magic, expected \"XFERFVB1\"");
  }
  r.bytes(kBundleMagic.size(), "magic");

  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version == 0 || version > kBundleVersion) {
    throw DecodeError(version_at, "unsupported version " + std::to_string(version));
  }

  CaseBundle b;
  const std::uint32_t id_len = r.u32("case_id length");
  b.case_id = std::string(r.bytes(id_len, "case_id"));
  const std::size_t classes_at = r.offset();
  b.num_classes = r.u32("num_classes");
  if (b.num_classes < 2) {
    throw DecodeError(classes_at, "num_classes " + std::to_string(b.num_classes) + " < 2");
  }
  const std::size_t scales_at = r.offset();
  const std::uint32_t n_scales = r.u32("scale count");
  if (n_scales == 0) throw DecodeError(scales_at, "bundle declares zero scales");

  std::vector<std::size_t> scale_offsets;
  for (std::uint32_t s = 0; s < n_scales; ++s) {
    scale_offsets.push_back(r.offset());
    ScaleSamples sc;
    sc.channels = r.u32("channels");
    if (sc.channels == 0) throw DecodeError(scale_offsets.back(), "scale declares 0 channels");
    const std::uint32_t n_entries = r.u32("class entry count");
    for (std::uint32_t e = 0; e < n_entries; ++e) {
      const std::size_t entry_at = r.offset();
      const std::uint32_t class_id = r.u32("class_id");
      const std::uint32_t n_rows = r.u32("class row count");
      if (class_id == 0 || class_id >= b.num_classes) {
        throw DecodeError(entry_at, "class_id " + std::to_string(class_id) + " outside 1.." +
                                        std::to_string(b.num_classes - 1));
      }
      if (n_rows == 0) {
        throw DecodeError(entry_at, "class " + std::to_string(class_id) + " entry has zero rows");
      }
      if (sc.class_samples.contains(class_id)) {
        throw DecodeError(entry_at, "duplicate class entry " + std::to_string(class_id));
      }
      sc.class_samples.emplace(class_id, r.matrix(n_rows, sc.channels, "class matrix"));
    }
    const std::uint32_t global_rows = r.u32("global row count");
    sc.global_samples = r.matrix(global_rows, sc.channels, "global matrix");
    const std::size_t flag_at = r.offset();
    const std::uint32_t has_posteriors = r.u32("posterior flag");
    if (has_posteriors > 1) {
      throw DecodeError(flag_at, "posterior flag must be 0 or 1, got " +
                                     std::to_string(has_posteriors));
    }
    if (has_posteriors == 1) {
      const std::uint32_t source_classes = r.u32("source class count");
      const std::uint32_t p_rows = r.u32("posterior row count");
      sc.source_posteriors = r.matrix(p_rows, source_classes, "posterior matrix");
    }
    b.scales.push_back(std::move(sc));
  }
  if (r.remaining() != 0) {
    throw DecodeError(r.offset(), std::to_string(r.remaining()) +
                                      " trailing bytes after declared payload");
  }
  if (auto d = validate_bundle(b); !d.empty()) {
    const std::size_t at = d.front().scale_index ? scale_offsets[*d.front().scale_index - 1] : 0;
    throw DecodeError(at, "invalid bundle: " + d.front().to_string());
  }
  return b;
}

inline CaseBundle read_case_bundle(std::istream& in) {
  std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_case_bundle(data);
}

inline CaseBundle read_case_bundle_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return read_case_bundle(in);
  } catch (const DecodeError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// Writes to a sibling temp file then renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_case_bundle_file(const CaseBundle& bundle, const std::filesystem::path& path) {
  write_file_atomic(path, encode_case_bundle(bundle));
}

// ---------------------------------------------------------------------------
// Performance table: UTF-8 CSV, header `model_id,dice`, one row per model.

inline std::vector<PerformanceRecord> read_performance_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "model_id,dice") {
    throw FormatError("performance table: expected header 'model_id,dice'");
  }
  std::vector<PerformanceRecord> records;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "performance table line " + std::to_string(line_no);
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw FormatError(where + ": expected exactly two fields");
    }
    PerformanceRecord rec;
    rec.model_id = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    if (rec.model_id.empty()) throw FormatError(where + ": empty model_id");
    std::size_t used = 0;
    try {
      rec.dice = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) {
      throw FormatError(where + ": dice '" + value + "' is not a number");
    }
    if (!(rec.dice >= 0.0 && rec.dice <= 1.0)) {
      throw FormatError(where + ": dice " + value + " outside [0, 1]");
    }
    if (!seen.insert(rec.model_id).second) {
      throw FormatError(where + ": duplicate model_id '" + rec.model_id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::string format_performance_table(std::span<const PerformanceRecord> records) {
  std::ostringstream out;
  out.precision(17);
  out << "model_id,dice\n";
  for (const auto& r : records) out << r.model_id << ',' << r.dice << '\n';
  return out.str();
}

}  // namespace ccfv
