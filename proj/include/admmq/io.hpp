// Copyright 2026 The admmq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary file formats. All integers and floats are little-endian.
//
// Layer problem (.qslp):
//   "QSLP" | u16 version | u8 payload (0 activations, 1 hessian)
//   | u8 element bytes (4 or 8) | u32 n | u32 p | u32 N
//   | Ŵ (n*p, row-major) | X (N*n) or H (n*n)
//
// Solution (.qsls):
//   "QSLS" | u16 version | u32 n | u32 p | u8 bits | u8 symmetric
//   | u8 granularity | u8 reserved | u32 group size | u32 group count
//   | group count * (f64 scale, f64 zero) | n*p u8 codes | f64 objective
//   | u16 name length | solver name bytes

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "admmq/error.hpp"
#include "admmq/grid.hpp"
#include "admmq/linalg.hpp"
#include "admmq/matrix.hpp"
#include "admmq/problem.hpp"
#include "admmq/solution.hpp"

namespace admmq {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

namespace detail {

class ByteWriter {
 public:
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  template <typename T>
  void scalar(T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(std::begin(buf), std::end(buf));
    }
    bytes_.insert(bytes_.end(), std::begin(buf), std::end(buf));
  }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expect(std::string_view magic) {
    need(magic.size());
    if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
      throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
    }
    pos_ += magic.size();
  }

  template <typename T>
  T scalar() {
    need(sizeof(T));
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(std::begin(buf), std::end(buf));
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }

  std::string string(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t count) const {
    if (remaining() < count) throw FormatError("unexpected end of file");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace detail

enum class Payload : std::uint8_t { kActivations = 0, kHessian = 1 };
enum class ElementType : std::uint8_t { kFloat32 = 4, kFloat64 = 8 };

inline constexpr std::uint16_t kProblemFileVersion = 1;
inline constexpr std::uint16_t kSolutionFileVersion = 1;

struct ProblemFile {
  Payload payload = Payload::kActivations;
  ElementType element = ElementType::kFloat64;
  std::uint32_t samples = 0;  // N; informational for Hessian payloads
  Matrix w_hat;               // n x p
  Matrix data;                // X (N x n) or H (n x n)

  std::size_t n() const { return w_hat.rows(); }
  std::size_t p() const { return w_hat.cols(); }
};

namespace detail {

inline void write_block(ByteWriter& w, const Matrix& m, ElementType type) {
  for (double v : m.values()) {
    if (type == ElementType::kFloat32) {
      w.scalar(static_cast<float>(v));
    } else {
      w.scalar(v);
    }
  }
}

inline Matrix read_block(ByteReader& r, std::size_t rows, std::size_t cols,
                         ElementType type) {
  Matrix m(rows, cols);
  for (double& v : m.values()) {
    v = type == ElementType::kFloat32 ? static_cast<double>(r.scalar<float>())
                                      : r.scalar<double>();
  }
  return m;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_problem(const ProblemFile& f) {
  const std::size_t n = f.n();
  const bool hessian = f.payload == Payload::kHessian;
  if (hessian ? (f.data.rows() != n || f.data.cols() != n)
              : (f.data.cols() != n || f.data.rows() != f.samples)) {
    throw InvalidArgument("problem payload shape " + f.data.shape_string() +
                          " does not match the declared dimensions");
  }
  detail::ByteWriter w;
  w.raw("QSLP");
  w.scalar(kProblemFileVersion);
  w.scalar(static_cast<std::uint8_t>(f.payload));
  w.scalar(static_cast<std::uint8_t>(f.element));
  w.scalar(static_cast<std::uint32_t>(n));
  w.scalar(static_cast<std::uint32_t>(f.p()));
  w.scalar(f.samples);
  detail::write_block(w, f.w_hat, f.element);
  detail::write_block(w, f.data, f.element);
  return w.take();
}

inline ProblemFile decode_problem(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect("QSLP");
  const auto version = r.scalar<std::uint16_t>();
  if (version != kProblemFileVersion) {
    throw FormatError("unsupported problem file version " +
                      std::to_string(version));
  }
  ProblemFile f;
  const auto payload = r.scalar<std::uint8_t>();
  if (payload > 1) throw FormatError("unknown payload kind");
  f.payload = static_cast<Payload>(payload);
  const auto element = r.scalar<std::uint8_t>();
  if (element != 4 && element != 8) throw FormatError("unknown element type");
  f.element = static_cast<ElementType>(element);
  const std::uint64_t n = r.scalar<std::uint32_t>();
  const std::uint64_t p = r.scalar<std::uint32_t>();
  f.samples = r.scalar<std::uint32_t>();
  const std::uint64_t data_rows =
      f.payload == Payload::kHessian ? n : std::uint64_t{f.samples};
  const std::uint64_t expected = (n * p + data_rows * n) * element;
  if (r.remaining() != expected) {
    throw FormatError("payload is " + std::to_string(r.remaining()) +
                      " bytes, header declares " + std::to_string(expected));
  }
  if (n == 0 || p == 0) throw FormatError("problem dimensions must be >= 1");
  f.w_hat = detail::read_block(r, n, p, f.element);
  f.data = detail::read_block(r, data_rows, n, f.element);
  if (f.payload == Payload::kHessian) SymmetricMatrix::validate(f.data);
  return f;
}

inline void write_problem_file(const std::filesystem::path& path,
                               const ProblemFile& f) {
  detail::write_all(path, encode_problem(f));
}

inline ProblemFile read_problem_file(const std::filesystem::path& path) {
  try {
    return decode_problem(detail::read_all(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Builds the layer problem. Hessian payloads are treated as the Gram
/// matrix XᵀX, so λ and damping apply the same way for both payload kinds.
inline LayerProblem to_layer_problem(const ProblemFile& f, double lambda,
                                     double damp_factor,
                                     DampingConvention convention) {
  HessianBuild h =
      f.payload == Payload::kActivations
          ? build_hessian({f.data}, lambda, damp_factor, convention)
          : HessianAccumulator::shifted_gram(f.data, lambda, damp_factor,
                                             convention);
  return make_problem(f.w_hat, h, lambda);
}

inline std::vector<std::uint8_t> encode_solution(const QuantizedSolution& s) {
  const CodedMatrix& c = s.codes;
  const QuantGrid& g = c.grid;
  detail::ByteWriter w;
  w.raw("QSLS");
  w.scalar(kSolutionFileVersion);
  w.scalar(static_cast<std::uint32_t>(c.rows));
  w.scalar(static_cast<std::uint32_t>(c.cols));
  w.scalar(static_cast<std::uint8_t>(g.spec().bits));
  w.scalar(static_cast<std::uint8_t>(g.spec().symmetric ? 1 : 0));
  w.scalar(static_cast<std::uint8_t>(g.spec().granularity));
  w.scalar(std::uint8_t{0});
  w.scalar(static_cast<std::uint32_t>(g.spec().group_size));
  w.scalar(static_cast<std::uint32_t>(g.group_count()));
  for (std::size_t k = 0; k < g.group_count(); ++k) {
    w.scalar(g.scale(k));
    w.scalar(g.zero(k));
  }
  for (std::uint8_t code : c.codes) w.scalar(code);
  w.scalar(s.objective);
  w.scalar(static_cast<std::uint16_t>(s.solver.size()));
  w.raw(s.solver);
  return w.take();
}

inline QuantizedSolution decode_solution(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect("QSLS");
  if (r.scalar<std::uint16_t>() != kSolutionFileVersion) {
    throw FormatError("unsupported solution file version");
  }
  const std::size_t n = r.scalar<std::uint32_t>();
  const std::size_t p = r.scalar<std::uint32_t>();
  GridSpec spec;
  spec.bits = r.scalar<std::uint8_t>();
  spec.symmetric = r.scalar<std::uint8_t>() != 0;
  const auto gran = r.scalar<std::uint8_t>();
  if (gran > 2) throw FormatError("unknown granularity");
  spec.granularity = static_cast<Granularity>(gran);
  r.scalar<std::uint8_t>();
  spec.group_size = r.scalar<std::uint32_t>();
  const std::size_t groups = r.scalar<std::uint32_t>();
  if (groups != QuantGrid::group_count_for(spec, n, p)) {
    throw FormatError("group count does not match the grid layout");
  }
  std::vector<double> scales(groups);
  std::vector<double> zeros(groups);
  for (std::size_t k = 0; k < groups; ++k) {
    scales[k] = r.scalar<double>();
    zeros[k] = r.scalar<double>();
  }
  QuantizedSolution s;
  s.codes = CodedMatrix{n, p, std::vector<std::uint8_t>(n * p),
                        QuantGrid(spec, n, p, std::move(scales),
                                  std::move(zeros))};
  for (auto& code : s.codes.codes) {
    code = r.scalar<std::uint8_t>();
    if (code > spec.max_code()) throw FormatError("code out of range");
  }
  s.objective = r.scalar<double>();
  s.solver = r.string(r.scalar<std::uint16_t>());
  if (r.remaining() != 0) throw FormatError("trailing bytes in solution");
  s.w_q = s.codes.decode();
  return s;
}

}  // namespace admmq
