// Copyright 2026 The geowarp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "geowarp/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "geowarp/errors.hpp"

namespace geowarp::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {

constexpr float kFloMagic = 202021.25f;

// Minimal cursor over a byte buffer for the ASCII headers of PNM/PFM.
class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  std::string token() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      ++pos_;
    }
    if (start == pos_) fail("unexpected end of header");
    return bytes_.substr(start, pos_ - start);
  }

  long integer() {
    const std::string t = token();
    long v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) fail("bad integer '" + t + "'");
    return v;
  }

  double real() {
    const std::string t = token();
    double v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) fail("bad number '" + t + "'");
    return v;
  }

  // Exactly one whitespace byte separates the header from the payload.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      fail("missing separator before pixel data");
    }
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(what_ + ": " + msg); }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

template <class T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <class T>
void append(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void check_dims(long w, long h, HeaderReader& r) {
  if (w <= 0 || h <= 0 || w > (1L << 20) || h > (1L << 20)) r.fail("invalid dimensions");
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, p);
}

Image read_pnm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  HeaderReader r(bytes, path.string());
  const std::string magic = r.token();
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    r.fail("expected P5 or P6, got '" + magic + "'");
  }
  const long w = r.integer();
  const long h = r.integer();
  check_dims(w, h, r);
  if (r.integer() != 255) r.fail("only maxval 255 is supported");
  const std::size_t off = r.payload_offset();
  const std::size_t n = static_cast<std::size_t>(w * h * channels);
  if (bytes.size() != off + n) r.fail("payload size mismatch");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = static_cast<unsigned char>(bytes[off + i]) / 255.0;
  }
  return Image(static_cast<int>(w), static_cast<int>(h), channels, std::move(data));
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  std::string out = (image.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(image.width()) +
                    " " + std::to_string(image.height()) + "\n255\n";
  out.reserve(out.size() + image.size());
  for (double v : image.values()) out.push_back(static_cast<char>(quantize(v)));
  write_file(path, out);
}

Mask read_mask(const std::filesystem::path& path) {
  Image img = read_pnm(path);
  if (img.channels() != 1) throw ParseError(path.string() + ": mask must be a PGM (P5)");
  return Mask(static_cast<Grid>(std::move(img)));
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  write_pnm(path, Image(static_cast<const Grid&>(mask)));
}

Grid read_pfm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  HeaderReader r(bytes, path.string());
  const std::string magic = r.token();
  int channels = 0;
  if (magic == "Pf") {
    channels = 1;
  } else if (magic == "PF") {
    channels = 3;
  } else {
    r.fail("expected Pf or PF, got '" + magic + "'");
  }
  const long w = r.integer();
  const long h = r.integer();
  check_dims(w, h, r);
  const double scale = r.real();
  if (!(scale < 0.0)) r.fail("only little-endian PFM (negative scale) is supported");
  const std::size_t off = r.payload_offset();
  const std::size_t n = static_cast<std::size_t>(w * h * channels);
  if (bytes.size() != off + n * sizeof(float)) r.fail("payload size mismatch");

  Grid g(static_cast<int>(w), static_cast<int>(h), channels);
  const char* p = bytes.data() + off;
  for (long row = h - 1; row >= 0; --row) {
    for (long x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        g(static_cast<int>(x), static_cast<int>(row), c) = load<float>(p);
        p += sizeof(float);
      }
    }
  }
  return g;
}

void write_pfm(const std::filesystem::path& path, const Grid& grid) {
  if (grid.channels() != 1 && grid.channels() != 3) {
    throw DimensionError("PFM stores one or three channels");
  }
  std::string out = (grid.channels() == 1 ? "Pf\n" : "PF\n") + std::to_string(grid.width()) +
                    " " + std::to_string(grid.height()) + "\n-1.0\n";
  for (int row = grid.height() - 1; row >= 0; --row) {
    for (int x = 0; x < grid.width(); ++x) {
      for (int c = 0; c < grid.channels(); ++c) append(out, static_cast<float>(grid(x, row, c)));
    }
  }
  write_file(path, out);
}

FlowField read_flo(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 12) throw ParseError(path.string() + ": truncated .flo header");
  if (load<float>(bytes.data()) != kFloMagic) {
    throw ParseError(path.string() + ": bad .flo magic");
  }
  const std::int32_t w = load<std::int32_t>(bytes.data() + 4);
  const std::int32_t h = load<std::int32_t>(bytes.data() + 8);
  if (w <= 0 || h <= 0 || w > (1 << 20) || h > (1 << 20)) {
    throw ParseError(path.string() + ": invalid .flo dimensions");
  }
  const std::size_t n = static_cast<std::size_t>(w) * h * 2;
  if (bytes.size() != 12 + n * sizeof(float)) {
    throw ParseError(path.string() + ": .flo payload size mismatch");
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = load<float>(bytes.data() + 12 + 4 * i);
  return FlowField(Grid(w, h, 2, std::move(data)));
}

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  std::string out;
  out.reserve(12 + flow.size() * sizeof(float));
  append(out, kFloMagic);
  append(out, static_cast<std::int32_t>(flow.width()));
  append(out, static_cast<std::int32_t>(flow.height()));
  for (double v : flow.values()) append(out, static_cast<float>(v));
  write_file(path, out);
}

std::vector<Matrix34> read_poses(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Matrix34> poses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Matrix34 m;
    std::string tok;
    int n = 0;
    while (ls >> tok) {
      double v = 0;
      const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size() || n >= 12) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) +
                         ": expected 12 numbers per pose line");
      }
      m(n / 4, n % 4) = v;
      ++n;
    }
    if (n != 12) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected 12 numbers per pose line");
    }
    poses.push_back(m);
  }
  return poses;
}

void write_poses(const std::filesystem::path& path, const std::vector<Matrix34>& poses) {
  std::string out;
  for (const Matrix34& m : poses) {
    for (int i = 0; i < 12; ++i) {
      out += format_double(m(i / 4, i % 4));
      out += i == 11 ? '\n' : ' ';
    }
  }
  write_file(path, out);
}

}  // namespace geowarp::io
