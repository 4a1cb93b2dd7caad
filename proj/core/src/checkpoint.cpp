// Copyright 2026 The fvem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fvem/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "fvem/error.hpp"

namespace fvem {
namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    if (offset_ + static_cast<std::size_t>(width) > bytes_.size()) {
      throw FormatError("checkpoint: truncated at byte offset " + std::to_string(offset_));
    }
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v |= std::uint64_t{bytes_[offset_++]} << (8 * b);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint(8)); }
  std::vector<double> f64s(std::size_t n) {
    if (n > remaining() / 8) {
      throw FormatError("checkpoint: truncated at byte offset " + std::to_string(offset_));
    }
    std::vector<double> out(n);
    for (double& v : out) v = f64();
    return out;
  }
  [[nodiscard]] std::size_t offset() const { return offset_; }
  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - offset_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t offset_ = 0;
};

}  // namespace

Checkpoint make_checkpoint(const GlobalState& global, const std::vector<ClientState>& clients) {
  Checkpoint c;
  c.round = global.round;
  c.w = global.w;
  c.theta = flatten(global.theta);
  for (const ClientState& client : clients) {
    c.posteriors.push_back(client.posterior);
    c.taus.push_back(client.tau);
  }
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const std::size_t d = ckpt.w.size();
  Writer out;
  out.bytes = {'F', 'V', 'E', 'M'};
  out.u32(kCheckpointVersion);
  out.u64(d);
  out.u64(ckpt.posteriors.size());
  out.u64(ckpt.round);
  out.u64(ckpt.theta.size());
  out.f64s(ckpt.w);
  out.f64s(ckpt.theta);
  for (std::size_t j = 0; j < ckpt.posteriors.size(); ++j) {
    const auto& p = ckpt.posteriors[j];
    if (p.mu.size() != d || p.pi.size() != d) {
      throw DimensionError("checkpoint: client " + std::to_string(j) + " posterior dimension");
    }
    out.f64s(p.mu);
    out.f64s(p.pi);
    out.f64(ckpt.taus.at(j));
  }
  return std::move(out.bytes);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || bytes[0] != 'F' || bytes[1] != 'V' || bytes[2] != 'E' ||
      bytes[3] != 'M') {
    throw FormatError("checkpoint: bad magic at byte offset 0");
  }
  Reader in(bytes.subspan(4));
  const auto version = static_cast<std::uint32_t>(in.uint(4));
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                      " at byte offset 4");
  }
  const std::size_t d = in.uint(8);
  const std::size_t clients = in.uint(8);
  Checkpoint c;
  c.round = in.uint(8);
  const std::size_t base_len = in.uint(8);
  c.w = in.f64s(d);
  c.theta = in.f64s(base_len);
  for (std::size_t j = 0; j < clients; ++j) {
    VariationalPosterior p;
    p.mu = in.f64s(d);
    p.pi = in.f64s(d);
    c.posteriors.push_back(std::move(p));
    c.taus.push_back(in.f64());
  }
  if (in.remaining() != 0) {
    throw FormatError("checkpoint: trailing data at byte offset " + std::to_string(4 + in.offset()));
  }
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const GlobalState& global,
                      const std::vector<ClientState>& clients) {
  const auto bytes = encode_checkpoint(make_checkpoint(global, clients));
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

std::string checkpoint_name(std::size_t round) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "round_%04zu.fvem", round);
  return buf;
}

}  // namespace fvem
