// Copyright 2026 The effmp Authors
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

#include "effmp/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "effmp/errors.hpp"
#include "effmp/rng.hpp"

namespace effmp
{

namespace
{

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string format_g17(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string shape_token(const Shape & shape)
{
  if (shape.empty()) {
    return "1";
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out << (i ? "x" : "") << shape[i];
  }
  return out.str();
}

Shape parse_shape_token(const std::string & tok)
{
  Shape shape;
  std::size_t pos = 0;
  while (pos < tok.size()) {
    const std::size_t next = tok.find('x', pos);
    const std::string part = tok.substr(pos, next == std::string::npos ? next : next - pos);
    try {
      shape.push_back(static_cast<Eigen::Index>(std::stoll(part)));
    } catch (const std::exception &) {
      throw ParseError("bad shape token '" + tok + "'");
    }
    if (next == std::string::npos) {
      break;
    }
    pos = next + 1;
  }
  if (shape.empty() || shape.size() > 2) {
    throw ParseError("bad shape token '" + tok + "'");
  }
  return shape;
}

std::vector<std::uint8_t> doubles_to_le_bytes(const std::vector<double> & values)
{
  std::vector<std::uint8_t> bytes;
  bytes.reserve(values.size() * 8);
  for (const double v : values) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      bytes.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xff));
    }
  }
  return bytes;
}

/// stream >> double does not reliably accept "inf"; this does.
double parse_header_double(std::istringstream & iss, const std::string & key)
{
  std::string tok;
  if (!(iss >> tok)) {
    throw ParseError("missing value for checkpoint header " + key);
  }
  if (tok == "inf") {
    return std::numeric_limits<double>::infinity();
  }
  if (tok == "-inf") {
    return -std::numeric_limits<double>::infinity();
  }
  try {
    return std::stod(tok);
  } catch (const std::exception &) {
    throw ParseError("bad value '" + tok + "' for checkpoint header " + key);
  }
}

std::vector<double> le_bytes_to_doubles(const std::vector<std::uint8_t> & bytes)
{
  if (bytes.size() % 8 != 0) {
    throw ParseError("checkpoint payload is not a whole number of 64-bit values");
  }
  std::vector<double> values(bytes.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t u = 0;
    for (int b = 7; b >= 0; --b) {
      u = (u << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
    }
    values[i] = std::bit_cast<double>(u);
  }
  return values;
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t> & bytes)
{
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    std::uint32_t chunk = static_cast<std::uint32_t>(bytes[i]) << 16;
    const std::size_t remain = bytes.size() - i;
    if (remain > 1) {
      chunk |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
    }
    if (remain > 2) {
      chunk |= bytes[i + 2];
    }
    out.push_back(kAlphabet[(chunk >> 18) & 0x3f]);
    out.push_back(kAlphabet[(chunk >> 12) & 0x3f]);
    out.push_back(remain > 1 ? kAlphabet[(chunk >> 6) & 0x3f] : '=');
    out.push_back(remain > 2 ? kAlphabet[chunk & 0x3f] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string & text)
{
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') {
      return c - 'A';
    }
    if (c >= 'a' && c <= 'z') {
      return c - 'a' + 26;
    }
    if (c >= '0' && c <= '9') {
      return c - '0' + 52;
    }
    if (c == '+') {
      return 62;
    }
    if (c == '/') {
      return 63;
    }
    return -1;
  };
  if (text.size() % 4 != 0) {
    throw ParseError("base64 payload length must be a multiple of 4");
  }
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        vals[j] = 0;
        ++pad;
      } else {
        vals[j] = value_of(c);
        if (vals[j] < 0 || pad > 0) {
          throw ParseError("bad base64 payload");
        }
      }
    }
    const std::uint32_t chunk = (static_cast<std::uint32_t>(vals[0]) << 18) |
                                (static_cast<std::uint32_t>(vals[1]) << 12) |
                                (static_cast<std::uint32_t>(vals[2]) << 6) |
                                static_cast<std::uint32_t>(vals[3]);
    out.push_back(static_cast<std::uint8_t>((chunk >> 16) & 0xff));
    if (pad < 2) {
      out.push_back(static_cast<std::uint8_t>((chunk >> 8) & 0xff));
    }
    if (pad < 1) {
      out.push_back(static_cast<std::uint8_t>(chunk & 0xff));
    }
  }
  return out;
}

std::uint64_t Checkpoint::config_hash() const
{
  return fnv1a(config_line);
}

const CheckpointRecord * Checkpoint::find(const std::string & name) const
{
  for (const auto & r : records) {
    if (r.name == name) {
      return &r;
    }
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint & ckpt, const std::filesystem::path & path)
{
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write checkpoint " + path.string());
  }
  out << "CKPT v1\n";
  out << "CONFIG " << ckpt.config_line << "\n";
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(ckpt.config_hash()));
    out << "HASH " << buf << "\n";
  }
  out << "STEP " << ckpt.step << "\n";
  out << "LR " << format_g17(ckpt.lr) << "\n";
  out << "SCHED_BEST " << format_g17(ckpt.sched_best) << "\n";
  out << "SCHED_BAD " << ckpt.sched_bad << "\n";
  out << "STOP_BAD " << ckpt.stop_bad << "\n";
  out << "BEST_VAL " << format_g17(ckpt.best_val) << "\n";
  for (const auto & r : ckpt.records) {
    out << r.name << ' ' << shape_token(r.shape) << ' '
        << base64_encode(doubles_to_le_bytes(r.values)) << "\n";
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open checkpoint " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != "CKPT v1") {
    throw ParseError("not a CKPT v1 file: " + path.string());
  }
  Checkpoint ckpt;
  bool in_header = true;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::istringstream iss(line);
    std::string key;
    iss >> key;
    if (in_header) {
      if (key == "CONFIG") {
        std::string rest;
        std::getline(iss, rest);
        if (!rest.empty() && rest.front() == ' ') {
          rest.erase(rest.begin());
        }
        ckpt.config_line = rest;
        continue;
      }
      if (key == "HASH") {
        continue;  // recomputed from the config line
      }
      if (key == "STEP") {
        iss >> ckpt.step;
        continue;
      }
      if (key == "LR") {
        ckpt.lr = parse_header_double(iss, key);
        continue;
      }
      if (key == "SCHED_BEST") {
        ckpt.sched_best = parse_header_double(iss, key);
        continue;
      }
      if (key == "SCHED_BAD") {
        iss >> ckpt.sched_bad;
        continue;
      }
      if (key == "STOP_BAD") {
        iss >> ckpt.stop_bad;
        continue;
      }
      if (key == "BEST_VAL") {
        ckpt.best_val = parse_header_double(iss, key);
        continue;
      }
      in_header = false;
    }
    std::string shape_tok;
    std::string payload;
    if (!(iss >> shape_tok >> payload)) {
      throw ParseError("bad checkpoint record '" + line + "'");
    }
    CheckpointRecord rec;
    rec.name = key;
    rec.shape = parse_shape_token(shape_tok);
    rec.values = le_bytes_to_doubles(base64_decode(payload));
    Eigen::Index expected = 1;
    for (const auto d : rec.shape) {
      expected *= d;
    }
    if (static_cast<Eigen::Index>(rec.values.size()) != expected) {
      throw ParseError("record " + rec.name + " payload does not match its shape");
    }
    ckpt.records.push_back(std::move(rec));
  }
  return ckpt;
}

}  // namespace effmp
