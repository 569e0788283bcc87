#include "dcmgnn/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace dcmgnn {
namespace {

constexpr const char* kHeader = "dcmgnn-checkpoint";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_double(std::string& out, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view s, int line) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("checkpoint line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return x;
}

long long parse_int(std::string_view s, int line) {
  long long x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("checkpoint line " + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  }
  return x;
}

void put_tensors(std::string& out, const char* group, const ModelParams& params) {
  for (const auto& t : params.tensors()) {
    out += "tensor ";
    out += group;
    out += ' ' + t.name + ' ' + std::to_string(t.value.rows()) + ' ' + std::to_string(t.value.cols());
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      out += ' ';
      put_double(out, t.value.data()[i]);
    }
    out += '\n';
  }
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) parts.push_back(line.substr(start, i - start));
  }
  return parts;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::string body = std::string(kHeader) + ' ' + std::to_string(Checkpoint::kVersion) + '\n';
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw Error("checkpoint meta '" + k + "' contains whitespace");
    }
    body += "meta " + k + ' ' + v + '\n';
  }
  put_tensors(body, "params", ckpt.params);
  if (ckpt.best) put_tensors(body, "best", *ckpt.best);
  if (ckpt.adam) {
    body += "adam " + std::to_string(ckpt.adam->step) + ' ';
    put_double(body, ckpt.adam->beta1);
    body += ' ';
    put_double(body, ckpt.adam->beta2);
    body += ' ';
    put_double(body, ckpt.adam->eps);
    body += '\n';
    put_tensors(body, "adam_m", ckpt.adam->m);
    put_tensors(body, "adam_v", ckpt.adam->v);
  }
  for (const auto& [k, v] : ckpt.rng) body += "rng " + k + ' ' + v + '\n';
  char sum[32];
  std::snprintf(sum, sizeof sum, "%016llx", static_cast<unsigned long long>(fnv1a(body)));
  body += "checksum " + std::string(sum) + '\n';

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp.string());
    out << body;
    if (!out) throw Error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  const std::size_t tail = text.rfind("checksum ");
  if (tail == std::string::npos || (tail > 0 && text[tail - 1] != '\n')) {
    throw ParseError("checkpoint " + path.string() + " is truncated (no checksum)");
  }
  const std::string_view body(text.data(), tail);
  std::string_view stored(text.data() + tail + 9, text.size() - tail - 9);
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.remove_suffix(1);
  char expect[32];
  std::snprintf(expect, sizeof expect, "%016llx", static_cast<unsigned long long>(fnv1a(body)));
  if (stored != expect) throw ParseError("checkpoint " + path.string() + " failed its checksum");

  Checkpoint ckpt;
  ModelParams best, m, v;
  bool has_best = false, has_adam = false;
  AdamState adam;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    const std::string_view line = body.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const auto parts = split_ws(line);
    if (parts.empty()) continue;
    const auto bad = [&](const std::string& what) {
      return ParseError("checkpoint line " + std::to_string(line_no) + ": " + what);
    };
    if (line_no == 1) {
      if (parts.size() != 2 || parts[0] != kHeader) throw bad("not a dcmgnn checkpoint");
      if (parse_int(parts[1], line_no) != Checkpoint::kVersion) {
        throw bad("unsupported version " + std::string(parts[1]));
      }
      continue;
    }
    if (parts[0] == "meta") {
      if (parts.size() < 2) throw bad("meta without key");
      const std::size_t key_end = line.find(parts[1]) + parts[1].size();
      std::string value = key_end < line.size() ? std::string(line.substr(key_end + 1)) : std::string();
      ckpt.meta[std::string(parts[1])] = value;
    } else if (parts[0] == "tensor") {
      if (parts.size() < 5) throw bad("short tensor record");
      const auto rows = parse_int(parts[3], line_no);
      const auto cols = parse_int(parts[4], line_no);
      if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != parts.size() - 5) {
        throw bad("tensor '" + std::string(parts[2]) + "' has the wrong number of values");
      }
      Matrix value(rows, cols);
      for (Eigen::Index i = 0; i < value.size(); ++i) {
        value.data()[i] = parse_double(parts[5 + static_cast<std::size_t>(i)], line_no);
      }
      ModelParams* target = nullptr;
      if (parts[1] == "params") {
        target = &ckpt.params;
      } else if (parts[1] == "best") {
        target = &best;
        has_best = true;
      } else if (parts[1] == "adam_m") {
        target = &m;
      } else if (parts[1] == "adam_v") {
        target = &v;
      } else {
        throw bad("unknown tensor group '" + std::string(parts[1]) + "'");
      }
      target->add(std::string(parts[2]), std::move(value));
    } else if (parts[0] == "adam") {
      if (parts.size() != 5) throw bad("bad adam record");
      adam.step = parse_int(parts[1], line_no);
      adam.beta1 = parse_double(parts[2], line_no);
      adam.beta2 = parse_double(parts[3], line_no);
      adam.eps = parse_double(parts[4], line_no);
      has_adam = true;
    } else if (parts[0] == "rng") {
      if (parts.size() < 3) throw bad("bad rng record");
      const std::size_t key_end = line.find(parts[1]) + parts[1].size();
      ckpt.rng[std::string(parts[1])] = std::string(line.substr(key_end + 1));
    } else {
      throw bad("unknown record '" + std::string(parts[0]) + "'");
    }
  }
  if (line_no == 0) throw ParseError("checkpoint " + path.string() + " is empty");
  if (has_best) ckpt.best = std::move(best);
  if (has_adam) {
    adam.m = std::move(m);
    adam.v = std::move(v);
    ckpt.adam = std::move(adam);
  }
  return ckpt;
}

}  // namespace dcmgnn
