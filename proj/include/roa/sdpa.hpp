#pragma once

// SDPA sparse (".dat-s") text for SdpProblem.
//
// The primal standard form  min <C,X>  s.t. <A_i,X> = b_i, X PSD  is the SDPA
// dual side: F_i = A_i, c_i = b_i, F_0 = -C. Entry lines are
// "matno blkno i j value" with 1-based indices and i <= j.
//
// SDPA has no free variables. When a problem has k of them, they are written
// as a trailing diagonal block of size -2k holding (x+, x-) pairs and a
// leading comment "* roa-free k" lets import_sdpa fold them back.

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "roa/error.hpp"
#include "roa/format.hpp"
#include "roa/sdp.hpp"

namespace roa {

inline std::string export_sdpa(const SdpProblem& prob) {
  prob.validate();
  std::ostringstream os;
  const int k = prob.num_free;
  const int nblocks = static_cast<int>(prob.block_dims.size()) + (k > 0 ? 1 : 0);
  if (k > 0) os << "* roa-free " << k << "\n";
  os << prob.constraints.size() << "\n" << nblocks << "\n";
  for (std::size_t b = 0; b < prob.block_dims.size(); ++b) {
    if (b > 0) os << ' ';
    os << prob.block_dims[b];
  }
  if (k > 0) os << (prob.block_dims.empty() ? "" : " ") << -2 * k;
  os << "\n";
  for (std::size_t i = 0; i < prob.constraints.size(); ++i) {
    if (i > 0) os << ' ';
    os << format_double(prob.constraints[i].rhs);
  }
  os << "\n";

  // Sorted, merged entries per (matno, block, i, j).
  using Key = std::tuple<int, int, int, int>;
  std::map<Key, double> entries;
  const int free_block = static_cast<int>(prob.block_dims.size()) + 1;
  auto put_free = [&](int matno, int j, double v) {
    entries[{matno, free_block, 2 * j + 1, 2 * j + 1}] += v;
    entries[{matno, free_block, 2 * j + 2, 2 * j + 2}] += -v;
  };
  for (const auto& e : prob.objective) entries[{0, e.block + 1, e.row + 1, e.col + 1}] += -e.value;
  for (int j = 0; j < static_cast<int>(prob.free_objective.size()); ++j) {
    if (prob.free_objective[static_cast<std::size_t>(j)] != 0.0) {
      put_free(0, j, -prob.free_objective[static_cast<std::size_t>(j)]);
    }
  }
  for (std::size_t i = 0; i < prob.constraints.size(); ++i) {
    const int matno = static_cast<int>(i) + 1;
    for (const auto& e : prob.constraints[i].entries) entries[{matno, e.block + 1, e.row + 1, e.col + 1}] += e.value;
    for (const auto& [j, v] : prob.constraints[i].free_coeffs) put_free(matno, j, v);
  }
  for (const auto& [key, v] : entries) {
    if (v == 0.0) continue;
    const auto& [matno, blk, i, j] = key;
    os << matno << ' ' << blk << ' ' << i << ' ' << j << ' ' << format_double(v) << "\n";
  }
  return os.str();
}

inline SdpProblem import_sdpa(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int free_count = 0;
  std::vector<std::string> body;
  bool header = true;
  while (std::getline(in, line)) {
    if (header && !line.empty() && (line[0] == '*' || line[0] == '"')) {
      std::istringstream ls(line.substr(1));
      std::string tag;
      if (ls >> tag && tag == "roa-free") ls >> free_count;
      continue;
    }
    header = false;
    for (char& c : line) {
      if (c == ',' || c == '{' || c == '}' || c == '(' || c == ')') c = ' ';
    }
    body.push_back(line);
  }
  std::istringstream bs([&] {
    std::string all;
    for (const auto& l : body) all += l + "\n";
    return all;
  }());

  auto fail = [](const std::string& msg) -> void { throw ParseError("SDPA: " + msg); };
  int m = 0;
  int nblocks = 0;
  if (!(bs >> m >> nblocks) || m < 0 || nblocks < 0) fail("bad header counts");
  std::vector<int> raw(static_cast<std::size_t>(nblocks));
  for (auto& d : raw) {
    if (!(bs >> d) || d == 0) fail("bad block structure");
  }
  SdpProblem p;
  p.constraints.resize(static_cast<std::size_t>(m));
  for (auto& c : p.constraints) {
    if (!(bs >> c.rhs)) fail("bad right-hand side vector");
  }

  const bool has_free = free_count > 0;
  if (has_free && (raw.empty() || raw.back() != -2 * free_count)) fail("roa-free comment does not match last block");
  const std::size_t regular = raw.size() - (has_free ? 1 : 0);
  // Diagonal (negative-size) blocks become runs of 1x1 blocks.
  std::vector<int> first_block(regular);
  for (std::size_t b = 0; b < regular; ++b) {
    first_block[b] = static_cast<int>(p.block_dims.size());
    if (raw[b] > 0) {
      p.block_dims.push_back(raw[b]);
    } else {
      for (int i = 0; i < -raw[b]; ++i) p.block_dims.push_back(1);
    }
  }
  p.num_free = free_count;
  if (has_free) p.free_objective.assign(static_cast<std::size_t>(free_count), 0.0);

  int matno = 0, blk = 0, i = 0, j = 0;
  double v = 0.0;
  while (bs >> matno >> blk >> i >> j >> v) {
    if (matno < 0 || matno > m || blk < 1 || blk > nblocks || i < 1 || j < 1) fail("entry index out of range");
    if (i > j) std::swap(i, j);
    const std::size_t b = static_cast<std::size_t>(blk - 1);
    if (has_free && b == regular) {
      if (i != j || i > 2 * free_count) fail("free block entry must be diagonal");
      if (i % 2 == 0) continue;  // x- mirrors x+
      const int var = (i - 1) / 2;
      if (matno == 0) {
        p.free_objective[static_cast<std::size_t>(var)] = -v;
      } else {
        p.constraints[static_cast<std::size_t>(matno - 1)].free_coeffs.emplace_back(var, v);
      }
      continue;
    }
    SdpEntry e;
    if (raw[b] > 0) {
      if (j > raw[b]) fail("entry outside block");
      e = {first_block[b], i - 1, j - 1, v};
    } else {
      if (i != j || i > -raw[b]) fail("diagonal block entry must be diagonal");
      e = {first_block[b] + i - 1, 0, 0, v};
    }
    if (matno == 0) {
      e.value = -v;
      p.objective.push_back(e);
    } else {
      p.constraints[static_cast<std::size_t>(matno - 1)].entries.push_back(e);
    }
  }
  if (!bs.eof()) fail("malformed entry line");
  p.validate();
  return p;
}

}  // namespace roa
