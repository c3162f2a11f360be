#include "mthash/hash_code.hpp"

#include <bit>
#include <fstream>

#include "mthash/binary_io.hpp"
#include "mthash/error.hpp"

namespace mthash {

HashCode HashCode::from_signs(std::span<const std::int8_t> signs) {
  HashCode c(signs.size());
  for (std::size_t j = 0; j < signs.size(); ++j) {
    if (signs[j] > 0) c.set(j, true);
  }
  return c;
}

void HashCode::set(std::size_t j, bool value) {
  const std::uint64_t mask = std::uint64_t{1} << (j & 63);
  if (value) {
    words_[j >> 6] |= mask;
  } else {
    words_[j >> 6] &= ~mask;
  }
}

int hamming(const HashCode& a, const HashCode& b) {
  if (a.l() != b.l()) throw ShapeMismatch("hamming: codes have different bit widths");
  auto wa = a.words();
  auto wb = b.words();
  int d = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) d += std::popcount(wa[i] ^ wb[i]);
  return d;
}

void save_codes(const std::filesystem::path& path, std::span<const HashCode> codes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::uint64_t l = codes.empty() ? 0 : codes.front().l();
  io::write_u64(out, codes.size());
  io::write_u64(out, l);
  for (const auto& c : codes) {
    if (c.l() != l) throw ShapeMismatch("save_codes: mixed bit widths");
    for (auto w : c.words()) io::write_u64(out, w);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<HashCode> load_codes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open codes file " + path.string());
  const std::uint64_t n = io::read_u64(in);
  const std::uint64_t l = io::read_u64(in);
  std::vector<HashCode> codes;
  codes.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    HashCode c(l);
    for (auto& w : c.words_) w = io::read_u64(in);
    codes.push_back(std::move(c));
  }
  return codes;
}

}  // namespace mthash
