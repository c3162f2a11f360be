#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mthash {

/// l-bit code packed into 64-bit words: bit j is (y_j + 1) / 2, word j / 64,
/// position j % 64. Bits past l are zero.
class HashCode {
 public:
  HashCode() = default;
  explicit HashCode(std::size_t l) : words_((l + 63) / 64, 0), l_(l) {}

  static HashCode from_signs(std::span<const std::int8_t> signs);

  std::size_t l() const noexcept { return l_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool bit(std::size_t j) const { return (words_[j >> 6] >> (j & 63)) & 1u; }
  int sign(std::size_t j) const { return bit(j) ? 1 : -1; }
  void set(std::size_t j, bool value);

  bool operator==(const HashCode&) const = default;

 private:
  friend std::vector<HashCode> load_codes(const std::filesystem::path&);

  std::vector<std::uint64_t> words_;
  std::size_t l_ = 0;
};

/// popcount(a XOR b). Throws when the bit widths differ.
int hamming(const HashCode& a, const HashCode& b);

/// Codes file: u64 n, u64 l, then n * ceil(l/64) little-endian u64 words.
void save_codes(const std::filesystem::path& path, std::span<const HashCode> codes);
std::vector<HashCode> load_codes(const std::filesystem::path& path);

}  // namespace mthash
