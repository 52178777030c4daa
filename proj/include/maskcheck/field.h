#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maskcheck {

using Value = uint32_t;

constexpr int kMaxWidth = 16;

// Domain {0, ..., 2^width - 1} with the arithmetic shared by all modules.
class Field {
 public:
  explicit Field(int width);

  int width() const { return width_; }
  Value mask() const { return mask_; }
  uint64_t size() const { return uint64_t{1} << width_; }
  uint32_t poly() const { return poly_; }

  Value reduce(uint64_t v) const { return static_cast<Value>(v) & mask_; }
  Value gf_mul(Value a, Value b) const;
  Value shl(Value a, uint32_t n) const { return n >= 32 ? 0 : reduce(uint64_t{a} << n); }
  Value shr(Value a, uint32_t n) const { return n >= 32 ? 0 : a >> n; }

 private:
  int width_;
  Value mask_;
  uint32_t poly_;
};

// Irreducible reduction polynomial for GF(2^width), leading bit included.
uint32_t reduction_poly(int width);

// A bijective lookup table over the domain.
struct Table {
  std::string name;
  std::string source;  // "aes" or the file path it was read from
  std::vector<Value> values;
};

std::vector<Value> aes_sbox();
// Whitespace separated hex values, '#' starts a comment.
std::vector<Value> read_table_file(const std::string& path);
// Throws std::invalid_argument unless values is a permutation of the domain.
void check_bijective(const std::vector<Value>& values, const Field& field,
                     const std::string& name);

}  // namespace maskcheck
