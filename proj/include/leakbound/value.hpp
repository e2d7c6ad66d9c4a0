#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leakbound/diag.hpp"
#include "leakbound/types.hpp"

namespace leakbound {

// Scalar runtime value. `raw` is the two's-complement bit pattern masked to
// the type width; helpers below give the signed/unsigned reading.
struct Value {
  TypePtr type;
  std::uint64_t raw = 0;
};

inline std::uint64_t width_mask(int bits) {
  return bits >= 64 ? ~0ULL : (1ULL << bits) - 1;
}

inline std::uint64_t mask_to(std::uint64_t x, int bits) { return x & width_mask(bits); }

inline std::int64_t sign_extend(std::uint64_t x, int bits) {
  if (bits >= 64) return static_cast<std::int64_t>(x);
  std::uint64_t m = 1ULL << (bits - 1);
  x &= width_mask(bits);
  return static_cast<std::int64_t>((x ^ m) - m);
}

inline Value make_value(TypePtr t, std::uint64_t raw) {
  return Value{t, mask_to(raw, t->width_bits)};
}

inline std::int64_t as_signed(const Value& v) {
  return sign_extend(v.raw, v.type->width_bits);
}

inline std::uint64_t as_unsigned(const Value& v) { return v.raw; }

inline bool is_signed_type(const TypePtr& t) { return t->kind == TypeKind::SignedInt; }

inline bool truthy(const Value& v) { return v.raw != 0; }

// A storage object: one variable instance. Everything, scalars included, is a
// little-endian byte array so that byte-wise builtins and whole-object
// comparison mean the same thing here and in the encoder. `extra` is the
// trailing pad region attached to observed output structs.
struct Object {
  TypePtr type;
  int extra = 0;
  std::vector<std::uint8_t> bytes;

  int size() const { return static_cast<int>(bytes.size()); }
};

inline Object make_object(TypePtr t, int extra = 0) {
  Object o;
  o.type = t;
  o.extra = extra;
  o.bytes.assign(static_cast<size_t>(t->size_bytes() + extra), 0);
  return o;
}

inline std::uint64_t read_raw(const std::vector<std::uint8_t>& bytes, int offset,
                              int width_bits) {
  int n = width_bits == 1 ? 1 : width_bits / 8;
  std::uint64_t x = 0;
  for (int i = n - 1; i >= 0; --i) x = (x << 8) | bytes[static_cast<size_t>(offset + i)];
  return mask_to(x, width_bits);
}

inline void write_raw(std::vector<std::uint8_t>& bytes, int offset, int width_bits,
                      std::uint64_t raw) {
  int n = width_bits == 1 ? 1 : width_bits / 8;
  raw = mask_to(raw, width_bits);
  for (int i = 0; i < n; ++i) {
    bytes[static_cast<size_t>(offset + i)] = static_cast<std::uint8_t>(raw & 0xff);
    raw >>= 8;
  }
}

inline Value read_scalar(const Object& o, int offset, const TypePtr& t) {
  return Value{t, read_raw(o.bytes, offset, t->width_bits)};
}

inline void write_scalar(Object& o, int offset, const Value& v) {
  write_raw(o.bytes, offset, v.type->width_bits, v.raw);
}

inline Object object_from_value(const Value& v) {
  Object o = make_object(v.type);
  write_scalar(o, 0, v);
  return o;
}

// Rendering in the trace style: decimal, then the bit pattern.
inline std::string value_str(const Value& v) {
  std::string dec = is_signed_type(v.type) ? std::to_string(as_signed(v))
                                           : std::to_string(as_unsigned(v));
  int w = v.type->width_bits;
  std::string bits(static_cast<size_t>(w), '0');
  for (int i = 0; i < w; ++i)
    if (v.raw >> (w - 1 - i) & 1) bits[static_cast<size_t>(i)] = '1';
  return dec + " (" + bits + ")";
}

inline std::string bytes_hex(const std::vector<std::uint8_t>& bytes, int offset, int len) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (int i = 0; i < len; ++i) {
    if (i) s += " ";
    std::uint8_t b = bytes[static_cast<size_t>(offset + i)];
    s += digits[b >> 4];
    s += digits[b & 0xf];
  }
  return s;
}

}  // namespace leakbound
