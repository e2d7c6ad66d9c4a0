#pragma once

#include <string>
#include <vector>

#include "leakbound/types.hpp"

namespace leakbound {

enum class BuiltinKind { InputScalar, Memcmp, Memset, Memcpy, CopyToUser };

struct BuiltinSig {
  std::string name;
  BuiltinKind kind;
  TypePtr value_type;  // InputScalar: the produced type; others: unused
  std::string summary;
};

// input_long / input_ulong track the target's long width, so the table is a
// function of the arch.
inline std::vector<BuiltinSig> builtin_table(int arch_bits) {
  auto in = [](std::string n, TypePtr t, std::string s) {
    return BuiltinSig{std::move(n), BuiltinKind::InputScalar, std::move(t), std::move(s)};
  };
  std::vector<BuiltinSig> v = {
      in("input_bool", make_bool(), "fresh nondeterministic bool"),
      in("input_char", make_signed(8), "fresh nondeterministic char"),
      in("input_uchar", make_unsigned(8), "fresh nondeterministic unsigned char"),
      in("input_short", make_signed(16), "fresh nondeterministic short"),
      in("input_ushort", make_unsigned(16), "fresh nondeterministic unsigned short"),
      in("input_int", make_signed(32), "fresh nondeterministic int"),
      in("input_uint", make_unsigned(32), "fresh nondeterministic unsigned int"),
      in("input_long", make_signed(arch_bits), "fresh nondeterministic long (arch width)"),
      in("input_ulong", make_unsigned(arch_bits),
         "fresh nondeterministic unsigned long (arch width)"),
      in("input_longlong", make_signed(64), "fresh nondeterministic long long"),
      in("input_ulonglong", make_unsigned(64), "fresh nondeterministic unsigned long long"),
      {"memcmp", BuiltinKind::Memcmp, nullptr,
       "memcmp(a, b, n): 0 when the first n bytes of a and b are equal, -1 otherwise"},
      {"memset", BuiltinKind::Memset, nullptr,
       "memset(dst, c, n): fill n bytes of dst with the byte c"},
      {"memcpy", BuiltinKind::Memcpy, nullptr,
       "memcpy(dst, src, n): copy n bytes; dst and src must be distinct objects"},
      {"copy_to_user", BuiltinKind::CopyToUser, nullptr,
       "copy_to_user(dst, src, n): copy n bytes to the observed region dst, then append "
       "the trailing pad bytes a compiler would copy alongside; returns 0"},
  };
  return v;
}

inline bool is_builtin_name(const std::string& name) {
  static const std::vector<BuiltinSig> t = builtin_table(32);
  for (const auto& b : t)
    if (b.name == name) return true;
  return false;
}

inline const BuiltinSig* find_builtin(const std::string& name, int arch_bits) {
  thread_local std::vector<BuiltinSig> t;
  thread_local int cached_bits = 0;
  if (cached_bits != arch_bits) {
    t = builtin_table(arch_bits);
    cached_bits = arch_bits;
  }
  for (const auto& b : t)
    if (b.name == name) return &b;
  return nullptr;
}

}  // namespace leakbound
