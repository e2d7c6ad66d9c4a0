#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "leakbound/diag.hpp"

namespace leakbound {

enum class TypeKind { SignedInt, UnsignedInt, Bool, Array, Record };

struct TypeSpec;
using TypePtr = std::shared_ptr<const TypeSpec>;

struct Field {
  std::string name;
  TypePtr type;
};

// Exact bit-width types. Records use a packed layout: sizeof is the plain sum
// of the field sizes, with no interior alignment padding. Alignment padding is
// modelled explicitly (builtin copy_to_user appends the trailing pad bytes).
struct TypeSpec {
  TypeKind kind = TypeKind::SignedInt;
  int width_bits = 32;  // scalar kinds only; must be one of 1,8,16,32,64

  // Array
  TypePtr element;
  int length = 0;

  // Record
  std::string record_name;
  std::vector<Field> fields;

  bool is_scalar() const {
    return kind == TypeKind::SignedInt || kind == TypeKind::UnsignedInt ||
           kind == TypeKind::Bool;
  }
  bool is_signed() const { return kind == TypeKind::SignedInt; }
  bool is_bool() const { return kind == TypeKind::Bool; }
  bool is_record() const { return kind == TypeKind::Record; }
  bool is_array() const { return kind == TypeKind::Array; }

  // Packed byte size. Width-1 scalars occupy one byte as aggregate members,
  // but records/arrays of bool are rejected at typecheck anyway.
  int size_bytes() const {
    switch (kind) {
      case TypeKind::Bool:
        return 1;
      case TypeKind::SignedInt:
      case TypeKind::UnsignedInt:
        return width_bits < 8 ? 1 : width_bits / 8;
      case TypeKind::Array:
        return length * element->size_bytes();
      case TypeKind::Record: {
        int total = 0;
        for (const auto& f : fields) total += f.type->size_bytes();
        return total;
      }
    }
    return 0;
  }

  std::optional<int> field_offset(const std::string& name) const {
    int off = 0;
    for (const auto& f : fields) {
      if (f.name == name) return off;
      off += f.type->size_bytes();
    }
    return std::nullopt;
  }

  const Field* find_field(const std::string& name) const {
    for (const auto& f : fields)
      if (f.name == name) return &f;
    return nullptr;
  }
};

inline TypePtr make_signed(int width) {
  auto t = std::make_shared<TypeSpec>();
  t->kind = TypeKind::SignedInt;
  t->width_bits = width;
  return t;
}

inline TypePtr make_unsigned(int width) {
  auto t = std::make_shared<TypeSpec>();
  t->kind = TypeKind::UnsignedInt;
  t->width_bits = width;
  return t;
}

inline TypePtr make_bool() {
  auto t = std::make_shared<TypeSpec>();
  t->kind = TypeKind::Bool;
  t->width_bits = 1;
  return t;
}

inline TypePtr make_array(TypePtr elem, int length) {
  auto t = std::make_shared<TypeSpec>();
  t->kind = TypeKind::Array;
  t->element = std::move(elem);
  t->length = length;
  t->width_bits = 0;
  return t;
}

inline TypePtr make_record(std::string name, std::vector<Field> fields) {
  auto t = std::make_shared<TypeSpec>();
  t->kind = TypeKind::Record;
  t->record_name = std::move(name);
  t->fields = std::move(fields);
  t->width_bits = 0;
  return t;
}

inline bool type_equal(const TypeSpec& a, const TypeSpec& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case TypeKind::Bool:
      return true;
    case TypeKind::SignedInt:
    case TypeKind::UnsignedInt:
      return a.width_bits == b.width_bits;
    case TypeKind::Array:
      return a.length == b.length && type_equal(*a.element, *b.element);
    case TypeKind::Record:
      // Records are nominal; typecheck interns one TypeSpec per name.
      return a.record_name == b.record_name;
  }
  return false;
}

inline bool type_equal(const TypePtr& a, const TypePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return type_equal(*a, *b);
}

// Canonical surface spelling, used by the pretty-printer for synthesized
// casts and by diagnostics.
inline std::string type_name_str(const TypeSpec& t) {
  switch (t.kind) {
    case TypeKind::Bool:
      return "bool";
    case TypeKind::SignedInt:
      switch (t.width_bits) {
        case 8: return "char";
        case 16: return "short";
        case 32: return "int";
        case 64: return "long long";
        default: break;
      }
      return "int" + std::to_string(t.width_bits);
    case TypeKind::UnsignedInt:
      switch (t.width_bits) {
        case 8: return "unsigned char";
        case 16: return "unsigned short";
        case 32: return "unsigned int";
        case 64: return "unsigned long long";
        default: break;
      }
      return "uint" + std::to_string(t.width_bits);
    case TypeKind::Array:
      return type_name_str(*t.element) + "[" + std::to_string(t.length) + "]";
    case TypeKind::Record:
      return "struct " + t.record_name;
  }
  return "?";
}

// Trailing alignment padding appended when a block of `size` bytes is copied
// to user space: pad = align - (size % align), with a full-alignment pad
// collapsing to zero.
inline int padding_bytes(int size, int align) {
  if (size < 1) throw AnalysisError("padding_bytes: size must be >= 1");
  if (align != 4 && align != 8) throw AnalysisError("padding_bytes: align must be 4 or 8");
  int pad = align - (size % align);
  if (pad == align) pad = 0;
  return pad;
}

}  // namespace leakbound
