#pragma once

// Thin wrappers over ICU for the handful of Unicode operations the pipeline
// needs. All offsets exposed by the library are indices into a UTF-32 string
// (one index per scalar value); byte offsets never leave this header.

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <string>
#include <string_view>
#include <vector>

#include "rapidner/error.hpp"

namespace rapidner::unicode {

// Decodes UTF-8; ill-formed byte sequences are dropped.
inline std::u32string decode(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto length = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    if (c >= 0) out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

inline std::string encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : text) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

// Number of scalar values in a (well-formed) UTF-8 string.
inline std::size_t length(std::string_view utf8) { return decode(utf8).size(); }

inline const icu::Normalizer2& nfc_normalizer() {
  static const icu::Normalizer2* instance = [] {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("IcuError", u_errorName(status));
    return n;
  }();
  return *instance;
}

inline std::u32string nfc(std::u32string_view text) {
  bool ascii = true;
  for (char32_t c : text) {
    if (c >= 0x80) {
      ascii = false;
      break;
    }
  }
  if (ascii) return std::u32string(text);
  icu::UnicodeString u = icu::UnicodeString::fromUTF32(
      reinterpret_cast<const UChar32*>(text.data()),
      static_cast<int32_t>(text.size()));
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString normalized = nfc_normalizer().normalize(u, status);
  if (U_FAILURE(status)) throw Error("IcuError", u_errorName(status));
  std::u32string out(static_cast<std::size_t>(normalized.countChar32()), U'\0');
  status = U_ZERO_ERROR;
  normalized.toUTF32(reinterpret_cast<UChar32*>(out.data()),
                     static_cast<int32_t>(out.size()), status);
  return out;
}

inline std::string nfc(std::string_view utf8) { return encode(nfc(decode(utf8))); }

// Simple (1:1) case folding, so folded text keeps the original offsets.
inline char32_t fold(char32_t c) {
  if (c < 0x80) return (c >= U'A' && c <= U'Z') ? c + 32 : c;
  return static_cast<char32_t>(u_foldCase(static_cast<UChar32>(c), U_FOLD_CASE_DEFAULT));
}

inline std::u32string fold(std::u32string_view text) {
  std::u32string out(text);
  for (char32_t& c : out) c = fold(c);
  return out;
}

inline bool is_alphabetic(char32_t c) {
  if (c < 0x80) return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
  return u_hasBinaryProperty(static_cast<UChar32>(c), UCHAR_ALPHABETIC);
}

inline bool is_digit(char32_t c) {
  if (c < 0x80) return c >= U'0' && c <= U'9';
  return u_isdigit(static_cast<UChar32>(c));
}

inline bool is_alnum(char32_t c) { return is_alphabetic(c) || is_digit(c); }

inline bool is_mark(char32_t c) {
  if (c < 0x300) return false;
  auto t = u_charType(static_cast<UChar32>(c));
  return t == U_NON_SPACING_MARK || t == U_COMBINING_SPACING_MARK ||
         t == U_ENCLOSING_MARK;
}

inline bool is_space(char32_t c) {
  if (c < 0x80) return c == U' ' || (c >= U'\t' && c <= U'\r');
  return u_isUWhiteSpace(static_cast<UChar32>(c));
}

inline bool is_control(char32_t c) {
  return u_charType(static_cast<UChar32>(c)) == U_CONTROL_CHAR;
}

inline bool is_pictographic(char32_t c) {
  if (c < 0xA9) return false;
  return u_hasBinaryProperty(static_cast<UChar32>(c), UCHAR_EXTENDED_PICTOGRAPHIC);
}

inline bool is_punct(char32_t c) { return u_ispunct(static_cast<UChar32>(c)); }

inline bool is_upper(char32_t c) {
  if (c < 0x80) return c >= U'A' && c <= U'Z';
  return u_isupper(static_cast<UChar32>(c)) || u_istitle(static_cast<UChar32>(c));
}

inline bool is_word_joiner(char32_t c) {
  return c == U'\'' || c == U'-' || c == U'’';
}

// Per-position word-character mask. Letters, digits and combining marks that
// follow them are word characters; an apostrophe or hyphen is one only when
// both neighbours are letters or digits ("soy-milk's" is a single word).
inline std::vector<bool> word_mask(std::u32string_view text) {
  const std::size_t n = text.size();
  std::vector<bool> mask(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    char32_t c = text[i];
    if (is_alnum(c)) {
      mask[i] = true;
    } else if (is_mark(c) && i > 0 && mask[i - 1]) {
      mask[i] = true;
    } else if (is_word_joiner(c) && i > 0 && i + 1 < n &&
               is_alnum(text[i - 1]) && is_alnum(text[i + 1])) {
      mask[i] = true;
    }
  }
  return mask;
}

// A position is a boundary unless it falls strictly inside a run of word
// characters. Text edges are always boundaries.
inline bool is_boundary(const std::vector<bool>& mask, std::size_t pos) {
  if (pos == 0 || pos >= mask.size()) return true;
  return !(mask[pos - 1] && mask[pos]);
}

}  // namespace rapidner::unicode
